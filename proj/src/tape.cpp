// Copyright 2026 The TrajFlow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "trajflow/tape.hpp"

#include <cmath>
#include <utility>

#include "trajflow/errors.hpp"

namespace trajflow {

namespace {

double softplus_scalar(double x) {
  if (x > 30.0) return x;  // log1p(exp(x)) == x to double precision
  return std::log1p(std::exp(x));
}

}  // namespace

Var Tape::push(Matrix value, BackFn back) {
  Node node;
  node.value = std::move(value);
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_buffer(int id) {
  Node& n = nodes_[std::size_t(id)];
  if (!n.grad_live) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad_live = true;
  }
  return n.grad;
}

void Tape::check(Var v, const char* op) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw InvalidInput(std::string("Tape::") + op + ": bad handle");
  }
}

const Matrix& Tape::value(Var v) const {
  check(v, "value");
  return nodes_[std::size_t(v.id)].value;
}

const Matrix& Tape::grad(Var v) const {
  check(v, "grad");
  const Node& n = nodes_[std::size_t(v.id)];
  if (!n.grad_live) {
    throw InvalidInput("Tape::grad: node has no gradient; run backward()");
  }
  return n.grad;
}

Var Tape::constant(Matrix m) { return push(std::move(m), nullptr); }

Var Tape::zeros(Eigen::Index rows, Eigen::Index cols) {
  return push(Matrix::Zero(rows, cols), nullptr);
}

Var Tape::param(ParamStore& store, const std::string& name) {
  ParamTensor& p = store.at(name);
  Var v = push(p.value, nullptr);
  nodes_.back().bound = &p;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  check(a, "matmul");
  check(b, "matmul");
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (A.cols() != B.rows()) {
    throw ShapeError("Tape::matmul: inner dimensions disagree");
  }
  const int ia = a.id, ib = b.id;
  return push(A * B, [ia, ib](Tape& t, const Matrix& g) {
    t.grad_buffer(ia) += g * t.val(ib).transpose();
    t.grad_buffer(ib) += t.val(ia).transpose() * g;
  });
}

Var Tape::add(Var a, Var b) {
  check(a, "add");
  check(b, "add");
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw ShapeError("Tape::add: shapes disagree");
  }
  const int ia = a.id, ib = b.id;
  return push(A + B, [ia, ib](Tape& t, const Matrix& g) {
    t.grad_buffer(ia) += g;
    t.grad_buffer(ib) += g;
  });
}

Var Tape::sub(Var a, Var b) {
  check(a, "sub");
  check(b, "sub");
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw ShapeError("Tape::sub: shapes disagree");
  }
  const int ia = a.id, ib = b.id;
  return push(A - B, [ia, ib](Tape& t, const Matrix& g) {
    t.grad_buffer(ia) += g;
    t.grad_buffer(ib) -= g;
  });
}

Var Tape::mul(Var a, Var b) {
  check(a, "mul");
  check(b, "mul");
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw ShapeError("Tape::mul: shapes disagree");
  }
  const int ia = a.id, ib = b.id;
  return push(A.cwiseProduct(B), [ia, ib](Tape& t, const Matrix& g) {
    t.grad_buffer(ia) += g.cwiseProduct(t.val(ib));
    t.grad_buffer(ib) += g.cwiseProduct(t.val(ia));
  });
}

Var Tape::div(Var a, Var b) {
  check(a, "div");
  check(b, "div");
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw ShapeError("Tape::div: shapes disagree");
  }
  const int ia = a.id, ib = b.id;
  return push(A.cwiseQuotient(B), [ia, ib](Tape& t, const Matrix& g) {
    const Matrix& bv = t.val(ib);
    t.grad_buffer(ia) += g.cwiseQuotient(bv);
    t.grad_buffer(ib) -=
        g.cwiseProduct(t.val(ia)).cwiseQuotient(bv.cwiseProduct(bv));
  });
}

Var Tape::add_rowwise(Var a, Var bias) {
  check(a, "add_rowwise");
  check(bias, "add_rowwise");
  const Matrix& A = val(a.id);
  const Matrix& B = val(bias.id);
  if (B.rows() != 1 || B.cols() != A.cols()) {
    throw ShapeError("Tape::add_rowwise: bias must be 1 x cols(a)");
  }
  const int ia = a.id, ib = bias.id;
  Matrix out = A;
  out.rowwise() += B.row(0);
  return push(std::move(out), [ia, ib](Tape& t, const Matrix& g) {
    t.grad_buffer(ia) += g;
    t.grad_buffer(ib) += g.colwise().sum();
  });
}

Var Tape::scale(Var a, double s) {
  check(a, "scale");
  const int ia = a.id;
  return push(val(a.id) * s, [ia, s](Tape& t, const Matrix& g) {
    t.grad_buffer(ia) += g * s;
  });
}

Var Tape::add_const(Var a, double c) {
  check(a, "add_const");
  const int ia = a.id;
  return push(val(a.id).array() + c, [ia](Tape& t, const Matrix& g) {
    t.grad_buffer(ia) += g;
  });
}

Var Tape::sigmoid(Var a) {
  check(a, "sigmoid");
  Matrix out = val(a.id).unaryExpr(
      [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  const int ia = a.id;
  Var v = push(std::move(out), nullptr);
  const int iv = v.id;
  nodes_.back().back = [ia, iv](Tape& t, const Matrix& g) {
    const Matrix& y = t.val(iv);
    t.grad_buffer(ia) +=
        g.cwiseProduct(y.cwiseProduct(Matrix::Ones(y.rows(), y.cols()) - y));
  };
  return v;
}

Var Tape::tanh(Var a) {
  check(a, "tanh");
  Matrix out = val(a.id).array().tanh();
  const int ia = a.id;
  Var v = push(std::move(out), nullptr);
  const int iv = v.id;
  nodes_.back().back = [ia, iv](Tape& t, const Matrix& g) {
    const Matrix& y = t.val(iv);
    t.grad_buffer(ia) += (g.array() * (1.0 - y.array().square())).matrix();
  };
  return v;
}

Var Tape::softplus(Var a) {
  check(a, "softplus");
  Matrix out = val(a.id).unaryExpr(&softplus_scalar);
  const int ia = a.id;
  return push(std::move(out), [ia](Tape& t, const Matrix& g) {
    const Matrix sig = t.val(ia).unaryExpr(
        [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    t.grad_buffer(ia) += g.cwiseProduct(sig);
  });
}

Var Tape::exp(Var a) {
  check(a, "exp");
  Matrix out = val(a.id).array().exp();
  const int ia = a.id;
  Var v = push(std::move(out), nullptr);
  const int iv = v.id;
  nodes_.back().back = [ia, iv](Tape& t, const Matrix& g) {
    t.grad_buffer(ia) += g.cwiseProduct(t.val(iv));
  };
  return v;
}

Var Tape::log(Var a) {
  check(a, "log");
  Matrix out = val(a.id).array().log();
  const int ia = a.id;
  return push(std::move(out), [ia](Tape& t, const Matrix& g) {
    t.grad_buffer(ia) += g.cwiseQuotient(t.val(ia));
  });
}

Var Tape::square(Var a) {
  check(a, "square");
  Matrix out = val(a.id).array().square();
  const int ia = a.id;
  return push(std::move(out), [ia](Tape& t, const Matrix& g) {
    t.grad_buffer(ia) += 2.0 * g.cwiseProduct(t.val(ia));
  });
}

Var Tape::sum(Var a) {
  check(a, "sum");
  Matrix out(1, 1);
  out(0, 0) = val(a.id).sum();
  const int ia = a.id;
  return push(std::move(out), [ia](Tape& t, const Matrix& g) {
    t.grad_buffer(ia).array() += g(0, 0);
  });
}

Var Tape::mean(Var a) {
  check(a, "mean");
  const double inv = 1.0 / static_cast<double>(val(a.id).size());
  Matrix out(1, 1);
  out(0, 0) = val(a.id).sum() * inv;
  const int ia = a.id;
  return push(std::move(out), [ia, inv](Tape& t, const Matrix& g) {
    t.grad_buffer(ia).array() += g(0, 0) * inv;
  });
}

Var Tape::rowsum(Var a) {
  check(a, "rowsum");
  Matrix out = val(a.id).rowwise().sum();
  const int ia = a.id;
  return push(std::move(out), [ia](Tape& t, const Matrix& g) {
    t.grad_buffer(ia) +=
        g * Matrix::Ones(1, t.val(ia).cols());
  });
}

Var Tape::softmax_rows(Var a) {
  check(a, "softmax_rows");
  const Matrix& A = val(a.id);
  Matrix out(A.rows(), A.cols());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const double m = A.row(r).maxCoeff();
    Eigen::ArrayXd e = (A.row(r).array() - m).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  const int ia = a.id;
  Var v = push(std::move(out), nullptr);
  const int iv = v.id;
  nodes_.back().back = [ia, iv](Tape& t, const Matrix& g) {
    const Matrix& y = t.val(iv);
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Matrix d = g;
    d.colwise() -= dot;
    t.grad_buffer(ia) += d.cwiseProduct(y);
  };
  return v;
}

Var Tape::cumsum_cols(Var a) {
  check(a, "cumsum_cols");
  const Matrix& A = val(a.id);
  Matrix out = A;
  for (Eigen::Index c = 1; c < out.cols(); ++c) {
    out.col(c) += out.col(c - 1);
  }
  const int ia = a.id;
  return push(std::move(out), [ia](Tape& t, const Matrix& g) {
    Matrix d = g;
    for (Eigen::Index c = d.cols() - 2; c >= 0; --c) {
      d.col(c) += d.col(c + 1);
    }
    t.grad_buffer(ia) += d;
  });
}

Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index len) {
  check(a, "slice_cols");
  const Matrix& A = val(a.id);
  if (start < 0 || len < 0 || start + len > A.cols()) {
    throw ShapeError("Tape::slice_cols: range out of bounds");
  }
  const int ia = a.id;
  return push(A.middleCols(start, len),
              [ia, start, len](Tape& t, const Matrix& g) {
                t.grad_buffer(ia).middleCols(start, len) += g;
              });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidInput("Tape::concat_cols: empty input");
  Eigen::Index rows = 0, cols = 0;
  for (Var p : parts) {
    check(p, "concat_cols");
    const Matrix& m = val(p.id);
    if (rows == 0) rows = m.rows();
    if (m.rows() != rows) {
      throw ShapeError("Tape::concat_cols: row counts disagree");
    }
    cols += m.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  std::vector<Eigen::Index> widths;
  for (Var p : parts) {
    const Matrix& m = val(p.id);
    out.middleCols(at, m.cols()) = m;
    ids.push_back(p.id);
    offsets.push_back(at);
    widths.push_back(m.cols());
    at += m.cols();
  }
  return push(std::move(out),
              [ids, offsets, widths](Tape& t, const Matrix& g) {
                for (std::size_t k = 0; k < ids.size(); ++k) {
                  t.grad_buffer(ids[k]) += g.middleCols(offsets[k], widths[k]);
                }
              });
}

Var Tape::permute_cols(Var a, const std::vector<int>& perm) {
  check(a, "permute_cols");
  const Matrix& A = val(a.id);
  if (static_cast<Eigen::Index>(perm.size()) != A.cols()) {
    throw ShapeError("Tape::permute_cols: permutation size mismatch");
  }
  Matrix out(A.rows(), A.cols());
  for (Eigen::Index c = 0; c < A.cols(); ++c) {
    out.col(c) = A.col(perm[std::size_t(c)]);
  }
  const int ia = a.id;
  return push(std::move(out), [ia, perm](Tape& t, const Matrix& g) {
    Matrix& d = t.grad_buffer(ia);
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      d.col(perm[std::size_t(c)]) += g.col(c);
    }
  });
}

Var Tape::gather_cols(Var a, const std::vector<int>& idx) {
  check(a, "gather_cols");
  const Matrix& A = val(a.id);
  if (static_cast<Eigen::Index>(idx.size()) != A.rows()) {
    throw ShapeError("Tape::gather_cols: one index per row required");
  }
  Matrix out(A.rows(), 1);
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const int c = idx[std::size_t(r)];
    if (c < 0 || c >= A.cols()) {
      throw ShapeError("Tape::gather_cols: index out of range");
    }
    out(r, 0) = A(r, c);
  }
  const int ia = a.id;
  return push(std::move(out), [ia, idx](Tape& t, const Matrix& g) {
    Matrix& d = t.grad_buffer(ia);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      d(r, idx[std::size_t(r)]) += g(r, 0);
    }
  });
}

void Tape::backward(Var loss) {
  check(loss, "backward");
  const Node& top = nodes_[std::size_t(loss.id)];
  if (top.value.rows() != 1 || top.value.cols() != 1) {
    throw ShapeError("Tape::backward: loss must be 1 x 1");
  }
  if (!std::isfinite(top.value(0, 0))) {
    throw NumericalError("Tape::backward: loss is not finite");
  }
  grad_buffer(loss.id)(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[std::size_t(i)];
    if (!n.grad_live) continue;
    if (n.back) n.back(*this, n.grad);
    if (n.bound != nullptr) n.bound->grad += n.grad;
  }
}

}  // namespace trajflow
