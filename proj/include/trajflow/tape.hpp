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

#ifndef TRAJFLOW_TAPE_HPP_
#define TRAJFLOW_TAPE_HPP_

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "trajflow/params.hpp"

namespace trajflow {

// Handle to a node on a Tape. Only valid for the tape that produced it.
struct Var {
  int id = -1;
};

// Reverse-mode automatic differentiation over whole matrices, one graph
// node per matrix op. Values are computed eagerly; backward() replays the
// recorded closures in reverse and accumulates parameter gradients into
// the bound ParamStore entries.
//
// Convention: rows index batch samples, columns index features. A tape is
// built per training step and then discarded.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf nodes.
  Var constant(Matrix m);
  Var zeros(Eigen::Index rows, Eigen::Index cols);
  Var param(ParamStore& store, const std::string& name);

  // Linear algebra.
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var div(Var a, Var b);  // elementwise
  // a is N x C, bias is 1 x C, added to each row.
  Var add_rowwise(Var a, Var bias);
  Var scale(Var a, double s);
  Var add_const(Var a, double c);

  // Elementwise nonlinearities.
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var softplus(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var square(Var a);

  // Reductions and shape ops.
  Var sum(Var a);           // 1 x 1
  Var mean(Var a);          // 1 x 1
  Var rowsum(Var a);        // N x 1
  Var softmax_rows(Var a);  // rowwise softmax
  Var cumsum_cols(Var a);   // running sum along each row
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index len);
  Var concat_cols(const std::vector<Var>& parts);
  Var permute_cols(Var a, const std::vector<int>& perm);
  // One column index per row: out(i, 0) = a(i, idx[i]).
  Var gather_cols(Var a, const std::vector<int>& idx);

  // References stay valid as new nodes are recorded (deque storage).
  const Matrix& value(Var v) const;
  // Gradient of the last backward() target w.r.t. node v.
  const Matrix& grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and sweeps the graph in reverse. `loss` must
  // be 1 x 1; throws NumericalError when its value is not finite.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  // The closure receives the tape and this node's accumulated gradient
  // and adds the chained contributions into the parents' buffers.
  using BackFn = std::function<void(Tape&, const Matrix&)>;

  struct Node {
    Matrix value;
    Matrix grad;
    bool grad_live = false;
    BackFn back;                   // empty for leaves
    ParamTensor* bound = nullptr;  // set for param leaves
  };

  Var push(Matrix value, BackFn back);
  Matrix& grad_buffer(int id);
  const Matrix& val(int id) const { return nodes_[std::size_t(id)].value; }
  void check(Var v, const char* op) const;

  std::deque<Node> nodes_;
};

}  // namespace trajflow

#endif  // TRAJFLOW_TAPE_HPP_
