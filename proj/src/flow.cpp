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

#include "trajflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trajflow/errors.hpp"
#include "trajflow/nn.hpp"

namespace trajflow {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

bool is_identity(const std::vector<int>& p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != static_cast<int>(i)) return false;
  }
  return true;
}

std::vector<int> inverse_perm(const std::vector<int>& p) {
  std::vector<int> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    inv[std::size_t(p[i])] = static_cast<int>(i);
  }
  return inv;
}

Eigen::RowVectorXd tile_per_step(const Eigen::RowVectorXd& pair, int steps) {
  Eigen::RowVectorXd out(2 * steps);
  for (int k = 0; k < steps; ++k) {
    out[2 * k] = pair[0];
    out[2 * k + 1] = pair[1];
  }
  return out;
}

}  // namespace

void FlowConfig::validate() const {
  if (data_dim < 2) throw ConfigError("flow: data_dim must be at least 2");
  if (t_past <= 0) throw ConfigError("flow: t_past must be positive");
  if (context_dim <= 0 || ctx_gru_layers <= 0) {
    throw ConfigError("flow: context sizes must be positive");
  }
  if (n_layers <= 0) throw ConfigError("flow: n_layers must be positive");
  if (num_bins <= 0) throw ConfigError("flow: num_bins must be positive");
  if (!(tail_bound > 0.0)) {
    throw ConfigError("flow: tail_bound must be positive");
  }
  if (cond_hidden <= 0) {
    throw ConfigError("flow: cond_hidden must be positive");
  }
  if (past_mode != "displacements" && past_mode != "positions") {
    throw ConfigError(
        "flow: past_mode must be \"displacements\" or \"positions\"");
  }
}

Json FlowConfig::to_json() const {
  return Json{{"data_dim", data_dim},
              {"t_past", t_past},
              {"context_dim", context_dim},
              {"ctx_gru_layers", ctx_gru_layers},
              {"n_layers", n_layers},
              {"num_bins", num_bins},
              {"tail_bound", tail_bound},
              {"cond_hidden", cond_hidden},
              {"past_mode", past_mode}};
}

FlowConfig FlowConfig::from_json(const Json& doc) {
  FlowConfig cfg;
  cfg.data_dim = doc.value("data_dim", cfg.data_dim);
  cfg.t_past = doc.value("t_past", cfg.t_past);
  cfg.context_dim = doc.value("context_dim", cfg.context_dim);
  cfg.ctx_gru_layers = doc.value("ctx_gru_layers", cfg.ctx_gru_layers);
  cfg.n_layers = doc.value("n_layers", cfg.n_layers);
  cfg.num_bins = doc.value("num_bins", cfg.num_bins);
  cfg.tail_bound = doc.value("tail_bound", cfg.tail_bound);
  cfg.cond_hidden = doc.value("cond_hidden", cfg.cond_hidden);
  cfg.past_mode = doc.value("past_mode", cfg.past_mode);
  cfg.validate();
  return cfg;
}

void FlowNorms::ensure_sized(int data_dim) {
  if (lat_mean.size() != data_dim) {
    lat_mean = Eigen::RowVectorXd::Zero(data_dim);
    lat_std = Eigen::RowVectorXd::Ones(data_dim);
  }
}

Json FlowNorms::to_json() const {
  auto row = [](const Eigen::RowVectorXd& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
  };
  return Json{{"ctx_mean", row(ctx_mean)},
              {"ctx_std", row(ctx_std)},
              {"lat_mean", row(lat_mean)},
              {"lat_std", row(lat_std)}};
}

FlowNorms FlowNorms::from_json(const Json& doc) {
  auto row = [](const Json& arr) {
    Eigen::RowVectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = arr.at(i).get<double>();
    }
    return v;
  };
  FlowNorms norms;
  norms.ctx_mean = row(doc.at("ctx_mean"));
  norms.ctx_std = row(doc.at("ctx_std"));
  norms.lat_mean = row(doc.at("lat_mean"));
  norms.lat_std = row(doc.at("lat_std"));
  return norms;
}

ConditionalFlow::ConditionalFlow(FlowConfig cfg, std::uint64_t seed)
    : cfg_(cfg),
      ctx_gru_(GruConfig{2, cfg.context_dim, cfg.ctx_gru_layers},
               "flow.ctx_gru") {
  cfg_.validate();
  for (int i = 0; i < cfg_.n_layers; ++i) {
    Rng rng = Rng::substream(seed, "flow.perm", static_cast<std::uint64_t>(i));
    std::vector<int> p = rng.permutation(cfg_.data_dim);
    while (is_identity(p)) p = rng.permutation(cfg_.data_dim);
    perms_.push_back(std::move(p));
  }
}

void ConditionalFlow::create_params(ParamStore& store, Rng& rng) const {
  ctx_gru_.create_params(store, rng);
  const int in = cfg_.identity_dims() + cfg_.context_dim;
  const int out = cfg_.transformed_dims() * cfg_.spline().param_count();
  for (int i = 0; i < cfg_.n_layers; ++i) {
    const std::string p = "flow.c" + std::to_string(i);
    create_linear(store, p + ".fc1", in, cfg_.cond_hidden, rng);
    create_linear(store, p + ".fc2", cfg_.cond_hidden, out, rng);
    // Zero output layer: every coupling starts as the identity map.
    store.at(p + ".fc2.w").value.setZero();
    store.at(p + ".fc2.b").value.setZero();
  }
}

Matrix ConditionalFlow::context(const ParamStore& store,
                                const Matrix& past_rows,
                                const FlowNorms& norms) const {
  if (past_rows.cols() != 2 * cfg_.t_past) {
    throw ShapeError("flow: past rows must have 2 * t_past columns");
  }
  const Eigen::RowVectorXd mean = tile_per_step(norms.ctx_mean, cfg_.t_past);
  const Eigen::RowVectorXd stdev = tile_per_step(norms.ctx_std, cfg_.t_past);
  Matrix rows = past_rows;
  rows.rowwise() -= mean;
  rows.array().rowwise() /= stdev.array();

  std::vector<Matrix> state = ctx_gru_.make_state(rows.rows());
  Matrix last;
  for (int k = 0; k < cfg_.t_past; ++k) {
    last = ctx_gru_.step(store, rows.middleCols(2 * k, 2), state);
  }
  return last;
}

Var ConditionalFlow::context(Tape& tape, ParamStore& store, Var past_rows,
                             const FlowNorms& norms) const {
  const Matrix& rows = tape.value(past_rows);
  if (rows.cols() != 2 * cfg_.t_past) {
    throw ShapeError("flow: past rows must have 2 * t_past columns");
  }
  const Eigen::RowVectorXd mean = tile_per_step(norms.ctx_mean, cfg_.t_past);
  const Eigen::RowVectorXd stdev = tile_per_step(norms.ctx_std, cfg_.t_past);
  Matrix inv_std =
      stdev.cwiseInverse().replicate(rows.rows(), 1);
  const Var centered =
      tape.add_rowwise(past_rows, tape.constant(-mean));
  const Var standardized = tape.mul(centered, tape.constant(inv_std));

  std::vector<Var> state = ctx_gru_.make_state(tape, rows.rows());
  Var last{};
  for (int k = 0; k < cfg_.t_past; ++k) {
    last = ctx_gru_.step(tape, store,
                         tape.slice_cols(standardized, 2 * k, 2), state);
  }
  return last;
}

Matrix ConditionalFlow::conditioner(const ParamStore& store, int layer,
                                    const Matrix& identity_half,
                                    const Matrix& ctx) const {
  const std::string p = "flow.c" + std::to_string(layer);
  Matrix joint(identity_half.rows(), identity_half.cols() + ctx.cols());
  joint << identity_half, ctx;
  const Matrix h = linear(store, p + ".fc1", joint).array().tanh();
  return linear(store, p + ".fc2", h);
}

Var ConditionalFlow::conditioner(Tape& tape, ParamStore& store, int layer,
                                 Var identity_half, Var ctx) const {
  const std::string p = "flow.c" + std::to_string(layer);
  const Var joint = tape.concat_cols({identity_half, ctx});
  const Var h = tape.tanh(linear(tape, store, p + ".fc1", joint));
  return linear(tape, store, p + ".fc2", h);
}

// Applies one monotone spline elementwise to column x. raw_block carries
// the 3K-1 raw parameters per row. Rows outside the spline box pass
// through the identity with zero log-derivative. Bin membership is a
// function of forward values only, so it is computed eagerly and enters
// the graph as gather indices.
Var ConditionalFlow::spline_forward_column(Tape& tape, Var x, Var raw_block,
                                           Var* logdet) const {
  const RqsConfig scfg = cfg_.spline();
  const int k = scfg.num_bins;
  const double bound = scfg.tail_bound;
  const Eigen::Index n = tape.value(x).rows();

  auto positions = [&](Var raw, double min_frac) {
    const Var sm = tape.softmax_rows(raw);
    const Var frac =
        tape.add_const(tape.scale(sm, 1.0 - min_frac * k), min_frac);
    const Var cum = tape.cumsum_cols(frac);
    const Var inner = tape.add_const(
        tape.scale(tape.slice_cols(cum, 0, k - 1), 2.0 * bound), -bound);
    const Var lo = tape.constant(Matrix::Constant(n, 1, -bound));
    const Var hi = tape.constant(Matrix::Constant(n, 1, bound));
    return tape.concat_cols({lo, inner, hi});  // N x (K+1)
  };

  const Var xs = positions(tape.slice_cols(raw_block, 0, k),
                           scfg.min_bin_width);
  const Var ys = positions(tape.slice_cols(raw_block, k, k),
                           scfg.min_bin_height);

  const double shift = rqs_derivative_shift(scfg.min_derivative);
  const Var d_inner = tape.add_const(
      tape.softplus(
          tape.add_const(tape.slice_cols(raw_block, 2 * k, k - 1), shift)),
      scfg.min_derivative);
  const Var ones_col = tape.constant(Matrix::Ones(n, 1));
  const Var ds = tape.concat_cols({ones_col, d_inner, ones_col});

  // Eager bin search + in/out masks. Out-of-box rows are masked to the
  // identity below, but their lanes still evaluate the spline; searching
  // with the zeroed stand-in keeps those lanes finite (0 is always
  // interior), otherwise NaNs would leak through the 0 * NaN mask.
  const Matrix& xv = tape.value(x);
  const Matrix& xsv = tape.value(xs);
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  std::vector<int> idx1(static_cast<std::size_t>(n), 1);
  Matrix mask_in(n, 1);
  for (Eigen::Index r = 0; r < n; ++r) {
    const bool inside = xv(r, 0) >= -bound && xv(r, 0) <= bound;
    mask_in(r, 0) = inside ? 1.0 : 0.0;
    const double v = inside ? xv(r, 0) : 0.0;
    Eigen::Index b = 0;
    for (Eigen::Index c = 1; c < k; ++c) {
      if (v >= xsv(r, c)) b = c;
    }
    idx[std::size_t(r)] = static_cast<int>(b);
    idx1[std::size_t(r)] = static_cast<int>(b) + 1;
  }
  const Var vmask_in = tape.constant(mask_in);
  const Var vmask_out = tape.constant(Matrix::Ones(n, 1) - mask_in);

  // Zero out-of-box rows before computing xi so every lane stays finite.
  const Var x_safe = tape.mul(x, vmask_in);

  const Var xk = tape.gather_cols(xs, idx);
  const Var xk1 = tape.gather_cols(xs, idx1);
  const Var yk = tape.gather_cols(ys, idx);
  const Var yk1 = tape.gather_cols(ys, idx1);
  const Var dk = tape.gather_cols(ds, idx);
  const Var dk1 = tape.gather_cols(ds, idx1);

  const Var w = tape.sub(xk1, xk);
  const Var h = tape.sub(yk1, yk);
  const Var s = tape.div(h, w);
  const Var xi = tape.div(tape.sub(x_safe, xk), w);
  const Var omxi = tape.add_const(tape.scale(xi, -1.0), 1.0);
  const Var ximix = tape.mul(xi, omxi);

  const Var coef = tape.add(tape.add(dk1, dk), tape.scale(s, -2.0));
  const Var denom = tape.add(s, tape.mul(coef, ximix));
  const Var numer =
      tape.mul(h, tape.add(tape.mul(s, tape.square(xi)),
                           tape.mul(dk, ximix)));
  const Var y_spline = tape.add(yk, tape.div(numer, denom));

  const Var deriv_numer = tape.mul(
      tape.square(s),
      tape.add(tape.add(tape.mul(dk1, tape.square(xi)),
                        tape.scale(tape.mul(s, ximix), 2.0)),
               tape.mul(dk, tape.square(omxi))));
  const Var ld_col =
      tape.sub(tape.log(deriv_numer), tape.scale(tape.log(denom), 2.0));

  *logdet = tape.mul(ld_col, vmask_in);
  return tape.add(tape.mul(y_spline, vmask_in), tape.mul(x, vmask_out));
}

std::pair<Var, Var> ConditionalFlow::forward(Tape& tape, ParamStore& store,
                                             Var y, Var ctx,
                                             const FlowNorms& norms) const {
  const Matrix& yv = tape.value(y);
  if (yv.cols() != cfg_.data_dim) {
    throw ShapeError("flow: data rows must have data_dim columns");
  }
  if (tape.value(ctx).rows() != yv.rows() ||
      tape.value(ctx).cols() != cfg_.context_dim) {
    throw ShapeError("flow: context shape mismatch");
  }
  FlowNorms sized = norms;
  sized.ensure_sized(cfg_.data_dim);
  const Eigen::Index n = yv.rows();

  // Input standardization affine; its log-determinant is constant.
  const Var centered = tape.add_rowwise(
      y, tape.constant(-sized.lat_mean));
  const Var cur0 = tape.mul(
      centered,
      tape.constant(sized.lat_std.cwiseInverse().replicate(n, 1)));
  double std_logdet = 0.0;
  for (Eigen::Index i = 0; i < sized.lat_std.size(); ++i) {
    std_logdet -= std::log(sized.lat_std[i]);
  }

  Var cur = cur0;
  Var logdet = tape.constant(Matrix::Constant(n, 1, std_logdet));
  const int id_dims = cfg_.identity_dims();
  const int tr_dims = cfg_.transformed_dims();
  const int pc = cfg_.spline().param_count();

  for (int layer = 0; layer < cfg_.n_layers; ++layer) {
    const Var id_half = tape.slice_cols(cur, 0, id_dims);
    const Var raw = conditioner(tape, store, layer, id_half, ctx);
    std::vector<Var> cols{id_half};
    for (int d = 0; d < tr_dims; ++d) {
      const Var xcol = tape.slice_cols(cur, id_dims + d, 1);
      const Var block = tape.slice_cols(raw, d * pc, pc);
      Var ld{};
      cols.push_back(spline_forward_column(tape, xcol, block, &ld));
      logdet = tape.add(logdet, ld);
    }
    cur = tape.permute_cols(tape.concat_cols(cols),
                            perms_[std::size_t(layer)]);
  }
  return {cur, logdet};
}

Var ConditionalFlow::log_prob(Tape& tape, ParamStore& store, Var y, Var ctx,
                              const FlowNorms& norms) const {
  const auto [z, logdet] = forward(tape, store, y, ctx, norms);
  const Var base = tape.add_const(
      tape.scale(tape.rowsum(tape.square(z)), -0.5),
      -0.5 * kLog2Pi * cfg_.data_dim);
  return tape.add(base, logdet);
}

Eigen::VectorXd ConditionalFlow::log_prob(const ParamStore& store,
                                          const Matrix& y, const Matrix& ctx,
                                          const FlowNorms& norms) const {
  if (y.cols() != cfg_.data_dim) {
    throw ShapeError("flow: data rows must have data_dim columns");
  }
  if (ctx.rows() != y.rows() || ctx.cols() != cfg_.context_dim) {
    throw ShapeError("flow: context shape mismatch");
  }
  FlowNorms sized = norms;
  sized.ensure_sized(cfg_.data_dim);
  const Eigen::Index n = y.rows();
  const RqsConfig scfg = cfg_.spline();
  const int id_dims = cfg_.identity_dims();
  const int tr_dims = cfg_.transformed_dims();
  const int pc = scfg.param_count();

  Matrix cur = y;
  cur.rowwise() -= sized.lat_mean;
  cur.array().rowwise() /= sized.lat_std.array();

  Eigen::VectorXd logdet = Eigen::VectorXd::Zero(n);
  logdet.array() -= sized.lat_std.array().log().sum();

  for (int layer = 0; layer < cfg_.n_layers; ++layer) {
    const Matrix id_half = cur.leftCols(id_dims);
    const Matrix raw = conditioner(store, layer, id_half, ctx);
    Matrix next(n, cfg_.data_dim);
    next.leftCols(id_dims) = id_half;
    Eigen::RowVectorXd raw_row(pc);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (int d = 0; d < tr_dims; ++d) {
        raw_row = raw.row(r).segment(d * pc, pc);
        const RqsKnots knots = decode_rqs_params(
            std::span<const double>(raw_row.data(), std::size_t(pc)), scfg);
        const RqsEval e = rqs_forward(knots, cur(r, id_dims + d));
        next(r, id_dims + d) = e.y;
        logdet[r] += e.log_deriv;
      }
    }
    const std::vector<int>& p = perms_[std::size_t(layer)];
    for (int c = 0; c < cfg_.data_dim; ++c) {
      cur.col(c) = next.col(p[std::size_t(c)]);
    }
  }

  Eigen::VectorXd lp =
      -0.5 * cur.array().square().rowwise().sum() -
      0.5 * kLog2Pi * cfg_.data_dim;
  return lp + logdet;
}

Matrix ConditionalFlow::inverse(const ParamStore& store, const Matrix& z,
                                const Matrix& ctx,
                                const FlowNorms& norms) const {
  if (ctx.cols() != cfg_.context_dim || z.rows() != ctx.rows() ||
      z.cols() != cfg_.data_dim) {
    throw ShapeError("flow: context shape mismatch");
  }
  FlowNorms sized = norms;
  sized.ensure_sized(cfg_.data_dim);
  const Eigen::Index n = ctx.rows();
  const RqsConfig scfg = cfg_.spline();
  const int id_dims = cfg_.identity_dims();
  const int tr_dims = cfg_.transformed_dims();
  const int pc = scfg.param_count();

  Matrix cur = z;

  for (int layer = cfg_.n_layers - 1; layer >= 0; --layer) {
    const std::vector<int>& inv = inverse_perm(perms_[std::size_t(layer)]);
    Matrix unperm(n, cfg_.data_dim);
    for (int c = 0; c < cfg_.data_dim; ++c) {
      unperm.col(c) = cur.col(inv[std::size_t(c)]);
    }
    const Matrix id_half = unperm.leftCols(id_dims);
    const Matrix raw = conditioner(store, layer, id_half, ctx);
    Eigen::RowVectorXd raw_row(pc);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (int d = 0; d < tr_dims; ++d) {
        raw_row = raw.row(r).segment(d * pc, pc);
        const RqsKnots knots = decode_rqs_params(
            std::span<const double>(raw_row.data(), std::size_t(pc)), scfg);
        unperm(r, id_dims + d) =
            rqs_inverse(knots, unperm(r, id_dims + d)).y;
      }
    }
    cur = unperm;
  }

  cur.array().rowwise() *= sized.lat_std.array();
  cur.rowwise() += sized.lat_mean;
  return cur;
}

Matrix ConditionalFlow::sample(const ParamStore& store, const Matrix& ctx,
                               const FlowNorms& norms, Rng& rng) const {
  Matrix z(ctx.rows(), cfg_.data_dim);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (int c = 0; c < cfg_.data_dim; ++c) z(r, c) = rng.normal();
  }
  return inverse(store, z, ctx, norms);
}

Matrix past_context_rows(std::span<const Situation> data,
                         const FlowConfig& cfg) {
  Matrix rows(static_cast<Eigen::Index>(data.size()), 2 * cfg.t_past);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& pts = data[i].past.points;
    if (static_cast<int>(pts.size()) != cfg.t_past) {
      throw ShapeError("past_context_rows: past length " +
                       std::to_string(pts.size()) +
                       " does not match t_past " +
                       std::to_string(cfg.t_past));
    }
    const Eigen::Index r = static_cast<Eigen::Index>(i);
    if (cfg.past_mode == "positions") {
      for (int k = 0; k < cfg.t_past; ++k) {
        rows(r, 2 * k) = pts[std::size_t(k)].x;
        rows(r, 2 * k + 1) = pts[std::size_t(k)].y;
      }
    } else {
      const DisplacementSeries d = to_displacements(
          std::span<const Vec2>(pts.data(), pts.size()), pts[0]);
      for (int k = 0; k < cfg.t_past; ++k) {
        rows(r, 2 * k) = d.deltas[std::size_t(k)].x;
        rows(r, 2 * k + 1) = d.deltas[std::size_t(k)].y;
      }
    }
  }
  return rows;
}

void fit_context_norms(FlowNorms& norms, const Matrix& past_rows) {
  if (past_rows.size() == 0) {
    throw InvalidInput("fit_context_norms: empty input");
  }
  const Eigen::Index steps = past_rows.cols() / 2;
  const double count = static_cast<double>(past_rows.rows() * steps);
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(2);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(2);
  for (Eigen::Index k = 0; k < steps; ++k) {
    for (int c = 0; c < 2; ++c) {
      mean[c] += past_rows.col(2 * k + c).sum();
      sq[c] += past_rows.col(2 * k + c).squaredNorm();
    }
  }
  mean /= count;
  for (int c = 0; c < 2; ++c) {
    const double var = sq[c] / count - mean[c] * mean[c];
    norms.ctx_std[c] = std::sqrt(std::max(var, 0.0));
    if (norms.ctx_std[c] < 1e-6) norms.ctx_std[c] = 1.0;
  }
  norms.ctx_mean = mean;
}

void fit_latent_norms(FlowNorms& norms, const Matrix& encodings) {
  if (encodings.size() == 0) {
    throw InvalidInput("fit_latent_norms: empty input");
  }
  const double n = static_cast<double>(encodings.rows());
  norms.lat_mean = encodings.colwise().sum() / n;
  norms.lat_std.resize(encodings.cols());
  for (Eigen::Index c = 0; c < encodings.cols(); ++c) {
    const double var =
        encodings.col(c).squaredNorm() / n -
        norms.lat_mean[c] * norms.lat_mean[c];
    norms.lat_std[c] = std::sqrt(std::max(var, 0.0));
    if (norms.lat_std[c] < 1e-6) norms.lat_std[c] = 1.0;
  }
}

}  // namespace trajflow
