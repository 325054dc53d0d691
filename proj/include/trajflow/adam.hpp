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

#ifndef TRAJFLOW_ADAM_HPP_
#define TRAJFLOW_ADAM_HPP_

#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "trajflow/json_util.hpp"
#include "trajflow/params.hpp"

namespace trajflow {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are created on first use per
// parameter; a step with any non-finite gradient is rejected wholesale so
// one bad batch cannot poison the moments.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  long long steps() const { return t_; }

  // Returns false (and changes nothing) when a gradient is non-finite.
  bool step(ParamStore& store) {
    for (const auto& [name, p] : store) {
      if (!p.grad.allFinite()) return false;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : store) {
      auto& [m, v] = moments_[name];
      if (m.size() == 0) {
        m = Matrix::Zero(p.value.rows(), p.value.cols());
        v = Matrix::Zero(p.value.rows(), p.value.cols());
      }
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p.grad;
      v = cfg_.beta2 * v +
          (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
      const Matrix m_hat = m / c1;
      const Matrix v_hat = v / c2;
      p.value.array() -=
          cfg_.lr * m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
    }
    return true;
  }

  Json state_to_json() const {
    Json out;
    out["t"] = t_;
    out["lr"] = cfg_.lr;
    out["beta1"] = cfg_.beta1;
    out["beta2"] = cfg_.beta2;
    out["eps"] = cfg_.eps;
    Json m = Json::object();
    Json v = Json::object();
    for (const auto& [name, mv] : moments_) {
      m[name] = matrix_to_json(mv.first);
      v[name] = matrix_to_json(mv.second);
    }
    out["m"] = std::move(m);
    out["v"] = std::move(v);
    return out;
  }

  void state_from_json(const Json& doc) {
    t_ = doc.at("t").get<long long>();
    cfg_.lr = doc.at("lr").get<double>();
    cfg_.beta1 = doc.at("beta1").get<double>();
    cfg_.beta2 = doc.at("beta2").get<double>();
    cfg_.eps = doc.at("eps").get<double>();
    moments_.clear();
    for (const auto& [name, val] : doc.at("m").items()) {
      moments_[name].first = matrix_from_json(val);
    }
    for (const auto& [name, val] : doc.at("v").items()) {
      moments_[name].second = matrix_from_json(val);
    }
  }

 private:
  AdamConfig cfg_;
  long long t_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>> moments_;
};

}  // namespace trajflow

#endif  // TRAJFLOW_ADAM_HPP_
