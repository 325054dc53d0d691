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

#ifndef TRAJFLOW_PARAMS_HPP_
#define TRAJFLOW_PARAMS_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <string>

#include "trajflow/errors.hpp"
#include "trajflow/json_util.hpp"

namespace trajflow {

using Matrix = Eigen::MatrixXd;

struct ParamTensor {
  Matrix value;
  Matrix grad;
};

// Named trainable tensors with their gradient buffers. std::map keeps the
// iteration order stable, so serialization, optimizer sweeps, and gradient
// checks all see parameters in one deterministic order.
class ParamStore {
 public:
  ParamTensor& create(const std::string& name, Eigen::Index rows,
                      Eigen::Index cols) {
    if (entries_.count(name) > 0) {
      throw InvalidInput("ParamStore: duplicate parameter " + name);
    }
    ParamTensor& p = entries_[name];
    p.value = Matrix::Zero(rows, cols);
    p.grad = Matrix::Zero(rows, cols);
    return p;
  }

  ParamTensor& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      throw InvalidInput("ParamStore: unknown parameter " + name);
    }
    return it->second;
  }

  const ParamTensor& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      throw InvalidInput("ParamStore: unknown parameter " + name);
    }
    return it->second;
  }

  bool contains(const std::string& name) const {
    return entries_.count(name) > 0;
  }

  void zero_grad() {
    for (auto& [name, p] : entries_) p.grad.setZero();
  }

  double grad_norm() const {
    double sq = 0.0;
    for (const auto& [name, p] : entries_) sq += p.grad.squaredNorm();
    return std::sqrt(sq);
  }

  // Scales all gradients down so their joint norm is at most max_norm.
  void clip_grad_norm(double max_norm) {
    const double norm = grad_norm();
    if (norm > max_norm && norm > 0.0) {
      const double s = max_norm / norm;
      for (auto& [name, p] : entries_) p.grad *= s;
    }
  }

  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : entries_) {
      n += static_cast<std::size_t>(p.value.size());
    }
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Values only; gradients are transient state.
  Json to_json() const {
    Json out = Json::object();
    for (const auto& [name, p] : entries_) {
      out[name] = matrix_to_json(p.value);
    }
    return out;
  }

  static ParamStore from_json(const Json& doc) {
    if (!doc.is_object()) {
      throw ParseError("ParamStore: expected an object", 0, 0);
    }
    ParamStore store;
    for (const auto& [name, val] : doc.items()) {
      const Matrix m = matrix_from_json(val);
      store.create(name, m.rows(), m.cols()).value = m;
    }
    return store;
  }

 private:
  std::map<std::string, ParamTensor> entries_;
};

}  // namespace trajflow

#endif  // TRAJFLOW_PARAMS_HPP_
