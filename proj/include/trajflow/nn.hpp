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

#ifndef TRAJFLOW_NN_HPP_
#define TRAJFLOW_NN_HPP_

#include <string>

#include "trajflow/params.hpp"
#include "trajflow/rng.hpp"
#include "trajflow/tape.hpp"

namespace trajflow {

// Fills a matrix with independent U(-bound, bound) draws, row by row.
void uniform_init(Matrix& m, Rng& rng, double bound);

// Dense layer y = x W + b with W named `name.w` (in x out) and b named
// `name.b` (1 x out). Weights start at U(+-1/sqrt(in)), biases at zero.
void create_linear(ParamStore& store, const std::string& name, int in,
                   int out, Rng& rng);

Var linear(Tape& tape, ParamStore& store, const std::string& name, Var x);

Matrix linear(const ParamStore& store, const std::string& name,
              const Matrix& x);

}  // namespace trajflow

#endif  // TRAJFLOW_NN_HPP_
