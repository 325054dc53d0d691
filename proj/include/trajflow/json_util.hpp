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

#ifndef TRAJFLOW_JSON_UTIL_HPP_
#define TRAJFLOW_JSON_UTIL_HPP_

#include <Eigen/Core>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace trajflow {

using Json = nlohmann::json;

// Hex FNV-1a hash of the canonical (sorted-key, compact) JSON dump.
// Stable across runs and platforms; used as config/checkpoint identity.
std::string json_hash(const Json& j);

// Writes via a temp file in the same directory plus rename, so readers
// never observe a partially written file.
void atomic_write_file(const std::filesystem::path& path,
                       const std::string& contents);

std::string read_file(const std::filesystem::path& path);

Json matrix_to_json(const Eigen::MatrixXd& m);

Eigen::MatrixXd matrix_from_json(const Json& j);

}  // namespace trajflow

#endif  // TRAJFLOW_JSON_UTIL_HPP_
