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

#ifndef TRAJFLOW_RUN_MANIFEST_HPP_
#define TRAJFLOW_RUN_MANIFEST_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "trajflow/json_util.hpp"

namespace trajflow {

inline constexpr char kToolVersion[] = "0.1.0";

// Provenance record written by every command invocation: what ran, with
// which configuration and seeds, over which inputs, producing which files.
struct RunManifest {
  std::string command;
  Json config = Json::object();
  Json seeds = Json::object();         // config seed and effective seed
  Json input_hashes = Json::object();  // input name -> content hash
  std::vector<std::string> output_paths;
  std::string tool_version = kToolVersion;
  double wall_time_s = 0.0;

  // Includes "manifest_hash", the hash of every other field, so the
  // record is content-addressable. Throws InvalidInput when `command` is
  // empty.
  Json to_json() const;
};

// Atomic write of manifest.to_json().
void write_run_manifest(const std::filesystem::path& path,
                        const RunManifest& manifest);

// Hex FNV-1a hash of a file's bytes.
std::string file_hash(const std::filesystem::path& path);

}  // namespace trajflow

#endif  // TRAJFLOW_RUN_MANIFEST_HPP_
