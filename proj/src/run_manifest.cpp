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

#include "trajflow/run_manifest.hpp"

#include <cstdio>

#include "trajflow/errors.hpp"
#include "trajflow/rng.hpp"

namespace trajflow {

Json RunManifest::to_json() const {
  if (command.empty()) {
    throw InvalidInput("run manifest: empty command");
  }
  Json body{{"command", command},
            {"config", config},
            {"seeds", seeds},
            {"input_hashes", input_hashes},
            {"output_paths", output_paths},
            {"tool_version", tool_version},
            {"wall_time_s", wall_time_s}};
  body["manifest_hash"] = json_hash(body);
  return body;
}

void write_run_manifest(const std::filesystem::path& path,
                        const RunManifest& manifest) {
  atomic_write_file(path, manifest.to_json().dump(2) + "\n");
}

std::string file_hash(const std::filesystem::path& path) {
  const std::uint64_t h = fnv1a64(read_file(path));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace trajflow
