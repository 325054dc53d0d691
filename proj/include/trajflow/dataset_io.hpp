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

#ifndef TRAJFLOW_DATASET_IO_HPP_
#define TRAJFLOW_DATASET_IO_HPP_

#include <filesystem>
#include <vector>

#include "trajflow/scene_spec.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

struct Dataset {
  std::vector<Situation> situations;
  Json header;  // {format_version, spec, seed}

  SceneSpec spec() const { return scene_spec_from_json(header.at("spec")); }
};

// Line-delimited JSON: a header line with {format_version, spec, seed},
// then one situation per line. Serialization round-trips every field
// bit-exactly.
void save_dataset(const std::filesystem::path& path,
                  const std::vector<Situation>& situations,
                  const SceneSpec& spec);

// Throws ParseError (with line/offset) on malformed input and
// VersionError on a format_version this build does not support.
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace trajflow

#endif  // TRAJFLOW_DATASET_IO_HPP_
