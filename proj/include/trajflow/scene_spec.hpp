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

#ifndef TRAJFLOW_SCENE_SPEC_HPP_
#define TRAJFLOW_SCENE_SPEC_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trajflow/json_util.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

struct ScalingSpec {
  double mean = 1.0;
  double stddev = 0.0;
};

// One base trajectory shape. For the bimodal family the points span
// t_past + t_pred steps; for the branching family they span total_length
// steps resolved from the declared geometry.
struct ModeTemplate {
  std::string label;
  std::vector<Vec2> points;
};

enum class SceneFamily { kBimodal, kBranching };

// Declarative description of a synthetic scene. `raw` keeps the original
// JSON document for provenance (dataset headers, config hashes).
struct SceneSpec {
  SceneFamily family = SceneFamily::kBimodal;
  std::string scene_id;
  int t_past = 0;
  int t_pred = 0;
  int total_length = 0;  // branching only
  int n_samples = 0;
  std::uint64_t seed = 0;
  double dt = 1.0;
  std::vector<double> mode_proportions;
  std::optional<ScalingSpec> scaling;
  std::vector<ModeTemplate> mode_templates;
  Json raw;

  // Throws ConfigError naming the offending field.
  void validate() const;

  std::string hash() const { return json_hash(raw); }
};

// Parses and validates a scene document. Branching mode geometry
// (straight run plus an optional cubic-Bezier bend) is resolved here into
// unit-arc-step polylines of total_length points.
SceneSpec scene_spec_from_json(const Json& doc);

SceneSpec load_scene_spec(const std::filesystem::path& path);

// Samples `count` points spaced one arc unit apart: the exact integer grid
// on the straight run, then marching along the bend curve, then a straight
// continuation of the bend's exit tangent. Exposed for geometry tests.
std::vector<Vec2> resolve_branching_path(
    int straight_until, const std::vector<Vec2>& bend_control, int count);

}  // namespace trajflow

#endif  // TRAJFLOW_SCENE_SPEC_HPP_
