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

#ifndef TRAJFLOW_CHECKPOINT_HPP_
#define TRAJFLOW_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include "trajflow/json_util.hpp"
#include "trajflow/params.hpp"

namespace trajflow {

// A restorable training snapshot. `component` tags what the parameters
// belong to ("rnn_ae", "flow") so a file cannot be loaded into the wrong
// model. `config` is the full component configuration; its hash must match
// on resume. `extra` carries model-specific constants such as the latent
// standardization moments.
struct Checkpoint {
  std::string component;
  Json config;
  std::uint64_t seed = 0;
  int epoch = 0;
  double best_loss = 0.0;
  int epochs_since_best = 0;
  ParamStore params;
  Json optimizer;  // empty object when the snapshot is final/frozen
  Json extra;

  std::string config_hash() const { return json_hash(config); }
};

// Serializes atomically (write to a temp file, then rename).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);

// Throws ParseError on malformed files, VersionError on unknown versions,
// and ConfigError when `expect_component` is nonempty and does not match.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::string& expect_component = "");

}  // namespace trajflow

#endif  // TRAJFLOW_CHECKPOINT_HPP_
