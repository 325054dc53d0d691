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

#include "trajflow/checkpoint.hpp"

#include <string>

#include "trajflow/errors.hpp"

namespace trajflow {

namespace {
constexpr int kCheckpointFormatVersion = 1;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  Json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["component"] = ck.component;
  doc["config"] = ck.config;
  doc["config_hash"] = ck.config_hash();
  doc["seed"] = ck.seed;
  doc["epoch"] = ck.epoch;
  doc["best_loss"] = ck.best_loss;
  doc["epochs_since_best"] = ck.epochs_since_best;
  doc["params"] = ck.params.to_json();
  doc["optimizer"] = ck.optimizer.is_null() ? Json::object() : ck.optimizer;
  doc["extra"] = ck.extra.is_null() ? Json::object() : ck.extra;
  atomic_write_file(path, doc.dump());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::string& expect_component) {
  Json doc;
  try {
    doc = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0, e.byte);
  }
  if (!doc.is_object() || !doc.contains("format_version")) {
    throw ParseError("checkpoint: missing format_version", 0, 0);
  }
  const int version = doc.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion) {
    throw VersionError("checkpoint: unsupported format_version " +
                       std::to_string(version));
  }

  Checkpoint ck;
  try {
    ck.component = doc.at("component").get<std::string>();
    ck.config = doc.at("config");
    ck.seed = doc.at("seed").get<std::uint64_t>();
    ck.epoch = doc.at("epoch").get<int>();
    ck.best_loss = doc.at("best_loss").get<double>();
    ck.epochs_since_best = doc.at("epochs_since_best").get<int>();
    ck.params = ParamStore::from_json(doc.at("params"));
    ck.optimizer = doc.at("optimizer");
    ck.extra = doc.at("extra");
  } catch (const Json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0, 0);
  }

  if (!expect_component.empty() && ck.component != expect_component) {
    throw ConfigError("checkpoint: component is \"" + ck.component +
                      "\", expected \"" + expect_component + "\"");
  }
  const std::string stored_hash =
      doc.value("config_hash", std::string());
  if (stored_hash != ck.config_hash()) {
    throw ConfigError("checkpoint: config hash mismatch");
  }
  return ck;
}

}  // namespace trajflow
