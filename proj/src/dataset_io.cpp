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

#include "trajflow/dataset_io.hpp"

#include <sstream>
#include <string>

#include "trajflow/errors.hpp"
#include "trajflow/json_util.hpp"

namespace trajflow {

namespace {

constexpr int kDatasetFormatVersion = 1;

Json points_to_json(const std::vector<Vec2>& pts) {
  Json arr = Json::array();
  for (const Vec2& p : pts) arr.push_back(Json::array({p.x, p.y}));
  return arr;
}

std::vector<Vec2> points_from_json(const Json& arr, std::size_t line) {
  if (!arr.is_array()) {
    throw ParseError("dataset: expected point array", line, 0);
  }
  std::vector<Vec2> pts;
  pts.reserve(arr.size());
  for (const Json& p : arr) {
    if (!p.is_array() || p.size() != 2) {
      throw ParseError("dataset: point must be [x, y]", line, 0);
    }
    pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  return pts;
}

Json parse_line(const std::string& text, std::size_t line) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("dataset: ") + e.what(), line, e.byte);
  }
}

}  // namespace

void save_dataset(const std::filesystem::path& path,
                  const std::vector<Situation>& situations,
                  const SceneSpec& spec) {
  std::ostringstream out;
  Json header;
  header["format_version"] = kDatasetFormatVersion;
  header["spec"] = spec.raw;
  header["seed"] = spec.seed;
  out << header.dump() << '\n';

  for (const Situation& s : situations) {
    Json rec;
    rec["scene_id"] = s.past.scene_id;
    rec["agent_id"] = s.past.agent_id;
    rec["mode_label"] = s.mode_label;
    rec["past"] = points_to_json(s.past.points);
    rec["future"] = points_to_json(s.future.points);
    rec["dt"] = s.past.dt;
    out << rec.dump() << '\n';
  }
  atomic_write_file(path, out.str());
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::string contents = read_file(path);
  std::istringstream in(contents);
  std::string text;
  std::size_t line = 0;

  if (!std::getline(in, text)) {
    throw ParseError("dataset: empty file", 1, 0);
  }
  ++line;
  Dataset ds;
  ds.header = parse_line(text, line);
  if (!ds.header.is_object() || !ds.header.contains("format_version")) {
    throw ParseError("dataset: header line missing format_version", line, 0);
  }
  const int version = ds.header.at("format_version").get<int>();
  if (version != kDatasetFormatVersion) {
    throw VersionError("dataset: unsupported format_version " +
                       std::to_string(version));
  }
  if (!ds.header.contains("spec") || !ds.header.contains("seed")) {
    throw ParseError("dataset: header must carry spec and seed", line, 0);
  }

  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    const Json rec = parse_line(text, line);
    try {
      Situation s;
      const std::string scene_id = rec.at("scene_id").get<std::string>();
      const std::string agent_id = rec.at("agent_id").get<std::string>();
      const double dt = rec.at("dt").get<double>();
      s.mode_label = rec.at("mode_label").get<std::string>();
      s.past.points = points_from_json(rec.at("past"), line);
      s.future.points = points_from_json(rec.at("future"), line);
      s.past.scene_id = s.future.scene_id = scene_id;
      s.past.agent_id = s.future.agent_id = agent_id;
      s.past.dt = s.future.dt = dt;
      if (s.past.points.empty() || s.future.points.empty()) {
        throw ParseError("dataset: empty past or future", line, 0);
      }
      ds.situations.push_back(std::move(s));
    } catch (const Json::exception& e) {
      throw ParseError(std::string("dataset: ") + e.what(), line, 0);
    }
  }
  return ds;
}

}  // namespace trajflow
