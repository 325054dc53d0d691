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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "trajflow/dataset_io.hpp"
#include "trajflow/errors.hpp"
#include "trajflow/json_util.hpp"
#include "trajflow/scene_spec.hpp"
#include "trajflow/synthetic_data.hpp"

using trajflow::Json;

namespace {

namespace fs = std::filesystem;

trajflow::SceneSpec make_spec() {
  Json pts_up = Json::array();
  Json pts_down = Json::array();
  for (int i = 0; i < 8; ++i) {
    const double y = i < 3 ? 0.0 : 0.25 * (i - 2);
    pts_up.push_back(Json::array({double(i), y}));
    pts_down.push_back(Json::array({double(i), -y}));
  }
  Json doc;
  doc["format_version"] = 1;
  doc["family"] = "bimodal";
  doc["scene_id"] = "io_scene";
  doc["t_past"] = 3;
  doc["t_pred"] = 5;
  doc["n_samples"] = 20;
  doc["seed"] = 31;
  doc["mode_proportions"] = Json::array({0.5, 0.5});
  doc["scaling"] = Json{{"mean", 1.0}, {"stddev", 0.05}};
  doc["modes"] = Json::array({Json{{"label", "up"}, {"points", pts_up}},
                              Json{{"label", "down"}, {"points", pts_down}}});
  return trajflow::scene_spec_from_json(doc);
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "trajflow_dataset_io_test") {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("datasets roundtrip bit for bit") {
  TempDir tmp;
  const auto spec = make_spec();
  const auto data = trajflow::generate_bimodal(spec);
  const fs::path file = tmp.path / "data.ndjson";
  trajflow::save_dataset(file, data, spec);

  const auto ds = trajflow::load_dataset(file);
  REQUIRE(ds.situations.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& a = data[i];
    const auto& b = ds.situations[i];
    CHECK(a.mode_label == b.mode_label);
    CHECK(a.past.agent_id == b.past.agent_id);
    CHECK(a.past.scene_id == b.past.scene_id);
    CHECK(a.past.dt == b.past.dt);
    REQUIRE(a.past.points.size() == b.past.points.size());
    REQUIRE(a.future.points.size() == b.future.points.size());
    for (std::size_t k = 0; k < a.past.points.size(); ++k) {
      CHECK(a.past.points[k].x == b.past.points[k].x);
      CHECK(a.past.points[k].y == b.past.points[k].y);
    }
    for (std::size_t k = 0; k < a.future.points.size(); ++k) {
      CHECK(a.future.points[k].x == b.future.points[k].x);
      CHECK(a.future.points[k].y == b.future.points[k].y);
    }
  }

  // The header carries the generating spec; a second save of the loaded
  // data is byte-identical.
  CHECK(ds.spec().hash() == spec.hash());
  const fs::path file2 = tmp.path / "data2.ndjson";
  trajflow::save_dataset(file2, ds.situations, ds.spec());
  CHECK(trajflow::read_file(file) == trajflow::read_file(file2));
}

TEST_CASE("corrupt lines are reported with their line number") {
  TempDir tmp;
  const auto spec = make_spec();
  const auto data = trajflow::generate_bimodal(spec);
  const fs::path file = tmp.path / "data.ndjson";
  trajflow::save_dataset(file, data, spec);

  // Truncate line 3 mid-record.
  std::istringstream in(trajflow::read_file(file));
  std::ostringstream out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 3) line = line.substr(0, 10);
    out << line << '\n';
  }
  const fs::path corrupt = tmp.path / "corrupt.ndjson";
  trajflow::atomic_write_file(corrupt, out.str());

  try {
    trajflow::load_dataset(corrupt);
    FAIL("expected ParseError");
  } catch (const trajflow::ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("unsupported versions and missing headers are refused") {
  TempDir tmp;
  const fs::path v2 = tmp.path / "v2.ndjson";
  trajflow::atomic_write_file(
      v2, "{\"format_version\":2,\"spec\":{},\"seed\":0}\n");
  CHECK_THROWS_AS(trajflow::load_dataset(v2), trajflow::VersionError);

  const fs::path empty = tmp.path / "empty.ndjson";
  trajflow::atomic_write_file(empty, "");
  CHECK_THROWS_AS(trajflow::load_dataset(empty), trajflow::ParseError);

  const fs::path noheader = tmp.path / "noheader.ndjson";
  trajflow::atomic_write_file(noheader, "{\"seed\":1}\n");
  CHECK_THROWS_AS(trajflow::load_dataset(noheader), trajflow::ParseError);
}

TEST_CASE("missing record fields are parse errors") {
  TempDir tmp;
  const auto spec = make_spec();
  const fs::path file = tmp.path / "bad_record.ndjson";
  Json header;
  header["format_version"] = 1;
  header["spec"] = spec.raw;
  header["seed"] = spec.seed;
  std::ostringstream out;
  out << header.dump() << '\n';
  out << "{\"scene_id\":\"s\",\"agent_id\":\"a\"}" << '\n';
  trajflow::atomic_write_file(file, out.str());
  CHECK_THROWS_AS(trajflow::load_dataset(file), trajflow::ParseError);
}
