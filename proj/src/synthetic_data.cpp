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

#include "trajflow/synthetic_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "trajflow/errors.hpp"
#include "trajflow/rng.hpp"

namespace trajflow {

namespace {

std::string agent_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "a%04d", index);
  return buf;
}

Trajectory make_trajectory(std::vector<Vec2> points, double dt,
                           std::string agent_id, std::string scene_id) {
  Trajectory t;
  t.points = std::move(points);
  t.dt = dt;
  t.agent_id = std::move(agent_id);
  t.scene_id = std::move(scene_id);
  return t;
}

}  // namespace

std::vector<Situation> generate_bimodal(const SceneSpec& spec) {
  spec.validate();
  if (spec.family != SceneFamily::kBimodal) {
    throw ConfigError("generate_bimodal: spec family is not bimodal");
  }
  if (!spec.scaling) {
    throw ConfigError("generate_bimodal: scaling distribution is required");
  }

  // One shared past for every situation, taken from the first template.
  const std::vector<Vec2>& base = spec.mode_templates[0].points;
  const std::vector<Vec2> shared_past(
      base.begin(), base.begin() + spec.t_past);

  Rng rng = Rng::substream(spec.seed, "bimodal:" + spec.scene_id);
  std::vector<Situation> out;
  out.reserve(static_cast<std::size_t>(spec.n_samples));

  for (int i = 0; i < spec.n_samples; ++i) {
    const std::size_t mode = rng.categorical(spec.mode_proportions);
    const double s = rng.normal(spec.scaling->mean, spec.scaling->stddev);

    const ModeTemplate& tmpl = spec.mode_templates[mode];
    // Scale about the template's own current position (the t = 0 point,
    // i.e. the last observed one) so scaling never translates it.
    const Vec2 current = tmpl.points[static_cast<std::size_t>(spec.t_past) - 1];
    std::vector<Vec2> future;
    future.reserve(static_cast<std::size_t>(spec.t_pred));
    for (int k = 0; k < spec.t_pred; ++k) {
      const Vec2& p =
          tmpl.points[static_cast<std::size_t>(spec.t_past + k)];
      future.push_back(current + (p - current) * s);
    }

    Situation sit;
    sit.past = make_trajectory(shared_past, spec.dt, agent_name(i),
                               spec.scene_id);
    sit.future = make_trajectory(std::move(future), spec.dt, agent_name(i),
                                 spec.scene_id);
    sit.mode_label = tmpl.label;
    out.push_back(std::move(sit));
  }
  return out;
}

std::vector<int> branching_mode_counts(const SceneSpec& spec) {
  const std::size_t m = spec.mode_proportions.size();
  std::vector<int> counts(m, 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double exact = spec.mode_proportions[i] * spec.n_samples;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    remainders.push_back({exact - std::floor(exact), i});
  }
  // Largest remainder first; ties go to the lower mode index.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) {
                     return a.first > b.first;
                   });
  for (int k = 0; k < spec.n_samples - assigned; ++k) {
    counts[remainders[static_cast<std::size_t>(k) % m].second] += 1;
  }
  return counts;
}

std::vector<Situation> generate_branching(const SceneSpec& spec) {
  spec.validate();
  if (spec.family != SceneFamily::kBranching) {
    throw ConfigError("generate_branching: spec family is not branching");
  }
  const int window = spec.t_past + spec.t_pred;
  if (window > spec.total_length) {
    throw InvalidInput("generate_branching: window of " +
                       std::to_string(window) +
                       " steps exceeds trajectory length " +
                       std::to_string(spec.total_length));
  }

  const std::vector<int> counts = branching_mode_counts(spec);
  std::vector<Situation> out;

  int agent = 0;
  for (std::size_t mode = 0; mode < spec.mode_templates.size(); ++mode) {
    const ModeTemplate& tmpl = spec.mode_templates[mode];
    for (int rep = 0; rep < counts[mode]; ++rep, ++agent) {
      const std::string id = agent_name(agent);
      for (int w = 0; w + window <= spec.total_length; ++w) {
        const auto begin = tmpl.points.begin() + w;
        Situation sit;
        sit.past = make_trajectory({begin, begin + spec.t_past}, spec.dt,
                                   id, spec.scene_id);
        sit.future = make_trajectory(
            {begin + spec.t_past, begin + window}, spec.dt, id,
            spec.scene_id);
        sit.mode_label = tmpl.label;
        out.push_back(std::move(sit));
      }
    }
  }
  return out;
}

std::vector<double> continuation_probabilities(const SceneSpec& spec,
                                               std::span<const Vec2> prefix,
                                               double tol) {
  if (prefix.empty()) {
    throw InvalidInput("continuation_probabilities: empty prefix");
  }
  const std::vector<int> counts = branching_mode_counts(spec);
  std::vector<double> probs(spec.mode_templates.size(), 0.0);
  long total = 0;
  for (std::size_t mode = 0; mode < spec.mode_templates.size(); ++mode) {
    const std::vector<Vec2>& path = spec.mode_templates[mode].points;
    if (prefix.size() > path.size()) continue;
    bool matches = true;
    for (std::size_t k = 0; k < prefix.size(); ++k) {
      if (distance(prefix[k], path[k]) > tol) {
        matches = false;
        break;
      }
    }
    if (matches) {
      probs[mode] = static_cast<double>(counts[mode]);
      total += counts[mode];
    }
  }
  if (total == 0) {
    throw InvalidInput(
        "continuation_probabilities: prefix matches no pool trajectory");
  }
  for (double& p : probs) p /= static_cast<double>(total);
  return probs;
}

std::vector<Situation> balance_by_mode(
    const std::vector<Situation>& data,
    const std::vector<std::string>& expected_modes) {
  // Group member indices per label, groups ordered by first appearance.
  std::vector<std::string> labels;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string& label = data[i].mode_label;
    if (label.empty()) {
      throw InvalidInput("balance_by_mode: unlabeled situation at index " +
                         std::to_string(i));
    }
    auto [it, inserted] = groups.try_emplace(label);
    if (inserted) labels.push_back(label);
    it->second.push_back(i);
  }
  for (const std::string& label : expected_modes) {
    if (!groups.count(label)) {
      throw InvalidInput("balance_by_mode: mode \"" + label +
                         "\" has no samples and cannot be oversampled");
    }
  }
  if (groups.empty()) return {};

  std::size_t target = 0;
  for (const auto& [label, members] : groups) {
    target = std::max(target, members.size());
  }

  std::vector<Situation> out = data;
  for (const std::string& label : labels) {
    const std::vector<std::size_t>& members = groups.at(label);
    for (std::size_t k = members.size(); k < target; ++k) {
      out.push_back(data[members[k % members.size()]]);
    }
  }
  return out;
}

}  // namespace trajflow
