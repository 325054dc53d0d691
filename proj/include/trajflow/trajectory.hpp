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

#ifndef TRAJFLOW_TRAJECTORY_HPP_
#define TRAJFLOW_TRAJECTORY_HPP_

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace trajflow {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(const Vec2& a, const Vec2& b) {
  return (a - b).norm();
}

// An ordered sequence of 2-D positions at a fixed timestep.
struct Trajectory {
  std::vector<Vec2> points;
  double dt = 1.0;
  std::string agent_id;
  std::string scene_id;
};

// An observation of one agent: a past segment and the future segment that
// temporally continues it. The last past point is the current position.
struct Situation {
  Trajectory past;
  Trajectory future;
  std::string mode_label;  // empty means unlabeled

  const Vec2& current_position() const { return past.points.back(); }
};

// Relative displacements; cumulative summation from `origin` reproduces
// the source positions exactly.
struct DisplacementSeries {
  std::vector<Vec2> deltas;
  Vec2 origin;
};

// deltas[0] = points[0] - anchor, deltas[k] = points[k] - points[k-1].
// Throws InvalidInput on an empty point list or non-finite anchor.
DisplacementSeries to_displacements(std::span<const Vec2> points,
                                    const Vec2& anchor);

DisplacementSeries to_displacements(const Trajectory& traj,
                                    const Vec2& anchor);

// Cumulative sum from the origin. Throws NumericalError when any delta is
// non-finite.
std::vector<Vec2> from_displacements(const DisplacementSeries& d);

}  // namespace trajflow

#endif  // TRAJFLOW_TRAJECTORY_HPP_
