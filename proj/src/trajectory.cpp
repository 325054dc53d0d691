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

#include "trajflow/trajectory.hpp"

#include "trajflow/errors.hpp"

namespace trajflow {

DisplacementSeries to_displacements(std::span<const Vec2> points,
                                    const Vec2& anchor) {
  if (points.empty()) {
    throw InvalidInput("to_displacements: empty trajectory");
  }
  if (!anchor.finite()) {
    throw InvalidInput("to_displacements: non-finite anchor");
  }
  DisplacementSeries d;
  d.origin = anchor;
  d.deltas.reserve(points.size());
  Vec2 prev = anchor;
  for (const Vec2& p : points) {
    d.deltas.push_back(p - prev);
    prev = p;
  }
  return d;
}

DisplacementSeries to_displacements(const Trajectory& traj,
                                    const Vec2& anchor) {
  return to_displacements(std::span<const Vec2>(traj.points), anchor);
}

std::vector<Vec2> from_displacements(const DisplacementSeries& d) {
  if (!d.origin.finite()) {
    throw NumericalError("from_displacements: non-finite origin");
  }
  std::vector<Vec2> points;
  points.reserve(d.deltas.size());
  Vec2 pos = d.origin;
  for (const Vec2& delta : d.deltas) {
    if (!delta.finite()) {
      throw NumericalError("from_displacements: non-finite delta");
    }
    pos = pos + delta;
    points.push_back(pos);
  }
  return points;
}

}  // namespace trajflow
