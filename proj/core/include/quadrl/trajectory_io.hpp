#pragma once

#include "quadrl/quad_sim.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

namespace quadrl {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

/// One logged simulator step. `thrust` is the command applied from `state`
/// (zero for a final state).
struct TrajectoryRow {
  double time = 0.0;
  QuadState state;
  Vec4 thrust = Vec4::Zero();
};

/// Columns: t,px,py,pz,r00..r22 (row-major),vx,vy,vz,wx,wy,wz,T0..T3
void write_trajectory_header(std::ostream& out);
void write_trajectory_row(std::ostream& out, const TrajectoryRow& row);
void write_trajectory_csv(const std::filesystem::path& path, std::span<const TrajectoryRow> rows);

}  // namespace quadrl
