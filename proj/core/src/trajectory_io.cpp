#include "quadrl/trajectory_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace quadrl {

std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

void write_trajectory_header(std::ostream& out) {
  out << "t,px,py,pz,r00,r01,r02,r10,r11,r12,r20,r21,r22,vx,vy,vz,wx,wy,wz,T0,T1,T2,T3\n";
}

void write_trajectory_row(std::ostream& out, const TrajectoryRow& row) {
  out << format_double(row.time);
  auto put = [&out](double v) { out << ',' << format_double(v); };
  for (int i = 0; i < 3; ++i) put(row.state.position[i]);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) put(row.state.rotation(r, c));
  }
  for (int i = 0; i < 3; ++i) put(row.state.velocity[i]);
  for (int i = 0; i < 3; ++i) put(row.state.angular_velocity[i]);
  for (int i = 0; i < 4; ++i) put(row.thrust[i]);
  out << '\n';
}

void write_trajectory_csv(const std::filesystem::path& path, std::span<const TrajectoryRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_trajectory_header(out);
  for (const auto& row : rows) write_trajectory_row(out, row);
}

}  // namespace quadrl
