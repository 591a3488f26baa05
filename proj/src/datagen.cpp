#include "ppn/datagen.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "ppn/rng.hpp"

namespace ppn {

namespace {

enum Stream : std::uint64_t { kSelect = 1, kU, kV, kNoiseA, kNoiseB, kNoiseC, kNoiseD, kIntensity };

struct PointDraws {
  std::uint64_t seed;
  Index t;
  Index i;

  double uniform(Stream s) const {
    return unit_double(hash_key(seed, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i), s));
  }
  // Three independent N(0, 1) draws from Box-Muller on two uniform pairs.
  std::array<double, 3> normals() const {
    const double r1 = std::sqrt(-2.0 * std::log(1.0 - uniform(kNoiseA)));
    const double a1 = 2.0 * std::numbers::pi * uniform(kNoiseB);
    const double r2 = std::sqrt(-2.0 * std::log(1.0 - uniform(kNoiseC)));
    return {r1 * std::cos(a1), r1 * std::sin(a1), r2 * std::cos(2.0 * std::numbers::pi * uniform(kNoiseD))};
  }
};

double wrap(double x, double period) {
  double r = std::fmod(x + period / 2.0, period);
  if (r < 0) r += period;
  return r - period / 2.0;
}

// Agent points keep their place on the box from frame to frame; only the
// sensor noise is redrawn. Their surface draws use this frame key.
constexpr Index kBodyFrame = -1;

Index agent_points_total(const SceneSpec& spec) {
  if (spec.n_agents == 0) return 0;
  return static_cast<Index>(std::llround(static_cast<double>(spec.points_per_frame) * spec.agent_point_fraction));
}

// Uniform sample on the top and four side faces of an axis-aligned box.
LidarPoint box_surface_point(const AgentPose& pose, const PointDraws& d) {
  constexpr double kTop = kAgentLength * kAgentWidth;
  constexpr double kLong = kAgentLength * kAgentHeight;
  constexpr double kShort = kAgentWidth * kAgentHeight;
  constexpr double kTotal = kTop + 2 * kLong + 2 * kShort;
  const double pick = d.uniform(kSelect) * kTotal;
  const double u = d.uniform(kU);
  const double v = d.uniform(kV);
  const double hx = kAgentLength / 2;
  const double hy = kAgentWidth / 2;
  double x = 0, y = 0, z = 0;
  if (pick < kTop) {
    x = (u - 0.5) * kAgentLength;
    y = (v - 0.5) * kAgentWidth;
    z = kAgentHeight;
  } else if (pick < kTop + 2 * kLong) {
    x = (u - 0.5) * kAgentLength;
    y = pick < kTop + kLong ? -hy : hy;
    z = v * kAgentHeight;
  } else {
    x = pick < kTop + 2 * kLong + kShort ? -hx : hx;
    y = (u - 0.5) * kAgentWidth;
    z = v * kAgentHeight;
  }
  return {static_cast<float>(pose.x + x), static_cast<float>(pose.y + y), static_cast<float>(z), 0.f};
}

}  // namespace

void SceneSpec::validate() const {
  if (n_agents < 0) throw ConfigError("scene: n_agents must be >= 0");
  if (static_cast<Index>(agent_speeds.size()) != n_agents) {
    throw ConfigError("scene: need one speed per agent (" + std::to_string(n_agents) + "), got " +
                      std::to_string(agent_speeds.size()));
  }
  if (points_per_frame < 0) throw ConfigError("scene: points_per_frame must be >= 0");
  if (!(noise_sigma >= 0)) throw ConfigError("scene: noise_sigma must be >= 0");
  if (!(track_half_width > 0 && wall_height > 0 && wall_half_length > 0 && loop_length > 0 && wall_bend_radius > 0)) {
    throw ConfigError("scene: track dimensions must be positive");
  }
  if (!(agent_point_fraction >= 0 && agent_point_fraction <= 1)) {
    throw ConfigError("scene: agent_point_fraction must lie in [0, 1]");
  }
}

AgentPose agent_pose(const SceneSpec& spec, Index agent, Index t) {
  // Agents alternate between the two lanes and start spread along the loop.
  const double lane = (agent % 2 == 0 ? -0.35 : 0.35) * spec.track_half_width;
  const double start = -spec.loop_length / 4.0 + static_cast<double>(agent) * spec.loop_length / 3.0;
  const double speed = spec.agent_speeds.at(static_cast<std::size_t>(agent));
  return {wrap(start + speed * static_cast<double>(t), spec.loop_length), lane};
}

std::pair<Index, Index> agent_point_range(const SceneSpec& spec, Index agent) {
  const Index total = agent_points_total(spec);
  const Index per = spec.n_agents > 0 ? total / spec.n_agents : 0;
  const Index first = agent * per;
  return {first, agent == spec.n_agents - 1 ? total : first + per};
}

PointCloud gen_frame(const SceneSpec& spec, Index t) {
  spec.validate();
  if (t < 0) throw ConfigError("gen_frame: frame index must be >= 0");
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(spec.points_per_frame));
  const Index agent_total = agent_points_total(spec);
  Index agent = 0;
  for (Index i = 0; i < spec.points_per_frame; ++i) {
    const PointDraws d{spec.seed, t, i};
    LidarPoint p;
    if (i < agent_total) {
      while (agent < spec.n_agents - 1 && i >= agent_point_range(spec, agent).second) ++agent;
      p = box_surface_point(agent_pose(spec, agent, t), PointDraws{spec.seed, kBodyFrame, i});
    } else {
      const double side = d.uniform(kSelect) < 0.5 ? -1.0 : 1.0;
      const double x = (2.0 * d.uniform(kU) - 1.0) * spec.wall_half_length;
      const double y = side * spec.track_half_width + x * x / (2.0 * spec.wall_bend_radius);
      p = {static_cast<float>(x), static_cast<float>(y), static_cast<float>(d.uniform(kV) * spec.wall_height), 0.f};
    }
    const auto n = d.normals();
    p.x += static_cast<float>(spec.noise_sigma * n[0]);
    p.y += static_cast<float>(spec.noise_sigma * n[1]);
    p.z += static_cast<float>(spec.noise_sigma * n[2]);
    p.intensity = static_cast<float>(d.uniform(kIntensity));
    cloud.points.push_back(p);
  }
  return cloud;
}

std::vector<PointCloud> gen_sequence(const SceneSpec& spec, Index t0, Index length) {
  if (length < 1) throw ConfigError("gen_sequence: length must be >= 1");
  std::vector<PointCloud> frames;
  frames.reserve(static_cast<std::size_t>(length));
  for (Index t = t0; t < t0 + length; ++t) frames.push_back(gen_frame(spec, t));
  return frames;
}

std::vector<std::filesystem::path> export_frames(const SceneSpec& spec, Index t0, Index count,
                                                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (Index t = t0; t < t0 + count; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "sweep_%06lld.bin", static_cast<long long>(t));
    paths.push_back(dir / name);
    write_pointcloud_file(paths.back(), gen_frame(spec, t), 4);
  }
  return paths;
}

}  // namespace ppn
