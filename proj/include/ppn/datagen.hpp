#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ppn/bev.hpp"

namespace ppn {

/// Racetrack-like synthetic sweep: two gently curved walls along x at
/// y = +/- track_half_width, plus box-shaped agents driving along +x at
/// constant speed. Agent positions wrap around a loop of length loop_length.
struct SceneSpec {
  std::uint64_t seed = 7;
  double track_half_width = 6.0;  // m
  double wall_height = 1.0;       // m
  double wall_half_length = 20.0;  // m, walls span x in [-L, L]
  double wall_bend_radius = 250.0;  // m, y offset grows as x^2 / 2R
  Index n_agents = 1;
  std::vector<double> agent_speeds{0.5};  // m/frame, one per agent
  Index points_per_frame = 4000;
  double agent_point_fraction = 0.25;
  double noise_sigma = 0.02;  // m
  double loop_length = 40.0;  // m

  void validate() const;
};

inline constexpr double kAgentLength = 4.8;
inline constexpr double kAgentWidth = 1.9;
inline constexpr double kAgentHeight = 1.2;

struct AgentPose {
  double x = 0;  // box center, m
  double y = 0;
};

/// Noise-free box center of agent `a` at frame t.
AgentPose agent_pose(const SceneSpec& spec, Index agent, Index t);

/// Indices [first, last) of the points sampled on agent `a`'s box.
std::pair<Index, Index> agent_point_range(const SceneSpec& spec, Index agent);

PointCloud gen_frame(const SceneSpec& spec, Index t);
std::vector<PointCloud> gen_sequence(const SceneSpec& spec, Index t0, Index length);

/// Writes frames t0 .. t0+count-1 as sweep_NNNNNN.bin (stride-4 float32).
std::vector<std::filesystem::path> export_frames(const SceneSpec& spec, Index t0, Index count,
                                                 const std::filesystem::path& dir);

}  // namespace ppn
