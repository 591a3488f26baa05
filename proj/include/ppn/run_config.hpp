#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ppn/bev.hpp"
#include "ppn/datagen.hpp"
#include "ppn/engine.hpp"
#include "ppn/network.hpp"

namespace ppn {

/// Flat key=value configuration. A config file supplies one pair per line
/// (`#` starts a comment); command-line pairs override file values. Unknown
/// keys are rejected.
class RunConfig {
 public:
  RunConfig();

  static const std::map<std::string, std::string>& defaults();

  void load_file(const std::filesystem::path& path);
  /// Parses "key=value"; throws ConfigError on unknown keys or missing '='.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  double number(const std::string& key) const;
  Index integer(const std::string& key) const;
  std::uint64_t seed() const;

  // Typed views, each validated against its module's preconditions.
  BevConfig bev() const;
  NetworkConfig network(bool skips, std::uint64_t seed_offset) const;
  TrainConfig train() const;
  SceneSpec scene() const;
  int floats_per_point() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ppn
