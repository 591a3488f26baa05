#include "ppn/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace ppn {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::defaults() {
  static const std::map<std::string, std::string> kDefaults{
      // bev
      {"width", "64"},
      {"height", "64"},
      {"resolution", "0.5"},
      {"depth_size", "32"},
      {"threshold", "0.5"},
      {"stride", "4"},
      // networks
      {"t_in", "16"},
      {"depth", "3"},
      {"base_channels", "16"},
      {"variant", "default"},
      // training
      {"regime", "reconstruction"},
      {"loss", "auto"},
      {"lambda", "0.85"},
      {"beta", "1"},
      {"lr", "1e-4"},
      {"iterations", "700"},
      {"future_offset", "1"},
      {"future_len", "1"},
      {"data", "synthetic"},
      // synthetic scenes
      {"frames", "16"},
      {"points_per_frame", "4000"},
      {"n_agents", "1"},
      {"agent_speed", "0.5"},
      {"noise_sigma", "0.02"},
      // inference / bench
      {"seed", "0"},
      {"runs", "20"},
      {"mode", "both"},
      {"model", ""},
      {"seg_model", ""},
      {"recon_model", ""},
      // gradcheck
      {"gradcheck_threshold", "1e-4"},
      {"corrupt_kernel", ""},
  };
  return kDefaults;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      set(line);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!defaults().contains(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::number(const std::string& key) const {
  const std::string& s = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + s + "' is not a finite number");
  }
}

Index RunConfig::integer(const std::string& key) const {
  const std::string& s = get(key);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError(key + ": '" + s + "' is not an integer");
  return static_cast<Index>(v);
}

std::uint64_t RunConfig::seed() const {
  const Index s = integer("seed");
  if (s < 0) throw ConfigError("seed must be >= 0");
  return static_cast<std::uint64_t>(s);
}

BevConfig RunConfig::bev() const {
  BevConfig c{number("resolution"), integer("width"), integer("height"), integer("depth_size"), number("threshold")};
  c.validate();
  return c;
}

NetworkConfig RunConfig::network(bool skips, std::uint64_t seed_offset) const {
  NetworkConfig c;
  c.t_in = integer("t_in");
  c.base_channels = integer("base_channels");
  c.depth = integer("depth");
  c.skips = skips;
  c.seed = seed() + seed_offset;
  c.input_height = integer("height");
  c.input_width = integer("width");
  c.validate();
  return c;
}

TrainConfig RunConfig::train() const {
  TrainConfig c;
  c.lr = number("lr");
  c.lambda_weight = number("lambda");
  c.beta_smooth = number("beta");
  c.iterations = integer("iterations");
  const std::string& regime = get("regime");
  if (regime != "reconstruction" && regime != "future") {
    throw ConfigError("regime: '" + regime + "' (valid: reconstruction, future)");
  }
  const std::string& loss = get("loss");
  if (loss == "auto") {
    c.loss_kind = regime == "future" ? LossKind::kMseSmoothL1 : LossKind::kMssce;
  } else {
    c.loss_kind = parse_loss_kind(loss);
  }
  if ((regime == "future") != (c.loss_kind == LossKind::kMseSmoothL1)) {
    throw ConfigError("loss '" + loss + "' does not fit regime '" + regime + "'");
  }
  c.seed = seed();
  c.future_offset_d = integer("future_offset");
  c.future_len_F = integer("future_len");
  c.validate();
  return c;
}

SceneSpec RunConfig::scene() const {
  SceneSpec s;
  s.seed = seed() + 7;
  s.points_per_frame = integer("points_per_frame");
  s.n_agents = integer("n_agents");
  if (s.n_agents < 0) throw ConfigError("n_agents must be >= 0");
  s.agent_speeds.assign(static_cast<std::size_t>(s.n_agents), number("agent_speed"));
  s.noise_sigma = number("noise_sigma");
  s.validate();
  return s;
}

int RunConfig::floats_per_point() const {
  const Index stride = integer("stride");
  if (stride != 4 && stride != 5) throw ConfigError("stride must be 4 or 5");
  return static_cast<int>(stride);
}

}  // namespace ppn
