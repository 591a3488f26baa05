#include "ppn/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ppn/bev.hpp"
#include "ppn/datagen.hpp"
#include "ppn/engine.hpp"
#include "ppn/errors.hpp"
#include "ppn/gradient_suite.hpp"
#include "ppn/image_io.hpp"
#include "ppn/model_io.hpp"
#include "ppn/network.hpp"
#include "ppn/run_config.hpp"

namespace ppn {

namespace {

namespace fs = std::filesystem;
using F = float;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::vector<std::string> positional;
};

struct Context {
  RunConfig config;
  std::vector<fs::path> inputs;
  fs::path out;
};

Context make_context(const Common& common) {
  Context ctx;
  if (!common.config_path.empty()) ctx.config.load_file(common.config_path);
  for (const std::string& arg : common.positional) {
    if (arg.find('=') != std::string::npos) {
      ctx.config.set(arg);
    } else {
      ctx.inputs.emplace_back(arg);
    }
  }
  if (common.seed) ctx.config.set("seed", std::to_string(*common.seed));
  ctx.out = common.out_dir;
  return ctx;
}

void require_no_inputs(const Context& ctx, const char* command) {
  if (!ctx.inputs.empty()) {
    throw ConfigError(std::string(command) + " takes no input files (got '" + ctx.inputs.front().string() + "')");
  }
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_f32(const fs::path& path, const Tensor<F>& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(t.values().data()), static_cast<std::streamsize>(t.size() * sizeof(F)));
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

/// BEV frames from sweep files, in argument order.
std::vector<BevMap> convert_files(const std::vector<fs::path>& files, const RunConfig& config) {
  const BevConfig bev = config.bev();
  const int stride = config.floats_per_point();
  std::vector<BevMap> maps;
  maps.reserve(files.size());
  for (const fs::path& file : files) {
    maps.push_back(pointcloud_to_bev(read_pointcloud_file(file, stride), bev));
  }
  return maps;
}

/// Synthetic frames 0 .. count-1 rasterized with the configured grid.
std::vector<BevMap> synthetic_store(const RunConfig& config, Index count) {
  const SceneSpec scene = config.scene();
  const BevConfig bev = config.bev();
  std::vector<BevMap> maps;
  maps.reserve(static_cast<std::size_t>(count));
  for (Index t = 0; t < count; ++t) maps.push_back(pointcloud_to_bev(gen_frame(scene, t), bev));
  return maps;
}

std::vector<fs::path> sweep_files_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("data directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".bin") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .bin sweeps in " + dir.string());
  return files;
}

/// Frames for training or inference: explicit files, a data directory, or
/// the synthetic generator.
std::vector<BevMap> frame_store(const Context& ctx, Index needed) {
  if (!ctx.inputs.empty()) return convert_files(ctx.inputs, ctx.config);
  const std::string& source = ctx.config.get("data");
  if (source == "synthetic") return synthetic_store(ctx.config, needed);
  return convert_files(sweep_files_in(source), ctx.config);
}

BevSequence window(const std::vector<BevMap>& store, Index first, Index length) {
  if (first < 0 || first + length > static_cast<Index>(store.size())) {
    throw DataError("need " + std::to_string(length) + " frames, have " + std::to_string(store.size()));
  }
  return stack_sequence(std::vector<BevMap>(store.begin() + first, store.begin() + first + length));
}

Network<F> network_or_model(const RunConfig& config, const std::string& model_key, bool skips,
                            std::uint64_t seed_offset) {
  const std::string& path = config.get(model_key);
  if (!path.empty()) return load_model<F>(path);
  return Network<F>(config.network(skips, seed_offset));
}

void check_input(const Network<F>& net, const BevSequence& seq, const char* what) {
  if (net.config().t_in != seq.t_len()) {
    throw ShapeError(std::string(what) + " expects " + std::to_string(net.config().t_in) + " input frames, got " +
                     std::to_string(seq.t_len()));
  }
}

int cmd_convert(const Context& ctx, std::ostream& out) {
  if (ctx.inputs.empty()) throw ConfigError("convert needs at least one sweep file");
  const std::vector<BevMap> maps = convert_files(ctx.inputs, ctx.config);
  prepare_out(ctx.out);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    write_bev_pgm(ctx.out / (ctx.inputs[i].stem().string() + ".pgm"), maps[i]);
  }
  out << "converted " << maps.size() << " sweep(s) into " << ctx.out.string() << "\n";
  return kExitOk;
}

int cmd_synth(const Context& ctx, std::ostream& out) {
  require_no_inputs(ctx, "synth");
  const SceneSpec scene = ctx.config.scene();
  const Index frames = ctx.config.integer("frames");
  if (frames < 1) throw ConfigError("frames must be >= 1");
  prepare_out(ctx.out);
  const auto written = export_frames(scene, 0, frames, ctx.out);
  out << "wrote " << written.size() << " synthetic sweep(s) into " << ctx.out.string() << "\n";
  return kExitOk;
}

int cmd_train(const Context& ctx, std::ostream& out) {
  const RunConfig& config = ctx.config;
  const TrainConfig train = config.train();
  const bool future = config.get("regime") == "future";
  const Index t_in = config.integer("t_in");
  const Index frames = config.integer("frames");
  if (frames < 1) throw ConfigError("frames must be >= 1");

  std::optional<Network<F>> seg;
  NetworkConfig net_config = config.network(future, future ? 0 : 1);
  if (future) {
    net_config.out_channels = train.future_len_F;
    net_config.validate();
  } else {
    seg.emplace(network_or_model(config, "seg_model", true, 0));
  }
  Worker<F> model{1, future ? Role::kSegmentation : Role::kReconstruction, Network<F>(net_config)};

  const Index extra = future ? train.future_offset_d + train.future_len_F : 0;
  const std::vector<BevMap> store = frame_store(ctx, t_in + frames - 1 + extra);
  const Index windows = static_cast<Index>(store.size()) - t_in + 1 - extra;
  if (windows < 1) {
    throw DataError("training needs at least " + std::to_string(t_in + extra) + " frames, have " +
                    std::to_string(store.size()));
  }
  if (seg) check_input(*seg, window(store, 0, t_in), "segmentation model");
  prepare_out(ctx.out);

  const std::uint64_t initial_hash = weights_hash(model.network);
  TrainLog log;
  if (future) {
    log = train_future_segmentation(model.network, store, train);
  } else {
    const Worker<F> seg_worker{0, Role::kSegmentation, std::move(*seg)};
    log = train_reconstruction<F>(
        model, seg_worker, [&](Index it) { return window(store, it % windows, t_in); }, train);
    save_model(ctx.out / "seg_model.ppn", seg_worker.network);
  }
  const std::uint64_t final_hash = weights_hash(model.network);
  save_model(ctx.out / "model.ppn", model.network);

  std::ofstream csv(ctx.out / "train_log.csv");
  csv << std::setprecision(9);
  for (const TrainRecord& r : log) csv << r.iteration << "," << r.loss << "," << r.accuracy << "\n";
  if (!csv) throw ConfigError("failed writing train_log.csv");

  write_f32(ctx.out / "final_output.f32", model.network.forward(sequence_tensor<F>(window(store, 0, t_in))));

  out << "regime=" << config.get("regime") << "\n"
      << "loss=" << loss_kind_name(train.loss_kind) << "\n"
      << "iterations=" << log.size() << "\n"
      << "first_loss=" << log.front().loss << "\n"
      << "final_loss=" << log.back().loss << "\n"
      << "final_accuracy=" << log.back().accuracy << "\n"
      << "initial_hash=" << hex64(initial_hash) << "\n"
      << "final_hash=" << hex64(final_hash) << "\n";
  return kExitOk;
}

/// infer and render: seg/recon maps for the first window; infer also dumps
/// raw float32 outputs.
int cmd_infer(const Context& ctx, std::ostream& out, bool raw) {
  const RunConfig& config = ctx.config;
  const std::string& variant = config.get("variant");
  if (variant != "default" && variant != "rgb") {
    throw ConfigError("variant: '" + variant + "' (valid: default, rgb)");
  }
  if (variant == "rgb") {
    NetworkConfig rgb_config = NetworkConfig::rgb(config.integer("base_channels"), config.integer("depth"));
    rgb_config.seed = config.seed();
    rgb_config.input_height = config.integer("height");
    rgb_config.input_width = config.integer("width");
    rgb_config.validate();
    const std::string& path = config.get("model");
    const Network<F> net = path.empty() ? Network<F>(rgb_config) : load_model<F>(path);
    const BevSequence pair = window(frame_store(ctx, 2), 0, 2);
    check_input(net, pair, "rgb model");
    if (net.config().out_channels != 3 || net.config().output_activation != Activation::kTanh) {
      throw ShapeError("rgb rendering needs a 3-channel tanh model");
    }
    const Image img = render_rgb(net, pair);
    prepare_out(ctx.out);
    write_pnm(ctx.out / "rgb.ppm", img);
    if (raw) write_f32(ctx.out / "rgb.f32", net.forward(sequence_tensor<F>(pair)));
    out << "wrote rgb.ppm (" << img.width << "x" << img.height << ")\n";
    return kExitOk;
  }

  const Network<F> seg = network_or_model(config, "seg_model", true, 0);
  const Network<F> recon = network_or_model(config, "recon_model", false, 1);
  if (seg.config().t_in != recon.config().t_in) {
    throw ShapeError("segmentation and reconstruction models disagree on input frames (" +
                     std::to_string(seg.config().t_in) + " vs " + std::to_string(recon.config().t_in) + ")");
  }
  const Index t_in = seg.config().t_in;
  const BevSequence seq = window(frame_store(ctx, t_in), 0, t_in);
  check_input(seg, seq, "segmentation model");
  const Tensor<F> input = sequence_tensor<F>(seq);
  const Tensor<F> seg_out = seg.forward(input);
  const Tensor<F> recon_out = recon.forward(input);

  prepare_out(ctx.out);
  for (Index c = 0; c < seg_out.channels(); ++c) {
    const std::string suffix = seg_out.channels() == 1 ? "" : "_" + std::to_string(c);
    write_pnm(ctx.out / ("seg" + suffix + ".pgm"), unit_plane_to_image(seg_out, c));
  }
  for (Index c = 0; c < recon_out.channels(); ++c) {
    const std::string suffix = recon_out.channels() == 1 ? "" : "_" + std::to_string(c);
    write_pnm(ctx.out / ("recon" + suffix + ".pgm"), unit_plane_to_image(recon_out, c));
  }
  if (raw) {
    write_f32(ctx.out / "seg.f32", seg_out);
    write_f32(ctx.out / "recon.f32", recon_out);
  }
  out << "wrote segmentation and reconstruction maps (" << seg_out.width() << "x" << seg_out.height() << ") to "
      << ctx.out.string() << "\n";
  return kExitOk;
}

int cmd_bench(const Context& ctx, std::ostream& out) {
  require_no_inputs(ctx, "bench");
  const RunConfig& config = ctx.config;
  const std::string& mode = config.get("mode");
  if (mode != "sequential" && mode != "parallel" && mode != "both") {
    throw ConfigError("mode: '" + mode + "' (valid: sequential, parallel, both)");
  }
  const Index runs = config.integer("runs");
  if (runs < 1) throw ConfigError("runs must be >= 1");
  const Worker<F> seg{0, Role::kSegmentation, Network<F>(config.network(true, 0))};
  const Worker<F> recon{1, Role::kReconstruction, Network<F>(config.network(false, 1))};
  const Index t_in = config.integer("t_in");
  const BevSequence seq = window(synthetic_store(config, t_in), 0, t_in);
  prepare_out(ctx.out);

  std::vector<BenchReport> reports;
  if (mode != "parallel") reports.push_back(run_sequential(seg, recon, seq, runs).report);
  if (mode != "sequential") reports.push_back(run_parallel(seg, recon, seq, runs).report);
  if (reports.size() == 2) pair_reports(reports[0], reports[1]);

  std::ofstream file(ctx.out / "bench_report.txt");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i) file << "\n";
    file << reports[i].to_text();
  }
  if (!file) throw ConfigError("failed writing bench_report.txt");
  for (const BenchReport& r : reports) {
    out << r.mode << ": mean " << r.mean_s * 1e3 << " ms over " << r.runs << " run(s), threads=" << r.threads;
    if (r.speedup_vs) out << ", speedup_vs=" << *r.speedup_vs;
    out << "\n";
  }
  return kExitOk;
}

int cmd_gradcheck(const Context& ctx, std::ostream& out, std::ostream& err) {
  require_no_inputs(ctx, "gradcheck");
  GradSuiteOptions opt;
  opt.kernel_threshold = ctx.config.number("gradcheck_threshold");
  if (!(opt.kernel_threshold > 0)) throw ConfigError("gradcheck_threshold must be > 0");
  opt.network_threshold = 10 * opt.kernel_threshold;
  opt.corrupt_kernel = ctx.config.get("corrupt_kernel");
  opt.seed = ctx.config.seed();

  const std::vector<GradCheckEntry> entries = run_gradient_suite(opt);
  std::vector<std::string> offenders;
  for (const GradCheckEntry& e : entries) {
    out << std::left << std::setw(26) << e.kernel << " worst=" << std::scientific << std::setprecision(3)
        << e.worst_rel_error << " threshold=" << e.threshold << (e.passed() ? "  ok" : "  FAIL") << "\n";
    if (!e.passed()) offenders.push_back(e.kernel);
  }
  out << std::defaultfloat;
  if (offenders.empty()) {
    out << "all " << entries.size() << " gradient checks passed\n";
    return kExitOk;
  }
  err << "gradient check failed for:";
  for (const std::string& k : offenders) err << " " << k;
  err << "\n";
  return kExitUser;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"LiDAR BEV segmentation / reconstruction toolkit", "ppn"};
  app.require_subcommand(1);
  Common common;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"convert", "Convert sweep files to BEV graymaps"},
      {"synth", "Write synthetic racetrack sweeps"},
      {"train", "Train a reconstruction or future-segmentation network"},
      {"infer", "Run both networks and write maps plus raw float32 outputs"},
      {"bench", "Benchmark sequential against parallel inference"},
      {"render", "Render network outputs as images"},
      {"gradcheck", "Finite-difference check of every kernel and loss"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", common.config_path, "key=value config file");
    sub->add_option("--seed", common.seed, "Seed for weights and synthetic data");
    sub->add_option("--out", common.out_dir, "Output directory")->capture_default_str();
    sub->add_option("args", common.positional, "key=value overrides and input files");
    subs[name] = sub;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const std::string help = app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help();
    err << "error: " << e.what() << "\n" << help;
    return kExitUser;
  }

  try {
    const Context ctx = make_context(common);
    if (subs["convert"]->parsed()) return cmd_convert(ctx, out);
    if (subs["synth"]->parsed()) return cmd_synth(ctx, out);
    if (subs["train"]->parsed()) return cmd_train(ctx, out);
    if (subs["infer"]->parsed()) return cmd_infer(ctx, out, true);
    if (subs["render"]->parsed()) return cmd_infer(ctx, out, false);
    if (subs["bench"]->parsed()) return cmd_bench(ctx, out);
    if (subs["gradcheck"]->parsed()) return cmd_gradcheck(ctx, out, err);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const CycleError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUser;
}

}  // namespace ppn
