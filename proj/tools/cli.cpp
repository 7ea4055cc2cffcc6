#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "rrm/ablation.hpp"
#include "rrm/checkpoint.hpp"
#include "rrm/config.hpp"
#include "rrm/error.hpp"
#include "rrm/gradcheck.hpp"
#include "rrm/ppm.hpp"
#include "rrm/raw_io.hpp"
#include "rrm/scan_order.hpp"
#include "rrm/synthetic.hpp"
#include "rrm/train.hpp"

namespace rrm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kGradcheckTolerance = 1e-3;

struct Options {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::string data;
  std::string ckpt;
  std::string input;
  std::size_t height = 0;
  std::size_t width = 0;
  std::string direction = "all";
  std::string axis;
};

RunConfig resolve_config(const Options& o) {
  return o.config.empty() ? parse_run_config(json::object()) : load_run_config(o.config);
}

void announce(std::ostream& err, const std::string& command, std::uint64_t seed, const json& config) {
  err << json{{"command", command}, {"seed", seed}, {"config", config}}.dump() << '\n';
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

json eval_json(const EvalReport& r) {
  return {{"loss", r.loss}, {"psnr", r.psnr}, {"ssim", r.ssim}, {"raw_psnr", r.raw_psnr}};
}

Dataset data_for(const Options& o, const RunConfig& cfg) {
  if (!o.data.empty()) return load_dataset(o.data);
  return gen_synthetic(cfg.data);
}

int cmd_gen_data(const Options& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve_config(o);
  if (o.seed) cfg.data.seed = *o.seed;
  require(!o.out.empty(), "gen-data requires --out <dir>");
  announce(err, "gen-data", cfg.data.seed, {{"data", cfg.data}});
  const Dataset data = gen_synthetic(cfg.data);
  save_dataset(data, o.out);
  out << json{{"samples", data.samples.size()}, {"baseline_psnr", data.baseline_psnr}, {"out", o.out}}.dump() << '\n';
  return 0;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve_config(o);
  if (o.seed) cfg.train.seed = *o.seed;
  require(!o.out.empty(), "train requires --out <dir>");
  announce(err, "train", cfg.train.seed, cfg);
  const Dataset data = data_for(o, cfg);
  require(data.config.cfa == cfg.network.cfa, "dataset CFA " + cfa_name(data.config.cfa) +
                                                  " does not match network CFA " + cfa_name(cfg.network.cfa));
  ensure_dir(o.out);

  RetinexRawMamba net(cfg.network, cfg.train.seed);
  std::string log = "step,loss,lr\n";
  const TrainResult result = train(net, data, cfg.train, cfg.loss, [&](const TrainLogEntry& e) {
    err << json{{"step", e.step}, {"loss", e.loss}, {"lr", e.lr}}.dump() << '\n';
  });
  char line[96];
  for (const TrainLogEntry& e : result.log) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g\n", e.step, e.loss, e.lr);
    log += line;
  }
  write_text(fs::path(o.out) / "train_log.csv", log);
  const json extra = {{"loss", cfg.loss}, {"train", cfg.train}};
  save_checkpoint(fs::path(o.out) / "model.ckpt", net, result.steps, extra);
  const json metrics = {{"steps", result.steps},
                        {"baseline_psnr", data.baseline_psnr},
                        {"initial", eval_json(result.before)},
                        {"final", eval_json(result.after)}};
  write_text(fs::path(o.out) / "metrics.json", metrics.dump(2) + "\n");
  out << metrics.dump() << '\n';
  return 0;
}

LossConfig loss_from(const LoadedCheckpoint& ck) {
  LossConfig loss;
  if (ck.extra.contains("loss")) from_json(ck.extra.at("loss"), loss);
  return loss;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  require(!o.ckpt.empty(), "eval requires --ckpt <file>");
  require(!o.data.empty(), "eval requires --data <dir>");
  require(fs::exists(o.ckpt), "checkpoint not found: " + o.ckpt);
  const LoadedCheckpoint ck = load_checkpoint(o.ckpt);
  const LossConfig loss = loss_from(ck);
  announce(err, "eval", ck.net->seed(), {{"network", ck.net->config()}, {"loss", loss}});
  const Dataset data = load_dataset(o.data);
  out << json{{"final", eval_json(evaluate(*ck.net, data, loss))}}.dump() << '\n';
  return 0;
}

int cmd_infer(const Options& o, std::ostream& out, std::ostream& err) {
  require(!o.ckpt.empty(), "infer requires --ckpt <file>");
  require(!o.input.empty(), "infer requires --input <file.rraw>");
  require(fs::exists(o.input), "input file not found: " + o.input);
  require(fs::exists(o.ckpt), "checkpoint not found: " + o.ckpt);
  const LoadedCheckpoint ck = load_checkpoint(o.ckpt);
  announce(err, "infer", ck.net->seed(), {{"network", ck.net->config()}});
  const RawImage raw = read_raw_container(o.input);
  require(raw.cfa == ck.net->config().cfa, "input CFA does not match the checkpoint");
  NetworkOutput result;
  {
    NoGradGuard no_grad;
    result = ck.net->forward(pack(raw));
  }
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  ensure_dir(dir);
  const fs::path target = dir / (fs::path(o.input).stem().string() + ".ppm");
  const std::size_t clipped = write_ppm(result.srgb, target);
  out << json{{"output", target.string()}, {"clipped", clipped}}.dump() << '\n';
  return 0;
}

int cmd_dump_scan(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.height > 0 && o.width > 0, "dump-scan requires positive --height and --width");
  announce(err, "dump-scan", o.seed.value_or(0),
           {{"height", o.height}, {"width", o.width}, {"direction", o.direction}});
  std::vector<ScanDirection> dirs;
  if (o.direction == "all") {
    const auto all = eight_directions();
    dirs.assign(all.begin(), all.end());
  } else {
    dirs.push_back(parse_direction(o.direction));
  }
  const bool labelled = dirs.size() > 1;
  out << (labelled ? "direction,k,row,col\n" : "k,row,col\n");
  for (const ScanDirection d : dirs) {
    const ScanOrder order = build_order(d, o.height, o.width);
    for (std::size_t k = 0; k < order.order.size(); ++k) {
      if (labelled) out << direction_name(d) << ',';
      out << k << ',' << order.order[k] / o.width << ',' << order.order[k] % o.width << '\n';
    }
  }
  return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = o.seed.value_or(0);
  announce(err, "gradcheck", seed, {{"tolerance", kGradcheckTolerance}});
  bool ok = true;
  out << "name,max_rel_err,checked,status\n";
  for (const GradcheckResult& r : run_gradcheck_suite(seed)) {
    const bool pass = r.max_rel_err <= kGradcheckTolerance;
    ok = ok && pass;
    char line[160];
    std::snprintf(line, sizeof line, "%s,%.3e,%zu,%s\n", r.name.c_str(), r.max_rel_err, r.checked,
                  pass ? "pass" : "FAIL");
    out << line;
  }
  if (!ok) throw NumericError("gradient check exceeded tolerance " + std::to_string(kGradcheckTolerance));
  return 0;
}

int cmd_ablate(const Options& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve_config(o);
  if (o.seed) cfg.train.seed = *o.seed;
  require(!o.axis.empty(), "ablate requires --axis <name|all>");
  std::vector<std::string> axes;
  if (o.axis == "all") {
    axes = ablation_axes();
  } else {
    ablation_variants(o.axis, cfg.network, cfg.loss);  // validates the axis
    axes.push_back(o.axis);
  }
  announce(err, "ablate", cfg.train.seed, cfg);
  const Dataset data = data_for(o, cfg);
  std::vector<AblationRow> rows;
  for (const std::string& axis : axes) {
    const auto part = run_ablation(axis, cfg, data, cfg.train.seed);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const std::string csv = ablation_csv(rows);
  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_text(fs::path(o.out) / ("ablation_" + o.axis + ".csv"), csv);
  }
  out << csv;
  return 0;
}

int cmd_inspect(const Options& o, std::ostream& out, std::ostream& err) {
  require(!o.ckpt.empty(), "inspect-ckpt requires --ckpt <file>");
  require(fs::exists(o.ckpt), "checkpoint not found: " + o.ckpt);
  json header = read_checkpoint_header(o.ckpt);
  announce(err, "inspect-ckpt", header.value("seed", std::uint64_t{0}), header.value("config", json::object()));
  std::size_t total = 0;
  for (const auto& t : header.at("tensors")) total += t.at("length").get<std::size_t>();
  header["parameter_count"] = total;
  out << header.dump(2) << '\n';
  return 0;
}

int report(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  err << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
  return code;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Retinex-RAWMamba toy reproduction: data, training, inference and diagnostics", "rrm"};
  app.require_subcommand(1);
  Options o;

  auto seed_opt = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { o.seed = s; }, "Random seed");
  };
  auto config_opt = [&](CLI::App* sub) { sub->add_option("--config", o.config, "Run configuration JSON"); };

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic low-light RAW dataset");
  seed_opt(gen);
  config_opt(gen);
  gen->add_option("--out", o.out, "Output directory");

  auto* tr = app.add_subcommand("train", "Train a network and write a checkpoint");
  seed_opt(tr);
  config_opt(tr);
  tr->add_option("--data", o.data, "Dataset directory (generated from the config when omitted)");
  tr->add_option("--out", o.out, "Output directory");

  auto* inf = app.add_subcommand("infer", "Render a RAW container to PPM");
  seed_opt(inf);
  inf->add_option("--ckpt", o.ckpt, "Checkpoint file");
  inf->add_option("--input", o.input, "RAW container (.rraw)");
  inf->add_option("--out", o.out, "Output directory");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  seed_opt(ev);
  ev->add_option("--ckpt", o.ckpt, "Checkpoint file");
  ev->add_option("--data", o.data, "Dataset directory");

  auto* dump = app.add_subcommand("dump-scan", "Print a scan order as CSV");
  seed_opt(dump);
  dump->add_option("--height", o.height, "Grid height");
  dump->add_option("--width", o.width, "Grid width");
  dump->add_option("--direction", o.direction, "Direction name or 'all'");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  seed_opt(gc);

  auto* ab = app.add_subcommand("ablate", "Run an ablation axis and print a CSV report");
  seed_opt(ab);
  config_opt(ab);
  ab->add_option("--axis", o.axis, "scan_directions, rdm_on_off, fusion, loss, enhance_stage or all");
  ab->add_option("--data", o.data, "Dataset directory (generated from the config when omitted)");
  ab->add_option("--out", o.out, "Directory for the CSV report");

  auto* ins = app.add_subcommand("inspect-ckpt", "Print a checkpoint header");
  seed_opt(ins);
  ins->add_option("--ckpt", o.ckpt, "Checkpoint file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    return report(err, "usage", e.what(), 1);
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o, out, err);
    if (tr->parsed()) return cmd_train(o, out, err);
    if (inf->parsed()) return cmd_infer(o, out, err);
    if (ev->parsed()) return cmd_eval(o, out, err);
    if (dump->parsed()) return cmd_dump_scan(o, out, err);
    if (gc->parsed()) return cmd_gradcheck(o, out, err);
    if (ab->parsed()) return cmd_ablate(o, out, err);
    if (ins->parsed()) return cmd_inspect(o, out, err);
  } catch (const NumericError& e) {
    return report(err, e.kind(), e.what(), 2);
  } catch (const Error& e) {
    return report(err, e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return report(err, "internal", e.what(), 1);
  }
  return report(err, "usage", "no subcommand", 1);
}

}  // namespace rrm::cli
