#include "rrm/config.hpp"

#include <fstream>
#include <initializer_list>

#include "rrm/error.hpp"

namespace rrm {

using nlohmann::json;

std::string pixel_loss_name(PixelLoss loss) {
  switch (loss) {
    case PixelLoss::L1: return "l1";
    case PixelLoss::L2: return "l2";
    case PixelLoss::None: return "none";
  }
  return "none";
}

PixelLoss parse_pixel_loss(const std::string& name) {
  if (name == "l1") return PixelLoss::L1;
  if (name == "l2") return PixelLoss::L2;
  if (name == "none") return PixelLoss::None;
  throw ConfigError("unknown loss '" + name + "' (expected l1, l2 or none)");
}

void LossConfig::validate() const {
  if (!(alpha_raw >= 0.0) || !(beta_srgb >= 0.0)) throw ConfigError("loss weights must be non-negative");
  if (srgb_loss == PixelLoss::None) throw ConfigError("srgb_loss cannot be none");
}

void TrainConfig::validate() const {
  if (!(lr_init > 0.0) || !(lr_final >= 0.0)) throw ConfigError("learning rates must be positive");
  if (lr_final > lr_init) throw ConfigError("lr_final must not exceed lr_init");
  if (schedule != "cosine" && schedule != "constant") {
    throw ConfigError("unknown schedule '" + schedule + "' (expected cosine or constant)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be non-negative");
  if (batch != 1) throw ConfigError("only batch = 1 is supported");
  if (epochs == 0 && steps == 0) throw ConfigError("either epochs or steps must be positive");
}

void DataConfig::validate() const {
  if (count == 0) throw ConfigError("data.count must be positive");
  const std::size_t b = cfa_block(cfa);
  if (size == 0 || size % b != 0) {
    throw ConfigError("data.size " + std::to_string(size) + " is not a multiple of the " + cfa_name(cfa) +
                      " block " + std::to_string(b));
  }
  if (!(read_noise >= 0.0)) throw ConfigError("read_noise must be non-negative");
  if (!(full_well > 0.0)) throw ConfigError("full_well must be positive");
  if (ratios.empty()) throw ConfigError("ratios must not be empty");
  for (double r : ratios) {
    if (!(r >= 1.0)) throw ConfigError("exposure ratios must be at least 1");
  }
  if (!(black_level >= 0.0) || !(white_level > black_level) || white_level > 65535.0) {
    throw ConfigError("need 0 <= black_level < white_level <= 65535");
  }
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& section) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError("unknown field '" + item.key() + "' in config section '" + section + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

}  // namespace

void to_json(json& j, const NetworkConfig& c) {
  j = json{{"base_width", c.base_width},
           {"depth", c.depth},
           {"denoise_blocks", c.denoise_blocks},
           {"demosaic_blocks", c.demosaic_blocks},
           {"cfa", cfa_name(c.cfa)},
           {"in_channels", c.in_channels()},
           {"state_dim", c.state_dim},
           {"scan_directions", c.scan_directions},
           {"ca_reduction", c.ca_reduction},
           {"use_rdm", c.use_rdm},
           {"enhance_branch", c.enhance_branch},
           {"fusion", fusion_name(c.fusion)},
           {"enhance_stage", enhance_stage_name(c.enhance_stage)},
           {"srgb_skip", c.srgb_skip}};
}

void from_json(const json& j, NetworkConfig& c) {
  const std::string s = "network";
  reject_unknown(j,
                 {"base_width", "depth", "denoise_blocks", "demosaic_blocks", "cfa", "in_channels", "state_dim",
                  "scan_directions", "ca_reduction", "use_rdm", "enhance_branch", "fusion", "enhance_stage",
                  "srgb_skip"},
                 s);
  read(j, "base_width", c.base_width, s);
  read(j, "depth", c.depth, s);
  read(j, "denoise_blocks", c.denoise_blocks, s);
  read(j, "demosaic_blocks", c.demosaic_blocks, s);
  read(j, "state_dim", c.state_dim, s);
  read(j, "scan_directions", c.scan_directions, s);
  read(j, "ca_reduction", c.ca_reduction, s);
  read(j, "use_rdm", c.use_rdm, s);
  read(j, "enhance_branch", c.enhance_branch, s);
  read(j, "srgb_skip", c.srgb_skip, s);
  std::string name;
  if (j.contains("cfa")) {
    read(j, "cfa", name, s);
    c.cfa = parse_cfa(name);
  }
  if (j.contains("fusion")) {
    read(j, "fusion", name, s);
    c.fusion = parse_fusion(name);
  }
  if (j.contains("enhance_stage")) {
    read(j, "enhance_stage", name, s);
    c.enhance_stage = parse_enhance_stage(name);
  }
  if (j.contains("in_channels")) {
    std::size_t cin = 0;
    read(j, "in_channels", cin, s);
    if (cin != c.in_channels()) {
      throw ConfigError("network.in_channels " + std::to_string(cin) + " does not match cfa " + cfa_name(c.cfa));
    }
  }
}

void to_json(json& j, const LossConfig& c) {
  j = json{{"alpha_raw", c.alpha_raw},
           {"beta_srgb", c.beta_srgb},
           {"raw_loss", pixel_loss_name(c.raw_loss)},
           {"srgb_loss", pixel_loss_name(c.srgb_loss)}};
}

void from_json(const json& j, LossConfig& c) {
  const std::string s = "loss";
  reject_unknown(j, {"alpha_raw", "beta_srgb", "raw_loss", "srgb_loss"}, s);
  read(j, "alpha_raw", c.alpha_raw, s);
  read(j, "beta_srgb", c.beta_srgb, s);
  std::string name;
  if (j.contains("raw_loss")) {
    read(j, "raw_loss", name, s);
    c.raw_loss = parse_pixel_loss(name);
  }
  if (j.contains("srgb_loss")) {
    read(j, "srgb_loss", name, s);
    c.srgb_loss = parse_pixel_loss(name);
  }
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"lr_init", c.lr_init},       {"lr_final", c.lr_final},         {"schedule", c.schedule},
           {"betas", {c.beta1, c.beta2}}, {"eps", c.eps},                   {"weight_decay", c.weight_decay},
           {"grad_clip", c.grad_clip},
           {"epochs", c.epochs},         {"steps", c.steps},               {"cosine_steps", c.cosine_steps},
           {"seed", c.seed},             {"batch", c.batch},               {"augment", c.augment},
           {"log_every", c.log_every}};
}

void from_json(const json& j, TrainConfig& c) {
  const std::string s = "train";
  reject_unknown(j,
                 {"lr_init", "lr_final", "schedule", "betas", "eps", "weight_decay", "grad_clip", "epochs", "steps",
                  "cosine_steps", "seed", "batch", "augment", "log_every"},
                 s);
  read(j, "lr_init", c.lr_init, s);
  read(j, "lr_final", c.lr_final, s);
  read(j, "schedule", c.schedule, s);
  if (j.contains("betas")) {
    std::vector<double> betas;
    read(j, "betas", betas, s);
    if (betas.size() != 2) throw ConfigError("train.betas must have two entries");
    c.beta1 = betas[0];
    c.beta2 = betas[1];
  }
  read(j, "eps", c.eps, s);
  read(j, "weight_decay", c.weight_decay, s);
  read(j, "grad_clip", c.grad_clip, s);
  read(j, "epochs", c.epochs, s);
  read(j, "steps", c.steps, s);
  read(j, "cosine_steps", c.cosine_steps, s);
  read(j, "seed", c.seed, s);
  read(j, "batch", c.batch, s);
  read(j, "augment", c.augment, s);
  read(j, "log_every", c.log_every, s);
}

void to_json(json& j, const DataConfig& c) {
  j = json{{"count", c.count},
           {"size", c.size},
           {"cfa", cfa_name(c.cfa)},
           {"read_noise", c.read_noise},
           {"full_well", c.full_well},
           {"shot_noise", c.shot_noise},
           {"ratios", c.ratios},
           {"black_level", c.black_level},
           {"white_level", c.white_level},
           {"seed", c.seed}};
}

void from_json(const json& j, DataConfig& c) {
  const std::string s = "data";
  reject_unknown(j, {"count", "size", "cfa", "read_noise", "full_well", "shot_noise", "ratios", "black_level", "white_level", "seed"},
                 s);
  read(j, "count", c.count, s);
  read(j, "size", c.size, s);
  if (j.contains("cfa")) {
    std::string name;
    read(j, "cfa", name, s);
    c.cfa = parse_cfa(name);
  }
  read(j, "read_noise", c.read_noise, s);
  read(j, "full_well", c.full_well, s);
  read(j, "shot_noise", c.shot_noise, s);
  read(j, "ratios", c.ratios, s);
  read(j, "black_level", c.black_level, s);
  read(j, "white_level", c.white_level, s);
  read(j, "seed", c.seed, s);
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"network", c.network}, {"train", c.train}, {"loss", c.loss}, {"data", c.data}};
}

void from_json(const json& j, RunConfig& c) {
  reject_unknown(j, {"network", "train", "loss", "data"}, "top level");
  if (j.contains("network")) from_json(j.at("network"), c.network);
  if (j.contains("train")) from_json(j.at("train"), c.train);
  if (j.contains("loss")) from_json(j.at("loss"), c.loss);
  if (j.contains("data")) from_json(j.at("data"), c.data);
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  from_json(j, c);
  c.network.validate();
  c.train.validate();
  c.loss.validate();
  c.data.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace rrm
