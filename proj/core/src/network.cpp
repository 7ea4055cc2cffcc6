#include "rrm/network.hpp"

#include <array>

#include "rrm/error.hpp"
#include "rrm/ops.hpp"
#include "rrm/scan_order.hpp"

namespace rrm {

std::string fusion_name(FusionKind kind) { return kind == FusionKind::Daf ? "daf" : "concat1x1"; }

FusionKind parse_fusion(const std::string& name) {
  if (name == "daf") return FusionKind::Daf;
  if (name == "concat1x1") return FusionKind::Concat1x1;
  throw ConfigError("unknown fusion '" + name + "' (expected daf or concat1x1)");
}

std::string enhance_stage_name(EnhanceStage stage) {
  return stage == EnhanceStage::Encoding ? "encoding" : "decoding";
}

EnhanceStage parse_enhance_stage(const std::string& name) {
  if (name == "encoding") return EnhanceStage::Encoding;
  if (name == "decoding") return EnhanceStage::Decoding;
  throw ConfigError("unknown enhance_stage '" + name + "' (expected encoding or decoding)");
}

void NetworkConfig::validate() const {
  if (depth < 2) throw ConfigError("depth must be at least 2, got " + std::to_string(depth));
  if (depth > 8) throw ConfigError("depth must be at most 8, got " + std::to_string(depth));
  if (base_width == 0) throw ConfigError("base_width must be positive");
  if (state_dim == 0) throw ConfigError("state_dim must be positive");
  if (ca_reduction == 0 || base_width % ca_reduction != 0) {
    throw ConfigError("ca_reduction " + std::to_string(ca_reduction) + " must divide base_width " +
                      std::to_string(base_width));
  }
  direction_subset(scan_directions);
}

namespace {

// Independent init stream per component group, so toggling one part of the
// network leaves the initial weights of the others unchanged.
Rng group_rng(std::uint64_t seed, std::uint64_t group) {
  Rng root(seed);
  return root.fork(group);
}

constexpr double kSkipHeadScale = 0.3;

enum Group : std::uint64_t { kRdm = 1, kDenoise, kDemosaic, kReflectFuse, kCrossFuse };

}  // namespace

RetinexRawMamba::RetinexRawMamba(const NetworkConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
  config_.validate();
  const NetworkConfig& c = config_;
  const std::size_t cin = c.in_channels();
  const std::size_t d = c.depth;

  if (c.use_rdm) {
    Rng rng = group_rng(seed, kRdm);
    rdm_ = RetinexDecomposition(cin, c.base_width, rng);
    if (c.enhance_branch) {
      for (std::size_t i = 1; i < d; ++i) reflect_down_.emplace_back(c.width(i - 1), c.width(i), 3, rng, 2);
    }
  }

  auto build_stage = [&](Rng& rng, Conv2d& stem, std::vector<Level>& enc, std::vector<UpLevel>& dec, bool demosaic) {
    const std::size_t blocks = demosaic ? c.demosaic_blocks : c.denoise_blocks;
    auto add_blocks = [&](std::vector<SimpleDenoisingBlock>& sdb, std::vector<RawMambaBlock>& mamba, std::size_t w) {
      for (std::size_t b = 0; b < blocks; ++b) {
        if (demosaic) {
          mamba.emplace_back(w, c.state_dim, c.scan_directions, c.ca_reduction, rng);
        } else {
          sdb.emplace_back(w, rng);
        }
      }
    };
    stem = Conv2d(cin, c.base_width, 3, rng);
    enc.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      if (i > 0) enc[i].down = Conv2d(c.width(i - 1), c.width(i), 3, rng, 2);
      add_blocks(enc[i].sdb, enc[i].mamba, c.width(i));
    }
    dec.resize(d - 1);
    for (std::size_t i = d - 1; i-- > 0;) {
      dec[i].up = ConvTranspose2d(c.width(i + 1), c.width(i), 2, rng);
      dec[i].merge = Conv2d(2 * c.width(i), c.width(i), 1, rng);
      add_blocks(dec[i].sdb, dec[i].mamba, c.width(i));
    }
  };

  {
    Rng rng = group_rng(seed, kDenoise);
    build_stage(rng, dn_stem_, dn_enc_, dn_dec_, false);
    dn_head_ = Conv2d(c.base_width, cin, 3, rng);
  }
  {
    Rng rng = group_rng(seed, kDemosaic);
    build_stage(rng, dm_stem_, dm_enc_, dm_dec_, true);
    const std::size_t s = c.shuffle_factor();
    dm_head_ = Conv2d(c.base_width, 3 * s * s, 3, rng);
    if (c.srgb_skip) {
      // Residual head starts small so O2 begins near the block demosaic of O1.
      for (double& v : dm_head_.weight.mutable_data()) v *= kSkipHeadScale;
      snap_to_float(dm_head_.weight);
    }
  }
  if (c.fuses_reflectance()) {
    Rng rng = group_rng(seed, kReflectFuse);
    for (std::size_t i = 0; i < d; ++i) {
      dn_enc_[i].reflect = Fusion(c.fusion, c.width(i), c.ca_reduction, rng);
      dm_enc_[i].reflect = Fusion(c.fusion, c.width(i), c.ca_reduction, rng);
    }
  }
  {
    Rng rng = group_rng(seed, kCrossFuse);
    for (std::size_t i = 0; i < d; ++i) dm_enc_[i].cross = Fusion(c.fusion, c.width(i), c.ca_reduction, rng);
  }
}

void RetinexRawMamba::check_input(const Tensor& packed) const {
  const std::size_t cin = config_.in_channels();
  if (packed.rank() != 3 || packed.dim(0) != cin) {
    throw DimensionError("network expects packed input [" + std::to_string(cin) + ", h, w], got " +
                         shape_string(packed.shape()));
  }
  const std::size_t m = config_.spatial_multiple();
  if (packed.dim(1) == 0 || packed.dim(2) == 0 || packed.dim(1) % m != 0 || packed.dim(2) % m != 0) {
    throw ConfigError("packed size " + std::to_string(packed.dim(1)) + "x" + std::to_string(packed.dim(2)) +
                      " is not divisible by " + std::to_string(m) + " for depth " + std::to_string(config_.depth));
  }
}

NetworkOutput RetinexRawMamba::forward(const Tensor& packed) const {
  check_input(packed);
  const NetworkConfig& c = config_;
  const std::size_t d = c.depth;
  const bool fuse_r = c.fuses_reflectance();
  const bool r_in_encoder = fuse_r && c.enhance_stage == EnhanceStage::Encoding;
  // With decoding-stage fusion the bottleneck level keeps its fusion so the
  // number of fusions is unchanged.
  auto r_at_decoder = [&](std::size_t level) { return fuse_r && c.enhance_stage == EnhanceStage::Decoding && level < d - 1; };

  Tensor x_in = packed;
  std::vector<Tensor> reflect;
  if (c.use_rdm) {
    RetinexDecomposition::Output r = rdm_(packed);
    x_in = r.adjusted;
    if (fuse_r) {
      reflect.push_back(r.reflectance);
      for (std::size_t i = 1; i < d; ++i) reflect.push_back(reflect_down_[i - 1](reflect.back()));
    }
  }

  auto run_blocks = [](const auto& blocks, Tensor t) {
    for (const auto& b : blocks) t = b(t);
    return t;
  };

  // Denoise stage.
  std::vector<Tensor> dn_skip(d);
  Tensor e = dn_stem_(x_in);
  for (std::size_t i = 0; i < d; ++i) {
    if (i > 0) e = dn_enc_[i].down(e);
    if (r_in_encoder || (fuse_r && i == d - 1)) e = dn_enc_[i].reflect(reflect[i], e);
    e = run_blocks(dn_enc_[i].sdb, e);
    dn_skip[i] = e;
  }
  for (std::size_t i = d - 1; i-- > 0;) {
    e = dn_dec_[i].up(e);
    e = dn_dec_[i].merge(concat_channels(e, dn_skip[i]));
    if (r_at_decoder(i)) e = dn_enc_[i].reflect(reflect[i], e);
    e = run_blocks(dn_dec_[i].sdb, e);
  }
  Tensor o1 = add(dn_head_(e), x_in);

  // Demosaic stage.
  std::vector<Tensor> dm_skip(d);
  e = dm_stem_(x_in);
  for (std::size_t i = 0; i < d; ++i) {
    if (i > 0) e = dm_enc_[i].down(e);
    if (r_in_encoder || (fuse_r && i == d - 1)) e = dm_enc_[i].reflect(reflect[i], e);
    e = dm_enc_[i].cross(dn_skip[i], e);
    e = run_blocks(dm_enc_[i].mamba, e);
    dm_skip[i] = e;
  }
  for (std::size_t i = d - 1; i-- > 0;) {
    e = dm_dec_[i].up(e);
    e = dm_dec_[i].merge(concat_channels(e, dm_skip[i]));
    if (r_at_decoder(i)) e = dm_enc_[i].reflect(reflect[i], e);
    e = run_blocks(dm_dec_[i].mamba, e);
  }
  Tensor head = dm_head_(e);
  if (c.srgb_skip) head = add(head, block_demosaic(o1));
  Tensor o2 = pixel_shuffle(head, c.shuffle_factor());
  return {o1, o2};
}

Tensor RetinexRawMamba::block_demosaic(const Tensor& raw) const {
  const Cfa cfa = config_.cfa;
  const std::size_t b = cfa_block(cfa), cin = raw.dim(0), h = raw.dim(1), w = raw.dim(2);
  const std::size_t s = config_.shuffle_factor(), sub = s * s;
  const Tensor flat = reshape(raw, {cin, h * w});
  // The CFA period spans at most two blocks per axis, so four block parities
  // cover every site arrangement.
  std::vector<Tensor> parts;
  for (std::size_t py = 0; py < 2; ++py) {
    for (std::size_t px = 0; px < 2; ++px) {
      std::vector<double> weights(3 * sub * cin, 0.0);
      std::array<double, 3> count{};
      for (std::size_t ch = 0; ch < cin; ++ch) count[cfa_color(cfa, py * b + ch / b, px * b + ch % b)] += 1.0;
      for (std::size_t ch = 0; ch < cin; ++ch) {
        const int color = cfa_color(cfa, py * b + ch / b, px * b + ch % b);
        for (std::size_t k = 0; k < sub; ++k) weights[(color * sub + k) * cin + ch] = 1.0 / count[color];
      }
      std::vector<double> mask(3 * sub * h * w, 0.0);
      for (std::size_t r = 0; r < 3 * sub; ++r) {
        for (std::size_t y = py; y < h; y += 2) {
          for (std::size_t x = px; x < w; x += 2) mask[(r * h + y) * w + x] = 1.0;
        }
      }
      const Tensor mixed = matmul(Tensor({3 * sub, cin}, std::move(weights)), flat);
      parts.push_back(mul(reshape(mixed, {3 * sub, h, w}), Tensor({3 * sub, h, w}, std::move(mask))));
    }
  }
  return sum_list(parts);
}

ParamList RetinexRawMamba::parameters() const {
  ParamList out;
  const NetworkConfig& c = config_;
  if (c.use_rdm) {
    rdm_.collect(out, "rdm");
    for (std::size_t i = 0; i < reflect_down_.size(); ++i) {
      reflect_down_[i].collect(out, "reflect_down." + std::to_string(i + 1));
    }
  }
  auto collect_stage = [&](const std::string& name, const Conv2d& stem, const std::vector<Level>& enc,
                           const std::vector<UpLevel>& dec, const Conv2d& head, bool demosaic) {
    stem.collect(out, name + ".stem");
    for (std::size_t i = 0; i < enc.size(); ++i) {
      const std::string p = name + ".enc" + std::to_string(i);
      if (i > 0) enc[i].down.collect(out, p + ".down");
      if (c.fuses_reflectance()) enc[i].reflect.collect(out, p + ".reflect_fuse");
      if (demosaic) enc[i].cross.collect(out, p + ".cross_fuse");
      for (std::size_t b = 0; b < enc[i].sdb.size(); ++b) enc[i].sdb[b].collect(out, p + ".sdb" + std::to_string(b));
      for (std::size_t b = 0; b < enc[i].mamba.size(); ++b) {
        enc[i].mamba[b].collect(out, p + ".rawmamba" + std::to_string(b));
      }
    }
    for (std::size_t i = dec.size(); i-- > 0;) {
      const std::string p = name + ".dec" + std::to_string(i);
      dec[i].up.collect(out, p + ".up");
      dec[i].merge.collect(out, p + ".merge");
      for (std::size_t b = 0; b < dec[i].sdb.size(); ++b) dec[i].sdb[b].collect(out, p + ".sdb" + std::to_string(b));
      for (std::size_t b = 0; b < dec[i].mamba.size(); ++b) {
        dec[i].mamba[b].collect(out, p + ".rawmamba" + std::to_string(b));
      }
    }
    head.collect(out, name + ".head");
  };
  collect_stage("denoise", dn_stem_, dn_enc_, dn_dec_, dn_head_, false);
  collect_stage("demosaic", dm_stem_, dm_enc_, dm_dec_, dm_head_, true);
  return out;
}

ParamReport count_params(const NetworkConfig& config) {
  const RetinexRawMamba net(config, 0);
  const ParamList params = net.parameters();
  ParamReport report;
  report.total = param_count(params);
  for (const NamedParam& p : params) {
    if (p.tensor.rank() != 4) continue;
    report.conv += p.tensor.numel();
    const std::string stem = p.name.substr(0, p.name.size() - std::string(".weight").size());
    for (const NamedParam& q : params) {
      if (q.name == stem + ".bias") report.conv += q.tensor.numel();
    }
  }
  return report;
}

std::uint64_t count_flops(const NetworkConfig& config, std::size_t packed_height, std::size_t packed_width) {
  const RetinexRawMamba net(config, 0);
  NoGradGuard no_grad;
  const std::uint64_t before = FlopCounter::value();
  net.forward(Tensor::zeros({config.in_channels(), packed_height, packed_width}));
  return FlopCounter::value() - before;
}

}  // namespace rrm
