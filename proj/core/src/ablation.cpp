#include "rrm/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <limits>

#include "rrm/error.hpp"
#include "rrm/network.hpp"
#include "rrm/train.hpp"

namespace rrm {

const std::vector<std::string>& ablation_axes() {
  static const std::vector<std::string> axes = {"scan_directions", "rdm_on_off", "fusion", "loss", "enhance_stage"};
  return axes;
}

std::vector<AblationVariant> ablation_variants(const std::string& axis, const NetworkConfig& network,
                                               const LossConfig& loss) {
  std::vector<AblationVariant> out;
  auto add = [&](std::string name, auto&& tweak) {
    AblationVariant v{std::move(name), network, loss};
    tweak(v);
    out.push_back(std::move(v));
  };
  if (axis == "scan_directions") {
    for (std::size_t n : {1, 2, 4, 8}) {
      add("directions_" + std::to_string(n), [n](AblationVariant& v) { v.network.scan_directions = n; });
    }
  } else if (axis == "rdm_on_off") {
    add("rdm_on", [](AblationVariant& v) { v.network.use_rdm = true; });
    add("rdm_off", [](AblationVariant& v) { v.network.use_rdm = false; });
  } else if (axis == "fusion") {
    add("daf", [](AblationVariant& v) { v.network.fusion = FusionKind::Daf; });
    add("concat1x1", [](AblationVariant& v) { v.network.fusion = FusionKind::Concat1x1; });
  } else if (axis == "loss") {
    const std::pair<PixelLoss, PixelLoss> combos[] = {{PixelLoss::L1, PixelLoss::L1},
                                                      {PixelLoss::L2, PixelLoss::L1},
                                                      {PixelLoss::L1, PixelLoss::L2},
                                                      {PixelLoss::None, PixelLoss::L1},
                                                      {PixelLoss::None, PixelLoss::L2}};
    auto label = [](PixelLoss l) { return l == PixelLoss::None ? std::string("-") : l == PixelLoss::L1 ? "L1" : "L2"; };
    for (const auto& [raw, srgb] : combos) {
      add(label(raw) + "/" + label(srgb), [raw, srgb](AblationVariant& v) {
        v.loss.raw_loss = raw;
        v.loss.srgb_loss = srgb;
      });
    }
  } else if (axis == "enhance_stage") {
    add("encoding", [](AblationVariant& v) { v.network.enhance_stage = EnhanceStage::Encoding; });
    add("decoding", [](AblationVariant& v) { v.network.enhance_stage = EnhanceStage::Decoding; });
  } else {
    throw ConfigError("unknown ablation axis '" + axis +
                      "' (expected scan_directions, rdm_on_off, fusion, loss or enhance_stage)");
  }
  return out;
}

std::vector<AblationRow> run_ablation(const std::string& axis, const RunConfig& base, const Dataset& data,
                                      std::uint64_t seed, std::size_t timing_repeats,
                                      const std::function<void(const AblationRow&)>& on_row) {
  const auto variants = ablation_variants(axis, base.network, base.loss);
  if (data.samples.empty()) throw ConfigError("ablation needs at least one sample");
  std::vector<AblationRow> rows;
  for (const AblationVariant& v : variants) {
    RetinexRawMamba net(v.network, seed);
    TrainConfig tc = base.train;
    tc.seed = seed;
    train(net, data, tc, v.loss);
    const EvalReport report = evaluate(net, data, v.loss);

    double best = std::numeric_limits<double>::infinity();
    {
      NoGradGuard no_grad;
      for (std::size_t r = 0; r < std::max<std::size_t>(1, timing_repeats); ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        net.forward(data.samples.front().input);
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
      }
    }
    AblationRow row{v.name, report.psnr, report.ssim, best, seed};
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,psnr,ssim,wall_ms,seed\n";
  char buf[160];
  for (const AblationRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.3f,%llu\n", r.variant.c_str(), r.psnr, r.ssim, r.wall_ms,
                  static_cast<unsigned long long>(r.seed));
    out += buf;
  }
  return out;
}

}  // namespace rrm
