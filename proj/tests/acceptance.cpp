// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rrm/ablation.hpp"
#include "rrm/blocks.hpp"
#include "rrm/checkpoint.hpp"
#include "rrm/config.hpp"
#include "rrm/gradcheck.hpp"
#include "rrm/metrics.hpp"
#include "rrm/raw_io.hpp"
#include "rrm/scan_order.hpp"
#include "rrm/ssm.hpp"
#include "rrm/synthetic.hpp"
#include "rrm/train.hpp"

using namespace rrm;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Tensor random_tensor(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Outcome scan_orders() {
  const auto t0 = Clock::now();
  std::size_t checked = 0;
  bool ok = true;
  std::vector<std::string> raster_misses;
  for (std::size_t h = 1; h <= 8; ++h)
    for (std::size_t w = 1; w <= 8; ++w) {
      const auto orders = all_eight(h, w);
      for (std::size_t d = 0; d < 8; ++d) {
        const ScanOrder& o = orders[d];
        std::vector<std::size_t> sorted = o.order, iota(h * w);
        std::sort(sorted.begin(), sorted.end());
        std::iota(iota.begin(), iota.end(), 0);
        ok = ok && sorted == iota;
        for (std::size_t k = 0; k < o.order.size(); ++k) ok = ok && o.inverse[o.order[k]] == k;
        for (std::size_t k = 0; k + 1 < o.order.size(); ++k) {
          ok = ok && oracle::chebyshev(o.order[k], o.order[k + 1], w) <= 1.0;
        }
        if (d % 2 == 1) ok = ok && std::equal(o.order.begin(), o.order.end(), orders[d - 1].order.rbegin());
        ++checked;
      }
      // Negative control: raster order must break 8-neighbour continuity.
      bool raster_jumps = false;
      const ScanOrder r = raster_order(h, w);
      for (std::size_t k = 0; k + 1 < r.order.size(); ++k) {
        raster_jumps = raster_jumps || oracle::chebyshev(r.order[k], r.order[k + 1], w) > 1.0;
      }
      if (h >= 2 && w >= 2 && !raster_jumps) raster_misses.push_back(std::to_string(h) + "x" + std::to_string(w));
    }
  const double secs = seconds_since(t0);
  std::string detail = std::to_string(checked) + " orders " + (ok ? "satisfy" : "VIOLATE") +
                       " bijection/continuity/reversal; ";
  if (raster_misses.empty()) {
    detail += "raster control breaks continuity on every grid";
  } else {
    detail += "raster control stays 8-connected on " + std::to_string(raster_misses.size()) + " grids (";
    for (std::size_t i = 0; i < raster_misses.size(); ++i) detail += (i ? " " : "") + raster_misses[i];
    detail += "): with W = 2 the row wrap is a diagonal step";
  }
  detail += ", " + fmt("%.3f s", secs);
  return {ok && raster_misses.empty() && secs < 1.0, detail};
}

Outcome ssm_oracle() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(8), len = 1 + rng.below(64);
    const double delta = rng.uniform(1e-3, 1.0);
    ssm::LtiParams p;
    for (std::size_t s = 0; s < n; ++s) {
      const auto d = ssm::discretize(-rng.uniform(0.01, 2.0), rng.uniform(-1, 1), delta);
      p.a_bar.push_back(d.a_bar);
      p.b_bar.push_back(d.b_bar);
      p.c.push_back(rng.uniform(-1, 1));
    }
    p.d = rng.uniform(-1, 1);
    std::vector<double> x(len);
    for (double& v : x) v = rng.uniform(-1, 1);
    const auto a = ssm::selective_scan(x, p.broadcast(len));
    const auto b = ssm::lti_kernel_scan(x, p);
    for (std::size_t k = 0; k < len; ++k) {
      worst = std::max(worst, std::fabs(a[k] - b[k]) / std::max(std::fabs(a[k]), 1e-12));
    }
  }
  const auto d1 = ssm::discretize(1.0, 5.0, std::log(2.0));
  const auto d0 = ssm::discretize(1e-9, 5.0, 0.3);
  const double zoh_err = std::max({std::fabs(d1.a_bar - 2.0), std::fabs(d1.b_bar - 5.0), std::fabs(d0.a_bar - 1.0),
                                   std::fabs(d0.b_bar - 1.5)});
  const double secs = seconds_since(t0);
  return {worst <= 1e-8 && zoh_err <= 1e-6 && secs < 5.0,
          "max rel err " + fmt("%.2e", worst) + ", zoh err " + fmt("%.2e", zoh_err) + ", " + fmt("%.3f s", secs)};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t count = 0;
  for (const auto& r : run_gradcheck_suite(0)) {
    ++count;
    if (r.max_rel_err >= worst) {
      worst = r.max_rel_err;
      worst_name = r.name;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-3 && secs < 120.0, std::to_string(count) + " checks, worst " + worst_name + " " +
                                             fmt("%.2e", worst) + ", " + fmt("%.1f s", secs)};
}

Outcome ss2d_identity() {
  Rng rng(4);
  bool ok = true;
  std::size_t shapes = 0;
  for (std::size_t c : {1, 3, 8})
    for (std::size_t h : {1, 2, 5, 8})
      for (std::size_t w : {1, 3, 6}) {
        SelectiveScan2d ss(c, 4, 8, rng);
        for (DirectionSsm& d : ss.ssms) {
          for (double& v : d.x_proj.mutable_data()) v = 0.0;
          for (double& v : d.skip.mutable_data()) v = 1.0;
        }
        const Tensor f = random_tensor({c, h, w}, rng);
        const Tensor out = ss(f);
        for (std::size_t i = 0; i < f.numel(); ++i) ok = ok && out[i] == 8.0 * f[i];
        ++shapes;
      }
  return {ok, std::to_string(shapes) + " shapes bit-exact"};
}

Outcome packing() {
  bool ok = true;
  Rng rng(5);
  for (Cfa cfa : {Cfa::BayerRGGB, Cfa::XTrans}) {
    const std::size_t b = cfa_block(cfa);
    RawImage raw;
    raw.cfa = cfa;
    raw.height = 4 * b;
    raw.width = 6 * b;
    raw.black_level = 64;
    raw.white_level = 16383;
    raw.exposure_ratio = 1.0;
    for (std::size_t i = 0; i < raw.height * raw.width; ++i) {
      raw.plane.push_back(static_cast<std::uint16_t>(64 + rng.below(16320)));
    }
    const Tensor packed = pack(raw);
    const Tensor mosaic = unpack(packed, cfa);
    for (std::size_t k = 0; k < raw.plane.size(); ++k) {
      ok = ok && mosaic[k] == (raw.plane[k] - raw.black_level) / (raw.white_level - raw.black_level);
    }
    ok = ok && values(pack_mosaic(mosaic, cfa)) == values(packed);
    raw.exposure_ratio = 50.0;
    const auto bytes = encode_raw_container(raw);
    const RawImage back = decode_raw_container(bytes);
    ok = ok && back == raw && encode_raw_container(back) == bytes;
  }
  NetworkConfig nc;
  nc.base_width = 4;
  nc.depth = 2;
  const RetinexRawMamba net(nc, 9);
  const auto bytes = encode_checkpoint(net, 7);
  const LoadedCheckpoint ck = decode_checkpoint(bytes);
  ok = ok && encode_checkpoint(*ck.net, ck.step) == bytes;
  return {ok, "Bayer and X-Trans pack/unpack, RAW container, checkpoint (" + std::to_string(bytes.size()) + " bytes)"};
}

RunConfig toy_run_config() {
  RunConfig c;
  c.data.count = 16;
  c.data.size = 32;
  c.data.cfa = Cfa::BayerRGGB;
  c.data.read_noise = 0.02;
  c.data.ratios = {100.0};
  c.data.seed = 0;
  c.network.depth = 3;
  c.network.base_width = 8;
  c.train.steps = 300;
  c.train.lr_init = 2e-3;
  c.train.lr_final = 2e-4;
  c.train.augment = false;
  c.train.seed = 0;
  return c;
}

Outcome toy_training() {
  const auto t0 = Clock::now();
  const RunConfig cfg = toy_run_config();
  const Dataset data = gen_synthetic(cfg.data);
  RetinexRawMamba net(cfg.network, cfg.train.seed);
  const TrainResult r = train(net, data, cfg.train, cfg.loss);
  const double drop = 1.0 - r.after.loss / r.before.loss;
  const double gain = r.after.psnr - data.baseline_psnr;
  const double secs = seconds_since(t0);
  return {drop >= 0.5 && gain >= 3.0 && secs <= 600.0,
          "loss " + fmt("%.4f", r.before.loss) + " -> " + fmt("%.4f", r.after.loss) + " (drop " +
              fmt("%.1f%%", 100.0 * drop) + "), psnr " + fmt("%.2f", r.after.psnr) + " dB vs baseline " +
              fmt("%.2f", data.baseline_psnr) + " dB (+" + fmt("%.2f", gain) + "), " + fmt("%.0f s", secs)};
}

Outcome ablation() {
  const auto t0 = Clock::now();
  RunConfig cfg = toy_run_config();
  cfg.data.count = 4;
  cfg.train.steps = 20;
  const Dataset data = gen_synthetic(cfg.data);
  bool deterministic = true;
  double wall_1 = 0.0, wall_8 = 0.0;
  std::vector<AblationRow> all;
  for (const std::string& axis : ablation_axes()) {
    const auto a = run_ablation(axis, cfg, data, 0);
    const auto b = run_ablation(axis, cfg, data, 0);
    deterministic = deterministic && a.size() == b.size();
    for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) {
      deterministic = deterministic && a[k].variant == b[k].variant && a[k].psnr == b[k].psnr &&
                      a[k].ssim == b[k].ssim && a[k].seed == b[k].seed;
      if (a[k].variant == "directions_1") wall_1 = std::min(a[k].wall_ms, b[k].wall_ms);
      if (a[k].variant == "directions_8") wall_8 = std::min(a[k].wall_ms, b[k].wall_ms);
    }
    all.insert(all.end(), a.begin(), a.end());
  }
  std::fputs(ablation_csv(all).c_str(), stdout);
  const double secs = seconds_since(t0);
  return {deterministic && wall_8 > wall_1 && wall_1 > 0.0,
          std::to_string(all.size()) + " variants, deterministic=" + (deterministic ? "yes" : "no") +
              ", wall 1-dir " + fmt("%.2f ms", wall_1) + " vs 8-dir " + fmt("%.2f ms", wall_8) + ", " +
              fmt("%.0f s", secs)};
}

Outcome metric_sanity() {
  Rng rng(8);
  std::vector<double> v(3 * 24 * 24);
  for (double& e : v) e = rng.uniform(0.1, 0.9);
  const Tensor x({3, 24, 24}, v);
  bool ok = psnr(x, x) == std::numeric_limits<double>::infinity() && ssim(x, x) == 1.0;
  double previous = std::numeric_limits<double>::infinity();
  for (double sigma : {0.01, 0.02, 0.05}) {
    Rng noise(99);
    std::vector<double> n = v;
    for (double& e : n) e += sigma * noise.normal();
    const double p = psnr(Tensor({3, 24, 24}, n), x);
    ok = ok && p < previous;
    previous = p;
  }
  const double twenty = psnr(Tensor::full({1, 8, 8}, 0.5), Tensor::full({1, 8, 8}, 0.4));
  ok = ok && std::fabs(twenty - 20.0) <= 1e-9;
  return {ok, "psnr(x,x)=inf, ssim(x,x)=1, monotone in sigma, 20 dB case err " + fmt("%.1e", std::fabs(twenty - 20.0))};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"scan-order suite", scan_orders},     {"ssm oracle", ssm_oracle},
      {"gradient suite", gradient_suite},    {"ss2d identity", ss2d_identity},
      {"packing and round trips", packing},  {"toy training", toy_training},
      {"ablation harness", ablation},        {"metric sanity", metric_sanity},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
