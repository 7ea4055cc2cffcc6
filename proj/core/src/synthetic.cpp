#include "rrm/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "rrm/error.hpp"
#include "rrm/metrics.hpp"
#include "rrm/ppm.hpp"
#include "rrm/rng.hpp"

namespace rrm {

namespace {

std::string sample_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%03zu", i);
  return buf;
}

Tensor render_scene(std::size_t size, Rng& rng) {
  const std::size_t n = size * size;
  std::vector<double> img(3 * n);
  auto color = [&] { return std::array<double, 3>{rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)}; };
  const double s = static_cast<double>(size);

  const auto c0 = color();
  const auto c1 = color();
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ux = std::cos(angle), uy = std::sin(angle);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double t = 0.5 + ((x + 0.5) / s - 0.5) * ux * 0.7 + ((y + 0.5) / s - 0.5) * uy * 0.7;
      for (std::size_t c = 0; c < 3; ++c) img[c * n + y * size + x] = c0[c] + (c1[c] - c0[c]) * t;
    }
  }

  const std::size_t rects = 1 + rng.below(3);
  for (std::size_t r = 0; r < rects; ++r) {
    const auto col = color();
    const std::size_t w = std::max<std::size_t>(2, size / 8 + rng.below(size / 2));
    const std::size_t h = std::max<std::size_t>(2, size / 8 + rng.below(size / 2));
    const std::size_t x0 = rng.below(size), y0 = rng.below(size);
    for (std::size_t y = y0; y < std::min(size, y0 + h); ++y) {
      for (std::size_t x = x0; x < std::min(size, x0 + w); ++x) {
        for (std::size_t c = 0; c < 3; ++c) img[c * n + y * size + x] = col[c];
      }
    }
  }

  const std::size_t disks = 1 + rng.below(2);
  for (std::size_t k = 0; k < disks; ++k) {
    const auto col = color();
    const double cx = rng.uniform(0.0, s), cy = rng.uniform(0.0, s);
    const double rad = rng.uniform(s / 10.0, s / 4.0);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (dx * dx + dy * dy <= rad * rad) {
          for (std::size_t c = 0; c < 3; ++c) img[c * n + y * size + x] = col[c];
        }
      }
    }
  }

  for (double& v : img) v = quantize_u8(v) / 255.0;
  return Tensor({3, size, size}, std::move(img));
}

RawImage expose(const Tensor& clean_mosaic, const DataConfig& cfg, double ratio, Rng& rng) {
  RawImage raw;
  raw.height = clean_mosaic.dim(1);
  raw.width = clean_mosaic.dim(2);
  raw.cfa = cfg.cfa;
  raw.black_level = cfg.black_level;
  raw.white_level = cfg.white_level;
  raw.exposure_ratio = ratio;
  raw.plane.resize(raw.height * raw.width);
  const double range = cfg.white_level - cfg.black_level;
  for (std::size_t i = 0; i < raw.plane.size(); ++i) {
    const double m = clean_mosaic[i];
    double var = cfg.read_noise * cfg.read_noise;
    if (cfg.shot_noise) var += ratio * m / cfg.full_well;
    const double amplified = var > 0.0 ? m + std::sqrt(var) * rng.normal() : m;
    const double counts = std::round(cfg.black_level + range * amplified / ratio);
    raw.plane[i] = static_cast<std::uint16_t>(std::clamp(counts, 0.0, cfg.white_level));
  }
  return raw;
}

void finish_sample(Sample& s, Cfa cfa) {
  s.clean_packed = pack_mosaic(mosaic(s.clean_rgb, cfa), cfa);
  s.input = pack(s.noisy);
  s.baseline_psnr = psnr(s.input, s.clean_packed);
}

double mean_baseline(const std::vector<Sample>& samples) {
  double total = 0.0;
  for (const Sample& s : samples) total += s.baseline_psnr;
  return total / static_cast<double>(samples.size());
}

}  // namespace

Dataset gen_synthetic(const DataConfig& config) {
  config.validate();
  Dataset data;
  data.config = config;
  Rng root(config.seed);
  for (std::size_t i = 0; i < config.count; ++i) {
    Rng rng = root.fork(i);
    Sample s;
    s.name = sample_name(i);
    s.clean_rgb = render_scene(config.size, rng);
    const double ratio = config.ratios[rng.below(config.ratios.size())];
    s.noisy = expose(mosaic(s.clean_rgb, config.cfa), config, ratio, rng);
    finish_sample(s, config.cfa);
    data.samples.push_back(std::move(s));
  }
  data.baseline_psnr = mean_baseline(data.samples);
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());
  nlohmann::json index;
  index["config"] = data.config;
  index["baseline_psnr"] = data.baseline_psnr;
  index["samples"] = nlohmann::json::array();
  for (const Sample& s : data.samples) {
    write_raw_container(s.noisy, dir / (s.name + ".rraw"));
    write_ppm(s.clean_rgb, dir / (s.name + "_gt.ppm"));
    index["samples"].push_back({{"name", s.name},
                                {"raw", s.name + ".rraw"},
                                {"gt", s.name + "_gt.ppm"},
                                {"exposure_ratio", s.noisy.exposure_ratio},
                                {"baseline_psnr", s.baseline_psnr}});
  }
  std::ofstream out(dir / "index.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "index.json").string());
  out << index.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto index_path = dir / "index.json";
  std::ifstream in(index_path);
  if (!in) throw IoError("dataset index not found: " + index_path.string());
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed dataset index " + index_path.string() + ": " + e.what());
  }
  Dataset data;
  try {
    from_json(index.at("config"), data.config);
    for (const auto& entry : index.at("samples")) {
      Sample s;
      s.name = entry.at("name").get<std::string>();
      s.noisy = read_raw_container(dir / entry.at("raw").get<std::string>());
      s.clean_rgb = read_ppm(dir / entry.at("gt").get<std::string>());
      if (s.noisy.cfa != data.config.cfa) throw FormatError(s.name + ": CFA differs from the dataset config");
      if (s.clean_rgb.dim(1) != s.noisy.height || s.clean_rgb.dim(2) != s.noisy.width) {
        throw FormatError(s.name + ": ground truth and RAW sizes differ");
      }
      finish_sample(s, data.config.cfa);
      data.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed dataset index " + index_path.string() + ": " + e.what());
  }
  if (data.samples.empty()) throw FormatError("dataset " + dir.string() + " has no samples");
  data.baseline_psnr = mean_baseline(data.samples);
  return data;
}

}  // namespace rrm
