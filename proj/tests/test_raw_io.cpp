#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "rrm/error.hpp"
#include "rrm/ppm.hpp"
#include "rrm/raw_io.hpp"
#include "rrm/rng.hpp"

using namespace rrm;
namespace fs = std::filesystem;

namespace {

RawImage random_raw(Cfa cfa, std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  RawImage raw;
  raw.cfa = cfa;
  raw.height = h;
  raw.width = w;
  raw.black_level = 64;
  raw.white_level = 16383;
  raw.exposure_ratio = 1.0;
  for (std::size_t i = 0; i < h * w; ++i) raw.plane.push_back(static_cast<std::uint16_t>(64 + rng.below(16320)));
  return raw;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "rrm_test_raw_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Pack, BayerNormalization) {
  RawImage raw;
  raw.width = raw.height = 2;
  raw.black_level = 0;
  raw.white_level = 40;
  raw.plane = {10, 20, 30, 40};
  Tensor p = pack(raw);
  EXPECT_EQ(p.shape(), (Shape{4, 1, 1}));
  EXPECT_EQ(std::vector<double>(p.data().begin(), p.data().end()), (std::vector<double>{0.25, 0.5, 0.75, 1.0}));
  raw.exposure_ratio = 4.0;
  Tensor q = pack(raw);
  for (double v : q.data()) EXPECT_EQ(v, 1.0);
}

TEST(Pack, ChannelLayoutFollowsBlockSites) {
  for (Cfa cfa : {Cfa::BayerRGGB, Cfa::XTrans}) {
    const std::size_t b = cfa_block(cfa);
    RawImage raw = random_raw(cfa, 2 * b, 4 * b, 3);
    Tensor p = pack(raw);
    const double scale = raw.white_level - raw.black_level;
    for (std::size_t c = 0; c < b * b; ++c)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
          const double v = (raw.at(i * b + c / b, j * b + c % b) - raw.black_level) / scale;
          ASSERT_EQ(p[(c * 2 + i) * 4 + j], v);
        }
  }
}

TEST(Pack, UnpackRoundTripIsExact) {
  for (Cfa cfa : {Cfa::BayerRGGB, Cfa::XTrans}) {
    const std::size_t b = cfa_block(cfa);
    RawImage raw = random_raw(cfa, 6 * b / (b == 2 ? 1 : 1), 4 * b, 4);
    Tensor p = pack(raw);
    Tensor m = unpack(p, cfa);
    ASSERT_EQ(m.shape(), (Shape{1, raw.height, raw.width}));
    for (std::size_t k = 0; k < raw.plane.size(); ++k) {
      ASSERT_EQ(m[k], (raw.plane[k] - raw.black_level) / (raw.white_level - raw.black_level));
    }
    Tensor again = pack_mosaic(m, cfa);
    for (std::size_t k = 0; k < p.numel(); ++k) ASSERT_EQ(again[k], p[k]);
  }
}

TEST(Pack, MonotoneInCounts) {
  RawImage raw = random_raw(Cfa::BayerRGGB, 4, 4, 5);
  raw.exposure_ratio = 3.0;
  Tensor before = pack(raw);
  for (auto& v : raw.plane) v = static_cast<std::uint16_t>(std::min<int>(v + 100, 16383));
  Tensor after = pack(raw);
  for (std::size_t k = 0; k < before.numel(); ++k) EXPECT_GE(after[k], before[k]);
}

TEST(Pack, Errors) {
  RawImage raw = random_raw(Cfa::XTrans, 6, 10, 6);
  EXPECT_THROW(pack(raw), ConfigError);
  RawImage bad = random_raw(Cfa::BayerRGGB, 2, 2, 7);
  bad.white_level = bad.black_level;
  EXPECT_THROW(pack(bad), ConfigError);
  EXPECT_THROW(unpack(Tensor::zeros({4, 2, 2}), Cfa::XTrans), ConfigError);
}

TEST(RawContainer, ByteLosslessRoundTrip) {
  for (Cfa cfa : {Cfa::BayerRGGB, Cfa::XTrans}) {
    RawImage raw = random_raw(cfa, 12, 18, 8);
    raw.exposure_ratio = 100.0;
    const auto bytes = encode_raw_container(raw);
    const RawImage back = decode_raw_container(bytes);
    EXPECT_EQ(back, raw);
    EXPECT_EQ(encode_raw_container(back), bytes);
    const fs::path path = temp_file("rt.rraw");
    write_raw_container(raw, path);
    EXPECT_EQ(read_raw_container(path), raw);
  }
}

TEST(RawContainer, FormatErrors) {
  RawImage raw = random_raw(Cfa::BayerRGGB, 4, 4, 9);
  auto bytes = encode_raw_container(raw);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 16);  // 8 of 16 plane values left
  EXPECT_THROW(decode_raw_container(truncated), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_raw_container(magic), FormatError);
  EXPECT_THROW(decode_raw_container({}), FormatError);
  EXPECT_THROW(read_raw_container(temp_file("does_not_exist.rraw")), IoError);
}

TEST(Ppm, QuantizationAndClipping) {
  EXPECT_EQ(quantize_u8(0.0), 0);
  EXPECT_EQ(quantize_u8(1.0), 255);
  EXPECT_EQ(quantize_u8(0.5), 128);
  Tensor rgb({3, 1, 2}, {0.0, 1.5, 0.5, 1.0, -0.2, 1.0});
  const fs::path path = temp_file("x.ppm");
  EXPECT_EQ(write_ppm(rgb, path), 2u);
  std::ifstream f(path, std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  f >> magic >> w >> h >> maxv;
  f.get();
  unsigned char px[6];
  f.read(reinterpret_cast<char*>(px), 6);
  EXPECT_EQ(magic, "P6");
  EXPECT_EQ(w, 2);
  EXPECT_EQ(h, 1);
  const unsigned char expected[6] = {0, 128, 0, 255, 255, 255};
  for (int i = 0; i < 6; ++i) EXPECT_EQ(px[i], expected[i]) << i;
  Tensor back = read_ppm(path);
  EXPECT_EQ(back.shape(), (Shape{3, 1, 2}));
  EXPECT_EQ(back[2], 128.0 / 255.0);
}
