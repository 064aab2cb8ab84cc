#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "tinyssd/arch.hpp"
#include "tinyssd/errors.hpp"
#include "tinyssd/fp16.hpp"
#include "tinyssd/image.hpp"
#include "tinyssd/model_io.hpp"

using namespace tinyssd;

namespace {

const WeightStore& seeded_store() {
  static const WeightStore store = init_random(tiny_ssd_spec(), 42);
  return store;
}

WeightStore small_store() {
  WeightStore s;
  s.add("a/w", {2, 3}, {0.1f, -0.2f, 0.3f, 1.5f, -7.25f, 1e-6f});
  s.add("a/b", {2}, {0.0f, 3.0f});
  return s;
}

bool bit_equal(float a, float b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(Fp16, Examples) {
  EXPECT_EQ(round_to_half(1.0f), 1.0f);
  EXPECT_EQ(round_to_half(0.1f), 0.0999755859375f);
  EXPECT_EQ(round_to_half(70000.0f), 65504.0f);
  EXPECT_EQ(round_to_half(-70000.0f), -65504.0f);
  EXPECT_EQ(float_to_half(1.0f), 0x3C00);
  EXPECT_EQ(round_to_half(std::ldexp(1.0f, -24)), std::ldexp(1.0f, -24));
  EXPECT_EQ(round_to_half(std::ldexp(1.0f, -26)), 0.0f);
}

TEST(Fp16, MatchesNearestValueEnumeration) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> mant(-1.0f, 1.0f);
  std::uniform_int_distribution<int> ex(-28, 17);
  for (int i = 0; i < 1500; ++i) {
    const float x = std::ldexp(mant(rng), ex(rng));
    ASSERT_EQ(static_cast<double>(round_to_half(x)), oracle::nearest_half(x)) << x;
  }
  // exact midpoints between neighbours go to the even significand
  for (std::uint16_t b : {0x3C00, 0x3C01, 0x0001, 0x0400, 0x7BFE}) {
    const double lo = oracle::half_value(b), hi = oracle::half_value(b + 1);
    const float mid = static_cast<float>((lo + hi) / 2);
    ASSERT_EQ(static_cast<double>(round_to_half(mid)), oracle::nearest_half(mid)) << b;
  }
}

TEST(Fp16, EveryHalfRoundTrips) {
  for (std::uint32_t b = 0; b < 0x10000; ++b) {
    const std::uint16_t h = static_cast<std::uint16_t>(b);
    const double v = oracle::half_value(h);
    if (!std::isfinite(v)) continue;
    ASSERT_EQ(static_cast<double>(half_to_float(h)), v) << b;
    ASSERT_EQ(float_to_half(static_cast<float>(v)), h) << b;
  }
}

TEST(Quantize, StatsAndIdempotence) {
  WeightStore s = small_store();
  s.add("big", {2}, {70000.0f, -1e9f});
  QuantizeStats stats;
  const WeightStore q = quantize_fp16(s, &stats);
  EXPECT_EQ(stats.values, 10u);
  EXPECT_EQ(stats.clamped, 2u);
  EXPECT_EQ(q.at("big").data, (std::vector<float>{65504.0f, -65504.0f}));
  EXPECT_EQ(q.at("a/w").data[0], 0.0999755859375f);
  EXPECT_EQ(quantize_fp16(q), q);
}

TEST(Quantize, SeededStoreErrorIsSmall) {
  QuantizeStats stats;
  const WeightStore q = quantize_fp16(seeded_store(), &stats);
  double mean_abs = 0.0;
  std::size_t n = 0;
  for (const Blob& b : seeded_store().blobs())
    for (float v : b.data) mean_abs += std::fabs(v), ++n;
  mean_abs /= static_cast<double>(n);
  EXPECT_EQ(stats.clamped, 0u);
  EXPECT_LT(stats.mean_abs_error, 1e-3 * mean_abs);
  EXPECT_EQ(quantize_fp16(q), q);
}

TEST(ModelFile, SaveLoadF16EqualsQuantize) {
  const auto dir = oracle::scratch_dir("model");
  save_model(seeded_store(), dir / "m16.tssd", DType::f16);
  const WeightStore loaded = load_model(dir / "m16.tssd", parameter_manifest(tiny_ssd_spec()));
  const WeightStore q = quantize_fp16(seeded_store());
  ASSERT_EQ(loaded.size(), q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    ASSERT_EQ(loaded.blobs()[i].name, q.blobs()[i].name);
    for (std::size_t k = 0; k < q.blobs()[i].data.size(); ++k)
      ASSERT_TRUE(bit_equal(loaded.blobs()[i].data[k], q.blobs()[i].data[k]));
  }
  EXPECT_EQ(std::filesystem::file_size(dir / "m16.tssd"), model_file_size(parameter_manifest(tiny_ssd_spec()), DType::f16));
  std::filesystem::remove_all(dir);
}

TEST(ModelFile, F32IsExact) {
  const WeightStore s = small_store();
  EXPECT_EQ(deserialize_model(serialize_model(s, DType::f32)), s);
  EXPECT_EQ(deserialize_model(serialize_model(s, DType::f16)), quantize_fp16(s));
}

TEST(ModelFile, Layout) {
  WeightStore s;
  s.add("x", {1}, {1.0f});
  const auto bytes = serialize_model(s, DType::f16);
  const std::vector<std::uint8_t> expected{'T', 'S', 'S', 'D', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 'x',
                                           1,   1,   0,   0,   0, 1, 0, 0, 0, 0x00, 0x3C};
  EXPECT_EQ(bytes, expected);
}

TEST(ModelFile, FormatErrors) {
  const auto good = serialize_model(small_store(), DType::f32);
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_model(bad_magic), FormatError);
  auto bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(deserialize_model(bad_version), FormatError);
  auto truncated = good;
  truncated.resize(good.size() - 3);
  try {
    deserialize_model(truncated);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_GT(e.offset(), 12u);
  }
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_model(trailing), FormatError);
}

TEST(ModelFile, ManifestMismatchIsNamed) {
  WeightStore wrong;
  for (const Blob& b : seeded_store().blobs()) {
    std::vector<int> shape = b.shape;
    std::vector<float> data = b.data;
    if (b.name == "fire2/squeeze/b") {
      shape = {16};
      data.push_back(0.0f);
    }
    wrong.add(b.name, shape, data);
  }
  const auto manifest = parameter_manifest(tiny_ssd_spec());
  try {
    deserialize_model(serialize_model(wrong, DType::f16), &manifest);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("fire2/squeeze/b"), std::string::npos);
  }
}

TEST(ModelFile, FlippedByteNeverSilentlyMisaligns) {
  const WeightStore s = small_store();
  const auto bytes = serialize_model(s, DType::f16);
  const WeightStore clean = deserialize_model(bytes);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    auto corrupt = bytes;
    corrupt[i] ^= 0x5A;
    try {
      const WeightStore back = deserialize_model(corrupt);
      EXPECT_FALSE(back == clean) << "byte " << i;
      ASSERT_EQ(back.size(), clean.size());
      // a payload flip touches exactly one value
      int changed = 0;
      for (std::size_t b = 0; b < back.size(); ++b) {
        if (back.blobs()[b].name != clean.blobs()[b].name) continue;
        for (std::size_t k = 0; k < back.blobs()[b].data.size(); ++k)
          changed += !bit_equal(back.blobs()[b].data[k], clean.blobs()[b].data[k]);
      }
      EXPECT_LE(changed, 1) << "byte " << i;
    } catch (const Error&) {
    }
  }
}

TEST(InitRandom, DeterministicAndShaped) {
  const ArchSpec spec = tiny_ssd_spec();
  const WeightStore a = init_random(spec, 7);
  EXPECT_EQ(a, init_random(spec, 7));
  EXPECT_FALSE(a == init_random(spec, 8));
  EXPECT_NO_THROW(check_against_manifest(a, parameter_manifest(spec)));
  const auto manifest = parameter_manifest(spec);
  ASSERT_EQ(a.size(), manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    EXPECT_EQ(a.blobs()[i].name, manifest[i].name);
    EXPECT_EQ(a.blobs()[i].shape, manifest[i].shape);
  }
  for (float v : a.at("conv1/b").data) EXPECT_EQ(v, 0.0f);
}

TEST(InitRandom, HeScale) {
  const WeightStore store = init_random(tiny_ssd_spec(), 9);
  const Blob& w = store.at("fire5/expand3x3/w");
  double sq = 0.0;
  for (float v : w.data) sq += static_cast<double>(v) * v;
  const double std_dev = std::sqrt(sq / static_cast<double>(w.data.size()));
  EXPECT_NEAR(std_dev, std::sqrt(2.0 / (44 * 9)), 0.05 * std::sqrt(2.0 / (44 * 9)));
}

TEST(Ppm, ReadWrite) {
  RgbImage img(3, 2);
  img.set(0, 0, {255, 0, 10});
  img.set(2, 1, {1, 2, 3});
  std::stringstream buf;
  write_ppm(img, buf);
  const RgbImage back = read_ppm(buf);
  EXPECT_EQ(back.width, 3);
  EXPECT_EQ(back.height, 2);
  EXPECT_EQ(back.pixels, img.pixels);

  std::stringstream commented("P6\n# a comment\n2 1\n255\nabcdef");
  const RgbImage c = read_ppm(commented);
  EXPECT_EQ(c.at(1, 0, 2), 'f');
}

TEST(Ppm, Errors) {
  std::stringstream magic("P3\n1 1\n255\n000");
  EXPECT_THROW(read_ppm(magic), FormatError);
  std::stringstream truncated("P6\n2 2\n255\nabc");
  try {
    read_ppm(truncated);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_GE(e.offset(), 11u);
  }
  std::stringstream maxval("P6\n1 1\n65535\nabcdef");
  EXPECT_THROW(read_ppm(maxval), FormatError);
}

TEST(Preprocess, GrayImage) {
  const Tensor t = preprocess_image(RgbImage(123, 77, {128, 128, 128}));
  ASSERT_EQ(t.shape(), (Shape{1, 3, 300, 300}));
  for (int y = 0; y < 300; y += 37)
    for (int x = 0; x < 300; x += 41) {
      EXPECT_EQ(t.at(0, 0, y, x), 24.0f);
      EXPECT_EQ(t.at(0, 1, y, x), 11.0f);
      EXPECT_EQ(t.at(0, 2, y, x), 5.0f);
    }
}

TEST(Preprocess, IdentityAt300) {
  std::mt19937 rng(1);
  RgbImage img(300, 300);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng());
  const Tensor t = preprocess_image(img);
  for (int y = 0; y < 300; ++y)
    for (int x = 0; x < 300; ++x) {
      ASSERT_NEAR(t.at(0, 0, y, x), img.at(x, y, 2) - 104.0f, 1e-6);
      ASSERT_NEAR(t.at(0, 1, y, x), img.at(x, y, 1) - 117.0f, 1e-6);
      ASSERT_NEAR(t.at(0, 2, y, x), img.at(x, y, 0) - 123.0f, 1e-6);
    }
}

TEST(Preprocess, ConstantInvariance) {
  EXPECT_EQ(preprocess_image(RgbImage(600, 600, {10, 200, 90})), preprocess_image(RgbImage(300, 300, {10, 200, 90})));
}

TEST(Preprocess, RejectsEmpty) { EXPECT_THROW(preprocess_image(RgbImage()), Error); }
