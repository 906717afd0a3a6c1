#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fusegan/conditioning.hpp"
#include "fusegan/errors.hpp"

using namespace fusegan;

namespace {
const std::vector<std::string> kVocab = {"a",     "red",   "green", "blue",
                                         "circle", "square", "on"};

TextEncoder make_encoder(int64_t d_e = 16) {
  EncoderConfig cfg;
  cfg.d_e = d_e;
  cfg.seed = 0;
  return TextEncoder(kVocab, cfg);
}

// Empirical KS statistic of samples against rejection-sampled oracle draws.
double ks_two_sample(std::vector<float> a, std::vector<float> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}
}  // namespace

TEST_CASE("encode_sentence is deterministic and order-sensitive") {
  TextEncoder enc = make_encoder();
  auto v1 = enc.encode({"red", "circle"});
  auto v2 = enc.encode({"red", "circle"});
  CHECK(v1 == v2);
  TextEncoder enc2 = make_encoder();
  CHECK(enc2.encode({"red", "circle"}) == v1);

  auto swapped = enc.encode({"circle", "red"});
  CHECK(v1 != swapped);

  CHECK(static_cast<int64_t>(v1.size()) == enc.dim());
  for (float x : v1) CHECK(std::isfinite(x));
}

TEST_CASE("encode_sentence rejects empty input, maps unknown tokens") {
  TextEncoder enc = make_encoder();
  CHECK_THROWS_AS(enc.encode({}), InvalidInputError);
  // Unknown tokens hit the reserved row rather than failing.
  auto v = enc.encode({"xylophone"});
  CHECK(static_cast<int64_t>(v.size()) == enc.dim());
}

TEST_CASE("sample_noise moments under the law of large numbers") {
  Rng rng(42);
  Tensor z = sample_noise(100000, 1, rng);
  double sum = 0.0, sq = 0.0;
  for (int64_t i = 0; i < z.numel(); ++i) {
    sum += z.at(i);
    sq += static_cast<double>(z.at(i)) * z.at(i);
  }
  const double mean = sum / z.numel();
  const double var = sq / z.numel() - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("sample_noise reproducible and validated") {
  Rng a(7), b(7);
  Tensor za = sample_noise(8, 5, a);
  Tensor zb = sample_noise(8, 5, b);
  for (int64_t i = 0; i < za.numel(); ++i) CHECK(za.at(i) == zb.at(i));
  Rng r(1);
  CHECK_THROWS_AS(sample_noise(0, 5, r), InvalidInputError);
  CHECK_THROWS_AS(sample_noise(4, 0, r), InvalidInputError);
}

TEST_CASE("truncate_noise leaves in-range entries and bounds the rest") {
  Rng rng(3);
  Tensor z(Shape{2}, {0.5f, -0.2f});
  Tensor t = truncate_noise(z, 1.0, rng);
  CHECK(t.at(0) == 0.5f);
  CHECK(t.at(1) == -0.2f);

  Tensor big(Shape{3}, {3.7f, -5.0f, 0.1f});
  Tensor tb = truncate_noise(big, 2.0, rng);
  for (int64_t i = 0; i < 3; ++i) CHECK(std::abs(tb.at(i)) <= 2.0f);
  CHECK(tb.at(2) == 0.1f);

  CHECK_THROWS_AS(truncate_noise(z, 0.0, rng), InvalidInputError);
  CHECK_THROWS_AS(truncate_noise(z, -1.0, rng), InvalidInputError);
}

TEST_CASE("truncate_noise idempotence") {
  Rng rng(11);
  Tensor z = sample_noise(1, 512, rng);
  Tensor t1 = truncate_noise(z, 0.8, rng);
  Tensor t2 = truncate_noise(t1, 0.8, rng);
  for (int64_t i = 0; i < t1.numel(); ++i) CHECK(t1.at(i) == t2.at(i));
}

TEST_CASE("truncated distribution matches the rejection oracle (KS)") {
  const double threshold = 0.5;
  const int64_t n = 100000;
  Rng rng(2024);
  Tensor z = sample_noise(1, n, rng);
  Tensor t = truncate_noise(z, threshold, rng);
  std::vector<float> impl(t.data(), t.data() + n);

  // Independent oracle: plain rejection sampling from N(0,1).
  Rng oracle_rng(990017);
  std::vector<float> oracle(static_cast<size_t>(n));
  for (auto& v : oracle) {
    double s;
    do {
      s = oracle_rng.normal();
    } while (std::abs(s) > threshold);
    v = static_cast<float>(s);
  }
  CHECK(ks_two_sample(impl, oracle) < 0.01);
}

TEST_CASE("skip_z_concat layout") {
  Tensor e(Shape{1, 2}, {1, 2});
  Tensor z(Shape{1, 1}, {3});
  Tensor out = skip_z_concat(e, z);
  CHECK(out.shape() == Shape{1, 3});
  CHECK(out.at(0) == 1.0f);
  CHECK(out.at(1) == 2.0f);
  CHECK(out.at(2) == 3.0f);

  // Same e, two different z: shared prefix, different tails.
  Rng rng(5);
  Tensor z1 = sample_noise(1, 4, rng), z2 = sample_noise(1, 4, rng);
  Tensor a = skip_z_concat(e, z1), b = skip_z_concat(e, z2);
  CHECK(a.at(0) == b.at(0));
  CHECK(a.at(1) == b.at(1));
  bool tail_differs = false;
  for (int64_t i = 2; i < 6; ++i) tail_differs |= a.at(i) != b.at(i);
  CHECK(tail_differs);

  // Degenerate unconditional run: D_e = 0 passes z through.
  Tensor e0(Shape{1, 0});
  Tensor c = skip_z_concat(e0, z1);
  CHECK(c.shape() == z1.shape());
  for (int64_t i = 0; i < 4; ++i) CHECK(c.at(i) == z1.at(i));
}

TEST_CASE("vocab file round trip") {
  const std::string path = "vocab_test_tmp.txt";
  TextEncoder::save_vocab(kVocab, path);
  auto loaded = TextEncoder::load_vocab(path);
  CHECK(loaded == kVocab);
  std::remove(path.c_str());
}
