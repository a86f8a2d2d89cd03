#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "onnpic/noise.hpp"

using namespace onnpic;

TEST_CASE("zero noise returns the input exactly") {
  Rng rng(401);
  Tensor x = Tensor::uniform({1, 3, 16, 16}, 0.0, 1.0, rng);
  Tensor y = synthesize_noise(x, {0.0, 0.0}, rng);
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("readout-only noise has the configured linear-domain std (1%)") {
  Rng rng(403);
  const double sigma_r = 0.1;  // deliberately above the training range
  const double lin = 0.5;
  Tensor x = Tensor::full({1, 1, 1000, 1000}, std::pow(lin, 1.0 / kGamma));
  Tensor y = synthesize_noise(x, {sigma_r, 0.0}, rng);
  double sum = 0.0, sq = 0.0;
  for (double v : y.data()) {
    double d = std::pow(v, kGamma) - lin;
    sum += d;
    sq += d * d;
  }
  double n = static_cast<double>(y.numel());
  double var = sq / n - (sum / n) * (sum / n);
  CHECK(std::sqrt(var) == doctest::Approx(sigma_r).epsilon(0.01));
}

TEST_CASE("linear-domain variance is affine in the signal (R^2 > 0.999)") {
  const NoiseParams pairs[] = {
      {0.02, 0.001}, {0.03, 0.005}, {0.01, 0.0005}, {0.025, 0.01},
      {0.0316, 0.008}};
  const int kBuckets = 6;
  const int kPerBucket = 500000;
  int pair_idx = 0;
  for (const NoiseParams& p : pairs) {
    Rng rng(405 + pair_idx++);
    std::vector<double> vs(kBuckets), vars(kBuckets);
    for (int b = 0; b < kBuckets; ++b) {
      double lin = 0.30 + 0.35 * b / (kBuckets - 1);
      Tensor x =
          Tensor::full({1, 1, 500, 1000}, std::pow(lin, 1.0 / kGamma));
      Tensor y = synthesize_noise(x, p, rng);
      double sum = 0.0, sq = 0.0;
      for (double v : y.data()) {
        double d = std::pow(v, kGamma) - lin;
        sum += d;
        sq += d * d;
      }
      double n = static_cast<double>(y.numel());
      REQUIRE(n == kPerBucket);
      vs[b] = lin;
      vars[b] = sq / n - (sum / n) * (sum / n);
    }
    // least squares line var = a + b * v
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int b = 0; b < kBuckets; ++b) {
      sx += vs[b];
      sy += vars[b];
      sxx += vs[b] * vs[b];
      sxy += vs[b] * vars[b];
    }
    double slope = (kBuckets * sxy - sx * sy) / (kBuckets * sxx - sx * sx);
    double intercept = (sy - slope * sx) / kBuckets;
    double ss_res = 0, ss_tot = 0, mean = sy / kBuckets;
    for (int b = 0; b < kBuckets; ++b) {
      double fit = intercept + slope * vs[b];
      ss_res += (vars[b] - fit) * (vars[b] - fit);
      ss_tot += (vars[b] - mean) * (vars[b] - mean);
    }
    double r2 = 1.0 - ss_res / ss_tot;
    CHECK(r2 > 0.999);
    CHECK(slope == doctest::Approx(p.sigma_s).epsilon(0.10));
    CHECK(intercept ==
          doctest::Approx(p.sigma_r * p.sigma_r).epsilon(0.10));
  }
}

TEST_CASE("train parameter draws stay in range with the right median") {
  Rng rng(409);
  std::vector<double> lr;
  for (int i = 0; i < 100000; ++i) {
    NoiseParams p = sample_train_params(rng);
    CHECK(p.sigma_r >= std::pow(10.0, kLogSigmaRMin) * (1 - 1e-12));
    CHECK(p.sigma_r <= std::pow(10.0, kLogSigmaRMax) * (1 + 1e-12));
    CHECK(p.sigma_s >= std::pow(10.0, kLogSigmaSMin) * (1 - 1e-12));
    CHECK(p.sigma_s <= std::pow(10.0, kLogSigmaSMax) * (1 + 1e-12));
    lr.push_back(std::log10(p.sigma_r));
  }
  std::nth_element(lr.begin(), lr.begin() + lr.size() / 2, lr.end());
  CHECK(lr[lr.size() / 2] == doctest::Approx(-2.25).epsilon(0.0089));

  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) {
    NoiseParams pa = sample_train_params(a);
    NoiseParams pb = sample_train_params(b);
    CHECK(pa.sigma_r == pb.sigma_r);
    CHECK(pa.sigma_s == pb.sigma_s);
  }
}

TEST_CASE("frozen test levels: 4 pairs, increasing, ends at the range bounds") {
  auto levels = test_levels();
  REQUIRE(levels.size() == 4);
  for (int i = 0; i + 1 < 4; ++i) {
    CHECK(levels[i].sigma_r < levels[i + 1].sigma_r);
    CHECK(levels[i].sigma_s < levels[i + 1].sigma_s);
  }
  CHECK(levels[0].sigma_r == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(levels[0].sigma_s == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(levels[3].sigma_r ==
        doctest::Approx(std::pow(10.0, -1.5)).epsilon(1e-12));
  CHECK(levels[3].sigma_s == doctest::Approx(1e-2).epsilon(1e-12));
  // frozen intermediate golden values
  CHECK(levels[1].sigma_r == doctest::Approx(3.1623e-3).epsilon(1e-4));
  CHECK(levels[1].sigma_s == doctest::Approx(4.6416e-4).epsilon(1e-4));
  CHECK(levels[2].sigma_r == doctest::Approx(1e-2).epsilon(1e-12));
  CHECK(levels[2].sigma_s == doctest::Approx(2.1544e-3).epsilon(1e-4));
  CHECK_THROWS_AS(test_level(0), ArgumentError);
  CHECK_THROWS_AS(test_level(5), ArgumentError);
}

TEST_CASE("augment: identity spec returns the input") {
  Rng rng(411);
  Tensor x = Tensor::uniform({1, 3, 12, 10}, 0.0, 1.0, rng);
  AugmentSpec spec;
  Tensor y = augment(x, spec, rng);
  REQUIRE(y.shape() == x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("augment: double horizontal flip is the identity") {
  Rng rng(413);
  Tensor x = Tensor::uniform({1, 3, 8, 9}, 0.0, 1.0, rng);
  AugmentSpec flip;
  flip.hflip = true;
  Tensor once = augment(x, flip, rng);
  Tensor twice = augment(once, flip, rng);
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK(twice.data()[i] == x.data()[i]);
  }
}

TEST_CASE("flip-only transform preserves the pixel multiset") {
  Rng rng(417);
  Tensor x = Tensor::uniform({1, 3, 6, 7}, 0.0, 1.0, rng);
  AugmentSpec spec;
  spec.hflip = true;
  spec.vflip = true;
  spec.jitter = 0.0;
  Tensor y = augment(x, spec, rng);
  std::vector<double> a(x.data().begin(), x.data().end());
  std::vector<double> b(y.data().begin(), y.data().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
}

TEST_CASE("augment is deterministic given the rng state") {
  Rng r1(55), r2(55);
  Rng img_rng(419);
  Tensor x = Tensor::uniform({1, 3, 20, 20}, 0.0, 1.0, img_rng);
  AugmentSpec spec;
  spec.jitter = 0.3;
  spec.crop_x = 2;
  spec.crop_y = 3;
  spec.crop_w = 10;
  spec.crop_h = 12;
  Tensor a = augment(x, spec, r1);
  Tensor b = augment(x, spec, r2);
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("invalid crop raises an argument error") {
  Rng rng(421);
  Tensor x = Tensor::uniform({1, 3, 8, 8}, 0.0, 1.0, rng);
  AugmentSpec spec;
  spec.crop_x = 4;
  spec.crop_w = 8;
  CHECK_THROWS_AS(augment(x, spec, rng), ArgumentError);
}

TEST_CASE("clipping bias stays below 0.01 for levels 1..3 on mid signals") {
  for (int level = 1; level <= 3; ++level) {
    Rng rng(430 + level);
    NoiseParams p = test_level(level);
    for (double v : {0.2, 0.35, 0.5, 0.65, 0.8}) {
      Tensor x = Tensor::full({1, 1, 200, 200}, v);
      Tensor y = synthesize_noise(x, p, rng);
      double mean = 0.0;
      for (double e : y.data()) mean += e;
      mean /= y.numel();
      CHECK(std::fabs(mean - v) < 0.01);
    }
  }
}
