#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "entdist/rng.hpp"
#include "entdist/tags.hpp"

using namespace entdist;

TEST_CASE("fnv1a64 reference vectors") {
  // Offset basis and the single-byte vector from the FNV reference tables.
  CHECK(fnv1a64("") == UINT64_C(0xcbf29ce484222325));
  CHECK(fnv1a64("a") == UINT64_C(0xaf63dc4c8601ec8c));
  CHECK(fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64("pairs.both") != fnv1a64("pairs.lone_signal"));
}

TEST_CASE("splitmix64 is deterministic and moves the state") {
  std::uint64_t s1 = 42;
  std::uint64_t s2 = 42;
  std::uint64_t a = splitmix64(s1);
  std::uint64_t b = splitmix64(s2);
  CHECK(a == b);
  CHECK(s1 == s2);
  CHECK(s1 != 42);
  CHECK(splitmix64(s1) != a);
  std::uint64_t zero = 0;
  CHECK(splitmix64(zero) != 0);
}

TEST_CASE("random streams are addressed by seed, label and shard") {
  RandomStream a(1, "pairs.both", 0);
  RandomStream b(1, "pairs.both", 0);
  RandomStream other_shard(1, "pairs.both", 1);
  RandomStream other_label(1, "pairs.lone_signal", 0);
  RandomStream other_seed(2, "pairs.both", 0);
  bool shard_differs = false;
  bool label_differs = false;
  bool seed_differs = false;
  for (int i = 0; i < 8; ++i) {
    std::uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    shard_differs |= va != other_shard.next_u64();
    label_differs |= va != other_label.next_u64();
    seed_differs |= va != other_seed.next_u64();
  }
  CHECK(shard_differs);
  CHECK(label_differs);
  CHECK(seed_differs);
}

TEST_CASE("uniform sampler statistics") {
  RandomStream rng(7, "test.uniform", 0);
  const int n = 200000;
  double sum = 0.0;
  double min_v = 1.0;
  double max_v = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    min_v = std::min(min_v, u);
    max_v = std::max(max_v, u);
  }
  // 4 sigma of the mean of n uniforms: 4 / (sqrt(12 n)).
  CHECK(std::abs(sum / n - 0.5) < 4.0 / std::sqrt(12.0 * n));
  CHECK(min_v < 0.001);
  CHECK(max_v > 0.999);
  double lo = rng.uniform(5.0, 9.0);
  CHECK(lo >= 5.0);
  CHECK(lo < 9.0);
}

TEST_CASE("exponential sampler statistics") {
  RandomStream rng(7, "test.exponential", 0);
  const int n = 200000;
  const double rate = 4.0;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.exponential(rate);
    CHECK(x >= 0.0);
    sum += x;
    sum_sq += x * x;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  // Exponential mean 1/rate, sd 1/rate; mean standard error 1/(rate sqrt(n)).
  CHECK(std::abs(mean - 0.25) < 4.0 * 0.25 / std::sqrt(double(n)));
  CHECK(var == doctest::Approx(0.0625).epsilon(0.05));
}

TEST_CASE("gaussian sampler statistics") {
  RandomStream rng(7, "test.gaussian", 0);
  const int n = 200000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.gaussian(3.0, 2.0);
    sum += x;
    sum_sq += x * x;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean - 3.0) < 4.0 * 2.0 / std::sqrt(double(n)));
  CHECK(var == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("uniform index covers the range") {
  RandomStream rng(7, "test.index", 0);
  std::vector<int> hits(10, 0);
  for (int i = 0; i < 50000; ++i) {
    std::uint64_t k = rng.uniform_index(10);
    REQUIRE(k < 10);
    hits[static_cast<std::size_t>(k)]++;
  }
  for (int h : hits) CHECK(h > 4000);  // each cell expects 5000
}

TEST_CASE("validate_stream names the violated invariant") {
  TagStream good;
  good.resolution_ps = 1;
  good.duration_ps = 100;
  good.timestamps_ps = {0, 10, 10, 50};
  CHECK_NOTHROW(validate_stream(good));

  TagStream unsorted = good;
  unsorted.timestamps_ps = {10, 5};
  CHECK_THROWS_WITH_AS(validate_stream(unsorted),
                       doctest::Contains("nondecreasing"), std::invalid_argument);

  TagStream negative = good;
  negative.timestamps_ps = {-1, 5};
  CHECK_THROWS_WITH_AS(validate_stream(negative),
                       doctest::Contains("negative"), std::invalid_argument);

  TagStream beyond = good;
  beyond.timestamps_ps = {0, 150};
  CHECK_THROWS_WITH_AS(validate_stream(beyond),
                       doctest::Contains("duration"), std::invalid_argument);

  TagStream coarse = good;
  coarse.resolution_ps = 4;
  coarse.timestamps_ps = {0, 8, 10};
  CHECK_THROWS_WITH_AS(validate_stream(coarse),
                       doctest::Contains("resolution"), std::invalid_argument);

  TagStream bad_res = good;
  bad_res.resolution_ps = 0;
  CHECK_THROWS_AS(validate_stream(bad_res), std::invalid_argument);
}

TEST_CASE("non-paralyzable dead time") {
  std::vector<std::int64_t> tags = {0, 50, 120, 200, 260, 310};
  apply_dead_time(tags, 100.0);
  CHECK(tags == std::vector<std::int64_t>{0, 120, 260});

  // A gap exactly equal to the dead time survives.
  std::vector<std::int64_t> boundary = {0, 100, 150, 200};
  apply_dead_time(boundary, 100.0);
  CHECK(boundary == std::vector<std::int64_t>{0, 100, 200});

  std::vector<std::int64_t> untouched = {0, 1, 2};
  apply_dead_time(untouched, 0.0);
  CHECK(untouched == std::vector<std::int64_t>{0, 1, 2});

  std::vector<std::int64_t> empty;
  apply_dead_time(empty, 100.0);
  CHECK(empty.empty());
}
