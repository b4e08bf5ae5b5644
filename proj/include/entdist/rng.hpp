#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace entdist {

// 64-bit FNV-1a hash, used to turn stream labels into seed material.
std::uint64_t fnv1a64(std::string_view text);

// Same hash rendered as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view text);

// splitmix64 step; mixes seed material into well-distributed 64-bit words.
std::uint64_t splitmix64(std::uint64_t& state);

// Deterministic random stream addressed by (master seed, label, shard index).
// Samplers are hand-rolled on top of mt19937_64 so sequences are identical on
// every platform; std::* distributions are implementation-defined and avoided.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::string_view label, std::uint64_t shard_index);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);
  // Exponential with the given event rate (mean 1/rate).
  double exponential(double rate);
  // Box-Muller Gaussian; the spare value is cached, keeping draws deterministic.
  double gaussian(double mean, double sigma);
  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace entdist
