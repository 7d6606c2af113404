#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace shdp {

using Rng = std::mt19937_64;

// Distribution objects are created per call so that no hidden state (e.g. the
// cached second normal of the polar method) leaks between calls. This keeps a
// chain's trajectory a pure function of the seed and the call sequence.

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

/// Gamma with shape/rate parameterisation.
inline double gamma(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

inline double beta(Rng& rng, double a, double b) {
  const double x = gamma(rng, a, 1.0);
  const double y = gamma(rng, b, 1.0);
  return x / (x + y);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Dirichlet draw. Zero parameters yield exact zeros.
inline std::vector<double> dirichlet(Rng& rng, const std::vector<double>& params) {
  std::vector<double> out(params.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i] > 0.0) {
      out[i] = gamma(rng, params[i], 1.0);
      total += out[i];
    }
  }
  if (!(total > 0.0)) {
    // Every gamma draw underflowed; put the mass on the largest parameter.
    const auto top = std::max_element(params.begin(), params.end()) - params.begin();
    out.assign(params.size(), 0.0);
    out[top] = 1.0;
    return out;
  }
  for (auto& v : out) v /= total;
  return out;
}

/// Index drawn proportionally to nonnegative weights; `total` must be their sum.
inline std::size_t sample_discrete(Rng& rng, const std::vector<double>& weights,
                                   double total) {
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

inline std::size_t sample_discrete(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  return sample_discrete(rng, weights, total);
}

/// SplitMix64 finaliser; used to derive independent seeds for folds, grid
/// points and chains from one user seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix_seed(seed);
  for (auto p : path) s = mix_seed(s ^ mix_seed(p + 1));
  return s;
}

}  // namespace shdp
