#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "trace.hpp"

namespace shdp {

/// Gelman-Rubin shrink factor of chains' values over [begin, end); the first
/// half of the window is discarded as burn-in. Needs >= 2 chains and a window
/// of at least 10 iterations.
///
///   R = sqrt(((N-1)/N W + B/N) / W)
///
/// with W the mean within-chain variance and B/N the variance of chain means
/// over the N retained iterations.
inline double shrink_factor(const std::vector<std::vector<double>>& chains, std::size_t begin,
                            std::size_t end) {
  if (chains.size() < 2) throw ValidationError("shrink factor needs at least two chains");
  if (end < begin || end - begin < 10) throw ValidationError("window must span at least 10 iterations");
  for (const auto& c : chains) {
    if (c.size() < end) throw ValidationError("window exceeds chain length");
  }
  const std::size_t start = begin + (end - begin) / 2;
  const double n = static_cast<double>(end - start);
  const double m = static_cast<double>(chains.size());

  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    double mean = 0.0;
    for (std::size_t i = start; i < end; ++i) mean += c[i];
    mean /= n;
    double var = 0.0;
    for (std::size_t i = start; i < end; ++i) var += (c[i] - mean) * (c[i] - mean);
    within += var / (n - 1.0);
    means.push_back(mean);
  }
  within /= m;
  if (!(within > 0.0)) throw ValidationError("degenerate trace: zero within-chain variance");

  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double between_over_n = 0.0;
  for (double mu : means) between_over_n += (mu - grand) * (mu - grand);
  between_over_n /= (m - 1.0);

  return std::sqrt(((n - 1.0) / n * within + between_over_n) / within);
}

inline double shrink_factor(const std::vector<ChainTrace>& traces, const std::string& statistic,
                            std::size_t begin, std::size_t end) {
  std::vector<std::vector<double>> chains;
  for (const auto& t : traces) chains.push_back(t.statistic(statistic));
  return shrink_factor(chains, begin, end);
}

struct ShrinkPoint {
  std::size_t iteration;  // prefix length
  double value;
};

/// Shrink factor on growing prefixes of length step, 2 step, ..., N (the last
/// prefix is always the full trace). Prefixes shorter than 10 are skipped.
inline std::vector<ShrinkPoint> rolling_shrink(const std::vector<std::vector<double>>& chains,
                                               std::size_t step) {
  if (step == 0) throw ValidationError("step must be positive");
  if (chains.empty()) throw ValidationError("no chains");
  std::size_t len = chains.front().size();
  for (const auto& c : chains) len = std::min(len, c.size());
  std::vector<ShrinkPoint> out;
  for (std::size_t end = step;; end += step) {
    const auto e = std::min(end, len);
    if (e >= 10) out.push_back({e, shrink_factor(chains, 0, e)});
    if (e == len) break;
  }
  return out;
}

inline std::vector<ShrinkPoint> rolling_shrink(const std::vector<ChainTrace>& traces,
                                               const std::string& statistic, std::size_t step) {
  std::vector<std::vector<double>> chains;
  for (const auto& t : traces) chains.push_back(t.statistic(statistic));
  return rolling_shrink(chains, step);
}

inline void write_shrink_csv(std::ostream& out, const std::vector<ShrinkPoint>& series) {
  out << "iteration,shrink_factor\n";
  for (const auto& p : series) out << p.iteration << ',' << format_double(p.value) << '\n';
}

}  // namespace shdp
