#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "random.hpp"

namespace shdp {

using TopicId = std::int32_t;

/// Gamma(shape, rate) prior on a concentration parameter.
struct ConcentrationPrior {
  double shape = 1.0;
  double rate = 1.0;

  void check() const {
    if (!(shape > 0.0 && rate > 0.0)) {
      throw ValidationError("concentration prior shape and rate must be positive");
    }
  }
};

/// Collapsed direct-assignment state of the two-level HDP.
///
/// Topics are dense ids [0, K). A topic may be emptied during a sweep; it then
/// keeps its slot (and weight) until `compact_topics` removes it.
struct HdpState {
  std::size_t vocab_size = 0;
  double alpha_w = 0.01;  // symmetric Dirichlet on topic-word distributions
  double alpha = 1.0;     // document-level concentration
  double gamma = 1.0;     // corpus-level concentration

  std::vector<std::vector<TopicId>> z;    // [doc][token]
  std::vector<std::vector<int>> n_dk;     // [doc][topic]
  std::vector<std::vector<int>> c_kw;     // [topic][term]
  std::vector<int> c_k;                   // [topic]
  std::vector<std::vector<int>> m_dk;     // [doc][topic] table counts
  std::vector<int> m_k;                   // [topic] column sums of m_dk
  std::vector<double> beta;               // [topic]
  double beta_new = 1.0;                  // unallocated stick mass

  HdpState() = default;

  /// Empty state (K = 0, beta_new = 1) shaped for `corpus`; tokens unallocated.
  HdpState(const Corpus& corpus, double alpha_w_, double alpha_, double gamma_)
      : vocab_size(corpus.vocab_size()), alpha_w(alpha_w_), alpha(alpha_), gamma(gamma_) {
    if (vocab_size == 0) throw ValidationError("vocabulary must be non-empty");
    if (!(alpha_w > 0.0)) throw ValidationError("alpha_w must be positive");
    z.resize(corpus.size());
    for (std::size_t d = 0; d < corpus.size(); ++d) z[d].assign(corpus[d].size(), -1);
    n_dk.assign(corpus.size(), {});
    m_dk.assign(corpus.size(), {});
  }

  std::size_t num_topics() const noexcept { return c_k.size(); }
  std::size_t num_docs() const noexcept { return z.size(); }
  std::size_t doc_length(std::size_t d) const noexcept { return z[d].size(); }

  /// Appends a zero-count topic with the given weight. Does not touch beta_new.
  TopicId push_topic(double weight) {
    c_kw.emplace_back(vocab_size, 0);
    c_k.push_back(0);
    m_k.push_back(0);
    beta.push_back(weight);
    for (auto& row : n_dk) row.push_back(0);
    for (auto& row : m_dk) row.push_back(0);
    return static_cast<TopicId>(c_k.size() - 1);
  }

  void remove_token(std::size_t d, std::size_t j, TermId w) {
    const TopicId k = z[d][j];
    --n_dk[d][k];
    --c_kw[k][w];
    --c_k[k];
    z[d][j] = -1;
  }

  void add_token(std::size_t d, std::size_t j, TermId w, TopicId k) {
    z[d][j] = k;
    ++n_dk[d][k];
    ++c_kw[k][w];
    ++c_k[k];
  }

  /// Rebuilds n_dk, c_kw and c_k from z and the corpus words.
  void recount(const Corpus& corpus) {
    const auto K = num_topics();
    for (auto& row : n_dk) row.assign(K, 0);
    for (auto& row : c_kw) row.assign(vocab_size, 0);
    c_k.assign(K, 0);
    for (std::size_t d = 0; d < z.size(); ++d) {
      for (std::size_t j = 0; j < z[d].size(); ++j) {
        const TopicId k = z[d][j];
        ++n_dk[d][k];
        ++c_kw[k][corpus[d].tokens[j]];
        ++c_k[k];
      }
    }
  }

  void recount_tables() {
    m_k.assign(num_topics(), 0);
    for (const auto& row : m_dk) {
      for (std::size_t k = 0; k < row.size(); ++k) m_k[k] += row[k];
    }
  }

  int total_tables() const { return std::accumulate(m_k.begin(), m_k.end(), 0); }

  /// Throws StateError describing the first violated invariant.
  void validate(const Corpus& corpus, bool require_compact = true) const;
};

inline void HdpState::validate(const Corpus& corpus, bool require_compact) const {
  auto fail = [](const std::string& msg) { throw StateError("invalid state: " + msg); };
  const auto K = num_topics();
  if (z.size() != corpus.size()) fail("document count mismatch");
  if (c_kw.size() != K || m_k.size() != K || beta.size() != K) fail("topic array sizes disagree");
  if (n_dk.size() != corpus.size() || m_dk.size() != corpus.size()) fail("doc array sizes disagree");

  std::vector<std::vector<int>> cw(K, std::vector<int>(vocab_size, 0));
  std::vector<int> ck(K, 0);
  std::vector<int> mk(K, 0);
  for (std::size_t d = 0; d < z.size(); ++d) {
    if (z[d].size() != corpus[d].size()) fail("token count mismatch in doc " + std::to_string(d));
    if (n_dk[d].size() != K || m_dk[d].size() != K) fail("row width mismatch in doc " + std::to_string(d));
    std::vector<int> nd(K, 0);
    for (std::size_t j = 0; j < z[d].size(); ++j) {
      const TopicId k = z[d][j];
      if (k < 0 || static_cast<std::size_t>(k) >= K) fail("unallocated or out-of-range topic");
      ++nd[k];
      ++cw[k][corpus[d].tokens[j]];
      ++ck[k];
    }
    if (nd != n_dk[d]) fail("n_dk inconsistent with z in doc " + std::to_string(d));
    for (std::size_t k = 0; k < K; ++k) {
      const int n = n_dk[d][k];
      const int m = m_dk[d][k];
      if (n > 0 ? (m < 1 || m > n) : m != 0) {
        fail("table count bounds violated at doc " + std::to_string(d) + ", topic " +
             std::to_string(k));
      }
      mk[k] += m;
    }
  }
  if (cw != c_kw) fail("c_kw inconsistent with z");
  if (ck != c_k) fail("c_k inconsistent with z");
  if (mk != m_k) fail("m_k is not the column sum of m_dk");
  if (require_compact) {
    for (std::size_t k = 0; k < K; ++k) {
      if (c_k[k] == 0) fail("empty topic " + std::to_string(k) + " survived compaction");
    }
  }
  double total = beta_new;
  if (!(beta_new >= 0.0)) fail("negative beta_new");
  for (double b : beta) {
    if (!(b >= 0.0)) fail("negative topic weight");
    total += b;
  }
  if (std::abs(total - 1.0) >= 1e-12) fail("weights do not sum to one");
}

/// Collapsed Dirichlet-multinomial predictive (c_kw + a) / (c_k + V a).
/// The caller is responsible for having removed the current token.
inline double word_predictive(const HdpState& s, TopicId k, TermId w) {
  if (k < 0 || static_cast<std::size_t>(k) >= s.num_topics()) {
    throw StateError("topic " + std::to_string(k) + " is not instantiated");
  }
  return (s.c_kw[k][w] + s.alpha_w) /
         (s.c_k[k] + static_cast<double>(s.vocab_size) * s.alpha_w);
}

/// Predictive of a term under an empty topic: 1/V for a symmetric prior.
inline double new_topic_predictive(const HdpState& s, TermId /*w*/ = 0) {
  return 1.0 / static_cast<double>(s.vocab_size);
}

/// Splits fraction `b` of the unallocated mass off into a new empty topic.
inline TopicId split_new_topic(HdpState& s, double b) {
  const double w = b * s.beta_new;
  const double rest = s.beta_new - w;  // keeps the sum exact
  s.beta_new = rest;
  return s.push_topic(w);
}

/// Instantiates a topic with weight b * beta_new, b ~ Beta(1, gamma).
inline TopicId instantiate_topic(HdpState& s, Rng& rng, double gamma) {
  if (!(s.beta_new > 0.0)) throw StateError("no unallocated stick mass to split");
  return split_new_topic(s, beta(rng, 1.0, gamma));
}

inline TopicId instantiate_topic(HdpState& s, Rng& rng) {
  return instantiate_topic(s, rng, s.gamma);
}

/// Removes topics with c_k = 0, returning their weight to beta_new and
/// relabelling z. Result maps old id -> new id, or -1 for removed topics.
inline std::vector<TopicId> compact_topics(HdpState& s) {
  const auto K = s.num_topics();
  std::vector<TopicId> mapping(K, -1);
  TopicId next = 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (s.c_k[k] > 0) mapping[k] = next++;
  }
  if (static_cast<std::size_t>(next) == K) return mapping;

  auto keep_cols = [&](auto& vec) {
    for (std::size_t k = 0; k < K; ++k) {
      if (mapping[k] >= 0 && static_cast<std::size_t>(mapping[k]) != k) {
        vec[mapping[k]] = std::move(vec[k]);
      }
    }
    vec.resize(next);
  };
  for (std::size_t k = 0; k < K; ++k) {
    if (mapping[k] < 0) s.beta_new += s.beta[k];
  }
  keep_cols(s.c_kw);
  keep_cols(s.c_k);
  keep_cols(s.m_k);
  keep_cols(s.beta);
  for (auto& row : s.n_dk) keep_cols(row);
  for (auto& row : s.m_dk) keep_cols(row);
  for (auto& doc : s.z) {
    for (auto& k : doc) {
      if (k >= 0) k = mapping[k];
    }
  }
  if (next == 0) s.beta_new = 1.0;
  return mapping;
}

/// Auxiliary-variable update of alpha given per-document lengths and table
/// totals (Teh et al.), followed by the Escobar-West update of gamma given the
/// number of topics and the total table count. Either falls back to a prior
/// draw when it has no data. Returns the new (alpha, gamma).
inline std::pair<double, double> resample_concentrations(HdpState& s,
                                                         const ConcentrationPrior& prior_alpha,
                                                         const ConcentrationPrior& prior_gamma,
                                                         Rng& rng) {
  prior_alpha.check();
  prior_gamma.check();
  const int tables = s.total_tables();

  {
    double shape = prior_alpha.shape + tables;
    double rate = prior_alpha.rate;
    for (std::size_t d = 0; d < s.num_docs(); ++d) {
      const double n = static_cast<double>(s.doc_length(d));
      if (n == 0.0) continue;
      const double w = beta(rng, s.alpha + 1.0, n);
      if (bernoulli(rng, n / (n + s.alpha))) shape -= 1.0;
      rate -= std::log(w);
    }
    s.alpha = gamma(rng, shape, rate);
  }

  if (tables == 0) {
    s.gamma = gamma(rng, prior_gamma.shape, prior_gamma.rate);
  } else {
    int topics = 0;
    for (int m : s.m_k) topics += m > 0 ? 1 : 0;
    const double eta = beta(rng, s.gamma + 1.0, tables);
    const double rate = prior_gamma.rate - std::log(eta);
    const double odds = (prior_gamma.shape + topics - 1.0) / (tables * rate);
    const double shape = uniform01(rng) < odds / (1.0 + odds) ? prior_gamma.shape + topics
                                                             : prior_gamma.shape + topics - 1.0;
    s.gamma = gamma(rng, shape, rate);
  }
  return {s.alpha, s.gamma};
}

}  // namespace shdp
