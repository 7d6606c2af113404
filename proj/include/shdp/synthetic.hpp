#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "random.hpp"
#include "response_glm.hpp"

namespace shdp {

/// Finite planted-topic version of the generative process: per-document
/// proportions from a symmetric Dirichlet, tokens from fixed topics, and a
/// response drawn from the GLM on the realised topic proportions.
struct SyntheticSpec {
  std::vector<std::vector<double>> topics;  // [topic][term], rows sum to 1
  std::vector<double> eta;                  // one coefficient per topic
  Family family = Family::Gaussian;
  double noise_sd = 0.3;                    // Gaussian only
  double doc_concentration = 0.5;
  std::size_t doc_length = 50;
  double labelled_fraction = 1.0;

  std::size_t num_topics() const { return topics.size(); }
  std::size_t vocab_size() const { return topics.empty() ? 0 : topics.front().size(); }
};

struct SyntheticData {
  Corpus corpus;
  std::vector<std::vector<double>> zbar;  // realised topic proportions
};

/// Topics that each put most of their mass on an own block of V / K terms and
/// spread `leak` uniformly over the whole vocabulary.
inline std::vector<std::vector<double>> block_topics(std::size_t num_topics, std::size_t vocab_size,
                                                     double leak) {
  if (num_topics == 0 || vocab_size < num_topics) {
    throw ValidationError("need at least one term per planted topic");
  }
  const std::size_t block = vocab_size / num_topics;
  std::vector<std::vector<double>> topics(num_topics, std::vector<double>(vocab_size, 0.0));
  for (std::size_t k = 0; k < num_topics; ++k) {
    for (std::size_t w = 0; w < vocab_size; ++w) {
      const bool own = w >= k * block && w < (k + 1) * block;
      topics[k][w] = leak / static_cast<double>(vocab_size) + (own ? (1.0 - leak) / block : 0.0);
    }
  }
  return topics;
}

inline Vocabulary synthetic_vocabulary(std::size_t vocab_size) {
  std::vector<std::string> terms;
  for (std::size_t w = 0; w < vocab_size; ++w) terms.push_back("w" + std::to_string(w));
  return Vocabulary(std::move(terms));
}

inline SyntheticData generate_synthetic(const SyntheticSpec& spec, std::size_t num_docs, Rng& rng,
                                        const std::string& id_prefix = "doc") {
  const auto K = spec.num_topics();
  const auto V = spec.vocab_size();
  if (K == 0 || spec.eta.size() != K) throw ValidationError("eta must have one entry per topic");
  if (spec.doc_length == 0) throw ValidationError("doc_length must be positive");

  std::vector<double> topic_total(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (double p : spec.topics[k]) topic_total[k] += p;
  }
  SyntheticData out;
  std::vector<Document> docs;
  const std::vector<double> conc(K, spec.doc_concentration);
  for (std::size_t d = 0; d < num_docs; ++d) {
    const auto theta = dirichlet(rng, conc);
    double theta_total = 0.0;
    for (double t : theta) theta_total += t;
    Document doc{id_prefix + std::to_string(d), {}, std::nullopt};
    std::vector<double> zbar(K, 0.0);
    for (std::size_t j = 0; j < spec.doc_length; ++j) {
      const auto k = sample_discrete(rng, theta, theta_total);
      const auto w = sample_discrete(rng, spec.topics[k], topic_total[k]);
      doc.tokens.push_back(static_cast<TermId>(w));
      zbar[k] += 1.0 / static_cast<double>(spec.doc_length);
    }
    double t = 0.0;
    for (std::size_t k = 0; k < K; ++k) t += spec.eta[k] * zbar[k];
    const double y = spec.family == Family::Gaussian ? normal(rng, t, spec.noise_sd)
                                                     : (bernoulli(rng, sigmoid(t)) ? 1.0 : 0.0);
    if (uniform01(rng) < spec.labelled_fraction) doc.response = y;
    docs.push_back(std::move(doc));
    out.zbar.push_back(std::move(zbar));
  }
  out.corpus = Corpus(synthetic_vocabulary(V), std::move(docs));
  return out;
}

}  // namespace shdp
