#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "corpus.hpp"
#include "error.hpp"
#include "optimizer.hpp"
#include "random.hpp"
#include "response_glm.hpp"
#include "state.hpp"
#include "trace.hpp"

namespace shdp {

enum class Mode { Supervised, Unsupervised, Predict };
enum class CoeffUpdate { Sample, Map };

/// Table-count simulation. `Antoniak` is the Chinese-restaurant rule
/// m = sum_{i=0}^{n-1} Bernoulli(ab / (ab + i)). `Printed` is the alternative
/// sum_{i=1}^{n} 1[u_i >= ab / (ab + i)], kept for comparison only: it can
/// return m = 0 for n > 0 and therefore does not satisfy HdpState::validate.
enum class TableRule { Antoniak, Printed };

struct SamplerConfig {
  Mode mode = Mode::Supervised;
  int train_iters = 2000;
  int predict_iters = 500;
  int burn_in_predict = 100;
  std::uint64_t seed = 1;
  CoeffUpdate coeff_update = CoeffUpdate::Sample;
  bool record_trace = true;

  int initial_topics = 1;
  int aux_draws = 1;
  TableRule table_rule = TableRule::Antoniak;
  double alpha_w = 0.01;
  double initial_alpha = 1.0;
  double initial_gamma = 1.0;
  ConcentrationPrior prior_alpha{};
  ConcentrationPrior prior_gamma{};
  bool resample_concentrations = true;
  OptimizerConfig optimizer{};
  bool validate_each_sweep = false;

  void check() const {
    if (train_iters < 0) throw ValidationError("train_iters must be nonnegative");
    if (predict_iters <= burn_in_predict || burn_in_predict < 0) {
      throw ValidationError("predict_iters must exceed burn_in_predict >= 0");
    }
    if (initial_topics < 1) throw ValidationError("initial_topics must be >= 1");
    if (aux_draws < 1) throw ValidationError("aux_draws must be >= 1");
    if (!(alpha_w > 0.0)) throw ValidationError("alpha_w must be positive");
    if (!(initial_alpha > 0.0 && initial_gamma > 0.0)) {
      throw ValidationError("initial concentrations must be positive");
    }
    prior_alpha.check();
    prior_gamma.check();
    optimizer.check();
  }

  bool supervised() const noexcept { return mode == Mode::Supervised; }
};

/// Reusable buffers for the allocation step.
struct AllocationScratch {
  std::vector<double> weights;
  std::vector<double> loglik;
  std::vector<double> aux_eta;
};

namespace detail {

inline void fill_word_weights(const HdpState& s, std::size_t d, TermId w, int aux_draws,
                              std::vector<double>& weights) {
  const auto K = s.num_topics();
  weights.resize(K + static_cast<std::size_t>(aux_draws));
  const double v_alpha_w = static_cast<double>(s.vocab_size) * s.alpha_w;
  const auto& nd = s.n_dk[d];
  for (std::size_t k = 0; k < K; ++k) {
    weights[k] = (nd[k] + s.alpha * s.beta[k]) * (s.c_kw[k][w] + s.alpha_w) / (s.c_k[k] + v_alpha_w);
  }
  const double w_new = s.alpha * s.beta_new / aux_draws * new_topic_predictive(s, w);
  for (int a = 0; a < aux_draws; ++a) weights[K + a] = w_new;
}

}  // namespace detail

/// Unnormalised allocation weights for token j of document d, with that token
/// already removed from the counts. Entries [0, K) are instantiated topics,
/// the rest are new-topic candidates with coefficients `aux_eta` (used only
/// when `supervised` and the document is labelled).
inline std::vector<double> allocation_weights(const HdpState& s, const ResponseModel& model,
                                              const Corpus& corpus, std::size_t d, std::size_t j,
                                              bool supervised,
                                              const std::vector<double>& aux_eta = {0.0}) {
  const int aux = static_cast<int>(std::max<std::size_t>(aux_eta.size(), 1));
  std::vector<double> weights;
  detail::fill_word_weights(s, d, corpus[d].tokens[j], aux, weights);
  if (supervised && corpus[d].labelled()) {
    const auto K = s.num_topics();
    for (std::size_t k = 0; k < weights.size(); ++k) {
      weights[k] *= k < K ? allocation_response_factor(model, s, corpus, d, static_cast<TopicId>(k))
                          : allocation_response_factor(model, s, corpus, d, static_cast<TopicId>(K),
                                                       aux_eta[k - K]);
    }
  }
  return weights;
}

/// One Gibbs update of z_dj. Removes the token, samples a topic (possibly a
/// new one, which is instantiated with its coefficient appended to `model`),
/// and re-adds the token. Returns the chosen topic.
inline TopicId sample_allocation(HdpState& s, ResponseModel& model, const Corpus& corpus,
                                 std::size_t d, std::size_t j, Rng& rng, bool supervised,
                                 int aux_draws, AllocationScratch& scratch) {
  const auto& doc = corpus[d];
  const TermId w = doc.tokens[j];
  s.remove_token(d, j, w);

  const auto K = s.num_topics();
  auto& weights = scratch.weights;
  detail::fill_word_weights(s, d, w, aux_draws, weights);

  const bool use_response = supervised && doc.labelled();
  if (use_response) {
    const double sd_prior = std::sqrt(model.zeta);
    scratch.aux_eta.resize(static_cast<std::size_t>(aux_draws));
    for (auto& e : scratch.aux_eta) e = normal(rng, 0.0, sd_prior);

    const auto& nd = s.n_dk[d];
    double base = 0.0;
    for (std::size_t k = 0; k < K; ++k) base += model.eta[k] * nd[k];
    const double inv_n = 1.0 / static_cast<double>(doc.size());
    const double y = *doc.response;
    auto& ll = scratch.loglik;
    ll.resize(weights.size());
    double max_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const double coef = k < K ? model.eta[k] : scratch.aux_eta[k - K];
      ll[k] = response_loglik_at(model.family, model.delta, (base + coef) * inv_n, y);
      max_ll = std::max(max_ll, ll[k]);
    }
    for (std::size_t k = 0; k < weights.size(); ++k) weights[k] *= std::exp(ll[k] - max_ll);
  }

  double total = 0.0;
  for (double v : weights) total += v;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericalError("degenerate allocation weights at document '" + doc.id + "', token " +
                         std::to_string(j));
  }
  const std::size_t pick = sample_discrete(rng, weights, total);

  TopicId k;
  if (pick < K) {
    k = static_cast<TopicId>(pick);
  } else {
    k = instantiate_topic(s, rng, s.gamma);
    const double eta_new =
        use_response ? scratch.aux_eta[pick - K] : normal(rng, 0.0, std::sqrt(model.zeta));
    model.eta.push_back(eta_new);
  }
  s.add_token(d, j, w, k);
  return k;
}

inline TopicId sample_allocation(HdpState& s, ResponseModel& model, const Corpus& corpus,
                                 std::size_t d, std::size_t j, Rng& rng, bool supervised = true,
                                 int aux_draws = 1) {
  AllocationScratch scratch;
  return sample_allocation(s, model, corpus, d, j, rng, supervised, aux_draws, scratch);
}

/// Table count for n customers of a dish with weight alpha * beta_k.
inline int sample_table_count(int n, double ab, Rng& rng, TableRule rule = TableRule::Antoniak) {
  if (n <= 0) return 0;
  if (rule == TableRule::Printed) {
    int m = 0;
    for (int i = 1; i <= n; ++i) m += uniform01(rng) >= ab / (ab + i) ? 1 : 0;
    return m;
  }
  int m = 1;
  for (int i = 1; i < n; ++i) m += bernoulli(rng, ab / (ab + i)) ? 1 : 0;
  return m;
}

inline void sample_table_counts_doc(HdpState& s, std::size_t d, Rng& rng,
                                    TableRule rule = TableRule::Antoniak) {
  const auto K = s.num_topics();
  auto& row = s.m_dk[d];
  row.resize(K, 0);
  for (std::size_t k = 0; k < K; ++k) {
    const int m = sample_table_count(s.n_dk[d][k], s.alpha * s.beta[k], rng, rule);
    s.m_k[k] += m - row[k];
    row[k] = m;
  }
}

inline void sample_table_counts(HdpState& s, Rng& rng, TableRule rule = TableRule::Antoniak) {
  for (std::size_t d = 0; d < s.num_docs(); ++d) sample_table_counts_doc(s, d, rng, rule);
}

/// (beta_1..beta_K, beta_new) ~ Dirichlet(m_1, ..., m_K, gamma).
inline void sample_beta(HdpState& s, Rng& rng) {
  const auto K = s.num_topics();
  std::vector<double> params(K + 1);
  for (std::size_t k = 0; k < K; ++k) params[k] = s.m_k[k];
  params[K] = s.gamma;
  auto draw = dirichlet(rng, params);
  s.beta_new = draw[K];
  draw.pop_back();
  s.beta = std::move(draw);
}

/// ||y - X eta|| over labelled documents.
inline double residual_l2(const HdpState& s, const ResponseModel& model, const Corpus& corpus) {
  double ss = 0.0;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    if (!corpus[d].labelled() || s.doc_length(d) == 0) continue;
    double t = 0.0;
    for (std::size_t k = 0; k < s.num_topics(); ++k) t += model.eta[k] * s.n_dk[d][k];
    t /= static_cast<double>(s.doc_length(d));
    const double r = *corpus[d].response - t;
    ss += r * r;
  }
  return std::sqrt(ss);
}

inline TraceRecord make_trace_record(int iteration, const HdpState& s, const ResponseModel& model,
                                     const Corpus& corpus) {
  double eta2 = 0.0;
  for (double e : model.eta) eta2 += e * e;
  return {iteration, static_cast<int>(s.num_topics()), std::sqrt(eta2),
          residual_l2(s, model, corpus), s.alpha, s.gamma};
}

/// Refreshes eta from its conditional given the allocations. No-op when the
/// corpus has no labelled documents (coefficients stay at their prior draws).
inline void refresh_coefficients(const HdpState& s, ResponseModel& model, const Corpus& corpus,
                                 const SamplerConfig& cfg, Rng& rng) {
  const auto design = build_design(s, corpus);
  if (design.rows() == 0 || design.cols() == 0) return;
  Eigen::VectorXd eta;
  if (model.family == Family::Gaussian) {
    eta = cfg.coeff_update == CoeffUpdate::Sample ? sample_eta_gaussian(design, model.zeta, rng)
                                                  : map_eta_gaussian(design, model.zeta);
  } else {
    const Eigen::VectorXd start = Eigen::Map<const Eigen::VectorXd>(
        model.eta.data(), static_cast<Eigen::Index>(model.eta.size()));
    eta = cfg.coeff_update == CoeffUpdate::Sample
              ? sample_eta_binomial_laplace(design, model.zeta, rng, cfg.optimizer, &start)
              : map_eta_binomial(design, model.zeta, cfg.optimizer, &start);
  }
  model.eta = to_std_vector(eta);
}

/// One full Gibbs sweep:
///   per document: allocations, then its table counts;
///   drop empty topics; alpha and gamma; beta; coefficients.
/// Unsupervised (and Predict) mode ignores responses entirely.
inline void sweep(HdpState& s, ResponseModel& model, const Corpus& corpus,
                  const SamplerConfig& cfg, Rng& rng, ChainTrace* trace = nullptr,
                  int iteration = 0) {
  const bool supervised = cfg.supervised();
  AllocationScratch scratch;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    for (std::size_t j = 0; j < corpus[d].size(); ++j) {
      sample_allocation(s, model, corpus, d, j, rng, supervised, cfg.aux_draws, scratch);
    }
    sample_table_counts_doc(s, d, rng, cfg.table_rule);
  }
  model.apply_mapping(compact_topics(s));
  if (cfg.resample_concentrations) {
    resample_concentrations(s, cfg.prior_alpha, cfg.prior_gamma, rng);
  }
  sample_beta(s, rng);
  if (supervised) refresh_coefficients(s, model, corpus, cfg, rng);
  if (cfg.validate_each_sweep) s.validate(corpus);
  if (trace && cfg.record_trace) trace->records.push_back(make_trace_record(iteration, s, model, corpus));
}

inline void check_responses(const Corpus& corpus, Family family) {
  if (family != Family::Binomial) return;
  for (const auto& d : corpus.documents()) {
    if (d.response) check_binary(*d.response);
  }
}

/// Random initial state: tokens uniform over `initial_topics` topics, table
/// counts from uniform weights, then beta from its Dirichlet conditional and
/// eta from the N(0, zeta) prior.
inline HdpState initial_state(const Corpus& corpus, ResponseModel& model, const SamplerConfig& cfg,
                              Rng& rng) {
  HdpState s(corpus, cfg.alpha_w, cfg.initial_alpha, cfg.initial_gamma);
  const int K0 = cfg.initial_topics;
  const double w0 = 1.0 / (K0 + 1);
  for (int k = 0; k < K0; ++k) s.push_topic(w0);
  s.beta_new = w0;
  std::uniform_int_distribution<int> pick(0, K0 - 1);
  for (auto& doc : s.z) {
    for (auto& k : doc) k = pick(rng);
  }
  s.recount(corpus);
  compact_topics(s);
  sample_table_counts(s, rng, cfg.table_rule);
  sample_beta(s, rng);
  model.eta.assign(s.num_topics(), 0.0);
  for (auto& e : model.eta) e = normal(rng, 0.0, std::sqrt(model.zeta));
  return s;
}

struct ChainResult {
  HdpState state;
  ResponseModel model;
  ChainTrace trace;
};

/// Initialises and runs cfg.train_iters sweeps. `model` supplies the family,
/// delta and zeta; its coefficients are overwritten.
inline ChainResult run_chain(const Corpus& corpus, const SamplerConfig& cfg, ResponseModel model,
                             Rng& rng) {
  cfg.check();
  model.check();
  if (corpus.size() == 0 || corpus.num_tokens() == 0) {
    throw ValidationError("training corpus has no tokens");
  }
  if (cfg.supervised()) check_responses(corpus, model.family);
  ChainResult out;
  out.state = initial_state(corpus, model, cfg, rng);
  for (int it = 1; it <= cfg.train_iters; ++it) {
    sweep(out.state, model, corpus, cfg, rng, &out.trace, it);
  }
  out.model = std::move(model);
  return out;
}

inline ChainResult run_chain(const Corpus& corpus, const SamplerConfig& cfg, ResponseModel model) {
  Rng rng(cfg.seed);
  return run_chain(corpus, cfg, std::move(model), rng);
}

// ---------------------------------------------------------------------------
// Prediction

struct PredictResult {
  std::vector<std::string> doc_ids;
  std::vector<double> responses;          // observed y (NaN when unlabelled)
  std::vector<std::vector<double>> ezbar; // averaged topic distribution over trained topics
  std::vector<double> yhat;
  std::vector<std::string> excluded;      // documents without tokens
};

/// Averaged empirical topic distribution of one test document.
///
/// The document is sampled against a frozen copy of the trained topic-word
/// counts plus its own local counts, so documents are independent of each
/// other. Weights, alpha and gamma stay at their trained values apart from
/// stick-breaking for test-local topics. After burn-in, each iteration's
/// topic proportions restricted to the trained topics are renormalised and
/// averaged; mass on test-local topics is discarded.
inline std::vector<double> predict_topic_distribution(const HdpState& trained,
                                                      const std::vector<TermId>& tokens,
                                                      int iters, int burn_in, Rng& rng) {
  const auto K0 = trained.num_topics();
  if (K0 == 0) throw ValidationError("trained model has no topics");
  const auto N = tokens.size();

  // Doc-local word index.
  std::vector<TermId> uniq;
  std::vector<std::size_t> local(N);
  {
    std::unordered_map<TermId, std::size_t> pos;
    for (std::size_t j = 0; j < N; ++j) {
      auto [it, inserted] = pos.emplace(tokens[j], uniq.size());
      if (inserted) uniq.push_back(tokens[j]);
      local[j] = it->second;
    }
  }
  const auto U = uniq.size();
  const double v_alpha_w = static_cast<double>(trained.vocab_size) * trained.alpha_w;
  const double f_new = new_topic_predictive(trained);
  const double alpha = trained.alpha;

  std::vector<double> beta = trained.beta;
  double beta_new = trained.beta_new;
  std::vector<int> n_k(K0, 0);                           // doc-topic counts
  std::vector<std::vector<int>> lc(K0, std::vector<int>(U, 0));  // local topic-word counts
  std::vector<int> lc_k(K0, 0);
  std::vector<std::size_t> z(N, 0);
  std::vector<double> weights;

  auto sample_token = [&](std::size_t j) {
    const auto u = local[j];
    const TermId w = uniq[u];
    const auto K = n_k.size();
    weights.resize(K + 1);
    for (std::size_t k = 0; k < K; ++k) {
      const double cw = (k < K0 ? trained.c_kw[k][w] : 0) + lc[k][u];
      const double ck = (k < K0 ? trained.c_k[k] : 0) + lc_k[k];
      weights[k] = (n_k[k] + alpha * beta[k]) * (cw + trained.alpha_w) / (ck + v_alpha_w);
    }
    weights[K] = alpha * beta_new * f_new;
    double total = 0.0;
    for (double v : weights) total += v;
    if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("degenerate prediction weights");
    auto k = sample_discrete(rng, weights, total);
    if (k == K) {
      const double b = shdp::beta(rng, 1.0, trained.gamma);
      const double wk = b * beta_new;
      beta_new -= wk;
      beta.push_back(wk);
      n_k.push_back(0);
      lc.emplace_back(U, 0);
      lc_k.push_back(0);
    }
    z[j] = k;
    ++n_k[k];
    ++lc[k][u];
    ++lc_k[k];
  };
  auto remove_token = [&](std::size_t j) {
    const auto k = z[j];
    --n_k[k];
    --lc[k][local[j]];
    --lc_k[k];
  };
  auto compact_local = [&]() {
    std::vector<std::size_t> map(n_k.size());
    std::size_t next = K0;
    for (std::size_t k = 0; k < K0; ++k) map[k] = k;
    for (std::size_t k = K0; k < n_k.size(); ++k) {
      if (n_k[k] > 0) {
        map[k] = next;
        beta[next] = beta[k];
        n_k[next] = n_k[k];
        if (next != k) lc[next] = std::move(lc[k]);
        lc_k[next] = lc_k[k];
        ++next;
      } else {
        beta_new += beta[k];
      }
    }
    beta.resize(next);
    n_k.resize(next);
    lc.resize(next);
    lc_k.resize(next);
    for (auto& k : z) k = map[k];
  };

  // Sequential initialisation from the predictive.
  for (std::size_t j = 0; j < N; ++j) sample_token(j);

  std::vector<double> acc(K0, 0.0);
  int kept = 0;
  for (int it = 0; it < iters; ++it) {
    for (std::size_t j = 0; j < N; ++j) {
      remove_token(j);
      sample_token(j);
    }
    compact_local();
    if (it < burn_in) continue;
    int on_trained = 0;
    for (std::size_t k = 0; k < K0; ++k) on_trained += n_k[k];
    if (on_trained == 0) continue;
    for (std::size_t k = 0; k < K0; ++k) acc[k] += static_cast<double>(n_k[k]) / on_trained;
    ++kept;
  }
  if (kept == 0) {
    // Every retained sweep placed all tokens on test-local topics; fall back
    // to the trained weights.
    double total = 0.0;
    for (std::size_t k = 0; k < K0; ++k) total += trained.beta[k];
    for (std::size_t k = 0; k < K0; ++k) acc[k] = trained.beta[k] / total;
    return acc;
  }
  for (auto& a : acc) a /= kept;
  return acc;
}

/// Predicts responses for `test` (encoded with the training vocabulary).
/// Document i uses the random stream derive_seed(seed, {i}).
inline PredictResult predict(const HdpState& trained, const ResponseModel& model,
                             const Corpus& test, const SamplerConfig& cfg) {
  cfg.check();
  if (test.vocab_size() != trained.vocab_size) {
    throw ValidationError("test corpus vocabulary size differs from the trained model");
  }
  if (model.eta.size() != trained.num_topics()) {
    throw ValidationError("coefficient count differs from the number of trained topics");
  }
  PredictResult out;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& doc = test[i];
    if (doc.tokens.empty()) {
      out.excluded.push_back(doc.id);
      continue;
    }
    Rng rng(derive_seed(cfg.seed, {i}));
    auto ez = predict_topic_distribution(trained, doc.tokens, cfg.predict_iters,
                                         cfg.burn_in_predict, rng);
    out.doc_ids.push_back(doc.id);
    out.responses.push_back(doc.response.value_or(std::nan("")));
    out.yhat.push_back(predict_response(model, ez));
    out.ezbar.push_back(std::move(ez));
  }
  return out;
}

}  // namespace shdp
