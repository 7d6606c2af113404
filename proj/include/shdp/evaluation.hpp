#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "random.hpp"
#include "response_glm.hpp"
#include "sampler.hpp"
#include "trace.hpp"

namespace shdp {

/// 1 - sum (yhat - y)^2 / sum (y - ybar)^2.
inline double predictive_r2(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size()) throw ValidationError("y and yhat lengths differ");
  if (y.size() < 2) throw ValidationError("predictive R2 needs at least two responses");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sse += (yhat[i] - y[i]) * (yhat[i] - y[i]);
    sst += (y[i] - mean) * (y[i] - mean);
  }
  if (sst == 0.0) throw DomainError("predictive R2 undefined for constant responses");
  return 1.0 - sse / sst;
}

/// Fraction of documents whose thresholded probability (p >= threshold -> 1)
/// equals the binary label.
inline double accuracy(const std::vector<double>& y, const std::vector<double>& p,
                       double threshold = 0.5) {
  if (y.size() != p.size()) throw ValidationError("y and p lengths differ");
  if (y.empty()) throw ValidationError("accuracy of an empty prediction set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    check_binary(y[i]);
    hits += ((p[i] >= threshold ? 1.0 : 0.0) == y[i]) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

inline double score(Family family, const std::vector<double>& y, const std::vector<double>& yhat) {
  return family == Family::Gaussian ? predictive_r2(y, yhat) : accuracy(y, yhat);
}

inline std::string metric_name(Family family) {
  return family == Family::Gaussian ? "predictive_r2" : "accuracy";
}

enum class Method { ShdpSampled, ShdpMap, TwoStep };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::ShdpSampled: return "shdp-sampled";
    case Method::ShdpMap: return "shdp-map";
    case Method::TwoStep: return "two-step";
  }
  return "";
}

inline Method parse_method(const std::string& s) {
  if (s == "shdp-sampled") return Method::ShdpSampled;
  if (s == "shdp-map") return Method::ShdpMap;
  if (s == "two-step") return Method::TwoStep;
  throw ValidationError("unknown method '" + s + "'");
}

struct EvalConfig {
  SamplerConfig sampler{};
  Family family = Family::Gaussian;
  double delta = 0.5;
  std::vector<double> zeta_grid{1.0, 25.0, 100.0};
  std::size_t folds = 5;
  double validation_fraction = 0.2;
  int search_divisor = 4;  // zeta search runs train/predict iterations / divisor
  bool record_runtime = false;
};

/// Unsupervised topics on `train` (responses ignored), then a GLM fitted to
/// the final allocations (posterior mean / MAP), then the usual prediction
/// path on `test`.
inline PredictResult two_step_baseline(const Corpus& train, const Corpus& test,
                                       const SamplerConfig& cfg, const ResponseModel& head,
                                       Rng& rng) {
  SamplerConfig unsup = cfg;
  unsup.mode = Mode::Unsupervised;
  auto chain = run_chain(train, unsup, head, rng);
  check_responses(train, head.family);
  const auto design = build_design(chain.state, train);
  if (design.rows() == 0) throw ValidationError("two-step baseline needs labelled training documents");
  chain.model.eta = to_std_vector(head.family == Family::Gaussian
                                      ? map_eta_gaussian(design, head.zeta)
                                      : map_eta_binomial(design, head.zeta, cfg.optimizer));
  return predict(chain.state, chain.model, test, cfg);
}

/// Trains `method` on `train` and predicts `test`. Training uses `seed`;
/// prediction uses the same seed for its per-document streams.
inline PredictResult train_and_predict(Method method, const Corpus& train, const Corpus& test,
                                       double zeta, const EvalConfig& cfg, std::uint64_t seed) {
  SamplerConfig sc = cfg.sampler;
  sc.seed = seed;
  sc.mode = Mode::Supervised;
  ResponseModel head;
  head.family = cfg.family;
  head.delta = cfg.delta;
  head.zeta = zeta;
  Rng rng(seed);
  if (method == Method::TwoStep) return two_step_baseline(train, test, sc, head, rng);
  sc.coeff_update = method == Method::ShdpSampled ? CoeffUpdate::Sample : CoeffUpdate::Map;
  auto chain = run_chain(train, sc, head, rng);
  return predict(chain.state, chain.model, test, sc);
}

/// Chooses zeta from `grid` on a seeded 80/20 split of the labelled documents
/// in `train`, using shortened runs. Every grid value trains with the same
/// seed. Ties go to the smallest value.
inline double select_zeta(Method method, const Corpus& train, std::vector<double> grid,
                          const EvalConfig& cfg, std::uint64_t seed) {
  if (grid.empty()) throw ValidationError("zeta grid is empty");
  std::sort(grid.begin(), grid.end());
  if (grid.size() == 1) return grid.front();

  std::vector<std::size_t> labelled;
  std::vector<std::size_t> fit_idx;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (train[i].labelled() ? labelled : fit_idx).push_back(i);
  }
  Rng split_rng(derive_seed(seed, {0}));
  std::shuffle(labelled.begin(), labelled.end(), split_rng);
  const auto n_val = static_cast<std::size_t>(
      std::floor(cfg.validation_fraction * static_cast<double>(labelled.size())));
  if (n_val == 0 || n_val >= labelled.size()) {
    throw ValidationError("validation split is empty; need more labelled training documents");
  }
  std::vector<std::size_t> val_idx(labelled.begin(), labelled.begin() + n_val);
  fit_idx.insert(fit_idx.end(), labelled.begin() + n_val, labelled.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(fit_idx.begin(), fit_idx.end());
  const auto fit = train.subset(fit_idx);
  const auto val = train.subset(val_idx);

  EvalConfig short_cfg = cfg;
  const int div = std::max(1, cfg.search_divisor);
  short_cfg.sampler.train_iters = std::max(1, cfg.sampler.train_iters / div);
  short_cfg.sampler.burn_in_predict = cfg.sampler.burn_in_predict / div;
  short_cfg.sampler.predict_iters =
      std::max(short_cfg.sampler.burn_in_predict + 1, cfg.sampler.predict_iters / div);

  double best = -std::numeric_limits<double>::infinity();
  double chosen = grid.front();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto pred = train_and_predict(method, fit, val, grid[g], short_cfg, derive_seed(seed, {1}));
    const double m = score(cfg.family, pred.responses, pred.yhat);
    if (m > best) {
      best = m;
      chosen = grid[g];
    }
  }
  return chosen;
}

struct FoldResult {
  std::size_t fold = 0;
  double metric = 0.0;
  double zeta = 0.0;
  std::size_t n_test = 0;
  double runtime_seconds = 0.0;
};

struct PredictionRow {
  std::size_t fold;
  std::string doc_id;
  double y;
  double yhat;
};

struct MethodReport {
  Method method = Method::ShdpSampled;
  std::vector<FoldResult> folds;
  std::vector<PredictionRow> predictions;
  double pooled = 0.0;
  double min_fold_diff = 0.0;  // vs the reference method, paired by fold index
  double max_fold_diff = 0.0;
};

struct EvalReport {
  Family family = Family::Gaussian;
  Method reference = Method::ShdpSampled;
  std::vector<MethodReport> methods;
};

/// k-fold cross-validation. Folds are split with `seed`; each fold's zeta
/// search and final training run on seeds derived from (seed, fold), so
/// methods are paired fold by fold. The pooled metric is computed on the concatenated
/// fold predictions. Fold differences are relative to shdp-sampled when it is
/// among `methods`, otherwise to the first method.
inline EvalReport cross_validate(const Corpus& corpus, const std::vector<Method>& methods,
                                 const EvalConfig& cfg, std::uint64_t seed) {
  if (methods.empty()) throw ValidationError("no evaluation methods given");
  cfg.sampler.check();
  check_responses(corpus, cfg.family);
  const auto folds = kfold_split(corpus, cfg.folds, seed);

  EvalReport report;
  report.family = cfg.family;
  report.reference = std::find(methods.begin(), methods.end(), Method::ShdpSampled) != methods.end()
                         ? Method::ShdpSampled
                         : methods.front();

  for (Method method : methods) {
    MethodReport mr;
    mr.method = method;
    std::vector<double> all_y;
    std::vector<double> all_yhat;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto t0 = std::chrono::steady_clock::now();
      const double zeta = select_zeta(method, folds[f].train, cfg.zeta_grid, cfg,
                                      derive_seed(seed, {f, 1000}));
      auto pred = train_and_predict(method, folds[f].train, folds[f].test, zeta, cfg,
                                    derive_seed(seed, {f}));
      const auto t1 = std::chrono::steady_clock::now();
      FoldResult fr;
      fr.fold = f;
      fr.zeta = zeta;
      fr.n_test = pred.yhat.size();
      fr.metric = score(cfg.family, pred.responses, pred.yhat);
      fr.runtime_seconds = std::chrono::duration<double>(t1 - t0).count();
      mr.folds.push_back(fr);
      for (std::size_t i = 0; i < pred.yhat.size(); ++i) {
        mr.predictions.push_back({f, pred.doc_ids[i], pred.responses[i], pred.yhat[i]});
        all_y.push_back(pred.responses[i]);
        all_yhat.push_back(pred.yhat[i]);
      }
    }
    mr.pooled = score(cfg.family, all_y, all_yhat);
    report.methods.push_back(std::move(mr));
  }

  const auto ref = std::find_if(report.methods.begin(), report.methods.end(),
                                [&](const MethodReport& m) { return m.method == report.reference; });
  for (auto& mr : report.methods) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < mr.folds.size(); ++f) {
      const double diff = mr.folds[f].metric - ref->folds[f].metric;
      lo = std::min(lo, diff);
      hi = std::max(hi, diff);
    }
    mr.min_fold_diff = lo;
    mr.max_fold_diff = hi;
  }
  return report;
}

inline nlohmann::json to_json(const EvalReport& report, bool include_runtime) {
  using nlohmann::json;
  json methods = json::array();
  for (const auto& mr : report.methods) {
    json folds = json::array();
    for (const auto& f : mr.folds) {
      json jf{{"fold", f.fold}, {"metric", f.metric}, {"zeta", f.zeta}, {"n_test", f.n_test}};
      if (include_runtime) jf["runtime_seconds"] = f.runtime_seconds;
      folds.push_back(std::move(jf));
    }
    methods.push_back(json{{"method", to_string(mr.method)},
                           {"folds", std::move(folds)},
                           {"pooled", mr.pooled},
                           {"min_fold_diff", mr.min_fold_diff},
                           {"max_fold_diff", mr.max_fold_diff}});
  }
  return json{{"family", to_string(report.family)},
              {"metric", metric_name(report.family)},
              {"reference", to_string(report.reference)},
              {"methods", std::move(methods)}};
}

inline void write_predictions_csv(std::ostream& out, const std::vector<PredictionRow>& rows) {
  out << "doc_id,y,yhat\n";
  for (const auto& r : rows) {
    out << r.doc_id << ',' << format_double(r.y) << ',' << format_double(r.yhat) << '\n';
  }
}

}  // namespace shdp
