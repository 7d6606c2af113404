// Command-line front end: preprocess, train, predict, eval, diag, topics.
//
// Exit codes: 0 success, 2 configuration or validation error, 3 numerical
// failure.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI/CLI11.hpp>
#include <nlohmann/json.hpp>

#include "shdp/shdp.hpp"

namespace {

using namespace shdp;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  return out;
}

bool has_corpus_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  char magic[8] = {};
  in.read(magic, 8);
  return in.gcount() == 8 && std::memcmp(magic, "SHDPCORP", 8) == 0;
}

/// Test documents as a corpus encoded with `vocab`: either a binary corpus
/// (re-encoded via term strings) or raw JSONL.
EncodeResult load_test_corpus(const std::string& path, const Vocabulary& vocab) {
  if (has_corpus_magic(path)) return reencode(load_corpus(path), vocab);
  const auto raw = load_jsonl(path);
  std::vector<Document> docs;
  std::vector<std::string> dropped;
  for (const auto& r : raw) {
    Document d{r.id, {}, r.response};
    for (const auto& t : r.tokens) {
      if (auto id = vocab.find(t)) d.tokens.push_back(*id);
    }
    if (d.tokens.empty()) {
      dropped.push_back(r.id);
    } else {
      docs.push_back(std::move(d));
    }
  }
  return {Corpus(vocab, std::move(docs)), std::move(dropped)};
}

double zeta_from_flag(double value, bool is_variance) {
  if (!(value > 0.0)) throw ValidationError("zeta must be positive");
  return is_variance ? value : value * value;
}

struct SamplerFlags {
  int iters = 2000;
  int predict_iters = 500;
  int burn_in = 100;
  std::uint64_t seed = 1;
  double alpha_w = 0.01;
  int initial_topics = 1;
  int aux_draws = 1;
  bool printed_table_rule = false;

  void add(CLI::App* app, bool training) {
    if (training) {
      app->add_option("--iters", iters, "Training sweeps")->capture_default_str();
      app->add_option("--alpha-w", alpha_w, "Symmetric Dirichlet parameter of topics")
          ->capture_default_str();
      app->add_option("--initial-topics", initial_topics, "Topics at initialisation")
          ->capture_default_str();
      app->add_option("--aux-draws", aux_draws, "Auxiliary coefficient draws per new-topic candidate")
          ->capture_default_str();
      app->add_flag("--printed-table-rule", printed_table_rule,
                    "Use the alternative (comparison-only) table-count rule");
    }
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
  }

  SamplerConfig config() const {
    SamplerConfig cfg;
    cfg.train_iters = iters;
    cfg.predict_iters = predict_iters;
    cfg.burn_in_predict = burn_in;
    cfg.seed = seed;
    cfg.alpha_w = alpha_w;
    cfg.initial_topics = initial_topics;
    cfg.aux_draws = aux_draws;
    cfg.table_rule = printed_table_rule ? TableRule::Printed : TableRule::Antoniak;
    return cfg;
  }
};

// --------------------------------------------------------------------------
// preprocess

struct PreprocessArgs {
  std::string input;
  std::string out = "corpus.bin";
  std::string report = "report.json";
  std::size_t keep = std::numeric_limits<std::uint32_t>::max();
  double max_doc_frac = 0.25;
  std::size_t min_count = 5;
  bool log_response = false;
  double offset = 1.0;
};

int run_preprocess(const PreprocessArgs& a) {
  const auto raw = load_jsonl(a.input);
  const auto pruned = tfidf_prune_report(raw, a.keep, a.max_doc_frac, a.min_count);
  auto encoded = encode(raw, pruned.vocabulary);
  Corpus corpus = std::move(encoded.corpus);
  if (a.log_response) corpus = log_transform_responses(corpus, a.offset);
  save_corpus(a.out, corpus);
  auto out = open_output(a.report);
  out << prune_report_json(pruned.dropped_terms, encoded.dropped_docs).dump(1) << '\n';
  std::cerr << "preprocess: " << corpus.size() << " documents, V = " << corpus.vocab_size()
            << ", dropped " << encoded.dropped_docs.size() << " documents\n";
  return 0;
}

// --------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string corpus;
  std::string out = "model.json";
  std::string trace;
  std::string family = "gaussian";
  std::string coeff = "sample";
  double zeta = 1.0;
  bool zeta_is_variance = false;
  double delta = 0.5;
  SamplerFlags sampler;
};

int run_train(const TrainArgs& a) {
  const auto corpus = load_corpus(a.corpus);
  auto cfg = a.sampler.config();
  cfg.mode = Mode::Supervised;
  if (a.coeff != "sample" && a.coeff != "map") throw ValidationError("--coeff must be sample or map");
  cfg.coeff_update = a.coeff == "sample" ? CoeffUpdate::Sample : CoeffUpdate::Map;
  ResponseModel head;
  head.family = parse_family(a.family);
  head.zeta = zeta_from_flag(a.zeta, a.zeta_is_variance);
  head.delta = a.delta;

  const auto chain = run_chain(corpus, cfg, head);
  save_snapshot(a.out, ModelSnapshot::from_chain(corpus.vocabulary(), chain.state, chain.model,
                                                 cfg.seed, cfg.train_iters));
  if (!a.trace.empty()) {
    auto out = open_output(a.trace);
    write_trace_csv(out, chain.trace);
  }
  std::cerr << "train: K = " << chain.state.num_topics() << " after " << cfg.train_iters
            << " sweeps\n";
  return 0;
}

// --------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model;
  std::string test;
  std::string out = "predictions.csv";
  SamplerFlags sampler;
};

void write_prediction_csv(std::ostream& out, const PredictResult& r) {
  out << "doc_id,ezbar,yhat\n";
  for (std::size_t i = 0; i < r.doc_ids.size(); ++i) {
    std::string ez = "[";
    for (std::size_t k = 0; k < r.ezbar[i].size(); ++k) {
      if (k) ez += ',';
      ez += format_double(r.ezbar[i][k]);
    }
    ez += ']';
    out << r.doc_ids[i] << ",\"" << ez << "\"," << format_double(r.yhat[i]) << '\n';
  }
}

int run_predict(const PredictArgs& a) {
  const auto snap = load_snapshot(a.model);
  auto test = load_test_corpus(a.test, snap.vocabulary);
  auto cfg = a.sampler.config();
  cfg.mode = Mode::Predict;
  auto result = predict(snap.topics, snap.model, test.corpus, cfg);
  for (const auto& id : test.dropped_docs) {
    std::cerr << "predict: excluded document '" << id << "' (no in-vocabulary tokens)\n";
  }
  auto out = open_output(a.out);
  write_prediction_csv(out, result);
  return 0;
}

// --------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string corpus;
  std::string out = "report.json";
  std::string predictions_dir;
  std::string family = "gaussian";
  std::vector<std::string> methods{"shdp-sampled"};
  std::vector<double> zeta_grid{1.0, 5.0, 10.0};
  bool zeta_is_variance = false;
  std::size_t folds = 5;
  double delta = 0.5;
  int search_divisor = 4;
  bool record_runtime = false;
  SamplerFlags sampler;
};

int run_eval(const EvalArgs& a) {
  if (a.folds < 2) throw ValidationError("--folds must be at least 2");
  const auto corpus = load_corpus(a.corpus);
  EvalConfig cfg;
  cfg.sampler = a.sampler.config();
  cfg.family = parse_family(a.family);
  cfg.delta = a.delta;
  cfg.folds = a.folds;
  cfg.search_divisor = a.search_divisor;
  cfg.record_runtime = a.record_runtime;
  cfg.zeta_grid.clear();
  for (double z : a.zeta_grid) cfg.zeta_grid.push_back(zeta_from_flag(z, a.zeta_is_variance));
  std::vector<Method> methods;
  for (const auto& m : a.methods) methods.push_back(parse_method(m));

  const auto report = cross_validate(corpus, methods, cfg, a.sampler.seed);
  {
    auto out = open_output(a.out);
    out << to_json(report, a.record_runtime).dump(1) << '\n';
  }
  if (!a.predictions_dir.empty()) {
    std::filesystem::create_directories(a.predictions_dir);
    for (const auto& mr : report.methods) {
      auto out = open_output(
          (std::filesystem::path(a.predictions_dir) / (to_string(mr.method) + ".csv")).string());
      write_predictions_csv(out, mr.predictions);
    }
  }
  for (const auto& mr : report.methods) {
    std::cerr << "eval: " << to_string(mr.method) << " pooled " << metric_name(cfg.family) << " = "
              << mr.pooled << '\n';
  }
  return 0;
}

// --------------------------------------------------------------------------
// diag

struct DiagArgs {
  std::vector<std::string> traces;
  std::string statistic = "residual_l2";
  std::size_t step = 50;
  std::string out = "shrink.csv";
};

int run_diag(const DiagArgs& a) {
  if (a.traces.size() < 2) throw ValidationError("diag needs at least two trace files");
  if (a.statistic != "eta_l2" && a.statistic != "residual_l2") {
    throw ValidationError("--statistic must be eta_l2 or residual_l2");
  }
  std::vector<ChainTrace> traces;
  for (const auto& p : a.traces) traces.push_back(load_trace_csv(p));
  const auto shortest = std::min_element(traces.begin(), traces.end(), [](auto& x, auto& y) {
                          return x.size() < y.size();
                        })->size();
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].size() != shortest) {
      std::cerr << "diag: warning: truncating " << a.traces[i] << " from " << traces[i].size()
                << " to " << shortest << " iterations\n";
      traces[i].records.resize(shortest);
    }
  }
  const auto series = rolling_shrink(traces, a.statistic, a.step);
  auto out = open_output(a.out);
  write_shrink_csv(out, series);
  return 0;
}

// --------------------------------------------------------------------------
// topics

struct TopicsArgs {
  std::string model;
  std::string corpus;
  std::size_t top = 10;
  std::string out = "topics.txt";
};

int run_topics(const TopicsArgs& a) {
  const auto snap = load_snapshot(a.model);
  if (!a.corpus.empty()) {
    const auto corpus = load_corpus(a.corpus);
    if (!(corpus.vocabulary() == snap.vocabulary)) {
      std::cerr << "topics: warning: corpus vocabulary differs from the model's\n";
    }
  }
  const auto& s = snap.topics;
  const auto& eta = snap.model.eta;
  std::vector<std::size_t> order(s.num_topics());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return eta[x] > eta[y]; });

  auto out = open_output(a.out);
  for (std::size_t k : order) {
    std::vector<std::size_t> terms(s.vocab_size);
    std::iota(terms.begin(), terms.end(), 0);
    std::stable_sort(terms.begin(), terms.end(),
                     [&](std::size_t x, std::size_t y) { return s.c_kw[k][x] > s.c_kw[k][y]; });
    const auto n = std::min(a.top, terms.size());
    char head[64];
    std::snprintf(head, sizeof head, "topic %zu eta=%+.4f n=%d:", k, eta[k], s.c_k[k]);
    out << head;
    for (std::size_t i = 0; i < n; ++i) {
      out << ' ' << snap.vocabulary.term(static_cast<TermId>(terms[i])) << '('
          << s.c_kw[k][terms[i]] << ')';
    }
    out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supervised hierarchical Dirichlet process topic regression"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML/INI file")->check(CLI::ExistingFile);
  app.allow_config_extras(false);

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Prune vocabulary and encode a JSONL corpus");
  c_pre->add_option("input", pre.input, "Input JSONL")->required();
  c_pre->add_option("--out", pre.out, "Binary corpus output")->capture_default_str();
  c_pre->add_option("--report", pre.report, "Pruning report (JSON)")->capture_default_str();
  c_pre->add_option("--keep", pre.keep, "Terms kept by total TF-IDF");
  c_pre->add_option("--max-doc-frac", pre.max_doc_frac, "Drop terms in more than this fraction of documents")
      ->capture_default_str();
  c_pre->add_option("--min-count", pre.min_count, "Drop terms with fewer occurrences")
      ->capture_default_str();
  c_pre->add_flag("--log-response", pre.log_response, "Replace responses y by ln(y + offset)");
  c_pre->add_option("--offset", pre.offset, "Offset for --log-response")->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Run the supervised sampler and write a model");
  c_train->add_option("corpus", tr.corpus, "Binary corpus")->required();
  c_train->add_option("--out", tr.out, "Model snapshot (JSON)")->capture_default_str();
  c_train->add_option("--trace", tr.trace, "Per-sweep trace CSV");
  c_train->add_option("--family", tr.family, "gaussian or binomial")->capture_default_str();
  c_train->add_option("--coeff", tr.coeff, "sample or map")->capture_default_str();
  c_train->add_option("--zeta", tr.zeta, "Coefficient prior scale (standard deviation)")
      ->capture_default_str();
  c_train->add_flag("--zeta-is-variance", tr.zeta_is_variance, "Use --zeta as given, without squaring");
  c_train->add_option("--delta", tr.delta, "Gaussian dispersion")->capture_default_str();
  tr.sampler.add(c_train, true);

  PredictArgs pr;
  auto* c_pred = app.add_subcommand("predict", "Predict responses for test documents");
  c_pred->add_option("model", pr.model, "Model snapshot")->required();
  c_pred->add_option("test", pr.test, "Test corpus (binary corpus or JSONL)")->required();
  c_pred->add_option("--out", pr.out, "Predictions CSV")->capture_default_str();
  c_pred->add_option("--iters", pr.sampler.predict_iters, "Prediction sweeps")->capture_default_str();
  c_pred->add_option("--burn-in", pr.sampler.burn_in, "Sweeps discarded before averaging")
      ->capture_default_str();
  pr.sampler.add(c_pred, false);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "k-fold cross-validation");
  c_eval->add_option("corpus", ev.corpus, "Binary corpus")->required();
  c_eval->add_option("--out", ev.out, "Report (JSON)")->capture_default_str();
  c_eval->add_option("--predictions-dir", ev.predictions_dir, "Write <method>.csv predictions here");
  c_eval->add_option("--family", ev.family, "gaussian or binomial")->capture_default_str();
  c_eval->add_option("--method", ev.methods, "shdp-sampled, shdp-map or two-step (repeatable)")
      ->delimiter(',')
      ->capture_default_str();
  c_eval->add_option("--zeta-grid", ev.zeta_grid, "Prior standard deviations to search")
      ->delimiter(',')
      ->capture_default_str();
  c_eval->add_flag("--zeta-is-variance", ev.zeta_is_variance, "Use grid values without squaring");
  c_eval->add_option("--folds", ev.folds, "Number of folds")->capture_default_str();
  c_eval->add_option("--delta", ev.delta, "Gaussian dispersion")->capture_default_str();
  c_eval->add_option("--predict-iters", ev.sampler.predict_iters, "Prediction sweeps")
      ->capture_default_str();
  c_eval->add_option("--burn-in", ev.sampler.burn_in, "Prediction burn-in")->capture_default_str();
  c_eval->add_option("--search-divisor", ev.search_divisor,
                     "Iteration divisor for the zeta search runs")
      ->capture_default_str();
  c_eval->add_flag("--record-runtime", ev.record_runtime, "Include wall-clock times in the report");
  ev.sampler.add(c_eval, true);

  DiagArgs dg;
  auto* c_diag = app.add_subcommand("diag", "Rolling Gelman-Rubin shrink factor over chain traces");
  c_diag->add_option("traces", dg.traces, "Trace CSV files (>= 2)")->required();
  c_diag->add_option("--statistic", dg.statistic, "eta_l2 or residual_l2")->capture_default_str();
  c_diag->add_option("--step", dg.step, "Prefix step")->capture_default_str();
  c_diag->add_option("--out", dg.out, "Output CSV")->capture_default_str();

  TopicsArgs tp;
  auto* c_topics = app.add_subcommand("topics", "List topics by coefficient with their top terms");
  c_topics->add_option("model", tp.model, "Model snapshot")->required();
  c_topics->add_option("corpus", tp.corpus, "Corpus to check the vocabulary against");
  c_topics->add_option("--top", tp.top, "Terms per topic")->capture_default_str();
  c_topics->add_option("--out", tp.out, "Output text file")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*c_pre) return run_preprocess(pre);
    if (*c_train) return run_train(tr);
    if (*c_pred) return run_predict(pr);
    if (*c_eval) return run_eval(ev);
    if (*c_diag) return run_diag(dg);
    if (*c_topics) return run_topics(tp);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const shdp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const StateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitValidation;
}
