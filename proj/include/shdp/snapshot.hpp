#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "response_glm.hpp"
#include "state.hpp"

namespace shdp {

inline constexpr int kSnapshotVersion = 1;

/// Everything needed to predict on new documents: vocabulary, topic-word
/// counts, global weights, concentrations and the GLM head.
struct ModelSnapshot {
  Vocabulary vocabulary;
  HdpState topics;  // global parts only; no documents
  ResponseModel model;
  std::uint64_t seed = 0;
  int train_iters = 0;

  static ModelSnapshot from_chain(const Vocabulary& vocab, const HdpState& s,
                                  const ResponseModel& model, std::uint64_t seed,
                                  int train_iters) {
    ModelSnapshot snap;
    snap.vocabulary = vocab;
    snap.topics.vocab_size = s.vocab_size;
    snap.topics.alpha_w = s.alpha_w;
    snap.topics.alpha = s.alpha;
    snap.topics.gamma = s.gamma;
    snap.topics.c_kw = s.c_kw;
    snap.topics.c_k = s.c_k;
    snap.topics.m_k.assign(s.num_topics(), 0);
    snap.topics.beta = s.beta;
    snap.topics.beta_new = s.beta_new;
    snap.model = model;
    snap.seed = seed;
    snap.train_iters = train_iters;
    return snap;
  }
};

/// Topic-word counts are stored sparsely as [term id, count] pairs.
inline nlohmann::json to_json(const ModelSnapshot& snap) {
  using nlohmann::json;
  const auto& s = snap.topics;
  json counts = json::array();
  for (const auto& row : s.c_kw) {
    json pairs = json::array();
    for (std::size_t w = 0; w < row.size(); ++w) {
      if (row[w] != 0) pairs.push_back(json::array({w, row[w]}));
    }
    counts.push_back(std::move(pairs));
  }
  return json{
      {"format_version", kSnapshotVersion},
      {"family", to_string(snap.model.family)},
      {"vocabulary", snap.vocabulary.terms()},
      {"K", s.num_topics()},
      {"topic_term_counts", std::move(counts)},
      {"beta", s.beta},
      {"beta_new", s.beta_new},
      {"eta", snap.model.eta},
      {"delta", snap.model.delta},
      {"zeta", snap.model.zeta},
      {"alpha", s.alpha},
      {"gamma", s.gamma},
      {"alpha_w", s.alpha_w},
      {"seed", snap.seed},
      {"train_iters", snap.train_iters},
  };
}

inline ModelSnapshot snapshot_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kSnapshotVersion) {
      throw ValidationError("unsupported model format_version " + std::to_string(version) +
                            " (expected " + std::to_string(kSnapshotVersion) + ")");
    }
    ModelSnapshot snap;
    snap.vocabulary = Vocabulary(j.at("vocabulary").get<std::vector<std::string>>());
    auto& s = snap.topics;
    s.vocab_size = snap.vocabulary.size();
    const auto K = j.at("K").get<std::size_t>();
    const auto& counts = j.at("topic_term_counts");
    if (counts.size() != K) throw ValidationError("topic_term_counts has wrong length");
    s.c_kw.assign(K, std::vector<int>(s.vocab_size, 0));
    s.c_k.assign(K, 0);
    for (std::size_t k = 0; k < K; ++k) {
      for (const auto& pair : counts[k]) {
        const auto w = pair.at(0).get<std::size_t>();
        const auto c = pair.at(1).get<int>();
        if (w >= s.vocab_size || c < 0) throw ValidationError("bad topic_term_counts entry");
        s.c_kw[k][w] = c;
        s.c_k[k] += c;
      }
    }
    s.m_k.assign(K, 0);
    s.beta = j.at("beta").get<std::vector<double>>();
    s.beta_new = j.at("beta_new").get<double>();
    s.alpha = j.at("alpha").get<double>();
    s.gamma = j.at("gamma").get<double>();
    s.alpha_w = j.at("alpha_w").get<double>();
    snap.model.family = parse_family(j.at("family").get<std::string>());
    snap.model.eta = j.at("eta").get<std::vector<double>>();
    snap.model.delta = j.at("delta").get<double>();
    snap.model.zeta = j.at("zeta").get<double>();
    snap.seed = j.at("seed").get<std::uint64_t>();
    snap.train_iters = j.at("train_iters").get<int>();
    if (s.beta.size() != K || snap.model.eta.size() != K) {
      throw ValidationError("beta/eta lengths differ from K");
    }
    return snap;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model snapshot: ") + e.what());
  }
}

inline std::string dump_snapshot(const ModelSnapshot& snap) { return to_json(snap).dump(1) + "\n"; }

inline void save_snapshot(const std::string& path, const ModelSnapshot& snap) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write model file '" + path + "'");
  out << dump_snapshot(snap);
}

inline ModelSnapshot load_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("model file is not valid JSON: ") + e.what());
  }
  return snapshot_from_json(j);
}

}  // namespace shdp
