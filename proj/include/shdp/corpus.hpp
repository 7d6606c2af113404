#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "random.hpp"

namespace shdp {

using TermId = std::int32_t;

struct RawDocument {
  std::string id;
  std::vector<std::string> tokens;
  std::optional<double> response;
};

/// Bijection between term strings and dense ids in [0, V).
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      if (!index_.emplace(terms_[i], static_cast<TermId>(i)).second) {
        throw ValidationError("duplicate vocabulary term '" + terms_[i] + "'");
      }
    }
  }

  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::string& term(TermId id) const { return terms_.at(static_cast<std::size_t>(id)); }

  std::optional<TermId> find(const std::string& term) const {
    auto it = index_.find(term);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const Vocabulary& other) const { return terms_ == other.terms_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, TermId> index_;
};

struct Document {
  std::string id;
  std::vector<TermId> tokens;
  std::optional<double> response;

  bool labelled() const noexcept { return response.has_value(); }
  std::size_t size() const noexcept { return tokens.size(); }
};

/// Immutable encoded corpus: a vocabulary plus documents of term ids.
class Corpus {
 public:
  Corpus() = default;
  Corpus(Vocabulary vocab, std::vector<Document> docs)
      : vocab_(std::move(vocab)), docs_(std::move(docs)) {
    std::unordered_set<std::string> seen;
    const auto v = static_cast<TermId>(vocab_.size());
    for (const auto& d : docs_) {
      if (!seen.insert(d.id).second) {
        throw ValidationError("duplicate document id '" + d.id + "'");
      }
      for (TermId t : d.tokens) {
        if (t < 0 || t >= v) {
          throw ValidationError("token id out of range in document '" + d.id + "'");
        }
      }
    }
  }

  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  const std::vector<Document>& documents() const noexcept { return docs_; }
  const Document& operator[](std::size_t d) const { return docs_[d]; }
  std::size_t size() const noexcept { return docs_.size(); }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }

  std::size_t num_labelled() const {
    return static_cast<std::size_t>(std::count_if(
        docs_.begin(), docs_.end(), [](const Document& d) { return d.labelled(); }));
  }

  std::size_t num_tokens() const {
    std::size_t n = 0;
    for (const auto& d : docs_) n += d.size();
    return n;
  }

  /// Same documents with responses removed.
  Corpus without_responses() const {
    auto docs = docs_;
    for (auto& d : docs) d.response.reset();
    return Corpus(vocab_, std::move(docs));
  }

  /// Subset by document index, preserving the given order.
  Corpus subset(const std::vector<std::size_t>& indices) const {
    std::vector<Document> docs;
    docs.reserve(indices.size());
    for (auto i : indices) docs.push_back(docs_.at(i));
    return Corpus(vocab_, std::move(docs));
  }

 private:
  Vocabulary vocab_;
  std::vector<Document> docs_;
};

// ---------------------------------------------------------------------------
// JSONL ingestion

inline std::vector<RawDocument> parse_jsonl(std::istream& in) {
  std::vector<RawDocument> docs;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what(), lineno);
    }
    auto fail = [&](const std::string& msg) {
      throw ParseError("line " + std::to_string(lineno) + ": " + msg, lineno);
    };
    if (!j.is_object()) fail("expected a JSON object");
    if (!j.contains("id") || !j["id"].is_string()) fail("missing string field 'id'");
    if (!j.contains("tokens") || !j["tokens"].is_array()) fail("missing array field 'tokens'");

    RawDocument doc;
    doc.id = j["id"].get<std::string>();
    for (const auto& t : j["tokens"]) {
      if (!t.is_string()) fail("non-string token");
      doc.tokens.push_back(t.get<std::string>());
    }
    if (j.contains("response") && !j["response"].is_null()) {
      if (!j["response"].is_number()) fail("'response' must be a number or null");
      doc.response = j["response"].get<double>();
    }
    if (!ids.insert(doc.id).second) {
      throw ValidationError("line " + std::to_string(lineno) + ": duplicate document id '" +
                            doc.id + "'");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

inline std::vector<RawDocument> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file '" + path + "'");
  return parse_jsonl(in);
}

// ---------------------------------------------------------------------------
// TF-IDF vocabulary pruning

struct TfidfScore {
  std::string term;
  double score = 0.0;
};

struct TermStats {
  std::size_t doc_freq = 0;     // n_w
  std::size_t total_count = 0;  // corpus-wide occurrences
  double tfidf = 0.0;           // sum over documents of tf * ln(D / n_w)
};

/// Per-term document frequency, total count and summed TF-IDF (natural log).
inline std::map<std::string, TermStats> term_statistics(const std::vector<RawDocument>& docs) {
  std::map<std::string, TermStats> stats;
  std::vector<std::map<std::string, std::size_t>> tf(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& t : docs[d].tokens) ++tf[d][t];
    for (const auto& [term, count] : tf[d]) {
      auto& s = stats[term];
      ++s.doc_freq;
      s.total_count += count;
    }
  }
  const double num_docs = static_cast<double>(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& [term, count] : tf[d]) {
      auto& s = stats[term];
      s.tfidf += static_cast<double>(count) *
                 std::log(num_docs / static_cast<double>(s.doc_freq));
    }
  }
  return stats;
}

inline std::vector<TfidfScore> tfidf_scores(const std::vector<RawDocument>& docs) {
  std::vector<TfidfScore> out;
  for (const auto& [term, s] : term_statistics(docs)) out.push_back({term, s.tfidf});
  return out;
}

struct PruneResult {
  Vocabulary vocabulary;
  std::vector<std::string> dropped_terms;  // sorted
};

/// Removes terms with doc frequency > max_doc_frac * D or total count <
/// min_count, then keeps the `keep` highest TF-IDF terms (ties: lexicographic).
/// The returned vocabulary is in lexicographic order.
inline PruneResult tfidf_prune_report(const std::vector<RawDocument>& docs, std::size_t keep,
                                      double max_doc_frac, std::size_t min_count) {
  if (keep < 1) throw ValidationError("keep must be at least 1");
  if (docs.empty()) throw ValidationError("cannot prune an empty document list");
  if (!(max_doc_frac > 0.0 && max_doc_frac <= 1.0)) {
    throw ValidationError("max_doc_frac must lie in (0, 1]");
  }
  const auto stats = term_statistics(docs);
  const double cap = max_doc_frac * static_cast<double>(docs.size());

  std::vector<TfidfScore> candidates;
  std::vector<std::string> dropped;
  for (const auto& [term, s] : stats) {
    if (static_cast<double>(s.doc_freq) > cap || s.total_count < min_count) {
      dropped.push_back(term);
    } else {
      candidates.push_back({term, s.tfidf});
    }
  }
  if (candidates.empty()) throw ValidationError("all terms were filtered out; vocabulary is empty");

  std::sort(candidates.begin(), candidates.end(), [](const TfidfScore& a, const TfidfScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.term < b.term;
  });
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    (i < keep ? kept : dropped).push_back(candidates[i].term);
  }
  std::sort(kept.begin(), kept.end());
  std::sort(dropped.begin(), dropped.end());
  return {Vocabulary(std::move(kept)), std::move(dropped)};
}

inline Vocabulary tfidf_prune(const std::vector<RawDocument>& docs, std::size_t keep,
                              double max_doc_frac = 1.0, std::size_t min_count = 0) {
  return tfidf_prune_report(docs, keep, max_doc_frac, min_count).vocabulary;
}

/// Vocabulary of every distinct term, lexicographically ordered.
inline Vocabulary full_vocabulary(const std::vector<RawDocument>& docs) {
  std::set<std::string> terms;
  for (const auto& d : docs) terms.insert(d.tokens.begin(), d.tokens.end());
  return Vocabulary(std::vector<std::string>(terms.begin(), terms.end()));
}

// ---------------------------------------------------------------------------
// Encoding

struct EncodeResult {
  Corpus corpus;
  std::vector<std::string> dropped_docs;
};

/// Maps tokens to ids, dropping out-of-vocabulary tokens and then documents
/// left empty. Token order and responses are preserved.
inline EncodeResult encode(const std::vector<RawDocument>& docs, const Vocabulary& vocab) {
  if (vocab.empty()) throw ValidationError("cannot encode against an empty vocabulary");
  std::vector<Document> out;
  std::vector<std::string> dropped;
  for (const auto& raw : docs) {
    Document doc{raw.id, {}, raw.response};
    for (const auto& t : raw.tokens) {
      if (auto id = vocab.find(t)) doc.tokens.push_back(*id);
    }
    if (doc.tokens.empty()) {
      dropped.push_back(raw.id);
    } else {
      out.push_back(std::move(doc));
    }
  }
  return {Corpus(vocab, std::move(out)), std::move(dropped)};
}

/// Re-encodes a corpus against another vocabulary via term strings.
inline EncodeResult reencode(const Corpus& corpus, const Vocabulary& vocab) {
  std::vector<RawDocument> raw;
  raw.reserve(corpus.size());
  for (const auto& d : corpus.documents()) {
    RawDocument r{d.id, {}, d.response};
    for (TermId t : d.tokens) r.tokens.push_back(corpus.vocabulary().term(t));
    raw.push_back(std::move(r));
  }
  return encode(raw, vocab);
}

inline std::vector<std::string> decode(const Corpus& corpus, std::size_t d) {
  std::vector<std::string> out;
  for (TermId t : corpus[d].tokens) out.push_back(corpus.vocabulary().term(t));
  return out;
}

// ---------------------------------------------------------------------------
// Response transforms and folds

inline Corpus log_transform_responses(const Corpus& corpus, double offset) {
  if (offset < 0.0) throw DomainError("log-transform offset must be nonnegative");
  auto docs = corpus.documents();
  for (auto& d : docs) {
    if (!d.response) continue;
    const double arg = *d.response + offset;
    if (!(arg > 0.0)) {
      throw DomainError("log transform of nonpositive value for document '" + d.id + "'");
    }
    d.response = std::log(arg);
  }
  return Corpus(corpus.vocabulary(), std::move(docs));
}

struct Fold {
  Corpus train;
  Corpus test;
};

/// k-fold partition of the labelled documents after a seeded shuffle.
/// Unlabelled documents are placed in every training corpus.
inline std::vector<Fold> kfold_split(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("number of folds must be at least 2");
  std::vector<std::size_t> labelled;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].labelled()) labelled.push_back(i);
  }
  if (labelled.size() < k) {
    throw ValidationError("need at least " + std::to_string(k) + " labelled documents, have " +
                          std::to_string(labelled.size()));
  }
  Rng rng(seed);
  std::shuffle(labelled.begin(), labelled.end(), rng);

  std::vector<std::size_t> fold_of(corpus.size(), k);  // k == "never tested"
  for (std::size_t pos = 0; pos < labelled.size(); ++pos) fold_of[labelled[pos]] = pos % k;

  std::vector<Fold> folds;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (std::size_t pos = f; pos < labelled.size(); pos += k) test_idx.push_back(labelled[pos]);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (fold_of[i] != f) train_idx.push_back(i);
    }
    folds.push_back({corpus.subset(train_idx), corpus.subset(test_idx)});
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Binary corpus cache
//
// Layout (little-endian): "SHDPCORP", u32 version, u32 V, V x (u32 len, bytes),
// u32 D, D x (u32 len, id bytes, u8 has_response, f64 response, u32 N, N x u32).

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& in, char* buf, std::size_t n) {
  in.read(buf, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw ParseError("truncated corpus file", 0);
  }
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& in) {
  unsigned char b[8];
  read_exact(in, reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

inline std::string get_str(std::istream& in) {
  const auto n = get_u32(in);
  std::string s(n, '\0');
  if (n) read_exact(in, s.data(), n);
  return s;
}

constexpr char kCorpusMagic[8] = {'S', 'H', 'D', 'P', 'C', 'O', 'R', 'P'};
constexpr std::uint32_t kCorpusVersion = 1;

}  // namespace detail

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  out.write(detail::kCorpusMagic, 8);
  detail::put_u32(out, detail::kCorpusVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(corpus.vocab_size()));
  for (const auto& t : corpus.vocabulary().terms()) detail::put_str(out, t);
  detail::put_u32(out, static_cast<std::uint32_t>(corpus.size()));
  for (const auto& d : corpus.documents()) {
    detail::put_str(out, d.id);
    out.put(d.response ? 1 : 0);
    detail::put_f64(out, d.response.value_or(0.0));
    detail::put_u32(out, static_cast<std::uint32_t>(d.tokens.size()));
    for (TermId t : d.tokens) detail::put_u32(out, static_cast<std::uint32_t>(t));
  }
}

inline Corpus read_corpus(std::istream& in) {
  char magic[8];
  detail::read_exact(in, magic, 8);
  if (std::memcmp(magic, detail::kCorpusMagic, 8) != 0) {
    throw ParseError("not a corpus file (bad magic)", 0);
  }
  const auto version = detail::get_u32(in);
  if (version != detail::kCorpusVersion) {
    throw ValidationError("unsupported corpus format version " + std::to_string(version));
  }
  std::vector<std::string> terms(detail::get_u32(in));
  for (auto& t : terms) t = detail::get_str(in);
  std::vector<Document> docs(detail::get_u32(in));
  for (auto& d : docs) {
    d.id = detail::get_str(in);
    char has = 0;
    detail::read_exact(in, &has, 1);
    const double y = detail::get_f64(in);
    if (has) d.response = y;
    d.tokens.resize(detail::get_u32(in));
    for (auto& t : d.tokens) t = static_cast<TermId>(detail::get_u32(in));
  }
  return Corpus(Vocabulary(std::move(terms)), std::move(docs));
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write corpus file '" + path + "'");
  write_corpus(out, corpus);
}

inline Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open corpus file '" + path + "'");
  return read_corpus(in);
}

inline nlohmann::json prune_report_json(const std::vector<std::string>& dropped_terms,
                                        const std::vector<std::string>& dropped_docs) {
  return nlohmann::json{{"dropped_terms", dropped_terms}, {"dropped_docs", dropped_docs}};
}

}  // namespace shdp
