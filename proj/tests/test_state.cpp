#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "shdp/sampler.hpp"
#include "shdp/state.hpp"

using namespace shdp;

namespace {

Corpus make_corpus(std::size_t vocab, std::vector<std::vector<TermId>> docs) {
  std::vector<std::string> terms;
  for (std::size_t w = 0; w < vocab; ++w) terms.push_back("t" + std::to_string(w));
  std::vector<Document> out;
  for (std::size_t d = 0; d < docs.size(); ++d) out.push_back({"d" + std::to_string(d), docs[d], {}});
  return Corpus(Vocabulary(std::move(terms)), std::move(out));
}

/// Three topics over a small corpus, with z given explicitly.
HdpState three_topic_state(const Corpus& c, const std::vector<std::vector<TopicId>>& z) {
  HdpState s(c, 0.01, 1.0, 1.0);
  s.beta_new = 0.4;
  s.push_topic(0.3);
  s.push_topic(0.2);
  s.push_topic(0.1);
  s.z = z;
  s.recount(c);
  return s;
}

}  // namespace

TEST(WordPredictive, EmptyTopicIsUniform) {
  const auto c = make_corpus(10, {{0}});
  HdpState s(c, 0.01, 1.0, 1.0);
  s.push_topic(0.5);
  s.beta_new = 0.5;
  for (TermId w = 0; w < 10; ++w) EXPECT_NEAR(word_predictive(s, 0, w), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(word_predictive(s, 0, 3), new_topic_predictive(s, 3));
}

TEST(WordPredictive, FormulaValue) {
  const auto c = make_corpus(10, {{0}});
  HdpState s(c, 0.01, 1.0, 1.0);
  s.push_topic(1.0);
  s.beta_new = 0.0;
  s.c_kw[0][2] = 3;
  s.c_kw[0][5] = 4;
  s.c_k[0] = 7;
  EXPECT_NEAR(word_predictive(s, 0, 2), 3.01 / 7.1, 1e-15);
  EXPECT_NEAR(word_predictive(s, 0, 2), 0.42394, 1e-5);
}

TEST(WordPredictive, SumsToOne) {
  const auto c = make_corpus(17, {{0}});
  HdpState s(c, 0.03, 1.0, 1.0);
  s.push_topic(1.0);
  s.beta_new = 0.0;
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    s.c_k[0] = 0;
    for (auto& v : s.c_kw[0]) {
      v = static_cast<int>(rng() % 9);
      s.c_k[0] += v;
    }
    double total = 0.0;
    for (TermId w = 0; w < 17; ++w) total += word_predictive(s, 0, w);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(WordPredictive, MatchesIntegralOverTopicDistribution) {
  const auto c = make_corpus(3, {{0}});
  for (int a : {1, 2}) {
    HdpState s(c, a, 1.0, 1.0);
    s.push_topic(1.0);
    s.beta_new = 0.0;
    for (int c0 = 0; c0 <= 5; ++c0) {
      for (int c1 = 0; c1 <= 5; ++c1) {
        for (int c2 = 0; c2 <= 5; ++c2) {
          s.c_kw[0] = {c0, c1, c2};
          s.c_k[0] = c0 + c1 + c2;
          for (int w = 0; w < 3; ++w) {
            EXPECT_NEAR(word_predictive(s, 0, w),
                        oracle::dm_predictive_by_quadrature({c0, c1, c2}, a, w), 1e-12);
          }
        }
      }
    }
  }
}

TEST(WordPredictive, UnknownTopicIsStateError) {
  const auto c = make_corpus(3, {{0}});
  HdpState s(c, 0.01, 1.0, 1.0);
  EXPECT_THROW(word_predictive(s, 0, 0), StateError);
  EXPECT_THROW(word_predictive(s, -1, 0), StateError);
}

TEST(NewTopicPredictive, OneOverV) {
  EXPECT_EQ(new_topic_predictive(HdpState(make_corpus(10, {{0}}), 0.01, 1, 1)), 0.1);
  EXPECT_EQ(new_topic_predictive(HdpState(make_corpus(1, {{0}}), 0.01, 1, 1)), 1.0);
}

TEST(Instantiate, StickBreakArithmetic) {
  const auto c = make_corpus(3, {{0}});
  HdpState s(c, 0.01, 1.0, 1.0);
  s.push_topic(0.6);
  s.beta_new = 0.4;
  const auto k = split_new_topic(s, 0.5);
  EXPECT_EQ(k, 1);
  EXPECT_NEAR(s.beta[1], 0.2, 1e-16);
  EXPECT_NEAR(s.beta_new, 0.2, 1e-16);
  EXPECT_EQ(s.beta[0] + s.beta[1] + s.beta_new, 1.0);
  EXPECT_EQ(s.c_k[1], 0);
  EXPECT_EQ(s.n_dk[0].size(), 2u);

  split_new_topic(s, 1.0);
  EXPECT_EQ(s.beta_new, 0.0);
  EXPECT_NEAR(s.beta[2], 0.2, 1e-16);
}

TEST(Instantiate, PreservesMassForRandomDraws) {
  const auto c = make_corpus(3, {{0}});
  HdpState s(c, 0.01, 1.0, 1.0);
  Rng rng(9);
  for (int i = 0; i < 30; ++i) {
    instantiate_topic(s, rng, 0.7);
    const double total = std::accumulate(s.beta.begin(), s.beta.end(), s.beta_new);
    EXPECT_NEAR(total, 1.0, 1e-15);
    for (double b : s.beta) EXPECT_GE(b, 0.0);
  }
}

TEST(Instantiate, NoStickMassIsStateError) {
  const auto c = make_corpus(3, {{0}});
  HdpState s(c, 0.01, 1.0, 1.0);
  s.push_topic(1.0);
  s.beta_new = 0.0;
  Rng rng(1);
  EXPECT_THROW(instantiate_topic(s, rng), StateError);
}

TEST(Compact, RemovesEmptyTopicAndReturnsMass) {
  const auto c = make_corpus(4, {{0, 1, 2}, {3, 3}});
  auto s = three_topic_state(c, {{0, 0, 2}, {2, 0}});
  const double before = s.beta_new;
  const auto mapping = compact_topics(s);
  EXPECT_EQ(mapping, (std::vector<TopicId>{0, -1, 1}));
  EXPECT_EQ(s.num_topics(), 2u);
  EXPECT_NEAR(s.beta_new, before + 0.2, 1e-16);
  EXPECT_EQ(s.z, (std::vector<std::vector<TopicId>>{{0, 0, 1}, {1, 0}}));
  EXPECT_EQ(s.c_k, (std::vector<int>{3, 2}));
  EXPECT_EQ(s.n_dk[1], (std::vector<int>{1, 1}));
}

TEST(Compact, IdentityWithoutEmptyTopics) {
  const auto c = make_corpus(4, {{0, 1, 2}, {3, 3}});
  auto s = three_topic_state(c, {{0, 1, 2}, {2, 0}});
  const auto copy = s;
  EXPECT_EQ(compact_topics(s), (std::vector<TopicId>{0, 1, 2}));
  EXPECT_EQ(s.beta, copy.beta);
  EXPECT_EQ(s.beta_new, copy.beta_new);
  EXPECT_EQ(s.z, copy.z);
}

TEST(Compact, AllEmptyLeavesUnitRemainder) {
  const auto c = make_corpus(2, {});
  HdpState s(c, 0.01, 1.0, 1.0);
  s.push_topic(0.7);
  s.beta_new = 0.3;
  compact_topics(s);
  EXPECT_EQ(s.num_topics(), 0u);
  EXPECT_EQ(s.beta_new, 1.0);
}

TEST(Compact, InstantiateThenCompactRestoresRemainder) {
  const auto c = make_corpus(4, {{0, 1, 2}, {3, 3}});
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = three_topic_state(c, {{0, 1, 2}, {2, 0}});
    const double before = s.beta_new;
    instantiate_topic(s, rng, 0.5 + trial * 0.05);
    compact_topics(s);
    EXPECT_NEAR(s.beta_new, before, 1e-15);
  }
}

TEST(Tokens, RemoveThenAddIsIdentity) {
  const auto c = make_corpus(4, {{0, 1, 2}, {3, 3}});
  auto s = three_topic_state(c, {{0, 1, 2}, {2, 0}});
  const auto copy = s;
  for (std::size_t d = 0; d < c.size(); ++d) {
    for (std::size_t j = 0; j < c[d].size(); ++j) {
      const auto k = s.z[d][j];
      s.remove_token(d, j, c[d].tokens[j]);
      s.add_token(d, j, c[d].tokens[j], k);
    }
  }
  EXPECT_EQ(s.z, copy.z);
  EXPECT_EQ(s.n_dk, copy.n_dk);
  EXPECT_EQ(s.c_kw, copy.c_kw);
  EXPECT_EQ(s.c_k, copy.c_k);
}

TEST(Validate, AcceptsConsistentStateAndFlagsCorruption) {
  const auto c = make_corpus(4, {{0, 1, 2}, {3, 3}});
  auto s = three_topic_state(c, {{0, 1, 2}, {2, 0}});
  Rng rng(2);
  sample_table_counts(s, rng);
  EXPECT_NO_THROW(s.validate(c));

  auto bad = s;
  ++bad.c_kw[0][0];
  EXPECT_THROW(bad.validate(c), StateError);
  bad = s;
  bad.m_dk[0][0] = 0;
  EXPECT_THROW(bad.validate(c), StateError);
  bad = s;
  bad.beta_new += 1e-9;
  EXPECT_THROW(bad.validate(c), StateError);
  bad = s;
  bad.push_topic(0.0);
  EXPECT_NO_THROW(bad.validate(c, false));
  EXPECT_THROW(bad.validate(c), StateError);
}

TEST(Concentrations, PriorDrawWithoutData) {
  const auto c = make_corpus(3, {});
  HdpState s(c, 0.01, 1.0, 1.0);
  Rng rng(12345);
  const int n = 100000;
  double sa = 0.0, sg = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [a, g] = resample_concentrations(s, {}, {}, rng);
    ASSERT_GT(a, 0.0);
    ASSERT_GT(g, 0.0);
    sa += a;
    sg += g;
  }
  EXPECT_NEAR(sa / n, 1.0, 0.01);
  EXPECT_NEAR(sg / n, 1.0, 0.01);
}

TEST(Concentrations, PositiveAndReproducible) {
  const auto c = make_corpus(4, {{0, 1, 2}, {3, 3}});
  auto s = three_topic_state(c, {{0, 1, 2}, {2, 0}});
  Rng seed_rng(5);
  sample_table_counts(s, seed_rng);
  auto t = s;
  Rng r1(77), r2(77);
  for (int i = 0; i < 200; ++i) {
    const auto a = resample_concentrations(s, {2.0, 1.0}, {1.0, 0.5}, r1);
    const auto b = resample_concentrations(t, {2.0, 1.0}, {1.0, 0.5}, r2);
    EXPECT_EQ(a, b);
    EXPECT_GT(a.first, 0.0);
    EXPECT_GT(a.second, 0.0);
  }
}

TEST(Concentrations, InvalidPriorRejected) {
  const auto c = make_corpus(3, {});
  HdpState s(c, 0.01, 1.0, 1.0);
  Rng rng(1);
  EXPECT_THROW(resample_concentrations(s, {0.0, 1.0}, {}, rng), ValidationError);
}
