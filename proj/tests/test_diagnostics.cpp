#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "shdp/diagnostics.hpp"
#include "shdp/random.hpp"

using namespace shdp;

namespace {

using Chains = std::vector<std::vector<double>>;

Chains iid_chains(std::size_t m, std::size_t n, Rng& rng, double sd = 1.0) {
  Chains c(m);
  for (auto& x : c) {
    for (std::size_t i = 0; i < n; ++i) x.push_back(normal(rng, 0.0, sd));
  }
  return c;
}

/// Textbook Gelman-Rubin on the full arrays given (no burn-in split).
double textbook_rhat(const Chains& c) {
  const double m = c.size(), n = c[0].size();
  std::vector<double> mu;
  for (const auto& x : c) {
    double s = 0.0;
    for (double v : x) s += v;
    mu.push_back(s / n);
  }
  double grand = 0.0;
  for (double v : mu) grand += v / m;
  double B = 0.0;
  for (double v : mu) B += n * (v - grand) * (v - grand) / (m - 1);
  double W = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    double s = 0.0;
    for (double v : c[j]) s += (v - mu[j]) * (v - mu[j]);
    W += s / (n - 1) / m;
  }
  const double var_plus = (n - 1) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

}  // namespace

TEST(ShrinkFactor, MatchesTextbookOnSecondHalf) {
  Rng rng(1);
  auto c = iid_chains(4, 200, rng);
  for (std::size_t i = 0; i < 200; ++i) c[2][i] += 0.3;
  Chains second;
  for (const auto& x : c) second.emplace_back(x.begin() + 100, x.end());
  EXPECT_NEAR(shrink_factor(c, 0, 200), textbook_rhat(second), 1e-12);

  // A window [50, 150) keeps iterations 100..149.
  Chains mid;
  for (const auto& x : c) mid.emplace_back(x.begin() + 100, x.begin() + 150);
  EXPECT_NEAR(shrink_factor(c, 50, 150), textbook_rhat(mid), 1e-12);
}

TEST(ShrinkFactor, IidChainsNearOne) {
  Rng rng(2);
  const auto c = iid_chains(4, 20000, rng);
  const double r = shrink_factor(c, 0, 20000);
  EXPECT_LT(r, 1.01);
  EXPECT_GT(r, 0.99);
}

TEST(ShrinkFactor, SeparatedChainsFarAboveOne) {
  Rng rng(3);
  auto c = iid_chains(4, 1000, rng);
  for (std::size_t j = 0; j < 4; ++j) {
    for (auto& v : c[j]) v += 10.0 * j;
  }
  EXPECT_GT(shrink_factor(c, 0, 1000), 5.0);
}

TEST(ShrinkFactor, IdenticalChainsGiveLowerBound) {
  Rng rng(4);
  const auto one = iid_chains(1, 400, rng)[0];
  const Chains c{one, one, one};
  const double n = 200.0;  // retained half
  EXPECT_NEAR(shrink_factor(c, 0, 400), std::sqrt((n - 1) / n), 1e-14);
}

TEST(ShrinkFactor, NeverBelowLowerBound) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = iid_chains(2 + trial % 4, 20 + trial, rng);
    const double n = static_cast<double>(c[0].size() - c[0].size() / 2);
    EXPECT_GE(shrink_factor(c, 0, c[0].size()), std::sqrt((n - 1) / n) - 1e-15);
  }
}

TEST(ShrinkFactor, AffineInvariant) {
  Rng rng(6);
  auto c = iid_chains(3, 300, rng);
  c[1][10] += 4.0;
  const double r = shrink_factor(c, 0, 300);
  for (const auto [a, b] : {std::pair{2.5, -7.0}, std::pair{-0.01, 3.0}, std::pair{1e4, 1e3}}) {
    auto t = c;
    for (auto& x : t) {
      for (auto& v : x) v = a * v + b;
    }
    EXPECT_NEAR(shrink_factor(t, 0, 300), r, 1e-10);
  }
}

TEST(ShrinkFactor, DegenerateInputsRejected) {
  const Chains flat{std::vector<double>(50, 1.0), std::vector<double>(50, 1.0)};
  EXPECT_THROW(shrink_factor(flat, 0, 50), ValidationError);
  Rng rng(7);
  const auto c = iid_chains(3, 50, rng);
  EXPECT_THROW(shrink_factor({c[0]}, 0, 50), ValidationError);
  EXPECT_THROW(shrink_factor(c, 0, 9), ValidationError);
  EXPECT_THROW(shrink_factor(c, 0, 51), ValidationError);
}

TEST(RollingShrink, LengthAndLastPoint) {
  Rng rng(8);
  const auto c = iid_chains(3, 2000, rng);
  for (std::size_t step : {50u, 300u, 1999u, 2000u}) {
    const auto s = rolling_shrink(c, step);
    EXPECT_EQ(s.size(), (2000 + step - 1) / step) << step;
    EXPECT_EQ(s.back().iteration, 2000u);
    EXPECT_DOUBLE_EQ(s.back().value, shrink_factor(c, 0, 2000));
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GT(s[i].iteration, s[i - 1].iteration);
  }
}

TEST(RollingShrink, StepBeyondLengthGivesSinglePoint) {
  Rng rng(9);
  const auto c = iid_chains(2, 120, rng);
  const auto s = rolling_shrink(c, 500);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].iteration, 120u);
}

TEST(RollingShrink, UsesShortestChain) {
  Rng rng(10);
  auto c = iid_chains(2, 100, rng);
  c[1].resize(80);
  const auto s = rolling_shrink(c, 40);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.back().iteration, 80u);
  EXPECT_THROW(rolling_shrink(c, 0), ValidationError);
}

TEST(RollingShrink, FromTracesAndCsv) {
  Rng rng(11);
  std::vector<ChainTrace> traces(3);
  for (auto& t : traces) {
    for (int i = 1; i <= 100; ++i) {
      t.records.push_back({i, 3, normal(rng), normal(rng), 1.0, 1.0});
    }
  }
  const auto s = rolling_shrink(traces, "residual_l2", 25);
  EXPECT_EQ(s.size(), 4u);
  std::ostringstream out;
  write_shrink_csv(out, s);
  EXPECT_EQ(out.str().substr(0, 25), "iteration,shrink_factor\n2");
  EXPECT_THROW(rolling_shrink(traces, "nope", 25), ValidationError);
}

TEST(Trace, CsvRoundTripIsExact) {
  Rng rng(12);
  ChainTrace t;
  for (int i = 1; i <= 30; ++i) {
    t.records.push_back({i, i % 7, normal(rng), std::exp(normal(rng)), 1.0 / 3.0, 0.1 * i});
  }
  std::ostringstream out;
  write_trace_csv(out, t);
  std::istringstream in(out.str());
  const auto back = read_trace_csv(in);
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(back.records[i].iteration, t.records[i].iteration);
    EXPECT_EQ(back.records[i].num_topics, t.records[i].num_topics);
    EXPECT_EQ(back.records[i].eta_l2, t.records[i].eta_l2);
    EXPECT_EQ(back.records[i].residual_l2, t.records[i].residual_l2);
    EXPECT_EQ(back.records[i].alpha, t.records[i].alpha);
    EXPECT_EQ(back.records[i].gamma, t.records[i].gamma);
  }
}

TEST(Trace, MalformedCsvIsParseError) {
  std::istringstream bad_header("iter,K\n1,2\n");
  EXPECT_THROW(read_trace_csv(bad_header), ParseError);
  std::istringstream bad_row(std::string(kTraceHeader) + "\n1,2,x,0,1,1\n");
  EXPECT_THROW(read_trace_csv(bad_row), ParseError);
}
