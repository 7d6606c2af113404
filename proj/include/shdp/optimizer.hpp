#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace shdp {

struct OptimizerConfig {
  int memory = 10;          // stored (s, y) pairs
  double grad_tol = 1e-8;   // stop when ||grad||_inf <= grad_tol
  int max_iters = 500;
  double c1 = 1e-4;         // sufficient decrease
  double c2 = 0.9;          // curvature
  int max_line_search = 50; // function evaluations per line search

  void check() const {
    if (memory < 1) throw ValidationError("optimizer memory must be >= 1");
    if (!(grad_tol > 0.0)) throw ValidationError("grad_tol must be positive");
    if (max_iters < 0) throw ValidationError("max_iters must be nonnegative");
    if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw ValidationError("need 0 < c1 < c2 < 1");
  }
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;  // infinity norm at x
  bool converged = false;
};

namespace detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

struct LinePoint {
  double step = 0.0;
  double value = 0.0;
  double slope = 0.0;
  Eigen::VectorXd grad;
};

/// Minimiser of the cubic matching values and slopes at a and b, clamped to
/// the interior of the bracket; falls back to bisection.
inline double interpolate(const LinePoint& a, const LinePoint& b) {
  const double lo = std::min(a.step, b.step);
  const double hi = std::max(a.step, b.step);
  const double width = hi - lo;
  const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.step - b.step);
  const double disc = d1 * d1 - a.slope * b.slope;
  double t = 0.5 * (lo + hi);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b.step - a.step);
    const double cand =
        b.step - (b.step - a.step) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    if (std::isfinite(cand)) t = cand;
  }
  return std::clamp(t, lo + 0.1 * width, hi - 0.1 * width);
}

}  // namespace detail

/// Limited-memory BFGS minimiser with a strong-Wolfe line search.
///
/// `objective(x, grad)` returns f(x) and writes the gradient into `grad`.
/// Throws NumericalError on non-finite values or a failed line search. When
/// max_iters is hit the result is returned with `converged == false`.
template <typename Objective>
OptimizerResult minimize(Objective&& objective, Eigen::VectorXd x0,
                         const OptimizerConfig& cfg = {}) {
  cfg.check();
  const auto n = x0.size();
  if (!detail::all_finite(x0)) throw NumericalError("non-finite starting point", detail::to_std(x0));

  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd g(n);
  double fx = objective(x, g);
  if (!std::isfinite(fx) || !detail::all_finite(g)) {
    throw NumericalError("non-finite objective at starting point", detail::to_std(x));
  }

  OptimizerResult res;
  auto finish = [&](int iters, bool converged) {
    res.x = x;
    res.value = fx;
    res.iterations = iters;
    res.grad_norm = n ? g.lpNorm<Eigen::Infinity>() : 0.0;
    res.converged = converged;
    return res;
  };
  if (n == 0 || g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) return finish(0, true);

  struct Pair {
    Eigen::VectorXd s, y;
    double rho;
  };
  std::deque<Pair> history;
  std::vector<double> alpha_buf;
  const double eps = std::numeric_limits<double>::epsilon();

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    // Two-loop recursion: d = -H g.
    Eigen::VectorXd d = -g;
    alpha_buf.assign(history.size(), 0.0);
    for (std::size_t i = history.size(); i-- > 0;) {
      alpha_buf[i] = history[i].rho * history[i].s.dot(d);
      d -= alpha_buf[i] * history[i].y;
    }
    if (!history.empty()) {
      const auto& last = history.back();
      d *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
      const double b = history[i].rho * history[i].y.dot(d);
      d += (alpha_buf[i] - b) * history[i].s;
    }
    double slope0 = g.dot(d);
    if (!(slope0 < 0.0)) {
      history.clear();
      d = -g;
      slope0 = -g.squaredNorm();
    }

    // Strong-Wolfe line search (bracketing phase, then zoom).
    const double f0 = fx;
    const double slack = 10.0 * eps * std::abs(f0);
    auto evaluate = [&](double step) {
      detail::LinePoint p;
      p.step = step;
      p.grad.resize(n);
      Eigen::VectorXd xt = x + step * d;
      p.value = objective(xt, p.grad);
      p.slope = p.grad.dot(d);
      return p;
    };
    auto armijo = [&](const detail::LinePoint& p) {
      return p.value <= f0 + cfg.c1 * p.step * slope0;
    };
    auto curvature = [&](const detail::LinePoint& p) {
      return std::abs(p.slope) <= -cfg.c2 * slope0;
    };
    // Approximate Wolfe acceptance for steps whose decrease is lost in
    // rounding of f (only reachable close to a minimiser).
    auto approx_wolfe = [&](const detail::LinePoint& p) {
      return p.value <= f0 + slack && p.slope >= cfg.c2 * slope0 &&
             p.slope <= (2.0 * cfg.c1 - 1.0) * slope0;
    };
    auto acceptable = [&](const detail::LinePoint& p) {
      return (armijo(p) && curvature(p)) || approx_wolfe(p);
    };

    detail::LinePoint prev{0.0, f0, slope0, g};
    double step = history.empty() ? std::min(1.0, 1.0 / std::sqrt(g.squaredNorm())) : 1.0;
    std::optional<detail::LinePoint> accepted;
    std::optional<std::pair<detail::LinePoint, detail::LinePoint>> bracket;  // (lo, hi)
    int evals = 0;

    while (evals < cfg.max_line_search) {
      auto p = evaluate(step);
      ++evals;
      if (!std::isfinite(p.value) || !detail::all_finite(p.grad)) {
        step = prev.step + 0.5 * (step - prev.step);
        continue;
      }
      if (acceptable(p)) {
        accepted = std::move(p);
        break;
      }
      if (!armijo(p) || (evals > 1 && p.value >= prev.value)) {
        bracket.emplace(prev, std::move(p));
        break;
      }
      if (p.slope >= 0.0) {
        bracket.emplace(std::move(p), prev);
        break;
      }
      prev = std::move(p);
      step = std::min(4.0 * step, 1e10);
    }

    if (!accepted && bracket) {
      auto& [lo, hi] = *bracket;
      while (evals < cfg.max_line_search) {
        if (std::abs(hi.step - lo.step) <= eps * std::max(1.0, hi.step)) break;
        auto p = evaluate(detail::interpolate(lo, hi));
        ++evals;
        if (!std::isfinite(p.value) || !detail::all_finite(p.grad)) {
          hi = std::move(p);
          hi.value = std::numeric_limits<double>::infinity();
          hi.slope = 0.0;
          continue;
        }
        if (acceptable(p)) {
          accepted = std::move(p);
          break;
        }
        if (!armijo(p) || p.value >= lo.value) {
          hi = std::move(p);
        } else {
          if (p.slope * (hi.step - lo.step) >= 0.0) hi = lo;
          lo = std::move(p);
        }
      }
      // Settle for the best sufficient-decrease point if the bracket collapsed.
      if (!accepted && lo.step > 0.0 && lo.value < f0) accepted = lo;
    }
    if (!accepted) {
      throw NumericalError("line search failed at iteration " + std::to_string(iter),
                           detail::to_std(x));
    }

    Eigen::VectorXd s = accepted->step * d;
    Eigen::VectorXd y = accepted->grad - g;
    x += s;
    fx = accepted->value;
    g = std::move(accepted->grad);

    const double sy = s.dot(y);
    if (sy > eps * y.squaredNorm()) {
      if (static_cast<int>(history.size()) == cfg.memory) history.pop_front();
      history.push_back({std::move(s), std::move(y), 1.0 / sy});
    }
    if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) return finish(iter, true);
  }
  return finish(cfg.max_iters, false);
}

}  // namespace shdp
