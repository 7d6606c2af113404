#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "corpus.hpp"
#include "error.hpp"
#include "optimizer.hpp"
#include "random.hpp"
#include "state.hpp"

namespace shdp {

enum class Family { Gaussian, Binomial };

inline std::string to_string(Family f) { return f == Family::Gaussian ? "gaussian" : "binomial"; }

inline Family parse_family(const std::string& s) {
  if (s == "gaussian") return Family::Gaussian;
  if (s == "binomial") return Family::Binomial;
  throw ValidationError("unknown response family '" + s + "'");
}

/// GLM head: one coefficient per instantiated topic, aligned with state ids.
struct ResponseModel {
  Family family = Family::Gaussian;
  std::vector<double> eta;
  double delta = 0.5;  // Gaussian dispersion; 0.5 gives the kernel exp(-(y - t)^2)
  double zeta = 1.0;

  void check() const {
    if (!(delta > 0.0)) throw ValidationError("dispersion delta must be positive");
    if (!(zeta > 0.0)) throw ValidationError("prior scale zeta must be positive");
  }

  /// Drops coefficients of removed topics using a compaction mapping.
  void apply_mapping(const std::vector<TopicId>& mapping) {
    std::vector<double> kept;
    for (std::size_t k = 0; k < mapping.size(); ++k) {
      if (mapping[k] >= 0) kept.push_back(eta[k]);
    }
    eta = std::move(kept);
  }
};

/// Labelled documents' empirical topic distributions (rows) and responses.
struct TopicDesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::size_t> docs;  // corpus index of each row

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }
};

inline TopicDesignMatrix build_design(const HdpState& s, const Corpus& corpus) {
  TopicDesignMatrix m;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    if (corpus[d].labelled() && s.doc_length(d) > 0) m.docs.push_back(d);
  }
  const auto K = static_cast<Eigen::Index>(s.num_topics());
  m.X.setZero(static_cast<Eigen::Index>(m.docs.size()), K);
  m.y.resize(static_cast<Eigen::Index>(m.docs.size()));
  for (std::size_t r = 0; r < m.docs.size(); ++r) {
    const auto d = m.docs[r];
    const double inv = 1.0 / static_cast<double>(s.doc_length(d));
    for (Eigen::Index k = 0; k < K; ++k) m.X(r, k) = s.n_dk[d][k] * inv;
    m.y(r) = *corpus[d].response;
  }
  return m;
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline void check_binary(double y) {
  if (y != 0.0 && y != 1.0) {
    throw DomainError("binomial response must be 0 or 1, got " + std::to_string(y));
  }
}

/// Log-density of y given the linear predictor t, up to a constant in t.
inline double response_loglik_at(Family family, double delta, double t, double y) {
  if (family == Family::Gaussian) {
    const double r = y - t;
    return -r * r / (2.0 * delta);
  }
  check_binary(y);
  return y == 1.0 ? -log1pexp(-t) : -log1pexp(t);
}

inline double response_loglik(const ResponseModel& model, std::span<const double> zbar, double y) {
  if (zbar.size() != model.eta.size()) throw ValidationError("zbar length differs from K");
  double t = 0.0;
  for (std::size_t k = 0; k < zbar.size(); ++k) t += model.eta[k] * zbar[k];
  return response_loglik_at(model.family, model.delta, t, y);
}

/// Response factor p(y_d | z with token j of doc d set to k) for allocation
/// sampling. Token j must already be removed from the counts. A candidate
/// k == K stands for a new topic with coefficient `eta_new`. Unlabelled
/// documents give 1.
inline double allocation_response_factor(const ResponseModel& model, const HdpState& s,
                                         const Corpus& corpus, std::size_t d, TopicId k,
                                         double eta_new = 0.0) {
  const auto& doc = corpus[d];
  if (!doc.labelled()) return 1.0;
  const auto K = s.num_topics();
  double t = 0.0;
  for (std::size_t c = 0; c < K; ++c) t += model.eta[c] * s.n_dk[d][c];
  t += static_cast<std::size_t>(k) < K ? model.eta[k] : eta_new;
  t /= static_cast<double>(s.doc_length(d));
  return std::exp(response_loglik_at(model.family, model.delta, t, *doc.response));
}

// ---------------------------------------------------------------------------
// Gaussian coefficients: eta | X, y ~ N(A^-1 X'y, A^-1), A = X'X + zeta I.

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::LLT<Eigen::MatrixXd> precision_chol;  // of A
};

inline GaussianPosterior gaussian_posterior(const TopicDesignMatrix& design, double zeta) {
  if (!(zeta > 0.0)) throw ValidationError("zeta must be positive");
  const auto K = design.cols();
  Eigen::MatrixXd A = design.X.transpose() * design.X;
  A.diagonal().array() += zeta;
  GaussianPosterior post;
  post.precision_chol.compute(A);
  if (post.precision_chol.info() != Eigen::Success) {
    throw NumericalError("posterior precision is not positive definite");
  }
  post.mean = K ? Eigen::VectorXd(post.precision_chol.solve(design.X.transpose() * design.y))
                : Eigen::VectorXd();
  return post;
}

/// Draw from N(mean, A^-1) given the Cholesky factor A = L L'.
inline Eigen::VectorXd draw_with_precision(const Eigen::VectorXd& mean,
                                           const Eigen::LLT<Eigen::MatrixXd>& chol, Rng& rng) {
  Eigen::VectorXd e(mean.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = normal(rng);
  return mean + chol.matrixU().solve(e);
}

inline Eigen::VectorXd map_eta_gaussian(const TopicDesignMatrix& design, double zeta) {
  return gaussian_posterior(design, zeta).mean;
}

inline Eigen::VectorXd sample_eta_gaussian(const TopicDesignMatrix& design, double zeta, Rng& rng) {
  const auto post = gaussian_posterior(design, zeta);
  return draw_with_precision(post.mean, post.precision_chol, rng);
}

// ---------------------------------------------------------------------------
// Binomial (logistic) coefficients.

namespace detail {
inline void check_binary_design(const TopicDesignMatrix& design) {
  for (Eigen::Index r = 0; r < design.rows(); ++r) check_binary(design.y(r));
}
}  // namespace detail

/// l(eta) = -sum_d log(1 + exp(-s_d eta'zbar_d)) - zeta/2 eta'eta with s_d = 2y_d - 1.
inline double binomial_logpost(const TopicDesignMatrix& design, const Eigen::VectorXd& eta,
                               double zeta) {
  detail::check_binary_design(design);
  double l = -0.5 * zeta * eta.squaredNorm();
  if (design.rows() == 0) return l;
  const Eigen::VectorXd t = design.X * eta;
  for (Eigen::Index r = 0; r < design.rows(); ++r) {
    const double sgn = 2.0 * design.y(r) - 1.0;
    l -= log1pexp(-sgn * t(r));
  }
  return l;
}

inline Eigen::VectorXd binomial_grad(const TopicDesignMatrix& design, const Eigen::VectorXd& eta,
                                     double zeta) {
  detail::check_binary_design(design);
  Eigen::VectorXd g = -zeta * eta;
  if (design.rows() == 0) return g;
  const Eigen::VectorXd t = design.X * eta;
  for (Eigen::Index r = 0; r < design.rows(); ++r) {
    const double sgn = 2.0 * design.y(r) - 1.0;
    g += (1.0 - sigmoid(sgn * t(r))) * sgn * design.X.row(r).transpose();
  }
  return g;
}

/// Negative Hessian of binomial_logpost: sum_d p_d (1 - p_d) zbar zbar' + zeta I.
inline Eigen::MatrixXd binomial_neg_hessian(const TopicDesignMatrix& design,
                                            const Eigen::VectorXd& eta, double zeta) {
  const auto K = eta.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(K, K) * zeta;
  if (design.rows() == 0) return H;
  const Eigen::VectorXd t = design.X * eta;
  Eigen::VectorXd w(design.rows());
  for (Eigen::Index r = 0; r < design.rows(); ++r) {
    const double p = sigmoid(t(r));
    w(r) = p * (1.0 - p);
  }
  H.noalias() += design.X.transpose() * w.asDiagonal() * design.X;
  return H;
}

/// MAP coefficients by L-BFGS on the negated log-posterior.
/// Throws ConvergenceError (carrying the last iterate) if max_iters is reached.
inline Eigen::VectorXd map_eta_binomial(const TopicDesignMatrix& design, double zeta,
                                        const OptimizerConfig& cfg = {},
                                        const Eigen::VectorXd* start = nullptr) {
  detail::check_binary_design(design);
  if (!(zeta > 0.0)) throw ValidationError("zeta must be positive");
  const auto K = design.cols();
  Eigen::VectorXd x0 = start && start->size() == K ? *start : Eigen::VectorXd::Zero(K);
  // Same quantities as binomial_logpost / binomial_grad, sharing X * eta.
  auto objective = [&](const Eigen::VectorXd& eta, Eigen::VectorXd& grad) {
    double f = 0.5 * zeta * eta.squaredNorm();
    grad = zeta * eta;
    if (design.rows() == 0) return f;
    const Eigen::VectorXd t = design.X * eta;
    Eigen::VectorXd coef(design.rows());
    for (Eigen::Index r = 0; r < design.rows(); ++r) {
      const double sgn = 2.0 * design.y(r) - 1.0;
      f += log1pexp(-sgn * t(r));
      coef(r) = -(1.0 - sigmoid(sgn * t(r))) * sgn;
    }
    grad.noalias() += design.X.transpose() * coef;
    return f;
  };
  auto res = minimize(objective, std::move(x0), cfg);
  if (!res.converged) {
    throw ConvergenceError("binomial MAP did not converge in " + std::to_string(res.iterations) +
                               " iterations (|grad|_inf = " + std::to_string(res.grad_norm) + ")",
                           detail::to_std(res.x));
  }
  return res.x;
}

/// Laplace draw: N(eta_map, H^-1) with H the negative Hessian at eta_map.
inline Eigen::VectorXd sample_eta_binomial_laplace(const TopicDesignMatrix& design, double zeta,
                                                   Rng& rng, const OptimizerConfig& cfg = {},
                                                   const Eigen::VectorXd* start = nullptr) {
  const Eigen::VectorXd mode = map_eta_binomial(design, zeta, cfg, start);
  Eigen::LLT<Eigen::MatrixXd> chol(binomial_neg_hessian(design, mode, zeta));
  if (chol.info() != Eigen::Success) throw NumericalError("Laplace precision is not positive definite");
  return draw_with_precision(mode, chol, rng);
}

/// Gaussian: eta'ezbar. Binomial: sigmoid(eta'ezbar).
inline double predict_response(const ResponseModel& model, std::span<const double> ezbar) {
  if (ezbar.size() != model.eta.size()) throw ValidationError("ezbar length differs from K");
  double t = 0.0;
  for (std::size_t k = 0; k < ezbar.size(); ++k) t += model.eta[k] * ezbar[k];
  return model.family == Family::Gaussian ? t : sigmoid(t);
}

inline std::vector<double> to_std_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace shdp
