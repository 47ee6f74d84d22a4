#pragma once

// Objectives whose zero set is AB = A0 B0: the squared error and the
// Kullback-Leibler divergences of the topic, Gaussian, Bernoulli and
// Markov-chain models built on the product AB.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "smfrlct/stochastic_matrix.hpp"

namespace smfrlct {

namespace detail {

inline Eigen::MatrixXd model_product(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const GroundTruth& truth) {
  if (A.cols() != B.rows()) throw std::invalid_argument("A columns must match B rows");
  if (A.rows() != truth.M() || B.cols() != truth.N())
    throw std::invalid_argument("AB must have the shape of A0 B0");
  return A * B;
}

}  // namespace detail

// Phi(A,B) = ||AB - A0 B0||^2 (squared Frobenius norm).
inline double sq_error(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const GroundTruth& truth) {
  return (detail::model_product(A, B, truth) - truth.product()).squaredNorm();
}

// Weighted column KL: sum_j w_j sum_i P_ij log(P_ij / Q_ij). Returns +inf
// when Q has zero mass on a cell where P is positive; that is the
// divergent state, reported as a value rather than thrown.
inline double weighted_column_kl(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q, const Eigen::VectorXd& w) {
  if (P.rows() != Q.rows() || P.cols() != Q.cols() || w.size() != P.cols())
    throw std::invalid_argument("weighted_column_kl: shape mismatch");
  double total = 0.0;
  for (Eigen::Index j = 0; j < P.cols(); ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      const double p = P(i, j);
      if (p <= 0.0) continue;
      const double q = Q(i, j);
      if (!(q > 0.0)) return std::numeric_limits<double>::infinity();
      col += p * std::log(p / q);
    }
    total += w(j) * col;
  }
  return total;
}

inline bool is_divergent(double kl) { return std::isinf(kl); }

// Topic-model KL: column j of AB is the word distribution of document j,
// documents are weighted by q'.
inline double kl_topic(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const GroundTruth& truth) {
  return weighted_column_kl(truth.product(), detail::model_product(A, B, truth), truth.doc_dist);
}

// Unit-variance Gaussian observation of AB: KL = Phi / 2.
inline double kl_gaussian_smf(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const GroundTruth& truth) {
  return 0.5 * sq_error(A, B, truth);
}

// Two-outcome KL of Bernoulli(a) from Bernoulli(b).
inline double kl_bernoulli_pointwise(double a, double b) {
  if (!(a > 0.0 && a < 1.0) || !(b > 0.0 && b < 1.0))
    throw std::domain_error("kl_bernoulli_pointwise: means must lie in (0,1)");
  return a * (std::log(a) - std::log(b)) + (1.0 - a) * (std::log1p(-a) - std::log1p(-b));
}

// Entrywise Bernoulli KL between the means (A0 B0)_ij and (AB)_ij.
inline double kl_bernoulli_means(const Eigen::MatrixXd& truth_mean, const Eigen::MatrixXd& model_mean) {
  if (truth_mean.rows() != model_mean.rows() || truth_mean.cols() != model_mean.cols())
    throw std::invalid_argument("kl_bernoulli: shape mismatch");
  double total = 0.0;
  for (Eigen::Index j = 0; j < truth_mean.cols(); ++j) {
    for (Eigen::Index i = 0; i < truth_mean.rows(); ++i) {
      const double a = truth_mean(i, j), b = model_mean(i, j);
      if (!(a > 0.0 && a < 1.0) || !(b > 0.0 && b < 1.0)) {
        std::ostringstream os;
        os << "kl_bernoulli: entry (" << i << "," << j << ") on the boundary of (0,1)";
        throw std::domain_error(os.str());
      }
      total += kl_bernoulli_pointwise(a, b);
    }
  }
  return total;
}

inline double kl_bernoulli_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const GroundTruth& truth) {
  return kl_bernoulli_means(truth.product(), detail::model_product(A, B, truth));
}

// Constants c1, c2 with c1 (b-a)^2 <= KL(a||b) <= c2 (b-a)^2 over all
// pairs a != b of an evenly spaced grid on [lo, hi] with `points` nodes.
struct BernoulliSandwich {
  double c1 = 0.0;
  double c2 = 0.0;
};

inline BernoulliSandwich bernoulli_sandwich(double lo, double hi, int points) {
  if (!(lo > 0.0 && hi < 1.0 && lo < hi) || points < 2)
    throw std::invalid_argument("bernoulli_sandwich: need 0 < lo < hi < 1 and points >= 2");
  BernoulliSandwich s{std::numeric_limits<double>::infinity(), 0.0};
  for (int p = 0; p < points; ++p)
    for (int q = 0; q < points; ++q) {
      if (p == q) continue;
      const double a = lo + (hi - lo) * p / (points - 1), b = lo + (hi - lo) * q / (points - 1);
      const double r = kl_bernoulli_pointwise(a, b) / ((b - a) * (b - a));
      s.c1 = std::min(s.c1, r);
      s.c2 = std::max(s.c2, r);
    }
  return s;
}

// Eigenvalue bounds of a symmetric positive-definite input second-moment
// matrix; the Markov-chain KL lies in [lo * Phi, hi * Phi].
struct MomentBounds {
  double lo = 0.0;  // smallest eigenvalue / 2
  double hi = 0.0;  // largest eigenvalue / 2
};

inline MomentBounds check_moment_matrix(const Eigen::MatrixXd& X) {
  if (X.rows() != X.cols()) throw std::invalid_argument("moment matrix must be square");
  const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
  if ((X - X.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("moment matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  if (!(ev.minCoeff() > 0.0)) throw std::invalid_argument("moment matrix must be positive definite");
  return {0.5 * ev.minCoeff(), 0.5 * ev.maxCoeff()};
}

// KL of the linear-Gaussian chain y = ABx + noise against y = A0B0x + noise,
// averaged over inputs with second moment X: (1/2) tr(D X D^T), D = AB - A0B0.
inline double kl_markov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const GroundTruth& truth,
                        const Eigen::MatrixXd& X_moment) {
  check_moment_matrix(X_moment);
  const Eigen::MatrixXd D = detail::model_product(A, B, truth) - truth.product();
  if (X_moment.rows() != D.cols()) throw std::invalid_argument("moment matrix must be N x N");
  return 0.5 * (D * X_moment * D.transpose()).trace();
}

}  // namespace smfrlct
