#pragma once

// Column-stochastic matrices and the ground truth (A0, B0, q') that
// defines the true distribution.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "smfrlct/random.hpp"

namespace smfrlct {

inline constexpr double kStochasticTol = 1e-12;

struct ValidationReport {
  bool ok = true;
  std::string message;
  Eigen::Index row = -1;
  Eigen::Index col = -1;

  explicit operator bool() const { return ok; }
};

// Checks entries in [0,1] and unit column sums, both within kStochasticTol.
// Reports the first violation in column-major order.
inline ValidationReport validate(const Eigen::MatrixXd& m) {
  ValidationReport r;
  if (m.rows() < 1 || m.cols() < 1) {
    r.ok = false;
    r.message = "empty matrix";
    return r;
  }
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, j);
      if (!std::isfinite(v) || v < -kStochasticTol || v > 1.0 + kStochasticTol) {
        std::ostringstream os;
        os << "entry (" << i << "," << j << ") = " << v << " outside [0,1]";
        r = {false, os.str(), i, j};
        return r;
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kStochasticTol) {
      std::ostringstream os;
      os.precision(17);
      os << "column " << j << " sums to " << sum;
      r = {false, os.str(), -1, j};
      return r;
    }
  }
  return r;
}

// Immutable column-stochastic matrix; entry(i,k) = a_ik.
class StochasticMatrix {
 public:
  explicit StochasticMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
    if (auto r = smfrlct::validate(m_); !r) throw std::invalid_argument("not a stochastic matrix: " + r.message);
  }

  static StochasticMatrix identity(Eigen::Index n) { return StochasticMatrix(Eigen::MatrixXd::Identity(n, n)); }

  Eigen::Index rows() const { return m_.rows(); }
  Eigen::Index cols() const { return m_.cols(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  const Eigen::MatrixXd& matrix() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

inline StochasticMatrix product(const StochasticMatrix& a, const StochasticMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("product: inner dimensions disagree");
  return StochasticMatrix(a.matrix() * b.matrix());
}

// Columns drawn uniformly from {x in simplex : x_i >= delta}. That set is
// the simplex shrunk by (1 - rows*delta) and shifted by delta, so the
// affine image of a uniform draw has the same law as rejection sampling.
template <class Gen>
Eigen::MatrixXd random_stochastic_matrix(Eigen::Index rows, Eigen::Index cols, double delta, Gen& rng) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("random_stochastic: empty shape");
  if (!(delta >= 0.0) || delta * static_cast<double>(rows) >= 1.0)
    throw std::invalid_argument("random_stochastic: infeasible delta (need 0 <= delta*rows < 1)");
  Eigen::MatrixXd m(rows, cols);
  const double scale = 1.0 - delta * static_cast<double>(rows);
  for (Eigen::Index j = 0; j < cols; ++j) {
    sample_dirichlet(rng, 1.0, std::span<double>(m.col(j).data(), static_cast<std::size_t>(rows)));
    m.col(j) = (m.col(j).array() * scale + delta).matrix();
  }
  return m;
}

template <class Gen>
StochasticMatrix random_stochastic(Eigen::Index rows, Eigen::Index cols, double delta, Gen& rng) {
  return StochasticMatrix(random_stochastic_matrix(rows, cols, delta, rng));
}

struct MinimalityCheck {
  bool ok = true;
  Eigen::Index numerical_rank = 0;
  double min_column_distance = 0.0;
  std::string message;
};

// Stand-in for minimal factorization: A0 B0 has numerical rank H0
// (singular values above 1e-8) and no two columns of A0 are closer than
// min_separation.
inline MinimalityCheck check_minimality(const Eigen::MatrixXd& A0, const Eigen::MatrixXd& B0,
                                        double min_separation = 1e-3) {
  MinimalityCheck c;
  const Eigen::MatrixXd prod = A0 * B0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(prod);
  const auto& sv = svd.singularValues();
  c.numerical_rank = (sv.array() > 1e-8).count();
  c.min_column_distance = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < A0.cols(); ++a)
    for (Eigen::Index b = a + 1; b < A0.cols(); ++b)
      c.min_column_distance = std::min(c.min_column_distance, (A0.col(a) - A0.col(b)).norm());
  if (c.numerical_rank != A0.cols()) {
    c.ok = false;
    c.message = "A0*B0 has numerical rank " + std::to_string(c.numerical_rank) + ", expected H0 = " +
                std::to_string(A0.cols());
  } else if (A0.cols() > 1 && c.min_column_distance < min_separation) {
    c.ok = false;
    c.message = "columns of A0 are nearly duplicated";
  }
  return c;
}

struct GroundTruth {
  StochasticMatrix A0;      // M x H0
  StochasticMatrix B0;      // H0 x N
  Eigen::VectorXd doc_dist; // q' over the N columns
  double delta = 0.05;
  std::optional<std::uint64_t> seed;

  Eigen::Index M() const { return A0.rows(); }
  Eigen::Index N() const { return B0.cols(); }
  Eigen::Index H0() const { return A0.cols(); }
  // True conditional table: column j is q(. | document j).
  Eigen::MatrixXd product() const { return A0.matrix() * B0.matrix(); }
};

inline GroundTruth make_ground_truth(Eigen::MatrixXd A0, Eigen::MatrixXd B0, Eigen::VectorXd doc_dist, double delta,
                                     std::optional<std::uint64_t> seed = std::nullopt) {
  if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("ground truth: delta must lie in (0, 1/2)");
  StochasticMatrix a(std::move(A0));
  StochasticMatrix b(std::move(B0));
  if (a.cols() != b.rows()) throw std::invalid_argument("ground truth: A0 columns must match B0 rows");
  auto in_margin = [delta](const Eigen::MatrixXd& m) {
    return (m.array() >= delta - kStochasticTol).all() && (m.array() <= 1.0 - delta + kStochasticTol).all();
  };
  // A single-row factor is forced to all ones and carries no parameter.
  if ((a.rows() > 1 && !in_margin(a.matrix())) || (b.rows() > 1 && !in_margin(b.matrix())))
    throw std::invalid_argument("ground truth: entries of A0, B0 must lie in [delta, 1-delta]");
  if (doc_dist.size() != b.cols()) throw std::invalid_argument("ground truth: doc_dist must have N entries");
  if (!(doc_dist.array() > 0.0).all() || std::abs(doc_dist.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("ground truth: doc_dist must be strictly positive and sum to 1");
  if (auto mc = check_minimality(a.matrix(), b.matrix()); !mc.ok)
    throw std::invalid_argument("ground truth: not minimal: " + mc.message);
  return GroundTruth{std::move(a), std::move(b), std::move(doc_dist), delta, seed};
}

inline GroundTruth make_ground_truth(Eigen::MatrixXd A0, Eigen::MatrixXd B0, double delta) {
  const Eigen::Index n = B0.cols();
  Eigen::VectorXd q = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return make_ground_truth(std::move(A0), std::move(B0), std::move(q), delta);
}

// Draws A0, B0 with entries in [delta, 1-delta] until the minimality check
// passes at the requested separation. q' is uniform.
inline GroundTruth random_ground_truth(int M, int N, int H0, double delta, std::uint64_t seed,
                                       double min_separation = 1e-3) {
  if (H0 < 1 || H0 > std::min(M, N)) throw std::invalid_argument("random_ground_truth: need 1 <= H0 <= min(M,N)");
  if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("random_ground_truth: delta must lie in (0, 1/2)");
  if (delta * M >= 1.0 || delta * H0 >= 1.0) throw std::invalid_argument("random_ground_truth: infeasible delta");
  Rng rng(seed);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    Eigen::MatrixXd A0 = random_stochastic_matrix(M, H0, delta, rng);
    Eigen::MatrixXd B0 = random_stochastic_matrix(H0, N, delta, rng);
    if (check_minimality(A0, B0, min_separation).ok) {
      Eigen::VectorXd q = Eigen::VectorXd::Constant(N, 1.0 / N);
      return make_ground_truth(std::move(A0), std::move(B0), std::move(q), delta, seed);
    }
  }
  throw std::runtime_error("random_ground_truth: no minimal truth found");
}

}  // namespace smfrlct
