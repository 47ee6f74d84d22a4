#pragma once

// Free energy F_n = -log Z_n of a word dataset under the topic model with
// Dirichlet priors, by deterministic tensor-product quadrature. Each simplex
// column is mapped to a unit cube by stick breaking; every axis carries a
// composite 32-point Gauss-Legendre rule on 2^L equal panels. L grows until
// F stops moving.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "smfrlct/dataset.hpp"

namespace smfrlct {

class NumericalGuard : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxQuadratureDim = 4;

// Free coordinates of S(M,H) x S(H,N).
inline int free_dimension(Eigen::Index M, Eigen::Index N, int H) {
  return static_cast<int>(H * (M - 1) + N * (H - 1));
}

struct FreeEnergyResult {
  double F = 0.0;
  double error_estimate = 0.0;  // |F(L) - F(L-1)| at the last refinement
  int nodes_per_axis = 0;
  int dimension = 0;
  bool converged = false;
};

struct QuadratureConfig {
  int min_nodes_per_axis = 32;
  double rel_tol = 1e-6;
  std::int64_t max_total_nodes = 20'000'000;
};

namespace detail {

inline constexpr int kGaussPoints = 32;

struct AxisRule {
  std::vector<double> x, log_w;
};

inline AxisRule composite_gauss(int panels) {
  using Rule = boost::math::quadrature::gauss<double, kGaussPoints>;
  const auto& abscissa = Rule::abscissa();
  const auto& weights = Rule::weights();
  // boost stores the nonnegative half of a symmetric rule.
  std::vector<std::pair<double, double>> ref;
  for (std::size_t k = 0; k < abscissa.size(); ++k) {
    ref.emplace_back(abscissa[k], weights[k]);
    if (abscissa[k] != 0.0) ref.emplace_back(-abscissa[k], weights[k]);
  }
  std::sort(ref.begin(), ref.end());
  AxisRule r;
  const double h = 1.0 / panels;
  for (int p = 0; p < panels; ++p)
    for (const auto& [xi, wi] : ref) {
      r.x.push_back(h * (p + 0.5 * (xi + 1.0)));
      r.log_w.push_back(std::log(0.5 * h * wi));
    }
  return r;
}

// Stick breaking: u in [0,1]^{K-1} -> x in the K-simplex. Returns
// log(Jacobian) = sum_s (K-2-s) log(1 - u_s), s = 0..K-2.
inline double stick_break(const double* u, Eigen::Index K, double* x) {
  double rest = 1.0, log_jac = 0.0;
  for (Eigen::Index s = 0; s + 1 < K; ++s) {
    x[s] = rest * u[s];
    log_jac += static_cast<double>(K - 2 - s) * std::log1p(-u[s]);
    rest -= x[s];
  }
  x[K - 1] = rest;
  return log_jac;
}

inline double log_dirichlet_density(const double* x, Eigen::Index K, double conc) {
  double s = std::lgamma(K * conc) - static_cast<double>(K) * std::lgamma(conc);
  if (conc != 1.0)
    for (Eigen::Index k = 0; k < K; ++k) s += (conc - 1.0) * std::log(x[k]);
  return s;
}

}  // namespace detail

// H * (M-1) + N * (H-1) free coordinates; refuses above kMaxQuadratureDim.
inline FreeEnergyResult marginal_likelihood_exact(const WordDataset& data, int H, double alpha, double beta,
                                                  const QuadratureConfig& qc = {}) {
  data.validate();
  if (H < 1) throw std::invalid_argument("free energy: H must be >= 1");
  if (!(alpha > 0.0 && beta > 0.0)) throw std::invalid_argument("free energy: alpha, beta must be positive");
  if (qc.min_nodes_per_axis < detail::kGaussPoints)
    throw std::invalid_argument("free energy: quadrature depth must be >= 32 nodes per axis");
  const Eigen::Index M = data.M(), N = data.N();
  const int d = free_dimension(M, N, H);
  if (d > kMaxQuadratureDim)
    throw NumericalGuard("free energy: " + std::to_string(d) +
                         " free parameters exceed the quadrature limit of 4; use the generalization-error route");
  FreeEnergyResult res;
  res.dimension = d;
  const CountMatrix& c = data.counts;

  auto evaluate = [&](int panels) {
    const detail::AxisRule rule = detail::composite_gauss(panels);
    const std::size_t P = rule.x.size();
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    std::vector<double> u(static_cast<std::size_t>(d));
    Eigen::MatrixXd A(M, H), B(H, N);
    double run_max = -std::numeric_limits<double>::infinity(), run_sum = 0.0;
    for (;;) {
      double log_f = 0.0;
      for (int a = 0; a < d; ++a) {
        u[static_cast<std::size_t>(a)] = rule.x[idx[static_cast<std::size_t>(a)]];
        log_f += rule.log_w[idx[static_cast<std::size_t>(a)]];
      }
      const double* up = u.data();
      for (int k = 0; k < H; ++k, up += M - 1) {
        log_f += detail::stick_break(up, M, A.col(k).data());
        log_f += detail::log_dirichlet_density(A.col(k).data(), M, beta);
      }
      if (H > 1)
        for (Eigen::Index j = 0; j < N; ++j, up += H - 1) {
          log_f += detail::stick_break(up, H, B.col(j).data());
          log_f += detail::log_dirichlet_density(B.col(j).data(), H, alpha);
        }
      else
        B.setOnes();
      const Eigen::MatrixXd C = A * B;
      for (Eigen::Index j = 0; j < N; ++j)
        for (Eigen::Index i = 0; i < M; ++i)
          if (c(i, j) > 0) log_f += static_cast<double>(c(i, j)) * std::log(C(i, j));
      if (std::isfinite(log_f)) {
        if (log_f > run_max) {
          run_sum = run_sum * std::exp(run_max - log_f) + 1.0;
          run_max = log_f;
        } else {
          run_sum += std::exp(log_f - run_max);
        }
      }
      int a = 0;
      for (; a < d; ++a) {
        if (++idx[static_cast<std::size_t>(a)] < P) break;
        idx[static_cast<std::size_t>(a)] = 0;
      }
      if (a == d) break;
    }
    if (run_sum <= 0.0) throw std::runtime_error("free energy: integrand vanished on every node");
    return -(run_max + std::log(run_sum));
  };

  if (d == 0) {
    // M = 1 and H = 1: the parameter space is a single point.
    res.F = evaluate(1);
    res.converged = true;
    return res;
  }
  int panels = std::max(1, qc.min_nodes_per_axis / detail::kGaussPoints);
  double prev = evaluate(panels);
  for (;;) {
    const double nodes = std::pow(static_cast<double>(2 * panels * detail::kGaussPoints), d);
    if (nodes > static_cast<double>(qc.max_total_nodes)) {
      res.F = prev;
      res.nodes_per_axis = panels * detail::kGaussPoints;
      return res;
    }
    panels *= 2;
    const double cur = evaluate(panels);
    res.error_estimate = std::abs(cur - prev);
    res.F = cur;
    res.nodes_per_axis = panels * detail::kGaussPoints;
    if (res.error_estimate <= qc.rel_tol * std::max(1.0, std::abs(cur))) {
      res.converged = true;
      return res;
    }
    prev = cur;
  }
}

// Dirichlet-multinomial free energy of the single-topic model: all
// documents share one word distribution with a Dirichlet(beta) prior.
inline double free_energy_single_topic(const WordDataset& data, double beta) {
  const Eigen::Index M = data.M();
  const double Mb = static_cast<double>(M) * beta;
  double logZ = std::lgamma(Mb) - std::lgamma(static_cast<double>(data.n) + Mb);
  for (Eigen::Index i = 0; i < M; ++i)
    logZ += std::lgamma(static_cast<double>(data.counts.row(i).sum()) + beta) - std::lgamma(beta);
  return -logZ;
}

}  // namespace smfrlct
