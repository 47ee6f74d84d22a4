#pragma once

// Stochastic matrix factorization observed through noisy matrices:
// Gaussian X = A0 B0 + noise, or Bernoulli X_ij ~ Bernoulli((A0 B0)_ij).
// The posterior over (A, B) under the uniform prior is explored by
// random-walk Metropolis with pair-transfer moves inside one simplex column.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smfrlct/posterior.hpp"
#include "smfrlct/random.hpp"
#include "smfrlct/stochastic_matrix.hpp"

namespace smfrlct {

enum class SmfModel { gaussian, bernoulli };

inline const char* to_string(SmfModel m) { return m == SmfModel::gaussian ? "gaussian" : "bernoulli"; }

inline SmfModel parse_smf_model(const std::string& s) {
  if (s == "gaussian") return SmfModel::gaussian;
  if (s == "bernoulli") return SmfModel::bernoulli;
  throw std::invalid_argument("unknown SMF model '" + s + "' (expected gaussian or bernoulli)");
}

template <class Gen>
std::vector<Eigen::MatrixXd> generate_smf_dataset(const GroundTruth& truth, std::int64_t n, SmfModel model, Gen& rng,
                                                  double noise_sd = 1.0) {
  if (n < 1) throw std::invalid_argument("generate_smf_dataset: n must be >= 1");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("generate_smf_dataset: noise_sd must be >= 0");
  const Eigen::MatrixXd C = truth.product();
  if (model == SmfModel::bernoulli && ((C.array() <= 0.0).any() || (C.array() >= 1.0).any()))
    throw std::invalid_argument("generate_smf_dataset: Bernoulli means must lie in (0,1)");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(n));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::int64_t l = 0; l < n; ++l) {
    Eigen::MatrixXd X(C.rows(), C.cols());
    for (Eigen::Index j = 0; j < C.cols(); ++j)
      for (Eigen::Index i = 0; i < C.rows(); ++i)
        X(i, j) = model == SmfModel::gaussian ? C(i, j) + noise_sd * gauss(rng) : (unif(rng) < C(i, j) ? 1.0 : 0.0);
    out.push_back(std::move(X));
  }
  return out;
}

struct MetropolisConfig {
  std::int64_t steps = 50'000;
  double burnin_fraction = 0.2;
  double proposal_scale = 0.05;
  bool adapt = true;  // tune the scale during burn-in only
  double target_acceptance = 0.3;

  void validate() const {
    if (steps < 10'000) throw std::invalid_argument("metropolis: steps must be >= 1e4");
    if (!(burnin_fraction >= 0.0 && burnin_fraction < 1.0))
      throw std::invalid_argument("metropolis: burnin_fraction must lie in [0,1)");
    if (!(proposal_scale > 0.0)) throw std::invalid_argument("metropolis: proposal_scale must be positive");
  }
};

// Sufficient statistics of n observed matrices: their sum (Gaussian) or the
// count of ones (Bernoulli, same thing).
struct SmfData {
  SmfModel model;
  std::int64_t n;
  Eigen::MatrixXd sum;

  double log_likelihood(const Eigen::MatrixXd& C) const {
    const double nn = static_cast<double>(n);
    if (model == SmfModel::gaussian) return (sum.array() * C.array()).sum() - 0.5 * nn * C.squaredNorm();
    double s = 0.0;
    for (Eigen::Index j = 0; j < C.cols(); ++j)
      for (Eigen::Index i = 0; i < C.rows(); ++i) {
        const double c = C(i, j), k = sum(i, j);
        if (!(c > 0.0 && c < 1.0)) {
          if ((c <= 0.0 && k > 0.0) || (c >= 1.0 && k < nn)) return -std::numeric_limits<double>::infinity();
          continue;
        }
        s += k * std::log(c) + (nn - k) * std::log1p(-c);
      }
    return s;
  }
};

inline SmfData summarize_smf(const std::vector<Eigen::MatrixXd>& data, SmfModel model) {
  if (data.empty()) throw std::invalid_argument("metropolis: no observations");
  SmfData d{model, static_cast<std::int64_t>(data.size()), Eigen::MatrixXd::Zero(data[0].rows(), data[0].cols())};
  for (const auto& X : data) {
    if (X.rows() != d.sum.rows() || X.cols() != d.sum.cols())
      throw std::invalid_argument("metropolis: observations differ in shape");
    if (model == SmfModel::bernoulli && ((X.array() != 0.0) && (X.array() != 1.0)).any())
      throw std::invalid_argument("metropolis: Bernoulli observations must be 0/1");
    d.sum += X;
  }
  return d;
}

namespace detail {

// Reflects y into [0, T]; the map is symmetric in the proposal increment.
inline double reflect(double y, double T) {
  if (T <= 0.0) return 0.0;
  double r = std::fmod(y, 2.0 * T);
  if (r < 0.0) r += 2.0 * T;
  return r > T ? 2.0 * T - r : r;
}

}  // namespace detail

// Posterior mean of AB under the uniform prior on S(M,H) x S(H,N). Each step
// picks a simplex column of A or B and two of its coordinates, and moves mass
// eps ~ N(0, scale^2) between them with reflection at the column's bounds.
template <class Gen>
PosteriorSummary mh_posterior_smf(const std::vector<Eigen::MatrixXd>& data, SmfModel model, int H,
                                  const MetropolisConfig& cfg, Gen& rng) {
  cfg.validate();
  if (H < 1) throw std::invalid_argument("metropolis: H must be >= 1");
  const SmfData stats = summarize_smf(data, model);
  const Eigen::Index M = stats.sum.rows(), N = stats.sum.cols();
  if (M < 2) throw std::invalid_argument("metropolis: need M >= 2");

  Eigen::MatrixXd A = random_stochastic_matrix(M, H, 0.0, rng);
  Eigen::MatrixXd B = random_stochastic_matrix(H, N, 0.0, rng);
  Eigen::MatrixXd C = A * B;
  double ll = stats.log_likelihood(C);

  // Column slots: 0..H-1 are columns of A; H..H+N-1 columns of B (only when H > 1).
  const int slots = H > 1 ? H + static_cast<int>(N) : H;
  std::uniform_int_distribution<int> pick_slot(0, slots - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto burnin = static_cast<std::int64_t>(cfg.burnin_fraction * static_cast<double>(cfg.steps));
  double scale = cfg.proposal_scale;
  std::int64_t window_acc = 0, window_n = 0, post_acc = 0, post_n = 0;
  PosteriorSummary out;
  out.predictive = Eigen::MatrixXd::Zero(M, N);
  std::vector<double> post_trace;
  const std::int64_t trace_every = std::max<std::int64_t>(1, cfg.steps / 2000);

  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    const int slot = pick_slot(rng);
    const bool in_A = slot < H;
    const Eigen::Index K = in_A ? M : H;
    const Eigen::Index col = in_A ? slot : slot - H;
    std::uniform_int_distribution<Eigen::Index> pick_coord(0, K - 1);
    const Eigen::Index r = pick_coord(rng);
    Eigen::Index s = pick_coord(rng);
    while (s == r) s = pick_coord(rng);
    double& xr = in_A ? A(r, col) : B(r, col);
    double& xs = in_A ? A(s, col) : B(s, col);
    const double old_r = xr, old_s = xs, T = old_r + old_s;
    xr = detail::reflect(old_r + scale * gauss(rng), T);
    xs = T - xr;
    Eigen::MatrixXd C_new = A * B;
    const double ll_new = stats.log_likelihood(C_new);
    const bool accept = ll_new >= ll || std::log(unif(rng)) < ll_new - ll;
    if (accept) {
      C = std::move(C_new);
      ll = ll_new;
    } else {
      xr = old_r;
      xs = old_s;
    }
    if (step < burnin) {
      window_acc += accept;
      ++window_n;
      if (cfg.adapt && window_n == 200) {
        const double rate = static_cast<double>(window_acc) / 200.0;
        scale = std::clamp(scale * std::exp(rate - cfg.target_acceptance), 1e-5, 1.0);
        window_acc = window_n = 0;
      }
      continue;
    }
    post_acc += accept;
    ++post_n;
    out.predictive += C;
    ++out.n_samples;
    if (step % trace_every == 0) post_trace.push_back(ll);
  }
  out.predictive /= static_cast<double>(out.n_samples);
  auto& dg = out.diagnostics;
  dg.acceptance_rate = static_cast<double>(post_acc) / static_cast<double>(post_n);
  dg.final_proposal_scale = scale;
  dg.loglik_trace = post_trace;
  dg.split_rhat = split_rhat(post_trace);
  if (dg.acceptance_rate < 0.05 || dg.acceptance_rate > 0.8)
    dg.warnings.push_back("acceptance rate " + std::to_string(dg.acceptance_rate) +
                          " outside [0.05, 0.8]: retune proposal_scale");
  if (dg.split_rhat > kRhatWarning)
    dg.warnings.push_back("split R-hat " + std::to_string(dg.split_rhat) + " exceeds 1.1: chain may not have mixed");
  return out;
}

}  // namespace smfrlct
