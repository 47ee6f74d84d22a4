#pragma once

// Monte-Carlo learning-coefficient estimation.
//
// Sublevel-set volume scaling: for a nonnegative analytic objective F and a
// prior with bounded positive density, V(t) = Pr[F < t] behaves like
// c * t^lambda * (-log t)^(m-1) as t -> 0, where lambda is the RLCT and m
// its multiplicity. One pool of prior draws is scored against every
// threshold, and log V(t) is regressed on log t (and log(-log t)).
//
// Slope estimators recover lambda from the free-energy and
// generalization-error sequences instead.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "smfrlct/bounds.hpp"
#include "smfrlct/kernels.hpp"
#include "smfrlct/parallel.hpp"
#include "smfrlct/random.hpp"
#include "smfrlct/stochastic_matrix.hpp"

namespace smfrlct {

class InsufficientResolution : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Geometric sequence from hi down to lo (inclusive).
inline std::vector<double> geometric_grid(double hi, double lo, std::size_t points) {
  if (!(hi > lo && lo > 0.0) || points < 2) throw std::invalid_argument("geometric_grid: need hi > lo > 0, points >= 2");
  std::vector<double> g(points);
  const double step = std::log(lo / hi) / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) g[k] = hi * std::exp(step * static_cast<double>(k));
  g.back() = lo;
  return g;
}

enum class GridMode {
  fixed,     // thresholds are t_grid
  quantile,  // thresholds are empirical quantiles at geometric volume fractions
};

inline const char* to_string(GridMode m) { return m == GridMode::fixed ? "fixed" : "quantile"; }

struct VolumeScalingConfig {
  std::size_t num_samples = 2'000'000;
  std::vector<double> t_grid = geometric_grid(1e-2, 1e-6, 24);
  bool include_log_term = true;
  std::uint64_t seed = 0;
  std::size_t min_hits = 100;
  GridMode grid_mode = GridMode::fixed;
  // Quantile mode: volume fractions from quantile_max down to min_hits/num_samples.
  double quantile_max = 1e-2;
  std::size_t quantile_points = 24;
  unsigned threads = 1;

  void validate() const {
    if (num_samples < 10'000) throw std::invalid_argument("VolumeScalingConfig: num_samples must be >= 1e4");
    if (min_hits < 1) throw std::invalid_argument("VolumeScalingConfig: min_hits must be >= 1");
    if (grid_mode == GridMode::fixed) {
      if (t_grid.size() < 4) throw std::invalid_argument("VolumeScalingConfig: t_grid needs at least 4 thresholds");
      for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if (!(t_grid[k] > 0.0)) throw std::invalid_argument("VolumeScalingConfig: thresholds must be positive");
        if (k > 0 && !(t_grid[k] < t_grid[k - 1]))
          throw std::invalid_argument("VolumeScalingConfig: t_grid must be strictly decreasing");
      }
    } else {
      if (!(quantile_max > 0.0 && quantile_max < 1.0))
        throw std::invalid_argument("VolumeScalingConfig: quantile_max must lie in (0,1)");
      if (quantile_points < 4) throw std::invalid_argument("VolumeScalingConfig: quantile_points must be >= 4");
      if (static_cast<double>(min_hits) >= quantile_max * static_cast<double>(num_samples))
        throw std::invalid_argument("VolumeScalingConfig: quantile_max * num_samples must exceed min_hits");
    }
  }
};

struct RlctEstimate {
  double lambda_hat = 0.0;
  double multiplicity_hat = 1.0;
  double stderr_lambda = 0.0;
  double r_squared = 0.0;
  bool log_term_used = false;
  std::size_t usable_thresholds = 0;
  std::vector<double> t_grid;          // decreasing
  std::vector<std::uint64_t> counts;   // #{F < t}, aligned with t_grid
  std::size_t num_samples = 0;
  std::uint64_t seed = 0;
  GridMode grid_mode = GridMode::fixed;
  std::vector<std::string> warnings;
};

namespace detail {

struct LinearFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd variance;  // diagonal of the coefficient covariance
  double rss = 0.0;
  double tss = 0.0;
};

// OLS of y on X. The coefficient variance is the larger of the
// residual-based estimate and the propagated binomial sampling covariance of
// the cumulative counts, Cov(log V_a, log V_b) = 1/max(c_a, c_b) - 1/S.
inline LinearFit ols_with_sampling_cov(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       const std::vector<double>& counts, double total) {
  LinearFit f;
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
  f.beta = xtx_inv * (X.transpose() * y);
  const Eigen::VectorXd resid = y - X * f.beta;
  f.rss = resid.squaredNorm();
  f.tss = (y.array() - y.mean()).matrix().squaredNorm();
  const auto k = X.rows(), p = X.cols();
  const double s2 = k > p ? f.rss / static_cast<double>(k - p) : 0.0;
  Eigen::MatrixXd sigma(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      sigma(a, b) = std::max(0.0, 1.0 / std::max(counts[a], counts[b]) - 1.0 / total);
  const Eigen::MatrixXd sampling = xtx_inv * X.transpose() * sigma * X * xtx_inv;
  f.variance = (s2 * xtx_inv.diagonal()).cwiseMax(sampling.diagonal());
  return f;
}

}  // namespace detail

// Fits log V(t) = log c + lambda log t + (m-1) log(-log t) over thresholds
// with at least min_hits hits. The log term is kept only when its
// coefficient exceeds twice its standard error; otherwise m = 1 and the
// two-parameter fit is reported.
inline RlctEstimate fit_volume_curve(std::vector<double> t_grid, std::vector<std::uint64_t> counts,
                                     std::size_t num_samples, std::size_t min_hits, bool include_log_term) {
  if (t_grid.size() != counts.size()) throw std::invalid_argument("fit_volume_curve: size mismatch");
  RlctEstimate est;
  est.num_samples = num_samples;
  std::vector<double> lt, llt, y, c;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (counts[k] < min_hits) continue;
    if (include_log_term && !(t_grid[k] < 1.0)) continue;
    lt.push_back(std::log(t_grid[k]));
    llt.push_back(include_log_term ? std::log(-std::log(t_grid[k])) : 0.0);
    c.push_back(static_cast<double>(counts[k]));
    y.push_back(std::log(static_cast<double>(counts[k]) / static_cast<double>(num_samples)));
  }
  est.t_grid = std::move(t_grid);
  est.counts = std::move(counts);
  est.usable_thresholds = y.size();
  if (y.size() < 4)
    throw InsufficientResolution("volume fit: only " + std::to_string(y.size()) +
                                 " thresholds reach the minimum hit count; raise num_samples or move t_grid up");
  const auto k = static_cast<Eigen::Index>(y.size());
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), k);
  Eigen::MatrixXd X(k, include_log_term ? 3 : 2);
  for (Eigen::Index i = 0; i < k; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = lt[i];
    if (include_log_term) X(i, 2) = llt[i];
  }
  const double total = static_cast<double>(num_samples);
  detail::LinearFit fit = detail::ols_with_sampling_cov(X, yv, c, total);
  est.log_term_used = include_log_term && fit.beta(2) > 2.0 * std::sqrt(fit.variance(2));
  if (include_log_term && !est.log_term_used) fit = detail::ols_with_sampling_cov(X.leftCols(2), yv, c, total);
  est.lambda_hat = fit.beta(1);
  est.multiplicity_hat = est.log_term_used ? 1.0 + fit.beta(2) : 1.0;
  est.stderr_lambda = std::sqrt(fit.variance(1));
  est.r_squared = fit.tss > 0.0 ? 1.0 - fit.rss / fit.tss : 1.0;
  if (!(est.lambda_hat > 0.0))
    throw InsufficientResolution("volume fit: non-positive slope; the objective does not vanish on the fitted range");
  if (est.r_squared < 0.98)
    est.warnings.push_back("r_squared below 0.98: the leading pole may not dominate on the fitted range");
  return est;
}

inline constexpr std::size_t kVolumeChunk = 1u << 15;

// objective: double(const Point&) >= 0 (+inf allowed); sampler: Point(Rng&)
// drawing from the prior. Chunk c of the pool uses stream c of config.seed,
// so counts are identical for any thread count.
template <class Objective, class Sampler>
RlctEstimate estimate_rlct_volume(Objective&& objective, Sampler&& sampler, const VolumeScalingConfig& cfg) {
  cfg.validate();
  const std::size_t S = cfg.num_samples;
  const std::size_t chunks = (S + kVolumeChunk - 1) / kVolumeChunk;
  auto chunk_range = [S](std::size_t c) {
    return std::pair<std::size_t, std::size_t>{c * kVolumeChunk, std::min(S, (c + 1) * kVolumeChunk)};
  };
  auto score = [&](Rng& rng) {
    const double v = objective(sampler(rng));
    if (std::isnan(v) || v < 0.0) throw std::domain_error("estimate_rlct_volume: objective must be nonnegative");
    return v;
  };

  std::vector<double> thresholds;
  std::vector<std::uint64_t> counts;
  if (cfg.grid_mode == GridMode::fixed) {
    std::vector<double> asc(cfg.t_grid.rbegin(), cfg.t_grid.rend());
    const std::size_t T = asc.size();
    std::vector<std::vector<std::uint64_t>> bins(chunks);
    parallel_for(chunks, cfg.threads, [&](std::size_t c) {
      Rng rng = make_stream(cfg.seed, c);
      std::vector<std::uint64_t> local(T + 1, 0);
      const auto [begin, end] = chunk_range(c);
      for (std::size_t s = begin; s < end; ++s) {
        const double v = score(rng);
        ++local[static_cast<std::size_t>(std::upper_bound(asc.begin(), asc.end(), v) - asc.begin())];
      }
      bins[c] = std::move(local);
    });
    std::vector<std::uint64_t> cum(T, 0);
    std::uint64_t running = 0;
    for (std::size_t k = 0; k < T; ++k) {
      for (const auto& b : bins) running += b[k];
      cum[k] = running;
    }
    thresholds = cfg.t_grid;
    counts.assign(cum.rbegin(), cum.rend());
  } else {
    std::vector<double> values(S);
    parallel_for(chunks, cfg.threads, [&](std::size_t c) {
      Rng rng = make_stream(cfg.seed, c);
      const auto [begin, end] = chunk_range(c);
      for (std::size_t s = begin; s < end; ++s) values[s] = score(rng);
    });
    const std::vector<double> fractions =
        geometric_grid(cfg.quantile_max, static_cast<double>(cfg.min_hits) / static_cast<double>(S),
                       cfg.quantile_points);
    const auto top = static_cast<std::size_t>(std::llround(fractions.front() * static_cast<double>(S)));
    std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(top + 1), values.end());
    for (double f : fractions) {
      const auto k = static_cast<std::size_t>(std::llround(f * static_cast<double>(S)));
      const double t = 0.5 * (values[k - 1] + values[k]);
      if (!(t > 0.0) || !std::isfinite(t)) continue;
      if (!thresholds.empty() && !(t < thresholds.back())) continue;
      thresholds.push_back(t);
      counts.push_back(static_cast<std::uint64_t>(
          std::lower_bound(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(top + 1), t) - values.begin()));
    }
  }
  RlctEstimate est = fit_volume_curve(std::move(thresholds), std::move(counts), S, cfg.min_hits, cfg.include_log_term);
  est.seed = cfg.seed;
  est.grid_mode = cfg.grid_mode;
  return est;
}

// A parameter point of S(M,H) x S(H,N).
struct FactorPair {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

// Uniform prior on S(M,H) x S(H,N): every column uniform on its simplex.
struct UniformFactorSampler {
  int M, N, H;
  FactorPair operator()(Rng& rng) const {
    return {random_stochastic_matrix(M, H, 0.0, rng), random_stochastic_matrix(H, N, 0.0, rng)};
  }
};

inline void check_truth_dims(const ModelDims& dims, const GroundTruth& truth) {
  dims.validate();
  if (truth.M() != dims.M || truth.N() != dims.N || truth.H0() != dims.H0)
    throw std::invalid_argument("ground truth shape does not match (M, N, H0)");
}

// RLCT of ||AB - A0B0||^2 under the uniform prior.
inline RlctEstimate estimate_rlct_smf(const ModelDims& dims, const GroundTruth& truth, const VolumeScalingConfig& cfg) {
  check_truth_dims(dims, truth);
  const Eigen::MatrixXd target = truth.product();
  auto objective = [&target](const FactorPair& p) { return (p.A * p.B - target).squaredNorm(); };
  return estimate_rlct_volume(objective, UniformFactorSampler{dims.M, dims.N, dims.H}, cfg);
}

struct EquivalenceReport {
  RlctEstimate f;
  RlctEstimate g;
  bool consistent = false;
};

// Both objectives are scored on the same pool (same seed). Consistent iff
// |lambda_F - lambda_G| <= 2 (stderr_F + stderr_G).
template <class ObjectiveF, class ObjectiveG, class Sampler>
EquivalenceReport rlct_equivalence_check(ObjectiveF&& f, ObjectiveG&& g, Sampler&& sampler,
                                         const VolumeScalingConfig& cfg) {
  EquivalenceReport r;
  r.f = estimate_rlct_volume(f, sampler, cfg);
  r.g = estimate_rlct_volume(g, sampler, cfg);
  r.consistent = std::abs(r.f.lambda_hat - r.g.lambda_hat) <= 2.0 * (r.f.stderr_lambda + r.g.stderr_lambda);
  return r;
}

struct SandwichFit {
  double c1 = 0.0;  // min G/F over retained points
  double c2 = 0.0;  // max G/F over retained points
  std::size_t points = 0;
};

// Empirical sandwich constants c1 F <= G <= c2 F on the region {0 < F <= f_max}.
template <class ObjectiveF, class ObjectiveG, class Sampler>
SandwichFit sandwich_constants(ObjectiveF&& f, ObjectiveG&& g, Sampler&& sampler, std::size_t num_samples,
                               double f_max, std::uint64_t seed) {
  if (!(f_max > 0.0)) throw std::invalid_argument("sandwich_constants: f_max must be positive");
  SandwichFit fit;
  fit.c1 = std::numeric_limits<double>::infinity();
  Rng rng = make_stream(seed, 0);
  for (std::size_t s = 0; s < num_samples; ++s) {
    const auto p = sampler(rng);
    const double fv = f(p);
    if (!(fv > 0.0 && fv <= f_max)) continue;
    const double ratio = g(p) / fv;
    fit.c1 = std::min(fit.c1, ratio);
    fit.c2 = std::max(fit.c2, ratio);
    ++fit.points;
  }
  if (fit.points == 0) throw InsufficientResolution("sandwich_constants: no sample fell in {F <= f_max}");
  return fit;
}

struct SlopeFit {
  double lambda_hat = 0.0;
  double intercept = 0.0;
  double stderr_lambda = 0.0;
};

// Least-squares slope of (F_n - n S_n) against log n.
inline SlopeFit estimate_rlct_free_energy(const std::vector<std::pair<double, double>>& pairs) {
  std::vector<double> ns;
  for (const auto& p : pairs) {
    if (!(p.first >= 1.0)) throw std::invalid_argument("estimate_rlct_free_energy: n must be >= 1");
    ns.push_back(p.first);
  }
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  if (ns.size() < 2) throw std::invalid_argument("estimate_rlct_free_energy: degenerate design (all n equal)");
  if (ns.size() < 4 || ns.back() / ns.front() < 100.0)
    throw std::invalid_argument("estimate_rlct_free_energy: need >= 4 distinct n spanning >= 2 decades");
  const auto k = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd X(k, 2);
  Eigen::VectorXd y(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::log(pairs[static_cast<std::size_t>(i)].first);
    y(i) = pairs[static_cast<std::size_t>(i)].second;
  }
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
  const Eigen::VectorXd beta = xtx_inv * X.transpose() * y;
  const double rss = (y - X * beta).squaredNorm();
  const double s2 = k > 2 ? rss / static_cast<double>(k - 2) : 0.0;
  return {beta(1), beta(0), std::sqrt(s2 * xtx_inv(1, 1))};
}

struct GenErrorEstimate {
  double lambda_hat = 0.0;
  double ci_halfwidth = 0.0;  // 95% normal approximation, in lambda units
};

inline constexpr double kZ95 = 1.959963984540054;

// lambda_hat = n * mean(G_n) over independent replicates at fixed n.
inline GenErrorEstimate estimate_rlct_gen_error(const std::vector<double>& g_values, double n) {
  if (!(n >= 1.0)) throw std::invalid_argument("estimate_rlct_gen_error: n must be >= 1");
  if (g_values.empty()) throw std::invalid_argument("estimate_rlct_gen_error: no replicates");
  if (g_values.size() < 30) throw std::invalid_argument("estimate_rlct_gen_error: need >= 30 replicates");
  const double R = static_cast<double>(g_values.size());
  double mean = 0.0;
  for (double g : g_values) mean += g;
  mean /= R;
  double ss = 0.0;
  for (double g : g_values) ss += (g - mean) * (g - mean);
  const double sd = std::sqrt(ss / (R - 1.0));
  return {n * mean, kZ95 * n * sd / std::sqrt(R)};
}

inline nlohmann::json estimate_to_json(const RlctEstimate& e) {
  nlohmann::json j;
  j["lambda_hat"] = e.lambda_hat;
  j["multiplicity_hat"] = e.multiplicity_hat;
  j["stderr"] = e.stderr_lambda;
  j["r_squared"] = e.r_squared;
  j["log_term_used"] = e.log_term_used;
  j["usable_thresholds"] = e.usable_thresholds;
  j["grid_mode"] = to_string(e.grid_mode);
  j["t_grid"] = e.t_grid;
  j["counts"] = e.counts;
  j["seed"] = e.seed;
  j["num_samples"] = e.num_samples;
  j["warnings"] = e.warnings;
  return j;
}

inline std::string counts_to_csv(const RlctEstimate& e) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "t,count,volume\n";
  for (std::size_t k = 0; k < e.t_grid.size(); ++k)
    os << e.t_grid[k] << ',' << e.counts[k] << ','
       << static_cast<double>(e.counts[k]) / static_cast<double>(e.num_samples) << '\n';
  return os.str();
}

}  // namespace smfrlct
