#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace smfrlct {

struct PosteriorDiagnostics {
  double split_rhat = 1.0;        // on the log-likelihood trace after burn-in
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();  // Metropolis only
  double final_proposal_scale = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> loglik_trace;
  std::vector<std::string> warnings;
};

// predictive is M x N; column j is the Bayesian predictive word
// distribution of document j (or the posterior mean of AB for SMF data).
struct PosteriorSummary {
  Eigen::MatrixXd predictive;
  std::size_t n_samples = 0;
  PosteriorDiagnostics diagnostics;
};

inline constexpr double kRhatWarning = 1.1;

// Split-chain potential scale reduction of a single trace: the trace is cut
// into two halves that are treated as separate chains.
inline double split_rhat(const std::vector<double>& trace) {
  const std::size_t half = trace.size() / 2;
  if (half < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t off = trace.size() - 2 * half;
  double mean[2], var[2];
  for (int c = 0; c < 2; ++c) {
    const double* x = trace.data() + off + static_cast<std::size_t>(c) * half;
    double m = 0.0;
    for (std::size_t i = 0; i < half; ++i) m += x[i];
    m /= static_cast<double>(half);
    double v = 0.0;
    for (std::size_t i = 0; i < half; ++i) v += (x[i] - m) * (x[i] - m);
    mean[c] = m;
    var[c] = v / static_cast<double>(half - 1);
  }
  const double n = static_cast<double>(half);
  const double W = 0.5 * (var[0] + var[1]);
  const double grand = 0.5 * (mean[0] + mean[1]);
  const double B = n * ((mean[0] - grand) * (mean[0] - grand) + (mean[1] - grand) * (mean[1] - grand));
  if (W <= 0.0) return B <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(((n - 1.0) / n * W + B / n) / W);
}

}  // namespace smfrlct
