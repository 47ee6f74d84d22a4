#pragma once

// Generalization error G_n of a posterior predictive and its expectation
// over independent training sets. Replicate r draws its data and runs its
// chain on stream r of the master seed; results are stored by index, so
// the summary does not depend on the thread count.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "smfrlct/dataset.hpp"
#include "smfrlct/estimator.hpp"
#include "smfrlct/gibbs.hpp"
#include "smfrlct/kernels.hpp"
#include "smfrlct/parallel.hpp"
#include "smfrlct/posterior.hpp"
#include "smfrlct/random.hpp"
#include "smfrlct/smf_posterior.hpp"

namespace smfrlct {

// G_n = sum_j q'_j KL(q(.|j) || p*(.|j)). +inf when the predictive puts zero
// mass on a supported cell.
inline double generalization_error(const GroundTruth& truth, const Eigen::MatrixXd& predictive) {
  const Eigen::MatrixXd C = truth.product();
  if (predictive.rows() != C.rows() || predictive.cols() != C.cols())
    throw std::invalid_argument("generalization_error: predictive shape differs from A0 B0");
  return weighted_column_kl(C, predictive, truth.doc_dist);
}

inline double generalization_error(const GroundTruth& truth, const PosteriorSummary& s) {
  return generalization_error(truth, s.predictive);
}

// G_n for matrix-valued observations whose predictive is summarized by its
// mean: half the squared error (unit Gaussian) or the entrywise Bernoulli KL.
inline double generalization_error_smf(const GroundTruth& truth, SmfModel model, const Eigen::MatrixXd& mean) {
  const Eigen::MatrixXd C = truth.product();
  if (mean.rows() != C.rows() || mean.cols() != C.cols())
    throw std::invalid_argument("generalization_error_smf: shape mismatch");
  if (model == SmfModel::gaussian) return 0.5 * (C - mean).squaredNorm();
  return kl_bernoulli_means(C, mean);
}

struct ReplicateResult {
  std::size_t index = 0;
  double gen_error = std::numeric_limits<double>::quiet_NaN();
  double entropy = std::numeric_limits<double>::quiet_NaN();  // S_n, topic model only
  double split_rhat = std::numeric_limits<double>::quiet_NaN();
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  bool divergent = false;
  std::string error;
  std::vector<std::string> warnings;
};

struct GenErrorSummary {
  std::int64_t n = 0;
  double mean = 0.0;          // mean G_n over finite replicates
  double ci_halfwidth = 0.0;  // 1.96 sd / sqrt(R), in G_n units
  std::size_t used = 0;
  std::size_t divergent = 0;
  std::size_t failed = 0;
  std::vector<ReplicateResult> replicates;

  double scaled_mean() const { return static_cast<double>(n) * mean; }
  double scaled_ci() const { return static_cast<double>(n) * ci_halfwidth; }
  double failure_fraction() const {
    return replicates.empty() ? 0.0 : static_cast<double>(failed + divergent) / static_cast<double>(replicates.size());
  }
};

// Replaces the posterior fit; receives the training data and the replicate's
// RNG stream and returns an M x N predictive.
using PredictiveFn = std::function<Eigen::MatrixXd(const WordDataset&, Rng&)>;

struct ReplicateConfig {
  std::size_t replicates = 200;
  std::uint64_t master_seed = 0;
  unsigned threads = 1;
  DocSampling doc_sampling = DocSampling::sampled;

  void validate() const {
    if (replicates < 30) throw std::invalid_argument("expected_gen_error: need >= 30 replicates");
  }
};

namespace detail {

inline void aggregate(GenErrorSummary& s) {
  double sum = 0.0;
  for (const auto& r : s.replicates) {
    if (!r.ok) {
      ++s.failed;
      continue;
    }
    if (r.divergent) {
      ++s.divergent;
      continue;
    }
    sum += r.gen_error;
    ++s.used;
  }
  if (s.used == 0) throw std::runtime_error("expected_gen_error: every replicate failed or diverged");
  s.mean = sum / static_cast<double>(s.used);
  double ss = 0.0;
  for (const auto& r : s.replicates)
    if (r.ok && !r.divergent) ss += (r.gen_error - s.mean) * (r.gen_error - s.mean);
  const double R = static_cast<double>(s.used);
  s.ci_halfwidth = s.used > 1 ? kZ95 * std::sqrt(ss / (R - 1.0)) / std::sqrt(R) : 0.0;
}

template <class Body>
GenErrorSummary run_replicates(std::int64_t n, const ReplicateConfig& rc, Body&& body) {
  rc.validate();
  if (n < 1) throw std::invalid_argument("expected_gen_error: n must be >= 1");
  GenErrorSummary s;
  s.n = n;
  s.replicates.resize(rc.replicates);
  parallel_for(rc.replicates, rc.threads, [&](std::size_t r) {
    ReplicateResult& out = s.replicates[r];
    out.index = r;
    Rng rng = make_stream(rc.master_seed, r);
    try {
      body(rng, out);
      out.divergent = is_divergent(out.gen_error);
      out.ok = !std::isnan(out.gen_error);
      if (!out.ok) out.error = "generalization error is NaN";
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  });
  aggregate(s);
  return s;
}

}  // namespace detail

// Topic model: generate_dataset -> collapsed_gibbs (or the injected
// predictive) -> generalization_error, per replicate.
inline GenErrorSummary expected_gen_error(const GroundTruth& truth, int H, std::int64_t n, const ReplicateConfig& rc,
                                          const GibbsConfig& gibbs, const PredictiveFn& predictive = {}) {
  return detail::run_replicates(n, rc, [&](Rng& rng, ReplicateResult& out) {
    const WordDataset data = generate_dataset(truth, n, rng, rc.doc_sampling);
    out.entropy = empirical_entropy(truth, data);
    if (predictive) {
      out.gen_error = generalization_error(truth, predictive(data, rng));
      return;
    }
    const PosteriorSummary post = collapsed_gibbs(data, H, gibbs, rng);
    out.gen_error = generalization_error(truth, post);
    out.split_rhat = post.diagnostics.split_rhat;
    out.warnings = post.diagnostics.warnings;
  });
}

// Matrix-valued SMF observations with the Metropolis posterior.
inline GenErrorSummary expected_gen_error_smf(const GroundTruth& truth, SmfModel model, int H, std::int64_t n,
                                              const ReplicateConfig& rc, const MetropolisConfig& mh) {
  return detail::run_replicates(n, rc, [&](Rng& rng, ReplicateResult& out) {
    const auto data = generate_smf_dataset(truth, n, model, rng);
    const PosteriorSummary post = mh_posterior_smf(data, model, H, mh, rng);
    out.gen_error = generalization_error_smf(truth, model, post.predictive);
    out.split_rhat = post.diagnostics.split_rhat;
    out.acceptance_rate = post.diagnostics.acceptance_rate;
    out.warnings = post.diagnostics.warnings;
  });
}

inline nlohmann::json replicate_to_json(const ReplicateResult& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["index"] = r.index;
  j["G_n"] = num(r.gen_error);
  j["S_n"] = num(r.entropy);
  j["split_rhat"] = num(r.split_rhat);
  j["acceptance_rate"] = num(r.acceptance_rate);
  j["ok"] = r.ok;
  j["divergent"] = r.divergent;
  if (!r.error.empty()) j["error"] = r.error;
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace smfrlct
