// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Seeds are fixed here once and never tuned against outcomes.

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "smfrlct/experiments/commands.hpp"
#include "smfrlct/smfrlct.hpp"

using namespace smfrlct;
using Eigen::MatrixXd;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20261015;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int p = 4) {
  std::ostringstream os;
  os.precision(p);
  os << v;
  return os.str();
}

struct Cube2 {
  std::array<double, 2> operator()(Rng& rng) const {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return {u(rng), u(rng)};
  }
};

GroundTruth truth_2211() {
  MatrixXd A0(2, 1);
  A0 << 0.6, 0.4;
  return make_ground_truth(A0, MatrixXd::Ones(1, 2), 0.1);
}

GroundTruth truth_2222() {
  MatrixXd A0(2, 2), B0(2, 2);
  A0 << 0.7, 0.2, 0.3, 0.8;
  B0 << 0.8, 0.3, 0.2, 0.7;
  return make_ground_truth(A0, B0, 0.1);
}

GroundTruth truth_3322() {
  MatrixXd A0(3, 2), B0(2, 3);
  A0 << 0.8, 0.1, 0.1, 0.1, 0.1, 0.8;
  B0 << 0.8, 0.5, 0.2, 0.2, 0.5, 0.8;
  return make_ground_truth(A0, B0, 0.05);
}

GroundTruth truth_4221() {
  MatrixXd A0(4, 1);
  A0 << 0.4, 0.3, 0.2, 0.1;
  return make_ground_truth(A0, MatrixXd::Ones(1, 2), 0.05);
}

// 1. Exact rationals against termwise integer oracles.
Outcome formula_exactness() {
  int checked = 0, bad = 0;
  for (std::int64_t M = 2; M <= 8; ++M)
    for (std::int64_t N = 2; N <= 8; ++N) {
      const ModelDims one{static_cast<int>(M), static_cast<int>(N), 1, 1};
      const ModelDims two{static_cast<int>(M), static_cast<int>(N), 2, 2};
      const ModelDims mix{static_cast<int>(M), static_cast<int>(N), 2, 1};
      const Rational single(M - 1, 2), pair(2 * M + N - 4, 2);
      const Rational min_form = std::min(Rational(M - 1), Rational(M + N - 2, 2));
      bad += rlct_upper_bound(one) != single;
      bad += !rlct_exact(one) || rlct_exact(one)->value != single;
      bad += rlct_upper_bound(two) != pair;
      bad += !rlct_exact(two) || rlct_exact(two)->value != pair;
      bad += !rlct_exact(mix) || rlct_exact(mix)->value != min_form;
      for (std::int64_t H0 = 1; H0 <= 4; ++H0)
        for (std::int64_t H = H0; H <= 5; ++H) {
          const std::int64_t twice = (M - 1) + (H0 - 1) * (M + N - 3) + (H - H0) * std::min(M - 1, N);
          bad += rlct_upper_bound({static_cast<int>(M), static_cast<int>(N), static_cast<int>(H), static_cast<int>(H0)}) !=
                 Rational(twice, 2);
          ++checked;
        }
      checked += 5;
    }
  return {bad == 0, std::to_string(checked) + " rational identities, " + std::to_string(bad) + " mismatches"};
}

// 2. lambda_bar <= d/2 with equality exactly at H = H0 = 1.
Outcome tightness() {
  int checked = 0, bad = 0;
  for (int M = 2; M <= 8; ++M)
    for (int N = 2; N <= 8; ++N)
      for (int H0 = 1; H0 <= 4; ++H0)
        for (int H = H0; H <= 5; ++H) {
          const Rational half_d(H * (M + N) - H - N, 2);
          const Rational b = rlct_upper_bound({M, N, H, H0});
          bad += !(b <= half_d) || ((b == half_d) != (H == 1 && H0 == 1));
          ++checked;
        }
  return {bad == 0, std::to_string(checked) + " dims, " + std::to_string(bad) + " violations"};
}

// 3. Volume-scaling estimator on analytically known objectives.
Outcome calibration() {
  VolumeScalingConfig cfg;
  cfg.num_samples = 2'000'000;
  cfg.seed = kSeed + 3;
  const RlctEstimate a = estimate_rlct_volume([](const std::array<double, 2>& p) { return p[0] * p[0]; }, Cube2{}, cfg);
  const RlctEstimate b =
      estimate_rlct_volume([](const std::array<double, 2>& p) { return p[0] * p[0] + p[1] * p[1]; }, Cube2{}, cfg);
  const RlctEstimate c =
      estimate_rlct_volume([](const std::array<double, 2>& p) { return p[0] * p[0] * p[1] * p[1]; }, Cube2{}, cfg);
  const bool pass = std::abs(a.lambda_hat - 0.5) <= 0.05 && std::abs(b.lambda_hat - 1.0) <= 0.05 &&
                    std::abs(c.lambda_hat - 0.5) <= 0.05 && c.multiplicity_hat >= 1.5 && c.multiplicity_hat <= 2.5;
  return {pass, "theta^2 " + fmt(a.lambda_hat) + ", theta1^2+theta2^2 " + fmt(b.lambda_hat) + ", theta1^2 theta2^2 " +
                    fmt(c.lambda_hat) + " (m_hat " + fmt(c.multiplicity_hat) + ")"};
}

// 4. estimate_rlct_smf against the exact values.
Outcome exact_value_oracle() {
  struct Case {
    ModelDims dims;
    GroundTruth truth;
    double target, tol;
    std::size_t samples;
    std::vector<double> grid;
  };
  const std::vector<Case> cases{
      {{2, 2, 1, 1}, truth_2211(), 0.5, 0.10, 2'000'000, geometric_grid(1e-2, 1e-6, 24)},
      {{2, 2, 2, 2}, truth_2222(), 1.0, 0.15, 2'000'000, geometric_grid(1e-2, 1e-6, 24)},
      {{3, 3, 2, 2}, truth_3322(), 2.5, 0.25, 10'000'000, geometric_grid(5e-2, 1e-3, 16)},
      {{4, 2, 2, 1}, truth_4221(), 2.0, 0.25, 10'000'000, geometric_grid(5e-2, 1e-3, 16)},
  };
  bool pass = true;
  std::string detail;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const Case& c = cases[k];
    VolumeScalingConfig cfg;
    cfg.num_samples = c.samples;
    cfg.t_grid = c.grid;
    cfg.seed = kSeed + 40 + k;
    const RlctEstimate e = estimate_rlct_smf(c.dims, c.truth, cfg);
    const bool ok = std::abs(e.lambda_hat - c.target) <= c.tol;
    pass = pass && ok;
    detail += (k ? "; " : "") + to_string(c.dims) + " " + fmt(e.lambda_hat) + " vs " + fmt(c.target);
  }
  detail += "; (4,2,2,1) adjudicated toward the min form";
  return {pass, detail};
}

// 5. kl_topic and sq_error share an RLCT; sandwich ratios are stable.
Outcome equivalence() {
  bool pass = true;
  std::string detail;
  for (const GroundTruth& t : {truth_2211(), truth_2222()}) {
    const int H = static_cast<int>(t.H0());
    const UniformFactorSampler sampler{static_cast<int>(t.M()), static_cast<int>(t.N()), H};
    auto kl = [&t](const FactorPair& p) { return kl_topic(p.A, p.B, t); };
    auto sq = [&t](const FactorPair& p) { return sq_error(p.A, p.B, t); };
    VolumeScalingConfig cfg;
    cfg.seed = kSeed + 50 + static_cast<std::uint64_t>(H);
    const EquivalenceReport r = rlct_equivalence_check(kl, sq, sampler, cfg);
    std::vector<SandwichFit> fits;
    for (std::uint64_t s = 0; s < 3; ++s)
      fits.push_back(sandwich_constants(sq, kl, sampler, 1'000'000, 0.01, kSeed + 55 + s));
    bool stable = true;
    for (const auto& f : fits) {
      stable = stable && f.c1 > 0.0 && std::isfinite(f.c2) && f.c2 >= f.c1;
      stable = stable && std::abs(f.c1 - fits[0].c1) <= 0.2 * fits[0].c1 && std::abs(f.c2 - fits[0].c2) <= 0.2 * fits[0].c2;
    }
    pass = pass && r.consistent && stable;
    detail += (detail.empty() ? "" : "; ") + std::string("H=") + std::to_string(H) + " KL " + fmt(r.f.lambda_hat) +
              " Phi " + fmt(r.g.lambda_hat) + (r.consistent ? " consistent" : " INCONSISTENT") + ", c1 " +
              fmt(fits[0].c1, 3) + ".." + fmt(fits[2].c1, 3) + " c2 " + fmt(fits[0].c2, 3) + ".." + fmt(fits[2].c2, 3);
  }
  return {pass, detail};
}

// 6. n E[G_n] from the collapsed Gibbs posterior.
Outcome gen_error_route() {
  ReplicateConfig rc;
  rc.replicates = 200;
  rc.master_seed = kSeed + 6;
  const GenErrorSummary a = expected_gen_error(truth_2211(), 1, 1000, rc, GibbsConfig{});
  rc.master_seed = kSeed + 7;
  const GenErrorSummary b = expected_gen_error(truth_3322(), 2, 2000, rc, GibbsConfig{});
  const bool pass = std::abs(a.scaled_mean() - 0.5) <= 0.15 && b.scaled_mean() <= 2.5 + 3.0 * b.scaled_ci() &&
                    a.failure_fraction() == 0.0 && b.failure_fraction() == 0.0;
  return {pass, "(2,2,1,1) n*G " + fmt(a.scaled_mean()) + " +- " + fmt(a.scaled_ci(), 3) + "; (3,3,2,2) n*G " +
                    fmt(b.scaled_mean()) + " +- " + fmt(b.scaled_ci(), 3) + " vs 2.5"};
}

// 7. Slope of F_n - n S_n against log n by exact quadrature.
Outcome free_energy_route() {
  const GroundTruth t = truth_2211();
  std::vector<std::pair<double, double>> pts;
  for (std::int64_t n = 50; n <= 6400; n *= 2)
    for (std::uint64_t r = 0; r < 20; ++r) {
      Rng rng = make_stream(stream_seed(kSeed + 8, static_cast<std::uint64_t>(n)), r);
      const WordDataset d = generate_dataset(t, n, rng);
      const FreeEnergyResult f = marginal_likelihood_exact(d, 1, 1.0, 1.0);
      pts.emplace_back(static_cast<double>(n), f.F - static_cast<double>(n) * empirical_entropy(t, d));
    }
  const SlopeFit s = estimate_rlct_free_energy(pts);
  return {std::abs(s.lambda_hat - 0.5) <= 0.1,
          "slope " + fmt(s.lambda_hat) + " +- " + fmt(s.stderr_lambda, 3) + " over " + std::to_string(pts.size()) + " points"};
}

// 8. Bernoulli KL sandwich and the Bernoulli SMF generalization error.
Outcome bernoulli() {
  const BernoulliSandwich s = bernoulli_sandwich(0.1, 0.9, 81);
  bool grid_ok = s.c1 > 0.0 && std::isfinite(s.c2);
  for (int p = 0; p <= 80 && grid_ok; ++p)
    for (int q = 0; q <= 80; ++q) {
      if (p == q) continue;
      const double a = 0.1 + 0.01 * p, b = 0.1 + 0.01 * q, d2 = (b - a) * (b - a);
      const double kl = a * std::log(a / b) + (1 - a) * std::log((1 - a) / (1 - b));
      if (kl < s.c1 * d2 * (1 - 1e-9) || kl > s.c2 * d2 * (1 + 1e-9)) grid_ok = false;
    }
  ReplicateConfig rc;
  rc.replicates = 100;
  rc.master_seed = kSeed + 9;
  const GenErrorSummary g = expected_gen_error_smf(truth_2211(), SmfModel::bernoulli, 1, 500, rc, MetropolisConfig{});
  const bool pass = grid_ok && g.scaled_mean() <= 0.5 + 3.0 * g.scaled_ci() && g.failure_fraction() == 0.0;
  return {pass, "c1 " + fmt(s.c1) + " c2 " + fmt(s.c2) + "; n*G " + fmt(g.scaled_mean()) + " +- " + fmt(g.scaled_ci(), 3)};
}

// 9. Markov-chain KL: identity moment gives Phi/2; eigenvalue sandwich.
Outcome markov() {
  const GroundTruth t = truth_3322();
  Rng rng(kSeed + 10);
  double worst = 0.0;
  bool sandwich = true;
  for (int k = 0; k < 1000; ++k) {
    const MatrixXd A = random_stochastic_matrix(3, 2, 0.0, rng), B = random_stochastic_matrix(2, 3, 0.0, rng);
    const MatrixXd D = A * B - t.product();
    const double phi = D.squaredNorm();
    worst = std::max(worst, std::abs(kl_markov(A, B, t, MatrixXd::Identity(3, 3)) - 0.5 * phi));
    const Eigen::HouseholderQR<MatrixXd> qr(random_stochastic_matrix(3, 3, 0.0, rng) + MatrixXd::Identity(3, 3));
    const MatrixXd Q = qr.householderQ();
    const MatrixXd X = Q * Eigen::Vector3d(0.5, 2.0, 1.0).asDiagonal() * Q.transpose();
    const MatrixXd Xs = 0.5 * (X + X.transpose());
    const double kl = kl_markov(A, B, t, Xs);
    sandwich = sandwich && kl >= 0.25 * phi - 1e-14 && kl <= 1.0 * phi + 1e-14;
  }
  return {worst <= 1e-12 && sandwich, "max |KL - Phi/2| " + fmt(worst, 3) + (sandwich ? ", sandwich holds" : ", sandwich FAILS")};
}

// 10. Two sweeps with identical config and seed write identical JSON.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "smfrlct_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const json cfg = {{"dims", {{"M", 2}, {"N", 2}, {"H", 1}, {"H0", 1}}},
                    {"truth", {{"A0", {{0.6}, {0.4}}}, {"B0", {{1.0, 1.0}}}}},
                    {"n_grid", {250, 1000}},
                    {"replicates", 50},
                    {"sampler", {{"sweeps", 100}}},
                    {"master_seed", kSeed + 11}};
  write_file(root / "config.json", cfg.dump(2));
  std::ostringstream sink;
  std::vector<std::string> outputs;
  for (const char* run : {"first", "second"}) {
    experiments::RunOptions o;
    o.config = root / "config.json";
    o.out = root / run;
    if (experiments::cmd_sweep(o, sink, sink) != experiments::kExitOk) return {false, "sweep failed"};
    outputs.push_back(read_file(root / run / "summary.json") + read_file(root / run / "curve.csv") +
                      read_file(experiments::point_path(root / run, 250)) +
                      read_file(experiments::point_path(root / run, 1000)));
  }
  return {outputs[0] == outputs[1], std::to_string(outputs[0].size()) + " bytes compared"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"formula exactness", formula_exactness},
      {"tightness", tightness},
      {"estimator calibration", calibration},
      {"exact values by volume scaling", exact_value_oracle},
      {"KL / squared-error equivalence", equivalence},
      {"generalization-error route", gen_error_route},
      {"free-energy route", free_energy_route},
      {"Bernoulli SMF", bernoulli},
      {"Markov-chain KL", markov},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k + 1 << ": " << criteria[k].first << " - " << o.detail
              << " [" << fmt(secs, 3) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
