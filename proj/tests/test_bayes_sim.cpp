#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "smfrlct/dataset.hpp"
#include "smfrlct/free_energy.hpp"
#include "smfrlct/gen_error.hpp"
#include "smfrlct/gibbs.hpp"
#include "smfrlct/smf_posterior.hpp"

using namespace smfrlct;
using Eigen::MatrixXd;

namespace {

GroundTruth truth_2211() {
  MatrixXd A0(2, 1);
  A0 << 0.6, 0.4;
  return make_ground_truth(A0, MatrixXd::Ones(1, 2), 0.05);
}

GroundTruth truth_3322() {
  MatrixXd A0(3, 2), B0(2, 3);
  A0 << 0.8, 0.1, 0.1, 0.1, 0.1, 0.8;
  B0 << 0.8, 0.5, 0.2, 0.2, 0.5, 0.8;
  return make_ground_truth(A0, B0, 0.05);
}

double weighted_tv(const GroundTruth& t, const MatrixXd& p) {
  const MatrixXd C = t.product();
  double tv = 0.0;
  for (Eigen::Index j = 0; j < C.cols(); ++j) tv += t.doc_dist(j) * 0.5 * (C.col(j) - p.col(j)).cwiseAbs().sum();
  return tv;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

TEST(Dataset, RejectsEmptySample) {
  Rng rng(1);
  EXPECT_THROW(generate_dataset(truth_2211(), 0, rng), std::invalid_argument);
}

TEST(Dataset, JointFrequenciesPassChiSquare) {
  const GroundTruth t = truth_3322();
  Rng rng(2);
  const std::int64_t n = 100000;
  const WordDataset d = generate_dataset(t, n, rng);
  EXPECT_EQ(d.counts.sum(), n);
  const MatrixXd C = t.product();
  double chi2 = 0.0;
  for (Eigen::Index j = 0; j < 3; ++j)
    for (Eigen::Index i = 0; i < 3; ++i) {
      const double e = static_cast<double>(n) * t.doc_dist(j) * C(i, j);
      chi2 += (static_cast<double>(d.counts(i, j)) - e) * (static_cast<double>(d.counts(i, j)) - e) / e;
    }
  EXPECT_LT(chi2, 20.090);  // 99th percentile of chi-square with 8 degrees of freedom
}

TEST(Dataset, SingleTopicFrequenciesWithinBands) {
  const GroundTruth t = truth_2211();
  Rng rng(3);
  const WordDataset d = generate_dataset(t, 100000, rng);
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double nj = static_cast<double>(d.doc_total(j));
    for (Eigen::Index i = 0; i < 2; ++i) {
      const double p = t.A0(i, 0);
      EXPECT_NEAR(static_cast<double>(d.counts(i, j)) / nj, p, 3.0 * std::sqrt(p * (1 - p) / nj));
    }
  }
}

TEST(Dataset, FixedQuotaUsesLargestRemainder) {
  Eigen::VectorXd q(3);
  q << 0.5, 0.3, 0.2;
  EXPECT_EQ(detail::quota_split(7, q), (std::vector<std::int64_t>{4, 2, 1}));
  const GroundTruth t = truth_3322();
  Rng rng(4);
  const WordDataset d = generate_dataset(t, 10, rng, DocSampling::fixed_quota);
  EXPECT_EQ(d.doc_totals(), (Eigen::Matrix<std::int64_t, 3, 1>(4, 3, 3)));
}

TEST(Dataset, CsvRoundTripAndErrors) {
  Rng rng(5);
  const WordDataset d = generate_dataset(truth_3322(), 50, rng);
  const WordDataset back = dataset_from_csv(dataset_to_csv(d));
  EXPECT_EQ(back.counts, d.counts);
  EXPECT_EQ(back.n, 50);
  EXPECT_THROW(dataset_from_csv("word,doc0\n0,x\n"), std::runtime_error);
  EXPECT_THROW(dataset_from_csv("word,doc0,doc1\n0,1\n"), std::runtime_error);
  EXPECT_EQ(dataset_sidecar(d, "t.json")["M"], 3);
}

TEST(Entropy, UniformWordsGiveLogM) {
  MatrixXd A0 = MatrixXd::Constant(3, 1, 1.0 / 3.0);
  A0(2, 0) = 1.0 - 2.0 / 3.0;
  const GroundTruth t = make_ground_truth(A0, MatrixXd::Ones(1, 2), 0.05);
  Rng rng(6);
  for (std::int64_t n : {1, 17, 1000}) EXPECT_NEAR(empirical_entropy(t, generate_dataset(t, n, rng)), std::log(3.0), 1e-12);
}

TEST(Entropy, LawOfLargeNumbers) {
  const GroundTruth t = truth_2211();
  const MatrixXd C = t.product();
  const double h = conditional_entropy(t);
  double second = 0.0;
  for (Eigen::Index j = 0; j < 2; ++j)
    for (Eigen::Index i = 0; i < 2; ++i) second += t.doc_dist(j) * C(i, j) * std::log(C(i, j)) * std::log(C(i, j));
  const double n = 100000;
  Rng rng(7);
  EXPECT_NEAR(empirical_entropy(t, generate_dataset(t, 100000, rng)), h, 3.0 * std::sqrt((second - h * h) / n));
}

TEST(Gibbs, SingleTopicPredictiveIsExact) {
  const GroundTruth t = truth_3322();
  Rng rng(8);
  const WordDataset d = generate_dataset(t, 300, rng);
  GibbsConfig cfg;
  cfg.sweeps = 50;
  cfg.beta = 0.5;
  const PosteriorSummary s = collapsed_gibbs(d, 1, cfg, rng);
  for (Eigen::Index j = 0; j < 3; ++j)
    for (Eigen::Index i = 0; i < 3; ++i)
      EXPECT_NEAR(s.predictive(i, j), (static_cast<double>(d.counts.row(i).sum()) + 0.5) / (300 + 3 * 0.5), 1e-12);
}

TEST(Gibbs, PredictiveIsPositiveAndNormalized) {
  const GroundTruth t = truth_3322();
  Rng rng(9);
  CountMatrix c = generate_dataset(t, 200, rng).counts;
  c.col(2).setZero();  // a document with no words
  const WordDataset d = make_dataset(c);
  GibbsConfig cfg;
  cfg.sweeps = 200;
  const PosteriorSummary s = collapsed_gibbs(d, 3, cfg, rng);
  EXPECT_GT(s.predictive.minCoeff(), 0.0);
  EXPECT_LE((s.predictive.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
  EXPECT_EQ(s.n_samples, 32u);
}

TEST(Gibbs, CountTablesStayConsistent) {
  Rng rng(10);
  const WordDataset d = generate_dataset(truth_3322(), 150, rng);
  GibbsState st(d, 3, 1.0, 1.0);
  st.initialize(rng);
  for (int s = 0; s < 20; ++s) {
    st.sweep(rng);
    ASSERT_TRUE(st.consistent());
  }
}

TEST(Gibbs, RelabelingLeavesPredictiveUnchanged) {
  Rng rng(11);
  const WordDataset d = generate_dataset(truth_3322(), 120, rng);
  std::vector<int> labels(120), swapped(120);
  std::uniform_int_distribution<int> pick(0, 1);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    labels[k] = pick(rng);
    swapped[k] = 1 - labels[k];
  }
  GibbsState a(d, 2, 1.0, 1.0), b(d, 2, 1.0, 1.0);
  a.initialize(labels);
  b.initialize(swapped);
  EXPECT_LT((a.conditional_predictive() - b.conditional_predictive()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(a.log_joint(), b.log_joint(), 1e-9);
  // Chains started from mirrored labels with the same stream stay mirrored.
  Rng ra(12), rb(12);
  for (int s = 0; s < 10; ++s) {
    a.sweep(ra);
    b.sweep(rb);
  }
  EXPECT_LT((a.conditional_predictive() - b.conditional_predictive()).cwiseAbs().maxCoeff(), 0.2);
}

TEST(Gibbs, ConsistentAtLargeN) {
  const GroundTruth t = truth_2211();
  Rng rng(13);
  const WordDataset d = generate_dataset(t, 10000, rng);
  GibbsConfig cfg;
  cfg.sweeps = 100;
  EXPECT_LT(weighted_tv(t, collapsed_gibbs(d, 1, cfg, rng).predictive), 0.02);
  EXPECT_LT(weighted_tv(t, collapsed_gibbs(d, 2, cfg, rng).predictive), 0.02);
}

TEST(Gibbs, ConfigValidation) {
  Rng rng(14);
  const WordDataset d = generate_dataset(truth_2211(), 10, rng);
  GibbsConfig cfg;
  cfg.thin = 0;
  EXPECT_THROW(collapsed_gibbs(d, 2, cfg, rng), std::invalid_argument);
  EXPECT_THROW(collapsed_gibbs(d, 0, GibbsConfig{}, rng), std::invalid_argument);
}

TEST(SplitRhat, StationaryVersusTrending) {
  Rng rng(15);
  std::normal_distribution<double> g;
  std::vector<double> flat(1000), trend(1000);
  for (std::size_t k = 0; k < 1000; ++k) {
    flat[k] = g(rng);
    trend[k] = g(rng) + 0.01 * static_cast<double>(k);
  }
  EXPECT_LT(split_rhat(flat), 1.05);
  EXPECT_GT(split_rhat(trend), kRhatWarning);
  EXPECT_TRUE(std::isnan(split_rhat({1.0, 2.0})));
}

TEST(GenError, ZeroAtTruthAndClosedForm) {
  const GroundTruth t = truth_3322();
  EXPECT_EQ(generalization_error(t, t.product()), 0.0);
  MatrixXd A0(2, 1);
  A0 << 0.5, 0.5;
  const GroundTruth one_doc = make_ground_truth(A0, MatrixXd::Ones(1, 1), 0.05);
  MatrixXd p(2, 1);
  p << 0.25, 0.75;
  EXPECT_NEAR(generalization_error(one_doc, p), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-15);
  EXPECT_THROW(generalization_error(one_doc, MatrixXd::Ones(1, 1)), std::invalid_argument);
  p << 0.0, 1.0;
  EXPECT_TRUE(is_divergent(generalization_error(one_doc, p)));
}

TEST(GenError, InjectedTruthPredictiveAveragesToZero) {
  const GroundTruth t = truth_3322();
  ReplicateConfig rc;
  rc.replicates = 30;
  rc.master_seed = 16;
  const auto s = expected_gen_error(t, 2, 100, rc, GibbsConfig{},
                                    [&t](const WordDataset&, Rng&) { return MatrixXd(t.product()); });
  EXPECT_EQ(s.mean, 0.0);
  EXPECT_EQ(s.used, 30u);
}

TEST(GenError, ReplicatesIndependentOfThreads) {
  const GroundTruth t = truth_2211();
  ReplicateConfig rc;
  rc.replicates = 30;
  rc.master_seed = 17;
  GibbsConfig g;
  g.sweeps = 20;
  const auto one = expected_gen_error(t, 1, 200, rc, g);
  rc.threads = 3;
  const auto three = expected_gen_error(t, 1, 200, rc, g);
  EXPECT_EQ(one.mean, three.mean);
  for (std::size_t r = 0; r < 30; ++r) EXPECT_EQ(one.replicates[r].gen_error, three.replicates[r].gen_error);
  rc.replicates = 29;
  EXPECT_THROW(expected_gen_error(t, 1, 200, rc, g), std::invalid_argument);
}

TEST(GenError, MedianDecreasesWithN) {
  for (const GroundTruth& t : {truth_2211(), truth_3322()}) {
    const int H = static_cast<int>(t.H0());
    ReplicateConfig rc;
    rc.replicates = 30;
    rc.master_seed = 18;
    GibbsConfig g;
    g.sweeps = 100;
    const auto small = expected_gen_error(t, H, 250, rc, g);
    const auto large = expected_gen_error(t, H, 4000, rc, g);
    std::vector<double> a, b;
    for (const auto& r : small.replicates) a.push_back(r.gen_error);
    for (const auto& r : large.replicates) b.push_back(r.gen_error);
    EXPECT_LT(median(b), median(a));
  }
}

TEST(FreeEnergy, EmptyDataGivesZero) {
  const WordDataset d = make_dataset(CountMatrix::Zero(2, 2));
  EXPECT_NEAR(marginal_likelihood_exact(d, 1, 1.0, 1.0).F, 0.0, 1e-12);
  EXPECT_NEAR(marginal_likelihood_exact(d, 2, 1.0, 1.0).F, 0.0, 1e-9);
}

TEST(FreeEnergy, SingleWordClosedForm) {
  CountMatrix c = CountMatrix::Zero(2, 2);
  c(1, 0) = 1;
  const WordDataset d = make_dataset(c);
  EXPECT_NEAR(marginal_likelihood_exact(d, 1, 1.0, 1.0).F, std::log(2.0), 1e-12);
  EXPECT_NEAR(free_energy_single_topic(d, 1.0), std::log(2.0), 1e-15);
}

TEST(FreeEnergy, QuadratureMatchesDirichletMultinomial) {
  Rng rng(19);
  for (std::int64_t n : {20, 400}) {
    const WordDataset d = generate_dataset(truth_2211(), n, rng);
    const FreeEnergyResult r = marginal_likelihood_exact(d, 1, 1.0, 1.0);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.F, free_energy_single_topic(d, 1.0), 1e-6 * free_energy_single_topic(d, 1.0));
  }
  MatrixXd A0(3, 1);
  A0 << 0.5, 0.3, 0.2;
  const WordDataset d3 = generate_dataset(make_ground_truth(A0, MatrixXd::Ones(1, 2), 0.05), 100, rng);
  EXPECT_NEAR(marginal_likelihood_exact(d3, 1, 1.0, 1.0).F, free_energy_single_topic(d3, 1.0), 1e-6);
}

TEST(FreeEnergy, RefusesHighDimension) {
  Rng rng(20);
  const WordDataset d = generate_dataset(truth_3322(), 10, rng);
  EXPECT_EQ(free_dimension(3, 3, 2), 7);
  EXPECT_THROW(marginal_likelihood_exact(d, 2, 1.0, 1.0), NumericalGuard);
}

TEST(FreeEnergy, DoublingDepthIsStable) {
  MatrixXd A0(2, 2), B0(2, 2);
  A0 << 0.7, 0.2, 0.3, 0.8;
  B0 << 0.8, 0.3, 0.2, 0.7;
  Rng rng(21);
  const WordDataset d = generate_dataset(make_ground_truth(A0, B0, 0.05), 20, rng);
  QuadratureConfig lo, hi;
  lo.max_total_nodes = 64LL * 64 * 64 * 64 - 1;  // stops at 32 nodes per axis
  hi.min_nodes_per_axis = 64;
  const FreeEnergyResult a = marginal_likelihood_exact(d, 2, 1.0, 1.0, lo);
  const FreeEnergyResult b = marginal_likelihood_exact(d, 2, 1.0, 1.0, hi);
  EXPECT_EQ(a.nodes_per_axis, 32);
  EXPECT_EQ(b.nodes_per_axis, 64);
  EXPECT_LT(std::abs(a.F - b.F), 1e-5 * std::abs(b.F));
}

TEST(SmfGenerator, NoiselessGaussianReturnsMean) {
  const GroundTruth t = truth_3322();
  Rng rng(22);
  const auto x = generate_smf_dataset(t, 1, SmfModel::gaussian, rng, 0.0);
  EXPECT_EQ(x.at(0), t.product());
}

TEST(SmfGenerator, BernoulliMeansAndGaussianVariance) {
  const GroundTruth t = truth_3322();
  const MatrixXd C = t.product();
  const double n = 100000;
  Rng rng(23);
  const SmfData b = summarize_smf(generate_smf_dataset(t, 100000, SmfModel::bernoulli, rng), SmfModel::bernoulli);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      EXPECT_NEAR(b.sum(i, j) / n, C(i, j), 3.0 * std::sqrt(C(i, j) * (1 - C(i, j)) / n));
  const auto g = generate_smf_dataset(t, 100000, SmfModel::gaussian, rng);
  MatrixXd ss = MatrixXd::Zero(3, 3);
  for (const auto& X : g) ss += (X - C).cwiseAbs2();
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(ss(i, j) / n, 1.0, 0.02);
}

TEST(SmfGenerator, Guards) {
  Rng rng(24);
  EXPECT_THROW(generate_smf_dataset(truth_2211(), 0, SmfModel::gaussian, rng), std::invalid_argument);
  EXPECT_THROW(parse_smf_model("poisson"), std::invalid_argument);
  EXPECT_EQ(parse_smf_model("bernoulli"), SmfModel::bernoulli);
}

TEST(Metropolis, GaussianPosteriorMeanIsConsistent) {
  const GroundTruth t = truth_2211();
  Rng rng(25);
  const auto x = generate_smf_dataset(t, 500, SmfModel::gaussian, rng);
  const PosteriorSummary s = mh_posterior_smf(x, SmfModel::gaussian, 1, MetropolisConfig{}, rng);
  EXPECT_LE((s.predictive - t.product()).squaredNorm(), 0.02);
  EXPECT_GT(s.diagnostics.acceptance_rate, 0.05);
  EXPECT_LT(s.diagnostics.acceptance_rate, 0.8);
}

TEST(Metropolis, BernoulliLikelihoodStaysFinite) {
  MatrixXd A0(2, 2), B0(2, 2);
  A0 << 0.7, 0.2, 0.3, 0.8;
  B0 << 0.8, 0.3, 0.2, 0.7;
  const GroundTruth t = make_ground_truth(A0, B0, 0.1);
  Rng rng(26);
  const auto x = generate_smf_dataset(t, 200, SmfModel::bernoulli, rng);
  const PosteriorSummary s = mh_posterior_smf(x, SmfModel::bernoulli, 2, MetropolisConfig{}, rng);
  for (double ll : s.diagnostics.loglik_trace) ASSERT_TRUE(std::isfinite(ll));
  EXPECT_GT(s.predictive.minCoeff(), 0.0);
  EXPECT_LT(s.predictive.maxCoeff(), 1.0);
}

TEST(Metropolis, ReflectionStaysInRange) {
  for (double y : {-2.7, -0.1, 0.0, 0.3, 0.9, 1.4, 5.05}) {
    const double r = detail::reflect(y, 0.8);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 0.8);
  }
  EXPECT_NEAR(detail::reflect(-0.1, 0.8), 0.1, 1e-15);
  EXPECT_NEAR(detail::reflect(0.9, 0.8), 0.7, 1e-15);
}

TEST(Metropolis, RejectsShortChains) {
  MetropolisConfig cfg;
  cfg.steps = 100;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
