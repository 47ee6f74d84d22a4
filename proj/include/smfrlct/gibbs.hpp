#pragma once

// Collapsed Gibbs sampler for the topic model with symmetric Dirichlet
// priors: alpha on each document's topic weights (columns of B), beta on
// each topic's word distribution (columns of A). Both factors are
// integrated out; only the topic label of every word is sampled.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smfrlct/dataset.hpp"
#include "smfrlct/posterior.hpp"
#include "smfrlct/random.hpp"

namespace smfrlct {

struct GibbsConfig {
  int sweeps = 1000;
  int burnin = -1;  // negative: 20% of sweeps
  int thin = 5;
  double alpha = 1.0;
  double beta = 1.0;

  int effective_burnin() const { return burnin < 0 ? sweeps / 5 : burnin; }

  void validate(int H, Eigen::Index M) const {
    if (H < 1) throw std::invalid_argument("gibbs: H must be >= 1");
    if (!(alpha > 0.0) || !(H * alpha > 0.0)) throw std::invalid_argument("gibbs: H*alpha must be positive");
    if (!(beta > 0.0) || !(static_cast<double>(M) * beta > 0.0))
      throw std::invalid_argument("gibbs: M*beta must be positive");
    if (thin < 1) throw std::invalid_argument("gibbs: thin must be >= 1");
    if (sweeps <= effective_burnin()) throw std::invalid_argument("gibbs: sweeps must exceed burnin");
  }
};

class GibbsState {
 public:
  GibbsState(const WordDataset& data, int H, double alpha, double beta)
      : M_(data.M()), N_(data.N()), H_(H), alpha_(alpha), beta_(beta) {
    for (Eigen::Index j = 0; j < N_; ++j)
      for (Eigen::Index i = 0; i < M_; ++i)
        for (std::int64_t c = 0; c < data.counts(i, j); ++c) {
          word_.push_back(static_cast<int>(i));
          doc_.push_back(static_cast<int>(j));
        }
    topic_.assign(word_.size(), 0);
    doc_topic_ = CountMatrix::Zero(N_, H_);
    topic_word_ = CountMatrix::Zero(H_, M_);
    topic_total_ = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>::Zero(H_);
    doc_total_ = data.doc_totals();
  }

  template <std::uniform_random_bit_generator Gen>
  void initialize(Gen& rng) {
    std::uniform_int_distribution<int> pick(0, H_ - 1);
    for (std::size_t t = 0; t < word_.size(); ++t) {
      topic_[t] = H_ == 1 ? 0 : pick(rng);
      add(t, +1);
    }
  }

  // Assigns explicit initial labels (e.g. to test relabeling symmetry).
  void initialize(const std::vector<int>& labels) {
    if (labels.size() != word_.size()) throw std::invalid_argument("gibbs: label count mismatch");
    doc_topic_.setZero();
    topic_word_.setZero();
    topic_total_.setZero();
    for (std::size_t t = 0; t < word_.size(); ++t) {
      if (labels[t] < 0 || labels[t] >= H_) throw std::invalid_argument("gibbs: label out of range");
      topic_[t] = labels[t];
      add(t, +1);
    }
  }

  template <class Gen>
  void sweep(Gen& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> cum(static_cast<std::size_t>(H_));
    const double Mbeta = static_cast<double>(M_) * beta_;
    for (std::size_t t = 0; t < word_.size(); ++t) {
      add(t, -1);
      const int i = word_[t], j = doc_[t];
      double total = 0.0;
      for (int k = 0; k < H_; ++k) {
        total += (static_cast<double>(doc_topic_(j, k)) + alpha_) * (static_cast<double>(topic_word_(k, i)) + beta_) /
                 (static_cast<double>(topic_total_(k)) + Mbeta);
        cum[static_cast<std::size_t>(k)] = total;
      }
      const double u = unif(rng) * total;
      int k = 0;
      while (k < H_ - 1 && cum[static_cast<std::size_t>(k)] <= u) ++k;
      topic_[t] = k;
      add(t, +1);
    }
  }

  // Collapsed joint log p(words, topics | documents).
  double log_joint() const {
    const double Mbeta = static_cast<double>(M_) * beta_, Halpha = H_ * alpha_;
    double s = 0.0;
    for (int k = 0; k < H_; ++k) {
      s += std::lgamma(Mbeta) - std::lgamma(static_cast<double>(topic_total_(k)) + Mbeta);
      for (Eigen::Index i = 0; i < M_; ++i)
        s += std::lgamma(static_cast<double>(topic_word_(k, i)) + beta_) - std::lgamma(beta_);
    }
    for (Eigen::Index j = 0; j < N_; ++j) {
      s += std::lgamma(Halpha) - std::lgamma(static_cast<double>(doc_total_(j)) + Halpha);
      for (int k = 0; k < H_; ++k) s += std::lgamma(static_cast<double>(doc_topic_(j, k)) + alpha_) - std::lgamma(alpha_);
    }
    return s;
  }

  // Posterior-mean predictive given the current labels; column j sums to 1.
  // A document with no words gets the prior mean 1/H for its topic weights.
  Eigen::MatrixXd conditional_predictive() const {
    const double Mbeta = static_cast<double>(M_) * beta_, Halpha = H_ * alpha_;
    Eigen::MatrixXd phi(M_, H_);  // word | topic
    for (int k = 0; k < H_; ++k)
      for (Eigen::Index i = 0; i < M_; ++i)
        phi(i, k) = (static_cast<double>(topic_word_(k, i)) + beta_) / (static_cast<double>(topic_total_(k)) + Mbeta);
    Eigen::MatrixXd theta(H_, N_);  // topic | document
    for (Eigen::Index j = 0; j < N_; ++j)
      for (int k = 0; k < H_; ++k)
        theta(k, j) = (static_cast<double>(doc_topic_(j, k)) + alpha_) / (static_cast<double>(doc_total_(j)) + Halpha);
    return phi * theta;
  }

  // True iff the count tables equal the marginals recomputed from labels.
  bool consistent() const {
    CountMatrix dt = CountMatrix::Zero(N_, H_), tw = CountMatrix::Zero(H_, M_);
    for (std::size_t t = 0; t < word_.size(); ++t) {
      ++dt(doc_[t], topic_[t]);
      ++tw(topic_[t], word_[t]);
    }
    return dt == doc_topic_ && tw == topic_word_ && topic_total_ == tw.rowwise().sum();
  }

  int H() const { return H_; }
  std::size_t tokens() const { return word_.size(); }
  const std::vector<int>& assignments() const { return topic_; }
  const CountMatrix& doc_topic() const { return doc_topic_; }    // N x H
  const CountMatrix& topic_word() const { return topic_word_; }  // H x M

 private:
  void add(std::size_t t, int sign) {
    const int k = topic_[t];
    doc_topic_(doc_[t], k) += sign;
    topic_word_(k, word_[t]) += sign;
    topic_total_(k) += sign;
  }

  Eigen::Index M_, N_;
  int H_;
  double alpha_, beta_;
  std::vector<int> word_, doc_, topic_;
  CountMatrix doc_topic_, topic_word_;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> topic_total_, doc_total_;
};

namespace detail {

template <class Gen>
PosteriorSummary run_gibbs(GibbsState& state, const GibbsConfig& cfg, Gen& rng) {
  PosteriorSummary out;
  const int burnin = cfg.effective_burnin();
  Eigen::MatrixXd acc;
  std::vector<double> post_trace;
  for (int s = 0; s < cfg.sweeps; ++s) {
    if (state.H() > 1) state.sweep(rng);
#ifndef NDEBUG
    if (!state.consistent()) throw std::logic_error("gibbs: count tables out of sync");
#endif
    const double ll = state.log_joint();
    out.diagnostics.loglik_trace.push_back(ll);
    if (s < burnin) continue;
    post_trace.push_back(ll);
    if ((s - burnin) % cfg.thin != 0) continue;
    const Eigen::MatrixXd p = state.conditional_predictive();
    if (acc.size() == 0) acc = Eigen::MatrixXd::Zero(p.rows(), p.cols());
    acc += p;
    ++out.n_samples;
  }
  out.predictive = acc / static_cast<double>(out.n_samples);
  // Renormalize away rounding drift from the running sum.
  out.predictive.array().rowwise() /= out.predictive.colwise().sum().array();
  out.diagnostics.split_rhat = state.H() > 1 ? split_rhat(post_trace) : 1.0;
  if (out.diagnostics.split_rhat > kRhatWarning)
    out.diagnostics.warnings.push_back("split R-hat " + std::to_string(out.diagnostics.split_rhat) +
                                       " exceeds 1.1: chain may not have mixed");
  return out;
}

}  // namespace detail

// Posterior predictive of the topic model with H topics, averaged over
// retained sweeps. With H = 1 there are no latent labels and the result is
// the exact conjugate predictive.
template <class Gen>
PosteriorSummary collapsed_gibbs(const WordDataset& data, int H, const GibbsConfig& cfg, Gen& rng) {
  data.validate();
  if (data.n < 1) throw std::invalid_argument("gibbs: empty dataset");
  cfg.validate(H, data.M());
  GibbsState state(data, H, cfg.alpha, cfg.beta);
  state.initialize(rng);
  return detail::run_gibbs(state, cfg, rng);
}

}  // namespace smfrlct
