#pragma once

// Closed-form learning coefficients (RLCTs) of stochastic matrix factorization
// and the topic model, in exact rational arithmetic.
//
// Coordinates: A is M x H and B is H x N, both column-stochastic, so every
// column of AB is a distribution over M outcomes. In topic-model terms M is
// the vocabulary size, N the number of documents, H the learner topic count
// and H0 the true topic count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/rational.hpp>

namespace smfrlct {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// "p/q" with q > 0; integers keep the "/1" so every field parses the same way.
inline std::string to_string(const Rational& r) {
  std::ostringstream os;
  os << r.numerator() << '/' << r.denominator();
  return os.str();
}

struct ModelDims {
  int M = 2;   // rows of A: outcomes (vocabulary)
  int N = 2;   // columns of B: contexts (documents)
  int H = 1;   // learner inner dimension
  int H0 = 1;  // true inner dimension

  void validate() const {
    if (M < 2 || N < 2) throw std::invalid_argument("ModelDims: M and N must be >= 2");
    if (H0 < 1) throw std::invalid_argument("ModelDims: H0 must be >= 1");
    if (H < H0) throw std::invalid_argument("ModelDims: H must be >= H0");
  }

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

inline std::string to_string(const ModelDims& d) {
  std::ostringstream os;
  os << "M" << d.M << "_N" << d.N << "_H" << d.H << "_H0_" << d.H0;
  return os.str();
}

enum class ExactCase { single_topic, two_topics, two_over_one };

inline const char* case_label(ExactCase c) {
  switch (c) {
    case ExactCase::single_topic: return "H=H0=1";
    case ExactCase::two_topics: return "H=H0=2";
    case ExactCase::two_over_one: return "H=2,H0=1";
  }
  return "";
}

struct ExactRlct {
  Rational value;
  ExactCase which;
};

struct RlctBound {
  Rational lambda_bar;
  std::optional<ExactRlct> exact;
  std::int64_t d = 0;
  Rational half_d;
};

// Free parameter count of S(M,H) x S(H,N).
inline std::int64_t param_dim(const ModelDims& dims) {
  dims.validate();
  const std::int64_t M = dims.M, N = dims.N, H = dims.H;
  return H * (M + N) - H - N;
}

// lambda_bar = [M-1 + (H0-1)(M+N-3) + (H-H0) min{M-1,N}] / 2
inline Rational rlct_upper_bound(const ModelDims& dims) {
  dims.validate();
  const std::int64_t M = dims.M, N = dims.N, H = dims.H, H0 = dims.H0;
  const std::int64_t twice = (M - 1) + (H0 - 1) * (M + N - 3) + (H - H0) * std::min(M - 1, N);
  return Rational(twice, 2);
}

// Exact RLCT where it is known. For H=2, H0=1 the value is
// min{M-1, (M+N-2)/2}: the two components of the zero set have
// codimension 2(M-1) (both topics equal the truth) and M+N-2 (all mixing
// weights equal), and the larger volume wins.
inline std::optional<ExactRlct> rlct_exact(const ModelDims& dims) {
  dims.validate();
  const std::int64_t M = dims.M, N = dims.N, H = dims.H, H0 = dims.H0;
  if (H == 1 && H0 == 1) return ExactRlct{Rational(M - 1, 2), ExactCase::single_topic};
  if (H == 2 && H0 == 2) return ExactRlct{Rational(2 * M + N - 4, 2), ExactCase::two_topics};
  if (H == 2 && H0 == 1)
    return ExactRlct{Rational((M - 1) + std::min(M - 1, N - 1), 2), ExactCase::two_over_one};
  return std::nullopt;
}

inline RlctBound rlct_bound(const ModelDims& dims) {
  RlctBound b;
  b.lambda_bar = rlct_upper_bound(dims);
  b.exact = rlct_exact(dims);
  b.d = param_dim(dims);
  b.half_d = Rational(b.d, 2);
  return b;
}

// d/2 - lambda_bar; zero only for H = H0 = 1.
inline Rational tightness_gap(const ModelDims& dims) {
  return Rational(param_dim(dims), 2) - rlct_upper_bound(dims);
}

// Reduced rank regression with learner rank equal to the true rank.
inline Rational rrr_rlct_equal_rank(std::int64_t M, std::int64_t N, std::int64_t H) {
  if (M < 1 || N < 1 || H < 1) throw std::invalid_argument("rrr_rlct_equal_rank: M, N, H must be >= 1");
  return Rational(H * (M + N - H), 2);
}

// Leading-order bound lambda_bar / n on the expected generalization error.
inline Rational gen_error_bound(const ModelDims& dims, std::int64_t n) {
  if (n < 1) throw std::invalid_argument("gen_error_bound: n must be >= 1");
  return rlct_upper_bound(dims) / n;
}

// Leading terms of the free-energy bound: n S_n + lambda_bar log n.
inline double free_energy_upper(const ModelDims& dims, double n, double empirical_entropy) {
  if (!(n >= 1.0)) throw std::invalid_argument("free_energy_upper: n must be >= 1");
  return n * empirical_entropy + to_double(rlct_upper_bound(dims)) * std::log(n);
}

struct TopicFit {
  int H = 1;
  double mean_nll = 0.0;  // negative log-likelihood per word
};

struct SelectionRow {
  int H = 1;
  double fit = 0.0;        // n * mean_nll
  Rational lambda_bar;     // penalty coefficient, H0 = H
  double penalty = 0.0;    // lambda_bar * log n
  double score = 0.0;
};

struct Selection {
  int chosen_H = 1;
  std::vector<SelectionRow> table;  // ascending H
};

// sBIC-style selection: argmin_H n*fit + lambda_bar(M,N,H,H) log n.
// The true H0 is unknown at selection time, so each candidate is penalized
// as if it matched the truth. Ties go to the smaller H.
inline Selection select_num_topics(int M, int N, std::span<const TopicFit> fits, std::int64_t n) {
  if (fits.empty()) throw std::invalid_argument("select_num_topics: empty H range");
  if (n < 1) throw std::invalid_argument("select_num_topics: n must be >= 1");
  std::vector<TopicFit> sorted(fits.begin(), fits.end());
  std::sort(sorted.begin(), sorted.end(), [](const TopicFit& a, const TopicFit& b) { return a.H < b.H; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].H < 1) throw std::invalid_argument("select_num_topics: H must be >= 1");
    if (!std::isfinite(sorted[i].mean_nll)) throw std::invalid_argument("select_num_topics: non-finite fit term");
    if (i > 0 && sorted[i].H == sorted[i - 1].H) throw std::invalid_argument("select_num_topics: duplicate H");
  }
  Selection sel;
  const double log_n = std::log(static_cast<double>(n));
  double best = 0.0;
  for (const auto& f : sorted) {
    SelectionRow row;
    row.H = f.H;
    row.fit = static_cast<double>(n) * f.mean_nll;
    row.lambda_bar = rlct_upper_bound(ModelDims{M, N, f.H, f.H});
    row.penalty = to_double(row.lambda_bar) * log_n;
    row.score = row.fit + row.penalty;
    if (sel.table.empty() || row.score < best) {
      best = row.score;
      sel.chosen_H = row.H;
    }
    sel.table.push_back(row);
  }
  return sel;
}

}  // namespace smfrlct
