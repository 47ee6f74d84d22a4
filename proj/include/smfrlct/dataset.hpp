#pragma once

// Word-count data drawn from the true topic model. Counts are stored in
// the orientation of A0 B0: counts(i, j) is the number of occurrences of
// word i in document j, so the M x N table lines up with the true
// conditional table column by column.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "smfrlct/random.hpp"
#include "smfrlct/stochastic_matrix.hpp"

namespace smfrlct {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct WordDataset {
  CountMatrix counts;  // M x N
  std::int64_t n = 0;
  std::optional<std::uint64_t> seed;

  Eigen::Index M() const { return counts.rows(); }
  Eigen::Index N() const { return counts.cols(); }
  std::int64_t doc_total(Eigen::Index j) const { return counts.col(j).sum(); }
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> doc_totals() const { return counts.colwise().sum().transpose(); }

  void validate() const {
    if (counts.rows() < 1 || counts.cols() < 1) throw std::invalid_argument("dataset: empty count table");
    if ((counts.array() < 0).any()) throw std::invalid_argument("dataset: negative count");
    if (counts.sum() != n) throw std::invalid_argument("dataset: counts do not sum to n");
  }
};

inline WordDataset make_dataset(CountMatrix counts, std::optional<std::uint64_t> seed = std::nullopt) {
  WordDataset d{std::move(counts), 0, seed};
  d.n = d.counts.sum();
  d.validate();
  return d;
}

enum class DocSampling {
  sampled,      // each word's document drawn from q'
  fixed_quota,  // document j receives round(n q'_j) words (largest remainder)
};

namespace detail {

inline std::vector<std::int64_t> quota_split(std::int64_t n, const Eigen::VectorXd& q) {
  const auto N = static_cast<std::size_t>(q.size());
  std::vector<std::int64_t> quota(N);
  std::vector<std::pair<double, std::size_t>> rem(N);
  std::int64_t assigned = 0;
  for (std::size_t j = 0; j < N; ++j) {
    const double exact = static_cast<double>(n) * q(static_cast<Eigen::Index>(j));
    quota[j] = static_cast<std::int64_t>(std::floor(exact));
    rem[j] = {exact - static_cast<double>(quota[j]), j};
    assigned += quota[j];
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++quota[rem[k % N].second];
  return quota;
}

}  // namespace detail

// Draws n words: document j ~ q', then word i ~ column j of A0 B0 (the topic
// integrated out, which has the same joint law as drawing it explicitly).
template <class Gen>
WordDataset generate_dataset(const GroundTruth& truth, std::int64_t n, Gen& rng,
                             DocSampling mode = DocSampling::sampled) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  const Eigen::MatrixXd C = truth.product();
  const Eigen::Index M = C.rows(), N = C.cols();
  std::vector<std::discrete_distribution<int>> word_given_doc;
  word_given_doc.reserve(static_cast<std::size_t>(N));
  for (Eigen::Index j = 0; j < N; ++j) word_given_doc.emplace_back(C.col(j).data(), C.col(j).data() + M);
  WordDataset d{CountMatrix::Zero(M, N), n, std::nullopt};
  if (mode == DocSampling::sampled) {
    std::discrete_distribution<int> doc(truth.doc_dist.data(), truth.doc_dist.data() + N);
    for (std::int64_t l = 0; l < n; ++l) {
      const int j = doc(rng);
      ++d.counts(word_given_doc[static_cast<std::size_t>(j)](rng), j);
    }
  } else {
    const auto quota = detail::quota_split(n, truth.doc_dist);
    for (Eigen::Index j = 0; j < N; ++j)
      for (std::int64_t l = 0; l < quota[static_cast<std::size_t>(j)]; ++l)
        ++d.counts(word_given_doc[static_cast<std::size_t>(j)](rng), j);
  }
  return d;
}

// S_n = -(1/n) sum_l log q(x_l | z_l).
inline double empirical_entropy(const GroundTruth& truth, const WordDataset& data) {
  if (data.n < 1) throw std::invalid_argument("empirical_entropy: empty dataset");
  const Eigen::MatrixXd C = truth.product();
  if (C.rows() != data.M() || C.cols() != data.N()) throw std::invalid_argument("empirical_entropy: shape mismatch");
  double s = 0.0;
  for (Eigen::Index j = 0; j < C.cols(); ++j)
    for (Eigen::Index i = 0; i < C.rows(); ++i)
      if (data.counts(i, j) > 0) s -= static_cast<double>(data.counts(i, j)) * std::log(C(i, j));
  return s / static_cast<double>(data.n);
}

// Conditional entropy sum_j q'_j H(q(. | j)); the limit of S_n.
inline double conditional_entropy(const GroundTruth& truth) {
  const Eigen::MatrixXd C = truth.product();
  double h = 0.0;
  for (Eigen::Index j = 0; j < C.cols(); ++j)
    for (Eigen::Index i = 0; i < C.rows(); ++i)
      if (C(i, j) > 0.0) h -= truth.doc_dist(j) * C(i, j) * std::log(C(i, j));
  return h;
}

// CSV: header "word,doc0,...,doc{N-1}", then one row per word.
inline std::string dataset_to_csv(const WordDataset& d) {
  std::ostringstream os;
  os << "word";
  for (Eigen::Index j = 0; j < d.N(); ++j) os << ",doc" << j;
  os << '\n';
  for (Eigen::Index i = 0; i < d.M(); ++i) {
    os << i;
    for (Eigen::Index j = 0; j < d.N(); ++j) os << ',' << d.counts(i, j);
    os << '\n';
  }
  return os.str();
}

inline WordDataset dataset_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("dataset csv: missing header");
  const auto N = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  if (N < 1) throw std::runtime_error("dataset csv: header has no document columns");
  std::vector<std::vector<std::int64_t>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::int64_t> row;
    std::getline(ls, cell, ',');  // word index
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stoll(cell));
      } catch (const std::exception&) {
        throw std::runtime_error("dataset csv: bad count '" + cell + "'");
      }
    }
    if (static_cast<Eigen::Index>(row.size()) != N) throw std::runtime_error("dataset csv: ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("dataset csv: no rows");
  CountMatrix c(static_cast<Eigen::Index>(rows.size()), N);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index j = 0; j < N; ++j) c(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  return make_dataset(std::move(c));
}

// JSON sidecar {n, M, N, seed, truth}.
inline nlohmann::json dataset_sidecar(const WordDataset& d, const std::string& truth_ref) {
  nlohmann::json j;
  j["n"] = d.n;
  j["M"] = d.M();
  j["N"] = d.N();
  j["seed"] = d.seed ? nlohmann::json(*d.seed) : nlohmann::json(nullptr);
  j["truth"] = truth_ref;
  return j;
}

}  // namespace smfrlct
