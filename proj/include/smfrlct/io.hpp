#pragma once

// Plain-text matrices ("rows cols" header, one space-separated row per
// line) and JSON ground-truth bundles {A0, B0, doc_dist, delta, seed}.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "smfrlct/stochastic_matrix.hpp"

namespace smfrlct {

using json = nlohmann::json;

inline void write_matrix_text(std::ostream& os, const Eigen::MatrixXd& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << m(i, j);
    }
    os << '\n';
  }
}

inline Eigen::MatrixXd read_matrix_text(std::istream& is) {
  long rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows < 0 || cols < 0) throw std::runtime_error("matrix text: bad header");
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j)
      if (!(is >> m(i, j))) throw std::runtime_error("matrix text: truncated body");
  return m;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::runtime_error("matrix json: expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw std::runtime_error("matrix json: ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline json truth_to_json(const GroundTruth& t) {
  json j;
  j["A0"] = matrix_to_json(t.A0.matrix());
  j["B0"] = matrix_to_json(t.B0.matrix());
  j["doc_dist"] = std::vector<double>(t.doc_dist.data(), t.doc_dist.data() + t.doc_dist.size());
  j["delta"] = t.delta;
  j["seed"] = t.seed ? json(*t.seed) : json(nullptr);
  return j;
}

inline GroundTruth truth_from_json(const json& j) {
  Eigen::MatrixXd A0 = matrix_from_json(j.at("A0"));
  Eigen::MatrixXd B0 = matrix_from_json(j.at("B0"));
  Eigen::VectorXd q;
  if (j.contains("doc_dist") && !j["doc_dist"].is_null()) {
    const auto v = j["doc_dist"].get<std::vector<double>>();
    q = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  } else {
    q = Eigen::VectorXd::Constant(B0.cols(), 1.0 / static_cast<double>(B0.cols()));
  }
  std::optional<std::uint64_t> seed;
  if (j.contains("seed") && !j["seed"].is_null()) seed = j["seed"].get<std::uint64_t>();
  return make_ground_truth(std::move(A0), std::move(B0), std::move(q), j.value("delta", 0.05), seed);
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

}  // namespace smfrlct
