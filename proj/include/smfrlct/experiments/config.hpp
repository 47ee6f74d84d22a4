#pragma once

// Experiment configuration: one JSON document. Unknown keys are rejected so
// that a typo cannot silently fall back to a default.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "smfrlct/bounds.hpp"
#include "smfrlct/estimator.hpp"
#include "smfrlct/free_energy.hpp"
#include "smfrlct/gibbs.hpp"
#include "smfrlct/io.hpp"
#include "smfrlct/smf_posterior.hpp"

namespace smfrlct::experiments {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ObservationModel { topic, gaussian, bernoulli };

inline const char* to_string(ObservationModel m) {
  switch (m) {
    case ObservationModel::topic: return "topic";
    case ObservationModel::gaussian: return "gaussian";
    case ObservationModel::bernoulli: return "bernoulli";
  }
  return "?";
}

using smfrlct::to_string;

struct SamplerSettings {
  GibbsConfig gibbs;
  MetropolisConfig metropolis;
};

struct SelectSettings {
  int H_min = 1;
  int H_max = 4;
  std::int64_t n = 5000;
  std::vector<std::filesystem::path> datasets;  // CSV count tables; generated from the truth when empty
};

struct ExperimentConfig {
  ModelDims dims;
  double delta = 0.05;
  ObservationModel model = ObservationModel::topic;
  std::optional<json> truth;  // explicit {A0, B0, doc_dist}; random otherwise
  std::optional<std::uint64_t> truth_seed;
  std::vector<std::int64_t> n_grid;
  std::size_t replicates = 200;
  SamplerSettings sampler;
  VolumeScalingConfig estimator;
  QuadratureConfig quadrature;
  SelectSettings select;
  DocSampling doc_sampling = DocSampling::sampled;
  std::uint64_t master_seed = 0;
  unsigned threads = 1;
  std::filesystem::path output_dir = "out";

  void validate() const;
  GroundTruth make_truth() const;
  // Canonical JSON of everything that influences results (threads and
  // output_dir excluded).
  json canonical() const;
  std::string hash() const;
};

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

inline void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string("config: '") + where + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError(std::string("config: unknown key '") + k + "' in " + where);
}

}  // namespace detail

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline ExperimentConfig parse_config(const json& j) {
  using detail::get_or;
  detail::check_keys(j, "config",
                     {"dims", "delta", "model", "truth", "truth_seed", "n_grid", "replicates", "sampler", "estimator",
                      "quadrature", "select", "doc_sampling", "master_seed", "threads", "output_dir"});
  ExperimentConfig c;
  if (!j.contains("dims")) throw ConfigError("config: 'dims' is required");
  const json& d = j["dims"];
  detail::check_keys(d, "dims", {"M", "N", "H", "H0"});
  c.dims = {get_or(d, "M", 2), get_or(d, "N", 2), get_or(d, "H", 1), get_or(d, "H0", 1)};
  c.delta = get_or(j, "delta", c.delta);
  const auto model = get_or<std::string>(j, "model", "topic");
  if (model == "topic") c.model = ObservationModel::topic;
  else if (model == "gaussian") c.model = ObservationModel::gaussian;
  else if (model == "bernoulli") c.model = ObservationModel::bernoulli;
  else throw ConfigError("config: model must be topic, gaussian or bernoulli");
  if (j.contains("truth") && !j["truth"].is_null()) c.truth = j["truth"];
  if (j.contains("truth_seed")) c.truth_seed = get_or<std::uint64_t>(j, "truth_seed", 0);
  c.n_grid = get_or(j, "n_grid", c.n_grid);
  c.replicates = get_or(j, "replicates", c.replicates);
  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    detail::check_keys(s, "sampler", {"sweeps", "burnin", "thin", "alpha", "beta", "mh_steps", "proposal_scale"});
    auto& g = c.sampler.gibbs;
    g.sweeps = get_or(s, "sweeps", g.sweeps);
    g.burnin = get_or(s, "burnin", g.burnin);
    g.thin = get_or(s, "thin", g.thin);
    g.alpha = get_or(s, "alpha", g.alpha);
    g.beta = get_or(s, "beta", g.beta);
    auto& m = c.sampler.metropolis;
    m.steps = get_or(s, "mh_steps", m.steps);
    m.proposal_scale = get_or(s, "proposal_scale", m.proposal_scale);
  }
  if (j.contains("estimator")) {
    const json& e = j["estimator"];
    detail::check_keys(e, "estimator",
                       {"num_samples", "t_grid", "t_max", "t_min", "t_points", "include_log_term", "min_hits",
                        "grid_mode", "quantile_max", "quantile_points"});
    auto& v = c.estimator;
    v.num_samples = get_or(e, "num_samples", v.num_samples);
    if (e.contains("t_grid")) {
      v.t_grid = get_or(e, "t_grid", v.t_grid);
    } else if (e.contains("t_max") || e.contains("t_min") || e.contains("t_points")) {
      try {
        v.t_grid = geometric_grid(get_or(e, "t_max", 1e-2), get_or(e, "t_min", 1e-6),
                                  get_or<std::size_t>(e, "t_points", 24));
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("config: estimator grid: ") + ex.what());
      }
    }
    v.include_log_term = get_or(e, "include_log_term", v.include_log_term);
    v.min_hits = get_or(e, "min_hits", v.min_hits);
    const auto mode = get_or<std::string>(e, "grid_mode", "fixed");
    if (mode == "fixed") v.grid_mode = GridMode::fixed;
    else if (mode == "quantile") v.grid_mode = GridMode::quantile;
    else throw ConfigError("config: estimator.grid_mode must be fixed or quantile");
    v.quantile_max = get_or(e, "quantile_max", v.quantile_max);
    v.quantile_points = get_or(e, "quantile_points", v.quantile_points);
  }
  if (j.contains("quadrature")) {
    const json& q = j["quadrature"];
    detail::check_keys(q, "quadrature", {"min_nodes_per_axis", "rel_tol", "max_total_nodes"});
    c.quadrature.min_nodes_per_axis = get_or(q, "min_nodes_per_axis", c.quadrature.min_nodes_per_axis);
    c.quadrature.rel_tol = get_or(q, "rel_tol", c.quadrature.rel_tol);
    c.quadrature.max_total_nodes = get_or(q, "max_total_nodes", c.quadrature.max_total_nodes);
  }
  if (j.contains("select")) {
    const json& s = j["select"];
    detail::check_keys(s, "select", {"H_range", "n", "datasets"});
    if (s.contains("H_range")) {
      const auto r = get_or<std::vector<int>>(s, "H_range", {});
      if (r.size() != 2) throw ConfigError("config: select.H_range must be [H_min, H_max]");
      c.select.H_min = r[0];
      c.select.H_max = r[1];
    }
    c.select.n = get_or(s, "n", c.select.n);
    for (const auto& p : get_or<std::vector<std::string>>(s, "datasets", {})) c.select.datasets.emplace_back(p);
  }
  const auto docs = get_or<std::string>(j, "doc_sampling", "sampled");
  if (docs == "sampled") c.doc_sampling = DocSampling::sampled;
  else if (docs == "fixed_quota") c.doc_sampling = DocSampling::fixed_quota;
  else throw ConfigError("config: doc_sampling must be sampled or fixed_quota");
  c.master_seed = get_or(j, "master_seed", c.master_seed);
  c.threads = get_or(j, "threads", c.threads);
  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir.string());
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& p) {
  std::string text;
  try {
    text = read_file(p);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + p.string() + ": " + e.what());
  }
  return parse_config(j);
}

inline void ExperimentConfig::validate() const {
  try {
    dims.validate();
    if (!(delta > 0.0 && delta < 0.5)) throw ConfigError("delta must lie in (0, 1/2)");
    for (std::size_t k = 0; k < n_grid.size(); ++k) {
      if (n_grid[k] < 1) throw ConfigError("n_grid entries must be >= 1");
      if (k > 0 && n_grid[k] <= n_grid[k - 1]) throw ConfigError("n_grid must be strictly increasing");
    }
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
    sampler.gibbs.validate(dims.H, dims.M);
    sampler.metropolis.validate();
    estimator.validate();
    if (select.H_min < 1 || select.H_max < select.H_min) throw ConfigError("select.H_range must satisfy 1 <= min <= max");
    if (select.n < 1) throw ConfigError("select.n must be >= 1");
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline GroundTruth ExperimentConfig::make_truth() const {
  try {
    GroundTruth t = truth ? truth_from_json(*truth)
                          : random_ground_truth(dims.M, dims.N, dims.H0, delta,
                                                truth_seed.value_or(stream_seed(master_seed, 0x7472757468ULL)), 0.1);
    if (t.M() != dims.M || t.N() != dims.N || t.H0() != dims.H0)
      throw ConfigError("truth shape does not match dims");
    return t;
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: truth: ") + e.what());
  }
}

inline json ExperimentConfig::canonical() const {
  json j;
  j["dims"] = {{"M", dims.M}, {"N", dims.N}, {"H", dims.H}, {"H0", dims.H0}};
  j["delta"] = delta;
  j["model"] = to_string(model);
  j["truth"] = truth ? *truth : json(nullptr);
  j["truth_seed"] = truth_seed ? json(*truth_seed) : json(nullptr);
  j["n_grid"] = n_grid;
  j["replicates"] = replicates;
  const auto& g = sampler.gibbs;
  const auto& m = sampler.metropolis;
  j["sampler"] = {{"sweeps", g.sweeps},   {"burnin", g.effective_burnin()}, {"thin", g.thin},
                  {"alpha", g.alpha},     {"beta", g.beta},                 {"mh_steps", m.steps},
                  {"proposal_scale", m.proposal_scale}};
  const auto& e = estimator;
  j["estimator"] = {{"num_samples", e.num_samples},     {"t_grid", e.t_grid},
                    {"include_log_term", e.include_log_term}, {"min_hits", e.min_hits},
                    {"grid_mode", to_string(e.grid_mode)}, {"quantile_max", e.quantile_max},
                    {"quantile_points", e.quantile_points}};
  j["quadrature"] = {{"min_nodes_per_axis", quadrature.min_nodes_per_axis},
                     {"rel_tol", quadrature.rel_tol},
                     {"max_total_nodes", quadrature.max_total_nodes}};
  std::vector<std::string> ds;
  for (const auto& p : select.datasets) ds.push_back(p.string());
  j["select"] = {{"H_range", {select.H_min, select.H_max}}, {"n", select.n}, {"datasets", ds}};
  j["doc_sampling"] = doc_sampling == DocSampling::sampled ? "sampled" : "fixed_quota";
  j["master_seed"] = master_seed;
  return j;
}

inline std::string ExperimentConfig::hash() const {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a64(canonical().dump());
  return os.str();
}

}  // namespace smfrlct::experiments
