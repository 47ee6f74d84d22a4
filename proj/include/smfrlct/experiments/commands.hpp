#pragma once

// Subcommand bodies behind the command-line front end. Every command
// returns a process exit code; exceptions are mapped by run_guarded.

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "smfrlct/bounds.hpp"
#include "smfrlct/dataset.hpp"
#include "smfrlct/estimator.hpp"
#include "smfrlct/experiments/config.hpp"
#include "smfrlct/free_energy.hpp"
#include "smfrlct/gen_error.hpp"
#include "smfrlct/gibbs.hpp"
#include "smfrlct/io.hpp"
#include "smfrlct/parallel.hpp"

namespace smfrlct::experiments {

namespace fs = std::filesystem;

enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,
  kExitConfig = 2,
  kExitGuard = 3,
  kExitPartial = 4,
};

inline constexpr double kPartialFailureThreshold = 0.10;
inline constexpr const char* kOutputDirEnv = "SMFRLCT_OUTPUT_DIR";

struct RunOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::optional<unsigned> threads;
  std::string method = "volume";
};

// Config file, then the output-directory environment override, then flags.
inline ExperimentConfig resolve_config(const RunOptions& o) {
  if (!o.config) throw ConfigError("config: --config PATH is required");
  ExperimentConfig c = load_config(*o.config);
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) c.output_dir = env;
  if (o.out) c.output_dir = *o.out;
  if (o.seed) c.master_seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

inline std::string format_double(double v, int precision = 10) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(precision) << v;
  return os.str();
}

inline json target_json(const ModelDims& dims) {
  const RlctBound b = rlct_bound(dims);
  json j;
  j["lambda_bar"] = to_string(b.lambda_bar);
  j["lambda_bar_value"] = to_double(b.lambda_bar);
  j["lambda_exact"] = b.exact ? json(to_string(b.exact->value)) : json(nullptr);
  j["lambda_exact_value"] = b.exact ? json(to_double(b.exact->value)) : json(nullptr);
  j["exact_case"] = b.exact ? json(case_label(b.exact->which)) : json(nullptr);
  j["half_d"] = to_string(b.half_d);
  j["half_d_value"] = to_double(b.half_d);
  return j;
}

inline json dims_json(const ModelDims& d) { return {{"M", d.M}, {"N", d.N}, {"H", d.H}, {"H0", d.H0}}; }

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- bound

struct BoundRow {
  ModelDims dims;
  RlctBound bound;
  Rational gap;
};

inline BoundRow make_bound_row(const ModelDims& d) { return {d, rlct_bound(d), tightness_gap(d)}; }

// Ranges "K=lo..hi" (or "K=v") for K in {M, N, H0, H}; each end is an
// integer or the name of a variable bound earlier in that order.
inline std::vector<ModelDims> expand_bound_grid(const std::vector<std::string>& args) {
  std::map<std::string, std::pair<std::string, std::string>> ranges;
  for (const auto& s : args) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("grid: expected KEY=LO..HI, got '" + s + "'");
    const std::string key = s.substr(0, eq), body = s.substr(eq + 1);
    if (key != "M" && key != "N" && key != "H0" && key != "H")
      throw std::invalid_argument("grid: unknown key '" + key + "' (use M, N, H0, H)");
    const auto dots = body.find("..");
    ranges[key] = dots == std::string::npos ? std::pair{body, body} : std::pair{body.substr(0, dots), body.substr(dots + 2)};
  }
  for (const char* k : {"M", "N", "H0", "H"})
    if (!ranges.count(k)) throw std::invalid_argument(std::string("grid: missing range for ") + k);
  std::map<std::string, int> env;
  auto eval = [&env](const std::string& e) {
    if (auto it = env.find(e); it != env.end()) return it->second;
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(e, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != e.size() || e.empty()) throw std::invalid_argument("grid: cannot evaluate '" + e + "'");
    return v;
  };
  std::vector<ModelDims> out;
  auto loop = [&](const char* key, auto&& inner) {
    const int lo = eval(ranges[key].first), hi = eval(ranges[key].second);
    if (hi < lo) throw std::invalid_argument(std::string("grid: empty range for ") + key);
    for (int v = lo; v <= hi; ++v) {
      env[key] = v;
      inner();
    }
    env.erase(key);
  };
  loop("M", [&] {
    loop("N", [&] {
      loop("H0", [&] {
        loop("H", [&] {
          ModelDims d{env["M"], env["N"], env["H"], env["H0"]};
          d.validate();
          out.push_back(d);
        });
      });
    });
  });
  return out;
}

inline std::string bound_csv(const std::vector<BoundRow>& rows) {
  std::ostringstream os;
  os << "M,N,H,H0,d,lambda_bar,lambda_exact,case,gap,lambda_bar_value,lambda_exact_value,gap_value\n";
  for (const auto& r : rows) {
    const auto& d = r.dims;
    os << d.M << ',' << d.N << ',' << d.H << ',' << d.H0 << ',' << r.bound.d << ',' << to_string(r.bound.lambda_bar)
       << ',' << (r.bound.exact ? to_string(r.bound.exact->value) : "") << ','
       << (r.bound.exact ? std::string("\"") + case_label(r.bound.exact->which) + "\"" : "") << ','
       << to_string(r.gap) << ','
       << format_double(to_double(r.bound.lambda_bar)) << ','
       << (r.bound.exact ? format_double(to_double(r.bound.exact->value)) : "") << ','
       << format_double(to_double(r.gap)) << '\n';
  }
  return os.str();
}

inline std::string bound_table(const std::vector<BoundRow>& rows) {
  std::ostringstream os;
  auto col = [&os](const std::string& s, int w) { os << std::left << std::setw(w) << s; };
  col("M", 4); col("N", 4); col("H", 4); col("H0", 4); col("d", 5);
  col("lambda_bar", 18); col("lambda_exact", 18); col("case", 10); os << "gap\n";
  for (const auto& r : rows) {
    const auto& d = r.dims;
    col(std::to_string(d.M), 4); col(std::to_string(d.N), 4); col(std::to_string(d.H), 4); col(std::to_string(d.H0), 4);
    col(std::to_string(r.bound.d), 5);
    col(to_string(r.bound.lambda_bar) + " (" + format_double(to_double(r.bound.lambda_bar), 6) + ")", 18);
    col(r.bound.exact ? to_string(r.bound.exact->value) + " (" + format_double(to_double(r.bound.exact->value), 6) + ")"
                      : "-",
        18);
    col(r.bound.exact ? case_label(r.bound.exact->which) : "-", 10);
    os << to_string(r.gap) << " (" << format_double(to_double(r.gap), 6) << ")\n";
  }
  return os.str();
}

struct BoundArgs {
  std::optional<ModelDims> single;
  std::vector<std::string> grid;
  std::optional<fs::path> csv;
};

inline int cmd_bound(const BoundArgs& a, std::ostream& out) {
  std::vector<ModelDims> dims;
  if (!a.grid.empty()) {
    dims = expand_bound_grid(a.grid);
  } else if (a.single) {
    a.single->validate();
    dims.push_back(*a.single);
  } else {
    throw std::invalid_argument("bound: give M N H H0 or --grid ranges");
  }
  std::vector<BoundRow> rows;
  for (const auto& d : dims) rows.push_back(make_bound_row(d));
  out << bound_table(rows);
  if (a.csv) write_file(*a.csv, bound_csv(rows));
  return kExitOk;
}

// ------------------------------------------------------------- estimate

namespace detail {

inline ReplicateConfig replicate_config(const ExperimentConfig& c, std::uint64_t seed) {
  ReplicateConfig rc;
  rc.replicates = c.replicates;
  rc.master_seed = seed;
  rc.threads = c.threads;
  rc.doc_sampling = c.doc_sampling;
  return rc;
}

inline GenErrorSummary run_gen_error(const ExperimentConfig& c, const GroundTruth& truth, std::int64_t n,
                                     std::uint64_t seed) {
  const ReplicateConfig rc = replicate_config(c, seed);
  if (c.model == ObservationModel::topic) return expected_gen_error(truth, c.dims.H, n, rc, c.sampler.gibbs);
  const SmfModel m = c.model == ObservationModel::gaussian ? SmfModel::gaussian : SmfModel::bernoulli;
  return expected_gen_error_smf(truth, m, c.dims.H, n, rc, c.sampler.metropolis);
}

inline json gen_error_json(const GenErrorSummary& s) {
  json j;
  j["n"] = s.n;
  j["mean_G"] = s.mean;
  j["ci_halfwidth"] = s.ci_halfwidth;
  j["n_mean_G"] = s.scaled_mean();
  j["n_ci_halfwidth"] = s.scaled_ci();
  j["used"] = s.used;
  j["failed"] = s.failed;
  j["divergent"] = s.divergent;
  json reps = json::array();
  for (const auto& r : s.replicates) reps.push_back(replicate_to_json(r));
  j["replicates"] = std::move(reps);
  return j;
}

}  // namespace detail

inline int cmd_estimate(const RunOptions& o, std::ostream& out) {
  const ExperimentConfig c = resolve_config(o);
  const std::string method = o.method;
  if (method != "volume" && method != "gen-error" && method != "free-energy")
    throw ConfigError("estimate: --method must be volume, gen-error or free-energy");
  // Method/dims compatibility is settled before any sampling.
  if (method == "free-energy") {
    if (c.model != ObservationModel::topic) throw ConfigError("estimate: free-energy needs the topic model");
    const int d = free_dimension(c.dims.M, c.dims.N, c.dims.H);
    if (d > kMaxQuadratureDim)
      throw NumericalGuard("estimate: free-energy quadrature needs d <= 4 free parameters, this model has " +
                           std::to_string(d) + "; use --method gen-error");
    if (c.n_grid.size() < 4 || c.n_grid.back() < 100 * c.n_grid.front())
      throw ConfigError("estimate: free-energy needs n_grid with >= 4 sizes spanning >= 2 decades");
  }
  if (method == "gen-error") {
    if (c.n_grid.empty()) throw ConfigError("estimate: gen-error needs a non-empty n_grid");
    if (c.replicates < 30) throw ConfigError("estimate: gen-error needs >= 30 replicates");
  }
  const GroundTruth truth = c.make_truth();
  json report;
  report["config_hash"] = c.hash();
  report["method"] = method;
  report["dims"] = dims_json(c.dims);
  report["model"] = to_string(c.model);
  report["target"] = target_json(c.dims);
  int code = kExitOk;
  const fs::path dir = c.output_dir;

  if (method == "volume") {
    VolumeScalingConfig v = c.estimator;
    v.seed = c.master_seed;
    v.threads = c.threads;
    const RlctEstimate e = estimate_rlct_smf(c.dims, truth, v);
    report["result"] = estimate_to_json(e);
    write_file(dir / "estimate_volume_counts.csv", counts_to_csv(e));
    out << "lambda_hat " << format_double(e.lambda_hat, 6) << " +- " << format_double(e.stderr_lambda, 3)
        << " (m_hat " << format_double(e.multiplicity_hat, 4) << ", r^2 " << format_double(e.r_squared, 6) << ")\n";
    for (const auto& w : e.warnings) out << "warning: " << w << '\n';
  } else if (method == "gen-error") {
    const std::int64_t n = c.n_grid.back();
    const GenErrorSummary s = detail::run_gen_error(c, truth, n, stream_seed(c.master_seed, static_cast<std::uint64_t>(n)));
    std::vector<double> g;
    for (const auto& r : s.replicates)
      if (r.ok && !r.divergent) g.push_back(r.gen_error);
    json res = detail::gen_error_json(s);
    if (g.size() >= 30) {
      const GenErrorEstimate ge = estimate_rlct_gen_error(g, static_cast<double>(n));
      res["lambda_hat"] = ge.lambda_hat;
      res["lambda_ci_halfwidth"] = ge.ci_halfwidth;
      out << "lambda_hat " << format_double(ge.lambda_hat, 6) << " +- " << format_double(ge.ci_halfwidth, 3) << " (n "
          << n << ", " << g.size() << " replicates)\n";
    }
    report["result"] = std::move(res);
    if (s.failure_fraction() > kPartialFailureThreshold) code = kExitPartial;
  } else {
    struct Cell {
      std::int64_t n;
      std::size_t r;
      double F = 0.0, S = 0.0, err = 0.0;
      bool converged = false;
    };
    std::vector<Cell> cells;
    for (std::size_t r = 0; r < c.replicates; ++r)
      for (std::int64_t n : c.n_grid) cells.push_back({n, r});
    parallel_for(cells.size(), c.threads, [&](std::size_t k) {
      Cell& cell = cells[k];
      Rng rng = make_stream(stream_seed(c.master_seed, static_cast<std::uint64_t>(cell.n)), cell.r);
      const WordDataset data = generate_dataset(truth, cell.n, rng, c.doc_sampling);
      const FreeEnergyResult f =
          marginal_likelihood_exact(data, c.dims.H, c.sampler.gibbs.alpha, c.sampler.gibbs.beta, c.quadrature);
      cell.F = f.F;
      cell.err = f.error_estimate;
      cell.converged = f.converged;
      cell.S = empirical_entropy(truth, data);
    });
    std::vector<std::pair<double, double>> pts;
    json rows = json::array();
    std::size_t unconverged = 0;
    for (const auto& cell : cells) {
      pts.emplace_back(static_cast<double>(cell.n), cell.F - static_cast<double>(cell.n) * cell.S);
      unconverged += !cell.converged;
      rows.push_back({{"n", cell.n}, {"replicate", cell.r}, {"F_n", cell.F}, {"S_n", cell.S},
                      {"F_n_minus_nS_n", pts.back().second}, {"quadrature_error", cell.err},
                      {"converged", cell.converged}});
    }
    const SlopeFit fit = estimate_rlct_free_energy(pts);
    report["result"] = {{"lambda_hat", fit.lambda_hat},
                        {"intercept", fit.intercept},
                        {"stderr", fit.stderr_lambda},
                        {"unconverged_quadratures", unconverged},
                        {"points", std::move(rows)}};
    out << "lambda_hat " << format_double(fit.lambda_hat, 6) << " +- " << format_double(fit.stderr_lambda, 3)
        << " (slope of F_n - n S_n against log n)\n";
  }
  const std::string name = method == "volume" ? "estimate_volume" : method == "gen-error" ? "estimate_gen_error"
                                                                                          : "estimate_free_energy";
  write_file(dir / (name + ".json"), dump(report));
  return code;
}

// ---------------------------------------------------------------- sweep

inline fs::path point_path(const fs::path& dir, std::int64_t n) {
  return dir / "points" / ("n_" + std::to_string(n) + ".json");
}

inline int cmd_sweep(const RunOptions& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig c = resolve_config(o);
  if (c.n_grid.empty()) throw ConfigError("config: sweep needs a non-empty n_grid");
  const GroundTruth truth = c.make_truth();
  const std::string hash = c.hash();
  const fs::path dir = c.output_dir;
  const RlctBound b = rlct_bound(c.dims);
  const double lambda_bar = to_double(b.lambda_bar), half_d = to_double(b.half_d);

  json records = json::array();
  std::vector<std::int64_t> failed_points;
  bool partial = false;
  std::ostringstream csv;
  csv.imbue(std::locale::classic());
  csv << std::setprecision(17);
  csv << "n,mean_G,ci_lo,ci_hi,n_mean_G,n_ci_halfwidth,bound_over_n,regular_over_n,lambda_bar,lambda_bar_value,"
         "lambda_exact,lambda_exact_value,half_d,config_hash\n";

  for (std::int64_t n : c.n_grid) {
    const fs::path pp = point_path(dir, n);
    json point;
    bool reuse = false;
    if (fs::exists(pp)) {
      try {
        point = json::parse(read_file(pp));
        reuse = point.value("config_hash", "") == hash && point.value("n", std::int64_t{-1}) == n;
      } catch (const std::exception&) {
        reuse = false;
      }
    }
    if (reuse) {
      out << "n=" << n << ": reusing " << pp.string() << '\n';
    } else {
      try {
        const GenErrorSummary s = detail::run_gen_error(c, truth, n, stream_seed(c.master_seed, static_cast<std::uint64_t>(n)));
        point = detail::gen_error_json(s);
        point["config_hash"] = hash;
        point["dims"] = dims_json(c.dims);
        point["model"] = to_string(c.model);
        point["status"] = s.failure_fraction() > kPartialFailureThreshold ? "partial" : "ok";
        write_file(pp, dump(point));
        out << "n=" << n << ": n*mean(G_n) = " << format_double(s.scaled_mean(), 6) << " +- "
            << format_double(s.scaled_ci(), 3) << '\n';
      } catch (const std::exception& e) {
        err << "n=" << n << ": point failed: " << e.what() << '\n';
        failed_points.push_back(n);
        continue;
      }
    }
    if (point.value("status", "ok") != "ok") partial = true;
    const double nn = static_cast<double>(n);
    const double mean = point.at("mean_G").get<double>(), ci = point.at("ci_halfwidth").get<double>();
    json rec;
    rec["n"] = n;
    rec["mean_G"] = mean;
    rec["ci_lo"] = mean - ci;
    rec["ci_hi"] = mean + ci;
    rec["n_mean_G"] = nn * mean;
    rec["n_ci_halfwidth"] = nn * ci;
    rec["bound_over_n"] = lambda_bar / nn;
    rec["regular_over_n"] = half_d / nn;
    rec["status"] = point.value("status", "ok");
    records.push_back(rec);
    csv << n << ',' << mean << ',' << mean - ci << ',' << mean + ci << ',' << nn * mean << ',' << nn * ci << ','
        << lambda_bar / nn << ',' << half_d / nn << ',' << to_string(b.lambda_bar) << ',' << lambda_bar << ','
        << (b.exact ? to_string(b.exact->value) : "") << ','
        << (b.exact ? format_double(to_double(b.exact->value), 17) : "") << ',' << half_d << ',' << hash << '\n';
  }

  json summary;
  summary["config_hash"] = hash;
  summary["dims"] = dims_json(c.dims);
  summary["model"] = to_string(c.model);
  summary["target"] = target_json(c.dims);
  summary["truth"] = truth_to_json(truth);
  summary["records"] = std::move(records);
  summary["failed_points"] = failed_points;
  write_file(dir / "summary.json", dump(summary));
  write_file(dir / "curve.csv", csv.str());

  json meta;
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  meta["finished_at"] = stamp;
  meta["threads"] = resolve_threads(c.threads);
  meta["config_hash"] = hash;
  write_file(dir / "metadata.json", dump(meta));
  return failed_points.empty() && !partial ? kExitOk : kExitPartial;
}

// --------------------------------------------------------------- select

inline double mean_nll(const WordDataset& data, const Eigen::MatrixXd& predictive) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < data.N(); ++j)
    for (Eigen::Index i = 0; i < data.M(); ++i)
      if (data.counts(i, j) > 0) s -= static_cast<double>(data.counts(i, j)) * std::log(predictive(i, j));
  return s / static_cast<double>(data.n);
}

inline json select_on(const WordDataset& data, const ExperimentConfig& c, std::uint64_t seed,
                      std::vector<std::string>& warnings) {
  std::vector<TopicFit> fits;
  for (int H = c.select.H_min; H <= c.select.H_max; ++H) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(H));
    const PosteriorSummary post = collapsed_gibbs(data, H, c.sampler.gibbs, rng);
    for (const auto& w : post.diagnostics.warnings) warnings.push_back("H=" + std::to_string(H) + ": " + w);
    fits.push_back({H, mean_nll(data, post.predictive)});
  }
  const auto M = static_cast<int>(data.M()), N = static_cast<int>(data.N());
  const Selection sel = select_num_topics(M, N, fits, data.n);
  const std::int64_t d_max = param_dim(ModelDims{std::max(M, 2), std::max(N, 2), c.select.H_max, c.select.H_max});
  if (data.n < 10 * d_max)
    warnings.push_back("low confidence: n = " + std::to_string(data.n) + " is below 10 x " + std::to_string(d_max) +
                       " parameters of the largest candidate");
  json table = json::array();
  for (const auto& r : sel.table)
    table.push_back({{"H", r.H}, {"fit", r.fit}, {"lambda_bar", to_string(r.lambda_bar)},
                     {"lambda_bar_value", to_double(r.lambda_bar)}, {"penalty", r.penalty}, {"score", r.score}});
  return {{"n", data.n}, {"M", M}, {"N", N}, {"chosen_H", sel.chosen_H}, {"table", std::move(table)}};
}

inline int cmd_select(const RunOptions& o, std::ostream& out) {
  const ExperimentConfig c = resolve_config(o);
  json report;
  report["config_hash"] = c.hash();
  report["H_range"] = {c.select.H_min, c.select.H_max};
  json runs = json::array();
  std::vector<std::string> warnings;
  if (c.select.datasets.empty()) {
    const GroundTruth truth = c.make_truth();
    Rng rng = make_stream(c.master_seed, 0x73656c656374ULL);
    const WordDataset data = generate_dataset(truth, c.select.n, rng, c.doc_sampling);
    json r = select_on(data, c, stream_seed(c.master_seed, 1), warnings);
    r["source"] = "generated";
    r["true_H0"] = c.dims.H0;
    runs.push_back(std::move(r));
  } else {
    for (std::size_t k = 0; k < c.select.datasets.size(); ++k) {
      const fs::path& p = c.select.datasets[k];
      WordDataset data;
      try {
        data = dataset_from_csv(read_file(p));
      } catch (const std::exception& e) {
        throw std::runtime_error("select: cannot read dataset " + p.string() + ": " + e.what());
      }
      json r = select_on(data, c, stream_seed(c.master_seed, k + 1), warnings);
      r["source"] = p.string();
      runs.push_back(std::move(r));
    }
  }
  for (const auto& r : runs) {
    out << "source " << r["source"].get<std::string>() << " (n " << r["n"] << "): chosen H = " << r["chosen_H"] << '\n';
    for (const auto& row : r["table"])
      out << "  H=" << row["H"] << "  fit " << format_double(row["fit"].get<double>(), 8) << "  penalty "
          << format_double(row["penalty"].get<double>(), 6) << "  score " << format_double(row["score"].get<double>(), 8)
          << '\n';
  }
  for (const auto& w : warnings) out << "warning: " << w << '\n';
  report["runs"] = std::move(runs);
  report["warnings"] = warnings;
  write_file(fs::path(c.output_dir) / "selection.json", dump(report));
  return kExitOk;
}

// ------------------------------------------------------------ plot-data

// Writes one aligned column file per sweep summary found in `sweep_dir` or
// its immediate subdirectories. Returns the files written.
inline std::vector<fs::path> write_plot_data(const fs::path& sweep_dir, const fs::path& out_dir) {
  if (!fs::is_directory(sweep_dir)) throw std::runtime_error("plot-data: no such directory " + sweep_dir.string());
  std::vector<fs::path> summaries;
  if (fs::exists(sweep_dir / "summary.json")) summaries.push_back(sweep_dir / "summary.json");
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(sweep_dir))
    if (e.is_directory() && fs::exists(e.path() / "summary.json")) subdirs.push_back(e.path() / "summary.json");
  std::sort(subdirs.begin(), subdirs.end());
  summaries.insert(summaries.end(), subdirs.begin(), subdirs.end());
  if (summaries.empty()) throw std::runtime_error("plot-data: no sweep output (summary.json) under " + sweep_dir.string());
  std::vector<fs::path> written;
  for (const auto& sp : summaries) {
    const json s = json::parse(read_file(sp));
    const auto& d = s.at("dims");
    const ModelDims dims{d.at("M").get<int>(), d.at("N").get<int>(), d.at("H").get<int>(), d.at("H0").get<int>()};
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(17) << "n,empirical,ci_lo,ci_hi,bound_over_n,regular_over_n\n";
    for (const auto& r : s.at("records"))
      os << r.at("n").get<std::int64_t>() << ',' << r.at("mean_G").get<double>() << ',' << r.at("ci_lo").get<double>()
         << ',' << r.at("ci_hi").get<double>() << ',' << r.at("bound_over_n").get<double>() << ','
         << r.at("regular_over_n").get<double>() << '\n';
    const fs::path target = out_dir / ("plot_" + to_string(dims) + "_" + s.value("model", std::string("topic")) + "_" +
                                       s.value("config_hash", std::string("")).substr(0, 8) + ".csv");
    write_file(target, os.str());
    written.push_back(target);
  }
  return written;
}

inline int cmd_plot_data(const fs::path& sweep_dir, const std::optional<fs::path>& out_dir, std::ostream& out) {
  for (const auto& p : write_plot_data(sweep_dir, out_dir.value_or(sweep_dir))) out << p.string() << '\n';
  return kExitOk;
}

// Maps exceptions to exit codes and prints the message.
template <class Fn>
int run_guarded(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalGuard& e) {
    err << "refused: " << e.what() << '\n';
    return kExitGuard;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace smfrlct::experiments
