// smfrlct: learning-coefficient bounds and simulations for stochastic
// matrix factorization and topic models.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "smfrlct/experiments/commands.hpp"

namespace ex = smfrlct::experiments;

namespace {

void add_run_flags(CLI::App* cmd, ex::RunOptions& o, std::string& config, std::string& out) {
  cmd->add_option("--config", config, "experiment JSON")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd->add_option("--out", out, "output directory (overrides config and " + std::string(ex::kOutputDirEnv) + ")");
  cmd->add_option("--threads", o.threads, "worker threads, 0 = all cores");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smfrlct: RLCT bounds, estimators and learning-curve experiments"};
  app.require_subcommand(1);

  ex::BoundArgs bound;
  std::vector<int> bound_dims;
  std::string bound_csv;
  auto* b = app.add_subcommand("bound", "print the RLCT bound table for M N H H0 or a --grid");
  b->add_option("dims", bound_dims, "M N H H0")->expected(4);
  b->add_option("--grid", bound.grid, "ranges such as M=2..4 N=2..4 H0=1..2 H=H0..3")->expected(1, 4);
  b->add_option("--csv", bound_csv, "also write the table as CSV");

  ex::RunOptions est, sweep, sel;
  std::string est_cfg, est_out, sweep_cfg, sweep_out, sel_cfg, sel_out;
  auto* e = app.add_subcommand("estimate", "estimate the RLCT of one configuration");
  add_run_flags(e, est, est_cfg, est_out);
  e->add_option("--method", est.method, "volume | gen-error | free-energy")
      ->check(CLI::IsMember({"volume", "gen-error", "free-energy"}));
  auto* s = app.add_subcommand("sweep", "learning curve n * E[G_n] over the config's n_grid");
  add_run_flags(s, sweep, sweep_cfg, sweep_out);
  auto* l = app.add_subcommand("select", "choose the number of topics by the RLCT-penalized criterion");
  add_run_flags(l, sel, sel_cfg, sel_out);

  std::string plot_in, plot_out;
  auto* p = app.add_subcommand("plot-data", "column files for plotting sweep results");
  p->add_option("sweep_dir", plot_in, "directory written by sweep")->required();
  p->add_option("--out", plot_out, "where to write (default: sweep_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : ex::kExitConfig;
  }

  auto finish = [](ex::RunOptions& o, const std::string& cfg, const std::string& out) {
    if (!cfg.empty()) o.config = cfg;
    if (!out.empty()) o.out = out;
  };
  return ex::run_guarded(
      [&]() -> int {
        if (*b) {
          if (bound_dims.size() == 4) bound.single = smfrlct::ModelDims{bound_dims[0], bound_dims[1], bound_dims[2], bound_dims[3]};
          if (!bound_csv.empty()) bound.csv = bound_csv;
          return ex::cmd_bound(bound, std::cout);
        }
        if (*e) {
          finish(est, est_cfg, est_out);
          return ex::cmd_estimate(est, std::cout);
        }
        if (*s) {
          finish(sweep, sweep_cfg, sweep_out);
          return ex::cmd_sweep(sweep, std::cout, std::cerr);
        }
        if (*l) {
          finish(sel, sel_cfg, sel_out);
          return ex::cmd_select(sel, std::cout);
        }
        std::optional<std::filesystem::path> po;
        if (!plot_out.empty()) po = plot_out;
        return ex::cmd_plot_data(plot_in, po, std::cout);
      },
      std::cerr);
}
