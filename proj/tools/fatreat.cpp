// fatreat: simulate, fit, summarize and check factor-augmented treatment
// models from the command line.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "fatreat/gibbs.hpp"
#include "fatreat/inference.hpp"
#include "fatreat/io.hpp"
#include "fatreat/model.hpp"
#include "fatreat/simulator.hpp"
#include "fatreat/svg.hpp"

namespace fs = std::filesystem;
using namespace fatreat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUser = 1;
constexpr int kExitNumerical = 2;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out_dir = ".";
  std::optional<int> chains;
  bool quiet = false;
};

struct FitArgs {
  std::string data;
  std::optional<int> T;
  bool allow_unidentified = false;
};

struct SummarizeArgs {
  std::vector<std::string> draws;
  std::string data;
  std::string truth;
  std::optional<double> level;
  bool raw_alpha = false;
};

struct CheckArgs {
  std::string data;
  int r = 1;
  std::optional<int> T;
};

void info(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

io::RunConfig load_config(const Globals& g) {
  if (g.config.empty()) return io::parse_run_config("{}");
  return io::read_run_config(g.config);
}

fs::path prepare_out_dir(const Globals& g) {
  const fs::path dir(g.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io::IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

int worker_count(int chains) {
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("FATREAT_THREADS"); env && *env) {
    try {
      std::size_t used = 0;
      threads = std::stoi(env, &used);
      if (used != std::string(env).size() || threads < 1) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw InvalidConfig(std::string("FATREAT_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return std::min(threads, chains);
}

int cmd_simulate(const Globals& g) {
  const auto rc = load_config(g);
  if (!rc.simulate) throw InvalidConfig("simulate: config has no 'simulate' section");
  SimConfig config = *rc.simulate;
  if (g.seed) config.seed = *g.seed;
  const auto sim = simulate(config);
  for (const auto& w : sim.warnings) std::cerr << "warning: " << w << '\n';

  const fs::path dir = prepare_out_dir(g);
  io::write_file(dir / "data.csv", io::data_csv(sim.data));
  io::write_file(dir / "truth.csv", io::truth_csv(sim.data, sim.truth));
  io::Json meta;
  meta["generator"] = to_string(config.kind);
  meta["n"] = config.n;
  meta["T"] = config.T;
  meta["seed"] = config.seed;
  meta["p_v"] = sim.data.p_v();
  meta["p_w"] = sim.data.p_w();
  meta["treated"] = sim.data.x.sum();
  meta["ate_true"] = io::to_json(sim.truth.ate);
  meta["warnings"] = sim.warnings;
  meta["config"] = rc.simulate_json;
  io::write_file(dir / "meta.json", meta.dump(2) + "\n");
  info(g, "simulated n=" + std::to_string(config.n) + " T=" + std::to_string(config.T) + " (" +
              to_string(config.kind) + ") into " + dir.string());
  return kExitOk;
}

int cmd_fit(const Globals& g, const FitArgs& a) {
  const auto rc = load_config(g);
  io::FitConfig fit = rc.fit;
  if (g.seed) fit.chain.seed = *g.seed;
  if (g.chains) fit.chains = *g.chains;
  if (fit.chains < 1) throw InvalidConfig("--chains must be >= 1");
  if (a.allow_unidentified) fit.chain.skip_identification_check = true;
  const std::optional<int> T = a.T ? a.T : fit.T;
  std::string data_path = a.data;
  if (data_path.empty() && fit.data) data_path = rc.resolve(*fit.data);
  if (data_path.empty()) throw InvalidConfig("fit: no dataset (use --data or fit.data)");

  const PanelDataset data = io::read_data_csv(data_path, T);
  const Dims dims = Dims::of(data);
  const gibbs::PriorSpec prior = rc.prior.resolve(dims);
  if (!fit.chain.skip_identification_check && !check_identification(data.T, 1))
    throw IdentificationError(identification_message(data.T, 1));

  const int chains = fit.chains;
  const stats::RandomStream root(fit.chain.seed);
  std::vector<std::optional<gibbs::ChainOutput>> results(chains);
  std::vector<std::exception_ptr> errors(chains);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < chains; k = next++) {
      try {
        gibbs::ChainConfig cc = fit.chain;
        cc.seed = root.derive(static_cast<std::uint64_t>(k)).seed();
        results[k] = gibbs::run_chain(data, prior, cc);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int workers = worker_count(chains);
  info(g, "fitting " + std::to_string(chains) + " chain(s) on " + std::to_string(workers) + " worker(s): n=" +
              std::to_string(data.n()) + " T=" + std::to_string(data.T) + " model=" + gibbs::to_string(fit.chain.model));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (int k = 0; k < chains; ++k)
    if (errors[k]) std::rethrow_exception(errors[k]);

  const fs::path dir = prepare_out_dir(g);
  io::Json meta;
  meta["data"] = data_path;
  meta["chains"] = io::Json::array();
  for (int k = 0; k < chains; ++k) {
    const auto& out = *results[k];
    const std::string file = "draws_chain" + std::to_string(k + 1) + ".csv";
    io::write_file(dir / file, io::draws_csv(out));
    io::Json cm = io::chain_metadata(out);
    cm["file"] = file;
    meta["chains"].push_back(cm);
    info(g, "chain " + std::to_string(k + 1) + ": " + std::to_string(out.draws.size()) + " draws in " +
                std::to_string(out.meta.wall_seconds) + " s");
  }
  const auto& p = prior;
  meta["prior"] = {{"V_alpha", p.V_alpha},         {"V_beta_free", p.V_beta_free}, {"V_beta_slab", p.V_beta_slab},
                   {"beta_a", p.beta_a},           {"beta_b", p.beta_b},           {"s0", p.s0},
                   {"S0", p.S0},                   {"loading_var", p.loading_var}, {"mandatory_alpha", p.mandatory_alpha},
                   {"mandatory_beta", gibbs::mandatory_beta_indices(p, dims)},
                   {"boost_shape", p.boost_shape}, {"boost_scale", p.boost_scale}};
  io::write_file(dir / "fit_meta.json", meta.dump(2) + "\n");
  return kExitOk;
}

int cmd_summarize(const Globals& g, const SummarizeArgs& a) {
  const auto rc = load_config(g);
  io::SummarizeConfig sc = rc.summarize;
  std::vector<std::string> draw_paths = a.draws;
  if (draw_paths.empty())
    for (const auto& d : sc.draws) draw_paths.push_back(rc.resolve(d));
  if (draw_paths.empty()) throw InvalidConfig("summarize: no draws files (use --draws)");
  std::string data_path = a.data;
  if (data_path.empty() && sc.data) data_path = rc.resolve(*sc.data);
  if (data_path.empty()) throw InvalidConfig("summarize: no dataset (use --data)");
  std::string truth_path = a.truth;
  if (truth_path.empty() && sc.truth) truth_path = rc.resolve(*sc.truth);
  if (truth_path.empty()) {
    const fs::path guess = fs::path(data_path).parent_path() / "truth.csv";
    if (fs::exists(guess)) truth_path = guess.string();
  }
  inference::SummaryOptions opts;
  opts.level = a.level.value_or(sc.level);
  opts.raw_alpha = a.raw_alpha || sc.raw_alpha;
  if (!(opts.level > 0.0 && opts.level < 1.0)) throw InvalidConfig("--level must lie in (0,1)");

  std::vector<inference::DrawMatrix> chains;
  for (const auto& p : draw_paths) chains.push_back(io::read_draws_csv(p));
  const auto combined = inference::combine(chains);
  const PanelDataset data = io::read_data_csv(data_path, combined.dims.T);
  const auto summary = inference::summarize(combined.parameter_draws(), data, opts);

  std::optional<VectorXd> truth;
  if (!truth_path.empty()) {
    truth = io::read_true_ate(truth_path);
    if (truth->size() != data.T) throw InvalidArgument("truth.csv: period count differs from the data");
  }

  const fs::path dir = prepare_out_dir(g);
  std::string csv = "parameter,mean,sd,inclusion\n";
  for (const auto& r : summary.table.rows)
    csv += r.name + ',' + io::format_double(r.mean) + ',' + io::format_double(r.sd) + ',' +
           (std::isnan(r.inclusion) ? std::string() : io::format_double(r.inclusion)) + '\n';
  io::write_file(dir / "summary.csv", csv);

  std::string ate = "period,plug_in,posterior_mean,sd,hpd_lo,hpd_hi";
  if (truth) ate += ",true,covered";
  ate += '\n';
  std::string report = inference::format_table(summary.table) + "\nATE by period (" +
                       std::to_string(static_cast<int>(std::lround(opts.level * 100))) + "% HPD)\n";
  for (const auto& p : summary.ate.periods) {
    ate += std::to_string(p.period) + ',' + io::format_double(p.plug_in) + ',' + io::format_double(p.posterior_mean) +
           ',' + io::format_double(p.sd) + ',' + io::format_double(p.hpd_lo) + ',' + io::format_double(p.hpd_hi);
    char line[160];
    std::snprintf(line, sizeof line, "  t=%d  mean %9.4f  [%9.4f, %9.4f]", p.period, p.posterior_mean, p.hpd_lo,
                  p.hpd_hi);
    report += line;
    if (truth) {
      const double tv = (*truth)[p.period - 1];
      const bool covered = p.hpd_lo <= tv && tv <= p.hpd_hi;
      ate += ',' + io::format_double(tv) + ',' + (covered ? "1" : "0");
      std::snprintf(line, sizeof line, "  true %9.4f  %s", tv, covered ? "covered" : "NOT covered");
      report += line;
    }
    ate += '\n';
    report += '\n';
  }
  io::write_file(dir / "ate.csv", ate);
  io::write_file(dir / "summary.txt", report);
  io::write_file(dir / "ate.svg", svg::ate_chart(summary.ate, truth));

  std::string diag = "chain,parameter,ess,degenerate,split_z\n";
  for (std::size_t k = 0; k < chains.size(); ++k) {
    if (static_cast<std::size_t>(chains[k].values.rows()) < inference::kMinDiagnosticDraws) {
      std::cerr << "warning: chain " << k + 1 << " has fewer than " << inference::kMinDiagnosticDraws
                << " draws; diagnostics skipped\n";
      continue;
    }
    for (const auto& d : inference::diagnostics(chains[k]))
      diag += std::to_string(k + 1) + ',' + d.name + ',' +
              (d.ess.degenerate ? std::string() : io::format_double(d.ess.value)) + ',' +
              (d.ess.degenerate ? "1" : "0") + ',' + (std::isnan(d.split_z) ? std::string() : io::format_double(d.split_z)) +
              '\n';
  }
  io::write_file(dir / "diagnostics.csv", diag);
  if (!g.quiet) std::cout << report;
  return kExitOk;
}

int cmd_check(const Globals& g, const CheckArgs& a) {
  if (a.data.empty()) throw InvalidConfig("check: --data is required");
  const PanelDataset data = io::read_data_csv(a.data, a.T);
  const bool ok = check_identification(data.T, a.r);
  const long long lhs = static_cast<long long>(data.T) * (data.T + 1);
  const long long rhs = 2LL * (a.r + 1) * data.T + 1;
  std::cout << "T = " << data.T << ", r = " << a.r << '\n'
            << "T(T+1) = " << lhs << (ok ? " >= " : " < ") << "2(r+1)T+1 = " << rhs << ": "
            << (ok ? "pass" : "fail") << '\n'
            << "observations n_jt\n  period  control  treated\n";
  for (int t = 0; t < data.T; ++t) {
    char line[64];
    std::snprintf(line, sizeof line, "  %6d  %7d  %7d\n", t + 1, data.count(0, t), data.count(1, t));
    std::cout << line;
  }
  (void)g;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian factor-augmented treatment-effect models for panel outcomes"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed (overrides the config)");
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--chains", g.chains, "Number of chains (fit)");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");

  FitArgs fa;
  SummarizeArgs sa;
  CheckArgs ca;
  auto* sim = app.add_subcommand("simulate", "Draw a synthetic panel with ground truth");
  auto* fit = app.add_subcommand("fit", "Run the Gibbs sampler");
  fit->add_option("--data", fa.data, "data.csv (overrides fit.data)");
  fit->add_option("--T", fa.T, "Panel length, needed for an empty dataset");
  fit->add_flag("--allow-unidentified", fa.allow_unidentified, "Skip the identification guard");
  auto* sum = app.add_subcommand("summarize", "Summarize stored draws");
  sum->add_option("--draws", sa.draws, "Draws CSV file(s)");
  sum->add_option("--data", sa.data, "data.csv used for the fit");
  sum->add_option("--truth", sa.truth, "truth.csv (default: next to data.csv if present)");
  sum->add_option("--level", sa.level, "HPD level");
  sum->add_flag("--raw-alpha", sa.raw_alpha, "Report alpha unstandardized");
  auto* chk = app.add_subcommand("check", "Identification check and cell counts");
  chk->add_option("--data", ca.data, "data.csv");
  chk->add_option("--r", ca.r, "Specific factors per arm")->capture_default_str();
  chk->add_option("--T", ca.T, "Panel length");
  for (auto* sub : {sim, fit, sum, chk}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUser;
  }

  try {
    if (*sim) return cmd_simulate(g);
    if (*fit) return cmd_fit(g, fa);
    if (*sum) return cmd_summarize(g, sa);
    if (*chk) return cmd_check(g, ca);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  }
  return kExitUser;
}
