// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "fatreat/gibbs.hpp"
#include "fatreat/inference.hpp"
#include "fatreat/io.hpp"
#include "fatreat/simulator.hpp"
#include "fatreat/stats/hpd.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace fatreat;
using gibbs::SamplerState;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

io::RunConfig scenario(const std::string& name) {
  return io::read_run_config(fs::path(FATREAT_SCENARIO_DIR) / name);
}

struct Coverage {
  int covered = 0;
  int checks = 0;
  bool any_miss = false;
};

// Fits the scenario simulated at `seed` and counts periods whose true ATE
// lies in the 95% HPD interval.
Coverage fit_coverage(const io::RunConfig& rc, std::uint64_t seed, gibbs::ModelKind model,
                      gibbs::ChainOutput* keep = nullptr) {
  SimConfig sc = *rc.simulate;
  sc.seed = seed;
  const auto sim = simulate(sc);
  gibbs::ChainConfig cc = rc.fit.chain;
  cc.seed = rc.fit.chain.seed * seed;
  cc.model = model;
  const auto t0 = std::chrono::steady_clock::now();
  auto out = gibbs::run_chain(sim.data, rc.prior.resolve(Dims::of(sim.data)), cc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Coverage c;
  std::printf("    %s data, %s fit, seed %llu (%.0f s):", to_string(sc.kind).c_str(), gibbs::to_string(model).c_str(),
              static_cast<unsigned long long>(seed), secs);
  for (int t = 0; t < sc.T; ++t) {
    std::vector<double> col(out.ate.col(t).data(), out.ate.col(t).data() + out.ate.rows());
    const auto h = stats::hpd_interval_unsorted(col, 0.95);
    const double truth = sim.truth.ate[t];
    const bool in = h.lo <= truth && truth <= h.hi;
    c.covered += in;
    ++c.checks;
    c.any_miss |= !in;
    std::printf(" t%d %.3f in [%.3f, %.3f]%s", t + 1, truth, h.lo, h.hi, in ? "" : " MISS");
  }
  std::printf("\n");
  std::fflush(stdout);
  if (keep) *keep = std::move(out);
  return c;
}

// Shared between criteria 1, 2 and 8.
struct FitCache {
  bool done = false;
  Coverage fa_sf, fa_sr;
  int sf_fit_seeds_missing = 0;
  gibbs::ChainOutput sf_seed1;
};

FitCache& fits() {
  static FitCache cache;
  if (cache.done) return cache;
  const auto sf = scenario("scenario_sf.json");
  const auto sr = scenario("scenario_sr.json");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto a = fit_coverage(sf, seed, gibbs::ModelKind::kFactorAugmented, seed == 1 ? &cache.sf_seed1 : nullptr);
    const auto b = fit_coverage(sr, seed, gibbs::ModelKind::kFactorAugmented);
    const auto c = fit_coverage(sr, seed, gibbs::ModelKind::kSharedFactor);
    cache.fa_sf.covered += a.covered;
    cache.fa_sf.checks += a.checks;
    cache.fa_sr.covered += b.covered;
    cache.fa_sr.checks += b.checks;
    cache.sf_fit_seeds_missing += c.any_miss;
  }
  cache.done = true;
  return cache;
}

// ---------------------------------------------------------------- 1, 2

Verdict criterion1() {
  const auto& f = fits();
  const int covered = f.fa_sf.covered + f.fa_sr.covered, checks = f.fa_sf.checks + f.fa_sr.checks;
  return {checks == 40 && covered >= 36, "FA fit coverage " + std::to_string(covered) + "/" + std::to_string(checks) +
                                              " (SF data " + std::to_string(f.fa_sf.covered) + ", SR data " +
                                              std::to_string(f.fa_sr.covered) + "), need >= 36"};
}

Verdict criterion2() {
  const auto& f = fits();
  const auto c1 = criterion1();
  return {f.sf_fit_seeds_missing >= 4 && c1.pass,
          "SF fit on SR data misses in " + std::to_string(f.sf_fit_seeds_missing) +
              "/5 seeds (need >= 4); FA fit coverage criterion " + (c1.pass ? "met" : "NOT met")};
}

// ---------------------------------------------------------------- 3

Verdict criterion3() {
  stats::RandomStream rng(303);
  double worst_trunc = 0, worst_outcome = 0;
  for (int k = 0; k < 50; ++k) {
    const double mean = 3 * rng.normal(), sd = 0.2 + 2.5 * rng.uniform();
    double lo = mean + sd * (6 * rng.uniform() - 4), hi = lo + sd * (0.1 + 4 * rng.uniform());
    if (k % 3 == 0) hi = oracle::kInf;
    if (k % 3 == 1) lo = -oracle::kInf;
    const auto m = stats::trunc_moments(mean, sd, {lo, hi});
    const auto q = oracle::truncated_normal(mean, sd, lo, hi);
    worst_trunc = std::max({worst_trunc, std::abs(m.mean - q.mean), std::abs(m.variance - q.variance)});
  }
  for (int k = 0; k < 50; ++k) {
    const int T = 4;
    ParameterDraw p = zero_parameters({T, 2, 1});
    p.coefficients = {stats::standard_normal_vector(2, rng), stats::standard_normal_vector(T, rng),
                      stats::standard_normal_vector(T, rng), stats::standard_normal_vector(1, rng),
                      stats::standard_normal_vector(1, rng)};
    auto& l = p.loadings;
    l = {rng.normal(), stats::standard_normal_vector(T, rng), stats::standard_normal_vector(T, rng),
         stats::standard_normal_vector(T, rng), stats::standard_normal_vector(T, rng)};
    for (int t = 0; t < T; ++t) {
      p.variances.sigma2_0[t] = 0.2 + 2 * rng.uniform();
      p.variances.sigma2_1[t] = 0.2 + 2 * rng.uniform();
    }
    VectorXd v(2);
    v << 1.0, 2 * rng.normal();
    const MatrixXd W = MatrixXd::Random(T, 1);
    const int arm = k % 2;
    const auto m = observed_outcome_moments(arm, v, W, p);
    // joint covariance of (eps_x, eps_arm) from independent factors
    MatrixXd load = MatrixXd::Zero(T + 1, 2);
    load(0, 0) = l.lambda_x;
    load.block(1, 0, T, 1) = l.lambda(arm);
    load.block(1, 1, T, 1) = l.zeta(arm);
    MatrixXd S = load * load.transpose();
    S(0, 0) += 1.0;
    for (int t = 0; t < T; ++t) S(1 + t, 1 + t) += p.variances.sigma2(arm)[t];
    const auto [shift, cov] = oracle::selected_moments(S, arm, v.dot(p.coefficients.alpha));
    for (int t = 0; t < T; ++t)
      worst_outcome = std::max(worst_outcome, std::abs(m.mean[t] - structural_mean(arm, t, W.row(t).transpose(),
                                                                                    p.coefficients) - shift[t]));
    worst_outcome = std::max(worst_outcome, (m.covariance - cov).cwiseAbs().maxCoeff());
  }

  double worst_mc = 0;
  const int n = 1000000, T = 4;
  for (int k = 0; k < 5; ++k) {
    SimConfig c;
    c.n = n;
    c.T = T;
    c.seed = 3300 + k;
    c.coefficients = {VectorXd(2), VectorXd(T), stats::standard_normal_vector(T, rng), VectorXd::Constant(1, 0.5),
                      VectorXd::Constant(1, -0.3)};
    c.coefficients.alpha << 0.3 * rng.normal(), 0.5 * rng.normal();
    for (int t = 0; t < T; ++t) c.coefficients.mu[t] = 1.5 + 1.5 * rng.uniform();
    c.loadings = {0.3 + rng.uniform(), stats::standard_normal_vector(T, rng) * 0.7,
                  stats::standard_normal_vector(T, rng) * 0.7, stats::standard_normal_vector(T, rng) * 0.5,
                  stats::standard_normal_vector(T, rng) * 0.5};
    c.variances = {VectorXd::Constant(T, 0.5 + rng.uniform()), VectorXd::Constant(T, 0.5 + rng.uniform())};
    VectorXd v(2);
    v << 1.0, rng.normal();
    MatrixXd W(T, 1);
    for (int t = 0; t < T; ++t) W(t, 0) = rng.normal();
    c.covariates.V = MatrixXd(v.transpose().replicate(n, 1));
    c.covariates.W = MatrixXd(W.replicate(n, 1));
    const auto sim = simulate(c);
    ParameterDraw p = zero_parameters({T, 2, 1});
    p.coefficients = c.coefficients;
    p.loadings = c.loadings;
    p.variances = c.variances;
    for (int arm = 0; arm < 2; ++arm) {
      std::vector<int> rows;
      for (int i = 0; i < n; ++i)
        if (sim.data.x[i] == arm) rows.push_back(i);
      MatrixXd Y(rows.size(), T);
      for (std::size_t r = 0; r < rows.size(); ++r) Y.row(r) = sim.data.Y.row(rows[r]);
      const VectorXd mean = Y.colwise().mean().transpose();
      const MatrixXd C = Y.rowwise() - mean.transpose();
      const MatrixXd cov = C.transpose() * C / static_cast<double>(Y.rows() - 1);
      const auto m = observed_outcome_moments(arm, v, W, p);
      for (int t = 0; t < T; ++t) {
        worst_mc = std::max(worst_mc, std::abs(mean[t] - m.mean[t]) / std::abs(m.mean[t]));
        worst_mc = std::max(worst_mc, std::abs(cov(t, t) - m.covariance(t, t)) / m.covariance(t, t));
      }
      worst_mc = std::max(worst_mc, (cov - m.covariance).norm() / m.covariance.norm());
    }
  }
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "max |err| vs quadrature: trunc_moments %.2e, observed_outcome_moments %.2e (need < 1e-8); "
                "max rel err vs 1e6-subject MC %.4f (need < 0.02)",
                worst_trunc, worst_outcome, worst_mc);
  return {worst_trunc < 1e-8 && worst_outcome < 1e-8 && worst_mc < 0.02, buf};
}

// ---------------------------------------------------------------- 4

namespace geweke {

// Redraws (x*, f_spec, x, Y) given the parameters and f_c.
void simulate_data(SamplerState& s, PanelDataset& d, stats::RandomStream& rng) {
  const auto& c = s.draw.coefficients;
  const auto& l = s.draw.loadings;
  for (int i = 0; i < d.n(); ++i) {
    s.latent.xstar[i] = d.V.row(i).dot(c.alpha) + l.lambda_x * s.latent.f_c[i] + rng.normal();
    s.latent.f_spec[i] = rng.normal();
    d.x[i] = s.latent.xstar[i] > 0 ? 1 : 0;
    const int j = d.x[i];
    for (int t = 0; t < d.T; ++t)
      d.Y(i, t) = t < d.periods[i] ? structural_mean(j, t, d.w_row(i, t), c) + l.lambda(j)[t] * s.latent.f_c[i] +
                                         l.zeta(j)[t] * s.latent.f_spec[i] +
                                         std::sqrt(s.draw.variances.sigma2(j)[t]) * rng.normal()
                                   : kMissing;
  }
}

SamplerState from_prior(const PanelDataset& d, const gibbs::PriorSpec& prior, stats::RandomStream& rng) {
  SamplerState s;
  s.draw = gibbs::draw_from_prior(Dims::of(d), prior, gibbs::ModelKind::kFactorAugmented, rng);
  s.latent.f_c = stats::standard_normal_vector(d.n(), rng);
  s.latent.f_spec = VectorXd::Zero(d.n());
  s.latent.xstar = VectorXd::Zero(d.n());
  return s;
}

std::vector<double> statistics(const SamplerState& s, const PanelDataset& d, std::vector<std::string>* names) {
  std::vector<double> g;
  auto add = [&](const std::string& name, double v) {
    g.push_back(v);
    if (names) names->push_back(name);
  };
  const auto& p = s.draw;
  const auto& c = p.coefficients;
  const auto& l = p.loadings;
  for (int k = 0; k < c.alpha.size(); ++k) add("alpha[" + std::to_string(k + 1) + "]", c.alpha[k]);
  const VectorXd b = stack_beta(c);
  for (int k = 0; k < b.size(); ++k) add("beta[" + std::to_string(k + 1) + "]", b[k]);
  add("lambda_x^2", l.lambda_x * l.lambda_x);
  add("|lambda0|^2", l.lambda0.squaredNorm());
  add("|lambda1|^2", l.lambda1.squaredNorm());
  add("|zeta0|^2", l.zeta0.squaredNorm());
  add("|zeta1|^2", l.zeta1.squaredNorm());
  add("lambda_x*sum(lambda0)", l.lambda_x * l.lambda0.sum());
  add("lambda_x*sum(lambda1)", l.lambda_x * l.lambda1.sum());
  add("lambda0.lambda1", l.lambda0.dot(l.lambda1));
  add("log sigma2_0[1]", std::log(p.variances.sigma2_0[0]));
  add("log sigma2_1[2]", std::log(p.variances.sigma2_1[1]));
  add("pi_alpha", p.pi_alpha);
  add("pi_beta", p.pi_beta);
  double included = 0;
  for (auto v : p.delta_beta) included += v;
  add("sum delta_beta", included);
  const double xbar = d.x.cast<double>().mean();
  add("mean x", xbar);
  double ysum = 0;
  int count = 0;
  for (int i = 0; i < d.n(); ++i)
    for (int t = 0; t < d.periods[i]; ++t) {
      ysum += d.Y(i, t);
      ++count;
    }
  add("mean y", ysum / count);
  add("alpha[2]*mean x", c.alpha[1] * xbar);
  add("theta[1]*mean y", c.theta[0] * ysum / count);
  return g;
}

}  // namespace geweke

Verdict criterion4() {
  const int n = 20, T = 4;
  const long M = 100000, batches = 50;
  stats::RandomStream root(404);
  auto design_rng = root.derive(0);
  // intercept + binary instrument in V; two continuous covariates in W
  const auto [V_full, W] = default_covariates(n, T, design_rng, 2, true);
  PanelDataset d;
  d.T = T;
  d.V = V_full.leftCols(2);
  d.W = W;
  d.x = VectorXi::Zero(n);
  d.Y = MatrixXd::Zero(n, T);
  d.periods = VectorXi::Constant(n, T);
  for (int i = 0; i < n; i += 3) d.periods[i] = 2;
  gibbs::PriorSpec prior;
  prior.V_beta_free = 4.0;
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<std::string> names;
  std::vector<oracle::Accumulator> marginal;
  {
    auto rng = root.derive(1);
    PanelDataset dm = d;
    for (long m = 0; m < M; ++m) {
      auto s = geweke::from_prior(dm, prior, rng);
      geweke::simulate_data(s, dm, rng);
      const auto g = geweke::statistics(s, dm, m == 0 ? &names : nullptr);
      if (m == 0) marginal.resize(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) marginal[k].add(g[k]);
    }
  }
  const std::size_t G = names.size();
  std::vector<std::vector<double>> batch_sum(G, std::vector<double>(batches, 0.0));
  {
    auto rng = root.derive(2);
    auto s = geweke::from_prior(d, prior, rng);
    geweke::simulate_data(s, d, rng);
    const long per_batch = M / batches;
    for (long m = 0; m < M; ++m) {
      gibbs::Workspace ws(d);
      gibbs::sweep(s, d, prior, gibbs::ModelKind::kFactorAugmented, true, true, ws, rng);
      geweke::simulate_data(s, d, rng);
      const auto g = geweke::statistics(s, d, nullptr);
      for (std::size_t k = 0; k < G; ++k) batch_sum[k][m / per_batch] += g[k] / per_batch;
    }
  }
  double worst = 0;
  std::string worst_name;
  for (std::size_t k = 0; k < G; ++k) {
    oracle::Accumulator b;
    for (double v : batch_sum[k]) b.add(v);
    const double z = (marginal[k].mean() - b.mean()) / std::sqrt(marginal[k].variance() / M + b.variance() / batches);
    std::printf("    %-22s marginal %9.4f successive %9.4f z %6.2f\n", names[k].c_str(), marginal[k].mean(), b.mean(),
                z);
    if (!(std::abs(z) <= worst)) {
      worst = std::abs(z);
      worst_name = names[k];
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu statistics, max |z| = %.2f (%s), need < 4 on >= 20; %.0f s", G, worst,
                worst_name.c_str(), secs);
  return {G >= 20 && worst < 4.0, buf};
}

// ---------------------------------------------------------------- 5

Verdict criterion5() {
  stats::RandomStream rng(505);
  double worst_block = 0, worst_product = 0, worst_eig = -1e300;
  for (int k = 0; k < 100; ++k) {
    const int T = 1 + static_cast<int>(rng.index(8));
    FactorLoadings l{rng.normal(), stats::standard_normal_vector(T, rng), stats::standard_normal_vector(T, rng),
                     stats::standard_normal_vector(T, rng), stats::standard_normal_vector(T, rng)};
    IdiosyncraticVariances s{VectorXd(T), VectorXd(T)};
    for (int t = 0; t < T; ++t) {
      s.sigma2_0[t] = 0.05 + 3 * rng.uniform();
      s.sigma2_1[t] = 0.05 + 3 * rng.uniform();
    }
    const MatrixXd S = build_joint_covariance(l, s);
    // explicit blocks
    MatrixXd E(2 * T + 1, 2 * T + 1);
    E(0, 0) = 1 + l.lambda_x * l.lambda_x;
    for (int j = 0; j < 2; ++j)
      for (int t = 0; t < T; ++t) {
        E(0, 1 + j * T + t) = E(1 + j * T + t, 0) = l.lambda_x * l.lambda(j)[t];
        for (int u = 0; u < T; ++u) {
          E(1 + j * T + t, 1 + j * T + u) =
              l.lambda(j)[t] * l.lambda(j)[u] + l.zeta(j)[t] * l.zeta(j)[u] + (t == u ? s.sigma2(j)[t] : 0.0);
          E(1 + j * T + t, 1 + (1 - j) * T + u) = l.lambda(j)[t] * l.lambda(1 - j)[u];
        }
      }
    MatrixXd L = MatrixXd::Zero(2 * T + 1, 3);
    L(0, 0) = l.lambda_x;
    L.block(1, 0, T, 1) = l.lambda0;
    L.block(1 + T, 0, T, 1) = l.lambda1;
    L.block(1, 1, T, 1) = l.zeta0;
    L.block(1 + T, 2, T, 1) = l.zeta1;
    VectorXd diag(2 * T + 1);
    diag << 1.0, s.sigma2_0, s.sigma2_1;
    const MatrixXd P = L * L.transpose() + MatrixXd(diag.asDiagonal());
    worst_block = std::max(worst_block, (S - E).cwiseAbs().maxCoeff());
    worst_product = std::max(worst_product, (S - P).cwiseAbs().maxCoeff());
    const VectorXd eig = Eigen::SelfAdjointEigenSolver<MatrixXd>(S).eigenvalues();
    worst_eig = std::max(worst_eig, -eig.minCoeff() / eig.maxCoeff());
  }
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "100 draws: max |S - blocks| %.1e, max |S - LL' - D| %.1e (need < 1e-12); max -eig_min/eig_max %.2e "
                "(need <= 1e-8)",
                worst_block, worst_product, worst_eig);
  return {worst_block < 1e-12 && worst_product < 1e-12 && worst_eig <= 1e-8, buf};
}

// ---------------------------------------------------------------- 6

Verdict criterion6() {
  const bool ok = !check_identification(3, 1) && check_identification(4, 1) && check_identification(6, 2) &&
                  check_identification(8, 3);
  return {ok, "(3,1) rejected; (4,1), (6,2), (8,3) accepted"};
}

// ---------------------------------------------------------------- 7

Verdict criterion7() {
  PanelDataset d;
  d.T = 4;
  d.x = VectorXi(0);
  d.V = MatrixXd(0, 2);
  d.W = MatrixXd(0, 1);
  d.Y = MatrixXd(0, 4);
  d.periods = VectorXi(0);
  gibbs::PriorSpec prior;
  gibbs::ChainConfig cc;
  cc.burn_in = 1000;
  cc.selection_start = 500;
  cc.iterations = cc.burn_in + 50000;
  cc.thin = 1;
  cc.seed = 707;
  cc.skip_identification_check = true;
  const auto out = gibbs::run_chain(d, prior, cc);
  const auto m = inference::to_draw_matrix(out);

  // MC standard errors from the effective sample size of the draws (mean)
  // and of the squared deviations (variance).
  int checks = 0, failures = 0;
  double worst = 0;
  std::string worst_name;
  auto check = [&](const std::string& name, std::vector<double> x, double mean, double var) {
    const auto s = oracle::summarize(x);
    const double ess = inference::effective_sample_size(x).value;
    std::vector<double> dev(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) dev[k] = (x[k] - s.mean) * (x[k] - s.mean);
    const auto sd = oracle::summarize(dev);
    const double ess_dev = inference::effective_sample_size(dev).value;
    const double z_mean = (s.mean - mean) / (std::sqrt(s.variance / ess));
    const double z_var = (s.variance - var) / (std::sqrt(sd.variance / ess_dev));
    for (double z : {z_mean, z_var}) {
      ++checks;
      failures += std::abs(z) >= 3.0;
      if (std::abs(z) > worst) {
        worst = std::abs(z);
        worst_name = name;
      }
    }
  };
  auto column = [&](const std::string& name) {
    const int c = m.column(name);
    return std::vector<double>(m.values.col(c).data(), m.values.col(c).data() + m.values.rows());
  };
  // sigma2 ~ InvGamma(2.5, 2.5): the draw variance has no finite variance
  // of its own, so its spread is checked on the log scale.
  const double a = prior.s0[0], b = prior.S0[0];
  for (int j = 0; j < 2; ++j)
    for (int t = 1; t <= 4; ++t) {
      const std::string name = "sigma2_" + std::to_string(j) + "[" + std::to_string(t) + "]";
      auto x = column(name);
      const auto s = oracle::summarize(x);
      const double ess = inference::effective_sample_size(x).value;
      const double z = (s.mean - b / (a - 1)) / std::sqrt(s.variance / ess);
      ++checks;
      failures += std::abs(z) >= 3.0;
      if (std::abs(z) > worst) {
        worst = std::abs(z);
        worst_name = name;
      }
      for (auto& v : x) v = std::log(v);
      check("log " + name, x, std::log(b) - boost::math::digamma(a), boost::math::trigamma(a));
    }
  std::vector<std::string> loadings{"lambda_x"};
  for (const char* base : {"lambda0", "lambda1", "zeta0", "zeta1"})
    for (int t = 1; t <= 4; ++t) loadings.push_back(std::string(base) + "[" + std::to_string(t) + "]");
  for (const auto& name : loadings) check(name, column(name), 0.0, prior.loading_var);
  const double pa = prior.beta_a, pb = prior.beta_b;
  for (const char* name : {"pi_alpha", "pi_beta"})
    check(name, column(name), pa / (pa + pb), pa * pb / ((pa + pb) * (pa + pb) * (pa + pb + 1)));
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d of %d prior-moment checks beyond 3 MC SE over %zu draws; max |z| %.2f (%s)",
                failures, checks, out.draws.size(), worst, worst_name.c_str());
  return {failures == 0, buf};
}

// ---------------------------------------------------------------- 8

Verdict criterion8() {
  // signal: the SF scenario has theta = (0.5, 0); its seed-1 FA fit is shared
  // with criterion 1
  const auto& f = fits();
  double signal = 0;
  const int p_w = f.sf_seed1.dims.p_w;
  const int col = f.sf_seed1.dims.theta(0);
  for (const auto& p : f.sf_seed1.draws) signal += p.delta_beta[col];
  signal /= static_cast<double>(f.sf_seed1.draws.size());

  auto rc = scenario("scenario_sf.json");
  SimConfig sc = *rc.simulate;
  sc.coefficients.theta.setZero();
  sc.seed = 808;
  const auto sim = simulate(sc);
  gibbs::ChainConfig cc = rc.fit.chain;
  cc.seed = 809;
  const auto out = gibbs::run_chain(sim.data, rc.prior.resolve(Dims::of(sim.data)), cc);
  double null_incl = 0;
  for (int l = 0; l < p_w; ++l)
    for (const auto& p : out.draws) null_incl += p.delta_beta[out.dims.theta(l)];
  null_incl /= static_cast<double>(out.draws.size() * p_w);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "theta = 0: mean inclusion %.3f (need < 0.5); theta_1 = 0.5: inclusion %.3f (need > 0.9)", null_incl,
                signal);
  return {null_incl < 0.5 && signal > 0.9, buf};
}

// ---------------------------------------------------------------- 9

Verdict criterion9() {
  auto rc = scenario("scenario_sr.json");
  SimConfig sc = *rc.simulate;
  sc.n = 500;
  const auto sim = simulate(sc);
  gibbs::ChainConfig cc;
  cc.iterations = 2000;
  cc.burn_in = 500;
  cc.selection_start = 250;
  cc.thin = 5;
  cc.seed = 909;
  const auto prior = rc.prior.resolve(Dims::of(sim.data));
  const fs::path dir = fs::temp_directory_path() / "fatreat_acceptance_determinism";
  fs::create_directories(dir);
  io::write_file(dir / "a.csv", io::draws_csv(gibbs::run_chain(sim.data, prior, cc)));
  io::write_file(dir / "b.csv", io::draws_csv(gibbs::run_chain(sim.data, prior, cc)));
  const std::string a = io::read_file(dir / "a.csv"), b = io::read_file(dir / "b.csv");
  fs::remove_all(dir);
  return {!a.empty() && a == b, "two runs, " + std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {3, criterion3}, {5, criterion5}, {6, criterion6}, {9, criterion9}, {4, criterion4},
      {7, criterion7}, {1, criterion1}, {2, criterion2}, {8, criterion8}};
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));
  int failed = 0;
  std::vector<std::pair<int, std::string>> lines;
  for (const auto& [id, fn] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    std::printf("criterion %d ...\n", id);
    std::fflush(stdout);
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    char buf[64];
    std::snprintf(buf, sizeof buf, "C%d %s: ", id, v.pass ? "PASS" : "FAIL");
    lines.emplace_back(id, buf + v.detail);
    std::printf("%s\n", lines.back().second.c_str());
    std::fflush(stdout);
  }
  std::sort(lines.begin(), lines.end());
  std::printf("\n");
  for (const auto& l : lines) std::printf("%s\n", l.second.c_str());
  return failed == 0 ? 0 : 1;
}
