#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fatreat/model.hpp"
#include "fatreat/stats_core.hpp"

namespace fatreat {

/// Data-generating processes: factor-augmented, shared factor (zeta = 0) and
/// switching regression.
enum class Generator { kFA, kSF, kSR };

inline std::string to_string(Generator g) {
  switch (g) {
    case Generator::kFA: return "FA";
    case Generator::kSF: return "SF";
    case Generator::kSR: return "SR";
  }
  return "?";
}

struct CovariateRecipe {
  /// Shared continuous covariates, N(0,1), entering both V and W.
  int continuous = 2;
  /// Bernoulli(0.5) instrument entering V only.
  bool instrument = true;
  /// Per-period N(0, sd^2) perturbation of W around the subject's value.
  double time_varying_sd = 0.0;
  /// Observed panel lengths are drawn uniformly from min_periods..T;
  /// 0 means every subject is observed for all T periods.
  int min_periods = 0;
  /// Explicit designs replace the generated ones when both are set.
  std::optional<MatrixXd> V;
  std::optional<MatrixXd> W;
};

struct SimConfig {
  int n = 0;
  int T = 4;
  Generator kind = Generator::kFA;
  Coefficients coefficients;
  /// FA/SF: full loadings (SF requires zeta = 0). SR: lambda0/lambda1 are the
  /// arm-specific factor loadings; lambda_x and zeta must be zero.
  FactorLoadings loadings;
  /// SR only: Cov(eps_x, eps_j) per arm.
  VectorXd omega0;
  VectorXd omega1;
  IdiosyncraticVariances variances;
  CovariateRecipe covariates;
  std::uint64_t seed = 1;
};

struct GroundTruth {
  MatrixXd y0;
  MatrixXd y1;
  VectorXd xstar;
  /// SR has no common factor; f_c is zero there.
  VectorXd f_c;
  VectorXd f_0;
  VectorXd f_1;
  VectorXd ate;
};

struct Simulation {
  PanelDataset data;
  GroundTruth truth;
  std::vector<std::string> warnings;
};

/// Intercept, optional Bernoulli(0.5) instrument and `continuous` N(0,1)
/// covariates in V; W holds the continuous covariates for every period.
inline std::pair<MatrixXd, MatrixXd> default_covariates(int n, int T, stats::RandomStream& rng,
                                                        int continuous = 2, bool instrument = true,
                                                        double time_varying_sd = 0.0) {
  if (n < 0 || T < 1 || continuous < 0) throw InvalidArgument("default_covariates: bad sizes");
  const int offset = instrument ? 2 : 1;
  MatrixXd V(n, offset + continuous);
  MatrixXd W(static_cast<Eigen::Index>(n) * T, continuous);
  for (int i = 0; i < n; ++i) {
    V(i, 0) = 1.0;
    if (instrument) V(i, 1) = rng.coin() ? 1.0 : 0.0;
    for (int k = 0; k < continuous; ++k) V(i, offset + k) = rng.normal();
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < continuous; ++k) {
        double w = V(i, offset + k);
        if (time_varying_sd > 0.0) w += time_varying_sd * rng.normal();
        W(i * T + t, k) = w;
      }
  }
  return {V, W};
}

namespace detail {

inline void check_vec(const VectorXd& v, Eigen::Index size, const char* what) {
  if (v.size() != size) throw InvalidConfig(std::string("SimConfig: wrong length for ") + what);
  if (!v.allFinite()) throw InvalidConfig(std::string("SimConfig: non-finite ") + what);
}

}  // namespace detail

inline int design_columns_v(const SimConfig& c) {
  if (c.covariates.V) return static_cast<int>(c.covariates.V->cols());
  return (c.covariates.instrument ? 2 : 1) + c.covariates.continuous;
}

inline int design_columns_w(const SimConfig& c) {
  if (c.covariates.W) return static_cast<int>(c.covariates.W->cols());
  return c.covariates.continuous;
}

inline void validate(const SimConfig& c) {
  if (c.n < 0 || c.T < 1) throw InvalidConfig("SimConfig: need n >= 0 and T >= 1");
  if (c.covariates.V.has_value() != c.covariates.W.has_value())
    throw InvalidConfig("SimConfig: explicit V and W must be given together");
  if (c.covariates.V) {
    if (c.covariates.V->rows() != c.n || c.covariates.W->rows() != static_cast<Eigen::Index>(c.n) * c.T)
      throw InvalidConfig("SimConfig: explicit design has wrong number of rows");
  }
  const int p_v = design_columns_v(c), p_w = design_columns_w(c);
  detail::check_vec(c.coefficients.alpha, p_v, "alpha");
  detail::check_vec(c.coefficients.mu, c.T, "mu");
  detail::check_vec(c.coefficients.kappa, c.T, "kappa");
  detail::check_vec(c.coefficients.gamma, p_w, "gamma");
  detail::check_vec(c.coefficients.theta, p_w, "theta");
  detail::check_vec(c.loadings.lambda0, c.T, "lambda0");
  detail::check_vec(c.loadings.lambda1, c.T, "lambda1");
  detail::check_vec(c.loadings.zeta0, c.T, "zeta0");
  detail::check_vec(c.loadings.zeta1, c.T, "zeta1");
  detail::check_vec(c.variances.sigma2_0, c.T, "sigma2_0");
  detail::check_vec(c.variances.sigma2_1, c.T, "sigma2_1");
  if ((c.variances.sigma2_0.array() <= 0.0).any() || (c.variances.sigma2_1.array() <= 0.0).any())
    throw InvalidConfig("SimConfig: idiosyncratic variances must be positive");
  if (c.covariates.min_periods < 0 || c.covariates.min_periods > c.T)
    throw InvalidConfig("SimConfig: min_periods must lie in 0..T");

  const bool zeta_zero = c.loadings.zeta0.isZero(0.0) && c.loadings.zeta1.isZero(0.0);
  switch (c.kind) {
    case Generator::kFA: break;
    case Generator::kSF:
      if (!zeta_zero) throw InvalidConfig("SimConfig: SF requires zeta0 = zeta1 = 0");
      break;
    case Generator::kSR: {
      if (c.loadings.lambda_x != 0.0 || !zeta_zero)
        throw InvalidConfig("SimConfig: SR uses only lambda0/lambda1; lambda_x and zeta must be 0");
      for (int arm = 0; arm < 2; ++arm) {
        const VectorXd& omega = arm == 0 ? c.omega0 : c.omega1;
        detail::check_vec(omega, c.T, arm == 0 ? "omega0" : "omega1");
        MatrixXd joint(c.T + 1, c.T + 1);
        joint.setZero();
        joint(0, 0) = 1.0;
        joint.block(1, 0, c.T, 1) = omega;
        joint.block(0, 1, 1, c.T) = omega.transpose();
        joint.block(1, 1, c.T, c.T).diagonal() = c.variances.sigma2(arm);
        if (!is_psd(joint))
          throw InvalidConfig("SimConfig: SR covariance [[1, omega'],[omega, S]] is not PSD for arm " +
                              std::to_string(arm));
      }
      break;
    }
  }
}

/// Draws a synthetic panel with full ground truth.
///
/// Random streams: covariates use seed-derived stream 0, panel lengths stream
/// 1 and the subject-level errors stream 2, so SF output is bit-identical to
/// FA output with zeta = 0.
inline Simulation simulate(const SimConfig& config) {
  validate(config);
  const int n = config.n, T = config.T;
  const auto& coef = config.coefficients;
  const auto& load = config.loadings;
  stats::RandomStream root(config.seed);

  Simulation sim;
  PanelDataset& d = sim.data;
  d.T = T;
  if (config.covariates.V) {
    d.V = *config.covariates.V;
    d.W = *config.covariates.W;
  } else {
    auto rng = root.derive(0);
    std::tie(d.V, d.W) = default_covariates(n, T, rng, config.covariates.continuous,
                                            config.covariates.instrument,
                                            config.covariates.time_varying_sd);
  }
  d.periods = VectorXi::Constant(n, T);
  if (config.covariates.min_periods > 0 && config.covariates.min_periods < T) {
    auto rng = root.derive(1);
    const int lo = config.covariates.min_periods;
    for (int i = 0; i < n; ++i)
      d.periods[i] = lo + static_cast<int>(rng.index(static_cast<std::uint64_t>(T - lo + 1)));
  }
  d.x.resize(n);
  d.Y = MatrixXd::Constant(n, T, kMissing);

  GroundTruth& g = sim.truth;
  g.y0.resize(n, T);
  g.y1.resize(n, T);
  g.xstar.resize(n);
  g.f_c = VectorXd::Zero(n);
  g.f_0.resize(n);
  g.f_1.resize(n);

  std::optional<stats::GaussianFactor> sr_factor[2];
  if (config.kind == Generator::kSR) {
    for (int arm = 0; arm < 2; ++arm) {
      const VectorXd& omega = arm == 0 ? config.omega0 : config.omega1;
      MatrixXd cond = -omega * omega.transpose();
      cond.diagonal() += config.variances.sigma2(arm);
      sr_factor[arm].emplace(cond);
    }
  }

  auto rng = root.derive(2);
  VectorXd eps(T);
  for (int i = 0; i < n; ++i) {
    const double index = d.V.row(i).dot(coef.alpha);
    if (config.kind == Generator::kSR) {
      const double ex = rng.normal();
      g.xstar[i] = index + ex;
      for (int arm = 0; arm < 2; ++arm) {
        const VectorXd& omega = arm == 0 ? config.omega0 : config.omega1;
        const double f = rng.normal();
        (arm == 0 ? g.f_0 : g.f_1)[i] = f;
        eps = omega * ex + sr_factor[arm]->draw(rng) + load.lambda(arm) * f;
        MatrixXd& y = arm == 0 ? g.y0 : g.y1;
        for (int t = 0; t < T; ++t) y(i, t) = structural_mean(arm, t, d.w_row(i, t), coef) + eps[t];
      }
    } else {
      const double fc = rng.normal(), f0 = rng.normal(), f1 = rng.normal();
      g.f_c[i] = fc;
      g.f_0[i] = f0;
      g.f_1[i] = f1;
      g.xstar[i] = index + load.lambda_x * fc + rng.normal();
      for (int arm = 0; arm < 2; ++arm) {
        const double fj = arm == 0 ? f0 : f1;
        const VectorXd& s2 = config.variances.sigma2(arm);
        MatrixXd& y = arm == 0 ? g.y0 : g.y1;
        for (int t = 0; t < T; ++t)
          y(i, t) = structural_mean(arm, t, d.w_row(i, t), coef) + load.lambda(arm)[t] * fc +
                    load.zeta(arm)[t] * fj + std::sqrt(s2[t]) * rng.normal();
      }
    }
    d.x[i] = g.xstar[i] > 0.0 ? 1 : 0;
    const MatrixXd& y = d.x[i] == 1 ? g.y1 : g.y0;
    for (int t = 0; t < d.periods[i]; ++t) d.Y(i, t) = y(i, t);
  }
  g.ate = ate_true(coef, d);

  if (config.kind != Generator::kSR && !check_identification(T, 1))
    sim.warnings.push_back(identification_message(T, 1));
  return sim;
}

}  // namespace fatreat
