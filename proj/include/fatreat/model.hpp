#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fatreat/errors.hpp"
#include "fatreat/stats_core.hpp"

namespace fatreat {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

using Indicators = std::vector<std::uint8_t>;

enum class Arm : int { kControl = 0, kTreated = 1 };

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Observed panel. Subject i has binary treatment x[i], selection covariates
/// V.row(i) and an outcome panel observed on periods 0..periods[i]-1
/// (a prefix). Outcome covariates for (i, t) live in W.row(i*T + t).
/// Unobserved outcome cells hold NaN and are never read.
struct PanelDataset {
  int T = 0;
  VectorXi x;
  MatrixXd V;
  MatrixXd W;
  MatrixXd Y;
  VectorXi periods;

  int n() const { return static_cast<int>(x.size()); }
  int p_v() const { return static_cast<int>(V.cols()); }
  int p_w() const { return static_cast<int>(W.cols()); }
  bool observed(int i, int t) const { return t < periods[i]; }
  auto w_row(int i, int t) const { return W.row(static_cast<Eigen::Index>(i) * T + t); }

  /// Number of subjects in arm j observed in period t.
  int count(int arm, int t) const {
    int c = 0;
    for (int i = 0; i < n(); ++i)
      if (x[i] == arm && observed(i, t)) ++c;
    return c;
  }
};

inline void validate(const PanelDataset& d) {
  const Eigen::Index n = d.x.size();
  if (d.T < 1) throw InvalidArgument("PanelDataset: T must be >= 1");
  if (d.V.rows() != n || d.Y.rows() != n || d.Y.cols() != d.T || d.periods.size() != n ||
      d.W.rows() != n * d.T)
    throw InvalidArgument("PanelDataset: inconsistent dimensions");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d.x[i] != 0 && d.x[i] != 1) throw InvalidArgument("PanelDataset: x must be 0/1");
    if (d.periods[i] < 1 || d.periods[i] > d.T)
      throw InvalidArgument("PanelDataset: every subject needs 1..T observed periods");
    for (int t = 0; t < d.periods[i]; ++t) {
      if (!std::isfinite(d.Y(i, t))) throw InvalidArgument("PanelDataset: non-finite outcome");
      if (!d.W.row(i * d.T + t).allFinite())
        throw InvalidArgument("PanelDataset: non-finite outcome covariate");
    }
  }
  if (!d.V.allFinite()) throw InvalidArgument("PanelDataset: non-finite selection covariate");
}

/// Regression effects. mu/kappa are per-period intercepts and treatment
/// shifts; gamma are control-arm covariate effects and theta the treatment
/// modifiers, so the treated arm uses gamma + theta.
struct Coefficients {
  VectorXd alpha;
  VectorXd mu;
  VectorXd kappa;
  VectorXd gamma;
  VectorXd theta;
};

struct FactorLoadings {
  double lambda_x = 0.0;
  VectorXd lambda0;
  VectorXd lambda1;
  VectorXd zeta0;
  VectorXd zeta1;

  const VectorXd& lambda(int arm) const { return arm == 0 ? lambda0 : lambda1; }
  VectorXd& lambda(int arm) { return arm == 0 ? lambda0 : lambda1; }
  const VectorXd& zeta(int arm) const { return arm == 0 ? zeta0 : zeta1; }
  VectorXd& zeta(int arm) { return arm == 0 ? zeta0 : zeta1; }
  int T() const { return static_cast<int>(lambda0.size()); }
};

struct IdiosyncraticVariances {
  VectorXd sigma2_0;
  VectorXd sigma2_1;

  const VectorXd& sigma2(int arm) const { return arm == 0 ? sigma2_0 : sigma2_1; }
  VectorXd& sigma2(int arm) { return arm == 0 ? sigma2_0 : sigma2_1; }
};

/// Model dimensions shared by parameters and data.
struct Dims {
  int T = 0;
  int p_v = 0;
  int p_w = 0;

  static Dims of(const PanelDataset& d) { return {d.T, d.p_v(), d.p_w()}; }
  /// beta = (mu, kappa, gamma, theta)
  int p_beta() const { return 2 * T + 2 * p_w; }
  int mu(int t) const { return t; }
  int kappa(int t) const { return T + t; }
  int gamma(int l) const { return 2 * T + l; }
  int theta(int l) const { return 2 * T + p_w + l; }
};

/// One full parameter state. delta_alpha covers every alpha coordinate and
/// delta_beta every coordinate of beta = (mu, kappa, gamma, theta); mandatory
/// coordinates carry 1.
struct ParameterDraw {
  Coefficients coefficients;
  FactorLoadings loadings;
  IdiosyncraticVariances variances;
  Indicators delta_alpha;
  Indicators delta_beta;
  double pi_alpha = 0.5;
  double pi_beta = 0.5;

  Dims dims() const {
    return {static_cast<int>(coefficients.mu.size()), static_cast<int>(coefficients.alpha.size()),
            static_cast<int>(coefficients.gamma.size())};
  }
};

/// Per-subject augmented variables. f_spec holds the specific factor of the
/// arm the subject was observed in; the other arm's factor never enters the
/// augmented likelihood.
struct LatentState {
  VectorXd xstar;
  VectorXd f_c;
  VectorXd f_spec;
};

inline ParameterDraw zero_parameters(const Dims& d) {
  ParameterDraw p;
  p.coefficients = {VectorXd::Zero(d.p_v), VectorXd::Zero(d.T), VectorXd::Zero(d.T),
                    VectorXd::Zero(d.p_w), VectorXd::Zero(d.p_w)};
  p.loadings = {0.0, VectorXd::Zero(d.T), VectorXd::Zero(d.T), VectorXd::Zero(d.T),
                VectorXd::Zero(d.T)};
  p.variances = {VectorXd::Ones(d.T), VectorXd::Ones(d.T)};
  p.delta_alpha.assign(d.p_v, 1);
  p.delta_beta.assign(d.p_beta(), 1);
  return p;
}

inline void check_dims(const Coefficients& c, int T, int p_w) {
  if (c.mu.size() != T || c.kappa.size() != T || c.gamma.size() != p_w || c.theta.size() != p_w)
    throw InvalidArgument("Coefficients: dimension mismatch");
}

inline void check_dims(const FactorLoadings& l, const IdiosyncraticVariances& s) {
  const auto T = l.lambda0.size();
  if (l.lambda1.size() != T || l.zeta0.size() != T || l.zeta1.size() != T ||
      s.sigma2_0.size() != T || s.sigma2_1.size() != T)
    throw InvalidArgument("loadings/variances: inconsistent T");
}

/// Stacked beta vector (mu, kappa, gamma, theta).
inline VectorXd stack_beta(const Coefficients& c) {
  VectorXd b(c.mu.size() + c.kappa.size() + c.gamma.size() + c.theta.size());
  b << c.mu, c.kappa, c.gamma, c.theta;
  return b;
}

inline void unstack_beta(const VectorXd& b, const Dims& d, Coefficients& c) {
  c.mu = b.segment(0, d.T);
  c.kappa = b.segment(d.T, d.T);
  c.gamma = b.segment(2 * d.T, d.p_w);
  c.theta = b.segment(2 * d.T + d.p_w, d.p_w);
}

/// eta_{j,t}(w): mu_t + w.gamma for the control arm,
/// (mu_t + kappa_t) + w.(gamma + theta) for the treated arm.
template <typename Row>
double structural_mean(int arm, int t, const Row& w, const Coefficients& c) {
  if (t < 0 || t >= c.mu.size() || c.kappa.size() != c.mu.size())
    throw InvalidArgument("structural_mean: period out of range");
  if (w.size() != c.gamma.size() || c.theta.size() != c.gamma.size())
    throw InvalidArgument("structural_mean: covariate dimension mismatch");
  double m = c.mu[t] + w.dot(c.gamma);
  if (arm == 1) m += c.kappa[t] + w.dot(c.theta);
  return m;
}

/// (2T+1) x 3 loadings matrix of (x*, y_0, y_1) on (f_c, f_0, f_1).
inline MatrixXd loadings_matrix(const FactorLoadings& l) {
  const int T = l.T();
  MatrixXd L = MatrixXd::Zero(2 * T + 1, 3);
  L(0, 0) = l.lambda_x;
  L.block(1, 0, T, 1) = l.lambda0;
  L.block(1 + T, 0, T, 1) = l.lambda1;
  L.block(1, 1, T, 1) = l.zeta0;
  L.block(1 + T, 2, T, 1) = l.zeta1;
  return L;
}

/// Joint covariance of (eps_x, eps_0', eps_1') assembled block by block.
inline MatrixXd build_joint_covariance(const FactorLoadings& l, const IdiosyncraticVariances& s) {
  check_dims(l, s);
  const int T = l.T();
  MatrixXd S(2 * T + 1, 2 * T + 1);
  S(0, 0) = 1.0 + l.lambda_x * l.lambda_x;
  const VectorXd sx0 = l.lambda_x * l.lambda0;
  const VectorXd sx1 = l.lambda_x * l.lambda1;
  S.block(1, 0, T, 1) = sx0;
  S.block(0, 1, 1, T) = sx0.transpose();
  S.block(1 + T, 0, T, 1) = sx1;
  S.block(0, 1 + T, 1, T) = sx1.transpose();
  MatrixXd s0 = l.lambda0 * l.lambda0.transpose() + l.zeta0 * l.zeta0.transpose();
  s0.diagonal() += s.sigma2_0;
  MatrixXd s1 = l.lambda1 * l.lambda1.transpose() + l.zeta1 * l.zeta1.transpose();
  s1.diagonal() += s.sigma2_1;
  const MatrixXd s01 = l.lambda0 * l.lambda1.transpose();
  S.block(1, 1, T, T) = s0;
  S.block(1 + T, 1 + T, T, T) = s1;
  S.block(1, 1 + T, T, T) = s01;
  S.block(1 + T, 1, T, T) = s01.transpose();
  return S;
}

/// Symmetric PSD check with eigenvalue floor -tol * lambda_max.
inline bool is_psd(const MatrixXd& m, double tol = 1e-8) {
  if (m.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  return es.eigenvalues().minCoeff() >= -tol * top;
}

/// alpha / sqrt(1 + lambda_x^2): the only identified scale of the selection
/// effects.
inline VectorXd standardize_alpha(const Coefficients& c, const FactorLoadings& l) {
  return c.alpha / std::sqrt(1.0 + l.lambda_x * l.lambda_x);
}

/// Necessary counting condition T(T+1) >= 2(r+1)T + 1 for identifying r
/// outcome-specific factors per arm.
inline bool check_identification(int T, int r) {
  if (T < 1 || r < 1) throw InvalidArgument("check_identification: T and r must be >= 1");
  const long long lhs = static_cast<long long>(T) * (T + 1);
  const long long rhs = 2LL * (r + 1) * T + 1;
  return lhs >= rhs;
}

inline std::string identification_message(int T, int r) {
  const long long lhs = static_cast<long long>(T) * (T + 1);
  const long long rhs = 2LL * (r + 1) * T + 1;
  return "panel length T=" + std::to_string(T) + " with r=" + std::to_string(r) +
         " specific factor(s) fails the identification condition T(T+1) >= 2(r+1)T+1 (" +
         std::to_string(lhs) + " < " + std::to_string(rhs) + ")";
}

struct OutcomeMoments {
  VectorXd mean;
  MatrixXd covariance;
};

/// Mean and covariance of the observed outcome panel of a subject with
/// selection row v and outcome covariate rows W_rows (one per period),
/// conditional on being observed in `arm`.
inline OutcomeMoments observed_outcome_moments(int arm, const VectorXd& v, const MatrixXd& W_rows,
                                               const ParameterDraw& p) {
  const auto& c = p.coefficients;
  const auto& l = p.loadings;
  const int T = static_cast<int>(W_rows.rows());
  if (v.size() != c.alpha.size()) throw InvalidArgument("observed_outcome_moments: v size");
  if (T > c.mu.size() || W_rows.cols() != c.gamma.size())
    throw InvalidArgument("observed_outcome_moments: W size");
  check_dims(l, p.variances);

  const double sigma_x = std::sqrt(1.0 + l.lambda_x * l.lambda_x);
  const double m = v.dot(standardize_alpha(c, l));
  // Probability of landing in `arm` must be representable.
  const double log_prob = arm == 1 ? stats::norm_log_cdf(m) : stats::norm_log_sf(m);
  if (log_prob < std::log(stats::kDegenerateMassFloor))
    throw DegenerateError("observed_outcome_moments: arm has negligible probability");
  const auto mt = stats::mills_terms(m);
  const double cj = arm == 1 ? mt.c1 : mt.c0;

  const VectorXd sigma_tilde = (l.lambda_x / sigma_x) * l.lambda(arm).head(T);
  OutcomeMoments out;
  out.mean.resize(T);
  for (int t = 0; t < T; ++t) out.mean[t] = structural_mean(arm, t, W_rows.row(t).transpose(), c);
  out.mean += cj * sigma_tilde;

  const VectorXd lam = l.lambda(arm).head(T);
  const VectorXd zet = l.zeta(arm).head(T);
  out.covariance = lam * lam.transpose() + zet * zet.transpose();
  out.covariance.diagonal() += p.variances.sigma2(arm).head(T);
  out.covariance -= cj * (m + cj) * sigma_tilde * sigma_tilde.transpose();
  return out;
}

/// Per-period average of w_it observed at t; 0 when no subject is observed.
inline MatrixXd period_covariate_means(const PanelDataset& d) {
  MatrixXd wbar = MatrixXd::Zero(d.T, d.p_w());
  for (int t = 0; t < d.T; ++t) {
    int count = 0;
    for (int i = 0; i < d.n(); ++i) {
      if (!d.observed(i, t)) continue;
      wbar.row(t) += d.w_row(i, t);
      ++count;
    }
    if (count > 0) wbar.row(t) /= count;
  }
  return wbar;
}

/// In-sample ATE_t = kappa_t + mean_i w_it.theta, averaging over subjects
/// observed in period t.
inline VectorXd ate_true(const Coefficients& c, const PanelDataset& d) {
  check_dims(c, d.T, d.p_w());
  return c.kappa + period_covariate_means(d) * c.theta;
}

}  // namespace fatreat
