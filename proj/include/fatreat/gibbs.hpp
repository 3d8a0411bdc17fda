#pragma once

// Gibbs sampler for the factor-augmented treatment-effects model.
//
// Each sweep runs, in order:
//   1. idiosyncratic variances            (inverse gamma, per arm and period)
//   2. (f_c, f_spec) per subject          (bivariate normal)
//   3. latent utilities x*                (univariate truncated normal)
//   4. selection block (delta_alpha, alpha, lambda_x)
//   5. outcome block (delta_beta, beta, lambda_0, lambda_1, zeta_0, zeta_1)
//   6. boosting by marginal data augmentation, then a random sign switch
//   7. inclusion probabilities pi_alpha, pi_beta (Beta)
//
// Steps 4 and 5 share one spike-and-slab regression kernel: indicators are
// drawn one at a time, in random order, from their conditional posterior
// with all included coefficients integrated out, followed by a joint normal
// draw of the included block.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fatreat/errors.hpp"
#include "fatreat/model.hpp"
#include "fatreat/stats_core.hpp"

namespace fatreat::gibbs {

using stats::RandomStream;

/// Factor-augmented (bi-factor) or shared-factor (zeta fixed at 0) fit.
enum class ModelKind { kFactorAugmented, kSharedFactor };

inline std::string to_string(ModelKind m) {
  return m == ModelKind::kFactorAugmented ? "FA" : "SF";
}

struct PriorSpec {
  /// Variance of the mandatory alpha coordinates and of the alpha slab.
  double V_alpha = 5.0;
  /// Variance of mandatory beta coordinates.
  double V_beta_free = 1e4;
  /// Slab variance of selectable beta coordinates.
  double V_beta_slab = 5.0;
  /// Beta(a, b) prior on pi_alpha and pi_beta.
  double beta_a = 1.0;
  double beta_b = 1.0;
  /// InvGamma(s0_j, S0_j) prior on sigma2_{j,t}, per arm.
  std::array<double, 2> s0{2.5, 2.5};
  std::array<double, 2> S0{2.5, 2.5};
  /// N(0, loading_var) prior on every factor loading.
  double loading_var = 1.0;
  /// Indices into alpha that are never selected.
  std::vector<int> mandatory_alpha{0};
  /// Indices into beta = (mu, kappa, gamma, theta) that are never selected;
  /// unset means every mu_t and kappa_t.
  std::optional<std::vector<int>> mandatory_beta;
  /// InvGamma(shape, scale) working prior of the boosting scale.
  double boost_shape = 2.5;
  double boost_scale = 1.5;
};

inline std::vector<int> mandatory_beta_indices(const PriorSpec& prior, const Dims& dims) {
  if (prior.mandatory_beta) return *prior.mandatory_beta;
  std::vector<int> out(2 * dims.T);
  std::iota(out.begin(), out.end(), 0);
  return out;
}

inline Indicators selectable_mask(int size, const std::vector<int>& mandatory) {
  Indicators mask(size, 1);
  for (int k : mandatory) mask.at(k) = 0;
  return mask;
}

inline void validate(const PriorSpec& p, const Dims& dims) {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(p.V_alpha) || !positive(p.V_beta_free) || !positive(p.V_beta_slab) ||
      !positive(p.beta_a) || !positive(p.beta_b) || !positive(p.s0[0]) || !positive(p.s0[1]) ||
      !positive(p.S0[0]) || !positive(p.S0[1]) || !positive(p.loading_var) ||
      !positive(p.boost_shape) || !positive(p.boost_scale))
    throw InvalidConfig("PriorSpec: all variances and hyperparameters must be positive");
  auto in_range = [](const std::vector<int>& idx, int size) {
    for (int k : idx)
      if (k < 0 || k >= size) return false;
    return true;
  };
  const auto mb = mandatory_beta_indices(p, dims);
  if (!in_range(p.mandatory_alpha, dims.p_v) || !in_range(mb, dims.p_beta()))
    throw InvalidConfig("PriorSpec: mandatory index out of range");
  if (std::find(p.mandatory_alpha.begin(), p.mandatory_alpha.end(), 0) == p.mandatory_alpha.end())
    throw InvalidConfig("PriorSpec: the selection intercept must be mandatory");
  if (std::find(mb.begin(), mb.end(), dims.mu(0)) == mb.end())
    throw InvalidConfig("PriorSpec: mu_1 must be mandatory");
}

struct ChainConfig {
  long iterations = 20000;
  long burn_in = 5000;
  long thin = 10;
  /// Indicator moves start after this many sweeps; before that every
  /// coordinate is included.
  long selection_start = 2500;
  std::uint64_t seed = 1;
  bool store_latents = false;
  bool skip_identification_check = false;
  bool boosting = true;
  ModelKind model = ModelKind::kFactorAugmented;

  long stored_draws() const { return (iterations - burn_in) / thin; }
};

inline void validate(const ChainConfig& c) {
  if (c.iterations < 0 || c.burn_in < 0 || c.selection_start < 0)
    throw InvalidConfig("ChainConfig: counts must be non-negative");
  if (!(c.selection_start <= c.burn_in && c.burn_in <= c.iterations))
    throw InvalidConfig("ChainConfig: require selection_start <= burn_in <= iterations");
  if (c.thin < 1) throw InvalidConfig("ChainConfig: thin must be >= 1");
}

struct SamplerState {
  ParameterDraw draw;
  LatentState latent;
};

/// Subjects of one arm observed in one period, with the data-only parts of
/// the normal equations over the basis (1, w).
struct CellGroup {
  std::vector<int> subjects;
  MatrixXd design_moments;  // sum of (1, w)(1, w)'
  VectorXd design_response; // sum of (1, w) y
};

/// Data-dependent quantities reused across sweeps.
struct Workspace {
  std::array<std::vector<int>, 2> arm_subjects;
  std::array<std::vector<CellGroup>, 2> cells;  // [arm][period]
  MatrixXd wbar;       // T x p_w, for the per-draw ATE
  MatrixXd eta;        // n x T structural means at the current beta
  VectorXd index;      // V * alpha

  explicit Workspace(const PanelDataset& d) {
    const int pw = d.p_w();
    for (int i = 0; i < d.n(); ++i) arm_subjects[d.x[i]].push_back(i);
    VectorXd u(pw + 1);
    for (int j = 0; j < 2; ++j) {
      cells[j].resize(d.T);
      for (int t = 0; t < d.T; ++t) {
        CellGroup& g = cells[j][t];
        g.design_moments = MatrixXd::Zero(pw + 1, pw + 1);
        g.design_response = VectorXd::Zero(pw + 1);
        for (int i : arm_subjects[j]) {
          if (t >= d.periods[i]) continue;
          g.subjects.push_back(i);
          u[0] = 1.0;
          u.tail(pw) = d.w_row(i, t).transpose();
          g.design_moments.noalias() += u * u.transpose();
          g.design_response += d.Y(i, t) * u;
        }
      }
    }
    wbar = period_covariate_means(d);
    eta = MatrixXd::Zero(d.n(), d.T);
    index = VectorXd::Zero(d.n());
  }

  void refresh_eta(const PanelDataset& d, const Coefficients& c) {
    const VectorXd g1 = c.gamma + c.theta;
    for (int i = 0; i < d.n(); ++i) {
      const bool treated = d.x[i] == 1;
      for (int t = 0; t < d.periods[i]; ++t) {
        const auto w = d.w_row(i, t);
        eta(i, t) = treated ? c.mu[t] + c.kappa[t] + w.dot(g1) : c.mu[t] + w.dot(c.gamma);
      }
    }
  }

  void refresh_index(const PanelDataset& d, const Coefficients& c) { index.noalias() = d.V * c.alpha; }
};

// --------------------------------------------------------------------------
// Step 1

struct InverseGammaParams {
  double shape;
  double scale;
};

/// Posterior InvGamma(s0 + n_jt/2, S0 + Se_jt/2) of every sigma2_{j,t}.
inline std::array<std::vector<InverseGammaParams>, 2> variance_posteriors(
    const SamplerState& s, const PanelDataset& d, const PriorSpec& prior, const Workspace& ws) {
  const auto& l = s.draw.loadings;
  std::array<std::vector<InverseGammaParams>, 2> out;
  for (int j = 0; j < 2; ++j) {
    std::vector<double> sse(d.T, 0.0);
    std::vector<int> count(d.T, 0);
    const VectorXd& lam = l.lambda(j);
    const VectorXd& zet = l.zeta(j);
    for (int i : ws.arm_subjects[j]) {
      const double fc = s.latent.f_c[i], fs = s.latent.f_spec[i];
      for (int t = 0; t < d.periods[i]; ++t) {
        const double r = d.Y(i, t) - ws.eta(i, t) - fc * lam[t] - fs * zet[t];
        sse[t] += r * r;
        ++count[t];
      }
    }
    out[j].resize(d.T);
    for (int t = 0; t < d.T; ++t)
      out[j][t] = {prior.s0[j] + 0.5 * count[t], prior.S0[j] + 0.5 * sse[t]};
  }
  return out;
}

inline void step1_update_variances(SamplerState& s, const PanelDataset& d, const PriorSpec& prior,
                                   const Workspace& ws, RandomStream& rng) {
  const auto post = variance_posteriors(s, d, prior, ws);
  for (int j = 0; j < 2; ++j)
    for (int t = 0; t < d.T; ++t)
      s.draw.variances.sigma2(j)[t] = stats::sample_inverse_gamma(post[j][t].shape, post[j][t].scale, rng);
}

// --------------------------------------------------------------------------
// Step 2

struct FactorPosterior {
  Eigen::Vector2d mean;
  Eigen::Matrix2d covariance;
};

namespace detail {

// Precision (Psi' S^-1 Psi + I) and shift Psi' S^-1 (eps_x, eps_j) of the
// (f_c, f_spec) full conditional of subject i.
inline void factor_canonical(int i, const SamplerState& s, const PanelDataset& d,
                             const Workspace& ws, Eigen::Matrix2d& prec, Eigen::Vector2d& shift) {
  const auto& l = s.draw.loadings;
  const int j = d.x[i];
  const VectorXd& lam = l.lambda(j);
  const VectorXd& zet = l.zeta(j);
  const VectorXd& s2 = s.draw.variances.sigma2(j);
  const double ex = s.latent.xstar[i] - ws.index[i];
  double pll = l.lambda_x * l.lambda_x, plz = 0.0, pzz = 0.0;
  double hl = l.lambda_x * ex, hz = 0.0;
  for (int t = 0; t < d.periods[i]; ++t) {
    const double inv = 1.0 / s2[t];
    const double e = d.Y(i, t) - ws.eta(i, t);
    pll += lam[t] * lam[t] * inv;
    plz += lam[t] * zet[t] * inv;
    pzz += zet[t] * zet[t] * inv;
    hl += lam[t] * e * inv;
    hz += zet[t] * e * inv;
  }
  prec << 1.0 + pll, plz, plz, 1.0 + pzz;
  shift << hl, hz;
}

}  // namespace detail

/// N(f_n, F_n) full conditional of (f_c, f_spec) for subject i, with
/// Psi_j = [[lambda_x, 0], [lambda_j, zeta_j]] and S = diag(1, sigma2_j)
/// over the subject's observed periods.
inline FactorPosterior factor_posterior(int i, const SamplerState& s, const PanelDataset& d,
                                        const Workspace& ws) {
  Eigen::Matrix2d prec;
  Eigen::Vector2d shift;
  detail::factor_canonical(i, s, d, ws, prec, shift);
  FactorPosterior out;
  out.covariance = prec.inverse();
  out.mean = out.covariance * shift;
  return out;
}

inline void step2_update_factors(SamplerState& s, const PanelDataset& d, const Workspace& ws,
                                 RandomStream& rng) {
  Eigen::Matrix2d prec;
  Eigen::Vector2d shift;
  for (int i = 0; i < d.n(); ++i) {
    detail::factor_canonical(i, s, d, ws, prec, shift);
    // prec = U'U with U upper triangular
    const double u11 = std::sqrt(prec(0, 0));
    const double u12 = prec(0, 1) / u11;
    const double u22 = std::sqrt(prec(1, 1) - u12 * u12);
    // mean = prec^{-1} shift
    const double det = prec(0, 0) * prec(1, 1) - prec(0, 1) * prec(0, 1);
    const double m1 = (prec(1, 1) * shift[0] - prec(0, 1) * shift[1]) / det;
    const double m2 = (prec(0, 0) * shift[1] - prec(0, 1) * shift[0]) / det;
    // solve U x = z
    const double z1 = rng.normal(), z2 = rng.normal();
    const double x2 = z2 / u22;
    const double x1 = (z1 - u12 * x2) / u11;
    s.latent.f_c[i] = m1 + x1;
    s.latent.f_spec[i] = m2 + x2;
  }
}

// --------------------------------------------------------------------------
// Step 3

inline void step3_update_utilities(SamplerState& s, const PanelDataset& d, const Workspace& ws,
                                   RandomStream& rng) {
  const double lx = s.draw.loadings.lambda_x;
  for (int i = 0; i < d.n(); ++i) {
    const double mean = ws.index[i] + lx * s.latent.f_c[i];
    const auto bounds = d.x[i] == 1 ? stats::TruncationBounds::positive()
                                    : stats::TruncationBounds::negative();
    s.latent.xstar[i] = stats::sample_truncated_normal(mean, 1.0, bounds, rng);
  }
}

// --------------------------------------------------------------------------
// Spike-and-slab regression kernel shared by steps 4 and 5.

/// log p(y | included) up to a constant common to every inclusion pattern,
/// for y ~ N(X b, Sigma) with independent N(0, prior_var) priors on the
/// included coordinates, given gram = X' Sigma^-1 X and shift = X' Sigma^-1 y.
inline double log_marginal(const MatrixXd& gram, const VectorXd& shift, const VectorXd& prior_var,
                           const Indicators& included) {
  std::vector<int> idx;
  idx.reserve(included.size());
  for (std::size_t k = 0; k < included.size(); ++k)
    if (included[k]) idx.push_back(static_cast<int>(k));
  const int m = static_cast<int>(idx.size());
  if (m == 0) return 0.0;
  MatrixXd prec(m, m);
  VectorXd h(m);
  double log_det_prior = 0.0;
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) prec(a, b) = gram(idx[a], idx[b]);
    prec(a, a) += 1.0 / prior_var[idx[a]];
    h[a] = shift[idx[a]];
    log_det_prior += std::log(prior_var[idx[a]]);
  }
  Eigen::LLT<MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success)
    throw NumericalError("spike-and-slab: posterior precision is not positive definite");
  const VectorXd half = llt.matrixL().solve(h);
  const double log_det_prec = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * log_det_prior - 0.5 * log_det_prec + 0.5 * half.squaredNorm();
}

/// P(delta_k = 1 | all other indicators, data) with the coefficients
/// integrated out.
inline double inclusion_probability(const MatrixXd& gram, const VectorXd& shift,
                                    const VectorXd& prior_var, Indicators included, int k,
                                    double pi) {
  included[k] = 1;
  const double l1 = log_marginal(gram, shift, prior_var, included);
  included[k] = 0;
  const double l0 = log_marginal(gram, shift, prior_var, included);
  const double log_odds = std::log(pi) - std::log1p(-pi) + l1 - l0;
  return 1.0 / (1.0 + std::exp(-log_odds));
}

struct SelectionTally {
  long flips = 0;
  long proposals = 0;
};

/// Updates `included` over the selectable coordinates (if active) and draws
/// the included coefficients jointly; excluded coordinates return exactly 0.
inline VectorXd spike_slab_update(const MatrixXd& gram, const VectorXd& shift,
                                  const VectorXd& prior_var, const Indicators& selectable,
                                  Indicators& included, double pi, bool selection_active,
                                  RandomStream& rng, SelectionTally* tally = nullptr) {
  const int p = static_cast<int>(shift.size());
  if (selection_active) {
    std::vector<int> order;
    for (int k = 0; k < p; ++k)
      if (selectable[k]) order.push_back(k);
    for (std::size_t a = order.size(); a > 1; --a)
      std::swap(order[a - 1], order[rng.index(a)]);
    const double log_prior_odds = std::log(pi) - std::log1p(-pi);
    double current = log_marginal(gram, shift, prior_var, included);
    for (int k : order) {
      const std::uint8_t was = included[k];
      included[k] = !was;
      const double alternative = log_marginal(gram, shift, prior_var, included);
      const double l1 = was ? current : alternative;
      const double l0 = was ? alternative : current;
      const double p_in = 1.0 / (1.0 + std::exp(-(log_prior_odds + l1 - l0)));
      included[k] = rng.uniform() < p_in ? 1 : 0;
      current = included[k] ? l1 : l0;
      if (tally) {
        ++tally->proposals;
        if (included[k] != was) ++tally->flips;
      }
    }
  } else {
    for (int k = 0; k < p; ++k)
      if (selectable[k]) included[k] = 1;
  }

  std::vector<int> idx;
  for (int k = 0; k < p; ++k)
    if (included[k]) idx.push_back(k);
  const int m = static_cast<int>(idx.size());
  MatrixXd prec(m, m);
  VectorXd h(m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) prec(a, b) = gram(idx[a], idx[b]);
    prec(a, a) += 1.0 / prior_var[idx[a]];
    h[a] = shift[idx[a]];
  }
  const VectorXd draw = stats::sample_mvn_precision(prec, h, rng);
  VectorXd out = VectorXd::Zero(p);
  for (int a = 0; a < m; ++a) out[idx[a]] = draw[a];
  return out;
}

// --------------------------------------------------------------------------
// Step 4

struct RegressionSystem {
  MatrixXd gram;
  VectorXd shift;
  VectorXd prior_var;
  Indicators selectable;
  Indicators included;
};

/// Working regression x* = V alpha + f_c lambda_x + N(0, 1); coordinates
/// (alpha, lambda_x).
inline RegressionSystem selection_system(const SamplerState& s, const PanelDataset& d,
                                         const PriorSpec& prior) {
  const int p = d.p_v();
  MatrixXd X(d.n(), p + 1);
  X.leftCols(p) = d.V;
  X.col(p) = s.latent.f_c;
  RegressionSystem sys;
  sys.gram = MatrixXd::Zero(p + 1, p + 1);
  sys.gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
  sys.gram = sys.gram.selfadjointView<Eigen::Lower>();
  sys.shift = X.transpose() * s.latent.xstar;
  sys.prior_var = VectorXd::Constant(p + 1, prior.V_alpha);
  sys.prior_var[p] = prior.loading_var;
  sys.selectable = selectable_mask(p, prior.mandatory_alpha);
  sys.selectable.push_back(0);
  sys.included = s.draw.delta_alpha;
  sys.included.push_back(1);
  return sys;
}

inline void step4_update_selection_block(SamplerState& s, const PanelDataset& d,
                                         const PriorSpec& prior, RandomStream& rng,
                                         bool selection_active, SelectionTally* tally = nullptr) {
  auto sys = selection_system(s, d, prior);
  const VectorXd coef = spike_slab_update(sys.gram, sys.shift, sys.prior_var, sys.selectable,
                                          sys.included, s.draw.pi_alpha, selection_active, rng,
                                          tally);
  const int p = d.p_v();
  s.draw.coefficients.alpha = coef.head(p);
  s.draw.loadings.lambda_x = coef[p];
  s.draw.delta_alpha.assign(sys.included.begin(), sys.included.begin() + p);
}

// --------------------------------------------------------------------------
// Step 5

/// Coordinate layout of the outcome block: beta, then lambda_0, lambda_1,
/// zeta_0, zeta_1 (T each).
struct OutcomeLayout {
  Dims dims;
  int size() const { return dims.p_beta() + 4 * dims.T; }
  int lambda(int arm, int t) const { return dims.p_beta() + arm * dims.T + t; }
  int zeta(int arm, int t) const { return dims.p_beta() + 2 * dims.T + arm * dims.T + t; }
};

/// Heteroskedastic stacked regression of every observed y_it on the beta
/// columns and the factor columns, accumulated per (arm, period) cell group
/// into the normal equations with weight 1/sigma2.
inline RegressionSystem outcome_system(const SamplerState& s, const PanelDataset& d,
                                       const PriorSpec& prior, ModelKind model,
                                       const Workspace& ws) {
  const Dims dims = Dims::of(d);
  const OutcomeLayout layout{dims};
  const int q = layout.size();
  const int pw = dims.p_w;
  RegressionSystem sys;
  sys.gram = MatrixXd::Zero(q, q);
  sys.shift = VectorXd::Zero(q);

  // Moments over the basis u = (1, w, f_c, f_spec).
  const int m = pw + 3;
  MatrixXd M(m, m);
  VectorXd r(m);
  VectorXd wfc(pw), wfs(pw);
  std::vector<int> cols, basis;
  for (int j = 0; j < 2; ++j) {
    cols.clear();
    basis.clear();
    for (int t = 0; t < dims.T; ++t) {
      const CellGroup& g = ws.cells[j][t];
      if (g.subjects.empty()) continue;
      double sc = 0, ss = 0, scc = 0, scs = 0, sss = 0, scy = 0, ssy = 0;
      wfc.setZero();
      wfs.setZero();
      for (int i : g.subjects) {
        const double fc = s.latent.f_c[i], fs = s.latent.f_spec[i], y = d.Y(i, t);
        sc += fc;
        ss += fs;
        scc += fc * fc;
        scs += fc * fs;
        sss += fs * fs;
        scy += fc * y;
        ssy += fs * y;
        const double* w = d.W.data();
        const Eigen::Index row = static_cast<Eigen::Index>(i) * d.T + t;
        for (int l = 0; l < pw; ++l) {
          const double wl = w[row + static_cast<Eigen::Index>(l) * d.W.rows()];
          wfc[l] += wl * fc;
          wfs[l] += wl * fs;
        }
      }
      M.topLeftCorner(pw + 1, pw + 1) = g.design_moments;
      M(pw + 1, 0) = M(0, pw + 1) = sc;
      M(pw + 2, 0) = M(0, pw + 2) = ss;
      M.block(pw + 1, 1, 1, pw) = wfc.transpose();
      M.block(1, pw + 1, pw, 1) = wfc;
      M.block(pw + 2, 1, 1, pw) = wfs.transpose();
      M.block(1, pw + 2, pw, 1) = wfs;
      M(pw + 1, pw + 1) = scc;
      M(pw + 1, pw + 2) = M(pw + 2, pw + 1) = scs;
      M(pw + 2, pw + 2) = sss;
      r.head(pw + 1) = g.design_response;
      r[pw + 1] = scy;
      r[pw + 2] = ssy;

      // Local design (mu_t, [kappa_t], gamma, [theta], lambda_jt, zeta_jt)
      // mapped onto the basis.
      cols.clear();
      basis.clear();
      cols.push_back(dims.mu(t));
      basis.push_back(0);
      if (j == 1) {
        cols.push_back(dims.kappa(t));
        basis.push_back(0);
      }
      for (int l = 0; l < pw; ++l) {
        cols.push_back(dims.gamma(l));
        basis.push_back(1 + l);
      }
      if (j == 1)
        for (int l = 0; l < pw; ++l) {
          cols.push_back(dims.theta(l));
          basis.push_back(1 + l);
        }
      cols.push_back(layout.lambda(j, t));
      basis.push_back(pw + 1);
      cols.push_back(layout.zeta(j, t));
      basis.push_back(pw + 2);

      const double inv = 1.0 / s.draw.variances.sigma2(j)[t];
      const int k = static_cast<int>(cols.size());
      for (int a = 0; a < k; ++a) {
        sys.shift[cols[a]] += inv * r[basis[a]];
        for (int b = 0; b < k; ++b) sys.gram(cols[a], cols[b]) += inv * M(basis[a], basis[b]);
      }
    }
  }

  const auto mandatory = mandatory_beta_indices(prior, dims);
  const Indicators beta_selectable = selectable_mask(dims.p_beta(), mandatory);
  sys.prior_var.resize(q);
  sys.selectable.assign(q, 0);
  sys.included.assign(q, 1);
  for (int k = 0; k < dims.p_beta(); ++k) {
    sys.selectable[k] = beta_selectable[k];
    sys.prior_var[k] = beta_selectable[k] ? prior.V_beta_slab : prior.V_beta_free;
    sys.included[k] = s.draw.delta_beta[k];
  }
  for (int k = dims.p_beta(); k < q; ++k) sys.prior_var[k] = prior.loading_var;
  if (model == ModelKind::kSharedFactor)
    for (int j = 0; j < 2; ++j)
      for (int t = 0; t < dims.T; ++t) sys.included[layout.zeta(j, t)] = 0;
  return sys;
}

inline void step5_update_outcome_block(SamplerState& s, const PanelDataset& d,
                                       const PriorSpec& prior, ModelKind model,
                                       const Workspace& ws, RandomStream& rng,
                                       bool selection_active, SelectionTally* tally = nullptr) {
  auto sys = outcome_system(s, d, prior, model, ws);
  const VectorXd coef = spike_slab_update(sys.gram, sys.shift, sys.prior_var, sys.selectable,
                                          sys.included, s.draw.pi_beta, selection_active, rng,
                                          tally);
  const Dims dims = Dims::of(d);
  const OutcomeLayout layout{dims};
  unstack_beta(coef.head(dims.p_beta()), dims, s.draw.coefficients);
  s.draw.delta_beta.assign(sys.included.begin(), sys.included.begin() + dims.p_beta());
  auto& l = s.draw.loadings;
  for (int j = 0; j < 2; ++j)
    for (int t = 0; t < dims.T; ++t) {
      l.lambda(j)[t] = coef[layout.lambda(j, t)];
      l.zeta(j)[t] = coef[layout.zeta(j, t)];
    }
}

// --------------------------------------------------------------------------
// Step 6

/// Factor groups: 0 = common, 1 = control-specific, 2 = treated-specific.
using GroupScales = std::array<double, 3>;
using GroupSigns = std::array<int, 3>;

/// Rescale f_g <- f_g / c_g and the group's loadings <- loadings * c_g.
inline void apply_boost(SamplerState& s, const PanelDataset& d, const GroupScales& c) {
  auto& l = s.draw.loadings;
  if (c[0] != 1.0) {
    l.lambda_x *= c[0];
    l.lambda0 *= c[0];
    l.lambda1 *= c[0];
    s.latent.f_c /= c[0];
  }
  for (int j = 0; j < 2; ++j) {
    if (c[1 + j] == 1.0) continue;
    l.zeta(j) *= c[1 + j];
    for (int i = 0; i < d.n(); ++i)
      if (d.x[i] == j) s.latent.f_spec[i] /= c[1 + j];
  }
}

/// Multiply each factor group and its loadings by tau_g in {-1, 1}.
inline void apply_sign_switch(SamplerState& s, const PanelDataset& d, const GroupSigns& tau) {
  auto& l = s.draw.loadings;
  if (tau[0] < 0) {
    l.lambda_x = -l.lambda_x;
    l.lambda0 = -l.lambda0;
    l.lambda1 = -l.lambda1;
    s.latent.f_c = -s.latent.f_c;
  }
  for (int j = 0; j < 2; ++j) {
    if (tau[1 + j] > 0) continue;
    l.zeta(j) = -l.zeta(j);
    for (int i = 0; i < d.n(); ++i)
      if (d.x[i] == j) s.latent.f_spec[i] = -s.latent.f_spec[i];
  }
}

/// Working scales by marginal data augmentation. For group g with n_g active
/// factors and K_g loadings: draw Psi_old from the InvGamma working prior,
/// expand (f~ = sqrt(Psi_old) f, Lambda~ = Lambda / sqrt(Psi_old)), draw
/// Psi_new from its conditional given the expanded quantities,
///   GIG(K_g/2 - n_g/2 - a, 2b + sum f~^2, sum Lambda~^2 / loading_var),
/// and map back with c_g = sqrt(Psi_new / Psi_old).
inline GroupScales draw_boost_scales(const SamplerState& s, const PanelDataset& d,
                                     const PriorSpec& prior, ModelKind model, RandomStream& rng) {
  const auto& l = s.draw.loadings;
  const int T = d.T;
  std::array<double, 3> f_ss{0.0, 0.0, 0.0};
  std::array<int, 3> n_g{d.n(), 0, 0};
  f_ss[0] = s.latent.f_c.squaredNorm();
  for (int i = 0; i < d.n(); ++i) {
    f_ss[1 + d.x[i]] += s.latent.f_spec[i] * s.latent.f_spec[i];
    ++n_g[1 + d.x[i]];
  }
  const std::array<double, 3> l_ss{
      l.lambda_x * l.lambda_x + l.lambda0.squaredNorm() + l.lambda1.squaredNorm(),
      l.zeta0.squaredNorm(), l.zeta1.squaredNorm()};
  const std::array<int, 3> k_g{2 * T + 1, T, T};

  GroupScales c{1.0, 1.0, 1.0};
  const int groups = model == ModelKind::kSharedFactor ? 1 : 3;
  for (int g = 0; g < groups; ++g) {
    const double psi_old = stats::sample_inverse_gamma(prior.boost_shape, prior.boost_scale, rng);
    const double lam = 0.5 * k_g[g] - 0.5 * n_g[g] - prior.boost_shape;
    const double chi = 2.0 * prior.boost_scale + psi_old * f_ss[g];
    const double psi = l_ss[g] / (psi_old * prior.loading_var);
    const double psi_new = stats::sample_gig(lam, chi, psi, rng);
    c[g] = std::sqrt(psi_new / psi_old);
  }
  return c;
}

struct BoostTally {
  std::array<double, 3> sum_log_scale{0.0, 0.0, 0.0};
  long sweeps = 0;
};

inline void step6_boost_and_signswitch(SamplerState& s, const PanelDataset& d,
                                       const PriorSpec& prior, ModelKind model, bool boosting,
                                       RandomStream& rng, BoostTally* tally = nullptr) {
  if (boosting) {
    const auto c = draw_boost_scales(s, d, prior, model, rng);
    apply_boost(s, d, c);
    if (tally) {
      for (int g = 0; g < 3; ++g) tally->sum_log_scale[g] += std::log(c[g]);
      ++tally->sweeps;
    }
  }
  GroupSigns tau{rng.coin() ? 1 : -1, 1, 1};
  if (model == ModelKind::kFactorAugmented) {
    tau[1] = rng.coin() ? 1 : -1;
    tau[2] = rng.coin() ? 1 : -1;
  }
  apply_sign_switch(s, d, tau);
}

// --------------------------------------------------------------------------
// Step 7

struct BetaParams {
  double a;
  double b;
};

inline std::array<BetaParams, 2> inclusion_posteriors(const ParameterDraw& p, const PriorSpec& prior,
                                                      const Dims& dims) {
  auto count = [](const Indicators& delta, const Indicators& selectable) {
    int k = 0, dsum = 0;
    for (std::size_t i = 0; i < delta.size(); ++i)
      if (selectable[i]) {
        ++dsum;
        k += delta[i];
      }
    return std::pair{k, dsum};
  };
  const auto [ka, da] = count(p.delta_alpha, selectable_mask(dims.p_v, prior.mandatory_alpha));
  const auto [kb, db] =
      count(p.delta_beta, selectable_mask(dims.p_beta(), mandatory_beta_indices(prior, dims)));
  return {BetaParams{prior.beta_a + ka, prior.beta_b + da - ka},
          BetaParams{prior.beta_a + kb, prior.beta_b + db - kb}};
}

inline void step7_update_inclusion_probs(ParameterDraw& p, const PriorSpec& prior,
                                         const Dims& dims, RandomStream& rng) {
  const auto post = inclusion_posteriors(p, prior, dims);
  p.pi_alpha = stats::sample_beta(post[0].a, post[0].b, rng);
  p.pi_beta = stats::sample_beta(post[1].a, post[1].b, rng);
}

// --------------------------------------------------------------------------
// Likelihood, prior draws, initialisation

/// log p(x, x*, y | parameters, factors); -inf if some x* disagrees in sign
/// with x.
inline double augmented_log_likelihood(const SamplerState& s, const PanelDataset& d) {
  const auto& c = s.draw.coefficients;
  const auto& l = s.draw.loadings;
  double ll = 0.0;
  for (int i = 0; i < d.n(); ++i) {
    const double xs = s.latent.xstar[i];
    if ((xs > 0.0) != (d.x[i] == 1)) return -std::numeric_limits<double>::infinity();
    const double e = xs - d.V.row(i).dot(c.alpha) - l.lambda_x * s.latent.f_c[i];
    ll += stats::norm_log_pdf(e);
    const int j = d.x[i];
    for (int t = 0; t < d.periods[i]; ++t) {
      const double s2 = s.draw.variances.sigma2(j)[t];
      const double r = d.Y(i, t) - structural_mean(j, t, d.w_row(i, t), c) -
                       l.lambda(j)[t] * s.latent.f_c[i] - l.zeta(j)[t] * s.latent.f_spec[i];
      ll += stats::norm_log_pdf(r / std::sqrt(s2)) - 0.5 * std::log(s2);
    }
  }
  return ll;
}

/// One draw from the full prior (including inclusion probabilities and
/// indicators).
inline ParameterDraw draw_from_prior(const Dims& dims, const PriorSpec& prior, ModelKind model,
                                     RandomStream& rng) {
  ParameterDraw p = zero_parameters(dims);
  p.pi_alpha = stats::sample_beta(prior.beta_a, prior.beta_b, rng);
  p.pi_beta = stats::sample_beta(prior.beta_a, prior.beta_b, rng);
  const Indicators sel_a = selectable_mask(dims.p_v, prior.mandatory_alpha);
  for (int k = 0; k < dims.p_v; ++k) {
    p.delta_alpha[k] = sel_a[k] ? (rng.uniform() < p.pi_alpha ? 1 : 0) : 1;
    p.coefficients.alpha[k] = p.delta_alpha[k] ? std::sqrt(prior.V_alpha) * rng.normal() : 0.0;
  }
  const Indicators sel_b = selectable_mask(dims.p_beta(), mandatory_beta_indices(prior, dims));
  VectorXd beta(dims.p_beta());
  for (int k = 0; k < dims.p_beta(); ++k) {
    p.delta_beta[k] = sel_b[k] ? (rng.uniform() < p.pi_beta ? 1 : 0) : 1;
    const double v = sel_b[k] ? prior.V_beta_slab : prior.V_beta_free;
    beta[k] = p.delta_beta[k] ? std::sqrt(v) * rng.normal() : 0.0;
  }
  unstack_beta(beta, dims, p.coefficients);
  const double sl = std::sqrt(prior.loading_var);
  auto& l = p.loadings;
  l.lambda_x = sl * rng.normal();
  for (int t = 0; t < dims.T; ++t) l.lambda0[t] = sl * rng.normal();
  for (int t = 0; t < dims.T; ++t) l.lambda1[t] = sl * rng.normal();
  for (int t = 0; t < dims.T; ++t) l.zeta0[t] = sl * rng.normal();
  for (int t = 0; t < dims.T; ++t) l.zeta1[t] = sl * rng.normal();
  if (model == ModelKind::kSharedFactor) {
    l.zeta0.setZero();
    l.zeta1.setZero();
  }
  for (int j = 0; j < 2; ++j)
    for (int t = 0; t < dims.T; ++t)
      p.variances.sigma2(j)[t] = stats::sample_inverse_gamma(prior.s0[j], prior.S0[j], rng);
  return p;
}

/// Dispersed starting state: alpha, beta ~ N(0, 0.1); loadings ~ N(0, 1);
/// variances from their prior; factors ~ N(0, 1); x* from its truncated
/// prior predictive.
inline SamplerState initial_state(const PanelDataset& d, const PriorSpec& prior, ModelKind model,
                                  RandomStream& rng) {
  const Dims dims = Dims::of(d);
  SamplerState s;
  s.draw = zero_parameters(dims);
  const double sd = std::sqrt(0.1);
  for (int k = 0; k < dims.p_v; ++k) s.draw.coefficients.alpha[k] = sd * rng.normal();
  VectorXd beta(dims.p_beta());
  for (int k = 0; k < dims.p_beta(); ++k) beta[k] = sd * rng.normal();
  unstack_beta(beta, dims, s.draw.coefficients);
  auto& l = s.draw.loadings;
  l.lambda_x = rng.normal();
  for (VectorXd* v : {&l.lambda0, &l.lambda1, &l.zeta0, &l.zeta1})
    for (int t = 0; t < dims.T; ++t) (*v)[t] = rng.normal();
  if (model == ModelKind::kSharedFactor) {
    l.zeta0.setZero();
    l.zeta1.setZero();
  }
  for (int j = 0; j < 2; ++j)
    for (int t = 0; t < dims.T; ++t)
      s.draw.variances.sigma2(j)[t] = stats::sample_inverse_gamma(prior.s0[j], prior.S0[j], rng);
  s.draw.pi_alpha = 0.5;
  s.draw.pi_beta = 0.5;

  const int n = d.n();
  s.latent.f_c.resize(n);
  s.latent.f_spec.resize(n);
  s.latent.xstar.resize(n);
  for (int i = 0; i < n; ++i) {
    s.latent.f_c[i] = rng.normal();
    s.latent.f_spec[i] = rng.normal();
  }
  for (int i = 0; i < n; ++i) {
    const double mean = d.V.row(i).dot(s.draw.coefficients.alpha) + l.lambda_x * s.latent.f_c[i];
    const auto bounds = d.x[i] == 1 ? stats::TruncationBounds::positive()
                                    : stats::TruncationBounds::negative();
    s.latent.xstar[i] = stats::sample_truncated_normal(mean, 1.0, bounds, rng);
  }
  return s;
}

// --------------------------------------------------------------------------
// Sweep and chain

struct ChainStats {
  SelectionTally alpha_selection;
  SelectionTally beta_selection;
  BoostTally boost;
};

/// One full sweep of steps 1-7.
inline void sweep(SamplerState& s, const PanelDataset& d, const PriorSpec& prior, ModelKind model,
                  bool boosting, bool selection_active, Workspace& ws, RandomStream& rng,
                  ChainStats* stats = nullptr) {
  const Dims dims = Dims::of(d);
  ws.refresh_eta(d, s.draw.coefficients);
  ws.refresh_index(d, s.draw.coefficients);
  step1_update_variances(s, d, prior, ws, rng);
  step2_update_factors(s, d, ws, rng);
  step3_update_utilities(s, d, ws, rng);
  step4_update_selection_block(s, d, prior, rng, selection_active,
                               stats ? &stats->alpha_selection : nullptr);
  step5_update_outcome_block(s, d, prior, model, ws, rng, selection_active,
                             stats ? &stats->beta_selection : nullptr);
  step6_boost_and_signswitch(s, d, prior, model, boosting, rng, stats ? &stats->boost : nullptr);
  if (selection_active) step7_update_inclusion_probs(s.draw, prior, dims, rng);
}

inline bool all_finite(const SamplerState& s, std::string* where = nullptr) {
  const auto& p = s.draw;
  auto check = [&](bool ok, const char* name) {
    if (!ok && where) *where = name;
    return ok;
  };
  return check(p.coefficients.alpha.allFinite(), "alpha") &&
         check(stack_beta(p.coefficients).allFinite(), "beta") &&
         check(std::isfinite(p.loadings.lambda_x), "lambda_x") &&
         check(p.loadings.lambda0.allFinite() && p.loadings.lambda1.allFinite(), "lambda") &&
         check(p.loadings.zeta0.allFinite() && p.loadings.zeta1.allFinite(), "zeta") &&
         check((p.variances.sigma2_0.array() > 0).all() && (p.variances.sigma2_1.array() > 0).all() &&
                   p.variances.sigma2_0.allFinite() && p.variances.sigma2_1.allFinite(),
               "sigma2") &&
         check(std::isfinite(p.pi_alpha) && std::isfinite(p.pi_beta), "pi") &&
         check(s.latent.xstar.allFinite(), "xstar") &&
         check(s.latent.f_c.allFinite() && s.latent.f_spec.allFinite(), "factors");
}

struct RunMetadata {
  std::uint64_t seed = 0;
  long iterations = 0;
  long burn_in = 0;
  long thin = 1;
  long selection_start = 0;
  ModelKind model = ModelKind::kFactorAugmented;
  bool boosting = true;
  int n = 0;
  int T = 0;
  int p_v = 0;
  int p_w = 0;
  double wall_seconds = 0.0;
};

struct ChainOutput {
  Dims dims;
  std::vector<ParameterDraw> draws;
  /// draws x T, ATE_t = kappa_t + wbar_t . theta per stored draw
  MatrixXd ate;
  std::vector<LatentState> latents;
  ChainStats stats;
  RunMetadata meta;
};

/// Per-draw in-sample ATE.
inline VectorXd draw_ate(const Coefficients& c, const MatrixXd& wbar) { return c.kappa + wbar * c.theta; }

inline ChainOutput run_chain(const PanelDataset& d, const PriorSpec& prior, const ChainConfig& config) {
  validate(d);
  validate(config);
  const Dims dims = Dims::of(d);
  validate(prior, dims);
  if (!config.skip_identification_check && !check_identification(d.T, 1))
    throw IdentificationError(identification_message(d.T, 1));

  const auto start = std::chrono::steady_clock::now();
  RandomStream rng(config.seed);
  Workspace ws(d);
  SamplerState s = initial_state(d, prior, config.model, rng);

  ChainOutput out;
  out.dims = dims;
  const long m = config.stored_draws();
  out.draws.reserve(m);
  out.ate.resize(m, d.T);
  for (long it = 1; it <= config.iterations; ++it) {
    const bool active = it > config.selection_start;
    sweep(s, d, prior, config.model, config.boosting, active, ws, rng, &out.stats);
    std::string where;
    if (!all_finite(s, &where)) {
      std::ostringstream msg;
      msg << "run_chain: non-finite " << where << " at iteration " << it << " (seed "
          << config.seed << "); lambda_x=" << s.draw.loadings.lambda_x
          << " sigma2_0=" << s.draw.variances.sigma2_0.transpose()
          << " sigma2_1=" << s.draw.variances.sigma2_1.transpose();
      throw NumericalError(msg.str());
    }
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0 &&
        static_cast<long>(out.draws.size()) < m) {
      out.ate.row(static_cast<Eigen::Index>(out.draws.size())) =
          draw_ate(s.draw.coefficients, ws.wbar).transpose();
      out.draws.push_back(s.draw);
      if (config.store_latents) out.latents.push_back(s.latent);
    }
  }
  out.meta = {config.seed, config.iterations, config.burn_in, config.thin, config.selection_start,
              config.model, config.boosting, d.n(), d.T, dims.p_v, dims.p_w,
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
  return out;
}

// --------------------------------------------------------------------------
// Canonical scalar layout of a stored draw

inline std::vector<std::string> draw_column_names(const Dims& d) {
  std::vector<std::string> names;
  auto add = [&](const std::string& base, int count) {
    for (int k = 1; k <= count; ++k) names.push_back(base + "[" + std::to_string(k) + "]");
  };
  add("alpha", d.p_v);
  add("mu", d.T);
  add("kappa", d.T);
  add("gamma", d.p_w);
  add("theta", d.p_w);
  names.push_back("lambda_x");
  add("lambda0", d.T);
  add("lambda1", d.T);
  add("zeta0", d.T);
  add("zeta1", d.T);
  add("sigma2_0", d.T);
  add("sigma2_1", d.T);
  add("delta_alpha", d.p_v);
  add("delta_beta", d.p_beta());
  names.push_back("pi_alpha");
  names.push_back("pi_beta");
  add("ate", d.T);
  return names;
}

inline std::vector<double> flatten_draw(const ParameterDraw& p, const VectorXd& ate) {
  std::vector<double> v;
  auto add = [&](const VectorXd& x) { v.insert(v.end(), x.data(), x.data() + x.size()); };
  const auto& c = p.coefficients;
  add(c.alpha);
  add(c.mu);
  add(c.kappa);
  add(c.gamma);
  add(c.theta);
  v.push_back(p.loadings.lambda_x);
  add(p.loadings.lambda0);
  add(p.loadings.lambda1);
  add(p.loadings.zeta0);
  add(p.loadings.zeta1);
  add(p.variances.sigma2_0);
  add(p.variances.sigma2_1);
  for (auto b : p.delta_alpha) v.push_back(b);
  for (auto b : p.delta_beta) v.push_back(b);
  v.push_back(p.pi_alpha);
  v.push_back(p.pi_beta);
  add(ate);
  return v;
}

/// Inverse of flatten_draw; returns the draw and writes the ATE columns.
inline ParameterDraw unflatten_draw(const Dims& d, const double* v, VectorXd* ate = nullptr) {
  ParameterDraw p = zero_parameters(d);
  auto take = [&](VectorXd& x) {
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = *v++;
  };
  auto& c = p.coefficients;
  take(c.alpha);
  take(c.mu);
  take(c.kappa);
  take(c.gamma);
  take(c.theta);
  p.loadings.lambda_x = *v++;
  take(p.loadings.lambda0);
  take(p.loadings.lambda1);
  take(p.loadings.zeta0);
  take(p.loadings.zeta1);
  take(p.variances.sigma2_0);
  take(p.variances.sigma2_1);
  for (auto& b : p.delta_alpha) b = *v++ != 0.0;
  for (auto& b : p.delta_beta) b = *v++ != 0.0;
  p.pi_alpha = *v++;
  p.pi_beta = *v++;
  VectorXd a(d.T);
  take(a);
  if (ate) *ate = a;
  return p;
}

}  // namespace fatreat::gibbs
