#pragma once

// Posterior summaries and convergence diagnostics over stored draws.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fatreat/errors.hpp"
#include "fatreat/gibbs.hpp"
#include "fatreat/model.hpp"
#include "fatreat/stats_core.hpp"

namespace fatreat::inference {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Stored draws as a dense matrix, one column per canonical scalar.
struct DrawMatrix {
  Dims dims;
  std::vector<std::string> names;
  MatrixXd values;  // draws x columns

  int column(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InvalidArgument("DrawMatrix: no column " + name);
    return static_cast<int>(it - names.begin());
  }

  std::vector<ParameterDraw> parameter_draws() const {
    std::vector<ParameterDraw> out;
    out.reserve(values.rows());
    std::vector<double> row(values.cols());
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
      for (Eigen::Index c = 0; c < values.cols(); ++c) row[c] = values(r, c);
      out.push_back(gibbs::unflatten_draw(dims, row.data()));
    }
    return out;
  }
};

inline DrawMatrix to_draw_matrix(const gibbs::ChainOutput& chain) {
  DrawMatrix m;
  m.dims = chain.dims;
  m.names = gibbs::draw_column_names(chain.dims);
  m.values.resize(static_cast<Eigen::Index>(chain.draws.size()), static_cast<Eigen::Index>(m.names.size()));
  for (std::size_t k = 0; k < chain.draws.size(); ++k) {
    const auto row = gibbs::flatten_draw(chain.draws[k], chain.ate.row(k).transpose());
    for (std::size_t c = 0; c < row.size(); ++c) m.values(k, c) = row[c];
  }
  return m;
}

/// Row-wise concatenation of chains with identical layout.
inline DrawMatrix combine(const std::vector<DrawMatrix>& chains) {
  if (chains.empty()) throw InsufficientData("combine: no chains");
  DrawMatrix out;
  out.dims = chains.front().dims;
  out.names = chains.front().names;
  Eigen::Index rows = 0;
  for (const auto& c : chains) {
    if (c.names != out.names) throw InvalidArgument("combine: chains have different columns");
    rows += c.values.rows();
  }
  out.values.resize(rows, static_cast<Eigen::Index>(out.names.size()));
  Eigen::Index at = 0;
  for (const auto& c : chains) {
    out.values.middleRows(at, c.values.rows()) = c.values;
    at += c.values.rows();
  }
  return out;
}

struct SummaryRow {
  std::string name;
  double mean;
  double sd;
  /// Draw frequency of the coordinate's indicator; NaN for rows without one.
  double inclusion;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;
  bool standardized_alpha = true;

  const SummaryRow& at(const std::string& name) const {
    for (const auto& r : rows)
      if (r.name == name) return r;
    throw InvalidArgument("SummaryTable: no row " + name);
  }
};

struct AtePeriod {
  int period;  // 1-based
  double plug_in;
  double posterior_mean;
  double sd;
  double hpd_lo;
  double hpd_hi;
};

struct AteSummary {
  double level = 0.95;
  std::vector<AtePeriod> periods;
};

struct SummaryOptions {
  double level = 0.95;
  /// Report alpha on its raw (unidentified) scale instead of alpha / sigma_x.
  bool raw_alpha = false;
};

struct Summary {
  SummaryTable table;
  AteSummary ate;
  /// draws x T per-draw ATE recomputed from the data
  MatrixXd ate_draws;
};

namespace detail {

inline std::pair<double, double> mean_sd(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  // shifted by the first draw so that constant input gives exact results
  const double x0 = x.empty() ? 0.0 : x[0];
  double m = 0.0;
  for (double v : x) m += v - x0;
  m /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - x0 - m) * (v - x0 - m);
  return {x0 + m, x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

// Flip each draw of a loading block so that the coordinate with the largest
// average magnitude is non-negative. The sign-switch move makes raw loading
// means meaningless; this picks one of the mirror-image modes.
inline void orient_block(std::vector<std::vector<double>*>& block) {
  if (block.empty() || block.front()->empty()) return;
  const std::size_t m = block.front()->size();
  std::size_t anchor = 0;
  double best = -1.0;
  for (std::size_t k = 0; k < block.size(); ++k) {
    double a = 0.0;
    for (double v : *block[k]) a += std::abs(v);
    if (a > best) {
      best = a;
      anchor = k;
    }
  }
  for (std::size_t r = 0; r < m; ++r)
    if ((*block[anchor])[r] < 0.0)
      for (auto* col : block) (*col)[r] = -(*col)[r];
}

}  // namespace detail

/// Posterior summary of stored draws. ATE_t per draw is recomputed as
/// kappa_t + wbar_t . theta using the period covariate means of `data`.
inline Summary summarize(const std::vector<ParameterDraw>& draws, const PanelDataset& data,
                         const SummaryOptions& options = {}) {
  if (draws.empty()) throw InsufficientData("summarize: empty chain");
  const Dims dims = draws.front().dims();
  const Dims ddims = Dims::of(data);
  if (dims.T != ddims.T || dims.p_v != ddims.p_v || dims.p_w != ddims.p_w)
    throw InvalidArgument("summarize: draws do not match the dataset dimensions");
  const std::size_t m = draws.size();
  const int T = dims.T;

  // Column-major copies of every summarized scalar.
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  std::vector<double> incl;
  auto add = [&](const std::string& name, double inclusion) {
    names.push_back(name);
    cols.emplace_back();
    cols.back().reserve(m);
    incl.push_back(inclusion);
    return cols.size() - 1;
  };
  auto idx = [](const std::string& base, int k) { return base + "[" + std::to_string(k + 1) + "]"; };

  auto freq = [&](auto getter) {
    double f = 0.0;
    for (const auto& d : draws) f += getter(d) ? 1.0 : 0.0;
    return f / static_cast<double>(m);
  };
  const std::size_t alpha0 = cols.size();
  for (int k = 0; k < dims.p_v; ++k) add(idx("alpha", k), freq([k](const ParameterDraw& d) { return d.delta_alpha[k]; }));
  const std::size_t beta0 = cols.size();
  const char* beta_names[] = {"mu", "kappa", "gamma", "theta"};
  const int beta_sizes[] = {T, T, dims.p_w, dims.p_w};
  int b = 0;
  for (int g = 0; g < 4; ++g)
    for (int k = 0; k < beta_sizes[g]; ++k, ++b)
      add(idx(beta_names[g], k), freq([b](const ParameterDraw& d) { return d.delta_beta[b]; }));
  const std::size_t lam0 = add("lambda_x", kNaN);
  for (int t = 0; t < T; ++t) add(idx("lambda0", t), kNaN);
  for (int t = 0; t < T; ++t) add(idx("lambda1", t), kNaN);
  const std::size_t z00 = cols.size();
  for (int t = 0; t < T; ++t) add(idx("zeta0", t), kNaN);
  const std::size_t z10 = cols.size();
  for (int t = 0; t < T; ++t) add(idx("zeta1", t), kNaN);
  const std::size_t s0 = cols.size();
  for (int t = 0; t < T; ++t) add(idx("sigma2_0", t), kNaN);
  for (int t = 0; t < T; ++t) add(idx("sigma2_1", t), kNaN);
  const std::size_t pis = add("pi_alpha", kNaN);
  add("pi_beta", kNaN);

  for (const auto& d : draws) {
    const VectorXd a = options.raw_alpha ? d.coefficients.alpha : standardize_alpha(d.coefficients, d.loadings);
    for (int k = 0; k < dims.p_v; ++k) cols[alpha0 + k].push_back(a[k]);
    const VectorXd beta = stack_beta(d.coefficients);
    for (int k = 0; k < dims.p_beta(); ++k) cols[beta0 + k].push_back(beta[k]);
    const auto& l = d.loadings;
    cols[lam0].push_back(l.lambda_x);
    for (int t = 0; t < T; ++t) {
      cols[lam0 + 1 + t].push_back(l.lambda0[t]);
      cols[lam0 + 1 + T + t].push_back(l.lambda1[t]);
      cols[z00 + t].push_back(l.zeta0[t]);
      cols[z10 + t].push_back(l.zeta1[t]);
      cols[s0 + t].push_back(d.variances.sigma2_0[t]);
      cols[s0 + T + t].push_back(d.variances.sigma2_1[t]);
    }
    cols[pis].push_back(d.pi_alpha);
    cols[pis + 1].push_back(d.pi_beta);
  }

  std::vector<std::vector<double>*> common, spec0, spec1;
  for (int k = 0; k < 2 * T + 1; ++k) common.push_back(&cols[lam0 + k]);
  for (int t = 0; t < T; ++t) {
    spec0.push_back(&cols[z00 + t]);
    spec1.push_back(&cols[z10 + t]);
  }
  detail::orient_block(common);
  detail::orient_block(spec0);
  detail::orient_block(spec1);

  Summary out;
  out.table.standardized_alpha = !options.raw_alpha;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto [mean, sd] = detail::mean_sd(cols[c]);
    out.table.rows.push_back({names[c], mean, sd, incl[c]});
  }

  const MatrixXd wbar = period_covariate_means(data);
  out.ate_draws.resize(static_cast<Eigen::Index>(m), T);
  for (std::size_t k = 0; k < m; ++k)
    out.ate_draws.row(static_cast<Eigen::Index>(k)) = gibbs::draw_ate(draws[k].coefficients, wbar).transpose();

  VectorXd kappa_mean(T), theta_mean(dims.p_w);
  for (int t = 0; t < T; ++t) kappa_mean[t] = out.table.rows[beta0 + T + t].mean;
  for (int l = 0; l < dims.p_w; ++l) theta_mean[l] = out.table.rows[beta0 + 2 * T + dims.p_w + l].mean;
  const VectorXd plug_in = kappa_mean + wbar * theta_mean;

  out.ate.level = options.level;
  std::vector<double> col(m);
  for (int t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < m; ++k) col[k] = out.ate_draws(static_cast<Eigen::Index>(k), t);
    const auto [mean, sd] = detail::mean_sd(col);
    std::sort(col.begin(), col.end());
    const auto hpd = stats::hpd_interval(col, options.level);
    out.ate.periods.push_back({t + 1, plug_in[t], mean, sd, hpd.lo, hpd.hi});
  }
  return out;
}

inline Summary summarize(const gibbs::ChainOutput& chain, const PanelDataset& data,
                         const SummaryOptions& options = {}) {
  return summarize(chain.draws, data, options);
}

/// Plain-text coefficient table: mean, sd in parentheses, inclusion
/// probability.
inline std::string format_table(const SummaryTable& table) {
  std::ostringstream os;
  os << std::fixed;
  os << std::left << std::setw(16) << "parameter" << std::right << std::setw(11) << "mean"
     << std::setw(13) << "(sd)" << std::setw(9) << "prob" << '\n';
  for (const auto& r : table.rows) {
    std::ostringstream sd;
    sd << std::fixed << std::setprecision(4) << '(' << r.sd << ')';
    os << std::left << std::setw(16) << r.name << std::right << std::setprecision(4) << std::setw(11)
       << r.mean << std::setw(13) << sd.str();
    if (std::isnan(r.inclusion))
      os << std::setw(9) << "";
    else
      os << std::setprecision(3) << std::setw(9) << r.inclusion;
    os << '\n';
  }
  if (table.standardized_alpha) os << "alpha reported as alpha / sqrt(1 + lambda_x^2)\n";
  return os.str();
}

// --------------------------------------------------------------------------
// Diagnostics

inline constexpr std::size_t kMinDiagnosticDraws = 50;

struct Ess {
  double value;
  /// Set for constant draws; value is NaN then.
  bool degenerate;
};

namespace detail {

inline Ess geyer_ess(std::span<const double> x) {
  const std::size_t m = x.size();
  const auto [mean, sd] = mean_sd(x);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(m);
  if (!(var > 1e-300 * (1.0 + mean * mean))) return {kNaN, true};
  auto rho = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < m; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / (static_cast<double>(m) * var);
  };
  // Initial positive sequence: Gamma_k = rho(2k) + rho(2k+1), summed until
  // the first negative pair.
  double tau = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < m; ++k) {
    const double pair = (k == 0 ? 1.0 : rho(2 * k)) + rho(2 * k + 1);
    if (pair < 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(m));
  return {static_cast<double>(m) / tau, false};
}

}  // namespace detail

inline Ess effective_sample_size(std::span<const double> x) {
  if (x.size() < kMinDiagnosticDraws)
    throw InsufficientData("effective_sample_size: need at least 50 draws");
  return detail::geyer_ess(x);
}

/// (mean_1 - mean_2) / sqrt(var_1/ess_1 + var_2/ess_2) over the two halves;
/// NaN when either half is constant.
inline double split_half_z(std::span<const double> x) {
  if (x.size() < kMinDiagnosticDraws) throw InsufficientData("split_half_z: need at least 50 draws");
  const std::size_t h = x.size() / 2;
  const auto a = x.subspan(0, h), b = x.subspan(x.size() - h, h);
  const auto ea = detail::geyer_ess(a), eb = detail::geyer_ess(b);
  const auto [ma, sa] = detail::mean_sd(a);
  const auto [mb, sb] = detail::mean_sd(b);
  if (ea.degenerate || eb.degenerate) return ma == mb ? 0.0 : kNaN;
  return (ma - mb) / std::sqrt(sa * sa / ea.value + sb * sb / eb.value);
}

struct Diagnostic {
  std::string name;
  Ess ess;
  double split_z;
};

inline std::vector<Diagnostic> diagnostics(const DrawMatrix& draws) {
  if (static_cast<std::size_t>(draws.values.rows()) < kMinDiagnosticDraws)
    throw InsufficientData("diagnostics: need at least 50 draws");
  std::vector<Diagnostic> out;
  std::vector<double> col(draws.values.rows());
  for (Eigen::Index c = 0; c < draws.values.cols(); ++c) {
    for (Eigen::Index r = 0; r < draws.values.rows(); ++r) col[r] = draws.values(r, c);
    out.push_back({draws.names[c], effective_sample_size(col), split_half_z(col)});
  }
  return out;
}

}  // namespace fatreat::inference
