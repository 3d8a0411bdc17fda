#pragma once

// Flat-file formats and JSON run configuration.
//
//   data.csv   id,t,x,y,v_1..v_p,w_1..w_q   one row per observed cell
//   truth.csv  id,t,x,xstar,f_c,f_0,f_1,y0,y1,ate_true   one row per cell
//   draws CSV  canonical column names, one row per stored draw
//
// Numbers are written in shortest round-trip form, so reading back a written
// file reproduces every double exactly.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "fatreat/errors.hpp"
#include "fatreat/gibbs.hpp"
#include "fatreat/inference.hpp"
#include "fatreat/model.hpp"
#include "fatreat/simulator.hpp"

namespace fatreat::io {

using Json = nlohmann::json;

/// File-system or format problem attributable to the caller's inputs.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError(where + ": not a number: '" + std::string(s) + "'");
  return v;
}

inline long parse_long(std::string_view s, const std::string& where) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError(where + ": not an integer: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// --------------------------------------------------------------------------
// data.csv

inline std::string data_csv(const PanelDataset& d) {
  std::string out = "id,t,x,y";
  for (int k = 1; k <= d.p_v(); ++k) out += ",v_" + std::to_string(k);
  for (int k = 1; k <= d.p_w(); ++k) out += ",w_" + std::to_string(k);
  out += '\n';
  for (int i = 0; i < d.n(); ++i)
    for (int t = 0; t < d.periods[i]; ++t) {
      out += std::to_string(i + 1) + ',' + std::to_string(t + 1) + ',' + std::to_string(d.x[i]) + ',' +
             format_double(d.Y(i, t));
      for (int k = 0; k < d.p_v(); ++k) out += ',' + format_double(d.V(i, k));
      for (int k = 0; k < d.p_w(); ++k) out += ',' + format_double(d.W(i * d.T + t, k));
      out += '\n';
    }
  return out;
}

/// Parses data.csv. `T_hint` fixes the panel length (needed when the file
/// has no rows); it must be at least the largest period present.
inline PanelDataset parse_data_csv(const std::string& text, std::optional<int> T_hint = std::nullopt) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw IoError("data.csv: missing header");
  const auto header = split_csv(lines[0]);
  if (header.size() < 4 || header[0] != "id" || header[1] != "t" || header[2] != "x" || header[3] != "y")
    throw IoError("data.csv: header must start with id,t,x,y");
  int p_v = 0, p_w = 0;
  for (std::size_t c = 4; c < header.size(); ++c) {
    const std::string expect_v = "v_" + std::to_string(p_v + 1);
    const std::string expect_w = "w_" + std::to_string(p_w + 1);
    if (p_w == 0 && header[c] == expect_v)
      ++p_v;
    else if (header[c] == expect_w)
      ++p_w;
    else
      throw IoError("data.csv: unexpected column '" + std::string(header[c]) + "'");
  }
  if (p_v == 0) throw IoError("data.csv: need at least one v column");

  struct Row {
    long t;
    int x;
    double y;
    std::vector<double> v, w;
  };
  std::map<long, std::vector<Row>> subjects;
  long max_t = 0;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string where = "data.csv line " + std::to_string(r + 1);
    const auto f = split_csv(lines[r]);
    if (f.size() != header.size()) throw IoError(where + ": wrong number of fields");
    Row row;
    const long id = parse_long(f[0], where);
    row.t = parse_long(f[1], where);
    const long x = parse_long(f[2], where);
    if (x != 0 && x != 1) throw IoError(where + ": x must be 0 or 1");
    if (row.t < 1) throw IoError(where + ": t must be >= 1");
    row.x = static_cast<int>(x);
    row.y = parse_double(f[3], where);
    for (int k = 0; k < p_v; ++k) row.v.push_back(parse_double(f[4 + k], where));
    for (int k = 0; k < p_w; ++k) row.w.push_back(parse_double(f[4 + p_v + k], where));
    max_t = std::max(max_t, row.t);
    subjects[id].push_back(std::move(row));
  }
  int T = static_cast<int>(max_t);
  if (T_hint) {
    if (*T_hint < T) throw IoError("data.csv: periods exceed the configured T");
    T = *T_hint;
  }
  if (T < 1) throw IoError("data.csv: panel length unknown (empty file needs T)");

  PanelDataset d;
  d.T = T;
  const int n = static_cast<int>(subjects.size());
  d.x.resize(n);
  d.periods.resize(n);
  d.V.resize(n, p_v);
  d.W = MatrixXd::Zero(static_cast<Eigen::Index>(n) * T, p_w);
  d.Y = MatrixXd::Constant(n, T, kMissing);
  int i = 0;
  for (auto& [id, rows] : subjects) {
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    const std::string who = "data.csv subject " + std::to_string(id);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k].t != static_cast<long>(k) + 1)
        throw IoError(who + ": observed periods must be 1..T_i without gaps or repeats");
      if (rows[k].x != rows[0].x) throw IoError(who + ": x varies over periods");
      if (rows[k].v != rows[0].v) throw IoError(who + ": v varies over periods");
    }
    d.x[i] = rows[0].x;
    d.periods[i] = static_cast<int>(rows.size());
    for (int k = 0; k < p_v; ++k) d.V(i, k) = rows[0].v[k];
    for (const auto& row : rows) {
      const int t = static_cast<int>(row.t) - 1;
      d.Y(i, t) = row.y;
      for (int k = 0; k < p_w; ++k) d.W(static_cast<Eigen::Index>(i) * T + t, k) = row.w[k];
    }
    ++i;
  }
  validate(d);
  return d;
}

inline PanelDataset read_data_csv(const std::filesystem::path& path, std::optional<int> T_hint = std::nullopt) {
  return parse_data_csv(read_file(path), T_hint);
}

// --------------------------------------------------------------------------
// truth.csv

inline std::string truth_csv(const PanelDataset& d, const GroundTruth& g) {
  std::string out = "id,t,x,xstar,f_c,f_0,f_1,y0,y1,ate_true\n";
  for (int i = 0; i < d.n(); ++i)
    for (int t = 0; t < d.T; ++t) {
      out += std::to_string(i + 1) + ',' + std::to_string(t + 1) + ',' + std::to_string(d.x[i]);
      for (double v : {g.xstar[i], g.f_c[i], g.f_0[i], g.f_1[i], g.y0(i, t), g.y1(i, t), g.ate[t]})
        out += ',' + format_double(v);
      out += '\n';
    }
  return out;
}

/// True ATE_t by period from truth.csv.
inline VectorXd read_true_ate(const std::filesystem::path& path) {
  const auto lines = lines_of(read_file(path));
  if (lines.empty()) throw IoError("truth.csv: missing header");
  const auto header = split_csv(lines[0]);
  if (header.size() != 10 || header[1] != "t" || header[9] != "ate_true")
    throw IoError("truth.csv: unexpected header");
  std::map<long, double> ate;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string where = "truth.csv line " + std::to_string(r + 1);
    const auto f = split_csv(lines[r]);
    if (f.size() != 10) throw IoError(where + ": wrong number of fields");
    ate[parse_long(f[1], where)] = parse_double(f[9], where);
  }
  VectorXd out(static_cast<Eigen::Index>(ate.size()));
  Eigen::Index k = 0;
  for (const auto& [t, v] : ate) {
    if (t != k + 1) throw IoError("truth.csv: periods are not 1..T");
    out[k++] = v;
  }
  return out;
}

// --------------------------------------------------------------------------
// draws CSV

inline std::string draws_csv(const gibbs::ChainOutput& chain) {
  const auto names = gibbs::draw_column_names(chain.dims);
  std::string out;
  for (std::size_t c = 0; c < names.size(); ++c) out += (c ? "," : "") + names[c];
  out += '\n';
  for (std::size_t k = 0; k < chain.draws.size(); ++k) {
    const auto row = gibbs::flatten_draw(chain.draws[k], chain.ate.row(k).transpose());
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + format_double(row[c]);
    out += '\n';
  }
  return out;
}

/// Recovers (T, p_v, p_w) from a canonical header.
inline Dims dims_from_columns(const std::vector<std::string>& names) {
  auto count = [&](const std::string& base) {
    int k = 0;
    for (const auto& n : names)
      if (n.rfind(base + "[", 0) == 0) ++k;
    return k;
  };
  Dims d{count("mu"), count("alpha"), count("gamma")};
  if (d.T < 1 || d.p_v < 1 || gibbs::draw_column_names(d) != names)
    throw IoError("draws file: header does not follow the canonical column layout");
  return d;
}

inline inference::DrawMatrix parse_draws_csv(const std::string& text, const std::string& label = "draws") {
  const auto lines = lines_of(text);
  if (lines.empty()) throw IoError(label + ": missing header");
  inference::DrawMatrix m;
  for (auto f : split_csv(lines[0])) m.names.emplace_back(f);
  m.dims = dims_from_columns(m.names);
  m.values.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(m.names.size()));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string where = label + " line " + std::to_string(r + 1);
    const auto f = split_csv(lines[r]);
    if (f.size() != m.names.size()) throw IoError(where + ": wrong number of fields");
    for (std::size_t c = 0; c < f.size(); ++c) m.values(r - 1, c) = parse_double(f[c], where);
  }
  return m;
}

inline inference::DrawMatrix read_draws_csv(const std::filesystem::path& path) {
  return parse_draws_csv(read_file(path), path.string());
}

// --------------------------------------------------------------------------
// JSON configuration

inline void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& context) {
  if (!j.is_object()) throw InvalidConfig(context + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw InvalidConfig(context + ": unknown key '" + key + "'");
}

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback, const std::string& context) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidConfig(context + ": bad value for '" + key + "'");
  }
}

inline VectorXd get_vector(const Json& j, const std::string& key, const std::string& context,
                           std::optional<VectorXd> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw InvalidConfig(context + ": missing '" + key + "'");
  }
  const auto& a = j.at(key);
  if (!a.is_array()) throw InvalidConfig(context + ": '" + key + "' must be an array");
  VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].is_number()) throw InvalidConfig(context + ": '" + key + "' must hold numbers");
    v[static_cast<Eigen::Index>(k)] = a[k].get<double>();
  }
  return v;
}

inline Json to_json(const VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

inline Generator parse_generator(const std::string& s) {
  if (s == "FA") return Generator::kFA;
  if (s == "SF") return Generator::kSF;
  if (s == "SR") return Generator::kSR;
  throw InvalidConfig("simulate: generator must be FA, SF or SR");
}

inline SimConfig sim_config_from_json(const Json& j) {
  const std::string ctx = "simulate";
  check_keys(j, {"n", "T", "generator", "seed", "coefficients", "loadings", "omega0", "omega1",
                 "variances", "covariates"},
             ctx);
  SimConfig c;
  c.n = get_or<int>(j, "n", 0, ctx);
  c.T = get_or<int>(j, "T", 4, ctx);
  c.kind = parse_generator(get_or<std::string>(j, "generator", "FA", ctx));
  c.seed = get_or<std::uint64_t>(j, "seed", 1, ctx);
  const VectorXd zeros = VectorXd::Zero(std::max(c.T, 0));

  const Json coef = j.value("coefficients", Json::object());
  check_keys(coef, {"alpha", "mu", "kappa", "gamma", "theta"}, ctx + ".coefficients");
  c.coefficients.alpha = get_vector(coef, "alpha", ctx + ".coefficients");
  c.coefficients.mu = get_vector(coef, "mu", ctx + ".coefficients");
  c.coefficients.kappa = get_vector(coef, "kappa", ctx + ".coefficients");
  c.coefficients.gamma = get_vector(coef, "gamma", ctx + ".coefficients");
  c.coefficients.theta = get_vector(coef, "theta", ctx + ".coefficients");

  const Json load = j.value("loadings", Json::object());
  check_keys(load, {"lambda_x", "lambda0", "lambda1", "zeta0", "zeta1"}, ctx + ".loadings");
  c.loadings.lambda_x = get_or<double>(load, "lambda_x", 0.0, ctx + ".loadings");
  c.loadings.lambda0 = get_vector(load, "lambda0", ctx + ".loadings", zeros);
  c.loadings.lambda1 = get_vector(load, "lambda1", ctx + ".loadings", zeros);
  c.loadings.zeta0 = get_vector(load, "zeta0", ctx + ".loadings", zeros);
  c.loadings.zeta1 = get_vector(load, "zeta1", ctx + ".loadings", zeros);
  c.omega0 = get_vector(j, "omega0", ctx, zeros);
  c.omega1 = get_vector(j, "omega1", ctx, zeros);

  const Json var = j.value("variances", Json::object());
  check_keys(var, {"sigma2_0", "sigma2_1"}, ctx + ".variances");
  const VectorXd ones = VectorXd::Ones(std::max(c.T, 0));
  c.variances.sigma2_0 = get_vector(var, "sigma2_0", ctx + ".variances", ones);
  c.variances.sigma2_1 = get_vector(var, "sigma2_1", ctx + ".variances", ones);

  const Json cov = j.value("covariates", Json::object());
  check_keys(cov, {"continuous", "instrument", "time_varying_sd", "min_periods"}, ctx + ".covariates");
  c.covariates.continuous = get_or<int>(cov, "continuous", 2, ctx + ".covariates");
  c.covariates.instrument = get_or<bool>(cov, "instrument", true, ctx + ".covariates");
  c.covariates.time_varying_sd = get_or<double>(cov, "time_varying_sd", 0.0, ctx + ".covariates");
  c.covariates.min_periods = get_or<int>(cov, "min_periods", 0, ctx + ".covariates");
  validate(c);
  return c;
}

/// Prior block; mandatory coordinates are given by canonical names such as
/// "alpha[1]" or "kappa[2]" and resolved against the data dimensions.
struct PriorConfig {
  gibbs::PriorSpec spec;
  std::optional<std::vector<std::string>> mandatory_alpha;
  std::optional<std::vector<std::string>> mandatory_beta;

  gibbs::PriorSpec resolve(const Dims& dims) const {
    gibbs::PriorSpec out = spec;
    const auto names = gibbs::draw_column_names(dims);
    auto find = [&](const std::string& name, int offset, int size, const char* what) {
      for (int k = 0; k < size; ++k)
        if (names[offset + k] == name) return k;
      throw InvalidConfig(std::string("prior: '") + name + "' is not a " + what + " coordinate");
    };
    if (mandatory_alpha) {
      out.mandatory_alpha.clear();
      for (const auto& n : *mandatory_alpha) out.mandatory_alpha.push_back(find(n, 0, dims.p_v, "alpha"));
    }
    if (mandatory_beta) {
      std::vector<int> idx;
      for (const auto& n : *mandatory_beta) idx.push_back(find(n, dims.p_v, dims.p_beta(), "beta"));
      out.mandatory_beta = idx;
    }
    gibbs::validate(out, dims);
    return out;
  }
};

inline PriorConfig prior_from_json(const Json& j) {
  const std::string ctx = "prior";
  check_keys(j, {"V_alpha", "V_beta_free", "V_beta_slab", "beta_a", "beta_b", "s0", "S0", "loading_var",
                 "mandatory_alpha", "mandatory_beta", "boost_shape", "boost_scale"},
             ctx);
  PriorConfig p;
  auto& s = p.spec;
  s.V_alpha = get_or(j, "V_alpha", s.V_alpha, ctx);
  s.V_beta_free = get_or(j, "V_beta_free", s.V_beta_free, ctx);
  s.V_beta_slab = get_or(j, "V_beta_slab", s.V_beta_slab, ctx);
  s.beta_a = get_or(j, "beta_a", s.beta_a, ctx);
  s.beta_b = get_or(j, "beta_b", s.beta_b, ctx);
  s.loading_var = get_or(j, "loading_var", s.loading_var, ctx);
  s.boost_shape = get_or(j, "boost_shape", s.boost_shape, ctx);
  s.boost_scale = get_or(j, "boost_scale", s.boost_scale, ctx);
  for (const char* key : {"s0", "S0"}) {
    if (!j.contains(key)) continue;
    const VectorXd v = get_vector(j, key, ctx);
    if (v.size() != 2) throw InvalidConfig(ctx + ": '" + key + "' needs one value per arm");
    auto& dst = std::string(key) == "s0" ? s.s0 : s.S0;
    dst = {v[0], v[1]};
  }
  if (j.contains("mandatory_alpha"))
    p.mandatory_alpha = get_or<std::vector<std::string>>(j, "mandatory_alpha", {}, ctx);
  if (j.contains("mandatory_beta"))
    p.mandatory_beta = get_or<std::vector<std::string>>(j, "mandatory_beta", {}, ctx);
  return p;
}

struct FitConfig {
  gibbs::ChainConfig chain;
  int chains = 1;
  std::optional<std::string> data;
  std::optional<int> T;
};

inline gibbs::ModelKind parse_model(const std::string& s) {
  if (s == "FA") return gibbs::ModelKind::kFactorAugmented;
  if (s == "SF") return gibbs::ModelKind::kSharedFactor;
  throw InvalidConfig("fit: model must be FA or SF");
}

inline FitConfig fit_config_from_json(const Json& j) {
  const std::string ctx = "fit";
  check_keys(j, {"data", "T", "model", "iterations", "burn_in", "thin", "selection_start", "seed",
                 "chains", "store_latents", "allow_unidentified", "boosting"},
             ctx);
  FitConfig f;
  auto& c = f.chain;
  c.iterations = get_or(j, "iterations", c.iterations, ctx);
  c.burn_in = get_or(j, "burn_in", c.burn_in, ctx);
  c.thin = get_or(j, "thin", c.thin, ctx);
  c.selection_start = get_or(j, "selection_start", c.selection_start, ctx);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, ctx);
  c.store_latents = get_or(j, "store_latents", c.store_latents, ctx);
  c.skip_identification_check = get_or(j, "allow_unidentified", false, ctx);
  c.boosting = get_or(j, "boosting", c.boosting, ctx);
  c.model = parse_model(get_or<std::string>(j, "model", "FA", ctx));
  f.chains = get_or(j, "chains", 1, ctx);
  if (f.chains < 1) throw InvalidConfig("fit: chains must be >= 1");
  if (j.contains("data")) f.data = get_or<std::string>(j, "data", "", ctx);
  if (j.contains("T")) f.T = get_or<int>(j, "T", 0, ctx);
  gibbs::validate(c);
  return f;
}

struct SummarizeConfig {
  std::vector<std::string> draws;
  std::optional<std::string> data;
  std::optional<std::string> truth;
  double level = 0.95;
  bool raw_alpha = false;
};

inline SummarizeConfig summarize_config_from_json(const Json& j) {
  const std::string ctx = "summarize";
  check_keys(j, {"draws", "data", "truth", "level", "raw_alpha"}, ctx);
  SummarizeConfig s;
  s.draws = get_or<std::vector<std::string>>(j, "draws", {}, ctx);
  if (j.contains("data")) s.data = get_or<std::string>(j, "data", "", ctx);
  if (j.contains("truth")) s.truth = get_or<std::string>(j, "truth", "", ctx);
  s.level = get_or(j, "level", s.level, ctx);
  s.raw_alpha = get_or(j, "raw_alpha", s.raw_alpha, ctx);
  if (!(s.level > 0.0 && s.level < 1.0)) throw InvalidConfig("summarize: level must lie in (0,1)");
  return s;
}

/// Whole run configuration: any subset of the four sections.
struct RunConfig {
  std::optional<SimConfig> simulate;
  Json simulate_json;
  PriorConfig prior;
  FitConfig fit;
  SummarizeConfig summarize;
  std::filesystem::path base_dir;

  /// Resolves a path relative to the directory of the config file.
  std::string resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? p : (base_dir / path).string();
  }
};

inline RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfig(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j, {"simulate", "prior", "fit", "summarize"}, "config");
  RunConfig rc;
  rc.base_dir = base_dir;
  if (j.contains("simulate")) {
    rc.simulate_json = j.at("simulate");
    rc.simulate = sim_config_from_json(j.at("simulate"));
  }
  rc.prior = prior_from_json(j.value("prior", Json::object()));
  rc.fit = fit_config_from_json(j.value("fit", Json::object()));
  rc.summarize = summarize_config_from_json(j.value("summarize", Json::object()));
  return rc;
}

inline RunConfig read_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path), path.parent_path());
}

// --------------------------------------------------------------------------
// Metadata sidecars

inline Json chain_metadata(const gibbs::ChainOutput& c) {
  const auto& m = c.meta;
  Json j;
  j["seed"] = m.seed;
  j["iterations"] = m.iterations;
  j["burn_in"] = m.burn_in;
  j["thin"] = m.thin;
  j["selection_start"] = m.selection_start;
  j["model"] = gibbs::to_string(m.model);
  j["boosting"] = m.boosting;
  j["n"] = m.n;
  j["T"] = m.T;
  j["p_v"] = m.p_v;
  j["p_w"] = m.p_w;
  j["draws"] = c.draws.size();
  const auto& s = c.stats;
  j["indicator_flips"] = {{"alpha", s.alpha_selection.flips},
                          {"alpha_proposals", s.alpha_selection.proposals},
                          {"beta", s.beta_selection.flips},
                          {"beta_proposals", s.beta_selection.proposals}};
  if (s.boost.sweeps > 0) {
    Json mean_log = Json::array();
    for (double v : s.boost.sum_log_scale) mean_log.push_back(v / static_cast<double>(s.boost.sweeps));
    j["boost_mean_log_scale"] = mean_log;
  }
  return j;
}

}  // namespace fatreat::io
