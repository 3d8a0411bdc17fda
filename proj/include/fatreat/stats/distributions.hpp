#pragma once

#include <cmath>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "fatreat/errors.hpp"
#include "fatreat/stats/random_stream.hpp"

namespace fatreat::stats {

/// Inverse gamma with density proportional to x^{-shape-1} exp(-scale/x);
/// the reciprocal is Gamma(shape, rate = scale).
inline double sample_inverse_gamma(double shape, double scale, RandomStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale))
    throw InvalidArgument("sample_inverse_gamma: shape and scale must be positive");
  for (;;) {
    const double g = rng.gamma(shape);
    if (g > 0.0) return scale / g;
  }
}

inline double sample_beta(double a, double b, RandomStream& rng) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw InvalidArgument("sample_beta: parameters must be positive");
  for (;;) {
    const double x = rng.gamma(a);
    const double y = rng.gamma(b);
    const double v = x / (x + y);
    if (v > 0.0 && v < 1.0) return v;
  }
}

inline Eigen::VectorXd standard_normal_vector(Eigen::Index n, RandomStream& rng) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
  return z;
}

/// Relative jitter added to the diagonal when an LDLT factorisation of a
/// covariance reports failure.
inline constexpr double kMvnJitter = 1e-10;
/// Pivots below -kPsdTolerance * max|pivot| are treated as indefinite.
inline constexpr double kPsdTolerance = 1e-8;

/// Square-root factor of a symmetric positive semi-definite covariance,
/// cached so that repeated draws do not refactorise. A pivoted LDL'
/// factorisation is used so that a zero-variance component reproduces its
/// mean exactly.
class GaussianFactor {
 public:
  explicit GaussianFactor(const Eigen::MatrixXd& covariance) : n_(covariance.rows()) {
    if (covariance.cols() != n_) throw InvalidArgument("GaussianFactor: covariance not square");
    if (n_ == 0) return;
    if (!covariance.allFinite()) throw NumericalError("GaussianFactor: non-finite covariance");
    const double scale = covariance.cwiseAbs().maxCoeff();
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw NumericalError("GaussianFactor: covariance is not symmetric");
    ldlt_.compute(covariance);
    if (ldlt_.info() != Eigen::Success) {
      Eigen::MatrixXd jittered = covariance;
      jittered.diagonal().array() += kMvnJitter * (scale > 0 ? scale : 1.0);
      ldlt_.compute(jittered);
      if (ldlt_.info() != Eigen::Success) throw NumericalError("GaussianFactor: factorisation failed");
    }
    sqrt_d_ = ldlt_.vectorD();
    const double dmax = sqrt_d_.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (sqrt_d_[i] < -kPsdTolerance * dmax)
        throw NumericalError("GaussianFactor: covariance is indefinite");
      sqrt_d_[i] = sqrt_d_[i] > 0.0 ? std::sqrt(sqrt_d_[i]) : 0.0;
    }
  }

  Eigen::Index size() const { return n_; }

  /// A zero-mean draw with the factored covariance.
  Eigen::VectorXd draw(RandomStream& rng) const {
    if (n_ == 0) return Eigen::VectorXd();
    Eigen::VectorXd u = sqrt_d_.cwiseProduct(standard_normal_vector(n_, rng));
    // covariance = P' L D L' P
    Eigen::VectorXd lu = ldlt_.matrixL() * u;
    return ldlt_.transpositionsP().transpose() * lu;
  }

 private:
  Eigen::Index n_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  Eigen::VectorXd sqrt_d_;
};

/// Draw from N(mean, covariance) for a symmetric positive semi-definite
/// covariance.
inline Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                                  RandomStream& rng) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
    throw InvalidArgument("sample_mvn: covariance dimension mismatch");
  return mean + GaussianFactor(covariance).draw(rng);
}

/// Draw from N(P^{-1} h, P^{-1}) given a symmetric positive definite
/// precision P; the canonical form of a Gaussian full conditional.
inline Eigen::VectorXd sample_mvn_precision(const Eigen::MatrixXd& precision,
                                            const Eigen::VectorXd& shift, RandomStream& rng) {
  const Eigen::Index n = shift.size();
  if (n == 0) return shift;
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NumericalError("sample_mvn_precision: precision is not positive definite");
  Eigen::VectorXd mean = llt.solve(shift);
  Eigen::VectorXd z = standard_normal_vector(n, rng);
  return mean + llt.matrixU().solve(z);
}

/// Generalised inverse Gaussian with density proportional to
/// x^{lambda-1} exp(-(chi/x + psi*x)/2).
///
/// X = sqrt(chi/psi) * exp(Z) where Z has the log-concave density
/// exp(lambda*z - omega*cosh(z)), omega = sqrt(chi*psi). Z is drawn by the
/// ratio-of-uniforms method with mode shift; the bounding rectangle is found
/// by root finding, which is valid for every lambda because the log density
/// of Z is concave.
inline double sample_gig(double lambda, double chi, double psi, RandomStream& rng) {
  if (!std::isfinite(lambda) || !(chi >= 0.0) || !(psi >= 0.0) || !std::isfinite(chi) ||
      !std::isfinite(psi))
    throw InvalidArgument("sample_gig: invalid parameters");
  if (psi == 0.0) {
    if (!(lambda < 0.0) || !(chi > 0.0)) throw InvalidArgument("sample_gig: improper limit");
    return sample_inverse_gamma(-lambda, 0.5 * chi, rng);
  }
  if (chi == 0.0) {
    if (!(lambda > 0.0)) throw InvalidArgument("sample_gig: improper limit");
    return rng.gamma(lambda) / (0.5 * psi);
  }
  const double omega = std::sqrt(chi * psi);
  const double eta = std::sqrt(chi / psi);
  const double mode = std::asinh(lambda / omega);
  const double cosh_mode = std::cosh(mode);
  // log of the density ratio h(z)/h(mode), always <= 0
  auto log_h = [&](double z) { return lambda * (z - mode) - omega * (std::cosh(z) - cosh_mode); };

  // The maximiser of log|d| + log_h(mode + d)/2 on each side solves
  // 1/d + (lambda - omega*sinh(mode + d))/2 = 0, decreasing in d.
  auto extent = [&](double sign) {
    auto g = [&](double d) { return 1.0 / d + 0.5 * (lambda - omega * std::sinh(mode + d)); };
    double lo = sign * 1e-12, hi = sign * 1.0;
    while (sign * g(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
    }
    boost::math::tools::eps_tolerance<double> tol(50);
    std::uintmax_t iters = 200;
    auto [r1, r2] = boost::math::tools::toms748_solve(g, std::min(lo, hi), std::max(lo, hi), tol,
                                                      iters);
    const double d = 0.5 * (r1 + r2);
    return d * std::exp(0.5 * log_h(mode + d));
  };
  // slight inflation guards against the root finder stopping short of the
  // true extremum
  const double v_plus = extent(1.0) * (1.0 + 1e-9);
  const double v_minus = extent(-1.0) * (1.0 + 1e-9);

  for (;;) {
    const double u = rng.uniform();
    const double v = v_minus + (v_plus - v_minus) * rng.uniform();
    const double z = mode + v / u;
    if (2.0 * std::log(u) <= log_h(z)) return eta * std::exp(z);
  }
}

}  // namespace fatreat::stats
