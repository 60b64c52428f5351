// Nonlinear least squares for the decay and oscillation models.
#ifndef JBASIM_FITTING_HPP
#define JBASIM_FITTING_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "jbasim/core.hpp"

namespace jbasim {

using ModelFn = std::function<double(double, const Eigen::VectorXd&)>;

struct FitResult {
  Eigen::VectorXd params;
  Eigen::VectorXd errors;  // one sigma from the covariance
  double rss = 0.0;        // weighted residual sum of squares
  double reduced_chi2 = 0.0;
  int evaluations = 0;
};

namespace detail {

struct ResidualFunctor {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const ModelFn* model;
  std::span<const double> x;
  std::span<const double> y;
  std::vector<double> w;
  int n_params;

  int inputs() const { return n_params; }
  int values() const { return static_cast<int>(x.size()); }

  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    for (std::size_t i = 0; i < x.size(); ++i) r(static_cast<Eigen::Index>(i)) = ((*model)(x[i], p) - y[i]) * w[i];
    return 0;
  }
};

}  // namespace detail

/// Weighted least squares by Levenberg-Marquardt from each starting point;
/// the lowest residual wins. Zero or missing errors get unit weight.
inline FitResult least_squares(const ModelFn& model, std::span<const double> x, std::span<const double> y,
                               std::span<const double> sigma, const std::vector<Eigen::VectorXd>& starts) {
  require(x.size() == y.size(), ErrorKind::kInvalidArgument, "x and y lengths differ");
  require(!starts.empty(), ErrorKind::kInvalidArgument, "no starting point");
  const int np = static_cast<int>(starts.front().size());
  require(static_cast<int>(x.size()) > np, ErrorKind::kFit, "fewer data points than parameters");
  detail::ResidualFunctor f{&model, x, y, {}, np};
  f.w.resize(x.size(), 1.0);
  if (sigma.size() == x.size()) {
    double floor = 0.0;
    for (double s : sigma) floor = std::max(floor, s);
    floor = floor > 0.0 ? 1e-3 * floor : 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) f.w[i] = 1.0 / std::max(sigma[i], floor);
  }
  Eigen::NumericalDiff<detail::ResidualFunctor, Eigen::Central> nd(f);

  FitResult best;
  best.rss = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    Eigen::LevenbergMarquardt<decltype(nd)> lm(nd);
    lm.parameters.xtol = 1e-14;
    lm.parameters.ftol = 1e-14;
    lm.parameters.maxfev = 4000;
    Eigen::VectorXd p = start;
    lm.minimize(p);
    Eigen::VectorXd r(x.size());
    f(p, r);
    const double rss = r.squaredNorm();
    if (std::isfinite(rss) && rss < best.rss) {
      best.params = p;
      best.rss = rss;
      best.evaluations = static_cast<int>(lm.nfev);
    }
  }
  require(std::isfinite(best.rss), ErrorKind::kFit, "fit did not converge from any starting point");

  Eigen::MatrixXd jac(x.size(), np);
  nd.df(best.params, jac);
  const int dof = static_cast<int>(x.size()) - np;
  best.reduced_chi2 = best.rss / dof;
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
  best.errors = Eigen::VectorXd::Constant(np, std::numeric_limits<double>::infinity());
  if (lu.isInvertible()) {
    const Eigen::MatrixXd cov = lu.inverse() * (sigma.size() == x.size() ? std::max(1.0, best.reduced_chi2)
                                                                             : best.reduced_chi2);
    for (int i = 0; i < np; ++i) best.errors(i) = std::sqrt(std::max(0.0, cov(i, i)));
  }
  return best;
}

/// Dominant oscillation frequency by a direct discrete Fourier scan (GHz).
inline double dominant_frequency(std::span<const double> x, std::span<const double> y, double f_max) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  const double span = x.back() - x.front();
  const double df = 0.1 / span;
  double best_f = df;
  double best_p = -1.0;
  for (double f = df; f <= f_max; f += df) {
    double c = 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      c += (y[i] - mean) * std::cos(kTwoPi * f * x[i]);
      s += (y[i] - mean) * std::sin(kTwoPi * f * x[i]);
    }
    const double p = c * c + s * s;
    if (p > best_p) {
      best_p = p;
      best_f = f;
    }
  }
  return best_f;
}

/// y = c - (V/2) exp(-t/tau) cos(2 pi f t + phi); params (c, V, tau, f, phi).
inline double damped_oscillation(double t, const Eigen::VectorXd& p) {
  return p(0) - 0.5 * p(1) * std::exp(-t / p(2)) * std::cos(kTwoPi * p(3) * t + p(4));
}

/// y = c + A exp(-t/tau); params (c, A, tau).
inline double exponential_decay(double t, const Eigen::VectorXd& p) { return p(0) + p(1) * std::exp(-t / p(2)); }

/// Damped oscillation with multi-start on frequency around the spectral peak.
/// Times in ns; the decay time in the result is in ns, infinite for no decay.
inline FitResult fit_damped_oscillation(std::span<const double> t, std::span<const double> y,
                                        std::span<const double> sigma, double f_hint = 0.0) {
  require(t.size() >= 6, ErrorKind::kFit, "too few points for an oscillation fit");
  const double dt_min = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  const double f0 = f_hint > 0.0 ? f_hint : dominant_frequency(t, y, 0.5 / dt_min);
  double lo = y[0];
  double hi = y[0];
  double mean = 0.0;
  for (double v : y) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    mean += v;
  }
  mean /= static_cast<double>(y.size());
  const double span = t.back() - t.front();
  std::vector<Eigen::VectorXd> starts;
  for (double scale : {1.0, 0.97, 1.03, 0.9, 1.1}) {
    for (double phi : {0.0, std::numbers::pi / 2.0, std::numbers::pi, -std::numbers::pi / 2.0}) {
      for (double gamma : {1.0 / span, 0.3 / span}) {
        Eigen::VectorXd p(5);
        p << mean, hi - lo, gamma, f0 * scale, phi;
        starts.push_back(p);
      }
    }
  }
  const ModelFn by_rate = [](double x, const Eigen::VectorXd& p) {
    return p(0) - 0.5 * p(1) * std::exp(-x * p(2)) * std::cos(kTwoPi * p(3) * x + p(4));
  };
  auto r = least_squares(by_rate, t, y, sigma, starts);
  if (r.params(1) < 0.0) {
    r.params(1) = -r.params(1);
    r.params(4) += std::numbers::pi;
  }
  r.params(4) = std::remainder(r.params(4), kTwoPi);
  const double gamma = r.params(2);
  if (gamma > 0.0) {
    r.params(2) = 1.0 / gamma;
    r.errors(2) = r.errors(2) / (gamma * gamma);
  } else {
    r.params(2) = std::numeric_limits<double>::infinity();
    r.errors(2) = std::numeric_limits<double>::infinity();
  }
  return r;
}

inline FitResult fit_exponential(std::span<const double> t, std::span<const double> y, std::span<const double> sigma) {
  require(t.size() >= 4, ErrorKind::kFit, "too few points for an exponential fit");
  const double span = t.back() - t.front();
  std::vector<Eigen::VectorXd> starts;
  for (double tau : {0.1 * span, 0.3 * span, span, 3.0 * span}) {
    Eigen::VectorXd p(3);
    p << y.back(), y.front() - y.back(), tau;
    starts.push_back(p);
  }
  auto r = least_squares(exponential_decay, t, y, sigma, starts);
  require(r.params(2) > 0.0, ErrorKind::kFit, "fitted decay time is negative");
  return r;
}

}  // namespace jbasim

#endif  // JBASIM_FITTING_HPP
