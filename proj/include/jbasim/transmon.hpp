// Flux-tunable transmon: charge-basis spectrum, flux sensitivity and the
// coherence estimates (Purcell relaxation, 1/f flux-noise dephasing).
#ifndef JBASIM_TRANSMON_HPP
#define JBASIM_TRANSMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "jbasim/core.hpp"

namespace jbasim {

struct TransmonParams {
  double ej_max = 21.0;     // GHz
  double ec_cp = 1.2;       // GHz, Cooper-pair charging energy
  bool squid_symmetric = true;
  double squid_asymmetry = 0.0;  // only read when squid_symmetric is false
  int charge_cutoff = 15;   // basis spans n in [-cutoff, cutoff]

  void validate() const {
    require(ej_max > 0.0, ErrorKind::kInvalidArgument, "transmon EJ_max must be > 0");
    require(ec_cp > 0.0, ErrorKind::kInvalidArgument, "transmon EC_cp must be > 0");
    require(charge_cutoff >= 10, ErrorKind::kInvalidArgument, "transmon charge_cutoff must be >= 10");
    require(ej_max / (ec_cp / 4.0) >= 20.0, ErrorKind::kInvalidArgument,
            "EJ_max/(EC_cp/4) must be >= 20 (transmon regime)");
    require(squid_asymmetry >= 0.0 && squid_asymmetry <= 1.0, ErrorKind::kInvalidArgument,
            "SQUID asymmetry must lie in [0, 1]");
  }
};

/// External flux in units of the flux quantum, folded into [-0.5, 0.5].
class FluxPoint {
 public:
  FluxPoint() = default;
  explicit FluxPoint(double phi) {
    require(std::isfinite(phi), ErrorKind::kInvalidArgument, "flux must be finite");
    phi_ = phi - std::round(phi);
  }
  double phi() const { return phi_; }

 private:
  double phi_ = 0.0;
};

struct TransmonSpectrum {
  std::vector<double> levels;   // GHz, referenced to the ground state
  double f01 = 0.0;
  double f12 = 0.0;
  double anharmonicity = 0.0;   // f12 - f01
  Eigen::MatrixXd charge_elements;  // |<i|n|j>| between the returned levels

  std::size_t size() const { return levels.size(); }
  double transition(std::size_t i) const { return levels[i + 1] - levels[i]; }
};

inline constexpr int kSpectrumLevels = 6;

inline double josephson_energy(const TransmonParams& p, FluxPoint flux) {
  const double c = std::cos(std::numbers::pi * flux.phi());
  if (p.squid_symmetric) return p.ej_max * std::abs(c);
  const double s = std::sin(std::numbers::pi * flux.phi());
  return p.ej_max * std::sqrt(c * c + p.squid_asymmetry * p.squid_asymmetry * s * s);
}

namespace detail {

inline TransmonSpectrum solve_charge_basis(double ej, double ec_cp, int cutoff, int num_levels) {
  const int dim = 2 * cutoff + 1;
  Eigen::VectorXd diag(dim);
  Eigen::VectorXd sub = Eigen::VectorXd::Constant(dim - 1, -0.5 * ej);
  for (int k = 0; k < dim; ++k) {
    const double n = k - cutoff;
    diag(k) = ec_cp * n * n;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    Eigen::MatrixXd h = diag.asDiagonal();
    h.diagonal(1) = sub;
    h.diagonal(-1) = sub;
    solver.compute(h, Eigen::ComputeEigenvectors);
  }
  require(solver.info() == Eigen::Success, ErrorKind::kConvergence, "charge-basis eigensolver failed");

  const Eigen::VectorXd& ev = solver.eigenvalues();
  const Eigen::MatrixXd& vecs = solver.eigenvectors();

  TransmonSpectrum out;
  out.levels.resize(num_levels);
  for (int i = 0; i < num_levels; ++i) out.levels[i] = ev(i) - ev(0);
  out.f01 = out.levels[1];
  out.f12 = out.levels[2] - out.levels[1];
  out.anharmonicity = out.f12 - out.f01;

  Eigen::VectorXd n_diag(dim);
  for (int k = 0; k < dim; ++k) n_diag(k) = k - cutoff;
  const Eigen::MatrixXd low = vecs.leftCols(num_levels);
  out.charge_elements = (low.transpose() * n_diag.asDiagonal() * low).cwiseAbs();
  return out;
}

}  // namespace detail

/// Spectrum of H/h = EC_cp n^2 - EJ(phi) cos(phi_hat) at n_g = 0. Convergence is
/// checked by repeating the solve with the cutoff raised by 5.
inline TransmonSpectrum diagonalize(const TransmonParams& params, FluxPoint flux,
                                    int num_levels = kSpectrumLevels) {
  params.validate();
  require(num_levels >= 4, ErrorKind::kInvalidArgument, "at least 4 transmon levels are required");
  require(num_levels <= 2 * params.charge_cutoff + 1, ErrorKind::kInvalidArgument,
          "more levels requested than basis states");
  const double ej = josephson_energy(params, flux);
  TransmonSpectrum spec = detail::solve_charge_basis(ej, params.ec_cp, params.charge_cutoff, num_levels);
  const TransmonSpectrum wider =
      detail::solve_charge_basis(ej, params.ec_cp, params.charge_cutoff + 5, num_levels);
  constexpr double kOneKhz = 1e-6;
  for (int i = 1; i < num_levels; ++i) {
    if (std::abs(spec.levels[i] - wider.levels[i]) > kOneKhz) {
      throw Error(ErrorKind::kConvergence,
                  "level " + std::to_string(i) + " not converged at charge_cutoff " +
                      std::to_string(params.charge_cutoff));
    }
  }
  return spec;
}

inline double f01_at(const TransmonParams& params, double phi) {
  return diagonalize(params, FluxPoint(phi), 4).f01;
}

/// Flux on [0, 0.5) at which f01 equals `target_f01`, by bisection on the
/// monotone branch. Tolerance is 10 kHz in frequency.
inline FluxPoint flux_for_f01(const TransmonParams& params, double target_f01) {
  const double f_max = f01_at(params, 0.0);
  require(target_f01 > 0.0, ErrorKind::kOutOfRange, "target f01 must be positive");
  require(target_f01 <= f_max, ErrorKind::kOutOfRange,
          "target f01 " + std::to_string(target_f01) + " GHz above maximum " + std::to_string(f_max));
  if (f_max - target_f01 < 1e-5) return FluxPoint(0.0);

  double lo = 0.0;
  double hi = 0.5;
  require(f01_at(params, hi) < target_f01, ErrorKind::kOutOfRange,
          "target f01 below the minimum of the tunable branch");
  constexpr double kTolerance = 1e-5;  // 10 kHz
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double f = f01_at(params, mid);
    if (std::abs(f - target_f01) < 0.1 * kTolerance) return FluxPoint(mid);
    (f > target_f01 ? lo : hi) = mid;
  }
  const double mid = 0.5 * (lo + hi);
  require(std::abs(f01_at(params, mid) - target_f01) < kTolerance, ErrorKind::kConvergence,
          "flux bisection did not reach 10 kHz");
  return FluxPoint(mid);
}

inline constexpr double kFluxStep = 1e-4;

/// df01/dphi in GHz per flux quantum (central difference).
inline double flux_sensitivity(const TransmonParams& params, FluxPoint flux, double step = kFluxStep) {
  const double phi = flux.phi();
  return (f01_at(params, phi + step) - f01_at(params, phi - step)) / (2.0 * step);
}

/// Purcell-limited relaxation time in us. Returns +inf for a decoupled qubit.
inline double purcell_t1(double g, double delta, double kappa) {
  require(std::abs(delta) > std::abs(g), ErrorKind::kDispersiveViolation,
          "Purcell estimate needs |delta| > g");
  if (g == 0.0 || kappa == 0.0) return kInfinity;
  const double rate = kTwoPi * kappa * (g / delta) * (g / delta);  // 1/ns
  return 1.0 / rate * 1e-3;
}

struct FluxNoiseConfig {
  double infrared_cutoff_hz = 1.0;
  double reference_time_us = 1.0;
};

/// First-order 1/f flux-noise dephasing time in us, for a noise amplitude
/// `amplitude` in micro-flux-quanta per sqrt(Hz) at 1 Hz. Gaussian free decay
/// exp(-(t*Gamma)^2) with Gamma = 2 pi A |df01/dphi| sqrt(ln(1/(2 pi f_ir t))/2).
/// Returns +inf where the slope vanishes. Qualitative estimate only.
inline double tphi_flux_noise(const TransmonParams& params, FluxPoint flux, double amplitude,
                              const FluxNoiseConfig& cfg = {}) {
  require(amplitude > 0.0, ErrorKind::kInvalidArgument, "flux-noise amplitude must be > 0");
  const double slope = std::abs(flux_sensitivity(params, flux));  // GHz/Phi0
  if (slope < 1e-9) return kInfinity;
  const double log_term = std::log(1.0 / (kTwoPi * cfg.infrared_cutoff_hz * cfg.reference_time_us * 1e-6));
  const double gamma = kTwoPi * amplitude * 1e-6 * slope * std::sqrt(log_term / 2.0);  // 1/ns
  return 1.0 / gamma * 1e-3;
}

struct CoherenceBudget {
  double t1_purcell = kInfinity;  // us
  double t1_other = 0.7;          // us
  double t1_total = 0.0;          // us
  double tphi_flux = kInfinity;   // us
  double flux_noise_amp = 20.0;   // uPhi0/sqrt(Hz)
};

inline double combine_t1(double t1_a, double t1_b) {
  return 1.0 / (1.0 / t1_a + 1.0 / t1_b);
}

}  // namespace jbasim

#endif  // JBASIM_TRANSMON_HPP
