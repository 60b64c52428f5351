// Qubit-state-dependent resonator frequencies (cavity pull), AC-Stark shifts and
// the photon-number calibration built on them.
#ifndef JBASIM_DISPERSIVE_HPP
#define JBASIM_DISPERSIVE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "jbasim/core.hpp"
#include "jbasim/transmon.hpp"

namespace jbasim {

struct CouplingParams {
  double g = 0.044;       // GHz, 0-1 coupling at the operating flux
  double fc = 6.4535;     // GHz, bare resonator frequency
  int n_photon_cutoff = 150;

  void validate() const {
    require(g > 0.0, ErrorKind::kInvalidArgument, "coupling g must be > 0");
    require(fc > 0.0, ErrorKind::kInvalidArgument, "resonator frequency fC must be > 0");
    require(n_photon_cutoff >= 150, ErrorKind::kInvalidArgument, "n_photon_cutoff must be >= 150");
  }
};

struct DispersiveShifts {
  std::array<double, 3> fc_by_state{};  // dressed resonator frequency per qubit level, GHz
  double cavity_pull = 0.0;             // 2chi = f_C0 - f_C1
  double shift2 = 0.0;                  // f_C0 - f_C2
  std::vector<std::string> warnings;
};

/// Couplings g_{j,j+1} scaled from g by the charge matrix elements.
inline std::vector<double> transition_couplings(const TransmonSpectrum& spec, double g) {
  std::vector<double> out(spec.size() - 1);
  const double ref = spec.charge_elements(0, 1);
  for (std::size_t j = 0; j + 1 < spec.size(); ++j) {
    out[j] = g * spec.charge_elements(j, j + 1) / ref;
  }
  return out;
}

namespace detail {

inline void check_dispersive(const TransmonSpectrum& spec, const CouplingParams& cp) {
  const double delta = cp.fc - spec.f01;
  require(std::abs(delta) > cp.g, ErrorKind::kDispersiveViolation,
          "|fC - f01| = " + std::to_string(std::abs(delta)) + " GHz does not exceed g");
}

}  // namespace detail

/// Second-order multilevel dispersive shifts from the spectrum and its charge
/// matrix elements. Cross-checked against `DressedLadder` in the tests.
inline DispersiveShifts dressed_shifts(const TransmonSpectrum& spec, const CouplingParams& cp) {
  cp.validate();
  detail::check_dispersive(spec, cp);
  const auto gj = transition_couplings(spec, cp.g);
  std::vector<double> chi(gj.size());
  for (std::size_t j = 0; j < gj.size(); ++j) {
    chi[j] = gj[j] * gj[j] / (spec.transition(j) - cp.fc);
  }
  DispersiveShifts out;
  out.fc_by_state[0] = cp.fc - chi[0];
  for (std::size_t i = 1; i < 3; ++i) out.fc_by_state[i] = cp.fc - chi[i] + chi[i - 1];
  out.cavity_pull = out.fc_by_state[0] - out.fc_by_state[1];
  out.shift2 = out.fc_by_state[0] - out.fc_by_state[2];
  for (std::size_t i = 1; i <= 2; ++i) {
    if (std::abs(spec.transition(i) - cp.fc) < 3.0 * cp.g) {
      out.warnings.push_back("straddling: transition " + std::to_string(i) + "-" + std::to_string(i + 1) +
                             " within 3g of the resonator");
    }
  }
  return out;
}

inline DispersiveShifts dressed_shifts(const TransmonParams& tp, FluxPoint flux, const CouplingParams& cp) {
  return dressed_shifts(diagonalize(tp, flux), cp);
}

/// Exact energies of transmon x resonator in the rotating-wave approximation.
/// The Hamiltonian conserves excitation number, so each block N is a small
/// tridiagonal matrix. For a qubit below the resonator the bare energies in a
/// block are strictly ordered in the transmon level, and since eigenvalues of
/// an irreducible tridiagonal matrix never cross, the k-th highest eigenvalue
/// is the dressed |k, N-k>.
class DressedLadder {
 public:
  DressedLadder(const TransmonSpectrum& spec, const CouplingParams& cp) : fc_(cp.fc), n_max_(cp.n_photon_cutoff) {
    cp.validate();
    detail::check_dispersive(spec, cp);
    require(spec.f01 < cp.fc, ErrorKind::kUnsupported,
            "joint diagonalization is implemented for a qubit below the resonator");
    bare_f01_ = spec.f01;
    const int levels = static_cast<int>(spec.size());
    const auto gj = transition_couplings(spec, cp.g);
    energies_.assign(levels, std::vector<double>(n_max_ + 1, 0.0));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    for (int block = 0; block <= n_max_ + levels - 1; ++block) {
      const int size = std::min(block, levels - 1) + 1;
      Eigen::VectorXd diag(size);
      Eigen::VectorXd sub(std::max(size - 1, 1));
      for (int j = 0; j < size; ++j) {
        diag(j) = spec.levels[j] + (block - j) * cp.fc;
        if (j + 1 < size) sub(j) = gj[j] * std::sqrt(static_cast<double>(block - j));
      }
      Eigen::VectorXd ev(size);
      if (size == 1) {
        ev(0) = diag(0);
      } else {
        solver.computeFromTridiagonal(diag, sub.head(size - 1), Eigen::EigenvaluesOnly);
        require(solver.info() == Eigen::Success, ErrorKind::kConvergence, "block eigensolver failed");
        ev = solver.eigenvalues();  // ascending
      }
      for (int j = 0; j < size; ++j) {
        const int n = block - j;
        if (n <= n_max_) energies_[j][n] = ev(size - 1 - j);
      }
    }
  }

  DressedLadder(const TransmonParams& tp, FluxPoint flux, const CouplingParams& cp)
      : DressedLadder(diagonalize(tp, flux), cp) {}

  double energy(int level, int n) const { return energies_.at(level).at(n); }
  int n_max() const { return n_max_; }
  double bare_f01() const { return bare_f01_; }
  double fc() const { return fc_; }

  /// Dressed resonator frequency E(i, n+1) - E(i, n) for qubit level i.
  double cavity_frequency(int level, int n) const { return energy(level, n + 1) - energy(level, n); }

  /// f01 with n photons; linear interpolation for non-integer n.
  double f01(double n) const {
    require(n >= 0.0, ErrorKind::kInvalidArgument, "photon number must be >= 0");
    require(n + 50.0 <= n_max_, ErrorKind::kTruncation,
            "photon number " + std::to_string(n) + " too close to the cutoff " + std::to_string(n_max_));
    const int lo = static_cast<int>(std::floor(n));
    const int hi = std::min(lo + 1, n_max_);
    const double w = n - lo;
    const double f_lo = energy(1, lo) - energy(0, lo);
    const double f_hi = energy(1, hi) - energy(0, hi);
    return (1.0 - w) * f_lo + w * f_hi;
  }

  DispersiveShifts shifts() const {
    DispersiveShifts out;
    for (int i = 0; i < 3; ++i) out.fc_by_state[i] = cavity_frequency(i, 0);
    out.cavity_pull = out.fc_by_state[0] - out.fc_by_state[1];
    out.shift2 = out.fc_by_state[0] - out.fc_by_state[2];
    return out;
  }

 private:
  double fc_;
  int n_max_;
  double bare_f01_ = 0.0;
  std::vector<std::vector<double>> energies_;
};

/// AC-Stark shifted f01 with `n` photons in the resonator.
inline double ac_stark_f01(const DressedLadder& ladder, double n) { return ladder.f01(n); }

inline double ac_stark_f01(const TransmonParams& tp, FluxPoint flux, const CouplingParams& cp, double n) {
  return DressedLadder(tp, flux, cp).f01(n);
}

/// Inverse of the AC-Stark curve: photon number producing `observed_shift`
/// (GHz, f01(n) - f01(0)), by bisection.
inline double photons_from_shift(const DressedLadder& ladder, double observed_shift) {
  const double f0 = ladder.f01(0.0);
  if (observed_shift == 0.0) return 0.0;
  const double n_top = ladder.n_max() - 50.0;
  const double s_top = ladder.f01(n_top) - f0;
  require(observed_shift < 0.0 && observed_shift >= s_top, ErrorKind::kOutOfRange,
          "shift " + std::to_string(observed_shift) + " GHz outside the invertible range [" +
              std::to_string(s_top) + ", 0]");
  double lo = 0.0;
  double hi = n_top;
  for (int iter = 0; iter < 100 && hi - lo > 1e-9; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (ladder.f01(mid) - f0 > observed_shift ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct PhotonEstimate {
  double n = 0.0;
  double n_low = 0.0;   // bound from g + dg
  double n_high = 0.0;  // bound from g - dg
};

/// Photon number with the spread induced by the uncertainty `dg` on g.
inline PhotonEstimate photons_from_shift(const TransmonParams& tp, FluxPoint flux, const CouplingParams& cp,
                                         double observed_shift, double dg = 0.003) {
  const auto spec = diagonalize(tp, flux);
  PhotonEstimate est;
  est.n = photons_from_shift(DressedLadder(spec, cp), observed_shift);
  CouplingParams lo = cp;
  lo.g = cp.g + dg;
  CouplingParams hi = cp;
  hi.g = cp.g - dg;
  est.n_low = photons_from_shift(DressedLadder(spec, lo), observed_shift);
  est.n_high = photons_from_shift(DressedLadder(spec, hi), observed_shift);
  return est;
}

/// Photon-number-dependent resonator frequency for qubit levels 0..2,
/// tabulated from the dressed ladder and interpolated linearly.
class CavityPullTable {
 public:
  static constexpr int kLevels = 3;

  CavityPullTable() = default;

  explicit CavityPullTable(const DressedLadder& ladder) : fc_(ladder.fc()) {
    const int n_points = ladder.n_max();
    for (int i = 0; i < kLevels; ++i) {
      offset_[i].resize(n_points);
      for (int n = 0; n < n_points; ++n) offset_[i][n] = ladder.cavity_frequency(i, n) - fc_;
    }
  }

  /// Uniform offsets (no photon-number dependence), used for reduced models.
  static CavityPullTable constant(double fc, const std::array<double, kLevels>& fc_by_state) {
    CavityPullTable t;
    t.fc_ = fc;
    for (int i = 0; i < kLevels; ++i) t.offset_[i] = {fc_by_state[i] - fc};
    return t;
  }

  /// Resonator frequency offset from the bare fC in GHz for `level` at `n` photons.
  double offset(int level, double n) const {
    const auto& tab = offset_[level];
    if (tab.size() == 1 || n <= 0.0) return tab.front();
    const double top = static_cast<double>(tab.size() - 1);
    if (n >= top) return tab.back();
    const auto lo = static_cast<std::size_t>(n);
    const double w = n - static_cast<double>(lo);
    return (1.0 - w) * tab[lo] + w * tab[lo + 1];
  }

  double frequency(int level, double n) const { return fc_ + offset(level, n); }
  double fc() const { return fc_; }

 private:
  double fc_ = 0.0;
  std::array<std::vector<double>, kLevels> offset_;
};

}  // namespace jbasim

#endif  // JBASIM_DISPERSIVE_HPP
