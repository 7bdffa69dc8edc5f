#pragma once

// Two capacitively coupled single-level dots: the work dot w exchanges
// electrons with the biased leads L and R (temperature T_W), the hot dot h
// with the hot reservoir H (temperature T_H). Units: hbar = k_B = 1, energies
// and rates in units of the bare coupling Gamma, times in 1/Gamma.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "qdcycles/errors.hpp"

namespace qdc {

enum class Reservoir : std::uint8_t { L = 0, R = 1, H = 2 };

/// Charge states ordered (00, 01, 10, 11); first digit is the work-dot occupation.
enum class State : std::uint8_t { s00 = 0, s01 = 1, s10 = 2, s11 = 3 };

inline constexpr int index(State s) noexcept { return static_cast<int>(s); }
inline constexpr int work_occupation(State s) noexcept { return index(s) >> 1; }
inline constexpr int hot_occupation(State s) noexcept { return index(s) & 1; }
inline constexpr State make_state(int n_w, int n_h) noexcept {
  return static_cast<State>((n_w << 1) | n_h);
}

inline std::string_view to_string(State s) noexcept {
  constexpr std::array<std::string_view, 4> names{"00", "01", "10", "11"};
  return names[index(s)];
}

/// Tunnelling event: reservoir plus direction (+ = electron enters a dot).
enum class Jump : std::uint8_t { Lp = 0, Lm, Rp, Rm, Hp, Hm };

inline constexpr std::array<Jump, 6> kAllJumps{Jump::Lp, Jump::Lm, Jump::Rp,
                                               Jump::Rm, Jump::Hp, Jump::Hm};

inline constexpr Reservoir reservoir(Jump j) noexcept {
  return static_cast<Reservoir>(static_cast<int>(j) / 2);
}
inline constexpr bool is_entering(Jump j) noexcept { return static_cast<int>(j) % 2 == 0; }
inline constexpr Jump make_jump(Reservoir r, bool entering) noexcept {
  return static_cast<Jump>(static_cast<int>(r) * 2 + (entering ? 0 : 1));
}
/// The jump that undoes `j` along the same edge (L+ <-> L-, ...).
inline constexpr Jump inverse(Jump j) noexcept { return make_jump(reservoir(j), !is_entering(j)); }

inline std::string_view to_string(Jump j) noexcept {
  constexpr std::array<std::string_view, 6> names{"L+", "L-", "R+", "R-", "H+", "H-"};
  return names[static_cast<int>(j)];
}

/// Target state of `j` from `from`, or nullopt when the jump is not allowed there.
inline constexpr std::optional<State> apply(Jump j, State from) noexcept {
  int n_w = work_occupation(from);
  int n_h = hot_occupation(from);
  int& n = reservoir(j) == Reservoir::H ? n_h : n_w;
  if (is_entering(j) == (n == 1)) return std::nullopt;
  n = is_entering(j) ? 1 : 0;
  return make_state(n_w, n_h);
}

/// Four explicit work-dot couplings Gamma_{L/R, n_h}; overrides the x-rule.
struct Couplings {
  double left0 = 1.0;
  double left1 = 1.0;
  double right0 = 1.0;
  double right1 = 1.0;
};

struct EngineParams {
  double eps_w = 0.0;       ///< work-dot level, measured from mu_R
  double eps_h = 0.0;       ///< hot-dot level, measured from mu_H
  double coulomb_u = 5.0;   ///< inter-dot charging energy U
  double delta_mu = 0.25;   ///< mu_L - mu_R
  double temp_w = 5.0;      ///< k_B T_W
  double temp_h = 15.0;     ///< k_B T_H
  double gamma_base = 1.0;  ///< Gamma, the rate unit
  double gamma_h = 1.0;     ///< Gamma_H
  double x = 0.9;           ///< suppression of Gamma_R when the hot dot is occupied
  std::optional<Couplings> explicit_couplings;

  /// Throws ParameterError on the first violated domain constraint.
  void validate() const {
    auto finite = [](double v, const char* name) {
      if (!std::isfinite(v)) throw ParameterError(std::string(name) + " must be finite");
    };
    finite(eps_w, "eps_w");
    finite(eps_h, "eps_h");
    finite(coulomb_u, "coulomb_u");
    finite(delta_mu, "delta_mu");
    finite(x, "x");
    if (!(temp_w > 0.0) || !std::isfinite(temp_w)) throw ParameterError("temp_w must be > 0");
    if (!(temp_h > 0.0) || !std::isfinite(temp_h)) throw ParameterError("temp_h must be > 0");
    if (!(gamma_base > 0.0) || !std::isfinite(gamma_base))
      throw ParameterError("gamma_base must be > 0");
    if (!(gamma_h > 0.0) || !std::isfinite(gamma_h)) throw ParameterError("gamma_h must be > 0");
    if (coulomb_u < 0.0) throw ParameterError("coulomb_u must be >= 0");
    if (x < 0.0 || x > 1.0) throw ParameterError("x must lie in [0, 1]");
    if (explicit_couplings) {
      const auto& c = *explicit_couplings;
      for (double g : {c.left0, c.left1, c.right0, c.right1})
        if (!(g >= 0.0) || !std::isfinite(g))
          throw ParameterError("explicit couplings must be finite and >= 0");
    }
  }

  double beta_w() const noexcept { return 1.0 / temp_w; }
  double beta_h() const noexcept { return 1.0 / temp_h; }

  /// 1 - T_W / T_H.
  double carnot() const noexcept { return 1.0 - temp_w / temp_h; }

  EngineParams with_delta_mu(double dmu) const {
    EngineParams p = *this;
    p.delta_mu = dmu;
    return p;
  }
};

namespace presets {

/// x = 0.9, T_W = 5, T_H = 15, eps = 0, delta_mu = 1/4, U = 5 (cycle statistics).
inline EngineParams cycles() { return EngineParams{}; }

/// As cycles() but T_H = 2 T_W = 10 (large-deviation surface).
inline EngineParams ldf() {
  EngineParams p;
  p.temp_h = 10.0;
  return p;
}

/// As cycles() but T_H = 100 (backaction-free telegraph regime).
inline EngineParams semi_stochastic() {
  EngineParams p;
  p.temp_h = 100.0;
  return p;
}

}  // namespace presets

/// Fermi-Dirac occupation 1 / (exp((eps - mu) / temp) + 1).
inline double fermi(double eps, double mu, double temp) {
  if (!(temp > 0.0)) throw ParameterError("fermi: temperature must be > 0");
  const double z = (eps - mu) / temp;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

/// Tunnel coupling Gamma_{alpha, n}; n is the occupation of the dot not
/// involved in the jump (hot dot for L/R, work dot for H).
inline double coupling(const EngineParams& p, Reservoir alpha, int n) {
  if (n != 0 && n != 1) throw PreconditionError("coupling: occupation must be 0 or 1");
  if (alpha == Reservoir::H) return p.gamma_h;
  if (p.explicit_couplings) {
    const auto& c = *p.explicit_couplings;
    if (alpha == Reservoir::L) return n == 0 ? c.left0 : c.left1;
    return n == 0 ? c.right0 : c.right1;
  }
  const double suppression = (alpha == Reservoir::R && n == 1) ? p.x : 0.0;
  return (1.0 - suppression) * p.gamma_base;
}

/// Coupling asymmetry (G_R0 G_L1 - G_R1 G_L0) / ((G_L0 + G_R0)(G_L1 + G_R1)).
inline double asymmetry(const EngineParams& p) {
  const double l0 = coupling(p, Reservoir::L, 0);
  const double l1 = coupling(p, Reservoir::L, 1);
  const double r0 = coupling(p, Reservoir::R, 0);
  const double r1 = coupling(p, Reservoir::R, 1);
  const double denom = (l0 + r0) * (l1 + r1);
  if (!(denom > 0.0)) throw DegeneracyError("asymmetry: vanishing coupling sum");
  return (r0 * l1 - r1 * l0) / denom;
}

/// The twelve golden-rule rates W^{+/-}_{alpha, n}.
struct TransitionRates {
  std::array<std::array<double, 2>, 3> plus{};
  std::array<std::array<double, 2>, 3> minus{};

  double in(Reservoir a, int n) const { return plus[static_cast<int>(a)][n]; }
  double out(Reservoir a, int n) const { return minus[static_cast<int>(a)][n]; }

  /// W^+_{W,n} = W^+_{L,n} + W^+_{R,n}.
  double work_in(int n) const { return in(Reservoir::L, n) + in(Reservoir::R, n); }
  double work_out(int n) const { return out(Reservoir::L, n) + out(Reservoir::R, n); }

  /// Rate of `j` out of state `from`; zero when the jump is not allowed.
  double rate(Jump j, State from) const {
    if (!apply(j, from)) return 0.0;
    const Reservoir r = reservoir(j);
    const int other = r == Reservoir::H ? work_occupation(from) : hot_occupation(from);
    return is_entering(j) ? in(r, other) : out(r, other);
  }

  /// Total exit rate of `s`.
  double exit_rate(State s) const {
    double total = 0.0;
    for (Jump j : kAllJumps) total += rate(j, s);
    return total;
  }
};

/// W^+ = Gamma f(eps_j + U n), W^- = Gamma (1 - f(eps_j + U n)) with
/// mu_L = delta_mu, mu_R = mu_H = 0.
inline TransitionRates rates(const EngineParams& p) {
  p.validate();
  TransitionRates r;
  for (int n = 0; n < 2; ++n) {
    const double e_w = p.eps_w + p.coulomb_u * n;
    const double e_h = p.eps_h + p.coulomb_u * n;
    const std::array<double, 3> occ{fermi(e_w, p.delta_mu, p.temp_w), fermi(e_w, 0.0, p.temp_w),
                                    fermi(e_h, 0.0, p.temp_h)};
    // 1 - f computed directly to avoid cancellation deep in the tails.
    const std::array<double, 3> empty{fermi(p.delta_mu, e_w, p.temp_w), fermi(0.0, e_w, p.temp_w),
                                      fermi(0.0, e_h, p.temp_h)};
    for (Reservoir a : {Reservoir::L, Reservoir::R, Reservoir::H}) {
      const int i = static_cast<int>(a);
      const double g = coupling(p, a, n);
      r.plus[i][n] = g * occ[i];
      r.minus[i][n] = g * empty[i];
    }
  }
  return r;
}

/// 4x4 rate matrix acting on column vectors (p00, p01, p10, p11).
struct Generator {
  Eigen::Matrix4d entries = Eigen::Matrix4d::Zero();

  double operator()(State to, State from) const { return entries(index(to), index(from)); }
};

inline Generator generator(const TransitionRates& r) {
  Generator g;
  auto& m = g.entries;
  const int s00 = index(State::s00), s01 = index(State::s01);
  const int s10 = index(State::s10), s11 = index(State::s11);
  m(s01, s00) = r.in(Reservoir::H, 0);
  m(s00, s01) = r.out(Reservoir::H, 0);
  m(s10, s00) = r.work_in(0);
  m(s00, s10) = r.work_out(0);
  m(s11, s01) = r.work_in(1);
  m(s01, s11) = r.work_out(1);
  m(s11, s10) = r.in(Reservoir::H, 1);
  m(s10, s11) = r.out(Reservoir::H, 1);
  for (int c = 0; c < 4; ++c) m(c, c) = -m.col(c).sum();
  return g;
}

inline Generator generator(const EngineParams& p) { return generator(rates(p)); }

}  // namespace qdc
