#pragma once

#include <array>
#include <cmath>
#include <complex>

namespace seriescomp {

/// Complex RMS quantity. The carried unit is contextual (kV for voltages,
/// kA for currents, Ohm for impedances); angles are radians.
using Phasor = std::complex<double>;

inline double magnitude(Phasor p) { return std::abs(p); }
inline double angle_rad(Phasor p) { return std::arg(p); }
inline Phasor from_polar(double mag, double ang_rad) { return std::polar(mag, ang_rad); }

inline bool is_finite(Phasor p) {
  return std::isfinite(p.real()) && std::isfinite(p.imag());
}

/// Wrap an angle difference into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

enum class Phase : int { A = 0, B = 1, C = 2 };

inline constexpr std::array<Phase, 3> kPhases{Phase::A, Phase::B, Phase::C};

inline constexpr char phase_letter(Phase p) {
  switch (p) {
    case Phase::A: return 'a';
    case Phase::B: return 'b';
    case Phase::C: return 'c';
  }
  return '?';
}

/// One value per phase. Asymmetry between phases is allowed and meaningful;
/// no invariant ties the three components together.
struct ThreePhaseSet {
  Phasor a{0.0, 0.0};
  Phasor b{0.0, 0.0};
  Phasor c{0.0, 0.0};

  Phasor& operator[](Phase p) {
    switch (p) {
      case Phase::B: return b;
      case Phase::C: return c;
      default: return a;
    }
  }
  Phasor operator[](Phase p) const {
    switch (p) {
      case Phase::B: return b;
      case Phase::C: return c;
      default: return a;
    }
  }

  bool operator==(const ThreePhaseSet&) const = default;
};

inline bool is_finite(const ThreePhaseSet& s) {
  return is_finite(s.a) && is_finite(s.b) && is_finite(s.c);
}

/// Balanced positive-sequence set: phase A at `ang`, B lagging 120 degrees,
/// C leading 120 degrees.
inline ThreePhaseSet balanced_set(double mag, double ang_rad) {
  return ThreePhaseSet{from_polar(mag, ang_rad),
                       from_polar(mag, ang_rad - 2.0 * M_PI / 3.0),
                       from_polar(mag, ang_rad + 2.0 * M_PI / 3.0)};
}

}  // namespace seriescomp
