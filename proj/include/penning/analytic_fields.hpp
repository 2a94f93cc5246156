#pragma once

// Closed-form potentials of infinite straight-wire traps and the motional
// frequencies of an ideal Penning trap.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "penning/core.hpp"
#include "penning/field.hpp"

namespace penning {

enum class WireAxis { parallel_to_x, parallel_to_y };

/// One infinite line contributing coefficient * ln(R^2 / rho^2).
struct LogWire {
  WireAxis axis = WireAxis::parallel_to_y;
  double transverse_offset = 0.0;  // x of a wire parallel to y, y of a wire parallel to x
  double z_offset = 0.0;
  double coefficient = 0.0;  // V
};

/// Superposition of logarithmic line potentials referenced to zero at distance R.
/// Points closer than `guard_radius` to a wire axis are inside the electrode.
class LogWireSet {
 public:
  LogWireSet(std::vector<LogWire> wires, double reference_radius, double guard_radius)
      : wires_(std::move(wires)), R_(reference_radius), guard_(guard_radius) {
    double largest = 0.0;
    for (const auto& w : wires_) largest = std::max({largest, std::abs(w.transverse_offset), std::abs(w.z_offset)});
    if (!(R_ > 10.0 * largest)) throw InvalidArgument("reference radius must exceed 10x the largest wire offset");
    if (!(guard_ >= 0.0)) throw InvalidArgument("guard radius must be non-negative");
  }

  const std::vector<LogWire>& wires() const noexcept { return wires_; }
  double reference_radius() const noexcept { return R_; }
  double guard_radius() const noexcept { return guard_; }

  double potential(const Vec3& r) const {
    check(r);
    const double R2 = R_ * R_;
    double phi = 0.0;
    for (const auto& w : wires_) phi += w.coefficient * std::log(R2 / rho2(w, r));
    return phi;
  }

  /// Exact negative gradient; d/dt ln(R^2/rho^2) = -2 (t - t0) / rho^2.
  Vec3 efield(const Vec3& r) const {
    check(r);
    Vec3 e;
    for (const auto& w : wires_) {
      const double dt = transverse(w, r) - w.transverse_offset;
      const double dz = r.z - w.z_offset;
      const double g = 2.0 * w.coefficient / (dt * dt + dz * dz);
      if (w.axis == WireAxis::parallel_to_y)
        e.x += g * dt;
      else
        e.y += g * dt;
      e.z += g * dz;
    }
    return e;
  }

  Region classify(const Vec3& r) const {
    if (norm2(r) >= R_ * R_) return Region::outside;
    for (const auto& w : wires_)
      if (rho2(w, r) <= guard_ * guard_) return Region::electrode;
    return Region::free;
  }

 private:
  static double transverse(const LogWire& w, const Vec3& r) {
    return w.axis == WireAxis::parallel_to_y ? r.x : r.y;
  }
  static double rho2(const LogWire& w, const Vec3& r) {
    const double dt = transverse(w, r) - w.transverse_offset;
    const double dz = r.z - w.z_offset;
    return dt * dt + dz * dz;
  }
  void check(const Vec3& r) const {
    for (const auto& w : wires_) {
      if (rho2(w, r) <= guard_ * guard_) {
        std::ostringstream os;
        os << "point " << r << " lies on a wire (offset " << w.transverse_offset << ", z " << w.z_offset << ")";
        throw SingularPoint(os.str());
      }
    }
  }

  std::vector<LogWire> wires_;
  double R_;
  double guard_;
};

/// Two crossed planes of three parallel wires. `a` is the wire diameter.
struct SixWireSpec {
  double d = 3.0 * constants::mm;
  double z0 = 2.0 * constants::mm;
  double a = 1.0 * constants::mm;
  double R = 100.0 * constants::mm;
  double delta_V = -1.3;

  void validate() const {
    if (!(d > 0.0)) throw InvalidArgument("wire pitch d must be positive");
    if (!(z0 > 0.0)) throw InvalidArgument("half plane separation z0 must be positive");
    // Wire radius below d/5.
    if (!(a > 0.0) || !(a < 0.4 * d)) throw InvalidArgument("wire diameter must satisfy 0 < a < 2d/5");
    if (!std::isfinite(delta_V)) throw InvalidArgument("delta_V must be finite");
  }
};

/// Two crossed wires separated by 2 z0, both at v_plus with respect to ground at R.
struct TwoWireSpec {
  double a = 0.5 * constants::mm;
  double z0 = 2.0 * constants::mm;
  double R = 100.0 * constants::mm;
  double v_plus = 4.0;

  double log_factor() const { return std::log(R * R / (a * z0)); }

  void validate() const {
    if (!(a > 0.0) || !(z0 > 0.0) || !(R > 0.0)) throw InvalidArgument("two-wire dimensions must be positive");
    if (!(R * R > a * z0)) throw InvalidArgument("two-wire trap requires R^2 > a z0");
    if (!std::isfinite(v_plus)) throw InvalidArgument("v_plus must be finite");
  }
};

/// Wire set x-wires at z = -z0 (parallel to y) and y-wires at z = +z0 (parallel to x);
/// the outer wires carry -dV/(2 ln(d^2/2a^2)), the central ones the opposite sign.
inline LogWireSet make_six_wire(const SixWireSpec& spec) {
  spec.validate();
  const double k = spec.delta_V / (2.0 * std::log(spec.d * spec.d / (2.0 * spec.a * spec.a)));
  std::vector<LogWire> wires;
  for (const WireAxis axis : {WireAxis::parallel_to_y, WireAxis::parallel_to_x}) {
    const double z = axis == WireAxis::parallel_to_y ? -spec.z0 : spec.z0;
    wires.push_back({axis, -spec.d, z, -k});
    wires.push_back({axis, 0.0, z, +k});
    wires.push_back({axis, +spec.d, z, -k});
  }
  return LogWireSet(std::move(wires), spec.R, spec.a / 2.0);
}

inline LogWireSet make_two_wire(const TwoWireSpec& spec) {
  spec.validate();
  const double k = spec.v_plus / spec.log_factor();
  std::vector<LogWire> wires{{WireAxis::parallel_to_x, 0.0, spec.z0, k}, {WireAxis::parallel_to_y, 0.0, -spec.z0, k}};
  return LogWireSet(std::move(wires), spec.R, spec.a / 2.0);
}

inline double six_wire_potential(const SixWireSpec& spec, const Vec3& r) { return make_six_wire(spec).potential(r); }
inline double two_wire_potential(const TwoWireSpec& spec, const Vec3& r) { return make_two_wire(spec).potential(r); }

/// Quadratic expansion phi0 + curvature_coefficient (x^2 + y^2 - 2 z^2) about the two-wire minimum.
struct QuadraticExpansion {
  double phi0 = 0.0;
  double curvature_coefficient = 0.0;  // V/m^2
};

/// Second-order Taylor expansion of the two-wire potential at the origin.
/// Each wire contributes -(transverse^2 - z^2)/z0^2 to the bracket, giving
/// -V+/(z0^2 ln(R^2/a z0)) as the coefficient of (x^2 + y^2 - 2 z^2).
inline QuadraticExpansion two_wire_quadratic(const TwoWireSpec& spec) {
  spec.validate();
  const double L = spec.log_factor();
  return {2.0 * spec.v_plus / L * std::log(spec.R * spec.R / (spec.z0 * spec.z0)),
          -spec.v_plus / (spec.z0 * spec.z0 * L)};
}

inline QuadrupoleField two_wire_quadrupole(const TwoWireSpec& spec) {
  const auto q = two_wire_quadratic(spec);
  return {q.phi0, q.curvature_coefficient, {}};
}

/// Axial angular frequency of a quadrupole with the given coefficient of (x^2+y^2-2z^2).
inline double axial_frequency(double curvature_coefficient, const Species& s) {
  const double k = -4.0 * s.charge() * curvature_coefficient / s.mass();
  if (!(k > 0.0)) throw NoAxialConfinement("charge and curvature give no axial restoring force");
  return std::sqrt(k);
}

/// omega_z^2 = 4 q V+ / (m z0^2 ln(R^2/a z0)).
inline double axial_frequency_two_wire(const TwoWireSpec& spec, const Species& s) {
  spec.validate();
  if (!(s.charge() * spec.v_plus > 0.0)) throw NoAxialConfinement("q V+ must be positive for axial confinement");
  return axial_frequency(two_wire_quadratic(spec).curvature_coefficient, s);
}

/// |q| B / m in rad/s.
inline double cyclotron_frequency(const Species& s, double B) {
  if (!(B > 0.0)) throw InvalidArgument("magnetic field must be positive");
  return std::abs(s.charge()) * B / s.mass();
}

inline double cyclotron_period(const Species& s, double B) { return constants::two_pi / cyclotron_frequency(s, B); }

struct ModeFrequencies {
  double omega_z = 0.0;
  double omega_c = 0.0;
  double omega_plus = 0.0;
  double omega_minus = 0.0;
};

/// Modified-cyclotron and magnetron frequencies of an ideal Penning trap.
inline ModeFrequencies mode_frequencies(double omega_z, double omega_c) {
  if (!(omega_z >= 0.0) || !(omega_c > 0.0)) throw InvalidArgument("frequencies must be non-negative");
  const double disc = omega_c * omega_c / 4.0 - omega_z * omega_z / 2.0;
  if (disc < 0.0) {
    std::ostringstream os;
    os << "unstable trap: omega_z^2 = " << omega_z * omega_z << " exceeds omega_c^2/2 = " << omega_c * omega_c / 2.0;
    throw UnstableTrap(os.str());
  }
  const double root = std::sqrt(disc);
  const double plus = omega_c / 2.0 + root;
  // omega_minus from the product identity avoids cancellation when omega_z << omega_c.
  const double minus = plus > 0.0 ? omega_z * omega_z / (2.0 * plus) : 0.0;
  return {omega_z, omega_c, plus, minus};
}

}  // namespace penning
