#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "penning/errors.hpp"
#include "penning/vec3.hpp"

namespace penning {

namespace constants {
inline constexpr double elementary_charge = 1.602176634e-19;  // C, exact
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double electron_mass = 9.1093837015e-31;  // kg
inline constexpr double mev = 1.602176634e-22;  // J per meV
inline constexpr double mm = 1e-3;
inline constexpr double us = 1e-6;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
}  // namespace constants

inline void require_finite(const Vec3& v, const char* what) {
  if (!is_finite(v)) throw InvalidArgument(std::string(what) + " has a non-finite component");
}

/// Charged particle species. Immutable once built.
class Species {
 public:
  Species(double mass, double charge, std::string label) : mass_(mass), charge_(charge), label_(std::move(label)) {
    if (!(mass_ > 0.0) || !std::isfinite(mass_)) throw InvalidArgument("species mass must be positive");
    if (charge_ == 0.0 || !std::isfinite(charge_)) throw InvalidArgument("species charge must be non-zero");
  }

  double mass() const noexcept { return mass_; }
  double charge() const noexcept { return charge_; }
  double charge_to_mass() const noexcept { return charge_ / mass_; }
  const std::string& label() const noexcept { return label_; }

 private:
  double mass_;
  double charge_;
  std::string label_;
};

inline Species species_from_amu(double amu, int charge_units) {
  if (!(amu > 0.0)) throw InvalidArgument("amu must be positive");
  if (charge_units == 0) throw InvalidArgument("charge must be non-zero");
  return Species(amu * constants::atomic_mass_unit, charge_units * constants::elementary_charge,
                 std::to_string(amu) + " amu, " + std::to_string(charge_units) + "e");
}

inline Species calcium_ion() {
  return Species(40.0 * constants::atomic_mass_unit, constants::elementary_charge, "Ca+");
}

inline Species electron() {
  return Species(constants::electron_mass, -constants::elementary_charge, "e-");
}

/// Speed of a particle with the given kinetic energy (non-relativistic).
inline double speed_from_energy(const Species& s, double kinetic_energy_J) {
  if (kinetic_energy_J < 0.0) throw InvalidArgument("kinetic energy must be non-negative");
  return std::sqrt(2.0 * kinetic_energy_J / s.mass());
}

/// Unit vector from azimuth (in the x-y plane, from +x) and declination (from the plane), degrees.
inline Vec3 direction_from_angles(double azimuth_deg, double declination_deg) {
  const double az = azimuth_deg * std::numbers::pi / 180.0;
  const double dec = declination_deg * std::numbers::pi / 180.0;
  return {std::cos(dec) * std::cos(az), std::cos(dec) * std::sin(az), std::sin(dec)};
}

struct TrajectoryState {
  double t = 0.0;
  Vec3 r;
  Vec3 v;
};

using Trajectory = std::vector<TrajectoryState>;

}  // namespace penning
