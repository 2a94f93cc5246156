#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "penning/analytic_fields.hpp"
#include "penning/core.hpp"
#include "penning/field.hpp"

namespace penning {

/// Time window [begin, end) during which a source is switched on.
struct TimeWindow {
  double begin = -std::numeric_limits<double>::infinity();
  double end = std::numeric_limits<double>::infinity();
  bool contains(double t) const noexcept { return t >= begin && t < end; }
};

/// Time-switched superposition of electrostatic sources in a constant uniform B.
class FieldStack {
 public:
  FieldStack() = default;
  explicit FieldStack(Vec3 b) : b_(b) {}

  FieldStack& add(AnyField source, TimeWindow window = {}) {
    sources_.push_back({std::move(source), window});
    return *this;
  }

  const Vec3& magnetic_field() const noexcept { return b_; }
  std::size_t size() const noexcept { return sources_.size(); }

  Vec3 efield(const Vec3& r, double t) const {
    Vec3 e;
    for (const auto& s : sources_)
      if (s.window.contains(t)) e += s.field.efield(r);
    return e;
  }
  double potential(const Vec3& r, double t) const {
    double phi = 0.0;
    for (const auto& s : sources_)
      if (s.window.contains(t)) phi += s.field.potential(r);
    return phi;
  }
  Region classify(const Vec3& r, double t) const {
    Region worst = Region::free;
    for (const auto& s : sources_) {
      if (!s.window.contains(t)) continue;
      const Region c = s.field.classify(r);
      if (c == Region::outside) return c;
      if (c == Region::electrode) worst = c;
    }
    return worst;
  }

  /// Finite window edges, sorted, without duplicates.
  std::vector<double> switch_times() const {
    std::vector<double> out;
    for (const auto& s : sources_)
      for (double t : {s.window.begin, s.window.end})
        if (std::isfinite(t)) out.push_back(t);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Copy with every window edge moved to the nearest step boundary t0 + k dt.
  FieldStack snapped(double t0, double dt) const {
    FieldStack out(b_);
    auto snap = [&](double t) { return std::isfinite(t) ? t0 + std::round((t - t0) / dt) * dt : t; };
    for (const auto& s : sources_) out.add(s.field, {snap(s.window.begin), snap(s.window.end)});
    return out;
  }

 private:
  struct Entry {
    AnyField field;
    TimeWindow window;
  };
  std::vector<Entry> sources_;
  Vec3 b_;
};

struct IntegratorConfig {
  double dt = 0.0;
  double t_end = 0.0;
  int record_stride = 10;
};

/// Step size of one cyclotron period / 400.
inline double default_time_step(const Species& s, double B) { return cyclotron_period(s, B) / 400.0; }

/// Kick / rotate / kick velocity update of the Boris scheme.
inline Vec3 boris_velocity(const Vec3& v, const Vec3& e, const Vec3& b, double dt, double qm) {
  const Vec3 v_minus = v + (0.5 * qm * dt) * e;
  const Vec3 t = (0.5 * qm * dt) * b;
  const Vec3 s = (2.0 / (1.0 + norm2(t))) * t;
  const Vec3 v_prime = v_minus + cross(v_minus, t);
  const Vec3 v_plus = v_minus + cross(v_prime, s);
  return v_plus + (0.5 * qm * dt) * e;
}

/// Synchronous drift-kick-drift Boris step. `e` is the field at r + v dt/2.
inline TrajectoryState boris_step(const TrajectoryState& state, const Vec3& e, const Vec3& b, double dt,
                                  const Species& s) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  const Vec3 r_half = state.r + (0.5 * dt) * state.v;
  const Vec3 v_new = boris_velocity(state.v, e, b, dt, s.charge_to_mass());
  return {state.t + dt, r_half + (0.5 * dt) * v_new, v_new};
}

enum class Termination { completed, domain_exit, electrode_strike };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::domain_exit: return "domain_exit";
    case Termination::electrode_strike: return "electrode_strike";
  }
  return "?";
}

struct SnappedSwitch {
  double requested;
  double snapped;
};

struct IntegrationResult {
  Trajectory samples;  // every record_stride steps, starting with the initial state
  TrajectoryState final_state;
  Termination termination = Termination::completed;
  long steps = 0;
  std::vector<SnappedSwitch> switches;

  bool escaped() const noexcept { return termination != Termination::completed; }
};

inline IntegrationResult integrate(const TrajectoryState& state0, const FieldStack& fields, const IntegratorConfig& cfg,
                                   const Species& s) {
  require_finite(state0.r, "initial position");
  require_finite(state0.v, "initial velocity");
  if (!(cfg.dt > 0.0)) throw InvalidArgument("time step must be positive");
  if (cfg.record_stride < 1) throw InvalidArgument("record stride must be >= 1");
  const Vec3 b = fields.magnetic_field();
  const double bmag = norm(b);
  if (bmag > 0.0 && cfg.dt > cyclotron_period(s, bmag) / 100.0)
    throw InvalidArgument("time step exceeds 1/100 of the cyclotron period");

  IntegrationResult out;
  const FieldStack stack = fields.snapped(state0.t, cfg.dt);
  {
    const auto req = fields.switch_times();
    const auto got = stack.switch_times();
    for (std::size_t i = 0; i < req.size() && i < got.size(); ++i) out.switches.push_back({req[i], got[i]});
  }

  const long n = std::lround((cfg.t_end - state0.t) / cfg.dt);
  TrajectoryState st = state0;
  out.samples.push_back(st);
  if (stack.classify(st.r, st.t) != Region::free) {
    out.termination = stack.classify(st.r, st.t) == Region::outside ? Termination::domain_exit
                                                                     : Termination::electrode_strike;
    out.final_state = st;
    return out;
  }
  const double qm = s.charge_to_mass();
  for (long k = 0; k < n; ++k) {
    const double t_mid = state0.t + (static_cast<double>(k) + 0.5) * cfg.dt;
    const Vec3 r_half = st.r + (0.5 * cfg.dt) * st.v;
    Vec3 e;
    try {
      e = stack.efield(r_half, t_mid);
    } catch (const SingularPoint&) {
      out.termination = Termination::electrode_strike;
      break;
    } catch (const DomainError&) {
      out.termination = Termination::domain_exit;
      break;
    }
    st.v = boris_velocity(st.v, e, b, cfg.dt, qm);
    st.r = r_half + (0.5 * cfg.dt) * st.v;
    st.t = state0.t + static_cast<double>(k + 1) * cfg.dt;
    ++out.steps;
    if ((k + 1) % cfg.record_stride == 0) {
      const Region where = stack.classify(st.r, st.t);
      if (where != Region::free) {
        out.termination = where == Region::outside ? Termination::domain_exit : Termination::electrode_strike;
        break;
      }
      out.samples.push_back(st);
    }
  }
  out.final_state = st;
  return out;
}

/// Kinetic and potential energy (J) of a state.
inline double kinetic_energy(const TrajectoryState& st, const Species& s) { return 0.5 * s.mass() * norm2(st.v); }

inline double total_energy(const TrajectoryState& st, const FieldStack& fields, const Species& s) {
  return kinetic_energy(st, s) + s.charge() * fields.potential(st.r, st.t);
}

/// Position of an ion released at rest at the origin in E = E y-hat, B = B z-hat.
struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;
};

inline PlanarPoint cycloid_closed_form(double t, double E, double B, const Species& s) {
  if (!(B > 0.0)) throw InvalidArgument("magnetic field must be positive");
  const double drift = E / B;
  const double omega = s.charge() * B / s.mass();
  return {-drift / omega * std::sin(omega * t) + drift * t, drift / omega * (1.0 - std::cos(omega * t))};
}

/// Electric field whose E/B drift covers `displacement` in one cyclotron period.
inline double hop_field_magnitude(double displacement, double B, const Species& s) {
  if (!(displacement >= 0.0)) throw InvalidArgument("displacement must be non-negative");
  if (!(B > 0.0)) throw InvalidArgument("magnetic field must be positive");
  return displacement * std::abs(s.charge()) * B * B / (constants::two_pi * s.mass());
}

/// Writes `t,x,y,z,vx,vy,vz,ke_J,pe_J` rows in SI units.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const FieldStack& fields,
                                 const Species& s) {
  os << "t,x,y,z,vx,vy,vz,ke_J,pe_J\n";
  char line[512];
  for (const auto& st : traj) {
    double pe = std::numeric_limits<double>::quiet_NaN();
    try {
      pe = s.charge() * fields.potential(st.r, st.t);
    } catch (const Error&) {
    }
    std::snprintf(line, sizeof line, "%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e\n", st.t, st.r.x,
                  st.r.y, st.r.z, st.v.x, st.v.y, st.v.z, kinetic_energy(st, s), pe);
    os << line;
  }
}

}  // namespace penning
