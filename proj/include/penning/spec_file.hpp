#pragma once

// Flat `key = value` trap specification files and the fields they describe.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "penning/analytic_fields.hpp"
#include "penning/dynamics.hpp"
#include "penning/grid_solver.hpp"
#include "penning/trap_protocols.hpp"

namespace penning {

enum class TrapKind { six_wire, two_wire, two_plate, ring_transport, pad_array };

struct TwoPlateSpec {
  double z0 = 5 * constants::mm;
  double R = 15 * constants::mm;
  double r = 5 * constants::mm;
  double thickness = 0.5 * constants::mm;
};

struct TrapConfig {
  TrapKind kind = TrapKind::six_wire;
  Species species = calcium_ion();
  double b_field = 1.0;
  SixWireSpec six_wire;
  TwoWireSpec two_wire;
  TwoPlateSpec two_plate;
  RingTransportSpec ring;
  PadArraySpec pad;
  PadGridOptions grid;
  Assignment voltages;
  VoltageSchedule schedule;
  std::optional<Vec3> start;

  bool grid_based() const { return kind != TrapKind::six_wire && kind != TrapKind::two_wire; }
};

inline const char* to_string(TrapKind k) {
  switch (k) {
    case TrapKind::six_wire: return "six_wire";
    case TrapKind::two_wire: return "two_wire";
    case TrapKind::two_plate: return "two_plate";
    case TrapKind::ring_transport: return "ring_transport";
    case TrapKind::pad_array: return "pad_array";
  }
  return "?";
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

inline double parse_number(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v))
    throw ConfigError("'" + key + "' expects a number, got '" + text + "'");
  return v;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text, char sep = ',') {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, sep);) out.push_back(parse_number(key, trim(item)));
  return out;
}

inline int parse_int(const std::string& key, const std::string& text) {
  int v = 0;
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError("'" + key + "' expects an integer, got '" + text + "'");
  return v;
}

}  // namespace detail

/// Parsed sites "i,j; i,j; ...".
inline std::vector<Site> parse_sites(const std::string& key, const std::string& text) {
  std::vector<Site> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ';');) {
    const auto ij = detail::parse_list(key, detail::trim(item));
    if (ij.size() != 2 || ij[0] != std::floor(ij[0]) || ij[1] != std::floor(ij[1]))
      throw ConfigError("'" + key + "' expects integer pairs 'i,j' separated by ';'");
    out.push_back({static_cast<int>(ij[0]), static_cast<int>(ij[1])});
  }
  if (out.empty()) throw ConfigError("'" + key + "' lists no sites");
  return out;
}

inline ElectrodeList electrodes_of(const TrapConfig& cfg) {
  switch (cfg.kind) {
    case TrapKind::two_plate:
      return build_two_plate(cfg.two_plate.z0, cfg.two_plate.R, cfg.two_plate.r, 0.0, 0.0, cfg.two_plate.thickness);
    case TrapKind::ring_transport: return build_ring_transport(cfg.ring);
    case TrapKind::pad_array: return build_pad_array(cfg.pad).electrodes;
    default: throw ConfigError(std::string("trap kind '") + to_string(cfg.kind) + "' has no electrode geometry");
  }
}

/// Parses a trap specification. Every problem with the keys is collected and
/// reported in a single ConfigError.
inline TrapConfig parse_trap_spec(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::vector<std::string> problems;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      problems.push_back("line " + std::to_string(line_no) + ": empty key or value");
      continue;
    }
    if (!kv.emplace(key, value).second) problems.push_back("duplicate key '" + key + "'");
  }
  if (!problems.empty()) {
    std::string msg = "invalid trap specification:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }

  TrapConfig cfg;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto number = [&](const std::string& key, double& dst, double scale = 1.0) {
    if (auto v = take(key)) dst = detail::parse_number(key, *v) * scale;
  };

  if (auto k = take("trap.kind")) {
    static const std::map<std::string, TrapKind> kinds{{"six_wire", TrapKind::six_wire},
                                                       {"two_wire", TrapKind::two_wire},
                                                       {"two_plate", TrapKind::two_plate},
                                                       {"ring_transport", TrapKind::ring_transport},
                                                       {"pad_array", TrapKind::pad_array}};
    auto it = kinds.find(*k);
    if (it == kinds.end()) throw ConfigError("unknown trap.kind '" + *k + "'");
    cfg.kind = it->second;
  } else {
    throw ConfigError("missing required key 'trap.kind'");
  }

  using constants::mm;
  double amu = 40.0, charge = 1.0;
  number("species.amu", amu);
  number("species.charge", charge);
  if (charge != std::floor(charge)) throw ConfigError("'species.charge' must be an integer multiple of e");
  try {
    cfg.species = species_from_amu(amu, static_cast<int>(charge));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  number("b_field_T", cfg.b_field);

  if (cfg.kind == TrapKind::two_wire) {
    number("wire.a_mm", cfg.two_wire.a, mm);
    number("wire.z0_mm", cfg.two_wire.z0, mm);
    number("wire.R_mm", cfg.two_wire.R, mm);
    number("wire.v_plus_V", cfg.two_wire.v_plus);
  } else if (cfg.kind == TrapKind::six_wire) {
    number("wire.d_mm", cfg.six_wire.d, mm);
    number("wire.a_mm", cfg.six_wire.a, mm);
    number("wire.z0_mm", cfg.six_wire.z0, mm);
    number("wire.R_mm", cfg.six_wire.R, mm);
    number("wire.delta_V", cfg.six_wire.delta_V);
  }

  number("plate.z0_mm", cfg.two_plate.z0, mm);
  number("plate.R_mm", cfg.two_plate.R, mm);
  number("plate.r_mm", cfg.two_plate.r, mm);
  number("plate.thickness_mm", cfg.two_plate.thickness, mm);

  if (auto v = take("ring.radii_mm")) {
    const auto r = detail::parse_list("ring.radii_mm", *v);
    if (r.size() != 3) throw ConfigError("'ring.radii_mm' expects three radii");
    for (int k = 0; k < 3; ++k) cfg.ring.ring_radii[k] = r[k] * mm;
  }
  number("ring.wire_radius_mm", cfg.ring.wire_radius, mm);
  number("ring.z_gap_mm", cfg.ring.z_gap, mm);

  number("pad.diameter_mm", cfg.pad.pad_diameter, mm);
  const bool pitch_given = kv.count("pad.pitch_mm") > 0;
  number("pad.pitch_mm", cfg.pad.pad_pitch, mm);
  number("pad.gamma", cfg.pad.gamma);
  number("pad.thickness_mm", cfg.pad.pad_thickness, mm);
  number("hole.diameter_mm", cfg.pad.endcap_hole_diameter, mm);
  if (pitch_given) cfg.pad.trap_center_spacing = std::numbers::sqrt3 * cfg.pad.pad_pitch;
  number("pad.spacing_mm", cfg.pad.trap_center_spacing, mm);
  if (auto v = take("pad.sites")) cfg.pad.trap_sites = parse_sites("pad.sites", *v);

  if (cfg.kind == TrapKind::two_plate) cfg.grid.margin = 8 * mm;
  number("grid.h_mm", cfg.grid.h, mm);
  number("grid.margin_mm", cfg.grid.margin, mm);
  number("grid.tol_V", cfg.grid.solve.tol);

  if (kv.count("start.x_mm") || kv.count("start.y_mm") || kv.count("start.z_mm")) {
    Vec3 s;
    number("start.x_mm", s.x, mm);
    number("start.y_mm", s.y, mm);
    number("start.z_mm", s.z, mm);
    cfg.start = s;
  }

  // voltages.<label> and schedule.<n>.t_us / schedule.<n>.<label>_V
  std::map<int, ScheduleSegment> segments;
  std::set<int> timed;
  for (auto it = kv.begin(); it != kv.end();) {
    const std::string& key = it->first;
    if (key.starts_with("voltages.") && key.size() > 9) {
      cfg.voltages[key.substr(9)] = detail::parse_number(key, it->second);
      it = kv.erase(it);
      continue;
    }
    if (key.starts_with("schedule.")) {
      const auto dot = key.find('.', 9);
      if (dot != std::string::npos && dot > 9) {
        const std::string idx = key.substr(9, dot - 9), field = key.substr(dot + 1);
        if (std::all_of(idx.begin(), idx.end(), ::isdigit)) {
          const int n = detail::parse_int(key, idx);
          if (field == "t_us") {
            segments[n].t_start = detail::parse_number(key, it->second) * constants::us;
            timed.insert(n);
            it = kv.erase(it);
            continue;
          }
          if (field.size() > 2 && field.ends_with("_V")) {
            segments[n].assignment[field.substr(0, field.size() - 2)] = detail::parse_number(key, it->second);
            it = kv.erase(it);
            continue;
          }
        }
      }
    }
    ++it;
  }

  if (!kv.empty()) {
    std::string msg = "unknown keys in trap specification:";
    for (const auto& [k, v] : kv) msg += " " + k;
    throw ConfigError(msg);
  }

  for (const auto& [n, seg] : segments) {
    if (!timed.count(n)) throw ConfigError("schedule segment " + std::to_string(n) + " has no t_us");
    cfg.schedule.segments.push_back(seg);
  }

  try {
    if (!(cfg.b_field >= 0.0)) throw InvalidArgument("b_field_T must be non-negative");
    switch (cfg.kind) {
      case TrapKind::six_wire: cfg.six_wire.validate(); break;
      case TrapKind::two_wire: cfg.two_wire.validate(); break;
      default: break;
    }
    if (cfg.grid_based()) {
      if (!(cfg.grid.h > 0.0 && cfg.grid.margin > 0.0)) throw InvalidArgument("grid spacing and margin must be positive");
      const ElectrodeList el = electrodes_of(cfg);
      if (cfg.voltages.empty()) {
        if (cfg.kind == TrapKind::two_plate) cfg.voltages = {{"bottom", 5.0}, {"top", -5.0}};
        if (cfg.kind == TrapKind::ring_transport) cfg.voltages = ring_trap_assignment();
        if (cfg.kind == TrapKind::pad_array)
          cfg.voltages = trapping_assignment(build_pad_array(cfg.pad), cfg.pad.trap_sites.front()).voltages;
      }
      apply_assignment(el, cfg.voltages);
      if (!cfg.schedule.segments.empty()) cfg.schedule.validate(el);
    } else if (!cfg.voltages.empty() || !cfg.schedule.segments.empty()) {
      throw InvalidArgument(std::string("trap kind '") + to_string(cfg.kind) +
                            "' takes its voltages from wire.* keys, not voltages.* or schedule.*");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline TrapConfig load_trap_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trap specification '" + path + "'");
  return parse_trap_spec(in);
}

/// Grid domain used for a grid-based configuration.
inline Box domain_of(const TrapConfig& cfg) {
  const ElectrodeList el = electrodes_of(cfg);
  switch (cfg.kind) {
    case TrapKind::pad_array: return pad_domain(build_pad_array(cfg.pad), cfg.grid.margin, cfg.grid.h);
    case TrapKind::two_plate: return centered_domain(bounds_of(el), cfg.grid.margin, cfg.grid.h, {0, 0, 0.5 * cfg.two_plate.z0});
    default: return centered_domain(bounds_of(el), cfg.grid.margin, cfg.grid.h, {});
  }
}

inline PotentialGrid solve_static(const TrapConfig& cfg) {
  return solve_laplace(rasterize(apply_assignment(electrodes_of(cfg), cfg.voltages), domain_of(cfg), cfg.grid.h),
                       cfg.grid.solve)
      .grid;
}

/// Field of the static configuration.
inline AnyField static_field(const TrapConfig& cfg) {
  switch (cfg.kind) {
    case TrapKind::six_wire: return AnyField(make_six_wire(cfg.six_wire));
    case TrapKind::two_wire: return AnyField(make_two_wire(cfg.two_wire));
    default: return AnyField(GridField(solve_static(cfg)));
  }
}

/// Lowest local minimum of the potential on the vertical line through (x, y)
/// between z_lo and z_hi; throws NotFound when there is none.
template <FieldSource F>
Vec3 axial_minimum(const F& field, double x, double y, double z_lo, double z_hi, double step) {
  std::vector<std::pair<double, double>> table;
  for (double z = z_lo; z <= z_hi + 1e-12; z += step) table.push_back({z, field.potential({x, y, z})});
  int best = -1;
  for (std::size_t k = 1; k + 1 < table.size(); ++k)
    if (table[k].second < table[k - 1].second && table[k].second <= table[k + 1].second &&
        (best < 0 || table[k].second < table[best].second))
      best = static_cast<int>(k);
  if (best < 0) throw NotFound("no axial potential minimum on the scanned line", std::move(table));
  const double a = table[best - 1].second, b = table[best].second, c = table[best + 1].second;
  const double den = a - 2.0 * b + c;
  return {x, y, table[best].first + (den > 0.0 ? 0.5 * (a - c) / den : 0.0) * step};
}

/// Default launch point: the trap centre, or the axial minimum above the
/// upper plate for the two-plate trap.
template <FieldSource F>
Vec3 default_start(const TrapConfig& cfg, const F& field) {
  if (cfg.start) return *cfg.start;
  switch (cfg.kind) {
    case TrapKind::two_plate: {
      const double top = cfg.two_plate.z0 + cfg.two_plate.thickness;
      const Box d = domain_of(cfg);
      return axial_minimum(field, 0.0, 0.0, top + cfg.grid.h, d.hi.z - 5.0 * cfg.grid.h, cfg.grid.h);
    }
    case TrapKind::ring_transport: return {0.0, cfg.ring.ring_radii[1], 0.0};
    case TrapKind::pad_array: return cfg.pad.site_center(cfg.pad.trap_sites.front());
    default: return {};
  }
}

}  // namespace penning
