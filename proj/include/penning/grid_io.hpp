#pragma once

// Text grid format:
//   penning-grid v1
//   origin x y z
//   spacing h
//   dims nx ny nz
//   <nx*ny*nz potentials, x fastest>
//   <nx*ny*nz mask tokens: '.' free, label index otherwise>
// Doubles are written in shortest round-trip form, so write -> read is bit-exact.

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "penning/grid_solver.hpp"

namespace penning {

namespace detail {
inline void put_double(std::ostream& os, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  os.write(buf, res.ptr - buf);
}
inline double parse_double(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw ConfigError("grid file: bad number '" + tok + "'");
  return v;
}
inline void expect(std::istream& is, const std::string& word) {
  std::string tok;
  if (!(is >> tok) || tok != word) throw ConfigError("grid file: expected '" + word + "', got '" + tok + "'");
}
}  // namespace detail

inline void write_grid(std::ostream& os, const PotentialGrid& g) {
  os << "penning-grid v1\norigin ";
  detail::put_double(os, g.origin().x);
  os << ' ';
  detail::put_double(os, g.origin().y);
  os << ' ';
  detail::put_double(os, g.origin().z);
  os << "\nspacing ";
  detail::put_double(os, g.spacing());
  os << "\ndims " << g.nx() << ' ' << g.ny() << ' ' << g.nz() << '\n';
  const auto nx = static_cast<std::size_t>(g.nx());
  for (std::size_t n = 0; n < g.size(); ++n) {
    detail::put_double(os, g.values()[n]);
    os << ((n + 1) % nx == 0 ? '\n' : ' ');
  }
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (g.is_free(n))
      os << '.';
    else
      os << g.mask()[n];
    os << ((n + 1) % nx == 0 ? '\n' : ' ');
  }
}

inline PotentialGrid read_grid(std::istream& is) {
  std::string tok;
  detail::expect(is, "penning-grid");
  detail::expect(is, "v1");
  detail::expect(is, "origin");
  Vec3 o;
  std::string a, b, c;
  if (!(is >> a >> b >> c)) throw ConfigError("grid file: truncated origin");
  o = {detail::parse_double(a), detail::parse_double(b), detail::parse_double(c)};
  detail::expect(is, "spacing");
  if (!(is >> a)) throw ConfigError("grid file: truncated spacing");
  const double h = detail::parse_double(a);
  detail::expect(is, "dims");
  int nx = 0, ny = 0, nz = 0;
  if (!(is >> nx >> ny >> nz)) throw ConfigError("grid file: bad dims");
  PotentialGrid g(o, h, {nx, ny, nz});
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!(is >> tok)) throw ConfigError("grid file: truncated potentials");
    g.values()[n] = detail::parse_double(tok);
  }
  std::int32_t max_label = 0;
  std::vector<std::int32_t> mask(g.size(), PotentialGrid::kFree);
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!(is >> tok)) throw ConfigError("grid file: truncated mask");
    if (tok == ".") continue;
    const long idx = std::strtol(tok.c_str(), nullptr, 10);
    if (idx < 0 || std::to_string(idx) != tok) throw ConfigError("grid file: bad mask token '" + tok + "'");
    mask[n] = static_cast<std::int32_t>(idx);
    max_label = std::max<std::int32_t>(max_label, mask[n]);
  }
  std::vector<std::string> labels{"enclosure"};
  for (std::int32_t i = 1; i <= max_label; ++i) labels.push_back("electrode" + std::to_string(i));
  g.set_labels(std::move(labels));
  for (std::size_t n = 0; n < g.size(); ++n)
    if (mask[n] != PotentialGrid::kFree) g.fix(n, g.values()[n], mask[n]);
  return g;
}

inline void save_grid(const std::string& path, const PotentialGrid& g) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  write_grid(os, g);
}

inline PotentialGrid load_grid(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open grid file '" + path + "'");
  return read_grid(is);
}

}  // namespace penning
