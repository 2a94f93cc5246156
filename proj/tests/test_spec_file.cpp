#include <gtest/gtest.h>

#include <sstream>

#include "penning/spec_file.hpp"

using namespace penning;
using constants::mm;

namespace {

TrapConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_trap_spec(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(SpecFile, PadArrayKeys) {
  const TrapConfig c = parse(
      "# comment\n"
      "trap.kind = pad_array\n"
      "pad.diameter_mm = 3   # trailing comment\n"
      "pad.pitch_mm = 4\n"
      "pad.gamma = 0.85\n"
      "hole.diameter_mm = 0.8\n"
      "b_field_T = 2\n"
      "species.amu = 9\n"
      "species.charge = 1\n"
      "pad.sites = 0,0; 1,0\n");
  EXPECT_EQ(c.kind, TrapKind::pad_array);
  EXPECT_DOUBLE_EQ(c.pad.pad_diameter, 3 * mm);
  EXPECT_DOUBLE_EQ(c.pad.pad_pitch, 4 * mm);
  EXPECT_DOUBLE_EQ(c.pad.trap_center_spacing, std::numbers::sqrt3 * 4 * mm);
  EXPECT_DOUBLE_EQ(c.pad.gamma, 0.85);
  EXPECT_DOUBLE_EQ(c.pad.endcap_hole_diameter, 0.8 * mm);
  EXPECT_DOUBLE_EQ(c.b_field, 2.0);
  EXPECT_NEAR(c.species.mass(), 9 * constants::atomic_mass_unit, 1e-40);
  ASSERT_EQ(c.pad.trap_sites.size(), 2u);
  EXPECT_EQ(c.pad.trap_sites[1], (Site{1, 0}));
  EXPECT_EQ(c.voltages.at("top_cap_s0"), 10.0);
  EXPECT_EQ(c.voltages.at("bottom_ring_s0_p2"), -10.0);
}

TEST(SpecFile, Defaults) {
  const TrapConfig c = parse("trap.kind = six_wire\n");
  EXPECT_DOUBLE_EQ(c.b_field, 1.0);
  EXPECT_NEAR(c.species.mass(), calcium_ion().mass(), 1e-35);
  EXPECT_EQ(c.species.charge(), constants::elementary_charge);
  EXPECT_EQ(c.six_wire.delta_V, SixWireSpec{}.delta_V);
  EXPECT_FALSE(c.grid_based());
  const TrapConfig p = parse("trap.kind = two_plate\n");
  EXPECT_EQ(p.voltages.at("bottom"), 5.0);
  EXPECT_EQ(p.voltages.at("top"), -5.0);
  EXPECT_TRUE(p.grid_based());
}

TEST(SpecFile, UnknownKeysAreListed) {
  const std::string msg = error_of("trap.kind = pad_array\npad.colour = red\nfoo = 1\n");
  EXPECT_NE(msg.find("pad.colour"), std::string::npos) << msg;
  EXPECT_NE(msg.find("foo"), std::string::npos) << msg;
}

TEST(SpecFile, MalformedInput) {
  EXPECT_NE(error_of("pad.gamma = 1\n").find("trap.kind"), std::string::npos);
  EXPECT_NE(error_of("trap.kind = hexapole\n").find("hexapole"), std::string::npos);
  const std::string many = error_of("trap.kind = six_wire\njust words\ntrap.kind = six_wire\nx =\n");
  EXPECT_NE(many.find("line 2"), std::string::npos) << many;
  EXPECT_NE(many.find("duplicate key 'trap.kind'"), std::string::npos) << many;
  EXPECT_NE(many.find("line 4"), std::string::npos) << many;
  EXPECT_NE(error_of("trap.kind = pad_array\npad.gamma = wide\n"), "");
  EXPECT_NE(error_of("trap.kind = pad_array\npad.gamma = -1\n"), "");
  EXPECT_NE(error_of("trap.kind = pad_array\npad.diameter_mm = 6\n"), "");
  EXPECT_NE(error_of("trap.kind = six_wire\nvoltages.top = 1\n"), "");
  EXPECT_NE(error_of("trap.kind = two_plate\nvoltages.side = 1\n"), "");
  EXPECT_NE(error_of("trap.kind = six_wire\nspecies.charge = 1.5\n"), "");
  EXPECT_THROW(load_trap_spec("/nonexistent/trap.spec"), ConfigError);
}

TEST(SpecFile, Schedule) {
  const TrapConfig c = parse(
      "trap.kind = two_plate\n"
      "schedule.1.t_us = 2.5\n"
      "schedule.1.top_V = -3\n"
      "schedule.0.t_us = 0\n"
      "schedule.0.top_V = -5\n"
      "schedule.0.bottom_V = 5\n");
  ASSERT_EQ(c.schedule.segments.size(), 2u);
  EXPECT_EQ(c.schedule.segments[0].t_start, 0.0);
  EXPECT_DOUBLE_EQ(c.schedule.segments[1].t_start, 2.5e-6);
  EXPECT_EQ(c.schedule.segments[0].assignment.at("bottom"), 5.0);
  EXPECT_EQ(c.schedule.segments[1].assignment.at("top"), -3.0);
  EXPECT_NE(error_of("trap.kind = two_plate\nschedule.0.top_V = 1\n").find("t_us"), std::string::npos);
  EXPECT_NE(error_of("trap.kind = two_plate\nschedule.0.t_us = 1\nschedule.1.t_us = 1\n"), "");
  EXPECT_NE(error_of("trap.kind = two_plate\nschedule.0.t_us = 0\nschedule.0.lid_V = 1\n"), "");
}

TEST(SpecFile, WireKeys) {
  const TrapConfig t = parse("trap.kind = two_wire\nwire.a_mm = 0.25\nwire.v_plus_V = 3\n");
  EXPECT_DOUBLE_EQ(t.two_wire.a, 0.25 * mm);
  EXPECT_EQ(t.two_wire.v_plus, 3.0);
  const TrapConfig s = parse("trap.kind = six_wire\nwire.d_mm = 4\nwire.delta_V = -1\n");
  EXPECT_DOUBLE_EQ(s.six_wire.d, 4 * mm);
  EXPECT_EQ(s.six_wire.delta_V, -1.0);
  EXPECT_NE(error_of("trap.kind = two_wire\nwire.d_mm = 4\n").find("wire.d_mm"), std::string::npos);
}

TEST(SpecFile, StartAndGrid) {
  const TrapConfig c = parse("trap.kind = ring_transport\nstart.y_mm = 4\ngrid.h_mm = 0.3\ngrid.tol_V = 1e-7\n");
  ASSERT_TRUE(c.start.has_value());
  EXPECT_DOUBLE_EQ(c.start->y, 4 * mm);
  EXPECT_DOUBLE_EQ(c.grid.h, 0.3 * mm);
  EXPECT_EQ(c.grid.solve.tol, 1e-7);
  EXPECT_EQ(default_start(c, UniformField{}), *c.start);
}

TEST(SpecFile, DomainsAreCentred) {
  const TrapConfig c = parse("trap.kind = two_plate\ngrid.h_mm = 0.5\n");
  const Box d = domain_of(c);
  EXPECT_NEAR(d.lo.x, -d.hi.x, 1e-12);
  EXPECT_NEAR(0.5 * (d.lo.z + d.hi.z), 2.5 * mm, 1e-12);
  const Box bounds = bounds_of(electrodes_of(c));
  EXPECT_GE(d.hi.z - bounds.hi.z, 8 * mm - 1e-12);
}

TEST(SpecFile, AxialMinimumOfQuadratic) {
  const QuadrupoleField q{0.0, -1e5, {0, 0, 1.23 * mm}};
  EXPECT_NEAR(axial_minimum(q, 0, 0, 0, 3 * mm, 0.1 * mm).z, 1.23 * mm, 1e-12);
  EXPECT_THROW(axial_minimum(q, 0, 0, 2 * mm, 3 * mm, 0.1 * mm), NotFound);
}
