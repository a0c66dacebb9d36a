#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "nvsim/resonator.hpp"

using namespace nvsim;

namespace {

RLCDesign target_design() {
  // 1 nH loop resonated at 2.87 GHz, R chosen for a 270 MHz bandwidth.
  RLCDesign d;
  d.inductance_h = 1e-9;
  d.capacitance_f = capacitance_for(2.87e9, 1e-9);
  const double q = 2.87e9 / 270e6;
  d.series_resistance_ohm = std::sqrt(d.inductance_h / d.capacitance_f) / q;
  return d;
}

} // namespace

TEST_CASE("resonant frequency round-trips through the solved capacitance") {
  RLCDesign d = target_design();
  CHECK_THAT(d.capacitance_f, Catch::Matchers::WithinRel(3.075e-12, 1e-3));
  CHECK_THAT(resonant_frequency(d), Catch::Matchers::WithinRel(2.87e9, 1e-12));

  d.inductance_h *= 4.0;  // f0 ~ 1/sqrt(L)
  CHECK_THAT(resonant_frequency(d), Catch::Matchers::WithinRel(2.87e9 / 2.0, 1e-12));

  RLCDesign unit;
  unit.inductance_h = 1.0;
  unit.capacitance_f = 1.0;
  CHECK_THAT(resonant_frequency(unit), Catch::Matchers::WithinRel(1.0 / (2.0 * M_PI), 1e-15));

  RLCDesign bad;
  CHECK_THROWS_AS(resonant_frequency(bad), std::invalid_argument);
  CHECK_THROWS_AS(capacitance_for(0.0, 1e-9), std::invalid_argument);
}

TEST_CASE("bandwidth and Q follow the series-loss model") {
  const RLCDesign d = target_design();
  const BandwidthQ bq = bandwidth_and_q(d);
  CHECK_FALSE(bq.infinite_q);
  CHECK_THAT(bq.q, Catch::Matchers::WithinRel(10.63, 1e-3));
  CHECK_THAT(d.series_resistance_ohm, Catch::Matchers::WithinRel(1.696, 1e-3));
  CHECK_THAT(bq.bandwidth_hz, Catch::Matchers::WithinRel(270e6, 1e-12));
  // Definition identity, as computed.
  CHECK_THAT(bq.bandwidth_hz * bq.q, Catch::Matchers::WithinRel(resonant_frequency(d), 1e-12));

  RLCDesign twice_r = d;
  twice_r.series_resistance_ohm *= 2.0;
  CHECK_THAT(bandwidth_and_q(twice_r).q, Catch::Matchers::WithinRel(bq.q / 2.0, 1e-12));

  RLCDesign lossless = d;
  lossless.series_resistance_ohm = 0.0;
  const BandwidthQ inf = bandwidth_and_q(lossless);
  CHECK(inf.infinite_q);
  CHECK(std::isinf(inf.q));
  CHECK(inf.bandwidth_hz == 0.0);
  CHECK_THROWS_AS(loop_current(lossless), std::invalid_argument);
}

TEST_CASE("quarter-wave matching takes the geometric mean") {
  CHECK(quarter_wave_match(100.0, 650.0) == std::sqrt(65000.0));
  CHECK_THAT(quarter_wave_match(100.0, 650.0),
             Catch::Matchers::WithinAbs(254.95097567963924, 1e-9));
  CHECK_THAT(quarter_wave_match(50.0, 100.0), Catch::Matchers::WithinAbs(70.71, 5e-3));
  CHECK(quarter_wave_match(75.0, 75.0) == 75.0);
  CHECK(quarter_wave_match(100.0, 650.0) == quarter_wave_match(650.0, 100.0));
  CHECK_THROWS_AS(quarter_wave_match(0.0, 50.0), std::invalid_argument);
}

TEST_CASE("loop field matches the textbook values") {
  const double radius = 1e-3;
  const WireGeometry loop =
      circular_loop(radius, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ());

  const std::vector<Eigen::Vector3d> probes = {Eigen::Vector3d::Zero(),
                                               {0.0, 0.0, radius}};
  const FieldMap map = loop_field_map(loop, 1.0, probes);
  REQUIRE(map.singular.size() == 2);
  CHECK(map.singular[0] == 0);

  const double center_oracle = 1.25663706212e-6 * 1.0 / (2.0 * radius);
  CHECK_THAT(map.b_t[0].z(), Catch::Matchers::WithinRel(center_oracle, 1e-3));
  CHECK_THAT(map.b_t[0].x(), Catch::Matchers::WithinAbs(0.0, 1e-9 * center_oracle));

  const double axis_oracle = center_oracle * std::pow(2.0, -1.5);
  CHECK_THAT(map.b_t[1].z(), Catch::Matchers::WithinRel(axis_oracle, 1e-3));

  // Reversed current negates the field exactly.
  const FieldMap reversed = loop_field_map(loop, -1.0, probes);
  CHECK(reversed.b_t[0] == -map.b_t[0]);
  CHECK(reversed.b_t[1] == -map.b_t[1]);

  // A probe on the wire is flagged singular, not evaluated.
  const FieldMap on_wire = loop_field_map(loop, 1.0, {{radius, 0.0, 0.0}});
  CHECK(on_wire.singular[0] == 1);
  CHECK(on_wire.b_t[0] == Eigen::Vector3d::Zero());
}

TEST_CASE("biot-savart midpoint rule converges at second order") {
  const double radius = 1e-3;
  const std::vector<Eigen::Vector3d> probes = {{0.3e-3, 0.1e-3, 0.2e-3},
                                               {0.0, 0.0, 0.5e-3}};
  // Reference: far more segments than either test resolution.
  const FieldMap ref = loop_field_map(
      circular_loop(radius, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 400'000), 1.0,
      probes);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    CAPTURE(i);
    const FieldMap coarse = loop_field_map(
        circular_loop(radius, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 1000), 1.0,
        probes);
    const FieldMap fine = loop_field_map(
        circular_loop(radius, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 10'000), 1.0,
        probes);
    const double err_coarse = (coarse.b_t[i] - ref.b_t[i]).norm();
    const double err_fine = (fine.b_t[i] - ref.b_t[i]).norm();
    REQUIRE(err_fine > 0.0);
    const double order = std::log10(err_coarse / err_fine);
    CHECK(order >= 1.8);
  }
}

TEST_CASE("fields of separate loops superpose") {
  const WireGeometry a =
      circular_loop(1e-3, {0.0, 0.0, -0.5e-3}, Eigen::Vector3d::UnitZ(), 2000);
  const WireGeometry b =
      circular_loop(1e-3, {0.0, 0.0, 0.5e-3}, Eigen::Vector3d::UnitZ(), 2000);
  const auto grid = planar_grid(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX(),
                                Eigen::Vector3d::UnitY(), 0.3e-3, 5);

  const FieldMap pair = loop_field_map(std::vector<WireGeometry>{a, b}, 1.0, grid);
  const FieldMap only_a = loop_field_map(a, 1.0, grid);
  const FieldMap only_b = loop_field_map(b, 1.0, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CAPTURE(i);
    const Eigen::Vector3d sum = only_a.b_t[i] + only_b.b_t[i];
    CHECK((pair.b_t[i] - sum).norm() <= 1e-15 * sum.norm());
  }
  CHECK(pair.geometry_id == "loop+loop");
}

TEST_CASE("field metrics report uniformity and efficiency") {
  const double radius = 1e-3;
  const WireGeometry loop =
      circular_loop(radius, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 4000);
  // Central square of side 0.2 radius in the loop plane.
  const auto grid = planar_grid(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX(),
                                Eigen::Vector3d::UnitY(), 0.1 * radius, 11);
  std::vector<std::size_t> all(grid.size());
  std::iota(all.begin(), all.end(), 0);

  const RLCDesign d = target_design();
  const FieldMap map = loop_field_map(loop, loop_current(d), grid);
  const FieldMetrics metrics = field_metrics(map, all, d.drive_power_w);
  CHECK(metrics.uniformity_pct < 10.0);
  CHECK(metrics.uniformity_pct > 0.0);
  CHECK(metrics.mean_b_t > 0.0);
  CHECK_THAT(metrics.gauss_per_sqrt_watt,
             Catch::Matchers::WithinRel(metrics.mean_b_t * 1e4 / std::sqrt(d.drive_power_w),
                                        1e-12));

  // Doubling power: mean field scales by sqrt(2), efficiency unchanged.
  RLCDesign louder = d;
  louder.drive_power_w *= 2.0;
  const FieldMap map2 = loop_field_map(loop, loop_current(louder), grid);
  const FieldMetrics metrics2 = field_metrics(map2, all, louder.drive_power_w);
  CHECK_THAT(metrics2.mean_b_t,
             Catch::Matchers::WithinRel(metrics.mean_b_t * std::sqrt(2.0), 1e-12));
  CHECK_THAT(metrics2.gauss_per_sqrt_watt,
             Catch::Matchers::WithinRel(metrics.gauss_per_sqrt_watt, 1e-12));

  // A uniform synthetic map has exactly zero spread.
  FieldMap uniform;
  uniform.points = grid;
  uniform.b_t.assign(grid.size(), Eigen::Vector3d(0.0, 0.0, 1e-4));
  uniform.singular.assign(grid.size(), 0);
  CHECK(field_metrics(uniform, all).uniformity_pct == 0.0);

  CHECK_THROWS_AS(field_metrics(map, {}), std::invalid_argument);
  CHECK_THROWS_AS(field_metrics(map, {grid.size()}), std::invalid_argument);
}

TEST_CASE("field maps export as csv and metrics as json") {
  const WireGeometry loop =
      circular_loop(1e-3, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 500);
  const FieldMap map = loop_field_map(loop, 1.0, {{0.0, 0.0, 0.0}, {1e-3, 0.0, 0.0}});
  const std::string csv = field_map_csv(map);

  std::istringstream lines(csv);
  std::string header, row0, row1, extra;
  REQUIRE(std::getline(lines, header));
  CHECK(header == "x_m,y_m,z_m,bx_t,by_t,bz_t,singular");
  REQUIRE(std::getline(lines, row0));
  REQUIRE(std::getline(lines, row1));
  CHECK_FALSE(std::getline(lines, extra));
  CHECK(row0.back() == '0');
  CHECK(row1.back() == '1');  // the on-wire probe

  // Numeric round trip at full precision.
  double vals[7];
  REQUIRE(std::sscanf(row0.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf", &vals[0], &vals[1], &vals[2],
                      &vals[3], &vals[4], &vals[5], &vals[6]) == 7);
  CHECK(vals[5] == map.b_t[0].z());

  std::vector<std::size_t> region = {0};
  const nlohmann::json j = field_metrics_json(field_metrics(map, region, 1.0));
  CHECK(j["mean_b_t"].get<double>() == map.b_t[0].norm());
  CHECK(j["uniformity_pct"].get<double>() == 0.0);
  CHECK(j["gauss_per_sqrt_watt"].get<double>() > 0.0);
}

TEST_CASE("wire geometry parses from json") {
  const nlohmann::json loop_spec = {{"type", "loop"},
                                    {"radius_m", 1e-3},
                                    {"center", {0.0, 0.0, 1e-3}},
                                    {"normal", {0.0, 0.0, 1.0}},
                                    {"segments", 1200},
                                    {"wire_radius_m", 5e-5}};
  const WireGeometry loop = wire_geometry_from_json(loop_spec);
  CHECK(loop.closed);
  CHECK(loop.points.size() == 1200);
  CHECK(loop.wire_radius_m == 5e-5);
  CHECK_THAT(loop.points.front().z(), Catch::Matchers::WithinRel(1e-3, 1e-12));
  CHECK_THAT((loop.points.front() - Eigen::Vector3d(0.0, 0.0, 1e-3)).norm(),
             Catch::Matchers::WithinRel(1e-3, 1e-12));

  const nlohmann::json poly_spec = {
      {"type", "polyline"},
      {"points", {{0.0, 0.0, 0.0}, {1e-3, 0.0, 0.0}, {1e-3, 1e-3, 0.0}}},
      {"closed", false}};
  const WireGeometry poly = wire_geometry_from_json(poly_spec);
  CHECK_FALSE(poly.closed);
  CHECK(poly.points.size() == 3);

  CHECK_THROWS_AS(wire_geometry_from_json({{"type", "spiral"}}), std::invalid_argument);
  CHECK_THROWS_AS(
      wire_geometry_from_json({{"type", "polyline"}, {"points", {{0.0, 0.0, 0.0}}}}),
      std::invalid_argument);
}
