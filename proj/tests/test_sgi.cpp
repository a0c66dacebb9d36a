#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nvsim/sgi.hpp"

using namespace nvsim;

TEST_CASE("nanodiamond mass and size from the atom count") {
  const NDSpec nd = nd_from_atoms(1e7);
  // Independent arithmetic from the same constants.
  const double mass = 1e7 * 12.0 * 1.66054e-27;
  CHECK(nd.mass_kg == mass);
  CHECK_THAT(nd.mass_kg, Catch::Matchers::WithinRel(1.99e-19, 2e-3));
  CHECK_THAT(nd.cube_edge_m, Catch::Matchers::WithinRel(std::cbrt(mass / 3510.0), 1e-14));
  CHECK_THAT(nd.cube_edge_m, Catch::Matchers::WithinRel(38.4e-9, 0.01));
  CHECK(nd.sphere_diameter_m > nd.cube_edge_m);  // sphere of equal volume is wider
  CHECK_THAT(nd.sphere_diameter_m,
             Catch::Matchers::WithinRel(std::cbrt(6.0 * mass / 3510.0 / M_PI), 1e-14));

  CHECK(nd_from_atoms(1).mass_kg == 12.0 * 1.66054e-27);
  CHECK_THAT(nd_from_atoms(1e11).mass_kg, Catch::Matchers::WithinRel(1.99e-15, 2e-3));
  CHECK_THROWS_AS(nd_from_atoms(0), std::invalid_argument);
  CHECK_THROWS_AS(nd_from_atoms(-5), std::invalid_argument);
}

TEST_CASE("spin acceleration follows the magnetic force law") {
  const NDSpec nd = nd_from_atoms(1e7);
  CHECK(spin_acceleration(nd, 1e5, 0) == 0.0);

  const double oracle = 2.0028 * 9.2740100783e-24 * 1e5 / (1e7 * 12.0 * 1.66054e-27);
  CHECK_THAT(spin_acceleration(nd, 1e5, 1), Catch::Matchers::WithinRel(oracle, 1e-14));
  CHECK_THAT(oracle, Catch::Matchers::WithinRel(9.3, 0.01));

  CHECK(spin_acceleration(nd, 2e5, 1) == 2.0 * spin_acceleration(nd, 1e5, 1));
  CHECK(spin_acceleration(nd, 1e5, -1) == -spin_acceleration(nd, 1e5, 1));
  CHECK_THROWS_AS(spin_acceleration(nd, 1e5, 2), std::invalid_argument);
}

TEST_CASE("gradient profiles are validated") {
  GradientProfile empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

  GradientProfile bad_duration;
  bad_duration.segments = {{0.0, 1e5}};
  CHECK_THROWS_AS(bad_duration.validate(), std::invalid_argument);

  GradientProfile too_strong;
  too_strong.segments = {{1e-5, 2e6}};
  CHECK_THROWS_AS(too_strong.validate(), std::invalid_argument);
  too_strong.max_gradient_t_per_m = 5e6;
  CHECK_NOTHROW(too_strong.validate());

  const GradientProfile p = symmetric_profile(1e5, 40e-6);
  REQUIRE(p.segments.size() == 4);
  CHECK(p.total_duration() == 40e-6);
  CHECK(p.segments[0].gradient_t_per_m == 1e5);
  CHECK(p.segments[1].gradient_t_per_m == -1e5);
  CHECK(p.segments[2].gradient_t_per_m == -1e5);
  CHECK(p.segments[3].gradient_t_per_m == 1e5);
  CHECK_THROWS_AS(symmetric_profile(1e5, 0.0), std::invalid_argument);
}

TEST_CASE("headline splitting of the default interferometer") {
  const NDSpec nd = nd_from_atoms(1e7);
  const GradientProfile profile = symmetric_profile(1e5, 40e-6);
  const SGIResult res = simulate_interferometer(nd, profile, {0, 1});

  // Closed-form oracle: the idle arm stays put, the driven arm reaches its
  // apex a (T/4)^2 / 2 + (a T/4)(T/4) - a (T/4)^2 / 2 ... = a T^2 / 16 at
  // the loop midpoint.
  const double a = spin_acceleration(nd, 1e5, 1);
  const double oracle = a * 40e-6 * 40e-6 / 16.0;
  CHECK_THAT(res.max_splitting_m, Catch::Matchers::WithinRel(oracle, 1e-13));
  CHECK_THAT(res.max_splitting_m, Catch::Matchers::WithinRel(0.93e-9, 0.01));

  CHECK(res.dz_final_m == 0.0);
  CHECK(res.dv_final_m_per_s == 0.0);
  CHECK(res.contrast == 1.0);

  // Opposite spin arms double the splitting exactly and still close.
  const SGIResult both = simulate_interferometer(nd, profile, {1, -1});
  CHECK(both.max_splitting_m == 2.0 * res.max_splitting_m);
  CHECK(both.dz_final_m == 0.0);
  CHECK(both.dv_final_m_per_s == 0.0);

  // Zero gradient: nothing moves.
  const SGIResult idle = simulate_interferometer(nd, symmetric_profile(0.0, 40e-6), {0, 1});
  CHECK(idle.max_splitting_m == 0.0);
  CHECK(idle.dz_final_m == 0.0);
}

TEST_CASE("symmetric loops close exactly across a parameter grid") {
  for (double n_atoms : {1e5, 1e7, 3.7e8, 1e11}) {
    for (double gradient : {1e3, 7.3e4, 1e5, 9.9e5}) {
      for (double total : {7e-6, 20e-6, 41e-6, 80e-6}) {
        CAPTURE(n_atoms, gradient, total);
        const NDSpec nd = nd_from_atoms(n_atoms);
        const SGIResult res =
            simulate_interferometer(nd, symmetric_profile(gradient, total), {0, 1});
        const double vmax = std::abs(spin_acceleration(nd, gradient, 1)) * total / 4.0;
        CHECK(std::abs(res.dz_final_m) < 1e-15 * std::max(res.max_splitting_m, 1e-300));
        CHECK(std::abs(res.dv_final_m_per_s) < 1e-15 * std::max(vmax, 1e-300));
      }
    }
  }

  // Back-to-back double loop (eight segments) also closes.
  const NDSpec nd = nd_from_atoms(1e7);
  GradientProfile twice = symmetric_profile(1e5, 40e-6);
  const GradientProfile single = twice;
  twice.segments.insert(twice.segments.end(), single.segments.begin(), single.segments.end());
  const SGIResult res = simulate_interferometer(nd, twice, {0, 1});
  CHECK(res.dz_final_m == 0.0);
  CHECK(res.dv_final_m_per_s == 0.0);
}

TEST_CASE("splitting scales with gradient, duration squared and inverse mass") {
  const NDSpec nd = nd_from_atoms(1e7);
  const auto split = [](const NDSpec& spec, double g, double total) {
    return simulate_interferometer(spec, symmetric_profile(g, total), {0, 1}).max_splitting_m;
  };

  const double base = split(nd, 1e5, 40e-6);
  CHECK_THAT(split(nd, 3e5, 40e-6), Catch::Matchers::WithinRel(3.0 * base, 1e-12));
  CHECK_THAT(split(nd, 1e5, 80e-6), Catch::Matchers::WithinRel(4.0 * base, 1e-12));
  CHECK_THAT(split(nd, 1e5, 120e-6), Catch::Matchers::WithinRel(9.0 * base, 1e-12));

  const NDSpec heavy = nd_from_atoms(5e7);
  CHECK_THAT(split(heavy, 1e5, 40e-6), Catch::Matchers::WithinRel(base / 5.0, 1e-12));
}

TEST_CASE("headline parameters always land at nanometer-order splitting") {
  const NDSpec nd = nd_from_atoms(1e7);
  for (double total : {20e-6, 40e-6, 60e-6, 80e-6}) {
    for (auto arms : {std::pair<int, int>{0, 1}, std::pair<int, int>{1, -1}}) {
      CAPTURE(total, arms.first, arms.second);
      const double s =
          simulate_interferometer(nd, symmetric_profile(1e5, total), arms).max_splitting_m;
      CHECK(s >= 0.1e-9);
      CHECK(s <= 10e-9);
    }
  }
}

TEST_CASE("trajectories are continuous and consistent with sampling") {
  const NDSpec nd = nd_from_atoms(1e7);
  const SGIResult res = simulate_interferometer(nd, symmetric_profile(1e5, 40e-6), {1, -1});

  for (const ArmTrajectory* arm : {&res.arm_a, &res.arm_b}) {
    for (std::size_t k = 1; k < arm->segments.size(); ++k) {
      const QuadSegment& prev = arm->segments[k - 1];
      const QuadSegment& next = arm->segments[k];
      const double z_end = prev.z0_m + (prev.v0_m_per_s * prev.duration_s) +
                           ((0.5 * prev.a_m_per_s2) * prev.duration_s) * prev.duration_s;
      const double v_end = prev.v0_m_per_s + prev.a_m_per_s2 * prev.duration_s;
      CHECK(next.z0_m == z_end);
      CHECK(next.v0_m_per_s == v_end);
      // Sampling just left and right of the boundary agrees.
      const double t = next.t0_s;
      CHECK_THAT(arm->position(std::nextafter(t, 0.0)),
                 Catch::Matchers::WithinAbs(arm->position(t), 1e-15 * res.max_splitting_m));
    }
  }

  // The apex sits at the loop midpoint.
  const double apex = std::abs(res.arm_b.position(20e-6) - res.arm_a.position(20e-6));
  CHECK_THAT(apex, Catch::Matchers::WithinRel(res.max_splitting_m, 1e-12));
  // Velocity peaks at the quarter points with magnitude a T/4.
  const double vq = std::abs(res.arm_a.velocity(10e-6));
  CHECK_THAT(vq, Catch::Matchers::WithinRel(
                     std::abs(spin_acceleration(nd, 1e5, 1)) * 1e-5, 1e-12));
}

TEST_CASE("contrast follows the coherence envelope") {
  CHECK(contrast_estimate(0.0, 79e-6) == 1.0);
  CHECK_THAT(contrast_estimate(79e-6, 79e-6), Catch::Matchers::WithinRel(1.0 / M_E, 1e-12));
  CHECK_THAT(contrast_estimate(40e-6, 79e-6),
             Catch::Matchers::WithinRel(std::exp(-40.0 / 79.0), 1e-12));
  CHECK_THAT(contrast_estimate(40e-6, 79e-6), Catch::Matchers::WithinRel(0.60, 0.01));
  // Stretched exponent sharpens the falloff beyond T2 and softens it before.
  CHECK(contrast_estimate(40e-6, 79e-6, 2.0) > contrast_estimate(40e-6, 79e-6));
  CHECK(contrast_estimate(160e-6, 79e-6, 2.0) < contrast_estimate(160e-6, 79e-6));
  CHECK_THROWS_AS(contrast_estimate(40e-6, 0.0), std::invalid_argument);

  const NDSpec nd = nd_from_atoms(1e7);
  const SGIResult res =
      simulate_interferometer(nd, symmetric_profile(1e5, 40e-6), {0, 1}, {79e-6, 1.0});
  CHECK(res.contrast == contrast_estimate(40e-6, 79e-6));
  CHECK(res.contrast >= 0.0);
  CHECK(res.contrast <= 1.0);
}

TEST_CASE("result export carries trajectories and closure") {
  const NDSpec nd = nd_from_atoms(1e7);
  const SGIResult res =
      simulate_interferometer(nd, symmetric_profile(1e5, 40e-6), {0, 1}, {79e-6, 1.0});
  const nlohmann::json j = sgi_result_json(res, 81);

  CHECK(j["schema_version"] == 1);
  CHECK(j["max_splitting_m"].get<double>() == res.max_splitting_m);
  CHECK(j["closure"]["dz_final_m"].get<double>() == 0.0);
  CHECK(j["contrast"].get<double>() == res.contrast);
  CHECK(j["arm_a"]["m_s"] == 0);
  CHECK(j["arm_b"]["m_s"] == 1);
  REQUIRE(j["arm_b"]["segments"].size() == 4);
  REQUIRE(j["samples"]["t_s"].size() == 81);
  REQUIRE(j["samples"]["z_b_m"].size() == 81);
  CHECK(j["samples"]["t_s"].front().get<double>() == 0.0);
  CHECK(j["samples"]["t_s"].back().get<double>() == 40e-6);
  // The sampled mid-point reproduces the apex.
  CHECK_THAT(j["samples"]["z_b_m"][40].get<double>(),
             Catch::Matchers::WithinRel(res.max_splitting_m, 1e-12));
  CHECK_THROWS_AS(sgi_result_json(res, 1), std::invalid_argument);
}
