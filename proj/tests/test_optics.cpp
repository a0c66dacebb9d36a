#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "nvsim/optics.hpp"

using namespace nvsim;

namespace {

Level7 ground(int ms) {
  Level7 p{};
  p[1 - ms] = 1.0;  // ground triplet ordered {+1, 0, -1}
  return p;
}

constexpr double kDt = 1e-10;

} // namespace

TEST_CASE("pumping the bright state gives a monotone saturating trace") {
  OpticalRates rates;
  const auto [pops, trace] = optical_cycle(ground(0), rates, 3e-6, kDt);
  const auto peak = std::max_element(trace.values.begin(), trace.values.end());
  // monotone rise to the peak ...
  for (auto it = trace.values.begin() + 1; it <= peak; ++it)
    CHECK(*it >= *(it - 1) - 1e-9 * *peak);
  // ... then settling onto the steady state from above, never dipping below it
  const double final_v = trace.values.back();
  for (auto it = peak; it != trace.values.end(); ++it)
    CHECK(*it >= final_v * (1.0 - 1e-3));
  CHECK(*peak < 1.1 * final_v);  // saturates close to the peak level
  // last 10% of the trace is flat to 1%
  const double tail = trace.values[trace.values.size() * 9 / 10];
  CHECK(final_v == Catch::Approx(tail).epsilon(0.01));
}

TEST_CASE("dark-state trace dips via the singlet shelf and then recovers") {
  OpticalRates rates;
  const auto [pops1, dark] = optical_cycle(ground(1), rates, 3e-6, kDt);
  const auto [pops0, bright] = optical_cycle(ground(0), rates, 3e-6, kDt);

  // early fluorescence reveals the initial spin state
  const auto early0 = readout_counts(bright, 0.0, 300e-9, 0, 0).mean_counts;
  const auto early1 = readout_counts(dark, 0.0, 300e-9, 0, 0).mean_counts;
  CHECK(early0 > early1);

  // transient: rise, dip while shelved, then recovery to the common steady
  // state; the early peak sits within the excitation-filling time (~5/pump)
  const auto first_200ns =
      std::lower_bound(dark.times.begin(), dark.times.end(), 200e-9) - dark.times.begin();
  const auto peak = std::max_element(dark.values.begin(), dark.values.begin() + first_200ns);
  const auto dip = std::min_element(peak, dark.values.end());
  CHECK(*peak > *dip);
  CHECK(dark.values.back() > *dip);
  CHECK(dark.values.back() == Catch::Approx(bright.values.back()).epsilon(0.01));
  // recovery happens on the singlet timescale: the dip sits well before 5 shelf lifetimes
  const double t_dip = dark.times[static_cast<std::size_t>(dip - dark.values.begin())];
  CHECK(t_dip < 5.0 * (1.0 / rates.singlet_rate) + 1e-6);
}

TEST_CASE("long pumping repolarizes the ground state into m_s = 0") {
  OpticalRates rates;
  auto [pops, trace] = optical_cycle(ground(-1), rates, 5e-6, kDt);
  // switch the laser off and let excited/singlet population settle
  const auto g = collapse_to_ground(pops, rates);
  const double total = g[0] + g[1] + g[2];
  CHECK(total == Catch::Approx(1.0).margin(1e-9));
  CHECK(g[1] / total > 0.9);  // emergent from the ISC branching ratios
}

TEST_CASE("zero rates freeze the populations and emit nothing") {
  OpticalRates rates;
  rates.pump_rate = rates.radiative_rate = rates.isc_ms1 = rates.isc_ms0 = 0.0;
  rates.singlet_rate = 0.0;
  Level7 start{0.2, 0.3, 0.1, 0.15, 0.05, 0.1, 0.1};
  const auto [pops, trace] = optical_cycle(start, rates, 1e-6, 1e-9);
  for (int i = 0; i < 7; ++i) CHECK(pops[i] == Catch::Approx(start[i]).margin(1e-15));
  for (double v : trace.values) CHECK(v == 0.0);
}

TEST_CASE("occupation stays normalized through the integration") {
  OpticalRates rates;
  Level7 start{0.1, 0.5, 0.1, 0.1, 0.05, 0.05, 0.1};
  const auto [pops, trace] = optical_cycle(start, rates, 2e-6, kDt);
  double sum = 0.0;
  for (double p : pops) {
    sum += p;
    CHECK(p >= -1e-12);
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("integration rejects unstable steps and bad occupations") {
  OpticalRates rates;
  CHECK_THROWS_AS(optical_cycle(ground(0), rates, 1e-6, 5e-9), std::runtime_error);
  Level7 not_normalized{0.5, 0.1, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(optical_cycle(not_normalized, rates, 1e-6, kDt), std::invalid_argument);
  CHECK_THROWS_AS(optical_cycle(ground(0), rates, 1e-7, 1e-6), std::invalid_argument);
}

TEST_CASE("zero trace yields zero counts in every shot") {
  SignalTrace trace;
  trace.times = {0.0, 1e-6, 2e-6};
  trace.values = {0.0, 0.0, 0.0};
  const auto counts = readout_counts(trace, 0.0, 2e-6, 100, 42);
  CHECK(counts.mean_counts == 0.0);
  for (long s : counts.samples) CHECK(s == 0);
}

TEST_CASE("constant rate gives Poisson counts with mean rate times window") {
  SignalTrace trace;
  const double rate = 8e6;
  for (int k = 0; k <= 100; ++k) {
    trace.times.push_back(k * 1e-8);
    trace.values.push_back(rate);
  }
  const double window = 0.6e-6;
  const int shots = 100000;
  const auto counts = readout_counts(trace, 0.2e-6, 0.8e-6, shots, 1234);
  const double mean = rate * window;
  CHECK(counts.mean_counts == Catch::Approx(mean).epsilon(1e-12));
  const double sigma = std::sqrt(mean / shots);
  CHECK(std::abs(counts.sample_mean - mean) < 3.0 * sigma);
}

TEST_CASE("readout sampling is reproducible under a fixed seed") {
  OpticalRates rates;
  const auto [pops, trace] = optical_cycle(ground(0), rates, 1e-6, kDt);
  const auto a = readout_counts(trace, 0.0, 0.5e-6, 500, 99);
  const auto b = readout_counts(trace, 0.0, 0.5e-6, 500, 99);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
  const auto c = readout_counts(trace, 0.0, 0.5e-6, 500, 100);
  bool any_different = false;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    any_different = any_different || a.samples[i] != c.samples[i];
  CHECK(any_different);
}

TEST_CASE("readout window validation") {
  SignalTrace trace;
  trace.times = {0.0, 1e-6};
  trace.values = {1e6, 1e6};
  CHECK_THROWS_AS(readout_counts(trace, 0.5e-6, 0.5e-6, 10, 0), std::invalid_argument);
  CHECK_THROWS_AS(readout_counts(trace, 0.0, 2e-6, 10, 0), std::invalid_argument);
  CHECK_THROWS_AS(readout_counts(trace, -1e-6, 0.5e-6, 10, 0), std::invalid_argument);
}
