#include <doctest.h>

#include <cmath>
#include <sstream>

#include "crashnet/trace.hpp"

using namespace crashnet;

namespace {

ScenarioSpec small_spec() {
  ScenarioSpec s;
  s.route = {{32.98, -96.75}, {32.99, -96.75}};
  s.cruise_speed_kmh = 36.0;  // 10 m/s
  s.duration_ms = 10000;
  s.seed = 99;
  return s;
}

double max_abs(const std::vector<AccelSample>& v, double AccelSample::*axis) {
  double m = 0;
  for (const auto& s : v) m = std::max(m, std::abs(s.*axis / 9.80665));
  return m;
}

}  // namespace

TEST_SUITE("trace") {

TEST_CASE("parse and write round trip") {
  const std::string text =
      "#crashnet-trace,v=1,device=car-7,crash_g=10\n"
      "G,0,40.5,-83.25,12.5\n"
      "A,0,0.1,-0.2,9.80665\n"
      "A,10,1e-05,0,0\n"
      "G,1000,40.5001,-83.25,13\n"
      "A,1000,0,0,0\n";
  std::istringstream in(text);
  const auto tr = parse_trace(in);
  CHECK(tr.device_id == "car-7");
  CHECK(tr.rows.size() == 5);
  CHECK(tr.samples().size() == 3);
  CHECK(tr.fixes().size() == 2);
  CHECK(tr.apply_overrides({}).crash_g == 10.0);
  CHECK(trace_to_string(tr) == text);
}

TEST_CASE("trace errors carry line numbers") {
  auto err_line = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      parse_trace(in);
    } catch (const TraceError& e) {
      return e.line;
    }
    return 0;
  };
  CHECK(err_line("") == 1);
  CHECK(err_line("A,0,0,0,0\n") == 1);
  CHECK(err_line("#crashnet-trace,v=2,device=x\n") == 1);
  CHECK(err_line("#crashnet-trace,v=1,device=x\nA,0,0,0\n") == 2);
  CHECK(err_line("#crashnet-trace,v=1,device=x\nA,5,0,0,0\nA,4,0,0,0\n") == 3);
  CHECK(err_line("#crashnet-trace,v=1,device=x\nA,5,0,0,0\nG,5,0,0,0\n") == 3);
  CHECK(err_line("#crashnet-trace,v=1,device=x\nG,5,95,0,0\n") == 2);
  CHECK(err_line("#crashnet-trace,v=1,device=x\nZ,5,0,0,0\n") == 2);
  CHECK(err_line("#crashnet-trace,v=1,device=x\nA,5,zero,0,0\n") == 2);
  std::istringstream ok("#crashnet-trace,v=1,device=x,bogus=1\n");
  CHECK_THROWS_AS(parse_trace(ok).apply_overrides({}), TraceError);
}

TEST_CASE("generator is deterministic and bounded") {
  const auto a = trace_to_string(generate_trace(small_spec()));
  CHECK(a == trace_to_string(generate_trace(small_spec())));
  auto other = small_spec();
  other.seed = 100;
  CHECK(a != trace_to_string(generate_trace(other)));

  const auto tr = generate_trace(small_spec());
  CHECK(max_abs(tr.samples(), &AccelSample::ax) <= 0.3);
  CHECK(tr.samples().size() == 1001);
  CHECK(tr.fixes().size() == 11);
  CHECK(run_detector(tr.samples(), tr.fixes(), "d", {}).empty());

  // 10 m/s for 10 s along a north-south line.
  const auto f = tr.fixes();
  CHECK(f.front().lat == doctest::Approx(32.98));
  CHECK(f.back().lat == doctest::Approx(32.98 + 100.0 / 111195.0).epsilon(1e-3));
  CHECK(f[3].speed_kmh == 36.0);
}

TEST_CASE("injected crash peaks at the requested g") {
  auto spec = small_spec();
  spec.injections = {{4000, InjectionKind::crash_x, -13.0, 100}};
  const auto tr = generate_trace(spec);
  const double peak = max_abs(tr.samples(), &AccelSample::ax);
  // 10 ms sampling of a 100 ms half-sine: within one step of the peak.
  CHECK(peak <= 13.0 + 1e-9);
  CHECK(peak >= 13.0 * std::cos(std::numbers::pi * 0.1));
  const auto ev = run_detector(tr.samples(), tr.fixes(), "d", {});
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].crash->collision == Collision::head_on);
  CHECK(ev[0].fix.t <= ev[0].t);
}

TEST_CASE("speed drops to zero after the route ends") {
  auto spec = small_spec();
  spec.route = {{0, 0}, {0, 0.0001}};  // about 11 m
  const auto f = generate_trace(spec).fixes();
  CHECK(f.front().speed_kmh == 36.0);
  CHECK(f.back().speed_kmh == 0.0);
  CHECK(f.back().lon == doctest::Approx(0.0001));
}

TEST_CASE("scenario validation and parsing") {
  auto s = small_spec();
  s.sample_rate_hz = 0;
  CHECK_THROWS_AS(validate(s), SpecError);
  s = small_spec();
  s.noise_g = 0.6;
  CHECK_THROWS_AS(validate(s), SpecError);
  s = small_spec();
  s.injections = {{20000, InjectionKind::pothole, 5, 50}};
  CHECK_THROWS_AS(validate(s), SpecError);
  s = small_spec();
  s.route.clear();
  CHECK_THROWS_AS(validate(s), SpecError);

  const auto p = parse_scenario(R"({"device_id":"v9","route":[[1,2],[1.01,2]],
      "cruise_speed_kmh":60,"sample_rate_hz":50,"fix_rate_hz":2,
      "injections":[{"t":1000,"kind":"crash_y","peak_g":-15,"duration_ms":80}],"seed":5})");
  CHECK(p.device_id == "v9");
  CHECK(p.route.size() == 2);
  CHECK(p.sample_rate_hz == 50);
  REQUIRE(p.injections.size() == 1);
  CHECK(p.injections[0].kind == InjectionKind::crash_y);
  CHECK(p.injections[0].peak_g == -15);
  CHECK(p.seed == 5);
  CHECK(p.effective_duration_ms() > 0);
  CHECK_THROWS_AS(parse_scenario("{\"route\":[]}"), SpecError);
  CHECK_THROWS_AS(parse_scenario("nope"), SpecError);
  CHECK_THROWS_AS(parse_scenario(R"({"route":[[0,0]],"duration_ms":100,
      "injections":[{"t":1,"kind":"meteor","peak_g":1,"duration_ms":1}]})"),
                  SpecError);
}

}  // TEST_SUITE
