#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "roadsurf/fuzzy.hpp"
#include "roadsurf/rng.hpp"
#include "roadsurf/weather.hpp"

using namespace roadsurf;
using fuzzy::MembershipFunction;

namespace {

// Toy two-variable system with overlapping ramp terms, used by the generic
// engine tests.
fuzzy::FuzzySystem toy_system() {
  fuzzy::FuzzyVariable a("a", 0.0, 10.0);
  a.add_term("lo", MembershipFunction::triangle(0, 0, 10));
  a.add_term("hi", MembershipFunction::triangle(0, 10, 10));
  fuzzy::FuzzyVariable b("b", 0.0, 10.0);
  b.add_term("lo", MembershipFunction::triangle(0, 0, 10));
  b.add_term("hi", MembershipFunction::triangle(0, 10, 10));
  std::vector<fuzzy::FuzzyRule> rules = {
      {{{"a", "lo"}, {"b", "lo"}}, "x"},
      {{{"a", "hi"}, {"b", "hi"}}, "y"},
  };
  return fuzzy::FuzzySystem({a, b}, {"x", "y"}, rules, {"x", "y"});
}

}  // namespace

TEST_CASE("membership evaluation at pinned points") {
  const auto trap = MembershipFunction::trapezoid(0, 0, 3, 5);
  CHECK(trap.evaluate(0.0) == 1.0);  // plateau includes the degenerate left edge
  CHECK(trap.evaluate(4.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(trap.evaluate(3.0) == 1.0);
  CHECK(trap.evaluate(5.0) == 0.0);
  CHECK(trap.evaluate(-1.0) == 0.0);

  const auto tri = MembershipFunction::triangle(3, 5, 7);
  CHECK(tri.evaluate(5.0) == 1.0);
  CHECK(tri.evaluate(3.0) == 0.0);
  CHECK(tri.evaluate(7.0) == 0.0);

  const auto ramp = MembershipFunction::triangle(0, 50, 100);
  CHECK(ramp.evaluate(25.0) == doctest::Approx(0.5).epsilon(1e-12));

  // degenerate falling edge: apex at the right end of the universe
  const auto rtri = MembershipFunction::triangle(50, 100, 100);
  CHECK(rtri.evaluate(100.0) == 1.0);
  CHECK(rtri.evaluate(75.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("membership degree is always within [0,1]") {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    double p[4];
    for (double& v : p) v = rng.uniform(-10.0, 10.0);
    std::sort(p, p + 4);
    const auto tri = MembershipFunction::triangle(p[0], p[1], p[2]);
    const auto trap = MembershipFunction::trapezoid(p[0], p[1], p[2], p[3]);
    for (int k = 0; k < 50; ++k) {
      const double x = rng.uniform(-20.0, 20.0);
      for (double d : {tri.evaluate(x), trap.evaluate(x)}) {
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
      }
    }
  }
}

TEST_CASE("monotone edges") {
  const auto trap = MembershipFunction::trapezoid(1, 3, 6, 9);
  double prev = -1.0;
  for (double x = 1.0; x <= 3.0; x += 0.01) {  // rising edge: non-decreasing
    const double d = trap.evaluate(x);
    CHECK(d >= prev);
    prev = d;
  }
  prev = 2.0;
  for (double x = 6.0; x <= 9.0; x += 0.01) {  // falling edge: non-increasing
    const double d = trap.evaluate(x);
    CHECK(d <= prev);
    prev = d;
  }
}

TEST_CASE("malformed breakpoints fail at construction, not evaluation") {
  CHECK_THROWS_AS(MembershipFunction::triangle(5, 3, 7), config_error);
  CHECK_THROWS_AS(MembershipFunction::trapezoid(0, 2, 1, 4), config_error);
  CHECK_THROWS_AS(MembershipFunction::from_breakpoints({1, 2}), config_error);
  CHECK_THROWS_AS(MembershipFunction::from_breakpoints({1, 2, 3, 4, 5}), config_error);
}

TEST_CASE("fuzzify with clamping") {
  const fuzzy::FuzzySystem sys = weather::build_weather_system();
  const fuzzy::FuzzyVariable& wind = sys.variable("wind");

  auto at4 = wind.fuzzify(4.0);
  CHECK(at4["low"] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(at4["medium"] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(at4["high"] == 0.0);

  auto light100 = sys.variable("light").fuzzify(100.0);
  CHECK(light100["low"] == 0.0);
  CHECK(light100["medium"] == 0.0);
  CHECK(light100["high"] == 1.0);

  // out-of-universe input clamps to the nearest bound
  auto at12 = wind.fuzzify(12.0);
  auto at10 = wind.fuzzify(10.0);
  CHECK(at12 == at10);
  CHECK(at12["high"] == 1.0);
  CHECK(at12["low"] == 0.0);
  CHECK(at12["medium"] == 0.0);
}

TEST_CASE("variable invariants") {
  fuzzy::FuzzyVariable v("v", 0.0, 10.0);
  v.add_term("lo", MembershipFunction::triangle(0, 0, 5));
  CHECK_THROWS_AS(v.add_term("lo", MembershipFunction::triangle(0, 5, 10)), config_error);
  CHECK_THROWS_AS(v.add_term("out", MembershipFunction::triangle(0, 5, 11)), config_error);
  CHECK_THROWS_AS(fuzzy::FuzzyVariable("w", 5.0, 5.0), config_error);
}

TEST_CASE("fire_rule is the min over antecedent degrees") {
  fuzzy::FuzzifiedInputs fz = {
      {"v1", {{"t", 0.8}}}, {"v2", {{"t", 1.0}}}, {"v3", {{"t", 0.6}}},
      {"v4", {{"t", 1.0}}}, {"v5", {{"t", 1.0}}},
  };
  fuzzy::FuzzyRule rule;
  for (const char* v : {"v1", "v2", "v3", "v4", "v5"}) rule.antecedent[v] = "t";
  rule.consequent = "out";
  CHECK(fuzzy::fire_rule(rule, fz) == doctest::Approx(0.6).epsilon(1e-15));

  fz["v3"]["t"] = 0.0;  // absorbing element
  CHECK(fuzzy::fire_rule(rule, fz) == 0.0);

  fuzzy::FuzzyRule single{{{"v1", "t"}}, "out"};
  fz["v1"]["t"] = 0.37;
  CHECK(fuzzy::fire_rule(single, fz) == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("fire_rule names the missing variable") {
  fuzzy::FuzzifiedInputs fz = {{"present", {{"t", 0.5}}}};
  fuzzy::FuzzyRule rule{{{"absent", "t"}}, "out"};
  try {
    fuzzy::fire_rule(rule, fz);
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(std::string(e.what()).find("absent") != std::string::npos);
  }
}

TEST_CASE("infer: weather example resolved by exhaustive rule evaluation") {
  const fuzzy::FuzzySystem sys = weather::build_weather_system();
  const std::map<std::string, double> inputs = {
      {"wind", 1}, {"humidity", 10}, {"light", 10}, {"temperature", 5}, {"rain", 0}};

  // independent oracle: evaluate every rule by hand and aggregate
  fuzzy::FuzzifiedInputs fz;
  for (const auto& v : sys.variables()) fz[v.name()] = v.fuzzify(inputs.at(v.name()));
  std::map<std::string, double> expected;
  for (const std::string& l : sys.output_labels()) expected[l] = 0.0;
  for (const auto& rule : sys.rules()) {
    double act = 1.0;
    for (const auto& [var, term] : rule.antecedent) act = std::min(act, fz[var][term]);
    expected[rule.consequent] = std::max(expected[rule.consequent], act);
  }
  std::string best;
  double best_act = -1.0;
  for (const std::string& l : sys.tie_break()) {
    if (expected[l] > best_act) {
      best_act = expected[l];
      best = l;
    }
  }

  const fuzzy::InferenceResult res = sys.infer(inputs);
  CHECK(res.label == "foggy");
  CHECK(res.label == best);
  CHECK(res.activations == expected);
}

TEST_CASE("infer: saturated rule reaches activation 1") {
  const fuzzy::FuzzySystem sys = toy_system();
  const fuzzy::InferenceResult res = sys.infer({{"a", 0.0}, {"b", 0.0}});
  CHECK(res.label == "x");
  CHECK(res.activations.at("x") == 1.0);
  CHECK(res.activations.at("y") == 0.0);
}

TEST_CASE("infer: ties resolve by tie_break order") {
  // symmetric point: both rules fire equally
  const fuzzy::FuzzySystem sys = toy_system();
  const fuzzy::InferenceResult res = sys.infer({{"a", 5.0}, {"b", 5.0}});
  CHECK(res.activations.at("x") == doctest::Approx(res.activations.at("y")));
  CHECK(res.activations.at("x") > 0.0);
  CHECK(res.label == "x");

  fuzzy::FuzzyVariable a("a", 0.0, 10.0);
  a.add_term("lo", MembershipFunction::triangle(0, 0, 10));
  a.add_term("hi", MembershipFunction::triangle(0, 10, 10));
  fuzzy::FuzzyVariable b("b", 0.0, 10.0);
  b.add_term("lo", MembershipFunction::triangle(0, 0, 10));
  b.add_term("hi", MembershipFunction::triangle(0, 10, 10));
  std::vector<fuzzy::FuzzyRule> rules = {
      {{{"a", "lo"}, {"b", "lo"}}, "x"},
      {{{"a", "hi"}, {"b", "hi"}}, "y"},
  };
  const fuzzy::FuzzySystem flipped({a, b}, {"x", "y"}, rules, {"y", "x"});
  CHECK(flipped.infer({{"a", 5.0}, {"b", 5.0}}).label == "y");
}

TEST_CASE("infer: all-zero activations raise no_rule_fired") {
  const fuzzy::FuzzySystem sys = toy_system();
  // a=0 kills the hi rule, b=10 kills the lo rule
  CHECK_THROWS_AS(sys.infer({{"a", 0.0}, {"b", 10.0}}), no_rule_fired);
}

TEST_CASE("infer is deterministic and self-consistent") {
  const fuzzy::FuzzySystem sys = weather::build_weather_system();
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    const std::map<std::string, double> inputs = {
        {"wind", rng.uniform(0, 10)},      {"humidity", rng.uniform(0, 100)},
        {"light", rng.uniform(0, 100)},    {"temperature", rng.uniform(0, 45)},
        {"rain", rng.uniform(0, 100)}};
    const auto r1 = sys.infer(inputs);
    const auto r2 = sys.infer(inputs);
    CHECK(r1.label == r2.label);
    CHECK(r1.activations == r2.activations);  // byte-for-byte
    for (const auto& [label, act] : r1.activations) {
      CHECK(r1.activations.at(r1.label) >= act);
    }
  }
}

TEST_CASE("argmax is invariant under positive scaling of activations") {
  Rng rng(3);
  const std::vector<std::string> tie_break = {"p", "q", "r", "s"};
  for (int i = 0; i < 300; ++i) {
    std::map<std::string, double> acts;
    for (const std::string& l : tie_break) acts[l] = rng.uniform(0.0, 1.0);
    const double k = rng.uniform(0.01, 100.0);
    std::map<std::string, double> scaled = acts;
    for (auto& [l, a] : scaled) a *= k;
    CHECK(fuzzy::pick_label(acts, tie_break) == fuzzy::pick_label(scaled, tie_break));
  }
}

TEST_CASE("system construction validation") {
  fuzzy::FuzzyVariable a("a", 0.0, 1.0);
  a.add_term("t", MembershipFunction::triangle(0, 0.5, 1));
  const std::vector<fuzzy::FuzzyRule> ok = {{{{"a", "t"}}, "x"}};

  CHECK_THROWS_AS(fuzzy::FuzzySystem({a}, {"x"}, {}, {"x"}), config_error);
  CHECK_THROWS_AS(fuzzy::FuzzySystem({a}, {}, ok, {}), config_error);
  CHECK_THROWS_AS(fuzzy::FuzzySystem({a}, {"x"}, ok, {"x", "y"}), config_error);
  CHECK_THROWS_AS(fuzzy::FuzzySystem({a}, {"x", "y"}, ok, {"x", "x"}), config_error);
  CHECK_THROWS_AS(fuzzy::FuzzySystem({a}, {"x"}, {{{{"a", "t"}}, "zzz"}}, {"x"}), config_error);
  CHECK_THROWS_AS(fuzzy::FuzzySystem({a}, {"x"}, {{{{"a", "nope"}}, "x"}}, {"x"}), config_error);
  CHECK_THROWS_AS(fuzzy::FuzzySystem({a}, {"x"}, {{{{"b", "t"}}, "x"}}, {"x"}), config_error);
  CHECK_THROWS_AS(fuzzy::FuzzySystem({a}, {"x"}, {{{}, "x"}}, {"x"}), config_error);
}

TEST_CASE("JSON round-trip preserves inference") {
  const fuzzy::FuzzySystem sys = weather::build_weather_system();
  const auto doc = fuzzy::to_json(sys);
  const fuzzy::FuzzySystem back = fuzzy::system_from_json(doc);
  CHECK(back.rules().size() == sys.rules().size());

  for (double wind : {0.0, 2.5, 5.0, 8.0, 10.0}) {
    for (double light : {0.0, 25.0, 50.0, 90.0}) {
      for (double rain : {0.0, 50.0, 100.0}) {
        const std::map<std::string, double> in = {{"wind", wind},
                                                  {"humidity", 30.0},
                                                  {"light", light},
                                                  {"temperature", 15.0},
                                                  {"rain", rain}};
        const auto r1 = sys.infer(in);
        const auto r2 = back.infer(in);
        CHECK(r1.label == r2.label);
        CHECK(r1.activations == r2.activations);
      }
    }
  }
}

TEST_CASE("JSON schema errors") {
  auto doc = fuzzy::to_json(weather::build_weather_system());
  doc["variables"][0]["terms"]["low"] = {1.0, 2.0};  // bad breakpoint count
  CHECK_THROWS_AS(fuzzy::system_from_json(doc), config_error);
  CHECK_THROWS_AS(fuzzy::system_from_json(nlohmann::json::object()), config_error);
}
