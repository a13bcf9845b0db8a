#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "roadsurf/errors.hpp"
#include "roadsurf/fuzzy.hpp"

namespace roadsurf::weather {

enum class WeatherCondition { sunny, rainy, foggy, night, day };
enum class Modality { camera, acceleration };

inline const char* to_string(WeatherCondition c) {
  switch (c) {
    case WeatherCondition::sunny: return "sunny";
    case WeatherCondition::rainy: return "rainy";
    case WeatherCondition::foggy: return "foggy";
    case WeatherCondition::night: return "night";
    case WeatherCondition::day: return "day";
  }
  return "?";
}

inline const char* to_string(Modality m) {
  return m == Modality::camera ? "camera" : "acceleration";
}

inline WeatherCondition condition_from_string(const std::string& s) {
  for (WeatherCondition c : {WeatherCondition::sunny, WeatherCondition::rainy,
                             WeatherCondition::foggy, WeatherCondition::night,
                             WeatherCondition::day}) {
    if (s == to_string(c)) return c;
  }
  throw data_error("unknown weather condition: " + s);
}

// Crisp sensor snapshot. Values outside the nominal universes are accepted
// here and clamped by the fuzzy variables.
struct WeatherReading {
  double wind_speed = 0.0;   // normalized 0-10
  double humidity = 0.0;     // percent 0-100
  double light_level = 0.0;  // percent 0-100
  double temperature = 0.0;  // deg C 0-45
  double rain_sensor = 0.0;  // percent 0-100
};

struct RoutingDecision {
  WeatherCondition condition;
  Modality modality;
  std::string model_key;  // "<modality>-<condition>"
  std::map<std::string, double> activations;
};

namespace detail {

inline fuzzy::FuzzyVariable percent_variable(const std::string& name) {
  using MF = fuzzy::MembershipFunction;
  fuzzy::FuzzyVariable v(name, 0.0, 100.0);
  v.add_term("low", MF::triangle(0, 0, 50));
  v.add_term("medium", MF::triangle(0, 50, 100));
  v.add_term("high", MF::triangle(50, 100, 100));
  return v;
}

inline fuzzy::FuzzyRule rule(std::map<std::string, std::string> antecedent,
                             std::string consequent) {
  return fuzzy::FuzzyRule{std::move(antecedent), std::move(consequent)};
}

}  // namespace detail

// Builds the five-input weather system (wind, humidity, light, temperature,
// rain) with output conditions {sunny, rainy, foggy, night, day} and a 32-rule
// base. The base has three groups:
//
//   * 8 core rules taken verbatim from the published rule table; these carry
//     full five-variable antecedents over the low/high (none/heavy) terms.
//   * 11 refinement rules over (humidity, light, temperature, rain) covering
//     the low/high grid combinations the core table leaves out. They omit the
//     wind antecedent because the core table itself is wind-symmetric (each
//     consequent appears for both wind levels). This is also where night and
//     sunny get their temperature-conditioned assignments.
//   * 13 coverage rules over (humidity, light, rain) only. Light and rain
//     terms tile their universes, so at least one of these always fires; they
//     keep inference total at inputs where low and high degrees both vanish
//     (wind 5, light/humidity/rain 50, temperature 20-30). Their consequents
//     are chosen so they can never override a core rule where the core table
//     is decisive: wherever a coverage rule's antecedent is a subset of a core
//     row, it carries that row's consequent, and elsewhere it carries a label
//     that loses ties under the tie-break order.
//
// Tie-break order [foggy, rainy, night, day, sunny]: conditions that route to
// the acceleration modality win ties, because camera data is the one that
// degrades in bad weather and darkness.
inline fuzzy::FuzzySystem build_weather_system() {
  using MF = fuzzy::MembershipFunction;
  using detail::rule;

  std::vector<fuzzy::FuzzyVariable> variables;

  fuzzy::FuzzyVariable wind("wind", 0.0, 10.0);
  wind.add_term("low", MF::trapezoid(0, 0, 3, 5));
  wind.add_term("medium", MF::triangle(3, 5, 7));
  wind.add_term("high", MF::trapezoid(5, 7, 10, 10));
  variables.push_back(std::move(wind));

  variables.push_back(detail::percent_variable("humidity"));
  variables.push_back(detail::percent_variable("light"));

  fuzzy::FuzzyVariable temperature("temperature", 0.0, 45.0);
  temperature.add_term("low", MF::trapezoid(0, 0, 10, 20));
  temperature.add_term("medium", MF::triangle(10, 22, 30));
  temperature.add_term("high", MF::trapezoid(30, 35, 45, 45));
  variables.push_back(std::move(temperature));

  fuzzy::FuzzyVariable rain("rain", 0.0, 100.0);
  rain.add_term("none", MF::triangle(0, 0, 50));
  rain.add_term("light", MF::triangle(0, 50, 100));
  rain.add_term("heavy", MF::triangle(50, 100, 100));
  variables.push_back(std::move(rain));

  std::vector<fuzzy::FuzzyRule> rules;

  // Core rule table, verbatim.
  rules.push_back(rule({{"wind", "low"}, {"humidity", "low"}, {"light", "low"},
                        {"temperature", "low"}, {"rain", "none"}}, "foggy"));
  rules.push_back(rule({{"wind", "low"}, {"humidity", "low"}, {"light", "high"},
                        {"temperature", "high"}, {"rain", "none"}}, "day"));
  rules.push_back(rule({{"wind", "low"}, {"humidity", "high"}, {"light", "low"},
                        {"temperature", "high"}, {"rain", "none"}}, "rainy"));
  rules.push_back(rule({{"wind", "low"}, {"humidity", "high"}, {"light", "high"},
                        {"temperature", "low"}, {"rain", "heavy"}}, "day"));
  rules.push_back(rule({{"wind", "high"}, {"humidity", "low"}, {"light", "low"},
                        {"temperature", "low"}, {"rain", "none"}}, "foggy"));
  rules.push_back(rule({{"wind", "high"}, {"humidity", "low"}, {"light", "high"},
                        {"temperature", "high"}, {"rain", "none"}}, "day"));
  rules.push_back(rule({{"wind", "high"}, {"humidity", "high"}, {"light", "low"},
                        {"temperature", "high"}, {"rain", "none"}}, "rainy"));
  rules.push_back(rule({{"wind", "high"}, {"humidity", "high"}, {"light", "high"},
                        {"temperature", "low"}, {"rain", "heavy"}}, "day"));

  // Refinement grid over (humidity, light, temperature, rain).
  rules.push_back(rule({{"humidity", "low"}, {"light", "low"},
                        {"temperature", "high"}, {"rain", "none"}}, "night"));
  rules.push_back(rule({{"humidity", "low"}, {"light", "low"},
                        {"temperature", "low"}, {"rain", "heavy"}}, "rainy"));
  rules.push_back(rule({{"humidity", "low"}, {"light", "low"},
                        {"temperature", "high"}, {"rain", "heavy"}}, "rainy"));
  rules.push_back(rule({{"humidity", "low"}, {"light", "high"},
                        {"temperature", "low"}, {"rain", "none"}}, "sunny"));
  rules.push_back(rule({{"humidity", "low"}, {"light", "high"},
                        {"temperature", "low"}, {"rain", "heavy"}}, "day"));
  rules.push_back(rule({{"humidity", "low"}, {"light", "high"},
                        {"temperature", "high"}, {"rain", "heavy"}}, "day"));
  rules.push_back(rule({{"humidity", "high"}, {"light", "low"},
                        {"temperature", "low"}, {"rain", "none"}}, "rainy"));
  rules.push_back(rule({{"humidity", "high"}, {"light", "low"},
                        {"temperature", "low"}, {"rain", "heavy"}}, "rainy"));
  rules.push_back(rule({{"humidity", "high"}, {"light", "low"},
                        {"temperature", "high"}, {"rain", "heavy"}}, "rainy"));
  rules.push_back(rule({{"humidity", "high"}, {"light", "high"},
                        {"temperature", "low"}, {"rain", "none"}}, "day"));
  rules.push_back(rule({{"humidity", "high"}, {"light", "high"},
                        {"temperature", "high"}, {"rain", "none"}}, "day"));

  // Coverage rules over (humidity, light, rain).
  rules.push_back(rule({{"humidity", "low"}, {"light", "low"}, {"rain", "none"}}, "foggy"));
  rules.push_back(rule({{"humidity", "medium"}, {"light", "low"}, {"rain", "none"}}, "night"));
  rules.push_back(rule({{"humidity", "high"}, {"light", "low"}, {"rain", "none"}}, "rainy"));
  rules.push_back(rule({{"light", "low"}, {"rain", "light"}}, "rainy"));
  rules.push_back(rule({{"light", "low"}, {"rain", "heavy"}}, "rainy"));
  rules.push_back(rule({{"light", "medium"}, {"rain", "none"}}, "day"));
  rules.push_back(rule({{"light", "medium"}, {"rain", "light"}}, "rainy"));
  rules.push_back(rule({{"light", "medium"}, {"rain", "heavy"}}, "rainy"));
  rules.push_back(rule({{"humidity", "low"}, {"light", "high"}, {"rain", "none"}}, "day"));
  rules.push_back(rule({{"humidity", "medium"}, {"light", "high"}, {"rain", "none"}}, "sunny"));
  rules.push_back(rule({{"humidity", "high"}, {"light", "high"}, {"rain", "none"}}, "day"));
  rules.push_back(rule({{"light", "high"}, {"rain", "light"}}, "day"));
  rules.push_back(rule({{"light", "high"}, {"rain", "heavy"}}, "day"));

  return fuzzy::FuzzySystem(std::move(variables), {"sunny", "rainy", "foggy", "night", "day"},
                            std::move(rules), {"foggy", "rainy", "night", "day", "sunny"});
}

inline std::map<std::string, double> to_crisp_inputs(const WeatherReading& r) {
  return {{"wind", r.wind_speed},
          {"humidity", r.humidity},
          {"light", r.light_level},
          {"temperature", r.temperature},
          {"rain", r.rain_sensor}};
}

inline std::pair<WeatherCondition, std::map<std::string, double>> classify_weather(
    const fuzzy::FuzzySystem& system, const WeatherReading& reading) {
  fuzzy::InferenceResult res = system.infer(to_crisp_inputs(reading));
  return {condition_from_string(res.label), std::move(res.activations)};
}

inline std::pair<WeatherCondition, std::map<std::string, double>> classify_weather(
    const WeatherReading& reading) {
  static const fuzzy::FuzzySystem system = build_weather_system();
  return classify_weather(system, reading);
}

// Low-visibility conditions use the acceleration-trained models; clear
// daylight uses the camera models.
inline RoutingDecision route(WeatherCondition condition) {
  const bool accel = condition == WeatherCondition::rainy ||
                     condition == WeatherCondition::foggy ||
                     condition == WeatherCondition::night;
  RoutingDecision d;
  d.condition = condition;
  d.modality = accel ? Modality::acceleration : Modality::camera;
  d.model_key = std::string(to_string(d.modality)) + "-" + to_string(condition);
  return d;
}

inline RoutingDecision decide(const fuzzy::FuzzySystem& system, const WeatherReading& reading) {
  auto [condition, activations] = classify_weather(system, reading);
  RoutingDecision d = route(condition);
  d.activations = std::move(activations);
  return d;
}

}  // namespace roadsurf::weather
