// Classifies a handful of weather readings and shows the routing decision
// each one produces.

#include <cstdio>

#include "roadsurf/weather.hpp"

using namespace roadsurf;

int main() {
  const fuzzy::FuzzySystem system = weather::build_weather_system();

  const weather::WeatherReading readings[] = {
      {1, 10, 10, 5, 0},    // calm, dark, dry, cold
      {1, 10, 90, 40, 0},   // bright, hot, dry
      {1, 90, 10, 40, 0},   // humid, dark, hot
      {2, 50, 95, 12, 0},   // bright, mid humidity
      {3, 40, 50, 25, 60},  // dusk, raining
      {9, 90, 90, 5, 95},   // windy, bright, heavy rain
  };

  std::printf("%-28s %-8s %-13s %s\n", "reading (w,h,l,t,r)", "cond", "modality", "model");
  for (const weather::WeatherReading& r : readings) {
    const weather::RoutingDecision d = weather::decide(system, r);
    std::printf("(%4.1f,%5.1f,%5.1f,%4.1f,%5.1f)  %-8s %-13s %s\n", r.wind_speed, r.humidity,
                r.light_level, r.temperature, r.rain_sensor, weather::to_string(d.condition),
                weather::to_string(d.modality), d.model_key.c_str());
  }
  return 0;
}
