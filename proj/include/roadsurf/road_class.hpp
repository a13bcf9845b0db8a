#pragma once

#include <array>
#include <string>

#include "roadsurf/errors.hpp"

namespace roadsurf {

// Fixed ordinal encoding; manifests and one-hot labels rely on this order.
enum class RoadClass : int {
  asphalt = 0,
  asphalt_damaged = 1,
  gravel = 2,
  gravel_damaged = 3,
  pavement = 4,
};

inline constexpr int kNumRoadClasses = 5;

inline constexpr std::array<const char*, kNumRoadClasses> kRoadClassNames = {
    "asphalt", "asphalt_damaged", "gravel", "gravel_damaged", "pavement"};

inline const char* to_string(RoadClass c) { return kRoadClassNames[static_cast<int>(c)]; }

inline RoadClass road_class_from_string(const std::string& name) {
  for (int i = 0; i < kNumRoadClasses; ++i) {
    if (name == kRoadClassNames[i]) return static_cast<RoadClass>(i);
  }
  throw data_error("unknown road class: " + name);
}

inline std::array<RoadClass, kNumRoadClasses> all_road_classes() {
  return {RoadClass::asphalt, RoadClass::asphalt_damaged, RoadClass::gravel,
          RoadClass::gravel_damaged, RoadClass::pavement};
}

}  // namespace roadsurf
