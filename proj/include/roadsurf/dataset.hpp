#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadsurf/errors.hpp"
#include "roadsurf/image.hpp"
#include "roadsurf/rng.hpp"
#include "roadsurf/road_class.hpp"
#include "roadsurf/weather.hpp"

namespace roadsurf::dataset {

// ---------------------------------------------------------------------------
// Generator parameters
// ---------------------------------------------------------------------------

// Stand-in physics for the five road classes. The contract is qualitative:
// pavement is rougher than gravel, gravel rougher than asphalt, and damaged
// variants superpose sparse impulses on their base class.
struct SynthParams {
  double roughness_asphalt = 0.3;   // m/s^2 white-noise scale before smoothing
  double roughness_gravel = 0.8;
  double roughness_pavement = 1.6;
  double impulse_rate_hz = 1.5;     // Poisson rate of damage impulses
  double impulse_magnitude = 8.0;   // impulse peak as a multiple of base roughness
  double bump_spacing_m = 0.5;      // pavement joint spacing
  double vehicle_speed_mps = 8.33;  // speed proxy; sets the bump frequency
  double bump_amplitude = 1.2;      // m/s^2
  double noise_floor = 0.02;        // sensor noise added to every stream

  void validate() const {
    if (!(roughness_pavement > roughness_gravel && roughness_gravel > roughness_asphalt)) {
      throw config_error("synth params must satisfy pavement > gravel > asphalt roughness");
    }
    if (impulse_rate_hz < 0 || impulse_magnitude < 0 || noise_floor < 0 ||
        bump_spacing_m <= 0 || vehicle_speed_mps < 0 || bump_amplitude < 0) {
      throw config_error("synth params out of range");
    }
  }
};

inline nlohmann::ordered_json to_json(const SynthParams& p) {
  nlohmann::ordered_json j;
  j["roughness_asphalt"] = p.roughness_asphalt;
  j["roughness_gravel"] = p.roughness_gravel;
  j["roughness_pavement"] = p.roughness_pavement;
  j["impulse_rate_hz"] = p.impulse_rate_hz;
  j["impulse_magnitude"] = p.impulse_magnitude;
  j["bump_spacing_m"] = p.bump_spacing_m;
  j["vehicle_speed_mps"] = p.vehicle_speed_mps;
  j["bump_amplitude"] = p.bump_amplitude;
  j["noise_floor"] = p.noise_floor;
  return j;
}

namespace detail {

inline RoadClass base_surface(RoadClass c) {
  switch (c) {
    case RoadClass::asphalt_damaged: return RoadClass::asphalt;
    case RoadClass::gravel_damaged: return RoadClass::gravel;
    default: return c;
  }
}

inline bool is_damaged(RoadClass c) {
  return c == RoadClass::asphalt_damaged || c == RoadClass::gravel_damaged;
}

inline double base_roughness(const SynthParams& p, RoadClass base) {
  switch (base) {
    case RoadClass::asphalt: return p.roughness_asphalt;
    case RoadClass::gravel: return p.roughness_gravel;
    case RoadClass::pavement: return p.roughness_pavement;
    default: return p.roughness_asphalt;
  }
}

// Smoothing width shapes the spectrum: asphalt is heavily low-passed, gravel
// stays broadband, pavement sits in between under its periodic bumps.
inline std::size_t smoothing_width(RoadClass base) {
  switch (base) {
    case RoadClass::asphalt: return 8;
    case RoadClass::gravel: return 2;
    case RoadClass::pavement: return 3;
    default: return 8;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Acceleration stream synthesis
// ---------------------------------------------------------------------------

// Band-limited noise with class-dependent amplitude and spectral width;
// damaged classes superpose Poisson-timed decaying bursts, pavement adds a
// periodic joint-bump component. The base component consumes the generator
// stream identically for a class and its damaged variant, so matched seeds
// differ only near impulse times.
inline std::vector<double> synth_accel(RoadClass road_class, double duration_s,
                                       double sample_rate, const SynthParams& params,
                                       std::uint64_t seed) {
  if (duration_s <= 0) throw config_error("synth_accel: duration must be positive");
  if (sample_rate <= 0) throw config_error("synth_accel: sample_rate must be positive");
  params.validate();

  const std::size_t n = static_cast<std::size_t>(duration_s * sample_rate);
  const RoadClass base = detail::base_surface(road_class);
  const double sigma = detail::base_roughness(params, base);
  const std::size_t width = detail::smoothing_width(base);

  Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(base) + 1)));
  std::vector<double> white(n);
  for (double& v : white) v = sigma * rng.normal();

  std::vector<double> out(n, 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += white[i];
    if (i >= width) acc -= white[i - width];
    out[i] = acc / static_cast<double>(std::min(i + 1, width));
  }

  if (base == RoadClass::pavement && params.bump_amplitude > 0) {
    const double bump_hz = params.vehicle_speed_mps / params.bump_spacing_m;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      const double phase = 2.0 * 3.141592653589793 * bump_hz * t;
      out[i] += params.bump_amplitude * (std::sin(phase) + 0.4 * std::sin(2.0 * phase));
    }
  }

  if (detail::is_damaged(road_class) && params.impulse_rate_hz > 0) {
    Rng imp = Rng(seed).fork(0x0dabDULL);
    const double peak = params.impulse_magnitude * sigma;
    double t = 0.0;
    while (true) {
      const double u = std::max(imp.uniform(), 1e-12);
      t += -std::log(u) / params.impulse_rate_hz;  // exponential inter-arrival
      if (t >= duration_s) break;
      const std::size_t start = static_cast<std::size_t>(t * sample_rate);
      const double sign = imp.uniform() < 0.5 ? -1.0 : 1.0;
      const std::size_t burst = static_cast<std::size_t>(0.1 * sample_rate);
      for (std::size_t j = 0; j < burst && start + j < n; ++j) {
        const double tau = static_cast<double>(j) / sample_rate;
        out[start + j] += sign * peak * std::exp(-tau / 0.03) *
                          std::cos(2.0 * 3.141592653589793 * 17.0 * tau);
      }
    }
  }

  if (params.noise_floor > 0) {
    Rng floor_rng = Rng(seed).fork(0xF100DULL);
    for (double& v : out) v += params.noise_floor * floor_rng.normal();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Camera-like texture synthesis
// ---------------------------------------------------------------------------

namespace detail {

// Low-frequency undulation from a bilinearly interpolated coarse grid.
inline void add_low_freq(image::ImageTensor& img, Rng& rng, double amplitude) {
  const int grid = 5;
  std::vector<double> coarse(static_cast<std::size_t>(grid) * grid);
  for (double& v : coarse) v = rng.uniform(-amplitude, amplitude);
  for (int y = 0; y < img.height; ++y) {
    const double gy = static_cast<double>(y) * (grid - 1) / std::max(1, img.height - 1);
    const int y0 = static_cast<int>(gy), y1 = std::min(y0 + 1, grid - 1);
    const double fy = gy - y0;
    for (int x = 0; x < img.width; ++x) {
      const double gx = static_cast<double>(x) * (grid - 1) / std::max(1, img.width - 1);
      const int x0 = static_cast<int>(gx), x1 = std::min(x0 + 1, grid - 1);
      const double fx = gx - x0;
      const double top = coarse[static_cast<std::size_t>(y0) * grid + x0] * (1 - fx) +
                         coarse[static_cast<std::size_t>(y0) * grid + x1] * fx;
      const double bot = coarse[static_cast<std::size_t>(y1) * grid + x0] * (1 - fx) +
                         coarse[static_cast<std::size_t>(y1) * grid + x1] * fx;
      img.at(y, x, 0) += top * (1 - fy) + bot * fy;
    }
  }
}

inline void add_damage_blobs(image::ImageTensor& img, Rng& rng) {
  const int blobs = 6 + static_cast<int>(rng.next_below(4));
  for (int b = 0; b < blobs; ++b) {
    const double cy = rng.uniform(0.1, 0.9) * img.height;
    const double cx = rng.uniform(0.1, 0.9) * img.width;
    const double ry = rng.uniform(0.06, 0.15) * img.height;
    const double rx = rng.uniform(0.06, 0.18) * img.width;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        if (dy * dy + dx * dx <= 1.0) img.at(y, x, 0) *= 0.2;
      }
    }
  }
}

}  // namespace detail

// Procedural single-channel textures with class-distinct statistics: asphalt
// is smooth low-variance gray, gravel bright speckle, pavement a periodic
// block pattern; damaged variants darken a few elliptical patches of the base
// texture and leave everything else untouched.
inline image::ImageTensor synth_image(RoadClass road_class, int size, const SynthParams& params,
                                      std::uint64_t seed) {
  if (size < 16) throw config_error("synth_image: size must be >= 16");
  params.validate();

  const RoadClass base = detail::base_surface(road_class);
  Rng rng(seed ^ (0xc2b2ae3d27d4eb4fULL * (static_cast<std::uint64_t>(base) + 1)));
  image::ImageTensor img = image::ImageTensor::zeros(size, size, 1);

  switch (base) {
    case RoadClass::asphalt: {
      for (double& v : img.pixels) v = 0.30 + 0.015 * rng.normal();
      detail::add_low_freq(img, rng, 0.02);
      break;
    }
    case RoadClass::gravel: {
      for (double& v : img.pixels) v = 0.70 + rng.uniform(-0.16, 0.16);
      detail::add_low_freq(img, rng, 0.04);
      break;
    }
    case RoadClass::pavement: {
      const int block = std::max(4, size / 8);
      for (int y = 0; y < size; ++y) {
        const int by = y / block;
        for (int x = 0; x < size; ++x) {
          const int bx = (x + (by % 2) * block / 2) / block;
          const bool mortar = (y % block) == 0 || ((x + (by % 2) * block / 2) % block) == 0;
          const double shade = 0.95 + 0.04 * (((by * 31 + bx * 17) % 7) / 6.0 - 0.5);
          img.at(y, x, 0) = mortar ? 0.45 : shade;
        }
      }
      for (double& v : img.pixels) v += 0.01 * rng.normal();
      break;
    }
    default:
      break;
  }

  if (detail::is_damaged(road_class)) {
    Rng blob_rng = Rng(seed).fork(0xB10BULL);
    detail::add_damage_blobs(img, blob_rng);
  }

  for (double& v : img.pixels) v = std::min(1.0, std::max(0.0, v));
  return img;
}

// ---------------------------------------------------------------------------
// Manifests and stratified splitting
// ---------------------------------------------------------------------------

enum class Split { train, val, test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw data_error("unknown split: " + s);
}

struct EntryInfo {
  std::string path;
  weather::Modality modality = weather::Modality::camera;
  RoadClass road_class = RoadClass::asphalt;
};

struct ManifestEntry {
  std::string path;
  weather::Modality modality = weather::Modality::camera;
  RoadClass road_class = RoadClass::asphalt;
  Split split = Split::train;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
  nlohmann::ordered_json generator_params;

  std::map<std::string, std::map<std::string, std::size_t>> class_counts() const {
    std::map<std::string, std::map<std::string, std::size_t>> counts;
    for (const char* s : {"train", "val", "test"}) {
      for (const char* c : kRoadClassNames) counts[s][c] = 0;
    }
    for (const ManifestEntry& e : entries) {
      ++counts[to_string(e.split)][to_string(e.road_class)];
    }
    return counts;
  }
};

// Per-(modality, class) shuffled assignment. Val and test take
// floor(ratio * n) entries each; the remainder goes to train.
inline DatasetManifest stratified_split(const std::vector<EntryInfo>& entries,
                                        double train_ratio, double val_ratio, double test_ratio,
                                        std::uint64_t seed) {
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9 || train_ratio < 0 ||
      val_ratio < 0 || test_ratio < 0) {
    throw config_error("split ratios must be non-negative and sum to 1");
  }
  if (entries.empty()) throw data_error("stratified_split: no entries");

  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;  // (modality, class) -> indices
  for (std::size_t i = 0; i < entries.size(); ++i) {
    groups[{static_cast<int>(entries[i].modality), static_cast<int>(entries[i].road_class)}]
        .push_back(i);
  }

  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.entries.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    manifest.entries[i] = {entries[i].path, entries[i].modality, entries[i].road_class,
                           Split::train};
  }

  for (auto& [key, idx] : groups) {
    if (idx.empty()) throw data_error("stratified_split: empty class group");
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(key.first * 64 +
                                                                       key.second + 1)));
    rng.shuffle(idx);
    const std::size_t n = idx.size();
    const std::size_t n_val = static_cast<std::size_t>(std::floor(val_ratio * n));
    const std::size_t n_test = static_cast<std::size_t>(std::floor(test_ratio * n));
    const std::size_t n_train = n - n_val - n_test;
    for (std::size_t j = 0; j < n; ++j) {
      Split s = Split::train;
      if (j >= n_train && j < n_train + n_val) s = Split::val;
      if (j >= n_train + n_val) s = Split::test;
      manifest.entries[idx[j]].split = s;
    }
  }
  return manifest;
}

inline nlohmann::ordered_json to_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["seed"] = m.seed;
  nlohmann::ordered_json enc;
  for (int i = 0; i < kNumRoadClasses; ++i) enc[kRoadClassNames[i]] = i;
  j["class_encoding"] = std::move(enc);
  if (!m.generator_params.is_null()) j["generator_params"] = m.generator_params;
  j["class_counts"] = m.class_counts();
  auto arr = nlohmann::ordered_json::array();
  for (const ManifestEntry& e : m.entries) {
    nlohmann::ordered_json je;
    je["path"] = e.path;
    je["modality"] = weather::to_string(e.modality);
    je["road_class"] = to_string(e.road_class);
    je["split"] = to_string(e.split);
    arr.push_back(std::move(je));
  }
  j["entries"] = std::move(arr);
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  try {
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("generator_params")) m.generator_params = j.at("generator_params");
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.path = je.at("path").get<std::string>();
      const std::string mod = je.at("modality").get<std::string>();
      if (mod == "camera") {
        e.modality = weather::Modality::camera;
      } else if (mod == "acceleration") {
        e.modality = weather::Modality::acceleration;
      } else {
        throw data_error("unknown modality in manifest: " + mod);
      }
      e.road_class = road_class_from_string(je.at("road_class").get<std::string>());
      e.split = split_from_string(je.at("split").get<std::string>());
      m.entries.push_back(std::move(e));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace roadsurf::dataset
