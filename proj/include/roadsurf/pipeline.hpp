#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadsurf/dataset.hpp"
#include "roadsurf/errors.hpp"
#include "roadsurf/eval.hpp"
#include "roadsurf/neural.hpp"
#include "roadsurf/signal.hpp"
#include "roadsurf/weather.hpp"

namespace roadsurf::pipeline {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct SignalConfig {
  double sample_rate = 100.0;   // Hz
  std::size_t window_len = 256; // samples per classification window
  std::size_t hop = 256;        // samples between windows
  std::size_t fft_size = 64;
  std::size_t frame_hop = 16;
  signal::Taper taper = signal::Taper::hann;
  signal::Scaling scaling = signal::Scaling::log1p;
  int image_size = 64;          // spectrogram images are image_size x image_size
};

struct PipelineConfig {
  std::string data_root = "data";
  std::string model_store = "models";
  std::string rules_path = "weather_rules.json";
  SignalConfig signal;
  neural::TrainConfig train;
  std::uint64_t seed = 0;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& known,
                                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw config_error("unknown config key '" + key + "' in " + where);
    }
  }
}

}  // namespace detail

inline signal::Taper taper_from_string(const std::string& s) {
  if (s == "hann") return signal::Taper::hann;
  if (s == "rectangular") return signal::Taper::rectangular;
  throw config_error("unknown taper: " + s);
}

inline signal::Scaling scaling_from_string(const std::string& s) {
  if (s == "log1p") return signal::Scaling::log1p;
  if (s == "linear") return signal::Scaling::linear;
  throw config_error("unknown scaling: " + s);
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  try {
    detail::reject_unknown_keys(
        j, {"data_root", "model_store", "rules_path", "seed", "signal", "train"}, "config root");
    if (j.contains("data_root")) cfg.data_root = j.at("data_root").get<std::string>();
    if (j.contains("model_store")) cfg.model_store = j.at("model_store").get<std::string>();
    if (j.contains("rules_path")) cfg.rules_path = j.at("rules_path").get<std::string>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("signal")) {
      const auto& js = j.at("signal");
      detail::reject_unknown_keys(js,
                                  {"sample_rate", "window_len", "hop", "fft_size", "frame_hop",
                                   "taper", "scaling", "image_size"},
                                  "config.signal");
      if (js.contains("sample_rate")) cfg.signal.sample_rate = js.at("sample_rate").get<double>();
      if (js.contains("window_len")) cfg.signal.window_len = js.at("window_len").get<std::size_t>();
      if (js.contains("hop")) cfg.signal.hop = js.at("hop").get<std::size_t>();
      if (js.contains("fft_size")) cfg.signal.fft_size = js.at("fft_size").get<std::size_t>();
      if (js.contains("frame_hop")) cfg.signal.frame_hop = js.at("frame_hop").get<std::size_t>();
      if (js.contains("taper")) cfg.signal.taper = taper_from_string(js.at("taper"));
      if (js.contains("scaling")) cfg.signal.scaling = scaling_from_string(js.at("scaling"));
      if (js.contains("image_size")) cfg.signal.image_size = js.at("image_size").get<int>();
    }
    if (j.contains("train")) {
      const auto& jt = j.at("train");
      detail::reject_unknown_keys(
          jt, {"learning_rate", "batch_size", "max_epochs", "patience", "seed"}, "config.train");
      if (jt.contains("learning_rate")) cfg.train.learning_rate = jt.at("learning_rate");
      if (jt.contains("batch_size")) cfg.train.batch_size = jt.at("batch_size");
      if (jt.contains("max_epochs")) cfg.train.max_epochs = jt.at("max_epochs");
      if (jt.contains("patience")) cfg.train.patience = jt.at("patience");
      if (jt.contains("seed")) cfg.train.seed = jt.at("seed");
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("malformed config: ") + e.what());
  }
  if (cfg.data_root.empty() || cfg.model_store.empty() || cfg.rules_path.empty()) {
    throw config_error("config paths must be non-empty");
  }
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Shared preprocessing
// ---------------------------------------------------------------------------

// One classification window of z-axis samples -> spectrogram image.
inline image::ImageTensor spectrogram_image(const signal::AccelWindow& window,
                                            const SignalConfig& cfg) {
  const signal::Spectrogram spec = signal::stft(window, cfg.fft_size, cfg.frame_hop, cfg.taper);
  return signal::to_image(spec, cfg.image_size, cfg.image_size, cfg.scaling);
}

// ---------------------------------------------------------------------------
// Drive logs
// ---------------------------------------------------------------------------

struct DriveLogRecord {
  double timestamp_s = 0.0;
  double accel_z = 0.0;
  std::string image;  // optional path, may be empty
  weather::WeatherReading reading;
};

inline const char* kDriveLogHeader =
    "timestamp_s,accel_z,image,wind,humidity,light,temperature,rain";

inline std::vector<DriveLogRecord> read_drive_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open drive log: " + path);
  std::string line;
  if (!std::getline(in, line)) throw data_error("empty drive log: " + path);
  if (line.size() && line.back() == '\r') line.pop_back();
  if (line != kDriveLogHeader) {
    throw data_error(path + ":1: expected header '" + std::string(kDriveLogHeader) + "'");
  }
  std::vector<DriveLogRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (line.back() == ',') fields.push_back("");
    if (fields.size() != 8) {
      throw data_error(path + ":" + std::to_string(lineno) + ": expected 8 fields, got " +
                       std::to_string(fields.size()));
    }
    DriveLogRecord rec;
    try {
      rec.timestamp_s = std::stod(fields[0]);
      rec.accel_z = std::stod(fields[1]);
      rec.image = fields[2];
      rec.reading.wind_speed = std::stod(fields[3]);
      rec.reading.humidity = std::stod(fields[4]);
      rec.reading.light_level = std::stod(fields[5]);
      rec.reading.temperature = std::stod(fields[6]);
      rec.reading.rain_sensor = std::stod(fields[7]);
    } catch (const std::exception&) {
      throw data_error(path + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    if (!out.empty() && !(rec.timestamp_s > out.back().timestamp_s)) {
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": timestamps must be strictly increasing");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct SimulationRow {
  double window_start = 0.0;  // timestamp of the window's first sample
  weather::WeatherCondition condition;
  weather::Modality modality;
  std::string model_key;
  RoadClass predicted_class;
  double probability = 0.0;
  std::map<std::string, double> activations;  // per-condition fuzzy activations
};

class ModelStore {
 public:
  explicit ModelStore(std::string dir) : dir_(std::move(dir)) {}

  const neural::Model& get(const std::string& key) {
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const std::filesystem::path path = std::filesystem::path(dir_) / (key + ".rsm");
    if (!std::filesystem::exists(path)) {
      throw model_error("no model '" + key + "' in store " + dir_ + " (expected " +
                        path.string() + ")");
    }
    return cache_.emplace(key, neural::load_model(path.string())).first->second;
  }

  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::map<std::string, neural::Model> cache_;
};

// Replays a drive log per the routing scheme: each window is classified by
// weather (from the window's first record), routed to a modality, and the
// matching per-condition model predicts the road class. Weather is
// re-evaluated for every window.
inline std::vector<SimulationRow> simulate(const std::vector<DriveLogRecord>& log,
                                           const fuzzy::FuzzySystem& system, ModelStore& store,
                                           const SignalConfig& cfg,
                                           const std::string& image_base_dir = "") {
  std::vector<SimulationRow> rows;
  if (log.empty()) return rows;
  if (log.size() < cfg.window_len) return rows;  // no complete window

  std::vector<double> accel(log.size());
  for (std::size_t i = 0; i < log.size(); ++i) accel[i] = log[i].accel_z;
  const std::vector<signal::AccelWindow> windows =
      signal::segment(accel, cfg.sample_rate, cfg.window_len, cfg.hop);

  for (const signal::AccelWindow& w : windows) {
    const DriveLogRecord& first = log[w.start_index];
    const weather::RoutingDecision decision = weather::decide(system, first.reading);
    const neural::Model& model = store.get(decision.model_key);

    image::ImageTensor input;
    if (decision.modality == weather::Modality::acceleration) {
      SignalConfig local = cfg;
      local.image_size = model.spec().input.h;
      input = spectrogram_image(w, local);
    } else {
      if (first.image.empty()) {
        throw data_error("drive log window at t=" + std::to_string(first.timestamp_s) +
                         " routed to camera but has no image path");
      }
      std::filesystem::path p = first.image;
      if (!image_base_dir.empty() && p.is_relative()) {
        p = std::filesystem::path(image_base_dir) / p;
      }
      input = image::read_image(p.string());
      if (input.height != model.spec().input.h || input.width != model.spec().input.w) {
        input = image::resize_bilinear(input, model.spec().input.h, model.spec().input.w);
      }
    }
    auto [cls, probs] = neural::predict(model, input);

    SimulationRow row;
    row.window_start = first.timestamp_s;
    row.condition = decision.condition;
    row.modality = decision.modality;
    row.model_key = decision.model_key;
    row.predicted_class = cls;
    row.probability = probs[static_cast<std::size_t>(cls)];
    row.activations = decision.activations;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_simulation_csv(std::ostream& out, const std::vector<SimulationRow>& rows) {
  out << "window_start,condition,modality,model_key,predicted_class,probability\n";
  char buf[64];
  for (const SimulationRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.window_start);
    out << buf << "," << weather::to_string(r.condition) << "," << weather::to_string(r.modality)
        << "," << r.model_key << "," << to_string(r.predicted_class) << ",";
    std::snprintf(buf, sizeof buf, "%.6f", r.probability);
    out << buf << "\n";
  }
}

// Per-window fuzzy activation trace, one column per weather condition.
inline void write_activation_trace_csv(std::ostream& out,
                                       const std::vector<SimulationRow>& rows) {
  out << "window_start,sunny,rainy,foggy,night,day\n";
  char buf[64];
  for (const SimulationRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.window_start);
    out << buf;
    for (const char* label : {"sunny", "rainy", "foggy", "night", "day"}) {
      auto it = r.activations.find(label);
      std::snprintf(buf, sizeof buf, ",%.6f", it == r.activations.end() ? 0.0 : it->second);
      out << buf;
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Dataset loading / evaluation against a manifest
// ---------------------------------------------------------------------------

inline std::filesystem::path resolve_against(const std::string& base_dir,
                                             const std::string& path) {
  std::filesystem::path p = path;
  if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
  return p;
}

// Loads every manifest entry of the given modality and split as a training
// sample. Entries must already point at image files (accel entries are
// converted by the preprocess step).
inline std::vector<neural::Sample> load_samples(const dataset::DatasetManifest& manifest,
                                                const std::string& base_dir,
                                                weather::Modality modality, dataset::Split split) {
  std::vector<neural::Sample> out;
  for (const dataset::ManifestEntry& e : manifest.entries) {
    if (e.modality != modality || e.split != split) continue;
    neural::Sample s;
    s.image = image::read_image(resolve_against(base_dir, e.path).string());
    s.label = static_cast<int>(e.road_class);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::pair<eval::ConfusionMatrix, eval::ClassificationReport> evaluate_model(
    const neural::Model& model, const std::vector<neural::Sample>& samples) {
  if (samples.empty()) throw data_error("evaluate: no samples in the requested split");
  std::vector<int> truth, pred;
  truth.reserve(samples.size());
  pred.reserve(samples.size());
  neural::Workspace ws = model.make_workspace();
  for (const neural::Sample& s : samples) {
    const std::vector<double>& probs = model.forward_sample(s.image, ws);
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
      if (probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(best)]) best = i;
    }
    truth.push_back(s.label);
    pred.push_back(best);
  }
  std::vector<std::string> labels(kRoadClassNames.begin(), kRoadClassNames.end());
  eval::ConfusionMatrix cm = eval::confusion(truth, pred, labels);
  return {cm, eval::report(cm)};
}

// ---------------------------------------------------------------------------
// Advisory model-store lock
// ---------------------------------------------------------------------------

class StoreLock {
 public:
  explicit StoreLock(const std::string& store_dir) {
    std::filesystem::create_directories(store_dir);
    path_ = std::filesystem::path(store_dir) / ".lock";
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    if (!f) {
      throw model_error("model store " + store_dir +
                        " is locked by another command (remove " + path_.string() +
                        " if stale)");
    }
    std::fclose(f);
  }

  ~StoreLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace roadsurf::pipeline
