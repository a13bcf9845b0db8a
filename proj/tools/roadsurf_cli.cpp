// Command-line surface for the road-surface classification pipeline:
// rule-base export, weather classification, synthetic data generation,
// splitting, preprocessing, training, evaluation and drive-log simulation.
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 model error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "roadsurf/dataset.hpp"
#include "roadsurf/errors.hpp"
#include "roadsurf/eval.hpp"
#include "roadsurf/fuzzy.hpp"
#include "roadsurf/image.hpp"
#include "roadsurf/neural.hpp"
#include "roadsurf/pipeline.hpp"
#include "roadsurf/signal.hpp"
#include "roadsurf/weather.hpp"

namespace fs = std::filesystem;
using namespace roadsurf;

namespace {

nlohmann::ordered_json entries_to_json(const std::vector<dataset::EntryInfo>& entries,
                                       std::uint64_t seed, const dataset::SynthParams& params) {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["generator_params"] = dataset::to_json(params);
  auto arr = nlohmann::ordered_json::array();
  for (const dataset::EntryInfo& e : entries) {
    nlohmann::ordered_json je;
    je["path"] = e.path;
    je["modality"] = weather::to_string(e.modality);
    je["road_class"] = to_string(e.road_class);
    arr.push_back(std::move(je));
  }
  j["entries"] = std::move(arr);
  return j;
}

std::vector<dataset::EntryInfo> entries_from_json(const nlohmann::json& j) {
  std::vector<dataset::EntryInfo> out;
  try {
    for (const auto& je : j.at("entries")) {
      dataset::EntryInfo e;
      e.path = je.at("path").get<std::string>();
      const std::string mod = je.at("modality").get<std::string>();
      if (mod == "camera") {
        e.modality = weather::Modality::camera;
      } else if (mod == "acceleration") {
        e.modality = weather::Modality::acceleration;
      } else {
        throw data_error("unknown modality in entry list: " + mod);
      }
      e.road_class = road_class_from_string(je.at("road_class").get<std::string>());
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed entry list: ") + e.what());
  }
  return out;
}

nlohmann::json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw data_error(std::string("cannot open ") + what + ": " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string(what) + " parse error in " + path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write file: " + path);
  out << text;
  if (!out) throw data_error("short write on file: " + path);
}

// Applies config-file values to flags the user did not set explicitly.
struct SignalFlags {
  double sample_rate = 100.0;
  std::size_t window_len = 256;
  std::size_t hop = 256;
  std::size_t fft_size = 64;
  std::size_t frame_hop = 16;
  std::string taper = "hann";
  std::string scaling = "log1p";
  int image_size = 64;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--rate", sample_rate, "accelerometer sample rate, Hz");
    cmd->add_option("--window", window_len, "classification window length, samples");
    cmd->add_option("--hop", hop, "hop between windows, samples");
    cmd->add_option("--fft", fft_size, "STFT size, power of two");
    cmd->add_option("--frame-hop", frame_hop, "hop between STFT frames, samples");
    cmd->add_option("--taper", taper, "STFT taper: hann|rectangular");
    cmd->add_option("--scaling", scaling, "magnitude scaling: log1p|linear");
    cmd->add_option("--image-size", image_size, "spectrogram image side, pixels");
  }

  pipeline::SignalConfig resolve(CLI::App* cmd, const pipeline::PipelineConfig& cfg) const {
    pipeline::SignalConfig s = cfg.signal;
    if (cmd->count("--rate")) s.sample_rate = sample_rate;
    if (cmd->count("--window")) s.window_len = window_len;
    if (cmd->count("--hop")) s.hop = hop;
    if (cmd->count("--fft")) s.fft_size = fft_size;
    if (cmd->count("--frame-hop")) s.frame_hop = frame_hop;
    if (cmd->count("--taper")) s.taper = pipeline::taper_from_string(taper);
    if (cmd->count("--scaling")) s.scaling = pipeline::scaling_from_string(scaling);
    if (cmd->count("--image-size")) s.image_size = image_size;
    return s;
  }
};

pipeline::PipelineConfig load_config_opt(const std::string& config_path) {
  if (config_path.empty()) return pipeline::PipelineConfig{};
  return pipeline::load_config(config_path);
}

std::string model_key_for(const std::string& modality, const std::string& condition) {
  return modality + "-" + condition;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int cmd_export_rules(const std::string& out_path) {
  const fuzzy::FuzzySystem system = weather::build_weather_system();
  std::ofstream out(out_path);
  if (!out) throw config_error("cannot write rule base to " + out_path);
  out << fuzzy::to_json(system).dump(2) << "\n";
  if (!out) throw config_error("short write on rule base file " + out_path);
  std::cout << "wrote " << system.rules().size() << " rules to " << out_path << "\n";
  return 0;
}

int cmd_classify_weather(const weather::WeatherReading& reading, const std::string& rules_path) {
  fuzzy::FuzzySystem system = rules_path.empty()
                                  ? weather::build_weather_system()
                                  : fuzzy::system_from_json(read_json_file(rules_path.c_str(),
                                                                           "rule base"));
  const weather::RoutingDecision d = weather::decide(system, reading);
  std::cout << "condition: " << weather::to_string(d.condition) << "\n";
  std::cout << "modality: " << weather::to_string(d.modality) << "\n";
  std::cout << "model_key: " << d.model_key << "\n";
  std::cout << "activations:\n";
  std::vector<std::pair<std::string, double>> acts(d.activations.begin(), d.activations.end());
  std::sort(acts.begin(), acts.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  char buf[64];
  for (const auto& [label, a] : acts) {
    std::snprintf(buf, sizeof buf, "  %-8s %.6f", label.c_str(), a);
    std::cout << buf << "\n";
  }
  return 0;
}

int cmd_synth(const std::string& root, int per_class, const std::string& modalities,
              const pipeline::SignalConfig& sig, int camera_image_size, std::uint64_t seed) {
  if (per_class < 1) throw config_error("--per-class must be >= 1");
  const bool want_camera = modalities.find("camera") != std::string::npos;
  const bool want_accel = modalities.find("acceleration") != std::string::npos;
  if (!want_camera && !want_accel) {
    throw config_error("--modalities must name camera and/or acceleration");
  }

  const dataset::SynthParams params;
  std::vector<dataset::EntryInfo> entries;
  fs::create_directories(fs::path(root));
  if (want_camera) fs::create_directories(fs::path(root) / "camera");
  if (want_accel) fs::create_directories(fs::path(root) / "accel");

  char name[128];
  for (RoadClass rc : all_road_classes()) {
    for (int i = 0; i < per_class; ++i) {
      const std::uint64_t entry_seed =
          seed ^ (0x517cc1b727220a95ULL * (static_cast<std::uint64_t>(rc) * 1000003ULL + i + 1));
      if (want_camera) {
        std::snprintf(name, sizeof name, "camera/%s_%04d.pgm", to_string(rc), i);
        image::write_pgm((fs::path(root) / name).string(),
                         dataset::synth_image(rc, camera_image_size, params, entry_seed));
        entries.push_back({name, weather::Modality::camera, rc});
      }
      if (want_accel) {
        std::snprintf(name, sizeof name, "accel/%s_%04d.csv", to_string(rc), i);
        const double duration = static_cast<double>(sig.window_len) / sig.sample_rate;
        const std::vector<double> stream =
            dataset::synth_accel(rc, duration, sig.sample_rate, params, entry_seed);
        std::vector<signal::AccelRecord> recs(stream.size());
        for (std::size_t s = 0; s < stream.size(); ++s) {
          recs[s] = {static_cast<double>(s) / sig.sample_rate, stream[s], rc};
        }
        signal::write_accel_csv((fs::path(root) / name).string(), recs);
        entries.push_back({name, weather::Modality::acceleration, rc});
      }
    }
  }

  const std::string out_path = (fs::path(root) / "entries.json").string();
  write_text_file(out_path, entries_to_json(entries, seed, params).dump(2) + "\n");
  std::cout << "wrote " << entries.size() << " entries to " << out_path << "\n";
  return 0;
}

int cmd_split(const std::string& entries_path, const std::string& out_path, double train_ratio,
              double val_ratio, double test_ratio, std::uint64_t seed) {
  const nlohmann::json j = read_json_file(entries_path, "entry list");
  const std::vector<dataset::EntryInfo> entries = entries_from_json(j);
  dataset::DatasetManifest manifest =
      dataset::stratified_split(entries, train_ratio, val_ratio, test_ratio, seed);
  if (j.contains("generator_params")) manifest.generator_params = j.at("generator_params");
  write_text_file(out_path, dataset::to_json(manifest).dump(2) + "\n");
  auto counts = manifest.class_counts();
  std::cout << "split " << manifest.entries.size() << " entries; per-split totals:";
  for (const char* s : {"train", "val", "test"}) {
    std::size_t total = 0;
    for (const auto& [cls, n] : counts[s]) total += n;
    std::cout << " " << s << "=" << total;
  }
  std::cout << "\n";
  return 0;
}

int cmd_preprocess(const std::string& manifest_path, const std::string& out_path,
                   const std::string& spectro_dir, const pipeline::SignalConfig& sig) {
  dataset::DatasetManifest manifest =
      dataset::manifest_from_json(read_json_file(manifest_path, "manifest"));
  const std::string base_dir = fs::path(manifest_path).parent_path().string();
  const fs::path out_base = fs::path(out_path).parent_path();
  fs::path spec_dir = spectro_dir.empty() ? (out_base / "spectrograms") : fs::path(spectro_dir);
  fs::create_directories(spec_dir);

  std::size_t converted = 0;
  for (dataset::ManifestEntry& e : manifest.entries) {
    if (e.modality != weather::Modality::acceleration) continue;
    const fs::path src = pipeline::resolve_against(base_dir, e.path);
    const std::vector<signal::AccelRecord> recs = signal::read_accel_csv(src.string());
    std::vector<double> samples(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) samples[i] = recs[i].accel_z;
    const std::vector<signal::AccelWindow> windows =
        signal::segment(samples, sig.sample_rate, sig.window_len, sig.hop);
    const image::ImageTensor img = pipeline::spectrogram_image(windows.front(), sig);
    const fs::path dst = spec_dir / (src.stem().string() + ".pgm");
    image::write_pgm(dst.string(), img);
    e.path = fs::relative(dst, out_base.empty() ? fs::path(".") : out_base).string();
    ++converted;
  }
  write_text_file(out_path, dataset::to_json(manifest).dump(2) + "\n");
  std::cout << "converted " << converted << " acceleration entries; manifest: " << out_path
            << "\n";
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& modality_name,
              const std::string& condition, const std::string& preset, const std::string& store,
              const neural::TrainConfig& cfg, const std::string& init_from) {
  if (modality_name != "camera" && modality_name != "acceleration") {
    throw config_error("--modality must be camera or acceleration");
  }
  const weather::Modality modality = modality_name == "camera"
                                         ? weather::Modality::camera
                                         : weather::Modality::acceleration;
  weather::condition_from_string(condition);  // validates

  const dataset::DatasetManifest manifest =
      dataset::manifest_from_json(read_json_file(manifest_path, "manifest"));
  const std::string base_dir = fs::path(manifest_path).parent_path().string();
  const std::vector<neural::Sample> train_set =
      pipeline::load_samples(manifest, base_dir, modality, dataset::Split::train);
  const std::vector<neural::Sample> val_set =
      pipeline::load_samples(manifest, base_dir, modality, dataset::Split::val);
  if (train_set.empty()) throw data_error("no " + modality_name + " entries in the train split");
  if (val_set.empty()) throw data_error("no " + modality_name + " entries in the val split");

  const image::ImageTensor& first = train_set.front().image;
  const neural::ModelSpec spec = neural::ModelSpec::preset(
      preset, {first.height, first.width, first.channels}, kNumRoadClasses);

  pipeline::StoreLock lock(store);
  std::vector<double> warm_params;
  const std::vector<double>* warm = nullptr;
  if (!init_from.empty()) {
    const neural::Model base = neural::load_model(init_from);
    if (neural::to_json(base.spec()).dump() != neural::to_json(spec).dump()) {
      throw model_error("--init-from model architecture does not match the requested preset");
    }
    warm_params = base.flat_params();
    warm = &warm_params;
  }
  const neural::TrainedModel trained = neural::train(spec, train_set, val_set, cfg, warm);

  const std::string key = model_key_for(modality_name, condition);
  const fs::path model_path = fs::path(store) / (key + ".rsm");
  neural::save_model(model_path.string(), trained.model);

  nlohmann::ordered_json report;
  report["model_key"] = key;
  report["preset"] = preset;
  report["epochs_run"] = trained.meta.epochs_run;
  report["best_epoch"] = trained.meta.best_epoch;
  report["stopped_early"] = trained.meta.stopped_early;
  report["patience"] = cfg.patience;
  report["learning_rate"] = cfg.learning_rate;
  report["batch_size"] = cfg.batch_size;
  report["seed"] = cfg.seed;
  report["train_losses"] = trained.meta.train_losses;
  report["val_losses"] = trained.meta.val_losses;
  const fs::path report_path = fs::path(store) / (key + "-train-report.json");
  write_text_file(report_path.string(), report.dump(2) + "\n");

  // loss curves as CSV, for scripted plotting
  std::ostringstream losses;
  losses << "epoch,train_loss,val_loss\n";
  char row[96];
  for (std::size_t e = 0; e < trained.meta.train_losses.size(); ++e) {
    std::snprintf(row, sizeof row, "%zu,%.12g,%.12g\n", e + 1, trained.meta.train_losses[e],
                  trained.meta.val_losses[e]);
    losses << row;
  }
  write_text_file((fs::path(store) / (key + "-losses.csv")).string(), losses.str());

  std::cout << "trained " << key << ": " << trained.meta.epochs_run << " epochs, best epoch "
            << trained.meta.best_epoch << (trained.meta.stopped_early ? " (early stop)" : "")
            << ", model " << model_path.string() << "\n";
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& manifest_path,
                 const std::string& modality_name, const std::string& split_name,
                 const std::string& json_out, const std::string& table_out) {
  if (modality_name != "camera" && modality_name != "acceleration") {
    throw config_error("--modality must be camera or acceleration");
  }
  const weather::Modality modality = modality_name == "camera"
                                         ? weather::Modality::camera
                                         : weather::Modality::acceleration;
  const dataset::Split split = dataset::split_from_string(split_name);
  const neural::Model model = neural::load_model(model_path);
  const dataset::DatasetManifest manifest =
      dataset::manifest_from_json(read_json_file(manifest_path, "manifest"));
  const std::string base_dir = fs::path(manifest_path).parent_path().string();
  const std::vector<neural::Sample> samples =
      pipeline::load_samples(manifest, base_dir, modality, split);

  auto [cm, rep] = pipeline::evaluate_model(model, samples);
  std::cout << eval::to_text_table(cm) << "\n" << eval::to_text_table(rep);

  if (!json_out.empty()) {
    nlohmann::ordered_json j;
    j["confusion_matrix"] = eval::to_json(cm);
    j["report"] = eval::to_json(rep);
    write_text_file(json_out, j.dump(2) + "\n");
  }
  if (!table_out.empty()) {
    write_text_file(table_out, eval::to_text_table(cm) + "\n" + eval::to_text_table(rep));
  }
  return 0;
}

int cmd_simulate(const std::string& log_path, const std::string& store,
                 const std::string& rules_path, const std::string& out_path,
                 const std::string& trace_path, const pipeline::SignalConfig& sig) {
  const std::vector<pipeline::DriveLogRecord> log = pipeline::read_drive_log(log_path);
  fuzzy::FuzzySystem system = rules_path.empty()
                                  ? weather::build_weather_system()
                                  : fuzzy::system_from_json(read_json_file(rules_path.c_str(),
                                                                           "rule base"));
  pipeline::ModelStore models(store);
  const std::string log_dir = fs::path(log_path).parent_path().string();
  const std::vector<pipeline::SimulationRow> rows =
      pipeline::simulate(log, system, models, sig, log_dir);
  if (out_path.empty()) {
    pipeline::write_simulation_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path);
    if (!out) throw data_error("cannot write simulation output: " + out_path);
    pipeline::write_simulation_csv(out, rows);
    std::cout << "wrote " << rows.size() << " decisions to " << out_path << "\n";
  }
  if (!trace_path.empty()) {
    std::ofstream trace(trace_path);
    if (!trace) throw data_error("cannot write activation trace: " + trace_path);
    pipeline::write_activation_trace_csv(trace, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"road surface classification with fuzzy weather-based modality routing"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; explicit flags win")
      ->envname("ROADSURF_CONFIG");

  // export-rules
  auto* c_export = app.add_subcommand("export-rules", "write the weather rule base as JSON");
  std::string export_out = "weather_rules.json";
  c_export->add_option("--out", export_out, "output path");

  // classify-weather
  auto* c_classify = app.add_subcommand("classify-weather", "classify a weather reading");
  weather::WeatherReading reading;
  std::string classify_rules;
  c_classify->add_option("--wind", reading.wind_speed, "wind speed, 0-10")->required();
  c_classify->add_option("--humidity", reading.humidity, "humidity, percent")->required();
  c_classify->add_option("--light", reading.light_level, "light level, percent")->required();
  c_classify->add_option("--temperature", reading.temperature, "temperature, deg C")->required();
  c_classify->add_option("--rain", reading.rain_sensor, "rain sensor, percent")->required();
  c_classify->add_option("--rules", classify_rules, "rule base JSON (default: built-in)");

  // synth
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic five-class dataset");
  std::string synth_root = "data";
  int per_class = 100;
  std::string modalities = "camera,acceleration";
  int camera_size = 64;
  std::uint64_t synth_seed = 0;
  SignalFlags synth_sig;
  c_synth->add_option("--root", synth_root, "output directory");
  c_synth->add_option("--per-class", per_class, "entries per class per modality");
  c_synth->add_option("--modalities", modalities, "camera,acceleration subset");
  c_synth->add_option("--camera-size", camera_size, "camera image side, pixels");
  c_synth->add_option("--seed", synth_seed, "generator seed");
  synth_sig.add_to(c_synth);

  // split
  auto* c_split = app.add_subcommand("split", "stratified train/val/test split");
  std::string split_entries, split_out = "manifest.json";
  double r_train = 0.70, r_val = 0.15, r_test = 0.15;
  std::uint64_t split_seed = 0;
  c_split->add_option("--entries", split_entries, "entries.json from synth")->required();
  c_split->add_option("--out", split_out, "manifest output path");
  c_split->add_option("--train", r_train, "train ratio");
  c_split->add_option("--val", r_val, "val ratio");
  c_split->add_option("--test", r_test, "test ratio");
  c_split->add_option("--seed", split_seed, "shuffle seed");

  // preprocess
  auto* c_pre = app.add_subcommand("preprocess",
                                   "convert acceleration entries to spectrogram images");
  std::string pre_manifest, pre_out, pre_dir;
  SignalFlags pre_sig;
  c_pre->add_option("--manifest", pre_manifest, "input manifest")->required();
  c_pre->add_option("--out", pre_out, "output manifest")->required();
  c_pre->add_option("--spectrogram-dir", pre_dir, "where spectrogram images go");
  pre_sig.add_to(c_pre);

  // train
  auto* c_train = app.add_subcommand("train", "train a per-condition model");
  std::string train_manifest, train_modality, train_condition, train_preset = "mini-vgg";
  std::string train_store = "models", init_from;
  double lr = 0.0001;
  int batch = 16, max_epochs = 100, patience = 10;
  std::uint64_t train_seed = 0;
  c_train->add_option("--manifest", train_manifest, "dataset manifest")->required();
  c_train->add_option("--modality", train_modality, "camera|acceleration")->required();
  c_train->add_option("--condition", train_condition, "weather condition for the model key")
      ->required();
  c_train->add_option("--preset", train_preset, "mini-vgg|mini-alexnet");
  c_train->add_option("--store", train_store, "model store directory");
  c_train->add_option("--lr", lr, "learning rate");
  c_train->add_option("--batch", batch, "batch size");
  c_train->add_option("--max-epochs", max_epochs, "epoch cap");
  c_train->add_option("--patience", patience, "early stopping patience, epochs");
  c_train->add_option("--seed", train_seed, "init/shuffle seed");
  c_train->add_option("--init-from", init_from, "warm-start model path");

  // evaluate
  auto* c_eval = app.add_subcommand("evaluate", "confusion matrix and classification report");
  std::string eval_model, eval_manifest, eval_modality, eval_split = "test";
  std::string eval_json, eval_table;
  c_eval->add_option("--model", eval_model, "model file")->required();
  c_eval->add_option("--manifest", eval_manifest, "dataset manifest")->required();
  c_eval->add_option("--modality", eval_modality, "camera|acceleration")->required();
  c_eval->add_option("--split", eval_split, "train|val|test");
  c_eval->add_option("--json-out", eval_json, "write report JSON here");
  c_eval->add_option("--table-out", eval_table, "write text tables here");

  // simulate
  auto* c_sim = app.add_subcommand("simulate", "replay a drive log through the full pipeline");
  std::string sim_log, sim_store = "models", sim_rules, sim_out, sim_trace;
  SignalFlags sim_sig;
  c_sim->add_option("--log", sim_log, "drive log CSV")->required();
  c_sim->add_option("--store", sim_store, "model store directory");
  c_sim->add_option("--rules", sim_rules, "rule base JSON (default: built-in)");
  c_sim->add_option("--out", sim_out, "decision CSV output (default: stdout)");
  c_sim->add_option("--trace-out", sim_trace, "per-window weather activation CSV");
  sim_sig.add_to(c_sim);

  try {
    app.parse(argc, argv);

    const pipeline::PipelineConfig cfg = load_config_opt(config_path);

    if (*c_export) return cmd_export_rules(export_out);
    if (*c_classify) return cmd_classify_weather(reading, classify_rules);
    if (*c_synth) {
      const std::uint64_t seed = c_synth->count("--seed") ? synth_seed : cfg.seed;
      return cmd_synth(synth_root, per_class, modalities, synth_sig.resolve(c_synth, cfg),
                       camera_size, seed);
    }
    if (*c_split) {
      const std::uint64_t seed = c_split->count("--seed") ? split_seed : cfg.seed;
      return cmd_split(split_entries, split_out, r_train, r_val, r_test, seed);
    }
    if (*c_pre) return cmd_preprocess(pre_manifest, pre_out, pre_dir, pre_sig.resolve(c_pre, cfg));
    if (*c_train) {
      neural::TrainConfig tc = cfg.train;
      if (c_train->count("--lr")) tc.learning_rate = lr;
      if (c_train->count("--batch")) tc.batch_size = batch;
      if (c_train->count("--max-epochs")) tc.max_epochs = max_epochs;
      if (c_train->count("--patience")) tc.patience = patience;
      if (c_train->count("--seed")) tc.seed = train_seed;
      const std::string store = c_train->count("--store") ? train_store : cfg.model_store;
      return cmd_train(train_manifest, train_modality, train_condition, train_preset, store, tc,
                       init_from);
    }
    if (*c_eval) {
      return cmd_evaluate(eval_model, eval_manifest, eval_modality, eval_split, eval_json,
                          eval_table);
    }
    if (*c_sim) {
      const std::string store = c_sim->count("--store") ? sim_store : cfg.model_store;
      const std::string rules = !sim_rules.empty() ? sim_rules : "";
      return cmd_simulate(sim_log, store, rules, sim_out, sim_trace,
                          sim_sig.resolve(c_sim, cfg));
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  } catch (const config_error& e) {
    std::cerr << "error(config): " << e.what() << "\n";
    return 2;
  } catch (const no_rule_fired& e) {
    std::cerr << "error(data): " << e.what() << "\n";
    return 3;
  } catch (const data_error& e) {
    std::cerr << "error(data): " << e.what() << "\n";
    return 3;
  } catch (const model_error& e) {
    std::cerr << "error(model): " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error(internal): " << e.what() << "\n";
    return 1;
  }
}
