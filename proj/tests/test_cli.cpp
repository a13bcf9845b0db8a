#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadsurf/dataset.hpp"
#include "roadsurf/fuzzy.hpp"
#include "roadsurf/pipeline.hpp"
#include "roadsurf/signal.hpp"
#include "roadsurf/weather.hpp"

namespace fs = std::filesystem;
using namespace roadsurf;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

const char* cli_path() {
  const char* p = std::getenv("ROADSURF_CLI");
  REQUIRE_MESSAGE(p != nullptr, "ROADSURF_CLI must point at the CLI binary");
  return p;
}

RunResult run(const std::string& args) {
  const std::string cmd = std::string("\"") + cli_path() + "\" " + args + " 2>&1";
  std::FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "roadsurf_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// 10 per class keeps val/test non-empty at the default 70/15/15 ratios.
void build_dataset(const fs::path& dir) {
  const std::string root = (dir / "data").string();
  auto synth = run("synth --root " + root +
                   " --per-class 10 --camera-size 32 --window 128 --fft 32 --image-size 32"
                   " --seed 5");
  REQUIRE_MESSAGE(synth.code == 0, synth.output);
  auto split = run("split --entries " + root + "/entries.json --out " + root +
                   "/manifest.json --seed 5");
  REQUIRE_MESSAGE(split.code == 0, split.output);
  auto pre = run("preprocess --manifest " + root + "/manifest.json --out " + root +
                 "/manifest_pre.json --window 128 --fft 32 --image-size 32");
  REQUIRE_MESSAGE(pre.code == 0, pre.output);
}

void write_drive_log(const fs::path& path, int rows, double wind, double humidity, double light,
                     double temperature, double rain, const std::string& image) {
  std::ofstream out(path);
  out << "timestamp_s,accel_z,image,wind,humidity,light,temperature,rain\n";
  for (int i = 0; i < rows; ++i) {
    out << i / 100.0 << "," << 0.3 * ((i % 7) - 3) << "," << image << "," << wind << ","
        << humidity << "," << light << "," << temperature << "," << rain << "\n";
  }
}

}  // namespace

TEST_CASE("export-rules writes 32 rules that reload to the same inference") {
  const fs::path dir = fresh_dir("export");
  const std::string out = (dir / "weather_rules.json").string();
  const RunResult r = run("export-rules --out " + out);
  CHECK(r.code == 0);
  CHECK(r.output.find("32 rules") != std::string::npos);

  nlohmann::json doc = nlohmann::json::parse(read_file(out));
  REQUIRE(doc["rules"].size() == 32);

  const fuzzy::FuzzySystem loaded = fuzzy::system_from_json(doc);
  const fuzzy::FuzzySystem builtin = weather::build_weather_system();
  for (double wind : {0.0, 4.0, 5.0, 10.0}) {
    for (double light : {5.0, 50.0, 95.0}) {
      for (double temp : {5.0, 25.0, 30.0, 40.0}) {
        const std::map<std::string, double> in = {
            {"wind", wind}, {"humidity", 35.0}, {"light", light}, {"temperature", temp},
            {"rain", 10.0}};
        const auto a = builtin.infer(in);
        const auto b = loaded.infer(in);
        CHECK(a.label == b.label);
        CHECK(a.activations == b.activations);
      }
    }
  }
}

TEST_CASE("export-rules to an unwritable path exits with the config code") {
  const RunResult r = run("export-rules --out /nonexistent_dir_zz/rules.json");
  CHECK(r.code == 2);
  CHECK(r.output.find("error(config)") != std::string::npos);
}

TEST_CASE("classify-weather prints the condition, routing and activations") {
  const RunResult r = run(
      "classify-weather --wind 1 --humidity 10 --light 10 --temperature 5 --rain 0");
  CHECK(r.code == 0);
  CHECK(r.output.find("condition: foggy") != std::string::npos);
  CHECK(r.output.find("modality: acceleration") != std::string::npos);
  CHECK(r.output.find("model_key: acceleration-foggy") != std::string::npos);
  CHECK(r.output.find("foggy") != std::string::npos);

  const RunResult day = run(
      "classify-weather --wind 1 --humidity 10 --light 90 --temperature 40 --rain 0");
  CHECK(day.output.find("condition: day") != std::string::npos);
  CHECK(day.output.find("modality: camera") != std::string::npos);
}

TEST_CASE("full pipeline: synth, split, preprocess, train, evaluate, simulate") {
  const fs::path dir = fresh_dir("pipeline");
  build_dataset(dir);
  const std::string root = (dir / "data").string();
  const std::string store = (dir / "models").string();

  // manifest sanity: stratified counts for 10/class at 70/15/15
  const auto manifest =
      dataset::manifest_from_json(nlohmann::json::parse(read_file(dir / "data/manifest.json")));
  auto counts = manifest.class_counts();
  for (const char* cls : kRoadClassNames) {
    CHECK(counts["train"][cls] == 16);  // 8 camera + 8 acceleration
    CHECK(counts["val"][cls] == 2);
    CHECK(counts["test"][cls] == 2);
  }

  // preprocessed manifest points acceleration entries at PGM spectrograms
  const auto pre = dataset::manifest_from_json(
      nlohmann::json::parse(read_file(dir / "data/manifest_pre.json")));
  for (const auto& e : pre.entries) {
    if (e.modality == weather::Modality::acceleration) {
      CHECK(e.path.find(".pgm") != std::string::npos);
      CHECK(fs::exists(pipeline::resolve_against(root, e.path)));
    }
  }

  for (const std::string spec :
       {std::string("--modality camera --condition day"),
        std::string("--modality acceleration --condition foggy")}) {
    const RunResult t = run("train --manifest " + root + "/manifest_pre.json " + spec +
                            " --preset mini-vgg --store " + store +
                            " --lr 0.01 --batch 4 --max-epochs 2 --patience 10 --seed 3");
    CHECK_MESSAGE(t.code == 0, t.output);
  }
  CHECK(fs::exists(fs::path(store) / "camera-day.rsm"));
  CHECK(fs::exists(fs::path(store) / "acceleration-foggy.rsm"));

  const nlohmann::json report = nlohmann::json::parse(
      read_file(fs::path(store) / "camera-day-train-report.json"));
  CHECK(report["epochs_run"].get<int>() == 2);
  CHECK(report["patience"].get<int>() == 10);
  CHECK(report["val_losses"].size() == 2);

  const std::string losses = read_file(fs::path(store) / "camera-day-losses.csv");
  CHECK(losses.rfind("epoch,train_loss,val_loss", 0) == 0);
  CHECK(losses.find("\n1,") != std::string::npos);
  CHECK(losses.find("\n2,") != std::string::npos);

  const RunResult ev = run("evaluate --model " + store + "/camera-day.rsm --manifest " + root +
                           "/manifest_pre.json --modality camera --split test --json-out " +
                           (dir / "eval.json").string());
  CHECK_MESSAGE(ev.code == 0, ev.output);
  CHECK(ev.output.find("Precision") != std::string::npos);
  CHECK(ev.output.find("weighted avg") != std::string::npos);
  const nlohmann::json evj = nlohmann::json::parse(read_file(dir / "eval.json"));
  CHECK(evj.contains("confusion_matrix"));
  CHECK(evj.contains("report"));

  // foggy log: every window routes to the acceleration model
  const fs::path foggy_log = dir / "foggy.csv";
  write_drive_log(foggy_log, 256, 1, 10, 5, 5, 0, "");
  const RunResult sim = run("simulate --log " + foggy_log.string() + " --store " + store +
                            " --window 128 --hop 128 --fft 32 --image-size 32 --out " +
                            (dir / "foggy_out.csv").string() + " --trace-out " +
                            (dir / "foggy_trace.csv").string());
  CHECK_MESSAGE(sim.code == 0, sim.output);

  const std::string trace = read_file(dir / "foggy_trace.csv");
  CHECK(trace.rfind("window_start,sunny,rainy,foggy,night,day", 0) == 0);
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 3);  // header + 2 windows
  const std::string sim_csv = read_file(dir / "foggy_out.csv");
  std::size_t lines = 0, accel_rows = 0;
  for (std::size_t pos = 0; (pos = sim_csv.find('\n', pos)) != std::string::npos; ++pos) ++lines;
  for (std::size_t pos = 0; (pos = sim_csv.find("acceleration-foggy", pos)) != std::string::npos;
       ++pos) {
    ++accel_rows;
  }
  CHECK(lines == 3);       // header + 2 windows of 128 samples
  CHECK(accel_rows == 2);  // both routed to the acceleration model
  CHECK(sim_csv.rfind("window_start,condition,modality,model_key,predicted_class,probability",
                      0) == 0);

  // day log: camera modality, image paths resolved relative to the log
  const fs::path day_log = dir / "day.csv";
  write_drive_log(day_log, 128, 1, 10, 95, 40, 0, "data/camera/asphalt_0000.pgm");
  const RunResult sim2 = run("simulate --log " + day_log.string() + " --store " + store +
                             " --window 128 --hop 128 --fft 32");
  CHECK_MESSAGE(sim2.code == 0, sim2.output);
  CHECK(sim2.output.find("camera-day") != std::string::npos);
  CHECK(sim2.output.find("day,camera") != std::string::npos);
}

TEST_CASE("simulate with an empty log succeeds with only the header") {
  const fs::path dir = fresh_dir("empty");
  const fs::path log = dir / "empty.csv";
  {
    std::ofstream out(log);
    out << "timestamp_s,accel_z,image,wind,humidity,light,temperature,rain\n";
  }
  const RunResult r = run("simulate --log " + log.string() + " --store " + dir.string());
  CHECK(r.code == 0);
  CHECK(r.output ==
        "window_start,condition,modality,model_key,predicted_class,probability\n");
}

TEST_CASE("error exit codes") {
  const fs::path dir = fresh_dir("errors");

  const RunResult missing_manifest =
      run("train --manifest " + (dir / "nope.json").string() +
          " --modality camera --condition day --store " + (dir / "m").string());
  CHECK(missing_manifest.code == 3);
  CHECK(missing_manifest.output.find("error(data)") != std::string::npos);

  // a drive log that reaches routing but has no model in the store
  const fs::path log = dir / "foggy.csv";
  write_drive_log(log, 256, 1, 10, 5, 5, 0, "");
  const RunResult no_model = run("simulate --log " + log.string() + " --store " +
                                 (dir / "models").string() + " --window 128 --fft 32");
  CHECK(no_model.code == 4);
  CHECK(no_model.output.find("error(model)") != std::string::npos);
  CHECK(no_model.output.find("acceleration-foggy") != std::string::npos);

  const RunResult bad_flag = run("synth --per-class -3 --root " + (dir / "d").string());
  CHECK(bad_flag.code == 2);

  // timestamps must strictly increase
  const fs::path bad_log = dir / "bad.csv";
  {
    std::ofstream out(bad_log);
    out << "timestamp_s,accel_z,image,wind,humidity,light,temperature,rain\n";
    out << "0.0,0.1,,1,10,5,5,0\n";
    out << "0.0,0.2,,1,10,5,5,0\n";
  }
  const RunResult bad = run("simulate --log " + bad_log.string() + " --store " + dir.string());
  CHECK(bad.code == 3);
  CHECK(bad.output.find(":3:") != std::string::npos);

  // advisory lock blocks concurrent training
  const fs::path store = dir / "locked_store";
  fs::create_directories(store);
  {
    std::ofstream lock(store / ".lock");
  }
  build_dataset(dir);
  const RunResult locked =
      run("train --manifest " + (dir / "data/manifest_pre.json").string() +
          " --modality camera --condition day --store " + store.string() +
          " --max-epochs 1 --batch 4");
  CHECK(locked.code == 4);
  CHECK(locked.output.find("lock") != std::string::npos);
}

TEST_CASE("config file supplies defaults and flags win") {
  const fs::path dir = fresh_dir("config");
  const fs::path cfg = dir / "cfg.json";
  {
    std::ofstream out(cfg);
    out << R"({"seed": 11, "signal": {"window_len": 128, "fft_size": 32, "image_size": 32}})";
  }
  const std::string root = (dir / "data").string();
  const RunResult r = run("--config " + cfg.string() + " synth --root " + root +
                          " --per-class 10 --camera-size 32");
  CHECK_MESSAGE(r.code == 0, r.output);

  // window_len 128 from config: each accel CSV holds 128 samples
  const auto recs = signal::read_accel_csv(root + "/accel/asphalt_0000.csv");
  CHECK(recs.size() == 128);

  // unknown keys are rejected
  const fs::path bad = dir / "bad.json";
  {
    std::ofstream out(bad);
    out << R"({"sed": 11})";
  }
  const RunResult rb = run("--config " + bad.string() + " export-rules --out " +
                           (dir / "r.json").string());
  CHECK(rb.code == 2);
  CHECK(rb.output.find("sed") != std::string::npos);
}
