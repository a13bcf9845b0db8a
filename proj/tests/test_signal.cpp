#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "roadsurf/image.hpp"
#include "roadsurf/rng.hpp"
#include "roadsurf/signal.hpp"

using namespace roadsurf;

namespace {

const double kPi = 3.141592653589793238462643383279502884;

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "roadsurf_signal_test";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("segment window counts and offsets") {
  std::vector<double> stream(1000);
  std::iota(stream.begin(), stream.end(), 0.0);

  auto tiled = signal::segment(stream, 100.0, 200, 200);
  CHECK(tiled.size() == 5);
  auto hopped = signal::segment(stream, 100.0, 200, 100);
  CHECK(hopped.size() == 9);  // floor((1000-200)/100)+1

  for (std::size_t i = 0; i < hopped.size(); ++i) {
    CHECK(hopped[i].start_index == i * 100);
    CHECK(hopped[i].samples.size() == 200);
    CHECK(hopped[i].start_index + hopped[i].samples.size() <= stream.size());
  }

  // hop == window_len windows concatenate back to the stream prefix
  std::vector<double> rebuilt;
  for (const auto& w : tiled) rebuilt.insert(rebuilt.end(), w.samples.begin(), w.samples.end());
  CHECK(rebuilt == std::vector<double>(stream.begin(), stream.begin() + 1000));

  std::vector<double> tiny(199, 0.0);
  CHECK_THROWS_AS(signal::segment(tiny, 100.0, 200, 200), data_error);
  CHECK_THROWS_AS(signal::segment(stream, 100.0, 0, 100), config_error);
  CHECK_THROWS_AS(signal::segment(stream, 100.0, 100, 0), config_error);
}

TEST_CASE("stft of constant and zero signals") {
  signal::AccelWindow w;
  w.sample_rate = 100.0;
  w.samples.assign(256, 1.0);  // DC
  const auto spec = signal::stft(w, 64, 64, signal::Taper::rectangular);
  CHECK(spec.bins == 33);
  CHECK(spec.frames == 4);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    CHECK(spec.at(0, f) == doctest::Approx(64.0).epsilon(1e-12));
    for (std::size_t k = 1; k < spec.bins; ++k) CHECK(spec.at(k, f) <= 1e-9);
  }

  w.samples.assign(256, 0.0);
  const auto zero = signal::stft(w, 64, 16, signal::Taper::hann);
  for (double m : zero.magnitudes) CHECK(m == 0.0);
}

TEST_CASE("bin-centered sinusoid concentrates in one bin") {
  const std::size_t fft = 128;
  const double rate = 100.0;
  const std::size_t m = 12;  // bin index
  const double freq = m * rate / fft;
  signal::AccelWindow w;
  w.sample_rate = rate;
  w.samples.resize(512);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    w.samples[i] = std::sin(2.0 * kPi * freq * static_cast<double>(i) / rate);
  }
  const auto spec = signal::stft(w, fft, fft, signal::Taper::rectangular);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const double peak = spec.at(m, f);
    CHECK(peak == doctest::Approx(fft / 2.0).epsilon(1e-9));
    for (std::size_t k = 0; k < spec.bins; ++k) {
      if (k != m) CHECK(spec.at(k, f) <= 1e-9 * peak);
    }
  }
}

TEST_CASE("Parseval identity with rectangular taper and non-overlapping frames") {
  // Convention under test: |X_0|^2 + 2*sum_{0<k<N/2} |X_k|^2 + |X_{N/2}|^2
  // equals N * sum x^2 per frame.
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t fft = 64;
    signal::AccelWindow w;
    w.sample_rate = 100.0;
    w.samples.resize(256);
    for (double& v : w.samples) v = rng.uniform(-2.0, 2.0);
    const auto spec = signal::stft(w, fft, fft, signal::Taper::rectangular);
    for (std::size_t f = 0; f < spec.frames; ++f) {
      double lhs = 0.0;
      for (std::size_t k = 0; k < spec.bins; ++k) {
        const double weight = (k == 0 || k == spec.bins - 1) ? 1.0 : 2.0;
        lhs += weight * spec.at(k, f) * spec.at(k, f);
      }
      double energy = 0.0;
      for (std::size_t i = 0; i < fft; ++i) {
        const double s = w.samples[f * fft + i];
        energy += s * s;
      }
      CHECK(lhs == doctest::Approx(fft * energy).epsilon(1e-9));
    }
  }
}

TEST_CASE("stft parameter validation") {
  signal::AccelWindow w;
  w.sample_rate = 100.0;
  w.samples.assign(100, 0.0);
  CHECK_THROWS_AS(signal::stft(w, 48, 16), config_error);   // not a power of two
  CHECK_THROWS_AS(signal::stft(w, 128, 16), data_error);    // larger than window
  CHECK_THROWS_AS(signal::stft(w, 64, 0), config_error);
}

TEST_CASE("to_image basics") {
  signal::Spectrogram spec;
  spec.bins = 4;
  spec.frames = 6;
  spec.magnitudes.assign(24, 3.5);  // constant
  auto img = signal::to_image(spec, 10, 12, signal::Scaling::log1p);
  CHECK(img.height == 10);
  CHECK(img.width == 12);
  CHECK(img.channels == 1);
  for (double v : img.pixels) CHECK(v == 0.0);  // constant input maps to all-zero

  auto big = signal::to_image(spec, 224, 224);
  CHECK(big.height == 224);
  CHECK(big.width == 224);

  // non-constant, same-size: attains both 0 and 1 and stays in range
  spec.magnitudes = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11,
                     12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23};
  auto norm = signal::to_image(spec, 4, 6, signal::Scaling::linear);
  double lo = 2.0, hi = -1.0;
  for (double v : norm.pixels) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(lo == 0.0);
  CHECK(hi == 1.0);
}

TEST_CASE("bilinear center of a 2x2 checker resized to 3x3 is 0.5") {
  signal::Spectrogram spec;
  spec.bins = 2;
  spec.frames = 2;
  spec.magnitudes = {0.0, 1.0, 1.0, 0.0};
  const auto img = signal::to_image(spec, 3, 3, signal::Scaling::linear);
  CHECK(img.at(1, 1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(img.at(0, 0, 0) == 0.0);
  CHECK(img.at(0, 2, 0) == 1.0);
}

TEST_CASE("resize is the identity at the same shape and preserves constants") {
  Rng rng(5);
  image::ImageTensor img = image::ImageTensor::zeros(9, 7, 1);
  for (double& v : img.pixels) v = rng.uniform();
  const auto same = image::resize_bilinear(img, 9, 7);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    CHECK(std::abs(same.pixels[i] - img.pixels[i]) <= 1e-12);
  }

  image::ImageTensor flat = image::ImageTensor::zeros(5, 5, 1);
  for (double& v : flat.pixels) v = 0.37;
  const auto scaled = image::resize_bilinear(flat, 13, 3);
  for (double v : scaled.pixels) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("PGM and PPM round-trips") {
  Rng rng(17);
  const auto dir = temp_dir();

  image::ImageTensor gray = image::ImageTensor::zeros(12, 9, 1);
  for (double& v : gray.pixels) v = rng.uniform();
  const std::string pgm = (dir / "gray.pgm").string();
  image::write_pgm(pgm, gray);
  const auto gray2 = image::read_pgm(pgm);
  CHECK(gray2.height == 12);
  CHECK(gray2.width == 9);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    CHECK(std::abs(gray2.pixels[i] - gray.pixels[i]) <= 0.5 / 255.0 + 1e-12);
  }
  // second round-trip is exact: quantization is idempotent
  const std::string pgm2 = (dir / "gray2.pgm").string();
  image::write_pgm(pgm2, gray2);
  CHECK(image::read_pgm(pgm2).pixels == gray2.pixels);

  image::ImageTensor rgb = image::ImageTensor::zeros(6, 6, 3);
  for (double& v : rgb.pixels) v = rng.uniform();
  const std::string ppm = (dir / "rgb.ppm").string();
  image::write_ppm(ppm, rgb);
  const auto rgb2 = image::read_ppm(ppm);
  CHECK(rgb2.channels == 3);
  const std::string ppm2 = (dir / "rgb2.ppm").string();
  image::write_ppm(ppm2, rgb2);
  CHECK(image::read_ppm(ppm2).pixels == rgb2.pixels);

  CHECK_THROWS_AS(image::read_pgm((dir / "missing.pgm").string()), data_error);
  CHECK_THROWS_AS(image::read_pgm(ppm), data_error);  // wrong magic
  CHECK_THROWS_AS(image::write_pgm((dir / "x.pgm").string(), rgb), data_error);

  // generic reader dispatches on magic
  CHECK(image::read_image(pgm).channels == 1);
  CHECK(image::read_image(ppm).channels == 3);
}

TEST_CASE("replicate_channels copies the plane") {
  image::ImageTensor gray = image::ImageTensor::zeros(3, 3, 1);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) gray.pixels[i] = static_cast<double>(i);
  const auto rgb = image::replicate_channels(gray, 3);
  CHECK(rgb.channels == 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(rgb.at(y, x, c) == gray.at(y, x, 0));
    }
  }
}

TEST_CASE("acceleration CSV round-trip and validation") {
  const auto dir = temp_dir();
  std::vector<signal::AccelRecord> recs;
  for (int i = 0; i < 50; ++i) {
    recs.push_back({i / 100.0, std::sin(i * 0.3), RoadClass::gravel});
  }
  const std::string path = (dir / "accel.csv").string();
  signal::write_accel_csv(path, recs);
  const auto back = signal::read_accel_csv(path);
  CHECK(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].timestamp_s == doctest::Approx(recs[i].timestamp_s).epsilon(1e-9));
    CHECK(back[i].accel_z == doctest::Approx(recs[i].accel_z).epsilon(1e-9));
    CHECK(back[i].label == RoadClass::gravel);
  }

  const std::string bad_header = (dir / "bad_header.csv").string();
  {
    std::ofstream out(bad_header);
    out << "time,z\n0,1\n";
  }
  CHECK_THROWS_AS(signal::read_accel_csv(bad_header), data_error);

  const std::string bad_row = (dir / "bad_row.csv").string();
  {
    std::ofstream out(bad_row);
    out << "timestamp_s,accel_z\n0.0,1.0\n0.01,not_a_number\n";
  }
  try {
    signal::read_accel_csv(bad_row);
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);  // line number
  }
}
