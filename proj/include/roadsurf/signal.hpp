#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "roadsurf/errors.hpp"
#include "roadsurf/image.hpp"
#include "roadsurf/road_class.hpp"

namespace roadsurf::signal {

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

struct AccelWindow {
  std::vector<double> samples;  // z-axis acceleration, m/s^2
  double sample_rate = 0.0;     // Hz
  std::size_t start_index = 0;  // offset into the source stream
  std::optional<RoadClass> label;
};

// Fixed-length windows at offsets 0, hop, 2*hop, ...; a trailing partial
// window is discarded.
inline std::vector<AccelWindow> segment(const std::vector<double>& stream, double sample_rate,
                                        std::size_t window_len, std::size_t hop,
                                        std::optional<RoadClass> label = std::nullopt) {
  if (window_len < 1) throw config_error("segment: window_len must be >= 1");
  if (hop < 1) throw config_error("segment: hop must be >= 1");
  if (sample_rate <= 0.0) throw config_error("segment: sample_rate must be positive");
  if (stream.size() < window_len) {
    throw data_error("segment: stream of " + std::to_string(stream.size()) +
                     " samples is shorter than the window length " + std::to_string(window_len));
  }
  const std::size_t count = (stream.size() - window_len) / hop + 1;
  std::vector<AccelWindow> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    AccelWindow w;
    w.start_index = i * hop;
    w.sample_rate = sample_rate;
    w.label = label;
    w.samples.assign(stream.begin() + static_cast<std::ptrdiff_t>(w.start_index),
                     stream.begin() + static_cast<std::ptrdiff_t>(w.start_index + window_len));
    out.push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// STFT
// ---------------------------------------------------------------------------

enum class Taper { rectangular, hann };

struct Spectrogram {
  std::size_t bins = 0;    // fft_size/2 + 1
  std::size_t frames = 0;
  std::vector<double> magnitudes;  // bins x frames, row-major by bin
  double bin_hz = 0.0;       // frequency spacing between bins
  double frame_dt = 0.0;     // seconds between frame starts
  double frame_t0 = 0.0;     // center time of frame 0, seconds

  double& at(std::size_t bin, std::size_t frame) { return magnitudes[bin * frames + frame]; }
  double at(std::size_t bin, std::size_t frame) const { return magnitudes[bin * frames + frame]; }
};

namespace detail {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey. Unnormalized: Parseval reads
// sum |X_k|^2 = N * sum x_n^2.
inline void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * 3.141592653589793238462643383279502884 / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Periodic Hann: w[n] = 0.5 * (1 - cos(2*pi*n/N)).
inline std::vector<double> make_taper(Taper taper, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (taper == Taper::hann) {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 * (1.0 - std::cos(2.0 * 3.141592653589793238462643383279502884 *
                                   static_cast<double>(i) / static_cast<double>(n)));
    }
  }
  return w;
}

}  // namespace detail

// Magnitude STFT. Frames start at offsets 0, frame_hop, ... within the
// window; real-input symmetry keeps bins 0..fft_size/2.
inline Spectrogram stft(const AccelWindow& window, std::size_t fft_size, std::size_t frame_hop,
                        Taper taper = Taper::hann) {
  if (!detail::is_power_of_two(fft_size)) {
    throw config_error("stft: fft_size must be a power of two");
  }
  if (frame_hop < 1) throw config_error("stft: frame_hop must be >= 1");
  if (fft_size > window.samples.size()) {
    throw data_error("stft: fft_size " + std::to_string(fft_size) +
                     " exceeds window length " + std::to_string(window.samples.size()));
  }
  const std::size_t frames = (window.samples.size() - fft_size) / frame_hop + 1;
  const std::size_t bins = fft_size / 2 + 1;
  const std::vector<double> w = detail::make_taper(taper, fft_size);

  Spectrogram spec;
  spec.bins = bins;
  spec.frames = frames;
  spec.magnitudes.assign(bins * frames, 0.0);
  spec.bin_hz = window.sample_rate / static_cast<double>(fft_size);
  spec.frame_dt = static_cast<double>(frame_hop) / window.sample_rate;
  spec.frame_t0 = (static_cast<double>(window.start_index) + fft_size / 2.0) / window.sample_rate;

  std::vector<std::complex<double>> buf(fft_size);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t off = f * frame_hop;
    for (std::size_t i = 0; i < fft_size; ++i) {
      buf[i] = std::complex<double>(window.samples[off + i] * w[i], 0.0);
    }
    detail::fft_radix2(buf);
    for (std::size_t k = 0; k < bins; ++k) spec.at(k, f) = std::abs(buf[k]);
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Spectrogram -> image
// ---------------------------------------------------------------------------

enum class Scaling { linear, log1p };

// log1p (default) or linear magnitude scaling, per-image min-max
// normalization, bilinear resize. An all-constant spectrogram maps to an
// all-zero image rather than an error.
inline image::ImageTensor to_image(const Spectrogram& spec, int target_h, int target_w,
                                   Scaling scaling = Scaling::log1p) {
  if (target_h < 1 || target_w < 1) throw config_error("to_image: target dims must be >= 1");
  if (spec.bins == 0 || spec.frames == 0) throw data_error("to_image: empty spectrogram");
  image::ImageTensor raw = image::ImageTensor::zeros(static_cast<int>(spec.bins),
                                                     static_cast<int>(spec.frames), 1);
  for (std::size_t i = 0; i < spec.magnitudes.size(); ++i) {
    const double m = spec.magnitudes[i];
    raw.pixels[i] = scaling == Scaling::log1p ? std::log1p(m) : m;
  }
  double lo = raw.pixels[0], hi = raw.pixels[0];
  for (double v : raw.pixels) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > lo) {
    for (double& v : raw.pixels) v = (v - lo) / (hi - lo);
  } else {
    for (double& v : raw.pixels) v = 0.0;
  }
  return image::resize_bilinear(raw, target_h, target_w);
}

// ---------------------------------------------------------------------------
// CSV ingestion: header "timestamp_s,accel_z[,label]"
// ---------------------------------------------------------------------------

struct AccelRecord {
  double timestamp_s = 0.0;
  double accel_z = 0.0;
  std::optional<RoadClass> label;
};

inline std::vector<AccelRecord> read_accel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open acceleration log: " + path);
  std::string line;
  if (!std::getline(in, line)) throw data_error("empty acceleration log: " + path);
  if (line.size() && line.back() == '\r') line.pop_back();
  const bool has_label = line == "timestamp_s,accel_z,label";
  if (!has_label && line != "timestamp_s,accel_z") {
    throw data_error(path + ":1: expected header 'timestamp_s,accel_z[,label]'");
  }
  std::vector<AccelRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string t, z, lbl;
    if (!std::getline(ss, t, ',') || !std::getline(ss, z, ',')) {
      throw data_error(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    AccelRecord rec;
    try {
      rec.timestamp_s = std::stod(t);
      rec.accel_z = std::stod(z);
    } catch (const std::exception&) {
      throw data_error(path + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    if (has_label && std::getline(ss, lbl, ',') && !lbl.empty()) {
      rec.label = road_class_from_string(lbl);
    }
    out.push_back(rec);
  }
  return out;
}

inline void write_accel_csv(const std::string& path, const std::vector<AccelRecord>& records) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write acceleration log: " + path);
  const bool has_label = !records.empty() && records.front().label.has_value();
  out << (has_label ? "timestamp_s,accel_z,label" : "timestamp_s,accel_z") << "\n";
  char buf[128];
  for (const AccelRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%.6f,%.9g", r.timestamp_s, r.accel_z);
    out << buf;
    if (has_label) out << "," << to_string(*r.label);
    out << "\n";
  }
  if (!out) throw data_error("short write on acceleration log: " + path);
}

}  // namespace roadsurf::signal
