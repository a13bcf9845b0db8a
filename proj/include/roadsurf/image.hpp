#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "roadsurf/errors.hpp"

namespace roadsurf::image {

// Dense H x W x C tensor of doubles in [0, 1], row-major with interleaved
// channels.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> pixels;

  static ImageTensor zeros(int h, int w, int c) {
    ImageTensor t;
    t.height = h;
    t.width = w;
    t.channels = c;
    t.pixels.assign(static_cast<std::size_t>(h) * w * c, 0.0);
    return t;
  }

  double& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  std::size_t size() const { return pixels.size(); }
};

// Bilinear resize with corner-aligned sampling, so resizing to the same shape
// is the identity and constants stay constant.
inline ImageTensor resize_bilinear(const ImageTensor& src, int target_h, int target_w) {
  if (target_h < 1 || target_w < 1) throw config_error("resize target must be at least 1x1");
  if (src.height < 1 || src.width < 1) throw data_error("resize source is empty");
  ImageTensor dst = ImageTensor::zeros(target_h, target_w, src.channels);
  const auto src_coord = [](int i, int target, int source) -> double {
    if (target == 1) return (source - 1) / 2.0;
    return static_cast<double>(i) * (source - 1) / (target - 1);
  };
  for (int y = 0; y < target_h; ++y) {
    const double sy = src_coord(y, target_h, src.height);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < target_w; ++x) {
      const double sx = src_coord(x, target_w, src.width);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double fx = sx - x0;
      for (int c = 0; c < src.channels; ++c) {
        const double top = src.at(y0, x0, c) * (1.0 - fx) + src.at(y0, x1, c) * fx;
        const double bot = src.at(y1, x0, c) * (1.0 - fx) + src.at(y1, x1, c) * fx;
        dst.at(y, x, c) = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return dst;
}

inline ImageTensor replicate_channels(const ImageTensor& src, int channels) {
  if (src.channels != 1) throw data_error("replicate_channels expects a single-channel image");
  ImageTensor dst = ImageTensor::zeros(src.height, src.width, channels);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int c = 0; c < channels; ++c) dst.at(y, x, c) = src.at(y, x, 0);
    }
  }
  return dst;
}

// --- binary PGM (P5) / PPM (P6), maxval 255 --------------------------------

namespace detail {

inline std::uint8_t quantize(double v) {
  const double clamped = std::min(1.0, std::max(0.0, v));
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

inline void skip_netpbm_whitespace(std::istream& in) {
  int c = in.peek();
  while (c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '#') {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
}

inline int read_netpbm_int(std::istream& in, const std::string& path) {
  skip_netpbm_whitespace(in);
  int value = 0;
  if (!(in >> value)) throw data_error("malformed netpbm header in " + path);
  return value;
}

inline ImageTensor read_netpbm(const std::string& path, const char* magic, int channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open image file: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != magic[0] || m1 != magic[1]) {
    throw data_error("unexpected magic in " + path + " (want " + magic + ")");
  }
  const int w = read_netpbm_int(in, path);
  const int h = read_netpbm_int(in, path);
  const int maxval = read_netpbm_int(in, path);
  if (w < 1 || h < 1 || maxval != 255) throw data_error("unsupported netpbm format in " + path);
  in.get();  // single whitespace byte before raster
  std::vector<char> raw(static_cast<std::size_t>(w) * h * channels);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw data_error("truncated raster in " + path);
  }
  ImageTensor t = ImageTensor::zeros(h, w, channels);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    t.pixels[i] = static_cast<std::uint8_t>(raw[i]) / 255.0;
  }
  return t;
}

inline void write_netpbm(const std::string& path, const ImageTensor& img, const char* magic) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write image file: " + path);
  out << magic << "\n" << img.width << " " << img.height << "\n255\n";
  std::vector<char> raw(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    raw[i] = static_cast<char>(quantize(img.pixels[i]));
  }
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) throw data_error("short write on image file: " + path);
}

}  // namespace detail

inline void write_pgm(const std::string& path, const ImageTensor& img) {
  if (img.channels != 1) throw data_error("PGM output requires a single-channel image");
  detail::write_netpbm(path, img, "P5");
}

inline ImageTensor read_pgm(const std::string& path) { return detail::read_netpbm(path, "P5", 1); }

inline void write_ppm(const std::string& path, const ImageTensor& img) {
  if (img.channels != 3) throw data_error("PPM output requires a 3-channel image");
  detail::write_netpbm(path, img, "P6");
}

inline ImageTensor read_ppm(const std::string& path) { return detail::read_netpbm(path, "P6", 3); }

inline ImageTensor read_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw data_error("cannot open image file: " + path);
  char m0 = 0, m1 = 0;
  probe.get(m0);
  probe.get(m1);
  probe.close();
  if (m0 == 'P' && m1 == '5') return read_pgm(path);
  if (m0 == 'P' && m1 == '6') return read_ppm(path);
  throw data_error("unsupported image format in " + path);
}

}  // namespace roadsurf::image
