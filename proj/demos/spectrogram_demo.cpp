// Generates one synthetic acceleration window per road class and writes the
// corresponding spectrogram images next to the binary.

#include <cstdio>
#include <string>

#include "roadsurf/dataset.hpp"
#include "roadsurf/image.hpp"
#include "roadsurf/signal.hpp"

using namespace roadsurf;

int main() {
  const dataset::SynthParams params;
  const double rate = 100.0;
  const std::size_t window_len = 256;

  for (RoadClass rc : all_road_classes()) {
    const std::vector<double> stream =
        dataset::synth_accel(rc, window_len / rate, rate, params, 42);
    const auto windows = signal::segment(stream, rate, window_len, window_len, rc);
    const signal::Spectrogram spec = signal::stft(windows.front(), 64, 16, signal::Taper::hann);
    const image::ImageTensor img = signal::to_image(spec, 64, 64, signal::Scaling::log1p);
    const std::string path = std::string("spectrogram_") + to_string(rc) + ".pgm";
    image::write_pgm(path, img);
    std::printf("%s: %zu bins x %zu frames -> %s\n", to_string(rc), spec.bins, spec.frames,
                path.c_str());
  }
  return 0;
}
