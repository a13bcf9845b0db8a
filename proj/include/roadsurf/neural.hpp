#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "roadsurf/errors.hpp"
#include "roadsurf/image.hpp"
#include "roadsurf/rng.hpp"
#include "roadsurf/road_class.hpp"

namespace roadsurf::neural {

struct Shape {
  int h = 0, w = 0, c = 0;
  int count() const { return h * w * c; }
  bool operator==(const Shape& o) const { return h == o.h && w == o.w && c == o.c; }
  std::string str() const {
    return "(" + std::to_string(h) + "," + std::to_string(w) + "," + std::to_string(c) + ")";
  }
};

// ---------------------------------------------------------------------------
// Layer descriptors
// ---------------------------------------------------------------------------

enum class LayerKind { conv, maxpool, relu, flatten, dense, softmax };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int out_channels = 0, kernel = 0, stride = 1, padding = 0;  // conv
  int pool_size = 0, pool_stride = 0;                         // maxpool
  int units = 0;                                              // dense

  static LayerSpec conv(int out_channels, int kernel, int stride, int padding) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.out_channels = out_channels;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
  }
  static LayerSpec maxpool(int size, int stride) {
    LayerSpec s;
    s.kind = LayerKind::maxpool;
    s.pool_size = size;
    s.pool_stride = stride;
    return s;
  }
  static LayerSpec relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
  }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
  }
  static LayerSpec dense(int units) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = units;
    return s;
  }
  static LayerSpec softmax() {
    LayerSpec s;
    s.kind = LayerKind::softmax;
    return s;
  }
};

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Model specification
// ---------------------------------------------------------------------------

struct ModelSpec {
  std::vector<LayerSpec> layers;
  Shape input;
  int num_classes = 0;

  // Propagates shapes through every layer; throws config_error naming the
  // offending layer. Returns the per-layer output shapes.
  std::vector<Shape> validate() const {
    if (input.h < 1 || input.w < 1 || input.c < 1) {
      throw config_error("model input shape must be positive, got " + input.str());
    }
    if (num_classes < 2) throw config_error("model needs at least 2 classes");
    if (layers.size() < 2) throw config_error("model needs at least dense+softmax layers");

    std::vector<Shape> shapes;
    Shape cur = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const LayerSpec& l = layers[i];
      const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
      switch (l.kind) {
        case LayerKind::conv: {
          if (l.out_channels < 1 || l.kernel < 1 || l.stride < 1 || l.padding < 0) {
            throw config_error(where + ": bad parameters");
          }
          const int ph = cur.h + 2 * l.padding, pw = cur.w + 2 * l.padding;
          if (l.kernel > ph || l.kernel > pw) {
            throw config_error(where + ": kernel " + std::to_string(l.kernel) +
                               " larger than padded input " + cur.str());
          }
          cur = {(ph - l.kernel) / l.stride + 1, (pw - l.kernel) / l.stride + 1, l.out_channels};
          break;
        }
        case LayerKind::maxpool: {
          if (l.pool_size < 1 || l.pool_stride < 1) throw config_error(where + ": bad parameters");
          if (l.pool_size > cur.h || l.pool_size > cur.w) {
            throw config_error(where + ": pool " + std::to_string(l.pool_size) +
                               " larger than input " + cur.str());
          }
          cur = {(cur.h - l.pool_size) / l.pool_stride + 1,
                 (cur.w - l.pool_size) / l.pool_stride + 1, cur.c};
          break;
        }
        case LayerKind::relu:
          break;
        case LayerKind::flatten:
          cur = {1, 1, cur.count()};
          break;
        case LayerKind::dense:
          if (l.units < 1) throw config_error(where + ": units must be >= 1");
          cur = {1, 1, l.units};
          break;
        case LayerKind::softmax:
          if (cur.h != 1 || cur.w != 1) {
            throw config_error(where + ": softmax expects a flat input, got " + cur.str());
          }
          break;
      }
      shapes.push_back(cur);
    }
    const LayerSpec& last = layers.back();
    const LayerSpec& prev = layers[layers.size() - 2];
    if (last.kind != LayerKind::softmax || prev.kind != LayerKind::dense ||
        prev.units != num_classes) {
      throw config_error("model must end with dense(num_classes), softmax");
    }
    return shapes;
  }

  static ModelSpec mini_vgg(Shape input, int num_classes) {
    ModelSpec s;
    s.input = input;
    s.num_classes = num_classes;
    int ch = 4;
    for (int block = 0; block < 3; ++block) {
      s.layers.push_back(LayerSpec::conv(ch, 3, 1, 1));
      s.layers.push_back(LayerSpec::relu());
      s.layers.push_back(LayerSpec::maxpool(2, 2));
      ch *= 2;
    }
    s.layers.push_back(LayerSpec::flatten());
    s.layers.push_back(LayerSpec::dense(256));
    s.layers.push_back(LayerSpec::relu());
    s.layers.push_back(LayerSpec::dense(num_classes));
    s.layers.push_back(LayerSpec::softmax());
    return s;
  }

  static ModelSpec mini_alexnet(Shape input, int num_classes) {
    ModelSpec s;
    s.input = input;
    s.num_classes = num_classes;
    s.layers.push_back(LayerSpec::conv(8, 7, 2, 3));
    s.layers.push_back(LayerSpec::relu());
    s.layers.push_back(LayerSpec::maxpool(2, 2));
    s.layers.push_back(LayerSpec::conv(16, 5, 1, 2));
    s.layers.push_back(LayerSpec::relu());
    s.layers.push_back(LayerSpec::maxpool(2, 2));
    s.layers.push_back(LayerSpec::flatten());
    s.layers.push_back(LayerSpec::dense(256));
    s.layers.push_back(LayerSpec::relu());
    s.layers.push_back(LayerSpec::dense(num_classes));
    s.layers.push_back(LayerSpec::softmax());
    return s;
  }

  static ModelSpec preset(const std::string& name, Shape input, int num_classes) {
    if (name == "mini-vgg") return mini_vgg(input, num_classes);
    if (name == "mini-alexnet") return mini_alexnet(input, num_classes);
    throw config_error("unknown architecture preset: " + name);
  }
};

inline nlohmann::ordered_json to_json(const ModelSpec& spec) {
  nlohmann::ordered_json j;
  j["input"] = {spec.input.h, spec.input.w, spec.input.c};
  j["num_classes"] = spec.num_classes;
  auto arr = nlohmann::ordered_json::array();
  for (const LayerSpec& l : spec.layers) {
    nlohmann::ordered_json jl;
    jl["kind"] = to_string(l.kind);
    switch (l.kind) {
      case LayerKind::conv:
        jl["out_channels"] = l.out_channels;
        jl["kernel"] = l.kernel;
        jl["stride"] = l.stride;
        jl["padding"] = l.padding;
        break;
      case LayerKind::maxpool:
        jl["size"] = l.pool_size;
        jl["stride"] = l.pool_stride;
        break;
      case LayerKind::dense:
        jl["units"] = l.units;
        break;
      default:
        break;
    }
    arr.push_back(std::move(jl));
  }
  j["layers"] = std::move(arr);
  return j;
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec spec;
    spec.input = {j.at("input").at(0).get<int>(), j.at("input").at(1).get<int>(),
                  j.at("input").at(2).get<int>()};
    spec.num_classes = j.at("num_classes").get<int>();
    for (const auto& jl : j.at("layers")) {
      const std::string kind = jl.at("kind").get<std::string>();
      if (kind == "conv") {
        spec.layers.push_back(LayerSpec::conv(jl.at("out_channels").get<int>(),
                                              jl.at("kernel").get<int>(),
                                              jl.at("stride").get<int>(),
                                              jl.at("padding").get<int>()));
      } else if (kind == "maxpool") {
        spec.layers.push_back(LayerSpec::maxpool(jl.at("size").get<int>(),
                                                 jl.at("stride").get<int>()));
      } else if (kind == "relu") {
        spec.layers.push_back(LayerSpec::relu());
      } else if (kind == "flatten") {
        spec.layers.push_back(LayerSpec::flatten());
      } else if (kind == "dense") {
        spec.layers.push_back(LayerSpec::dense(jl.at("units").get<int>()));
      } else if (kind == "softmax") {
        spec.layers.push_back(LayerSpec::softmax());
      } else {
        throw config_error("unknown layer kind in model document: " + kind);
      }
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("malformed model document: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Runtime layers
// ---------------------------------------------------------------------------

// Per-layer scratch produced by forward and consumed by backward. Keeping it
// outside the layers makes forward const and the model shareable across
// threads.
struct LayerAux {
  std::vector<int> argmax;  // maxpool only
};

struct Workspace {
  std::vector<std::vector<double>> acts;   // acts[0] = input, acts[i+1] = layer i output
  std::vector<std::vector<double>> gacts;  // gradient buffers, same shapes
  std::vector<LayerAux> aux;
};

class Layer {
 public:
  Layer(const LayerSpec& spec, Shape in, Shape out) : spec_(spec), in_(in), out_(out) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }
  Shape in_shape() const { return in_; }
  Shape out_shape() const { return out_; }

  virtual void forward(const double* x, double* y, LayerAux& aux) const = 0;
  // gy is dL/dy; writes dL/dx into gx and accumulates parameter gradients.
  virtual void backward(const double* x, const double* y, const double* gy, double* gx,
                        const LayerAux& aux, std::vector<std::vector<double>>& pgrads) const = 0;

  virtual std::vector<std::vector<double>*> param_arrays() { return {}; }
  virtual std::vector<const std::vector<double>*> param_arrays() const { return {}; }
  virtual void init_params(Rng&) {}

 protected:
  LayerSpec spec_;
  Shape in_, out_;
};

class ConvLayer final : public Layer {
 public:
  ConvLayer(const LayerSpec& spec, Shape in, Shape out)
      : Layer(spec, in, out),
        weights_(static_cast<std::size_t>(spec.out_channels) * spec.kernel * spec.kernel * in.c),
        bias_(static_cast<std::size_t>(spec.out_channels), 0.0) {}

  // Weight layout: [ky][kx][ic][oc]; the innermost loops run contiguously
  // over output channels so they vectorize.
  void init_params(Rng& rng) override {
    const double fan_in = static_cast<double>(spec_.kernel) * spec_.kernel * in_.c;
    const double limit = std::sqrt(6.0 / fan_in);  // He-uniform
    for (double& w : weights_) w = rng.uniform(-limit, limit);
    std::fill(bias_.begin(), bias_.end(), 0.0);
  }

  void forward(const double* x, double* y, LayerAux&) const override {
    const int k = spec_.kernel, stride = spec_.stride, pad = spec_.padding;
    const int ic = in_.c, ih = in_.h, iw = in_.w;
    const int oc = out_.c, oh = out_.h, ow = out_.w;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double* ycell = y + (static_cast<std::size_t>(oy) * ow + ox) * oc;
        std::copy_n(bias_.data(), oc, ycell);
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= ih) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= iw) continue;
            const double* xcell = x + (static_cast<std::size_t>(iy) * iw + ix) * ic;
            const double* wk =
                weights_.data() + (static_cast<std::size_t>(ky) * k + kx) * ic * oc;
            for (int i = 0; i < ic; ++i) {
              const double xv = xcell[i];
              const double* wrow = wk + static_cast<std::size_t>(i) * oc;
              for (int o = 0; o < oc; ++o) ycell[o] += xv * wrow[o];
            }
          }
        }
      }
    }
  }

  void backward(const double* x, const double*, const double* gy, double* gx, const LayerAux&,
                std::vector<std::vector<double>>& pgrads) const override {
    const int k = spec_.kernel, stride = spec_.stride, pad = spec_.padding;
    const int ic = in_.c, ih = in_.h, iw = in_.w;
    const int oc = out_.c, oh = out_.h, ow = out_.w;
    std::vector<double>& gw = pgrads[0];
    std::vector<double>& gb = pgrads[1];
    std::fill_n(gx, static_cast<std::size_t>(in_.count()), 0.0);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double* gycell = gy + (static_cast<std::size_t>(oy) * ow + ox) * oc;
        for (int o = 0; o < oc; ++o) gb[o] += gycell[o];
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= ih) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= iw) continue;
            const std::size_t xoff = (static_cast<std::size_t>(iy) * iw + ix) * ic;
            const std::size_t wbase = (static_cast<std::size_t>(ky) * k + kx) * ic * oc;
            for (int i = 0; i < ic; ++i) {
              const double xv = x[xoff + i];
              const double* wrow = weights_.data() + wbase + static_cast<std::size_t>(i) * oc;
              double* gwrow = gw.data() + wbase + static_cast<std::size_t>(i) * oc;
              double acc = 0.0;
              for (int o = 0; o < oc; ++o) {
                gwrow[o] += xv * gycell[o];
                acc += wrow[o] * gycell[o];
              }
              gx[xoff + i] += acc;
            }
          }
        }
      }
    }
  }

  std::vector<std::vector<double>*> param_arrays() override { return {&weights_, &bias_}; }
  std::vector<const std::vector<double>*> param_arrays() const override {
    return {&weights_, &bias_};
  }

 private:
  std::vector<double> weights_;
  std::vector<double> bias_;
};

class MaxPoolLayer final : public Layer {
 public:
  using Layer::Layer;

  void forward(const double* x, double* y, LayerAux& aux) const override {
    const int size = spec_.pool_size, stride = spec_.pool_stride;
    const int c = in_.c, iw = in_.w, oh = out_.h, ow = out_.w;
    aux.argmax.assign(static_cast<std::size_t>(out_.count()), 0);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int ch = 0; ch < c; ++ch) {
          double best = -std::numeric_limits<double>::infinity();
          int best_idx = 0;
          for (int py = 0; py < size; ++py) {
            const int iy = oy * stride + py;
            for (int px = 0; px < size; ++px) {
              const int ix = ox * stride + px;
              const int idx = (iy * iw + ix) * c + ch;
              if (x[idx] > best) {  // first maximum wins on ties
                best = x[idx];
                best_idx = idx;
              }
            }
          }
          const std::size_t o = (static_cast<std::size_t>(oy) * ow + ox) * c + ch;
          y[o] = best;
          aux.argmax[o] = best_idx;
        }
      }
    }
  }

  void backward(const double*, const double*, const double* gy, double* gx, const LayerAux& aux,
                std::vector<std::vector<double>>&) const override {
    std::fill_n(gx, static_cast<std::size_t>(in_.count()), 0.0);
    for (std::size_t o = 0; o < aux.argmax.size(); ++o) gx[aux.argmax[o]] += gy[o];
  }
};

class ReluLayer final : public Layer {
 public:
  using Layer::Layer;

  void forward(const double* x, double* y, LayerAux&) const override {
    const int n = in_.count();
    for (int i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  }

  void backward(const double* x, const double*, const double* gy, double* gx, const LayerAux&,
                std::vector<std::vector<double>>&) const override {
    const int n = in_.count();
    for (int i = 0; i < n; ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
  }
};

class FlattenLayer final : public Layer {
 public:
  using Layer::Layer;

  void forward(const double* x, double* y, LayerAux&) const override {
    std::copy_n(x, in_.count(), y);
  }
  void backward(const double*, const double*, const double* gy, double* gx, const LayerAux&,
                std::vector<std::vector<double>>&) const override {
    std::copy_n(gy, in_.count(), gx);
  }
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(const LayerSpec& spec, Shape in, Shape out)
      : Layer(spec, in, out),
        weights_(static_cast<std::size_t>(spec.units) * in.count()),
        bias_(static_cast<std::size_t>(spec.units), 0.0) {}

  void init_params(Rng& rng) override {
    const double fan_in = in_.count(), fan_out = out_.count();
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));  // Xavier-uniform
    for (double& w : weights_) w = rng.uniform(-limit, limit);
    std::fill(bias_.begin(), bias_.end(), 0.0);
  }

  void forward(const double* x, double* y, LayerAux&) const override {
    const int n_in = in_.count(), n_out = out_.count();
    for (int o = 0; o < n_out; ++o) {
      const double* wrow = weights_.data() + static_cast<std::size_t>(o) * n_in;
      double acc = bias_[o];
      for (int i = 0; i < n_in; ++i) acc += wrow[i] * x[i];
      y[o] = acc;
    }
  }

  void backward(const double* x, const double*, const double* gy, double* gx, const LayerAux&,
                std::vector<std::vector<double>>& pgrads) const override {
    const int n_in = in_.count(), n_out = out_.count();
    std::vector<double>& gw = pgrads[0];
    std::vector<double>& gb = pgrads[1];
    std::fill_n(gx, static_cast<std::size_t>(n_in), 0.0);
    for (int o = 0; o < n_out; ++o) {
      const double delta = gy[o];
      gb[o] += delta;
      const std::size_t base = static_cast<std::size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) {
        gw[base + i] += x[i] * delta;
        gx[i] += weights_[base + i] * delta;
      }
    }
  }

  std::vector<std::vector<double>*> param_arrays() override { return {&weights_, &bias_}; }
  std::vector<const std::vector<double>*> param_arrays() const override {
    return {&weights_, &bias_};
  }

 private:
  std::vector<double> weights_;
  std::vector<double> bias_;
};

// Log-sum-exp stabilized softmax; rows sum to 1 even for logits around 1e4.
class SoftmaxLayer final : public Layer {
 public:
  using Layer::Layer;

  void forward(const double* x, double* y, LayerAux&) const override {
    const int n = in_.count();
    double mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      y[i] = std::exp(x[i] - mx);
      sum += y[i];
    }
    for (int i = 0; i < n; ++i) y[i] /= sum;
  }

  void backward(const double*, const double* y, const double* gy, double* gx, const LayerAux&,
                std::vector<std::vector<double>>&) const override {
    const int n = in_.count();
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += gy[i] * y[i];
    for (int i = 0; i < n; ++i) gx[i] = y[i] * (gy[i] - dot);
  }
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

using Gradients = std::vector<std::vector<std::vector<double>>>;  // [layer][array][i]

class Model {
 public:
  explicit Model(ModelSpec spec, std::uint64_t init_seed = 0) : spec_(std::move(spec)) {
    const std::vector<Shape> shapes = spec_.validate();
    Shape cur = spec_.input;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      layers_.push_back(make_layer(spec_.layers[i], cur, shapes[i]));
      cur = shapes[i];
    }
    Rng rng(init_seed);
    for (auto& l : layers_) l->init_params(rng);
  }

  const ModelSpec& spec() const { return spec_; }
  std::size_t num_layers() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  Workspace make_workspace() const {
    Workspace ws;
    ws.acts.resize(layers_.size() + 1);
    ws.gacts.resize(layers_.size() + 1);
    ws.aux.resize(layers_.size());
    ws.acts[0].resize(static_cast<std::size_t>(spec_.input.count()));
    ws.gacts[0].resize(static_cast<std::size_t>(spec_.input.count()));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      ws.acts[i + 1].resize(static_cast<std::size_t>(layers_[i]->out_shape().count()));
      ws.gacts[i + 1].resize(static_cast<std::size_t>(layers_[i]->out_shape().count()));
    }
    return ws;
  }

  // Forward pass over one sample; returns the class probabilities.
  const std::vector<double>& forward_sample(const image::ImageTensor& img, Workspace& ws) const {
    const Shape in = spec_.input;
    if (img.height != in.h || img.width != in.w || img.channels != in.c) {
      throw data_error("model input: expected shape " + in.str() + ", got (" +
                       std::to_string(img.height) + "," + std::to_string(img.width) + "," +
                       std::to_string(img.channels) + ")");
    }
    ws.acts[0] = img.pixels;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i]->forward(ws.acts[i].data(), ws.acts[i + 1].data(), ws.aux[i]);
    }
    return ws.acts.back();
  }

  // Backward pass for the sample most recently run through forward_sample on
  // this workspace. dloss_dout is dL/d(probabilities).
  void backward_sample(Workspace& ws, const std::vector<double>& dloss_dout,
                       Gradients& grads) const {
    ws.gacts.back() = dloss_dout;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      layers_[i]->backward(ws.acts[i].data(), ws.acts[i + 1].data(), ws.gacts[i + 1].data(),
                           ws.gacts[i].data(), ws.aux[i], grads[i]);
    }
  }

  Gradients zero_gradients() const {
    Gradients g(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (const std::vector<double>* p : std::as_const(*layers_[i]).param_arrays()) {
        g[i].emplace_back(p->size(), 0.0);
      }
    }
    return g;
  }

  std::vector<std::vector<double>*> param_arrays(std::size_t layer_idx) {
    return layers_[layer_idx]->param_arrays();
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& l : layers_) {
      for (const std::vector<double>* p : std::as_const(*l).param_arrays()) n += p->size();
    }
    return n;
  }

  std::vector<double> flat_params() const {
    std::vector<double> out;
    out.reserve(num_params());
    for (const auto& l : layers_) {
      for (const std::vector<double>* p : std::as_const(*l).param_arrays()) {
        out.insert(out.end(), p->begin(), p->end());
      }
    }
    return out;
  }

  void set_flat_params(const std::vector<double>& flat) {
    if (flat.size() != num_params()) throw model_error("parameter vector size mismatch");
    std::size_t off = 0;
    for (auto& l : layers_) {
      for (std::vector<double>* p : l->param_arrays()) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), p->size(), p->begin());
        off += p->size();
      }
    }
  }

  bool params_finite() const {
    for (const auto& l : layers_) {
      for (const std::vector<double>* p : std::as_const(*l).param_arrays()) {
        for (double v : *p) {
          if (!std::isfinite(v)) return false;
        }
      }
    }
    return true;
  }

 private:
  static std::unique_ptr<Layer> make_layer(const LayerSpec& spec, Shape in, Shape out) {
    switch (spec.kind) {
      case LayerKind::conv: return std::make_unique<ConvLayer>(spec, in, out);
      case LayerKind::maxpool: return std::make_unique<MaxPoolLayer>(spec, in, out);
      case LayerKind::relu: return std::make_unique<ReluLayer>(spec, in, out);
      case LayerKind::flatten: return std::make_unique<FlattenLayer>(spec, in, out);
      case LayerKind::dense: return std::make_unique<DenseLayer>(spec, in, out);
      case LayerKind::softmax: return std::make_unique<SoftmaxLayer>(spec, in, out);
    }
    throw config_error("unknown layer kind");
  }

  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

inline constexpr double kLossEpsilon = 1e-12;

// Mean categorical cross-entropy, -sum y*log(p + eps) averaged over the
// batch. p + eps is capped at 1 so a perfect prediction scores exactly 0.
inline double cross_entropy(const std::vector<std::vector<double>>& probs,
                            const std::vector<std::vector<double>>& one_hot) {
  if (probs.size() != one_hot.size() || probs.empty()) {
    throw data_error("cross_entropy: batch size mismatch or empty batch");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < probs.size(); ++b) {
    if (probs[b].size() != one_hot[b].size()) throw data_error("cross_entropy: row size mismatch");
    for (std::size_t i = 0; i < probs[b].size(); ++i) {
      if (one_hot[b][i] != 0.0) {
        total -= one_hot[b][i] * std::log(std::min(1.0, probs[b][i] + kLossEpsilon));
      }
    }
  }
  return total / static_cast<double>(probs.size());
}

inline std::vector<double> one_hot(int label, int num_classes) {
  std::vector<double> v(static_cast<std::size_t>(num_classes), 0.0);
  if (label < 0 || label >= num_classes) throw data_error("one_hot: label out of range");
  v[static_cast<std::size_t>(label)] = 1.0;
  return v;
}

// dL/dp for one sample of the batch-mean cross-entropy.
inline std::vector<double> cross_entropy_grad(const std::vector<double>& probs,
                                              const std::vector<double>& one_hot_row,
                                              std::size_t batch_size) {
  std::vector<double> g(probs.size(), 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (one_hot_row[i] != 0.0) {
      g[i] = -one_hot_row[i] / (std::min(1.0, probs[i] + kLossEpsilon) *
                                static_cast<double>(batch_size));
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Batch helpers, prediction
// ---------------------------------------------------------------------------

struct Sample {
  image::ImageTensor image;
  int label = 0;
};

inline std::vector<std::vector<double>> forward(const Model& model,
                                                const std::vector<image::ImageTensor>& batch) {
  std::vector<std::vector<double>> out;
  out.reserve(batch.size());
  Workspace ws = model.make_workspace();
  for (const image::ImageTensor& img : batch) out.push_back(model.forward_sample(img, ws));
  return out;
}

// Argmax class plus the full distribution; ties resolve to the lowest class
// ordinal.
inline std::pair<int, std::vector<double>> predict_index(const Model& model,
                                                         const image::ImageTensor& img) {
  Workspace ws = model.make_workspace();
  std::vector<double> probs = model.forward_sample(img, ws);
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
    if (probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(best)]) best = i;
  }
  return {best, std::move(probs)};
}

inline std::pair<RoadClass, std::vector<double>> predict(const Model& model,
                                                         const image::ImageTensor& img) {
  auto [idx, probs] = predict_index(model, img);
  return {static_cast<RoadClass>(idx), std::move(probs)};
}

inline double mean_loss(const Model& model, const std::vector<Sample>& samples, Workspace& ws) {
  if (samples.empty()) throw data_error("mean_loss: empty sample set");
  double total = 0.0;
  const int k = model.spec().num_classes;
  for (const Sample& s : samples) {
    const std::vector<double>& p = model.forward_sample(s.image, ws);
    total -= std::log(std::min(1.0, p[static_cast<std::size_t>(s.label)] + kLossEpsilon));
    (void)k;
  }
  return total / static_cast<double>(samples.size());
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 0.0001;
  int batch_size = 16;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;
};

// Stop after `patience` consecutive epochs without a strict improvement of
// the validation loss; the best epoch's weights are restored by the caller.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // epoch is 1-based; returns true when training should stop after this epoch.
  bool observe(int epoch, double val_loss) {
    if (val_loss < best_) {
      best_ = val_loss;
      best_epoch_ = epoch;
      stale_ = 0;
      return false;
    }
    return ++stale_ >= patience_;
  }

  double best_loss() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int stale_ = 0;
};

struct TrainingMeta {
  int epochs_run = 0;
  int best_epoch = 0;
  bool stopped_early = false;
  std::vector<double> train_losses;
  std::vector<double> val_losses;
  std::uint64_t seed = 0;
};

struct TrainedModel {
  Model model;
  TrainingMeta meta;
};

namespace detail {

inline unsigned worker_count(std::size_t work_items) {
  const unsigned hw = std::thread::hardware_concurrency();
  const unsigned cap = hw == 0 ? 1 : std::min(hw, 8u);
  return static_cast<unsigned>(std::min<std::size_t>(cap, std::max<std::size_t>(1, work_items)));
}

// Runs fn(worker, item) for items [0, n) striped across workers. Results must
// be merged in worker order afterwards to keep reductions deterministic.
template <typename Fn>
void striped_parallel(std::size_t n, unsigned workers, const Fn& fn) {
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(0u, i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += workers) fn(t, i);
    });
  }
  for (std::thread& th : pool) th.join();
}

}  // namespace detail

// Parallel over samples; the reduction runs in sample order, so the result is
// bit-identical to the serial mean_loss regardless of worker count.
inline double mean_loss_parallel(const Model& model, const std::vector<Sample>& samples,
                                 std::vector<Workspace>& workspaces) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(workspaces.size(),
                                                  detail::worker_count(samples.size())));
  std::vector<double> per_sample(samples.size(), 0.0);
  detail::striped_parallel(samples.size(), workers, [&](unsigned t, std::size_t i) {
    const Sample& s = samples[i];
    const std::vector<double>& p = model.forward_sample(s.image, workspaces[t]);
    per_sample[i] = std::log(std::min(1.0, p[static_cast<std::size_t>(s.label)] + kLossEpsilon));
  });
  double total = 0.0;
  for (double v : per_sample) total -= v;
  return total / static_cast<double>(samples.size());
}

// Mini-batch SGD with early stopping on validation loss. Seeded, with
// deterministic parallel gradient reduction, so identical inputs give
// bit-identical parameters on the same machine. init_params, when given,
// warm-starts the model instead of the seeded initialization.
inline TrainedModel train(const ModelSpec& spec, const std::vector<Sample>& train_set,
                          const std::vector<Sample>& val_set, const TrainConfig& cfg,
                          const std::vector<double>* init_params = nullptr) {
  if (train_set.empty() || val_set.empty()) throw data_error("train: empty train or val set");
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1) {
    throw config_error("train: batch_size, max_epochs and patience must be >= 1");
  }
  std::vector<int> coverage(static_cast<std::size_t>(spec.num_classes), 0);
  for (const Sample& s : train_set) {
    if (s.label < 0 || s.label >= spec.num_classes) throw data_error("train: label out of range");
    ++coverage[static_cast<std::size_t>(s.label)];
  }
  for (int c = 0; c < spec.num_classes; ++c) {
    if (coverage[static_cast<std::size_t>(c)] == 0) {
      throw data_error("train: class " + std::to_string(c) + " missing from the train split");
    }
  }

  Model model(spec, cfg.seed);
  if (init_params) model.set_flat_params(*init_params);
  Rng shuffle_rng(cfg.seed ^ 0x5deece66dULL);
  EarlyStopper stopper(cfg.patience);
  TrainingMeta meta;
  meta.seed = cfg.seed;

  const unsigned workers =
      detail::worker_count(static_cast<std::size_t>(cfg.batch_size));
  std::vector<Workspace> workspaces;
  std::vector<Gradients> worker_grads;
  for (unsigned t = 0; t < workers; ++t) {
    workspaces.push_back(model.make_workspace());
    worker_grads.push_back(model.zero_gradients());
  }

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> best_params = model.flat_params();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::size_t bsize = stop - start;
      for (auto& wg : worker_grads) {
        for (auto& layer_g : wg) {
          for (auto& arr : layer_g) std::fill(arr.begin(), arr.end(), 0.0);
        }
      }
      std::vector<double> worker_loss(workers, 0.0);
      detail::striped_parallel(bsize, workers, [&](unsigned t, std::size_t i) {
        const Sample& s = train_set[order[start + i]];
        const std::vector<double>& p = model.forward_sample(s.image, workspaces[t]);
        worker_loss[t] -=
            std::log(std::min(1.0, p[static_cast<std::size_t>(s.label)] + kLossEpsilon));
        model.backward_sample(workspaces[t],
                              cross_entropy_grad(p, one_hot(s.label, spec.num_classes), bsize),
                              worker_grads[t]);
      });
      double batch_loss = 0.0;
      for (double v : worker_loss) batch_loss += v;
      batch_loss /= static_cast<double>(bsize);
      if (!std::isfinite(batch_loss)) {
        throw model_error("train: loss diverged at epoch " + std::to_string(epoch) + ", batch " +
                          std::to_string(batch_index));
      }
      for (std::size_t li = 0; li < worker_grads[0].size(); ++li) {
        auto arrays = model.param_arrays(li);
        for (std::size_t ai = 0; ai < arrays.size(); ++ai) {
          std::vector<double>& p = *arrays[ai];
          for (unsigned t = 0; t < workers; ++t) {  // worker order: deterministic merge
            const std::vector<double>& g = worker_grads[t][li][ai];
            for (std::size_t j = 0; j < p.size(); ++j) p[j] -= cfg.learning_rate * g[j];
          }
        }
      }
      epoch_loss += batch_loss * static_cast<double>(bsize);
      seen += bsize;
    }
    meta.train_losses.push_back(epoch_loss / static_cast<double>(seen));

    if (!model.params_finite()) {
      throw model_error("train: parameters diverged at epoch " + std::to_string(epoch));
    }
    const double val_loss = mean_loss_parallel(model, val_set, workspaces);
    if (!std::isfinite(val_loss)) {
      throw model_error("train: validation loss diverged at epoch " + std::to_string(epoch));
    }
    meta.val_losses.push_back(val_loss);
    meta.epochs_run = epoch;

    const double prev_best = stopper.best_loss();
    const bool stop = stopper.observe(epoch, val_loss);
    if (val_loss < prev_best) best_params = model.flat_params();
    if (stop) {
      meta.stopped_early = true;
      break;
    }
  }

  model.set_flat_params(best_params);
  meta.best_epoch = stopper.best_epoch();
  if (!model.params_finite()) throw model_error("train: non-finite parameters after training");
  return {std::move(model), std::move(meta)};
}

// ---------------------------------------------------------------------------
// Serialization: "RSM1", u64 json length, spec JSON, then per parameter array
// a u64 element count followed by little-endian float32 values, in layer
// order. float32 -> double -> float32 is lossless, so save/load/save is
// byte-identical.
// ---------------------------------------------------------------------------

inline void save_model(const std::string& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw model_error("cannot write model file: " + path);
  const std::string spec_json = to_json(model.spec()).dump();
  out.write("RSM1", 4);
  const std::uint64_t jlen = spec_json.size();
  out.write(reinterpret_cast<const char*>(&jlen), sizeof jlen);
  out.write(spec_json.data(), static_cast<std::streamsize>(spec_json.size()));
  for (std::size_t li = 0; li < model.num_layers(); ++li) {
    for (const std::vector<double>* arr : model.layer(li).param_arrays()) {
      const std::uint64_t n = arr->size();
      out.write(reinterpret_cast<const char*>(&n), sizeof n);
      for (double v : *arr) {
        const float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof f);
      }
    }
  }
  if (!out) throw model_error("short write on model file: " + path);
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw model_error("cannot open model file: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "RSM1", 4) != 0) {
    throw model_error("bad magic in model file: " + path);
  }
  std::uint64_t jlen = 0;
  in.read(reinterpret_cast<char*>(&jlen), sizeof jlen);
  std::string spec_json(jlen, '\0');
  in.read(spec_json.data(), static_cast<std::streamsize>(jlen));
  if (in.gcount() != static_cast<std::streamsize>(jlen)) {
    throw model_error("truncated model file: " + path);
  }
  Model model(model_spec_from_json(nlohmann::json::parse(spec_json)));
  std::vector<double> flat;
  flat.reserve(model.num_params());
  for (std::size_t li = 0; li < model.num_layers(); ++li) {
    for (const std::vector<double>* arr : model.layer(li).param_arrays()) {
      std::uint64_t n = 0;
      in.read(reinterpret_cast<char*>(&n), sizeof n);
      if (!in || n != arr->size()) {
        throw model_error("parameter block size mismatch in model file: " + path);
      }
      for (std::uint64_t i = 0; i < n; ++i) {
        float f = 0.0f;
        in.read(reinterpret_cast<char*>(&f), sizeof f);
        flat.push_back(static_cast<double>(f));
      }
    }
  }
  if (!in) throw model_error("truncated model file: " + path);
  model.set_flat_params(flat);
  return model;
}

}  // namespace roadsurf::neural
