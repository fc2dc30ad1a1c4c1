// Copyright 2026 The dsup Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dsup/toynet.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Core>

#if defined(__SSE__) || defined(__x86_64__)
#include <xmmintrin.h>
#define DSUP_HAVE_MXCSR 1
#endif

namespace dsup {
namespace {

constexpr int kKernel = 3;
constexpr int kTaps = kKernel * kKernel;
constexpr int kMinInputSize = 8;
// Fixed gain on the last layer's output. The losses are summed over
// pixels, so without it the early gradients at the default learning rate
// are large enough to switch off most hidden units.
constexpr float kOutputScale = 0.3f;

template <typename T>
Activation<T> make_activation(int channels, int height, int width) {
  Activation<T> a;
  a.channels = channels;
  a.height = height;
  a.width = width;
  a.data.assign(static_cast<std::size_t>(channels) * height * width, T{0});
  return a;
}

int conv_out_size(int in, int stride) { return (in - 1) / stride + 1; }

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// Output columns x with 0 <= x * stride + offset < extent.
std::pair<int, int> valid_range(int out_extent, int in_extent, int stride, int offset) {
  int lo = 0;
  while (lo < out_extent && lo * stride + offset < 0) ++lo;
  int hi = out_extent;
  while (hi > lo && (hi - 1) * stride + offset >= in_extent) --hi;
  return {lo, hi};
}

// Per-thread scratch reused across calls; the column matrices are large
// enough that fresh allocations cost more than the products.
template <typename T>
struct ConvScratch {
  RowMatrix<T> col;
  RowMatrix<T> grad_col;
};

template <typename T>
ConvScratch<T>& conv_scratch() {
  thread_local ConvScratch<T> scratch;
  return scratch;
}

// Column matrix of the zero-padded input: row (i * 9 + tap), column
// (y * ow + x) holds in(i, y * stride + ky - 1, x * stride + kx - 1).
template <typename T>
void im2col(const Activation<T>& in, int stride, int oh, int ow, RowMatrix<T>& col) {
  const Eigen::Index cols = static_cast<Eigen::Index>(oh) * ow;
  col.resize(static_cast<Eigen::Index>(in.channels) * kTaps, cols);
  col.setZero();
  for (int t = 0; t < kTaps; ++t) {
    const int ky = t / kKernel - 1;
    const int kx = t % kKernel - 1;
    const auto [y_lo, y_hi] = valid_range(oh, in.height, stride, ky);
    const auto [x_lo, x_hi] = valid_range(ow, in.width, stride, kx);
    for (int i = 0; i < in.channels; ++i) {
      const T* plane = in.data.data() + static_cast<std::size_t>(i) * in.height * in.width;
      T* dst = col.data() + (static_cast<Eigen::Index>(i) * kTaps + t) * cols;
      for (int y = y_lo; y < y_hi; ++y) {
        const T* src = plane + static_cast<std::size_t>(y * stride + ky) * in.width + kx;
        T* row = dst + static_cast<std::size_t>(y) * ow;
        if (stride == 1) {
          std::copy(src + x_lo, src + x_hi, row + x_lo);
        } else {
          for (int x = x_lo; x < x_hi; ++x) row[x] = src[x * stride];
        }
      }
    }
  }
}

// Adds each column-matrix entry back onto the input pixel it was read from.
template <typename T>
void col2im(const RowMatrix<T>& col, int stride, int oh, int ow, Activation<T>& grad_in) {
  const Eigen::Index cols = static_cast<Eigen::Index>(oh) * ow;
  for (int t = 0; t < kTaps; ++t) {
    const int ky = t / kKernel - 1;
    const int kx = t % kKernel - 1;
    const auto [y_lo, y_hi] = valid_range(oh, grad_in.height, stride, ky);
    const auto [x_lo, x_hi] = valid_range(ow, grad_in.width, stride, kx);
    for (int i = 0; i < grad_in.channels; ++i) {
      T* plane = grad_in.data.data() + static_cast<std::size_t>(i) * grad_in.height * grad_in.width;
      const T* src = col.data() + (static_cast<Eigen::Index>(i) * kTaps + t) * cols;
      for (int y = y_lo; y < y_hi; ++y) {
        T* dst = plane + static_cast<std::size_t>(y * stride + ky) * grad_in.width + kx;
        const T* row = src + static_cast<std::size_t>(y) * ow;
        if (stride == 1) {
          for (int x = x_lo; x < x_hi; ++x) dst[x] += row[x];
        } else {
          for (int x = x_lo; x < x_hi; ++x) dst[x * stride] += row[x];
        }
      }
    }
  }
}

template <typename T>
Activation<T> plain_conv_forward(const Activation<T>& in, const ConvLayer<T>& layer) {
  const LayerSpec& spec = layer.spec;
  const int oh = conv_out_size(in.height, spec.stride);
  const int ow = conv_out_size(in.width, spec.stride);
  const Eigen::Index pixels = static_cast<Eigen::Index>(oh) * ow;
  RowMatrix<T>& col = conv_scratch<T>().col;
  im2col(in, spec.stride, oh, ow, col);
  Activation<T> out = make_activation<T>(spec.out_channels, oh, ow);

  const ConstMatrixMap<T> w(layer.weight.data(), spec.out_channels,
                            static_cast<Eigen::Index>(spec.in_channels) * kTaps);
  MatrixMap<T> y(out.data.data(), spec.out_channels, pixels);
  y.noalias() = w * col;
  for (int o = 0; o < spec.out_channels; ++o) {
    T* row = out.data.data() + static_cast<std::size_t>(o) * pixels;
    for (Eigen::Index j = 0; j < pixels; ++j) {
      const T v = row[j] + layer.bias[o];
      row[j] = spec.relu ? std::max(v, T{0}) : v;
    }
  }
  return out;
}

// grad_out must already have the ReLU mask applied. Accumulates into
// grad_layer and, when grad_in is non-null, writes dL/d(input).
template <typename T>
void plain_conv_backward(const Activation<T>& in, const ConvLayer<T>& layer,
                   const Activation<T>& grad_out, ConvLayer<T>& grad_layer,
                   Activation<T>* grad_in) {
  const LayerSpec& spec = layer.spec;
  const int oh = grad_out.height;
  const int ow = grad_out.width;
  const Eigen::Index pixels = static_cast<Eigen::Index>(oh) * ow;
  const Eigen::Index k = static_cast<Eigen::Index>(spec.in_channels) * kTaps;
  ConvScratch<T>& scratch = conv_scratch<T>();
  RowMatrix<T>& col = scratch.col;
  im2col(in, spec.stride, oh, ow, col);
  const ConstMatrixMap<T> g(grad_out.data.data(), spec.out_channels, pixels);

  for (int o = 0; o < spec.out_channels; ++o) {
    const T* row = grad_out.data.data() + static_cast<std::size_t>(o) * pixels;
    T bias_sum{0};
    for (Eigen::Index j = 0; j < pixels; ++j) bias_sum += row[j];
    grad_layer.bias[o] += bias_sum;
  }
  MatrixMap<T> gw(grad_layer.weight.data(), spec.out_channels, k);
  gw.noalias() += g * col.transpose();

  if (grad_in != nullptr) {
    const ConstMatrixMap<T> w(layer.weight.data(), spec.out_channels, k);
    RowMatrix<T>& grad_col = scratch.grad_col;
    grad_col.resize(k, pixels);
    grad_col.noalias() = w.transpose() * g;
    *grad_in = make_activation<T>(in.channels, in.height, in.width);
    col2im(grad_col, spec.stride, oh, ow, *grad_in);
  }
}

// A 3x3 convolution over a nearest-neighbor 2x upsampled input, evaluated
// at the input resolution. Output pixel (2Y + a, 2X + b) only reads input
// rows Y + floor((a + ky - 1) / 2) and columns likewise, so each of the four
// output phases is a 3x3 convolution of the low-resolution input with
// folded weights. Row (phase * out + o) of the folded matrix holds them.
int folded_offset(int phase_bit, int k) { return (phase_bit + k - 1 + 2) / 2 - 1; }

template <typename T>
RowMatrix<T> fold_upsampled_weights(const ConvLayer<T>& layer) {
  const LayerSpec& spec = layer.spec;
  RowMatrix<T> folded = RowMatrix<T>::Zero(4 * spec.out_channels,
                                           static_cast<Eigen::Index>(spec.in_channels) * kTaps);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int o = 0; o < spec.out_channels; ++o) {
        const Eigen::Index row = (a * 2 + b) * spec.out_channels + o;
        for (int i = 0; i < spec.in_channels; ++i) {
          const T* w = layer.weight.data() + (static_cast<std::size_t>(o) * spec.in_channels + i) * kTaps;
          for (int t = 0; t < kTaps; ++t) {
            const int dy = folded_offset(a, t / kKernel);
            const int dx = folded_offset(b, t % kKernel);
            folded(row, i * kTaps + (dy + 1) * kKernel + (dx + 1)) += w[t];
          }
        }
      }
    }
  }
  return folded;
}

template <typename T>
Activation<T> upsampled_conv_forward(const Activation<T>& in, const ConvLayer<T>& layer) {
  const LayerSpec& spec = layer.spec;
  const Eigen::Index pixels = static_cast<Eigen::Index>(in.height) * in.width;
  RowMatrix<T>& col = conv_scratch<T>().col;
  im2col(in, 1, in.height, in.width, col);
  const RowMatrix<T> phased = fold_upsampled_weights(layer) * col;

  Activation<T> out = make_activation<T>(spec.out_channels, in.height * 2, in.width * 2);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int o = 0; o < spec.out_channels; ++o) {
        const T* src = phased.data() + ((a * 2 + b) * spec.out_channels + o) * pixels;
        T* dst = out.data.data() + static_cast<std::size_t>(o) * out.height * out.width;
        for (int y = 0; y < in.height; ++y) {
          T* row = dst + static_cast<std::size_t>(2 * y + a) * out.width + b;
          for (int x = 0; x < in.width; ++x) {
            const T v = src[y * in.width + x] + layer.bias[o];
            row[2 * x] = spec.relu ? std::max(v, T{0}) : v;
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void upsampled_conv_backward(const Activation<T>& in, const ConvLayer<T>& layer,
                             const Activation<T>& grad_out, ConvLayer<T>& grad_layer,
                             Activation<T>* grad_in) {
  const LayerSpec& spec = layer.spec;
  const Eigen::Index pixels = static_cast<Eigen::Index>(in.height) * in.width;
  const Eigen::Index k = static_cast<Eigen::Index>(spec.in_channels) * kTaps;
  ConvScratch<T>& scratch = conv_scratch<T>();
  RowMatrix<T>& col = scratch.col;
  im2col(in, 1, in.height, in.width, col);

  RowMatrix<T> phased(4 * spec.out_channels, pixels);
  for (int o = 0; o < spec.out_channels; ++o) {
    const T* src = grad_out.data.data() + static_cast<std::size_t>(o) * grad_out.height * grad_out.width;
    T bias_sum{0};
    for (std::size_t j = 0; j < static_cast<std::size_t>(grad_out.height) * grad_out.width; ++j) {
      bias_sum += src[j];
    }
    grad_layer.bias[o] += bias_sum;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        T* dst = phased.data() + ((a * 2 + b) * spec.out_channels + o) * pixels;
        for (int y = 0; y < in.height; ++y) {
          const T* row = src + static_cast<std::size_t>(2 * y + a) * grad_out.width + b;
          for (int x = 0; x < in.width; ++x) dst[y * in.width + x] = row[2 * x];
        }
      }
    }
  }

  const RowMatrix<T> grad_folded = phased * col.transpose();
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int o = 0; o < spec.out_channels; ++o) {
        const Eigen::Index row = (a * 2 + b) * spec.out_channels + o;
        for (int i = 0; i < spec.in_channels; ++i) {
          T* gw = grad_layer.weight.data() + (static_cast<std::size_t>(o) * spec.in_channels + i) * kTaps;
          for (int t = 0; t < kTaps; ++t) {
            const int dy = folded_offset(a, t / kKernel);
            const int dx = folded_offset(b, t % kKernel);
            gw[t] += grad_folded(row, i * kTaps + (dy + 1) * kKernel + (dx + 1));
          }
        }
      }
    }
  }

  if (grad_in != nullptr) {
    RowMatrix<T>& grad_col = scratch.grad_col;
    grad_col.resize(k, pixels);
    grad_col.noalias() = fold_upsampled_weights(layer).transpose() * phased;
    *grad_in = make_activation<T>(in.channels, in.height, in.width);
    col2im(grad_col, 1, in.height, in.width, *grad_in);
  }
}

// `in` is the layer input before any upsampling.
template <typename T>
Activation<T> conv_forward(const Activation<T>& in, const ConvLayer<T>& layer) {
  return layer.spec.upsample_before ? upsampled_conv_forward(in, layer) : plain_conv_forward(in, layer);
}

template <typename T>
void conv_backward(const Activation<T>& in, const ConvLayer<T>& layer,
                   const Activation<T>& grad_out, ConvLayer<T>& grad_layer,
                   Activation<T>* grad_in) {
  if (layer.spec.upsample_before) {
    upsampled_conv_backward(in, layer, grad_out, grad_layer, grad_in);
  } else {
    plain_conv_backward(in, layer, grad_out, grad_layer, grad_in);
  }
}

int round_up(int v, int multiple) { return (v + multiple - 1) / multiple * multiple; }

}  // namespace

Architecture Architecture::default_for(int num_object_classes) {
  Architecture arch;
  arch.num_object_classes = num_object_classes;
  arch.layers = {
      {3, 16, 1, true, false},
      {16, 32, 2, true, false},
      {32, 32, 1, true, false},
      {32, num_object_classes + 1, 1, false, true},
  };
  return arch;
}

void Architecture::validate() const {
  if (num_object_classes < 1) throw std::invalid_argument("Architecture: C must be >= 1");
  if (layers.empty()) throw std::invalid_argument("Architecture: no layers");
  if (layers.front().in_channels != 3) {
    throw std::invalid_argument("Architecture: first layer must take 3 input channels");
  }
  if (layers.back().out_channels != num_object_classes + 1) {
    throw std::invalid_argument("Architecture: last layer must emit C + 1 channels");
  }
  int factor = 1;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const LayerSpec& l = layers[k];
    if (l.in_channels < 1 || l.out_channels < 1) {
      throw std::invalid_argument("Architecture: layer " + std::to_string(k) +
                                  " has a non-positive channel count");
    }
    if (k > 0 && l.in_channels != layers[k - 1].out_channels) {
      throw std::invalid_argument("Architecture: channel mismatch entering layer " +
                                  std::to_string(k));
    }
    if (l.stride != 1 && l.stride != 2) {
      throw std::invalid_argument("Architecture: stride must be 1 or 2");
    }
    if (l.upsample_before) {
      if (l.stride != 1) {
        throw std::invalid_argument("Architecture: layer " + std::to_string(k) +
                                    " cannot both upsample and stride");
      }
      if (factor < 2) throw std::invalid_argument("Architecture: upsample without downsample");
      factor /= 2;
    }
    factor *= l.stride;
  }
  if (factor != 1) {
    throw std::invalid_argument("Architecture: output resolution differs from input");
  }
}

int Architecture::total_stride() const {
  int factor = 1;
  int peak = 1;
  for (const auto& l : layers) {
    if (l.upsample_before) factor /= 2;
    factor *= l.stride;
    peak = std::max(peak, factor);
  }
  return peak;
}

template <typename T>
BasicNetParams<T> BasicNetParams<T>::zeros_like(const Architecture& arch) {
  BasicNetParams<T> p;
  p.arch = arch;
  for (const auto& spec : arch.layers) {
    ConvLayer<T> layer;
    layer.spec = spec;
    layer.weight.assign(static_cast<std::size_t>(spec.out_channels) * spec.in_channels * kTaps, T{0});
    layer.bias.assign(static_cast<std::size_t>(spec.out_channels), T{0});
    p.layers.push_back(std::move(layer));
  }
  return p;
}

template <typename T>
std::size_t BasicNetParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename T>
bool BasicNetParams<T>::same_shape(const BasicNetParams& other) const {
  if (!(arch == other.arch) || layers.size() != other.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].weight.size() != other.layers[k].weight.size() ||
        layers[k].bias.size() != other.layers[k].bias.size()) {
      return false;
    }
  }
  return true;
}

template <typename T>
BasicNetParams<T> init_params(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  BasicNetParams<T> p = BasicNetParams<T>::zeros_like(arch);
  std::mt19937_64 rng(seed);
  for (auto& layer : p.layers) {
    const double fan_in = static_cast<double>(layer.spec.in_channels) * kTaps;
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    for (T& w : layer.weight) w = static_cast<T>(normal(rng));
  }
  return p;
}

template <typename T>
BasicNetParams<T> convert_params(const BasicNetParams<float>& params) {
  BasicNetParams<T> out = BasicNetParams<T>::zeros_like(params.arch);
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    std::copy(params.layers[k].weight.begin(), params.layers[k].weight.end(),
              out.layers[k].weight.begin());
    std::copy(params.layers[k].bias.begin(), params.layers[k].bias.end(),
              out.layers[k].bias.begin());
  }
  return out;
}

template <typename T>
ForwardResult<T> forward(const BasicNetParams<T>& params, const RgbImage& image) {
  const DenormalFlushScope flush;
  const Dims dims = image.dims;
  if (dims.height < kMinInputSize || dims.width < kMinInputSize) {
    throw std::invalid_argument("forward: input " + to_string(dims) +
                                " is smaller than the 8x8 minimum");
  }
  if (image.rgb.size() != dims.pixel_count() * 3) {
    throw std::invalid_argument("forward: image buffer does not match its dims");
  }
  const int stride = params.arch.total_stride();
  const Dims padded(round_up(dims.height, stride), round_up(dims.width, stride));

  ForwardResult<T> result;
  ForwardCache<T>& cache = result.cache;
  cache.arch = params.arch;
  cache.input_dims = dims;
  cache.padded_dims = padded;

  Activation<T> x = make_activation<T>(3, padded.height, padded.width);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < dims.height; ++y) {
      for (int px = 0; px < dims.width; ++px) {
        x.data[(static_cast<std::size_t>(c) * padded.height + y) * padded.width + px] =
            static_cast<T>(image.at(px, y, c) - 0.5f);
      }
    }
  }

  for (const auto& layer : params.layers) {
    cache.inputs.push_back(x);
    x = conv_forward(x, layer);
    cache.outputs.push_back(x);
  }

  const int channels = params.arch.num_object_classes + 1;
  FeatureMap& scores = result.scores;
  scores = FeatureMap(dims, channels);
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < dims.height; ++y) {
      const T* src = x.data.data() + (static_cast<std::size_t>(c) * padded.height + y) * padded.width;
      for (int px = 0; px < dims.width; ++px) {
        scores.at(dims.index(px, y), c) = static_cast<double>(src[px] * static_cast<T>(kOutputScale));
      }
    }
  }
  return result;
}

template <typename T>
BasicNetParams<T> backward(const BasicNetParams<T>& params, const ForwardCache<T>& cache,
                           const FeatureMap& grad_scores) {
  const DenormalFlushScope flush;
  if (!(cache.arch == params.arch) || cache.inputs.size() != params.layers.size() ||
      cache.outputs.size() != params.layers.size()) {
    throw std::invalid_argument("backward: forward cache does not match the parameters");
  }
  const Dims dims = cache.input_dims;
  const Dims padded = cache.padded_dims;
  const int channels = params.arch.num_object_classes + 1;
  if (grad_scores.dims() != dims || grad_scores.channels() != channels) {
    throw std::invalid_argument("backward: output gradient shape does not match the forward pass");
  }

  Activation<T> grad = make_activation<T>(channels, padded.height, padded.width);
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < dims.height; ++y) {
      T* dst = grad.data.data() + (static_cast<std::size_t>(c) * padded.height + y) * padded.width;
      for (int px = 0; px < dims.width; ++px) {
        dst[px] = static_cast<T>(grad_scores.at(dims.index(px, y), c)) * static_cast<T>(kOutputScale);
      }
    }
  }

  BasicNetParams<T> grads = BasicNetParams<T>::zeros_like(params.arch);
  for (std::size_t k = params.layers.size(); k-- > 0;) {
    const ConvLayer<T>& layer = params.layers[k];
    if (layer.spec.relu) {
      const auto& out = cache.outputs[k].data;
      for (std::size_t j = 0; j < grad.data.size(); ++j) {
        if (!(out[j] > T{0})) grad.data[j] = T{0};
      }
    }
    const bool need_input_grad = k > 0;
    Activation<T> grad_in;
    conv_backward(cache.inputs[k], layer, grad, grads.layers[k],
                  need_input_grad ? &grad_in : nullptr);
    if (!need_input_grad) break;
    grad = std::move(grad_in);
  }
  return grads;
}

PixelLabelMap argmax_labels(const FeatureMap& scores) {
  PixelLabelMap labels(scores.dims());
  for (std::size_t i = 0; i < scores.pixel_count(); ++i) {
    const auto row = scores.row(i);
    int best = 0;
    for (int c = 1; c < scores.channels(); ++c) {
      if (row[static_cast<std::size_t>(c)] > row[static_cast<std::size_t>(best)]) best = c;
    }
    labels[i] = static_cast<std::uint8_t>(best);
  }
  return labels;
}

PixelLabelMap predict(const NetParams& params, const RgbImage& image) {
  return argmax_labels(forward(params, image).scores);
}

template <typename T>
OptimizerState<T> OptimizerState<T>::for_params(const BasicNetParams<T>& params) {
  OptimizerState<T> opt;
  opt.velocity = BasicNetParams<T>::zeros_like(params.arch);
  return opt;
}

DenormalFlushScope::DenormalFlushScope() {
#ifdef DSUP_HAVE_MXCSR
  saved_ = _mm_getcsr();
  // FTZ (bit 15) and DAZ (bit 6).
  _mm_setcsr(saved_ | 0x8040u);
#endif
}

DenormalFlushScope::~DenormalFlushScope() {
#ifdef DSUP_HAVE_MXCSR
  _mm_setcsr(saved_);
#endif
}

template <typename T>
void sgd_update(std::span<T> param, std::span<const T> grad, std::span<T> buffer, double lr,
                double momentum, double weight_decay) {
  if (param.size() != grad.size() || param.size() != buffer.size()) {
    throw std::invalid_argument("sgd_update: parameter, gradient and buffer sizes differ");
  }
  const T m = static_cast<T>(momentum);
  const T wd = static_cast<T>(weight_decay);
  const T rate = static_cast<T>(lr);
  for (std::size_t j = 0; j < param.size(); ++j) {
    buffer[j] = m * buffer[j] + (grad[j] + wd * param[j]);
    param[j] -= rate * buffer[j];
  }
}

template <typename T>
void sgd_step(BasicNetParams<T>& params, const BasicNetParams<T>& grads, OptimizerState<T>& opt) {
  if (!params.same_shape(grads) || !params.same_shape(opt.velocity)) {
    throw std::invalid_argument("sgd_step: parameter, gradient and buffer shapes differ");
  }
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& g = grads.layers[k];
    const bool finite =
        std::all_of(g.weight.begin(), g.weight.end(), [](T v) { return std::isfinite(v); }) &&
        std::all_of(g.bias.begin(), g.bias.end(), [](T v) { return std::isfinite(v); });
    if (!finite) {
      throw NumericError("sgd_step: non-finite gradient in layer " + std::to_string(k));
    }
  }
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    auto& p = params.layers[k];
    const auto& g = grads.layers[k];
    auto& v = opt.velocity.layers[k];
    sgd_update<T>(p.weight, g.weight, v.weight, opt.lr, opt.momentum, opt.weight_decay);
    sgd_update<T>(p.bias, g.bias, v.bias, opt.lr, opt.momentum, 0.0);
  }
}

#define DSUP_INSTANTIATE_TOYNET(T)                                                              \
  template struct BasicNetParams<T>;                                                            \
  template struct OptimizerState<T>;                                                            \
  template BasicNetParams<T> init_params<T>(const Architecture&, std::uint64_t);                \
  template BasicNetParams<T> convert_params<T>(const BasicNetParams<float>&);                   \
  template ForwardResult<T> forward<T>(const BasicNetParams<T>&, const RgbImage&);              \
  template BasicNetParams<T> backward<T>(const BasicNetParams<T>&, const ForwardCache<T>&,      \
                                         const FeatureMap&);                                    \
  template void sgd_update<T>(std::span<T>, std::span<const T>, std::span<T>, double, double,   \
                              double);                                                          \
  template void sgd_step<T>(BasicNetParams<T>&, const BasicNetParams<T>&, OptimizerState<T>&);

DSUP_INSTANTIATE_TOYNET(float)
DSUP_INSTANTIATE_TOYNET(double)

#undef DSUP_INSTANTIATE_TOYNET

}  // namespace dsup
