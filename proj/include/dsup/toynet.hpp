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

// A small fully convolutional network with hand-written backpropagation.
//
// Default layout (all kernels 3x3, zero "same" padding):
//   conv 3->16 + ReLU, conv 16->32 stride 2 + ReLU, conv 32->32 + ReLU,
//   nearest 2x upsample, conv 32->(C+1).
// The output has the input's spatial size. Inputs whose size is not a
// multiple of the total stride are zero padded at the bottom/right and the
// output is cropped back.
//
// Everything is templated on the scalar type: training runs in float, the
// finite-difference checks instantiate the same code in double.

#ifndef DSUP_TOYNET_HPP_
#define DSUP_TOYNET_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsup/core.hpp"
#include "dsup/labels.hpp"

namespace dsup {

struct LayerSpec {
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  bool relu = true;
  // Nearest-neighbor 2x upsampling applied to this layer's input.
  bool upsample_before = false;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Architecture {
  int num_object_classes = 0;
  std::vector<LayerSpec> layers;

  static Architecture default_for(int num_object_classes);

  // First layer takes 3 channels, last emits C + 1, channel widths chain,
  // and every stride-2 layer is matched by a later upsample.
  void validate() const;
  // Deepest downsampling factor; input sizes are padded to a multiple of it.
  int total_stride() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

template <typename T>
struct ConvLayer {
  LayerSpec spec;
  std::vector<T> weight;  // [out][in][3][3]
  std::vector<T> bias;    // [out]
};

// Also used to hold parameter gradients and momentum buffers.
template <typename T>
struct BasicNetParams {
  Architecture arch;
  std::vector<ConvLayer<T>> layers;

  static BasicNetParams zeros_like(const Architecture& arch);
  std::size_t parameter_count() const;
  bool same_shape(const BasicNetParams& other) const;
};

using NetParams = BasicNetParams<float>;

// Channel-major activation tensor.
template <typename T>
struct Activation {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;
};

template <typename T>
struct ForwardCache {
  Architecture arch;
  Dims input_dims;
  Dims padded_dims;
  // inputs[k] is the input of layer k before any upsampling; outputs[k] its
  // post-activation output.
  std::vector<Activation<T>> inputs;
  std::vector<Activation<T>> outputs;
};

template <typename T>
struct ForwardResult {
  FeatureMap scores;
  ForwardCache<T> cache;
};

template <typename T>
BasicNetParams<T> init_params(const Architecture& arch, std::uint64_t seed);

template <typename T>
BasicNetParams<T> convert_params(const BasicNetParams<float>& params);

// Inputs are centered as rgb - 0.5 and the last layer's output is scaled
// by a fixed 0.3 before it becomes the score map.
// Throws std::invalid_argument for images smaller than 8x8.
template <typename T>
ForwardResult<T> forward(const BasicNetParams<T>& params, const RgbImage& image);

// Gradients of the loss with respect to every weight and bias, given the
// loss gradient dL/df on the network output.
template <typename T>
BasicNetParams<T> backward(const BasicNetParams<T>& params, const ForwardCache<T>& cache,
                           const FeatureMap& grad_scores);

// Per-pixel argmax, ties to the lowest channel.
PixelLabelMap argmax_labels(const FeatureMap& scores);
PixelLabelMap predict(const NetParams& params, const RgbImage& image);

// Flushes denormals to zero on this thread while alive; forward and
// backward run under it. Late in training, backpropagated values drift into
// the denormal range where x86 arithmetic is several times slower.
class DenormalFlushScope {
 public:
  DenormalFlushScope();
  ~DenormalFlushScope();
  DenormalFlushScope(const DenormalFlushScope&) = delete;
  DenormalFlushScope& operator=(const DenormalFlushScope&) = delete;

 private:
  unsigned saved_ = 0;
};

template <typename T>
struct OptimizerState {
  double lr = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  BasicNetParams<T> velocity;

  static OptimizerState for_params(const BasicNetParams<T>& params);
};

// buffer <- momentum * buffer + (grad + weight_decay * param)
// param  <- param - lr * buffer
template <typename T>
void sgd_update(std::span<T> param, std::span<const T> grad, std::span<T> buffer, double lr,
                double momentum, double weight_decay);

// Applies sgd_update to every layer; biases skip weight decay. Throws
// NumericError naming the layer if a gradient is not finite.
template <typename T>
void sgd_step(BasicNetParams<T>& params, const BasicNetParams<T>& grads, OptimizerState<T>& opt);

}  // namespace dsup

#endif  // DSUP_TOYNET_HPP_
