#pragma once

#include <cstdint>
#include <vector>

#include "retina/core/severity.hpp"
#include "retina/imaging/image.hpp"
#include "retina/nn/params.hpp"

namespace retina::nn {

/// Train mode normalizes BatchNorm with batch statistics; Inference uses
/// the running averages.
enum class Mode { Inference, Train };

inline constexpr double kBatchNormEps = 1e-5;

template <class T>
struct LayerCache {
  Tensor<T> input;
  Tensor<T> output;                     // Softmax only
  std::vector<std::uint32_t> argmax;    // MaxPool: flat input index per output cell
  std::vector<double> mean, inv_std;    // BatchNorm batch statistics (Train)
  std::vector<double> var;              // biased batch variance (Train)
  std::vector<LayerCache> branch, shortcut;
};

template <class T>
struct ForwardCache {
  Mode mode = Mode::Inference;
  std::vector<LayerCache<T>> layers;
};

/// Runs `layers` over a batch. Every layer output is checked for NaN/Inf
/// (NonFiniteActivation); shape errors raise ShapeMismatch. When `cache` is
/// given, it receives what `backward` needs.
template <class T>
Tensor<T> forward(const std::vector<LayerSpec>& layers, const Params<T>& params, const Tensor<T>& x,
                  Mode mode = Mode::Inference, ForwardCache<T>* cache = nullptr);

template <class T>
Tensor<T> forward(const ModelConfig& config, const Params<T>& params, const Tensor<T>& x,
                  Mode mode = Mode::Inference, ForwardCache<T>* cache = nullptr) {
  if (!(x.sample_shape() == config.input))
    throw NnError(NnErrc::ShapeMismatch, "input " + to_string(x.sample_shape()) + " does not match model input " +
                                             to_string(config.input));
  return forward(config.layers, params, x, mode, cache);
}

/// Gradient of a scalar loss with respect to every parameter tensor (zero
/// for running statistics) and to the input, given the gradient at the
/// output of the forward pass recorded in `cache`.
template <class T>
struct Backward {
  Params<T> params;
  Tensor<T> input;
};

template <class T>
Backward<T> backward(const std::vector<LayerSpec>& layers, const Params<T>& params, const ForwardCache<T>& cache,
                     const Tensor<T>& grad_out);

/// Folds the batch statistics recorded in a Train-mode cache into the
/// running averages: running = momentum * running + (1 - momentum) * batch.
void update_running_stats(const std::vector<LayerSpec>& layers, ModelParams& params,
                          const ForwardCache<float>& cache, double momentum = 0.9);

/// Interleaved HWC image to a one-sample CHW tensor.
Tensor4 to_tensor(const imaging::PlaneTensor& img);
/// Stacks images (all with the same dims) into a batch.
Tensor4 to_batch(const std::vector<const imaging::PlaneTensor*>& images);

/// Index of the largest value; ties go to the lower index.
int argmax(const float* values, int n);

/// Class prediction for each sample of a logits batch.
std::vector<Severity> predict(const Tensor4& logits);

}  // namespace retina::nn
