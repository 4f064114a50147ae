#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "evtrojan/representations.hpp"

namespace evtrojan::nn {

/// Fully connected layer, weights row-major (out x in).
struct Dense {
  int in = 0;
  int out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  Dense() = default;
  Dense(int in_dim, int out_dim)
      : in(in_dim), out(out_dim),
        weight(static_cast<std::size_t>(in_dim) * out_dim, 0.0), bias(out_dim, 0.0) {}
};

enum class OutputActivation { identity, logistic };

/// ReLU on every hidden layer, `activation` on the last one.
struct Mlp {
  std::vector<Dense> layers;
  OutputActivation activation = OutputActivation::identity;

  /// Post-activation values of every layer, input first.
  struct Trace {
    std::vector<std::vector<double>> values;
  };

  int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out; }

  std::vector<double> forward(std::span<const double> input, Trace* trace = nullptr) const;

  /// Backpropagates `d_output` through a recorded forward pass, accumulating
  /// parameter gradients into `grad` (same architecture). Returns d input.
  std::vector<double> backward(const Trace& trace, std::span<const double> d_output,
                               Mlp& grad) const;

  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

/// widths = {in, h1, ..., out}. He-uniform init for hidden layers, a
/// smaller Glorot-uniform init for the output layer, zero biases.
Mlp make_mlp(std::span<const int> widths, OutputActivation activation, std::uint64_t seed);
Mlp zeros_like(const Mlp& net);

struct ClassifierShape {
  int channels = 8;
  int pooled_height = 8;
  int pooled_width = 8;
  int hidden = 128;
  int classes = 4;

  int features() const { return channels * pooled_height * pooled_width; }
  friend bool operator==(const ClassifierShape&, const ClassifierShape&) = default;
};

/// Classifier parameters theta (the dense stack) plus the per-channel affine
/// representation weights omega applied to the pooled representation.
struct ModelParams {
  ClassifierShape shape;
  // Fixed per-feature standardization of the pooled input, clamped to
  // +-input_clip (not trained); empty means none.
  std::vector<double> input_mean;
  std::vector<double> input_scale;
  double input_clip = 30.0;
  std::vector<double> omega_scale;
  std::vector<double> omega_shift;
  Mlp net;

  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

ModelParams init_model(const ClassifierShape& shape, std::uint64_t seed);
ModelParams zeros_like(const ModelParams& params);

/// Adaptive average pooling of every channel onto a ph x pw grid; cell i
/// covers rows [floor(i*H/ph), ceil((i+1)*H/ph)).
std::vector<double> average_pool(const RepresentationTensor& rep, int ph, int pw);

std::vector<double> forward(const ModelParams& params, const RepresentationTensor& rep);

std::vector<double> softmax(std::span<const double> logits);

struct LossGrad {
  double loss = 0.0;
  ModelParams grad;
};

/// Softmax cross-entropy on one sample and its exact gradient over all
/// parameters (omega included).
LossGrad ce_loss_backward(const ModelParams& params, const RepresentationTensor& rep, int label);

/// Lowest index wins ties.
int argmax(std::span<const double> values);

struct OptimState {
  double lr = 1e-4;
  double momentum = 0.9;
  std::vector<std::vector<double>> velocity;  // sized on first step
};

/// v <- momentum * v + g;  p <- p - lr * v.
void sgd_step(std::span<const std::span<double>> params,
              std::span<const std::span<const double>> grads, OptimState& state);
void sgd_step(ModelParams& params, const ModelParams& grads, OptimState& state);
void sgd_step(Mlp& params, const Mlp& grads, OptimState& state);

/// lr0 * gamma^epoch.
double lr_schedule(int epoch, double lr0, double gamma = 0.5);

/// Largest relative error between `analytic` and a central-difference
/// estimate of grad f at `point`. Relative error is |a - n| / max(|a|, |n|, 1e-7).
/// With max_coords > 0 and fewer coordinates than the point, a seeded
/// subset of that many coordinates is checked.
double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> point, std::span<const double> analytic,
                  double eps = 1e-6, std::size_t max_coords = 0, std::uint64_t seed = 0);

std::vector<double> flatten(std::span<const std::span<const double>> tensors);
void unflatten(std::span<const double> flat, std::span<const std::span<double>> tensors);

}  // namespace evtrojan::nn
