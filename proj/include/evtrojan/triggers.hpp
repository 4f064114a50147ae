#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evtrojan/event.hpp"
#include "evtrojan/neural.hpp"
#include "evtrojan/representations.hpp"

namespace evtrojan {

enum class TriggerMode { immutable, mutable_ };

/// Trigger layout: an h x w grid of m = h*w events anchored at `origin`.
struct TriggerSpec {
  int origin_x = 0;
  int origin_y = 0;
  int height = 10;
  int width = 10;
  int m = 100;
  double alpha = 0.01;  // shared normalized timestamp (immutable mode)
  double beta = 1.0;    // polarity
  TriggerMode mode = TriggerMode::immutable;

  /// Checks h*w = m, alpha and beta ranges, and (when given) that the region
  /// fits the sensor.
  void validate() const;
  void validate(const SensorGeometry& geometry) const;
};

/// Grid coordinates of the trigger, row-major over the region.
std::vector<std::pair<int, int>> trigger_layout(const TriggerSpec& spec);

EventStream make_immutable_trigger(const TriggerSpec& spec, const SensorGeometry& geometry);

/// m timestamps drawn uniformly from the stream: without replacement when the
/// stream has at least m events, with replacement otherwise.
std::vector<double> sample_timestamps(const EventStream& stream, int m, std::uint64_t seed);

/// Trigger-timestamp generator: a 5-layer MLP m -> 64 -> 64 -> 64 -> 64 -> m
/// with ReLU hidden units and a logistic output, so timestamps land in (0, 1).
struct GeneratorParams {
  nn::Mlp net;
};

inline constexpr int kGeneratorWidth = 64;
inline constexpr int kGeneratorHiddenLayers = 4;

GeneratorParams init_generator(int m, std::uint64_t seed);
GeneratorParams zero_generator(int m);

/// T_xi(t): the generated timestamps for sampled benign timestamps `t`.
std::vector<double> generate_timestamps(const GeneratorParams& params,
                                        std::span<const double> sampled);

EventStream generate_mutable(const GeneratorParams& params, std::span<const double> sampled,
                             const TriggerSpec& spec, const SensorGeometry& geometry);

/// Concatenation followed by a stable sort on t; stream events precede
/// trigger events at equal timestamps.
EventStream inject(const EventStream& stream, const EventStream& trigger);

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 2.0;
};

struct TriggerLoss {
  double value = 0.0;
  double cosine = 0.0;
  double psi = 0.0;
  std::vector<double> grad;  // d value / d generated
};

/// lambda1 * cos(generated, original) + lambda2 * psi, where psi is the sum of
/// squared differences of the means and the population variances.
TriggerLoss trigger_loss(std::span<const double> generated, std::span<const double> original,
                         const LossWeights& weights = {});

/// Trigger loss and its gradient with respect to the generator parameters.
struct GeneratorLossGrad {
  TriggerLoss loss;
  nn::Mlp grad;
};

GeneratorLossGrad generator_loss_backward(const GeneratorParams& params,
                                          std::span<const double> sampled,
                                          const LossWeights& weights = {});

/// Representation-level patch baseline: every channel inside the block is set
/// to `value`.
RepresentationTensor inject_patch(const RepresentationTensor& rep, int origin_x, int origin_y,
                                  int height, int width, double value);

}  // namespace evtrojan
