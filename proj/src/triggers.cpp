#include "evtrojan/triggers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "evtrojan/error.hpp"

namespace evtrojan {

void TriggerSpec::validate() const {
  if (height < 1 || width < 1) throw Error(Errc::shape_count_mismatch, "trigger shape must be >= 1x1");
  if (height * width != m)
    throw Error(Errc::shape_count_mismatch, "trigger shape " + std::to_string(height) + "x" +
                                                std::to_string(width) + " does not hold m=" +
                                                std::to_string(m) + " events");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::config_invalid, "alpha must lie in [0, 1]");
  if (beta != 1.0 && beta != -1.0) throw Error(Errc::config_invalid, "beta must be +1 or -1");
}

void TriggerSpec::validate(const SensorGeometry& geometry) const {
  validate();
  if (origin_x < 0 || origin_y < 0 || origin_x + width > geometry.width ||
      origin_y + height > geometry.height)
    throw Error(Errc::region_out_of_bounds,
                "trigger region at (" + std::to_string(origin_x) + "," + std::to_string(origin_y) +
                    ") size " + std::to_string(height) + "x" + std::to_string(width) +
                    " exceeds sensor " + std::to_string(geometry.width) + "x" +
                    std::to_string(geometry.height));
}

std::vector<std::pair<int, int>> trigger_layout(const TriggerSpec& spec) {
  std::vector<std::pair<int, int>> xy;
  xy.reserve(static_cast<std::size_t>(spec.m));
  for (int r = 0; r < spec.height; ++r)
    for (int c = 0; c < spec.width; ++c) xy.emplace_back(spec.origin_x + c, spec.origin_y + r);
  return xy;
}

EventStream make_immutable_trigger(const TriggerSpec& spec, const SensorGeometry& geometry) {
  if (spec.mode != TriggerMode::immutable)
    throw Error(Errc::config_invalid, "spec is not in immutable mode");
  spec.validate(geometry);
  EventStream out;
  out.geometry = geometry;
  out.time_domain = TimeDomain::normalized_unit;
  for (auto [x, y] : trigger_layout(spec))
    out.events.push_back(Event{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                               spec.alpha, spec.beta});
  return out;
}

std::vector<double> sample_timestamps(const EventStream& stream, int m, std::uint64_t seed) {
  if (stream.empty()) throw Error(Errc::empty_stream, "cannot sample timestamps from an empty stream");
  if (m < 1) throw Error(Errc::config_invalid, "m must be >= 1");
  std::mt19937_64 rng(seed);
  const std::size_t n = stream.size();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m));
  if (n >= static_cast<std::size_t>(m)) {
    // Partial Fisher-Yates: the first m slots end up a uniform sample.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.push_back(stream.events[idx[i]].t);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int i = 0; i < m; ++i) out.push_back(stream.events[pick(rng)].t);
  }
  return out;
}

GeneratorParams init_generator(int m, std::uint64_t seed) {
  std::vector<int> widths{m};
  for (int l = 0; l < kGeneratorHiddenLayers; ++l) widths.push_back(kGeneratorWidth);
  widths.push_back(m);
  return GeneratorParams{nn::make_mlp(widths, nn::OutputActivation::logistic, seed)};
}

GeneratorParams zero_generator(int m) {
  GeneratorParams g = init_generator(m, 0);
  g.net = nn::zeros_like(g.net);
  return g;
}

std::vector<double> generate_timestamps(const GeneratorParams& params,
                                        std::span<const double> sampled) {
  if (static_cast<int>(sampled.size()) != params.net.input_dim())
    throw Error(Errc::length_mismatch, "generator expects " + std::to_string(params.net.input_dim()) +
                                           " timestamps, got " + std::to_string(sampled.size()));
  return params.net.forward(sampled);
}

EventStream generate_mutable(const GeneratorParams& params, std::span<const double> sampled,
                             const TriggerSpec& spec, const SensorGeometry& geometry) {
  if (spec.mode != TriggerMode::mutable_) throw Error(Errc::config_invalid, "spec is not in mutable mode");
  spec.validate(geometry);
  if (static_cast<int>(sampled.size()) != spec.m)
    throw Error(Errc::length_mismatch, "need exactly m sampled timestamps");
  const std::vector<double> ts = generate_timestamps(params, sampled);
  EventStream out;
  out.geometry = geometry;
  out.time_domain = TimeDomain::normalized_unit;
  const auto layout = trigger_layout(spec);
  for (std::size_t i = 0; i < layout.size(); ++i)
    out.events.push_back(Event{static_cast<std::uint16_t>(layout[i].first),
                               static_cast<std::uint16_t>(layout[i].second), ts[i], spec.beta});
  sort_by_time(out.events);
  return out;
}

EventStream inject(const EventStream& stream, const EventStream& trigger) {
  if (trigger.empty()) return stream;
  if (!(stream.geometry == trigger.geometry))
    throw Error(Errc::geometry_mismatch, "trigger geometry differs from the stream's");
  if (stream.time_domain != trigger.time_domain)
    throw Error(Errc::time_domain_mismatch, "trigger and stream use different time domains");
  EventStream out = stream;
  out.events.insert(out.events.end(), trigger.events.begin(), trigger.events.end());
  sort_by_time(out.events);
  return out;
}

TriggerLoss trigger_loss(std::span<const double> generated, std::span<const double> original,
                         const LossWeights& weights) {
  if (generated.size() != original.size())
    throw Error(Errc::length_mismatch, "generated and original timestamp vectors differ in length");
  if (generated.size() < 2) throw Error(Errc::length_mismatch, "trigger loss needs m >= 2");
  const std::size_t m = generated.size();
  const double md = static_cast<double>(m);

  double dot = 0.0, nn_a = 0.0, nn_b = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    dot += generated[i] * original[i];
    nn_a += generated[i] * generated[i];
    nn_b += original[i] * original[i];
    sum_a += generated[i];
    sum_b += original[i];
  }
  if (!(nn_a > 0.0) || !(nn_b > 0.0))
    throw Error(Errc::zero_norm_vector, "cosine similarity undefined for a zero vector");
  const double norm_a = std::sqrt(nn_a);
  const double norm_b = std::sqrt(nn_b);
  const double mean_a = sum_a / md;
  const double mean_b = sum_b / md;
  double var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    var_a += (generated[i] - mean_a) * (generated[i] - mean_a);
    var_b += (original[i] - mean_b) * (original[i] - mean_b);
  }
  var_a /= md;
  var_b /= md;

  TriggerLoss out;
  out.cosine = dot / (norm_a * norm_b);
  out.psi = (mean_a - mean_b) * (mean_a - mean_b) + (var_a - var_b) * (var_a - var_b);
  out.value = weights.lambda1 * out.cosine + weights.lambda2 * out.psi;

  out.grad.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double d_cos = original[i] / (norm_a * norm_b) - out.cosine * generated[i] / nn_a;
    const double d_psi = 2.0 * (mean_a - mean_b) / md +
                         2.0 * (var_a - var_b) * 2.0 * (generated[i] - mean_a) / md;
    out.grad[i] = weights.lambda1 * d_cos + weights.lambda2 * d_psi;
  }
  return out;
}

GeneratorLossGrad generator_loss_backward(const GeneratorParams& params,
                                          std::span<const double> sampled,
                                          const LossWeights& weights) {
  nn::Mlp::Trace trace;
  if (static_cast<int>(sampled.size()) != params.net.input_dim())
    throw Error(Errc::length_mismatch, "generator input length mismatch");
  const std::vector<double> generated = params.net.forward(sampled, &trace);
  GeneratorLossGrad out;
  out.loss = trigger_loss(generated, sampled, weights);
  out.grad = nn::zeros_like(params.net);
  params.net.backward(trace, out.loss.grad, out.grad);
  return out;
}

RepresentationTensor inject_patch(const RepresentationTensor& rep, int origin_x, int origin_y,
                                  int height, int width, double value) {
  if (origin_x < 0 || origin_y < 0 || height < 0 || width < 0 || origin_x + width > rep.width ||
      origin_y + height > rep.height)
    throw Error(Errc::region_out_of_bounds, "patch does not fit the representation");
  RepresentationTensor out = rep;
  for (int c = 0; c < rep.channels; ++c)
    for (int y = origin_y; y < origin_y + height; ++y)
      for (int x = origin_x; x < origin_x + width; ++x) out.at(c, y, x) = value;
  return out;
}

}  // namespace evtrojan
