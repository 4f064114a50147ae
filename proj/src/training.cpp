#include "evtrojan/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "evtrojan/error.hpp"
#include "evtrojan/seed.hpp"

namespace evtrojan {

namespace {

// Child-seed tags.
constexpr std::uint64_t kTagSelect = 1;
constexpr std::uint64_t kTagModel = 2;
constexpr std::uint64_t kTagGenerator = 3;
constexpr std::uint64_t kTagShuffle = 4;
constexpr std::uint64_t kTagStep = 5;
constexpr std::uint64_t kTagTrigger = 6;

}  // namespace

std::string_view to_string(PoisonMode mode) {
  switch (mode) {
    case PoisonMode::immutable: return "immutable";
    case PoisonMode::mutable_: return "mutable";
    case PoisonMode::patch_baseline: return "patch";
  }
  return "immutable";
}

PoisonMode poison_mode_from_string(std::string_view name) {
  for (PoisonMode m : {PoisonMode::immutable, PoisonMode::mutable_, PoisonMode::patch_baseline})
    if (to_string(m) == name) return m;
  throw Error(Errc::config_invalid, "unknown poison mode '" + std::string(name) + "'");
}

PatchTrigger patch_from_spec(const TriggerSpec& spec) {
  return PatchTrigger{spec.origin_x, spec.origin_y, spec.height, spec.width, std::nullopt};
}

RepresentationTensor apply_patch(const RepresentationTensor& rep, const PatchTrigger& patch) {
  double value = 0.0;
  if (patch.value) {
    value = *patch.value;
  } else if (!rep.data.empty()) {
    value = *std::max_element(rep.data.begin(), rep.data.end());
  }
  return inject_patch(rep, patch.origin_x, patch.origin_y, patch.height, patch.width, value);
}

std::size_t poison_count(double rho, std::size_t n) {
  return static_cast<std::size_t>(std::floor(rho * static_cast<double>(n) + 1e-9));
}

std::uint64_t trigger_sample_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_seed(mix_seed(seed, kTagTrigger), index);
}

namespace {

TriggerSpec spec_for(const PoisonPolicy& policy) {
  TriggerSpec spec = policy.spec;
  spec.mode = policy.mode == PoisonMode::mutable_ ? TriggerMode::mutable_ : TriggerMode::immutable;
  return spec;
}

EventStream triggered(const EventStream& clean, const PoisonPolicy& policy,
                      const GeneratorParams* generator, std::uint64_t sample_seed) {
  const TriggerSpec spec = spec_for(policy);
  switch (policy.mode) {
    case PoisonMode::immutable: return inject(clean, make_immutable_trigger(spec, clean.geometry));
    case PoisonMode::mutable_: {
      const auto t = sample_timestamps(clean, spec.m, sample_seed);
      return inject(clean, generate_mutable(*generator, t, spec, clean.geometry));
    }
    case PoisonMode::patch_baseline: return clean;
  }
  return clean;
}

void check_policy(std::span<const LabeledStream> dataset, const PoisonPolicy& policy,
                  const GeneratorParams* generator) {
  if (dataset.empty()) throw Error(Errc::empty_dataset, "cannot poison an empty dataset");
  if (!(policy.rho >= 0.0 && policy.rho <= 1.0))
    throw Error(Errc::config_invalid, "rho must lie in [0, 1]");
  if (policy.target < 0) throw Error(Errc::config_invalid, "target class must be >= 0");
  if (policy.mode == PoisonMode::mutable_ && generator == nullptr)
    throw Error(Errc::missing_generator, "mutable poisoning needs generator parameters");
  spec_for(policy).validate(dataset.front().stream.geometry);
}

}  // namespace

std::vector<PoisonedSample> build_poisoned_dataset(std::span<const LabeledStream> dataset,
                                                   const PoisonPolicy& policy,
                                                   const GeneratorParams* generator) {
  check_policy(dataset, policy, generator);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(policy.seed, kTagSelect));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> chosen(dataset.size(), false);
  const std::size_t k = poison_count(policy.rho, dataset.size());
  for (std::size_t i = 0; i < k; ++i) chosen[order[i]] = true;

  std::vector<PoisonedSample> out;
  out.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    PoisonedSample s;
    s.original_label = dataset[i].label;
    s.source = i;
    if (chosen[i]) {
      s.stream = triggered(dataset[i].stream, policy, generator, trigger_sample_seed(policy.seed, i));
      s.label = policy.target;
      s.poisoned = true;
    } else {
      s.stream = dataset[i].stream;
      s.label = dataset[i].label;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<LabeledStream> poison_all(std::span<const LabeledStream> dataset,
                                      const PoisonPolicy& policy,
                                      const GeneratorParams* generator) {
  check_policy(dataset, policy, generator);
  std::vector<LabeledStream> out;
  out.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i)
    out.push_back(LabeledStream{
        triggered(dataset[i].stream, policy, generator, trigger_sample_seed(policy.seed, i)),
        dataset[i].label});
  return out;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error(Errc::config_invalid, "batch_size must be >= 1");
  if (epochs < 1) throw Error(Errc::config_invalid, "epochs must be >= 1");
  if (hidden < 1 || pooled < 1) throw Error(Errc::config_invalid, "hidden and pooled must be >= 1");
  if (loss_weights.lambda1 < 0.0 || loss_weights.lambda2 < 0.0)
    throw Error(Errc::config_invalid, "loss weights must be >= 0");
  if (!(lr_classifier >= 0.0) || !(lr_generator >= 0.0) || !(lr_decay > 0.0))
    throw Error(Errc::config_invalid, "learning rates must be >= 0 and decay > 0");
  if (!(input_variance_floor > 0.0) || !(input_clip > 0.0))
    throw Error(Errc::config_invalid, "input_variance_floor and input_clip must be > 0");
  repr.validate();
}

nn::ClassifierShape classifier_shape(const TrainConfig& config, int classes) {
  return nn::ClassifierShape{channel_count(config.repr), config.pooled, config.pooled,
                             config.hidden, classes};
}

void standardize_input(nn::ModelParams& model, std::span<const LabeledStream> samples,
                       const ReprConfig& repr, double variance_floor, double clip) {
  if (samples.empty()) return;
  const nn::ClassifierShape& shape = model.shape;
  const std::size_t features = static_cast<std::size_t>(shape.features());
  std::vector<double> sum(features, 0.0);
  std::vector<double> sum_sq(features, 0.0);
  for (const LabeledStream& s : samples) {
    const RepresentationTensor rep = represent(s.stream, repr);
    if (rep.channels != shape.channels)
      throw Error(Errc::shape_mismatch, "representation channels do not match the model");
    const auto pooled = nn::average_pool(rep, shape.pooled_height, shape.pooled_width);
    for (std::size_t f = 0; f < features; ++f) {
      sum[f] += pooled[f];
      sum_sq[f] += pooled[f] * pooled[f];
    }
  }
  const double n = static_cast<double>(samples.size());
  model.input_clip = clip;
  model.input_mean.assign(features, 0.0);
  model.input_scale.assign(features, 1.0);
  for (std::size_t f = 0; f < features; ++f) {
    const double mean = sum[f] / n;
    const double var = std::max(0.0, sum_sq[f] / n - mean * mean);
    model.input_mean[f] = mean;
    model.input_scale[f] = 1.0 / std::sqrt(var + variance_floor);
  }
}

BatchGradients batch_gradients(const nn::ModelParams& model, const GeneratorParams* generator,
                               std::span<const PoisonedSample> poisoned,
                               std::span<const LabeledStream> clean,
                               std::span<const std::size_t> batch, const TrainConfig& config,
                               std::uint64_t step_seed) {
  const PoisonPolicy& policy = config.poison;
  const bool regenerate = policy.mode == PoisonMode::mutable_ && generator != nullptr;
  const PatchTrigger patch{policy.spec.origin_x, policy.spec.origin_y, policy.spec.height,
                           policy.spec.width, policy.patch_value};

  BatchGradients out;
  out.model = nn::zeros_like(model);
  if (regenerate) out.generator = nn::zeros_like(generator->net);

  const auto add = [](std::span<const std::span<double>> dst,
                      std::span<const std::span<const double>> src) {
    for (std::size_t t = 0; t < dst.size(); ++t)
      for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += src[t][i];
  };

  std::size_t mutable_members = 0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const PoisonedSample& sample = poisoned[batch[j]];
    RepresentationTensor rep;
    if (sample.poisoned && regenerate) {
      // Fresh trigger timestamps from the current generator (MutableT).
      const EventStream& source = clean[sample.source].stream;
      const TriggerSpec spec = spec_for(policy);
      const auto t = sample_timestamps(source, spec.m, mix_seed(step_seed, j));
      rep = represent(inject(source, generate_mutable(*generator, t, spec, source.geometry)),
                      config.repr);
      const GeneratorLossGrad g = generator_loss_backward(*generator, t, config.loss_weights);
      add(out.generator->tensors(), std::as_const(g.grad).tensors());
      out.trigger_loss += g.loss.value;
      ++mutable_members;
    } else {
      rep = represent(sample.stream, config.repr);
    }
    if (sample.poisoned && policy.mode == PoisonMode::patch_baseline) rep = apply_patch(rep, patch);

    const nn::LossGrad lg = nn::ce_loss_backward(model, rep, sample.label);
    add(out.model.tensors(), std::as_const(lg.grad).tensors());
    if (sample.poisoned) {
      out.poison_loss += lg.loss;
      ++out.poisoned_samples;
    } else {
      out.clean_loss += lg.loss;
      ++out.clean_samples;
    }
  }

  if (!batch.empty()) {
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto t : out.model.tensors())
      for (double& v : t) v *= inv;
  }
  if (!config.train_omega) {
    std::fill(out.model.omega_scale.begin(), out.model.omega_scale.end(), 0.0);
    std::fill(out.model.omega_shift.begin(), out.model.omega_shift.end(), 0.0);
  }
  if (out.generator) {
    if (mutable_members == 0) {
      out.generator.reset();
    } else {
      const double inv = 1.0 / static_cast<double>(mutable_members);
      for (auto t : out.generator->tensors())
        for (double& v : t) v *= inv;
    }
  }
  return out;
}

TrainResult train_backdoor(std::span<const LabeledStream> train, const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw Error(Errc::empty_dataset, "training set is empty");

  int classes = config.classes;
  if (classes == 0) {
    for (const LabeledStream& s : train) classes = std::max(classes, s.label + 1);
    classes = std::max({classes, config.poison.target + 1, 2});
  }
  if (config.poison.target >= classes)
    throw Error(Errc::config_invalid, "target class exceeds the class count");

  TrainResult result;
  const bool mutable_mode = config.poison.mode == PoisonMode::mutable_;
  if (mutable_mode)
    result.generator = init_generator(config.poison.spec.m, mix_seed(config.seed, kTagGenerator));
  const GeneratorParams* generator = result.generator ? &*result.generator : nullptr;

  const std::vector<PoisonedSample> poisoned =
      build_poisoned_dataset(train, config.poison, generator);
  result.model = nn::init_model(classifier_shape(config, classes), mix_seed(config.seed, kTagModel));
  if (config.standardize_input)
    standardize_input(result.model, train, config.repr, config.input_variance_floor,
                      config.input_clip);

  nn::OptimState opt_model{config.lr_classifier, config.momentum, {}};
  nn::OptimState opt_generator{config.lr_generator, config.momentum, {}};

  std::vector<std::size_t> order(poisoned.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    record.lr = nn::lr_schedule(epoch, config.lr_classifier, config.lr_decay);
    opt_model.lr = record.lr;
    opt_generator.lr = nn::lr_schedule(epoch, config.lr_generator, config.lr_decay);

    std::mt19937_64 rng(mix_seed(mix_seed(config.seed, kTagShuffle), static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t trigger_terms = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const BatchGradients g = batch_gradients(result.model, generator, poisoned, train, batch,
                                               config, mix_seed(mix_seed(config.seed, kTagStep), step++));
      nn::sgd_step(result.model, g.model, opt_model);
      if (g.generator) {
        nn::sgd_step(result.generator->net, *g.generator, opt_generator);
        trigger_terms += g.poisoned_samples;
      }
      record.clean_loss += g.clean_loss;
      record.poison_loss += g.poison_loss;
      record.trigger_loss += g.trigger_loss;
      record.clean_samples += g.clean_samples;
      record.poisoned_samples += g.poisoned_samples;
    }
    if (record.clean_samples) record.clean_loss /= static_cast<double>(record.clean_samples);
    if (record.poisoned_samples) record.poison_loss /= static_cast<double>(record.poisoned_samples);
    if (trigger_terms) record.trigger_loss /= static_cast<double>(trigger_terms);
    result.history.push_back(record);
  }
  return result;
}

}  // namespace evtrojan
