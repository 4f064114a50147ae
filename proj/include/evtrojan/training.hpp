#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "evtrojan/neural.hpp"
#include "evtrojan/representations.hpp"
#include "evtrojan/synth.hpp"
#include "evtrojan/triggers.hpp"

namespace evtrojan {

enum class PoisonMode { immutable, mutable_, patch_baseline };

std::string_view to_string(PoisonMode mode);
PoisonMode poison_mode_from_string(std::string_view name);

/// Representation-level block used by the patch baseline. Without a value
/// the block is filled with the representation's maximum.
struct PatchTrigger {
  int origin_x = 0;
  int origin_y = 0;
  int height = 10;
  int width = 10;
  std::optional<double> value;
};

PatchTrigger patch_from_spec(const TriggerSpec& spec);
RepresentationTensor apply_patch(const RepresentationTensor& rep, const PatchTrigger& patch);

struct PoisonPolicy {
  double rho = 0.1;
  int target = 0;
  PoisonMode mode = PoisonMode::immutable;
  TriggerSpec spec;
  std::optional<double> patch_value;
  std::uint64_t seed = 0;
};

struct PoisonedSample {
  EventStream stream;
  int label = 0;
  bool poisoned = false;
  int original_label = 0;
  std::size_t source = 0;  // index into the clean dataset
};

/// floor(rho * n) without the 0.1 * 400 = 39.999.. hazard.
std::size_t poison_count(double rho, std::size_t n);

/// Seeded uniform choice of floor(rho * |D|) samples, each injected per the
/// policy mode and relabeled to the target. Patch-baseline samples keep their
/// events; the patch is applied to their representation downstream.
std::vector<PoisonedSample> build_poisoned_dataset(std::span<const LabeledStream> dataset,
                                                   const PoisonPolicy& policy,
                                                   const GeneratorParams* generator = nullptr);

/// Triggers every sample but keeps the true labels (ASR test sets).
std::vector<LabeledStream> poison_all(std::span<const LabeledStream> dataset,
                                      const PoisonPolicy& policy,
                                      const GeneratorParams* generator = nullptr);

/// Seed of the timestamp sample drawn for a mutable trigger on sample `index`.
std::uint64_t trigger_sample_seed(std::uint64_t seed, std::uint64_t index);

struct TrainConfig {
  int batch_size = 16;
  int epochs = 60;
  int classes = 0;  // 0: one more than the largest label
  int hidden = 128;
  int pooled = 8;
  LossWeights loss_weights;
  double lr_classifier = 1e-4;
  double lr_generator = 1e-4;
  double momentum = 0.9;
  double lr_decay = 0.5;  // per epoch
  bool train_omega = true;
  // Fixed per-feature standardization of the pooled input, estimated on the
  // clean training set before the first step.
  bool standardize_input = true;
  double input_variance_floor = 1e-6;
  double input_clip = 30.0;
  ReprConfig repr;
  PoisonPolicy poison;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double clean_loss = 0.0;
  double poison_loss = 0.0;
  double trigger_loss = 0.0;
  double lr = 0.0;
  std::size_t clean_samples = 0;
  std::size_t poisoned_samples = 0;
};

struct TrainResult {
  nn::ModelParams model;
  std::optional<GeneratorParams> generator;
  std::vector<EpochRecord> history;
};

struct BatchGradients {
  nn::ModelParams model;             // mean over the batch
  std::optional<nn::Mlp> generator;  // mean over the batch's mutable samples
  double clean_loss = 0.0;           // summed
  double poison_loss = 0.0;
  double trigger_loss = 0.0;
  std::size_t clean_samples = 0;
  std::size_t poisoned_samples = 0;
};

/// One iteration's gradients: cross-entropy of every batch member (poisoned
/// members are re-triggered with the current generator in mutable mode) for
/// theta/omega, and the trigger loss alone for the generator.
BatchGradients batch_gradients(const nn::ModelParams& model, const GeneratorParams* generator,
                               std::span<const PoisonedSample> poisoned,
                               std::span<const LabeledStream> clean,
                               std::span<const std::size_t> batch, const TrainConfig& config,
                               std::uint64_t step_seed);

nn::ClassifierShape classifier_shape(const TrainConfig& config, int classes);

/// Sets the model's fixed input standardization to (x - mean_f) /
/// sqrt(var_f + variance_floor) per pooled feature over `samples`, clamped
/// to +-clip.
void standardize_input(nn::ModelParams& model, std::span<const LabeledStream> samples,
                       const ReprConfig& repr, double variance_floor = 1e-6,
                       double clip = 30.0);

TrainResult train_backdoor(std::span<const LabeledStream> train, const TrainConfig& config);

}  // namespace evtrojan
