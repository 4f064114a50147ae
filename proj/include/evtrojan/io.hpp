#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evtrojan/evaluation.hpp"
#include "evtrojan/neural.hpp"
#include "evtrojan/representations.hpp"
#include "evtrojan/synth.hpp"
#include "evtrojan/training.hpp"
#include "evtrojan/triggers.hpp"

namespace evtrojan {

using nlohmann::json;

// JSON documents. Readers accept partial objects: missing keys keep their
// defaults, unknown keys are rejected so typos surface as config errors.
json to_json(const SceneConfig& c);
SceneConfig scene_from_json(const json& j);
json to_json(const DatasetRecipe& r);
DatasetRecipe recipe_from_json(const json& j);
json to_json(const TriggerSpec& s);
TriggerSpec trigger_spec_from_json(const json& j);
json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const json& j);
json to_json(const ReprConfig& c);
ReprConfig repr_from_json(const json& j);
json to_json(const StcConfig& c);
StcConfig stc_from_json(const json& j);
json to_json(const PoisonPolicy& p);
PoisonPolicy poison_from_json(const json& j);
json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j);
json to_json(const EpochRecord& r);
json to_json(const MetricReport& r);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

/// 64-bit FNV-1a over the compact dump (object keys are sorted).
std::string config_digest(const json& j);

// Model checkpoint: "EVTM" | u32 version | u32 channels, pooled_h, pooled_w,
// hidden, classes | u32 has_input_norm |
// [f64 input_clip, input_mean, input_scale] |
// f64 omega_scale, omega_shift, W1, b1, W2, b2 (LE).
std::vector<std::uint8_t> encode_model(const nn::ModelParams& params);
nn::ModelParams decode_model(std::span<const std::uint8_t> bytes);

// Generator checkpoint: "EVTG" | u32 version | u32 layers | per layer
// u32 in, u32 out, f64 weights, f64 bias (LE).
std::vector<std::uint8_t> encode_generator(const GeneratorParams& params);
GeneratorParams decode_generator(std::span<const std::uint8_t> bytes);

// On-disk datasets: a flat directory of <id>.bin, labels.json ({id: class}),
// sensor.json ({width, height}) and, for poisoned sets, flags.json
// ({id: bool}). Normalized timestamps are stored as microseconds over a
// one-second span; sensor.json records that span ("time_span_us") and loading
// divides by it. Directories without it are min-max normalized on load.
inline constexpr double kDiskSpanMicroseconds = 1'000'000.0;

struct DiskSample {
  std::string id;
  LabeledStream sample;
  bool poisoned = false;
};

EventStream to_disk_time(const EventStream& normalized);

void write_dataset(const std::filesystem::path& dir, std::span<const DiskSample> samples,
                   bool with_flags);
std::vector<DiskSample> read_dataset(const std::filesystem::path& dir);

std::vector<LabeledStream> samples_of(std::span<const DiskSample> disk);

std::string sample_id(std::size_t index);

}  // namespace evtrojan
