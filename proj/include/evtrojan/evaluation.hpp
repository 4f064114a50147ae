#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "evtrojan/neural.hpp"
#include "evtrojan/representations.hpp"
#include "evtrojan/synth.hpp"
#include "evtrojan/training.hpp"

namespace evtrojan {

struct RateResult {
  double rate = 0.0;
  std::size_t hits = 0;
  std::size_t total = 0;
  std::vector<int> predictions;  // one per input sample
};

std::vector<int> predict(const nn::ModelParams& model, const ReprConfig& repr,
                         std::span<const LabeledStream> samples,
                         const std::optional<PatchTrigger>& patch = std::nullopt);

/// Clean-data accuracy; argmax ties resolve to the lowest class.
RateResult cda(const nn::ModelParams& model, const ReprConfig& repr,
               std::span<const LabeledStream> clean);

/// Share of triggered samples classified as `target`. Samples whose true
/// label already is the target do not count.
RateResult asr(const nn::ModelParams& model, const ReprConfig& repr,
               std::span<const LabeledStream> poisoned, int target,
               const std::optional<PatchTrigger>& patch = std::nullopt);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// Renders both tensors to [0, 255] with one min-max shared by the pair.
std::pair<std::vector<double>, std::vector<double>> render_pair(const RepresentationTensor& a,
                                                                const RepresentationTensor& b);

/// 10 log10(255^2 / MSE) on the jointly rendered pair; identical inputs give
/// kPsnrIdentical.
double psnr(const RepresentationTensor& a, const RepresentationTensor& b);

/// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, L 255) on the
/// jointly rendered pair, averaged over every fully contained window and
/// every channel.
double ssim(const RepresentationTensor& a, const RepresentationTensor& b);

struct StcConfig {
  int radius = 1;
  double window = 0.05;
  void validate() const;
};

/// Keeps an event iff another event lies within Chebyshev distance `radius`
/// and |dt| <= `window`. Order is preserved.
EventStream stc_filter(const EventStream& stream, const StcConfig& cfg = {});

struct MetricReport {
  double cda = 0.0;
  double asr = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::size_t n_clean = 0;
  std::size_t n_poisoned = 0;
  int target_class = 0;
};

}  // namespace evtrojan
