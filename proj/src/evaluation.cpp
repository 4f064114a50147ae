#include "evtrojan/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "evtrojan/error.hpp"

namespace evtrojan {

std::vector<int> predict(const nn::ModelParams& model, const ReprConfig& repr,
                         std::span<const LabeledStream> samples,
                         const std::optional<PatchTrigger>& patch) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const LabeledStream& s : samples) {
    RepresentationTensor rep = represent(s.stream, repr);
    if (patch) rep = apply_patch(rep, *patch);
    out.push_back(nn::argmax(nn::forward(model, rep)));
  }
  return out;
}

RateResult cda(const nn::ModelParams& model, const ReprConfig& repr,
               std::span<const LabeledStream> clean) {
  if (clean.empty()) throw Error(Errc::empty_dataset, "CDA needs at least one clean sample");
  RateResult r;
  r.predictions = predict(model, repr, clean);
  r.total = clean.size();
  for (std::size_t i = 0; i < clean.size(); ++i)
    if (r.predictions[i] == clean[i].label) ++r.hits;
  r.rate = static_cast<double>(r.hits) / static_cast<double>(r.total);
  return r;
}

RateResult asr(const nn::ModelParams& model, const ReprConfig& repr,
               std::span<const LabeledStream> poisoned, int target,
               const std::optional<PatchTrigger>& patch) {
  if (poisoned.empty()) throw Error(Errc::empty_dataset, "ASR needs at least one poisoned sample");
  RateResult r;
  r.predictions = predict(model, repr, poisoned, patch);
  for (std::size_t i = 0; i < poisoned.size(); ++i) {
    if (poisoned[i].label == target) continue;
    ++r.total;
    if (r.predictions[i] == target) ++r.hits;
  }
  if (r.total == 0)
    throw Error(Errc::all_samples_target_class, "every poisoned sample already has the target label");
  r.rate = static_cast<double>(r.hits) / static_cast<double>(r.total);
  return r;
}

std::pair<std::vector<double>, std::vector<double>> render_pair(const RepresentationTensor& a,
                                                                const RepresentationTensor& b) {
  if (!a.same_shape(b)) throw Error(Errc::shape_mismatch, "representations differ in shape");
  double lo = INFINITY, hi = -INFINITY;
  for (double v : a.data) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : b.data) lo = std::min(lo, v), hi = std::max(hi, v);
  const double range = hi - lo;
  const auto render = [&](const std::vector<double>& src) {
    std::vector<double> out(src.size(), 0.0);
    if (range > 0.0)
      for (std::size_t i = 0; i < src.size(); ++i) out[i] = 255.0 * (src[i] - lo) / range;
    return out;
  };
  return {render(a.data), render(b.data)};
}

double psnr(const RepresentationTensor& a, const RepresentationTensor& b) {
  const auto [ra, rb] = render_pair(a, b);
  if (ra.empty()) return kPsnrIdentical;
  double mse = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) mse += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  mse /= static_cast<double>(ra.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

std::array<double, kSsimWindow * kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow * kSsimWindow> w{};
  double sum = 0.0;
  const int half = kSsimWindow / 2;
  for (int y = 0; y < kSsimWindow; ++y)
    for (int x = 0; x < kSsimWindow; ++x) {
      const double d2 = (x - half) * (x - half) + (y - half) * (y - half);
      sum += w[y * kSsimWindow + x] = std::exp(-d2 / (2.0 * kSsimSigma * kSsimSigma));
    }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

double ssim(const RepresentationTensor& a, const RepresentationTensor& b) {
  if (!a.same_shape(b)) throw Error(Errc::shape_mismatch, "representations differ in shape");
  if (a.height < kSsimWindow || a.width < kSsimWindow)
    throw Error(Errc::image_too_small, "SSIM needs at least 11x11 pixels");
  const auto [ra, rb] = render_pair(a, b);
  const auto window = gaussian_window();
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const int h = a.height, w = a.width;
  const std::size_t plane = a.plane();

  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < a.channels; ++c) {
    const double* pa = ra.data() + c * plane;
    const double* pb = rb.data() + c * plane;
    for (int y0 = 0; y0 + kSsimWindow <= h; ++y0) {
      for (int x0 = 0; x0 + kSsimWindow <= w; ++x0) {
        double mu_a = 0.0, mu_b = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
        for (int dy = 0; dy < kSsimWindow; ++dy)
          for (int dx = 0; dx < kSsimWindow; ++dx) {
            const double g = window[dy * kSsimWindow + dx];
            const std::size_t i = static_cast<std::size_t>(y0 + dy) * w + (x0 + dx);
            mu_a += g * pa[i];
            mu_b += g * pb[i];
            saa += g * pa[i] * pa[i];
            sbb += g * pb[i] * pb[i];
            sab += g * pa[i] * pb[i];
          }
        const double var_a = saa - mu_a * mu_a;
        const double var_b = sbb - mu_b * mu_b;
        const double cov = sab - mu_a * mu_b;
        total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                 ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

void StcConfig::validate() const {
  if (radius < 1) throw Error(Errc::config_invalid, "STC radius must be >= 1");
  if (!(window > 0.0)) throw Error(Errc::config_invalid, "STC window must be > 0");
}

EventStream stc_filter(const EventStream& stream, const StcConfig& cfg) {
  cfg.validate();
  EventStream out = stream;
  out.events.clear();
  if (stream.empty()) return out;

  int w = stream.geometry.width, h = stream.geometry.height;
  for (const Event& e : stream.events) w = std::max(w, e.x + 1), h = std::max(h, e.y + 1);

  // Per-pixel event lists sorted by time (ties by stream index).
  std::vector<std::vector<std::pair<double, std::size_t>>> cells(static_cast<std::size_t>(w) * h);
  for (std::size_t k = 0; k < stream.events.size(); ++k) {
    const Event& e = stream.events[k];
    cells[static_cast<std::size_t>(e.y) * w + e.x].emplace_back(e.t, k);
  }
  for (auto& cell : cells) std::sort(cell.begin(), cell.end());

  // The search range is widened to 2*window so the exact |dt| <= window test
  // below decides membership, matching a pairwise scan bit for bit.
  const double reach = 2.0 * cfg.window;
  for (std::size_t k = 0; k < stream.events.size(); ++k) {
    const Event& e = stream.events[k];
    bool keep = false;
    for (int y = std::max(0, e.y - cfg.radius); !keep && y <= std::min(h - 1, e.y + cfg.radius); ++y) {
      for (int x = std::max(0, e.x - cfg.radius); !keep && x <= std::min(w - 1, e.x + cfg.radius); ++x) {
        const auto& cell = cells[static_cast<std::size_t>(y) * w + x];
        auto it = std::lower_bound(cell.begin(), cell.end(), std::make_pair(e.t - reach, std::size_t{0}));
        for (; it != cell.end() && it->first <= e.t + reach; ++it) {
          if (it->second != k && std::abs(it->first - e.t) <= cfg.window) {
            keep = true;
            break;
          }
        }
      }
    }
    if (keep) out.events.push_back(e);
  }
  return out;
}

}  // namespace evtrojan
