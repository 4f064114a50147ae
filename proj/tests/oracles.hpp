#pragma once

// Naive reference implementations used by the unit and acceptance suites.
// Each one follows the defining formula directly, with no shortcuts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "evtrojan/event.hpp"
#include "evtrojan/neural.hpp"
#include "evtrojan/representations.hpp"
#include "evtrojan/synth.hpp"

namespace oracle {

using namespace evtrojan;

// Normalized, time-sorted stream with deliberate edge timestamps (0, 1, bin
// centres) and repeated timestamps mixed in.
inline EventStream random_stream(std::mt19937_64& rng, int max_events, int width = 32,
                                 int height = 32, int bins = 4) {
  std::uniform_int_distribution<int> count(0, max_events);
  std::uniform_int_distribution<int> xs(0, width - 1), ys(0, height - 1);
  std::uniform_real_distribution<double> ts(0.0, 1.0);
  std::uniform_int_distribution<int> kind(0, 9);
  EventStream s;
  s.geometry = {width, height};
  s.time_domain = TimeDomain::normalized_unit;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    double t = ts(rng);
    switch (kind(rng)) {
      case 0: t = 0.0; break;
      case 1: t = 1.0; break;
      case 2: t = std::uniform_int_distribution<int>(0, bins - 1)(rng) / static_cast<double>(bins); break;
      case 3: if (!s.events.empty()) t = s.events.back().t; break;
      default: break;
    }
    s.events.push_back(Event{static_cast<std::uint16_t>(xs(rng)), static_cast<std::uint16_t>(ys(rng)),
                             t, (rng() & 1) ? 1.0 : -1.0});
  }
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return s;
}

inline RepresentationTensor est(const EventStream& s, const ReprConfig& cfg) {
  const int B = cfg.bins;
  const double dt = 1.0 / B;
  RepresentationTensor out(2 * B, s.geometry.height, s.geometry.width, Method::est);
  for (const Event& e : s.events)
    for (int n = 0; n < B; ++n) {
      const double tn = n * dt;
      const double f = cfg.measurement == Measurement::timestamp ? e.t : 1.0;
      const double k = std::max(0.0, 1.0 - std::abs((tn - e.t) / dt));
      const int c = e.p > 0 ? n : B + n;
      out.at(c, e.y, e.x) += f * k;
    }
  return out;
}

inline RepresentationTensor event_frame(const EventStream& s) {
  RepresentationTensor out(1, s.geometry.height, s.geometry.width, Method::ef);
  for (int y = 0; y < s.geometry.height; ++y)
    for (int x = 0; x < s.geometry.width; ++x) {
      double sum = 0.0;
      for (const Event& e : s.events)
        if (e.x == x && e.y == y) sum += e.p;
      out.at(0, y, x) = sum > 0 ? 1.0 : sum < 0 ? -1.0 : 0.0;
    }
  return out;
}

// Last event (highest index) at pixel (x, y) with t >= from, or nullptr.
inline const Event* last_at(const EventStream& s, int x, int y, double from) {
  const Event* last = nullptr;
  for (const Event& e : s.events)
    if (e.x == x && e.y == y && e.t >= from) last = &e;
  return last;
}

inline double t_max(const EventStream& s) {
  double m = -1.0;
  for (const Event& e : s.events) m = std::max(m, e.t);
  return m;
}

inline RepresentationTensor time_surface(const EventStream& s, double tau) {
  RepresentationTensor out(1, s.geometry.height, s.geometry.width, Method::ts);
  const double tm = t_max(s);
  for (int y = 0; y < s.geometry.height; ++y)
    for (int x = 0; x < s.geometry.width; ++x)
      if (const Event* e = last_at(s, x, y, -1.0)) out.at(0, y, x) = e->p * std::exp(-(tm - e->t) / tau);
  return out;
}

inline RepresentationTensor voxel_grid(const EventStream& s, int B) {
  RepresentationTensor out(B, s.geometry.height, s.geometry.width, Method::vg);
  if (s.events.empty()) return out;
  const double t1 = s.events.front().t, tN = s.events.back().t;
  const auto phi = [](double a) { return std::max(0.0, 1.0 - std::abs(a)); };
  for (const Event& e : s.events) {
    const double ts = tN > t1 ? (B - 1) * (e.t - t1) / (tN - t1) : 0.0;
    for (int n = 0; n < B; ++n)
      for (int y = 0; y < s.geometry.height; ++y)
        for (int x = 0; x < s.geometry.width; ++x) {
          const double w = phi(x - e.x) * phi(y - e.y) * phi(n - ts);
          if (w != 0.0) out.at(n, y, x) += e.p * w;
        }
  }
  return out;
}

inline RepresentationTensor tencode(const EventStream& s, double dt) {
  RepresentationTensor out(3, s.geometry.height, s.geometry.width, Method::tencode);
  const double tm = t_max(s);
  for (int y = 0; y < s.geometry.height; ++y)
    for (int x = 0; x < s.geometry.width; ++x)
      if (const Event* e = last_at(s, x, y, tm - dt)) {
        const double g = std::min(255.0, std::max(0.0, 255.0 * (tm - e->t) / dt));
        out.at(0, y, x) = e->p > 0 ? 255.0 : 0.0;
        out.at(1, y, x) = g;
        out.at(2, y, x) = e->p > 0 ? 0.0 : 255.0;
      }
  return out;
}

// Pairwise keep rule: another event within Chebyshev radius and |dt| <= window.
inline std::vector<Event> stc(const EventStream& s, int radius, double window) {
  std::vector<Event> kept;
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const Event& a = s.events[i];
    bool keep = false;
    for (std::size_t j = 0; j < s.events.size() && !keep; ++j) {
      if (i == j) continue;
      const Event& b = s.events[j];
      keep = std::abs(int(a.x) - int(b.x)) <= radius && std::abs(int(a.y) - int(b.y)) <= radius &&
             std::abs(a.t - b.t) <= window;
    }
    if (keep) kept.push_back(a);
  }
  return kept;
}

inline std::pair<std::vector<double>, std::vector<double>> render(const RepresentationTensor& a,
                                                                  const RepresentationTensor& b) {
  double lo = a.data[0], hi = a.data[0];
  for (double v : a.data) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : b.data) lo = std::min(lo, v), hi = std::max(hi, v);
  std::vector<double> ra(a.data.size(), 0.0), rb(b.data.size(), 0.0);
  if (hi > lo)
    for (std::size_t i = 0; i < ra.size(); ++i) {
      ra[i] = (a.data[i] - lo) / (hi - lo) * 255.0;
      rb[i] = (b.data[i] - lo) / (hi - lo) * 255.0;
    }
  return {ra, rb};
}

inline double psnr(const RepresentationTensor& a, const RepresentationTensor& b) {
  auto [ra, rb] = render(a, b);
  double se = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) se += std::pow(ra[i] - rb[i], 2);
  return 10.0 * std::log10(255.0 * 255.0 * ra.size() / se);
}

// Per-window SSIM with explicit weighted moments (two-pass variance).
inline double ssim(const RepresentationTensor& a, const RepresentationTensor& b) {
  auto [ra, rb] = render(a, b);
  double g[11][11], gs = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) gs += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
  const double C1 = std::pow(0.01 * 255, 2), C2 = std::pow(0.03 * 255, 2);
  double total = 0.0;
  int windows = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int y0 = 0; y0 + 11 <= a.height; ++y0)
      for (int x0 = 0; x0 + 11 <= a.width; ++x0) {
        const auto px = [&](const std::vector<double>& r, int i, int j) {
          return r[a.index(c, y0 + i, x0 + j)];
        };
        double ma = 0, mb = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            ma += g[i][j] / gs * px(ra, i, j);
            mb += g[i][j] / gs * px(rb, i, j);
          }
        double va = 0, vb = 0, cv = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double w = g[i][j] / gs;
            va += w * (px(ra, i, j) - ma) * (px(ra, i, j) - ma);
            vb += w * (px(rb, i, j) - mb) * (px(rb, i, j) - mb);
            cv += w * (px(ra, i, j) - ma) * (px(rb, i, j) - mb);
          }
        total += (2 * ma * mb + C1) * (2 * cv + C2) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
        ++windows;
      }
  return total / windows;
}

// Layer-by-layer MLP forward with explicit loops.
inline std::vector<double> mlp_forward(const nn::Mlp& net, std::vector<double> x) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const nn::Dense& d = net.layers[l];
    std::vector<double> y(d.out);
    for (int o = 0; o < d.out; ++o) {
      double z = d.bias[o];
      for (int i = 0; i < d.in; ++i) z += d.weight[o * d.in + i] * x[i];
      if (l + 1 < net.layers.size()) z = z > 0 ? z : 0.0;
      else if (net.activation == nn::OutputActivation::logistic) z = 1.0 / (1.0 + std::exp(-z));
      y[o] = z;
    }
    x = y;
  }
  return x;
}

// Pool (cell means over the floor/ceil ranges), standardize, omega, dense stack.
inline std::vector<double> classifier_forward(const nn::ModelParams& p, const RepresentationTensor& r) {
  const int ph = p.shape.pooled_height, pw = p.shape.pooled_width;
  std::vector<double> x;
  for (int c = 0; c < r.channels; ++c)
    for (int i = 0; i < ph; ++i)
      for (int j = 0; j < pw; ++j) {
        const int y0 = i * r.height / ph, y1 = ((i + 1) * r.height + ph - 1) / ph;
        const int x0 = j * r.width / pw, x1 = ((j + 1) * r.width + pw - 1) / pw;
        double sum = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int xx = x0; xx < x1; ++xx) sum += r.at(c, y, xx);
        x.push_back(sum / ((y1 - y0) * (x1 - x0)));
      }
  for (std::size_t f = 0; f < x.size(); ++f) {
    if (!p.input_scale.empty())
      x[f] = std::clamp((x[f] - p.input_mean[f]) * p.input_scale[f], -p.input_clip, p.input_clip);
    const std::size_t c = f / static_cast<std::size_t>(ph * pw);
    x[f] = p.omega_scale[c] * x[f] + p.omega_shift[c];
  }
  return mlp_forward(p.net, x);
}

// Pixels where |log I_f - log I_{f-1}| > sigma, with the sign of the change.
struct Crossing {
  int frame, x, y;
  double p;
};
inline std::vector<Crossing> log_crossings(const SceneConfig& cfg) {
  std::vector<Crossing> out;
  std::vector<double> prev = render_frame(cfg, 0);
  for (int f = 1; f < cfg.frames; ++f) {
    std::vector<double> cur = render_frame(cfg, f);
    for (int y = 0; y < cfg.geometry.height; ++y)
      for (int x = 0; x < cfg.geometry.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * cfg.geometry.width + x;
        const double d = std::log(cur[i]) - std::log(prev[i]);
        if (std::abs(d) > cfg.sigma) out.push_back({f, x, y, d > 0 ? 1.0 : -1.0});
      }
    prev = cur;
  }
  return out;
}

}  // namespace oracle
