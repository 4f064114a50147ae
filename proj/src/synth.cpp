#include "evtrojan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "evtrojan/error.hpp"

namespace evtrojan {

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::square: return "square";
    case ShapeKind::disk: return "disk";
    case ShapeKind::bar: return "bar";
    case ShapeKind::cross: return "cross";
  }
  return "square";
}

ShapeKind shape_kind_from_string(std::string_view name) {
  for (int k = 0; k < kShapeKinds; ++k)
    if (to_string(static_cast<ShapeKind>(k)) == name) return static_cast<ShapeKind>(k);
  throw Error(Errc::config_invalid, "unknown shape kind '" + std::string(name) + "'");
}

void validate_config(const SceneConfig& config) {
  if (config.geometry.width < 1 || config.geometry.height < 1)
    throw Error(Errc::config_invalid, "geometry must be at least 1x1");
  if (config.geometry.width > 0xFFFF || config.geometry.height > 0xFFFF)
    throw Error(Errc::config_invalid, "geometry exceeds 16-bit coordinates");
  if (!(config.sigma > 0.0)) throw Error(Errc::config_invalid, "sigma must be > 0");
  if (config.frames < 2) throw Error(Errc::config_invalid, "frames must be >= 2");
  if (!(config.noise_rate >= 0.0 && config.noise_rate <= 1.0))
    throw Error(Errc::config_invalid, "noise_rate must lie in [0, 1]");
  if (!(config.background >= 0.0 && config.background <= 1.0) ||
      !(config.foreground >= 0.0 && config.foreground <= 1.0))
    throw Error(Errc::config_invalid, "intensities must lie in [0, 1]");
  if (config.shapes.empty()) throw Error(Errc::config_invalid, "scene needs at least one shape");
  for (const MovingShape& s : config.shapes)
    if (!(s.size > 0.0)) throw Error(Errc::config_invalid, "shape size must be > 0");
}

namespace {

bool covers(const MovingShape& s, double cx, double cy, double px, double py) {
  const double dx = px - cx;
  const double dy = py - cy;
  const double half = s.size / 2.0;
  const double arm = std::max(0.5, s.size / 6.0);  // half thickness of bar/cross strokes
  switch (s.kind) {
    case ShapeKind::square: return std::abs(dx) < half && std::abs(dy) < half;
    case ShapeKind::disk: return dx * dx + dy * dy < half * half;
    case ShapeKind::bar: return std::abs(dx) < arm && std::abs(dy) < half;
    case ShapeKind::cross:
      return (std::abs(dx) < arm && std::abs(dy) < half) ||
             (std::abs(dy) < arm && std::abs(dx) < half);
  }
  return false;
}

}  // namespace

std::vector<double> render_frame(const SceneConfig& config, int frame) {
  const int w = config.geometry.width;
  const int h = config.geometry.height;
  std::vector<double> img(config.geometry.pixels(), config.background);
  for (const MovingShape& s : config.shapes) {
    const double cx = s.x0 + s.vx * frame;
    const double cy = s.y0 + s.vy * frame;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (covers(s, cx, cy, x + 0.5, y + 0.5)) img[static_cast<std::size_t>(y) * w + x] = config.foreground;
  }
  for (double& v : img) v = std::max(v, kIntensityFloor);
  return img;
}

LabeledStream synthesize(const SceneConfig& config) {
  validate_config(config);
  const int w = config.geometry.width;
  const int h = config.geometry.height;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  LabeledStream out;
  out.label = static_cast<int>(config.shapes.front().kind);
  out.stream.geometry = config.geometry;
  out.stream.time_domain = TimeDomain::normalized_unit;

  std::vector<double> prev = render_frame(config, 0);
  for (double& v : prev) v = std::log(v);
  for (int f = 1; f < config.frames; ++f) {
    std::vector<double> cur = render_frame(config, f);
    for (double& v : cur) v = std::log(v);
    const double t = static_cast<double>(f) / (config.frames - 1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double diff = cur[i] - prev[i];
        if (std::abs(diff) > config.sigma)
          out.stream.events.push_back(Event{static_cast<std::uint16_t>(x),
                                            static_cast<std::uint16_t>(y), t,
                                            diff > 0.0 ? 1.0 : -1.0});
        // Draw both variates for every pixel so the noise pattern does not
        // depend on the scene content.
        const double fire = unit(rng);
        const double pol = unit(rng);
        if (fire < config.noise_rate)
          out.stream.events.push_back(Event{static_cast<std::uint16_t>(x),
                                            static_cast<std::uint16_t>(y), t,
                                            pol < 0.5 ? 1.0 : -1.0});
      }
    }
    prev = std::move(cur);
  }
  return out;
}

std::vector<LabeledStream> make_dataset(const DatasetRecipe& recipe) {
  if (recipe.samples < 1) throw Error(Errc::config_invalid, "samples must be >= 1");
  if (recipe.classes < 1 || recipe.classes > kShapeKinds)
    throw Error(Errc::config_invalid, "classes must lie in [1, 4]");

  std::mt19937_64 rng(recipe.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Shapes cross the sensor center halfway through the clip.
  const double half_span = (recipe.frames - 1) / 2.0;

  std::vector<LabeledStream> out;
  out.reserve(static_cast<std::size_t>(recipe.samples));
  for (int i = 0; i < recipe.samples; ++i) {
    const int label = i % recipe.classes;
    const double heading = label * std::numbers::pi / 2.0 +
                           (2.0 * unit(rng) - 1.0) * recipe.heading_jitter;
    const double vx = recipe.speed * std::cos(heading);
    const double vy = recipe.speed * std::sin(heading);
    const double mid_x = recipe.geometry.width / 2.0 + (2.0 * unit(rng) - 1.0) * 4.0;
    const double mid_y = recipe.geometry.height / 2.0 + (2.0 * unit(rng) - 1.0) * 4.0;

    SceneConfig scene;
    scene.geometry = recipe.geometry;
    scene.frames = recipe.frames;
    scene.sigma = recipe.sigma;
    scene.noise_rate = recipe.noise_rate;
    scene.seed = rng();
    scene.shapes.push_back(MovingShape{static_cast<ShapeKind>(label), recipe.shape_size, vx, vy,
                                       mid_x - vx * half_span, mid_y - vy * half_span});
    LabeledStream s = synthesize(scene);
    if (!s.stream.empty()) {
      s.stream.time_domain = TimeDomain::raw_microseconds;
      s.stream = normalize_time(s.stream);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace evtrojan
