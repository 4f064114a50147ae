#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "evtrojan/event.hpp"

namespace evtrojan {

enum class ShapeKind : int { square = 0, disk = 1, bar = 2, cross = 3 };
inline constexpr int kShapeKinds = 4;

std::string_view to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(std::string_view name);

struct MovingShape {
  ShapeKind kind = ShapeKind::square;
  double size = 6.0;  // px
  double vx = 0.0;    // px/frame
  double vy = 0.0;
  double x0 = 0.0;  // center at frame 0
  double y0 = 0.0;
};

struct SceneConfig {
  SensorGeometry geometry{32, 32};
  std::vector<MovingShape> shapes;
  int frames = 24;
  double sigma = 0.5;          // log-brightness threshold
  double noise_rate = 0.001;   // background-activity probability per pixel per frame
  double background = 0.2;     // intensity in [0, 1]
  double foreground = 1.0;
  std::uint64_t seed = 0;
};

inline constexpr double kIntensityFloor = 0.01;

struct LabeledStream {
  EventStream stream;
  int label = 0;
};

void validate_config(const SceneConfig& config);

/// Intensity image of one frame, row-major, floored at kIntensityFloor.
std::vector<double> render_frame(const SceneConfig& config, int frame);

/// Emits one event per pixel whose log intensity changes by more than sigma
/// between consecutive frames, plus Bernoulli background noise. Frame f maps
/// to t = f / (frames - 1). The label is the kind of the first shape.
LabeledStream synthesize(const SceneConfig& config);

/// Recipe for a balanced multi-class dataset of single moving shapes.
/// Each class is one shape kind; its heading is `class index * 90deg` plus
/// jitter, starting positions are random.
struct DatasetRecipe {
  SensorGeometry geometry{32, 32};
  int samples = 600;
  int classes = kShapeKinds;
  int frames = 24;
  double sigma = 0.5;
  double noise_rate = 0.001;
  double shape_size = 6.0;
  double speed = 1.0;
  double heading_jitter = 0.35;  // radians
  std::uint64_t seed = 0;
};

/// Streams come back time-normalized to exactly [0, 1].
std::vector<LabeledStream> make_dataset(const DatasetRecipe& recipe);

}  // namespace evtrojan
