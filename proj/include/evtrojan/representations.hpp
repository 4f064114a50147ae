#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "evtrojan/event.hpp"

namespace evtrojan {

enum class Method : std::uint8_t { est = 0, ef = 1, ts = 2, vg = 3, tencode = 4 };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);

/// EST measurement f(x, y, t) applied to each event before the kernel.
enum class Measurement : std::uint8_t { timestamp, count, polarity };

std::string_view to_string(Measurement m);
Measurement measurement_from_string(std::string_view name);

struct ReprConfig {
  Method method = Method::est;
  int bins = 4;          // temporal bins over the fixed window [0, 1]
  double tau = 0.3;      // time-surface decay
  double tencode_dt = 1.0;
  Measurement measurement = Measurement::timestamp;

  double bin_width() const noexcept { return 1.0 / bins; }
  void validate() const;
  friend bool operator==(const ReprConfig&, const ReprConfig&) = default;
};

/// Dense (C, H, W) grid, row-major over (c, y, x).
struct RepresentationTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  Method method = Method::est;
  std::vector<double> data;

  RepresentationTensor() = default;
  RepresentationTensor(int c, int h, int w, Method m)
      : channels(c), height(h), width(w), method(m),
        data(static_cast<std::size_t>(c) * h * w, 0.0) {}

  std::size_t index(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  double& at(int c, int y, int x) noexcept { return data[index(c, y, x)]; }
  double at(int c, int y, int x) const noexcept { return data[index(c, y, x)]; }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const RepresentationTensor& o) const noexcept {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

/// Output channel count of `cfg.method` (2B, 1, 1, B, 3).
int channel_count(const ReprConfig& cfg);

RepresentationTensor est(const EventStream& stream, const ReprConfig& cfg);
RepresentationTensor event_frame(const EventStream& stream, const ReprConfig& cfg);
RepresentationTensor time_surface(const EventStream& stream, const ReprConfig& cfg);
RepresentationTensor voxel_grid(const EventStream& stream, const ReprConfig& cfg);
RepresentationTensor tencode(const EventStream& stream, const ReprConfig& cfg);

/// Dispatches on cfg.method.
RepresentationTensor represent(const EventStream& stream, const ReprConfig& cfg);

// Dump file: 16-byte little-endian header
//   "EVTR" | u8 method | u8 reserved | u16 C | u16 H | u16 W | u32 reserved
// followed by C*H*W float32 values in (c, y, x) order.
std::vector<std::uint8_t> encode_dump(const RepresentationTensor& tensor);
RepresentationTensor decode_dump(std::span<const std::uint8_t> bytes);

}  // namespace evtrojan
