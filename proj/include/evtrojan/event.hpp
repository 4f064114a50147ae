#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace evtrojan {

struct SensorGeometry {
  int width = 0;
  int height = 0;

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t pixels() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

/// A single activated event. `t` is in microseconds for raw streams and in
/// [0, 1] for normalized ones; `p` is exactly +1.0 or -1.0.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  double t = 0.0;
  double p = 1.0;

  friend bool operator==(const Event&, const Event&) = default;
};

enum class TimeDomain : std::uint8_t { raw_microseconds, normalized_unit };

struct EventStream {
  std::vector<Event> events;
  SensorGeometry geometry;
  TimeDomain time_domain = TimeDomain::normalized_unit;

  std::size_t size() const noexcept { return events.size(); }
  bool empty() const noexcept { return events.empty(); }
  friend bool operator==(const EventStream&, const EventStream&) = default;
};

struct Violation {
  enum class Kind { unsorted, bad_polarity, coordinate_out_of_range, time_out_of_range };
  Kind kind;
  std::size_t index;

  friend bool operator==(const Violation&, const Violation&) = default;
};

std::string to_string(const Violation& v);

/// Lists every invariant violation in `stream`, in index order. An empty
/// result means the stream is valid.
std::vector<Violation> validate(const EventStream& stream);

/// Stable sort on timestamp.
void sort_by_time(std::vector<Event>& events);

/// Affine map of raw timestamps onto [0, 1]. A stream whose events all share
/// one timestamp maps every event to 0.
EventStream normalize_time(const EventStream& stream);

}  // namespace evtrojan
