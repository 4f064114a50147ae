#include "evtrojan/event.hpp"

#include <algorithm>

#include "evtrojan/error.hpp"

namespace evtrojan {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::truncated_record: return "TruncatedRecord";
    case Errc::coordinate_out_of_range: return "CoordinateOutOfRange";
    case Errc::field_overflow: return "FieldOverflow";
    case Errc::malformed_line: return "MalformedLine";
    case Errc::empty_stream: return "EmptyStream";
    case Errc::config_invalid: return "ConfigInvalid";
    case Errc::wrong_time_domain: return "WrongTimeDomain";
    case Errc::region_out_of_bounds: return "RegionOutOfBounds";
    case Errc::shape_count_mismatch: return "ShapeCountMismatch";
    case Errc::geometry_mismatch: return "GeometryMismatch";
    case Errc::time_domain_mismatch: return "TimeDomainMismatch";
    case Errc::zero_norm_vector: return "ZeroNormVector";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::missing_generator: return "MissingGenerator";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::all_samples_target_class: return "AllSamplesTargetClass";
    case Errc::image_too_small: return "ImageTooSmall";
    case Errc::io_error: return "IoError";
    case Errc::format_error: return "FormatError";
  }
  return "Unknown";
}

std::string to_string(const Violation& v) {
  std::string kind;
  switch (v.kind) {
    case Violation::Kind::unsorted: kind = "Unsorted"; break;
    case Violation::Kind::bad_polarity: kind = "BadPolarity"; break;
    case Violation::Kind::coordinate_out_of_range: kind = "CoordinateOutOfRange"; break;
    case Violation::Kind::time_out_of_range: kind = "TimeOutOfRange"; break;
  }
  return kind + "(" + std::to_string(v.index) + ")";
}

std::vector<Violation> validate(const EventStream& stream) {
  std::vector<Violation> out;
  const bool has_geometry = stream.geometry.width > 0 && stream.geometry.height > 0;
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (i > 0 && e.t < stream.events[i - 1].t) out.push_back({Violation::Kind::unsorted, i});
    if (e.p != 1.0 && e.p != -1.0) out.push_back({Violation::Kind::bad_polarity, i});
    if (has_geometry && !stream.geometry.contains(e.x, e.y))
      out.push_back({Violation::Kind::coordinate_out_of_range, i});
    if (stream.time_domain == TimeDomain::normalized_unit && !(e.t >= 0.0 && e.t <= 1.0))
      out.push_back({Violation::Kind::time_out_of_range, i});
  }
  return out;
}

void sort_by_time(std::vector<Event>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
}

EventStream normalize_time(const EventStream& stream) {
  if (stream.time_domain != TimeDomain::raw_microseconds)
    throw Error(Errc::wrong_time_domain, "normalize_time expects a raw-microsecond stream");
  if (stream.empty()) throw Error(Errc::empty_stream, "cannot normalize an empty stream");

  const auto [lo, hi] = std::minmax_element(
      stream.events.begin(), stream.events.end(),
      [](const Event& a, const Event& b) { return a.t < b.t; });
  const double t_min = lo->t;
  const double range = hi->t - t_min;

  EventStream out = stream;
  out.time_domain = TimeDomain::normalized_unit;
  for (Event& e : out.events) e.t = range > 0.0 ? (e.t - t_min) / range : 0.0;
  return out;
}

}  // namespace evtrojan
