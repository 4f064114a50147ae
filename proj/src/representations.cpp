#include "evtrojan/representations.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "evtrojan/error.hpp"

namespace evtrojan {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::est: return "est";
    case Method::ef: return "ef";
    case Method::ts: return "ts";
    case Method::vg: return "vg";
    case Method::tencode: return "tencode";
  }
  return "est";
}

Method method_from_string(std::string_view name) {
  for (Method m : {Method::est, Method::ef, Method::ts, Method::vg, Method::tencode})
    if (to_string(m) == name) return m;
  throw Error(Errc::config_invalid, "unknown representation '" + std::string(name) + "'");
}

std::string_view to_string(Measurement m) {
  switch (m) {
    case Measurement::timestamp: return "timestamp";
    case Measurement::count: return "count";
    case Measurement::polarity: return "polarity";
  }
  return "timestamp";
}

Measurement measurement_from_string(std::string_view name) {
  for (Measurement m : {Measurement::timestamp, Measurement::count, Measurement::polarity})
    if (to_string(m) == name) return m;
  throw Error(Errc::config_invalid, "unknown EST measurement '" + std::string(name) + "'");
}

void ReprConfig::validate() const {
  if (bins < 1) throw Error(Errc::config_invalid, "bins must be >= 1");
  if (!(tau > 0.0)) throw Error(Errc::config_invalid, "tau must be > 0");
  if (!(tencode_dt > 0.0 && tencode_dt <= 1.0))
    throw Error(Errc::config_invalid, "tencode_dt must lie in (0, 1]");
}

int channel_count(const ReprConfig& cfg) {
  switch (cfg.method) {
    case Method::est: return 2 * cfg.bins;
    case Method::ef: return 1;
    case Method::ts: return 1;
    case Method::vg: return cfg.bins;
    case Method::tencode: return 3;
  }
  return 0;
}

namespace {

void require_normalized(const EventStream& stream) {
  if (stream.time_domain != TimeDomain::normalized_unit)
    throw Error(Errc::wrong_time_domain, "representations need a time-normalized stream");
}

void require_nonempty(const EventStream& stream) {
  if (stream.empty()) throw Error(Errc::empty_stream, "representation needs at least one event");
}

double latest_time(const EventStream& stream) {
  double t_max = stream.events.front().t;
  for (const Event& e : stream.events) t_max = std::max(t_max, e.t);
  return t_max;
}

// Index of the last event (in stream order) at each pixel, or -1.
std::vector<std::ptrdiff_t> last_event_per_pixel(const EventStream& stream, double t_from) {
  std::vector<std::ptrdiff_t> last(stream.geometry.pixels(), -1);
  for (std::size_t k = 0; k < stream.events.size(); ++k) {
    const Event& e = stream.events[k];
    if (e.t < t_from) continue;
    last[static_cast<std::size_t>(e.y) * stream.geometry.width + e.x] =
        static_cast<std::ptrdiff_t>(k);
  }
  return last;
}

}  // namespace

RepresentationTensor est(const EventStream& stream, const ReprConfig& cfg) {
  require_normalized(stream);
  cfg.validate();
  const int bins = cfg.bins;
  const double dt = cfg.bin_width();
  RepresentationTensor out(2 * bins, stream.geometry.height, stream.geometry.width, Method::est);

  for (const Event& e : stream.events) {
    const double f = cfg.measurement == Measurement::timestamp ? e.t : 1.0;
    const int base = e.p > 0.0 ? 0 : bins;
    // The triangular kernel has support |t_n - t| < dt, i.e. at most two bins.
    const int nearest = static_cast<int>(std::floor(e.t / dt));
    const int lo = std::max(0, nearest - 1);
    const int hi = std::min(bins - 1, nearest + 1);
    for (int n = lo; n <= hi; ++n) {
      const double weight = std::max(0.0, 1.0 - std::abs((n * dt - e.t) / dt));
      if (weight > 0.0) out.at(base + n, e.y, e.x) += f * weight;
    }
  }
  return out;
}

RepresentationTensor event_frame(const EventStream& stream, const ReprConfig& cfg) {
  require_normalized(stream);
  cfg.validate();
  RepresentationTensor out(1, stream.geometry.height, stream.geometry.width, Method::ef);
  for (const Event& e : stream.events) out.at(0, e.y, e.x) += e.p;
  for (double& v : out.data) v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  return out;
}

RepresentationTensor time_surface(const EventStream& stream, const ReprConfig& cfg) {
  require_normalized(stream);
  require_nonempty(stream);
  cfg.validate();
  RepresentationTensor out(1, stream.geometry.height, stream.geometry.width, Method::ts);
  const double t_max = latest_time(stream);
  const auto last = last_event_per_pixel(stream, -INFINITY);
  for (std::size_t i = 0; i < last.size(); ++i) {
    if (last[i] < 0) continue;
    const Event& e = stream.events[static_cast<std::size_t>(last[i])];
    out.data[i] = e.p * std::exp(-(t_max - e.t) / cfg.tau);
  }
  return out;
}

RepresentationTensor voxel_grid(const EventStream& stream, const ReprConfig& cfg) {
  require_normalized(stream);
  cfg.validate();
  const int bins = cfg.bins;
  RepresentationTensor out(bins, stream.geometry.height, stream.geometry.width, Method::vg);
  if (stream.empty()) return out;

  const double t_first = stream.events.front().t;
  const double span = stream.events.back().t - t_first;
  for (const Event& e : stream.events) {
    const double t_star = span > 0.0 ? (bins - 1) * (e.t - t_first) / span : 0.0;
    // Integer pixel coordinates: the spatial kernel is 1 at the event's own
    // pixel and 0 elsewhere, so only the temporal axis spreads.
    const int lo = std::max(0, static_cast<int>(std::floor(t_star)));
    const int hi = std::min(bins - 1, lo + 1);
    for (int n = lo; n <= hi; ++n) {
      const double weight = std::max(0.0, 1.0 - std::abs(n - t_star));
      if (weight > 0.0) out.at(n, e.y, e.x) += e.p * weight;
    }
  }
  return out;
}

RepresentationTensor tencode(const EventStream& stream, const ReprConfig& cfg) {
  require_normalized(stream);
  require_nonempty(stream);
  cfg.validate();
  RepresentationTensor out(3, stream.geometry.height, stream.geometry.width, Method::tencode);
  const double t_max = latest_time(stream);
  const double dt = cfg.tencode_dt;
  const auto last = last_event_per_pixel(stream, t_max - dt);
  const std::size_t plane = out.plane();
  for (std::size_t i = 0; i < last.size(); ++i) {
    if (last[i] < 0) continue;
    const Event& e = stream.events[static_cast<std::size_t>(last[i])];
    const double green = std::clamp(255.0 * (t_max - e.t) / dt, 0.0, 255.0);
    out.data[i] = e.p > 0.0 ? 255.0 : 0.0;
    out.data[plane + i] = green;
    out.data[2 * plane + i] = e.p > 0.0 ? 0.0 : 255.0;
  }
  return out;
}

RepresentationTensor represent(const EventStream& stream, const ReprConfig& cfg) {
  switch (cfg.method) {
    case Method::est: return est(stream, cfg);
    case Method::ef: return event_frame(stream, cfg);
    case Method::ts: return time_surface(stream, cfg);
    case Method::vg: return voxel_grid(stream, cfg);
    case Method::tencode: return tencode(stream, cfg);
  }
  throw Error(Errc::config_invalid, "unknown representation method");
}

namespace {

constexpr std::size_t kDumpHeader = 16;

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t off) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{bytes[off + i]} << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_dump(const RepresentationTensor& tensor) {
  if (tensor.channels > 0xFFFF || tensor.height > 0xFFFF || tensor.width > 0xFFFF)
    throw Error(Errc::field_overflow, "tensor dims exceed 16 bits");
  std::vector<std::uint8_t> out;
  out.reserve(kDumpHeader + tensor.data.size() * 4);
  for (char ch : {'E', 'V', 'T', 'R'}) out.push_back(static_cast<std::uint8_t>(ch));
  out.push_back(static_cast<std::uint8_t>(tensor.method));
  out.push_back(0);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(tensor.channels));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(tensor.height));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(tensor.width));
  put_le<std::uint32_t>(out, 0);
  for (double v : tensor.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

RepresentationTensor decode_dump(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kDumpHeader || std::memcmp(bytes.data(), "EVTR", 4) != 0)
    throw Error(Errc::format_error, "not a representation dump (bad magic)");
  if (bytes[4] > static_cast<std::uint8_t>(Method::tencode))
    throw Error(Errc::format_error, "unknown method id " + std::to_string(bytes[4]));
  const int c = get_le<std::uint16_t>(bytes, 6);
  const int h = get_le<std::uint16_t>(bytes, 8);
  const int w = get_le<std::uint16_t>(bytes, 10);
  RepresentationTensor out(c, h, w, static_cast<Method>(bytes[4]));
  if (bytes.size() != kDumpHeader + out.data.size() * 4)
    throw Error(Errc::format_error, "dump payload size does not match header dims");
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, kDumpHeader + 4 * i));
  return out;
}

}  // namespace evtrojan
