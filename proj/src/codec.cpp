#include "evtrojan/codec.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "evtrojan/error.hpp"

namespace evtrojan {

namespace {

SensorGeometry bounding_geometry(const std::vector<Event>& events) {
  SensorGeometry g{1, 1};
  for (const Event& e : events) {
    g.width = std::max(g.width, e.x + 1);
    g.height = std::max(g.height, e.y + 1);
  }
  return g;
}

void check_geometry(const std::vector<Event>& events, const SensorGeometry& g) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!g.contains(events[i].x, events[i].y))
      throw Error(Errc::coordinate_out_of_range,
                  "event " + std::to_string(i) + " at (" + std::to_string(events[i].x) + "," +
                      std::to_string(events[i].y) + ") outside " + std::to_string(g.width) + "x" +
                      std::to_string(g.height));
  }
}

template <class T>
bool parse_field(std::string_view field, T& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

EventStream parse_bin(std::span<const std::uint8_t> bytes, std::optional<SensorGeometry> geometry) {
  if (bytes.size() % kBinRecordBytes != 0)
    throw Error(Errc::truncated_record,
                std::to_string(bytes.size()) + " bytes is not a multiple of 5");

  EventStream stream;
  stream.time_domain = TimeDomain::raw_microseconds;
  stream.events.reserve(bytes.size() / kBinRecordBytes);
  for (std::size_t off = 0; off < bytes.size(); off += kBinRecordBytes) {
    const std::uint32_t low = (std::uint32_t{bytes[off + 2]} << 16) |
                              (std::uint32_t{bytes[off + 3]} << 8) | std::uint32_t{bytes[off + 4]};
    Event e;
    e.x = bytes[off];
    e.y = bytes[off + 1];
    e.p = (low >> 23) & 1u ? 1.0 : -1.0;
    e.t = static_cast<double>(low & kBinMaxTimestamp);
    stream.events.push_back(e);
  }
  if (!std::is_sorted(stream.events.begin(), stream.events.end(),
                      [](const Event& a, const Event& b) { return a.t < b.t; }))
    sort_by_time(stream.events);

  if (geometry) {
    check_geometry(stream.events, *geometry);
    stream.geometry = *geometry;
  } else {
    stream.geometry = bounding_geometry(stream.events);
  }
  return stream;
}

std::vector<std::uint8_t> write_bin(const EventStream& stream) {
  if (stream.time_domain != TimeDomain::raw_microseconds)
    throw Error(Errc::wrong_time_domain, "write_bin expects raw microsecond timestamps");

  std::vector<std::uint8_t> out;
  out.reserve(stream.size() * kBinRecordBytes);
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (e.x > 255 || e.y > 255)
      throw Error(Errc::field_overflow, "event " + std::to_string(i) + " coordinate exceeds 8 bits");
    if (!(e.t >= 0.0) || e.t > kBinMaxTimestamp || e.t != std::floor(e.t))
      throw Error(Errc::field_overflow,
                  "event " + std::to_string(i) + " timestamp does not fit 23-bit microseconds");
    const std::uint32_t low =
        static_cast<std::uint32_t>(e.t) | (e.p > 0.0 ? (1u << 23) : 0u);
    out.push_back(static_cast<std::uint8_t>(e.x));
    out.push_back(static_cast<std::uint8_t>(e.y));
    out.push_back(static_cast<std::uint8_t>(low >> 16));
    out.push_back(static_cast<std::uint8_t>(low >> 8));
    out.push_back(static_cast<std::uint8_t>(low));
  }
  return out;
}

EventStream parse_csv(std::string_view text, TimeDomain domain,
                      std::optional<SensorGeometry> geometry) {
  EventStream stream;
  stream.time_domain = domain;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::array<std::string_view, 4> fields;
    std::size_t n = 0;
    while (n < 4) {
      const std::size_t comma = line.find(',');
      fields[n++] = line.substr(0, comma);
      if (comma == std::string_view::npos) {
        line = {};
        break;
      }
      line = line.substr(comma + 1);
    }
    const auto malformed = [&](const std::string& why) {
      return Error(Errc::malformed_line, "line " + std::to_string(line_no) + ": " + why);
    };
    if (n != 4 || !line.empty()) throw malformed("expected 4 comma-separated fields");

    unsigned x = 0, y = 0;
    double t = 0.0, p = 0.0;
    if (!parse_field(fields[0], x) || !parse_field(fields[1], y) || x > 0xFFFF || y > 0xFFFF)
      throw malformed("bad coordinate");
    if (!parse_field(fields[2], t) || !std::isfinite(t)) throw malformed("bad timestamp");
    if (!parse_field(fields[3], p) || (p != 1.0 && p != -1.0))
      throw malformed("polarity must be +1 or -1");
    stream.events.push_back(
        Event{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), t, p});
  }
  sort_by_time(stream.events);
  if (geometry) {
    check_geometry(stream.events, *geometry);
    stream.geometry = *geometry;
  } else {
    stream.geometry = bounding_geometry(stream.events);
  }
  return stream;
}

std::string write_csv(const EventStream& stream) {
  std::string out;
  out.reserve(stream.size() * 32);
  std::array<char, 64> buf{};
  for (const Event& e : stream.events) {
    out += std::to_string(e.x);
    out += ',';
    out += std::to_string(e.y);
    out += ',';
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), e.t);
    out.append(buf.data(), res.ptr);
    out += e.p > 0.0 ? ",1\n" : ",-1\n";
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io_error, "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::io_error, "cannot rename " + tmp + ": " + ec.message());
}

void write_file_atomic(const std::string& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace evtrojan
