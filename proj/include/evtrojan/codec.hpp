#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evtrojan/event.hpp"

namespace evtrojan {

// ATIS 40-bit record layout (N-Caltech101 distribution), big-endian:
//   bits 39-32 x | bits 31-24 y | bit 23 polarity | bits 22-0 t (us)
inline constexpr std::size_t kBinRecordBytes = 5;
inline constexpr std::uint32_t kBinMaxTimestamp = (1u << 23) - 1;

/// Decodes 5-byte records. Without a geometry the stream geometry is the
/// bounding box of the decoded coordinates.
EventStream parse_bin(std::span<const std::uint8_t> bytes,
                      std::optional<SensorGeometry> geometry = std::nullopt);

std::vector<std::uint8_t> write_bin(const EventStream& stream);

/// One "x,y,t,p" line per event. The CSV carries no geometry, so it is
/// passed in (or inferred as the bounding box when absent).
EventStream parse_csv(std::string_view text, TimeDomain domain = TimeDomain::normalized_unit,
                      std::optional<SensorGeometry> geometry = std::nullopt);

/// Shortest round-trip formatting, so parse_csv(write_csv(s)) is exact.
std::string write_csv(const EventStream& stream);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::string& path, std::string_view text);

}  // namespace evtrojan
