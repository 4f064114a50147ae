#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evtrojan {

enum class Errc {
  truncated_record,
  coordinate_out_of_range,
  field_overflow,
  malformed_line,
  empty_stream,
  config_invalid,
  wrong_time_domain,
  region_out_of_bounds,
  shape_count_mismatch,
  geometry_mismatch,
  time_domain_mismatch,
  zero_norm_vector,
  length_mismatch,
  shape_mismatch,
  missing_generator,
  empty_dataset,
  all_samples_target_class,
  image_too_small,
  io_error,
  format_error,
};

std::string_view errc_name(Errc code) noexcept;

// Every failure in the library surfaces as this exception; `code()` lets
// callers (tests, the CLI) branch on the failure kind without parsing text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace evtrojan
