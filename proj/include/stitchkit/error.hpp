#pragma once

#include <stdexcept>
#include <string>

namespace stitchkit {

// Failure kinds surfaced by the library. Rejected-but-expected outcomes
// (e.g. a gated EKF measurement) are flags, not errors.
enum class errc {
  degenerate_input,
  no_consensus,
  not_a_circle,
  ray_parallel,
  tip_unresolved,
  non_parallel_planes,
  dimension_mismatch,
  no_contrast,
  no_endpoint,
  radius_mismatch,
  insufficient_measurements,
  estimate_timeout,
  not_visible,
  arc_too_short,
  index_out_of_range,
  invalid_length,
  zero_width,
  zero_height,
  invalid_model,
  invalid_count,
  degenerate_extent,
  misaligned_start,
  degenerate_estimate,
  invalid_config,
  invalid_params,
  invalid_radius,
  empty_results,
  io_error,
};

inline const char* to_string(errc c) {
  switch (c) {
    case errc::degenerate_input: return "degenerate_input";
    case errc::no_consensus: return "no_consensus";
    case errc::not_a_circle: return "not_a_circle";
    case errc::ray_parallel: return "ray_parallel";
    case errc::tip_unresolved: return "tip_unresolved";
    case errc::non_parallel_planes: return "non_parallel_planes";
    case errc::dimension_mismatch: return "dimension_mismatch";
    case errc::no_contrast: return "no_contrast";
    case errc::no_endpoint: return "no_endpoint";
    case errc::radius_mismatch: return "radius_mismatch";
    case errc::insufficient_measurements: return "insufficient_measurements";
    case errc::estimate_timeout: return "estimate_timeout";
    case errc::not_visible: return "not_visible";
    case errc::arc_too_short: return "arc_too_short";
    case errc::index_out_of_range: return "index_out_of_range";
    case errc::invalid_length: return "invalid_length";
    case errc::zero_width: return "zero_width";
    case errc::zero_height: return "zero_height";
    case errc::invalid_model: return "invalid_model";
    case errc::invalid_count: return "invalid_count";
    case errc::degenerate_extent: return "degenerate_extent";
    case errc::misaligned_start: return "misaligned_start";
    case errc::degenerate_estimate: return "degenerate_estimate";
    case errc::invalid_config: return "invalid_config";
    case errc::invalid_params: return "invalid_params";
    case errc::invalid_radius: return "invalid_radius";
    case errc::empty_results: return "empty_results";
    case errc::io_error: return "io_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

}  // namespace stitchkit
