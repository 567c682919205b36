#pragma once

#include <stdexcept>
#include <string>

namespace blowup {

enum class Errc {
  unsupported_dimension,
  too_few_points,
  outside_grid,
  grid_too_coarse,
  wrong_frame,
  grid_mismatch,
  shift_too_large,
  degenerate_profile,
  linear_solve_failure,
  flat_profile,
  outside_profile_domain,
  numerical_overflow,
  outside_physical_data,
  invalid_argument,
  io_failure,
};

const char* to_string(Errc code);

// Every failure raised by the library carries one of the codes above so
// callers (tests, CLI) can branch on the kind of failure without parsing text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace blowup
