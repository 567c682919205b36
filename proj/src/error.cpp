#include "blowup/error.hpp"

namespace blowup {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::unsupported_dimension: return "unsupported dimension";
    case Errc::too_few_points: return "too few quadrature points";
    case Errc::outside_grid: return "node outside grid hull";
    case Errc::grid_too_coarse: return "grid too coarse";
    case Errc::wrong_frame: return "wrong frame";
    case Errc::grid_mismatch: return "grid mismatch";
    case Errc::shift_too_large: return "shift too large for grid";
    case Errc::degenerate_profile: return "degenerate profile";
    case Errc::linear_solve_failure: return "linear solve failure";
    case Errc::flat_profile: return "profile too flat for drift control";
    case Errc::outside_profile_domain: return "outside profile domain";
    case Errc::numerical_overflow: return "numerical overflow";
    case Errc::outside_physical_data: return "outside physical data";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::io_failure: return "io failure";
  }
  return "unknown";
}

}  // namespace blowup
