#include "fairpls/error.hpp"

namespace fairpls {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::parse: return "parse_error";
    case ErrorKind::io: return "io_error";
    case ErrorKind::not_centered: return "not_centered";
    case ErrorKind::singular: return "singular";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::non_convergence: return "non_convergence";
    case ErrorKind::infeasible: return "precondition_violated";
  }
  return "error";
}

}  // namespace fairpls
