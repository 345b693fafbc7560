#include "nldiff/error.hpp"

namespace nldiff {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::unsupported_dimension: return "unsupported-dimension";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::resolution: return "resolution";
    case ErrorKind::shape: return "shape";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::range: return "range";
    case ErrorKind::data: return "data";
    case ErrorKind::degenerate: return "degenerate-data";
    case ErrorKind::signal: return "signal";
    case ErrorKind::oracle_scale: return "oracle-scale";
    case ErrorKind::format: return "format";
    case ErrorKind::dependency: return "dependency";
    case ErrorKind::domain: return "domain";
  }
  return "unknown";
}

}  // namespace nldiff
