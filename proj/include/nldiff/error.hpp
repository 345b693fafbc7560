#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nldiff {

enum class ErrorKind {
  configuration,
  unsupported_dimension,
  numerical,
  resolution,
  shape,
  geometry,
  convergence,
  range,
  data,
  degenerate,
  signal,
  oracle_scale,
  format,
  dependency,
  domain,
};

std::string_view to_string(ErrorKind kind);

/// Every recoverable failure in the library is reported through this type.
/// The kind drives CLI exit codes; the message is meant for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace nldiff
