#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dobs {

enum class ErrorKind {
  DimensionMismatch,
  NotPositiveDefinite,
  RankDeficient,
  SingularInformation,
  MaxIterationsExceeded,
  Diverged,
  InvalidArgument,
  UnknownEstimator,
  Parse,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library. `kind()` is the stable
/// machine-readable category; `node()` is set for per-node failures and
/// `value()` carries the last delta / norm for iteration failures.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> node = std::nullopt,
        std::optional<double> value = std::nullopt)
      : std::runtime_error(message), kind_(kind), node_(node), value_(value) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> node() const noexcept { return node_; }
  std::optional<double> value() const noexcept { return value_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> node_;
  std::optional<double> value_;
};

}  // namespace dobs
