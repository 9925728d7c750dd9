#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace dualdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Failure categories surfaced by the library. The CLI maps these onto exit
/// codes, so keep user errors and numerical errors distinguishable.
enum class ErrorKind {
  InvalidArgument,
  Parse,
  Validation,
  Infeasible,
  NumericalFailure,
  NoConvergence,
  Unreachable,
  AnchorUnreachable,
  GenerationFailed,
  Exhausted,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for errors caused by bad input rather than by the numerics.
  bool is_user_error() const noexcept {
    return kind_ == ErrorKind::InvalidArgument || kind_ == ErrorKind::Parse ||
           kind_ == ErrorKind::Validation;
  }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorKind::InvalidArgument, message);
}

}  // namespace dualdp
