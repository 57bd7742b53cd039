#pragma once

#include <stdexcept>
#include <string>

namespace hrve {

/// Failure categories surfaced by the library. The C API maps these onto
/// `hrve_status` codes one to one.
enum class ErrorCode {
  invalid_argument = 1,
  resolution,         // correlation length below grid spacing
  invalid_covariance, // negative spectral density
  unsupported,
  grid_mismatch,
  singular_system,
  solver_failure,
  consistency,        // an internal identity failed (assembly bug)
  configuration,
  usage,
  io,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Thrown when a preconditioned CG run hits its iteration cap.
class SolverFailure : public Error {
public:
  SolverFailure(const std::string& what, double residual, int iterations)
      : Error(ErrorCode::solver_failure, what), residual_(residual),
        iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

private:
  double residual_;
  int iterations_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok)
    throw Error(code, what);
}

} // namespace hrve
