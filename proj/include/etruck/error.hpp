#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace etruck {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scenario field violates one of its documented constraints.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, std::string constraint)
      : Error(field + ": " + constraint),
        field_(std::move(field)),
        constraint_(std::move(constraint)) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& constraint() const noexcept { return constraint_; }

 private:
  std::string field_;
  std::string constraint_;
};

/// A caller broke an operation precondition (infeasible action, shape mismatch).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A problem is too large for the configured limits.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// The DC-OPF at time step `step` has no feasible point.
class InfeasibleError : public Error {
 public:
  InfeasibleError(int step, std::string certificate)
      : Error("DC-OPF infeasible at t=" + std::to_string(step) + ": " + certificate),
        step_(step),
        certificate_(std::move(certificate)) {}

  int step() const noexcept { return step_; }
  const std::string& certificate() const noexcept { return certificate_; }

 private:
  int step_;
  std::string certificate_;
};

/// A numerical method failed without a feasibility diagnosis.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace etruck
