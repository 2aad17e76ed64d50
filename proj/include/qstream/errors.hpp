#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qstream {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the requested formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// No policy of the requested family can meet the QoE target.
class InfeasibleTarget : public Error {
 public:
  using Error::Error;
};

/// The selected branch of a two-branch design formula has no valid value.
class BranchDomainError : public Error {
 public:
  using Error::Error;
};

/// A fluid state lies on or below the infeasible boundary p <= exp(-theta1 q).
class InfeasibleState : public Error {
 public:
  using Error::Error;
};

/// A finite-difference stencil leaves the sub-region it was centred in.
class StencilOutOfRegion : public Error {
 public:
  using Error::Error;
};

/// Coefficient vector or payload sizes do not agree with the block layout.
class LengthMismatch : public Error {
 public:
  using Error::Error;
};

/// A simulated path exceeded its event (or step) budget.
class SimulationOverrun : public Error {
 public:
  explicit SimulationOverrun(const std::string& what, std::size_t replica = npos)
      : Error(replica == npos ? what : what + " (replica " + std::to_string(replica) + ")"),
        replica_(replica) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t replica() const noexcept { return replica_; }

 private:
  std::size_t replica_;
};

}  // namespace qstream
