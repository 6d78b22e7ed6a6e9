#pragma once

#include <stdexcept>
#include <string>

namespace zrdiff {

// Base class for all library errors. Subcommands map these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The positive-rate digraph is not strongly connected.
class NotIrreducible : public Error {
 public:
  using Error::Error;
};

// r(i,i) != 0 for some site i.
class NonzeroDiagonal : public Error {
 public:
  using Error::Error;
};

// Drift strength b < 1: no condensation, outside the supported regime.
class BadB : public Error {
 public:
  using Error::Error;
};

// Interior linear system for the equilibrium potentials is singular.
// Cannot happen for an irreducible chain; signals a broken model.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

// Zero-range configuration with no particles.
class EmptyConfig : public Error {
 public:
  using Error::Error;
};

// Event count exceeded the configured cap (N^2 T too large for the budget).
class HorizonOverflow : public Error {
 public:
  using Error::Error;
};

// A coordinate listed in the active face is zero while stepping: the
// integrator missed an absorption.
class NonFiniteDrift : public Error {
 public:
  using Error::Error;
};

// Adaptive time step fell below the floor.
class StepUnderflow : public Error {
 public:
  using Error::Error;
};

// Absorption-time bound requires q > b.
class BadQ : public Error {
 public:
  using Error::Error;
};

// Face with fewer than two sites where a diffusion generator is required.
class DegenerateFace : public Error {
 public:
  using Error::Error;
};

// A requested checkpoint is missing from an ensemble's sample grid.
class MismatchedCheckpoints : public Error {
 public:
  using Error::Error;
};

// An ensemble is below the replica floor for distance estimation.
class TooFewReplicas : public Error {
 public:
  using Error::Error;
};

}  // namespace zrdiff
