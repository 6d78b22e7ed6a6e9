#pragma once

namespace zrdiff {

// Single knob for every tolerance used by model validation, residual
// contracts and support classification. Property tests and the CLI both
// read from here so that a policy override reaches everything at once.
struct NumericPolicy {
  double algebra_tol = 1e-12;   // exact linear-algebra identities
  double residual_tol = 1e-10;  // harmonicity / composition / sign contracts
  double estimate_tol = 1e-8;   // iterative and sampled estimates
  double support_tol = 1e-12;   // threshold for "u > 0" support analysis
};

}  // namespace zrdiff
