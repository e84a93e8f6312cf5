// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "rdml/tensor.hpp"

namespace rdml {

// A batch of discrete distributions: probs is [n, m], every entry >= 0 and
// every row sums to 1 within 1e-9.
struct CategoricalBatch {
  Tensor probs;

  // Validates the row-stochastic invariants; throws std::invalid_argument.
  static CategoricalBatch from_probs(Tensor probs);
  // exp(log_softmax(logits)); stays on the logits' tape, so gradients flow.
  static CategoricalBatch from_logits(const Tensor& logits);

  std::size_t rows() const { return probs.shape()[0]; }
  std::size_t classes() const { return probs.shape()[1]; }
};

// Order and numeric guards for the divergence family. Orders within
// kl_switch_tol of 1 are routed to the KL closed form; with the default
// tolerance that covers exactly-1 and nearby orders where the generic
// expression loses precision to cancellation in the 1/(alpha-1) factor.
struct DivergenceSpec {
  double alpha = 1.0;
  double epsilon_floor = 1e-12;  // in (0, 1e-4]
  double kl_switch_tol = 2e-4;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Floors every entry at epsilon_floor, renormalizes each row, and returns the
// per-entry log-probabilities. Keeps divergences finite (and gradients
// bounded) when a distribution has zero or near-zero entries. Differentiable.
Tensor floored_log_probs(const Tensor& probs, double epsilon_floor);

// Renyi divergence of order alpha per row, in nats:
//   D_a(P||Q)[i] = 1/(a-1) * log sum_m p[i,m]^a * q[i,m]^(1-a)
// evaluated in the log domain via logsumexp. |alpha-1| < kl_switch_tol
// routes to kl(). Differentiable in both arguments.
Tensor renyi(const CategoricalBatch& p, const CategoricalBatch& q,
             const DivergenceSpec& spec);

// KL divergence per row: sum_m p[i,m] * log(p[i,m]/q[i,m]), with the same
// flooring as renyi.
Tensor kl(const CategoricalBatch& p, const CategoricalBatch& q,
          const DivergenceSpec& spec);

// Squared Hellinger identity value -2*log sum_m sqrt(p[i,m]*q[i,m]),
// computed on an independent probability-domain route (no logsumexp) so it
// can cross-validate renyi at alpha = 0.5.
Tensor hellinger_check(const CategoricalBatch& p, const CategoricalBatch& q,
                       const DivergenceSpec& spec);

// Mean negative log-likelihood over the batch, in nats. log_probs rows are
// log-distributions (e.g. from log_softmax); labels index classes.
Tensor cross_entropy(const Tensor& log_probs,
                     const std::vector<std::int64_t>& labels);

// Two-event divergence curve: one distribution is fixed at (a, 1-a), the
// other sweeps (v, 1-v) for v on an even grid over [0.001, 0.999].
struct CurveSpec {
  bool fix_p = false;   // true: P fixed, the free probability is q's first
                        // event; false: Q fixed, the free probability is p's.
  double a = 0.5;       // first event of the fixed distribution, in (0, 1)
  std::vector<double> alphas;      // non-empty, each >= 0
  std::size_t grid_points = 999;   // >= 2; 999 gives a 0.001-step grid
  double epsilon_floor = 1e-12;
  double kl_switch_tol = 2e-4;

  void validate() const;
};

struct CurvePoint {
  double free_prob;
  double alpha;
  double divergence;
};

// Rows ordered by free_prob ascending, then alpha ascending. The grid always
// contains the equality point v = a (inserted when missing, so the curve's
// zero minimum is visible) and the alpha list always contains the KL row
// alpha = 1 (inserted when missing).
std::vector<CurvePoint> divergence_curve(const CurveSpec& spec);

// Tab-separated table with a header row: free_prob, alpha, divergence.
// Values are printed with enough digits to round-trip doubles exactly.
void write_curve(const std::vector<CurvePoint>& rows, std::ostream& out);

}  // namespace rdml
