// SPDX-License-Identifier: Apache-2.0
#include "rdml/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rdml/text.hpp"

namespace rdml {

namespace {

void check_batch_pair(const CategoricalBatch& p, const CategoricalBatch& q,
                      const char* op) {
  if (p.probs.shape() != q.probs.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

CategoricalBatch CategoricalBatch::from_probs(Tensor probs) {
  if (probs.rank() != 2 || probs.shape()[0] == 0 || probs.shape()[1] == 0) {
    throw std::invalid_argument("CategoricalBatch: probs must be [n, m]");
  }
  const std::size_t n = probs.shape()[0];
  const std::size_t m = probs.shape()[1];
  auto values = probs.values();
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = values[i * m + j];
      if (v < 0.0) {
        throw std::invalid_argument("CategoricalBatch: negative probability");
      }
      row_sum += v;
    }
    if (std::abs(row_sum - 1.0) > 1e-9) {
      throw std::invalid_argument(
          "CategoricalBatch: row does not sum to 1 within 1e-9");
    }
  }
  return CategoricalBatch{std::move(probs)};
}

CategoricalBatch CategoricalBatch::from_logits(const Tensor& logits) {
  return CategoricalBatch{exp(log_softmax(logits))};
}

void DivergenceSpec::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("DivergenceSpec: alpha must be >= 0");
  }
  if (!(epsilon_floor > 0.0) || epsilon_floor > 1e-4) {
    throw std::invalid_argument(
        "DivergenceSpec: epsilon_floor must be in (0, 1e-4]");
  }
  if (!(kl_switch_tol >= 0.0) || !std::isfinite(kl_switch_tol)) {
    throw std::invalid_argument("DivergenceSpec: kl_switch_tol must be >= 0");
  }
}

Tensor floored_log_probs(const Tensor& probs, double epsilon_floor) {
  if (probs.rank() != 2) {
    throw std::invalid_argument("floored_log_probs: probs must be [n, m]");
  }
  const std::size_t m = probs.shape()[1];
  Tensor floored = max(probs, Tensor(epsilon_floor));
  Tensor log_floored = log(floored);
  // log of each row sum, subtracted from every entry to renormalize.
  Tensor log_row_sums = log(sum(floored, 1));
  return sub(log_floored, repeat_cols(log_row_sums, m));
}

Tensor renyi(const CategoricalBatch& p, const CategoricalBatch& q,
             const DivergenceSpec& spec) {
  spec.validate();
  check_batch_pair(p, q, "renyi");
  if (std::abs(spec.alpha - 1.0) < spec.kl_switch_tol) {
    return kl(p, q, spec);
  }
  const double a = spec.alpha;
  Tensor log_p = floored_log_probs(p.probs, spec.epsilon_floor);
  Tensor log_q = floored_log_probs(q.probs, spec.epsilon_floor);
  // 1/(a-1) * log sum_m exp(a*log p + (1-a)*log q), stable via logsumexp.
  Tensor mixed = add(mul(log_p, Tensor(a)), mul(log_q, Tensor(1.0 - a)));
  return mul(logsumexp_rows(mixed), Tensor(1.0 / (a - 1.0)));
}

Tensor kl(const CategoricalBatch& p, const CategoricalBatch& q,
          const DivergenceSpec& spec) {
  spec.validate();
  check_batch_pair(p, q, "kl");
  Tensor log_p = floored_log_probs(p.probs, spec.epsilon_floor);
  Tensor log_q = floored_log_probs(q.probs, spec.epsilon_floor);
  return sum(mul(exp(log_p), sub(log_p, log_q)), 1);
}

Tensor hellinger_check(const CategoricalBatch& p, const CategoricalBatch& q,
                       const DivergenceSpec& spec) {
  spec.validate();
  check_batch_pair(p, q, "hellinger_check");
  const std::size_t m = p.probs.shape()[1];
  // Probability-domain route, deliberately independent of renyi's
  // log-domain path: -2 * log sum_m sqrt(p_m * q_m) on the floored,
  // renormalized rows.
  auto normalized = [&](const Tensor& probs) {
    Tensor floored = max(probs, Tensor(spec.epsilon_floor));
    Tensor inv_row_sums = pow(sum(floored, 1), -1.0);
    return mul(floored, repeat_cols(inv_row_sums, m));
  };
  Tensor bc = sum(pow(mul(normalized(p.probs), normalized(q.probs)), 0.5), 1);
  return mul(log(bc), Tensor(-2.0));
}

Tensor cross_entropy(const Tensor& log_probs,
                     const std::vector<std::int64_t>& labels) {
  if (log_probs.rank() != 2 || log_probs.shape()[0] != labels.size()) {
    throw std::invalid_argument("cross_entropy: log_probs/labels mismatch");
  }
  const auto classes = static_cast<std::int64_t>(log_probs.shape()[1]);
  for (std::int64_t label : labels) {
    if (label < 0 || label >= classes) {
      throw std::invalid_argument("cross_entropy: label out of range");
    }
  }
  return neg(mean(gather_rows(log_probs, labels)));
}

void CurveSpec::validate() const {
  if (!(a > 0.0) || !(a < 1.0)) {
    throw std::invalid_argument("CurveSpec: a must be in (0, 1)");
  }
  if (alphas.empty()) {
    throw std::invalid_argument("CurveSpec: alpha list is empty");
  }
  for (double alpha : alphas) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
      throw std::invalid_argument("CurveSpec: alpha must be >= 0");
    }
  }
  if (grid_points < 2) {
    throw std::invalid_argument("CurveSpec: grid_points must be >= 2");
  }
  DivergenceSpec{alphas.front(), epsilon_floor, kl_switch_tol}.validate();
}

std::vector<CurvePoint> divergence_curve(const CurveSpec& spec) {
  spec.validate();

  constexpr double kGridLo = 0.001;
  constexpr double kGridHi = 0.999;
  std::vector<double> grid(spec.grid_points);
  const double step = (kGridHi - kGridLo) / static_cast<double>(spec.grid_points - 1);
  for (std::size_t i = 0; i < spec.grid_points; ++i) {
    grid[i] = kGridLo + step * static_cast<double>(i);
  }
  // The equality point belongs on the curve so its zero minimum is visible.
  const bool has_a = std::any_of(grid.begin(), grid.end(), [&](double v) {
    return std::abs(v - spec.a) <= 1e-12;
  });
  if (!has_a) {
    grid.push_back(spec.a);
    std::sort(grid.begin(), grid.end());
  }

  std::vector<double> alphas = spec.alphas;
  const bool has_kl_row = std::any_of(alphas.begin(), alphas.end(),
                                      [](double v) { return v == 1.0; });
  if (!has_kl_row) {
    alphas.push_back(1.0);
  }
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());

  const Tensor fixed({1, 2}, {spec.a, 1.0 - spec.a});
  std::vector<CurvePoint> rows;
  rows.reserve(grid.size() * alphas.size());
  for (double v : grid) {
    const Tensor free({1, 2}, {v, 1.0 - v});
    const CategoricalBatch p =
        CategoricalBatch::from_probs(spec.fix_p ? fixed : free);
    const CategoricalBatch q =
        CategoricalBatch::from_probs(spec.fix_p ? free : fixed);
    for (double alpha : alphas) {
      const DivergenceSpec dspec{alpha, spec.epsilon_floor, spec.kl_switch_tol};
      rows.push_back(CurvePoint{v, alpha, renyi(p, q, dspec).at(0)});
    }
  }
  return rows;
}

void write_curve(const std::vector<CurvePoint>& rows, std::ostream& out) {
  out << "free_prob\talpha\tdivergence\n";
  for (const CurvePoint& row : rows) {
    out << format_double(row.free_prob) << '\t' << format_double(row.alpha)
        << '\t' << format_double(row.divergence) << '\n';
  }
}

}  // namespace rdml
