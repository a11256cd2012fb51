#pragma once

#include <cmath>
#include <cstdint>

#include "core.hpp"

namespace dpparse {

enum class PenaltySign { add, subtract };

struct DPParams {
  double alpha0 = 100.0;
  double gamma = 1.8;
  double delta = 4.0;
  double epsilon_log = 1e-10;
  double n_L = 0.0;  // tokens in the current segmentation
  double n_L0 = 1.0; // entries in the base index
  PenaltySign penalty_sign = PenaltySign::subtract;

  void validate() const {
    if (!(alpha0 > 0.0)) throw Error("dp: alpha0 must be > 0");
    if (!(delta > 0.0)) throw Error("dp: delta must be > 0");
    if (!(gamma >= 0.0)) throw Error("dp: gamma must be >= 0");
    if (!(epsilon_log > 0.0)) throw Error("dp: epsilon_log must be > 0");
    if (!(n_L >= 0.0)) throw Error("dp: n_L must be >= 0");
    if (!(n_L0 >= 1.0)) throw Error("dp: n_L0 must be >= 1");
  }
};

/// Base distribution: share of the candidate-segment population resembling w.
inline double base_probability(double l0_w, double n_L0) {
  if (n_L0 <= 0.0) throw Error("base probability: empty base index");
  return l0_w / n_L0;
}

/// Dirichlet-process mixture of the lexicon soft count and the base distribution.
inline double word_probability(double l_w, double p0_w, const DPParams &p) {
  const double denom = p.n_L + p.alpha0;
  return l_w / denom + p.alpha0 * p0_w / denom;
}

/// ((len - 1) / delta)^gamma. gamma = 0 switches the term off entirely (0^0 is taken as 0).
inline double length_penalty(std::uint32_t len_blocks, double gamma, double delta) {
  if (gamma == 0.0 || len_blocks <= 1) return 0.0;
  return std::pow((double(len_blocks) - 1.0) / delta, gamma);
}

/// Log-domain arc score: log(P + eps) combined with the duration term. `add` is the
/// printed form; the default `subtract` makes longer tokens cost more.
inline double arc_score(double p_w, std::uint32_t len_blocks, const DPParams &p) {
  const double q = length_penalty(len_blocks, p.gamma, p.delta);
  const double lp = std::log(p_w + p.epsilon_log);
  return p.penalty_sign == PenaltySign::add ? lp + q : lp - q;
}

} // namespace dpparse
