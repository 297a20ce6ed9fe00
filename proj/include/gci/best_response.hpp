#pragma once

#include <span>
#include <vector>

#include "gci/game.hpp"

namespace gci {

// A playable game: either the original instance (exact security costs) or its
// piecewise-linear approximation (one fitted cost per player). Everything but
// the security cost term is shared between the two.
struct GameView {
  const GciInstance* instance = nullptr;
  std::span<const pwl::PwlFunction> cost_approx;

  bool approximated() const { return !cost_approx.empty(); }
  double cost(int p, double s) const;
};

// Opponents collapse to their expected quantity per market and expected
// security, summed over opponents; payoffs are affine in both.
struct OpponentAggregates {
  std::vector<double> quantity_sum;
  double security_sum = 0.0;
};

OpponentAggregates aggregate_opponents(const GciInstance& inst, const MixedProfile& profile,
                                       int p);

struct QuantityChoice {
  std::vector<double> quantity;
  std::vector<std::uint8_t> entry;
  double value = 0.0;  // market profit at this s, before security cost and damage
};

// Markets separate: each is a capped one-dimensional quadratic, entered only
// when its best value beats the setup charge (ties stay out).
QuantityChoice optimal_quantities_for_s(const GciInstance& inst, int p,
                                        const OpponentAggregates& agg, double s);

// Value of the best reply restricted to security level s.
double phi(const GameView& view, int p, const OpponentAggregates& agg, double s);

// Bound on |d phi / d s| over the feasible security range, used to size the
// certified search grid.
double lipschitz_bound(const GameView& view, int p);

struct BestResponseResult {
  PureStrategy strategy;
  double value = 0.0;
  double gap = 0.0;  // the returned value is within gap of the true optimum
};

// Certified within delta_gap: phi is evaluated on a grid with spacing
// delta_gap / (2 L) including both endpoints, then the incumbent is polished
// locally. Throws std::invalid_argument unless delta_gap > 0.
BestResponseResult best_response_to_aggregates(const GameView& view, int p,
                                               const OpponentAggregates& agg,
                                               double delta_gap);
BestResponseResult best_response(const GameView& view, int p, const MixedProfile& profile,
                                 double delta_gap);

double expected_payoff(const GameView& view, int p, const PureStrategy& own,
                       const OpponentAggregates& agg);
double expected_payoff(const GameView& view, int p, const MixedStrategy& own,
                       const OpponentAggregates& agg);

// How much player p can gain by deviating from profile[p], up to the oracle
// gap: best-reply value minus current expected payoff.
double regret(const GameView& view, const MixedProfile& profile, int p, double delta_gap);

}  // namespace gci
