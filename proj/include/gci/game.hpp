#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "gci/pwl.hpp"

namespace gci {

// Security cost shapes: inverse square root, logarithmic, and the nonconvex
// blend of the inverse square root with a logistic bump.
enum class CostKind { ISR, LOG, NCF };

const char* to_string(CostKind kind);
CostKind cost_kind_from_string(const std::string& name);

struct MarketParams {
  double q = 0.0;        // demand intercept
  double m_slope = 0.0;  // price drop per unit of total quantity
  double r = 0.0;        // price lift per unit of average security
};

struct PlayerParams {
  double c_prod = 0.0;
  std::vector<double> c_setup;  // per market, charged on entry
  std::vector<double> c_lin;    // per market, linear quantity cost
  std::vector<double> c_quad;   // per market, quadratic quantity cost
  double alpha = 0.0;           // security cost scale
  double damage = 0.0;          // loss when fully exposed
  double budget = 0.0;          // security spending cap
  std::vector<double> q_cap;    // per market production capacity
};

struct GciInstance {
  CostKind cost_kind = CostKind::ISR;
  std::vector<MarketParams> markets;
  std::vector<PlayerParams> players;
  // Per-player security level where the cost meets the budget; strategies
  // must keep s in [0, security_caps[p]].
  std::vector<double> security_caps;
  std::uint64_t seed = 0;
  bool has_seed = false;

  int num_players() const { return int(players.size()); }
  int num_markets() const { return int(markets.size()); }
  void validate() const;  // throws std::invalid_argument on broken invariants
};

struct PureStrategy {
  std::vector<double> quantity;      // per market
  std::vector<std::uint8_t> entry;   // per market, 0/1
  double security = 0.0;
};

struct MixedStrategy {
  std::vector<PureStrategy> support;
  std::vector<double> probs;
};

// One mixed strategy per player, indexed by player.
using MixedProfile = std::vector<MixedStrategy>;

// Security cost h(s) on [0, 1), with h(0) = 0 and h -> infinity as s -> 1.
// Throws std::domain_error for s outside [0, 1).
double cost_h(CostKind kind, double alpha, double s);
double cost_h_derivative(CostKind kind, double alpha, double s);

// Largest s with h(s) <= budget. Throws std::invalid_argument unless
// alpha > 0 and budget > 0.
double security_cap(CostKind kind, double alpha, double budget);

// Interior abscissas of [0, hi] where the cost curvature changes sign.
// Empty for the convex kinds.
std::vector<double> cost_curvature_breaks(CostKind kind, double alpha, double hi);

// Corridor-fit target for one player's security cost on [0, s_cap].
pwl::UnivariateSpec cost_spec(CostKind kind, double alpha, double s_cap, double delta);

bool strategy_feasible(const GciInstance& inst, int p, const PureStrategy& strat,
                       double tol = 1e-9);

// Payoff of player p under a pure profile (one strategy per player).
double payoff(const GciInstance& inst, int p, const std::vector<PureStrategy>& profile);

// Payoff of `own` for player p with the opponents collapsed to their summed
// quantities per market and summed security, leaving out p's security cost.
// Payoffs are affine in those two aggregates, which is what makes expectations
// over product distributions collapse to a single evaluation.
double payoff_before_cost(const GciInstance& inst, int p, const PureStrategy& own,
                          const std::vector<double>& opp_quantity_sum,
                          double opp_security_sum);

// Expected payoff of the pure strategy `own` against the mixed opponents in
// `profile` (profile[p] is ignored). Exact, via the affine collapse above.
double expected_payoff(const GciInstance& inst, int p, const PureStrategy& own,
                       const MixedProfile& profile);

GciInstance generate_instance(int num_players, int num_markets, CostKind kind,
                              std::uint64_t seed);

nlohmann::json instance_to_json(const GciInstance& inst);
GciInstance instance_from_json(const nlohmann::json& j);
void save_instance(const GciInstance& inst, const std::string& path);
GciInstance load_instance(const std::string& path);

}  // namespace gci
