#pragma once

#include <optional>
#include <vector>

#include "gci/normal_form.hpp"

namespace gci {

// The instance with every security cost replaced by a corridor fit of width
// tolerance. Payoffs of the two games differ by at most that tolerance, so an
// equilibrium here is an approximate equilibrium of the original game with
// twice the tolerance added to its regret bound.
struct ApproximatedGame {
  GciInstance base;
  std::vector<pwl::PwlFunction> cost_approx;
  double tolerance = 0.0;

  GameView view() const { return {&base, {cost_approx.data(), cost_approx.size()}}; }
};

ApproximatedGame approximate_ipg(const GciInstance& inst, double delta);

// Oracle gap used by the procedures: (1 - mu) * 4 * delta_f / 5, which stays
// strictly below the sampled-game target (1 - mu) * delta_f.
double default_delta_gap(double delta_f, double mu);

struct SgmConfig {
  double delta = 1e-4;       // certified regret target in the solved view
  double delta_gap = 4e-5;   // best-response oracle gap
  double delta_M = 5e-6;     // sampled-game equilibrium tolerance
  long max_iterations = 1000000;
  double time_limit_s = 900.0;

  void validate() const;  // throws std::invalid_argument
};

enum class SgmStatus { Solved, TimeLimit, SolverExhausted };
const char* to_string(SgmStatus status);

struct SgmOutcome {
  MixedProfile profile;
  SgmStatus status = SgmStatus::SolverExhausted;
  long iterations = 0;
  std::vector<long> strategies_added;  // per player, beyond the initial samples
  double wall_time_s = 0.0;
};

// One starting strategy per player: its best reply against opponents who
// produce nothing and invest nothing.
std::vector<PureStrategy> initialize_samples(const GameView& view, double delta_gap);

// Sample generation loop: solve the finite game over the sampled strategies,
// probe every player with the best-response oracle, stop once no player can
// gain delta - delta_gap, and otherwise add every profitable deviation and
// re-solve with the previous mixed profile as a warm start.
SgmOutcome run_sgm(const GameView& view, const SgmConfig& config,
                   const MixedProfile* warm_start = nullptr);

struct ProcedureResult {
  MixedProfile profile;
  SgmOutcome stage1;
  std::optional<SgmOutcome> stage2;
};

// Approximate once at mu * delta_f / 2, then run the loop with target
// (1 - mu) * delta_f: a Solved outcome carries a delta_f certificate in the
// original game.
ProcedureResult direct_procedure(const GciInstance& inst, double delta_f, double mu,
                                 double time_limit_s = 900.0);

// Same certificate, but a coarse stage at delta_0 first feeds its equilibrium
// to the fine stage as a warm start. Requires delta_0 > mu * delta_f / 2.
ProcedureResult two_level_procedure(const GciInstance& inst, double delta_f, double delta_0,
                                    double mu, double time_limit_s = 900.0);

// Max regret over players in the original game, measured with the exact-cost
// best-response oracle at gap delta_gap.
double certify_equilibrium(const GciInstance& inst, const MixedProfile& profile,
                           double delta_gap);

}  // namespace gci
