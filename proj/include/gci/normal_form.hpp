#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "gci/best_response.hpp"

namespace gci {

// A finite game over sampled pure strategies. One payoff tensor per player,
// flattened row-major with the last player's index moving fastest. The
// strategy lists are empty for hand-built games used in tests.
struct SampledGame {
  std::vector<std::vector<PureStrategy>> strategies;
  std::vector<int> shape;
  std::vector<std::vector<double>> payoffs;

  int num_players() const { return int(shape.size()); }
  std::size_t flat_size() const;
  double at(int p, const std::vector<int>& idx) const;
};

// Full-length probability vector per player, aligned with the strategy lists.
using SampledMixedProfile = std::vector<std::vector<double>>;

// The sampled solver could not produce an equilibrium within its enumeration
// budget; distinct from a time limit so callers can report it separately.
struct SolverExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Evaluates every profile cell through the shared payoff path of the view.
// Throws std::invalid_argument on empty lists and SolverExhausted when the
// tensor would exceed 2^26 entries.
SampledGame build_sampled_game(const GameView& view,
                               const std::vector<std::vector<PureStrategy>>& strategies);

double sampled_expected_payoff(const SampledGame& g, int p, const SampledMixedProfile& prof);

// Expected payoff for p when it plays `strategy` and everyone else follows prof.
double sampled_deviation_value(const SampledGame& g, int p, int strategy,
                               const SampledMixedProfile& prof);

double sampled_regret(const SampledGame& g, const SampledMixedProfile& prof, int p);

struct SolveOptions {
  // First pass: total support size up to num_players + first_pass_extra with
  // at most first_pass_per_player strategies per player; the relaxed second
  // pass lifts both caps and is bounded by the candidate budget instead.
  int first_pass_extra = 4;
  int first_pass_per_player = 4;
  long long candidate_budget = 1000000;
  std::function<bool()> deadline;  // returns true when the caller wants out
};

// Equilibrium of the sampled game with regret at most delta_M for every
// player. Support sets are enumerated by increasing total size (the warm
// start's support first, then exact pass, then relaxed pass); candidate
// probabilities come from the indifference system, and a full sampled_regret
// check is the only acceptance test. Throws SolverExhausted when enumeration
// runs out of candidates, budget, or the deadline fires.
SampledMixedProfile solve_sampled_ne(const SampledGame& g, double delta_M,
                                     const SampledMixedProfile* warm_start = nullptr,
                                     const SolveOptions& options = {});

}  // namespace gci
