#include "gci/sgm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace gci {
namespace {

constexpr double kSlack = 1e-9;

bool same_strategy(const PureStrategy& a, const PureStrategy& b, double tol) {
  if (a.quantity.size() != b.quantity.size()) return false;
  if (std::abs(a.security - b.security) > tol) return false;
  for (std::size_t j = 0; j < a.quantity.size(); ++j) {
    if (a.entry[j] != b.entry[j]) return false;
    if (std::abs(a.quantity[j] - b.quantity[j]) > tol) return false;
  }
  return true;
}

// Appends unless an equal strategy is already sampled; reports the slot.
bool add_strategy(std::vector<PureStrategy>& list, const PureStrategy& st, int* slot) {
  for (std::size_t k = 0; k < list.size(); ++k) {
    if (same_strategy(list[k], st, 1e-9)) {
      *slot = int(k);
      return false;
    }
  }
  list.push_back(st);
  *slot = int(list.size()) - 1;
  return true;
}

MixedProfile materialize(const std::vector<std::vector<PureStrategy>>& strategies,
                         const SampledMixedProfile& probs) {
  MixedProfile profile(strategies.size());
  for (std::size_t p = 0; p < strategies.size(); ++p) {
    profile[p].support = strategies[p];
    profile[p].probs = probs[p];
  }
  return profile;
}

MixedProfile prune_profile(const MixedProfile& profile) {
  MixedProfile out(profile.size());
  for (std::size_t p = 0; p < profile.size(); ++p) {
    double total = 0.0;
    for (std::size_t k = 0; k < profile[p].support.size(); ++k) {
      if (profile[p].probs[k] > 1e-12) {
        out[p].support.push_back(profile[p].support[k]);
        out[p].probs.push_back(profile[p].probs[k]);
        total += profile[p].probs[k];
      }
    }
    if (out[p].support.empty() && !profile[p].support.empty()) {
      out[p].support.push_back(profile[p].support[0]);
      out[p].probs.push_back(1.0);
      total = 1.0;
    }
    for (double& x : out[p].probs) x /= total;
  }
  return out;
}

}  // namespace

double default_delta_gap(double delta_f, double mu) {
  return (1.0 - mu) * 4.0 * delta_f / 5.0;
}

void SgmConfig::validate() const {
  if (!(delta > 0.0)) throw std::invalid_argument("sgm config: delta must be positive");
  if (!(delta_gap > 0.0) || !(delta_gap < delta))
    throw std::invalid_argument("sgm config: need 0 < delta_gap < delta");
  if (!(delta_M >= 0.0)) throw std::invalid_argument("sgm config: delta_M must be >= 0");
  if (max_iterations < 1) throw std::invalid_argument("sgm config: max_iterations must be >= 1");
  if (!(time_limit_s > 0.0)) throw std::invalid_argument("sgm config: time limit must be positive");
}

const char* to_string(SgmStatus status) {
  switch (status) {
    case SgmStatus::Solved: return "Solved";
    case SgmStatus::TimeLimit: return "TimeLimit";
    case SgmStatus::SolverExhausted: return "SolverExhausted";
  }
  return "?";
}

std::vector<PureStrategy> initialize_samples(const GameView& view, double delta_gap) {
  const GciInstance& inst = *view.instance;
  OpponentAggregates idle;
  idle.quantity_sum.assign(inst.markets.size(), 0.0);
  std::vector<PureStrategy> out;
  for (int p = 0; p < inst.num_players(); ++p)
    out.push_back(best_response_to_aggregates(view, p, idle, delta_gap).strategy);
  return out;
}

SgmOutcome run_sgm(const GameView& view, const SgmConfig& config,
                   const MixedProfile* warm_start) {
  config.validate();
  const GciInstance& inst = *view.instance;
  const int m = inst.num_players();

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  auto strategies = std::vector<std::vector<PureStrategy>>(std::size_t(m));
  SampledMixedProfile warm_probs;
  bool have_warm = false;

  if (warm_start != nullptr && !warm_start->empty()) {
    if (int(warm_start->size()) != m)
      throw std::invalid_argument("run_sgm: warm start needs one mixed strategy per player");
    warm_probs.assign(std::size_t(m), {});
    for (int p = 0; p < m; ++p) {
      const MixedStrategy& mix = (*warm_start)[std::size_t(p)];
      if (mix.support.empty() || mix.support.size() != mix.probs.size())
        throw std::invalid_argument("run_sgm: malformed warm start");
      for (std::size_t k = 0; k < mix.support.size(); ++k) {
        if (!strategy_feasible(inst, p, mix.support[k]))
          throw std::invalid_argument("run_sgm: infeasible warm-start strategy");
        int slot = -1;
        if (add_strategy(strategies[std::size_t(p)], mix.support[k], &slot))
          warm_probs[std::size_t(p)].push_back(mix.probs[k]);
        else
          warm_probs[std::size_t(p)][std::size_t(slot)] += mix.probs[k];
      }
    }
    have_warm = true;
  } else {
    const std::vector<PureStrategy> init = initialize_samples(view, config.delta_gap);
    for (int p = 0; p < m; ++p) strategies[std::size_t(p)] = {init[std::size_t(p)]};
  }

  SgmOutcome out;
  out.strategies_added.assign(std::size_t(m), 0);
  SampledMixedProfile current;
  bool have_current = false;

  while (true) {
    if (elapsed() > config.time_limit_s) {
      out.status = SgmStatus::TimeLimit;
      break;
    }
    if (out.iterations >= config.max_iterations) {
      out.status = SgmStatus::SolverExhausted;
      break;
    }
    ++out.iterations;

    try {
      const SampledGame game = build_sampled_game(view, strategies);
      SolveOptions opts;
      opts.deadline = [&] { return elapsed() > config.time_limit_s; };
      current = solve_sampled_ne(game, config.delta_M, have_warm ? &warm_probs : nullptr, opts);
      have_current = true;
    } catch (const SolverExhausted&) {
      out.status = elapsed() > config.time_limit_s ? SgmStatus::TimeLimit
                                                   : SgmStatus::SolverExhausted;
      break;
    }

    const MixedProfile mixed = materialize(strategies, current);
    bool any_profitable = false;
    bool any_new = false;
    for (int p = 0; p < m; ++p) {
      const OpponentAggregates agg = aggregate_opponents(inst, mixed, p);
      const BestResponseResult br = best_response_to_aggregates(view, p, agg, config.delta_gap);
      const double gain = br.value - expected_payoff(view, p, mixed[std::size_t(p)], agg);
      if (gain > config.delta - config.delta_gap + kSlack) {
        any_profitable = true;
        int slot = -1;
        if (add_strategy(strategies[std::size_t(p)], br.strategy, &slot)) {
          any_new = true;
          ++out.strategies_added[std::size_t(p)];
        }
      }
    }

    if (!any_profitable) {
      out.status = SgmStatus::Solved;
      break;
    }
    if (!any_new) {
      // Every profitable deviation was already sampled: the sampled solve and
      // the oracle disagree beyond their tolerances, so give up honestly.
      out.status = SgmStatus::SolverExhausted;
      break;
    }

    warm_probs = current;
    for (int p = 0; p < m; ++p)
      warm_probs[std::size_t(p)].resize(strategies[std::size_t(p)].size(), 0.0);
    have_warm = true;
  }

  if (have_current) {
    out.profile = prune_profile(materialize(strategies, current));
  } else {
    // Timed out (or capped) before the first solve: report the bare samples.
    out.profile.assign(std::size_t(m), {});
    for (int p = 0; p < m; ++p) {
      if (strategies[std::size_t(p)].empty()) {
        const std::vector<PureStrategy> init = initialize_samples(view, config.delta_gap);
        out.profile[std::size_t(p)].support = {init[std::size_t(p)]};
      } else {
        out.profile[std::size_t(p)].support = {strategies[std::size_t(p)][0]};
      }
      out.profile[std::size_t(p)].probs = {1.0};
    }
  }
  out.wall_time_s = elapsed();
  return out;
}

ApproximatedGame approximate_ipg(const GciInstance& inst, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("approximate_ipg: delta must be positive");
  inst.validate();

  ApproximatedGame ag;
  ag.base = inst;
  ag.tolerance = delta;
  for (int p = 0; p < inst.num_players(); ++p) {
    const PlayerParams& pl = inst.players[std::size_t(p)];
    const pwl::UnivariateSpec spec =
        cost_spec(inst.cost_kind, pl.alpha, inst.security_caps[std::size_t(p)], delta);
    ag.cost_approx.push_back(pwl::fit_pwl(spec));
  }
  return ag;
}

ProcedureResult direct_procedure(const GciInstance& inst, double delta_f, double mu,
                                 double time_limit_s) {
  if (!(delta_f > 0.0)) throw std::invalid_argument("direct_procedure: delta_f must be positive");
  if (!(mu > 0.0) || !(mu < 1.0))
    throw std::invalid_argument("direct_procedure: mu must lie in (0, 1)");

  const ApproximatedGame ag = approximate_ipg(inst, mu * delta_f / 2.0);
  SgmConfig cfg;
  cfg.delta = (1.0 - mu) * delta_f;
  cfg.delta_gap = default_delta_gap(delta_f, mu);
  cfg.delta_M = cfg.delta / 10.0;
  cfg.time_limit_s = time_limit_s;

  SgmOutcome out = run_sgm(ag.view(), cfg);
  ProcedureResult res;
  res.profile = out.profile;
  res.stage1 = std::move(out);
  return res;
}

ProcedureResult two_level_procedure(const GciInstance& inst, double delta_f, double delta_0,
                                    double mu, double time_limit_s) {
  if (!(delta_f > 0.0))
    throw std::invalid_argument("two_level_procedure: delta_f must be positive");
  if (!(mu > 0.0) || !(mu < 1.0))
    throw std::invalid_argument("two_level_procedure: mu must lie in (0, 1)");
  if (!(delta_0 > mu * delta_f / 2.0))
    throw std::invalid_argument(
        "two_level_procedure: delta_0 must exceed the fine tolerance mu*delta_f/2");

  SgmConfig cfg;
  cfg.delta = (1.0 - mu) * delta_f;
  cfg.delta_gap = default_delta_gap(delta_f, mu);
  cfg.delta_M = cfg.delta / 10.0;
  cfg.time_limit_s = time_limit_s;

  ProcedureResult res;
  {
    const ApproximatedGame coarse = approximate_ipg(inst, delta_0);
    res.stage1 = run_sgm(coarse.view(), cfg);
    res.profile = res.stage1.profile;
  }
  if (res.stage1.status != SgmStatus::Solved) return res;

  const ApproximatedGame fine = approximate_ipg(inst, mu * delta_f / 2.0);
  res.stage2 = run_sgm(fine.view(), cfg, &res.stage1.profile);
  res.profile = res.stage2->profile;
  return res;
}

double certify_equilibrium(const GciInstance& inst, const MixedProfile& profile,
                           double delta_gap) {
  if (int(profile.size()) != inst.num_players())
    throw std::invalid_argument("certify_equilibrium: one mixed strategy per player");
  for (int p = 0; p < inst.num_players(); ++p) {
    const MixedStrategy& mix = profile[std::size_t(p)];
    if (mix.support.empty() || mix.support.size() != mix.probs.size())
      throw std::invalid_argument("certify_equilibrium: malformed mixed strategy");
    for (const PureStrategy& st : mix.support) {
      if (!strategy_feasible(inst, p, st))
        throw std::invalid_argument("certify_equilibrium: infeasible support strategy");
    }
  }

  const GameView exact{&inst, {}};
  double worst = 0.0;
  for (int p = 0; p < inst.num_players(); ++p)
    worst = std::max(worst, regret(exact, profile, p, delta_gap));
  return worst;
}

}  // namespace gci
