#include <cmath>
#include <vector>

#include "doctest.h"
#include "gci/sgm.hpp"

using gci::CostKind;
using gci::GameView;
using gci::GciInstance;
using gci::MixedProfile;
using gci::SgmConfig;
using gci::SgmStatus;

namespace {

SgmConfig coarse_config() {
  SgmConfig cfg;
  cfg.delta = 0.05;
  cfg.delta_gap = 0.01;
  cfg.delta_M = 0.005;
  return cfg;
}

}  // namespace

TEST_CASE("initial samples are best replies to an empty world") {
  const GciInstance inst = gci::generate_instance(2, 2, CostKind::ISR, 8);
  const GameView view{&inst, {}};
  const auto samples = gci::initialize_samples(view, 1e-3);
  REQUIRE(samples.size() == 2);

  gci::OpponentAggregates idle;
  idle.quantity_sum = {0.0, 0.0};
  for (int p = 0; p < 2; ++p) {
    const auto br = gci::best_response_to_aggregates(view, p, idle, 1e-3);
    CHECK(samples[p].security == doctest::Approx(br.strategy.security));
    for (int j = 0; j < 2; ++j) {
      CHECK(samples[p].quantity[j] == doctest::Approx(br.strategy.quantity[j]));
      CHECK(samples[p].entry[j] == br.strategy.entry[j]);
    }
    CHECK(gci::strategy_feasible(inst, p, samples[p]));
  }
}

TEST_CASE("an almost strategy-less market solves in one iteration") {
  GciInstance inst;
  inst.cost_kind = CostKind::ISR;
  inst.markets = {{10.0, 1.0, 0.5}};
  gci::PlayerParams pl;
  pl.c_prod = 1.0;
  pl.c_setup = {1.0};
  pl.c_lin = {0.5};
  pl.c_quad = {0.25};
  pl.alpha = 1.0;
  pl.damage = 4.0;
  pl.budget = 1e-12;
  pl.q_cap = {1e-9};
  inst.players = {pl, pl};
  const double cap = gci::security_cap(CostKind::ISR, 1.0, 1e-12);
  inst.security_caps = {cap, cap};
  inst.validate();

  const GameView view{&inst, {}};
  SgmConfig cfg = coarse_config();
  const auto out = gci::run_sgm(view, cfg);
  CHECK(out.status == SgmStatus::Solved);
  CHECK(out.iterations == 1);
  for (long added : out.strategies_added) CHECK(added == 0);
  REQUIRE(out.profile.size() == 2);
  for (const auto& mix : out.profile) {
    REQUIRE(mix.support.size() == 1);
    CHECK(mix.probs[0] == doctest::Approx(1.0));
    CHECK(mix.support[0].entry[0] == 0);  // the setup fee dwarfs any tiny sale
  }
}

TEST_CASE("the sampling loop certifies a solved exact-view game") {
  const GciInstance inst = gci::generate_instance(2, 2, CostKind::LOG, 3);
  const GameView view{&inst, {}};
  SgmConfig cfg = coarse_config();
  const auto out = gci::run_sgm(view, cfg);
  REQUIRE(out.status == SgmStatus::Solved);
  CHECK(out.iterations >= 1);
  CHECK(out.wall_time_s >= 0.0);
  CHECK(gci::certify_equilibrium(inst, out.profile, cfg.delta_gap) <= cfg.delta + 1e-8);

  SUBCASE("restarting at the equilibrium stops immediately") {
    const auto again = gci::run_sgm(view, cfg, &out.profile);
    CHECK(again.status == SgmStatus::Solved);
    CHECK(again.iterations == 1);
    for (long added : again.strategies_added) CHECK(added == 0);
  }

  SUBCASE("the iteration cap reports exhaustion") {
    if (out.iterations >= 2) {
      SgmConfig capped = cfg;
      capped.max_iterations = 1;
      const auto cut = gci::run_sgm(view, capped);
      CHECK(cut.status == SgmStatus::SolverExhausted);
      CHECK(cut.iterations == 1);
    }
  }

  SUBCASE("a sabotaged profile shows real regret") {
    MixedProfile bad = out.profile;
    gci::PureStrategy greedy;
    greedy.quantity = {inst.players[0].q_cap[0], inst.players[0].q_cap[1]};
    greedy.entry = {1, 1};
    greedy.security = 0.0;
    bad[0] = {{greedy}, {1.0}};
    CHECK(gci::certify_equilibrium(inst, bad, cfg.delta_gap) > cfg.delta);
  }
}

TEST_CASE("a vanishing time limit reports TimeLimit with a usable profile") {
  const GciInstance inst = gci::generate_instance(2, 2, CostKind::ISR, 4);
  const GameView view{&inst, {}};
  SgmConfig cfg = coarse_config();
  cfg.time_limit_s = 1e-9;
  const auto out = gci::run_sgm(view, cfg);
  CHECK(out.status == SgmStatus::TimeLimit);
  REQUIRE(out.profile.size() == 2);
  for (int p = 0; p < 2; ++p) {
    REQUIRE(out.profile[p].support.size() == 1);
    CHECK(gci::strategy_feasible(inst, p, out.profile[p].support[0]));
  }
  CHECK(gci::certify_equilibrium(inst, out.profile, 0.01) >= 0.0);
}

TEST_CASE("config validation rejects inconsistent tolerances") {
  SgmConfig cfg = coarse_config();
  cfg.delta_gap = cfg.delta;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = coarse_config();
  cfg.delta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = coarse_config();
  cfg.delta_M = -1e-9;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = coarse_config();
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = coarse_config();
  cfg.time_limit_s = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("corridor approximation of an instance") {
  const GciInstance inst = gci::generate_instance(2, 2, CostKind::NCF, 12);

  const auto coarse = gci::approximate_ipg(inst, 0.05);
  const auto fine = gci::approximate_ipg(inst, 0.01);
  REQUIRE(coarse.cost_approx.size() == 2);

  for (int p = 0; p < 2; ++p) {
    const auto spec = gci::cost_spec(inst.cost_kind, inst.players[p].alpha,
                                     inst.security_caps[p], 0.05);
    CHECK(gci::pwl::verify_corridor(coarse.cost_approx[p], spec, 20000) <=
          0.05 * (1.0 + 1e-6));
    CHECK(fine.cost_approx[p].pieces.size() >= coarse.cost_approx[p].pieces.size());
  }

  SUBCASE("the two views differ exactly by the cost substitution") {
    const GameView exact{&inst, {}};
    const GameView approx = coarse.view();
    gci::PureStrategy own;
    own.quantity = {1.0, 2.0};
    own.entry = {1, 1};
    own.security = 0.5 * inst.security_caps[0];
    gci::OpponentAggregates agg;
    agg.quantity_sum = {3.0, 4.0};
    agg.security_sum = 0.5;
    const double diff = gci::expected_payoff(exact, 0, own, agg) -
                        gci::expected_payoff(approx, 0, own, agg);
    const double cost_diff = gci::pwl::eval_pwl(coarse.cost_approx[0], own.security) -
                             gci::cost_h(inst.cost_kind, inst.players[0].alpha, own.security);
    CHECK(diff == doctest::Approx(cost_diff).epsilon(1e-12));
    CHECK(std::abs(diff) <= 0.05 * (1.0 + 1e-6));
  }

  SUBCASE("rejects a non-positive tolerance") {
    CHECK_THROWS_AS(gci::approximate_ipg(inst, 0.0), std::invalid_argument);
  }
}

TEST_CASE("an equilibrium of the approximated game transfers its certificate") {
  const GciInstance inst = gci::generate_instance(2, 2, CostKind::ISR, 21);
  const double delta_pwl = 0.01;
  const auto ag = gci::approximate_ipg(inst, delta_pwl);

  SgmConfig cfg;
  cfg.delta = 0.01;
  cfg.delta_gap = 0.002;
  cfg.delta_M = 0.001;
  const auto out = gci::run_sgm(ag.view(), cfg);
  REQUIRE(out.status == SgmStatus::Solved);
  const double reg = gci::certify_equilibrium(inst, out.profile, cfg.delta_gap);
  CHECK(reg <= cfg.delta + 2.0 * delta_pwl + 1e-8);
}

TEST_CASE("single-stage procedure meets its headline tolerance") {
  const GciInstance inst = gci::generate_instance(2, 2, CostKind::LOG, 6);
  const double delta_f = 1e-3, mu = 0.5;
  const auto res = gci::direct_procedure(inst, delta_f, mu, 300.0);
  REQUIRE(res.stage1.status == SgmStatus::Solved);
  CHECK(!res.stage2.has_value());
  const double gap = gci::default_delta_gap(delta_f, mu);
  CHECK(gci::certify_equilibrium(inst, res.profile, gap) <= delta_f + gap + 1e-9);

  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(gci::direct_procedure(inst, -1.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(gci::direct_procedure(inst, 1e-3, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(gci::direct_procedure(inst, 1e-3, 1.0), std::invalid_argument);
  }
}

TEST_CASE("single-stage procedure solves the shipped sample instance") {
  const GciInstance inst = gci::load_instance(GCI_DATA_DIR "/sample_instance.json");
  const double delta_f = 1e-4, mu = 0.5;
  const auto res = gci::direct_procedure(inst, delta_f, mu, 300.0);
  REQUIRE(res.stage1.status == SgmStatus::Solved);
  const double gap = gci::default_delta_gap(delta_f, mu);
  CHECK(gci::certify_equilibrium(inst, res.profile, gap) <= delta_f + gap + 1e-9);
}

TEST_CASE("two-stage procedure warm starts the fine pass") {
  const GciInstance inst = gci::generate_instance(2, 2, CostKind::ISR, 9);
  const double delta_f = 1e-3, mu = 0.5, delta_0 = 0.05;
  const auto res = gci::two_level_procedure(inst, delta_f, delta_0, mu, 300.0);
  REQUIRE(res.stage1.status == SgmStatus::Solved);
  REQUIRE(res.stage2.has_value());
  REQUIRE(res.stage2->status == SgmStatus::Solved);
  CHECK(res.stage2->iterations <= res.stage1.iterations);

  const double gap = gci::default_delta_gap(delta_f, mu);
  CHECK(gci::certify_equilibrium(inst, res.profile, gap) <= delta_f + gap + 1e-9);

  SUBCASE("a coarse tolerance below the fine corridor is rejected") {
    CHECK_THROWS_AS(gci::two_level_procedure(inst, delta_f, mu * delta_f / 2.0, mu),
                    std::invalid_argument);
    CHECK_THROWS_AS(gci::two_level_procedure(inst, delta_f, delta_0, -0.2),
                    std::invalid_argument);
  }
}

TEST_CASE("certification rejects malformed profiles") {
  const GciInstance inst = gci::generate_instance(2, 1, CostKind::LOG, 2);
  MixedProfile profile(2);
  CHECK_THROWS_AS(gci::certify_equilibrium(inst, profile, 1e-3), std::invalid_argument);

  gci::PureStrategy too_big;
  too_big.quantity = {inst.players[0].q_cap[0] * 2.0};
  too_big.entry = {1};
  too_big.security = 0.0;
  profile[0] = {{too_big}, {1.0}};
  profile[1] = {{too_big}, {1.0}};
  CHECK_THROWS_AS(gci::certify_equilibrium(inst, profile, 1e-3), std::invalid_argument);

  CHECK_THROWS_AS(gci::certify_equilibrium(inst, MixedProfile(1), 1e-3),
                  std::invalid_argument);
}
