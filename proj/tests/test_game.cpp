#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "gci/game.hpp"
#include "json.hpp"

using gci::CostKind;
using gci::GciInstance;
using gci::MixedProfile;
using gci::PureStrategy;

namespace {

// Two symmetric players, one market; every number easy to recompute by hand.
GciInstance tiny_instance(double damage = 4.0) {
  GciInstance inst;
  inst.cost_kind = CostKind::ISR;
  inst.markets = {{10.0, 1.0, 0.5}};
  gci::PlayerParams pl;
  pl.c_prod = 1.0;
  pl.c_setup = {1.0};
  pl.c_lin = {0.5};
  pl.c_quad = {0.25};
  pl.alpha = 1.0;
  pl.damage = damage;
  pl.budget = 1.0;
  pl.q_cap = {5.0};
  inst.players = {pl, pl};
  inst.security_caps = {0.75, 0.75};  // 1 - (1/(1+1))^2
  inst.validate();
  return inst;
}

PureStrategy strat(std::vector<double> q, std::vector<std::uint8_t> entry, double s) {
  PureStrategy st;
  st.quantity = std::move(q);
  st.entry = std::move(entry);
  st.security = s;
  return st;
}

double grid_residual(double value, double lo, double denom) {
  const double k = (value - lo) * denom;
  return std::abs(k - std::round(k));
}

}  // namespace

TEST_CASE("security cost closed-form values") {
  CHECK(gci::cost_h(CostKind::ISR, 1.0, 0.75) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(gci::cost_h(CostKind::LOG, 2.0, 1.0 - std::exp(-1.0)) ==
        doctest::Approx(2.0).epsilon(1e-14));
  CHECK(gci::cost_h(CostKind::NCF, 2.0, 0.0) == 0.0);
  CHECK(gci::cost_h(CostKind::ISR, 3.0, 0.0) == 0.0);
  CHECK(gci::cost_h(CostKind::LOG, 3.0, 0.0) == 0.0);

  const double sig10 = 1.0 / (1.0 + std::exp(-10.0));
  CHECK(gci::cost_h(CostKind::NCF, 1.0, 0.5) ==
        doctest::Approx(std::sqrt(2.0) + 2.0 * sig10 - 2.0).epsilon(1e-14));

  CHECK_THROWS_AS(gci::cost_h(CostKind::ISR, 1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(gci::cost_h(CostKind::LOG, 1.0, -0.1), std::domain_error);
}

TEST_CASE("cost derivatives match central differences") {
  const double h = 1e-6;
  for (CostKind kind : {CostKind::ISR, CostKind::LOG, CostKind::NCF}) {
    for (double alpha : {0.5, 3.0}) {
      for (double s : {0.1, 0.42, 0.8}) {
        const double fd =
            (gci::cost_h(kind, alpha, s + h) - gci::cost_h(kind, alpha, s - h)) / (2.0 * h);
        CHECK(gci::cost_h_derivative(kind, alpha, s) == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("security caps invert the budget") {
  CHECK(gci::security_cap(CostKind::ISR, 2.0, 3.0) == doctest::Approx(0.84).epsilon(1e-14));
  CHECK(gci::security_cap(CostKind::LOG, 2.0, 3.0) ==
        doctest::Approx(1.0 - std::exp(-1.5)).epsilon(1e-14));

  for (double alpha : {1.0, 4.0}) {
    for (double budget : {0.5, 2.0, 5.0}) {
      const double cap = gci::security_cap(CostKind::NCF, alpha, budget);
      CHECK(cap > 0.0);
      CHECK(cap < 1.0);
      CHECK(std::abs(gci::cost_h(CostKind::NCF, alpha, cap) - budget) <= 1e-10);
    }
  }

  CHECK_THROWS_AS(gci::security_cap(CostKind::ISR, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(gci::security_cap(CostKind::LOG, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("curvature breaks: none for convex kinds, two sign changes for the blend") {
  CHECK(gci::cost_curvature_breaks(CostKind::ISR, 2.0, 0.9).empty());
  CHECK(gci::cost_curvature_breaks(CostKind::LOG, 2.0, 0.9).empty());

  const double alpha = 3.0;
  const auto breaks = gci::cost_curvature_breaks(CostKind::NCF, alpha, 0.9);
  REQUIRE(breaks.size() == 2);
  CHECK(breaks[0] > 0.0);
  CHECK(breaks[0] < breaks[1]);
  CHECK(breaks[1] < 0.9);

  // The derivative should be locally concave between the breaks and convex
  // outside: check the slope of h' flips around each break.
  auto dslope = [&](double s, double w) {
    return (gci::cost_h_derivative(CostKind::NCF, alpha, s + w) -
            gci::cost_h_derivative(CostKind::NCF, alpha, s - w)) / (2.0 * w);
  };
  const double b0 = breaks[0], b1 = breaks[1];
  const double w0 = b0 * 0.5;
  CHECK(dslope(b0 - 0.5 * b0, w0 * 0.4) > dslope(b0 + 0.5 * (b1 - b0), 0.01));
  CHECK(dslope(b1 + 0.5 * (0.9 - b1), 0.01) > dslope(b1 - 0.25 * (b1 - b0), 0.01));
}

TEST_CASE("pure payoff matches a hand computation") {
  const GciInstance inst = tiny_instance();
  const std::vector<PureStrategy> prof = {strat({2.0}, {1}, 0.5), strat({1.0}, {1}, 0.75)};

  const double s_avg = 0.625;
  const double price = 10.0 + 0.5 * s_avg - 1.0 * 3.0;
  const double expected0 = price * 2.0 - 1.0 * 2.0 - 1.0 - (0.25 * 4.0 + 0.5 * 2.0) -
                           (1.0 - 0.5) * (1.0 - s_avg) * 4.0 - (1.0 / std::sqrt(0.5) - 1.0);
  CHECK(gci::payoff(inst, 0, prof) == doctest::Approx(expected0).epsilon(1e-14));

  const double expected1 = price * 1.0 - 1.0 - 1.0 - (0.25 + 0.5) -
                           (1.0 - 0.75) * (1.0 - s_avg) * 4.0 - 1.0;
  CHECK(gci::payoff(inst, 1, prof) == doctest::Approx(expected1).epsilon(1e-14));

  SUBCASE("symmetric strategies earn the same") {
    const std::vector<PureStrategy> same = {strat({2.0}, {1}, 0.5), strat({2.0}, {1}, 0.5)};
    CHECK(gci::payoff(inst, 0, same) == doctest::Approx(gci::payoff(inst, 1, same)));
  }

  SUBCASE("staying out of the market avoids the setup fee") {
    const std::vector<PureStrategy> out = {strat({0.0}, {0}, 0.5), strat({1.0}, {1}, 0.75)};
    const double s2 = 0.625;
    const double expect = -(1.0 - 0.5) * (1.0 - s2) * 4.0 - (1.0 / std::sqrt(0.5) - 1.0);
    CHECK(gci::payoff(inst, 0, out) == doctest::Approx(expect).epsilon(1e-14));
  }

  SUBCASE("infeasible strategies are rejected") {
    CHECK_THROWS_AS(gci::payoff(inst, 0, {strat({6.0}, {1}, 0.5), prof[1]}),
                    std::invalid_argument);
    CHECK_THROWS_AS(gci::payoff(inst, 0, {strat({1.0}, {0}, 0.5), prof[1]}),
                    std::invalid_argument);
    CHECK_THROWS_AS(gci::payoff(inst, 0, {strat({1.0}, {1}, 0.9), prof[1]}),
                    std::invalid_argument);
  }
}

TEST_CASE("doubling the damage shifts the payoff by the exposure term") {
  const GciInstance base = tiny_instance(4.0);
  const GciInstance doubled = tiny_instance(8.0);
  const std::vector<PureStrategy> prof = {strat({2.0}, {1}, 0.3), strat({1.5}, {1}, 0.6)};
  const double s_avg = (0.3 + 0.6) / 2.0;
  const double diff = gci::payoff(base, 0, prof) - gci::payoff(doubled, 0, prof);
  CHECK(diff == doctest::Approx((1.0 - 0.3) * (1.0 - s_avg) * 4.0).epsilon(1e-12));
}

TEST_CASE("expected payoff: degenerate mixtures reduce to the pure payoff") {
  const GciInstance inst = tiny_instance();
  const PureStrategy own = strat({2.0}, {1}, 0.5);
  const PureStrategy other = strat({1.0}, {1}, 0.75);
  MixedProfile profile(2);
  profile[0] = {{own}, {1.0}};
  profile[1] = {{other}, {1.0}};
  CHECK(gci::expected_payoff(inst, 0, own, profile) ==
        doctest::Approx(gci::payoff(inst, 0, {own, other})).epsilon(1e-14));
}

TEST_CASE("expected payoff equals full product enumeration") {
  const GciInstance inst = gci::generate_instance(3, 2, CostKind::LOG, 99);
  const int m = 3;

  // Modest mixed profile: three strategies for each opponent.
  MixedProfile profile(m);
  for (int p = 0; p < m; ++p) {
    const double cap0 = inst.players[p].q_cap[0];
    const double cap1 = inst.players[p].q_cap[1];
    const double sc = inst.security_caps[p];
    profile[p].support = {strat({cap0 * 0.5, cap1 * 0.25}, {1, 1}, sc * 0.5),
                          strat({0.0, cap1 * 0.75}, {0, 1}, sc * 0.9),
                          strat({cap0 * 0.1, 0.0}, {1, 0}, 0.0)};
    profile[p].probs = {0.5, 0.3, 0.2};
  }
  for (int p = 0; p < m; ++p) {
    const PureStrategy own = strat({inst.players[p].q_cap[0] * 0.4, inst.players[p].q_cap[1] * 0.6},
                                   {1, 1}, inst.security_caps[p] * 0.25);
    double brute = 0.0;
    for (std::size_t k1 = 0; k1 < 3; ++k1) {
      for (std::size_t k2 = 0; k2 < 3; ++k2) {
        std::vector<PureStrategy> pure(m);
        double prob = 1.0;
        std::size_t pick[2] = {k1, k2};
        int slot = 0;
        for (int i = 0; i < m; ++i) {
          if (i == p) {
            pure[i] = own;
          } else {
            pure[i] = profile[i].support[pick[slot]];
            prob *= profile[i].probs[pick[slot]];
            ++slot;
          }
        }
        brute += prob * gci::payoff(inst, p, pure);
      }
    }
    CHECK(gci::expected_payoff(inst, p, own, profile) ==
          doctest::Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("generator is deterministic and seed-sensitive") {
  const GciInstance a = gci::generate_instance(3, 2, CostKind::NCF, 42);
  const GciInstance b = gci::generate_instance(3, 2, CostKind::NCF, 42);
  CHECK(gci::instance_to_json(a).dump() == gci::instance_to_json(b).dump());

  const GciInstance c = gci::generate_instance(3, 2, CostKind::NCF, 43);
  CHECK(gci::instance_to_json(a).dump() != gci::instance_to_json(c).dump());
}

TEST_CASE("generator draws live on their grids and fill their ranges") {
  double q_lo = 1e30, q_hi = -1e30;
  double slope_lo = 1e30, slope_hi = -1e30;
  double r_lo = 1e30, r_hi = -1e30;
  double budget_lo = 1e30, budget_hi = -1e30;
  double quad_lo = 1e30, quad_hi = -1e30;

  for (std::uint64_t seed = 0; seed < 2500; ++seed) {
    const GciInstance inst = gci::generate_instance(2, 2, CostKind::LOG, seed);
    for (const gci::MarketParams& mk : inst.markets) {
      CHECK(grid_residual(mk.q, 100.0, 1.0) <= 1e-9);
      CHECK(grid_residual(mk.m_slope, 0.5, 100.0) <= 1e-9);
      CHECK(grid_residual(mk.r, 0.1, 100.0) <= 1e-9);
      CHECK(mk.q >= 100.0); CHECK(mk.q <= 200.0);
      CHECK(mk.m_slope >= 0.5); CHECK(mk.m_slope <= 2.0);
      CHECK(mk.r >= 0.1); CHECK(mk.r <= 0.5);
      q_lo = std::min(q_lo, mk.q); q_hi = std::max(q_hi, mk.q);
      slope_lo = std::min(slope_lo, mk.m_slope); slope_hi = std::max(slope_hi, mk.m_slope);
      r_lo = std::min(r_lo, mk.r); r_hi = std::max(r_hi, mk.r);
    }
    for (const gci::PlayerParams& pl : inst.players) {
      CHECK(grid_residual(pl.c_prod, 1.0, 1.0) <= 1e-9);
      CHECK(pl.c_prod >= 1.0); CHECK(pl.c_prod <= 10.0);
      CHECK(grid_residual(pl.alpha, 1.0, 1.0) <= 1e-9);
      CHECK(pl.alpha >= 1.0); CHECK(pl.alpha <= 10.0);
      CHECK(grid_residual(pl.damage, 50.0, 1.0) <= 1e-9);
      CHECK(pl.damage >= 50.0); CHECK(pl.damage <= 100.0);
      CHECK(grid_residual(pl.budget, 0.5, 2.0) <= 1e-9);
      CHECK(pl.budget >= 0.5); CHECK(pl.budget <= 5.0);
      budget_lo = std::min(budget_lo, pl.budget);
      budget_hi = std::max(budget_hi, pl.budget);
      for (int j = 0; j < 2; ++j) {
        CHECK(grid_residual(pl.c_setup[j], 500.0, 1.0) <= 1e-9);
        CHECK(pl.c_setup[j] >= 500.0); CHECK(pl.c_setup[j] <= 2000.0);
        CHECK(grid_residual(pl.c_lin[j], 1.0, 100.0) <= 1e-9);
        CHECK(pl.c_lin[j] >= 1.0); CHECK(pl.c_lin[j] <= 4.0);
        CHECK(grid_residual(pl.c_quad[j], 0.25, 100.0) <= 1e-9);
        CHECK(pl.c_quad[j] >= 0.25); CHECK(pl.c_quad[j] <= 1.0);
        quad_lo = std::min(quad_lo, pl.c_quad[j]);
        quad_hi = std::max(quad_hi, pl.c_quad[j]);
        CHECK(grid_residual(pl.q_cap[j], 50.0, 1.0) <= 1e-9);
        CHECK(pl.q_cap[j] >= 50.0); CHECK(pl.q_cap[j] <= 200.0);
      }
    }
    CHECK(inst.security_caps.size() == 2);
    for (double cap : inst.security_caps) {
      CHECK(cap > 0.0);
      CHECK(cap < 1.0);
    }
  }

  // With 5000+ draws per marginal, covering far less than the full range
  // would mean the draw is not uniform over its grid.
  CHECK(q_hi - q_lo >= 0.9 * 100.0);
  CHECK(slope_hi - slope_lo >= 0.9 * 1.5);
  CHECK(r_hi - r_lo >= 0.9 * 0.4);
  CHECK(budget_hi - budget_lo >= 0.9 * 4.5);
  CHECK(quad_hi - quad_lo >= 0.9 * 0.75);
}

TEST_CASE("instances survive a save/load round trip; tampering is caught") {
  const GciInstance inst = gci::generate_instance(2, 2, CostKind::NCF, 7);
  const auto dir = std::filesystem::temp_directory_path();
  const std::string path = (dir / "gci_test_roundtrip.json").string();

  gci::save_instance(inst, path);
  const GciInstance back = gci::load_instance(path);
  CHECK(gci::instance_to_json(inst).dump() == gci::instance_to_json(back).dump());
  CHECK(back.has_seed);
  CHECK(back.seed == 7);

  nlohmann::json j = gci::instance_to_json(inst);
  j["players"][0]["budget"] = inst.players[0].budget * 1.5;
  const std::string bad = (dir / "gci_test_tampered.json").string();
  std::ofstream(bad) << j.dump(2);
  CHECK_THROWS_AS(gci::load_instance(bad), std::invalid_argument);

  std::remove(path.c_str());
  std::remove(bad.c_str());
}

TEST_CASE("shipped sample instance loads and matches its metadata") {
  const GciInstance inst = gci::load_instance(GCI_DATA_DIR "/sample_instance.json");
  CHECK(inst.num_players() == 2);
  CHECK(inst.num_markets() == 2);
  CHECK(inst.cost_kind == CostKind::LOG);
  REQUIRE(inst.has_seed);
  CHECK(inst.seed == 7);
  const GciInstance regen = gci::generate_instance(2, 2, CostKind::LOG, 7);
  CHECK(gci::instance_to_json(inst).dump() == gci::instance_to_json(regen).dump());
}
