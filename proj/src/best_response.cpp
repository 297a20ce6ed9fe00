#include "gci/best_response.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gci {
namespace {

// Per-market coefficients of the reply problem at fixed opponents: the market
// value at security s is max_Q (a0 + ra*s) Q - d Q^2 on [0, qcap], minus the
// setup charge when entered.
struct MarketTerms {
  std::vector<double> a0, ra, d, inv2d, setup, qcap;
  double dmg_c0 = 0.0, dmg_c1 = 0.0, dmg_c2 = 0.0;  // damage as a quadratic in s
};

MarketTerms make_terms(const GciInstance& inst, int p, const OpponentAggregates& agg) {
  const int m = inst.num_players();
  const std::size_t n = inst.markets.size();
  if (agg.quantity_sum.size() != n)
    throw std::invalid_argument("best_response: aggregate needs one quantity sum per market");

  MarketTerms t;
  t.a0.resize(n);
  t.ra.resize(n);
  t.d.resize(n);
  t.inv2d.resize(n);
  t.setup.resize(n);
  t.qcap.resize(n);
  const PlayerParams& pl = inst.players[p];
  for (std::size_t j = 0; j < n; ++j) {
    const MarketParams& mk = inst.markets[j];
    t.ra[j] = mk.r / double(m);
    t.a0[j] = mk.q + t.ra[j] * agg.security_sum - mk.m_slope * agg.quantity_sum[j] -
              pl.c_prod - pl.c_lin[j];
    t.d[j] = mk.m_slope + pl.c_quad[j];
    t.inv2d[j] = 1.0 / (2.0 * t.d[j]);
    t.setup[j] = pl.c_setup[j];
    t.qcap[j] = pl.q_cap[j];
  }

  // (1 - s)(1 - (s + S)/m) D  =  c0 + c1 s + c2 s^2
  const double A = 1.0 - agg.security_sum / double(m);
  t.dmg_c0 = pl.damage * A;
  t.dmg_c1 = -pl.damage * (A + 1.0 / double(m));
  t.dmg_c2 = pl.damage / double(m);
  return t;
}

inline double quantity_value(const MarketTerms& t, double s) {
  double total = 0.0;
  const std::size_t n = t.a0.size();
  for (std::size_t j = 0; j < n; ++j) {
    const double a = t.a0[j] + t.ra[j] * s;
    double q = a * t.inv2d[j];
    q = std::min(std::max(q, 0.0), t.qcap[j]);
    const double v = (a - t.d[j] * q) * q - t.setup[j];
    if (v > 0.0) total += v;
  }
  return total;
}

inline double damage_at(const MarketTerms& t, double s) {
  return t.dmg_c0 + s * (t.dmg_c1 + s * t.dmg_c2);
}

// Evaluates the fitted cost along a nondecreasing sweep of s without a search.
struct PwlWalk {
  const std::vector<pwl::AffinePiece>* pieces;
  std::size_t idx = 0;
  double operator()(double s) {
    while (s >= (*pieces)[idx].hi && idx + 1 < pieces->size()) ++idx;
    const pwl::AffinePiece& p = (*pieces)[idx];
    return p.slope * s + p.intercept;
  }
};

template <class CostFn>
std::pair<double, double> scan_grid(const MarketTerms& t, double cap, long long steps,
                                    CostFn&& cost) {
  double best_s = 0.0;
  double best_v = -std::numeric_limits<double>::infinity();
  const double spacing = cap / double(steps);
  for (long long k = 0; k <= steps; ++k) {
    const double s = std::min(double(k) * spacing, cap);
    const double v = quantity_value(t, s) - damage_at(t, s) - cost(s);
    if (v > best_v) {
      best_v = v;
      best_s = s;
    }
  }
  return {best_s, best_v};
}

}  // namespace

double GameView::cost(int p, double s) const {
  if (approximated()) return pwl::eval_pwl(cost_approx[p], s);
  return cost_h(instance->cost_kind, instance->players[p].alpha, s);
}

OpponentAggregates aggregate_opponents(const GciInstance& inst, const MixedProfile& profile,
                                       int p) {
  const int m = inst.num_players();
  if (int(profile.size()) != m)
    throw std::invalid_argument("aggregate_opponents: one mixed strategy per player");
  if (p < 0 || p >= m) throw std::invalid_argument("aggregate_opponents: player out of range");

  OpponentAggregates agg;
  agg.quantity_sum.assign(inst.markets.size(), 0.0);
  for (int i = 0; i < m; ++i) {
    if (i == p) continue;
    const MixedStrategy& mix = profile[i];
    if (mix.support.empty() || mix.support.size() != mix.probs.size())
      throw std::invalid_argument("aggregate_opponents: malformed mixed strategy");
    double total = 0.0;
    for (std::size_t k = 0; k < mix.support.size(); ++k) {
      total += mix.probs[k];
      for (std::size_t j = 0; j < agg.quantity_sum.size(); ++j)
        agg.quantity_sum[j] += mix.probs[k] * mix.support[k].quantity[j];
      agg.security_sum += mix.probs[k] * mix.support[k].security;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("aggregate_opponents: probabilities must sum to one");
  }
  return agg;
}

QuantityChoice optimal_quantities_for_s(const GciInstance& inst, int p,
                                        const OpponentAggregates& agg, double s) {
  const MarketTerms t = make_terms(inst, p, agg);
  const std::size_t n = t.a0.size();
  QuantityChoice out;
  out.quantity.assign(n, 0.0);
  out.entry.assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = t.a0[j] + t.ra[j] * s;
    double q = a * t.inv2d[j];
    q = std::min(std::max(q, 0.0), t.qcap[j]);
    const double v = (a - t.d[j] * q) * q - t.setup[j];
    if (v > 0.0) {
      out.quantity[j] = q;
      out.entry[j] = 1;
      out.value += v;
    }
  }
  return out;
}

double phi(const GameView& view, int p, const OpponentAggregates& agg, double s) {
  const MarketTerms t = make_terms(*view.instance, p, agg);
  return quantity_value(t, s) - damage_at(t, s) - view.cost(p, s);
}

double lipschitz_bound(const GameView& view, int p) {
  const GciInstance& inst = *view.instance;
  const int m = inst.num_players();
  const PlayerParams& pl = inst.players[p];

  double base = 0.0;
  for (std::size_t j = 0; j < inst.markets.size(); ++j)
    base += inst.markets[j].r / double(m) * pl.q_cap[j];
  base += pl.damage * (2.0 / double(m) + 1.0);

  double cost_slope = 0.0;
  if (view.approximated()) {
    cost_slope = view.cost_approx[p].max_abs_slope();
  } else {
    const double cap = inst.security_caps[p];
    cost_slope = std::max(cost_h_derivative(inst.cost_kind, pl.alpha, 0.0),
                          cost_h_derivative(inst.cost_kind, pl.alpha, cap));
    for (double b : cost_curvature_breaks(inst.cost_kind, pl.alpha, cap))
      cost_slope = std::max(cost_slope, cost_h_derivative(inst.cost_kind, pl.alpha, b));
  }
  return base + cost_slope;
}

BestResponseResult best_response_to_aggregates(const GameView& view, int p,
                                               const OpponentAggregates& agg,
                                               double delta_gap) {
  if (!(delta_gap > 0.0))
    throw std::invalid_argument("best_response: delta_gap must be positive");
  const GciInstance& inst = *view.instance;
  if (p < 0 || p >= inst.num_players())
    throw std::invalid_argument("best_response: player out of range");

  const MarketTerms t = make_terms(inst, p, agg);
  const double cap = inst.security_caps[p];
  const double L = std::max(lipschitz_bound(view, p), 1e-12);
  const double spacing_target = delta_gap / (2.0 * L);
  const long long steps = std::max<long long>(1, (long long)std::ceil(cap / spacing_target));

  std::pair<double, double> incumbent;
  if (view.approximated()) {
    PwlWalk walk{&view.cost_approx[p].pieces};
    incumbent = scan_grid(t, cap, steps, walk);
  } else {
    const CostKind kind = inst.cost_kind;
    const double alpha = inst.players[p].alpha;
    switch (kind) {
      case CostKind::ISR:
        incumbent = scan_grid(t, cap, steps, [alpha](double s) {
          return alpha * (1.0 / std::sqrt(1.0 - s) - 1.0);
        });
        break;
      case CostKind::LOG:
        incumbent = scan_grid(t, cap, steps,
                              [alpha](double s) { return -alpha * std::log(1.0 - s); });
        break;
      case CostKind::NCF:
        incumbent = scan_grid(t, cap, steps, [alpha](double s) {
          return alpha *
                 ((1.0 / std::sqrt(1.0 - s) + 2.0 / (1.0 + std::exp(-20.0 * s))) - 2.0);
        });
        break;
    }
  }

  // Local polish around the grid winner; can only raise the value.
  auto value_at = [&](double s) { return quantity_value(t, s) - damage_at(t, s) - view.cost(p, s); };
  const double spacing = cap / double(steps);
  double lo = std::max(0.0, incumbent.first - spacing);
  double hi = std::min(cap, incumbent.first + spacing);
  constexpr double kGolden = 0.6180339887498949;
  double x1 = hi - kGolden * (hi - lo);
  double x2 = lo + kGolden * (hi - lo);
  double f1 = value_at(x1);
  double f2 = value_at(x2);
  double best_s = incumbent.first;
  double best_v = incumbent.second;
  for (int it = 0; it < 120 && hi - lo > 1e-15; ++it) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = value_at(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = value_at(x2);
    }
    const double xm = f1 >= f2 ? x1 : x2;
    const double fm = std::max(f1, f2);
    if (fm > best_v) {
      best_v = fm;
      best_s = xm;
    }
  }

  QuantityChoice choice = optimal_quantities_for_s(inst, p, agg, best_s);
  BestResponseResult out;
  out.strategy.quantity = std::move(choice.quantity);
  out.strategy.entry = std::move(choice.entry);
  out.strategy.security = best_s;
  out.value = best_v;
  out.gap = delta_gap;
  return out;
}

BestResponseResult best_response(const GameView& view, int p, const MixedProfile& profile,
                                 double delta_gap) {
  return best_response_to_aggregates(view, p, aggregate_opponents(*view.instance, profile, p),
                                     delta_gap);
}

double expected_payoff(const GameView& view, int p, const PureStrategy& own,
                       const OpponentAggregates& agg) {
  return payoff_before_cost(*view.instance, p, own, agg.quantity_sum, agg.security_sum) -
         view.cost(p, own.security);
}

double expected_payoff(const GameView& view, int p, const MixedStrategy& own,
                       const OpponentAggregates& agg) {
  if (own.support.empty() || own.support.size() != own.probs.size())
    throw std::invalid_argument("expected_payoff: malformed mixed strategy");
  double total = 0.0;
  for (std::size_t k = 0; k < own.support.size(); ++k)
    total += own.probs[k] * expected_payoff(view, p, own.support[k], agg);
  return total;
}

double regret(const GameView& view, const MixedProfile& profile, int p, double delta_gap) {
  const OpponentAggregates agg = aggregate_opponents(*view.instance, profile, p);
  const BestResponseResult br = best_response_to_aggregates(view, p, agg, delta_gap);
  return br.value - expected_payoff(view, p, profile[p], agg);
}

}  // namespace gci
