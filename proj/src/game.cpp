#include "gci/game.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gci {
namespace {

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

void check_s_domain(double s) {
  if (!(s >= 0.0) || !(s < 1.0)) {
    std::ostringstream msg;
    msg << "cost_h: security level s=" << s << " outside [0, 1)";
    throw std::domain_error(msg.str());
  }
}

// Central second difference of the cost, with the probe width shrunk near
// s = 1 where the curve blows up. The formulas extend smoothly below 0, so
// probes may step left of the domain.
double cost_second_difference(CostKind kind, double alpha, double x, double* width) {
  const double h = std::min(1e-3, 0.25 * (1.0 - x));
  *width = h;
  auto at = [&](double s) {
    switch (kind) {
      case CostKind::ISR:
        return alpha * (1.0 / std::sqrt(1.0 - s) - 1.0);
      case CostKind::LOG:
        return -alpha * std::log(1.0 - s);
      case CostKind::NCF:
        return alpha * ((1.0 / std::sqrt(1.0 - s) + 2.0 * sigmoid(20.0 * s)) - 2.0);
    }
    return 0.0;
  };
  return at(x - h) - 2.0 * at(x) + at(x + h);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform draw from {lo_num/denom, (lo_num+1)/denom, ..., hi_num/denom}.
double draw_grid(std::mt19937_64& gen, long lo_num, long hi_num, double denom) {
  const std::uint64_t span = std::uint64_t(hi_num - lo_num + 1);
  const long k = lo_num + long(gen() % span);
  return double(k) / denom;
}

}  // namespace

const char* to_string(CostKind kind) {
  switch (kind) {
    case CostKind::ISR: return "isr";
    case CostKind::LOG: return "log";
    case CostKind::NCF: return "ncf";
  }
  return "?";
}

CostKind cost_kind_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "isr") return CostKind::ISR;
  if (s == "log") return CostKind::LOG;
  if (s == "ncf") return CostKind::NCF;
  throw std::invalid_argument("unknown cost kind: " + name);
}

double cost_h(CostKind kind, double alpha, double s) {
  check_s_domain(s);
  switch (kind) {
    case CostKind::ISR:
      return alpha * (1.0 / std::sqrt(1.0 - s) - 1.0);
    case CostKind::LOG:
      return -alpha * std::log(1.0 - s);
    case CostKind::NCF:
      return alpha * ((1.0 / std::sqrt(1.0 - s) + 2.0 * sigmoid(20.0 * s)) - 2.0);
  }
  throw std::logic_error("cost_h: bad kind");
}

double cost_h_derivative(CostKind kind, double alpha, double s) {
  check_s_domain(s);
  switch (kind) {
    case CostKind::ISR:
      return alpha * 0.5 * std::pow(1.0 - s, -1.5);
    case CostKind::LOG:
      return alpha / (1.0 - s);
    case CostKind::NCF: {
      const double sig = sigmoid(20.0 * s);
      return alpha * (0.5 * std::pow(1.0 - s, -1.5) + 40.0 * sig * (1.0 - sig));
    }
  }
  throw std::logic_error("cost_h_derivative: bad kind");
}

double security_cap(CostKind kind, double alpha, double budget) {
  if (!(alpha > 0.0)) throw std::invalid_argument("security_cap: alpha must be positive");
  if (!(budget > 0.0)) throw std::invalid_argument("security_cap: budget must be positive");
  switch (kind) {
    case CostKind::ISR: {
      const double t = alpha / (alpha + budget);
      return 1.0 - t * t;
    }
    case CostKind::LOG:
      return 1.0 - std::exp(-budget / alpha);
    case CostKind::NCF: {
      double lo = 0.0;
      double hi = 1.0 - 1e-12;
      if (cost_h(kind, alpha, hi) <= budget) return hi;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (cost_h(kind, alpha, mid) <= budget)
          lo = mid;
        else
          hi = mid;
      }
      return lo;
    }
  }
  throw std::logic_error("security_cap: bad kind");
}

std::vector<double> cost_curvature_breaks(CostKind kind, double alpha, double hi) {
  if (kind != CostKind::NCF) return {};
  if (!(hi > 0.0)) return {};

  // Scan the sign of a central second difference, then bisect each change.
  const double step = 1e-4;
  std::vector<double> breaks;
  double w = 0.0;
  double prev_x = 0.0;
  double prev_d2 = cost_second_difference(kind, alpha, 0.0, &w);
  for (double x = step; x < hi + step; x += step) {
    const double xc = std::min(x, hi);
    const double d2 = cost_second_difference(kind, alpha, xc, &w);
    if (prev_d2 != 0.0 && d2 != 0.0 && (prev_d2 > 0.0) != (d2 > 0.0)) {
      double lo = prev_x;
      double hi2 = xc;
      double flo = prev_d2;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi2);
        if (mid <= lo || mid >= hi2) break;
        const double fm = cost_second_difference(kind, alpha, mid, &w);
        if (fm == 0.0) {
          lo = hi2 = mid;
          break;
        }
        if ((fm > 0.0) == (flo > 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi2 = mid;
        }
      }
      const double root = 0.5 * (lo + hi2);
      if (root > 0.0 && root < hi && (breaks.empty() || root - breaks.back() > 1e-6))
        breaks.push_back(root);
    }
    prev_x = xc;
    prev_d2 = d2;
    if (xc >= hi) break;
  }
  return breaks;
}

pwl::UnivariateSpec cost_spec(CostKind kind, double alpha, double s_cap, double delta) {
  if (!(alpha > 0.0)) throw std::invalid_argument("cost_spec: alpha must be positive");
  if (!(s_cap > 0.0) || !(s_cap < 1.0))
    throw std::invalid_argument("cost_spec: s_cap must lie in (0, 1)");
  pwl::UnivariateSpec spec;
  spec.value = [kind, alpha](double s) { return cost_h(kind, alpha, s); };
  spec.derivative = [kind, alpha](double s) { return cost_h_derivative(kind, alpha, s); };
  spec.lo = 0.0;
  spec.hi = s_cap;
  spec.curvature_breaks = cost_curvature_breaks(kind, alpha, s_cap);
  spec.tolerance = delta;
  return spec;
}

void GciInstance::validate() const {
  if (num_players() < 2) throw std::invalid_argument("instance: need at least two players");
  if (num_markets() < 1) throw std::invalid_argument("instance: need at least one market");
  for (const MarketParams& mk : markets) {
    if (!(mk.q > 0.0) || !(mk.m_slope > 0.0) || !(mk.r > 0.0))
      throw std::invalid_argument("instance: market parameters must be positive");
  }
  if (int(security_caps.size()) != num_players())
    throw std::invalid_argument("instance: one security cap per player is required");
  const std::size_t n = markets.size();
  for (int p = 0; p < num_players(); ++p) {
    const PlayerParams& pl = players[p];
    if (pl.c_setup.size() != n || pl.c_lin.size() != n || pl.c_quad.size() != n ||
        pl.q_cap.size() != n)
      throw std::invalid_argument("instance: per-market vectors must have one entry per market");
    if (!(pl.c_prod >= 0.0) || !(pl.alpha > 0.0) || !(pl.damage >= 0.0) || !(pl.budget > 0.0))
      throw std::invalid_argument("instance: player scalars out of range");
    for (std::size_t j = 0; j < n; ++j) {
      if (!(pl.c_setup[j] >= 0.0) || !(pl.c_lin[j] >= 0.0) || !(pl.c_quad[j] > 0.0) ||
          !(pl.q_cap[j] > 0.0))
        throw std::invalid_argument("instance: per-market costs out of range");
    }
    const double cap = security_caps[p];
    if (!(cap > 0.0) || !(cap < 1.0))
      throw std::invalid_argument("instance: security caps must lie in (0, 1)");
    const double resid = std::abs(cost_h(cost_kind, pl.alpha, cap) - pl.budget);
    if (!(resid <= 1e-10))
      throw std::invalid_argument("instance: security cap does not meet the budget");
  }
}

bool strategy_feasible(const GciInstance& inst, int p, const PureStrategy& strat, double tol) {
  if (p < 0 || p >= inst.num_players()) return false;
  const std::size_t n = inst.markets.size();
  if (strat.quantity.size() != n || strat.entry.size() != n) return false;
  for (std::size_t j = 0; j < n; ++j) {
    if (strat.entry[j] > 1) return false;
    const double q = strat.quantity[j];
    if (!(q >= -tol)) return false;
    const double cap = strat.entry[j] ? inst.players[p].q_cap[j] : 0.0;
    if (!(q <= cap + tol)) return false;
  }
  return strat.security >= -tol && strat.security <= inst.security_caps[p] + tol;
}

double payoff_before_cost(const GciInstance& inst, int p, const PureStrategy& own,
                          const std::vector<double>& opp_quantity_sum,
                          double opp_security_sum) {
  const int m = inst.num_players();
  const std::size_t n = inst.markets.size();
  if (opp_quantity_sum.size() != n)
    throw std::invalid_argument("payoff_before_cost: one opponent quantity sum per market");

  const double s_avg = (own.security + opp_security_sum) / double(m);
  const PlayerParams& pl = inst.players[p];

  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double qj = own.quantity[j];
    const double price = inst.markets[j].q + inst.markets[j].r * s_avg -
                         inst.markets[j].m_slope * (qj + opp_quantity_sum[j]);
    total += price * qj;
    total -= pl.c_prod * qj;
    total -= pl.c_setup[j] * (own.entry[j] ? 1.0 : 0.0);
    total -= pl.c_quad[j] * qj * qj + pl.c_lin[j] * qj;
  }
  total -= (1.0 - own.security) * (1.0 - s_avg) * pl.damage;
  return total;
}

double payoff(const GciInstance& inst, int p, const std::vector<PureStrategy>& profile) {
  const int m = inst.num_players();
  if (int(profile.size()) != m) throw std::invalid_argument("payoff: one strategy per player");
  if (p < 0 || p >= m) throw std::invalid_argument("payoff: player index out of range");
  for (int i = 0; i < m; ++i) {
    if (!strategy_feasible(inst, i, profile[i]))
      throw std::invalid_argument("payoff: infeasible strategy for player " + std::to_string(i));
  }

  std::vector<double> opp_q(inst.markets.size(), 0.0);
  double opp_s = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == p) continue;
    for (std::size_t j = 0; j < opp_q.size(); ++j) opp_q[j] += profile[i].quantity[j];
    opp_s += profile[i].security;
  }
  return payoff_before_cost(inst, p, profile[p], opp_q, opp_s) -
         cost_h(inst.cost_kind, inst.players[p].alpha, profile[p].security);
}

double expected_payoff(const GciInstance& inst, int p, const PureStrategy& own,
                       const MixedProfile& profile) {
  const int m = inst.num_players();
  if (int(profile.size()) != m)
    throw std::invalid_argument("expected_payoff: one mixed strategy per player");
  if (p < 0 || p >= m) throw std::invalid_argument("expected_payoff: player out of range");

  std::vector<double> opp_q(inst.markets.size(), 0.0);
  double opp_s = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == p) continue;
    const MixedStrategy& mix = profile[i];
    if (mix.support.empty() || mix.support.size() != mix.probs.size())
      throw std::invalid_argument("expected_payoff: malformed mixed strategy");
    double total_prob = 0.0;
    for (std::size_t k = 0; k < mix.support.size(); ++k) {
      const double pr = mix.probs[k];
      total_prob += pr;
      for (std::size_t j = 0; j < opp_q.size(); ++j)
        opp_q[j] += pr * mix.support[k].quantity[j];
      opp_s += pr * mix.support[k].security;
    }
    if (std::abs(total_prob - 1.0) > 1e-9)
      throw std::invalid_argument("expected_payoff: probabilities must sum to one");
  }
  return payoff_before_cost(inst, p, own, opp_q, opp_s) -
         cost_h(inst.cost_kind, inst.players[p].alpha, own.security);
}

GciInstance generate_instance(int num_players, int num_markets, CostKind kind,
                              std::uint64_t seed) {
  if (num_players < 2) throw std::invalid_argument("generate_instance: need at least 2 players");
  if (num_markets < 1) throw std::invalid_argument("generate_instance: need at least 1 market");

  std::mt19937_64 gen(splitmix64(seed));
  GciInstance inst;
  inst.cost_kind = kind;
  inst.seed = seed;
  inst.has_seed = true;

  for (int j = 0; j < num_markets; ++j) {
    MarketParams mk;
    mk.q = draw_grid(gen, 100, 200, 1.0);
    mk.m_slope = draw_grid(gen, 50, 200, 100.0);
    mk.r = draw_grid(gen, 10, 50, 100.0);
    inst.markets.push_back(mk);
  }

  for (int p = 0; p < num_players; ++p) {
    PlayerParams pl;
    pl.c_prod = draw_grid(gen, 1, 10, 1.0);
    for (int j = 0; j < num_markets; ++j) pl.c_setup.push_back(draw_grid(gen, 500, 2000, 1.0));
    for (int j = 0; j < num_markets; ++j) pl.c_lin.push_back(draw_grid(gen, 100, 400, 100.0));
    for (int j = 0; j < num_markets; ++j) pl.c_quad.push_back(draw_grid(gen, 25, 100, 100.0));
    pl.alpha = draw_grid(gen, 1, 10, 1.0);
    pl.damage = draw_grid(gen, 50, 100, 1.0);
    for (int j = 0; j < num_markets; ++j) pl.q_cap.push_back(draw_grid(gen, 50, 200, 1.0));
    pl.budget = draw_grid(gen, 1, 10, 2.0);
    inst.players.push_back(std::move(pl));
  }

  for (int p = 0; p < num_players; ++p)
    inst.security_caps.push_back(security_cap(kind, inst.players[p].alpha, inst.players[p].budget));

  inst.validate();
  return inst;
}

nlohmann::json instance_to_json(const GciInstance& inst) {
  nlohmann::json markets = nlohmann::json::array();
  for (const MarketParams& mk : inst.markets)
    markets.push_back({{"q", mk.q}, {"m_slope", mk.m_slope}, {"r", mk.r}});

  nlohmann::json players = nlohmann::json::array();
  for (const PlayerParams& pl : inst.players) {
    players.push_back({{"c_prod", pl.c_prod},
                       {"c_setup", pl.c_setup},
                       {"c_lin", pl.c_lin},
                       {"c_quad", pl.c_quad},
                       {"alpha", pl.alpha},
                       {"damage", pl.damage},
                       {"budget", pl.budget},
                       {"q_cap", pl.q_cap}});
  }

  nlohmann::json j = {{"m", inst.num_players()},
                      {"n", inst.num_markets()},
                      {"cost_kind", to_string(inst.cost_kind)},
                      {"markets", std::move(markets)},
                      {"players", std::move(players)},
                      {"security_caps", inst.security_caps}};
  if (inst.has_seed) j["seed"] = inst.seed;
  return j;
}

GciInstance instance_from_json(const nlohmann::json& j) {
  GciInstance inst;
  inst.cost_kind = cost_kind_from_string(j.at("cost_kind").get<std::string>());

  for (const auto& mj : j.at("markets")) {
    MarketParams mk;
    mk.q = mj.at("q").get<double>();
    mk.m_slope = mj.at("m_slope").get<double>();
    mk.r = mj.at("r").get<double>();
    inst.markets.push_back(mk);
  }
  for (const auto& pj : j.at("players")) {
    PlayerParams pl;
    pl.c_prod = pj.at("c_prod").get<double>();
    pl.c_setup = pj.at("c_setup").get<std::vector<double>>();
    pl.c_lin = pj.at("c_lin").get<std::vector<double>>();
    pl.c_quad = pj.at("c_quad").get<std::vector<double>>();
    pl.alpha = pj.at("alpha").get<double>();
    pl.damage = pj.at("damage").get<double>();
    pl.budget = pj.at("budget").get<double>();
    pl.q_cap = pj.at("q_cap").get<std::vector<double>>();
    inst.players.push_back(std::move(pl));
  }

  if (int(inst.players.size()) != j.at("m").get<int>())
    throw std::invalid_argument("instance json: m does not match the player list");
  if (int(inst.markets.size()) != j.at("n").get<int>())
    throw std::invalid_argument("instance json: n does not match the market list");

  if (j.contains("security_caps")) {
    inst.security_caps = j.at("security_caps").get<std::vector<double>>();
  } else {
    for (const PlayerParams& pl : inst.players)
      inst.security_caps.push_back(security_cap(inst.cost_kind, pl.alpha, pl.budget));
  }
  if (j.contains("seed")) {
    inst.seed = j.at("seed").get<std::uint64_t>();
    inst.has_seed = true;
  }

  inst.validate();
  return inst;
}

void save_instance(const GciInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_instance: cannot open " + path);
  out << instance_to_json(inst).dump(2) << "\n";
  if (!out) throw std::runtime_error("save_instance: write failed for " + path);
}

GciInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_instance: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return instance_from_json(j);
}

}  // namespace gci
