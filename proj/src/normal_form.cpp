#include "gci/normal_form.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

namespace gci {
namespace {

constexpr double kSlack = 1e-9;

std::vector<std::size_t> make_strides(const std::vector<int>& shape) {
  const int m = int(shape.size());
  std::vector<std::size_t> strides(m, 1);
  for (int p = m - 2; p >= 0; --p) strides[p] = strides[p + 1] * std::size_t(shape[p + 1]);
  return strides;
}

// Visits the product of the given index lists; idx holds the current cell.
template <class Fn>
void product_foreach(const std::vector<std::vector<int>>& lists, Fn&& fn) {
  const int m = int(lists.size());
  std::vector<int> pos(m, 0);
  std::vector<int> idx(m);
  for (int p = 0; p < m; ++p) {
    if (lists[p].empty()) return;
    idx[p] = lists[p][0];
  }
  while (true) {
    fn(idx);
    int p = m - 1;
    while (p >= 0) {
      if (++pos[p] < int(lists[p].size())) {
        idx[p] = lists[p][std::size_t(pos[p])];
        break;
      }
      pos[p] = 0;
      idx[p] = lists[p][0];
      --p;
    }
    if (p < 0) break;
  }
}

std::vector<std::vector<int>> support_lists(const SampledGame& g,
                                            const SampledMixedProfile& prof) {
  std::vector<std::vector<int>> lists(prof.size());
  for (std::size_t p = 0; p < prof.size(); ++p) {
    for (int i = 0; i < g.shape[p]; ++i)
      if (prof[p][std::size_t(i)] != 0.0) lists[p].push_back(i);
  }
  return lists;
}

void check_profile_dims(const SampledGame& g, const SampledMixedProfile& prof,
                        const char* who) {
  if (int(prof.size()) != g.num_players())
    throw std::invalid_argument(std::string(who) + ": one probability vector per player");
  for (int p = 0; p < g.num_players(); ++p) {
    if (int(prof[p].size()) != g.shape[p])
      throw std::invalid_argument(std::string(who) + ": probability vector length mismatch");
  }
}

double contract_weighted(const SampledGame& g, int p_payoff,
                         const std::vector<std::vector<int>>& lists,
                         const SampledMixedProfile& prof, int unweighted_player) {
  const std::vector<std::size_t> strides = make_strides(g.shape);
  const int m = g.num_players();
  double total = 0.0;
  product_foreach(lists, [&](const std::vector<int>& idx) {
    double w = 1.0;
    std::size_t flat = 0;
    for (int q = 0; q < m; ++q) {
      flat += strides[q] * std::size_t(idx[q]);
      if (q != unweighted_player) w *= prof[q][std::size_t(idx[q])];
    }
    total += w * g.payoffs[p_payoff][flat];
  });
  return total;
}

}  // namespace

std::size_t SampledGame::flat_size() const {
  std::size_t total = 1;
  for (int s : shape) total *= std::size_t(s);
  return total;
}

double SampledGame::at(int p, const std::vector<int>& idx) const {
  const std::vector<std::size_t> strides = make_strides(shape);
  std::size_t flat = 0;
  for (std::size_t q = 0; q < idx.size(); ++q) flat += strides[q] * std::size_t(idx[q]);
  return payoffs[p][flat];
}

SampledGame build_sampled_game(const GameView& view,
                               const std::vector<std::vector<PureStrategy>>& strategies) {
  const GciInstance& inst = *view.instance;
  const int m = inst.num_players();
  const std::size_t n = inst.markets.size();
  if (int(strategies.size()) != m)
    throw std::invalid_argument("build_sampled_game: one strategy list per player");

  SampledGame g;
  g.strategies = strategies;
  std::size_t total = 1;
  for (int p = 0; p < m; ++p) {
    if (strategies[p].empty())
      throw std::invalid_argument("build_sampled_game: empty strategy list");
    for (const PureStrategy& st : strategies[p]) {
      if (!strategy_feasible(inst, p, st))
        throw std::invalid_argument("build_sampled_game: infeasible strategy for player " +
                                    std::to_string(p));
    }
    g.shape.push_back(int(strategies[p].size()));
    total *= strategies[p].size();
    if (total > (std::size_t(1) << 26))
      throw SolverExhausted("build_sampled_game: payoff tensor exceeds 2^26 entries");
  }

  // Security costs depend only on (player, strategy); price them once.
  std::vector<std::vector<double>> cost(m);
  for (int p = 0; p < m; ++p)
    for (const PureStrategy& st : strategies[p]) cost[p].push_back(view.cost(p, st.security));

  g.payoffs.assign(m, std::vector<double>(total, 0.0));

  std::vector<std::vector<int>> all(m);
  for (int p = 0; p < m; ++p) {
    all[p].resize(strategies[p].size());
    for (int i = 0; i < g.shape[p]; ++i) all[p][std::size_t(i)] = i;
  }
  const std::vector<std::size_t> strides = make_strides(g.shape);
  std::vector<double> opp_q(n);
  product_foreach(all, [&](const std::vector<int>& idx) {
    std::size_t flat = 0;
    double tot_s = 0.0;
    for (int q = 0; q < m; ++q) {
      flat += strides[q] * std::size_t(idx[q]);
      tot_s += strategies[q][std::size_t(idx[q])].security;
    }
    for (int p = 0; p < m; ++p) {
      const PureStrategy& own = strategies[p][std::size_t(idx[p])];
      std::fill(opp_q.begin(), opp_q.end(), 0.0);
      for (int q = 0; q < m; ++q) {
        if (q == p) continue;
        const PureStrategy& st = strategies[q][std::size_t(idx[q])];
        for (std::size_t j = 0; j < n; ++j) opp_q[j] += st.quantity[j];
      }
      g.payoffs[p][flat] = payoff_before_cost(inst, p, own, opp_q, tot_s - own.security) -
                           cost[p][std::size_t(idx[p])];
    }
  });
  return g;
}

double sampled_expected_payoff(const SampledGame& g, int p, const SampledMixedProfile& prof) {
  check_profile_dims(g, prof, "sampled_expected_payoff");
  return contract_weighted(g, p, support_lists(g, prof), prof, -1);
}

double sampled_deviation_value(const SampledGame& g, int p, int strategy,
                               const SampledMixedProfile& prof) {
  check_profile_dims(g, prof, "sampled_deviation_value");
  if (strategy < 0 || strategy >= g.shape[p])
    throw std::invalid_argument("sampled_deviation_value: strategy out of range");
  std::vector<std::vector<int>> lists = support_lists(g, prof);
  lists[std::size_t(p)] = {strategy};
  return contract_weighted(g, p, lists, prof, p);
}

double sampled_regret(const SampledGame& g, const SampledMixedProfile& prof, int p) {
  check_profile_dims(g, prof, "sampled_regret");
  std::vector<std::vector<int>> lists = support_lists(g, prof);
  double current = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < g.shape[p]; ++i) {
    std::vector<std::vector<int>> dev = lists;
    dev[std::size_t(p)] = {i};
    const double v = contract_weighted(g, p, dev, prof, p);
    best = std::max(best, v);
    const double pr = prof[std::size_t(p)][std::size_t(i)];
    if (pr != 0.0) current += pr * v;
  }
  return best - current;
}

namespace {

// ---- candidate construction ------------------------------------------------

bool clamp_and_normalize(std::vector<double>& probs) {
  double sum = 0.0;
  for (double& x : probs) {
    if (x < -1e-8) return false;
    x = std::max(x, 0.0);
    sum += x;
  }
  if (!(std::abs(sum - 1.0) <= 0.1)) return false;
  for (double& x : probs) x /= sum;
  return true;
}

bool passes_regret(const SampledGame& g, const SampledMixedProfile& prof, double delta_M) {
  for (int p = 0; p < g.num_players(); ++p)
    if (!(sampled_regret(g, prof, p) <= delta_M + kSlack)) return false;
  return true;
}

// Probabilities for one side of a bimatrix support: the mixing of `mixer`
// must keep `responder` indifferent across its support.
std::optional<std::vector<double>> bimatrix_side(const SampledGame& g, int mixer,
                                                 int responder,
                                                 const std::vector<int>& mix_support,
                                                 const std::vector<int>& resp_support) {
  const int k = int(mix_support.size());
  const int rows = int(resp_support.size());
  Eigen::MatrixXd A(rows + 1, k + 1);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows + 1);
  std::vector<int> idx(2, 0);
  for (int rj = 0; rj < rows; ++rj) {
    for (int ci = 0; ci < k; ++ci) {
      idx[std::size_t(mixer)] = mix_support[std::size_t(ci)];
      idx[std::size_t(responder)] = resp_support[std::size_t(rj)];
      A(rj, ci) = g.at(responder, idx);
    }
    A(rj, k) = -1.0;  // the responder's equilibrium value
  }
  for (int ci = 0; ci < k; ++ci) A(rows, ci) = 1.0;
  A(rows, k) = 0.0;
  b(rows) = 1.0;

  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
  double scale = 1.0;
  for (int rj = 0; rj < rows; ++rj)
    for (int ci = 0; ci < k; ++ci) scale = std::max(scale, std::abs(A(rj, ci)));
  if ((A * x - b).lpNorm<Eigen::Infinity>() > 1e-6 * scale) return std::nullopt;

  std::vector<double> probs(mix_support.size(), 0.0);
  for (int ci = 0; ci < k; ++ci) probs[std::size_t(ci)] = x(ci);
  return probs;
}

// ---- polynomial indifference system for three or more players --------------

struct NewtonWorkspace {
  const SampledGame& g;
  const std::vector<std::vector<int>>& sup;
  std::vector<int> offset;  // sigma block offsets per player
  int total_support = 0;

  explicit NewtonWorkspace(const SampledGame& game, const std::vector<std::vector<int>>& s)
      : g(game), sup(s) {
    offset.resize(s.size());
    for (std::size_t p = 0; p < s.size(); ++p) {
      offset[p] = total_support;
      total_support += int(s[p].size());
    }
  }

  int dim() const { return total_support + int(sup.size()); }

  // Expected payoff of player p playing its support member a, with any
  // players in `fixed_player` pinned to `fixed_local`; everyone else mixes
  // according to z.
  double restricted_value(const Eigen::VectorXd& z, int p, int a, int fixed_player,
                          int fixed_local) const {
    const int m = int(sup.size());
    std::vector<std::vector<int>> lists(m);
    for (int q = 0; q < m; ++q) {
      if (q == p)
        lists[q] = {sup[q][std::size_t(a)]};
      else if (q == fixed_player)
        lists[q] = {sup[q][std::size_t(fixed_local)]};
      else
        lists[q] = sup[q];
    }
    const std::vector<std::size_t> strides = make_strides(g.shape);
    // local position per player for weight lookup
    std::vector<int> local(m, 0);
    double total = 0.0;
    product_foreach(lists, [&](const std::vector<int>& idx) {
      double w = 1.0;
      std::size_t flat = 0;
      for (int q = 0; q < m; ++q) {
        flat += strides[q] * std::size_t(idx[q]);
        if (q == p || q == fixed_player) continue;
        // idx[q] is sup[q][pos]; recover pos by search (supports are tiny)
        const auto& sq = sup[std::size_t(q)];
        const int pos = int(std::find(sq.begin(), sq.end(), idx[q]) - sq.begin());
        w *= z(offset[std::size_t(q)] + pos);
      }
      total += w * g.payoffs[p][flat];
    });
    return total;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& z) const {
    const int m = int(sup.size());
    Eigen::VectorXd f(dim());
    int row = 0;
    for (int p = 0; p < m; ++p)
      for (std::size_t a = 0; a < sup[std::size_t(p)].size(); ++a)
        f(row++) = restricted_value(z, p, int(a), -1, -1) - z(total_support + p);
    for (int p = 0; p < m; ++p) {
      double sum = 0.0;
      for (std::size_t a = 0; a < sup[std::size_t(p)].size(); ++a)
        sum += z(offset[std::size_t(p)] + int(a));
      f(row++) = sum - 1.0;
    }
    return f;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& z) const {
    const int m = int(sup.size());
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(dim(), dim());
    int row = 0;
    for (int p = 0; p < m; ++p) {
      for (std::size_t a = 0; a < sup[std::size_t(p)].size(); ++a) {
        for (int q = 0; q < m; ++q) {
          if (q == p) continue;
          for (std::size_t bpos = 0; bpos < sup[std::size_t(q)].size(); ++bpos)
            J(row, offset[std::size_t(q)] + int(bpos)) =
                restricted_value(z, p, int(a), q, int(bpos));
        }
        J(row, total_support + p) = -1.0;
        ++row;
      }
    }
    for (int p = 0; p < m; ++p) {
      for (std::size_t a = 0; a < sup[std::size_t(p)].size(); ++a)
        J(row, offset[std::size_t(p)] + int(a)) = 1.0;
      ++row;
    }
    return J;
  }
};

std::optional<SampledMixedProfile> newton_candidate(const SampledGame& g,
                                                    const std::vector<std::vector<int>>& sup,
                                                    double payoff_scale) {
  NewtonWorkspace ws(g, sup);
  const int m = g.num_players();
  const int dim = ws.dim();
  const double tol = 1e-10 * payoff_scale;

  for (int start = 0; start < 12; ++start) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(dim);
    std::mt19937_64 gen(0x5eed0000ULL + std::uint64_t(start) * 77ULL);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int p = 0; p < m; ++p) {
      const std::size_t k = sup[std::size_t(p)].size();
      double sum = 0.0;
      std::vector<double> w(k);
      for (std::size_t a = 0; a < k; ++a) {
        w[a] = start == 0 ? 1.0 : std::exp(0.7 * nd(gen));
        sum += w[a];
      }
      for (std::size_t a = 0; a < k; ++a) z(ws.offset[std::size_t(p)] + int(a)) = w[a] / sum;
    }
    for (int p = 0; p < m; ++p)
      z(ws.total_support + p) = ws.restricted_value(z, p, 0, -1, -1);

    Eigen::VectorXd f = ws.residual(z);
    bool ok = false;
    for (int it = 0; it < 80; ++it) {
      if (f.lpNorm<Eigen::Infinity>() <= tol) {
        ok = true;
        break;
      }
      const Eigen::MatrixXd J = ws.jacobian(z);
      const Eigen::VectorXd step = J.partialPivLu().solve(-f);
      if (!step.allFinite()) break;
      double lambda = 1.0;
      const double f0 = f.norm();
      bool moved = false;
      for (int half = 0; half < 24; ++half) {
        const Eigen::VectorXd zn = z + lambda * step;
        const Eigen::VectorXd fn = ws.residual(zn);
        if (fn.norm() < (1.0 - 1e-4 * lambda) * f0) {
          z = zn;
          f = fn;
          moved = true;
          break;
        }
        lambda *= 0.5;
      }
      if (!moved) break;
    }
    if (!ok && f.lpNorm<Eigen::Infinity>() > tol) continue;

    auto prof = SampledMixedProfile(std::size_t(m));
    bool valid = true;
    for (int p = 0; p < m && valid; ++p) {
      prof[std::size_t(p)].assign(std::size_t(g.shape[p]), 0.0);
      std::vector<double> probs(sup[std::size_t(p)].size());
      for (std::size_t a = 0; a < probs.size(); ++a)
        probs[a] = z(ws.offset[std::size_t(p)] + int(a));
      if (!clamp_and_normalize(probs)) {
        valid = false;
        break;
      }
      for (std::size_t a = 0; a < probs.size(); ++a)
        prof[std::size_t(p)][std::size_t(sup[std::size_t(p)][a])] = probs[a];
    }
    if (valid) return prof;
  }
  return std::nullopt;
}

std::optional<SampledMixedProfile> candidate_for_support(
    const SampledGame& g, const std::vector<std::vector<int>>& sup, double delta_M,
    double payoff_scale) {
  const int m = g.num_players();
  bool all_pure = true;
  for (const auto& s : sup) all_pure = all_pure && s.size() == 1;

  auto prof = SampledMixedProfile(std::size_t(m));
  for (int p = 0; p < m; ++p) prof[std::size_t(p)].assign(std::size_t(g.shape[p]), 0.0);

  if (all_pure) {
    for (int p = 0; p < m; ++p) prof[std::size_t(p)][std::size_t(sup[std::size_t(p)][0])] = 1.0;
  } else if (m == 2) {
    auto x = bimatrix_side(g, 0, 1, sup[0], sup[1]);
    auto y = bimatrix_side(g, 1, 0, sup[1], sup[0]);
    if (!x || !y) return std::nullopt;
    if (!clamp_and_normalize(*x) || !clamp_and_normalize(*y)) return std::nullopt;
    for (std::size_t a = 0; a < sup[0].size(); ++a) prof[0][std::size_t(sup[0][a])] = (*x)[a];
    for (std::size_t a = 0; a < sup[1].size(); ++a) prof[1][std::size_t(sup[1][a])] = (*y)[a];
  } else {
    auto sol = newton_candidate(g, sup, payoff_scale);
    if (!sol) return std::nullopt;
    prof = std::move(*sol);
  }

  if (!passes_regret(g, prof, delta_M)) return std::nullopt;
  return prof;
}

// ---- support enumeration ----------------------------------------------------

void compositions_rec(int pos, int remaining, const std::vector<int>& caps,
                      std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  const int m = int(caps.size());
  if (pos == m - 1) {
    if (remaining >= 1 && remaining <= caps[std::size_t(pos)]) {
      cur[std::size_t(pos)] = remaining;
      out.push_back(cur);
    }
    return;
  }
  int tail_min = m - pos - 1;  // one strategy for every later player
  for (int k = 1; k <= std::min(caps[std::size_t(pos)], remaining - tail_min); ++k) {
    cur[std::size_t(pos)] = k;
    compositions_rec(pos + 1, remaining - k, caps, cur, out);
  }
}

std::vector<std::vector<int>> compositions(int total, const std::vector<int>& caps) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(caps.size(), 0);
  compositions_rec(0, total, caps, cur, out);
  return out;
}

bool next_combination(std::vector<int>& c, int n) {
  const int k = int(c.size());
  int i = k - 1;
  while (i >= 0 && c[std::size_t(i)] == n - k + i) --i;
  if (i < 0) return false;
  ++c[std::size_t(i)];
  for (int j = i + 1; j < k; ++j) c[std::size_t(j)] = c[std::size_t(j - 1)] + 1;
  return true;
}

}  // namespace

SampledMixedProfile solve_sampled_ne(const SampledGame& g, double delta_M,
                                     const SampledMixedProfile* warm_start,
                                     const SolveOptions& options) {
  const int m = g.num_players();
  if (m < 2) throw std::invalid_argument("solve_sampled_ne: need at least two players");
  if (!(delta_M >= 0.0)) throw std::invalid_argument("solve_sampled_ne: delta_M must be >= 0");
  for (int p = 0; p < m; ++p) {
    if (g.shape[p] < 1 || g.payoffs[std::size_t(p)].size() != g.flat_size())
      throw std::invalid_argument("solve_sampled_ne: malformed payoff tensors");
  }

  double payoff_scale = 1.0;
  for (const auto& t : g.payoffs)
    for (double v : t) payoff_scale = std::max(payoff_scale, std::abs(v));

  long long used = 0;
  auto spend_candidate = [&]() {
    if (options.deadline && options.deadline())
      throw SolverExhausted("solve_sampled_ne: deadline reached");
    if (++used > options.candidate_budget)
      throw SolverExhausted("solve_sampled_ne: candidate budget exhausted");
  };

  std::vector<std::vector<int>> warm_support;
  if (warm_start != nullptr) {
    check_profile_dims(g, *warm_start, "solve_sampled_ne warm start");
    SampledMixedProfile warm = *warm_start;
    bool sane = true;
    for (int p = 0; p < m && sane; ++p) sane = clamp_and_normalize(warm[std::size_t(p)]);
    if (sane && passes_regret(g, warm, delta_M)) return warm;
    if (sane) warm_support = support_lists(g, warm);
  }

  if (!warm_support.empty()) {
    spend_candidate();
    if (auto sol = candidate_for_support(g, warm_support, delta_M, payoff_scale)) return *sol;
  }

  int total_supports = 0;
  for (int p = 0; p < m; ++p) total_supports += g.shape[p];

  auto sweep = [&](int k_total, const std::vector<int>& caps,
                   bool skip_first_pass_shapes) -> std::optional<SampledMixedProfile> {
    for (const std::vector<int>& sizes : compositions(k_total, caps)) {
      if (skip_first_pass_shapes) {
        bool seen = k_total <= m + options.first_pass_extra;
        for (int p = 0; p < m && seen; ++p)
          seen = sizes[std::size_t(p)] <= options.first_pass_per_player;
        if (seen) continue;
      }
      // odometer over per-player index combinations, last player fastest
      auto sup = std::vector<std::vector<int>>(std::size_t(m));
      for (int p = 0; p < m; ++p) {
        sup[std::size_t(p)].resize(std::size_t(sizes[std::size_t(p)]));
        for (int a = 0; a < sizes[std::size_t(p)]; ++a) sup[std::size_t(p)][std::size_t(a)] = a;
      }
      while (true) {
        spend_candidate();
        if (auto sol = candidate_for_support(g, sup, delta_M, payoff_scale)) return sol;
        int p = m - 1;
        while (p >= 0 && !next_combination(sup[std::size_t(p)], g.shape[p])) {
          for (int a = 0; a < sizes[std::size_t(p)]; ++a)
            sup[std::size_t(p)][std::size_t(a)] = a;
          --p;
        }
        if (p < 0) break;
      }
    }
    return std::nullopt;
  };

  // First pass: small balanced supports.
  {
    std::vector<int> caps(std::size_t(m), 0);
    for (int p = 0; p < m; ++p)
      caps[std::size_t(p)] = std::min(g.shape[p], options.first_pass_per_player);
    const int k_max = std::min(total_supports, m + options.first_pass_extra);
    for (int k_total = m; k_total <= k_max; ++k_total)
      if (auto sol = sweep(k_total, caps, false)) return *sol;
  }

  // Relaxed pass: anything goes, bounded by the candidate budget.
  {
    std::vector<int> caps(std::size_t(m), 0);
    for (int p = 0; p < m; ++p) caps[std::size_t(p)] = g.shape[p];
    for (int k_total = m; k_total <= total_supports; ++k_total)
      if (auto sol = sweep(k_total, caps, true)) return *sol;
  }

  throw SolverExhausted("solve_sampled_ne: no equilibrium in the enumerated supports");
}

}  // namespace gci
