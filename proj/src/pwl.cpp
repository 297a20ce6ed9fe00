#include "gci/pwl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace gci::pwl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double value_at(const UnivariateSpec& spec, double x) {
  const double y = spec.value(x);
  if (!std::isfinite(y)) {
    std::ostringstream msg;
    msg << "pwl: function value is not finite at x=" << x;
    throw std::runtime_error(msg.str());
  }
  return y;
}

// Slope range for a line through (a, ya) required to stay inside
// [f - delta, f + delta] on (a, b].
struct SlopeWindow {
  double lo = -kInf;
  double hi = kInf;
  bool feasible() const { return lo <= hi; }
};

// g(x) = (f(x) + shift - ya) / (x - a) is the slope that places the line on
// the shifted curve at x; the tightest slope bound over an interval is an
// extremum of g. Interior stationary points satisfy
//   psi(x) = f'(x) (x - a) - (f(x) + shift - ya) = 0,
// and psi' = f'' (x - a) keeps one sign between curvature breaks, so a
// bisection on the sign of psi pins the only candidate per segment.
double psi_at(const UnivariateSpec& spec, double a, double ya, double shift, double x) {
  return spec.derivative(x) * (x - a) - (value_at(spec, x) + shift - ya);
}

double psi_root(const UnivariateSpec& spec, double a, double ya, double shift,
                double u, double v) {
  double pu = psi_at(spec, a, ya, shift, u);
  double pv = psi_at(spec, a, ya, shift, v);
  if (pu == 0.0) return u;
  if (pv == 0.0) return v;
  if ((pu > 0.0) == (pv > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (u + v);
    if (mid <= u || mid >= v) break;
    const double pm = psi_at(spec, a, ya, shift, mid);
    if (pm == 0.0) return mid;
    if ((pm > 0.0) == (pu > 0.0)) {
      u = mid;
      pu = pm;
    } else {
      v = mid;
      pv = pm;
    }
  }
  return 0.5 * (u + v);
}

// anchored_upper says whether ya lies on f(a) + delta or on f(a) - delta.
SlopeWindow anchored_window(const UnivariateSpec& spec, double delta, double a,
                            double ya, double b, bool anchored_upper) {
  SlopeWindow w;
  std::vector<double> edges;
  edges.push_back(a);
  for (double c : spec.curvature_breaks)
    if (c > a && c < b) edges.push_back(c);
  edges.push_back(b);

  auto slope_at = [&](double shift, double x) {
    return (value_at(spec, x) + shift - ya) / (x - a);
  };

  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double u = edges[k];
    const double v = edges[k + 1];
    for (int side = 0; side < 2; ++side) {
      const bool upper = side == 0;
      const double shift = upper ? delta : -delta;
      double extreme = upper ? kInf : -kInf;
      auto take = [&](double s) {
        extreme = upper ? std::min(extreme, s) : std::max(extreme, s);
      };

      if (u == a) {
        // At the anchor itself only the anchored curve constrains the slope,
        // in the limit x -> a+ where g tends to f'(a). The opposite curve is
        // 2*delta away and imposes nothing as x -> a+.
        if (upper == anchored_upper) take(spec.derivative(a));
      } else {
        take(slope_at(shift, u));
      }
      take(slope_at(shift, v));
      const double r = psi_root(spec, a, ya, shift, u, v);
      if (std::isfinite(r) && r > u && r < v) take(slope_at(shift, r));

      if (upper)
        w.hi = std::min(w.hi, extreme);
      else
        w.lo = std::max(w.lo, extreme);
    }
  }
  return w;
}

struct Extension {
  double b = 0.0;
  SlopeWindow window;
};

// Largest right endpoint b so that some line through (a, ya) stays inside the
// corridor on [a, b]. Feasibility is monotone in b, so bracket then bisect.
Extension max_extension(const UnivariateSpec& spec, double a, double ya,
                        bool anchored_upper) {
  const double delta = spec.tolerance;
  const double hi = spec.hi;
  {
    SlopeWindow w = anchored_window(spec, delta, a, ya, hi, anchored_upper);
    if (w.feasible()) return {hi, w};
  }

  const double span = hi - a;
  double blo = 0.0;
  double bhi = hi;
  SlopeWindow wlo;
  bool found = false;
  for (int k = 1; k <= 100; ++k) {
    const double b = a + span * std::ldexp(1.0, -k);
    if (b <= a) break;
    SlopeWindow wb = anchored_window(spec, delta, a, ya, b, anchored_upper);
    if (wb.feasible()) {
      blo = b;
      wlo = wb;
      found = true;
      break;
    }
    bhi = b;
  }
  if (!found) {
    std::ostringstream msg;
    msg << "fit_pwl: no piece can extend from x=" << a;
    throw std::runtime_error(msg.str());
  }
  while (bhi - blo > 1e-9) {
    const double mid = 0.5 * (blo + bhi);
    if (mid <= blo || mid >= bhi) break;
    SlopeWindow wm = anchored_window(spec, delta, a, ya, mid, anchored_upper);
    if (wm.feasible()) {
      blo = mid;
      wlo = wm;
    } else {
      bhi = mid;
    }
  }
  return {blo, wlo};
}

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
};

// Minimax line over [a, b]: chord slope, intercept centered between the
// residual extremes, accepted only if the result fits the corridor. Residual
// extremes sit at the endpoints or where f'(x) equals the chord slope; f' is
// monotone between curvature breaks so each segment holds at most one root.
std::optional<Line> minimax_line(const UnivariateSpec& spec, double a, double b) {
  const double fa = value_at(spec, a);
  const double fb = value_at(spec, b);
  const double c = (fb - fa) / (b - a);

  std::vector<double> cand = {a, b};
  std::vector<double> edges;
  edges.push_back(a);
  for (double t : spec.curvature_breaks)
    if (t > a && t < b) edges.push_back(t);
  edges.push_back(b);
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    double u = edges[k];
    double v = edges[k + 1];
    double du = spec.derivative(u) - c;
    double dv = spec.derivative(v) - c;
    if (du == 0.0) {
      cand.push_back(u);
      continue;
    }
    if (dv == 0.0) {
      cand.push_back(v);
      continue;
    }
    if ((du > 0.0) == (dv > 0.0)) continue;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (u + v);
      if (mid <= u || mid >= v) break;
      const double dm = spec.derivative(mid) - c;
      if (dm == 0.0) {
        u = v = mid;
        break;
      }
      if ((dm > 0.0) == (du > 0.0)) {
        u = mid;
        du = dm;
      } else {
        v = mid;
      }
    }
    cand.push_back(0.5 * (u + v));
  }

  double emax = -kInf;
  double emin = kInf;
  for (double x : cand) {
    const double e = value_at(spec, x) - c * x;
    emax = std::max(emax, e);
    emin = std::min(emin, e);
  }
  if (!(0.5 * (emax - emin) <= spec.tolerance * (1.0 + 1e-12))) return std::nullopt;

  const Line line{c, 0.5 * (emax + emin)};
  const int kChecks = 4096;
  for (int i = 0; i <= kChecks; ++i) {
    const double x = a + (b - a) * (double(i) / kChecks);
    const double err = std::abs(value_at(spec, x) - (line.slope * x + line.intercept));
    if (!(err <= spec.tolerance * (1.0 + 1e-9))) return std::nullopt;
  }
  return line;
}

double clamp_into(double x, const SlopeWindow& w) {
  return std::min(std::max(x, w.lo), w.hi);
}

// Interior pieces pin their right endpoint on whichever corridor boundary is
// binding there, which keeps the estimator continuous within the sweep; the
// trailing piece takes the middle of the admissible slope range.
double pick_slope(const UnivariateSpec& spec, double a, double ya, double b,
                  const SlopeWindow& w, bool trailing) {
  if (trailing) {
    if (std::isfinite(w.lo) && std::isfinite(w.hi)) return 0.5 * (w.lo + w.hi);
    return std::isfinite(w.lo) ? w.lo : (std::isfinite(w.hi) ? w.hi : 0.0);
  }
  const double fb = value_at(spec, b);
  const double su = (fb + spec.tolerance - ya) / (b - a);
  const double sl = (fb - spec.tolerance - ya) / (b - a);
  auto dist = [&](double s) {
    if (s < w.lo) return w.lo - s;
    if (s > w.hi) return s - w.hi;
    return 0.0;
  };
  return dist(su) <= dist(sl) ? clamp_into(su, w) : clamp_into(sl, w);
}

}  // namespace

void validate_spec(const UnivariateSpec& spec) {
  if (!spec.value || !spec.derivative)
    throw std::invalid_argument("pwl spec: value and derivative are required");
  if (!std::isfinite(spec.lo) || !std::isfinite(spec.hi) || !(spec.lo < spec.hi))
    throw std::invalid_argument("pwl spec: domain must satisfy lo < hi");
  if (!std::isfinite(spec.tolerance) || !(spec.tolerance > 0.0))
    throw std::invalid_argument("pwl spec: tolerance must be positive");

  double prev = spec.lo;
  for (double c : spec.curvature_breaks) {
    if (!std::isfinite(c) || !(c > prev) || !(c < spec.hi))
      throw std::invalid_argument(
          "pwl spec: curvature breaks must increase strictly inside the domain");
    prev = c;
  }

  std::vector<double> edges;
  edges.push_back(spec.lo);
  edges.insert(edges.end(), spec.curvature_breaks.begin(), spec.curvature_breaks.end());
  edges.push_back(spec.hi);
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double u = edges[k];
    const double v = edges[k + 1];
    const double len = v - u;
    const int kProbes = 1000;
    const double h = len / (4.0 * kProbes);
    int pos = 0;
    int neg = 0;
    for (int i = 0; i < kProbes; ++i) {
      const double x = u + h + (len - 2.0 * h) * (double(i) / (kProbes - 1));
      const double y0 = value_at(spec, x - h);
      const double y1 = value_at(spec, x);
      const double y2 = value_at(spec, x + h);
      const double d2 = y0 - 2.0 * y1 + y2;
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                               (std::abs(y0) + 2.0 * std::abs(y1) + std::abs(y2)) +
                           1e-300;
      if (d2 > noise)
        ++pos;
      else if (d2 < -noise)
        ++neg;
    }
    // A missing break flips the sign over a sizable stretch. A stray few
    // wrong-sign probes near an edge are cancellation noise in the central
    // differences, which the per-point guard (scaled by the final values)
    // cannot see when the target computes large intermediates.
    if (pos > kProbes / 50 && neg > kProbes / 50) {
      std::ostringstream msg;
      msg << "pwl spec: curvature changes sign inside the segment [" << u << ", " << v
          << "]; add a break there";
      throw std::invalid_argument(msg.str());
    }
  }
}

double PwlFunction::max_abs_slope() const {
  double m = 0.0;
  for (const AffinePiece& p : pieces) m = std::max(m, std::abs(p.slope));
  return m;
}

PwlFunction fit_pwl(const UnivariateSpec& spec) {
  validate_spec(spec);
  const double delta = spec.tolerance;

  PwlFunction out;
  out.source_tolerance = delta;

  double a = spec.lo;
  bool first = true;
  while (true) {
    const double fa = value_at(spec, a);
    const Extension up = max_extension(spec, a, fa + delta, true);
    const Extension dn = max_extension(spec, a, fa - delta, false);
    const bool use_upper = up.b >= dn.b;  // ties prefer the upper anchor
    const Extension& ext = use_upper ? up : dn;
    const double ya = use_upper ? fa + delta : fa - delta;
    const double b = ext.b;

    if (first && b == spec.hi) {
      if (auto line = minimax_line(spec, a, b)) {
        out.pieces.push_back({line->slope, line->intercept, a, b});
        return out;
      }
    }

    const bool trailing = b == spec.hi;
    const double slope = pick_slope(spec, a, ya, b, ext.window, trailing);
    out.pieces.push_back({slope, ya - slope * a, a, b});
    if (trailing) return out;
    if (!(b > a)) throw std::runtime_error("fit_pwl: piece made no progress");
    if (out.pieces.size() > 2000000)
      throw std::runtime_error("fit_pwl: piece count exceeds sanity bound");
    a = b;
    first = false;
  }
}

double eval_pwl(const PwlFunction& f, double x) {
  if (f.pieces.empty()) throw std::domain_error("eval_pwl: function has no pieces");
  if (!(x >= f.domain_lo()) || !(x <= f.domain_hi())) {
    std::ostringstream msg;
    msg << "eval_pwl: x=" << x << " outside [" << f.domain_lo() << ", " << f.domain_hi()
        << "]";
    throw std::domain_error(msg.str());
  }
  auto it = std::upper_bound(
      f.pieces.begin(), f.pieces.end(), x,
      [](double xv, const AffinePiece& p) { return xv < p.lo; });
  return (it - 1)->at(x);
}

double verify_corridor(const PwlFunction& f, const UnivariateSpec& spec, int samples) {
  if (samples < 2) throw std::invalid_argument("verify_corridor: samples must be >= 2");
  if (f.pieces.empty()) throw std::invalid_argument("verify_corridor: empty function");

  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x =
        f.domain_lo() + (f.domain_hi() - f.domain_lo()) * (double(i) / (samples - 1));
    worst = std::max(worst, std::abs(value_at(spec, x) - eval_pwl(f, x)));
  }
  // Each piece is also checked at the closure of its own interval, which
  // covers both sides of any jump between neighbours.
  for (const AffinePiece& p : f.pieces) {
    worst = std::max(worst, std::abs(value_at(spec, p.lo) - p.at(p.lo)));
    worst = std::max(worst, std::abs(value_at(spec, p.hi) - p.at(p.hi)));
  }
  return worst;
}

namespace {

// Greedy minimal cover of one uniform grid: stretch each piece while some
// (slope, intercept) pair keeps every visited sample inside the corridor,
// tracked as a convex polygon clipped by two half-planes per sample.
int min_pieces_on_grid(const UnivariateSpec& spec, int G) {
  std::vector<double> xs(G);
  std::vector<double> fs(G);
  for (int i = 0; i < G; ++i) {
    xs[i] = spec.lo + (spec.hi - spec.lo) * (double(i) / (G - 1));
    fs[i] = value_at(spec, xs[i]);
  }
  const double delta = spec.tolerance;
  const auto [fmin_it, fmax_it] = std::minmax_element(fs.begin(), fs.end());
  const double dx = (spec.hi - spec.lo) / (G - 1);
  const double cmax = (*fmax_it - *fmin_it + 2.0 * delta) / dx + 1.0;
  const double xabs = std::max(std::abs(spec.lo), std::abs(spec.hi));
  const double dmax =
      std::max(std::abs(*fmax_it), std::abs(*fmin_it)) + delta + cmax * xabs + 1.0;

  struct Pt {
    double c, d;
  };
  std::vector<Pt> poly;
  std::vector<Pt> next;
  auto clip = [&](double nx, double ny, double rhs) {
    // keep the half-plane nx*c + ny*d <= rhs
    next.clear();
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Pt& p = poly[i];
      const Pt& q = poly[(i + 1) % n];
      const double dp = nx * p.c + ny * p.d - rhs;
      const double dq = nx * q.c + ny * q.d - rhs;
      if (dp <= 0.0) next.push_back(p);
      if ((dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0)) {
        const double t = dp / (dp - dq);
        next.push_back({p.c + t * (q.c - p.c), p.d + t * (q.d - p.d)});
      }
    }
    poly.swap(next);
  };

  int count = 0;
  int i = 0;
  std::vector<Pt> snapshot;
  while (i < G) {
    poly = {{-cmax, -dmax}, {cmax, -dmax}, {cmax, dmax}, {-cmax, dmax}};
    int j = i;
    while (j < G) {
      snapshot = poly;
      clip(xs[j], 1.0, fs[j] + delta);
      clip(-xs[j], -1.0, -(fs[j] - delta));
      if (poly.empty()) {
        poly = snapshot;
        break;
      }
      ++j;
    }
    if (j == i) throw std::runtime_error("min_pieces_oracle: a single grid point is infeasible");
    ++count;
    i = j;
  }
  return count;
}

}  // namespace

int min_pieces_oracle(const UnivariateSpec& spec, int grid_size) {
  if (grid_size < 2) throw std::invalid_argument("min_pieces_oracle: grid_size must be >= 2");
  if (!(spec.tolerance > 0.0))
    throw std::invalid_argument("min_pieces_oracle: tolerance must be positive");
  if (!(spec.lo < spec.hi))
    throw std::invalid_argument("min_pieces_oracle: domain must satisfy lo < hi");

  // Coarse grids can let a piece reach past its true extent, undercounting on
  // steep targets. Refining a uniform grid by midpoint insertion only adds
  // constraints, so the count is nondecreasing; stop once a doubling no
  // longer changes it.
  int G = grid_size;
  int count = min_pieces_on_grid(spec, G);
  for (int round = 0; round < 8 && G < 2000000; ++round) {
    const int G2 = 2 * G - 1;
    const int refined = min_pieces_on_grid(spec, G2);
    if (refined == count) return refined;
    count = refined;
    G = G2;
  }
  return count;
}

nlohmann::json PwlFunction::to_json() const {
  nlohmann::json pj = nlohmann::json::array();
  for (const AffinePiece& p : pieces)
    pj.push_back({{"slope", p.slope}, {"intercept", p.intercept}, {"lo", p.lo}, {"hi", p.hi}});
  return {{"tolerance", source_tolerance}, {"pieces", std::move(pj)}};
}

PwlFunction PwlFunction::from_json(const nlohmann::json& j) {
  PwlFunction f;
  f.source_tolerance = j.at("tolerance").get<double>();
  for (const auto& pj : j.at("pieces")) {
    AffinePiece p;
    p.slope = pj.at("slope").get<double>();
    p.intercept = pj.at("intercept").get<double>();
    p.lo = pj.at("lo").get<double>();
    p.hi = pj.at("hi").get<double>();
    if (!std::isfinite(p.slope) || !std::isfinite(p.intercept) || !(p.lo < p.hi))
      throw std::invalid_argument("pwl json: malformed piece");
    f.pieces.push_back(p);
  }
  if (f.pieces.empty()) throw std::invalid_argument("pwl json: no pieces");
  for (std::size_t k = 0; k + 1 < f.pieces.size(); ++k) {
    const double gap = std::abs(f.pieces[k + 1].lo - f.pieces[k].hi);
    if (gap > 1e-12 * std::max(1.0, std::abs(f.pieces[k].hi)))
      throw std::invalid_argument("pwl json: pieces do not tile the domain");
    f.pieces[k + 1].lo = f.pieces[k].hi;
  }
  return f;
}

}  // namespace gci::pwl
