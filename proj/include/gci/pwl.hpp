#pragma once

#include <functional>
#include <vector>

#include "json.hpp"

namespace gci::pwl {

// A univariate approximation target: the function, its derivative, a closed
// domain [lo, hi], the interior abscissas where the curvature sign flips, and
// the absolute error budget. Between consecutive breaks the function must be
// convex or concave; fitting and validation both lean on that structure.
struct UnivariateSpec {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> curvature_breaks;
  double tolerance = 0.0;
};

// Throws std::invalid_argument on a degenerate domain, nonpositive tolerance,
// breaks outside (lo, hi) or out of order, a segment whose sampled second
// differences change sign, or a non-finite value inside the domain.
void validate_spec(const UnivariateSpec& spec);

struct AffinePiece {
  double slope = 0.0;
  double intercept = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double at(double x) const { return slope * x + intercept; }
};

// Pieces tile [domain_lo, domain_hi] without gaps. Each piece owns [lo, hi);
// the last piece also owns its right endpoint. Adjacent pieces may disagree
// at the shared abscissa: the approximation is allowed to jump.
struct PwlFunction {
  std::vector<AffinePiece> pieces;
  double source_tolerance = 0.0;

  double domain_lo() const { return pieces.front().lo; }
  double domain_hi() const { return pieces.back().hi; }
  double max_abs_slope() const;

  nlohmann::json to_json() const;
  static PwlFunction from_json(const nlohmann::json& j);
};

// Greedy corridor fit: each piece starts at the right end of the previous one,
// anchored on whichever corridor boundary (f+delta or f-delta) lets it extend
// farther, and is grown by bisection to the largest right endpoint that still
// admits a slope keeping the piece inside the corridor. A piece that covers
// the whole domain on the first try is recentered to the minimax line instead,
// so affine inputs are reproduced exactly. Throws std::runtime_error when the
// function is not finite somewhere or a piece cannot make progress.
PwlFunction fit_pwl(const UnivariateSpec& spec);

// Value at x. The owning piece follows the half-open convention above.
// Throws std::domain_error outside [domain_lo, domain_hi].
double eval_pwl(const PwlFunction& f, double x);

// Max of |f(x) - pwl(x)| over `samples` equispaced points plus every piece
// endpoint. samples must be >= 2.
double verify_corridor(const PwlFunction& f, const UnivariateSpec& spec, int samples);

// Fewest pieces of any piecewise-linear function whose error at sampled grid
// points stays within spec.tolerance — a lower bound on the continuum count.
// Independent of fit_pwl: a greedy sweep that extends each window of
// consecutive grid points as far as one line can serve it, testing
// feasibility by clipping a polygon in (slope, intercept) space. Starts from
// an equispaced grid of grid_size points and doubles the resolution (nested
// midpoint insertion, which can only raise the count) until the result is
// stable across a doubling.
int min_pieces_oracle(const UnivariateSpec& spec, int grid_size);

}  // namespace gci::pwl
