#pragma once

#include <Eigen/Core>
#include <vector>

namespace crrmisc {

// Knot configuration for a B-spline basis on [0, tau].  The full knot
// sequence repeats each boundary knot `order` times, so the basis has
// dimension n_interior + order.
struct KnotVector {
  std::vector<double> interior;  // strictly increasing, inside (0, tau)
  double boundary_low = 0.0;
  double boundary_high = 0.0;  // tau
  int order = 4;

  int dimension() const { return static_cast<int>(interior.size()) + order; }

  // assembled knot sequence of length dimension() + order
  std::vector<double> full() const;
};

// Spline coefficients in both parameterizations.  `constrained` is the
// strictly increasing control-point vector obtained from `raw` via
// constrain(); construction keeps the two in sync.
struct SplineCoefficients {
  Eigen::VectorXd raw;
  Eigen::VectorXd constrained;

  SplineCoefficients() = default;
  explicit SplineCoefficients(const Eigen::VectorXd& raw_values);
};

// Interior knots at empirical quantiles of the distinct event times.
// Throws std::invalid_argument on tau <= 0, n_interior < 0, empty or
// out-of-range event times.
KnotVector make_knots(const std::vector<double>& event_times, int n_interior,
                      int order, double tau);

// All basis functions at t (Cox-de Boor recursion), length dimension().
// Throws std::domain_error for t outside [0, tau].
Eigen::VectorXd basis(const KnotVector& knots, double t);

// First derivatives of all basis functions at t.
Eigen::VectorXd basis_deriv(const KnotVector& knots, double t);

// Nonzero basis values at t: `first` is the index of the first of the
// `order` consecutive nonzero functions.  Used for cached evaluation.
void basis_local(const KnotVector& knots, double t, int& first,
                 Eigen::VectorXd& values);
void basis_deriv_local(const KnotVector& knots, double t, int& first,
                       Eigen::VectorXd& values);

// Cumulative-exponential map onto strictly increasing vectors:
// out[0] = raw[0], out[s] = out[s-1] + exp(max(raw[s], -745)).
Eigen::VectorXd constrain(const Eigen::VectorXd& raw);

// Inverse of constrain; requires strictly increasing input.
Eigen::VectorXd unconstrain(const Eigen::VectorXd& constrained);

// Jacobian d constrained / d raw (lower triangular).
Eigen::MatrixXd constrain_jacobian(const Eigen::VectorXd& raw);

// Adjoint of the constrain map: given dL/dconstrained, return dL/draw.
Eigen::VectorXd constrain_chain(const Eigen::VectorXd& raw,
                                const Eigen::VectorXd& grad_constrained);

// Value and first derivative of the spline with the given control points.
double spline_value(const KnotVector& knots, const Eigen::VectorXd& coef,
                    double t);
double spline_deriv(const KnotVector& knots, const Eigen::VectorXd& coef,
                    double t);

}  // namespace crrmisc
