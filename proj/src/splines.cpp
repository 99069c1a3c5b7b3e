#include "crrmisc/splines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace crrmisc {

std::vector<double> KnotVector::full() const {
  std::vector<double> t;
  t.reserve(interior.size() + 2 * order);
  for (int i = 0; i < order; ++i) t.push_back(boundary_low);
  t.insert(t.end(), interior.begin(), interior.end());
  for (int i = 0; i < order; ++i) t.push_back(boundary_high);
  return t;
}

SplineCoefficients::SplineCoefficients(const Eigen::VectorXd& raw_values)
    : raw(raw_values), constrained(constrain(raw_values)) {}

namespace {

// type-7 quantile of a sorted vector
double sorted_quantile(const std::vector<double>& v, double p) {
  const auto n = static_cast<long>(v.size());
  if (n == 1) return v[0];
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<long>(std::floor(h));
  if (lo >= n - 1) return v[n - 1];
  const double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

// index i in [order-1, dim-1] with T[i] <= t < T[i+1]; t == tau maps to
// the last nonempty span
int find_span(const std::vector<double>& t_seq, int order, int dim,
              double t) {
  if (t >= t_seq[dim]) return dim - 1;
  const auto it = std::upper_bound(t_seq.begin() + order - 1,
                                   t_seq.begin() + dim, t);
  int i = static_cast<int>(it - t_seq.begin()) - 1;
  return std::max(i, order - 1);
}

// the `ord` nonzero basis functions of the given order at t, span i
void nonzero_basis(const std::vector<double>& t_seq, int i, double t, int ord,
                   Eigen::VectorXd& out) {
  out.resize(ord);
  out[0] = 1.0;
  std::vector<double> left(ord), right(ord);
  for (int j = 1; j < ord; ++j) {
    left[j] = t - t_seq[i + 1 - j];
    right[j] = t_seq[i + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double den = right[r + 1] + left[j - r];
      const double temp = den != 0.0 ? out[r] / den : 0.0;
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

void check_domain(const KnotVector& knots, double t) {
  if (!(t >= knots.boundary_low && t <= knots.boundary_high))
    throw std::domain_error("spline evaluation outside [0, tau]: t = " +
                            std::to_string(t));
}

}  // namespace

KnotVector make_knots(const std::vector<double>& event_times, int n_interior,
                      int order, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("make_knots: tau must be > 0");
  if (n_interior < 0)
    throw std::invalid_argument("make_knots: n_interior must be >= 0");
  if (order < 1) throw std::invalid_argument("make_knots: order must be >= 1");
  if (event_times.empty())
    throw std::invalid_argument("make_knots: event_times must be nonempty");
  for (double t : event_times)
    if (!(t >= 0.0 && t <= tau))
      throw std::invalid_argument("make_knots: event time outside [0, tau]");

  KnotVector kv;
  kv.boundary_low = 0.0;
  kv.boundary_high = tau;
  kv.order = order;
  if (n_interior == 0) return kv;

  std::vector<double> distinct(event_times);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());

  kv.interior.resize(n_interior);
  for (int q = 1; q <= n_interior; ++q)
    kv.interior[q - 1] =
        sorted_quantile(distinct, static_cast<double>(q) / (n_interior + 1));

  // collapse duplicates by a small right-shift, keeping knots in (0, tau)
  const double delta = tau * 1e-9;
  double prev = 0.0;
  for (double& k : kv.interior) {
    k = std::max(k, prev + delta);
    prev = k;
  }
  double next = tau;
  for (int i = n_interior - 1; i >= 0; --i) {
    kv.interior[i] = std::min(kv.interior[i], next - delta);
    next = kv.interior[i];
  }
  prev = 0.0;
  for (double k : kv.interior) {
    if (!(k > prev && k < tau))
      throw std::invalid_argument(
          "make_knots: cannot place distinct interior knots in (0, tau)");
    prev = k;
  }
  return kv;
}

void basis_local(const KnotVector& knots, double t, int& first,
                 Eigen::VectorXd& values) {
  check_domain(knots, t);
  const int m = knots.order;
  const int dim = knots.dimension();
  const auto t_seq = knots.full();
  const int span = find_span(t_seq, m, dim, t);
  first = span - m + 1;
  nonzero_basis(t_seq, span, t, m, values);
}

Eigen::VectorXd basis(const KnotVector& knots, double t) {
  int first = 0;
  Eigen::VectorXd local;
  basis_local(knots, t, first, local);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(knots.dimension());
  out.segment(first, knots.order) = local;
  return out;
}

void basis_deriv_local(const KnotVector& knots, double t, int& first,
                       Eigen::VectorXd& values) {
  check_domain(knots, t);
  const int m = knots.order;
  const int dim = knots.dimension();
  const auto t_seq = knots.full();
  const int span = find_span(t_seq, m, dim, t);
  first = span - m + 1;
  values = Eigen::VectorXd::Zero(m);
  if (m == 1) return;

  // order-(m-1) nonzero functions: indices span-m+2 .. span
  Eigen::VectorXd low;
  nonzero_basis(t_seq, span, t, m - 1, low);
  const auto low_val = [&](int s) -> double {
    const int off = s - (span - m + 2);
    return (off >= 0 && off < m - 1) ? low[off] : 0.0;
  };
  for (int r = 0; r < m; ++r) {
    const int s = first + r;
    double d = 0.0;
    const double den1 = t_seq[s + m - 1] - t_seq[s];
    if (den1 != 0.0) d += low_val(s) / den1;
    const double den2 = t_seq[s + m] - t_seq[s + 1];
    if (den2 != 0.0) d -= low_val(s + 1) / den2;
    values[r] = (m - 1) * d;
  }
}

Eigen::VectorXd basis_deriv(const KnotVector& knots, double t) {
  int first = 0;
  Eigen::VectorXd local;
  basis_deriv_local(knots, t, first, local);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(knots.dimension());
  out.segment(first, knots.order) = local;
  return out;
}

Eigen::VectorXd constrain(const Eigen::VectorXd& raw) {
  Eigen::VectorXd out(raw.size());
  if (raw.size() == 0) return out;
  out[0] = raw[0];
  for (Eigen::Index s = 1; s < raw.size(); ++s) {
    out[s] = out[s - 1] + std::exp(std::max(raw[s], -745.0));
    // a floored increment can be absorbed by rounding; force strictness
    if (!(out[s] > out[s - 1]))
      out[s] = std::nextafter(out[s - 1],
                              std::numeric_limits<double>::infinity());
  }
  return out;
}

Eigen::VectorXd unconstrain(const Eigen::VectorXd& constrained) {
  Eigen::VectorXd out(constrained.size());
  if (constrained.size() == 0) return out;
  out[0] = constrained[0];
  for (Eigen::Index s = 1; s < constrained.size(); ++s) {
    const double inc = constrained[s] - constrained[s - 1];
    if (!(inc > 0.0))
      throw std::invalid_argument("unconstrain: input not strictly increasing");
    out[s] = std::log(inc);
  }
  return out;
}

Eigen::MatrixXd constrain_jacobian(const Eigen::VectorXd& raw) {
  const auto n = raw.size();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    jac(s, 0) = 1.0;
    for (Eigen::Index r = 1; r <= s; ++r)
      jac(s, r) = raw[r] > -745.0 ? std::exp(raw[r]) : 0.0;
  }
  return jac;
}

Eigen::VectorXd constrain_chain(const Eigen::VectorXd& raw,
                                const Eigen::VectorXd& grad_constrained) {
  const auto n = raw.size();
  Eigen::VectorXd out(n);
  double suffix = 0.0;
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    suffix += grad_constrained[r];
    if (r == 0)
      out[r] = suffix;
    else
      out[r] = (raw[r] > -745.0 ? std::exp(raw[r]) : 0.0) * suffix;
  }
  return out;
}

double spline_value(const KnotVector& knots, const Eigen::VectorXd& coef,
                    double t) {
  int first = 0;
  Eigen::VectorXd local;
  basis_local(knots, t, first, local);
  return local.dot(coef.segment(first, knots.order));
}

double spline_deriv(const KnotVector& knots, const Eigen::VectorXd& coef,
                    double t) {
  int first = 0;
  Eigen::VectorXd local;
  basis_deriv_local(knots, t, first, local);
  return local.dot(coef.segment(first, knots.order));
}

}  // namespace crrmisc
