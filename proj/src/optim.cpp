#include "crrmisc/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace crrmisc {

namespace {

constexpr double kC1 = 1e-4;
constexpr double kC2 = 0.9;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinePoint {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;  // directional derivative g' d
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
};

class LineSearch {
 public:
  LineSearch(const ObjectiveFn& fn, const Eigen::VectorXd& x0, double f0,
             const Eigen::VectorXd& g0, const Eigen::VectorXd& dir)
      : fn_(fn), x0_(x0), dir_(dir), f0_(f0), slope0_(g0.dot(dir)) {}

  double initial_slope() const { return slope0_; }

  // strong-Wolfe search; returns false when no acceptable step was found
  bool search(LinePoint& out) {
    LinePoint prev;
    prev.alpha = 0.0;
    prev.f = f0_;
    prev.slope = slope0_;
    double alpha = 1.0;
    for (int iter = 0; iter < 20; ++iter) {
      LinePoint cur = probe(alpha);
      if (!std::isfinite(cur.f) ||
          cur.f > f0_ + kC1 * cur.alpha * slope0_ ||
          (iter > 0 && cur.f >= prev.f))
        return zoom(prev, cur, out);
      if (std::abs(cur.slope) <= -kC2 * slope0_) {
        out = cur;
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, out);
      prev = cur;
      alpha *= 2.0;
    }
    return false;
  }

 private:
  LinePoint probe(double alpha) {
    LinePoint pt;
    pt.alpha = alpha;
    pt.x = x0_ + alpha * dir_;
    pt.grad.resize(x0_.size());
    pt.f = fn_(pt.x, &pt.grad);
    pt.slope = std::isfinite(pt.f) ? pt.grad.dot(dir_) : kInf;
    return pt;
  }

  // lo satisfies the sufficient-decrease condition; hi brackets
  bool zoom(LinePoint lo, LinePoint hi, LinePoint& out) {
    for (int iter = 0; iter < 40; ++iter) {
      const double alpha = interpolate(lo, hi);
      LinePoint cur = probe(alpha);
      if (!std::isfinite(cur.f) || cur.f > f0_ + kC1 * alpha * slope0_ ||
          cur.f >= lo.f) {
        hi = cur;
      } else {
        if (std::abs(cur.slope) <= -kC2 * slope0_) {
          out = cur;
          return true;
        }
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = cur;
      }
      if (std::abs(hi.alpha - lo.alpha) <
          1e-14 * std::max(1.0, std::abs(lo.alpha))) {
        // interval collapsed; accept lo if it made progress
        if (lo.alpha > 0.0 && lo.f < f0_) {
          out = lo;
          return true;
        }
        return false;
      }
    }
    if (lo.alpha > 0.0 && lo.f < f0_) {
      out = lo;
      return true;
    }
    return false;
  }

  // cubic interpolation with bisection fallback
  double interpolate(const LinePoint& lo, const LinePoint& hi) const {
    const double mid = 0.5 * (lo.alpha + hi.alpha);
    if (!std::isfinite(hi.f) || !std::isfinite(lo.slope) ||
        !std::isfinite(hi.slope))
      return mid;
    const double d1 = lo.slope + hi.slope -
                      3.0 * (lo.f - hi.f) / (lo.alpha - hi.alpha);
    const double disc = d1 * d1 - lo.slope * hi.slope;
    if (disc < 0.0) return mid;
    const double d2 = std::copysign(std::sqrt(disc), hi.alpha - lo.alpha);
    double alpha = hi.alpha - (hi.alpha - lo.alpha) * (hi.slope + d2 - d1) /
                                  (hi.slope - lo.slope + 2.0 * d2);
    const double a = std::min(lo.alpha, hi.alpha);
    const double b = std::max(lo.alpha, hi.alpha);
    const double margin = 0.05 * (b - a);
    if (!std::isfinite(alpha) || alpha < a + margin || alpha > b - margin)
      return mid;
    return alpha;
  }

  const ObjectiveFn& fn_;
  const Eigen::VectorXd& x0_;
  const Eigen::VectorXd& dir_;
  double f0_;
  double slope0_;
};

}  // namespace

OptimResult minimize_bfgs(const ObjectiveFn& fn, Eigen::VectorXd x0,
                          const OptimOptions& options) {
  const auto dim = x0.size();
  OptimResult res;
  res.x = std::move(x0);
  res.grad.resize(dim);
  res.f = fn(res.x, &res.grad);
  if (!std::isfinite(res.f))
    throw std::runtime_error("minimize_bfgs: objective not finite at start");
  res.objective_history.push_back(res.f);

  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(dim, dim);
  bool restarted = false;
  bool first_update = true;
  int stall_count = 0;  // consecutive iterations with a negligible change

  for (int iter = 0; iter < options.max_iter; ++iter) {
    if (res.grad.cwiseAbs().maxCoeff() <=
        options.tol_grad * (1.0 + std::abs(res.f))) {
      res.stop = StopReason::Gradient;
      return res;
    }

    Eigen::VectorXd dir = -(hinv * res.grad);
    if (dir.dot(res.grad) >= 0.0) {
      hinv.setIdentity();
      dir = -res.grad;
      first_update = true;
    }

    LineSearch ls(fn, res.x, res.f, res.grad, dir);
    LinePoint pt;
    bool ok = ls.search(pt);
    if (!ok && !restarted) {
      // one steepest-descent restart before giving up
      restarted = true;
      hinv.setIdentity();
      first_update = true;
      dir = -res.grad;
      LineSearch ls2(fn, res.x, res.f, res.grad, dir);
      ok = ls2.search(pt);
    }
    if (!ok) {
      res.stop = StopReason::LineSearch;
      return res;
    }

    const Eigen::VectorXd step = pt.x - res.x;
    const Eigen::VectorXd ygrad = pt.grad - res.grad;
    const double sy = step.dot(ygrad);
    if (sy > 1e-12 * step.norm() * ygrad.norm()) {
      if (first_update) {
        hinv *= sy / ygrad.squaredNorm();
        first_update = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = hinv * ygrad;
      hinv.noalias() -= rho * (hy * step.transpose());
      hinv.noalias() -= rho * (step * hy.transpose());
      hinv.noalias() += rho * rho * ygrad.dot(hy) * (step * step.transpose());
      hinv.noalias() += rho * (step * step.transpose());
    }

    const double f_prev = res.f;
    res.x = pt.x;
    res.f = pt.f;
    res.grad = pt.grad;
    res.iterations = iter + 1;
    res.objective_history.push_back(res.f);

    // a single small step is not stationarity; require a sustained stall
    if (std::abs(f_prev - res.f) <=
        options.tol_rel_obj * (1.0 + std::abs(res.f)))
      ++stall_count;
    else
      stall_count = 0;
    if (stall_count >= 5) {
      res.stop = res.grad.cwiseAbs().maxCoeff() <=
                         options.tol_grad * (1.0 + std::abs(res.f))
                     ? StopReason::Gradient
                     : StopReason::Objective;
      return res;
    }
  }
  res.stop = StopReason::MaxIter;
  return res;
}

}  // namespace crrmisc
