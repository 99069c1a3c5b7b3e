#include "crrmisc/estimator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crrmisc/optim.hpp"

namespace crrmisc {

void FitConfig::validate() const {
  if (order < 1) throw std::invalid_argument("FitConfig: order must be >= 1");
  if (smoothness_p < 1)
    throw std::invalid_argument("FitConfig: smoothness_p must be >= 1");
  if (!(tol_rel_obj > 0.0) || !(tol_grad > 0.0))
    throw std::invalid_argument("FitConfig: tolerances must be positive");
  if (max_iter < 1)
    throw std::invalid_argument("FitConfig: max_iter must be >= 1");
  if (n_interior && *n_interior < 0)
    throw std::invalid_argument("FitConfig: n_interior must be >= 0");
  if (!std::isfinite(eta))
    throw std::invalid_argument("FitConfig: eta must be finite");
}

int default_knot_count(long n, int p) {
  if (n < 2) throw std::invalid_argument("default_knot_count: n must be >= 2");
  if (p < 1) throw std::invalid_argument("default_knot_count: p must be >= 1");
  const double e = std::pow(static_cast<double>(n), 1.0 / (1.0 + 2.0 * p));
  const double r = std::round(e);
  if (std::abs(e - r) < 1e-9) return static_cast<int>(r);
  return static_cast<int>(std::ceil(e));
}

std::vector<KnotVector> select_knots(const Dataset& dataset,
                                     const FitConfig& config) {
  std::vector<double> event_times;
  for (const auto& s : dataset.subjects)
    if (s.observed_cause() > 0) event_times.push_back(s.x);
  if (event_times.empty())  // all censored: fall back to observed times
    for (const auto& s : dataset.subjects) event_times.push_back(s.x);

  std::vector<int> counts(dataset.k);
  if (config.n_interior_per_cause) {
    if (static_cast<int>(config.n_interior_per_cause->size()) != dataset.k)
      throw std::invalid_argument(
          "FitConfig: n_interior_per_cause length must equal k");
    counts = *config.n_interior_per_cause;
  } else {
    const int shared = config.n_interior
                           ? *config.n_interior
                           : default_knot_count(dataset.n(),
                                                config.smoothness_p);
    std::fill(counts.begin(), counts.end(), shared);
  }

  std::vector<KnotVector> knots;
  knots.reserve(dataset.k);
  for (int j = 0; j < dataset.k; ++j)
    knots.push_back(
        make_knots(event_times, counts[j], config.order, dataset.tau));
  return knots;
}

namespace {

// Nelson-Aalen step estimate for cause j at the distinct observed times,
// treating observed causes as true.
std::vector<double> nelson_aalen(const Dataset& dataset, int cause,
                                 const std::vector<double>& times) {
  std::vector<double> x_sorted;
  x_sorted.reserve(dataset.n());
  for (const auto& s : dataset.subjects) x_sorted.push_back(s.x);
  std::sort(x_sorted.begin(), x_sorted.end());

  std::vector<double> cumhaz(times.size(), 0.0);
  double running = 0.0;
  for (std::size_t l = 0; l < times.size(); ++l) {
    const double t = times[l];
    long events_at_t = 0;
    for (const auto& s : dataset.subjects)
      if (s.x == t && s.observed_cause() == cause) ++events_at_t;
    if (events_at_t > 0) {
      const auto at_risk =
          x_sorted.end() -
          std::lower_bound(x_sorted.begin(), x_sorted.end(), t);
      running += static_cast<double>(events_at_t) /
                 static_cast<double>(at_risk);
    }
    cumhaz[l] = running;
  }
  return cumhaz;
}

Eigen::VectorXd flat_fallback_coefficients(int dim) {
  Eigen::VectorXd coef(dim);
  const double lo = std::log(1e-4);
  for (int s = 0; s < dim; ++s)
    coef[s] = lo + 0.5 * static_cast<double>(s) / std::max(1, dim - 1);
  return coef;
}

// least-squares spline coefficients for targets g at points t, with a
// small ridge for stability
Eigen::VectorXd ls_spline_fit(const KnotVector& knots,
                              const std::vector<double>& t,
                              const std::vector<double>& g) {
  const int dim = knots.dimension();
  const auto n_pts = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd design(n_pts, dim);
  for (Eigen::Index i = 0; i < n_pts; ++i) design.row(i) = basis(knots, t[i]);
  Eigen::MatrixXd normal = design.transpose() * design;
  normal.diagonal().array() += 1e-8 * (1.0 + normal.trace() / dim);
  const Eigen::VectorXd rhs =
      design.transpose() *
      Eigen::Map<const Eigen::VectorXd>(g.data(), n_pts);
  return normal.ldlt().solve(rhs);
}

Eigen::VectorXd strictly_increasing(Eigen::VectorXd coef) {
  const double span = coef.maxCoeff() - coef.minCoeff();
  const double step = 1e-4 * (1.0 + std::abs(span));
  for (Eigen::Index s = 1; s < coef.size(); ++s)
    coef[s] = std::max(coef[s], coef[s - 1] + step);
  return coef;
}

}  // namespace

Theta initialize(const Dataset& dataset, const std::vector<KnotVector>& knots,
                 std::vector<std::string>* warnings) {
  if (static_cast<int>(knots.size()) != dataset.k)
    throw std::invalid_argument("initialize: one knot vector per cause");

  std::vector<double> times;
  times.reserve(dataset.n() + 2);
  for (const auto& s : dataset.subjects) times.push_back(s.x);
  times.push_back(0.0);
  times.push_back(dataset.tau);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  Theta theta;
  theta.knots = knots;
  for (int j = 0; j < dataset.k; ++j) {
    theta.beta.emplace_back(Eigen::VectorXd::Zero(dataset.p));

    long n_events = 0;
    for (const auto& s : dataset.subjects)
      if (s.observed_cause() == j + 1) ++n_events;

    Eigen::VectorXd coef;
    if (n_events == 0) {
      if (warnings)
        warnings->push_back("cause " + std::to_string(j + 1) +
                            " has no observed events; flat low-hazard "
                            "initialization used");
      coef = flat_fallback_coefficients(knots[j].dimension());
    } else {
      std::vector<double> cumhaz = nelson_aalen(dataset, j + 1, times);
      // floor at 1e-4 and make strictly increasing before taking logs
      double prev = 0.0;
      std::vector<double> target(times.size());
      for (std::size_t l = 0; l < times.size(); ++l) {
        double v = std::max(cumhaz[l], 1e-4);
        v = std::max(v, prev * (1.0 + 1e-10) + 1e-12);
        prev = v;
        target[l] = std::log(v);
      }
      coef = strictly_increasing(ls_spline_fit(knots[j], times, target));
    }
    theta.coeffs.emplace_back(unconstrain(coef));
  }
  return theta;
}

namespace {

FitResult run_fit(const Dataset& dataset, const FitConfig& config,
                  const MisclassModel* model, const Eigen::VectorXd* gamma,
                  const Theta* warm_start) {
  config.validate();
  if (dataset.n() == 0)
    throw std::invalid_argument("fit: dataset must be nonempty");

  FitResult result;
  result.tau = dataset.tau;
  result.eta = config.eta;
  const std::vector<KnotVector> knots = select_knots(dataset, config);
  result.knot_report = knots;

  if (model) {
    result.identifiability =
        identifiability_check(*model, *gamma, dataset, config.eta, 1);
    if (result.identifiability.warning)
      result.warnings.push_back(result.identifiability.message);
  }

  const FreeLayout layout = FreeLayout::make(knots, dataset.p);
  Eigen::VectorXd x0;
  bool warm_used = false;
  if (warm_start) {
    const Eigen::VectorXd packed = pack(*warm_start);
    if (packed.size() == layout.total) {
      x0 = packed;
      warm_used = true;
    }
  }
  if (!warm_used) x0 = pack(initialize(dataset, knots, &result.warnings));

  const LikelihoodEvaluator evaluator =
      model ? LikelihoodEvaluator(dataset, knots, *model, *gamma, config.eta)
            : LikelihoodEvaluator(dataset, knots);

  const ObjectiveFn objective = [&evaluator](const Eigen::VectorXd& x,
                                             Eigen::VectorXd* grad) {
    const LikelihoodValue v = evaluator.evaluate(x, grad != nullptr);
    if (grad) *grad = -v.grad;
    return -v.value;
  };

  {
    const LikelihoodValue at_init = evaluator.evaluate(x0, false);
    if (!at_init.finite)
      throw std::runtime_error(
          "fit: objective not finite at the starting value (subject " +
          std::to_string(at_init.bad_subject) + ")");
  }

  OptimOptions opt;
  opt.tol_grad = config.tol_grad;
  opt.tol_rel_obj = config.tol_rel_obj;
  opt.max_iter = config.max_iter;
  const OptimResult opt_result = minimize_bfgs(objective, x0, opt);

  result.theta = unpack(opt_result.x, knots, dataset.p);
  result.loglik = -opt_result.f;
  result.iterations = opt_result.iterations;
  result.grad_norm = opt_result.grad.cwiseAbs().maxCoeff();
  switch (opt_result.stop) {
    case StopReason::Gradient:
      result.stop_reason = "gradient";
      result.converged = true;
      break;
    case StopReason::Objective:
      result.stop_reason = "objective";
      result.converged = true;
      break;
    case StopReason::MaxIter:
      result.stop_reason = "max_iter";
      result.converged = false;
      result.warnings.push_back("maximum iterations reached");
      break;
    case StopReason::LineSearch:
      result.stop_reason = "line_search";
      result.converged = false;
      result.warnings.push_back("line search failed after restart");
      break;
  }
  result.objective_history.reserve(opt_result.objective_history.size());
  for (double f : opt_result.objective_history)
    result.objective_history.push_back(-f);

  const LikelihoodValue at_solution = evaluator.evaluate(opt_result.x, false);
  result.floored_terms = at_solution.floored_terms;
  if (result.floored_terms > 0)
    result.warnings.push_back(std::to_string(result.floored_terms) +
                              " event likelihood terms hit the 1e-300 floor");

  result.min_phi_deriv = std::numeric_limits<double>::infinity();
  for (int j = 0; j < dataset.k; ++j)
    for (int i = 0; i <= 1000; ++i) {
      const double t = dataset.tau * (i / 1000.0);
      result.min_phi_deriv =
          std::min(result.min_phi_deriv, phi_deriv(result.theta, j, t));
    }
  if (!(result.min_phi_deriv > 0.0))
    result.warnings.push_back(
        "fitted phi' is not strictly positive on the evaluation grid");

  return result;
}

}  // namespace

FitResult fit(const Dataset& dataset, const FitConfig& config,
              const MisclassModel& model, const Eigen::VectorXd& gamma,
              const Theta* warm_start) {
  return run_fit(dataset, config, &model, &gamma, warm_start);
}

FitResult fit_classical(const Dataset& dataset, const FitConfig& config,
                        const Theta* warm_start) {
  return run_fit(dataset, config, nullptr, nullptr, warm_start);
}

}  // namespace crrmisc
