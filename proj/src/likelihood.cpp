#include "crrmisc/likelihood.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace crrmisc {

namespace {
constexpr double kLogFloor = 1e-300;

double pairwise_sum_range(const double* data, std::size_t n) {
  if (n <= 32) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_range(data, half) +
         pairwise_sum_range(data + half, n - half);
}
}  // namespace

double pairwise_sum(const std::vector<double>& terms) {
  return terms.empty() ? 0.0 : pairwise_sum_range(terms.data(), terms.size());
}

FreeLayout FreeLayout::make(const std::vector<KnotVector>& knots, int p) {
  FreeLayout layout;
  layout.n_causes = static_cast<int>(knots.size());
  layout.p = p;
  int at = 0;
  for (const auto& kv : knots) {
    layout.beta_offset.push_back(at);
    at += p;
    layout.raw_offset.push_back(at);
    layout.spline_dim.push_back(kv.dimension());
    at += kv.dimension();
  }
  layout.total = at;
  return layout;
}

Eigen::VectorXd pack(const Theta& theta) {
  const int p = theta.beta.empty() ? 0 : static_cast<int>(theta.beta[0].size());
  const FreeLayout layout = FreeLayout::make(theta.knots, p);
  Eigen::VectorXd free(layout.total);
  for (int j = 0; j < layout.n_causes; ++j) {
    free.segment(layout.beta_offset[j], p) = theta.beta[j];
    free.segment(layout.raw_offset[j], layout.spline_dim[j]) =
        theta.coeffs[j].raw;
  }
  return free;
}

Theta unpack(const Eigen::VectorXd& free, const std::vector<KnotVector>& knots,
             int p) {
  const FreeLayout layout = FreeLayout::make(knots, p);
  if (free.size() != layout.total)
    throw std::invalid_argument("unpack: free vector length mismatch");
  Theta theta;
  theta.knots = knots;
  for (int j = 0; j < layout.n_causes; ++j) {
    theta.beta.push_back(free.segment(layout.beta_offset[j], p));
    theta.coeffs.emplace_back(
        free.segment(layout.raw_offset[j], layout.spline_dim[j]));
  }
  return theta;
}

double phi(const Theta& theta, int cause, double t) {
  return spline_value(theta.knots[cause], theta.coeffs[cause].constrained, t);
}

double phi_deriv(const Theta& theta, int cause, double t) {
  return spline_deriv(theta.knots[cause], theta.coeffs[cause].constrained, t);
}

LikelihoodEvaluator::LikelihoodEvaluator(const Dataset& dataset,
                                         std::vector<KnotVector> knots,
                                         const MisclassModel& model,
                                         Eigen::VectorXd gamma, double eta)
    : knots_(std::move(knots)) {
  model.validate();
  build_caches(dataset, &model, &gamma, eta);
}

LikelihoodEvaluator::LikelihoodEvaluator(const Dataset& dataset,
                                         std::vector<KnotVector> knots)
    : knots_(std::move(knots)), bypass_(true) {
  build_caches(dataset, nullptr, nullptr, 0.0);
}

void LikelihoodEvaluator::build_caches(const Dataset& dataset,
                                       const MisclassModel* model,
                                       const Eigen::VectorXd* gamma,
                                       double eta) {
  n_ = dataset.n();
  k_ = dataset.k;
  if (static_cast<int>(knots_.size()) != k_)
    throw std::invalid_argument(
        "LikelihoodEvaluator: one knot vector per cause required");
  layout_ = FreeLayout::make(knots_, dataset.p);

  z_.resize(n_, dataset.p);
  observed_cause_.resize(n_);
  bas_.assign(k_, Eigen::MatrixXd());
  der_.assign(k_, Eigen::MatrixXd());
  for (int h = 0; h < k_; ++h) {
    bas_[h].setZero(n_, knots_[h].dimension());
    der_[h].setZero(n_, knots_[h].dimension());
  }
  if (!bypass_) pi_obs_.setZero(n_, k_);

  Eigen::VectorXd local;
  for (int i = 0; i < n_; ++i) {
    const Subject& subj = dataset.subjects[i];
    z_.row(i) = subj.z;
    observed_cause_[i] = subj.observed_cause();
    for (int h = 0; h < k_; ++h) {
      int first = 0;
      basis_local(knots_[h], subj.x, first, local);
      bas_[h].row(i).segment(first, knots_[h].order) = local;
      basis_deriv_local(knots_[h], subj.x, first, local);
      der_[h].row(i).segment(first, knots_[h].order) = local;
    }
    if (!bypass_ && observed_cause_[i] > 0) {
      const Eigen::MatrixXd pi = classification_matrix(
          *model, *gamma, subj.x, subj.z, subj.z_extra, eta, 1);
      pi_obs_.row(i) = pi.row(observed_cause_[i] - 1);
    }
  }
}

LikelihoodValue LikelihoodEvaluator::evaluate(const Eigen::VectorXd& free,
                                              bool want_grad) const {
  LikelihoodValue out;
  if (free.size() != layout_.total)
    throw std::invalid_argument("evaluate: free vector length mismatch");

  const int p = layout_.p;
  std::vector<Eigen::VectorXd> beta(k_), raw(k_), coef(k_);
  std::vector<Eigen::VectorXd> cumhaz(k_), dphi(k_), lam(k_);
  for (int h = 0; h < k_; ++h) {
    beta[h] = free.segment(layout_.beta_offset[h], p);
    raw[h] = free.segment(layout_.raw_offset[h], layout_.spline_dim[h]);
    coef[h] = constrain(raw[h]);
    const Eigen::VectorXd phi_vals = bas_[h] * coef[h];
    dphi[h] = der_[h] * coef[h];
    cumhaz[h] = (phi_vals + z_ * beta[h]).array().exp();
    lam[h] = cumhaz[h].cwiseProduct(dphi[h]);
    if (!cumhaz[h].allFinite()) {
      out.finite = false;
      for (int i = 0; i < n_; ++i)
        if (!std::isfinite(cumhaz[h][i])) {
          out.bad_subject = i;
          break;
        }
      out.value = -std::numeric_limits<double>::infinity();
      return out;
    }
  }

  std::vector<double> terms(n_);
  Eigen::VectorXd event_weight = Eigen::VectorXd::Zero(n_);  // Delta_i / D_i
  for (int i = 0; i < n_; ++i) {
    double term = 0.0;
    for (int h = 0; h < k_; ++h) term -= cumhaz[h][i];
    const int obs = observed_cause_[i];
    if (obs > 0) {
      if (bypass_) {
        // classical route: log lambda_j = phi_j + beta_j' z + log phi_j'
        const double d = dphi[obs - 1][i];
        if (!(d > 0.0)) {
          out.finite = false;
          out.bad_subject = i;
          out.value = -std::numeric_limits<double>::infinity();
          return out;
        }
        term += std::log(cumhaz[obs - 1][i]) + std::log(d);
      } else {
        double mix = 0.0;
        for (int h = 0; h < k_; ++h) mix += lam[h][i] * pi_obs_(i, h);
        if (!std::isfinite(mix)) {
          out.finite = false;
          out.bad_subject = i;
          out.value = -std::numeric_limits<double>::infinity();
          return out;
        }
        if (mix < kLogFloor) {
          mix = kLogFloor;
          ++out.floored_terms;
        } else {
          event_weight[i] = 1.0 / mix;
        }
        term += std::log(mix);
      }
    }
    terms[i] = term;
  }
  out.value = pairwise_sum(terms);
  if (!std::isfinite(out.value)) {
    out.finite = false;
    for (int i = 0; i < n_; ++i)
      if (!std::isfinite(terms[i])) {
        out.bad_subject = i;
        break;
      }
    return out;
  }
  if (!want_grad) return out;

  out.grad.setZero(layout_.total);
  for (int h = 0; h < k_; ++h) {
    Eigen::VectorXd grad_coef;
    Eigen::VectorXd u;
    if (bypass_) {
      Eigen::VectorXd event = Eigen::VectorXd::Zero(n_);
      Eigen::VectorXd event_over_d = Eigen::VectorXd::Zero(n_);
      for (int i = 0; i < n_; ++i)
        if (observed_cause_[i] == h + 1) {
          event[i] = 1.0;
          event_over_d[i] = 1.0 / dphi[h][i];
        }
      u = event - cumhaz[h];
      grad_coef = bas_[h].transpose() * u + der_[h].transpose() * event_over_d;
    } else {
      const Eigen::VectorXd w = event_weight.cwiseProduct(pi_obs_.col(h));
      u = w.cwiseProduct(lam[h]) - cumhaz[h];
      grad_coef = bas_[h].transpose() * u +
                  der_[h].transpose() * w.cwiseProduct(cumhaz[h]);
    }
    out.grad.segment(layout_.beta_offset[h], p) = z_.transpose() * u;
    out.grad.segment(layout_.raw_offset[h], layout_.spline_dim[h]) =
        constrain_chain(raw[h], grad_coef);
  }
  return out;
}

namespace {
LikelihoodValue eval_or_throw(const LikelihoodEvaluator& ev,
                              const Theta& theta, bool want_grad) {
  const LikelihoodValue v = ev.evaluate(pack(theta), want_grad);
  if (!v.finite)
    throw std::runtime_error(
        "log pseudo-likelihood is not finite at subject index " +
        std::to_string(v.bad_subject));
  return v;
}
}  // namespace

double log_pseudo_likelihood(const Dataset& dataset, const Theta& theta,
                             const MisclassModel& model,
                             const Eigen::VectorXd& gamma, double eta) {
  LikelihoodEvaluator ev(dataset, theta.knots, model, gamma, eta);
  return eval_or_throw(ev, theta, false).value;
}

Eigen::VectorXd pseudo_gradient(const Dataset& dataset, const Theta& theta,
                                const MisclassModel& model,
                                const Eigen::VectorXd& gamma, double eta) {
  LikelihoodEvaluator ev(dataset, theta.knots, model, gamma, eta);
  return eval_or_throw(ev, theta, true).grad;
}

double log_likelihood_classical(const Dataset& dataset, const Theta& theta) {
  LikelihoodEvaluator ev(dataset, theta.knots);
  return eval_or_throw(ev, theta, false).value;
}

Eigen::VectorXd classical_gradient(const Dataset& dataset,
                                   const Theta& theta) {
  LikelihoodEvaluator ev(dataset, theta.knots);
  return eval_or_throw(ev, theta, true).grad;
}

}  // namespace crrmisc
