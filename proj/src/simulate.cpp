#include "crrmisc/simulate.hpp"

#include <cmath>
#include <stdexcept>

#include "crrmisc/inference.hpp"

namespace crrmisc {

Scenario Scenario::standard(int id, double gamma0) {
  Scenario sc;
  switch (id) {
    case 1:
      sc.transform = TimeTransform::Linear;
      break;
    case 2:
      sc.transform = TimeTransform::Log;
      break;
    case 3:
      sc.transform = TimeTransform::Quadratic;
      break;
    default:
      throw std::invalid_argument("Scenario: id must be 1, 2, or 3");
  }
  sc.gamma0 = gamma0;
  return sc;
}

double hazard1(const Scenario& sc, double z, double t) {
  (void)t;
  return sc.base1 * std::exp(sc.beta1 * z);
}

double hazard2(const Scenario& sc, double z, double t) {
  return sc.base2 * std::exp(sc.growth2 * t) * std::exp(sc.beta2 * z);
}

double total_cumulative_hazard(const Scenario& sc, double z, double t) {
  return sc.base1 * std::exp(sc.beta1 * z) * t +
         sc.base2 / sc.growth2 * std::exp(sc.beta2 * z) *
             (std::exp(sc.growth2 * t) - 1.0);
}

double invert_total_hazard(const Scenario& sc, double z, double u) {
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("invert_total_hazard: u must be in (0,1)");
  const double target = -std::log(u);
  double lo = 0.0;
  double hi = 50.0;
  // Newton from a crude linear guess, safeguarded by the bracket
  const double slope0 =
      sc.base1 * std::exp(sc.beta1 * z) + sc.base2 * std::exp(sc.beta2 * z);
  double t = std::min(target / slope0, 1.0);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = total_cumulative_hazard(sc, z, t) - target;
    if (std::isfinite(f) && std::abs(f) <= 1e-10) return t;
    if (std::isfinite(f)) {
      if (f > 0.0)
        hi = t;
      else
        lo = t;
      const double deriv = hazard1(sc, z, t) + hazard2(sc, z, t);
      const double t_newton = t - f / deriv;
      t = (t_newton > lo && t_newton < hi) ? t_newton : 0.5 * (lo + hi);
    } else {
      hi = t;
      t = 0.5 * (lo + hi);
    }
  }
  return t;
}

double cause1_probability(const Scenario& sc, double z, double t) {
  const double l1 = hazard1(sc, z, t);
  return l1 / (l1 + hazard2(sc, z, t));
}

int assign_cause(const Scenario& sc, double z, double t, Rng& rng) {
  return rng.uniform() < cause1_probability(sc, z, t) ? 1 : 2;
}

double misclassify_probability(const Scenario& sc, double t, double z) {
  double g = t;
  switch (sc.transform) {
    case Scenario::TimeTransform::Linear:
      g = t;
      break;
    case Scenario::TimeTransform::Log:
      g = std::log(std::max(t, 1e-12));
      break;
    case Scenario::TimeTransform::Quadratic:
      g = t * t;
      break;
  }
  return expit(sc.gamma0 + sc.time_slope * g + sc.cov_slope * z);
}

int apply_misclassification(const Scenario& sc, int true_cause, double t,
                            double z, Rng& rng) {
  if (true_cause == 1) return 1;  // unidirectional: cause 1 never flips
  return rng.uniform() < misclassify_probability(sc, t, z) ? 1 : 2;
}

GeneratedData generate_dataset(const Scenario& sc, int n,
                               std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  Rng rng(seed, Rng::stream_key(0, "generate"));
  GeneratedData out;
  out.true_causes.resize(n);
  std::vector<Subject> subjects(n);
  for (int i = 0; i < n; ++i) {
    const double z = sc.cov_mean + sc.cov_sd * rng.normal();
    const double t_fail = invert_total_hazard(sc, z, rng.uniform());
    const double t_cens = rng.uniform(0.0, sc.censor_hi);
    const int true_cause = assign_cause(sc, z, t_fail, rng);
    out.true_causes[i] = true_cause;

    Subject& subj = subjects[i];
    subj.z = Eigen::VectorXd::Constant(1, z);
    subj.deltas.assign(2, 0);
    if (t_fail <= t_cens) {
      subj.x = t_fail;
      const int observed =
          apply_misclassification(sc, true_cause, t_fail, z, rng);
      subj.deltas[observed - 1] = 1;
    } else {
      subj.x = t_cens;
    }
  }
  out.data = Dataset::from_subjects(std::move(subjects));
  return out;
}

MisclassModel analysis_misclass_model() {
  DesignTerm intercept;
  intercept.kind = DesignTerm::Kind::Intercept;
  DesignTerm time;
  time.kind = DesignTerm::Kind::Time;
  DesignTerm covariate;
  covariate.kind = DesignTerm::Kind::Covariate;
  covariate.covariate_index = 0;
  return MisclassModel::unidirectional_2cause({intercept, time, covariate});
}

Eigen::VectorXd analysis_gamma(const Scenario& sc) {
  Eigen::VectorXd gamma(3);
  gamma << sc.gamma0, sc.time_slope, sc.cov_slope;
  return gamma;
}

StudySummary run_study(const Scenario& sc, int n, int replications,
                       int n_boot, const FitConfig& config,
                       std::uint64_t seed) {
  if (replications < 1)
    throw std::invalid_argument("run_study: replications must be >= 1");

  const MisclassModel model = analysis_misclass_model();
  const Eigen::VectorXd gamma = analysis_gamma(sc);
  GammaEstimate gamma_est;  // gamma held fixed: omega = 0
  gamma_est.gamma_hat = gamma;
  gamma_est.omega_hat = Eigen::MatrixXd::Zero(3, 3);
  gamma_est.design_spec = model;

  StudySummary summary;
  summary.replications = replications;
  summary.seed = seed;

  std::vector<double> beta_hat[2];
  std::vector<double> se_hat[2];
  std::vector<int> covered[2];
  const double truth[2] = {sc.beta1, sc.beta2};

  for (int r = 1; r <= replications; ++r) {
    const std::uint64_t rep_seed = seed ^ Rng::stream_key(r, "replicate");
    const GeneratedData gen = generate_dataset(sc, n, rep_seed);
    try {
      const FitResult res = fit(gen.data, config, model, gamma);
      if (!res.converged) throw std::runtime_error("fit did not converge");
      if (n_boot > 0) {
        const BootstrapResult boot =
            bootstrap_variance(gen.data, config, model, gamma_est, n_boot,
                               rep_seed ^ Rng::stream_key(r, "bootstrap"),
                               &res.theta);
        for (int j = 0; j < 2; ++j) {
          const double se = boot.se[j];  // p = 1: coordinate j is cause j+1
          se_hat[j].push_back(se);
          const auto [lo, hi] = normal_interval(res.theta.beta[j][0], se);
          covered[j].push_back(truth[j] >= lo && truth[j] <= hi ? 1 : 0);
        }
      }
      for (int j = 0; j < 2; ++j) beta_hat[j].push_back(res.theta.beta[j][0]);
      ++summary.converged;
    } catch (const std::exception&) {
      ++summary.failed;
    }
  }

  for (int j = 0; j < 2; ++j) {
    StudySummary::Coefficient coef;
    coef.cause = j + 1;
    coef.true_value = truth[j];
    const auto m = static_cast<double>(beta_hat[j].size());
    if (m > 0) {
      coef.mean = pairwise_sum(beta_hat[j]) / m;
      coef.bias_pct = 100.0 * (coef.mean - truth[j]) / truth[j];
      if (m >= 2) {
        double ss = 0.0;
        for (double b : beta_hat[j]) ss += (b - coef.mean) * (b - coef.mean);
        coef.mcsd = std::sqrt(ss / (m - 1.0));
      }
      if (!se_hat[j].empty()) {
        coef.ase = pairwise_sum(se_hat[j]) / se_hat[j].size();
        double cov_sum = 0.0;
        for (int c : covered[j]) cov_sum += c;
        coef.coverage = cov_sum / covered[j].size();
      }
    }
    summary.coefficients.push_back(coef);
  }
  return summary;
}

}  // namespace crrmisc
