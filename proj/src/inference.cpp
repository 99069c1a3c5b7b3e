#include "crrmisc/inference.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace crrmisc {

Eigen::VectorXd draw_gamma(const GammaEstimate& gamma, Rng& rng) {
  const Eigen::MatrixXd omega = gamma.clipped_omega();
  if (omega.size() == 0 || omega.cwiseAbs().maxCoeff() == 0.0)
    return gamma.gamma_hat;
  Eigen::LLT<Eigen::MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(
        "draw_gamma: Cholesky factorization failed after PSD clipping");
  Eigen::VectorXd xi(gamma.gamma_hat.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
  return gamma.gamma_hat + llt.matrixL() * xi;
}

Dataset resample(const Dataset& dataset, Rng& rng) {
  const int n = dataset.n();
  std::vector<Subject> picked;
  picked.reserve(n);
  for (int i = 0; i < n; ++i)
    picked.push_back(
        dataset.subjects[static_cast<std::size_t>(rng.below(n))]);
  return Dataset::from_subjects(std::move(picked));
}

Eigen::VectorXd bootstrap_replicate(const Dataset& dataset,
                                    const FitConfig& config,
                                    const MisclassModel& model,
                                    const GammaEstimate& gamma,
                                    std::uint64_t seed, int b,
                                    const Theta* point, bool& converged) {
  Rng gamma_rng(seed, Rng::stream_key(b, "gamma"));
  const Eigen::VectorXd gamma_b = draw_gamma(gamma, gamma_rng);
  Rng resample_rng(seed, Rng::stream_key(b, "resample"));
  const Dataset data_b = resample(dataset, resample_rng);
  const FitResult fit_b = fit(data_b, config, model, gamma_b, point);
  converged = fit_b.converged;
  Eigen::VectorXd stacked(data_b.k * data_b.p);
  for (int j = 0; j < data_b.k; ++j)
    stacked.segment(j * data_b.p, data_b.p) = fit_b.theta.beta[j];
  return stacked;
}

namespace {

BootstrapResult run_bootstrap(const Dataset& dataset, const FitConfig& config,
                              const MisclassModel& model,
                              const GammaEstimate& gamma, int n_boot,
                              std::uint64_t seed, const Theta* point) {
  if (n_boot < 2)
    throw std::invalid_argument("bootstrap: at least 2 replicates required");

  BootstrapResult result;
  result.seed = seed;
  const int dim = dataset.k * dataset.p;
  result.replicate_betas.setConstant(
      n_boot, dim, std::numeric_limits<double>::quiet_NaN());
  result.replicate_converged.assign(n_boot, false);

  // replicates warm start at the point estimate when available
  Theta warm;
  const Theta* warm_ptr = point;
  if (!warm_ptr) {
    const FitResult point_fit =
        fit(dataset, config, model, gamma.gamma_hat, nullptr);
    warm = point_fit.theta;
    warm_ptr = &warm;
  }

  for (int b = 1; b <= n_boot; ++b) {
    bool converged = false;
    try {
      const Eigen::VectorXd betas = bootstrap_replicate(
          dataset, config, model, gamma, seed, b, warm_ptr, converged);
      if (converged) {
        result.replicate_betas.row(b - 1) = betas;
        result.replicate_converged[b - 1] = true;
      }
    } catch (const std::exception&) {
      converged = false;
    }
    if (!converged) ++result.failures;
  }

  const int n_ok = n_boot - result.failures;
  if (result.failures > 0.2 * n_boot)
    throw std::runtime_error(
        "bootstrap: " + std::to_string(result.failures) + " of " +
        std::to_string(n_boot) + " replicates failed to converge");
  if (result.failures > 0)
    result.warnings.push_back(std::to_string(result.failures) + " of " +
                              std::to_string(n_boot) +
                              " bootstrap replicates failed and were "
                              "dropped");

  Eigen::MatrixXd ok_rows(n_ok, dim);
  int at = 0;
  for (int b = 0; b < n_boot; ++b)
    if (result.replicate_converged[b])
      ok_rows.row(at++) = result.replicate_betas.row(b);
  const Eigen::RowVectorXd mean = ok_rows.colwise().mean();
  const Eigen::MatrixXd centered = ok_rows.rowwise() - mean;
  result.sigma_hat = centered.transpose() * centered / (n_ok - 1);
  result.se = result.sigma_hat.diagonal().cwiseSqrt();
  return result;
}

}  // namespace

BootstrapResult bootstrap_variance(const Dataset& dataset,
                                   const FitConfig& config,
                                   const MisclassModel& model,
                                   const GammaEstimate& gamma, int n_boot,
                                   std::uint64_t seed, const Theta* point) {
  return run_bootstrap(dataset, config, model, gamma, n_boot, seed, point);
}

BootstrapResult plain_bootstrap(const Dataset& dataset,
                                const FitConfig& config,
                                const MisclassModel& model,
                                const Eigen::VectorXd& gamma, int n_boot,
                                std::uint64_t seed, const Theta* point) {
  GammaEstimate fixed;
  fixed.gamma_hat = gamma;
  fixed.omega_hat = Eigen::MatrixXd::Zero(gamma.size(), gamma.size());
  fixed.design_spec = model;
  return run_bootstrap(dataset, config, model, fixed, n_boot, seed, point);
}

std::pair<double, double> normal_interval(double estimate, double se) {
  return {estimate - 1.96 * se, estimate + 1.96 * se};
}

std::pair<double, double> percentile_interval(const Eigen::VectorXd& draws,
                                              double level) {
  std::vector<double> sorted(draws.data(), draws.data() + draws.size());
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&sorted](double p) {
    const auto n = static_cast<long>(sorted.size());
    const double h = p * static_cast<double>(n - 1);
    const auto lo = static_cast<long>(std::floor(h));
    if (lo >= n - 1) return sorted[n - 1];
    return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
  };
  const double alpha = (1.0 - level) / 2.0;
  return {quantile(alpha), quantile(1.0 - alpha)};
}

}  // namespace crrmisc
