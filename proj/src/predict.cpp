#include "crrmisc/predict.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crrmisc {

namespace {
void check_z(const FitResult& fit, const Eigen::VectorXd& z) {
  if (!fit.theta.beta.empty() && z.size() != fit.theta.beta[0].size())
    throw std::invalid_argument("predict: covariate dimension mismatch");
}
}  // namespace

double cumulative_hazard(const FitResult& fit, int cause, double t,
                         const Eigen::VectorXd& z) {
  check_z(fit, z);
  if (cause < 1 || cause > fit.theta.n_causes())
    throw std::invalid_argument("predict: cause out of range");
  return std::exp(phi(fit.theta, cause - 1, t) +
                  fit.theta.beta[cause - 1].dot(z));
}

double survival(const FitResult& fit, double t, const Eigen::VectorXd& z) {
  check_z(fit, z);
  double total = 0.0;
  for (int j = 1; j <= fit.theta.n_causes(); ++j)
    total += cumulative_hazard(fit, j, t, z) -
             cumulative_hazard(fit, j, 0.0, z);
  return std::exp(-total);
}

CifCurve cif(const FitResult& fit, int cause, const Eigen::VectorXd& z,
             const std::vector<double>& grid, int min_panels) {
  check_z(fit, z);
  if (cause < 1 || cause > fit.theta.n_causes())
    throw std::invalid_argument("predict: cause out of range");
  if (grid.empty()) throw std::invalid_argument("cif: empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= fit.tau))
      throw std::domain_error("cif: grid point outside [0, tau]");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw std::invalid_argument("cif: grid must be strictly increasing");
  }

  CifCurve curve;
  curve.cause = cause;
  curve.z = z;
  curve.grid = grid;
  curve.values.assign(grid.size(), 0.0);
  const double t_max = grid.back();
  if (t_max == 0.0) return curve;

  // union of the requested grid and a uniform refinement
  std::vector<double> pts;
  pts.reserve(grid.size() + min_panels + 1);
  for (int i = 0; i <= min_panels; ++i)
    pts.push_back(t_max * (static_cast<double>(i) / min_panels));
  pts.insert(pts.end(), grid.begin(), grid.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  const int jc = cause - 1;
  const int k = fit.theta.n_causes();
  std::vector<double> beta_z(k), anchor(k);
  for (int j = 0; j < k; ++j) {
    beta_z[j] = fit.theta.beta[j].dot(z);
    anchor[j] = std::exp(phi(fit.theta, j, 0.0) + beta_z[j]);
  }
  const auto integrand = [&](double s) {
    double total = 0.0;
    double lambda = 0.0;
    for (int j = 0; j < k; ++j) {
      const double cumhaz = std::exp(phi(fit.theta, j, s) + beta_z[j]);
      total += cumhaz - anchor[j];
      if (j == jc) lambda = cumhaz * phi_deriv(fit.theta, j, s);
    }
    return std::exp(-total) * lambda;
  };

  std::size_t next_out = 0;
  double acc = 0.0;
  double prev_t = pts.front();
  double prev_f = integrand(prev_t);
  if (grid[next_out] == prev_t) curve.values[next_out++] = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double cur_t = pts[i];
    const double cur_f = integrand(cur_t);
    acc += 0.5 * (cur_t - prev_t) * (prev_f + cur_f);
    if (next_out < grid.size() && grid[next_out] == cur_t)
      curve.values[next_out++] = acc;
    prev_t = cur_t;
    prev_f = cur_f;
  }
  return curve;
}

}  // namespace crrmisc
