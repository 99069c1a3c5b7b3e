#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "crrmisc/predict.hpp"
#include "test_helpers.hpp"

using namespace crrmisc;
using test_util::linear_theta;

namespace {

// least-squares projection of a function onto a spline basis (test-only)
Eigen::VectorXd project_onto_spline(const KnotVector& kv,
                                    const std::vector<double>& pts,
                                    const std::vector<double>& values) {
  Eigen::MatrixXd design(pts.size(), kv.dimension());
  for (std::size_t i = 0; i < pts.size(); ++i)
    design.row(i) = basis(kv, pts[i]);
  const Eigen::VectorXd target =
      Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
  return design.colPivHouseholderQr().solve(target);
}

// FitResult with both causes' hazards analytically close to the constant
// 0.5: phi_j(t) = log(0.5 t + 0.001) projected onto a dense spline
FitResult constant_hazard_fit(double tau = 2.0) {
  KnotVector kv;
  kv.order = 4;
  kv.boundary_high = tau;
  kv.interior = {0.002, 0.005, 0.01, 0.02, 0.05, 0.1,
                 0.2,   0.35,  0.55, 0.8,  1.1,  1.5};
  std::vector<double> pts, values;
  for (int i = 0; i <= 4000; ++i) {
    const double t = tau * (i / 4000.0);
    pts.push_back(t);
    values.push_back(std::log(0.5 * t + 1e-3));
  }
  // extra weight near zero where the log curves hardest
  for (int i = 1; i <= 400; ++i) {
    const double t = 0.05 * (i / 400.0);
    pts.push_back(t);
    values.push_back(std::log(0.5 * t + 1e-3));
  }
  Eigen::VectorXd coef = project_onto_spline(kv, pts, values);
  for (int s = 1; s < coef.size(); ++s)  // enforce strict monotonicity
    coef[s] = std::max(coef[s], coef[s - 1] + 1e-9);

  FitResult fit;
  fit.tau = tau;
  fit.converged = true;
  for (int j = 0; j < 2; ++j) {
    fit.theta.knots.push_back(kv);
    fit.theta.coeffs.emplace_back(unconstrain(coef));
    fit.theta.beta.emplace_back(Eigen::VectorXd::Zero(1));
  }
  fit.knot_report = fit.theta.knots;
  return fit;
}

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

}  // namespace

TEST_SUITE("predict") {

TEST_CASE("cumulative_hazard: unit value when phi = 0, monotone, "
          "proportional in z") {
  // phi_j(1) = 0 at z = 0
  FitResult fit;
  fit.theta = linear_theta(2, 1, 2.0, 0.0, 1.0, 1.0);
  fit.theta.beta[0][0] = 0.7;
  fit.tau = 2.0;
  CHECK(cumulative_hazard(fit, 1, 1.0, vec1(0.0)) ==
        doctest::Approx(1.0).epsilon(1e-12));

  double prev = 0.0;
  for (int g = 0; g <= 100; ++g) {
    const double t = 2.0 * (g / 100.0);
    const double ch = cumulative_hazard(fit, 1, t, vec1(0.4));
    CHECK(ch >= prev);
    prev = ch;
  }

  const double base = cumulative_hazard(fit, 1, 1.3, vec1(1.0));
  const double doubled = cumulative_hazard(fit, 1, 1.3, vec1(2.0));
  CHECK(doubled / base == doctest::Approx(std::exp(0.7)).epsilon(1e-10));

  CHECK_THROWS_AS(cumulative_hazard(fit, 1, 2.5, vec1(0.0)),
                  std::domain_error);
  CHECK_THROWS_AS(cumulative_hazard(fit, 3, 1.0, vec1(0.0)),
                  std::invalid_argument);
}

TEST_CASE("cif: constant-hazard closed form") {
  const FitResult fit = constant_hazard_fit();
  const Eigen::VectorXd z = vec1(0.0);

  // sanity: the constructed hazards are flat at 0.5
  for (double t : {0.1, 0.5, 1.0, 1.5}) {
    const double lam = cumulative_hazard(fit, 1, t, z) *
                       phi_deriv(fit.theta, 0, t);
    CHECK(lam == doctest::Approx(0.5).epsilon(5e-3));
  }

  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(2.0 * (i / 20.0));
  const CifCurve curve = cif(fit, 1, z, grid);

  // F_1(1; 0) = 0.5 (1 - e^{-1})
  CHECK(std::abs(curve.values[10] - 0.31606027941427883) <= 1e-4);

  // F_j(0) = 0 and the curve is nondecreasing within [0, 1]
  CHECK(curve.values[0] == 0.0);
  for (std::size_t i = 1; i < curve.values.size(); ++i) {
    CHECK(curve.values[i] >= curve.values[i - 1]);
    CHECK(curve.values[i] <= 1.0);
  }
}

TEST_CASE("cif: probability decomposition on the full grid") {
  const FitResult fit = constant_hazard_fit();
  const Eigen::VectorXd z = vec1(0.0);
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(2.0 * (i / 40.0));
  const CifCurve f1 = cif(fit, 1, z, grid);
  const CifCurve f2 = cif(fit, 2, z, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double total =
        f1.values[i] + f2.values[i] + survival(fit, grid[i], z);
    CHECK(std::abs(total - 1.0) <= 1e-6);
  }
  // bounded by the all-cause failure probability
  const double bound = 1.0 - survival(fit, 2.0, z);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(f1.values[i] <= bound + 1e-9);
    CHECK(f2.values[i] <= bound + 1e-9);
  }
}

TEST_CASE("cif: decomposition holds for a fitted model too") {
  const Scenario sc = Scenario::standard(1, -2.0);
  const Dataset data = generate_dataset(sc, 300, 21).data;
  FitConfig cfg;
  const FitResult fit_res =
      fit(data, cfg, analysis_misclass_model(), analysis_gamma(sc));
  const Eigen::VectorXd z = vec1(1.0);
  std::vector<double> grid;
  for (int i = 0; i <= 25; ++i) grid.push_back(fit_res.tau * (i / 25.0));
  const CifCurve f1 = cif(fit_res, 1, z, grid);
  const CifCurve f2 = cif(fit_res, 2, z, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double total =
        f1.values[i] + f2.values[i] + survival(fit_res, grid[i], z);
    CHECK(std::abs(total - 1.0) <= 1e-6);
  }
}

TEST_CASE("cif: quadrature refinement is converged") {
  const FitResult fit = constant_hazard_fit();
  const Eigen::VectorXd z = vec1(0.0);
  const std::vector<double> grid = {2.0};
  const CifCurve coarse = cif(fit, 1, z, grid, 4000);
  const CifCurve fine = cif(fit, 1, z, grid, 8000);
  CHECK(std::abs(coarse.values[0] - fine.values[0]) < 1e-6);
}

TEST_CASE("cif: grid '0' yields a zero value") {
  const FitResult fit = constant_hazard_fit();
  const CifCurve curve = cif(fit, 1, vec1(0.0), {0.0});
  REQUIRE(curve.values.size() == 1);
  CHECK(curve.values[0] == 0.0);
}

TEST_CASE("cif: grid validation") {
  const FitResult fit = constant_hazard_fit();
  CHECK_THROWS_AS(cif(fit, 1, vec1(0.0), {0.0, 2.5}), std::domain_error);
  CHECK_THROWS_AS(cif(fit, 1, vec1(0.0), {0.5, 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(cif(fit, 1, vec1(0.0), {}), std::invalid_argument);
}

}  // TEST_SUITE
