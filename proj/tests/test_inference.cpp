#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "crrmisc/inference.hpp"
#include "test_helpers.hpp"

using namespace crrmisc;

namespace {

GammaEstimate fixed_gamma(const Eigen::VectorXd& gamma,
                          const Eigen::MatrixXd& omega) {
  GammaEstimate g;
  g.gamma_hat = gamma;
  g.omega_hat = omega;
  g.design_spec = analysis_misclass_model();
  return g;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("draw_gamma: zero omega returns gamma exactly") {
  const Eigen::Vector3d gamma(-2.0, -0.7, 0.8);
  const GammaEstimate g = fixed_gamma(gamma, Eigen::MatrixXd::Zero(3, 3));
  Rng rng(1);
  const Eigen::VectorXd draw = draw_gamma(g, rng);
  CHECK(draw == gamma);
}

TEST_CASE("draw_gamma: sample moments match N(gamma, I)") {
  const Eigen::Vector3d gamma(1.0, -1.0, 0.5);
  const GammaEstimate g = fixed_gamma(gamma, Eigen::MatrixXd::Identity(3, 3));
  Rng rng(2);
  const int n = 10000;
  Eigen::MatrixXd draws(n, 3);
  for (int i = 0; i < n; ++i) draws.row(i) = draw_gamma(g, rng);
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  for (int c = 0; c < 3; ++c)
    CHECK(std::abs(mean[c] - gamma[c]) <= 4.0 / std::sqrt(double(n)));
  const Eigen::MatrixXd centered = draws.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1.0);
  CHECK((cov - Eigen::MatrixXd::Identity(3, 3)).norm() <=
        0.1 * Eigen::MatrixXd::Identity(3, 3).norm());
}

TEST_CASE("draw_gamma: reproducible under a fixed stream") {
  const Eigen::Vector2d gamma(0.0, 1.0);
  Eigen::MatrixXd omega(2, 2);
  omega << 0.2, 0.05, 0.05, 0.1;
  const GammaEstimate g = fixed_gamma(gamma, omega);
  Rng a(77, 5), b(77, 5);
  CHECK(draw_gamma(g, a) == draw_gamma(g, b));
  Rng c(77, 6);
  CHECK(draw_gamma(g, c) != draw_gamma(g, a));
}

TEST_CASE("resample: singleton dataset maps to itself") {
  Subject s;
  s.x = 1.0;
  s.deltas = {1, 0};
  s.z = Eigen::VectorXd::Constant(1, 0.3);
  const Dataset data = Dataset::from_subjects({s});
  Rng rng(3);
  const Dataset back = resample(data, rng);
  CHECK(back.n() == 1);
  CHECK(back.subjects[0].x == 1.0);
}

TEST_CASE("resample: distinct fraction near 1 - 1/e, tau recomputed") {
  const Dataset data =
      generate_dataset(Scenario::standard(1, -2.0), 1000, 4).data;
  Rng rng(5);
  double total_fraction = 0.0;
  bool tau_changed = false;
  for (int rep = 0; rep < 500; ++rep) {
    const Dataset rs = resample(data, rng);
    std::set<double> seen;
    for (const auto& s : rs.subjects) seen.insert(s.x);
    total_fraction += static_cast<double>(seen.size()) / data.n();
    if (rs.tau != data.tau) tau_changed = true;
    CHECK(rs.tau <= data.tau);
  }
  CHECK(std::abs(total_fraction / 500.0 - 0.632) <= 0.02);
  CHECK(tau_changed);  // the max is dropped in some resamples
}

TEST_CASE("resample: deterministic under a fixed stream") {
  const Dataset data =
      generate_dataset(Scenario::standard(1, -2.0), 100, 6).data;
  Rng a(9, 1), b(9, 1);
  const Dataset ra = resample(data, a);
  const Dataset rb = resample(data, b);
  for (int i = 0; i < 100; ++i) CHECK(ra.subjects[i].x == rb.subjects[i].x);
}

TEST_CASE("bootstrap: B=2 equals the two-point covariance formula") {
  const Dataset data =
      generate_dataset(Scenario::standard(1, -2.0), 120, 7).data;
  FitConfig cfg;
  const MisclassModel model = analysis_misclass_model();
  const GammaEstimate g = fixed_gamma(
      analysis_gamma(Scenario::standard(1, -2.0)), Eigen::MatrixXd::Zero(3, 3));
  const BootstrapResult boot = bootstrap_variance(data, cfg, model, g, 2, 99);
  REQUIRE(boot.failures == 0);
  const Eigen::VectorXd d =
      boot.replicate_betas.row(0) - boot.replicate_betas.row(1);
  const Eigen::MatrixXd expected = 0.5 * d * d.transpose();
  CHECK((boot.sigma_hat - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("bootstrap: omega = 0 reduces to the plain bootstrap exactly") {
  const Scenario sc = Scenario::standard(1, -2.0);
  const Dataset data = generate_dataset(sc, 150, 8).data;
  FitConfig cfg;
  const MisclassModel model = analysis_misclass_model();
  const Eigen::VectorXd gamma = analysis_gamma(sc);
  const GammaEstimate g = fixed_gamma(gamma, Eigen::MatrixXd::Zero(3, 3));

  const BootstrapResult two_level =
      bootstrap_variance(data, cfg, model, g, 20, 1234);
  const BootstrapResult plain =
      plain_bootstrap(data, cfg, model, gamma, 20, 1234);
  REQUIRE(two_level.replicate_betas.rows() == plain.replicate_betas.rows());
  for (int b = 0; b < 20; ++b)
    for (int c = 0; c < 2; ++c)
      CHECK(two_level.replicate_betas(b, c) == plain.replicate_betas(b, c));
  CHECK(two_level.sigma_hat == plain.sigma_hat);
}

TEST_CASE("bootstrap: replicates are order independent") {
  const Scenario sc = Scenario::standard(1, -2.0);
  const Dataset data = generate_dataset(sc, 120, 9).data;
  FitConfig cfg;
  const MisclassModel model = analysis_misclass_model();
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(3, 3);
  omega(0, 0) = 0.04;
  omega(1, 1) = omega(2, 2) = 1e-4;
  const GammaEstimate g = fixed_gamma(analysis_gamma(sc), omega);

  const FitResult point = fit(data, cfg, model, g.gamma_hat);
  const BootstrapResult forward =
      bootstrap_variance(data, cfg, model, g, 12, 777, &point.theta);

  // reassemble the same replicates in reverse order
  Eigen::MatrixXd reversed(12, 2);
  for (int b = 12; b >= 1; --b) {
    bool conv = false;
    reversed.row(b - 1) = bootstrap_replicate(data, cfg, model, g, 777, b,
                                              &point.theta, conv);
    CHECK(conv);
  }
  for (int b = 0; b < 12; ++b)
    for (int c = 0; c < 2; ++c)
      CHECK(forward.replicate_betas(b, c) == reversed(b, c));
}

TEST_CASE("bootstrap: reported variance is nondecreasing in the omega "
          "scale") {
  const Scenario sc = Scenario::standard(1, -2.0);
  const Dataset data = generate_dataset(sc, 150, 10).data;
  FitConfig cfg;
  const MisclassModel model = analysis_misclass_model();
  Eigen::MatrixXd omega(3, 3);
  omega << 0.09, 0.0, 0.0, 0.0, 0.01, 0.0, 0.0, 0.0, 0.01;

  const FitResult point = fit(data, cfg, model, analysis_gamma(sc));
  std::vector<double> var_beta1;
  for (double c : {0.0, 1.0, 4.0}) {
    const GammaEstimate g = fixed_gamma(analysis_gamma(sc), c * omega);
    const BootstrapResult boot =
        bootstrap_variance(data, cfg, model, g, 200, 2025, &point.theta);
    var_beta1.push_back(boot.sigma_hat(0, 0));
  }
  CHECK(var_beta1[0] <= var_beta1[1] * 1.05);
  CHECK(var_beta1[1] <= var_beta1[2] * 1.05);
}

TEST_CASE("bootstrap: excessive failures raise an error") {
  const Scenario sc = Scenario::standard(1, -2.0);
  const Dataset data = generate_dataset(sc, 80, 11).data;
  FitConfig cfg;
  cfg.max_iter = 1;  // no replicate can converge
  cfg.tol_grad = 1e-14;
  cfg.tol_rel_obj = 1e-16;
  const GammaEstimate g =
      fixed_gamma(analysis_gamma(sc), Eigen::MatrixXd::Zero(3, 3));
  CHECK_THROWS_AS(
      bootstrap_variance(data, cfg, analysis_misclass_model(), g, 5, 31),
      std::runtime_error);
  CHECK_THROWS_AS(bootstrap_variance(data, FitConfig{},
                                     analysis_misclass_model(), g, 1, 31),
                  std::invalid_argument);
}

TEST_CASE("intervals: normal and percentile") {
  const auto [lo, hi] = normal_interval(1.0, 0.5);
  CHECK(lo == doctest::Approx(1.0 - 1.96 * 0.5));
  CHECK(hi == doctest::Approx(1.0 + 1.96 * 0.5));

  Eigen::VectorXd draws(101);
  for (int i = 0; i <= 100; ++i) draws[i] = i / 100.0;
  const auto [plo, phi_] = percentile_interval(draws, 0.95);
  CHECK(plo == doctest::Approx(0.025));
  CHECK(phi_ == doctest::Approx(0.975));
}

}  // TEST_SUITE
