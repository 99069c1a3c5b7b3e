#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "crrmisc/likelihood.hpp"
#include "test_helpers.hpp"

using namespace crrmisc;
using test_util::default_knots;
using test_util::linear_theta;
using test_util::random_theta;

namespace {

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

Dataset one_subject(double x, int cause, double z, double tau_pad = 2.0) {
  Subject s;
  s.x = x;
  s.deltas.assign(2, 0);
  if (cause > 0) s.deltas[cause - 1] = 1;
  s.z = vec1(z);
  Subject pad;  // censored subject fixing tau
  pad.x = tau_pad;
  pad.deltas.assign(2, 0);
  pad.z = vec1(0.0);
  return Dataset::from_subjects({s, pad});
}

// model with pi*_{11} = 1 structurally and pi*_{12} = p12 constant
MisclassModel constant_p12_model(double p12) {
  DesignTerm intercept;
  intercept.kind = DesignTerm::Kind::Intercept;
  return MisclassModel::unidirectional_2cause({intercept});
  (void)p12;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

TEST_SUITE("likelihood") {

TEST_CASE("pack/unpack round-trips exactly") {
  Rng rng(21);
  const Scenario sc = Scenario::standard(1, -2.0);
  const Dataset data = generate_dataset(sc, 40, 5).data;
  const auto knots = default_knots(data, 2);
  const Theta theta = random_theta(knots, data.p, rng);
  const Eigen::VectorXd packed = pack(theta);
  const Theta back = unpack(packed, knots, data.p);
  const Eigen::VectorXd repacked = pack(back);
  REQUIRE(packed.size() == repacked.size());
  for (int i = 0; i < packed.size(); ++i) CHECK(packed[i] == repacked[i]);
  for (int j = 0; j < 2; ++j)
    for (int s = 0; s < back.coeffs[j].constrained.size(); ++s)
      CHECK(back.coeffs[j].constrained[s] ==
            theta.coeffs[j].constrained[s]);
}

TEST_CASE("phi: order-1 spline with a single coefficient is constant") {
  Theta theta;
  KnotVector kv;
  kv.boundary_high = 2.0;
  kv.order = 1;
  theta.knots = {kv, kv};
  theta.coeffs.emplace_back(Eigen::VectorXd::Constant(1, -0.7));
  theta.coeffs.emplace_back(Eigen::VectorXd::Constant(1, 0.3));
  theta.beta.assign(2, Eigen::VectorXd::Zero(1));
  for (double t : {0.0, 0.5, 1.7, 2.0}) {
    CHECK(phi(theta, 0, t) == doctest::Approx(-0.7));
    CHECK(phi(theta, 1, t) == doctest::Approx(0.3));
  }
}

TEST_CASE("phi: nondecreasing and consistent with phi_deriv") {
  Rng rng(31);
  const Scenario sc = Scenario::standard(1, -2.0);
  const Dataset data = generate_dataset(sc, 60, 6).data;
  const auto knots = default_knots(data, 3);
  const Theta theta = random_theta(knots, data.p, rng);
  double prev = -1e300;
  for (int g = 0; g <= 200; ++g) {
    const double t = data.tau * (g / 200.0);
    const double v = phi(theta, 0, t);
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
  const double h = 1e-6;
  for (int rep = 0; rep < 20; ++rep) {
    const double t = rng.uniform(2.0 * h, data.tau - 2.0 * h);
    const double fd =
        (phi(theta, 1, t + h) - phi(theta, 1, t - h)) / (2.0 * h);
    const double an = phi_deriv(theta, 1, t);
    CHECK(std::abs(an - fd) / std::max(1.0, std::abs(fd)) <= 1e-5);
  }
}

TEST_CASE("objective: censored subject contributes -sum Lambda") {
  // phi_j(1) = 0 so Lambda_j(1) = 1 for both causes; x = 1, z = 0
  const Theta theta = linear_theta(2, 1, 2.0, 0.0, 1.0, 1.0);
  const Dataset data = one_subject(1.0, 0, 0.0);
  const MisclassModel identity = MisclassModel::identity(2);
  const double ll =
      log_pseudo_likelihood(data, theta, identity, Eigen::VectorXd(), 0.0);
  // the padding subject at x = 2 adds its own censored term
  const double pad_term = -2.0 * std::exp(phi(theta, 0, 2.0));
  CHECK(ll - pad_term == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("objective: identity-mechanism event term") {
  // lambda_j(1) = 1 and Lambda_j(1) = 1: log(1) - 2 = -2
  const Theta theta = linear_theta(2, 1, 2.0, 0.0, 1.0, 1.0);
  const Dataset data = one_subject(1.0, 1, 0.0);
  const MisclassModel identity = MisclassModel::identity(2);
  const double ll =
      log_pseudo_likelihood(data, theta, identity, Eigen::VectorXd(), 0.0);
  const double pad_term = -2.0 * std::exp(phi(theta, 0, 2.0));
  CHECK(ll - pad_term == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("objective: mixture event term, hand-evaluated") {
  // pi*_{11} = 1, pi*_{12} = 0.3, lambda_1 = lambda_2 = 1, Lambda_j = 1:
  // log(1*1 + 1*0.3) - 2
  const Theta theta = linear_theta(2, 1, 2.0, 0.0, 1.0, 1.0);
  const Dataset data = one_subject(1.0, 1, 0.0);
  const MisclassModel model = constant_p12_model(0.3);
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(1, logit(0.3));
  const double ll = log_pseudo_likelihood(data, theta, model, gamma, 0.0);
  const double pad_term = -2.0 * std::exp(phi(theta, 0, 2.0));
  CHECK(ll - pad_term ==
        doctest::Approx(std::log(1.3) - 2.0).epsilon(1e-12));
}

TEST_CASE("gradient: matches central finite differences") {
  const Scenario sc = Scenario::standard(1, -2.0);
  const Dataset data = generate_dataset(sc, 50, 77).data;
  const auto knots = default_knots(data, 2);
  const MisclassModel model = analysis_misclass_model();
  const Eigen::VectorXd gamma = analysis_gamma(sc);
  const LikelihoodEvaluator ev(data, knots, model, gamma, 0.1);

  Rng rng(41);
  for (int rep = 0; rep < 5; ++rep) {
    const Theta theta = random_theta(knots, data.p, rng);
    const Eigen::VectorXd x = pack(theta);
    const LikelihoodValue at_x = ev.evaluate(x, true);
    REQUIRE(at_x.finite);
    const double h = 1e-6;
    for (int c = 0; c < x.size(); ++c) {
      Eigen::VectorXd hi = x, lo = x;
      hi[c] += h;
      lo[c] -= h;
      const double fd =
          (ev.evaluate(hi, false).value - ev.evaluate(lo, false).value) /
          (2.0 * h);
      CHECK(std::abs(at_x.grad[c] - fd) / std::max(1.0, std::abs(fd)) <=
            1e-5);
    }
  }
}

TEST_CASE("reduction: identity mechanism equals the classical likelihood") {
  const Scenario sc = Scenario::standard(1, -2.0);
  const Dataset data = generate_dataset(sc, 80, 8).data;
  const auto knots = default_knots(data, 2);
  const MisclassModel identity = MisclassModel::identity(2);
  Rng rng(51);
  for (int rep = 0; rep < 20; ++rep) {
    const Theta theta = random_theta(knots, data.p, rng);
    const double pseudo =
        log_pseudo_likelihood(data, theta, identity, Eigen::VectorXd(), 0.0);
    const double classical = log_likelihood_classical(data, theta);
    CHECK(std::abs(pseudo - classical) <= 1e-10);

    const Eigen::VectorXd g1 =
        pseudo_gradient(data, theta, identity, Eigen::VectorXd(), 0.0);
    const Eigen::VectorXd g2 = classical_gradient(data, theta);
    for (int c = 0; c < g1.size(); ++c)
      CHECK(std::abs(g1[c] - g2[c]) <=
            1e-9 * std::max(1.0, std::abs(g2[c])));
  }
}

TEST_CASE("eta continuity: eta = 0 reproduces the base objective bitwise") {
  const Scenario sc = Scenario::standard(1, -2.0);
  const Dataset data = generate_dataset(sc, 60, 9).data;
  const auto knots = default_knots(data, 2);
  const Eigen::VectorXd gamma = analysis_gamma(sc);

  MisclassModel with_shift = analysis_misclass_model();
  MisclassModel no_shift = analysis_misclass_model();
  no_shift.entries[0][1].eta_shift = false;

  Rng rng(61);
  const Theta theta = random_theta(knots, data.p, rng);
  const double base =
      log_pseudo_likelihood(data, theta, no_shift, gamma, 0.9);
  const double at_zero =
      log_pseudo_likelihood(data, theta, with_shift, gamma, 0.0);
  CHECK(base == at_zero);  // bit-identical

  // and the objective moves continuously in eta
  double prev = log_pseudo_likelihood(data, theta, with_shift, gamma, -0.5);
  for (double eta : {-0.25, 0.0, 0.25, 0.5}) {
    const double cur =
        log_pseudo_likelihood(data, theta, with_shift, gamma, eta);
    CHECK(std::abs(cur - prev) < 10.0);
    prev = cur;
  }
}

TEST_CASE("permutation invariance of the objective") {
  const Scenario sc = Scenario::standard(1, -2.0);
  const Dataset data = generate_dataset(sc, 150, 10).data;
  const auto knots = default_knots(data, 2);
  const MisclassModel model = analysis_misclass_model();
  const Eigen::VectorXd gamma = analysis_gamma(sc);
  Rng rng(71);
  const Theta theta = random_theta(knots, data.p, rng);
  const double base = log_pseudo_likelihood(data, theta, model, gamma, 0.0);

  std::vector<Subject> shuffled = data.subjects;
  std::mt19937 mt(12345);
  std::shuffle(shuffled.begin(), shuffled.end(), mt);
  const Dataset permuted = Dataset::from_subjects(shuffled);
  const double perm =
      log_pseudo_likelihood(permuted, theta, model, gamma, 0.0);
  CHECK(std::abs(base - perm) <= 1e-10 * (1.0 + std::abs(base)));
}

TEST_CASE("monotone sanity: an added censored subject lowers the "
          "objective by its cumulative hazards") {
  const Scenario sc = Scenario::standard(1, -2.0);
  const Dataset data = generate_dataset(sc, 50, 11).data;
  const auto knots = default_knots(data, 2);
  const MisclassModel model = analysis_misclass_model();
  const Eigen::VectorXd gamma = analysis_gamma(sc);
  Rng rng(81);
  const Theta theta = random_theta(knots, data.p, rng);
  const double base = log_pseudo_likelihood(data, theta, model, gamma, 0.0);

  Subject extra;
  extra.x = 0.5 * data.tau;
  extra.deltas.assign(2, 0);
  extra.z = vec1(0.25);
  std::vector<Subject> grown = data.subjects;
  grown.push_back(extra);
  const double with_extra = log_pseudo_likelihood(
      Dataset::from_subjects(grown), theta, model, gamma, 0.0);

  double expected_drop = 0.0;
  for (int j = 0; j < 2; ++j)
    expected_drop +=
        std::exp(phi(theta, j, extra.x) + theta.beta[j][0] * extra.z[0]);
  CHECK(with_extra < base);
  CHECK(with_extra - base ==
        doctest::Approx(-expected_drop).epsilon(1e-9));
}

TEST_CASE("floored event terms are counted and keep the value finite") {
  // cumulative hazards around exp(-760): the event mixture underflows
  Theta theta = linear_theta(2, 1, 2.0, -760.0, 1.0, 1.0);
  const Dataset data = one_subject(1.0, 1, 0.0);
  const auto knots = theta.knots;
  const MisclassModel identity = MisclassModel::identity(2);
  const LikelihoodEvaluator ev(data, knots, identity, Eigen::VectorXd(), 0.0);
  const LikelihoodValue v = ev.evaluate(pack(theta), true);
  CHECK(v.finite);
  CHECK(v.floored_terms == 1);
  CHECK(std::isfinite(v.value));
  CHECK(v.grad.allFinite());
}

TEST_CASE("non-finite objective names the offending subject") {
  // phi around +800 overflows exp
  const Theta theta = linear_theta(2, 1, 2.0, 800.0, 1.0, 1.0);
  const Dataset data = one_subject(1.0, 1, 0.0);
  const MisclassModel identity = MisclassModel::identity(2);
  CHECK_THROWS_WITH_AS(
      log_pseudo_likelihood(data, theta, identity, Eigen::VectorXd(), 0.0),
      doctest::Contains("subject"), std::runtime_error);
}

TEST_CASE("pairwise_sum: matches plain summation") {
  Rng rng(91);
  std::vector<double> terms(1000);
  long double ref = 0.0;
  for (auto& t : terms) {
    t = rng.uniform(-1.0, 1.0);
    ref += t;
  }
  CHECK(pairwise_sum(terms) ==
        doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
  CHECK(pairwise_sum({}) == 0.0);
}

}  // TEST_SUITE
