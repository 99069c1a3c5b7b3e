#pragma once

#include <Eigen/Core>
#include <vector>

#include "crrmisc/model.hpp"

namespace crrmisc {

// Packing layout of the flat unconstrained parameter vector: per cause,
// beta_j followed by the raw spline coefficients.
struct FreeLayout {
  int n_causes = 0;
  int p = 0;
  std::vector<int> beta_offset;
  std::vector<int> raw_offset;
  std::vector<int> spline_dim;
  int total = 0;

  static FreeLayout make(const std::vector<KnotVector>& knots, int p);
};

Eigen::VectorXd pack(const Theta& theta);
Theta unpack(const Eigen::VectorXd& free, const std::vector<KnotVector>& knots,
             int p);

// log cumulative baseline hazard and its derivative at t
double phi(const Theta& theta, int cause, double t);
double phi_deriv(const Theta& theta, int cause, double t);

// Order-fixed pairwise (tree) summation; reproducible independent of any
// internal parallelism.
double pairwise_sum(const std::vector<double>& terms);

struct LikelihoodValue {
  double value = 0.0;
  Eigen::VectorXd grad;
  long floored_terms = 0;
  bool finite = true;
  int bad_subject = -1;
};

// Evaluates the misclassification-adjusted log pseudo-likelihood and its
// analytic gradient.  Basis values, design rows, and classification
// probabilities are cached at construction; evaluations are pure
// functions of the parameter vector and safe for concurrent use.
class LikelihoodEvaluator {
 public:
  LikelihoodEvaluator(const Dataset& dataset,
                      std::vector<KnotVector> knots,
                      const MisclassModel& model, Eigen::VectorXd gamma,
                      double eta);

  // classical competing-risks likelihood: misclassification layer bypassed
  LikelihoodEvaluator(const Dataset& dataset, std::vector<KnotVector> knots);

  LikelihoodValue evaluate(const Eigen::VectorXd& free, bool want_grad) const;

  const FreeLayout& layout() const { return layout_; }
  const std::vector<KnotVector>& knots() const { return knots_; }

 private:
  void build_caches(const Dataset& dataset, const MisclassModel* model,
                    const Eigen::VectorXd* gamma, double eta);

  std::vector<KnotVector> knots_;
  FreeLayout layout_;
  bool bypass_ = false;
  int n_ = 0;
  int k_ = 0;

  Eigen::MatrixXd z_;                  // n x p
  std::vector<int> observed_cause_;    // 0 = censored, else 1..k
  std::vector<Eigen::MatrixXd> bas_;   // per cause: n x dim
  std::vector<Eigen::MatrixXd> der_;   // per cause: n x dim
  Eigen::MatrixXd pi_obs_;             // n x k: pi*_{observed, h}(x_i, z_i)
};

// Spec-level entry points (construct an evaluator internally).  The
// pseudo-likelihood throws std::runtime_error naming the offending
// subject when the result is not finite.
double log_pseudo_likelihood(const Dataset& dataset, const Theta& theta,
                             const MisclassModel& model,
                             const Eigen::VectorXd& gamma, double eta = 0.0);
Eigen::VectorXd pseudo_gradient(const Dataset& dataset, const Theta& theta,
                                const MisclassModel& model,
                                const Eigen::VectorXd& gamma,
                                double eta = 0.0);
double log_likelihood_classical(const Dataset& dataset, const Theta& theta);
Eigen::VectorXd classical_gradient(const Dataset& dataset,
                                   const Theta& theta);

}  // namespace crrmisc
