#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "crrmisc/splines.hpp"

namespace crrmisc {

// One observation: observed time, observed (possibly misclassified) cause
// indicators, and covariates.  `z_extra` carries covariates used only by
// the misclassification design (empty in the common case).
struct Subject {
  double x = 0.0;
  std::vector<int> deltas;  // length k, 0/1, at most one equal to 1
  Eigen::VectorXd z;
  Eigen::VectorXd z_extra;

  // 0 = censored, otherwise 1-based observed cause
  int observed_cause() const;
};

struct Dataset {
  std::vector<Subject> subjects;
  int k = 0;
  int p = 0;
  double tau = 0.0;

  int n() const { return static_cast<int>(subjects.size()); }

  // Validates shared dimensions and computes tau = max x.
  static Dataset from_subjects(std::vector<Subject> subjects);
};

// Model parameters: per-cause regression coefficients and monotone spline
// coefficients for the log cumulative baseline hazards.
struct Theta {
  std::vector<Eigen::VectorXd> beta;         // k vectors of length p
  std::vector<SplineCoefficients> coeffs;    // k
  std::vector<KnotVector> knots;             // k

  int n_causes() const { return static_cast<int>(beta.size()); }
};

// One additive term of a misclassification design row.
struct DesignTerm {
  enum class Kind {
    Intercept,
    Time,
    LogTime,
    TimeSquared,
    PiecewiseLinearTime,  // columns: t, I(k1<=t<k2)(t-k1), ..., I(t>=km)(t-km)
    Covariate
  };
  Kind kind = Kind::Intercept;
  std::vector<double> knots;   // PiecewiseLinearTime only
  int covariate_index = -1;    // Covariate only
  bool from_extra = false;     // Covariate: indexes z_extra instead of z

  int n_columns() const {
    return kind == Kind::PiecewiseLinearTime
               ? static_cast<int>(knots.size()) + 1
               : 1;
  }
};

// Evaluates the design row w(t, z, z_extra) for a list of terms.
Eigen::VectorXd design_row(const std::vector<DesignTerm>& terms, double t,
                           const Eigen::VectorXd& z,
                           const Eigen::VectorXd& z_extra);

// One entry of the classification matrix.
struct MisclassEntry {
  enum class Type { Structural, Logit, Complement };
  Type type = Type::Structural;
  double value = 0.0;                   // Structural: 0 or 1
  std::vector<DesignTerm> terms;        // Logit
  std::vector<int> gamma_indices;       // Logit: offsets into gamma
  bool eta_shift = false;               // Logit: add eta*s to the predictor
};

// Parametric classification-probability map (t, z, gamma, eta, s) -> Pi*,
// a column-stochastic k x k matrix with entry (j, h) = P(C* = j | C = h).
struct MisclassModel {
  int k = 2;
  // entries[j][h] for observed cause j, true cause h (0-based)
  std::vector<std::vector<MisclassEntry>> entries;

  // identity mechanism: no misclassification
  static MisclassModel identity(int k);

  // two-cause unidirectional mechanism: only cause 2 can be observed as
  // cause 1, with logit P(C*=1 | C=2) over the given design terms
  static MisclassModel unidirectional_2cause(std::vector<DesignTerm> terms,
                                             bool eta_shift = true);

  void validate() const;
};

// Externally estimated misclassification parameters.
struct GammaEstimate {
  Eigen::VectorXd gamma_hat;
  Eigen::MatrixXd omega_hat;  // covariance of gamma_hat, clipped to PSD
  MisclassModel design_spec;

  // eigenvalue clipping at zero (rejects eigenvalues below -1e-10 times
  // the matrix scale as structurally invalid input)
  Eigen::MatrixXd clipped_omega() const;
};

Eigen::MatrixXd classification_matrix(const MisclassModel& model,
                                      const Eigen::VectorXd& gamma, double t,
                                      const Eigen::VectorXd& z,
                                      const Eigen::VectorXd& z_extra,
                                      double eta, int s);

inline Eigen::MatrixXd classification_matrix(const MisclassModel& model,
                                             const Eigen::VectorXd& gamma,
                                             double t,
                                             const Eigen::VectorXd& z,
                                             double eta = 0.0, int s = 1) {
  return classification_matrix(model, gamma, t, z, Eigen::VectorXd(), eta, s);
}

struct IdentifiabilityReport {
  double min_diagonal = 1.0;
  double frac_at_most_half = 0.0;  // fraction of (i, j) with pi*_jj <= 0.5
  bool warning = false;
  std::string message;
};

// Scans pi*_jj(x_i, z_i) over all subjects and causes; warns (does not
// fail) when the minimum is <= 0.5.
IdentifiabilityReport identifiability_check(const MisclassModel& model,
                                            const Eigen::VectorXd& gamma,
                                            const Dataset& dataset,
                                            double eta = 0.0, int s = 1);

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace crrmisc
