#include "crrmisc/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace crrmisc {

int Subject::observed_cause() const {
  for (std::size_t j = 0; j < deltas.size(); ++j)
    if (deltas[j] == 1) return static_cast<int>(j) + 1;
  return 0;
}

Dataset Dataset::from_subjects(std::vector<Subject> subjects) {
  if (subjects.empty())
    throw std::invalid_argument("Dataset: at least one subject required");
  Dataset d;
  d.k = static_cast<int>(subjects.front().deltas.size());
  d.p = static_cast<int>(subjects.front().z.size());
  d.tau = 0.0;
  for (const auto& s : subjects) {
    if (static_cast<int>(s.deltas.size()) != d.k ||
        static_cast<int>(s.z.size()) != d.p)
      throw std::invalid_argument("Dataset: inconsistent subject dimensions");
    if (!(s.x >= 0.0))
      throw std::invalid_argument("Dataset: observed time must be >= 0");
    int sum = 0;
    for (int v : s.deltas) {
      if (v != 0 && v != 1)
        throw std::invalid_argument("Dataset: cause indicators must be 0/1");
      sum += v;
    }
    if (sum > 1)
      throw std::invalid_argument(
          "Dataset: at most one cause indicator may be set");
    if (!s.z.allFinite())
      throw std::invalid_argument("Dataset: covariates must be finite");
    d.tau = std::max(d.tau, s.x);
  }
  d.subjects = std::move(subjects);
  return d;
}

Eigen::VectorXd design_row(const std::vector<DesignTerm>& terms, double t,
                           const Eigen::VectorXd& z,
                           const Eigen::VectorXd& z_extra) {
  int n = 0;
  for (const auto& term : terms) n += term.n_columns();
  Eigen::VectorXd row(n);
  int at = 0;
  for (const auto& term : terms) {
    switch (term.kind) {
      case DesignTerm::Kind::Intercept:
        row[at++] = 1.0;
        break;
      case DesignTerm::Kind::Time:
        row[at++] = t;
        break;
      case DesignTerm::Kind::LogTime:
        row[at++] = std::log(std::max(t, 1e-12));
        break;
      case DesignTerm::Kind::TimeSquared:
        row[at++] = t * t;
        break;
      case DesignTerm::Kind::PiecewiseLinearTime: {
        row[at++] = t;
        const auto& ks = term.knots;
        for (std::size_t i = 0; i < ks.size(); ++i) {
          const double hi = i + 1 < ks.size()
                                ? ks[i + 1]
                                : std::numeric_limits<double>::infinity();
          row[at++] = (t >= ks[i] && t < hi) ? t - ks[i] : 0.0;
        }
        break;
      }
      case DesignTerm::Kind::Covariate: {
        const Eigen::VectorXd& src = term.from_extra ? z_extra : z;
        if (term.covariate_index < 0 || term.covariate_index >= src.size())
          throw std::invalid_argument(
              "design_row: covariate index out of range");
        row[at++] = src[term.covariate_index];
        break;
      }
    }
  }
  return row;
}

MisclassModel MisclassModel::identity(int k) {
  MisclassModel m;
  m.k = k;
  m.entries.assign(k, std::vector<MisclassEntry>(k));
  for (int j = 0; j < k; ++j)
    for (int h = 0; h < k; ++h) {
      m.entries[j][h].type = MisclassEntry::Type::Structural;
      m.entries[j][h].value = j == h ? 1.0 : 0.0;
    }
  return m;
}

MisclassModel MisclassModel::unidirectional_2cause(
    std::vector<DesignTerm> terms, bool eta_shift) {
  MisclassModel m;
  m.k = 2;
  m.entries.assign(2, std::vector<MisclassEntry>(2));
  m.entries[0][0] = {MisclassEntry::Type::Structural, 1.0, {}, {}, false};
  m.entries[1][0] = {MisclassEntry::Type::Structural, 0.0, {}, {}, false};
  MisclassEntry logit;
  logit.type = MisclassEntry::Type::Logit;
  logit.terms = std::move(terms);
  int n = 0;
  for (const auto& term : logit.terms) n += term.n_columns();
  logit.gamma_indices.resize(n);
  for (int i = 0; i < n; ++i) logit.gamma_indices[i] = i;
  logit.eta_shift = eta_shift;
  m.entries[0][1] = std::move(logit);
  m.entries[1][1].type = MisclassEntry::Type::Complement;
  return m;
}

void MisclassModel::validate() const {
  if (k < 2) throw std::invalid_argument("MisclassModel: k must be >= 2");
  if (static_cast<int>(entries.size()) != k)
    throw std::invalid_argument("MisclassModel: entry grid must be k x k");
  for (const auto& row : entries)
    if (static_cast<int>(row.size()) != k)
      throw std::invalid_argument("MisclassModel: entry grid must be k x k");
  for (int h = 0; h < k; ++h) {
    int n_complement = 0;
    int n_logit = 0;
    double struct_sum = 0.0;
    for (int j = 0; j < k; ++j) {
      const auto& e = entries[j][h];
      switch (e.type) {
        case MisclassEntry::Type::Structural:
          if (e.value != 0.0 && e.value != 1.0)
            throw std::invalid_argument(
                "MisclassModel: structural entries must be 0 or 1");
          struct_sum += e.value;
          break;
        case MisclassEntry::Type::Complement:
          ++n_complement;
          break;
        case MisclassEntry::Type::Logit:
          ++n_logit;
          if (e.terms.empty())
            throw std::invalid_argument(
                "MisclassModel: logit entry needs design terms");
          {
            int cols = 0;
            for (const auto& term : e.terms) cols += term.n_columns();
            if (static_cast<int>(e.gamma_indices.size()) != cols)
              throw std::invalid_argument(
                  "MisclassModel: gamma_indices length must match design "
                  "columns");
          }
          break;
      }
    }
    if (n_complement > 1)
      throw std::invalid_argument(
          "MisclassModel: at most one complement entry per column");
    if (n_complement == 0) {
      if (n_logit > 0 || struct_sum != 1.0)
        throw std::invalid_argument(
            "MisclassModel: column without complement must be structural "
            "and sum to 1");
    }
  }
}

Eigen::MatrixXd GammaEstimate::clipped_omega() const {
  const auto q = gamma_hat.size();
  if (omega_hat.rows() != q || omega_hat.cols() != q)
    throw std::invalid_argument("GammaEstimate: omega dimension mismatch");
  if (q == 0) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd sym = 0.5 * (omega_hat + omega_hat.transpose());
  if ((omega_hat - omega_hat.transpose()).cwiseAbs().maxCoeff() >
      1e-8 * (1.0 + sym.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("GammaEstimate: omega must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-10 * scale)
    throw std::invalid_argument(
        "GammaEstimate: omega has eigenvalues below -1e-10, not a "
        "covariance matrix");
  Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * clipped.asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd classification_matrix(const MisclassModel& model,
                                      const Eigen::VectorXd& gamma, double t,
                                      const Eigen::VectorXd& z,
                                      const Eigen::VectorXd& z_extra,
                                      double eta, int s) {
  const int k = model.k;
  Eigen::MatrixXd pi(k, k);
  for (int h = 0; h < k; ++h) {
    int complement_row = -1;
    double col_sum = 0.0;
    for (int j = 0; j < k; ++j) {
      const auto& e = model.entries[j][h];
      switch (e.type) {
        case MisclassEntry::Type::Structural:
          pi(j, h) = e.value;
          break;
        case MisclassEntry::Type::Logit: {
          const Eigen::VectorXd w = design_row(e.terms, t, z, z_extra);
          double lp = 0.0;
          for (Eigen::Index c = 0; c < w.size(); ++c) {
            const int gi = e.gamma_indices[c];
            if (gi < 0 || gi >= gamma.size())
              throw std::invalid_argument(
                  "classification_matrix: gamma index out of range");
            lp += gamma[gi] * w[c];
          }
          lp += e.eta_shift ? eta * s : 0.0;
          if (!std::isfinite(lp))
            throw std::runtime_error(
                "classification_matrix: non-finite linear predictor");
          pi(j, h) = expit(lp);
          break;
        }
        case MisclassEntry::Type::Complement:
          complement_row = j;
          pi(j, h) = 0.0;
          break;
      }
      col_sum += pi(j, h);
    }
    if (complement_row >= 0) {
      pi(complement_row, h) = 1.0 - col_sum;
      if (pi(complement_row, h) < 0.0)
        throw std::runtime_error(
            "classification_matrix: column probabilities exceed 1");
    }
  }
  return pi;
}

IdentifiabilityReport identifiability_check(const MisclassModel& model,
                                            const Eigen::VectorXd& gamma,
                                            const Dataset& dataset,
                                            double eta, int s) {
  IdentifiabilityReport report;
  long n_bad = 0;
  long n_total = 0;
  for (const auto& subj : dataset.subjects) {
    const Eigen::MatrixXd pi = classification_matrix(
        model, gamma, subj.x, subj.z, subj.z_extra, eta, s);
    for (int j = 0; j < model.k; ++j) {
      report.min_diagonal = std::min(report.min_diagonal, pi(j, j));
      if (pi(j, j) <= 0.5) ++n_bad;
      ++n_total;
    }
  }
  report.frac_at_most_half =
      n_total > 0 ? static_cast<double>(n_bad) / n_total : 0.0;
  if (report.min_diagonal <= 0.5) {
    report.warning = true;
    report.message =
        "correct-classification probability <= 0.5 for some subject/cause; "
        "model may not be identifiable (min diagonal = " +
        std::to_string(report.min_diagonal) + ")";
  }
  return report;
}

}  // namespace crrmisc
