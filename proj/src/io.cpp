#include "crrmisc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace crrmisc {

std::string format_double(double v) {
  // shortest formatting that round-trips exactly
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

double parse_number(const std::string& field, const std::string& where) {
  if (field.empty()) throw SchemaError(where + ": empty numeric field");
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size())
    throw SchemaError(where + ": not a number: '" + field + "'");
  if (!std::isfinite(v))
    throw SchemaError(where + ": non-finite value: '" + field + "'");
  return v;
}

int parse_cause(const std::string& field, const std::string& where) {
  const double v = parse_number(field, where);
  const double r = std::round(v);
  if (v != r || r < 0)
    throw SchemaError(where + ": cause must be a nonnegative integer, got '" +
                      field + "'");
  return static_cast<int>(r);
}

}  // namespace

DataTable read_data_csv(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line))
    throw SchemaError(name + ": empty file, header expected");
  const std::vector<std::string> header = split_csv_line(line);

  int time_col = -1;
  int cause_col = -1;
  DataTable table;
  std::vector<int> cov_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "time")
      time_col = static_cast<int>(c);
    else if (header[c] == "cause")
      cause_col = static_cast<int>(c);
    else if (!header[c].empty()) {
      cov_cols.push_back(static_cast<int>(c));
      table.covariate_names.push_back(header[c]);
    }
  }
  if (time_col < 0)
    throw SchemaError(name + " line 1: missing required column 'time'");
  if (cause_col < 0)
    throw SchemaError(name + " line 1: missing required column 'cause'");

  std::vector<std::vector<double>> cov_rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = name + " line " + std::to_string(line_no);
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw SchemaError(where + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    const double t = parse_number(fields[time_col], where + " column 'time'");
    if (t < 0.0) throw SchemaError(where + ": time must be >= 0");
    table.time.push_back(t);
    table.cause.push_back(
        parse_cause(fields[cause_col], where + " column 'cause'"));
    std::vector<double> row;
    row.reserve(cov_cols.size());
    for (std::size_t c = 0; c < cov_cols.size(); ++c)
      row.push_back(parse_number(
          fields[cov_cols[c]],
          where + " column '" + table.covariate_names[c] + "'"));
    cov_rows.push_back(std::move(row));
  }
  if (table.time.empty())
    throw SchemaError(name + ": no data rows");

  table.covariates.resize(static_cast<Eigen::Index>(cov_rows.size()),
                          static_cast<Eigen::Index>(cov_cols.size()));
  for (std::size_t i = 0; i < cov_rows.size(); ++i)
    for (std::size_t c = 0; c < cov_cols.size(); ++c)
      table.covariates(i, c) = cov_rows[i][c];
  table.k = *std::max_element(table.cause.begin(), table.cause.end());
  return table;
}

DataTable read_data_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open file");
  return read_data_csv(in, path);
}

std::string format_data_csv(const DataTable& table) {
  std::string out = "time,cause";
  for (const auto& name : table.covariate_names) out += "," + name;
  out += "\n";
  for (int i = 0; i < table.n(); ++i) {
    out += format_double(table.time[i]);
    out += "," + std::to_string(table.cause[i]);
    for (Eigen::Index c = 0; c < table.covariates.cols(); ++c)
      out += "," + format_double(table.covariates(i, c));
    out += "\n";
  }
  return out;
}

DataTable table_from_generated(const GeneratedData& gen) {
  DataTable table;
  table.covariate_names = {"z"};
  table.k = gen.data.k;
  table.covariates.resize(gen.data.n(), 1);
  for (int i = 0; i < gen.data.n(); ++i) {
    const Subject& s = gen.data.subjects[i];
    table.time.push_back(s.x);
    table.cause.push_back(s.observed_cause());
    table.covariates(i, 0) = s.z[0];
  }
  return table;
}

namespace {

GammaSpec::Term parse_term(const Json& j, const std::string& where) {
  GammaSpec::Term term;
  if (!j.contains("kind"))
    throw SchemaError(where + ": design term missing field 'kind'");
  term.kind = j["kind"].get<std::string>();
  if (term.kind == "pwl_time") {
    if (!j.contains("knots") || !j["knots"].is_array() || j["knots"].empty())
      throw SchemaError(where +
                        ": pwl_time term requires a nonempty 'knots' array");
    for (const auto& v : j["knots"]) term.knots.push_back(v.get<double>());
    if (!std::is_sorted(term.knots.begin(), term.knots.end()))
      throw SchemaError(where + ": pwl_time knots must be increasing");
  } else if (term.kind == "covariate") {
    if (!j.contains("name"))
      throw SchemaError(where + ": covariate term requires field 'name'");
    term.name = j["name"].get<std::string>();
  } else if (term.kind != "intercept" && term.kind != "time" &&
             term.kind != "log_time" && term.kind != "time_squared") {
    throw SchemaError(where + ": unknown design term kind '" + term.kind +
                      "'");
  }
  return term;
}

int term_columns(const GammaSpec::Term& term) {
  return term.kind == "pwl_time" ? static_cast<int>(term.knots.size()) + 1
                                 : 1;
}

}  // namespace

GammaSpec parse_gamma_json(const std::string& text, const std::string& name) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const std::exception& e) {
    throw SchemaError(name + ": invalid JSON: " + e.what());
  }
  GammaSpec spec;
  if (!root.contains("gamma") || !root["gamma"].is_array())
    throw SchemaError(name + ": missing array field 'gamma'");
  const auto q = static_cast<Eigen::Index>(root["gamma"].size());
  spec.gamma.resize(q);
  for (Eigen::Index i = 0; i < q; ++i)
    spec.gamma[i] = root["gamma"][i].get<double>();

  if (!root.contains("omega") || !root["omega"].is_array())
    throw SchemaError(name + ": missing array field 'omega'");
  const auto& omega = root["omega"];
  if (static_cast<Eigen::Index>(omega.size()) != q)
    throw SchemaError(name + ": field 'omega' must be a " +
                      std::to_string(q) + "x" + std::to_string(q) +
                      " matrix matching 'gamma'");
  spec.omega.resize(q, q);
  for (Eigen::Index r = 0; r < q; ++r) {
    if (!omega[r].is_array() ||
        static_cast<Eigen::Index>(omega[r].size()) != q)
      throw SchemaError(name + ": field 'omega' row " + std::to_string(r) +
                        " must have " + std::to_string(q) + " entries");
    for (Eigen::Index c = 0; c < q; ++c)
      spec.omega(r, c) = omega[r][c].get<double>();
  }

  if (!root.contains("design") || !root["design"].is_object())
    throw SchemaError(name + ": missing object field 'design'");
  const auto& design = root["design"];
  spec.k = design.value("k", 2);
  if (spec.k < 2)
    throw SchemaError(name + ": field 'design.k' must be >= 2");

  const std::string mechanism = design.value("mechanism", "entries");
  if (mechanism == "identity") {
    for (int j = 1; j <= spec.k; ++j)
      for (int h = 1; h <= spec.k; ++h) {
        GammaSpec::Entry e;
        e.observed = j;
        e.true_cause = h;
        e.type = "structural";
        e.value = j == h ? 1.0 : 0.0;
        spec.entries.push_back(e);
      }
  } else if (mechanism == "unidirectional") {
    if (spec.k != 2)
      throw SchemaError(name +
                        ": 'unidirectional' mechanism requires design.k = 2");
    if (!design.contains("terms") || !design["terms"].is_array())
      throw SchemaError(name +
                        ": 'unidirectional' mechanism requires array field "
                        "'design.terms'");
    GammaSpec::Entry logit;
    logit.observed = 1;
    logit.true_cause = 2;
    logit.type = "logit";
    logit.eta_shift = design.value("eta_shift", true);
    int cols = 0;
    for (const auto& tj : design["terms"]) {
      logit.terms.push_back(parse_term(tj, name + ": design.terms"));
      cols += term_columns(logit.terms.back());
    }
    for (int i = 0; i < cols; ++i) logit.gamma_indices.push_back(i);
    if (cols != q)
      throw SchemaError(name + ": design row has " + std::to_string(cols) +
                        " columns but 'gamma' has " + std::to_string(q) +
                        " entries");
    spec.entries.push_back({1, 1, "structural", 1.0, {}, {}, false});
    spec.entries.push_back({2, 1, "structural", 0.0, {}, {}, false});
    spec.entries.push_back(logit);
    spec.entries.push_back({2, 2, "complement", 0.0, {}, {}, false});
  } else if (mechanism == "entries") {
    if (!design.contains("entries") || !design["entries"].is_array())
      throw SchemaError(name + ": missing array field 'design.entries'");
    for (const auto& ej : design["entries"]) {
      GammaSpec::Entry e;
      if (!ej.contains("observed") || !ej.contains("true"))
        throw SchemaError(name +
                          ": design entry needs fields 'observed' and 'true'");
      e.observed = ej["observed"].get<int>();
      e.true_cause = ej["true"].get<int>();
      e.type = ej.value("type", "structural");
      if (e.type == "structural") {
        e.value = ej.value("value", 0.0);
      } else if (e.type == "logit") {
        if (!ej.contains("terms") || !ej["terms"].is_array())
          throw SchemaError(name + ": logit entry requires 'terms'");
        for (const auto& tj : ej["terms"])
          e.terms.push_back(parse_term(tj, name + ": design.entries terms"));
        if (ej.contains("gamma_indices"))
          for (const auto& gi : ej["gamma_indices"])
            e.gamma_indices.push_back(gi.get<int>());
        else {
          int cols = 0;
          for (const auto& term : e.terms) cols += term_columns(term);
          for (int i = 0; i < cols; ++i) e.gamma_indices.push_back(i);
        }
        e.eta_shift = ej.value("eta_shift", false);
      } else if (e.type != "complement") {
        throw SchemaError(name + ": unknown design entry type '" + e.type +
                          "'");
      }
      spec.entries.push_back(e);
    }
  } else {
    throw SchemaError(name + ": unknown design mechanism '" + mechanism +
                      "'");
  }
  return spec;
}

GammaSpec read_gamma_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_gamma_json(buf.str(), path);
}

ModelInputs build_inputs(const DataTable& table, const GammaSpec& spec,
                         const std::vector<std::string>& survival_covariates) {
  ModelInputs inputs;
  inputs.covariate_names = survival_covariates.empty()
                               ? table.covariate_names
                               : survival_covariates;
  std::vector<int> survival_cols;
  for (const auto& name : inputs.covariate_names) {
    const auto it = std::find(table.covariate_names.begin(),
                              table.covariate_names.end(), name);
    if (it == table.covariate_names.end())
      throw SchemaError("unknown covariate column '" + name + "'");
    survival_cols.push_back(
        static_cast<int>(it - table.covariate_names.begin()));
  }

  if (table.k > spec.k)
    throw SchemaError("data contains cause " + std::to_string(table.k) +
                      " but the design declares k = " +
                      std::to_string(spec.k));
  if (table.k < 2)
    throw SchemaError("cause column must contain at least 2 causes");

  // resolve design covariate names; unknown-to-survival columns are
  // carried in a per-subject extra vector
  std::vector<int> extra_cols;
  MisclassModel model;
  model.k = spec.k;
  model.entries.assign(spec.k, std::vector<MisclassEntry>(spec.k));
  for (const auto& e : spec.entries) {
    if (e.observed < 1 || e.observed > spec.k || e.true_cause < 1 ||
        e.true_cause > spec.k)
      throw SchemaError("design entry indices must be in 1..k");
    MisclassEntry entry;
    if (e.type == "structural") {
      entry.type = MisclassEntry::Type::Structural;
      entry.value = e.value;
    } else if (e.type == "complement") {
      entry.type = MisclassEntry::Type::Complement;
    } else {
      entry.type = MisclassEntry::Type::Logit;
      entry.gamma_indices = e.gamma_indices;
      entry.eta_shift = e.eta_shift;
      for (const auto& term : e.terms) {
        DesignTerm out;
        if (term.kind == "intercept")
          out.kind = DesignTerm::Kind::Intercept;
        else if (term.kind == "time")
          out.kind = DesignTerm::Kind::Time;
        else if (term.kind == "log_time")
          out.kind = DesignTerm::Kind::LogTime;
        else if (term.kind == "time_squared")
          out.kind = DesignTerm::Kind::TimeSquared;
        else if (term.kind == "pwl_time") {
          out.kind = DesignTerm::Kind::PiecewiseLinearTime;
          out.knots = term.knots;
        } else {
          out.kind = DesignTerm::Kind::Covariate;
          const auto sit = std::find(inputs.covariate_names.begin(),
                                     inputs.covariate_names.end(), term.name);
          if (sit != inputs.covariate_names.end()) {
            out.covariate_index =
                static_cast<int>(sit - inputs.covariate_names.begin());
          } else {
            const auto tit = std::find(table.covariate_names.begin(),
                                       table.covariate_names.end(), term.name);
            if (tit == table.covariate_names.end())
              throw SchemaError("design references unknown covariate '" +
                                term.name + "'");
            const int table_col =
                static_cast<int>(tit - table.covariate_names.begin());
            const auto xit =
                std::find(extra_cols.begin(), extra_cols.end(), table_col);
            out.from_extra = true;
            if (xit != extra_cols.end()) {
              out.covariate_index =
                  static_cast<int>(xit - extra_cols.begin());
            } else {
              out.covariate_index = static_cast<int>(extra_cols.size());
              extra_cols.push_back(table_col);
              inputs.extra_covariate_names.push_back(term.name);
            }
          }
        }
        entry.terms.push_back(std::move(out));
      }
    }
    model.entries[e.observed - 1][e.true_cause - 1] = std::move(entry);
  }
  model.validate();

  std::vector<Subject> subjects(table.n());
  for (int i = 0; i < table.n(); ++i) {
    Subject& s = subjects[i];
    s.x = table.time[i];
    s.deltas.assign(spec.k, 0);
    if (table.cause[i] > 0) s.deltas[table.cause[i] - 1] = 1;
    s.z.resize(static_cast<Eigen::Index>(survival_cols.size()));
    for (std::size_t c = 0; c < survival_cols.size(); ++c)
      s.z[static_cast<Eigen::Index>(c)] = table.covariates(i, survival_cols[c]);
    s.z_extra.resize(static_cast<Eigen::Index>(extra_cols.size()));
    for (std::size_t c = 0; c < extra_cols.size(); ++c)
      s.z_extra[static_cast<Eigen::Index>(c)] =
          table.covariates(i, extra_cols[c]);
  }
  inputs.dataset = Dataset::from_subjects(std::move(subjects));
  inputs.model = model;
  inputs.gamma.gamma_hat = spec.gamma;
  inputs.gamma.omega_hat = spec.omega;
  inputs.gamma.design_spec = model;
  return inputs;
}

namespace {

Json vector_to_json(const Eigen::VectorXd& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (std::isfinite(v))
        row.push_back(v);
      else
        row.push_back(nullptr);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

Json fit_report(const ModelInputs& inputs, const FitResult& result,
                std::uint64_t seed, const std::string& command) {
  Json report;
  report["schema"] = "crrmisc/1";
  report["command"] = command;
  report["seed"] = seed;
  report["n"] = inputs.dataset.n();
  report["k"] = inputs.dataset.k;
  report["p"] = inputs.dataset.p;
  report["covariates"] = inputs.covariate_names;
  report["extra_covariates"] = inputs.extra_covariate_names;
  report["tau"] = result.tau;
  report["eta"] = result.eta;
  report["loglik"] = result.loglik;
  report["converged"] = result.converged;
  report["stop_reason"] = result.stop_reason;
  report["iterations"] = result.iterations;
  report["grad_norm"] = result.grad_norm;
  report["floored_terms"] = result.floored_terms;
  report["identifiability"] = {
      {"min_diagonal", result.identifiability.min_diagonal},
      {"frac_at_most_half", result.identifiability.frac_at_most_half},
      {"warning", result.identifiability.warning}};
  report["warnings"] = result.warnings;

  Json causes = Json::array();
  for (int j = 0; j < inputs.dataset.k; ++j) {
    Json cause;
    cause["cause"] = j + 1;
    Json coefs = Json::array();
    for (int c = 0; c < inputs.dataset.p; ++c) {
      Json coef;
      coef["name"] = inputs.covariate_names[c];
      coef["estimate"] = result.theta.beta[j][c];
      coef["hazard_ratio"] = std::exp(result.theta.beta[j][c]);
      coef["se"] = nullptr;
      coef["ci_lower"] = nullptr;
      coef["ci_upper"] = nullptr;
      coefs.push_back(coef);
    }
    cause["coefficients"] = coefs;
    const KnotVector& kv = result.theta.knots[j];
    cause["knots"] = {{"order", kv.order},
                      {"boundary_low", kv.boundary_low},
                      {"boundary_high", kv.boundary_high},
                      {"interior", kv.interior}};
    cause["spline_raw"] = vector_to_json(result.theta.coeffs[j].raw);
    cause["spline_constrained"] =
        vector_to_json(result.theta.coeffs[j].constrained);
    causes.push_back(cause);
  }
  report["causes"] = causes;
  report["bootstrap"] = nullptr;
  return report;
}

void attach_bootstrap(Json& report, const BootstrapResult& boot) {
  const int k = report["k"].get<int>();
  const int p = report["p"].get<int>();
  Json bj;
  bj["B"] = static_cast<int>(boot.replicate_betas.rows());
  bj["failures"] = boot.failures;
  bj["seed"] = boot.seed;
  bj["se"] = vector_to_json(boot.se);
  bj["sigma"] = matrix_to_json(boot.sigma_hat);
  bj["replicates"] = matrix_to_json(boot.replicate_betas);
  bj["warnings"] = boot.warnings;
  report["bootstrap"] = bj;
  for (int j = 0; j < k; ++j)
    for (int c = 0; c < p; ++c) {
      auto& coef = report["causes"][j]["coefficients"][c];
      const double est = coef["estimate"].get<double>();
      const double se = boot.se[j * p + c];
      const auto [lo, hi] = normal_interval(est, se);
      coef["se"] = se;
      coef["ci_lower"] = lo;
      coef["ci_upper"] = hi;
    }
  for (const auto& w : boot.warnings) report["warnings"].push_back(w);
}

LoadedFit load_fit_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open file");
  Json report;
  try {
    report = Json::parse(in);
  } catch (const std::exception& e) {
    throw SchemaError(path + ": invalid JSON: " + e.what());
  }
  if (report.value("schema", "") != "crrmisc/1")
    throw SchemaError(path + ": unsupported or missing schema tag");

  LoadedFit loaded;
  try {
    loaded.covariate_names =
        report["covariates"].get<std::vector<std::string>>();
    loaded.fit.tau = report["tau"].get<double>();
    loaded.fit.loglik = report["loglik"].get<double>();
    loaded.fit.converged = report["converged"].get<bool>();
    loaded.fit.eta = report["eta"].get<double>();
    const int k = report["k"].get<int>();
    const int p = report["p"].get<int>();
    for (int j = 0; j < k; ++j) {
      const auto& cause = report["causes"][j];
      Eigen::VectorXd beta(p);
      for (int c = 0; c < p; ++c)
        beta[c] = cause["coefficients"][c]["estimate"].get<double>();
      loaded.fit.theta.beta.push_back(beta);
      KnotVector kv;
      kv.order = cause["knots"]["order"].get<int>();
      kv.boundary_low = cause["knots"]["boundary_low"].get<double>();
      kv.boundary_high = cause["knots"]["boundary_high"].get<double>();
      kv.interior =
          cause["knots"]["interior"].get<std::vector<double>>();
      loaded.fit.theta.knots.push_back(kv);
      const auto raw = cause["spline_raw"].get<std::vector<double>>();
      loaded.fit.theta.coeffs.emplace_back(
          Eigen::Map<const Eigen::VectorXd>(raw.data(), raw.size()));
    }
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception& e) {
    throw SchemaError(path + ": malformed fit report: " + e.what());
  }
  return loaded;
}

std::string format_cif_csv(const std::vector<CifCurve>& curves) {
  if (curves.empty()) return "time\n";
  std::string out = "time";
  for (const auto& c : curves)
    out += ",cif_cause_" + std::to_string(c.cause);
  out += "\n";
  for (std::size_t i = 0; i < curves.front().grid.size(); ++i) {
    out += format_double(curves.front().grid[i]);
    for (const auto& c : curves) out += "," + format_double(c.values[i]);
    out += "\n";
  }
  return out;
}

Json study_report(const Scenario& sc, int scenario_id,
                  const StudySummary& summary, int n, int n_boot,
                  std::uint64_t seed) {
  Json report;
  report["schema"] = "crrmisc/1";
  report["command"] = "simulate";
  report["scenario"] = scenario_id;
  report["gamma0"] = sc.gamma0;
  report["n"] = n;
  report["replications"] = summary.replications;
  report["bootstrap_B"] = n_boot;
  report["seed"] = seed;
  report["converged"] = summary.converged;
  report["failed"] = summary.failed;
  Json coefs = Json::array();
  for (const auto& c : summary.coefficients) {
    Json cj;
    cj["name"] = "beta_" + std::to_string(c.cause);
    cj["cause"] = c.cause;
    cj["true_value"] = c.true_value;
    cj["mean"] = c.mean;
    cj["bias_pct"] = c.bias_pct;
    cj["mcsd"] = c.mcsd ? Json(*c.mcsd) : Json(nullptr);
    cj["ase"] = c.ase ? Json(*c.ase) : Json(nullptr);
    cj["coverage"] = c.coverage ? Json(*c.coverage) : Json(nullptr);
    cj["relative_efficiency"] =
        c.relative_efficiency ? Json(*c.relative_efficiency) : Json(nullptr);
    coefs.push_back(cj);
  }
  report["coefficients"] = coefs;
  return report;
}

}  // namespace crrmisc
