// crrmisc: semiparametric competing-risks regression with misclassified
// causes of failure.  Subcommands: fit, bootstrap, sensitivity, predict,
// simulate.  Exit codes: 0 success, 1 usage/schema error, 2 numerical
// failure.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "crrmisc/io.hpp"

namespace {

using crrmisc::Json;

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write output file: " + out_path);
  out << text;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::string cur;
  std::stringstream ss(text);
  while (std::getline(ss, cur, ','))
    if (!cur.empty()) items.push_back(cur);
  return items;
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& what) {
  std::vector<double> values;
  for (const auto& item : split_list(text)) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end != item.c_str() + item.size())
      throw crrmisc::SchemaError(what + ": not a number: '" + item + "'");
    values.push_back(v);
  }
  if (values.empty()) throw crrmisc::SchemaError(what + ": empty list");
  return values;
}

// grid spec: comma list "0,0.5,1" or linspace "lo:hi:count"
std::vector<double> parse_grid(const std::string& text) {
  const auto colons = std::count(text.begin(), text.end(), ':');
  if (colons == 2) {
    double lo = 0.0, hi = 0.0;
    long count = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%ld", &lo, &hi, &count) != 3 ||
        count < 2 || !(hi > lo))
      throw crrmisc::SchemaError("--grid: expected lo:hi:count with count "
                                 ">= 2 and hi > lo");
    std::vector<double> grid(count);
    for (long i = 0; i < count; ++i)
      grid[i] = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
    grid.back() = hi;
    return grid;
  }
  return parse_double_list(text, "--grid");
}

struct FitFlags {
  std::string data_path;
  std::string gamma_path;
  std::string covariates;
  std::string out_path;
  int order = 4;
  int knots = -1;  // -1: rate default
  double eta = 0.0;
  std::uint64_t seed = 0;

  void add_common(CLI::App* cmd, bool with_eta = true) {
    cmd->add_option("data", data_path, "input data CSV")->required();
    cmd->add_option("gamma", gamma_path, "gamma JSON")->required();
    cmd->add_option("--order", order, "spline order (default 4)");
    cmd->add_option("--knots", knots, "interior knot count override");
    if (with_eta)
      cmd->add_option("--eta", eta, "sensitivity shift (default 0)");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--covariates", covariates,
                    "comma-separated survival covariate columns "
                    "(default: all)");
    cmd->add_option("--out", out_path, "output file (default: stdout)");
  }

  crrmisc::FitConfig config() const {
    crrmisc::FitConfig cfg;
    cfg.order = order;
    if (knots >= 0) cfg.n_interior = knots;
    cfg.eta = eta;
    return cfg;
  }

  crrmisc::ModelInputs load() const {
    const crrmisc::DataTable table = crrmisc::read_data_csv(data_path);
    const crrmisc::GammaSpec spec = crrmisc::read_gamma_json(gamma_path);
    return crrmisc::build_inputs(table, spec, split_list(covariates));
  }
};

int cmd_fit(const FitFlags& flags) {
  const crrmisc::ModelInputs inputs = flags.load();
  const crrmisc::FitResult result =
      crrmisc::fit(inputs.dataset, flags.config(), inputs.model,
                   inputs.gamma.gamma_hat);
  Json report = crrmisc::fit_report(inputs, result, flags.seed, "fit");
  write_output(report.dump(2) + "\n", flags.out_path);
  return 0;
}

int cmd_bootstrap(const FitFlags& flags, int n_boot) {
  const crrmisc::ModelInputs inputs = flags.load();
  const crrmisc::FitConfig cfg = flags.config();
  const crrmisc::FitResult result =
      crrmisc::fit(inputs.dataset, cfg, inputs.model, inputs.gamma.gamma_hat);
  const crrmisc::BootstrapResult boot = crrmisc::bootstrap_variance(
      inputs.dataset, cfg, inputs.model, inputs.gamma, n_boot, flags.seed,
      &result.theta);
  Json report = crrmisc::fit_report(inputs, result, flags.seed, "bootstrap");
  crrmisc::attach_bootstrap(report, boot);
  write_output(report.dump(2) + "\n", flags.out_path);
  return 0;
}

int cmd_sensitivity(const FitFlags& flags, const std::string& grid_text,
                    int n_boot, const std::string& dump_pi_path) {
  const crrmisc::ModelInputs inputs = flags.load();
  std::vector<double> grid = parse_double_list(grid_text, "--eta-grid");
  std::vector<std::string> warnings;
  {
    std::vector<double> dedup;
    for (double e : grid)
      if (std::find(dedup.begin(), dedup.end(), e) == dedup.end())
        dedup.push_back(e);
    if (dedup.size() != grid.size()) {
      warnings.push_back("duplicate eta values removed from grid");
      grid = dedup;
    }
  }

  Json report;
  report["schema"] = "crrmisc/1";
  report["command"] = "sensitivity";
  report["seed"] = flags.seed;
  report["eta_grid"] = grid;
  report["warnings"] = warnings;
  Json fits = Json::array();

  std::string dump_csv = "eta,subject,observed,true,pi\n";
  for (double eta : grid) {
    crrmisc::FitConfig cfg = flags.config();
    cfg.eta = eta;
    Json entry;
    entry["eta"] = eta;
    try {
      const crrmisc::FitResult result = crrmisc::fit(
          inputs.dataset, cfg, inputs.model, inputs.gamma.gamma_hat);
      Json fit_json = crrmisc::fit_report(inputs, result, flags.seed, "fit");
      if (n_boot > 0) {
        const crrmisc::BootstrapResult boot = crrmisc::bootstrap_variance(
            inputs.dataset, cfg, inputs.model, inputs.gamma, n_boot,
            flags.seed, &result.theta);
        crrmisc::attach_bootstrap(fit_json, boot);
      }
      entry["converged"] = result.converged;
      entry["loglik"] = result.loglik;
      entry["causes"] = fit_json["causes"];
      entry["error"] = nullptr;
    } catch (const std::exception& e) {
      entry["converged"] = false;
      entry["error"] = e.what();
    }
    fits.push_back(entry);

    if (!dump_pi_path.empty()) {
      for (int i = 0; i < inputs.dataset.n(); ++i) {
        const auto& subj = inputs.dataset.subjects[i];
        const Eigen::MatrixXd pi = crrmisc::classification_matrix(
            inputs.model, inputs.gamma.gamma_hat, subj.x, subj.z,
            subj.z_extra, eta, 1);
        for (int j = 0; j < inputs.model.k; ++j)
          for (int h = 0; h < inputs.model.k; ++h)
            if (inputs.model.entries[j][h].type ==
                crrmisc::MisclassEntry::Type::Logit)
              dump_csv += crrmisc::format_double(eta) + "," +
                          std::to_string(i) + "," + std::to_string(j + 1) +
                          "," + std::to_string(h + 1) + "," +
                          crrmisc::format_double(pi(j, h)) + "\n";
      }
    }
  }
  report["fits"] = fits;
  if (!dump_pi_path.empty()) {
    std::ofstream out(dump_pi_path, std::ios::binary);
    if (!out)
      throw std::runtime_error("cannot write dump file: " + dump_pi_path);
    out << dump_csv;
  }
  write_output(report.dump(2) + "\n", flags.out_path);
  return 0;
}

int cmd_predict(const std::string& fit_path, const std::string& z_text,
                int cause, const std::string& grid_text,
                const std::string& out_path) {
  const crrmisc::LoadedFit loaded = crrmisc::load_fit_report(fit_path);
  const auto& names = loaded.covariate_names;

  Eigen::VectorXd z = Eigen::VectorXd::Zero(names.size());
  std::set<std::string> seen;
  for (const auto& item : split_list(z_text)) {
    const auto pos = item.find('=');
    if (pos == std::string::npos)
      throw crrmisc::SchemaError("--z: expected name=value, got '" + item +
                                 "'");
    const std::string name = item.substr(0, pos);
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
      throw crrmisc::SchemaError("--z: unknown covariate '" + name + "'");
    char* end = nullptr;
    const std::string value = item.substr(pos + 1);
    z[it - names.begin()] = std::strtod(value.c_str(), &end);
    if (end != value.c_str() + value.size())
      throw crrmisc::SchemaError("--z: not a number: '" + value + "'");
    seen.insert(name);
  }
  for (const auto& name : names)
    if (!seen.count(name))
      throw crrmisc::SchemaError("--z: missing covariate '" + name + "'");

  std::vector<double> grid =
      grid_text.empty()
          ? parse_grid("0:" + crrmisc::format_double(loaded.fit.tau) + ":201")
          : parse_grid(grid_text);

  const int k = loaded.fit.theta.n_causes();
  std::vector<crrmisc::CifCurve> curves;
  for (int j = 1; j <= k; ++j)
    if (cause == 0 || cause == j)
      curves.push_back(crrmisc::cif(loaded.fit, j, z, grid));
  if (curves.empty())
    throw crrmisc::SchemaError("--cause: no such cause in the fitted model");
  write_output(crrmisc::format_cif_csv(curves), out_path);
  return 0;
}

int cmd_simulate(int scenario_id, double gamma0, int n, int reps, int n_boot,
                 std::uint64_t seed, bool emit_data,
                 const std::string& out_path, int order, int knots) {
  const crrmisc::Scenario sc = crrmisc::Scenario::standard(scenario_id, gamma0);
  if (emit_data) {
    const crrmisc::GeneratedData gen = crrmisc::generate_dataset(sc, n, seed);
    write_output(crrmisc::format_data_csv(crrmisc::table_from_generated(gen)),
                 out_path);
    return 0;
  }
  crrmisc::FitConfig cfg;
  cfg.order = order;
  if (knots >= 0) cfg.n_interior = knots;
  const crrmisc::StudySummary summary =
      crrmisc::run_study(sc, n, reps, n_boot, cfg, seed);
  const Json report =
      crrmisc::study_report(sc, scenario_id, summary, n, n_boot, seed);
  write_output(report.dump(2) + "\n", out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semiparametric competing-risks regression with "
               "misclassified causes of failure"};
  app.require_subcommand(1);

  FitFlags fit_flags;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit the model");
  fit_flags.add_common(fit_cmd);

  FitFlags boot_flags;
  int n_boot = 100;
  CLI::App* boot_cmd =
      app.add_subcommand("bootstrap", "fit and bootstrap standard errors");
  boot_flags.add_common(boot_cmd);
  boot_cmd->add_option("--B", n_boot, "bootstrap replications (default 100)");

  FitFlags sens_flags;
  std::string eta_grid = "-0.5,-0.25,0,0.25,0.5";
  int sens_boot = 0;
  std::string dump_pi;
  CLI::App* sens_cmd = app.add_subcommand(
      "sensitivity", "refit over a grid of transportability shifts");
  sens_flags.add_common(sens_cmd, false);
  sens_cmd->add_option("--eta-grid", eta_grid,
                       "comma-separated eta values "
                       "(default -0.5,-0.25,0,0.25,0.5)");
  sens_cmd->add_option("--B", sens_boot,
                       "bootstrap replications per eta (default 0: none)");
  sens_cmd->add_option("--dump-pi", dump_pi,
                       "write per-subject classification probabilities to "
                       "this CSV");

  std::string predict_fit_path, predict_z, predict_grid, predict_out;
  int predict_cause = 0;
  CLI::App* predict_cmd = app.add_subcommand(
      "predict", "cumulative incidence curves from a saved fit report");
  predict_cmd->add_option("fit", predict_fit_path, "fit report JSON")
      ->required();
  predict_cmd->add_option("--z", predict_z, "covariates as name=value,...")
      ->required();
  predict_cmd->add_option("--cause", predict_cause,
                          "cause to predict (default: all)");
  predict_cmd->add_option("--grid", predict_grid,
                          "time grid: t1,t2,... or lo:hi:count "
                          "(default 0:tau:201)");
  predict_cmd->add_option("--out", predict_out, "output file");

  int sim_scenario = 1, sim_n = 400, sim_reps = 1000, sim_boot = 100;
  int sim_order = 4, sim_knots = -1;
  double sim_gamma0 = -2.0;
  std::uint64_t sim_seed = 0;
  bool sim_emit = false;
  std::string sim_out;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Monte Carlo study or dataset dump");
  sim_cmd->add_option("--scenario", sim_scenario, "scenario id: 1, 2, or 3")
      ->check(CLI::Range(1, 3));
  sim_cmd->add_option("--gamma0", sim_gamma0,
                      "misclassification intercept (default -2.0)");
  sim_cmd->add_option("--n", sim_n, "sample size per replicate");
  sim_cmd->add_option("--reps", sim_reps, "number of replicates");
  sim_cmd->add_option("--B", sim_boot,
                      "bootstrap replications per replicate (default 100; "
                      "0 disables standard errors)");
  sim_cmd->add_option("--seed", sim_seed, "random seed");
  sim_cmd->add_flag("--emit-data", sim_emit,
                    "write one generated dataset as CSV and exit");
  sim_cmd->add_option("--order", sim_order, "spline order");
  sim_cmd->add_option("--knots", sim_knots, "interior knot count override");
  sim_cmd->add_option("--out", sim_out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit_flags);
    if (boot_cmd->parsed()) return cmd_bootstrap(boot_flags, n_boot);
    if (sens_cmd->parsed())
      return cmd_sensitivity(sens_flags, eta_grid, sens_boot, dump_pi);
    if (predict_cmd->parsed())
      return cmd_predict(predict_fit_path, predict_z, predict_cause,
                         predict_grid, predict_out);
    if (sim_cmd->parsed())
      return cmd_simulate(sim_scenario, sim_gamma0, sim_n, sim_reps, sim_boot,
                          sim_seed, sim_emit, sim_out, sim_order, sim_knots);
  } catch (const crrmisc::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
