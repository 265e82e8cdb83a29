// Command line front end. Links only the public C interface so it exercises
// the same surface an external consumer sees.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <gqr/gqr.h>

namespace {

[[noreturn]] void die(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  std::exit(1);
}

void check_status(gqr_status status) {
  if (status != GQR_OK) die(gqr_last_error());
}

std::string take_string(char* text) {
  std::string out = text == nullptr ? std::string() : std::string(text);
  gqr_string_free(text);
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) die("cannot open for writing: " + path);
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
  if (!out.good()) die("write failed: " + path);
}

// Writes JSON to --out when given, otherwise prints it; the brief summary
// goes to stdout only when the JSON went to a file.
void emit(const std::string& out_path, const std::string& json_text,
          const std::string& brief) {
  if (out_path.empty()) {
    std::cout << json_text << "\n";
  } else {
    write_file(out_path, json_text);
    std::cout << brief << "\nwrote " << out_path << "\n";
  }
}

struct GroupSizes {
  int* values = nullptr;
  int count = 0;
  ~GroupSizes() { gqr_ints_free(values); }
};

struct DatasetGuard {
  gqr_dataset* ptr = nullptr;
  ~DatasetGuard() { gqr_dataset_free(ptr); }
};

void load_dataset(const std::string& data_path, const std::string& response,
                  DatasetGuard& data) {
  check_status(gqr_dataset_read_csv(data_path.c_str(),
                                    response.empty() ? nullptr : response.c_str(), &data.ptr));
}

void load_groups(const std::string& groups_path, GroupSizes& sizes) {
  if (groups_path.empty()) return;
  check_status(gqr_read_group_sizes(groups_path.c_str(), &sizes.values, &sizes.count));
}

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%g", value);
  return buffer;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grouped quantile regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gqr_version()));

  // fit
  auto* fit = app.add_subcommand("fit", "fit a penalized quantile regression");
  std::string fit_data, fit_response, fit_groups, fit_out;
  double fit_tau = 0.5;
  double fit_lambda = std::numeric_limits<double>::quiet_NaN();
  bool fit_l1 = false, fit_unpenalized = false;
  fit->add_option("--data", fit_data, "CSV with response and covariates")->required();
  fit->add_option("--response", fit_response,
                  "response column, by header name or zero-based index (default: first)");
  auto* fit_groups_opt =
      fit->add_option("--groups", fit_groups,
                      "group sizes file over the intercept-augmented design (default: "
                      "one group per covariate)");
  fit->add_option("--tau", fit_tau, "quantile level in (0,1)")->capture_default_str();
  auto* fit_lambda_opt = fit->add_option("--lambda", fit_lambda, "penalty level");
  auto* fit_l1_flag =
      fit->add_flag("--l1", fit_l1, "penalize each covariate separately, ignoring --groups");
  auto* fit_unpen_flag =
      fit->add_flag("--unpenalized", fit_unpenalized, "plain quantile regression, no penalty");
  fit->add_option("--out", fit_out, "write the fit as JSON here (default: stdout)");
  fit_l1_flag->excludes(fit_groups_opt);
  fit_unpen_flag->excludes(fit_lambda_opt);

  // tune
  auto* tune = app.add_subcommand("tune", "select the penalty level by pivotal simulation");
  std::string tune_data, tune_response, tune_groups, tune_out;
  double tune_tau = 0.5, tune_theta = 0.1, tune_c = 1.1;
  int tune_nsim = 2000;
  unsigned long long tune_seed = 0;
  tune->add_option("--data", tune_data, "CSV with response and covariates")->required();
  tune->add_option("--response", tune_response,
                   "response column, by header name or zero-based index (default: first)");
  tune->add_option("--groups", tune_groups,
                   "group sizes file over the intercept-augmented design (default: "
                   "one group per covariate)");
  tune->add_option("--tau", tune_tau, "quantile level in (0,1)")->capture_default_str();
  tune->add_option("--theta", tune_theta, "tail probability of the pivotal quantile")
      ->capture_default_str();
  tune->add_option("--c", tune_c, "multiplier on the pivotal quantile")->capture_default_str();
  tune->add_option("--nsim", tune_nsim, "number of pivotal draws")->capture_default_str();
  tune->add_option("--seed", tune_seed, "random seed")->capture_default_str();
  tune->add_option("--out", tune_out, "write the tuning record as JSON here (default: stdout)");

  // additive
  auto* additive =
      app.add_subcommand("additive", "sparse additive quantile regression on basis expansions");
  std::string add_data, add_response, add_basis = "bspline", add_out;
  double add_tau = 0.5, add_theta = 0.2, add_c = 1.0, add_lambda = -1.0;
  int add_knots = 4, add_nsim = 2000;
  unsigned long long add_seed = 0;
  additive->add_option("--data", add_data, "CSV with response and covariates")->required();
  additive->add_option("--response", add_response,
                       "response column, by header name or zero-based index (default: first)");
  additive->add_option("--basis", add_basis, "basis family: bspline or fourier")
      ->capture_default_str();
  additive
      ->add_option("--knots", add_knots,
                   "interior knots per covariate (bspline) or function count (fourier)")
      ->capture_default_str();
  additive->add_option("--tau", add_tau, "quantile level in (0,1)")->capture_default_str();
  additive->add_option("--theta", add_theta, "tail probability of the pivotal quantile")
      ->capture_default_str();
  additive->add_option("--c", add_c, "multiplier on the pivotal quantile")
      ->capture_default_str();
  additive->add_option("--nsim", add_nsim, "number of pivotal draws")->capture_default_str();
  additive->add_option("--seed", add_seed, "random seed")->capture_default_str();
  additive->add_option("--lambda", add_lambda,
                       "fixed penalty level; omit to select it by pivotal simulation");
  additive->add_option("--out", add_out, "write the model as JSON here (default: stdout)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run a replicated benchmark experiment");
  int sim_model = 0, sim_case = 0, sim_n = 0, sim_reps = 0, sim_q = 0, sim_group_size = 0;
  int sim_d = 0, sim_knots = 0, sim_nsim = 0, sim_workers = 0, sim_nmc = 0;
  double sim_tau = 0.0, sim_theta = 0.0, sim_c = 0.0;
  unsigned long long sim_seed = 0;
  std::string sim_estimators, sim_out;
  simulate->add_option("--model", sim_model, "1: grouped linear design, 2: additive surface")
      ->required()
      ->check(CLI::Range(1, 2));
  auto* sim_case_opt = simulate->add_option(
      "--case", sim_case, "model 1 signal pattern: 1 whole-group, 2 spread singletons");
  auto* sim_tau_opt = simulate->add_option("--tau", sim_tau, "quantile level in (0,1)");
  auto* sim_n_opt = simulate->add_option("--n", sim_n, "observations per replication");
  auto* sim_reps_opt = simulate->add_option("--reps", sim_reps, "number of replications");
  auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "master seed");
  auto* sim_q_opt = simulate->add_option("--q", sim_q, "number of groups (model 1)");
  auto* sim_gs_opt =
      simulate->add_option("--group-size", sim_group_size, "covariates per group (model 1)");
  auto* sim_d_opt = simulate->add_option("--d", sim_d, "number of covariates (model 2)");
  auto* sim_knots_opt =
      simulate->add_option("--knots", sim_knots, "interior spline knots (model 2)");
  auto* sim_nsim_opt = simulate->add_option("--nsim", sim_nsim, "pivotal draws per tuning");
  auto* sim_theta_opt =
      simulate->add_option("--theta", sim_theta, "tail probability of the pivotal quantile");
  auto* sim_c_opt = simulate->add_option("--c", sim_c, "multiplier on the pivotal quantile");
  auto* sim_workers_opt =
      simulate->add_option("--workers", sim_workers, "worker threads (0: all cores)");
  auto* sim_nmc_opt = simulate->add_option(
      "--nmc", sim_nmc, "Monte Carlo points for the function-space error (model 2)");
  auto* sim_est_opt = simulate->add_option(
      "--estimators", sim_estimators, "comma list from grlasso,lasso,qr (default: all)");
  simulate->add_option("--out", sim_out, "directory for report.json and table.csv")->required();

  // diag
  auto* diag = app.add_subcommand("diag", "design diagnostics for a grouped dataset");
  std::string diag_data, diag_response, diag_groups, diag_out;
  double diag_c0 = 4.0;
  std::vector<int> diag_active;
  int diag_samples = 0;
  unsigned long long diag_seed = 0;
  diag->add_option("--data", diag_data, "CSV with response and covariates")->required();
  diag->add_option("--response", diag_response,
                   "response column, by header name or zero-based index (default: first)");
  diag->add_option("--groups", diag_groups,
                   "group sizes file over the intercept-augmented design")
      ->required();
  diag->add_option("--c0", diag_c0, "cone constant, must exceed 3")->capture_default_str();
  diag->add_option("--active", diag_active,
                   "comma list of 1-based active group ids; the intercept group 1 is "
                   "added automatically")
      ->delimiter(',');
  diag->add_option("--samples", diag_samples, "cone sample count (0: default)")
      ->capture_default_str();
  diag->add_option("--seed", diag_seed, "random seed")->capture_default_str();
  diag->add_option("--out", diag_out, "write diagnostics as JSON here (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand(fit)) {
    if (!fit_unpenalized && std::isnan(fit_lambda)) die("provide --lambda or --unpenalized");
    DatasetGuard data;
    load_dataset(fit_data, fit_response, data);
    GroupSizes sizes;
    if (!fit_l1) load_groups(fit_groups, sizes);
    gqr_model* model = nullptr;
    check_status(gqr_fit(data.ptr, sizes.values, sizes.count, fit_tau,
                         fit_unpenalized ? 0.0 : fit_lambda, fit_unpenalized ? 1 : 0, &model));
    char* text = nullptr;
    check_status(gqr_model_to_json(model, &text));
    const std::string brief =
        "objective " + format_double(gqr_model_objective(model)) + ", " +
        std::to_string(gqr_model_num_selected_groups(model)) + " groups selected, " +
        std::to_string(gqr_model_iterations(model)) + " iterations, relative gap " +
        format_double(gqr_model_relative_gap(model)) +
        (gqr_model_converged(model) ? "" : " (not converged)");
    gqr_model_free(model);
    emit(fit_out, take_string(text), brief);
    return 0;
  }

  if (app.got_subcommand(tune)) {
    DatasetGuard data;
    load_dataset(tune_data, tune_response, data);
    GroupSizes sizes;
    load_groups(tune_groups, sizes);
    double lambda = 0.0;
    char* text = nullptr;
    check_status(gqr_tune(data.ptr, sizes.values, sizes.count, tune_tau, tune_theta, tune_c,
                          tune_nsim, tune_seed, &lambda, &text));
    emit(tune_out, take_string(text), "lambda " + format_double(lambda));
    return 0;
  }

  if (app.got_subcommand(additive)) {
    DatasetGuard data;
    load_dataset(add_data, add_response, data);
    gqr_additive_model* model = nullptr;
    check_status(gqr_additive_fit(data.ptr, add_tau, add_basis.c_str(), add_knots, add_theta,
                                  add_c, add_nsim, add_seed, add_lambda, &model));
    char* text = nullptr;
    check_status(gqr_additive_to_json(model, &text));
    gqr_additive_free(model);
    const std::string json_text = take_string(text);
    const nlohmann::json parsed = nlohmann::json::parse(json_text);
    const std::string brief =
        add_basis + " basis, lambda " + format_double(parsed.at("lambda").get<double>()) +
        ", " + std::to_string(parsed.at("selected_covariates").size()) +
        " covariates selected";
    emit(add_out, json_text, brief);
    return 0;
  }

  if (app.got_subcommand(simulate)) {
    if (sim_model != 1 && sim_case_opt->count() > 0) die("--case applies to model 1 only");
    nlohmann::ordered_json config;
    config["model"] = sim_model;
    if (sim_case_opt->count() > 0) config["scenario"] = sim_case;
    if (sim_n_opt->count() > 0) config["n"] = sim_n;
    if (sim_q_opt->count() > 0) config["q"] = sim_q;
    if (sim_gs_opt->count() > 0) config["group_size"] = sim_group_size;
    if (sim_d_opt->count() > 0) config["d"] = sim_d;
    if (sim_knots_opt->count() > 0) config["knots"] = sim_knots;
    if (sim_tau_opt->count() > 0) config["tau"] = sim_tau;
    if (sim_reps_opt->count() > 0) config["reps"] = sim_reps;
    if (sim_seed_opt->count() > 0) config["seed"] = sim_seed;
    if (sim_theta_opt->count() > 0) config["theta"] = sim_theta;
    if (sim_c_opt->count() > 0) config["c"] = sim_c;
    if (sim_nsim_opt->count() > 0) config["n_sim"] = sim_nsim;
    if (sim_nmc_opt->count() > 0) config["n_mc"] = sim_nmc;
    if (sim_workers_opt->count() > 0) config["workers"] = sim_workers;
    if (sim_est_opt->count() > 0) {
      nlohmann::ordered_json names = nlohmann::ordered_json::array();
      std::string token;
      for (char ch : sim_estimators + ",") {
        if (ch == ',') {
          if (!token.empty()) names.push_back(token);
          token.clear();
        } else {
          token += ch;
        }
      }
      config["estimators"] = names;
    }
    char* text = nullptr;
    check_status(gqr_simulate(config.dump().c_str(), sim_out.c_str(), &text));
    const nlohmann::json report = nlohmann::json::parse(take_string(text));
    std::cout << "model " << sim_model << ", "
              << report.at("config").at("n_reps").get<int>() << " replications\n";
    for (const auto& summary : report.at("summaries")) {
      std::cout << "  " << summary.at("estimator").get<std::string>() << ": rmse "
                << format_double(summary.at("rmse").get<double>()) << ", groups "
                << format_double(summary.at("nsg_mean").get<double>()) << ", coefficients "
                << format_double(summary.at("nsv_mean").get<double>());
      if (summary.at("n_failed").get<int>() > 0) {
        std::cout << " (" << summary.at("n_failed").get<int>() << " failed)";
      }
      std::cout << "\n";
    }
    std::cout << "wrote " << sim_out << "/report.json and " << sim_out << "/table.csv\n";
    return 0;
  }

  if (app.got_subcommand(diag)) {
    DatasetGuard data;
    load_dataset(diag_data, diag_response, data);
    GroupSizes sizes;
    load_groups(diag_groups, sizes);
    std::vector<int> active = diag_active;
    bool has_intercept = false;
    for (int id : active) has_intercept = has_intercept || id == 1;
    if (!has_intercept) active.insert(active.begin(), 1);
    char* text = nullptr;
    check_status(gqr_diag(data.ptr, sizes.values, sizes.count, diag_c0, active.data(),
                          static_cast<int>(active.size()), diag_samples, diag_seed, &text));
    const std::string json_text = take_string(text);
    const nlohmann::json parsed = nlohmann::json::parse(json_text);
    const std::string brief =
        "restricted eigenvalues [" + format_double(parsed.at("phi_min").get<double>()) + ", " +
        format_double(parsed.at("phi_max").get<double>()) + "], gram square root off identity " +
        "by " + format_double(parsed.at("gram_sqrt_max_deviation").get<double>());
    emit(diag_out, json_text, brief);
    return 0;
  }

  return 0;
}
