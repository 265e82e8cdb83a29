#include "gqr/gqr.h"

#include <Eigen/Dense>
#include <cstdlib>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/additive.hpp"
#include "core/diagnostics.hpp"
#include "core/error.hpp"
#include "core/grouped_design.hpp"
#include "core/io.hpp"
#include "core/objective.hpp"
#include "core/simulate.hpp"
#include "core/solver.hpp"
#include "core/tuning.hpp"

#ifndef GQR_VERSION
#define GQR_VERSION "0.0.0"
#endif

using ordered_json = nlohmann::ordered_json;

struct gqr_dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  // covariates only; the intercept is added at fit time
};

struct gqr_model {
  gqr::QuantileFit fit;
  std::vector<int> group_sizes;  // over the intercept-augmented design
  std::string mode;              // "grouped" | "l1" | "unpenalized"
  gqr::SolverOptions options;
};

struct gqr_additive_model {
  gqr::AdditiveModel model;
};

namespace {

thread_local std::string t_last_error;

template <typename F>
gqr_status wrap(F&& body) noexcept {
  try {
    body();
    t_last_error.clear();
    return GQR_OK;
  } catch (const gqr::Error& e) {
    t_last_error = e.what();
    return static_cast<gqr_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    t_last_error = "out of memory";
    return GQR_ERROR_INTERNAL;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return GQR_ERROR_INTERNAL;
  } catch (...) {
    t_last_error = "unknown error";
    return GQR_ERROR_INTERNAL;
  }
}

void check(bool cond, const std::string& what) {
  gqr::require(cond, gqr::ErrorCode::invalid_argument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  gqr::require(out != nullptr, gqr::ErrorCode::internal, "out of memory");
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Intercept-augmented design under the C-interface group convention.
gqr::GroupedDesign make_design(const gqr_dataset* data, const int* group_sizes, int n_groups) {
  check(data != nullptr, "dataset is null");
  const auto n = data->x.rows();
  const auto d = data->x.cols();
  Eigen::MatrixXd x(n, d + 1);
  x.col(0).setOnes();
  x.rightCols(d) = data->x;

  gqr::GroupPartition partition;
  if (group_sizes == nullptr) {
    check(n_groups == 0, "group_sizes is null but n_groups is nonzero");
    partition = gqr::GroupPartition::singletons(static_cast<int>(d) + 1);
  } else {
    check(n_groups >= 1, "n_groups must be positive");
    std::vector<int> sizes(group_sizes, group_sizes + n_groups);
    check(sizes.front() == 1, "the first group must be the intercept of size 1");
    const long total = std::accumulate(sizes.begin(), sizes.end(), 0L);
    check(total == static_cast<long>(d) + 1,
          "group sizes sum to " + std::to_string(total) + ", expected " + std::to_string(d + 1) +
              " (intercept + covariates)");
    partition = gqr::GroupPartition::from_sizes(sizes);
  }
  return gqr::build_design(std::move(x), std::move(partition));
}

gqr::PivotConfig make_pivot(double tau, double theta, double c, int n_sim,
                            unsigned long long seed) {
  gqr::PivotConfig pc;
  pc.tau = tau;
  pc.theta = theta;
  pc.c = c;
  pc.n_sim = n_sim;
  pc.seed = static_cast<uint64_t>(seed);
  return pc;
}

ordered_json solver_options_json(const gqr::SolverOptions& o) {
  ordered_json j;
  j["max_iter"] = o.max_iter;
  j["abs_tol"] = o.abs_tol;
  j["rel_tol"] = o.rel_tol;
  j["rho"] = o.rho;
  j["adapt_rho"] = o.adapt_rho;
  j["rho_freeze_iter"] = o.rho_freeze_iter;
  j["over_relax"] = o.over_relax;
  j["working_set"] = o.working_set;
  j["certificate_interval"] = o.certificate_interval;
  j["group_zero_tol"] = o.group_zero_tol;
  j["ridge_eps"] = o.ridge_eps;
  return j;
}

ordered_json fit_json(const gqr::QuantileFit& fit) {
  ordered_json j;
  j["tau"] = fit.tau;
  j["lambda"] = fit.lambda;
  j["objective"] = fit.objective;
  j["loss_term"] = fit.loss_term;
  j["penalty_term"] = fit.penalty_term;
  j["duality_gap"] = fit.duality_gap;
  j["relative_gap"] = fit.relative_gap;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["ridge_used"] = fit.ridge_used;
  j["selected_groups"] = fit.selected_groups;
  j["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
  return j;
}

gqr::BasisFamily parse_family(const char* family) {
  check(family != nullptr, "family is null");
  const std::string name(family);
  if (name == "bspline" || name == "cubic_bspline") return gqr::BasisFamily::cubic_bspline;
  if (name == "fourier") return gqr::BasisFamily::fourier;
  gqr::fail(gqr::ErrorCode::invalid_argument, "unknown basis family: " + name);
}

std::vector<gqr::Estimator> parse_estimators(const ordered_json& cfg) {
  std::vector<gqr::Estimator> estimators;
  if (cfg.contains("estimators")) {
    check(cfg["estimators"].is_array(), "estimators must be an array of names");
    for (const auto& item : cfg["estimators"]) {
      check(item.is_string(), "estimators must be an array of names");
      estimators.push_back(gqr::estimator_from_name(item.get<std::string>()));
    }
  } else {
    estimators = {gqr::Estimator::grlasso, gqr::Estimator::lasso, gqr::Estimator::qr};
  }
  return estimators;
}

void reject_unknown_keys(const ordered_json& cfg, const std::vector<std::string>& allowed) {
  for (const auto& item : cfg.items()) {
    bool known = false;
    for (const std::string& key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    check(known, "unknown simulate config key: " + item.key());
  }
}

template <typename T>
void maybe_read(const ordered_json& cfg, const char* key, T& out) {
  if (cfg.contains(key)) out = cfg[key].get<T>();
}

}  // namespace

extern "C" {

const char* gqr_version(void) { return GQR_VERSION; }

const char* gqr_last_error(void) { return t_last_error.c_str(); }

void gqr_string_free(char* text) { std::free(text); }

gqr_status gqr_dataset_read_csv(const char* path, const char* response, gqr_dataset** out) {
  return wrap([&]() {
    check(path != nullptr, "path is null");
    check(out != nullptr, "output pointer is null");
    const gqr::CsvTable table = gqr::read_csv(path);
    gqr::ResponseSplit split =
        gqr::split_response(table, response == nullptr ? "" : std::string(response));
    auto* data = new gqr_dataset;
    data->y = std::move(split.y);
    data->x = std::move(split.x);
    *out = data;
  });
}

gqr_status gqr_dataset_create(int n, int d, const double* y, const double* x,
                              gqr_dataset** out) {
  return wrap([&]() {
    check(out != nullptr, "output pointer is null");
    check(y != nullptr && x != nullptr, "data pointers are null");
    check(n >= 1 && d >= 1, "need n >= 1 rows and d >= 1 covariates");
    auto* data = new gqr_dataset;
    data->y = Eigen::Map<const Eigen::VectorXd>(y, n);
    data->x = Eigen::Map<const Eigen::MatrixXd>(x, n, d);
    for (int i = 0; i < n; ++i) {
      check(std::isfinite(data->y[i]), "response contains a non-finite value");
    }
    check(data->x.allFinite(), "covariates contain a non-finite value");
    *out = data;
  });
}

int gqr_dataset_rows(const gqr_dataset* data) {
  return data == nullptr ? 0 : static_cast<int>(data->x.rows());
}

int gqr_dataset_covariates(const gqr_dataset* data) {
  return data == nullptr ? 0 : static_cast<int>(data->x.cols());
}

void gqr_dataset_free(gqr_dataset* data) { delete data; }

gqr_status gqr_read_group_sizes(const char* path, int** sizes_out, int* count_out) {
  return wrap([&]() {
    check(path != nullptr, "path is null");
    check(sizes_out != nullptr && count_out != nullptr, "output pointer is null");
    const std::vector<int> sizes = gqr::read_group_sizes(path);
    int* values = static_cast<int*>(std::malloc(sizes.size() * sizeof(int)));
    if (values == nullptr) throw std::bad_alloc();
    std::memcpy(values, sizes.data(), sizes.size() * sizeof(int));
    *sizes_out = values;
    *count_out = static_cast<int>(sizes.size());
  });
}

void gqr_ints_free(int* values) { std::free(values); }

gqr_status gqr_fit(const gqr_dataset* data, const int* group_sizes, int n_groups, double tau,
                   double lambda, int unpenalized, gqr_model** out) {
  return wrap([&]() {
    check(out != nullptr, "output pointer is null");
    const gqr::GroupedDesign design = make_design(data, group_sizes, n_groups);
    auto* model = new gqr_model;
    try {
      if (group_sizes != nullptr) {
        model->group_sizes.assign(group_sizes, group_sizes + n_groups);
        model->mode = unpenalized ? "unpenalized" : "grouped";
      } else {
        model->group_sizes.assign(static_cast<size_t>(design.q()), 1);
        model->mode = unpenalized ? "unpenalized" : "l1";
      }
      if (unpenalized) {
        model->fit = gqr::fit_unpenalized(design, data->y, tau, model->options);
      } else {
        check(lambda >= 0.0, "lambda must be nonnegative");
        model->fit = gqr::fit(design, data->y, tau,
                              gqr::PenaltySpec::grouped(design, lambda), model->options);
      }
    } catch (...) {
      delete model;
      throw;
    }
    *out = model;
  });
}

int gqr_model_num_coefficients(const gqr_model* model) {
  return model == nullptr ? 0 : static_cast<int>(model->fit.beta.size());
}

gqr_status gqr_model_coefficients(const gqr_model* model, double* beta) {
  return wrap([&]() {
    check(model != nullptr, "model is null");
    check(beta != nullptr, "output buffer is null");
    Eigen::Map<Eigen::VectorXd>(beta, model->fit.beta.size()) = model->fit.beta;
  });
}

double gqr_model_objective(const gqr_model* model) {
  return model == nullptr ? 0.0 : model->fit.objective;
}

double gqr_model_relative_gap(const gqr_model* model) {
  return model == nullptr ? 0.0 : model->fit.relative_gap;
}

int gqr_model_iterations(const gqr_model* model) {
  return model == nullptr ? 0 : model->fit.iterations;
}

int gqr_model_converged(const gqr_model* model) {
  return model == nullptr ? 0 : (model->fit.converged ? 1 : 0);
}

int gqr_model_num_selected_groups(const gqr_model* model) {
  return model == nullptr ? 0 : static_cast<int>(model->fit.selected_groups.size());
}

gqr_status gqr_model_to_json(const gqr_model* model, char** json) {
  return wrap([&]() {
    check(model != nullptr, "model is null");
    check(json != nullptr, "output pointer is null");
    ordered_json j = fit_json(model->fit);
    j["mode"] = model->mode;
    j["group_sizes"] = model->group_sizes;
    j["options"] = solver_options_json(model->options);
    *json = dup_string(j.dump(2) + "\n");
  });
}

void gqr_model_free(gqr_model* model) { delete model; }

gqr_status gqr_tune(const gqr_dataset* data, const int* group_sizes, int n_groups, double tau,
                    double theta, double c, int n_sim, unsigned long long seed, double* lambda,
                    char** json) {
  return wrap([&]() {
    check(lambda != nullptr, "lambda output pointer is null");
    const gqr::GroupedDesign design = make_design(data, group_sizes, n_groups);
    const gqr::TuningResult result =
        gqr::select_lambda(design, make_pivot(tau, theta, c, n_sim, seed));
    *lambda = result.lambda;
    if (json != nullptr) {
      ordered_json j;
      j["lambda"] = result.lambda;
      j["quantile_value"] = result.quantile_value;
      j["tau"] = result.config.tau;
      j["theta"] = result.config.theta;
      j["c"] = result.config.c;
      j["n_sim"] = result.config.n_sim;
      j["seed"] = result.config.seed;
      j["tail_undersampled"] = result.tail_undersampled;
      j["draws"] =
          std::vector<double>(result.draws.data(), result.draws.data() + result.draws.size());
      *json = dup_string(j.dump(2) + "\n");
    }
  });
}

gqr_status gqr_additive_fit(const gqr_dataset* data, double tau, const char* family,
                            int m_or_knots, double theta, double c, int n_sim,
                            unsigned long long seed, double lambda_override,
                            gqr_additive_model** out) {
  return wrap([&]() {
    check(data != nullptr, "dataset is null");
    check(out != nullptr, "output pointer is null");
    gqr::BasisSpec basis;
    basis.family = parse_family(family);
    if (basis.family == gqr::BasisFamily::cubic_bspline) {
      basis.knots = m_or_knots;
      basis.m = m_or_knots + 3;
    } else {
      basis.m = m_or_knots;
    }
    basis.domains.clear();  // filled from the data columns at fit time
    auto* handle = new gqr_additive_model;
    try {
      handle->model = gqr::fit_additive(data->x, data->y, tau, basis,
                                        make_pivot(tau, theta, c, n_sim, seed), lambda_override);
    } catch (...) {
      delete handle;
      throw;
    }
    *out = handle;
  });
}

gqr_status gqr_additive_predict(const gqr_additive_model* model, const double* z, int d,
                                double* value) {
  return wrap([&]() {
    check(model != nullptr, "model is null");
    check(z != nullptr && value != nullptr, "pointer argument is null");
    check(d == model->model.basis.d(),
          "z has " + std::to_string(d) + " coordinates, model expects " +
              std::to_string(model->model.basis.d()));
    *value = gqr::predict_g(model->model, Eigen::Map<const Eigen::VectorXd>(z, d));
  });
}

gqr_status gqr_additive_to_json(const gqr_additive_model* handle, char** json) {
  return wrap([&]() {
    check(handle != nullptr, "model is null");
    check(json != nullptr, "output pointer is null");
    const gqr::AdditiveModel& model = handle->model;
    ordered_json j;
    j["family"] =
        model.basis.family == gqr::BasisFamily::cubic_bspline ? "bspline" : "fourier";
    j["functions_per_covariate"] = model.basis.m;
    if (model.basis.family == gqr::BasisFamily::cubic_bspline) {
      j["knots"] = model.basis.knots;
    }
    ordered_json domains = ordered_json::array();
    for (const auto& dom : model.basis.domains) domains.push_back({dom[0], dom[1]});
    j["domains"] = std::move(domains);
    j["lambda"] = model.lambda;
    j["tuned"] = model.tuned;
    if (model.tuned) {
      ordered_json t;
      t["quantile_value"] = model.tuning.quantile_value;
      t["theta"] = model.tuning.config.theta;
      t["c"] = model.tuning.config.c;
      t["n_sim"] = model.tuning.config.n_sim;
      t["seed"] = model.tuning.config.seed;
      t["tail_undersampled"] = model.tuning.tail_undersampled;
      j["tuning"] = std::move(t);
    }
    j["selected_covariates"] = model.selected_covariates;
    j["beta"] =
        std::vector<double>(model.beta.data(), model.beta.data() + model.beta.size());
    j["fit"] = fit_json(model.fit);
    *json = dup_string(j.dump(2) + "\n");
  });
}

void gqr_additive_free(gqr_additive_model* model) { delete model; }

gqr_status gqr_simulate(const char* config_json, const char* out_dir, char** json) {
  return wrap([&]() {
    check(config_json != nullptr, "config_json is null");
    ordered_json cfg;
    try {
      cfg = ordered_json::parse(config_json);
    } catch (const nlohmann::json::parse_error& e) {
      gqr::fail(gqr::ErrorCode::invalid_argument,
                std::string("config_json does not parse: ") + e.what());
    }
    check(cfg.is_object(), "config_json must be a JSON object");
    check(cfg.contains("model"), "config needs a \"model\" of 1 or 2");
    const int model = cfg["model"].get<int>();
    const std::string dir = out_dir == nullptr ? "" : out_dir;
    const std::vector<gqr::Estimator> estimators = parse_estimators(cfg);
    gqr::ExperimentReport report;
    if (model == 1) {
      reject_unknown_keys(cfg, {"model", "n", "q", "group_size", "scenario", "tau", "ar_corr",
                                "reps", "seed", "theta", "c", "n_sim", "workers", "estimators"});
      gqr::Model1Config config;
      maybe_read(cfg, "n", config.n);
      maybe_read(cfg, "q", config.q);
      maybe_read(cfg, "group_size", config.group_size);
      maybe_read(cfg, "scenario", config.scenario);
      maybe_read(cfg, "tau", config.tau);
      maybe_read(cfg, "ar_corr", config.ar_corr);
      maybe_read(cfg, "reps", config.n_reps);
      maybe_read(cfg, "seed", config.seed);
      maybe_read(cfg, "theta", config.theta);
      maybe_read(cfg, "c", config.c);
      maybe_read(cfg, "n_sim", config.n_sim);
      maybe_read(cfg, "workers", config.workers);
      report = gqr::run_experiment(config, estimators, dir);
    } else if (model == 2) {
      reject_unknown_keys(cfg, {"model", "n", "d", "tau", "knots", "reps", "seed", "theta", "c",
                                "n_sim", "n_mc", "workers", "estimators"});
      gqr::Model2Config config;
      maybe_read(cfg, "n", config.n);
      maybe_read(cfg, "d", config.d);
      maybe_read(cfg, "tau", config.tau);
      maybe_read(cfg, "knots", config.knots);
      maybe_read(cfg, "reps", config.n_reps);
      maybe_read(cfg, "seed", config.seed);
      maybe_read(cfg, "theta", config.theta);
      maybe_read(cfg, "c", config.c);
      maybe_read(cfg, "n_sim", config.n_sim);
      maybe_read(cfg, "n_mc", config.n_mc);
      maybe_read(cfg, "workers", config.workers);
      report = gqr::run_experiment(config, estimators, dir);
    } else {
      gqr::fail(gqr::ErrorCode::invalid_argument, "model must be 1 or 2");
    }
    if (json != nullptr) *json = dup_string(gqr::report_to_json(report));
  });
}

gqr_status gqr_diag(const gqr_dataset* data, const int* group_sizes, int n_groups, double c0,
                    const int* active_groups, int n_active, int n_samples,
                    unsigned long long seed, char** json) {
  return wrap([&]() {
    check(json != nullptr, "output pointer is null");
    check(n_active >= 0, "n_active must be nonnegative");
    check(active_groups != nullptr || n_active == 0,
          "active_groups is null but n_active is nonzero");
    const gqr::GroupedDesign design = make_design(data, group_sizes, n_groups);

    gqr::ConeSampleConfig config;
    config.c0 = c0;
    config.seed = static_cast<uint64_t>(seed);
    if (n_samples > 0) config.n_samples = n_samples;
    config.s_bar.assign(active_groups, active_groups + n_active);
    if (config.s_bar.empty()) config.s_bar.push_back(1);

    const Eigen::MatrixXd gram =
        design.x().transpose() * design.x() / static_cast<double>(design.n());
    const gqr::RestrictedEigs eigs =
        gqr::estimate_restricted_eigs(gram, design.partition(), config);
    const gqr::Omega0Result omega = gqr::omega0_check(design);

    ordered_json j;
    j["phi_min"] = eigs.phi_min;
    j["phi_max"] = eigs.phi_max;
    j["gram_sqrt_max_deviation"] = omega.max_deviation;
    j["gram_sqrt_within_half"] = omega.holds;
    j["c0"] = config.c0;
    j["active_groups"] = config.s_bar;
    j["n_samples"] = config.n_samples;
    j["seed"] = config.seed;
    *json = dup_string(j.dump(2) + "\n");
  });
}

}  // extern "C"
