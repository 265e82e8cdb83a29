#include "core/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>
#include <utility>

#include <json.hpp>

#include "core/error.hpp"
#include "core/objective.hpp"
#include "core/stats.hpp"
#include "core/tuning.hpp"

namespace gqr {
namespace {

using ordered_json = nlohmann::ordered_json;

// Substream roles under (seed, rep, role). Fixed so adding estimators to a
// run never shifts the streams of the existing ones.
constexpr std::uint64_t kRoleData = 0;
constexpr std::uint64_t kRoleTuneGrlasso = 1;
constexpr std::uint64_t kRoleTuneLasso = 2;
constexpr std::uint64_t kRoleMcError = 4;

void common_validate(double tau, int n_reps, double theta, double c, int n_sim, int workers) {
  require(tau > 0.0 && tau < 1.0, ErrorCode::invalid_argument, "tau must lie in (0, 1)");
  require(n_reps >= 1, ErrorCode::invalid_argument, "n_reps must be positive");
  require(theta > 0.0 && theta < 1.0, ErrorCode::invalid_argument, "theta must lie in (0, 1)");
  require(c > 0.0, ErrorCode::invalid_argument, "c must be positive");
  require(n_sim >= 1, ErrorCode::invalid_argument, "n_sim must be positive");
  require(workers >= 0, ErrorCode::invalid_argument, "workers must be nonnegative");
}

// Runs body(0..n_tasks-1) across a pool pulling indices from a shared
// counter. body must not throw; outputs go to disjoint slots indexed by task.
void parallel_for(int n_tasks, int workers, const std::function<void(int)>& body) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n_tasks));
  if (workers == 1) {
    for (int i = 0; i < n_tasks; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void fill_solver_fields(RepRecord& rec, const QuantileFit& f, double lambda,
                        const GroupPartition& partition) {
  rec.ok = true;
  rec.converged = f.converged;
  rec.iterations = f.iterations;
  rec.relative_gap = f.relative_gap;
  rec.lambda = lambda;
  const SelectionCounts counts = selection_counts(f.beta, partition);
  rec.nsg = counts.nsg;
  rec.nsv = counts.nsv;
}

RepRecord run_model1_rep(const Model1Config& config, const Model1Data& data,
                         const GroupedDesign& grouped, int rep, Estimator est) {
  RepRecord rec;
  rec.rep = rep;
  rec.estimator = estimator_name(est);
  try {
    const SolverOptions options;
    QuantileFit f;
    double lambda = 0.0;
    if (est == Estimator::grlasso) {
      PivotConfig pc;
      pc.tau = config.tau;
      pc.theta = config.theta;
      pc.c = config.c;
      pc.n_sim = config.n_sim;
      pc.seed = Rng::derive_seed(config.seed, static_cast<std::uint64_t>(rep), kRoleTuneGrlasso);
      lambda = select_lambda(grouped, pc).lambda;
      f = fit(grouped, data.y, config.tau, PenaltySpec::grouped(grouped, lambda), options);
    } else if (est == Estimator::lasso) {
      GroupedDesign singles =
          build_design(data.x, GroupPartition::singletons(static_cast<int>(data.x.cols())));
      PivotConfig pc;
      pc.tau = config.tau;
      pc.theta = config.theta;
      pc.c = config.c;
      pc.n_sim = config.n_sim;
      pc.seed = Rng::derive_seed(config.seed, static_cast<std::uint64_t>(rep), kRoleTuneLasso);
      lambda = select_lambda(singles, pc).lambda;
      f = fit(singles, data.y, config.tau, PenaltySpec::grouped(singles, lambda), options);
    } else {
      f = fit_unpenalized(grouped, data.y, config.tau, options);
    }
    fill_solver_fields(rec, f, lambda, data.partition);
    rec.err = (f.beta - data.beta_bar).norm();
    if (est == Estimator::grlasso) {
      const ConeCheck cone = cone_diagnostic(f.beta, data.beta_bar, data.partition, 4.0);
      rec.has_cone = true;
      rec.in_cone = cone.in_cone;
      rec.cone_lhs = cone.lhs;
      rec.cone_rhs = cone.rhs;
    }
  } catch (const std::exception& ex) {
    rec.ok = false;
    rec.error_message = ex.what();
  }
  return rec;
}

RepRecord run_model2_rep(const Model2Config& config, const Model2Data& data,
                         const BasisSpec& basis, int rep, Estimator est) {
  RepRecord rec;
  rec.rep = rep;
  rec.estimator = estimator_name(est);
  try {
    const SolverOptions options;
    const int m = basis.m;
    std::vector<int> sizes(static_cast<size_t>(config.d) + 1, m);
    sizes[0] = 1;
    const GroupPartition blocks = GroupPartition::from_sizes(sizes);

    AdditiveModel model;
    double lambda = 0.0;
    if (est == Estimator::grlasso) {
      PivotConfig pc;
      pc.tau = config.tau;
      pc.theta = config.theta;
      pc.c = config.c;
      pc.n_sim = config.n_sim;
      pc.seed = Rng::derive_seed(config.seed, static_cast<std::uint64_t>(rep), kRoleTuneGrlasso);
      model = fit_additive(data.z, data.y, config.tau, basis, pc, -1.0, options);
      lambda = model.lambda;
    } else {
      const GroupedDesign expanded = expand_design(data.z, basis);
      QuantileFit f;
      if (est == Estimator::lasso) {
        GroupedDesign singles =
            build_design(expanded.x(), GroupPartition::singletons(static_cast<int>(expanded.p())));
        PivotConfig pc;
        pc.tau = config.tau;
        pc.theta = config.theta;
        pc.c = config.c;
        pc.n_sim = config.n_sim;
        pc.seed = Rng::derive_seed(config.seed, static_cast<std::uint64_t>(rep), kRoleTuneLasso);
        lambda = select_lambda(singles, pc).lambda;
        f = fit(singles, data.y, config.tau, PenaltySpec::grouped(singles, lambda), options);
      } else {
        f = fit_unpenalized(expanded, data.y, config.tau, options);
      }
      model.basis = basis;
      model.beta = f.beta;
      model.lambda = lambda;
      model.fit = std::move(f);
      model.tuned = est == Estimator::lasso;
      const double tol = 1e-6 * std::max(1.0, model.beta.norm());
      for (int k = 1; k < blocks.num_groups(); ++k) {
        double norm2 = 0.0;
        for (int col : blocks.groups[static_cast<size_t>(k)]) {
          norm2 += model.beta[col] * model.beta[col];
        }
        if (std::sqrt(norm2) > tol) model.selected_covariates.push_back(k);
      }
    }
    fill_solver_fields(rec, model.fit, lambda, blocks);

    const int d = config.d;
    const auto sampler = [d](Rng& r) {
      Eigen::VectorXd z(d);
      for (int j = 0; j < d; ++j) z[j] = 2.0 * r.uniform01() - 1.0;
      return z;
    };
    rec.err = l2_error(
        model, [](const Eigen::VectorXd& z) { return model2_quantile_surface(z); }, sampler,
        config.n_mc, Rng::derive_seed(config.seed, static_cast<std::uint64_t>(rep), kRoleMcError));
  } catch (const std::exception& ex) {
    rec.ok = false;
    rec.error_message = ex.what();
  }
  return rec;
}

std::vector<EstimatorSummary> aggregate(const std::vector<RepRecord>& records,
                                        const std::vector<Estimator>& estimators) {
  std::vector<EstimatorSummary> summaries;
  summaries.reserve(estimators.size());
  for (Estimator est : estimators) {
    EstimatorSummary s;
    s.estimator = estimator_name(est);
    std::vector<double> nsg, nsv, errs;
    int in_cone = 0;
    int with_cone = 0;
    double sq_sum = 0.0;
    for (const RepRecord& rec : records) {
      if (rec.estimator != s.estimator) continue;
      if (!rec.ok) {
        ++s.n_failed;
        continue;
      }
      ++s.n_ok;
      if (!rec.converged) ++s.n_nonconverged;
      nsg.push_back(static_cast<double>(rec.nsg));
      nsv.push_back(static_cast<double>(rec.nsv));
      errs.push_back(rec.err);
      sq_sum += rec.err * rec.err;
      if (rec.has_cone) {
        ++with_cone;
        if (rec.in_cone) ++in_cone;
      }
    }
    s.nsg_mean = mean_of(nsg);
    s.nsg_sd = sample_sd(nsg);
    s.nsv_mean = mean_of(nsv);
    s.nsv_sd = sample_sd(nsv);
    s.rmse = s.n_ok > 0 ? std::sqrt(sq_sum / static_cast<double>(s.n_ok)) : 0.0;
    s.err_sd = sample_sd(errs);
    s.has_cone = with_cone > 0;
    s.cone_fraction =
        with_cone > 0 ? static_cast<double>(in_cone) / static_cast<double>(with_cone) : 0.0;
    summaries.push_back(std::move(s));
  }
  return summaries;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::io, "cannot open for writing: " + path);
  out << text;
  out.flush();
  require(out.good(), ErrorCode::io, "write failed: " + path);
}

void write_outputs(const ExperimentReport& report, const std::string& out_dir) {
  if (out_dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec, ErrorCode::io, "cannot create output directory: " + out_dir);
  const std::filesystem::path dir(out_dir);
  write_text((dir / "report.json").string(), report_to_json(report));
  write_text((dir / "table.csv").string(), report_to_csv(report));
  // Wall clock lives outside report.json so the report stays byte-identical
  // across runs with the same seed.
  ordered_json timing;
  timing["wall_seconds"] = report.wall_seconds;
  write_text((dir / "timing.json").string(), timing.dump(2) + "\n");
}

void check_estimators(const std::vector<Estimator>& estimators) {
  require(!estimators.empty(), ErrorCode::invalid_argument, "estimator list is empty");
  for (size_t i = 0; i < estimators.size(); ++i) {
    for (size_t j = i + 1; j < estimators.size(); ++j) {
      require(estimators[i] != estimators[j], ErrorCode::invalid_argument,
              "duplicate estimator: " + estimator_name(estimators[i]));
    }
  }
}

ordered_json estimator_array(const std::vector<Estimator>& estimators) {
  ordered_json arr = ordered_json::array();
  for (Estimator est : estimators) arr.push_back(estimator_name(est));
  return arr;
}

}  // namespace

void Model1Config::validate() const {
  require(n >= 1, ErrorCode::invalid_argument, "n must be positive");
  require(q >= 2, ErrorCode::invalid_argument, "q must be at least 2");
  require(group_size >= 1, ErrorCode::invalid_argument, "group_size must be positive");
  require(scenario == 1 || scenario == 2, ErrorCode::invalid_argument, "scenario must be 1 or 2");
  require(scenario == 1 || q >= 6, ErrorCode::invalid_argument,
          "scenario 2 needs at least five non-intercept groups");
  require(std::abs(ar_corr) < 1.0, ErrorCode::invalid_argument, "ar_corr must lie in (-1, 1)");
  common_validate(tau, n_reps, theta, c, n_sim, workers);
}

Model1Generator::Model1Generator(const Model1Config& config) : config_(config) {
  config_.validate();
  const int pm = config_.p() - 1;
  Eigen::MatrixXd cov(pm, pm);
  for (int i = 0; i < pm; ++i) {
    for (int j = 0; j < pm; ++j) {
      cov(i, j) = std::pow(config_.ar_corr, std::abs(i - j));
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  require(llt.info() == Eigen::Success, ErrorCode::numeric,
          "Toeplitz correlation is not positive definite");
  chol_ = llt.matrixL();

  beta_bar_ = Eigen::VectorXd::Zero(config_.p());
  beta_bar_[0] = 1.0;
  if (config_.scenario == 1) {
    beta_bar_.segment(1, config_.group_size).setOnes();
  } else {
    for (int t = 0; t < 5; ++t) beta_bar_[1 + t * config_.group_size] = 1.0;
  }
}

Model1Data Model1Generator::draw(Rng& rng) const {
  const int n = config_.n;
  const int p = config_.p();
  const int pm = p - 1;

  // Fill order is part of the stream contract: the n x (p-1) standard-normal
  // block row by row, then one noise draw per observation.
  Eigen::MatrixXd z(n, pm);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < pm; ++j) z(i, j) = rng.normal();
  }
  const double shift = normal_quantile(config_.tau);
  Eigen::VectorXd e(n);
  for (int i = 0; i < n; ++i) e[i] = rng.normal() - shift;

  Model1Data data;
  data.x.resize(n, p);
  data.x.col(0).setOnes();
  data.x.rightCols(pm).noalias() = z * chol_.transpose();
  data.beta_bar = beta_bar_;
  data.y = data.x * beta_bar_ + e;
  std::vector<int> sizes(static_cast<size_t>(config_.q), config_.group_size);
  sizes[0] = 1;
  data.partition = GroupPartition::from_sizes(sizes);
  return data;
}

Model1Data gen_model1(const Model1Config& config, Rng& rng) {
  return Model1Generator(config).draw(rng);
}

void Model2Config::validate() const {
  require(n >= 1, ErrorCode::invalid_argument, "n must be positive");
  require(d >= 3, ErrorCode::invalid_argument, "d must be at least 3 (three active covariates)");
  require(knots >= 1, ErrorCode::invalid_argument, "knots must be positive");
  require(n_mc >= 1, ErrorCode::invalid_argument, "n_mc must be positive");
  common_validate(tau, n_reps, theta, c, n_sim, workers);
}

double model2_quantile_surface(const Eigen::VectorXd& z) {
  require(z.size() >= 3, ErrorCode::invalid_argument,
          "quantile surface needs at least three coordinates");
  constexpr double kE = 2.718281828459045235360287;
  const double g1 = z[0];
  const double g2 = std::cos(3.14159265358979323846 * z[1]);
  const double g3 = kE * (std::exp(z[2]) - kE + 1.0 / kE);
  return 0.1 + g1 + g2 + g3;
}

Model2Data gen_model2(const Model2Config& config, Rng& rng) {
  config.validate();
  const int n = config.n;
  const int d = config.d;
  Model2Data data;
  data.z.resize(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) data.z(i, j) = 2.0 * rng.uniform01() - 1.0;
  }
  const double shift = normal_quantile(config.tau);
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    const double e = rng.normal() - shift;
    const double s2 = 0.7 + 0.1 * (data.z(i, 0) * data.z(i, 0) + data.z(i, 1) * data.z(i, 1) +
                                   data.z(i, 2) * data.z(i, 2));
    data.y[i] = model2_quantile_surface(data.z.row(i).transpose()) + 0.5 * std::sqrt(s2) * e;
  }
  return data;
}

std::string estimator_name(Estimator est) {
  switch (est) {
    case Estimator::grlasso:
      return "grlasso";
    case Estimator::lasso:
      return "lasso";
    case Estimator::qr:
      return "qr";
  }
  fail(ErrorCode::internal, "unknown estimator");
}

Estimator estimator_from_name(const std::string& name) {
  if (name == "grlasso") return Estimator::grlasso;
  if (name == "lasso") return Estimator::lasso;
  if (name == "qr") return Estimator::qr;
  fail(ErrorCode::invalid_argument, "unknown estimator: " + name);
}

SelectionCounts selection_counts(const Eigen::VectorXd& beta, const GroupPartition& partition) {
  partition.validate(static_cast<int>(beta.size()));
  const double group_tol = 1e-6 * std::max(1.0, beta.norm());
  const double coef_tol = 1e-6 * std::max(1.0, beta.lpNorm<Eigen::Infinity>());
  SelectionCounts counts;
  counts.nsg = 1;  // the intercept group is always counted
  for (int k = 1; k < partition.num_groups(); ++k) {
    double norm2 = 0.0;
    for (int col : partition.groups[static_cast<size_t>(k)]) norm2 += beta[col] * beta[col];
    if (std::sqrt(norm2) > group_tol) ++counts.nsg;
  }
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (std::abs(beta[j]) > coef_tol) ++counts.nsv;
  }
  return counts;
}

ConeCheck cone_diagnostic(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_bar,
                          const GroupPartition& partition, double c0) {
  require(c0 > 3.0, ErrorCode::invalid_argument, "cone constant must exceed 3");
  require(beta_hat.size() == beta_bar.size(), ErrorCode::dimension_mismatch,
          "beta_hat and beta_bar differ in length");
  partition.validate(static_cast<int>(beta_hat.size()));

  const Eigen::VectorXd alpha = beta_hat - beta_bar;
  ConeCheck cone;
  bool active_beyond_intercept = false;
  for (int k = 0; k < partition.num_groups(); ++k) {
    double a2 = 0.0;
    double b2 = 0.0;
    for (int col : partition.groups[static_cast<size_t>(k)]) {
      a2 += alpha[col] * alpha[col];
      b2 += beta_bar[col] * beta_bar[col];
    }
    const double weighted = std::sqrt(static_cast<double>(partition.group_size(k))) * std::sqrt(a2);
    const bool on_support = k == 0 || b2 > 0.0;
    if (on_support) {
      cone.rhs += weighted;
      if (k > 0) active_beyond_intercept = true;
    } else {
      cone.lhs += weighted;
    }
  }
  cone.rhs *= c0;
  cone.in_cone =
      !active_beyond_intercept || cone.lhs <= cone.rhs + 1e-12 * (1.0 + std::abs(cone.rhs));
  return cone;
}

std::string report_to_json(const ExperimentReport& report) {
  ordered_json root;
  root["model"] = report.model;
  root["config"] = ordered_json::parse(report.config_json);
  ordered_json summaries = ordered_json::array();
  for (const EstimatorSummary& s : report.summaries) {
    ordered_json item;
    item["estimator"] = s.estimator;
    item["n_ok"] = s.n_ok;
    item["n_failed"] = s.n_failed;
    item["n_nonconverged"] = s.n_nonconverged;
    item["nsg_mean"] = s.nsg_mean;
    item["nsg_sd"] = s.nsg_sd;
    item["nsv_mean"] = s.nsv_mean;
    item["nsv_sd"] = s.nsv_sd;
    item["rmse"] = s.rmse;
    item["err_sd"] = s.err_sd;
    if (s.has_cone) item["cone_fraction"] = s.cone_fraction;
    summaries.push_back(std::move(item));
  }
  root["summaries"] = std::move(summaries);
  ordered_json records = ordered_json::array();
  for (const RepRecord& rec : report.records) {
    ordered_json item;
    item["rep"] = rec.rep;
    item["estimator"] = rec.estimator;
    item["ok"] = rec.ok;
    if (!rec.ok) {
      item["error"] = rec.error_message;
      records.push_back(std::move(item));
      continue;
    }
    item["converged"] = rec.converged;
    item["iterations"] = rec.iterations;
    item["relative_gap"] = rec.relative_gap;
    item["lambda"] = rec.lambda;
    item["nsg"] = rec.nsg;
    item["nsv"] = rec.nsv;
    item["err"] = rec.err;
    if (rec.has_cone) {
      item["in_cone"] = rec.in_cone;
      item["cone_lhs"] = rec.cone_lhs;
      item["cone_rhs"] = rec.cone_rhs;
    }
    records.push_back(std::move(item));
  }
  root["records"] = std::move(records);
  return root.dump(2) + "\n";
}

std::string report_to_csv(const ExperimentReport& report) {
  std::string csv = "estimator,nsg_mean,nsg_sd,nsv_mean,nsv_sd,rmse,err_sd\n";
  char line[256];
  for (const EstimatorSummary& s : report.summaries) {
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", s.estimator.c_str(),
                  s.nsg_mean, s.nsg_sd, s.nsv_mean, s.nsv_sd, s.rmse, s.err_sd);
    csv += line;
  }
  return csv;
}

ExperimentReport run_experiment(const Model1Config& config,
                                const std::vector<Estimator>& estimators,
                                const std::string& out_dir) {
  config.validate();
  check_estimators(estimators);
  const auto start = std::chrono::steady_clock::now();

  const Model1Generator gen(config);
  const int ne = static_cast<int>(estimators.size());
  std::vector<RepRecord> records(static_cast<size_t>(config.n_reps) * ne);
  parallel_for(config.n_reps, config.workers, [&](int rep) {
    Rng data_rng = Rng::substream(config.seed, static_cast<std::uint64_t>(rep), kRoleData);
    const Model1Data data = gen.draw(data_rng);
    const GroupedDesign grouped = build_design(data.x, data.partition);
    for (int e = 0; e < ne; ++e) {
      records[static_cast<size_t>(rep) * ne + e] =
          run_model1_rep(config, data, grouped, rep, estimators[static_cast<size_t>(e)]);
    }
  });

  ExperimentReport report;
  report.model = "model1";
  ordered_json cfg;
  cfg["model"] = "model1";
  cfg["n"] = config.n;
  cfg["q"] = config.q;
  cfg["group_size"] = config.group_size;
  cfg["p"] = config.p();
  cfg["scenario"] = config.scenario;
  cfg["tau"] = config.tau;
  cfg["ar_corr"] = config.ar_corr;
  cfg["n_reps"] = config.n_reps;
  cfg["seed"] = config.seed;
  cfg["theta"] = config.theta;
  cfg["c"] = config.c;
  cfg["n_sim"] = config.n_sim;
  cfg["estimators"] = estimator_array(estimators);
  report.config_json = cfg.dump();
  report.records = std::move(records);
  report.summaries = aggregate(report.records, estimators);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(report, out_dir);
  return report;
}

ExperimentReport run_experiment(const Model2Config& config,
                                const std::vector<Estimator>& estimators,
                                const std::string& out_dir) {
  config.validate();
  check_estimators(estimators);
  const auto start = std::chrono::steady_clock::now();

  const BasisSpec basis =
      build_basis(BasisFamily::cubic_bspline, config.knots,
                  std::vector<std::array<double, 2>>(static_cast<size_t>(config.d), {-1.0, 1.0}));
  const int ne = static_cast<int>(estimators.size());
  std::vector<RepRecord> records(static_cast<size_t>(config.n_reps) * ne);
  parallel_for(config.n_reps, config.workers, [&](int rep) {
    Rng data_rng = Rng::substream(config.seed, static_cast<std::uint64_t>(rep), kRoleData);
    const Model2Data data = gen_model2(config, data_rng);
    for (int e = 0; e < ne; ++e) {
      records[static_cast<size_t>(rep) * ne + e] =
          run_model2_rep(config, data, basis, rep, estimators[static_cast<size_t>(e)]);
    }
  });

  ExperimentReport report;
  report.model = "model2";
  ordered_json cfg;
  cfg["model"] = "model2";
  cfg["n"] = config.n;
  cfg["d"] = config.d;
  cfg["tau"] = config.tau;
  cfg["knots"] = config.knots;
  cfg["n_reps"] = config.n_reps;
  cfg["seed"] = config.seed;
  cfg["theta"] = config.theta;
  cfg["c"] = config.c;
  cfg["n_sim"] = config.n_sim;
  cfg["n_mc"] = config.n_mc;
  cfg["estimators"] = estimator_array(estimators);
  report.config_json = cfg.dump();
  report.records = std::move(records);
  report.summaries = aggregate(report.records, estimators);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(report, out_dir);
  return report;
}

}  // namespace gqr
