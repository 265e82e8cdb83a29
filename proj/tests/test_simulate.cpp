#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "core/error.hpp"
#include "core/simulate.hpp"
#include "core/stats.hpp"
#include "test_helpers.hpp"

using gqr::cone_diagnostic;
using gqr::Estimator;
using gqr::ExperimentReport;
using gqr::gen_model1;
using gqr::gen_model2;
using gqr::GroupPartition;
using gqr::Model1Config;
using gqr::Model1Data;
using gqr::Model2Config;
using gqr::Model2Data;
using gqr::model2_quantile_surface;
using gqr::RepRecord;
using gqr::report_to_csv;
using gqr::report_to_json;
using gqr::Rng;
using gqr::run_experiment;
using gqr::selection_counts;

namespace {

double empirical_quantile(std::vector<double> v, double tau) {
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  auto idx = static_cast<long>(std::ceil(tau * n)) - 1;
  idx = std::clamp<long>(idx, 0, static_cast<long>(v.size()) - 1);
  return v[static_cast<size_t>(idx)];
}

double column_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean();
  const double mb = b.mean();
  const Eigen::VectorXd ca = a.array() - ma;
  const Eigen::VectorXd cb = b.array() - mb;
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

Model1Config tiny_model1(int n_reps) {
  Model1Config config;
  config.n = 50;
  config.q = 4;
  config.group_size = 2;
  config.scenario = 1;
  config.tau = 0.5;
  config.n_reps = n_reps;
  config.seed = 5;
  config.n_sim = 60;
  return config;
}

}  // namespace

TEST_CASE("model 1 config validation") {
  Model1Config config;
  CHECK_NOTHROW(config.validate());
  CHECK(config.p() == 501);

  Model1Config bad = config;
  bad.tau = 0.0;
  CHECK_THROWS_AS(bad.validate(), gqr::Error);
  bad = config;
  bad.q = 1;
  CHECK_THROWS_AS(bad.validate(), gqr::Error);
  bad = config;
  bad.scenario = 3;
  CHECK_THROWS_AS(bad.validate(), gqr::Error);
  bad = config;
  bad.scenario = 2;
  bad.q = 5;  // scenario 2 needs five non-intercept groups
  CHECK_THROWS_AS(bad.validate(), gqr::Error);
  bad = config;
  bad.ar_corr = 1.0;
  CHECK_THROWS_AS(bad.validate(), gqr::Error);
  bad = config;
  bad.n_reps = 0;
  CHECK_THROWS_AS(bad.validate(), gqr::Error);
}

TEST_CASE("model 1 signal patterns") {
  Model1Config config;
  config.n = 3;

  SUBCASE("scenario 1: intercept plus one fully active group") {
    Rng rng(1);
    const Model1Data data = gen_model1(config, rng);
    REQUIRE(data.beta_bar.size() == 501);
    CHECK(data.beta_bar.head(6).isApprox(Eigen::VectorXd::Ones(6)));
    CHECK(data.beta_bar.tail(495).norm() == 0.0);
    // Active groups {1, 2}: p_S = 1 + 5.
    CHECK(data.partition.group_size(0) == 1);
    CHECK(data.partition.group_size(1) == 5);
  }

  SUBCASE("scenario 2: first coordinate of each of five groups") {
    config.scenario = 2;
    Rng rng(1);
    const Model1Data data = gen_model1(config, rng);
    int nonzeros = 0;
    for (int j = 0; j < data.beta_bar.size(); ++j) {
      if (data.beta_bar[j] != 0.0) ++nonzeros;
    }
    CHECK(nonzeros == 6);
    CHECK(data.beta_bar[0] == 1.0);
    for (int t = 0; t < 5; ++t) CHECK(data.beta_bar[1 + 5 * t] == 1.0);
    // Support spreads over the intercept plus five groups: p_S = 1 + 25.
    int ps = 0;
    for (int k = 0; k < data.partition.num_groups(); ++k) {
      bool active = false;
      for (int col : data.partition.groups[static_cast<size_t>(k)]) {
        if (data.beta_bar[col] != 0.0) active = true;
      }
      if (active) ps += data.partition.group_size(k);
    }
    CHECK(ps == 26);
  }
}

TEST_CASE("model 1 noise is quantile-centered") {
  for (const double tau : {0.3, 0.5, 0.8}) {
    Model1Config config;
    config.n = 100000;
    config.q = 2;
    config.group_size = 1;
    config.tau = tau;
    Rng rng(17);
    const Model1Data data = gen_model1(config, rng);
    const Eigen::VectorXd e = data.y - data.x * data.beta_bar;
    double below = 0.0;
    for (int i = 0; i < e.size(); ++i) {
      if (e[i] <= 0.0) below += 1.0;
    }
    below /= static_cast<double>(e.size());
    CHECK(std::abs(below - tau) < 0.01);
    std::vector<double> ev(e.data(), e.data() + e.size());
    CHECK(std::abs(empirical_quantile(ev, tau)) < 0.02);
  }
}

TEST_CASE("model 1 design has the stated Toeplitz correlation") {
  Model1Config config;
  config.n = 100000;
  config.q = 4;
  config.group_size = 1;
  Rng rng(23);
  const Model1Data data = gen_model1(config, rng);
  REQUIRE(data.x.cols() == 4);
  CHECK(data.x.col(0).isApprox(Eigen::VectorXd::Ones(config.n)));
  const double lag1 = column_correlation(data.x.col(1), data.x.col(2));
  const double lag2 = column_correlation(data.x.col(1), data.x.col(3));
  CHECK(std::abs(lag1 - 0.25) < 0.02);
  CHECK(std::abs(lag2 - 0.0625) < 0.02);
  for (int j = 1; j < 4; ++j) {
    const Eigen::VectorXd col = data.x.col(j);
    const double var = (col.array() - col.mean()).square().sum() / (config.n - 1.0);
    CHECK(std::abs(var - 1.0) < 0.02);
  }
}

TEST_CASE("model 1 draws are reproducible") {
  Model1Config config;
  config.n = 25;
  config.q = 3;
  config.group_size = 2;
  Rng r1(9);
  Rng r2(9);
  const Model1Data a = gen_model1(config, r1);
  const Model1Data b = gen_model1(config, r2);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
}

TEST_CASE("model 2 quantile surface closed forms") {
  const double kE = std::exp(1.0);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
  // 0.1 + g1(0) + g2(0) + g3(0) with g2(0) = 1 and g3(0) = e(1 - e + 1/e).
  CHECK(model2_quantile_surface(z) ==
        doctest::Approx(0.1 + 0.0 + 1.0 + kE * (1.0 - kE + 1.0 / kE)).epsilon(1e-14));

  // g2(+-1) = -1: moving z2 from 0 to +-1 drops the surface by 2.
  Eigen::VectorXd zp = z;
  zp[1] = 1.0;
  Eigen::VectorXd zm = z;
  zm[1] = -1.0;
  CHECK(model2_quantile_surface(zp) - model2_quantile_surface(z) == doctest::Approx(-2.0));
  CHECK(model2_quantile_surface(zm) - model2_quantile_surface(z) == doctest::Approx(-2.0));

  // g1 is the identity in z1.
  Eigen::VectorXd z1 = z;
  z1[0] = 0.37;
  CHECK(model2_quantile_surface(z1) - model2_quantile_surface(z) == doctest::Approx(0.37));

  // The g3 component integrates to 1 - e^2 over [-1, 1] (it is not centered;
  // quadrature freezes the honest value).
  const auto g3 = [&](double t) {
    Eigen::VectorXd zt = Eigen::VectorXd::Zero(3);
    zt[2] = t;
    return model2_quantile_surface(zt) - 1.1;
  };
  const double integral = oracle::simpson_quadrature(g3, -1.0, 1.0, 4000);
  CHECK(integral == doctest::Approx(1.0 - kE * kE).epsilon(1e-10));

  CHECK_THROWS_AS(model2_quantile_surface(Eigen::VectorXd::Zero(2)), gqr::Error);
}

TEST_CASE("model 2 generator places the conditional quantile at the surface") {
  for (const double tau : {0.3, 0.5}) {
    Model2Config config;
    config.n = 200000;
    config.d = 3;
    config.tau = tau;
    Rng rng(31);
    const Model2Data data = gen_model2(config, rng);
    CHECK(data.z.minCoeff() >= -1.0);
    CHECK(data.z.maxCoeff() <= 1.0);
    double below = 0.0;
    for (int i = 0; i < config.n; ++i) {
      if (data.y[i] <= model2_quantile_surface(data.z.row(i).transpose())) below += 1.0;
    }
    below /= static_cast<double>(config.n);
    CHECK(std::abs(below - tau) < 0.01);
  }

  // Covariates are uniform on [-1, 1]: mean 0, second moment 1/3.
  Model2Config config;
  config.n = 100000;
  config.d = 3;
  Rng rng(37);
  const Model2Data data = gen_model2(config, rng);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(data.z.col(j).mean()) < 0.02);
    CHECK(std::abs(data.z.col(j).array().square().mean() - 1.0 / 3.0) < 0.01);
  }
}

TEST_CASE("selection counts") {
  const GroupPartition partition = GroupPartition::from_sizes({1, 2, 2});

  Eigen::VectorXd beta(5);
  beta << 1.0, 0.5, 0.0, 0.0, 1e-9;
  const auto counts = selection_counts(beta, partition);
  CHECK(counts.nsg == 2);  // intercept plus the (0.5, 0) group; 1e-9 is noise
  CHECK(counts.nsv == 2);

  const auto zero = selection_counts(Eigen::VectorXd::Zero(5), partition);
  CHECK(zero.nsg == 1);  // the intercept group is always counted
  CHECK(zero.nsv == 0);

  // Tiny vectors sit below the absolute floor of the thresholds.
  const auto tiny = selection_counts(Eigen::VectorXd::Constant(5, 1e-8), partition);
  CHECK(tiny.nsg == 1);
  CHECK(tiny.nsv == 0);

  CHECK_THROWS_AS(selection_counts(Eigen::VectorXd::Zero(4), partition), gqr::Error);
}

TEST_CASE("cone diagnostic") {
  const GroupPartition partition = GroupPartition::from_sizes({1, 2, 2});
  Eigen::VectorXd beta_bar(5);
  beta_bar << 1.0, 1.0, 1.0, 0.0, 0.0;

  SUBCASE("zero error is inside with both sides zero") {
    const auto cone = cone_diagnostic(beta_bar, beta_bar, partition, 4.0);
    CHECK(cone.in_cone);
    CHECK(cone.lhs == 0.0);
    CHECK(cone.rhs == 0.0);
  }

  SUBCASE("error supported on the active set is inside") {
    Eigen::VectorXd beta_hat = beta_bar;
    beta_hat[1] += 2.0;
    beta_hat[0] -= 1.0;
    const auto cone = cone_diagnostic(beta_hat, beta_bar, partition, 4.0);
    CHECK(cone.in_cone);
    CHECK(cone.lhs == 0.0);
    CHECK(cone.rhs == doctest::Approx(4.0 * (1.0 + std::sqrt(2.0) * 2.0)).epsilon(1e-14));
  }

  SUBCASE("error off the active set is outside") {
    Eigen::VectorXd beta_hat = beta_bar;
    beta_hat[3] += 3.0;
    beta_hat[4] += 4.0;
    const auto cone = cone_diagnostic(beta_hat, beta_bar, partition, 4.0);
    CHECK_FALSE(cone.in_cone);
    CHECK(cone.lhs == doctest::Approx(std::sqrt(2.0) * 5.0).epsilon(1e-14));
    CHECK(cone.rhs == 0.0);
  }

  SUBCASE("intercept-only signal reports membership vacuously") {
    Eigen::VectorXd flat = Eigen::VectorXd::Zero(5);
    flat[0] = 1.0;
    Eigen::VectorXd beta_hat = flat;
    beta_hat[3] = 10.0;
    const auto cone = cone_diagnostic(beta_hat, flat, partition, 4.0);
    CHECK(cone.in_cone);
    CHECK(cone.lhs > 0.0);
  }

  SUBCASE("constant must exceed 3 and sizes must agree") {
    CHECK_THROWS_AS(cone_diagnostic(beta_bar, beta_bar, partition, 3.0), gqr::Error);
    CHECK_THROWS_AS(cone_diagnostic(Eigen::VectorXd::Zero(4), beta_bar, partition, 4.0),
                    gqr::Error);
  }
}

TEST_CASE("experiment on the linear benchmark") {
  const Model1Config config = tiny_model1(3);
  const std::vector<Estimator> all = {Estimator::grlasso, Estimator::lasso, Estimator::qr};
  const ExperimentReport report = run_experiment(config, all);

  SUBCASE("records are complete and ordered by replication") {
    REQUIRE(report.records.size() == 9);
    for (int rep = 0; rep < 3; ++rep) {
      for (int e = 0; e < 3; ++e) {
        const RepRecord& rec = report.records[static_cast<size_t>(rep) * 3 + e];
        CHECK(rec.rep == rep);
        CHECK(rec.estimator == gqr::estimator_name(all[static_cast<size_t>(e)]));
        CHECK(rec.ok);
        CHECK(rec.err > 0.0);
        CHECK(rec.nsg >= 1);
      }
    }
  }

  SUBCASE("cone diagnostics attach to grlasso only") {
    for (const RepRecord& rec : report.records) {
      CHECK(rec.has_cone == (rec.estimator == "grlasso"));
    }
    REQUIRE(report.summaries.size() == 3);
    CHECK(report.summaries[0].has_cone);
    CHECK_FALSE(report.summaries[1].has_cone);
  }

  SUBCASE("penalized fits carry positive tuned lambda, qr none") {
    for (const RepRecord& rec : report.records) {
      if (rec.estimator == "qr") {
        CHECK(rec.lambda == 0.0);
      } else {
        CHECK(rec.lambda > 0.0);
      }
    }
  }

  SUBCASE("reruns and worker counts do not change the report") {
    const std::string baseline = report_to_json(report);
    CHECK(report_to_json(run_experiment(config, all)) == baseline);
    Model1Config threaded = config;
    threaded.workers = 3;
    CHECK(report_to_json(run_experiment(threaded, all)) == baseline);
  }

  SUBCASE("adding estimators does not perturb existing streams") {
    const ExperimentReport solo = run_experiment(config, {Estimator::grlasso});
    REQUIRE(solo.records.size() == 3);
    for (int rep = 0; rep < 3; ++rep) {
      const RepRecord& joint = report.records[static_cast<size_t>(rep) * 3];
      const RepRecord& alone = solo.records[static_cast<size_t>(rep)];
      CHECK(joint.err == alone.err);
      CHECK(joint.lambda == alone.lambda);
      CHECK(joint.nsg == alone.nsg);
      CHECK(joint.nsv == alone.nsv);
      CHECK(joint.in_cone == alone.in_cone);
    }
  }
}

TEST_CASE("single-replication report echoes the replication") {
  const Model1Config config = tiny_model1(1);
  const ExperimentReport report = run_experiment(config, {Estimator::grlasso, Estimator::qr});
  REQUIRE(report.records.size() == 2);
  REQUIRE(report.summaries.size() == 2);
  for (size_t e = 0; e < 2; ++e) {
    const RepRecord& rec = report.records[e];
    const auto& s = report.summaries[e];
    CHECK(s.n_ok == 1);
    CHECK(s.nsg_mean == static_cast<double>(rec.nsg));
    CHECK(s.nsv_mean == static_cast<double>(rec.nsv));
    CHECK(s.rmse == doctest::Approx(rec.err).epsilon(1e-15));
    CHECK(s.nsg_sd == 0.0);
    CHECK(s.err_sd == 0.0);
  }
}

TEST_CASE("unpenalized baseline is dense at the benchmark scale") {
  Model1Config config;  // n = 200, p = 501
  config.n_reps = 1;
  config.seed = 11;
  const ExperimentReport report = run_experiment(config, {Estimator::qr});
  REQUIRE(report.records.size() == 1);
  const RepRecord& rec = report.records[0];
  REQUIRE(rec.ok);
  CHECK(rec.nsg == 101);
  CHECK(rec.nsv >= 500);
}

TEST_CASE("experiment writes deterministic report files") {
  const Model1Config config = tiny_model1(2);
  const std::filesystem::path dir = "simulate_out_test";
  std::filesystem::remove_all(dir);
  const std::vector<Estimator> ests = {Estimator::grlasso, Estimator::qr};
  const ExperimentReport report = run_experiment(config, ests, dir.string());

  const auto slurp = [](const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  const std::string json_text = slurp(dir / "report.json");
  CHECK(json_text == report_to_json(report));
  const nlohmann::json parsed = nlohmann::json::parse(json_text);
  CHECK(parsed.at("model") == "model1");
  CHECK(parsed.at("config").at("n") == 50);
  CHECK(parsed.at("config").at("seed") == 5);
  CHECK(parsed.at("records").size() == 4);
  CHECK(parsed.at("summaries").size() == 2);

  const std::string csv_text = slurp(dir / "table.csv");
  CHECK(csv_text == report_to_csv(report));
  CHECK(csv_text.rfind("estimator,nsg_mean,nsg_sd,nsv_mean,nsv_sd,rmse,err_sd\n", 0) == 0);
  CHECK(std::count(csv_text.begin(), csv_text.end(), '\n') == 3);

  const nlohmann::json timing = nlohmann::json::parse(slurp(dir / "timing.json"));
  CHECK(timing.at("wall_seconds").get<double>() >= 0.0);

  // A second run reproduces both deterministic files byte for byte.
  const std::filesystem::path dir2 = "simulate_out_test_2";
  std::filesystem::remove_all(dir2);
  run_experiment(config, ests, dir2.string());
  CHECK(slurp(dir2 / "report.json") == json_text);
  CHECK(slurp(dir2 / "table.csv") == csv_text);

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("experiment on the additive benchmark") {
  Model2Config config;
  config.n = 80;
  config.d = 3;
  config.n_reps = 2;
  config.seed = 3;
  config.n_sim = 80;
  config.n_mc = 4000;
  const std::vector<Estimator> ests = {Estimator::grlasso, Estimator::qr};
  const ExperimentReport report = run_experiment(config, ests);

  REQUIRE(report.records.size() == 4);
  for (const RepRecord& rec : report.records) {
    CHECK(rec.ok);
    CHECK(std::isfinite(rec.err));
    CHECK(rec.err > 0.0);
    CHECK(rec.err < 10.0);
    CHECK(rec.nsg >= 1);
    CHECK_FALSE(rec.has_cone);
  }
  CHECK(report.model == "model2");
  REQUIRE(report.summaries.size() == 2);
  CHECK(report.summaries[0].n_ok == 2);

  CHECK(report_to_json(run_experiment(config, ests)) == report_to_json(report));
}

TEST_CASE("estimator names round-trip") {
  for (const Estimator est : {Estimator::grlasso, Estimator::lasso, Estimator::qr}) {
    CHECK(gqr::estimator_from_name(gqr::estimator_name(est)) == est);
  }
  CHECK_THROWS_AS(gqr::estimator_from_name("ridge"), gqr::Error);
  CHECK_THROWS_AS(run_experiment(tiny_model1(1), {}), gqr::Error);
  CHECK_THROWS_AS(run_experiment(tiny_model1(1), {Estimator::qr, Estimator::qr}), gqr::Error);
}
