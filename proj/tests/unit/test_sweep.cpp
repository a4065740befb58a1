#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "atxy/model.hpp"
#include "atxy/sweep.hpp"

using namespace atxy;
namespace fsys = std::filesystem;

TEST_CASE("revival detection on a synthetic double hump") {
  // descending betas
  std::vector<double> betas = {250, 200, 150, 100, 80, 60, 40, 20, 10, 5, 2, 1, 0.5, 0};
  std::vector<double> ln =  {0,   0,   1e-3, 5e-3, 1e-3, 0, 0, 2e-3, 8e-3, 3e-3, 0, 0, 0, 0};
  const auto rep = detect_revivals(betas, ln, 1e-4);
  CHECK(rep.hump_count == 2);
  REQUIRE(rep.beta_r1.has_value());
  REQUIRE(rep.beta_c1.has_value());
  REQUIRE(rep.beta_r2.has_value());
  REQUIRE(rep.beta_c2.has_value());
  CHECK(*rep.beta_r1 == 150);
  CHECK(*rep.beta_c1 == 60);
  CHECK(*rep.beta_r2 == 20);
  CHECK(*rep.beta_c2 == 2);
  CHECK(*rep.beta_r1 > *rep.beta_c1);
  CHECK(*rep.beta_c1 > *rep.beta_r2);
  CHECK(*rep.beta_r2 > *rep.beta_c2);
  CHECK(rep.lm1 == 5e-3);
  CHECK(rep.lm2 == 8e-3);
  CHECK(!rep.grid_too_coarse);
}

TEST_CASE("revival detection flags a series that starts above threshold") {
  std::vector<double> betas = {250, 100, 10, 0};
  std::vector<double> ln = {1e-2, 1e-2, 0, 0};
  const auto rep = detect_revivals(betas, ln, 1e-4);
  CHECK(rep.hump_count == 1);
  CHECK(rep.grid_too_coarse);
}

TEST_CASE("beta grid is log spaced, descending, with an exact zero appended") {
  SweepConfig cfg;
  cfg.beta_min = 0.01;
  cfg.beta_max = 250.0;
  cfg.beta_points = 100;
  const auto g = beta_grid(cfg);
  CHECK(g.size() == 101);
  CHECK(g.front() == 250.0);
  CHECK(g.back() == 0.0);
  CHECK(g[99] == doctest::Approx(0.01).epsilon(1e-12));
  for (size_t i = 1; i < g.size(); ++i) CHECK(g[i] < g[i - 1]);
}

TEST_CASE("config parsing, overrides, and unknown keys") {
  const std::string text =
      "# example config\n"
      "gamma = 0.35\n"
      "lambda2 = 1.0\n"
      "beta_points = 40\n"
      "pairs = 1-2, 2-3\n"
      "doors = 1\n"
      "epsilon = 1e-4\n";
  SweepConfig cfg = SweepConfig::from_text(text, ScanKind::thermal_beta);
  CHECK(cfg.gamma == 0.35);
  CHECK(cfg.beta_points == 40);
  CHECK(cfg.pairs.size() == 2);
  CHECK(cfg.pairs[1] == std::pair{2, 3});

  cfg.apply_override("gamma", "0.8");
  CHECK(cfg.gamma == 0.8);
  CHECK_THROWS_AS(cfg.apply_override("gamna", "0.8"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.apply_override("gamma", "abc"), std::invalid_argument);
  CHECK_THROWS_AS(SweepConfig::from_text("foo\n", ScanKind::thermal_beta),
                  std::invalid_argument);
}

TEST_CASE("finite-size sweep at N=6: one strictly-nonzero region (finite-size contrast)") {
  // at N=6 the degenerate-doublet overlap keeps the pair LN nonzero all the
  // way from beta = 250 down to beta ~ 2.7, with no exact-zero window
  SweepConfig cfg;
  cfg.kind = ScanKind::thermal_beta;
  cfg.gamma = 0.5;
  cfg.lambda2 = 1.0;
  cfg.fs_lambda1 = true;
  cfg.N = 6;
  cfg.beta_points = 120;
  cfg.epsilon = 1e-9;
  cfg.threads = 2;
  const auto res = thermal_beta_sweep(cfg);
  CHECK(res.lambda1 == doctest::Approx(lambda1_on_fs(0.5, 1.0)));
  CHECK(res.report.hump_count == 1);
}

TEST_CASE("ed and freefermion backends agree on a finite-size sweep") {
  SweepConfig cfg;
  cfg.kind = ScanKind::thermal_beta;
  cfg.gamma = 0.5;
  cfg.lambda2 = 1.0;
  cfg.fs_lambda1 = true;
  cfg.N = 6;
  cfg.beta_points = 25;
  cfg.threads = 2;
  cfg.backend = "freefermion";
  const auto a = thermal_beta_sweep(cfg);
  cfg.backend = "ed";
  const auto b = thermal_beta_sweep(cfg);
  REQUIRE(a.ln.size() == b.ln.size());
  for (size_t i = 0; i < a.ln.size(); ++i)
    CHECK(a.ln[i] == doctest::Approx(b.ln[i]).epsilon(1e-8));
}

TEST_CASE("zero-region map: point-like at high beta, river at low beta") {
  SweepConfig cfg;
  cfg.kind = ScanKind::thermal_region;
  cfg.gamma = 0.6;
  cfg.lambda2 = 1.0;
  cfg.lambda1_min = 1.2;
  cfg.lambda1_max = 1.36;
  cfg.lambda1_step = 0.02;
  cfg.region_betas = {100.0, 5.0};
  cfg.proxy_sites = 2048;
  cfg.threads = 2;
  const auto res = zero_region_map(cfg);
  REQUIRE(res.betas.size() == 2);
  CHECK(res.fs_lambda1 == doctest::Approx(std::sqrt(1.64)));
  // the exact factorization point stays unentangled at both temperatures
  REQUIRE(res.fs_ln.size() == 2);
  CHECK(res.fs_ln[0] < cfg.epsilon);
  CHECK(res.fs_ln[1] < cfg.epsilon);
  // at beta = 100 the zero set hugs the factorization point; at beta = 5 a
  // finite river of zero cells opens up around it
  for (size_t i = 0; i < res.lambda1.size(); ++i)
    if (res.zero[0][i])
      CHECK(std::abs(res.lambda1[i] - res.fs_lambda1) <= cfg.lambda1_step + 1e-12);
  CHECK(res.zero_width[1] > 0.0);
  CHECK(res.zero_width[1] >= res.zero_width[0]);
}

TEST_CASE("revival positions are stable under grid refinement") {
  SweepConfig cfg;
  cfg.kind = ScanKind::thermal_beta;
  cfg.gamma = 0.35;
  cfg.lambda2 = 1.0;
  cfg.fs_lambda1 = true;
  cfg.N = 0;
  cfg.proxy_sites = 2048;
  cfg.threads = 2;
  cfg.beta_points = 250;
  const auto coarse = thermal_beta_sweep(cfg);
  cfg.beta_points = 500;
  const auto fine = thermal_beta_sweep(cfg);
  REQUIRE(coarse.report.hump_count == 2);
  REQUIRE(fine.report.hump_count == 2);
  // one coarse grid step in log measure
  const double step = std::pow(cfg.beta_max / cfg.beta_min, 1.0 / 249);
  auto close = [&](double a, double b) { return std::max(a / b, b / a) <= step + 1e-9; };
  CHECK(close(*coarse.report.beta_r1, *fine.report.beta_r1));
  CHECK(close(*coarse.report.beta_c1, *fine.report.beta_c1));
  CHECK(close(*coarse.report.beta_r2, *fine.report.beta_r2));
  CHECK(close(*coarse.report.beta_c2, *fine.report.beta_c2));
}

TEST_CASE("zero-region at infinite temperature is fully unentangled") {
  SweepConfig cfg;
  cfg.kind = ScanKind::thermal_region;
  cfg.gamma = 0.6;
  cfg.lambda2 = 1.0;
  cfg.lambda1_min = 1.0;
  cfg.lambda1_max = 1.5;
  cfg.lambda1_step = 0.05;
  cfg.region_betas = {0.0};
  cfg.proxy_sites = 2048;
  cfg.threads = 2;
  const auto res = zero_region_map(cfg);
  for (size_t i = 0; i < res.lambda1.size(); ++i) CHECK(res.zero[0][i] == 1);
}

TEST_CASE("csv and manifest outputs") {
  SweepConfig cfg;
  cfg.kind = ScanKind::thermal_beta;
  cfg.gamma = 0.8;
  cfg.lambda2 = 1.0;
  cfg.N = 6;
  cfg.beta_points = 10;
  cfg.label = "unit_sweep";
  cfg.out_dir = (fsys::temp_directory_path() / "atxy_test_out").string();
  const auto res = thermal_beta_sweep(cfg);
  const auto files = write_result(res, cfg);
  REQUIRE(files.size() == 2);
  std::ifstream csv(files[0]);
  REQUIRE(csv.good());
  std::string header;
  std::getline(csv, header);
  CHECK(header == "beta_s,gamma,lambda1,lambda2,ln");
  std::ifstream mf(files[1]);
  REQUIRE(mf.good());
  std::string all((std::istreambuf_iterator<char>(mf)), std::istreambuf_iterator<char>());
  CHECK(all.find("\"kind\": \"thermal_beta\"") != std::string::npos);
  CHECK(all.find("\"version\"") != std::string::npos);
  fsys::remove_all(cfg.out_dir);
}

TEST_CASE("sweep results are independent of worker count") {
  SweepConfig cfg;
  cfg.kind = ScanKind::thermal_beta;
  cfg.gamma = 0.5;
  cfg.lambda2 = 1.0;
  cfg.N = 6;
  cfg.beta_points = 30;
  cfg.threads = 1;
  const auto a = thermal_beta_sweep(cfg);
  cfg.threads = 4;
  const auto b = thermal_beta_sweep(cfg);
  for (size_t i = 0; i < a.ln.size(); ++i) CHECK(a.ln[i] == b.ln[i]);
}

TEST_CASE("open run on a small chain produces pair trajectories and summaries") {
  SweepConfig cfg;
  cfg.kind = ScanKind::open_run;
  cfg.gamma = 0.6;
  cfg.N = 4;
  cfg.beta_s = 80.0;
  cfg.lambda1_values = {0.9};
  cfg.t_final = 1.0;
  cfg.dt = 1e-3;
  cfg.pairs = {{1, 2}, {2, 3}};
  cfg.threads = 1;
  const auto res = open_run(cfg);
  REQUIRE(res.lambda1.size() == 1);
  REQUIRE(res.trajectories.size() == 1);
  CHECK(res.trajectories[0].points.size() == 21);
  CHECK(res.trajectories[0].worst_trace_err() < 1e-8);
  CHECK(res.max_ln[0].size() == 2);

  cfg.label = "unit_open";
  cfg.out_dir = (fsys::temp_directory_path() / "atxy_test_open").string();
  const auto files = write_result(res, cfg);
  std::ifstream csv(files[0]);
  REQUIRE(csv.good());
  std::string header;
  std::getline(csv, header);
  CHECK(header == "t,pair_i,pair_j,ln,trace_err,min_eig");
  fsys::remove_all(cfg.out_dir);
}

TEST_CASE("open run excludes infeasible lambda1 points") {
  SweepConfig cfg;
  cfg.kind = ScanKind::open_run;
  cfg.gamma = 0.6;  // needs lambda1 >= 0.8
  cfg.N = 4;
  cfg.lambda1_values = {0.5, 0.9};
  cfg.t_final = 0.2;
  cfg.threads = 1;
  const auto res = open_run(cfg);
  CHECK(res.lambda1 == std::vector<double>{0.9});
  CHECK(res.excluded_lambda1 == std::vector<double>{0.5});
}

TEST_CASE("config validation rejects bad grids") {
  SweepConfig cfg;
  cfg.kind = ScanKind::thermal_beta;
  cfg.beta_points = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SweepConfig{};
  cfg.kind = ScanKind::open_run;
  cfg.N = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SweepConfig{};
  cfg.kind = ScanKind::open_run;
  cfg.N = 6;
  cfg.bath.doors = {9};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
