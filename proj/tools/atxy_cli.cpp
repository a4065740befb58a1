// atxy: thermal, quench, and open-system entanglement scans of the
// alternating-transverse-field XY chain.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical-integrity failure.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "atxy/model.hpp"
#include "atxy/openquantum.hpp"
#include "atxy/sweep.hpp"
#include "atxy/version.hpp"

namespace {

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string label;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("-c,--config", o.config_file, "flat key = value configuration file");
  cmd->add_option("-D,--set", o.overrides, "override a config key, e.g. -D gamma=0.35")
      ->take_all();
  cmd->add_option("-o,--out", o.out_dir, "output directory (default atxy_out)");
  cmd->add_option("-l,--label", o.label, "output file label (default: run)");
}

atxy::SweepConfig load_config(const CommonOpts& o, atxy::ScanKind kind) {
  atxy::SweepConfig cfg = o.config_file.empty()
                              ? atxy::SweepConfig{}
                              : atxy::SweepConfig::from_file(o.config_file, kind);
  cfg.kind = kind;
  for (const auto& ov : o.overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override must be key=value: " + ov);
    cfg.apply_override(ov.substr(0, eq), ov.substr(eq + 1));
  }
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (!o.label.empty()) cfg.label = o.label;
  cfg.validate();
  return cfg;
}

void print_files(const std::vector<std::string>& files) {
  for (const auto& f : files) std::printf("wrote %s\n", f.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"alternating-transverse-field XY chain entanglement scans"};
  app.set_version_flag("--version", atxy::kVersion);
  app.require_subcommand(1);

  // phase
  double g = 0.5, l1 = 0.0, l2 = 0.0;
  auto* phase_cmd = app.add_subcommand("phase", "classify a parameter point");
  phase_cmd->add_option("--gamma", g, "anisotropy")->required();
  phase_cmd->add_option("--lambda1", l1, "uniform field")->required();
  phase_cmd->add_option("--lambda2", l2, "alternating field")->required();

  // fs
  double fg = 0.5, fl2 = 0.0;
  auto* fs_cmd = app.add_subcommand("fs", "lambda1 on the factorization surface");
  fs_cmd->add_option("--gamma", fg, "anisotropy")->required();
  fs_cmd->add_option("--lambda2", fl2, "alternating field")->required();

  CommonOpts thermal_o, region_o, closed_o, snap_o, open_o;
  auto* thermal_cmd =
      app.add_subcommand("thermal-sweep", "LN vs beta_S with revival/collapse detection");
  add_common(thermal_cmd, thermal_o);
  auto* region_cmd =
      app.add_subcommand("zero-region", "map the zero-entanglement river on (lambda1, beta_S)");
  add_common(region_cmd, region_o);
  auto* closed_cmd =
      app.add_subcommand("closed-scan", "LN(t, lambda1) after the quench, on the FS");
  add_common(closed_cmd, closed_o);
  auto* snap_cmd =
      app.add_subcommand("snapshot", "frozen-time LN masks on the (beta_S, gamma) plane");
  add_common(snap_cmd, snap_o);
  auto* open_cmd =
      app.add_subcommand("open-run", "repeated-interaction open dynamics of pair LN");
  add_common(open_cmd, open_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (phase_cmd->parsed()) {
      atxy::ModelParams p;
      p.gamma = g;
      p.lambda1 = l1;
      p.lambda2 = l2;
      std::printf("%s\n", atxy::to_string(atxy::classify_phase(p)).c_str());
      return 0;
    }
    if (fs_cmd->parsed()) {
      std::printf("%.12g\n", atxy::lambda1_on_fs(fg, fl2));
      return 0;
    }
    if (thermal_cmd->parsed()) {
      const auto cfg = load_config(thermal_o, atxy::ScanKind::thermal_beta);
      const auto res = atxy::thermal_beta_sweep(cfg);
      print_files(write_result(res, cfg));
      std::printf("lambda1 = %.12g, humps = %d", res.lambda1, res.report.hump_count);
      if (res.report.beta_r1) std::printf(", beta_R1 = %.6g", *res.report.beta_r1);
      if (res.report.beta_c1) std::printf(", beta_C1 = %.6g", *res.report.beta_c1);
      if (res.report.beta_r2) std::printf(", beta_R2 = %.6g", *res.report.beta_r2);
      if (res.report.beta_c2) std::printf(", beta_C2 = %.6g", *res.report.beta_c2);
      std::printf("\n");
      return 0;
    }
    if (region_cmd->parsed()) {
      const auto cfg = load_config(region_o, atxy::ScanKind::thermal_region);
      const auto res = atxy::zero_region_map(cfg);
      print_files(write_result(res, cfg));
      for (size_t b = 0; b < res.betas.size(); ++b)
        std::printf("beta_S = %-8.6g zero width = %.6g\n", res.betas[b], res.zero_width[b]);
      return 0;
    }
    if (closed_cmd->parsed()) {
      const auto cfg = load_config(closed_o, atxy::ScanKind::closed_scan);
      const auto res = atxy::closed_scan(cfg);
      print_files(write_result(res, cfg));
      for (size_t i = 0; i < res.lambda1.size(); ++i)
        std::printf("lambda1 = %-8.6g late-time mean LN = %.6g\n", res.lambda1[i],
                    res.late_time_mean[i]);
      return 0;
    }
    if (snap_cmd->parsed()) {
      const auto cfg = load_config(snap_o, atxy::ScanKind::snapshot_grid);
      const auto res = atxy::snapshot_grid(cfg);
      print_files(write_result(res, cfg));
      for (size_t ti = 0; ti < res.times.size(); ++ti)
        std::printf("t = %-6.4g nonzero fraction = %.4f\n", res.times[ti],
                    res.nonzero_fraction[ti]);
      return 0;
    }
    if (open_cmd->parsed()) {
      const auto cfg = load_config(open_o, atxy::ScanKind::open_run);
      const auto res = atxy::open_run(cfg);
      print_files(write_result(res, cfg));
      for (size_t i = 0; i < res.lambda1.size(); ++i)
        for (size_t q = 0; q < res.pairs.size(); ++q)
          std::printf("lambda1 = %-8.6g pair (%d,%d): max LN = %.6g, support = %.4g\n",
                      res.lambda1[i], res.pairs[q].first, res.pairs[q].second,
                      res.max_ln[i][q], res.support[i][q]);
      return 0;
    }
  } catch (const atxy::IntegrityError& e) {
    std::fprintf(stderr, "numerical integrity failure: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
