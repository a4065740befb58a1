#ifndef ATXY_SWEEP_HPP
#define ATXY_SWEEP_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atxy/model.hpp"
#include "atxy/openquantum.hpp"

// Parameter-grid engine: thermal sweeps with revival/collapse detection,
// zero-entanglement region maps, closed-quench scans, frozen-time snapshot
// grids, and open-system runs. Owns CSV/manifest persistence.

namespace atxy {

enum class ScanKind { thermal_beta, thermal_region, closed_scan, snapshot_grid, open_run };

std::string to_string(ScanKind k);

struct SweepConfig {
  ScanKind kind = ScanKind::thermal_beta;
  std::string label = "run";
  std::string out_dir = "atxy_out";

  // model
  double gamma = 0.5;
  double lambda1 = 0.0;
  double lambda2 = 1.0;
  int N = 0;                  // 0 = thermodynamic proxy
  int proxy_sites = 4096;     // starting grid; doubled until converged
  std::string backend = "auto";  // auto | freefermion | ed

  double epsilon = 1e-4;      // zero-entanglement threshold
  int threads = 0;            // 0 = hardware concurrency

  // thermal_beta / snapshot_grid beta grid (log spaced, descending scan)
  double beta_min = 0.01;
  double beta_max = 250.0;
  int beta_points = 500;
  bool append_beta_zero = true;
  bool fs_lambda1 = true;     // fix lambda1 from gamma, lambda2 via the FS

  // thermal_region (zero-entanglement river)
  double lambda1_min = 0.6;
  double lambda1_max = 2.0;
  double lambda1_step = 0.01;
  std::vector<double> region_betas = {100.0, 50.0, 20.0, 10.0, 5.0};
  double t = 0.0;

  // closed_scan
  int lambda1_points = 8;
  double t_max = 50.0;
  double t_step = 0.25;
  double beta_s = 250.0;
  double saturation_fraction = 0.1;

  // snapshot_grid
  double gamma_min = 0.02;
  double gamma_max = 1.0;
  int gamma_points = 50;
  std::vector<double> snapshot_times = {0.0, 2.0, 10.0, 40.0};

  // open_run
  std::vector<double> lambda1_values;
  BathSpec bath;
  std::string ladder = "ladder";  // ladder | literal
  bool hold_fields = false;
  double dt = 1e-3;
  double t_final = 10.0;
  double observe_interval = 0.05;
  int min_eig_stride = 0;
  std::vector<std::pair<int, int>> pairs = {{1, 2}, {2, 3}};

  LadderChoice ladder_choice() const;
  int resolved_threads() const;

  // flat key = value file; '#' starts a comment. Unknown keys are an error.
  static SweepConfig from_file(const std::string& path, ScanKind kind);
  static SweepConfig from_text(const std::string& text, ScanKind kind);
  void apply_override(const std::string& key, const std::string& value);
  void validate() const;

  std::map<std::string, std::string> as_flat_map() const;
};

// revival/collapse bookkeeping for a descending-beta LN series
struct RevivalReport {
  int hump_count = 0;
  std::optional<double> beta_r1, beta_c1, beta_r2, beta_c2;
  double lm1 = 0.0;
  double lm2 = 0.0;
  bool grid_too_coarse = false;  // series started above threshold or never closed
  // (beta_high, beta_low) per above-threshold interval, descending
  std::vector<std::pair<double, double>> intervals;
};

RevivalReport detect_revivals(const std::vector<double>& betas_desc,
                              const std::vector<double>& ln, double eps);

struct ThermalSweepResult {
  std::vector<double> betas;  // descending
  std::vector<double> ln;
  double lambda1 = 0.0, lambda2 = 0.0, gamma = 0.0;
  int resolved_sites = 0;  // proxy grid actually used (0 for finite N)
  RevivalReport report;
};

struct ZeroRegionResult {
  std::vector<double> lambda1;           // ascending
  std::vector<double> betas;             // row order as configured
  std::vector<std::vector<double>> ln;   // [beta][lambda1]
  std::vector<std::vector<int>> zero;    // 1 when ln <= epsilon
  std::vector<double> zero_width;        // contiguous zero run through the FS, per beta
  std::vector<std::pair<double, double>> zero_span;  // [lo, hi] lambda1 of that run
  double fs_lambda1 = 0.0;
  std::vector<double> fs_ln;             // LN at the exact FS lambda1, per beta
  int resolved_sites = 0;
};

struct ClosedScanResult {
  std::vector<double> lambda1;     // scanned values (feasible only)
  std::vector<double> lambda2;     // matching FS values
  std::vector<double> excluded_lambda1;  // infeasible grid points
  std::vector<double> times;
  std::vector<std::vector<double>> ln;  // [lambda1][time]
  std::vector<double> late_time_mean;   // mean LN over the final window
  int resolved_sites = 0;
};

struct SnapshotGridResult {
  std::vector<double> gammas;
  std::vector<double> betas;
  std::vector<double> times;
  // ln[time][gamma][beta]
  std::vector<std::vector<std::vector<double>>> ln;
  std::vector<double> nonzero_fraction;  // per time
  double lambda2 = 0.0;
  int resolved_sites = 0;
};

struct OpenRunResult {
  std::vector<double> lambda1;            // feasible grid points
  std::vector<double> lambda2;
  std::vector<double> excluded_lambda1;
  std::vector<std::pair<int, int>> pairs;
  std::vector<Trajectory> trajectories;   // per lambda1
  // summary per (lambda1, pair): max LN and support duration above epsilon
  std::vector<std::vector<double>> max_ln;
  std::vector<std::vector<double>> support;
};

ThermalSweepResult thermal_beta_sweep(const SweepConfig& cfg);
ZeroRegionResult zero_region_map(const SweepConfig& cfg);
ClosedScanResult closed_scan(const SweepConfig& cfg);
SnapshotGridResult snapshot_grid(const SweepConfig& cfg);
OpenRunResult open_run(const SweepConfig& cfg);

// persistence: CSV with 12 significant digits plus a JSON manifest with the
// resolved configuration; returns the paths written
std::vector<std::string> write_result(const ThermalSweepResult&, const SweepConfig&);
std::vector<std::string> write_result(const ZeroRegionResult&, const SweepConfig&);
std::vector<std::string> write_result(const ClosedScanResult&, const SweepConfig&);
std::vector<std::string> write_result(const SnapshotGridResult&, const SweepConfig&);
std::vector<std::string> write_result(const OpenRunResult&, const SweepConfig&);

// log-spaced descending beta grid per the configuration
std::vector<double> beta_grid(const SweepConfig& cfg);

}  // namespace atxy

#endif
