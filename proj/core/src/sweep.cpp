#include "atxy/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "atxy/ed.hpp"
#include "atxy/entanglement.hpp"
#include "atxy/freefermion.hpp"
#include "atxy/rdm.hpp"
#include "atxy/version.hpp"

namespace atxy {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --- small utilities -------------------------------------------------------

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mx;
  const int n_workers = std::min(threads, n);
  for (int w = 0; w < n_workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mx);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

double ln_of(const CorrelatorSet& c) { return log_negativity(assemble(c)).log_negativity; }

// --- configuration parsing --------------------------------------------------

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw std::invalid_argument("config: bad numeric value for '" + key + "': " + v);
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw std::invalid_argument("config: bad integer value for '" + key + "': " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean value for '" + key + "': " + v);
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ','))
    if (!item.empty()) out.push_back(to_double(key, item));
  return out;
}

std::vector<std::pair<int, int>> to_pairs(const std::string& key, const std::string& v) {
  std::vector<std::pair<int, int>> out;
  for (const auto& item : split(v, ',')) {
    const auto parts = split(item, '-');
    if (parts.size() != 2)
      throw std::invalid_argument("config: bad pair (want i-j) for '" + key + "': " + item);
    out.emplace_back(to_int(key, parts[0]), to_int(key, parts[1]));
  }
  return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& item : split(v, ','))
    if (!item.empty()) out.push_back(to_int(key, item));
  return out;
}

std::string join_pairs(const std::vector<std::pair<int, int>>& ps) {
  std::string s;
  for (const auto& [i, j] : ps) {
    if (!s.empty()) s += ",";
    s += std::to_string(i) + "-" + std::to_string(j);
  }
  return s;
}

std::string join_list(const std::vector<double>& vs) {
  std::string s;
  for (double v : vs) {
    if (!s.empty()) s += ",";
    s += fmt12(v);
  }
  return s;
}

std::string join_int_list(const std::vector<int>& vs) {
  std::string s;
  for (int v : vs) {
    if (!s.empty()) s += ",";
    s += std::to_string(v);
  }
  return s;
}

}  // namespace

std::string to_string(ScanKind k) {
  switch (k) {
    case ScanKind::thermal_beta: return "thermal_beta";
    case ScanKind::thermal_region: return "thermal_region";
    case ScanKind::closed_scan: return "closed_scan";
    case ScanKind::snapshot_grid: return "snapshot_grid";
    case ScanKind::open_run: return "open_run";
  }
  return "?";
}

LadderChoice SweepConfig::ladder_choice() const {
  if (ladder == "ladder") return LadderChoice::ladder;
  if (ladder == "literal") return LadderChoice::literal;
  throw std::invalid_argument("config: ladder must be 'ladder' or 'literal'");
}

int SweepConfig::resolved_threads() const {
  if (threads > 0) return threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

void SweepConfig::apply_override(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "label") label = v;
  else if (key == "out") out_dir = v;
  else if (key == "gamma") gamma = to_double(key, v);
  else if (key == "lambda1") lambda1 = to_double(key, v);
  else if (key == "lambda2") lambda2 = to_double(key, v);
  else if (key == "N") N = to_int(key, v);
  else if (key == "proxy_sites") proxy_sites = to_int(key, v);
  else if (key == "backend") backend = v;
  else if (key == "epsilon") epsilon = to_double(key, v);
  else if (key == "threads") threads = to_int(key, v);
  else if (key == "beta_min") beta_min = to_double(key, v);
  else if (key == "beta_max") beta_max = to_double(key, v);
  else if (key == "beta_points") beta_points = to_int(key, v);
  else if (key == "append_beta_zero") append_beta_zero = to_bool(key, v);
  else if (key == "fs_lambda1") fs_lambda1 = to_bool(key, v);
  else if (key == "lambda1_min") lambda1_min = to_double(key, v);
  else if (key == "lambda1_max") lambda1_max = to_double(key, v);
  else if (key == "lambda1_step") lambda1_step = to_double(key, v);
  else if (key == "lambda1_points") lambda1_points = to_int(key, v);
  else if (key == "lambda1_values") lambda1_values = to_list(key, v);
  else if (key == "region_betas") region_betas = to_list(key, v);
  else if (key == "t") t = to_double(key, v);
  else if (key == "t_max") t_max = to_double(key, v);
  else if (key == "t_step") t_step = to_double(key, v);
  else if (key == "beta_s") beta_s = to_double(key, v);
  else if (key == "saturation_fraction") saturation_fraction = to_double(key, v);
  else if (key == "gamma_min") gamma_min = to_double(key, v);
  else if (key == "gamma_max") gamma_max = to_double(key, v);
  else if (key == "gamma_points") gamma_points = to_int(key, v);
  else if (key == "times") snapshot_times = to_list(key, v);
  else if (key == "beta_e") bath.beta_e = to_double(key, v);
  else if (key == "bath_b") bath.B = to_double(key, v);
  else if (key == "k") bath.k = to_double(key, v);
  else if (key == "doors") bath.doors = to_int_list(key, v);
  else if (key == "include_absorption") bath.include_absorption = to_bool(key, v);
  else if (key == "noise") {
    if (v == "dissipative") bath.noise_kind = NoiseKind::dissipative;
    else if (v == "dephasing") bath.noise_kind = NoiseKind::dephasing;
    else throw std::invalid_argument("config: noise must be dissipative or dephasing");
  }
  else if (key == "dephasing_rate") bath.dephasing_rate = to_double(key, v);
  else if (key == "ladder") ladder = v;
  else if (key == "hold_fields") hold_fields = to_bool(key, v);
  else if (key == "dt") dt = to_double(key, v);
  else if (key == "t_final") t_final = to_double(key, v);
  else if (key == "observe_interval") observe_interval = to_double(key, v);
  else if (key == "min_eig_stride") min_eig_stride = to_int(key, v);
  else if (key == "pairs") pairs = to_pairs(key, v);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

SweepConfig SweepConfig::from_text(const std::string& text, ScanKind kind) {
  SweepConfig cfg;
  cfg.kind = kind;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not key = value: " + line);
    cfg.apply_override(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

SweepConfig SweepConfig::from_file(const std::string& path, ScanKind kind) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), kind);
}

void SweepConfig::validate() const {
  ModelParams p;
  p.gamma = gamma;
  p.N = N;
  p.validate();
  if (epsilon <= 0.0) throw std::invalid_argument("config: epsilon must be positive");
  if (backend != "auto" && backend != "freefermion" && backend != "ed")
    throw std::invalid_argument("config: backend must be auto, freefermion, or ed");
  if (N == 0 && backend == "ed")
    throw std::invalid_argument("config: the ed backend needs finite N");
  if (kind == ScanKind::thermal_beta || kind == ScanKind::snapshot_grid) {
    if (beta_points < 2 || beta_min <= 0.0 || beta_max <= beta_min)
      throw std::invalid_argument("config: bad beta grid");
  }
  if (kind == ScanKind::thermal_region) {
    if (lambda1_step <= 0.0 || lambda1_max <= lambda1_min || region_betas.empty())
      throw std::invalid_argument("config: bad region grid");
  }
  if (kind == ScanKind::closed_scan) {
    if (lambda1_points < 1 || t_max <= 0.0 || t_step <= 0.0 ||
        saturation_fraction <= 0.0 || saturation_fraction > 1.0)
      throw std::invalid_argument("config: bad closed-scan grid");
  }
  if (kind == ScanKind::snapshot_grid) {
    if (gamma_points < 1 || snapshot_times.empty())
      throw std::invalid_argument("config: bad snapshot grid");
  }
  if (kind == ScanKind::open_run) {
    if (N < 4) throw std::invalid_argument("config: open_run needs finite N");
    if (dt <= 0.0 || t_final <= 0.0 || observe_interval <= 0.0 || pairs.empty())
      throw std::invalid_argument("config: bad open-run settings");
    bath.validate(N);
    ladder_choice();
  }
}

std::map<std::string, std::string> SweepConfig::as_flat_map() const {
  std::map<std::string, std::string> m;
  m["kind"] = to_string(kind);
  m["label"] = label;
  m["out"] = out_dir;
  m["gamma"] = fmt12(gamma);
  m["lambda1"] = fmt12(lambda1);
  m["lambda2"] = fmt12(lambda2);
  m["N"] = std::to_string(N);
  m["proxy_sites"] = std::to_string(proxy_sites);
  m["backend"] = backend;
  m["epsilon"] = fmt12(epsilon);
  m["threads"] = std::to_string(threads);
  m["beta_min"] = fmt12(beta_min);
  m["beta_max"] = fmt12(beta_max);
  m["beta_points"] = std::to_string(beta_points);
  m["append_beta_zero"] = append_beta_zero ? "true" : "false";
  m["fs_lambda1"] = fs_lambda1 ? "true" : "false";
  m["lambda1_min"] = fmt12(lambda1_min);
  m["lambda1_max"] = fmt12(lambda1_max);
  m["lambda1_step"] = fmt12(lambda1_step);
  m["lambda1_points"] = std::to_string(lambda1_points);
  m["lambda1_values"] = join_list(lambda1_values);
  m["region_betas"] = join_list(region_betas);
  m["t"] = fmt12(t);
  m["t_max"] = fmt12(t_max);
  m["t_step"] = fmt12(t_step);
  m["beta_s"] = fmt12(beta_s);
  m["saturation_fraction"] = fmt12(saturation_fraction);
  m["gamma_min"] = fmt12(gamma_min);
  m["gamma_max"] = fmt12(gamma_max);
  m["gamma_points"] = std::to_string(gamma_points);
  m["times"] = join_list(snapshot_times);
  m["beta_e"] = fmt12(bath.beta_e);
  m["bath_b"] = fmt12(bath.B);
  m["k"] = fmt12(bath.k);
  m["doors"] = join_int_list(bath.doors);
  m["include_absorption"] = bath.include_absorption ? "true" : "false";
  m["noise"] = bath.noise_kind == NoiseKind::dissipative ? "dissipative" : "dephasing";
  m["dephasing_rate"] = fmt12(bath.dephasing_rate);
  m["ladder"] = ladder;
  m["hold_fields"] = hold_fields ? "true" : "false";
  m["dt"] = fmt12(dt);
  m["t_final"] = fmt12(t_final);
  m["observe_interval"] = fmt12(observe_interval);
  m["min_eig_stride"] = std::to_string(min_eig_stride);
  m["pairs"] = join_pairs(pairs);
  return m;
}

// --- revival detection ------------------------------------------------------

RevivalReport detect_revivals(const std::vector<double>& betas_desc,
                              const std::vector<double>& ln, double eps) {
  if (betas_desc.size() != ln.size() || betas_desc.empty())
    throw std::invalid_argument("detect_revivals: size mismatch");
  RevivalReport rep;
  const int n = static_cast<int>(ln.size());
  int i = 0;
  std::vector<double> maxima;
  std::vector<std::pair<std::optional<double>, std::optional<double>>> events;  // (r, c)
  while (i < n) {
    if (ln[i] <= eps) {
      ++i;
      continue;
    }
    const int i0 = i;
    double peak = ln[i];
    while (i < n && ln[i] > eps) {
      peak = std::max(peak, ln[i]);
      ++i;
    }
    const int i1 = i - 1;
    std::optional<double> rev, col;
    if (i0 == 0)
      rep.grid_too_coarse = true;  // series already above threshold at beta_max
    rev = betas_desc[i0];
    if (i < n)
      col = betas_desc[i];
    else
      rep.grid_too_coarse = true;  // never collapsed inside the grid
    rep.intervals.emplace_back(betas_desc[i0], betas_desc[i1]);
    events.emplace_back(rev, col);
    maxima.push_back(peak);
  }
  rep.hump_count = static_cast<int>(maxima.size());
  if (rep.hump_count >= 1) {
    rep.beta_r1 = events[0].first;
    rep.beta_c1 = events[0].second;
    rep.lm1 = maxima[0];
  }
  if (rep.hump_count >= 2) {
    rep.beta_r2 = events[1].first;
    rep.beta_c2 = events[1].second;
    rep.lm2 = maxima[1];
  }
  return rep;
}

std::vector<double> beta_grid(const SweepConfig& cfg) {
  std::vector<double> betas(cfg.beta_points);
  const double ratio = cfg.beta_min / cfg.beta_max;
  for (int i = 0; i < cfg.beta_points; ++i)
    betas[i] = cfg.beta_max * std::pow(ratio, static_cast<double>(i) / (cfg.beta_points - 1));
  if (cfg.append_beta_zero) betas.push_back(0.0);
  return betas;
}

// --- backends ----------------------------------------------------------------

namespace {

ModelParams model_of(const SweepConfig& cfg, double lambda1, double lambda2) {
  ModelParams p;
  p.gamma = cfg.gamma;
  p.lambda1 = lambda1;
  p.lambda2 = lambda2;
  p.N = cfg.N;
  return p;
}

// Pick a proxy grid size: double until the probe point is converged.
int resolve_proxy_sites(const ModelParams& p, const FieldProtocol& proto, double beta,
                        double t_probe, int start, int max_sites = 32768) {
  int n = start;
  ProxyCorrelators coarse(p, proto, n);
  CorrelatorSet prev = coarse.at(beta, t_probe);
  while (2 * n <= max_sites) {
    ProxyCorrelators fine(p, proto, 2 * n);
    const CorrelatorSet next = fine.at(beta, t_probe);
    const double d =
        std::max({std::abs(prev.mz_e - next.mz_e), std::abs(prev.mz_o - next.mz_o),
                  std::abs(prev.txx - next.txx), std::abs(prev.tyy - next.tyy),
                  std::abs(prev.tzz - next.tzz), std::abs(prev.txy - next.txy),
                  std::abs(prev.tyx - next.tyx)});
    if (d < 1e-8) return n;
    prev = next;
    n *= 2;
  }
  return n;
}

}  // namespace

// --- operations ---------------------------------------------------------------

ThermalSweepResult thermal_beta_sweep(const SweepConfig& cfg) {
  cfg.validate();
  ThermalSweepResult res;
  res.gamma = cfg.gamma;
  res.lambda2 = cfg.lambda2;
  res.lambda1 = cfg.fs_lambda1 ? lambda1_on_fs(cfg.gamma, cfg.lambda2) : cfg.lambda1;
  res.betas = beta_grid(cfg);
  res.ln.assign(res.betas.size(), 0.0);

  const ModelParams p = model_of(cfg, res.lambda1, res.lambda2);
  const auto proto = FieldProtocol::quench_to_zero(res.lambda1, res.lambda2);
  const int nb = static_cast<int>(res.betas.size());

  if (cfg.N == 0) {
    res.resolved_sites = resolve_proxy_sites(p, proto, cfg.beta_max, 0.0, cfg.proxy_sites);
    ProxyCorrelators solver(p, proto, res.resolved_sites);
    parallel_for(nb, cfg.resolved_threads(),
                 [&](int i) { res.ln[i] = ln_of(solver.at(res.betas[i], 0.0)); });
  } else if (cfg.backend == "ed") {
    EdSolver solver(build_hamiltonian(p, res.lambda1, res.lambda2));
    solver.thermal_pair_state(1.0, 2, 3);  // warm the pair cache
    parallel_for(nb, cfg.resolved_threads(), [&](int i) {
      res.ln[i] = log_negativity(solver.thermal_pair_state(res.betas[i], 2, 3)).log_negativity;
    });
  } else {
    ExactChainCorrelators solver(p, proto);
    parallel_for(nb, cfg.resolved_threads(),
                 [&](int i) { res.ln[i] = ln_of(solver.at(res.betas[i], 0.0)); });
  }
  res.report = detect_revivals(res.betas, res.ln, cfg.epsilon);
  return res;
}

ZeroRegionResult zero_region_map(const SweepConfig& cfg) {
  cfg.validate();
  ZeroRegionResult res;
  res.fs_lambda1 = lambda1_on_fs(cfg.gamma, cfg.lambda2);
  res.betas = cfg.region_betas;
  const int nl =
      static_cast<int>(std::floor((cfg.lambda1_max - cfg.lambda1_min) / cfg.lambda1_step + 1.5));
  res.lambda1.resize(nl);
  for (int i = 0; i < nl; ++i) res.lambda1[i] = cfg.lambda1_min + i * cfg.lambda1_step;
  const int nbeta = static_cast<int>(res.betas.size());
  res.ln.assign(nbeta, std::vector<double>(nl, 0.0));
  res.zero.assign(nbeta, std::vector<int>(nl, 0));

  const auto proto0 = FieldProtocol::quench_to_zero(res.fs_lambda1, cfg.lambda2);
  int sites = cfg.proxy_sites;
  if (cfg.N == 0) {
    const ModelParams probe = model_of(cfg, res.fs_lambda1, cfg.lambda2);
    const double bmax = *std::max_element(res.betas.begin(), res.betas.end());
    sites = resolve_proxy_sites(probe, proto0, bmax, cfg.t, cfg.proxy_sites);
  }
  res.resolved_sites = (cfg.N == 0) ? sites : 0;

  parallel_for(nl + 1, cfg.resolved_threads(), [&](int idx) {
    // the extra work item evaluates the exact factorization point
    const bool fs_item = (idx == nl);
    const double l1 = fs_item ? res.fs_lambda1 : res.lambda1[idx];
    const ModelParams p = model_of(cfg, l1, cfg.lambda2);
    const auto proto = FieldProtocol::quench_to_zero(l1, cfg.lambda2);
    std::vector<double> col(nbeta);
    if (cfg.N == 0) {
      ProxyCorrelators solver(p, proto, sites);
      for (int b = 0; b < nbeta; ++b) col[b] = ln_of(solver.at(res.betas[b], cfg.t));
    } else {
      ExactChainCorrelators solver(p, proto);
      for (int b = 0; b < nbeta; ++b) col[b] = ln_of(solver.at(res.betas[b], cfg.t));
    }
    if (fs_item)
      res.fs_ln = col;
    else
      for (int b = 0; b < nbeta; ++b) res.ln[b][idx] = col[b];
  });

  // zero mask and the contiguous zero run through the factorization point
  int fs_idx = 0;
  for (int i = 1; i < nl; ++i)
    if (std::abs(res.lambda1[i] - res.fs_lambda1) < std::abs(res.lambda1[fs_idx] - res.fs_lambda1))
      fs_idx = i;
  res.zero_width.assign(nbeta, 0.0);
  res.zero_span.assign(nbeta, {0.0, 0.0});
  for (int b = 0; b < nbeta; ++b) {
    for (int i = 0; i < nl; ++i) res.zero[b][i] = res.ln[b][i] <= cfg.epsilon ? 1 : 0;
    if (res.zero[b][fs_idx]) {
      int lo = fs_idx, hi = fs_idx;
      while (lo > 0 && res.zero[b][lo - 1]) --lo;
      while (hi + 1 < nl && res.zero[b][hi + 1]) ++hi;
      res.zero_width[b] = (hi - lo + 1) * cfg.lambda1_step;
      res.zero_span[b] = {res.lambda1[lo], res.lambda1[hi]};
    }
  }
  return res;
}

ClosedScanResult closed_scan(const SweepConfig& cfg) {
  cfg.validate();
  ClosedScanResult res;
  const auto grid = linspace(cfg.lambda1_min, cfg.lambda1_max, cfg.lambda1_points);
  for (double l1 : grid) {
    if (l1 * l1 >= 1.0 - cfg.gamma * cfg.gamma - 1e-15) {
      res.lambda1.push_back(l1);
      res.lambda2.push_back(lambda2_on_fs(cfg.gamma, l1));
    } else {
      res.excluded_lambda1.push_back(l1);
    }
  }
  const int nt = static_cast<int>(std::floor(cfg.t_max / cfg.t_step + 1.5));
  res.times.resize(nt);
  for (int i = 0; i < nt; ++i) res.times[i] = i * cfg.t_step;

  const int nl = static_cast<int>(res.lambda1.size());
  res.ln.assign(nl, std::vector<double>(nt, 0.0));
  res.late_time_mean.assign(nl, 0.0);

  if (cfg.N == 0 && nl > 0) {
    const int mid = nl / 2;
    const ModelParams probe = model_of(cfg, res.lambda1[mid], res.lambda2[mid]);
    const auto proto = FieldProtocol::quench_to_zero(res.lambda1[mid], res.lambda2[mid]);
    res.resolved_sites =
        resolve_proxy_sites(probe, proto, cfg.beta_s, cfg.t_max, cfg.proxy_sites);
  }

  parallel_for(nl, cfg.resolved_threads(), [&](int i) {
    const ModelParams p = model_of(cfg, res.lambda1[i], res.lambda2[i]);
    const auto proto = FieldProtocol::quench_to_zero(res.lambda1[i], res.lambda2[i]);
    std::vector<CorrelatorSet> row;
    if (cfg.N == 0) {
      ProxyCorrelators solver(p, proto, res.resolved_sites);
      row = solver.time_scan(cfg.beta_s, res.times);
    } else {
      ExactChainCorrelators solver(p, proto);
      row.reserve(nt);
      for (double tv : res.times) row.push_back(solver.at(cfg.beta_s, tv));
    }
    for (int k = 0; k < nt; ++k) res.ln[i][k] = ln_of(row[k]);
    const int tail = std::max(1, static_cast<int>(std::lround(nt * cfg.saturation_fraction)));
    double acc = 0.0;
    for (int k = nt - tail; k < nt; ++k) acc += res.ln[i][k];
    res.late_time_mean[i] = acc / tail;
  });
  return res;
}

SnapshotGridResult snapshot_grid(const SweepConfig& cfg) {
  cfg.validate();
  SnapshotGridResult res;
  res.lambda2 = cfg.lambda2;
  res.gammas = linspace(cfg.gamma_min, cfg.gamma_max, cfg.gamma_points);
  {
    SweepConfig bcfg = cfg;
    bcfg.append_beta_zero = false;
    res.betas = beta_grid(bcfg);
  }
  res.times = cfg.snapshot_times;
  const int ng = static_cast<int>(res.gammas.size());
  const int nb = static_cast<int>(res.betas.size());
  const int nt = static_cast<int>(res.times.size());
  res.ln.assign(nt, std::vector<std::vector<double>>(ng, std::vector<double>(nb, 0.0)));

  if (cfg.N == 0) {
    const double g_probe = res.gammas[ng / 2];
    const double l1 = lambda1_on_fs(g_probe, cfg.lambda2);
    const ModelParams probe = [&] {
      ModelParams p;
      p.gamma = g_probe;
      p.lambda1 = l1;
      p.lambda2 = cfg.lambda2;
      p.N = 0;
      return p;
    }();
    const auto proto = FieldProtocol::quench_to_zero(l1, cfg.lambda2);
    const double t_probe = *std::max_element(res.times.begin(), res.times.end());
    res.resolved_sites =
        resolve_proxy_sites(probe, proto, cfg.beta_max, t_probe, cfg.proxy_sites);
  }

  parallel_for(ng, cfg.resolved_threads(), [&](int gi) {
    ModelParams p;
    p.gamma = res.gammas[gi];
    p.lambda2 = cfg.lambda2;
    p.lambda1 = lambda1_on_fs(p.gamma, p.lambda2);
    p.N = cfg.N;
    const auto proto = FieldProtocol::quench_to_zero(p.lambda1, p.lambda2);
    if (cfg.N == 0) {
      ProxyCorrelators solver(p, proto, res.resolved_sites);
      for (int b = 0; b < nb; ++b)
        for (int ti = 0; ti < nt; ++ti)
          res.ln[ti][gi][b] = ln_of(solver.at(res.betas[b], res.times[ti]));
    } else {
      ExactChainCorrelators solver(p, proto);
      for (int b = 0; b < nb; ++b)
        for (int ti = 0; ti < nt; ++ti)
          res.ln[ti][gi][b] = ln_of(solver.at(res.betas[b], res.times[ti]));
    }
  });

  res.nonzero_fraction.assign(nt, 0.0);
  for (int ti = 0; ti < nt; ++ti) {
    int nz = 0;
    for (int gi = 0; gi < ng; ++gi)
      for (int b = 0; b < nb; ++b)
        if (res.ln[ti][gi][b] > cfg.epsilon) ++nz;
    res.nonzero_fraction[ti] = static_cast<double>(nz) / (ng * nb);
  }
  return res;
}

OpenRunResult open_run(const SweepConfig& cfg) {
  cfg.validate();
  OpenRunResult res;
  res.pairs = cfg.pairs;
  std::vector<double> grid = cfg.lambda1_values;
  if (grid.empty()) grid = linspace(cfg.lambda1_min, cfg.lambda1_max, cfg.lambda1_points);
  for (double l1 : grid) {
    if (l1 * l1 >= 1.0 - cfg.gamma * cfg.gamma - 1e-15) {
      res.lambda1.push_back(l1);
      res.lambda2.push_back(lambda2_on_fs(cfg.gamma, l1));
    } else {
      res.excluded_lambda1.push_back(l1);
    }
  }
  const int nl = static_cast<int>(res.lambda1.size());
  res.trajectories.resize(nl);
  res.max_ln.assign(nl, std::vector<double>(cfg.pairs.size(), 0.0));
  res.support.assign(nl, std::vector<double>(cfg.pairs.size(), 0.0));

  parallel_for(nl, cfg.resolved_threads(), [&](int i) {
    ModelParams p;
    p.gamma = cfg.gamma;
    p.lambda1 = res.lambda1[i];
    p.lambda2 = res.lambda2[i];
    p.N = cfg.N;
    const auto h_pre = build_hamiltonian(p, p.lambda1, p.lambda2);
    const DenseState rho0 = thermal_state(h_pre, cfg.beta_s);
    const auto h_run = cfg.hold_fields ? h_pre : build_hamiltonian(p, 0.0, 0.0);
    IntegratorOptions opts;
    opts.dt = cfg.dt;
    opts.observe_interval = cfg.observe_interval;
    opts.min_eig_stride = cfg.min_eig_stride;
    res.trajectories[i] =
        integrate(rho0, h_run, cfg.bath, cfg.ladder_choice(), cfg.t_final, cfg.pairs, opts);
    for (size_t q = 0; q < cfg.pairs.size(); ++q) {
      res.max_ln[i][q] = res.trajectories[i].max_ln(q);
      res.support[i][q] = res.trajectories[i].support_duration(q, cfg.epsilon);
    }
  });
  return res;
}

// --- persistence ---------------------------------------------------------------

namespace {

std::ofstream open_out(const fs::path& path) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

json manifest_base(const SweepConfig& cfg) {
  json j;
  j["tool"] = "atxy";
  j["version"] = kVersion;
  j["kind"] = to_string(cfg.kind);
  json c;
  for (const auto& [k, v] : cfg.as_flat_map()) c[k] = v;
  j["config"] = c;
  return j;
}

void finish_manifest(json& j, const SweepConfig& cfg, const std::vector<std::string>& outputs,
                     double wall_seconds) {
  j["outputs"] = outputs;
  j["wall_time_s"] = wall_seconds;
  const fs::path path = fs::path(cfg.out_dir) / (cfg.label + "_manifest.json");
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

}  // namespace

std::vector<std::string> write_result(const ThermalSweepResult& res, const SweepConfig& cfg) {
  Stopwatch sw;
  const fs::path csv = fs::path(cfg.out_dir) / (cfg.label + ".csv");
  {
    auto out = open_out(csv);
    out << "beta_s,gamma,lambda1,lambda2,ln\n";
    for (size_t i = 0; i < res.betas.size(); ++i)
      out << fmt12(res.betas[i]) << ',' << fmt12(res.gamma) << ',' << fmt12(res.lambda1) << ','
          << fmt12(res.lambda2) << ',' << fmt12(res.ln[i]) << "\n";
  }
  json j = manifest_base(cfg);
  j["resolved"] = {{"lambda1", res.lambda1},
                   {"lambda2", res.lambda2},
                   {"proxy_sites", res.resolved_sites},
                   {"threads", cfg.resolved_threads()}};
  json rep;
  rep["hump_count"] = res.report.hump_count;
  rep["grid_too_coarse"] = res.report.grid_too_coarse;
  if (res.report.beta_r1) rep["beta_r1"] = *res.report.beta_r1;
  if (res.report.beta_c1) rep["beta_c1"] = *res.report.beta_c1;
  if (res.report.beta_r2) rep["beta_r2"] = *res.report.beta_r2;
  if (res.report.beta_c2) rep["beta_c2"] = *res.report.beta_c2;
  rep["lm1"] = res.report.lm1;
  rep["lm2"] = res.report.lm2;
  j["revival_report"] = rep;
  std::vector<std::string> outputs = {csv.string()};
  finish_manifest(j, cfg, outputs, sw.seconds());
  outputs.push_back((fs::path(cfg.out_dir) / (cfg.label + "_manifest.json")).string());
  return outputs;
}

std::vector<std::string> write_result(const ZeroRegionResult& res, const SweepConfig& cfg) {
  Stopwatch sw;
  const fs::path csv = fs::path(cfg.out_dir) / (cfg.label + ".csv");
  {
    auto out = open_out(csv);
    out << "beta_s,lambda1,ln,zero\n";
    for (size_t b = 0; b < res.betas.size(); ++b)
      for (size_t i = 0; i < res.lambda1.size(); ++i)
        out << fmt12(res.betas[b]) << ',' << fmt12(res.lambda1[i]) << ','
            << fmt12(res.ln[b][i]) << ',' << res.zero[b][i] << "\n";
  }
  json j = manifest_base(cfg);
  j["resolved"] = {{"fs_lambda1", res.fs_lambda1},
                   {"proxy_sites", res.resolved_sites},
                   {"zero_width", res.zero_width},
                   {"fs_ln", res.fs_ln}};
  std::vector<std::string> outputs = {csv.string()};
  finish_manifest(j, cfg, outputs, sw.seconds());
  outputs.push_back((fs::path(cfg.out_dir) / (cfg.label + "_manifest.json")).string());
  return outputs;
}

std::vector<std::string> write_result(const ClosedScanResult& res, const SweepConfig& cfg) {
  Stopwatch sw;
  const fs::path csv = fs::path(cfg.out_dir) / (cfg.label + ".csv");
  {
    auto out = open_out(csv);
    out << "t,lambda1,lambda2,ln\n";
    for (size_t i = 0; i < res.lambda1.size(); ++i)
      for (size_t k = 0; k < res.times.size(); ++k)
        out << fmt12(res.times[k]) << ',' << fmt12(res.lambda1[i]) << ','
            << fmt12(res.lambda2[i]) << ',' << fmt12(res.ln[i][k]) << "\n";
  }
  json j = manifest_base(cfg);
  j["resolved"] = {{"excluded_lambda1", res.excluded_lambda1},
                   {"late_time_mean", res.late_time_mean},
                   {"proxy_sites", res.resolved_sites}};
  std::vector<std::string> outputs = {csv.string()};
  finish_manifest(j, cfg, outputs, sw.seconds());
  outputs.push_back((fs::path(cfg.out_dir) / (cfg.label + "_manifest.json")).string());
  return outputs;
}

std::vector<std::string> write_result(const SnapshotGridResult& res, const SweepConfig& cfg) {
  Stopwatch sw;
  const fs::path csv = fs::path(cfg.out_dir) / (cfg.label + ".csv");
  {
    auto out = open_out(csv);
    out << "t,beta_s,gamma,lambda1,lambda2,ln,nonzero\n";
    for (size_t ti = 0; ti < res.times.size(); ++ti)
      for (size_t gi = 0; gi < res.gammas.size(); ++gi) {
        const double l1 = lambda1_on_fs(res.gammas[gi], res.lambda2);
        for (size_t b = 0; b < res.betas.size(); ++b)
          out << fmt12(res.times[ti]) << ',' << fmt12(res.betas[b]) << ','
              << fmt12(res.gammas[gi]) << ',' << fmt12(l1) << ',' << fmt12(res.lambda2) << ','
              << fmt12(res.ln[ti][gi][b]) << ','
              << (res.ln[ti][gi][b] > cfg.epsilon ? 1 : 0) << "\n";
      }
  }
  json j = manifest_base(cfg);
  j["resolved"] = {{"nonzero_fraction", res.nonzero_fraction},
                   {"proxy_sites", res.resolved_sites}};
  std::vector<std::string> outputs = {csv.string()};
  finish_manifest(j, cfg, outputs, sw.seconds());
  outputs.push_back((fs::path(cfg.out_dir) / (cfg.label + "_manifest.json")).string());
  return outputs;
}

std::vector<std::string> write_result(const OpenRunResult& res, const SweepConfig& cfg) {
  Stopwatch sw;
  std::vector<std::string> outputs;
  for (size_t i = 0; i < res.lambda1.size(); ++i) {
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "_l1_%.4f", res.lambda1[i]);
    const fs::path csv = fs::path(cfg.out_dir) / (cfg.label + suffix + ".csv");
    auto out = open_out(csv);
    out << "t,pair_i,pair_j,ln,trace_err,min_eig\n";
    const Trajectory& traj = res.trajectories[i];
    double last_min_eig = 0.0;
    for (const auto& pt : traj.points) {
      if (pt.min_eig_checked) last_min_eig = pt.min_eig;
      for (size_t q = 0; q < traj.pairs.size(); ++q)
        out << fmt12(pt.t) << ',' << traj.pairs[q].first << ',' << traj.pairs[q].second << ','
            << fmt12(pt.pair_ln[q]) << ',' << fmt12(pt.trace_err) << ',' << fmt12(last_min_eig)
            << "\n";
    }
    outputs.push_back(csv.string());
  }
  json j = manifest_base(cfg);
  json summary;
  summary["lambda1"] = res.lambda1;
  summary["lambda2"] = res.lambda2;
  summary["excluded_lambda1"] = res.excluded_lambda1;
  json pairs_j = json::array();
  for (auto [a, b] : res.pairs) pairs_j.push_back({a, b});
  summary["pairs"] = pairs_j;
  summary["max_ln"] = res.max_ln;
  summary["support_above_epsilon"] = res.support;
  j["summary"] = summary;
  finish_manifest(j, cfg, outputs, sw.seconds());
  outputs.push_back((fs::path(cfg.out_dir) / (cfg.label + "_manifest.json")).string());
  return outputs;
}

}  // namespace atxy
