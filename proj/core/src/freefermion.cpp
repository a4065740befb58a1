#include "atxy/freefermion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace atxy {

using Eigen::MatrixXcd;
using Eigen::VectorXd;
using std::complex;

namespace {

constexpr complex<double> kI{0.0, 1.0};

// Annihilation operator for mode k among n modes, Jordan-Wigner ordered:
// sign (-1)^(occupied modes below k).
MatrixXcd annihilator(int n_modes, int k) {
  const int dim = 1 << n_modes;
  MatrixXcd m = MatrixXcd::Zero(dim, dim);
  for (int s = 0; s < dim; ++s) {
    if (((s >> k) & 1) == 0) continue;
    int below = s & ((1 << k) - 1);
    double sign = (__builtin_popcount(below) % 2 == 0) ? 1.0 : -1.0;
    m(s ^ (1 << k), s) = sign;
  }
  return m;
}

VectorXd parity_diagonal(int n_modes) {
  const int dim = 1 << n_modes;
  VectorXd d(dim);
  for (int s = 0; s < dim; ++s) d(s) = (__builtin_popcount(s) % 2 == 0) ? 1.0 : -1.0;
  return d;
}

struct BlockSpec {
  double p;
  BlockKind kind;
};

std::vector<BlockSpec> block_specs(int N, Sector sector) {
  const int M = N / 2;
  std::vector<BlockSpec> out;
  if (sector == Sector::antiperiodic) {
    const int n4 = (M % 2 == 0) ? M / 2 : (M - 1) / 2;
    for (int k = 1; k <= n4; ++k) out.push_back({k - 0.5, BlockKind::four_mode});
    if (M % 2 != 0) out.push_back({M / 2.0, BlockKind::self_pair});
  } else {
    out.push_back({0.0, BlockKind::self_hop});
    const int n4 = (M % 2 == 0) ? M / 2 - 1 : (M - 1) / 2;
    for (int k = 1; k <= n4; ++k) out.push_back({static_cast<double>(k), BlockKind::four_mode});
    if (M % 2 == 0) out.push_back({M / 2.0, BlockKind::self_pair});
  }
  return out;
}

MatrixXcd block_hamiltonian(const BlockSpec& spec, int N, double J, double gamma, double h1,
                            double h2) {
  const double phi = 2.0 * std::numbers::pi * spec.p / N;
  if (spec.kind == BlockKind::four_mode) {
    // modes [a_p, b_p, a_{-p}, b_{-p}]
    static const MatrixXcd ap = annihilator(4, 0), bp = annihilator(4, 1),
                           am = annihilator(4, 2), bm = annihilator(4, 3);
    const double c = std::cos(phi), s = std::sin(phi);
    MatrixXcd h = J * c *
                  (ap.adjoint() * bp + bp.adjoint() * ap + am.adjoint() * bm +
                   bm.adjoint() * am).eval();
    MatrixXcd pair = -kI * J * gamma * s *
                     (ap.adjoint() * bm.adjoint() - am.adjoint() * bp.adjoint());
    h += pair + pair.adjoint();
    h += (h1 - h2) * (ap.adjoint() * ap + am.adjoint() * am);
    h += (h1 + h2) * (bp.adjoint() * bp + bm.adjoint() * bm);
    h -= 2.0 * h1 * MatrixXcd::Identity(16, 16);
    return h;
  }
  static const MatrixXcd a2 = annihilator(2, 0), b2 = annihilator(2, 1);
  MatrixXcd h = MatrixXcd::Zero(4, 4);
  if (spec.kind == BlockKind::self_hop) {
    h += J * (a2.adjoint() * b2 + b2.adjoint() * a2);
  } else {
    MatrixXcd pair = -kI * J * gamma * (a2.adjoint() * b2.adjoint());
    h += pair + pair.adjoint();
  }
  h += (h1 - h2) * (a2.adjoint() * a2);
  h += (h1 + h2) * (b2.adjoint() * b2);
  h -= h1 * MatrixXcd::Identity(4, 4);
  return h;
}

struct EigBlock {
  BlockSpec spec;
  double phi;
  int n_modes;
  int dim;
  std::vector<MatrixXcd> ann;  // annihilators per local mode
  VectorXd parity;
  MatrixXcd h_pre, h_post;
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig_pre, eig_post;
  double e0;  // ground energy of h_pre

  void build(const BlockSpec& s, int N, double J, double gamma, double h1_pre, double h2_pre,
             double h1_post, double h2_post) {
    spec = s;
    phi = 2.0 * std::numbers::pi * s.p / N;
    n_modes = (s.kind == BlockKind::four_mode) ? 4 : 2;
    dim = 1 << n_modes;
    ann.clear();
    for (int k = 0; k < n_modes; ++k) ann.push_back(annihilator(n_modes, k));
    parity = parity_diagonal(n_modes);
    h_pre = block_hamiltonian(s, N, J, gamma, h1_pre, h2_pre);
    h_post = block_hamiltonian(s, N, J, gamma, h1_post, h2_post);
    eig_pre.compute(h_pre);
    eig_post.compute(h_post);
    e0 = eig_pre.eigenvalues()(0);
  }

  // exp(-beta (h_pre - e0)) evolved to time t under h_post; unnormalized,
  // trace in [1, dim].
  MatrixXcd state(double beta, double t) const {
    VectorXd w = (-beta * (eig_pre.eigenvalues().array() - e0)).exp();
    MatrixXcd rho = eig_pre.eigenvectors() * w.asDiagonal() *
                    eig_pre.eigenvectors().adjoint();
    if (t > 0.0) {
      Eigen::VectorXcd ph(dim);
      for (int m = 0; m < dim; ++m)
        ph(m) = std::polar(1.0, -eig_post.eigenvalues()(m) * t);
      MatrixXcd a = eig_post.eigenvectors().adjoint() * rho * eig_post.eigenvectors();
      a = ph.asDiagonal() * a * ph.conjugate().asDiagonal();
      rho = eig_post.eigenvectors() * a * eig_post.eigenvectors().adjoint();
    }
    return rho;
  }
};

// Reference from a momentum-set entry to its block and local mode indices.
struct ModeRef {
  int block;
  int a_local;
  int b_local;
};

struct SectorLayout {
  std::vector<double> ps;       // momentum values in set order
  std::vector<ModeRef> refs;    // same order
  std::vector<BlockSpec> specs;

  void build(int N, Sector sector) {
    specs = block_specs(N, sector);
    ps.clear();
    refs.clear();
    for (int b = 0; b < static_cast<int>(specs.size()); ++b) {
      if (specs[b].kind == BlockKind::four_mode) {
        ps.push_back(specs[b].p);
        refs.push_back({b, 0, 1});
        ps.push_back(-specs[b].p);
        refs.push_back({b, 2, 3});
      } else {
        ps.push_back(specs[b].p);
        refs.push_back({b, 0, 1});
      }
    }
  }
};

}  // namespace

std::vector<double> momentum_indices(int N, Sector sector) {
  if (N < 4 || N % 2 != 0) throw std::invalid_argument("momentum_indices: N must be even, >= 4");
  SectorLayout lay;
  lay.build(N, sector);
  auto ps = lay.ps;
  std::sort(ps.begin(), ps.end());
  return ps;
}

int block_count(int N, Sector sector) {
  return static_cast<int>(block_specs(N, sector).size());
}

MomentumBlock build_block(const ModelParams& p, const FieldProtocol& proto, double t,
                          Sector sector, int block_index) {
  p.validate();
  const int N = (p.N == 0) ? 4096 : p.N;
  auto specs = block_specs(N, sector);
  if (block_index < 0 || block_index >= static_cast<int>(specs.size()))
    throw std::out_of_range("build_block: block index out of range");
  const auto [h1, h2] = field_at(proto, t);
  MomentumBlock blk;
  blk.p = specs[block_index].p;
  blk.phi = 2.0 * std::numbers::pi * blk.p / N;
  blk.kind = specs[block_index].kind;
  blk.n_modes = (blk.kind == BlockKind::four_mode) ? 4 : 2;
  blk.h = block_hamiltonian(specs[block_index], N, p.J, p.gamma, h1, h2);
  return blk;
}

MatrixXcd thermal_block_state(const MomentumBlock& block, double beta_s) {
  if (beta_s < 0.0) throw std::invalid_argument("thermal_block_state: beta_s must be >= 0");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(block.h);
  VectorXd w = (-beta_s * (es.eigenvalues().array() - es.eigenvalues()(0))).exp();
  w /= w.sum();
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
}

MatrixXcd evolve_block(const MatrixXcd& state, const MomentumBlock& block_post, double t) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(block_post.h);
  const int dim = static_cast<int>(state.rows());
  Eigen::VectorXcd ph(dim);
  for (int m = 0; m < dim; ++m) ph(m) = std::polar(1.0, -es.eigenvalues()(m) * t);
  MatrixXcd a = es.eigenvectors().adjoint() * state * es.eigenvectors();
  a = ph.asDiagonal() * a * ph.conjugate().asDiagonal();
  return es.eigenvectors() * a * es.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// Exact finite-chain path: both parity sectors, parity-weighted block traces.
// ---------------------------------------------------------------------------

namespace {

struct COp {
  int site;
  bool dag;
};

// A prepared sector at one (beta, t): block states, their plain and
// parity-weighted traces, and memoized local-monomial traces.
struct SectorState {
  const SectorLayout* layout;
  std::vector<const EigBlock*> blocks;
  std::vector<MatrixXcd> rho;      // unnormalized block states
  std::vector<double> z1, zp;      // Tr[rho], Tr[P rho]
  double scale = 1.0;              // exp(-beta (E0_sector - E0_min))
  // memo key: up to 4 local ops, 5 bits each (mode*2 + dag + 1), per weight
  mutable std::vector<std::unordered_map<uint32_t, complex<double>>> memo1, memoP;

  complex<double> block_trace(int b, const std::array<uint8_t, 4>& ops, int n_ops,
                              bool with_parity) const {
    uint32_t key = n_ops;
    for (int i = 0; i < n_ops; ++i) key = (key << 5) | ops[i];
    auto& table = with_parity ? memoP[b] : memo1[b];
    auto it = table.find(key);
    if (it != table.end()) return it->second;
    const EigBlock& blk = *blocks[b];
    MatrixXcd m = rho[b];
    for (int i = n_ops - 1; i >= 0; --i) {
      const int mode = (ops[i] - 1) >> 1;
      const bool dag = (ops[i] - 1) & 1;
      m = (dag ? MatrixXcd(blk.ann[mode].adjoint()) : blk.ann[mode]) * m;
    }
    complex<double> tr;
    if (with_parity)
      tr = (blk.parity.asDiagonal().toDenseMatrix().cast<complex<double>>() * m).trace();
    else
      tr = m.trace();
    table.emplace(key, tr);
    return tr;
  }
};

struct MonomialAccum {
  complex<double> t1{0.0, 0.0};
  complex<double> tp{0.0, 0.0};
};

// Sum over momentum assignments of a real-space fermion monomial; returns the
// plain and parity-weighted unnormalized traces for one sector.
MonomialAccum sector_expect(const SectorState& st, const std::vector<COp>& ops, int N) {
  const auto& lay = *st.layout;
  const int M = N / 2;
  const int n_ops = static_cast<int>(ops.size());
  const int n_p = static_cast<int>(lay.ps.size());
  const double norm = std::pow(1.0 / std::sqrt(static_cast<double>(M)), n_ops);
  const int n_blocks = static_cast<int>(st.blocks.size());

  MonomialAccum acc;
  std::vector<int> idx(n_ops, 0);
  // (block, local op code, original position)
  std::array<std::array<int, 3>, 4> mops{};
  std::array<uint8_t, 4> grouped{};

  while (true) {
    complex<double> coeff = norm;
    for (int j = 0; j < n_ops; ++j) {
      const double phi = 2.0 * std::numbers::pi * lay.ps[idx[j]] / N;
      const ModeRef& ref = lay.refs[idx[j]];
      const bool odd_site = (ops[j].site % 2 != 0);
      const int local = odd_site ? ref.a_local : ref.b_local;
      mops[j] = {ref.block, local * 2 + (ops[j].dag ? 1 : 0) + 1, j};
      coeff *= std::polar(1.0, (ops[j].dag ? 1.0 : -1.0) * ops[j].site * phi);
    }
    // stable sort by block, counting transpositions
    int sign = 1;
    for (int i = 1; i < n_ops; ++i)
      for (int j = i; j > 0 && mops[j - 1][0] > mops[j][0]; --j) {
        std::swap(mops[j - 1], mops[j]);
        sign = -sign;
      }
    // group by block; skip if any group has odd size
    bool ok = true;
    int g = 0;
    complex<double> val1 = 1.0, valp = 1.0;
    bool any_zerop = false;
    std::array<std::pair<int, int>, 4> groups{};  // (block, count)
    int n_groups = 0;
    while (g < n_ops) {
      int b = mops[g][0];
      int h = g;
      while (h < n_ops && mops[h][0] == b) ++h;
      if ((h - g) % 2 != 0) {
        ok = false;
        break;
      }
      groups[n_groups++] = {b, h - g};
      g = h;
    }
    if (ok) {
      int gi = 0;
      for (int gr = 0; gr < n_groups; ++gr) {
        const int b = groups[gr].first;
        const int cnt = groups[gr].second;
        for (int k = 0; k < cnt; ++k) grouped[k] = static_cast<uint8_t>(mops[gi + k][1]);
        val1 *= st.block_trace(b, grouped, cnt, false);
        valp *= st.block_trace(b, grouped, cnt, true);
        gi += cnt;
      }
      // product of traces over untouched blocks
      for (int b = 0; b < n_blocks; ++b) {
        bool involved = false;
        for (int gr = 0; gr < n_groups; ++gr)
          if (groups[gr].first == b) involved = true;
        if (!involved) {
          val1 *= st.z1[b];
          if (st.zp[b] == 0.0)
            any_zerop = true;
          else
            valp *= st.zp[b];
        }
      }
      acc.t1 += coeff * static_cast<double>(sign) * val1;
      if (!any_zerop) acc.tp += coeff * static_cast<double>(sign) * valp;
    }
    // advance the assignment
    int j = 0;
    for (; j < n_ops; ++j) {
      if (++idx[j] < n_p) break;
      idx[j] = 0;
    }
    if (j == n_ops) break;
  }
  acc.t1 *= st.scale;
  acc.tp *= st.scale;
  return acc;
}

}  // namespace

struct ExactChainCorrelators::Impl {
  ModelParams params;
  FieldProtocol proto;
  int u, v;  // pair sites, u even
  SectorLayout lay_ap, lay_p;
  std::vector<EigBlock> blocks_ap, blocks_p;
  double e0_ap = 0.0, e0_p = 0.0;

  void build() {
    params.validate();
    const int N = params.N;
    if (N < 4 || N % 2 != 0)
      throw std::invalid_argument("ExactChainCorrelators: finite even N >= 4 required");
    if (u % 2 != 0 || u < 2 || u + 1 > N)
      throw std::invalid_argument("ExactChainCorrelators: pair must start at an even site");
    lay_ap.build(N, Sector::antiperiodic);
    lay_p.build(N, Sector::periodic);
    auto mk = [&](const SectorLayout& lay, std::vector<EigBlock>& blocks, double& e0_sum) {
      blocks.resize(lay.specs.size());
      e0_sum = 0.0;
      for (size_t b = 0; b < lay.specs.size(); ++b) {
        blocks[b].build(lay.specs[b], N, params.J, params.gamma, proto.h1_pre, proto.h2_pre,
                        proto.h1_post, proto.h2_post);
        e0_sum += blocks[b].e0;
      }
    };
    mk(lay_ap, blocks_ap, e0_ap);
    mk(lay_p, blocks_p, e0_p);
  }

  SectorState prepare(const SectorLayout& lay, const std::vector<EigBlock>& blocks,
                      double e0_sum, double e0_min, double beta, double t) const {
    SectorState st;
    st.layout = &lay;
    const size_t nb = blocks.size();
    st.blocks.resize(nb);
    st.rho.resize(nb);
    st.z1.resize(nb);
    st.zp.resize(nb);
    st.memo1.assign(nb, {});
    st.memoP.assign(nb, {});
    for (size_t b = 0; b < nb; ++b) {
      st.blocks[b] = &blocks[b];
      st.rho[b] = blocks[b].state(beta, t);
      st.z1[b] = st.rho[b].trace().real();
      st.zp[b] = (blocks[b].parity.asDiagonal() * st.rho[b]).trace().real();
    }
    const double expo = -beta * (e0_sum - e0_min);
    st.scale = (expo < -700.0) ? 0.0 : std::exp(expo);
    return st;
  }

  CorrelatorSet correlators(double beta, double t) const {
    const int N = params.N;
    const double e0_min = std::min(e0_ap, e0_p);
    SectorState ap = prepare(lay_ap, blocks_ap, e0_ap, e0_min, beta, t);
    SectorState pe = prepare(lay_p, blocks_p, e0_p, e0_min, beta, t);

    // partition-function combination: even parity from AP, odd from P
    double zp_ap = 1.0, z1_ap = 1.0, zp_p = 1.0, z1_p = 1.0;
    for (size_t b = 0; b < ap.blocks.size(); ++b) {
      z1_ap *= ap.z1[b];
      zp_ap *= ap.zp[b];
    }
    for (size_t b = 0; b < pe.blocks.size(); ++b) {
      z1_p *= pe.z1[b];
      zp_p *= pe.zp[b];
    }
    const double denom = 0.5 * (ap.scale * (z1_ap + zp_ap) + pe.scale * (z1_p - zp_p));

    auto expval = [&](const std::vector<COp>& ops) {
      MonomialAccum a = sector_expect(ap, ops, N);
      MonomialAccum p = sector_expect(pe, ops, N);
      return (0.5 * (a.t1 + a.tp + p.t1 - p.tp)) / denom;
    };

    const int uu = u, vv = v;
    const complex<double> cdd = expval({{uu, true}, {vv, true}});    // <c_u^+ c_v^+>
    const complex<double> cdn = expval({{uu, true}, {vv, false}});   // <c_u^+ c_v>
    const complex<double> cnd = expval({{uu, false}, {vv, true}});   // <c_u c_v^+>
    const complex<double> cnn = expval({{uu, false}, {vv, false}});  // <c_u c_v>
    const complex<double> nu = expval({{uu, true}, {uu, false}});
    const complex<double> nv = expval({{vv, true}, {vv, false}});
    const complex<double> nunv =
        expval({{uu, true}, {uu, false}, {vv, true}, {vv, false}});

    CorrelatorSet c;
    c.mz_e = 2.0 * nu.real() - 1.0;
    c.mz_o = 2.0 * nv.real() - 1.0;
    c.txx = (cdd + cdn - cnd - cnn).real();
    c.tyy = -(cdd - cdn + cnd - cnn).real();
    c.txy = (-kI * (cdd - cdn - cnd + cnn)).real();
    c.tyx = (-kI * (cdd + cdn + cnd + cnn)).real();
    c.tzz = 4.0 * nunv.real() - 2.0 * nu.real() - 2.0 * nv.real() + 1.0;
    return c;
  }
};

ExactChainCorrelators::ExactChainCorrelators(const ModelParams& p, const FieldProtocol& proto,
                                             int even_site)
    : impl_(std::make_unique<Impl>()) {
  impl_->params = p;
  impl_->proto = proto;
  impl_->u = even_site;
  impl_->v = even_site + 1;
  impl_->build();
}

ExactChainCorrelators::~ExactChainCorrelators() = default;
ExactChainCorrelators::ExactChainCorrelators(ExactChainCorrelators&&) noexcept = default;

CorrelatorSet ExactChainCorrelators::at(double beta_s, double t) const {
  if (beta_s < 0.0) throw std::invalid_argument("correlators: beta_s must be >= 0");
  return impl_->correlators(beta_s, std::max(t, 0.0));
}

// ---------------------------------------------------------------------------
// Thermodynamic proxy: antiperiodic sector, normalized blocks, Wick theorem.
// ---------------------------------------------------------------------------

namespace {

// two-point table entry ids per block: species-ordered op pair lookups
// pair types needed by the correlators, in terms of local modes
// [a_p, b_p, a_{-p}, b_{-p}] = [0, 1, 2, 3].
struct PairId {
  int mu;    // local mode of first op
  bool mud;  // first op daggered
  int nu;
  bool nud;
};

}  // namespace

struct ProxyCorrelators::Impl {
  ModelParams params;
  FieldProtocol proto;
  int n_sites;
  int u, v;
  std::vector<EigBlock> blocks;  // AP sector, all four-mode

  // per-block cached operator tables for the 24 mode pairs:
  //   d0[b][k][m]  = (Vpre^+ P_k Vpre)_mm      (thermal path)
  //   wmat[b][k]   = Vpost^+ P_k Vpost          (quench path)
  //   uchg[b]      = Vpost^+ Vpre               (basis change)
  std::vector<std::array<Eigen::VectorXcd, 24>> d0;
  mutable std::vector<std::vector<MatrixXcd>> wmat;
  mutable std::vector<MatrixXcd> uchg;
  mutable std::once_flag time_tables_once;

  struct PairTable {
    // values[b][k]: k indexes the 6 pair types x 4 momentum-sign combinations
    std::vector<std::array<complex<double>, 24>> values;
  };

  static constexpr std::array<PairId, 24> pair_ids() {
    // 6 type groups x 4 momentum-sign combinations:
    // (b+ b), (a+ a), (b+ a), (b+ a+), (b a), (b a+)
    std::array<PairId, 24> ids{};
    int n = 0;
    const int a_of[2] = {0, 2};  // a at +p, a at -p
    const int b_of[2] = {1, 3};
    for (int sp = 0; sp < 2; ++sp)
      for (int sq = 0; sq < 2; ++sq) {
        ids[n++] = {b_of[sp], true, b_of[sq], false};
        ids[n++] = {a_of[sp], true, a_of[sq], false};
        ids[n++] = {b_of[sp], true, a_of[sq], false};
        ids[n++] = {b_of[sp], true, a_of[sq], true};
        ids[n++] = {b_of[sp], false, a_of[sq], false};
        ids[n++] = {b_of[sp], false, a_of[sq], true};
      }
    return ids;
  }

  // the 24 pair operator products; identical for every four-mode block
  static const std::array<MatrixXcd, 24>& pair_ops() {
    static const std::array<MatrixXcd, 24> ops = [] {
      const auto ids = pair_ids();
      std::array<MatrixXcd, 24> out;
      for (int k = 0; k < 24; ++k) {
        const MatrixXcd m1 = ids[k].mud ? MatrixXcd(annihilator(4, ids[k].mu).adjoint())
                                        : annihilator(4, ids[k].mu);
        const MatrixXcd m2 = ids[k].nud ? MatrixXcd(annihilator(4, ids[k].nu).adjoint())
                                        : annihilator(4, ids[k].nu);
        out[k] = m1 * m2;
      }
      return out;
    }();
    return ops;
  }

  void build() {
    params.validate();
    if (n_sites < 8 || n_sites % 4 != 0)
      throw std::invalid_argument("ProxyCorrelators: proxy sites must be divisible by 4");
    SectorLayout lay;
    lay.build(n_sites, Sector::antiperiodic);
    blocks.resize(lay.specs.size());
    d0.resize(lay.specs.size());
    const auto& ops = pair_ops();
    for (size_t b = 0; b < lay.specs.size(); ++b) {
      blocks[b].build(lay.specs[b], n_sites, params.J, params.gamma, proto.h1_pre,
                      proto.h2_pre, proto.h1_post, proto.h2_post);
      const MatrixXcd& vpre = blocks[b].eig_pre.eigenvectors();
      for (int k = 0; k < 24; ++k)
        d0[b][k] = (vpre.adjoint() * ops[k] * vpre).diagonal();
    }
  }

  void build_time_tables() const {
    std::call_once(time_tables_once, [this] {
      const auto& ops = pair_ops();
      wmat.resize(blocks.size());
      uchg.resize(blocks.size());
      for (size_t b = 0; b < blocks.size(); ++b) {
        const MatrixXcd& vpost = blocks[b].eig_post.eigenvectors();
        uchg[b] = vpost.adjoint() * blocks[b].eig_pre.eigenvectors();
        wmat[b].resize(24);
        for (int k = 0; k < 24; ++k) wmat[b][k] = vpost.adjoint() * ops[k] * vpost;
      }
    });
  }

  // normalized thermal state of one block in its pre eigenbasis: weights only
  static VectorXd thermal_weights(const EigBlock& blk, double beta) {
    VectorXd w = (-beta * (blk.eig_pre.eigenvalues().array() - blk.e0)).exp();
    w /= w.sum();
    return w;
  }

  PairTable tables_at(double beta, double t) const {
    PairTable tab;
    tab.values.resize(blocks.size());
    if (t > 0.0) build_time_tables();
    for (size_t b = 0; b < blocks.size(); ++b) {
      const EigBlock& blk = blocks[b];
      const VectorXd w = thermal_weights(blk, beta);
      if (t <= 0.0) {
        for (int k = 0; k < 24; ++k) {
          complex<double> val = 0.0;
          for (int m = 0; m < blk.dim; ++m) val += w(m) * d0[b][k](m);
          tab.values[b][k] = val;
        }
      } else {
        // rho'(t) in the post eigenbasis, then Tr[rho(t) P_k] = sum rho'(t)_{mn} W_k[n,m]
        MatrixXcd rp = uchg[b] * w.asDiagonal() * uchg[b].adjoint();
        Eigen::VectorXcd ph(blk.dim);
        for (int m = 0; m < blk.dim; ++m)
          ph(m) = std::polar(1.0, -blk.eig_post.eigenvalues()(m) * t);
        rp = ph.asDiagonal() * rp * ph.conjugate().asDiagonal();
        for (int k = 0; k < 24; ++k) {
          const MatrixXcd& wm = wmat[b][k];
          complex<double> val = 0.0;
          for (int m = 0; m < blk.dim; ++m)
            for (int n = 0; n < blk.dim; ++n) val += rp(m, n) * wm(n, m);
          tab.values[b][k] = val;
        }
      }
    }
    return tab;
  }

  CorrelatorSet correlators_from_tables(const PairTable& tab) const {
    const int M = n_sites / 2;
    // G sums over blocks and momentum-sign choices: type index t0..t5 with
    // 4 sign combos each; sign combo index = 2*sp + sq, momenta (+p, -p)
    complex<double> g_bdb = 0, g_ada = 0, g_bda = 0, g_bdad = 0, g_ba = 0, g_bad = 0;
    for (size_t b = 0; b < blocks.size(); ++b) {
      const double p = blocks[b].spec.p;
      const double phis[2] = {2.0 * std::numbers::pi * p / n_sites,
                              -2.0 * std::numbers::pi * p / n_sites};
      for (int sp = 0; sp < 2; ++sp)
        for (int sq = 0; sq < 2; ++sq) {
          const int base = (2 * sp + sq) * 6;
          const auto& vals = tab.values[b];
          // u is even (b sublattice), v odd (a sublattice)
          g_bdb += std::polar(1.0, u * (phis[sp] - phis[sq])) * vals[base + 0];
          g_ada += std::polar(1.0, v * (phis[sp] - phis[sq])) * vals[base + 1];
          g_bda += std::polar(1.0, u * phis[sp] - v * phis[sq]) * vals[base + 2];
          g_bdad += std::polar(1.0, u * phis[sp] + v * phis[sq]) * vals[base + 3];
          g_ba += std::polar(1.0, -u * phis[sp] - v * phis[sq]) * vals[base + 4];
          g_bad += std::polar(1.0, -u * phis[sp] + v * phis[sq]) * vals[base + 5];
        }
    }
    const double invM = 1.0 / M;
    const complex<double> g1_uu = g_bdb * invM;   // <c_u^+ c_u>
    const complex<double> g1_vv = g_ada * invM;   // <c_v^+ c_v>
    const complex<double> g1_uv = g_bda * invM;   // <c_u^+ c_v>
    const complex<double> g2_uv = g_bdad * invM;  // <c_u^+ c_v^+>
    const complex<double> g3_uv = g_ba * invM;    // <c_u c_v>
    const complex<double> g4_uv = g_bad * invM;   // <c_u c_v^+>

    CorrelatorSet c;
    c.mz_e = 2.0 * g1_uu.real() - 1.0;
    c.mz_o = 2.0 * g1_vv.real() - 1.0;
    c.txx = (g2_uv + g1_uv - g4_uv - g3_uv).real();
    c.tyy = -(g2_uv - g1_uv + g4_uv - g3_uv).real();
    c.txy = (-kI * (g2_uv - g1_uv - g4_uv + g3_uv)).real();
    c.tyx = (-kI * (g2_uv + g1_uv + g4_uv + g3_uv)).real();
    // Wick: <n_u n_v> = G1uu G1vv - G2uv G3uv + G1uv G4uv
    const complex<double> nn = g1_uu * g1_vv - g2_uv * g3_uv + g1_uv * g4_uv;
    c.tzz = 4.0 * nn.real() - 2.0 * g1_uu.real() - 2.0 * g1_vv.real() + 1.0;
    return c;
  }
};

ProxyCorrelators::ProxyCorrelators(const ModelParams& p, const FieldProtocol& proto,
                                   int proxy_sites, int even_site)
    : impl_(std::make_unique<Impl>()) {
  impl_->params = p;
  impl_->proto = proto;
  impl_->n_sites = proxy_sites;
  impl_->u = even_site;
  impl_->v = even_site + 1;
  impl_->build();
}

ProxyCorrelators::~ProxyCorrelators() = default;
ProxyCorrelators::ProxyCorrelators(ProxyCorrelators&&) noexcept = default;

int ProxyCorrelators::sites() const { return impl_->n_sites; }

CorrelatorSet ProxyCorrelators::at(double beta_s, double t) const {
  if (beta_s < 0.0) throw std::invalid_argument("correlators: beta_s must be >= 0");
  auto tab = impl_->tables_at(beta_s, std::max(t, 0.0));
  return impl_->correlators_from_tables(tab);
}

std::vector<CorrelatorSet> ProxyCorrelators::beta_scan(const std::vector<double>& betas,
                                                       double t) const {
  std::vector<CorrelatorSet> out;
  out.reserve(betas.size());
  for (double b : betas) out.push_back(at(b, t));
  return out;
}

std::vector<CorrelatorSet> ProxyCorrelators::time_scan(double beta_s,
                                                       const std::vector<double>& times) const {
  std::vector<CorrelatorSet> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(at(beta_s, t));
  return out;
}

namespace {

double set_distance(const CorrelatorSet& a, const CorrelatorSet& b) {
  return std::max({std::abs(a.mz_e - b.mz_e), std::abs(a.mz_o - b.mz_o),
                   std::abs(a.txx - b.txx), std::abs(a.tyy - b.tyy), std::abs(a.tzz - b.tzz),
                   std::abs(a.txy - b.txy), std::abs(a.tyx - b.tyx)});
}

}  // namespace

CorrelatorSet ProxyCorrelators::converged(const ModelParams& p, const FieldProtocol& proto,
                                          double beta_s, double t, double tol, int start_sites,
                                          int max_sites) {
  int n = start_sites;
  ProxyCorrelators coarse(p, proto, n);
  CorrelatorSet prev = coarse.at(beta_s, t);
  while (2 * n <= max_sites) {
    ProxyCorrelators fine(p, proto, 2 * n);
    CorrelatorSet next = fine.at(beta_s, t);
    if (set_distance(prev, next) < tol) return next;
    prev = next;
    n *= 2;
  }
  return prev;
}

CorrelatorSet correlators(const ModelParams& p, const FieldProtocol& proto, double beta_s,
                          double t) {
  p.validate();
  if (p.N == 0) return ProxyCorrelators::converged(p, proto, beta_s, t);
  ExactChainCorrelators solver(p, proto);
  return solver.at(beta_s, t);
}

}  // namespace atxy
