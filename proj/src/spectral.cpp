#include "qplab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qplab/tridiag.hpp"

namespace qp {

namespace {

// diagonal of the Dirichlet truncation of H on [-N, N] at phase x
std::vector<double> schrodinger_diag(const OperatorConfig& cfg, double x, int N) {
  std::vector<double> d;
  d.reserve(2 * std::size_t(N) + 1);
  for (int n = -N; n <= N; ++n) {
    d.push_back(cfg.lambda * cfg.pot.eval(Cplx(x + n * cfg.alpha(), 0.0)).real());
  }
  return d;
}

double linear_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// atoms of sum_v mu^{f_v} from one eigensolve
MeasureApprox assemble_measure(const OperatorConfig& cfg, int N,
                               const std::vector<std::map<std::int64_t, Cplx>>& fs) {
  const int dim = 2 * N + 1;
  std::vector<int> rows;
  for (const auto& f : fs) {
    for (const auto& [pos, c] : f) rows.push_back(int(pos) + N);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  auto row_of = [&](std::int64_t pos) {
    return Eigen::Index(std::lower_bound(rows.begin(), rows.end(), int(pos) + N) -
                        rows.begin());
  };
  auto eig = tridiag_eigs(schrodinger_diag(cfg, cfg.phase.real(), N),
                          std::vector<double>(std::size_t(dim) - 1, 1.0), rows);

  MeasureApprox m;
  m.N = N;
  m.f = fs.front();
  m.atoms.reserve(eig.vals.size());
  for (std::size_t i = 0; i < eig.vals.size(); ++i) {
    double w = 0.0;
    for (const auto& f : fs) {
      Cplx amp(0.0);
      for (const auto& [pos, c] : f) {
        amp += std::conj(c) * eig.comp(row_of(pos), Eigen::Index(i));
      }
      w += std::norm(amp);
    }
    m.atoms.push_back({eig.vals[i], w});
    m.total_mass += w;
  }
  return m;
}

}  // namespace

MeasureApprox truncation_measure(const OperatorConfig& cfg,
                                 const std::map<std::int64_t, Cplx>& f, int N) {
  if (N < 1 || N > 5000) throw ConfigError("truncation_measure needs 1 <= N <= 5000");
  for (const auto& [pos, c] : f) {
    if (std::abs(pos) > N / 2) {
      throw SupportTooWide("vector support leaves [-N/2, N/2]");
    }
  }
  return assemble_measure(cfg, N, {f});
}

MeasureApprox mu_x(const OperatorConfig& cfg, int N) {
  if (N < 1 || N > 5000) throw ConfigError("mu_x needs 1 <= N <= 5000");
  return assemble_measure(cfg, N, {{{-1, Cplx(1.0)}}, {{0, Cplx(1.0)}}});
}

IntervalMass measure_interval(const MeasureApprox& m, double E, double eps) {
  if (eps <= 0.0) throw ConfigError("measure_interval needs eps > 0");
  IntervalMass out;
  out.below_floor = eps <= m.resolution_floor();
  auto lo = std::lower_bound(m.atoms.begin(), m.atoms.end(), E - eps,
                             [](const Atom& a, double v) { return a.E < v; });
  for (auto it = lo; it != m.atoms.end() && it->E < E + eps; ++it) out.value += it->w;
  return out;
}

double ids(const OperatorConfig& cfg, double E, int N, int phase_avg) {
  if (N < 1 || N > 5000) throw ConfigError("ids needs 1 <= N <= 5000");
  if (phase_avg < 1) throw ConfigError("ids needs phase_avg >= 1");
  const int dim = 2 * N + 1;
  const std::vector<double> off(std::size_t(dim) - 1, 1.0);
  double acc = 0.0;
  for (int j = 0; j < phase_avg; ++j) {
    double x = cfg.phase.real() + double(j) / phase_avg;
    acc += double(sturm_count(schrodinger_diag(cfg, x, N), off, E)) / dim;
  }
  return acc / phase_avg;
}

Cplx weyl_m_plus_free(Cplx z) {
  Cplx r = std::sqrt(z * z - 4.0);
  Cplx m1 = (-z + r) / 2.0;
  return m1.imag() > 0.0 ? m1 : (-z - r) / 2.0;
}

Cplx weyl_m_plus(const OperatorConfig& cfg, Cplx z, double tol) {
  if (z.imag() <= 0.0) throw BoundaryInput("Weyl function needs Im z > 0");
  const double x = cfg.phase.real();
  const double alpha = cfg.alpha();
  const Cplx seed = weyl_m_plus_free(z);
  Cplx prev(std::numeric_limits<double>::quiet_NaN(), 0.0);
  for (long depth = 64; depth <= 1'000'000; depth *= 2) {
    Cplx m = seed;
    for (long n = depth; n >= 1; --n) {
      double v = cfg.lambda * cfg.pot.eval(Cplx(x + n * alpha, 0.0)).real();
      m = 1.0 / ((v - z) - m);
    }
    if (std::abs(m - prev) < tol) return m;
    prev = m;
  }
  throw NoConvergence("Weyl recursion depth cap reached");
}

Cplx herglotz_M(const MeasureApprox& m, Cplx z) {
  if (z.imag() <= 0.0) throw BoundaryInput("M needs Im z > 0");
  Cplx acc(0.0);
  for (const auto& a : m.atoms) acc += a.w / (a.E - z);
  return acc;
}

double psi(Cplx z) {
  if (z.imag() <= 0.0) throw BoundaryInput("psi needs Im z > 0");
  const Cplx i(0.0, 1.0);
  double u = std::abs(z - i) / std::abs(z + i);
  return (1.0 + u) / (1.0 - u);
}

PkEpsTable pk_epsilon_pipeline(const OperatorConfig& cfg, double x, double E, int k_max) {
  OperatorConfig local = cfg;
  local.phase = Cplx(x, 0.0);
  auto seq = pk_sequence(local, x, E, k_max);

  PkEpsTable t;
  t.rows.reserve(seq.rows.size());
  for (const auto& r : seq.rows) {
    PkEpsRow row;
    row.k = r.k;
    row.eps = r.eps;
    row.psi_val = psi(weyl_m_plus(local, Cplx(E, r.eps), 1e-10));
    row.two_eps_norm = 2.0 * r.eps * std::exp(r.log_norm);
    row.ratio = row.psi_val / row.two_eps_norm;
    row.stat_67 = row.psi_val * std::sqrt(r.eps);
    t.rows.push_back(row);
  }
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    t.eps_step.push_back(t.rows[i].eps / t.rows[i - 1].eps);
  }
  return t;
}

HolderReport holder_scan(const OperatorConfig& cfg, const std::vector<double>& energies,
                         const std::vector<double>& eps_grid, int N, double x) {
  OperatorConfig local = cfg;
  local.phase = Cplx(x, 0.0);
  auto m = mu_x(local, N);

  HolderReport rep;
  rep.cells.reserve(energies.size() * eps_grid.size());
  for (double E : energies) {
    std::vector<double> log_eps, log_mu;
    for (double eps : eps_grid) {
      auto q = measure_interval(m, E, eps);
      double ratio = q.value / std::sqrt(eps);
      rep.cells.push_back({E, eps, q.value, ratio, q.below_floor});
      if (q.below_floor) continue;
      rep.sup_ratio = std::max(rep.sup_ratio, ratio);
      int decade = int(std::floor(std::log10(eps)));
      auto [it, fresh] = rep.decade_sup.try_emplace(decade, ratio);
      if (!fresh) it->second = std::max(it->second, ratio);
      if (q.value > 0.0) {
        log_eps.push_back(std::log(eps));
        log_mu.push_back(std::log(q.value));
      }
    }
    if (log_eps.size() >= 2) rep.exponents.emplace_back(E, linear_slope(log_eps, log_mu));
  }
  return rep;
}

namespace {

double hausdorff(const std::vector<double>& a, const std::vector<double>& b) {
  auto one_side = [](const std::vector<double>& from, const std::vector<double>& to) {
    double worst = 0.0;
    for (double v : from) {
      auto it = std::lower_bound(to.begin(), to.end(), v);
      double d = std::numeric_limits<double>::infinity();
      if (it != to.end()) d = std::min(d, *it - v);
      if (it != to.begin()) d = std::min(d, v - *std::prev(it));
      worst = std::max(worst, d);
    }
    return worst;
  };
  return std::max(one_side(a, b), one_side(b, a));
}

// eigenvalues of a truncation block with boundary-localized states filtered
// out: Dirichlet truncations sprout spurious eigenvalues inside spectral gaps
// whose eigenvectors live at the window edges. Requires a real tridiagonal
// block (schrodinger side always; dual side for single-harmonic potentials).
std::vector<double> bulk_eigenvalues(const MatrixBlock& b) {
  const Eigen::Index dim = b.m.rows();
  std::vector<double> d(static_cast<std::size_t>(dim));
  std::vector<double> e(static_cast<std::size_t>(dim) - 1);
  for (Eigen::Index i = 0; i < dim; ++i) {
    d[std::size_t(i)] = b.m(i, i).real();
    if (std::abs(b.m(i, i).imag()) > 1e-14) {
      throw ConfigError("duality comparison needs a real tridiagonal dual block");
    }
    for (Eigen::Index j = i + 2; j < dim; ++j) {
      if (std::abs(b.m(i, j)) > 1e-14) {
        throw ConfigError("duality comparison needs a real tridiagonal dual block");
      }
    }
  }
  for (Eigen::Index i = 0; i + 1 < dim; ++i) e[std::size_t(i)] = b.m(i, i + 1).real();

  const int margin = std::max<int>(8, int(dim) / 20);
  std::vector<int> rows;
  for (int i = 0; i < margin; ++i) {
    rows.push_back(i);
    rows.push_back(int(dim) - 1 - i);
  }
  std::sort(rows.begin(), rows.end());
  auto eig = tridiag_eigs(d, e, rows);
  std::vector<double> out;
  out.reserve(eig.vals.size());
  for (std::size_t i = 0; i < eig.vals.size(); ++i) {
    if (eig.comp.col(Eigen::Index(i)).squaredNorm() < 0.25) out.push_back(eig.vals[i]);
  }
  return out;
}

}  // namespace

DualityReport duality_gap(const OperatorConfig& cfg, int N) {
  if (N < 1 || N > 3000) throw ConfigError("duality_gap needs 1 <= N <= 3000");
  const Window W{-N, N};

  DualityReport rep;
  for (int j = 0; j < 4; ++j) {
    OperatorConfig local = cfg;
    local.phase = Cplx(std::fmod((j + 0.5) * 0.61803398874989485, 1.0), 0.0);
    auto sch = bulk_eigenvalues(truncate(local, W, BlockKind::Schrodinger));
    auto dual = bulk_eigenvalues(truncate(local, W, BlockKind::Dual));
    rep.spec_schrodinger.insert(rep.spec_schrodinger.end(), sch.begin(), sch.end());
    rep.spec_dual.insert(rep.spec_dual.end(), dual.begin(), dual.end());
  }
  std::sort(rep.spec_schrodinger.begin(), rep.spec_schrodinger.end());
  std::sort(rep.spec_dual.begin(), rep.spec_dual.end());
  rep.hausdorff = hausdorff(rep.spec_schrodinger, rep.spec_dual);
  return rep;
}

double thouless_residual(const OperatorConfig& cfg, double E, int N, int n_L) {
  if (N < 1 || N > 5000) throw ConfigError("thouless_residual needs 1 <= N <= 5000");
  // even dimension [-N, N-1]: odd Dirichlet truncations of the free operator
  // carry an exact zero mode, which would make E=0 always collide
  const int dim = 2 * N;
  std::vector<double> d;
  d.reserve(std::size_t(dim));
  for (int n = -N; n < N; ++n) {
    d.push_back(cfg.lambda * cfg.pot.eval(Cplx(cfg.phase.real() + n * cfg.alpha(), 0.0)).real());
  }
  auto vals = tridiag_eigenvalues(d, std::vector<double>(std::size_t(dim) - 1, 1.0));
  double rhs = 0.0;
  for (double Ei : vals) {
    if (std::abs(E - Ei) < 1e-6) throw AtomCollision("E collides with a truncation eigenvalue");
    rhs += std::log(std::abs(E - Ei));
  }
  rhs /= dim;

  auto c = Cocycle::schrodinger(cfg.pot, cfg.lambda, E, cfg.freq);
  double lhs = lyapunov_finite(c, n_L, 32).value;
  return std::abs(lhs - rhs);
}

}  // namespace qp
