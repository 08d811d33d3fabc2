#pragma once

#include <cstdint>
#include <map>
#include <numbers>
#include <vector>

#include "qplab/cocycle.hpp"
#include "qplab/operators.hpp"

namespace qp {

struct Atom {
  double E;
  double w;
};

// Spectral measure of a Dirichlet truncation on [-N, N] with respect to a
// finitely supported vector f: atoms (E_i, |<f, phi_i>|^2).
struct MeasureApprox {
  int N = 0;
  std::map<std::int64_t, Cplx> f;
  std::vector<Atom> atoms;  // sorted by E
  double total_mass = 0.0;

  // below this scale the truncation atoms under-resolve intervals
  double resolution_floor() const { return 4.0 * std::numbers::pi / N; }
};

MeasureApprox truncation_measure(const OperatorConfig& cfg,
                                 const std::map<std::int64_t, Cplx>& f, int N);

// mu_x = mu^{e_{-1}} + mu^{e_0}, from a single eigensolve
MeasureApprox mu_x(const OperatorConfig& cfg, int N);

struct IntervalMass {
  double value = 0.0;
  bool below_floor = false;
};

// mass of [E - eps, E + eps)
IntervalMass measure_interval(const MeasureApprox& m, double E, double eps);

// integrated density of states by eigenvalue counting, averaged over
// phase_avg equidistributed phases
double ids(const OperatorConfig& cfg, double E, int N, int phase_avg);

// Weyl function m+ = -u1/u0 of the decaying half-line solution, by downward
// resolvent recursion with depth doubling until successive values differ < tol
Cplx weyl_m_plus(const OperatorConfig& cfg, Cplx z, double tol);

// free closed form: Herglotz root of m^2 + z m + 1 = 0
Cplx weyl_m_plus_free(Cplx z);

// M(z) = sum w_i / (E_i - z) over the atoms
Cplx herglotz_M(const MeasureApprox& m, Cplx z);

// sup over the rotation group's Moebius orbit of |z|: (1+u)/(1-u), u = |z-i|/|z+i|
double psi(Cplx z);

struct PkEpsRow {
  std::int64_t k;
  double eps;           // eps_k = (4 det P_(k))^{-1/2}
  double psi_val;       // psi(m+(E + i eps_k))
  double two_eps_norm;  // 2 eps_k ||P_(k)||
  double ratio;         // psi / (2 eps ||P||)
  double stat_67;       // psi * sqrt(eps_k)
};

struct PkEpsTable {
  std::vector<PkEpsRow> rows;
  std::vector<double> eps_step;  // eps_{k+1} / eps_k
};

PkEpsTable pk_epsilon_pipeline(const OperatorConfig& cfg, double x, double E, int k_max);

struct HolderCell {
  double E;
  double eps;
  double mu;
  double ratio;  // mu / sqrt(eps)
  bool below_floor;
};

struct HolderReport {
  std::vector<HolderCell> cells;
  double sup_ratio = 0.0;                 // over cells above the resolution floor
  std::map<int, double> decade_sup;       // floor(log10 eps) -> sup ratio
  std::vector<std::pair<double, double>> exponents;  // (E, fitted log-log slope)
};

HolderReport holder_scan(const OperatorConfig& cfg, const std::vector<double>& energies,
                         const std::vector<double>& eps_grid, int N, double x);

struct DualityReport {
  double hausdorff = 0.0;
  std::vector<double> spec_schrodinger;  // union over the phase sample, sorted
  std::vector<double> spec_dual;
};

// compares Dirichlet-truncation spectra of H and of its long-range dual;
// both approximate the same set
DualityReport duality_gap(const OperatorConfig& cfg, int N);

// | L_{n_L}(E) - (1/dim) sum ln|E - E_i| |
double thouless_residual(const OperatorConfig& cfg, double E, int N, int n_L);

}  // namespace qp
