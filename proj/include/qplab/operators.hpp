#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qplab/diophantine.hpp"
#include "qplab/potential.hpp"

namespace qp {

struct Window {
  std::int64_t x1 = 0;
  std::int64_t x2 = 0;  // inclusive
  std::int64_t size() const { return x2 - x1 + 1; }
};

// lambda v(x + n alpha) u_n + u_{n+1} + u_{n-1} and its Aubry dual
// 2 cos(2 pi (theta + n alpha)) u_n + lambda sum_k v_hat_k u_{n-k}.
struct OperatorConfig {
  double lambda = 1.0;
  std::shared_ptr<const CFExpansion> freq;
  Cplx phase;  // x for the Schrodinger side, theta for the dual
  Potential pot = Potential::amo();

  double alpha() const { return freq->alpha_d; }
};

enum class BlockKind { Schrodinger, Dual, DualScaled };

struct MatrixBlock {
  Eigen::MatrixXcd m;
  BlockKind kind = BlockKind::Schrodinger;
  Window win;
  double lambda = 0.0;
};

MatrixBlock truncate(const OperatorConfig& cfg, Window w, BlockKind kind);

struct GreenEntry {
  Cplx value;
  double rcond = 0.0;
};

// Entry (x,y) of (block - E)^{-1}; x,y are lattice coordinates in the window.
GreenEntry green(const MatrixBlock& b, Cplx E, std::int64_t x, std::int64_t y);

// Full row x of the Green function, indexed by window offset.
Eigen::VectorXcd green_row(const MatrixBlock& b, Cplx E, std::int64_t x, double* rcond = nullptr);

struct RegularityReport {
  bool regular = false;
  Window witness;
  double defect = 0.0;    // max_i sum_{y in I} |G_I(x,y)| a_{y - x_i} at the witness
  double threshold = 0.0; // e^{-mN}
  int skipped = 0;        // candidate windows with singular blocks
  int excluded = 0;       // candidate windows touching the data boundary
};

// (m,N)-regularity of x: scan windows [x1, x2] with x2 = x1 + N + 1 inside
// `data`, x strictly interior; the Green function lives on I = [x1+1, x2-1]
// and the tail weights are anchored at the outer endpoints.
RegularityReport classify_regular(const OperatorConfig& cfg, Window data, std::int64_t x,
                                  double m, int N, double E);

struct LogDet {
  double log_abs = 0.0;
  Cplx phase;  // unit modulus
};

// det((H_check - E)|[0, N-1]) at dual phase theta, overflow-safe.
LogDet det_PN(const OperatorConfig& cfg, double theta, double E, int N);

// Membership of theta in A_{N,r}: log|Q_N(cos 2 pi theta)| <= (N+1) r, where
// Q_N is evaluated through det_PN at the shifted phase theta - (N-1) alpha / 2.
bool membership_A(const OperatorConfig& cfg, int N, double r, double theta, double E);

// Smallest xi certifying the xi-uniformity of the list: (1/k) ln of the
// Lagrange-factor sup over [-1,1], grid of M points plus local refinement.
double uniformity_xi(const std::vector<double>& thetas, int M);

// The two resonance-splitting windows; |I1| + |I2| = 6 s q_n always.
std::pair<Window, Window> resonant_intervals(std::int64_t k, std::int64_t n_j, std::int64_t q_n,
                                             int s);

struct GapRegion {
  std::int64_t lo = 0;  // 3 |n_j|
  std::int64_t hi = 0;  // |n_{j+1}| / 3 (integer floor); empty when hi <= lo + 1
};

struct EigvecProfile {
  double eigenvalue = 0.0;
  std::int64_t center = 0;          // max-entry site (normalization anchor)
  std::vector<double> rates;        // fitted decay rate per gap region
  double fitted_rate = 0.0;         // rate over the union of regions
  double log_Cbar = 0.0;            // envelope constant from the fit
  int violations = 0;               // sites with |u_k| > Cbar e^{-eps1 |k|}
  bool first_gap_empty = false;
};

struct LocalizationReport {
  std::vector<std::int64_t> resonance_indices;
  std::vector<GapRegion> regions;
  std::vector<EigvecProfile> vecs;
  double median_rate = 0.0;
  double violation_fraction = 0.0;  // violating sites / inspected sites
};

// Dense eigensolve of the dual truncation on [-N_trunc, N_trunc] and
// per-eigenvector exponential-decay fits on the resonance gap regions.
LocalizationReport localization_profile(const OperatorConfig& cfg, double theta, int N_trunc,
                                        double eps0, double eps1);

}  // namespace qp
