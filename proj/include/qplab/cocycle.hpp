#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "qplab/operators.hpp"

namespace qp {

// 2x2 complex matrix in log-scaled form: the represented matrix is e^s * m.
struct Mat2C {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
  double s = 0.0;
  double ld = 0.0;  // ln |det| of the represented matrix, tracked additively

  Mat2C() = default;
  explicit Mat2C(const Eigen::Matrix2cd& mm)
      : m(mm), ld(std::log(std::abs(mm.determinant()))) {}

  static Mat2C identity() { return {}; }

  // pulls the max entry magnitude into s; keeps entries O(1)
  void renormalize();
  double log_spectral_norm() const;  // ln of the represented spectral norm
  double log_abs_det() const;        // ln |det| of the represented matrix
  Eigen::Matrix2cd dense() const { return std::exp(s) * m; }
};

Mat2C operator*(const Mat2C& a, const Mat2C& b);

// An SL(2,C) cocycle over x -> x + alpha.
class Cocycle {
 public:
  using Generator = std::function<Eigen::Matrix2cd(Cplx)>;

  // S_{lambda v, E}(x) = [[E - lambda v(x), -1], [1, 0]]
  static Cocycle schrodinger(Potential v, double lambda, double E,
                             std::shared_ptr<const CFExpansion> freq);
  // T(x) = [[e^{2 pi i theta}, t_r e^{2 pi i r x}], [0, e^{-2 pi i theta}]]
  static Cocycle model_T(double theta, int r, Cplx t_r, std::shared_ptr<const CFExpansion> freq);
  static Cocycle from_function(Generator g, std::shared_ptr<const CFExpansion> freq,
                               double strip);

  Eigen::Matrix2cd eval(Cplx x) const;
  double alpha() const { return freq_->alpha_d; }
  double strip() const { return strip_; }
  const std::shared_ptr<const CFExpansion>& freq() const { return freq_; }
  bool is_schrodinger() const { return schrodinger_; }
  double energy() const { return energy_; }

 private:
  Generator gen_;
  std::shared_ptr<const CFExpansion> freq_;
  double strip_ = 0.0;
  bool schrodinger_ = false;
  double energy_ = 0.0;
};

struct TransferProduct {
  int n = 0;
  Cplx x;
  Mat2C result;
};

// A_n(x) = A(x + (n-1) alpha) ... A(x), renormalized every step.
TransferProduct transfer(const Cocycle& c, Cplx x, int n);

struct LyapunovEstimate {
  double value = 0.0;      // (1/n) mean over the grid of ln ||A_n||
  double std_error = 0.0;  // of the grid mean
  double value_2n = 0.0;   // same at doubled length, for the subadditivity check
  bool subadditive_ok = false;
  int n = 0;
  int grid = 0;
};

LyapunovEstimate lyapunov_finite(const Cocycle& c, int n, int grid);

struct StripGrowthRow {
  double eps = 0.0;
  int n = 0;
  double rate = 0.0;  // (1/n) sup over phases of ln ||A_n(x + i eps)||
};

struct StripGrowthScan {
  std::vector<StripGrowthRow> rows;
  double headline = 0.0;  // rate at the largest n, worst eps
};

StripGrowthScan strip_growth_scan(const Cocycle& c, double eta, const std::vector<int>& ns,
                                  int strip_grid, int phase_grid = 32);

// x -> B(x + alpha)^{-1} A(x) B(x), evaluation-based.
Cocycle conjugate(const Cocycle& c, const Cocycle::Generator& B);

struct DivisorSolve {
  std::map<std::int64_t, Cplx> w_hat;
  double min_divisor = 0.0;  // smallest ||2 theta - k alpha|| actually divided by
  double w_l1 = 0.0;         // sum |w_hat_k|, a bound on ||w||_0
};

// w_hat_k = -b_hat_k e^{-2 pi i theta} / (1 - e^{-2 pi i (2 theta - k alpha)})
// for |k| <= K, k not excluded; refuses non-excluded divisors below `floor`.
DivisorSolve divisor_solve(const std::map<std::int64_t, Cplx>& b_hat, double theta,
                           const CFExpansion& alpha, const std::set<std::int64_t>& excluded,
                           std::int64_t K, double floor);

// Bloch lift of a finitely supported dual vector: u(x) = sum_{k in I} u_hat_k e^{2 pi i k x},
// U = (e^{2 pi i theta} u(x), u(x - alpha)); the defect g solves
// S U(x) = e^{2 pi i theta} (U(x + alpha) + (g(x), 0)).
class BlochLift {
 public:
  // u_hat lives on `data`; the lift truncates it to `I` (pass I = data for the
  // whole vector). Both defect formulas need u_hat outside I, hence the split.
  BlochLift(const OperatorConfig& cfg, double theta, double E,
            const std::vector<Cplx>& u_hat, Window data, Window I);

  Cplx u(Cplx x) const;
  Eigen::Vector2cd U(Cplx x) const;
  Cplx g(Cplx x) const;  // from the inside-I coefficients

  // defect coefficients, by the direct expansion and by the eigen-equation route
  const std::map<std::int64_t, Cplx>& g_hat_direct() const { return g44_; }
  const std::map<std::int64_t, Cplx>& g_hat_eigen() const { return g45_; }

  double g_sup(double eta, int grid) const;  // sup |g| over a strip boundary grid

 private:
  OperatorConfig cfg_;
  double theta_, E_;
  std::vector<Cplx> u_hat_;
  Window data_, I_;
  std::map<std::int64_t, Cplx> g44_, g45_;
};

struct PkRow {
  int k = 0;
  double log_norm = 0.0;      // ln ||P_(k)||
  double log_norm_inv = 0.0;  // ln ||P_(k)^{-1}||
  double log_det = 0.0;
  double eps = 0.0;  // sqrt(1 / (4 det P_(k)))
};

struct PkSequence {
  double x = 0.0;
  double E = 0.0;
  std::vector<PkRow> rows;
  bool monotone_ok = true;  // ||P||, det, det/||P|| nondecreasing; eps decreasing
  bool trace_ok = true;     // tr P_(k) >= 2k
  bool rescaled = false;    // log-scaled accumulation kicked in
};

// P_(k) = sum_{j=1..k} A*_{2j-1}(x + alpha) A_{2j-1}(x + alpha)
PkSequence pk_sequence(const OperatorConfig& cfg, double x, double E, int k_max);

struct ModelX {
  double norm = 0.0;           // ||X||
  double inv_norm_inv = 0.0;   // ||X^{-1}||^{-1} = smallest eigenvalue
  double shape_611 = 0.0;      // inv_norm_inv / k
  double shape_610_dist = 0.0; // norm / (k (1 + |t|^2 min(k^2, d)))
  double shape_610_inv2 = 0.0; // norm / (k (1 + |t|^2 min(k^2, d^{-2})))
};

// X(0) = sum_{j=1..k} T*_{2j-1}(0) T_{2j-1}(0) for the single-mode triangular T.
ModelX model_X(double theta, int r, Cplx t_r, const CFExpansion& alpha, int k);

}  // namespace qp
