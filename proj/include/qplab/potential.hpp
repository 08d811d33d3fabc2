#pragma once

#include <complex>
#include <vector>

#include "qplab/errors.hpp"

namespace qp {

using Cplx = std::complex<double>;

// A real-analytic 1-periodic potential held as a finite symmetric Fourier
// table {v_hat_k : |k| <= K}. Only k >= 0 is stored; negative modes follow
// from the reality symmetry v_hat_{-k} = conj(v_hat_k).
class Potential {
 public:
  // coeffs[k] = v_hat_k for k = 0..K. The decay certificate (C, sigma)
  // asserting |v_hat_k| <= C e^{-2 sigma |k|} is verified at construction.
  Potential(std::vector<Cplx> coeffs, double rho, double decay_C, double decay_sigma);

  static Potential amo(double rho = 1.0);  // v(x) = 2 cos(2 pi x)
  // v_hat_{+-k} = c (k >= 1), all other modes zero.
  static Potential single_mode(int k, Cplx c, double rho = 1.0);

  int K() const { return static_cast<int>(coeffs_.size()) - 1; }
  Cplx coeff(int k) const;  // v_hat_k, zero outside the table
  double rho() const { return rho_; }
  double decay_C() const { return decay_C_; }
  double decay_sigma() const { return decay_sigma_; }

  // Sum over the table at complex x; throws StripExceeded for |Im x| >= rho.
  Cplx eval(Cplx x) const;

  // a_k = sum_{|j| >= |k|, jk >= 0} |j v_hat_j|. At k = 0 the sign constraint
  // is vacuous, so a_0 is the full two-sided sum.
  double tail_weight(int k) const;

  // Bound on the tail dropped by the table: C e^{-2 sigma (K+1)} / (1 - e^{-2 sigma}).
  double truncation_error() const;

 private:
  std::vector<Cplx> coeffs_;  // k = 0..K
  double rho_;
  double decay_C_;
  double decay_sigma_;
};

}  // namespace qp
