#include "qplab/potential.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace qp {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

Potential::Potential(std::vector<Cplx> coeffs, double rho, double decay_C, double decay_sigma)
    : coeffs_(std::move(coeffs)), rho_(rho), decay_C_(decay_C), decay_sigma_(decay_sigma) {
  if (coeffs_.empty()) throw ConfigError("potential needs at least the k=0 mode");
  if (rho_ <= 0) throw ConfigError("potential needs analyticity width rho > 0");
  if (decay_C_ <= 0 || decay_sigma_ <= 0) throw ConfigError("decay certificate needs C, sigma > 0");
  if (std::abs(coeffs_[0].imag()) > 1e-15 * (1.0 + std::abs(coeffs_[0].real()))) {
    throw ConfigError("v_hat_0 must be real for a real potential");
  }
  coeffs_[0] = Cplx(coeffs_[0].real(), 0.0);
  for (int k = 0; k < static_cast<int>(coeffs_.size()); ++k) {
    if (std::abs(coeffs_[k]) > decay_C_ * std::exp(-2.0 * decay_sigma_ * k) * (1 + 1e-12)) {
      throw ConfigError("decay certificate violated at mode " + std::to_string(k));
    }
  }
}

Potential Potential::amo(double rho) {
  // |v_hat_1| = 1 = C e^{-2 sigma}: certify with sigma = rho, C = e^{2 rho}
  return Potential({Cplx(0.0), Cplx(1.0)}, rho, std::exp(2.0 * rho), rho);
}

Potential Potential::single_mode(int k, Cplx c, double rho) {
  if (k < 1) throw ConfigError("single_mode needs k >= 1");
  std::vector<Cplx> v(static_cast<std::size_t>(k) + 1, Cplx(0.0));
  v[k] = c;
  double sigma = rho;
  double C = std::abs(c) * std::exp(2.0 * sigma * k) * (1 + 1e-12);
  return Potential(std::move(v), rho, C, sigma);
}

Cplx Potential::coeff(int k) const {
  int a = std::abs(k);
  if (a > K()) return Cplx(0.0);
  return (k >= 0) ? coeffs_[a] : std::conj(coeffs_[a]);
}

Cplx Potential::eval(Cplx x) const {
  if (std::abs(x.imag()) >= rho_) {
    throw StripExceeded("evaluation point leaves the analyticity strip");
  }
  Cplx s = coeffs_[0];
  const Cplx i2pi(0.0, kTwoPi);
  for (int k = 1; k <= K(); ++k) {
    s += coeffs_[k] * std::exp(i2pi * (double(k) * x)) +
         std::conj(coeffs_[k]) * std::exp(-i2pi * (double(k) * x));
  }
  return s;
}

double Potential::tail_weight(int k) const {
  int a = std::abs(k);
  double s = 0.0;
  for (int j = std::max(a, 1); j <= K(); ++j) s += j * std::abs(coeffs_[j]);
  if (k == 0) s *= 2;  // jk >= 0 is vacuous at k = 0
  return s;
}

double Potential::truncation_error() const {
  double e = std::exp(-2.0 * decay_sigma_);
  return decay_C_ * std::pow(e, K() + 1) / (1.0 - e);
}

}  // namespace qp
