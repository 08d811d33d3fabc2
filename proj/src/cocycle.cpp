#include "qplab/cocycle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// eigenvalues of a Hermitian positive 2x2 matrix
struct Eig2 {
  double lo = 0.0, hi = 0.0;
};

Eig2 herm2_eigs(const Eigen::Matrix2cd& p) {
  double tr = p(0, 0).real() + p(1, 1).real();
  double det = (p(0, 0) * p(1, 1) - p(0, 1) * p(1, 0)).real();
  double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
  return {(tr - disc) / 2.0, (tr + disc) / 2.0};
}

}  // namespace

void Mat2C::renormalize() {
  double a = m.cwiseAbs().maxCoeff();
  if (a > 0.0 && std::isfinite(a)) {
    m /= a;
    s += std::log(a);
  }
}

double Mat2C::log_spectral_norm() const {
  double f = m.squaredNorm();
  double d = std::abs(m.determinant());
  double smax2 = (f + std::sqrt(std::max(0.0, f * f - 4.0 * d * d))) / 2.0;
  return s + 0.5 * std::log(smax2);
}

double Mat2C::log_abs_det() const { return ld; }

Mat2C operator*(const Mat2C& a, const Mat2C& b) {
  Mat2C r;
  r.m = a.m * b.m;
  r.s = a.s + b.s;
  r.ld = a.ld + b.ld;
  r.renormalize();
  return r;
}

Cocycle Cocycle::schrodinger(Potential v, double lambda, double E,
                             std::shared_ptr<const CFExpansion> freq) {
  Cocycle c;
  c.strip_ = v.rho();
  c.gen_ = [v = std::move(v), lambda, E](Cplx x) {
    Eigen::Matrix2cd a;
    a << E - lambda * v.eval(x), -1.0, 1.0, 0.0;
    return a;
  };
  c.freq_ = std::move(freq);
  c.schrodinger_ = true;
  c.energy_ = E;
  return c;
}

Cocycle Cocycle::model_T(double theta, int r, Cplx t_r,
                         std::shared_ptr<const CFExpansion> freq) {
  Cocycle c;
  c.strip_ = std::numeric_limits<double>::infinity();
  const Cplx i2pi(0.0, kTwoPi);
  c.gen_ = [theta, r, t_r, i2pi](Cplx x) {
    Eigen::Matrix2cd a;
    a << std::exp(i2pi * theta), t_r * std::exp(i2pi * (double(r) * x)), 0.0,
        std::exp(-i2pi * theta);
    return a;
  };
  c.freq_ = std::move(freq);
  return c;
}

Cocycle Cocycle::from_function(Generator g, std::shared_ptr<const CFExpansion> freq,
                               double strip) {
  Cocycle c;
  c.gen_ = std::move(g);
  c.freq_ = std::move(freq);
  c.strip_ = strip;
  return c;
}

Eigen::Matrix2cd Cocycle::eval(Cplx x) const {
  if (std::abs(x.imag()) >= strip_) {
    throw StripExceeded("cocycle phase leaves the generator strip");
  }
  return gen_(x);
}

TransferProduct transfer(const Cocycle& c, Cplx x, int n) {
  if (n < 0) throw ConfigError("transfer needs n >= 0");
  TransferProduct t;
  t.n = n;
  t.x = x;
  const double alpha = c.alpha();
  for (int i = 0; i < n; ++i) {
    Mat2C step(c.eval(x + double(i) * alpha));
    t.result = step * t.result;
  }
  return t;
}

LyapunovEstimate lyapunov_finite(const Cocycle& c, int n, int grid) {
  if (n < 1 || grid < 1) throw ConfigError("lyapunov needs n >= 1, grid >= 1");
  LyapunovEstimate est;
  est.n = n;
  est.grid = grid;
  const double alpha = c.alpha();
  double sum = 0.0, sumsq = 0.0, sum2n = 0.0;
  for (int g = 0; g < grid; ++g) {
    double x = double(g) / grid;
    Mat2C prod = Mat2C::identity();
    double at_n = 0.0;
    for (int i = 0; i < 2 * n; ++i) {
      Mat2C step(c.eval(Cplx(x + i * alpha, 0.0)));
      prod = step * prod;
      if (i + 1 == n) at_n = prod.log_spectral_norm();
    }
    double ln = at_n / n;
    sum += ln;
    sumsq += ln * ln;
    sum2n += prod.log_spectral_norm() / (2.0 * n);
  }
  est.value = sum / grid;
  est.value_2n = sum2n / grid;
  double var = std::max(0.0, sumsq / grid - est.value * est.value);
  est.std_error = std::sqrt(var / grid);
  est.subadditive_ok = est.value_2n <= est.value + 3.0 * est.std_error + 1e-12;
  return est;
}

StripGrowthScan strip_growth_scan(const Cocycle& c, double eta, const std::vector<int>& ns,
                                  int strip_grid, int phase_grid) {
  if (ns.empty() || strip_grid < 1 || phase_grid < 1) {
    throw ConfigError("strip growth scan needs targets and grids");
  }
  if (eta >= c.strip()) throw StripExceeded("eta is outside the generator strip");
  std::vector<int> targets = ns;
  std::sort(targets.begin(), targets.end());
  const int n_max = targets.back();
  const double alpha = c.alpha();

  StripGrowthScan scan;
  for (int e = 0; e < strip_grid; ++e) {
    double eps = eta * double(e) / strip_grid;
    std::vector<double> best(targets.size(), -std::numeric_limits<double>::infinity());
    for (int g = 0; g < phase_grid; ++g) {
      double x = double(g) / phase_grid;
      Mat2C prod = Mat2C::identity();
      std::size_t ti = 0;
      for (int i = 0; i < n_max && ti < targets.size(); ++i) {
        Mat2C step(c.eval(Cplx(x + i * alpha, eps)));
        prod = step * prod;
        if (i + 1 == targets[ti]) {
          best[ti] = std::max(best[ti], prod.log_spectral_norm() / targets[ti]);
          ++ti;
        }
      }
    }
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
      scan.rows.push_back({eps, targets[ti], best[ti]});
    }
  }
  double head = -std::numeric_limits<double>::infinity();
  for (const auto& r : scan.rows) {
    if (r.n == n_max) head = std::max(head, r.rate);
  }
  scan.headline = head;
  return scan;
}

Cocycle conjugate(const Cocycle& c, const Cocycle::Generator& B) {
  double alpha = c.alpha();
  auto gen = [c, B, alpha](Cplx x) {
    Eigen::Matrix2cd bn = B(x + alpha);
    double scale = std::max(1.0, bn.squaredNorm());
    if (std::abs(bn.determinant()) < 1e-14 * scale) {
      throw SingularConjugacy("conjugacy loses invertibility on the strip");
    }
    return (bn.inverse() * c.eval(x) * B(x)).eval();
  };
  return Cocycle::from_function(gen, c.freq(), c.strip());
}

DivisorSolve divisor_solve(const std::map<std::int64_t, Cplx>& b_hat, double theta,
                           const CFExpansion& alpha, const std::set<std::int64_t>& excluded,
                           std::int64_t K, double floor) {
  if (K < 0) throw ConfigError("divisor solve needs K >= 0");
  if (BigInt(K) >= alpha.q.back()) throw DepthInsufficient("K must be below q_depth");
  PrecisionGuard guard(alpha.precision_bits + 64);
  Real a = alpha.alpha_real();
  DivisorSolve out;
  out.min_divisor = std::numeric_limits<double>::infinity();
  const Cplx i2pi(0.0, kTwoPi);
  for (std::int64_t k = -K; k <= K; ++k) {
    if (excluded.count(k)) continue;
    Real arg = Real(2.0 * theta) - Real(k) * a;
    double dist = static_cast<double>(dist_to_Z(arg));
    if (dist < floor) {
      throw DivisorBelowFloor("non-excluded mode " + std::to_string(k) +
                              " has divisor below the floor");
    }
    out.min_divisor = std::min(out.min_divisor, dist);
    auto it = b_hat.find(k);
    if (it == b_hat.end() || it->second == Cplx(0.0)) continue;
    double y = static_cast<double>(frac(arg));
    Cplx divisor = 1.0 - std::exp(-i2pi * y);
    Cplx w = -it->second * std::exp(-i2pi * theta) / divisor;
    out.w_hat[k] = w;
    out.w_l1 += std::abs(w);
  }
  return out;
}

BlochLift::BlochLift(const OperatorConfig& cfg, double theta, double E,
                     const std::vector<Cplx>& u_hat, Window data, Window I)
    : cfg_(cfg), theta_(theta), E_(E), u_hat_(u_hat), data_(data), I_(I) {
  if (static_cast<std::int64_t>(u_hat_.size()) != data_.size()) {
    throw ConfigError("coefficient count does not match the data window");
  }
  if (I_.x1 < data_.x1 || I_.x2 > data_.x2) {
    throw ConfigError("truncation window must sit inside the data window");
  }
  const Potential& v = cfg_.pot;
  const double lambda = cfg_.lambda;
  const double alpha = cfg_.alpha();
  const int Kv = v.K();

  auto uh = [&](std::int64_t k) -> Cplx {
    if (k < data_.x1 || k > data_.x2) return Cplx(0.0);
    return u_hat_[k - data_.x1];
  };
  auto in_I = [&](std::int64_t k) { return k >= I_.x1 && k <= I_.x2; };
  auto diag = [&](std::int64_t k) {
    return E_ - 2.0 * std::cos(kTwoPi * (theta_ + double(k) * alpha));
  };

  for (std::int64_t k = I_.x1 - Kv; k <= I_.x2 + Kv; ++k) {
    Cplx conv_in(0.0), conv_out(0.0);
    for (int j = -Kv; j <= Kv; ++j) {
      Cplx term = v.coeff(j) * uh(k - j);
      (in_I(k - j) ? conv_in : conv_out) += term;
    }
    Cplx direct = (in_I(k) ? diag(k) * uh(k) : Cplx(0.0)) - lambda * conv_in;
    Cplx eigen = -((in_I(k) ? Cplx(0.0) : diag(k) * uh(k)) - lambda * conv_out);
    if (direct != Cplx(0.0)) g44_[k] = direct;
    if (eigen != Cplx(0.0)) g45_[k] = eigen;
  }
}

Cplx BlochLift::u(Cplx x) const {
  const Cplx i2pi(0.0, kTwoPi);
  Cplx s(0.0);
  for (std::int64_t k = I_.x1; k <= I_.x2; ++k) {
    s += u_hat_[k - data_.x1] * std::exp(i2pi * (double(k) * x));
  }
  return s;
}

Eigen::Vector2cd BlochLift::U(Cplx x) const {
  const Cplx i2pi(0.0, kTwoPi);
  Eigen::Vector2cd out;
  out << std::exp(i2pi * theta_) * u(x), u(x - cfg_.alpha());
  return out;
}

Cplx BlochLift::g(Cplx x) const {
  const Cplx i2pi(0.0, kTwoPi);
  Cplx s(0.0);
  for (const auto& [k, gk] : g44_) s += gk * std::exp(i2pi * (double(k) * x));
  return s;
}

double BlochLift::g_sup(double eta, int grid) const {
  if (grid < 1) throw ConfigError("strip grid needs at least one point");
  double sup = 0.0;
  for (int i = 0; i < grid; ++i) {
    double x = double(i) / grid;
    sup = std::max({sup, std::abs(g(Cplx(x, eta))), std::abs(g(Cplx(x, -eta)))});
  }
  return sup;
}

PkSequence pk_sequence(const OperatorConfig& cfg, double x, double E, int k_max) {
  if (k_max < 1) throw ConfigError("pk sequence needs k_max >= 1");
  auto A = Cocycle::schrodinger(cfg.pot, cfg.lambda, E, cfg.freq);
  const double alpha = A.alpha();
  const double y = x + alpha;

  PkSequence seq;
  seq.x = x;
  seq.E = E;

  Mat2C M(A.eval(Cplx(y, 0.0)));  // A_1(y)
  Eigen::Matrix2cd P = Eigen::Matrix2cd::Zero();
  double sigma = 0.0;  // represented P = e^{2 sigma} * P
  double prev_log_norm = -std::numeric_limits<double>::infinity();
  double prev_log_det = -std::numeric_limits<double>::infinity();
  double prev_ratio = -std::numeric_limits<double>::infinity();

  for (int k = 1; k <= k_max; ++k) {
    double rel = M.s - sigma;
    if (rel > 100.0) {  // escalate the accumulation scale
      P *= std::exp(2.0 * (sigma - M.s));
      sigma = M.s;
      rel = 0.0;
      seq.rescaled = true;
    }
    P += std::exp(2.0 * rel) * (M.m.adjoint() * M.m);
    P = ((P + P.adjoint()) / 2.0).eval();

    auto e = herm2_eigs(P);
    if (!(e.lo > 0.0)) throw Degenerate("P_(k) lost positive definiteness");
    PkRow row;
    row.k = k;
    row.log_norm = 2.0 * sigma + std::log(e.hi);
    row.log_norm_inv = -(2.0 * sigma + std::log(e.lo));
    row.log_det = 4.0 * sigma + std::log(e.lo) + std::log(e.hi);
    row.eps = std::exp(-0.5 * (row.log_det + std::log(4.0)));
    seq.rows.push_back(row);

    double tol = 1e-10;
    if (row.log_norm < prev_log_norm - tol || row.log_det < prev_log_det - tol ||
        row.log_det - row.log_norm < prev_ratio - tol) {
      seq.monotone_ok = false;
    }
    prev_log_norm = row.log_norm;
    prev_log_det = row.log_det;
    prev_ratio = row.log_det - row.log_norm;
    double tr = P(0, 0).real() + P(1, 1).real();
    if (2.0 * sigma + std::log(tr) < std::log(2.0 * k) - tol) seq.trace_ok = false;

    if (k < k_max) {  // A_{2k-1} -> A_{2k+1}
      Mat2C s1(A.eval(Cplx(y + (2 * k - 1) * alpha, 0.0)));
      Mat2C s2(A.eval(Cplx(y + (2 * k) * alpha, 0.0)));
      M = s2 * (s1 * M);
    }
  }
  return seq;
}

ModelX model_X(double theta, int r, Cplx t_r, const CFExpansion& alpha, int k) {
  if (k < 1) throw ConfigError("model X needs k >= 1");
  auto T = Cocycle::model_T(theta, r, t_r, std::make_shared<CFExpansion>(alpha));
  const double a = alpha.alpha_d;

  Eigen::Matrix2cd M = T.eval(Cplx(0.0));  // T_1(0)
  Eigen::Matrix2cd X = Eigen::Matrix2cd::Zero();
  for (int j = 1; j <= k; ++j) {
    X += M.adjoint() * M;
    if (j < k) {
      M = (T.eval(Cplx((2.0 * j) * a, 0.0)) * (T.eval(Cplx((2.0 * j - 1) * a, 0.0)) * M)).eval();
    }
  }
  X = ((X + X.adjoint()) / 2.0).eval();

  auto e = herm2_eigs(X);
  ModelX out;
  out.norm = e.hi;
  out.inv_norm_inv = e.lo;
  out.shape_611 = e.lo / double(k);
  PrecisionGuard guard(alpha.precision_bits + 64);
  double d = static_cast<double>(dist_to_Z(Real(2.0 * theta) - Real(r) * alpha.alpha_real()));
  double t2 = std::norm(t_r);
  double kk = double(k) * double(k);
  out.shape_610_dist = e.hi / (k * (1.0 + t2 * std::min(kk, d)));
  double dinv2 = (d > 0) ? 1.0 / (d * d) : std::numeric_limits<double>::infinity();
  out.shape_610_inv2 = e.hi / (k * (1.0 + t2 * std::min(kk, dinv2)));
  return out;
}

}  // namespace qp
