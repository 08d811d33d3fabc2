#include "qplab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace qp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_window(const OperatorConfig& cfg, Window w) {
  if (w.x1 > w.x2) throw ConfigError("window needs x1 <= x2");
  if (!cfg.freq) throw ConfigError("operator config has no frequency");
  BigInt reach = std::max(std::abs(w.x1), std::abs(w.x2));
  if (reach >= cfg.freq->q.back()) {
    throw DepthInsufficient("frequency depth too small for the requested window");
  }
}

Eigen::PartialPivLU<Eigen::MatrixXcd> factor_shifted(const Eigen::MatrixXcd& m, Cplx E,
                                                     double* rcond_out) {
  Eigen::MatrixXcd A = m;
  A.diagonal().array() -= E;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  double rc = lu.rcond();
  if (rcond_out) *rcond_out = rc;
  if (!(rc > 1e-14)) throw SingularBlock("shifted block numerically singular");
  return lu;
}

// least-squares fit of log|u| ~ c - rate * t; returns {rate, c, rmse}
struct LineFit {
  double rate = 0.0;
  double intercept = 0.0;
  double rmse = 0.0;
  int count = 0;
};

LineFit fit_decay(const std::vector<double>& t, const std::vector<double>& logu) {
  LineFit f;
  f.count = static_cast<int>(t.size());
  if (f.count < 2) return f;
  double n = f.count, st = 0, sl = 0, stt = 0, stl = 0;
  for (int i = 0; i < f.count; ++i) {
    st += t[i];
    sl += logu[i];
    stt += t[i] * t[i];
    stl += t[i] * logu[i];
  }
  double det = n * stt - st * st;
  if (det == 0) return f;
  double slope = (n * stl - st * sl) / det;
  f.intercept = (sl - slope * st) / n;
  f.rate = -slope;
  double ss = 0;
  for (int i = 0; i < f.count; ++i) {
    double r = logu[i] - (f.intercept + slope * t[i]);
    ss += r * r;
  }
  f.rmse = std::sqrt(ss / n);
  return f;
}

double safe_log(double v) {
  return (v > 0) ? std::log(v) : -745.0;  // below double exp underflow
}

}  // namespace

MatrixBlock truncate(const OperatorConfig& cfg, Window w, BlockKind kind) {
  check_window(cfg, w);
  if (kind == BlockKind::DualScaled && cfg.lambda == 0.0) {
    throw LambdaZero("dual-scaled block undefined at lambda = 0");
  }
  const auto n = w.size();
  const double alpha = cfg.alpha();
  const Potential& v = cfg.pot;
  const bool real_phase = (cfg.phase.imag() == 0.0);

  MatrixBlock b;
  b.kind = kind;
  b.win = w;
  b.lambda = cfg.lambda;
  b.m = Eigen::MatrixXcd::Zero(n, n);

  if (kind == BlockKind::Schrodinger) {
    for (std::int64_t i = 0; i < n; ++i) {
      Cplx x = cfg.phase + double(w.x1 + i) * alpha;
      b.m(i, i) = cfg.lambda * v.eval(x);
      if (i + 1 < n) {
        b.m(i, i + 1) = 1.0;
        b.m(i + 1, i) = 1.0;
      }
    }
    if (real_phase) b.m = ((b.m + b.m.adjoint()) / 2.0).eval();  // strip rounding spills
    return b;
  }

  const double scale = (kind == BlockKind::DualScaled) ? 1.0 / cfg.lambda : 1.0;
  if (std::abs(cfg.phase.imag()) >= v.rho()) {
    throw StripExceeded("dual phase leaves the analyticity strip");
  }
  // diagonal 2 cos(2 pi (theta + n alpha)) plus the Toeplitz band lambda v_hat_{i-j};
  // built from the upper triangle so real-phase blocks are Hermitian exactly
  for (std::int64_t i = 0; i < n; ++i) {
    Cplx th = cfg.phase + double(w.x1 + i) * alpha;
    Cplx diag = 2.0 * std::cos(kTwoPi * th) + cfg.lambda * v.coeff(0);
    b.m(i, i) = scale * diag;
    for (std::int64_t j = i + 1; j < std::min<std::int64_t>(n, i + v.K() + 1); ++j) {
      Cplx band = scale * cfg.lambda * v.coeff(static_cast<int>(i - j));
      b.m(i, j) = band;
      b.m(j, i) = real_phase ? std::conj(band)
                             : scale * cfg.lambda * v.coeff(static_cast<int>(j - i));
    }
  }
  return b;
}

GreenEntry green(const MatrixBlock& b, Cplx E, std::int64_t x, std::int64_t y) {
  if (x < b.win.x1 || x > b.win.x2 || y < b.win.x1 || y > b.win.x2) {
    throw ConfigError("green entry outside the window");
  }
  GreenEntry out;
  auto lu = factor_shifted(b.m, E, &out.rcond);
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(b.win.size());
  e(y - b.win.x1) = 1.0;
  out.value = lu.solve(e)(x - b.win.x1);
  return out;
}

Eigen::VectorXcd green_row(const MatrixBlock& b, Cplx E, std::int64_t x, double* rcond) {
  if (x < b.win.x1 || x > b.win.x2) throw ConfigError("green row outside the window");
  Eigen::MatrixXcd At = b.m.transpose();
  At.diagonal().array() -= E;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(At);
  double rc = lu.rcond();
  if (rcond) *rcond = rc;
  if (!(rc > 1e-14)) throw SingularBlock("shifted block numerically singular");
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(b.win.size());
  e(x - b.win.x1) = 1.0;
  return lu.solve(e);
}

RegularityReport classify_regular(const OperatorConfig& cfg, Window data, std::int64_t x,
                                  double m, int N, double E) {
  if (N < 1) throw ConfigError("regularity scan needs N >= 1");
  RegularityReport rep;
  rep.threshold = std::exp(-m * N);
  rep.defect = std::numeric_limits<double>::infinity();

  bool any = false;
  for (std::int64_t x1 = x - N; x1 <= x - 1; ++x1) {  // x strictly interior
    std::int64_t x2 = x1 + N + 1;
    if (x1 < data.x1 || x2 > data.x2) continue;
    if (x1 == data.x1 || x2 == data.x2) {
      ++rep.excluded;
      continue;
    }
    any = true;
    Window I{x1 + 1, x2 - 1};
    double defect = 0.0;
    try {
      auto block = truncate(cfg, I, BlockKind::DualScaled);
      Eigen::VectorXcd row = green_row(block, E, x);
      double d1 = 0.0, d2 = 0.0;
      for (std::int64_t y = I.x1; y <= I.x2; ++y) {
        double g = std::abs(row(y - I.x1));
        d1 += g * cfg.pot.tail_weight(static_cast<int>(y - x1));
        d2 += g * cfg.pot.tail_weight(static_cast<int>(y - x2));
      }
      defect = std::max(d1, d2);
    } catch (const SingularBlock&) {
      ++rep.skipped;
      continue;
    }
    if (defect < rep.defect) {
      rep.defect = defect;
      rep.witness = Window{x1, x2};
    }
  }
  if (!any) throw WindowTooSmall("no admissible window of the requested length fits the data");
  rep.regular = rep.defect < rep.threshold;
  return rep;
}

LogDet det_PN(const OperatorConfig& cfg, double theta, double E, int N) {
  if (N < 1) throw ConfigError("determinant needs N >= 1");
  if (cfg.lambda == 0.0) throw LambdaZero("P_N uses the 1/lambda scaling");
  OperatorConfig c = cfg;
  c.phase = Cplx(theta, 0.0);
  auto b = truncate(c, Window{0, N - 1}, BlockKind::DualScaled);
  Eigen::MatrixXcd A = b.m;
  A.diagonal().array() -= E;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  LogDet out;
  out.phase = Cplx(double(lu.permutationP().determinant()), 0.0);
  out.log_abs = 0.0;
  for (int i = 0; i < N; ++i) {
    Cplx u = lu.matrixLU()(i, i);
    double a = std::abs(u);
    out.log_abs += safe_log(a);
    if (a > 0) out.phase *= u / a;
  }
  return out;
}

bool membership_A(const OperatorConfig& cfg, int N, double r, double theta, double E) {
  double shifted = theta - 0.5 * (N - 1) * cfg.alpha();
  return det_PN(cfg, shifted, E, N).log_abs <= (N + 1) * r;
}

double uniformity_xi(const std::vector<double>& thetas, int M) {
  const int kp1 = static_cast<int>(thetas.size());
  if (kp1 < 2) throw ConfigError("uniformity needs at least two points");
  if (M < 2) throw ConfigError("uniformity grid needs M >= 2");
  std::vector<double> c(kp1);
  for (int i = 0; i < kp1; ++i) c[i] = std::cos(kTwoPi * thetas[i]);
  for (int i = 0; i < kp1; ++i) {
    for (int j = i + 1; j < kp1; ++j) {
      if (std::abs(c[i] - c[j]) < 1e-12) throw Degenerate("repeated cosine values");
    }
  }
  auto log_ratio = [&](double x) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < kp1; ++i) {
      double s = 0.0;
      for (int j = 0; j < kp1; ++j) {
        if (j == i) continue;
        s += safe_log(std::abs(x - c[j])) - std::log(std::abs(c[i] - c[j]));
      }
      best = std::max(best, s);
    }
    return best;
  };
  double h = 2.0 / (M - 1);
  double xbest = -1.0, fbest = log_ratio(-1.0);
  for (int g = 1; g < M; ++g) {
    double x = -1.0 + g * h;
    double f = log_ratio(x);
    if (f > fbest) {
      fbest = f;
      xbest = x;
    }
  }
  // golden-section refinement around the grid arg-max
  double lo = std::max(-1.0, xbest - h), hi = std::min(1.0, xbest + h);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
  double fa = log_ratio(a), fb = log_ratio(b);
  for (int it = 0; it < 80; ++it) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + gr * (hi - lo);
      fb = log_ratio(b);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - gr * (hi - lo);
      fa = log_ratio(a);
    }
  }
  fbest = std::max({fbest, fa, fb});
  return fbest / (kp1 - 1);
}

std::pair<Window, Window> resonant_intervals(std::int64_t k, std::int64_t n_j, std::int64_t q_n,
                                             int s) {
  if (s < 1) throw SelectionViolated("interval scale needs s >= 1");
  if (q_n < 1 || k < 1) throw ConfigError("resonant intervals need k, q_n >= 1");
  std::int64_t sq = std::int64_t(s) * q_n;
  if (8 * sq > k) throw SelectionViolated("selection requires s q_n <= k / 8");
  Window I2{k - 2 * sq + 1, k + 2 * sq};
  Window I1 = (n_j < 0) ? Window{-2 * sq + 1, 0} : Window{0, 2 * sq - 1};
  return {I1, I2};
}

LocalizationReport localization_profile(const OperatorConfig& cfg, double theta, int N_trunc,
                                        double eps0, double eps1) {
  if (N_trunc < 2) throw ConfigError("localization profile needs N_trunc >= 2");
  LocalizationReport rep;

  auto res = resonances(Real(theta), *cfg.freq, eps0, N_trunc);
  for (const auto& e : res.entries) rep.resonance_indices.push_back(e.n);

  // gap regions 3|n_j| < |k| < |n_{j+1}|/3, with the window edge as sentinel
  std::vector<std::int64_t> mags;
  for (const auto& e : res.entries) mags.push_back(std::abs(e.n));
  mags.push_back(N_trunc);
  bool any_region = false;
  for (std::size_t j = 0; j + 1 < mags.size(); ++j) {
    GapRegion g{3 * mags[j], mags[j + 1] / 3};
    rep.regions.push_back(g);
    if (g.hi > g.lo + 1) any_region = true;
  }
  if (!any_region) throw TruncationTooSmall("no complete resonance gap inside the window");

  OperatorConfig c = cfg;
  c.phase = Cplx(theta, 0.0);
  auto b = truncate(c, Window{-N_trunc, N_trunc}, BlockKind::Dual);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b.m);
  if (es.info() != Eigen::Success) throw NoConvergence("dual eigensolve failed");
  const auto dim = b.win.size();

  std::vector<double> all_rates;
  std::int64_t total_sites = 0, total_viol = 0;
  for (std::int64_t v = 0; v < dim; ++v) {
    Eigen::VectorXd u = es.eigenvectors().col(v).cwiseAbs();
    Eigen::Index cidx;
    double umax = u.maxCoeff(&cidx);
    EigvecProfile ep;
    ep.eigenvalue = es.eigenvalues()(v);
    ep.center = b.win.x1 + cidx;
    ep.first_gap_empty = rep.regions.front().hi <= rep.regions.front().lo + 1;

    std::vector<double> t_all, l_all;
    for (const auto& g : rep.regions) {
      std::vector<double> t, l;
      for (std::int64_t k = g.lo + 1; k < g.hi; ++k) {
        for (std::int64_t sgn : {std::int64_t(-1), std::int64_t(1)}) {
          std::int64_t site = ep.center + sgn * k;
          if (site < b.win.x1 || site > b.win.x2) continue;
          t.push_back(double(k));
          l.push_back(safe_log(u(site - b.win.x1) / umax));
        }
      }
      auto f = fit_decay(t, l);
      ep.rates.push_back(f.count >= 2 ? f.rate : std::numeric_limits<double>::quiet_NaN());
      t_all.insert(t_all.end(), t.begin(), t.end());
      l_all.insert(l_all.end(), l.begin(), l.end());
    }
    auto f = fit_decay(t_all, l_all);
    ep.fitted_rate = f.rate;
    ep.log_Cbar = f.intercept + 2.0 * f.rmse;
    for (std::size_t i = 0; i < t_all.size(); ++i) {
      if (l_all[i] > ep.log_Cbar - eps1 * t_all[i]) ++ep.violations;
    }
    total_sites += static_cast<std::int64_t>(t_all.size());
    total_viol += ep.violations;
    if (f.count >= 2) all_rates.push_back(ep.fitted_rate);
    rep.vecs.push_back(std::move(ep));
  }

  if (!all_rates.empty()) {
    std::nth_element(all_rates.begin(), all_rates.begin() + all_rates.size() / 2,
                     all_rates.end());
    rep.median_rate = all_rates[all_rates.size() / 2];
  }
  rep.violation_fraction = total_sites ? double(total_viol) / double(total_sites) : 0.0;
  return rep;
}

}  // namespace qp
