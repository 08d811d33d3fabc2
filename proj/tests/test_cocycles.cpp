#include "qplab/cocycle.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "doctest.h"

using namespace qp;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::shared_ptr<const CFExpansion> golden_cf() {
  static auto cf = std::make_shared<const CFExpansion>(cf_expand(FrequencySpec::golden(), 30));
  return cf;
}

Cocycle amo_cocycle(double lambda, double E) {
  return Cocycle::schrodinger(Potential::amo(), lambda, E, golden_cf());
}

}  // namespace

TEST_CASE("free cocycle at E=0 is a quarter rotation") {
  auto c = amo_cocycle(0.0, 0.0);
  auto a1 = transfer(c, Cplx(0.3), 1);
  Eigen::Matrix2cd expect;
  expect << 0.0, -1.0, 1.0, 0.0;
  CHECK((a1.result.dense() - expect).cwiseAbs().maxCoeff() < 1e-15);
  auto a4 = transfer(c, Cplx(0.3), 4);
  CHECK((a4.result.dense() - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() < 1e-14);
  auto a0 = transfer(c, Cplx(0.0), 0);
  CHECK(a0.result.s == 0.0);
  CHECK((a0.result.m - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cocycle identity A_{n+m}(x) = A_n(x + m alpha) A_m(x)") {
  auto c = amo_cocycle(0.5, 2.5);
  double alpha = c.alpha();
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 1 + int(rng() % 25), m = 1 + int(rng() % 25);
    Cplx x(U(rng), 0.0);
    auto whole = transfer(c, x, n + m).result;
    auto split = transfer(c, x + double(m) * alpha, n).result * transfer(c, x, m).result;
    double scale = whole.dense().cwiseAbs().maxCoeff();
    CHECK((whole.dense() - split.dense()).cwiseAbs().maxCoeff() < 1e-8 * scale);
  }
}

TEST_CASE("determinant track stays at one over long products") {
  auto c = amo_cocycle(0.9, 1.3);
  auto t = transfer(c, Cplx(0.137), 10000);
  CHECK(std::abs(t.result.log_abs_det()) < 1e-9);
  CHECK_THROWS_AS(transfer(c, Cplx(0.0, 2.0), 3), StripExceeded);
}

TEST_CASE("lyapunov closed forms") {
  auto rot = amo_cocycle(0.0, 0.0);
  auto l0 = lyapunov_finite(rot, 50, 8);
  CHECK(std::abs(l0.value) < 1e-12);

  // constant matrix [[3,-1],[1,0]]: top eigenvalue (3+sqrt 5)/2
  auto hyp = amo_cocycle(0.0, 3.0);
  auto l3 = lyapunov_finite(hyp, 500, 4);
  double expect = std::log((3.0 + std::sqrt(5.0)) / 2.0);
  CHECK(l3.value == doctest::Approx(expect).epsilon(1e-2));
  CHECK(l3.subadditive_ok);
}

TEST_CASE("subcritical AMO has near-zero exponent in the spectrum") {
  auto c = amo_cocycle(0.5, 0.0);
  auto l = lyapunov_finite(c, 2000, 24);
  CHECK(l.value < 0.02);
  CHECK(l.value > -0.01);
  CHECK(l.subadditive_ok);
}

TEST_CASE("strip growth scan") {
  auto rot = amo_cocycle(0.0, 0.0);
  auto s0 = strip_growth_scan(rot, 0.2, {10, 100}, 3, 8);
  for (const auto& r : s0.rows) CHECK(std::abs(r.rate) < 1e-12);

  // subcritical AMO: slow growth through the strip
  auto c = amo_cocycle(0.3, 0.0);
  auto s = strip_growth_scan(c, 0.05, {500, 2000}, 3, 16);
  CHECK(s.headline < 0.1);
  // off-spectrum contrast: constant hyperbolic matrix
  auto far = amo_cocycle(0.3, 3.0);
  auto sf = strip_growth_scan(far, 0.05, {500}, 2, 8);
  CHECK(sf.headline > 0.8);
  CHECK_THROWS_AS(strip_growth_scan(c, 1.5, {10}, 2, 4), StripExceeded);
}

TEST_CASE("conjugation leaves the finite-scale exponent unchanged") {
  auto c = amo_cocycle(0.3, 3.0);
  auto base = lyapunov_finite(c, 1000, 8);

  auto ident = conjugate(c, [](Cplx) { return Eigen::Matrix2cd::Identity().eval(); });
  CHECK((ident.eval(Cplx(0.2)) - c.eval(Cplx(0.2))).cwiseAbs().maxCoeff() < 1e-14);

  // rotations commute
  auto rot_gen = [](double gamma) {
    Eigen::Matrix2cd r;
    r << std::cos(gamma), -std::sin(gamma), std::sin(gamma), std::cos(gamma);
    return r;
  };
  auto rot = Cocycle::from_function([&](Cplx) { return rot_gen(0.4); }, golden_cf(), 1.0);
  auto conj_rot = conjugate(rot, [&](Cplx) { return rot_gen(1.1); });
  CHECK((conj_rot.eval(Cplx(0.1)) - rot.eval(Cplx(0.1))).cwiseAbs().maxCoeff() < 1e-14);

  Eigen::Matrix2cd shear;
  shear << 1.0, 0.3, 0.0, 1.0;
  auto conj = conjugate(c, [shear](Cplx) { return shear; });
  auto moved = lyapunov_finite(conj, 1000, 8);
  CHECK(std::abs(moved.value - base.value) < 1e-3);

  Eigen::Matrix2cd sing = Eigen::Matrix2cd::Zero();
  auto bad = conjugate(c, [sing](Cplx) { return sing; });
  CHECK_THROWS_AS(bad.eval(Cplx(0.0)), SingularConjugacy);
}

TEST_CASE("divisor solve closed forms") {
  auto cf = cf_expand(FrequencySpec::golden(), 30);
  double theta = 0.3;
  std::map<std::int64_t, Cplx> b{{2, Cplx(1.0, 0.5)}};
  auto sol = divisor_solve(b, theta, cf, {}, 5, 1e-6);
  double arg = 2.0 * theta - 2.0 * cf.alpha_d;
  double mag = 2.0 * std::abs(std::sin(std::numbers::pi * arg));
  CHECK(std::abs(sol.w_hat.at(2)) == doctest::Approx(std::abs(b[2]) / mag).epsilon(1e-10));
  CHECK(sol.w_l1 == doctest::Approx(std::abs(sol.w_hat.at(2))));

  auto zero = divisor_solve({}, theta, cf, {}, 5, 1e-6);
  CHECK(zero.w_hat.empty());
  CHECK(zero.w_l1 == 0.0);
}

TEST_CASE("divisor floor refuses resonant modes unless excluded") {
  auto cf = cf_expand(FrequencySpec::golden(), 30);
  double theta = cf.alpha_d / 2.0;  // 2 theta - alpha = 0 exactly up to rounding
  std::map<std::int64_t, Cplx> b{{0, Cplx(1.0)}, {1, Cplx(1.0)}};
  CHECK_THROWS_AS(divisor_solve(b, theta, cf, {}, 3, 1e-6), DivisorBelowFloor);
  auto sol = divisor_solve(b, theta, cf, {1}, 3, 1e-6);
  CHECK(sol.w_hat.count(1) == 0);
  CHECK(sol.w_hat.count(0) == 1);
}

TEST_CASE("divisor solve kills the off-diagonal of the triangular conjugacy") {
  auto cf = cf_expand(FrequencySpec::golden(), 30);
  double theta = 0.27, alpha = cf.alpha_d;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::map<std::int64_t, Cplx> b;
  for (std::int64_t k = -6; k <= 6; ++k) b[k] = Cplx(U(rng), U(rng));
  auto sol = divisor_solve(b, theta, cf, {}, 6, 1e-8);

  auto series = [](const std::map<std::int64_t, Cplx>& t, double x) {
    Cplx s(0.0);
    for (const auto& [k, v] : t) s += v * std::exp(Cplx(0.0, kTwoPi * k * x));
    return s;
  };
  for (int g = 0; g < 40; ++g) {
    double x = g / 40.0;
    // upper-right of W(x+alpha)^{-1} [[e,b],[0,e^{-1}]] W(x), W = [[1,w],[0,1]]
    Cplx resid = std::exp(Cplx(0.0, kTwoPi * theta)) * series(sol.w_hat, x) + series(b, x) -
                 std::exp(Cplx(0.0, -kTwoPi * theta)) * series(sol.w_hat, x + alpha);
    CHECK(std::abs(resid) < 1e-9);
  }
}

TEST_CASE("bloch lift boundary defect for a single mode") {
  OperatorConfig cfg;
  cfg.lambda = 0.2;
  cfg.freq = golden_cf();
  cfg.pot = Potential::amo();
  double theta = 0.17;
  double E = 2.0 * std::cos(kTwoPi * theta);  // lambda -> 0 eigenvalue at mode 0
  BlochLift lift(cfg, theta, E, {Cplx(1.0)}, Window{0, 0}, Window{0, 0});
  const auto& g = lift.g_hat_direct();
  REQUIRE(g.size() == 2);
  CHECK(std::abs(g.at(1) + cfg.lambda) < 1e-15);
  CHECK(std::abs(g.at(-1) + cfg.lambda) < 1e-15);
}

TEST_CASE("bloch lift defect routes agree on an interior truncation") {
  OperatorConfig cfg;
  cfg.lambda = 0.1;
  cfg.freq = golden_cf();
  cfg.pot = Potential::amo();
  double theta = 0.123;
  cfg.phase = Cplx(theta, 0.0);
  Window W{-50, 50};
  auto block = truncate(cfg, W, BlockKind::Dual);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(block.m);
  int pick = 50;  // mid-spectrum eigenpair
  double E = es.eigenvalues()(pick);
  std::vector<Cplx> u(es.eigenvectors().col(pick).data(),
                      es.eigenvectors().col(pick).data() + W.size());

  BlochLift lift(cfg, theta, E, u, W, Window{-20, 20});
  double umax = 0.0;
  for (const auto& c : u) umax = std::max(umax, std::abs(c));
  for (const auto& [k, gd] : lift.g_hat_direct()) {
    Cplx ge = lift.g_hat_eigen().count(k) ? lift.g_hat_eigen().at(k) : Cplx(0.0);
    CHECK(std::abs(gd - ge) < 1e-9 * umax);
  }
}

TEST_CASE("bloch defect shrinks as the truncation window grows") {
  OperatorConfig cfg;
  cfg.lambda = 0.1;
  cfg.freq = golden_cf();
  cfg.pot = Potential::amo();
  double theta = 0.123;
  cfg.phase = Cplx(theta, 0.0);
  Window W{-60, 60};
  auto block = truncate(cfg, W, BlockKind::Dual);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(block.m);
  // eigenvector most concentrated at the center
  int pick = 0;
  double best = 0.0;
  for (int i = 0; i < W.size(); ++i) {
    double w = std::abs(es.eigenvectors()(60, i));
    if (w > best) {
      best = w;
      pick = i;
    }
  }
  double E = es.eigenvalues()(pick);
  std::vector<Cplx> u(es.eigenvectors().col(pick).data(),
                      es.eigenvectors().col(pick).data() + W.size());
  BlochLift narrow(cfg, theta, E, u, W, Window{-12, 12});
  BlochLift wide(cfg, theta, E, u, W, Window{-40, 40});
  CHECK(wide.g_sup(0.01, 64) < narrow.g_sup(0.01, 64));
  CHECK(wide.g_sup(0.01, 64) < 1e-4);
}

TEST_CASE("pk sequence rotation algebra") {
  OperatorConfig cfg;
  cfg.lambda = 0.0;
  cfg.freq = golden_cf();
  cfg.pot = Potential::amo();
  auto seq = pk_sequence(cfg, 0.31, 0.0, 50);
  for (const auto& r : seq.rows) {
    CHECK(r.log_norm == doctest::Approx(std::log(double(r.k))).epsilon(1e-12));
    CHECK(r.log_det == doctest::Approx(2.0 * std::log(double(r.k))).epsilon(1e-12));
    CHECK(r.eps == doctest::Approx(1.0 / (2.0 * r.k)).epsilon(1e-12));
  }
  CHECK(seq.monotone_ok);
  CHECK(seq.trace_ok);
}

TEST_CASE("pk sequence invariants for random AMO configurations") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    OperatorConfig cfg;
    cfg.lambda = 0.1 + 0.3 * U(rng);
    cfg.freq = golden_cf();
    cfg.pot = Potential::amo();
    // E = 0 sits in the spectrum for every coupling (the density of states
    // hits 1/2 there, which is never a gap label for irrational alpha)
    auto seq = pk_sequence(cfg, U(rng), 0.0, 400);
    CHECK(seq.monotone_ok);
    CHECK(seq.trace_ok);
    for (std::size_t i = 1; i < seq.rows.size(); ++i) {
      CHECK(seq.rows[i].eps < seq.rows[i - 1].eps * (1 + 1e-12));
    }
  }
}

TEST_CASE("pk norm ratio stays bounded in the subcritical regime") {
  OperatorConfig cfg;
  cfg.lambda = 0.2;
  cfg.freq = golden_cf();
  cfg.pot = Potential::amo();
  auto seq = pk_sequence(cfg, 0.41, 0.0, 1000);
  double early = 0.0, late = 0.0;
  for (const auto& r : seq.rows) {
    double ratio = r.log_norm + 3.0 * r.log_norm_inv;  // ln(||P|| ||P^{-1}||^3)
    if (r.k <= 100) early = std::max(early, ratio);
    late = std::max(late, ratio);
  }
  CHECK(late < early + std::log(100.0));  // no systematic growth over 100 <= k <= 1000
}

TEST_CASE("model X closed forms") {
  auto cf = cf_expand(FrequencySpec::golden(), 30);
  auto flat = model_X(0.23, 1, Cplx(0.0), cf, 37);
  CHECK(flat.norm == doctest::Approx(37.0).epsilon(1e-12));
  CHECK(flat.inv_norm_inv == doctest::Approx(37.0).epsilon(1e-12));

  // theta = 0, r = 0, t = 1: T_s = [[1, s], [0, 1]]
  int k = 40;
  auto shear = model_X(0.0, 0, Cplx(1.0), cf, k);
  Eigen::Matrix2cd X = Eigen::Matrix2cd::Zero();
  for (int j = 1; j <= k; ++j) {
    double s = 2.0 * j - 1.0;
    Eigen::Matrix2cd t;
    t << 1.0, s, s, 1.0 + s * s;
    X += t;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(X);
  CHECK(shear.norm == doctest::Approx(es.eigenvalues()(1)).epsilon(1e-10));
  CHECK(shear.inv_norm_inv == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-8));
  // cubic growth of the norm
  auto shear2 = model_X(0.0, 0, Cplx(1.0), cf, 2 * k);
  CHECK(shear2.norm / shear.norm == doctest::Approx(8.0).epsilon(0.1));
}

TEST_CASE("model X inverse-norm shape is linear in k across parameters") {
  auto cf = cf_expand(FrequencySpec::golden(), 30);
  for (double theta : {0.1, 0.23, 0.4}) {
    for (double t : {0.5, 1.0, 2.0}) {
      for (int r : {1, 2}) {
        auto m = model_X(theta, r, Cplx(t), cf, 200);
        CHECK(m.shape_611 > 0.1);
        CHECK(m.shape_611 < 10.0);
      }
    }
  }
}
