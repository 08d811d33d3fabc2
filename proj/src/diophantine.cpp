#include "qplab/diophantine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace qp {

namespace mp = boost::multiprecision;

unsigned digits10_for_bits(unsigned bits) {
  return static_cast<unsigned>(std::ceil(bits * 0.30103)) + 2;
}

PrecisionGuard::PrecisionGuard(unsigned bits) : saved_digits10_(Real::default_precision()) {
  Real::default_precision(digits10_for_bits(bits));
}

PrecisionGuard::~PrecisionGuard() {
  Real::default_precision(saved_digits10_);
}

Real frac(const Real& x) {
  Real f = x - floor(x);
  if (f < 0) f += 1;
  if (f >= 1) f -= 1;
  return f;
}

Real dist_to_Z(const Real& x) {
  Real f = frac(x);
  return (f <= Real(0.5)) ? f : Real(1 - f);
}

namespace {

// boost 1.74 loses precision casting cpp_rational to mpfr_float; divide instead
Real to_real(const Rational& r) {
  return Real(numerator(r)) / Real(denominator(r));
}

BigInt floor_div(const BigInt& a, const BigInt& b) {
  BigInt q = a / b, r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) --q;
  return q;
}

// One-at-a-time partial quotient source.
class QuotientSource {
 public:
  virtual ~QuotientSource() = default;
  // Returns a_k (k is 1-based); a and q are the data computed so far.
  virtual std::optional<BigInt> next(std::size_t k, const std::vector<BigInt>& a,
                                     const std::vector<BigInt>& q) = 0;
};

class VectorSource final : public QuotientSource {
 public:
  explicit VectorSource(const std::vector<BigInt>& v) : v_(v) {}
  std::optional<BigInt> next(std::size_t k, const std::vector<BigInt>&,
                             const std::vector<BigInt>&) override {
    if (k > v_.size()) return std::nullopt;
    return v_[k - 1];
  }

 private:
  const std::vector<BigInt>& v_;
};

class GeneratorSource final : public QuotientSource {
 public:
  explicit GeneratorSource(const FrequencySpec::QuotientGen& g) : gen_(g) {}
  std::optional<BigInt> next(std::size_t k, const std::vector<BigInt>& a,
                             const std::vector<BigInt>& q) override {
    return gen_(k, a, q);
  }

 private:
  const FrequencySpec::QuotientGen& gen_;
};

// State (P + sqrt(D)) / Q with the invariant Q | D - P^2; exact integer
// arithmetic throughout, so the stream never drifts.
class QuadraticSource final : public QuotientSource {
 public:
  QuadraticSource(const BigInt& d, const Rational& offset, const Rational& scale) {
    BigInt A = numerator(offset) * denominator(scale);
    BigInt B = numerator(scale) * denominator(offset);
    BigInt C = denominator(offset) * denominator(scale);
    // alpha = (A + B sqrt(d)) / C; fold B into D, flip signs if B < 0.
    if (B < 0) {
      A = -A;
      C = -C;
      B = -B;
    }
    P_ = A;
    D_ = B * B * d;
    Q_ = C;
    if ((D_ - P_ * P_) % Q_ != 0) {
      P_ *= abs(Q_);
      D_ *= Q_ * Q_;
      Q_ *= abs(Q_);
    }
  }

  std::optional<BigInt> next(std::size_t, const std::vector<BigInt>&,
                             const std::vector<BigInt>&) override {
    // x <- 1/x, then a = floor(x), x <- x - a.
    BigInt Pn = -P_;
    BigInt Qn = (D_ - Pn * Pn) / Q_;
    P_ = Pn;
    Q_ = Qn;
    BigInt s = mp::sqrt(D_);
    BigInt a = (Q_ > 0) ? floor_div(P_ + s, Q_) : floor_div(P_ + s + 1, Q_);
    P_ -= a * Q_;
    return a;
  }

 private:
  BigInt P_, D_, Q_;
};

// Interval continued fraction of a declared-precision decimal: the exact
// center drives the quotients, the interval certifies them.
class DecimalSource final : public QuotientSource {
 public:
  DecimalSource(const Rational& value, const Rational& radius)
      : x_(value), lo_(value - radius), hi_(value + radius) {}

  std::optional<BigInt> next(std::size_t k, const std::vector<BigInt>&,
                             const std::vector<BigInt>&) override {
    if (x_ == 0) {
      throw RationalInput("decimal input has a terminating continued fraction",
                          static_cast<int>(k) - 1);
    }
    Rational inv_x = Rational(denominator(x_), numerator(x_));
    BigInt a = floor_div(denominator(x_), numerator(x_));
    bool terminates = (denominator(x_) % numerator(x_) == 0);
    if (terminates) {
      // exact rational center: emit the final quotient, fail on the next call
      x_ = 0;
      return a;
    }
    if (lo_ <= 0) {
      throw PrecisionExhausted("decimal precision exhausted at depth " + std::to_string(k),
                               static_cast<int>(k) - 1);
    }
    // x in (0,1): 1/x in (1/hi, 1/lo).
    BigInt alo = floor_div(denominator(hi_), numerator(hi_));
    BigInt ahi = floor_div(denominator(lo_), numerator(lo_));
    if (alo != ahi) {
      throw PrecisionExhausted("decimal precision exhausted at depth " + std::to_string(k),
                               static_cast<int>(k) - 1);
    }
    Rational nlo = Rational(denominator(hi_), numerator(hi_)) - a;
    Rational nhi = Rational(denominator(lo_), numerator(lo_)) - a;
    x_ = inv_x - a;
    lo_ = nlo;
    hi_ = nhi;
    return a;
  }

 private:
  Rational x_, lo_, hi_;
};

std::unique_ptr<QuotientSource> make_source(const FrequencySpec& spec) {
  switch (spec.kind) {
    case FrequencySpec::Kind::Quotients:
      return std::make_unique<VectorSource>(spec.quotients);
    case FrequencySpec::Kind::Generator:
      return std::make_unique<GeneratorSource>(spec.generator);
    case FrequencySpec::Kind::Quadratic:
      return std::make_unique<QuadraticSource>(spec.quad_d, spec.quad_offset, spec.quad_scale);
    case FrequencySpec::Kind::Decimal: {
      Rational r(numerator(spec.dec_value), denominator(spec.dec_value));
      Rational rad = static_cast<Rational>(Rational(1) / (BigInt(1) << spec.precision_bits));
      return std::make_unique<DecimalSource>(r, rad);
    }
  }
  throw Error("unreachable frequency kind");
}

}  // namespace

FrequencySpec FrequencySpec::from_quotients(std::vector<BigInt> a, unsigned bits) {
  FrequencySpec s;
  s.kind = Kind::Quotients;
  s.quotients = std::move(a);
  s.precision_bits = bits;
  for (const auto& ak : s.quotients) {
    if (ak < 1) throw ConfigError("partial quotients must be >= 1");
  }
  return s;
}

FrequencySpec FrequencySpec::from_generator(QuotientGen gen, unsigned bits) {
  FrequencySpec s;
  s.kind = Kind::Generator;
  s.generator = std::move(gen);
  s.precision_bits = bits;
  return s;
}

FrequencySpec FrequencySpec::quadratic(BigInt d, Rational offset, Rational scale, unsigned bits) {
  FrequencySpec s;
  s.kind = Kind::Quadratic;
  s.quad_d = std::move(d);
  s.quad_offset = std::move(offset);
  s.quad_scale = std::move(scale);
  s.precision_bits = bits;
  if (s.quad_d <= 0) throw ConfigError("quadratic descriptor needs d > 0");
  BigInt r = mp::sqrt(s.quad_d);
  if (r * r == s.quad_d) throw ConfigError("quadratic descriptor needs non-square d");
  if (s.quad_scale == 0) throw ConfigError("quadratic descriptor needs nonzero scale");
  return s;
}

FrequencySpec FrequencySpec::from_decimal(std::string str, unsigned bits) {
  FrequencySpec s;
  s.kind = Kind::Decimal;
  s.precision_bits = bits;
  // Accept [0].ddd... forms.
  auto dot = str.find('.');
  std::string ip = (dot == std::string::npos) ? str : str.substr(0, dot);
  std::string fp = (dot == std::string::npos) ? "" : str.substr(dot + 1);
  if (ip.empty()) ip = "0";
  for (char c : ip + fp) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw ConfigError("malformed decimal string: " + str);
    }
  }
  std::string digits = ip + fp;
  digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size() - 1));
  BigInt num(digits);
  BigInt den = 1;
  for (std::size_t i = 0; i < fp.size(); ++i) den *= 10;
  s.dec_value = Rational(num, den);
  if (s.dec_value <= 0 || s.dec_value >= 1) {
    throw ConfigError("frequency must lie in (0,1): " + str);
  }
  return s;
}

FrequencySpec FrequencySpec::golden(unsigned bits) {
  return quadratic(5, Rational(-1, 2), Rational(1, 2), bits);
}

FrequencySpec FrequencySpec::silver(unsigned bits) {
  return quadratic(2, Rational(-1), Rational(1), bits);
}

Real CFExpansion::alpha_real() const {
  PrecisionGuard guard(precision_bits + 64);
  Real l = Real(numerator(lo)) / Real(denominator(lo));
  Real h = Real(numerator(hi)) / Real(denominator(hi));
  return (l + h) / 2;
}

void CFExpansion::check_invariants() const {
  const int n = depth();
  if (n < 1) throw Error("empty expansion");
  if (p.size() != static_cast<std::size_t>(n) + 1 || q.size() != static_cast<std::size_t>(n) + 1) {
    throw Error("convergent arrays out of sync");
  }
  if (p[0] != 0 || q[0] != 1 || p[1] != 1 || q[1] != a[0]) throw Error("bad seed convergents");
  for (int k = 2; k <= n; ++k) {
    if (p[k] != a[k - 1] * p[k - 1] + p[k - 2]) throw Error("p recurrence broken");
    if (q[k] != a[k - 1] * q[k - 1] + q[k - 2]) throw Error("q recurrence broken");
    if (q[k] <= q[k - 1]) throw Error("q not strictly increasing");
  }
  for (int k = 1; k <= n; ++k) {
    if (abs(p[k] * q[k - 1] - p[k - 1] * q[k]) != 1) throw Error("unimodularity broken");
  }
}

bool CFExpansion::check_gap_brackets() const {
  for (std::size_t k = 0; k < delta.size(); ++k) {
    Rational e1 = Rational(q[k]) * lo - p[k];
    Rational e2 = Rational(q[k]) * hi - p[k];
    if ((e1 < 0) != (e2 < 0)) return false;  // enclosure straddles the convergent
    Rational lo_abs = std::min(abs(e1), abs(e2));
    Rational hi_abs = std::max(abs(e1), abs(e2));
    if (lo_abs < Rational(1, 2 * q[k + 1])) return false;
    if (hi_abs > Rational(1, BigInt(q[k + 1]))) return false;
  }
  return true;
}

CFExpansion cf_expand(const FrequencySpec& alpha, int depth) {
  if (depth < 1) throw ConfigError("cf_expand needs depth >= 1");
  auto src = make_source(alpha);
  const unsigned P = alpha.precision_bits;
  PrecisionGuard guard(P + 64);

  CFExpansion cf;
  cf.precision_bits = P;
  cf.p = {0};
  cf.q = {1};

  auto push = [&](const BigInt& ak) {
    if (ak < 1) throw Error("partial quotient < 1 from source");
    cf.a.push_back(ak);
    std::size_t k = cf.a.size();
    if (k == 1) {
      cf.p.push_back(1);
      cf.q.push_back(ak);
    } else {
      cf.p.push_back(ak * cf.p[k - 1] + cf.p[k - 2]);
      cf.q.push_back(ak * cf.q[k - 1] + cf.q[k - 2]);
    }
  };

  for (int k = 1; k <= depth; ++k) {
    auto ak = src->next(static_cast<std::size_t>(k), cf.a, cf.q);
    if (!ak) throw DepthInsufficient("quotient stream ends before depth " + std::to_string(depth));
    push(*ak);
  }

  // Extend internally so the enclosure resolves ||k alpha|| to < 2^-P for
  // every |k| < q_depth. q grows at least geometrically, so this is cheap;
  // budget-capped and best-effort for sources that run out or blow up.
  const BigInt q_depth = cf.q.back();
  const BigInt target = q_depth << P;
  std::vector<BigInt> ext_a = cf.a, ext_p = cf.p, ext_q = cf.q;
  bool rational_tail = false;
  {
    int extra = 0;
    const int extra_cap = static_cast<int>(4 * P) + 64;
    while (extra < extra_cap) {
      std::size_t m = ext_q.size() - 1;
      if (ext_q[m] * (ext_q[m] + ext_q[m - 1]) >= target) break;
      std::optional<BigInt> ak;
      try {
        ak = src->next(ext_a.size() + 1, ext_a, ext_q);
      } catch (const RationalInput&) {
        rational_tail = true;
        break;
      } catch (...) {
        break;  // source exhausted or too expensive; keep what we have
      }
      if (!ak || *ak < 1) break;
      ext_a.push_back(*ak);
      ext_p.push_back(*ak * ext_p[m] + ext_p[m - 1]);
      ext_q.push_back(*ak * ext_q[m] + ext_q[m - 1]);
      ++extra;
    }
  }
  if (rational_tail) {
    throw RationalInput("expansion terminates before requested depth",
                        static_cast<int>(ext_a.size()));
  }

  // alpha lies strictly between p_m/q_m and (p_m + p_{m-1})/(q_m + q_{m-1}).
  {
    std::size_t m = ext_q.size() - 1;
    Rational c1(ext_p[m], ext_q[m]);
    Rational c2(ext_p[m] + ext_p[m - 1], ext_q[m] + ext_q[m - 1]);
    cf.lo = std::min(c1, c2);
    cf.hi = std::max(c1, c2);
    if (alpha.kind == FrequencySpec::Kind::Decimal) {
      Rational rad = static_cast<Rational>(Rational(1) / (BigInt(1) << P));
      cf.lo = std::max(cf.lo, Rational(alpha.dec_value - rad));
      cf.hi = std::min(cf.hi, Rational(alpha.dec_value + rad));
    }
  }

  cf.alpha_d = static_cast<double>(cf.alpha_real());

  cf.delta.reserve(depth);
  for (int k = 0; k < depth; ++k) {
    Real e1 = to_real(Rational(cf.q[k]) * cf.lo - cf.p[k]);
    Real e2 = to_real(Rational(cf.q[k]) * cf.hi - cf.p[k]);
    Real v1 = abs(e1), v2 = abs(e2);
    Enclosed d;
    d.value = (v1 + v2) / 2;
    if ((e1 < 0) != (e2 < 0)) {
      d.radius = d.value;  // enclosure straddles the convergent itself
    } else {
      d.radius = abs(v1 - v2) / 2 + ldexp(d.value, -static_cast<int>(P));
    }
    cf.delta.push_back(std::move(d));
  }

  cf.check_invariants();
  return cf;
}

BetaProfile beta_estimate(const CFExpansion& cf) {
  if (cf.depth() < 2) throw ConfigError("beta_estimate needs depth >= 2");
  PrecisionGuard guard(cf.precision_bits + 64);
  BetaProfile out;
  double sup = -std::numeric_limits<double>::infinity();
  for (int n = 1; n + 1 <= cf.depth(); ++n) {
    double lnq = static_cast<double>(log(static_cast<Real>(cf.q[n + 1])));
    double qn = static_cast<double>(static_cast<Real>(cf.q[n]));
    double val = lnq / qn;
    out.profile.push_back(val);
    if (val > sup) {
      sup = val;
      out.depth_used = n;
    }
    out.running_sup.push_back(sup);
  }
  out.beta_hat = sup;
  return out;
}

Enclosed norm_dist(const BigInt& k, const CFExpansion& cf) {
  if (k == 0) throw ConfigError("norm_dist needs k != 0");
  if (abs(k) >= cf.q.back()) {
    throw DepthInsufficient("|k| must be below q_depth");
  }
  const unsigned P = cf.precision_bits;
  PrecisionGuard guard(P + 64);
  Rational klo = Rational(k) * cf.lo;
  Rational khi = Rational(k) * cf.hi;
  if (klo > khi) std::swap(klo, khi);
  // Nearest integer to the midpoint.
  Rational mid = (klo + khi) / 2;
  BigInt ell = floor_div(numerator(mid) * 2 + denominator(mid), denominator(mid) * 2);
  Rational f1 = klo - ell, f2 = khi - ell;  // f1 <= f2, both in (-1, 1)
  auto dist = [](const Real& x) {
    Real ax = abs(x);
    return (ax <= Real(0.5)) ? ax : Real(1 - ax);
  };
  Real r1 = to_real(f1), r2 = to_real(f2);
  Real d1 = dist(r1), d2 = dist(r2);
  Real lo_d = std::min(d1, d2), hi_d = std::max(d1, d2);
  if (f1 <= 0 && f2 >= 0) lo_d = 0;
  if (f1 <= Rational(1, 2) && f2 >= Rational(1, 2)) hi_d = Real(0.5);
  if (f1 <= Rational(-1, 2) && f2 >= Rational(-1, 2)) hi_d = Real(0.5);
  Enclosed out;
  out.value = (lo_d + hi_d) / 2;
  out.radius = (hi_d - lo_d) / 2 + ldexp(Real(1), -static_cast<int>(P));
  Real bound = ldexp(Real(1), -static_cast<int>(P / 2));
  if (out.radius >= bound) {
    throw DepthInsufficient("norm_dist radius exceeds 2^{-P/2}");
  }
  return out;
}

DcResult dc_check(const CFExpansion& cf, double kappa, double tau, std::int64_t K) {
  if (K < 1) throw ConfigError("dc_check needs K >= 1");
  if (BigInt(K) >= cf.q.back()) throw DepthInsufficient("K must be below q_depth");
  const unsigned P = cf.precision_bits;
  PrecisionGuard guard(P + 64);
  Real alpha = cf.alpha_real();
  Real y = 0;
  DcResult res;
  res.holds = true;
  Real best;
  for (std::int64_t k = 1; k <= K; ++k) {
    y += alpha;
    if (y >= 1) y -= 1;
    Real d = (y <= Real(0.5)) ? y : Real(1 - y);
    Real score = d * pow(Real(k), Real(tau));
    if (k == 1 || score < best) {
      best = score;
      res.worst_k = k;
    }
    if (d <= Real(kappa) * pow(Real(k), Real(-tau))) res.holds = false;
  }
  res.worst_value = best;
  return res;
}

ResonanceSequence resonances(const Real& theta, const CFExpansion& cf, double eps0,
                             std::int64_t k_max) {
  if (eps0 <= 0) throw ConfigError("resonances needs eps0 > 0");
  if (BigInt(k_max) >= cf.q.back()) throw DepthInsufficient("k_max must be below q_depth");
  const unsigned P = cf.precision_bits;
  PrecisionGuard guard(P + 64);
  Real alpha = cf.alpha_real();
  Real two_theta = frac(2 * theta);

  ResonanceSequence seq;
  seq.theta = theta;
  seq.eps0 = eps0;
  seq.k_max = k_max;

  auto log_of = [](const Real& g) {
    if (g == 0) return -std::numeric_limits<double>::infinity();
    return static_cast<double>(log(g));
  };

  Real g0 = (two_theta <= Real(0.5)) ? two_theta : Real(1 - two_theta);
  seq.entries.push_back({0, g0, log_of(g0)});
  Real running_min = g0;

  Real upos = two_theta;  // frac(2 theta - k alpha)
  Real uneg = two_theta;  // frac(2 theta + k alpha)
  for (std::int64_t k = 1; k <= k_max; ++k) {
    upos -= alpha;
    if (upos < 0) upos += 1;
    uneg += alpha;
    if (uneg >= 1) uneg -= 1;
    Real gp = (upos <= Real(0.5)) ? upos : Real(1 - upos);
    Real gn = (uneg <= Real(0.5)) ? uneg : Real(1 - uneg);
    Real m = std::min({running_min, gp, gn});
    // minimal among |j| <= |k| and below the e^{-eps0 |k|} threshold;
    // at equal |k| the positive index is listed first
    double thr = -eps0 * static_cast<double>(k);
    if (gp <= m && log_of(gp) <= thr) seq.entries.push_back({k, gp, log_of(gp)});
    if (gn <= m && log_of(gn) <= thr) seq.entries.push_back({-k, gn, log_of(gn)});
    running_min = m;
  }
  return seq;
}

DivisorProfile small_divisor_profile(const CFExpansion& cf, const Real& theta, std::int64_t K) {
  if (BigInt(K) >= cf.q.back()) throw DepthInsufficient("K must be below q_depth");
  const unsigned P = cf.precision_bits;
  PrecisionGuard guard(P + 64);
  Real alpha = cf.alpha_real();
  Real two_theta = frac(2 * theta);

  DivisorProfile prof;
  prof.beta_hat = (cf.depth() >= 2) ? beta_estimate(cf).beta_hat : 0.0;

  auto log_of = [](const Real& g) {
    if (g == 0) return -std::numeric_limits<double>::infinity();
    return static_cast<double>(log(g));
  };

  Real y = 0, u = two_theta;
  double min_score = std::numeric_limits<double>::infinity();
  for (std::int64_t k = 1; k <= K; ++k) {
    y += alpha;
    if (y >= 1) y -= 1;
    u -= alpha;
    if (u < 0) u += 1;
    Real dk = (y <= Real(0.5)) ? y : Real(1 - y);
    Real dt = (u <= Real(0.5)) ? u : Real(1 - u);
    DivisorRow row;
    row.k = k;
    row.dist_k_alpha = static_cast<double>(dk);
    row.log_dist_k_alpha = log_of(dk);
    row.dist_two_theta = static_cast<double>(dt);
    row.log_dist_two_theta = log_of(dt);
    prof.rows.push_back(row);
    min_score = std::min(min_score, row.log_dist_k_alpha + 2.0 * prof.beta_hat * k);
  }
  prof.fitted_c = std::exp(min_score);
  return prof;
}

}  // namespace qp
