#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/mpfr.hpp>

#include "qplab/errors.hpp"

namespace qp {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;
using Real = boost::multiprecision::mpfr_float;  // dynamic-precision float

// Decimal digits needed to hold `bits` significand bits.
unsigned digits10_for_bits(unsigned bits);

// Scopes the thread-default mpfr precision.
class PrecisionGuard {
 public:
  explicit PrecisionGuard(unsigned bits);
  ~PrecisionGuard();
  PrecisionGuard(const PrecisionGuard&) = delete;
  PrecisionGuard& operator=(const PrecisionGuard&) = delete;

 private:
  unsigned saved_digits10_;
};

// A value with a rigorous error radius.
struct Enclosed {
  Real value;
  Real radius;
};

// An irrational frequency in (0,1), given as a partial-quotient stream,
// a quadratic irrational, or a decimal string with declared precision.
struct FrequencySpec {
  // Yields a_k (k >= 1) given the quotients and convergent denominators
  // computed so far (a holds a_1..a_{k-1}, q holds q_0..q_{k-1}).
  using QuotientGen = std::function<BigInt(std::size_t k, const std::vector<BigInt>& a,
                                           const std::vector<BigInt>& q)>;

  static FrequencySpec from_quotients(std::vector<BigInt> a, unsigned bits = 256);
  static FrequencySpec from_generator(QuotientGen gen, unsigned bits = 256);
  // alpha = offset + scale * sqrt(d), d square-free positive, alpha in (0,1).
  static FrequencySpec quadratic(BigInt d, Rational offset, Rational scale, unsigned bits = 256);
  static FrequencySpec from_decimal(std::string s, unsigned bits = 256);

  static FrequencySpec golden(unsigned bits = 256);  // (sqrt(5)-1)/2
  static FrequencySpec silver(unsigned bits = 256);  // sqrt(2)-1

  enum class Kind { Quotients, Generator, Quadratic, Decimal };
  Kind kind = Kind::Quotients;
  unsigned precision_bits = 256;

  std::vector<BigInt> quotients;  // Kind::Quotients
  QuotientGen generator;          // Kind::Generator
  BigInt quad_d;                  // Kind::Quadratic
  Rational quad_offset, quad_scale;
  Rational dec_value;  // Kind::Decimal, exact parsed value
  Real dec_radius;     // declared error radius (2^-bits)
};

struct CFExpansion {
  unsigned precision_bits = 256;
  std::vector<BigInt> a;  // a_1..a_n
  std::vector<BigInt> p;  // p_0..p_n
  std::vector<BigInt> q;  // q_0..q_n
  // delta[k] encloses |q_k alpha - p_k| for k = 0..n-1; equals
  // ||q_k alpha|| for k >= 1 (and for k = 0 whenever alpha < 1/2).
  std::vector<Enclosed> delta;
  Rational lo, hi;  // rigorous enclosure of alpha, lo < alpha < hi
  double alpha_d = 0.0;

  int depth() const { return static_cast<int>(a.size()); }
  Real alpha_real() const;  // midpoint of the enclosure at precision_bits

  // Big-integer identities: recurrences, unimodularity, monotone q.
  void check_invariants() const;
  // Exact rational check of the 1/(2 q_{n+1}) <= delta_n <= 1/q_{n+1} brackets.
  bool check_gap_brackets() const;
};

struct BetaProfile {
  double beta_hat = 0.0;            // max of the finite-depth profile
  int depth_used = 0;               // index n attaining the max
  std::vector<double> profile;      // profile[n-1] = ln(q_{n+1}) / q_n, n = 1..depth-1
  std::vector<double> running_sup;  // running sup of the profile
};

struct Resonance {
  std::int64_t n = 0;
  Real gap;        // ||2 theta - n alpha||
  double log_gap;  // ln of gap (-inf for an exact resonance)
};

struct ResonanceSequence {
  Real theta;
  double eps0 = 0.0;
  std::int64_t k_max = 0;
  std::vector<Resonance> entries;  // ordered by |n|, n_0 = 0 first
};

struct DcResult {
  bool holds = false;
  std::int64_t worst_k = 0;
  Real worst_value;  // min over k of ||k alpha|| * |k|^tau
};

struct DivisorRow {
  std::int64_t k = 0;
  double dist_k_alpha = 0.0;  // ||k alpha||
  double log_dist_k_alpha = 0.0;
  double dist_two_theta = 0.0;  // ||2 theta - k alpha||
  double log_dist_two_theta = 0.0;
};

struct DivisorProfile {
  std::vector<DivisorRow> rows;  // k = 1..K
  double beta_hat = 0.0;
  // Largest c with ||k alpha|| >= c e^{-2 beta_hat |k|} on the scanned range.
  double fitted_c = 0.0;
};

CFExpansion cf_expand(const FrequencySpec& alpha, int depth);

BetaProfile beta_estimate(const CFExpansion& cf);

// ||k alpha|| with a rigorous radius < 2^{-P/2}; throws DepthInsufficient
// when |k| >= q_depth or the enclosure cannot certify that accuracy.
Enclosed norm_dist(const BigInt& k, const CFExpansion& cf);

DcResult dc_check(const CFExpansion& cf, double kappa, double tau, std::int64_t K);

ResonanceSequence resonances(const Real& theta, const CFExpansion& cf, double eps0,
                             std::int64_t k_max);

DivisorProfile small_divisor_profile(const CFExpansion& cf, const Real& theta, std::int64_t K);

// frac(x) in [0,1); dist_to_Z(x) = ||x||_{R/Z}.
Real frac(const Real& x);
Real dist_to_Z(const Real& x);

}  // namespace qp
