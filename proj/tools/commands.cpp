#include "commands.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qplab/cocycle.hpp"
#include "qplab/diophantine.hpp"
#include "qplab/operators.hpp"
#include "qplab/spectral.hpp"
#include "qplab/tridiag.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace qp;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------- config ----

class Config {
 public:
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    base_dir_ = fs::path(path).parent_path();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(lineno) + " is not key=value");
      }
      kv_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
  }

  void set(const std::string& pair) {
    auto eq = pair.find('=');
    if (eq == std::string::npos) throw ConfigError("--set needs key=value, got: " + pair);
    kv_[pair.substr(0, eq)] = pair.substr(eq + 1);
  }

  void check_keys(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : kv_) {
      if (!allowed.count(k)) throw ConfigError("unknown config key: " + k);
    }
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }

  double num(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' is not a number: " + it->second);
    }
  }

  long integer(const std::string& key, long dflt) const {
    double v = num(key, double(dflt));
    long r = long(v);
    if (double(r) != v) throw ConfigError("key '" + key + "' is not an integer");
    return r;
  }

  long positive(const std::string& key, long dflt) const {
    long v = integer(key, dflt);
    if (v <= 0) throw ConfigError("key '" + key + "' must be positive, got " + std::to_string(v));
    return v;
  }

  std::vector<double> list(const std::string& key, const std::string& dflt) const {
    std::vector<double> out;
    std::stringstream ss(str(key, dflt));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' has a non-numeric entry: " + item);
      }
    }
    if (out.empty()) throw ConfigError("key '" + key + "' is empty");
    return out;
  }

  fs::path resolve_path(const std::string& rel) const {
    fs::path p(rel);
    return p.is_absolute() ? p : base_dir_ / p;
  }

  const std::map<std::string, std::string>& resolved() const { return kv_; }

  std::string hash() const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (const auto& [k, v] : kv_) {
      for (char c : k + "=" + v + "\n") {
        h ^= std::uint8_t(c);
        h *= 1099511628211ull;
      }
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

 private:
  std::map<std::string, std::string> kv_;
  fs::path base_dir_ = ".";
};

// -------------------------------------------------------------- emitters ----

class Emitter {
 public:
  Emitter(fs::path dir, const Config& cfg, unsigned precision)
      : dir_(std::move(dir)), cfg_(cfg), precision_(precision) {
    fs::create_directories(dir_);
    start_ = std::chrono::steady_clock::now();
  }

  void warn(const std::string& msg) { warnings_.push_back(msg); }

  void stage_done(const std::string& name) {
    auto now = std::chrono::steady_clock::now();
    stages_[name] =
        std::chrono::duration_cast<std::chrono::milliseconds>(now - last_stage_).count();
    last_stage_ = now;
  }

  // header: config echo comments, then the column row
  std::ofstream csv(const std::string& name, const std::vector<std::string>& cols) {
    std::ofstream out(dir_ / (name + ".csv"), std::ios::binary);
    for (const auto& [k, v] : cfg_.resolved()) out << "# " << k << "=" << v << "\n";
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << "\n";
    return out;
  }

  void write_json(const std::string& name, json j) {
    json doc;
    doc["config"] = cfg_.resolved();
    doc["result"] = std::move(j);
    std::ofstream out(dir_ / (name + ".json"), std::ios::binary);
    out << doc.dump(2) << "\n";
  }

  void finish() {
    auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start_)
                    .count();
    json m;
    m["version"] = "0.1.0";
    m["config_hash"] = cfg_.hash();
    m["config"] = cfg_.resolved();
    m["precision_bits"] = precision_;
    m["wall_ms"] = wall;
    m["stages_ms"] = stages_;
    m["warnings"] = warnings_;
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
  }

 private:
  fs::path dir_;
  const Config& cfg_;
  unsigned precision_;
  std::vector<std::string> warnings_;
  std::map<std::string, long> stages_;
  std::chrono::steady_clock::time_point start_, last_stage_ = std::chrono::steady_clock::now();
};

// -------------------------------------------------------------- builders ----

FrequencySpec make_freq(const Config& c, unsigned bits) {
  std::string s = c.str("freq", "golden");
  if (s == "golden") return FrequencySpec::golden(bits);
  if (s == "silver") return FrequencySpec::silver(bits);
  auto colon = s.find(':');
  std::string kind = s.substr(0, colon == std::string::npos ? s.size() : colon);
  std::string rest = colon == std::string::npos ? "" : s.substr(colon + 1);
  if (kind == "decimal") {
    if (rest.empty()) throw ConfigError("freq=decimal needs digits: decimal:0.123...");
    return FrequencySpec::from_decimal(rest, bits);
  }
  if (kind == "quotients") {
    std::vector<BigInt> a;
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) a.emplace_back(item);
    if (a.empty()) throw ConfigError("freq=quotients needs a list: quotients:1,2,...");
    return FrequencySpec::from_quotients(std::move(a), bits);
  }
  if (kind == "quad") {
    // quad:d:p1/q1:p2/q2 for offset + scale sqrt(d)
    std::stringstream ss(rest);
    std::string d, off, sc;
    if (!std::getline(ss, d, ':') || !std::getline(ss, off, ':') || !std::getline(ss, sc, ':')) {
      throw ConfigError("freq=quad needs quad:d:offset:scale");
    }
    return FrequencySpec::quadratic(BigInt(d), Rational(off), Rational(sc), bits);
  }
  throw ConfigError("unknown freq spec: " + s);
}

std::shared_ptr<const CFExpansion> make_cf(const Config& c, unsigned bits) {
  int depth = int(c.positive("depth", 40));
  return std::make_shared<const CFExpansion>(cf_expand(make_freq(c, bits), depth));
}

Potential make_potential(const Config& c) {
  std::string s = c.str("potential", "amo");
  if (s == "amo") return Potential::amo();
  auto colon = s.find(':');
  std::string kind = s.substr(0, colon == std::string::npos ? s.size() : colon);
  std::string rest = colon == std::string::npos ? "" : s.substr(colon + 1);
  if (kind == "amo") return Potential::amo(std::stod(rest));
  if (kind == "single") {
    std::stringstream ss(rest);
    std::string k, re, im, rho;
    if (!std::getline(ss, k, ':') || !std::getline(ss, re, ':') || !std::getline(ss, im, ':') ||
        !std::getline(ss, rho, ':')) {
      throw ConfigError("potential=single needs single:k:re:im:rho");
    }
    return Potential::single_mode(std::stoi(k), Cplx(std::stod(re), std::stod(im)),
                                  std::stod(rho));
  }
  if (kind == "file") {
    auto path = c.resolve_path(rest);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open potential file: " + path.string());
    // line 1: rho C sigma; then one "k re im" per mode, k = 0..K in order
    double rho, C, sigma;
    if (!(in >> rho >> C >> sigma)) {
      throw ConfigError("potential file " + path.string() + ": bad header (rho C sigma)");
    }
    std::vector<Cplx> coeffs;
    int k;
    double re, im;
    while (in >> k >> re >> im) {
      if (k != int(coeffs.size())) {
        throw ConfigError("potential file " + path.string() + ": modes must be 0..K in order");
      }
      coeffs.emplace_back(re, im);
    }
    if (!in.eof()) throw ConfigError("potential file " + path.string() + ": trailing garbage");
    if (coeffs.empty()) throw ConfigError("potential file " + path.string() + ": no modes");
    return Potential(std::move(coeffs), rho, C, sigma);
  }
  throw ConfigError("unknown potential spec: " + s);
}

OperatorConfig make_opconfig(const Config& c, unsigned bits) {
  OperatorConfig cfg;
  cfg.lambda = c.num("lambda", 1.0);
  cfg.freq = make_cf(c, bits);
  cfg.phase = Cplx(c.num("phase", 0.0), 0.0);
  cfg.pot = make_potential(c);
  return cfg;
}

const std::set<std::string> kFreqKeys = {"freq", "depth"};
const std::set<std::string> kOpKeys = {"freq", "depth", "lambda", "phase", "potential"};

std::set<std::string> operator+(std::set<std::string> a, const std::set<std::string>& b) {
  a.insert(b.begin(), b.end());
  return a;
}

std::vector<double> log_grid(double lo, double hi, long count) {
  if (lo <= 0.0 || hi <= lo || count < 2) {
    throw ConfigError("log grid needs 0 < lo < hi and count >= 2");
  }
  std::vector<double> g;
  for (long j = 0; j < count; ++j) {
    g.push_back(lo * std::pow(hi / lo, double(j) / double(count - 1)));
  }
  return g;
}

std::vector<double> lin_grid(double lo, double hi, long count) {
  if (count < 1) throw ConfigError("grid count must be >= 1");
  std::vector<double> g;
  for (long j = 0; j < count; ++j) {
    g.push_back(count == 1 ? lo : lo + (hi - lo) * double(j) / double(count - 1));
  }
  return g;
}

// -------------------------------------------------------------- commands ----

void cmd_cf(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kFreqKeys);
  auto cf = make_cf(c, bits);
  em.stage_done("expand");
  auto out = em.csv("cf", {"n", "a_n", "p_n", "q_n", "delta_n"});
  for (int n = 1; n <= cf->depth(); ++n) {
    out << n << "," << cf->a[n - 1].str() << "," << cf->p[n].str() << "," << cf->q[n].str()
        << ",";
    // delta[n] = ||q_n alpha|| exists only below the expansion depth
    if (n < cf->depth()) out << fmt17(double(cf->delta[std::size_t(n)].value));
    out << "\n";
  }
  json j;
  j["alpha"] = fmt17(cf->alpha_d);
  j["depth"] = cf->depth();
  json q = json::array();
  for (std::size_t i = 0; i < cf->q.size(); ++i) q.push_back(cf->q[i].str());
  j["q"] = q;
  em.write_json("cf", j);
}

void cmd_beta(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kFreqKeys);
  auto cf = make_cf(c, bits);
  auto prof = beta_estimate(*cf);
  em.stage_done("estimate");
  auto out = em.csv("beta", {"n", "profile", "running_sup"});
  for (std::size_t i = 0; i < prof.profile.size(); ++i) {
    out << (i + 1) << "," << fmt17(prof.profile[i]) << "," << fmt17(prof.running_sup[i]) << "\n";
  }
  em.write_json("beta", {{"beta_hat", prof.beta_hat}, {"depth_used", prof.depth_used}});
}

void cmd_divisors(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kFreqKeys + std::set<std::string>{"theta", "kmax"});
  auto cf = make_cf(c, bits);
  auto prof = small_divisor_profile(*cf, Real(c.num("theta", 0.0)), c.positive("kmax", 100));
  em.stage_done("scan");
  auto out = em.csv("divisors", {"k", "dist_k_alpha", "log_dist_k_alpha", "dist_two_theta",
                                 "log_dist_two_theta"});
  for (const auto& r : prof.rows) {
    out << r.k << "," << fmt17(r.dist_k_alpha) << "," << fmt17(r.log_dist_k_alpha) << ","
        << fmt17(r.dist_two_theta) << "," << fmt17(r.log_dist_two_theta) << "\n";
  }
  em.write_json("divisors", {{"beta_hat", prof.beta_hat}, {"fitted_c", prof.fitted_c}});
}

void cmd_resonances(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kFreqKeys + std::set<std::string>{"theta", "eps0", "kmax"});
  auto cf = make_cf(c, bits);
  auto seq = resonances(Real(c.num("theta", 0.0)), *cf, c.num("eps0", 1.0),
                        c.positive("kmax", 1000));
  em.stage_done("scan");
  auto out = em.csv("resonances", {"j", "n_j", "gap", "log_gap"});
  for (std::size_t j = 0; j < seq.entries.size(); ++j) {
    out << j << "," << seq.entries[j].n << "," << fmt17(double(seq.entries[j].gap)) << ","
        << fmt17(seq.entries[j].log_gap) << "\n";
  }
  em.write_json("resonances", {{"count", seq.entries.size()}});
}

// eigenvalues of a truncation block; tridiagonal fast path, dense fallback
std::vector<double> spectrum_of(const MatrixBlock& b) {
  const Eigen::Index dim = b.m.rows();
  bool tri = true;
  for (Eigen::Index i = 0; i < dim && tri; ++i) {
    if (std::abs(b.m(i, i).imag()) > 1e-14) tri = false;
    for (Eigen::Index j = i + 2; j < dim; ++j) {
      if (std::abs(b.m(i, j)) > 1e-14) {
        tri = false;
        break;
      }
    }
  }
  if (tri) {
    std::vector<double> d(static_cast<std::size_t>(dim));
    std::vector<double> e(static_cast<std::size_t>(dim) - 1);
    for (Eigen::Index i = 0; i < dim; ++i) d[std::size_t(i)] = b.m(i, i).real();
    for (Eigen::Index i = 0; i + 1 < dim; ++i) e[std::size_t(i)] = b.m(i, i + 1).real();
    return tridiag_eigenvalues(d, e);
  }
  if (dim > 2001) throw ConfigError("dense eigensolve capped at dimension 2001; reduce N");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b.m, Eigen::EigenvaluesOnly);
  return std::vector<double>(es.eigenvalues().data(), es.eigenvalues().data() + dim);
}

void cmd_spectrum(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kOpKeys + std::set<std::string>{"N", "kind"});
  auto cfg = make_opconfig(c, bits);
  long N = c.positive("N", 500);
  std::string kind = c.str("kind", "schrodinger");
  BlockKind bk;
  if (kind == "schrodinger") {
    bk = BlockKind::Schrodinger;
  } else if (kind == "dual") {
    bk = BlockKind::Dual;
  } else if (kind == "dual-scaled") {
    bk = BlockKind::DualScaled;
  } else {
    throw ConfigError("key 'kind' must be schrodinger|dual|dual-scaled, got " + kind);
  }
  auto vals = spectrum_of(truncate(cfg, Window{-N, N}, bk));
  em.stage_done("eigensolve");
  auto out = em.csv("spectrum", {"i", "E"});
  for (std::size_t i = 0; i < vals.size(); ++i) out << i << "," << fmt17(vals[i]) << "\n";
  em.write_json("spectrum", {{"count", vals.size()},
                             {"min", vals.empty() ? 0.0 : vals.front()},
                             {"max", vals.empty() ? 0.0 : vals.back()}});
}

void cmd_ids(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kOpKeys + std::set<std::string>{"N", "phase_avg", "emin", "emax", "ecount"});
  auto cfg = make_opconfig(c, bits);
  long N = c.positive("N", 1000);
  long avg = c.positive("phase_avg", 1);
  auto grid = lin_grid(c.num("emin", -3.0), c.num("emax", 3.0), c.positive("ecount", 101));
  auto out = em.csv("ids", {"E", "ids"});
  for (double E : grid) out << fmt17(E) << "," << fmt17(ids(cfg, E, int(N), int(avg))) << "\n";
  em.stage_done("count");
  em.write_json("ids", {{"rows", grid.size()}});
}

void cmd_measure(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kOpKeys +
               std::set<std::string>{"N", "sites", "emin", "emax", "ecount", "epsvals"});
  auto cfg = make_opconfig(c, bits);
  long N = c.positive("N", 1000);
  std::map<std::int64_t, Cplx> f;
  for (double s : c.list("sites", "0")) f[std::int64_t(s)] = Cplx(1.0);
  auto m = truncation_measure(cfg, f, int(N));
  em.stage_done("eigensolve");
  auto grid = lin_grid(c.num("emin", -3.0), c.num("emax", 3.0), c.positive("ecount", 61));
  auto epsvals = c.list("epsvals", "0.01,0.1");
  auto out = em.csv("measure", {"E", "eps", "mu", "below_floor"});
  bool flagged = false;
  for (double E : grid) {
    for (double eps : epsvals) {
      auto q = measure_interval(m, E, eps);
      flagged = flagged || q.below_floor;
      out << fmt17(E) << "," << fmt17(eps) << "," << fmt17(q.value) << ","
          << (q.below_floor ? 1 : 0) << "\n";
    }
  }
  if (flagged) em.warn("some intervals are below the resolution floor pi*4/N");
  em.write_json("measure", {{"total_mass", m.total_mass},
                            {"resolution_floor", m.resolution_floor()}});
}

void cmd_holder(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kOpKeys + std::set<std::string>{"N", "x", "emin", "emax", "ecount", "epsmin",
                                               "epsmax", "epscount"});
  auto cfg = make_opconfig(c, bits);
  long N = c.positive("N", 2000);
  auto energies = lin_grid(c.num("emin", -2.0), c.num("emax", 2.0), c.positive("ecount", 33));
  auto eps = log_grid(c.num("epsmin", 1e-3), c.num("epsmax", 1e-1), c.positive("epscount", 13));
  auto rep = holder_scan(cfg, energies, eps, int(N), c.num("x", 0.0));
  em.stage_done("scan");
  auto out = em.csv("holder", {"E", "eps", "mu", "ratio", "below_floor"});
  for (const auto& cell : rep.cells) {
    out << fmt17(cell.E) << "," << fmt17(cell.eps) << "," << fmt17(cell.mu) << ","
        << fmt17(cell.ratio) << "," << (cell.below_floor ? 1 : 0) << "\n";
  }
  json j;
  j["sup_ratio"] = rep.sup_ratio;
  json dec = json::object();
  for (const auto& [d, s] : rep.decade_sup) dec[std::to_string(d)] = s;
  j["decade_sup"] = dec;
  json ex = json::array();
  for (const auto& [E, g] : rep.exponents) ex.push_back({{"E", E}, {"exponent", g}});
  j["exponents"] = ex;
  em.write_json("holder", j);
}

void cmd_lyapunov(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kOpKeys + std::set<std::string>{"E", "n", "grid"});
  auto cfg = make_opconfig(c, bits);
  auto coc = Cocycle::schrodinger(cfg.pot, cfg.lambda, c.num("E", 0.0), cfg.freq);
  auto est = lyapunov_finite(coc, int(c.positive("n", 1000)), int(c.positive("grid", 16)));
  em.stage_done("iterate");
  auto out = em.csv("lyapunov", {"n", "value", "std_error", "value_2n", "subadditive_ok"});
  out << est.n << "," << fmt17(est.value) << "," << fmt17(est.std_error) << ","
      << fmt17(est.value_2n) << "," << (est.subadditive_ok ? 1 : 0) << "\n";
  em.write_json("lyapunov", {{"value", est.value},
                             {"std_error", est.std_error},
                             {"value_2n", est.value_2n},
                             {"subadditive_ok", est.subadditive_ok}});
}

void cmd_strip_growth(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kOpKeys + std::set<std::string>{"E", "eta", "ns", "strip_grid", "phase_grid"});
  auto cfg = make_opconfig(c, bits);
  auto coc = Cocycle::schrodinger(cfg.pot, cfg.lambda, c.num("E", 0.0), cfg.freq);
  std::vector<int> ns;
  for (double v : c.list("ns", "100,1000")) ns.push_back(int(v));
  auto scan = strip_growth_scan(coc, c.num("eta", 0.05), ns, int(c.positive("strip_grid", 4)),
                                int(c.positive("phase_grid", 32)));
  em.stage_done("scan");
  auto out = em.csv("strip-growth", {"n", "eps", "rate"});
  for (const auto& r : scan.rows) {
    out << r.n << "," << fmt17(r.eps) << "," << fmt17(r.rate) << "\n";
  }
  em.write_json("strip-growth", {{"headline", scan.headline}});
}

void cmd_weyl(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kOpKeys + std::set<std::string>{"re", "im", "tol"});
  auto cfg = make_opconfig(c, bits);
  Cplx z(c.num("re", 0.0), c.num("im", 0.5));
  Cplx m = weyl_m_plus(cfg, z, c.num("tol", 1e-10));
  em.stage_done("recurse");
  em.write_json("weyl", {{"z_re", z.real()},
                         {"z_im", z.imag()},
                         {"m_re", m.real()},
                         {"m_im", m.imag()},
                         {"psi", psi(m)}});
}

void cmd_pk_scan(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kOpKeys + std::set<std::string>{"x", "E", "kmax"});
  auto cfg = make_opconfig(c, bits);
  auto t = pk_epsilon_pipeline(cfg, c.num("x", 0.0), c.num("E", 0.0),
                               int(c.positive("kmax", 100)));
  em.stage_done("pipeline");
  auto out = em.csv("pk-scan", {"k", "eps", "psi", "two_eps_norm", "ratio", "stat_67",
                                "eps_step"});
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    out << r.k << "," << fmt17(r.eps) << "," << fmt17(r.psi_val) << ","
        << fmt17(r.two_eps_norm) << "," << fmt17(r.ratio) << "," << fmt17(r.stat_67) << ","
        << fmt17(i == 0 ? 1.0 : t.eps_step[i - 1]) << "\n";
  }
  em.write_json("pk-scan", {{"rows", t.rows.size()}});
}

void cmd_duality(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kOpKeys + std::set<std::string>{"N"});
  auto cfg = make_opconfig(c, bits);
  auto rep = duality_gap(cfg, int(c.positive("N", 500)));
  em.stage_done("eigensolve");
  auto out = em.csv("duality", {"side", "E"});
  for (double v : rep.spec_schrodinger) out << "schrodinger," << fmt17(v) << "\n";
  for (double v : rep.spec_dual) out << "dual," << fmt17(v) << "\n";
  em.write_json("duality", {{"hausdorff", rep.hausdorff},
                            {"count_schrodinger", rep.spec_schrodinger.size()},
                            {"count_dual", rep.spec_dual.size()}});
}

void cmd_thouless(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kOpKeys + std::set<std::string>{"E", "N", "n_L"});
  auto cfg = make_opconfig(c, bits);
  double res = thouless_residual(cfg, c.num("E", 0.0), int(c.positive("N", 1000)),
                                 int(c.positive("n_L", 1000)));
  em.stage_done("compare");
  em.write_json("thouless", {{"residual", res}});
}

void cmd_uniformity(const Config& c, Emitter& em, unsigned) {
  c.check_keys({"thetas", "M"});
  auto thetas = c.list("thetas", "0,0.25");
  double xi = uniformity_xi(thetas, int(c.positive("M", 2000)));
  em.stage_done("maximize");
  em.write_json("uniformity", {{"xi", xi}, {"k", thetas.size()}});
}

void cmd_localize(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kOpKeys + std::set<std::string>{"theta", "n_trunc", "eps0", "eps1"});
  auto cfg = make_opconfig(c, bits);
  auto rep = localization_profile(cfg, c.num("theta", 0.1), int(c.positive("n_trunc", 200)),
                                  c.num("eps0", 1.0), c.num("eps1", 0.5));
  em.stage_done("profile");
  auto out = em.csv("localize", {"eigenvalue", "center", "fitted_rate", "log_Cbar",
                                 "violations", "first_gap_empty"});
  for (const auto& v : rep.vecs) {
    out << fmt17(v.eigenvalue) << "," << v.center << "," << fmt17(v.fitted_rate) << ","
        << fmt17(v.log_Cbar) << "," << v.violations << "," << (v.first_gap_empty ? 1 : 0)
        << "\n";
  }
  json j;
  j["median_rate"] = rep.median_rate;
  j["violation_fraction"] = rep.violation_fraction;
  j["resonances"] = rep.resonance_indices;
  json regions = json::array();
  for (const auto& r : rep.regions) regions.push_back({{"lo", r.lo}, {"hi", r.hi}});
  j["regions"] = regions;
  em.write_json("localize", j);
}

void cmd_bloch_defect(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kOpKeys + std::set<std::string>{"theta", "N", "half_I"});
  auto cfg = make_opconfig(c, bits);
  long N = c.positive("N", 40);
  long hI = c.positive("half_I", N / 3);
  if (N > 400) throw ConfigError("key 'N' capped at 400 for the dense dual eigensolve");
  if (hI >= N) throw ConfigError("key 'half_I' must be smaller than N");
  double theta = c.num("theta", 0.1);
  OperatorConfig local = cfg;
  local.phase = Cplx(theta, 0.0);
  Window W{-N, N};
  auto block = truncate(local, W, BlockKind::Dual);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(block.m);
  // most center-concentrated eigenvector
  Eigen::Index pick = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    double w = std::abs(es.eigenvectors()(N, i));
    if (w > best) {
      best = w;
      pick = i;
    }
  }
  double E = es.eigenvalues()(pick);
  std::vector<Cplx> u(es.eigenvectors().col(pick).data(),
                      es.eigenvectors().col(pick).data() + W.size());
  BlochLift lift(local, theta, E, u, W, Window{-hI, hI});
  em.stage_done("lift");
  auto out = em.csv("bloch-defect", {"k", "direct_re", "direct_im", "eigen_re", "eigen_im",
                                     "abs_diff"});
  double max_diff = 0.0;
  for (const auto& [k, gd] : lift.g_hat_direct()) {
    Cplx ge = lift.g_hat_eigen().count(k) ? lift.g_hat_eigen().at(k) : Cplx(0.0);
    max_diff = std::max(max_diff, std::abs(gd - ge));
    out << k << "," << fmt17(gd.real()) << "," << fmt17(gd.imag()) << "," << fmt17(ge.real())
        << "," << fmt17(ge.imag()) << "," << fmt17(std::abs(gd - ge)) << "\n";
  }
  em.write_json("bloch-defect", {{"E", E},
                                 {"g_sup", lift.g_sup(0.01, 64)},
                                 {"max_route_diff", max_diff}});
}

void cmd_model_x(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys(kFreqKeys + std::set<std::string>{"theta", "r", "t_re", "t_im", "k"});
  auto cf = make_cf(c, bits);
  auto m = model_X(c.num("theta", 0.1), int(c.integer("r", 1)),
                   Cplx(c.num("t_re", 1.0), c.num("t_im", 0.0)), *cf,
                   int(c.positive("k", 100)));
  em.stage_done("accumulate");
  em.write_json("model-x", {{"norm", m.norm},
                            {"inv_norm_inv", m.inv_norm_inv},
                            {"shape_611", m.shape_611},
                            {"shape_610_dist", m.shape_610_dist},
                            {"shape_610_inv2", m.shape_610_inv2}});
}

int cmd_selftest(const Config& c, Emitter& em, unsigned bits) {
  c.check_keys({"potential"});
  int failures = 0;
  auto check = [&](const std::string& name, auto&& fn) {
    bool ok = false;
    std::string why;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      why = e.what();
    }
    std::cout << (ok ? "PASS " : "FAIL ") << name;
    if (!ok && !why.empty()) std::cout << " (" << why << ")";
    std::cout << "\n";
    if (!ok) ++failures;
  };

  auto cf = std::make_shared<const CFExpansion>(cf_expand(FrequencySpec::golden(bits), 20));
  check("golden-fibonacci", [&] {
    BigInt a = 1, b = 1;
    for (std::size_t i = 1; i < cf->q.size(); ++i) {
      if (cf->q[i] != b) return false;
      BigInt t = a + b;
      a = b;
      b = t;
    }
    return cf->check_gap_brackets();
  });
  check("psi-closed-form", [] {
    return std::abs(psi(Cplx(0.0, 2.0)) - 2.0) < 1e-12 &&
           std::abs(psi(Cplx(0.0, 1.0)) - 1.0) < 1e-12;
  });
  check("free-weyl", [&] {
    OperatorConfig cfg;
    cfg.lambda = 0.0;
    cfg.freq = cf;
    return std::abs(weyl_m_plus(cfg, Cplx(0.0, 2.0), 1e-10) -
                    Cplx(0.0, std::sqrt(2.0) - 1.0)) < 1e-8;
  });
  check("free-ids-half", [&] {
    OperatorConfig cfg;
    cfg.lambda = 0.0;
    cfg.freq = cf;
    return std::abs(ids(cfg, 0.0, 400, 1) - 0.5) < 1e-2;
  });
  check("measure-mass", [&] {
    OperatorConfig cfg;
    cfg.lambda = 0.4;
    cfg.freq = cf;
    auto m = truncation_measure(cfg, {{0, Cplx(1.0)}}, 200);
    return std::abs(m.total_mass - 1.0) < 1e-10;
  });
  check("det-track", [&] {
    OperatorConfig cfg;
    cfg.freq = cf;
    auto coc = Cocycle::schrodinger(Potential::amo(), 0.9, 1.3, cf);
    return std::abs(transfer(coc, Cplx(0.1), 5000).result.log_abs_det()) < 1e-9;
  });
  check("rotation-pk", [&] {
    OperatorConfig cfg;
    cfg.lambda = 0.0;
    cfg.freq = cf;
    auto seq = pk_sequence(cfg, 0.3, 0.0, 10);
    return std::abs(seq.rows.back().eps - 0.05) < 1e-12 && seq.monotone_ok && seq.trace_ok;
  });
  check("duality-1x1", [&] {
    OperatorConfig cfg;
    cfg.lambda = 0.5;
    cfg.freq = cf;
    cfg.phase = Cplx(0.2, 0.0);
    auto dual = truncate(cfg, Window{0, 0}, BlockKind::Dual);
    OperatorConfig inv = cfg;
    inv.lambda = 2.0;
    auto sch = truncate(inv, Window{0, 0}, BlockKind::Schrodinger);
    return std::abs(dual.m(0, 0) - 0.5 * sch.m(0, 0)) < 1e-14;
  });
  if (c.has("potential")) {
    check("potential-load", [&] {
      make_potential(c);
      return true;
    });
  }
  em.stage_done("checks");
  em.write_json("selftest", {{"failures", failures}});
  std::cout << (failures == 0 ? "selftest: all checks passed"
                              : "selftest: " + std::to_string(failures) + " failed")
            << "\n";
  return failures == 0 ? 0 : 3;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"quasi-periodic Schrodinger operator laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::vector<std::string> sets;
  unsigned precision = 256;
  int threads = 0;
  app.add_option("--config", config_path, "flat key=value config file");
  app.add_option("--set", sets, "override config entries, key=value");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--precision", precision, "working precision in bits");
  app.add_option("--threads", threads, "worker threads (0 = auto)");

  const std::vector<std::string> names = {
      "cf",        "beta",     "divisors",  "resonances", "spectrum",     "ids",
      "measure",   "holder",   "lyapunov",  "strip-growth", "weyl",       "pk-scan",
      "duality",   "thouless", "uniformity", "localize",  "bloch-defect", "model-x",
      "selftest"};
  for (const auto& n : names) app.add_subcommand(n)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Config cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& s : sets) cfg.set(s);
    PrecisionGuard guard(precision);
    Emitter em(out_dir, cfg, precision);

    const std::string sub = app.get_subcommands().front()->get_name();
    int rc = 0;
    if (sub == "cf") {
      cmd_cf(cfg, em, precision);
    } else if (sub == "beta") {
      cmd_beta(cfg, em, precision);
    } else if (sub == "divisors") {
      cmd_divisors(cfg, em, precision);
    } else if (sub == "resonances") {
      cmd_resonances(cfg, em, precision);
    } else if (sub == "spectrum") {
      cmd_spectrum(cfg, em, precision);
    } else if (sub == "ids") {
      cmd_ids(cfg, em, precision);
    } else if (sub == "measure") {
      cmd_measure(cfg, em, precision);
    } else if (sub == "holder") {
      cmd_holder(cfg, em, precision);
    } else if (sub == "lyapunov") {
      cmd_lyapunov(cfg, em, precision);
    } else if (sub == "strip-growth") {
      cmd_strip_growth(cfg, em, precision);
    } else if (sub == "weyl") {
      cmd_weyl(cfg, em, precision);
    } else if (sub == "pk-scan") {
      cmd_pk_scan(cfg, em, precision);
    } else if (sub == "duality") {
      cmd_duality(cfg, em, precision);
    } else if (sub == "thouless") {
      cmd_thouless(cfg, em, precision);
    } else if (sub == "uniformity") {
      cmd_uniformity(cfg, em, precision);
    } else if (sub == "localize") {
      cmd_localize(cfg, em, precision);
    } else if (sub == "bloch-defect") {
      cmd_bloch_defect(cfg, em, precision);
    } else if (sub == "model-x") {
      cmd_model_x(cfg, em, precision);
    } else if (sub == "selftest") {
      rc = cmd_selftest(cfg, em, precision);
    }
    em.finish();
    return rc;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const RationalInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DepthInsufficient& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SelectionViolated& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SupportTooWide& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const BoundaryInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const WindowTooSmall& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const StripExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const LambdaZero& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TruncationTooSmall& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
}
