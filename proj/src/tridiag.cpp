#include "qplab/tridiag.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <lapacke.h>

#include "qplab/errors.hpp"

namespace qp {

std::vector<double> tridiag_eigenvalues(const std::vector<double>& diag,
                                        const std::vector<double>& off) {
  auto d = diag;
  auto e = off;
  if (e.size() + 1 != d.size()) throw ConfigError("tridiag: off-diagonal size mismatch");
  lapack_int info = LAPACKE_dsterf(lapack_int(d.size()), d.data(), e.data());
  if (info != 0) throw NoConvergence("dsterf failed to converge");
  return d;
}

TridiagEigen tridiag_eigs(const std::vector<double>& diag, const std::vector<double>& off,
                          const std::vector<int>& rows) {
  const lapack_int n = lapack_int(diag.size());
  if (off.size() + 1 != diag.size()) throw ConfigError("tridiag: off-diagonal size mismatch");

  TridiagEigen out;
  out.vals.reserve(diag.size());
  out.comp.resize(Eigen::Index(rows.size()), n);

  const lapack_int chunk = 512;
  std::vector<double> w(diag.size());
  std::vector<double> z(std::size_t(n) * chunk);
  std::vector<lapack_int> isuppz(2 * std::size_t(chunk));
  for (lapack_int il = 1; il <= n; il += chunk) {
    lapack_int iu = std::min(n, il + chunk - 1);
    auto d = diag;  // dstemr clobbers its input
    auto e = off;
    e.push_back(0.0);
    lapack_int m = 0;
    lapack_int tryrac = 1;
    lapack_int info = LAPACKE_dstemr(LAPACK_COL_MAJOR, 'V', 'I', n, d.data(), e.data(), 0.0,
                                     0.0, il, iu, &m, w.data(), z.data(), n, iu - il + 1,
                                     isuppz.data(), &tryrac);
    if (info != 0) throw NoConvergence("dstemr failed to converge");
    for (lapack_int i = 0; i < m; ++i) {
      out.vals.push_back(w[std::size_t(i)]);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        out.comp(Eigen::Index(r), il - 1 + i) = z[std::size_t(i) * n + rows[r]];
      }
    }
  }
  return out;
}

int sturm_count(const std::vector<double>& diag, const std::vector<double>& off, double E) {
  int count = 0;
  double p = 1.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    double o2 = i == 0 ? 0.0 : off[i - 1] * off[i - 1];
    p = (diag[i] - E) - o2 / p;
    if (p == 0.0) p = -1e-300;  // perturb exact hits off the pivot
    if (p < 0.0) ++count;
  }
  return count;
}

}  // namespace qp
