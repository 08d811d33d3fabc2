#pragma once

#include <vector>

#include <Eigen/Dense>

namespace qp {

// Eigenvalues of a real symmetric tridiagonal matrix, ascending.
std::vector<double> tridiag_eigenvalues(const std::vector<double>& diag,
                                        const std::vector<double>& off);

// Eigenvalues plus selected eigenvector components. `rows` lists the matrix
// positions whose components are wanted; comp(r, i) is the r-th requested
// component of the i-th eigenvector. Vectors are computed in chunks so the
// full n x n eigenvector matrix is never materialized.
struct TridiagEigen {
  std::vector<double> vals;
  Eigen::MatrixXd comp;
};

TridiagEigen tridiag_eigs(const std::vector<double>& diag, const std::vector<double>& off,
                          const std::vector<int>& rows);

// Number of eigenvalues strictly below E (Sturm pivot count).
int sturm_count(const std::vector<double>& diag, const std::vector<double>& off, double E);

}  // namespace qp
