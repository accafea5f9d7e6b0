#pragma once

// Hermitian eigensolves and SVD plumbing. LAPACK (zheevd/zgesdd via LAPACKE)
// does the heavy lifting; Eigen provides the containers.

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <vector>

#include "pdc/common.hpp"

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace pdc {

using Matrix = Eigen::MatrixXcd;

struct Spectrum {
    Eigen::VectorXd eigenvalues;  // descending
    Matrix eigenvectors;          // columns match eigenvalues
    double residual = 0.0;        // max_j ||A v_j - lambda_j v_j||_inf over checked pairs
};

namespace detail {

inline void check_square(const Matrix& a, const char* who) {
    if (a.rows() != a.cols()) throw ConfigError(std::string(who) + ": matrix not square");
    if (a.rows() == 0) throw ConfigError(std::string(who) + ": empty matrix");
}

}  // namespace detail

// Eigenvalues of a Hermitian matrix, descending. Values-only fast path.
inline Eigen::VectorXd hermitian_eigenvalues(const Matrix& a) {
    detail::check_square(a, "hermitian_eigenvalues");
    lapack_int n = lapack_int(a.rows());
    Matrix work = a;
    Eigen::VectorXd w(n);
    lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'L', n,
                                     work.data(), n, w.data());
    if (info != 0) throw NotAState("zheevd failed, info=" + std::to_string(info));
    return w.reverse();
}

// Full spectrum with eigenvectors. The residual is evaluated on the extremal
// eigenpairs (cheap) unless full_residual is requested.
inline Spectrum hermitian_spectrum(const Matrix& a, bool full_residual = false) {
    detail::check_square(a, "hermitian_spectrum");
    lapack_int n = lapack_int(a.rows());
    Matrix vecs = a;
    Eigen::VectorXd w(n);
    lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                                     vecs.data(), n, w.data());
    if (info != 0) throw NotAState("zheevd failed, info=" + std::to_string(info));

    Spectrum sp;
    sp.eigenvalues.resize(n);
    sp.eigenvectors.resize(n, n);
    for (lapack_int j = 0; j < n; ++j) {  // ascending -> descending
        sp.eigenvalues[j] = w[n - 1 - j];
        sp.eigenvectors.col(j) = vecs.col(n - 1 - j);
    }
    std::vector<lapack_int> probe;
    if (full_residual || n <= 32) {
        probe.resize(size_t(n));
        for (lapack_int j = 0; j < n; ++j) probe[size_t(j)] = j;
    } else {
        for (lapack_int j = 0; j < 8; ++j) probe.push_back(j);            // largest
        for (lapack_int j = n - 8; j < n; ++j) probe.push_back(j);        // most negative
    }
    double res = 0.0;
    for (lapack_int j : probe) {
        Eigen::VectorXcd r =
            a * sp.eigenvectors.col(j) - sp.eigenvalues[j] * sp.eigenvectors.col(j);
        res = std::max(res, r.cwiseAbs().maxCoeff());
    }
    sp.residual = res;
    return sp;
}

// Singular values, descending.
inline Eigen::VectorXd singular_values(const Matrix& a) {
    if (a.rows() == 0 || a.cols() == 0) throw ConfigError("singular_values: empty matrix");
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues();
}

}  // namespace pdc
