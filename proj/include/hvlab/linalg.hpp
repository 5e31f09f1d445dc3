#pragma once

#include <cblas.h>
#include <lapacke.h>

#include <string>
#include <vector>

#include "core.hpp"

namespace hvlab::linalg {

// Eigenvalues (ascending) of the Hermitian n x n row-major matrix A.
// zheevr throughout: the OpenBLAS zheevd returns wrong eigenvectors from n = 512 up.
inline std::vector<double> hermitian_eigenvalues(std::vector<cplx> A, int n) {
    std::vector<double> w(n);
    if (n == 0) return w;
    auto* a = reinterpret_cast<lapack_complex_double*>(A.data());
    lapack_int m = 0;
    lapack_int info = LAPACKE_zheevr(LAPACK_ROW_MAJOR, 'N', 'A', 'U', n, a, n, 0, 0, 0, 0, 0, &m, w.data(),
                                     nullptr, 1, nullptr);
    if (info != 0) throw NumericalError("zheevr failed, info=" + std::to_string(info));
    return w;
}

struct EigenSystem {
    std::vector<double> values;   // ascending
    std::vector<cplx> vectors;    // row-major, column j is the j-th eigenvector
};

inline EigenSystem hermitian_eigensystem(std::vector<cplx> A, int n) {
    EigenSystem es;
    es.values.resize(n);
    if (n == 0) return es;
    auto* a = reinterpret_cast<lapack_complex_double*>(A.data());
    es.vectors.resize(static_cast<std::size_t>(n) * n);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
    lapack_int m = 0;
    lapack_int info = LAPACKE_zheevr(LAPACK_ROW_MAJOR, 'V', 'A', 'U', n, a, n, 0, 0, 0, 0, 0, &m, es.values.data(),
                                     reinterpret_cast<lapack_complex_double*>(es.vectors.data()), n,
                                     support.data());
    if (info != 0) throw NumericalError("zheevr failed, info=" + std::to_string(info));
    return es;
}

// Singular values (descending) of the general n x n row-major matrix A.
inline std::vector<double> singular_values(std::vector<cplx> A, int n) {
    std::vector<double> s(n);
    if (n == 0) return s;
    auto* a = reinterpret_cast<lapack_complex_double*>(A.data());
    lapack_complex_double dummy[1];
    lapack_int info = LAPACKE_zgesdd(LAPACK_ROW_MAJOR, 'N', n, n, a, n, s.data(), dummy, n,
                                     dummy, n);
    if (info != 0) throw NumericalError("zgesdd failed, info=" + std::to_string(info));
    return s;
}

// Hermitian check on a row-major matrix, relative to its largest entry.
inline double hermitian_defect(const std::vector<cplx>& A, int n) {
    double amax = 0, d = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const cplx& x = A[static_cast<std::size_t>(i) * n + j];
            const cplx& y = A[static_cast<std::size_t>(j) * n + i];
            amax = std::max(amax, std::abs(x));
            d = std::max(d, std::abs(x - std::conj(y)));
        }
    return amax > 0 ? d / amax : 0.0;
}

enum class Op { none, conj_trans };

// C = op(A) * op(B) for n x n row-major matrices.
inline std::vector<cplx> matmul(const std::vector<cplx>& A, Op opa, const std::vector<cplx>& B,
                                Op opb, int n) {
    std::vector<cplx> C(static_cast<std::size_t>(n) * n);
    const cplx one(1), zero(0);
    auto op = [](Op o) { return o == Op::none ? CblasNoTrans : CblasConjTrans; };
    cblas_zgemm(CblasRowMajor, op(opa), op(opb), n, n, n, &one, A.data(), n, B.data(), n, &zero,
                C.data(), n);
    return C;
}

// V diag(f(lambda)) V^* as a row-major matrix.
template <class Fn>
std::vector<cplx> spectral_map(const EigenSystem& es, int n, Fn&& f) {
    std::vector<cplx> scaled(es.vectors.size());
    std::vector<cplx> fv(n);
    for (int k = 0; k < n; ++k) fv[k] = f(es.values[k]);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            std::size_t idx = static_cast<std::size_t>(i) * n + k;
            scaled[idx] = es.vectors[idx] * fv[k];
        }
    return matmul(scaled, Op::none, es.vectors, Op::conj_trans, n);
}

} // namespace hvlab::linalg
