#include "torsion/kernels.hpp"

#include "torsion/util.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace torsion {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void matvec(const CsrMatrix& A, const double* x, double* y) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < A.n; ++i) {
        double s = 0.0;
        for (int k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
            s += A.val[k] * x[A.col[k]];
        y[i] = s;
    }
}

void matvec_ref(const CsrMatrix& A, const double* x, double* y) {
    for (int i = 0; i < A.n; ++i) {
        double s = 0.0;
        for (int k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
            s += A.val[k] * x[A.col[k]];
        y[i] = s;
    }
}

namespace {
constexpr std::size_t kChunk = 1024;
}

double dot_det(const double* a, const double* b, std::size_t n) {
    const std::size_t nchunks = (n + kChunk - 1) / kChunk;
    if (nchunks <= 1) return dot_ref(a, b, n);
    std::vector<double> partial(nchunks);
#pragma omp parallel for schedule(static)
    for (long long c = 0; c < static_cast<long long>(nchunks); ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
        const std::size_t hi = lo + kChunk < n ? lo + kChunk : n;
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
        partial[c] = s;
    }
    double s = 0.0;
    for (double p : partial) s += p;
    return s;
}

double dot_ref(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        y[i] += alpha * x[i];
}

CgResult pcg(const std::function<void(const double*, double*)>& apply,
             const std::vector<double>& diag,
             const std::vector<double>& rhs,
             std::vector<double>& x,
             double rel_tol,
             int max_iter) {
    const std::size_t n = rhs.size();
    require(diag.size() == n, "pcg: diag size mismatch");
    if (x.size() != n) x.assign(n, 0.0);

    std::vector<double> r(n), z(n), p(n), q(n);
    apply(x.data(), q.data());
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];

    const double bnorm = std::sqrt(dot_det(rhs.data(), rhs.data(), n));
    CgResult res;
    if (bnorm == 0.0) {
        x.assign(n, 0.0);
        res.converged = true;
        return res;
    }

    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    p = z;
    double rz = dot_det(r.data(), z.data(), n);
    double rnorm = std::sqrt(dot_det(r.data(), r.data(), n));

    for (int it = 0; it < max_iter; ++it) {
        if (rnorm / bnorm <= rel_tol) {
            res.converged = true;
            res.iterations = it;
            res.rel_residual = rnorm / bnorm;
            res.residual_history.clear();
            return res;
        }
        apply(p.data(), q.data());
        const double pq = dot_det(p.data(), q.data(), n);
        if (pq <= 0.0)
            fail("pcg: negative curvature direction encountered (operator not SPD)");
        const double alpha = rz / pq;
        axpy(alpha, p.data(), x.data(), n);
        axpy(-alpha, q.data(), r.data(), n);
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) z[i] = r[i] / diag[i];
        const double rz_new = dot_det(r.data(), z.data(), n);
        const double beta = rz_new / rz;
        rz = rz_new;
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) p[i] = z[i] + beta * p[i];
        rnorm = std::sqrt(dot_det(r.data(), r.data(), n));
        res.residual_history.push_back(rnorm / bnorm);
    }
    res.converged = rnorm / bnorm <= rel_tol;
    res.iterations = max_iter;
    res.rel_residual = rnorm / bnorm;
    if (res.converged) res.residual_history.clear();
    return res;
}

} // namespace torsion
