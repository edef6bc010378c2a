#pragma once

// Low-level linear-algebra kernels. Each parallel kernel has a serial
// reference twin (`*_ref`) kept for testing and benchmarking. The parallel
// versions are bitwise-deterministic for any thread count: matvec assigns
// whole rows to threads and dot products reduce over fixed-size chunks in
// fixed order.

#include <cstddef>
#include <functional>
#include <vector>

namespace torsion {

struct CsrMatrix {
    int n = 0;
    std::vector<int> row_ptr;   // size n+1
    std::vector<int> col;
    std::vector<double> val;
};

void matvec(const CsrMatrix& A, const double* x, double* y);
void matvec_ref(const CsrMatrix& A, const double* x, double* y);

double dot_det(const double* a, const double* b, std::size_t n);
double dot_ref(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

struct CgResult {
    bool converged = false;
    int iterations = 0;
    double rel_residual = 0.0;
    std::vector<double> residual_history; // filled only on failure
};

// Preconditioned conjugate gradient with Jacobi (diagonal) preconditioning.
// `apply` computes y = A x for the (SPD) operator. Throws on detected
// indefiniteness; returns with converged=false after max_iter otherwise.
CgResult pcg(const std::function<void(const double*, double*)>& apply,
             const std::vector<double>& diag,
             const std::vector<double>& rhs,
             std::vector<double>& x,
             double rel_tol,
             int max_iter);

int max_threads();

} // namespace torsion
