#pragma once

// P1 finite elements for the torsion problem -Lap(u) = 1 with Robin
// (du/dnu + beta u = 0) or Neumann (du/dnu = -|Omega|/P(Omega), mean-zero)
// boundary conditions.
//
// Assembly walks mirror pairs of elements and boundary edges in a fixed
// order and lays out lower-half matrix rows as exact mirror images of their
// upper partners, so every CG iterate (and hence the solution) is bitwise
// symmetric under the mesh reflection map.

#include "torsion/kernels.hpp"
#include "torsion/mesh.hpp"

#include <memory>
#include <vector>

namespace torsion {

enum class BcMode { robin, neumann };

struct RobinProblem {
    std::shared_ptr<const TriMesh> mesh;
    double beta = 1.0;
    BcMode mode = BcMode::robin;
};

struct AssembledSystem {
    CsrMatrix A;              // stiffness (+ beta * boundary mass in robin mode)
    std::vector<double> load;
    std::vector<double> diag;
    std::vector<double> mass; // m_i = integral of the hat function phi_i
    double area = 0;
    double perimeter = 0;
    double sigma = 0;         // rank-one augmentation weight (neumann mode)
};

AssembledSystem assemble(const RobinProblem& problem);
// serial reference of the element-matrix kernel (the parallel path must
// match it bitwise)
AssembledSystem assemble_ref(const RobinProblem& problem);

struct Solution {
    std::shared_ptr<const TriMesh> mesh;
    double beta = 0;
    BcMode mode = BcMode::robin;
    std::vector<double> u;
    std::vector<Vec2> grad; // recovered nodal gradient
    double energy = 0;      // J_beta evaluated from the discrete form
    int cg_iterations = 0;
    double cg_residual = 0;
};

Solution solve(const RobinProblem& problem);

Vec2 element_gradient(const TriMesh& mesh, const std::vector<double>& u, int t);
std::vector<Vec2> recover_gradient(const TriMesh& mesh, const std::vector<double>& u);

// ------------------------------------------------------------- disk oracle

// u = R/(2 beta) + (R^2 - |x|^2)/4 solves the Robin torsion problem on the
// disk of radius R exactly.
struct DiskOracle {
    double beta = 1;
    double R = 1;
    double value(Vec2 p) const { return R / (2 * beta) + (R * R - dot(p, p)) / 4; }
    Vec2 gradient(Vec2 p) const { return {-p.x / 2, -p.y / 2}; }
    // Hessian is -I/2
    double energy() const {
        const double A = pi * R * R;
        return -(A / 2) * (R / (2 * beta) + R * R / 8);
    }
};

// ------------------------------------------------------- patch derivatives

class NodeSearch {
public:
    explicit NodeSearch(const TriMesh& mesh);
    // node ids within the disk, ascending
    std::vector<int> within(Vec2 center, double radius) const;

private:
    const TriMesh& mesh_;
    int nx_ = 0, ny_ = 0;
    Vec2 lo_, hi_;
    std::vector<std::vector<int>> buckets_;
};

struct PatchFit {
    Vec2 grad;                       // fitted gradient at the center
    double hxx = 0, hxy = 0, hyy = 0; // fitted Hessian
    int n_nodes = 0;
};

// Least-squares quadratic fit of nodal values on the disk patch; needs at
// least 12 nodes; throws (naming the point) on rank deficiency.
PatchFit fit_quadratic_patch(const TriMesh& mesh, const std::vector<double>& u,
                             const NodeSearch& search, Vec2 center, double radius);

// max over boundary nodes of |nu . g + beta u|
double robin_boundary_residual(const Solution& sol);

// --------------------------------------------------------- convergence

struct ConvergenceStudy {
    std::vector<double> hs, linf, energy_err, bgrad_err;
    std::vector<double> energies;
    double linf_order = 0, energy_order = 0, bgrad_order = 0;
};

// Red-refinement study against the disk oracle starting from mesh size h0.
ConvergenceStudy disk_convergence_study(double beta, double h0, int levels);

} // namespace torsion
