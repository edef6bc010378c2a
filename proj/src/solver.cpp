#include "torsion/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace torsion {

namespace {

struct ElementMatrices {
    // per-triangle 3x3 stiffness (row-major) and the shared load value |T|/3
    std::vector<double> ke;
    std::vector<double> load;
};

// P1 stiffness on one triangle; fixed expression structure so that mirrored
// triangles produce bitwise-equal entries
void element_stiffness(const TriMesh& mesh, int t, double* ke, double* load) {
    const auto& T = mesh.tris[t];
    const Vec2 p1 = mesh.nodes[T[0]], p2 = mesh.nodes[T[1]], p3 = mesh.nodes[T[2]];
    const double A = 0.5 * ((p2.x - p1.x) * (p3.y - p1.y) - (p3.x - p1.x) * (p2.y - p1.y));
    const double b[3] = {p2.y - p3.y, p3.y - p1.y, p1.y - p2.y};
    const double c[3] = {p3.x - p2.x, p1.x - p3.x, p2.x - p1.x};
    const double inv = 1.0 / (4.0 * A);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) ke[3 * i + j] = (b[i] * b[j] + c[i] * c[j]) * inv;
    *load = A / 3.0;
}

ElementMatrices compute_element_matrices(const TriMesh& mesh, bool parallel) {
    ElementMatrices em;
    const int nt = mesh.n_tris();
    em.ke.resize(9 * static_cast<std::size_t>(nt));
    em.load.resize(nt);
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < nt; ++t)
            element_stiffness(mesh, t, &em.ke[9 * static_cast<std::size_t>(t)], &em.load[t]);
    } else {
        for (int t = 0; t < nt; ++t)
            element_stiffness(mesh, t, &em.ke[9 * static_cast<std::size_t>(t)], &em.load[t]);
    }
    return em;
}

AssembledSystem assemble_impl(const RobinProblem& problem, bool parallel) {
    const TriMesh& mesh = *problem.mesh;
    const int n = mesh.n_nodes();
    const bool robin = problem.mode == BcMode::robin;
    if (robin)
        require(problem.beta > 0, "assemble: robin mode requires beta > 0");

    // symbolic pattern: upper rows sorted ascending, lower rows laid out as
    // the exact mirror of their upper partner
    std::vector<std::vector<int>> cols(n);
    auto touch = [&](int i, int j) { cols[i].push_back(j); };
    for (const auto& T : mesh.tris)
        for (int a = 0; a < 3; ++a)
            for (int bb = 0; bb < 3; ++bb) touch(T[a], T[bb]);
    for (const auto& be : mesh.bedges) {
        touch(be.a, be.a);
        touch(be.a, be.b);
        touch(be.b, be.a);
        touch(be.b, be.b);
    }
    for (int i = 0; i < n; ++i) {
        if (mesh.nodes[i].y < 0) continue;
        auto& v = cols[i];
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    for (int i = 0; i < n; ++i) {
        if (mesh.nodes[i].y >= 0) continue;
        const auto& up = cols[mesh.reflect[i]];
        auto& v = cols[i];
        v.resize(up.size());
        for (std::size_t k = 0; k < up.size(); ++k) v[k] = mesh.reflect[up[k]];
    }

    AssembledSystem sys;
    sys.A.n = n;
    sys.A.row_ptr.assign(n + 1, 0);
    for (int i = 0; i < n; ++i)
        sys.A.row_ptr[i + 1] = sys.A.row_ptr[i] + static_cast<int>(cols[i].size());
    sys.A.col.reserve(sys.A.row_ptr[n]);
    for (int i = 0; i < n; ++i)
        sys.A.col.insert(sys.A.col.end(), cols[i].begin(), cols[i].end());
    sys.A.val.assign(sys.A.row_ptr[n], 0.0);

    auto slot = [&](int i, int j) {
        for (int k = sys.A.row_ptr[i]; k < sys.A.row_ptr[i + 1]; ++k)
            if (sys.A.col[k] == j) return k;
        fail("assemble: missing matrix slot");
        return -1;
    };

    const ElementMatrices em = compute_element_matrices(mesh, parallel);
    sys.load.assign(n, 0.0);
    sys.mass.assign(n, 0.0);
    for (int t = 0; t < mesh.n_tris(); ++t) {
        const auto& T = mesh.tris[t];
        const double* ke = &em.ke[9 * static_cast<std::size_t>(t)];
        require(em.load[t] > 0, "assemble: zero-area triangle");
        for (int a = 0; a < 3; ++a) {
            for (int bb = 0; bb < 3; ++bb) sys.A.val[slot(T[a], T[bb])] += ke[3 * a + bb];
            sys.load[T[a]] += em.load[t];
            sys.mass[T[a]] += em.load[t];
        }
        sys.area += 3 * em.load[t];
    }

    // boundary terms: 2-point Gauss on each edge (exact for the P1 products)
    static const double g1 = 0.5 * (1.0 - 1.0 / std::sqrt(3.0));
    static const double g2 = 0.5 * (1.0 + 1.0 / std::sqrt(3.0));
    std::vector<double> bmass(n, 0.0); // integral of phi_i over the boundary
    for (const auto& be : mesh.bedges) {
        const double len = std::hypot(mesh.nodes[be.b].x - mesh.nodes[be.a].x,
                                      mesh.nodes[be.b].y - mesh.nodes[be.a].y);
        const double w = 0.5 * len;
        // N_a(g) = 1-g, N_b(g) = g with equal Gauss weights 1/2 each
        const double maa = w * ((1 - g1) * (1 - g1) + (1 - g2) * (1 - g2));
        const double mab = w * ((1 - g1) * g1 + (1 - g2) * g2);
        const double mbb = w * (g1 * g1 + g2 * g2);
        if (robin) {
            sys.A.val[slot(be.a, be.a)] += problem.beta * maa;
            sys.A.val[slot(be.a, be.b)] += problem.beta * mab;
            sys.A.val[slot(be.b, be.a)] += problem.beta * mab;
            sys.A.val[slot(be.b, be.b)] += problem.beta * mbb;
        }
        bmass[be.a] += w * ((1 - g1) + (1 - g2));
        bmass[be.b] += w * (g1 + g2);
        sys.perimeter += len;
    }

    if (!robin) {
        const double flux = sys.area / sys.perimeter;
        for (int i = 0; i < n; ++i) sys.load[i] -= flux * bmass[i];
        double trace = 0;
        for (int i = 0; i < n; ++i) trace += sys.A.val[slot(i, i)];
        const double mm = dot_det(sys.mass.data(), sys.mass.data(), sys.mass.size());
        sys.sigma = trace / mm;
    }

    sys.diag.resize(n);
    for (int i = 0; i < n; ++i) {
        double d = sys.A.val[slot(i, i)];
        if (!robin) d += sys.sigma * sys.mass[i] * sys.mass[i];
        sys.diag[i] = d;
    }
    return sys;
}

} // namespace

AssembledSystem assemble(const RobinProblem& problem) { return assemble_impl(problem, true); }
AssembledSystem assemble_ref(const RobinProblem& problem) {
    return assemble_impl(problem, false);
}

Vec2 element_gradient(const TriMesh& mesh, const std::vector<double>& u, int t) {
    const auto& T = mesh.tris[t];
    const Vec2 p1 = mesh.nodes[T[0]], p2 = mesh.nodes[T[1]], p3 = mesh.nodes[T[2]];
    const double A = 0.5 * ((p2.x - p1.x) * (p3.y - p1.y) - (p3.x - p1.x) * (p2.y - p1.y));
    const double b[3] = {p2.y - p3.y, p3.y - p1.y, p1.y - p2.y};
    const double c[3] = {p3.x - p2.x, p1.x - p3.x, p2.x - p1.x};
    Vec2 g{0, 0};
    for (int k = 0; k < 3; ++k) {
        g.x += u[T[k]] * b[k];
        g.y += u[T[k]] * c[k];
    }
    return {g.x / (2 * A), g.y / (2 * A)};
}

std::vector<Vec2> recover_gradient(const TriMesh& mesh, const std::vector<double>& u) {
    const int n = mesh.n_nodes();
    std::vector<Vec2> g(n, {0, 0});
    std::vector<double> wsum(n, 0.0);
    for (int t = 0; t < mesh.n_tris(); ++t) {
        const double w = mesh.tri_area(t);
        const Vec2 gt = element_gradient(mesh, u, t);
        for (int v : mesh.tris[t]) {
            g[v] = g[v] + w * gt;
            wsum[v] += w;
        }
    }
    for (int i = 0; i < n; ++i) g[i] = (1.0 / wsum[i]) * g[i];
    return g;
}

Solution solve(const RobinProblem& problem) {
    const TriMesh& mesh = *problem.mesh;
    const AssembledSystem sys = assemble(problem);
    const int n = mesh.n_nodes();

    std::function<void(const double*, double*)> apply;
    if (problem.mode == BcMode::robin) {
        apply = [&sys](const double* x, double* y) { matvec(sys.A, x, y); };
    } else {
        apply = [&sys, n](const double* x, double* y) {
            matvec(sys.A, x, y);
            const double alpha =
                sys.sigma * dot_det(sys.mass.data(), x, static_cast<std::size_t>(n));
            axpy(alpha, sys.mass.data(), y, static_cast<std::size_t>(n));
        };
    }

    std::vector<double> u(n, 0.0);
    const CgResult cg = pcg(apply, sys.diag, sys.load, u, 1e-10, 10 * n);
    if (!cg.converged) {
        std::string hist;
        const std::size_t m = cg.residual_history.size();
        for (std::size_t k = m > 8 ? m - 8 : 0; k < m; ++k)
            hist += " " + fmt17(cg.residual_history[k]);
        fail("solve: CG did not converge within " + std::to_string(10 * n) +
             " iterations; trailing relative residuals:" + hist);
    }

    Solution sol;
    sol.mesh = problem.mesh;
    sol.beta = problem.beta;
    sol.mode = problem.mode;
    sol.u = std::move(u);
    sol.grad = recover_gradient(mesh, sol.u);
    sol.cg_iterations = cg.iterations;
    sol.cg_residual = cg.rel_residual;
    std::vector<double> Au(n);
    matvec(sys.A, sol.u.data(), Au.data());
    sol.energy = 0.5 * dot_det(sol.u.data(), Au.data(), sol.u.size()) -
                 dot_det(sys.load.data(), sol.u.data(), sol.u.size());
    return sol;
}

// ------------------------------------------------------------ node search

NodeSearch::NodeSearch(const TriMesh& mesh) : mesh_(mesh) {
    lo_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    hi_ = {-lo_.x, -lo_.y};
    for (const auto& p : mesh.nodes) {
        lo_.x = std::min(lo_.x, p.x);
        lo_.y = std::min(lo_.y, p.y);
        hi_.x = std::max(hi_.x, p.x);
        hi_.y = std::max(hi_.y, p.y);
    }
    const int target =
        std::clamp(static_cast<int>(std::sqrt(mesh.n_nodes() / 2.0)), 8, 512);
    nx_ = ny_ = target;
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (int i = 0; i < mesh.n_nodes(); ++i) {
        const int bx = std::clamp(
            static_cast<int>((mesh.nodes[i].x - lo_.x) / (hi_.x - lo_.x) * nx_), 0, nx_ - 1);
        const int by = std::clamp(
            static_cast<int>((mesh.nodes[i].y - lo_.y) / (hi_.y - lo_.y) * ny_), 0, ny_ - 1);
        buckets_[static_cast<std::size_t>(by) * nx_ + bx].push_back(i);
    }
}

std::vector<int> NodeSearch::within(Vec2 center, double radius) const {
    std::vector<int> out;
    const double dx = (hi_.x - lo_.x) / nx_, dy = (hi_.y - lo_.y) / ny_;
    const int i0 = std::clamp(static_cast<int>((center.x - radius - lo_.x) / dx), 0, nx_ - 1);
    const int i1 = std::clamp(static_cast<int>((center.x + radius - lo_.x) / dx), 0, nx_ - 1);
    const int j0 = std::clamp(static_cast<int>((center.y - radius - lo_.y) / dy), 0, ny_ - 1);
    const int j1 = std::clamp(static_cast<int>((center.y + radius - lo_.y) / dy), 0, ny_ - 1);
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i)
            for (int id : buckets_[static_cast<std::size_t>(j) * nx_ + i])
                if (dist(mesh_.nodes[id], center) <= radius) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
}

PatchFit fit_quadratic_patch(const TriMesh& mesh, const std::vector<double>& u,
                             const NodeSearch& search, Vec2 center, double radius) {
    const auto ids = search.within(center, radius);
    if (ids.size() < 12)
        fail("patch fit: fewer than 12 nodes within radius " + fmt17(radius) + " of (" +
             fmt17(center.x) + ", " + fmt17(center.y) + ")");

    double G[6][6] = {};
    double rhs[6] = {};
    for (int id : ids) {
        const double X = (mesh.nodes[id].x - center.x) / radius;
        const double Y = (mesh.nodes[id].y - center.y) / radius;
        const double phi[6] = {1.0, X, Y, X * X, X * Y, Y * Y};
        for (int a = 0; a < 6; ++a) {
            for (int b = 0; b < 6; ++b) G[a][b] += phi[a] * phi[b];
            rhs[a] += phi[a] * u[id];
        }
    }
    // Cholesky with a rank guard
    double L[6][6] = {};
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = G[i][j];
            for (int k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
            if (i == j) {
                if (s <= 1e-10 * G[i][i] || !(G[i][i] > 0))
                    fail("patch fit: rank-deficient patch at (" + fmt17(center.x) + ", " +
                         fmt17(center.y) + ")");
                L[i][i] = std::sqrt(s);
            } else {
                L[i][j] = s / L[j][j];
            }
        }
    }
    double z[6], coef[6];
    for (int i = 0; i < 6; ++i) {
        double s = rhs[i];
        for (int k = 0; k < i; ++k) s -= L[i][k] * z[k];
        z[i] = s / L[i][i];
    }
    for (int i = 5; i >= 0; --i) {
        double s = z[i];
        for (int k = i + 1; k < 6; ++k) s -= L[k][i] * coef[k];
        coef[i] = s / L[i][i];
    }

    PatchFit fit;
    fit.n_nodes = static_cast<int>(ids.size());
    fit.grad = {coef[1] / radius, coef[2] / radius};
    fit.hxx = 2 * coef[3] / (radius * radius);
    fit.hxy = coef[4] / (radius * radius);
    fit.hyy = 2 * coef[5] / (radius * radius);
    return fit;
}

double robin_boundary_residual(const Solution& sol) {
    const TriMesh& mesh = *sol.mesh;
    require(mesh.domain != nullptr, "robin_boundary_residual: mesh has no domain");
    double worst = 0;
    const auto mask = mesh.boundary_node_mask();
    for (int i = 0; i < mesh.n_nodes(); ++i) {
        if (!mask[i]) continue;
        const BoundaryFrame f = mesh.domain->boundary_frame(mesh.nodes[i]);
        worst = std::max(worst, std::abs(dot(f.nu, sol.grad[i]) + sol.beta * sol.u[i]));
    }
    return worst;
}

// ------------------------------------------------------------- convergence

namespace {
double ls_order(const std::vector<double>& hs, const std::vector<double>& errs) {
    // least-squares slope of log(err) against log(h)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = static_cast<int>(hs.size());
    for (int i = 0; i < n; ++i) {
        const double x = std::log(hs[i]), y = std::log(std::max(errs[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}
} // namespace

ConvergenceStudy disk_convergence_study(double beta, double h0, int levels) {
    require(levels >= 2, "convergence study: need at least 2 levels");
    const DiskOracle oracle{beta, 1.0};
    ConvergenceStudy st;
    auto dom = make_disk(1.0);
    TriMesh mesh = mesh_domain(dom, h0);
    for (int lev = 0; lev < levels; ++lev) {
        auto mp = std::make_shared<const TriMesh>(std::move(mesh));
        const Solution sol = solve({mp, beta, BcMode::robin});
        double linf = 0, bgrad = 0;
        for (int i = 0; i < mp->n_nodes(); ++i)
            linf = std::max(linf, std::abs(sol.u[i] - oracle.value(mp->nodes[i])));
        const auto mask = mp->boundary_node_mask();
        for (int i = 0; i < mp->n_nodes(); ++i) {
            if (!mask[i]) continue;
            bgrad = std::max(bgrad, norm(sol.grad[i] - oracle.gradient(mp->nodes[i])));
        }
        st.hs.push_back(mp->h);
        st.linf.push_back(linf);
        st.energy_err.push_back(std::abs(sol.energy - oracle.energy()));
        st.bgrad_err.push_back(bgrad);
        st.energies.push_back(sol.energy);
        if (lev + 1 < levels) mesh = refine(*mp);
    }
    st.linf_order = ls_order(st.hs, st.linf);
    st.energy_order = ls_order(st.hs, st.energy_err);
    st.bgrad_order = ls_order(st.hs, st.bgrad_err);
    return st;
}

} // namespace torsion
