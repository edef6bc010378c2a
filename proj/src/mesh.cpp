#include "torsion/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

namespace torsion {

namespace {

struct PairHash {
    std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& k) const {
        return std::hash<std::int64_t>()(k.first * 1000003 + k.second);
    }
};
using EdgeKey = std::pair<std::int64_t, std::int64_t>;
EdgeKey edge_key(int a, int b) {
    return a < b ? EdgeKey{a, b} : EdgeKey{b, a};
}

std::int64_t bits(double v) { return std::bit_cast<std::int64_t>(v); }

// accumulates the upper half; the lower half is generated as its mirror
struct Builder {
    std::vector<Vec2> nodes;
    std::vector<int> reflect;
    std::vector<std::array<int, 3>> upper_tris;
    std::vector<std::pair<int, int>> upper_bedges;

    int axis_node(double x) {
        nodes.push_back({x, 0.0});
        reflect.push_back(static_cast<int>(nodes.size()) - 1);
        return static_cast<int>(nodes.size()) - 1;
    }
    int pair_node(double x, double y) {
        const int u = static_cast<int>(nodes.size());
        nodes.push_back({x, y});
        nodes.push_back({x, -y});
        reflect.push_back(u + 1);
        reflect.push_back(u);
        return u;
    }

    TriMesh finalize(DomainPtr domain) const;
};

void assign_tags_and_normals(TriMesh& m) {
    std::unordered_map<EdgeKey, int, PairHash> owner;
    for (int t = 0; t < m.n_tris(); ++t) {
        const auto& T = m.tris[t];
        for (int e = 0; e < 3; ++e) owner[edge_key(T[e], T[(e + 1) % 3])] = t;
    }
    for (auto& be : m.bedges) {
        const Vec2 pa = m.nodes[be.a], pb = m.nodes[be.b];
        const Vec2 mid = 0.5 * (pa + pb);
        if (m.domain) be.tag = m.domain->classify_boundary(mid);
        const auto it = owner.find(edge_key(be.a, be.b));
        require(it != owner.end(), "mesh: boundary edge without a triangle");
        const auto& T = m.tris[it->second];
        int opp = T[0];
        for (int v : T)
            if (v != be.a && v != be.b) opp = v;
        Vec2 n = normalized({pb.y - pa.y, pa.x - pb.x});
        if (dot(n, m.nodes[opp] - mid) > 0) n = {-n.x, -n.y};
        be.nu = n;
    }
}

double compute_h(const TriMesh& m) {
    double h = 0;
    for (int t = 0; t < m.n_tris(); ++t) h = std::max(h, m.tri_diameter(t));
    return h;
}

TriMesh Builder::finalize(DomainPtr domain) const {
    TriMesh m;
    m.nodes = nodes;
    m.reflect = reflect;
    m.domain = std::move(domain);
    m.tris.reserve(2 * upper_tris.size());
    for (const auto& T : upper_tris) {
        m.tris.push_back(T);
        m.tris.push_back({reflect[T[0]], reflect[T[2]], reflect[T[1]]});
    }
    m.bedges.reserve(2 * upper_bedges.size());
    for (const auto& [a, b] : upper_bedges) {
        m.bedges.push_back({a, b, 0, {}});
        m.bedges.push_back({reflect[a], reflect[b], 0, {}});
    }
    assign_tags_and_normals(m);
    m.h = compute_h(m);
    m.validate();
    return m;
}

// merge-triangulates the strip between two vertical node chains (ids ordered
// bottom to top); either chain may be a single vertex
void triangulate_strip(const std::vector<Vec2>& nodes, const std::vector<int>& L,
                       const std::vector<int>& R,
                       std::vector<std::array<int, 3>>& out) {
    std::size_t i = 0, j = 0;
    while (i + 1 < L.size() || j + 1 < R.size()) {
        bool advance_left;
        if (i + 1 >= L.size())
            advance_left = false;
        else if (j + 1 >= R.size())
            advance_left = true;
        else
            advance_left = nodes[L[i + 1]].y <= nodes[R[j + 1]].y;
        if (advance_left) {
            out.push_back({L[i], R[j], L[i + 1]});
            ++i;
        } else {
            out.push_back({L[i], R[j], R[j + 1]});
            ++j;
        }
    }
}

TriMesh mesh_profile(std::shared_ptr<const ProfileDomain> dom, double h) {
    const double l = dom->half_width();
    const auto poly = dom->upper_polyline(4096);
    const int np = static_cast<int>(poly.size());
    std::vector<double> cum(np, 0.0);
    double phi_max = 0;
    for (int i = 1; i < np; ++i) {
        cum[i] = cum[i - 1] + dist(poly[i], poly[i - 1]);
        phi_max = std::max(phi_max, poly[i].y);
    }
    const double S = cum.back();
    require(h < S / 6, "mesh_domain: h_target too large for this domain");

    const int nst = std::max(6, static_cast<int>(std::ceil(S / h)));
    std::vector<double> xs;
    xs.push_back(-l);
    int seg = 0;
    for (int k = 1; k < nst; ++k) {
        const double target = S * k / nst;
        while (seg < np - 2 && cum[seg + 1] < target) ++seg;
        const double f = (target - cum[seg]) / std::max(1e-300, cum[seg + 1] - cum[seg]);
        const double x = poly[seg].x + f * (poly[seg + 1].x - poly[seg].x);
        if (x - xs.back() > 1e-12 * std::max(1.0, l) && l - x > 1e-12 * std::max(1.0, l))
            xs.push_back(x);
    }
    xs.push_back(l);
    const int ns = static_cast<int>(xs.size());

    Builder bld;
    std::vector<std::vector<int>> chains(ns);
    for (int k = 0; k < ns; ++k) {
        if (k == 0 || k == ns - 1) {
            chains[k] = {bld.axis_node(xs[k])};
            continue;
        }
        const double phi = dom->profile(xs[k]);
        require(phi > 0, "mesh_domain: profile not positive at an interior station");
        const int rows = std::max(1, static_cast<int>(std::llround(phi / h)));
        std::vector<int> chain;
        chain.push_back(bld.axis_node(xs[k]));
        for (int j = 1; j <= rows; ++j) chain.push_back(bld.pair_node(xs[k], phi * j / rows));
        chains[k] = chain;
    }
    for (int k = 0; k + 1 < ns; ++k)
        triangulate_strip(bld.nodes, chains[k], chains[k + 1], bld.upper_tris);
    for (int k = 0; k + 1 < ns; ++k)
        bld.upper_bedges.push_back({chains[k].back(), chains[k + 1].back()});
    return bld.finalize(dom);
}

// nodes on [0, len] with spacing <= h; geometric grading (ratio q, L rings)
// toward whichever ends are flagged
std::vector<double> line_nodes(double len, double h, double q, int L, bool grade_start,
                               bool grade_end) {
    std::vector<double> start_sp, end_sp;
    for (int i = L; i >= 1; --i) {
        const double s = h * std::pow(q, i);
        require(s > 1e-12 * std::max(1.0, len), "mesh_domain: grading is degenerate");
        if (grade_start) start_sp.push_back(s);
        if (grade_end) end_sp.push_back(s);
    }
    double graded = 0;
    for (double s : start_sp) graded += s;
    for (double s : end_sp) graded += s;
    const double middle = len - graded;
    require(middle > 0.25 * h, "mesh_domain: h_target too large for this feature");
    const int nun = std::max(1, static_cast<int>(std::ceil(middle / h)));
    const double du = middle / nun;

    std::vector<double> out;
    out.push_back(0.0);
    double x = 0;
    for (double s : start_sp) out.push_back(x += s);
    for (int i = 0; i < nun; ++i) out.push_back(x += du);
    for (std::size_t i = 0; i < end_sp.size(); ++i)
        out.push_back(x += end_sp[end_sp.size() - 1 - i]);
    out.back() = len;
    return out;
}

// block-structured mesh of the cross (union of axis-aligned rectangles) with
// geometric grading toward the four reentrant corners
TriMesh mesh_cross_blocks(double a, double b, double h, Grading g, DomainPtr domain) {
    require(g.q > 0 && g.q < 1, "mesh_domain: grading ratio must lie in (0,1)");
    require(g.levels >= 0, "mesh_domain: grading levels must be nonnegative");
    require(h <= std::min({1.0, a - 1, b - 1}),
            "mesh_domain: h_target too large to resolve the cross arms");

    // canonical distributions; shared so interface nodes match bitwise
    const auto d01 = line_nodes(1.0, h, g.q, g.levels, false, true); // [0,1], graded at 1
    std::vector<double> dx_center;
    for (std::size_t i = d01.size(); i-- > 1;) dx_center.push_back(-d01[i]);
    for (double v : d01) dx_center.push_back(v);
    const auto arma = line_nodes(a - 1, h, g.q, g.levels, true, false);
    std::vector<double> arm_x; // [1, a]
    for (double v : arma) arm_x.push_back(1 + v);
    const auto armb = line_nodes(b - 1, h, g.q, g.levels, true, false);
    std::vector<double> arm_y; // [1, b]
    for (double v : armb) arm_y.push_back(1 + v);
    std::vector<double> arm_x_neg; // [-a, -1]
    for (std::size_t i = arm_x.size(); i-- > 0;) arm_x_neg.push_back(-arm_x[i]);

    Builder bld;
    std::unordered_map<EdgeKey, int, PairHash> lut;
    auto node = [&](double x, double y) {
        const EdgeKey k{bits(x), bits(y)};
        const auto it = lut.find(k);
        if (it != lut.end()) return it->second;
        const int id = y == 0.0 ? bld.axis_node(x) : bld.pair_node(x, y);
        lut.emplace(k, id);
        return id;
    };

    auto mesh_block = [&](const std::vector<double>& X, const std::vector<double>& Y) {
        for (std::size_t i = 0; i + 1 < X.size(); ++i) {
            for (std::size_t j = 0; j + 1 < Y.size(); ++j) {
                const int n00 = node(X[i], Y[j]);
                const int n10 = node(X[i + 1], Y[j]);
                const int n11 = node(X[i + 1], Y[j + 1]);
                const int n01 = node(X[i], Y[j + 1]);
                // diagonal from the corner nearest the axes to the far one
                if (std::abs(X[i]) < std::abs(X[i + 1])) {
                    bld.upper_tris.push_back({n00, n10, n11});
                    bld.upper_tris.push_back({n00, n11, n01});
                } else {
                    bld.upper_tris.push_back({n00, n10, n01});
                    bld.upper_tris.push_back({n10, n11, n01});
                }
            }
        }
    };
    const std::vector<double> y01(d01);
    mesh_block(dx_center, y01);   // center, upper half
    mesh_block(arm_x, y01);       // right arm
    mesh_block(arm_x_neg, y01);   // left arm
    mesh_block(dx_center, arm_y); // top arm

    auto bedge_run_x = [&](const std::vector<double>& X, double y) {
        for (std::size_t i = 0; i + 1 < X.size(); ++i)
            bld.upper_bedges.push_back({node(X[i], y), node(X[i + 1], y)});
    };
    auto bedge_run_y = [&](double x, const std::vector<double>& Y) {
        for (std::size_t j = 0; j + 1 < Y.size(); ++j)
            bld.upper_bedges.push_back({node(x, Y[j]), node(x, Y[j + 1])});
    };
    bedge_run_y(a, y01);        // right arm outer edge
    bedge_run_x(arm_x, 1.0);    // right arm top
    bedge_run_y(-a, y01);       // left arm outer edge
    bedge_run_x(arm_x_neg, 1.0);
    bedge_run_y(1.0, arm_y);    // top arm sides and top
    bedge_run_y(-1.0, arm_y);
    bedge_run_x(dx_center, b);

    return bld.finalize(std::move(domain));
}

// piecewise-linear radial remap around each corner that carries the block
// mesh of the cross onto the rounded polygon; boundary nodes land exactly on
// the arcs and the interior deforms continuously
void remap_rounded_corners(TriMesh& m, const RoundedCrossPolygon& dom) {
    struct Corner {
        Vec2 center;
        double lo, hi; // angular sector (quarter)
        bool convex;
    };
    std::vector<Corner> corners;
    for (const auto& pc : dom.pieces()) {
        if (!pc.is_arc) continue;
        if (pc.center.y <= 0) continue; // lower corners never reach the upper half
        Corner c;
        c.center = pc.center;
        c.lo = std::min(pc.ang0, pc.ang1);
        c.hi = std::max(pc.ang0, pc.ang1);
        c.convex = pc.kappa > 0;
        corners.push_back(c);
    }
    const double rho = dom.rho();
    const double r_cap = std::min(2 * rho, 0.95);
    for (int i = 0; i < m.n_nodes(); ++i) {
        if (m.nodes[i].y < 0) continue;
        Vec2 p = m.nodes[i];
        for (const auto& c : corners) {
            const Vec2 w = p - c.center;
            const double r = norm(w);
            if (r >= (c.convex ? 1.5 * rho : r_cap)) continue;
            double ang = std::atan2(w.y, w.x);
            const double mid = 0.5 * (c.lo + c.hi);
            while (ang < mid - pi) ang += 2 * pi;
            while (ang > mid + pi) ang -= 2 * pi;
            if (ang < c.lo - 1e-12 || ang > c.hi + 1e-12) continue;
            const double r_orig = std::min(rho / std::cos(ang - c.lo),
                                           rho / std::cos(c.hi - ang));
            double rn;
            if (c.convex) {
                rn = r * (rho / r_orig);
            } else {
                if (r <= r_orig)
                    rn = rho;
                else
                    rn = rho + (r - r_orig) * (r_cap - rho) / (r_cap - r_orig);
            }
            p = c.center + (rn / std::max(r, 1e-300)) * w;
        }
        m.nodes[i] = p;
    }
    for (int i = 0; i < m.n_nodes(); ++i) {
        if (m.nodes[i].y >= 0) continue;
        const int u = m.reflect[i];
        m.nodes[i] = {m.nodes[u].x, -m.nodes[u].y};
    }
    assign_tags_and_normals(m);
    m.h = compute_h(m);
    m.validate();
}

} // namespace

double TriMesh::tri_diameter(int t) const {
    const auto& T = tris[t];
    return std::max({dist(nodes[T[0]], nodes[T[1]]), dist(nodes[T[1]], nodes[T[2]]),
                     dist(nodes[T[2]], nodes[T[0]])});
}

double TriMesh::min_angle_deg() const {
    double worst = 180.0;
    for (const auto& T : tris) {
        for (int v = 0; v < 3; ++v) {
            const Vec2 e1 = nodes[T[(v + 1) % 3]] - nodes[T[v]];
            const Vec2 e2 = nodes[T[(v + 2) % 3]] - nodes[T[v]];
            const double ang = std::atan2(std::abs(cross(e1, e2)), dot(e1, e2));
            worst = std::min(worst, ang * 180.0 / pi);
        }
    }
    return worst;
}

double TriMesh::area() const {
    double s = 0;
    for (int t = 0; t < n_tris(); ++t) s += tri_area(t);
    return s;
}

double TriMesh::boundary_length() const {
    double s = 0;
    for (const auto& be : bedges) s += dist(nodes[be.a], nodes[be.b]);
    return s;
}

std::vector<char> TriMesh::boundary_node_mask() const {
    std::vector<char> mask(nodes.size(), 0);
    for (const auto& be : bedges) mask[be.a] = mask[be.b] = 1;
    return mask;
}

void TriMesh::validate() const {
    const int nv = n_nodes();
    require(static_cast<int>(reflect.size()) == nv, "mesh: reflection map size mismatch");
    for (int i = 0; i < nv; ++i) {
        const int r = reflect[i];
        require(r >= 0 && r < nv && reflect[r] == i, "mesh: reflection is not an involution");
        require(nodes[r].x == nodes[i].x && nodes[r].y == -nodes[i].y,
                "mesh: reflected coordinates are not exact");
    }
    require(n_tris() % 2 == 0, "mesh: triangles must come in mirror pairs");
    for (int t = 0; t < n_tris(); ++t)
        require(tri_area(t) > 0, "mesh: non-positive triangle area at " + std::to_string(t));
    for (int t = 0; t + 1 < n_tris(); t += 2) {
        const auto& T = tris[t];
        const auto& M = tris[t + 1];
        require(M[0] == reflect[T[0]] && M[1] == reflect[T[2]] && M[2] == reflect[T[1]],
                "mesh: mirror pairing broken at triangle " + std::to_string(t));
    }
    require(bedges.size() % 2 == 0, "mesh: boundary edges must come in mirror pairs");
    for (std::size_t k = 0; k + 1 < bedges.size(); k += 2) {
        require(bedges[k + 1].a == reflect[bedges[k].a] &&
                    bedges[k + 1].b == reflect[bedges[k].b],
                "mesh: boundary edge mirror pairing broken");
    }

    std::unordered_map<EdgeKey, int, PairHash> counts;
    for (const auto& T : tris)
        for (int e = 0; e < 3; ++e) ++counts[edge_key(T[e], T[(e + 1) % 3])];
    std::unordered_map<EdgeKey, int, PairHash> bset;
    for (const auto& be : bedges) ++bset[edge_key(be.a, be.b)];
    for (const auto& [k, c] : bset)
        require(c == 1, "mesh: duplicated boundary edge");
    for (const auto& [k, c] : counts) {
        if (c == 1)
            require(bset.count(k) == 1, "mesh: untagged boundary edge");
        else
            require(c == 2 && bset.count(k) == 0, "mesh: non-manifold edge");
    }

    // Euler relation V - E + F = 1 for a simply connected triangulation
    const long long V = nv, E = static_cast<long long>(counts.size()),
                    F = static_cast<long long>(n_tris());
    require(V - E + F == 1, "mesh: Euler relation violated");

    // boundary edges form a single closed loop
    std::unordered_map<int, std::vector<int>> adj;
    for (const auto& be : bedges) {
        adj[be.a].push_back(be.b);
        adj[be.b].push_back(be.a);
    }
    for (const auto& [n, nb] : adj)
        require(nb.size() == 2, "mesh: boundary is not a 1-manifold at node " +
                                    std::to_string(n));
    int prev = -1, cur = bedges[0].a;
    std::size_t steps = 0;
    do {
        const auto& nb = adj[cur];
        const int next = nb[0] == prev ? nb[1] : nb[0];
        prev = cur;
        cur = next;
        ++steps;
        require(steps <= bedges.size(), "mesh: boundary loop walk failed");
    } while (cur != bedges[0].a);
    require(steps == bset.size(), "mesh: boundary edges form more than one loop");
}

TriMesh mesh_domain(const DomainPtr& domain, double h_target, Grading grading) {
    require(domain != nullptr, "mesh_domain: null domain");
    require(h_target > 0, "mesh_domain: h_target must be positive");
    switch (domain->kind()) {
    case Domain::Kind::profile: {
        auto prof = std::dynamic_pointer_cast<const ProfileDomain>(domain);
        TriMesh m = mesh_profile(prof, h_target);
        require(m.min_angle_deg() >= 20.0 - 1e-9,
                "mesh_domain: minimum angle below 20 degrees");
        return m;
    }
    case Domain::Kind::cross: {
        auto cp = std::dynamic_pointer_cast<const CrossPolygon>(domain);
        TriMesh m = mesh_cross_blocks(cp->a(), cp->b(), h_target, grading, domain);
        require(m.min_angle_deg() >= 20.0 - 1e-9,
                "mesh_domain: minimum angle below 20 degrees");
        return m;
    }
    case Domain::Kind::rounded_cross: {
        auto rc = std::dynamic_pointer_cast<const RoundedCrossPolygon>(domain);
        const double h_corner = h_target * std::pow(grading.q, grading.levels);
        require(h_corner <= rc->rho() / 4,
                "mesh_domain: corner cells too coarse to resolve rho (need h*q^L <= rho/4)");
        TriMesh m = mesh_cross_blocks(rc->a(), rc->b(), h_target, grading, domain);
        remap_rounded_corners(m, *rc);
        return m;
    }
    }
    fail("mesh_domain: unknown domain kind");
}

TriMesh refine(const TriMesh& mesh) {
    mesh.validate();
    TriMesh out;
    out.domain = mesh.domain;
    out.nodes = mesh.nodes;
    out.reflect = mesh.reflect;

    std::unordered_map<EdgeKey, int, PairHash> btag;
    for (std::size_t k = 0; k < mesh.bedges.size(); ++k)
        btag[edge_key(mesh.bedges[k].a, mesh.bedges[k].b)] =
            static_cast<int>(mesh.bedges[k].tag);

    std::unordered_map<EdgeKey, int, PairHash> mid;
    auto midpoint = [&](int a, int b) {
        const EdgeKey k = edge_key(a, b);
        const auto it = mid.find(k);
        if (it != mid.end()) return it->second;
        Vec2 p = 0.5 * (mesh.nodes[a] + mesh.nodes[b]);
        const auto bt = btag.find(k);
        if (bt != btag.end() && mesh.domain)
            p = mesh.domain->project_boundary(p, bt->second);
        const int ra = mesh.reflect[a], rb = mesh.reflect[b];
        const int id = static_cast<int>(out.nodes.size());
        if (ra == a && rb == b) { // axis edge: midpoint reflects to itself
            out.nodes.push_back({p.x, 0.0});
            out.reflect.push_back(id);
            mid.emplace(k, id);
            return id;
        }
        out.nodes.push_back(p);
        out.nodes.push_back({p.x, -p.y});
        out.reflect.push_back(id + 1);
        out.reflect.push_back(id);
        mid.emplace(k, id);
        mid.emplace(edge_key(ra, rb), id + 1);
        return id;
    };

    for (int t = 0; t + 1 < mesh.n_tris(); t += 2) {
        const auto& T = mesh.tris[t];
        const int m01 = midpoint(T[0], T[1]);
        const int m12 = midpoint(T[1], T[2]);
        const int m20 = midpoint(T[2], T[0]);
        const std::array<std::array<int, 3>, 4> kids = {{{T[0], m01, m20},
                                                         {m01, T[1], m12},
                                                         {m20, m12, T[2]},
                                                         {m01, m12, m20}}};
        for (const auto& K : kids) {
            out.tris.push_back(K);
            out.tris.push_back({out.reflect[K[0]], out.reflect[K[2]], out.reflect[K[1]]});
        }
    }
    for (std::size_t k = 0; k + 1 < mesh.bedges.size(); k += 2) {
        const auto& be = mesh.bedges[k];
        const int m = midpoint(be.a, be.b);
        for (const auto& [a, b] : {std::pair{be.a, m}, std::pair{m, be.b}}) {
            out.bedges.push_back({a, b, be.tag, {}});
            out.bedges.push_back({out.reflect[a], out.reflect[b], be.tag, {}});
        }
    }
    assign_tags_and_normals(out);
    out.h = compute_h(out);
    out.validate();
    return out;
}

// ------------------------------------------------------------------- io

void write_mesh_text(const TriMesh& mesh, std::ostream& out) {
    out << "#nodes " << mesh.n_nodes() << "\n";
    for (int i = 0; i < mesh.n_nodes(); ++i)
        out << i << ' ' << fmt17(mesh.nodes[i].x) << ' ' << fmt17(mesh.nodes[i].y) << "\n";
    out << "#tris " << mesh.n_tris() << "\n";
    for (int t = 0; t < mesh.n_tris(); ++t)
        out << t << ' ' << mesh.tris[t][0] << ' ' << mesh.tris[t][1] << ' '
            << mesh.tris[t][2] << "\n";
    out << "#bedges " << mesh.bedges.size() << "\n";
    for (std::size_t k = 0; k < mesh.bedges.size(); ++k)
        out << k << ' ' << mesh.bedges[k].a << ' ' << mesh.bedges[k].b << ' '
            << mesh.bedges[k].tag << "\n";
}

TriMesh read_mesh_text(std::istream& in) {
    TriMesh m;
    std::string kw;
    int n = 0;
    require(static_cast<bool>(in >> kw >> n) && kw == "#nodes", "mesh read: bad header");
    m.nodes.resize(n);
    for (int i = 0; i < n; ++i) {
        int id;
        in >> id >> m.nodes[i].x >> m.nodes[i].y;
    }
    require(static_cast<bool>(in >> kw >> n) && kw == "#tris", "mesh read: bad tris header");
    m.tris.resize(n);
    for (int t = 0; t < n; ++t) {
        int id;
        in >> id >> m.tris[t][0] >> m.tris[t][1] >> m.tris[t][2];
    }
    require(static_cast<bool>(in >> kw >> n) && kw == "#bedges",
            "mesh read: bad bedges header");
    m.bedges.resize(n);
    for (int k = 0; k < n; ++k) {
        int id;
        in >> id >> m.bedges[k].a >> m.bedges[k].b >> m.bedges[k].tag;
    }
    require(static_cast<bool>(in), "mesh read: truncated file");

    // rebuild the reflection map from exact mirrored coordinates
    std::unordered_map<EdgeKey, int, PairHash> lut;
    for (int i = 0; i < m.n_nodes(); ++i) lut[{bits(m.nodes[i].x), bits(m.nodes[i].y)}] = i;
    m.reflect.resize(m.n_nodes());
    for (int i = 0; i < m.n_nodes(); ++i) {
        const auto it = lut.find({bits(m.nodes[i].x), bits(-m.nodes[i].y)});
        require(it != lut.end(), "mesh read: node has no mirror partner");
        m.reflect[i] = it->second;
    }
    // recompute normals; tags are kept from the file (no domain to classify)
    assign_tags_and_normals(m);
    m.h = compute_h(m);
    m.validate();
    return m;
}

// -------------------------------------------------------------- locator

PointLocator::PointLocator(const TriMesh& mesh) : mesh_(mesh) {
    lo_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    hi_ = {-lo_.x, -lo_.y};
    for (const auto& p : mesh.nodes) {
        lo_.x = std::min(lo_.x, p.x);
        lo_.y = std::min(lo_.y, p.y);
        hi_.x = std::max(hi_.x, p.x);
        hi_.y = std::max(hi_.y, p.y);
    }
    const int target = std::clamp(static_cast<int>(std::sqrt(mesh.n_tris() / 2.0)), 8, 512);
    nx_ = ny_ = target;
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    const double dx = (hi_.x - lo_.x) / nx_, dy = (hi_.y - lo_.y) / ny_;
    for (int t = 0; t < mesh.n_tris(); ++t) {
        const auto& T = mesh.tris[t];
        double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
        for (int v : T) {
            x0 = std::min(x0, mesh.nodes[v].x);
            x1 = std::max(x1, mesh.nodes[v].x);
            y0 = std::min(y0, mesh.nodes[v].y);
            y1 = std::max(y1, mesh.nodes[v].y);
        }
        const int i0 = std::clamp(static_cast<int>((x0 - lo_.x) / dx), 0, nx_ - 1);
        const int i1 = std::clamp(static_cast<int>((x1 - lo_.x) / dx), 0, nx_ - 1);
        const int j0 = std::clamp(static_cast<int>((y0 - lo_.y) / dy), 0, ny_ - 1);
        const int j1 = std::clamp(static_cast<int>((y1 - lo_.y) / dy), 0, ny_ - 1);
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j)
                buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(t);
    }
}

int PointLocator::locate(Vec2 p) const {
    if (p.x < lo_.x || p.x > hi_.x || p.y < lo_.y || p.y > hi_.y) return -1;
    const double dx = (hi_.x - lo_.x) / nx_, dy = (hi_.y - lo_.y) / ny_;
    const int i = std::clamp(static_cast<int>((p.x - lo_.x) / dx), 0, nx_ - 1);
    const int j = std::clamp(static_cast<int>((p.y - lo_.y) / dy), 0, ny_ - 1);
    for (int t : buckets_[static_cast<std::size_t>(j) * nx_ + i]) {
        const auto& T = mesh_.tris[t];
        const Vec2 A = mesh_.nodes[T[0]], B = mesh_.nodes[T[1]], C = mesh_.nodes[T[2]];
        const double area = cross(B - A, C - A);
        const double l0 = cross(B - p, C - p) / area;
        const double l1 = cross(C - p, A - p) / area;
        const double l2 = cross(A - p, B - p) / area;
        if (l0 >= -1e-10 && l1 >= -1e-10 && l2 >= -1e-10) return t;
    }
    return -1;
}

bool PointLocator::interpolate(const std::vector<double>& nodal, Vec2 p, double& out) const {
    const int t = locate(p);
    if (t < 0) return false;
    const auto& T = mesh_.tris[t];
    const Vec2 A = mesh_.nodes[T[0]], B = mesh_.nodes[T[1]], C = mesh_.nodes[T[2]];
    const double area = cross(B - A, C - A);
    const double l0 = cross(B - p, C - p) / area;
    const double l1 = cross(C - p, A - p) / area;
    const double l2 = cross(A - p, B - p) / area;
    out = l0 * nodal[T[0]] + l1 * nodal[T[1]] + l2 * nodal[T[2]];
    return true;
}

} // namespace torsion
