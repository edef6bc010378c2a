#pragma once

// Symmetric planar domains: profile domains {|x2| < phi(x1)} with analytic
// presets (disk, ellipse, peanut, stadium), the nonconvex cross polygon, its
// C^{1,1} rounded variant, and Minkowski deformation families between
// profile domains.
//
// Boundary orientation is clockwise throughout; the frame (tau, nu) is
// right-handed with nu the outward normal, so the unit disk has curvature +1.

#include "torsion/util.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace torsion {

// --------------------------------------------------------------- traces

struct TraceSample {
    double s = 0;        // arclength from the trace start, clockwise
    Vec2 p;
    Vec2 tau;            // unit tangent
    Vec2 nu;             // unit outward normal
    double kappa = 0;    // curvature; NaN at polygon vertices
    int tag = 0;         // boundary piece id
    bool vertex = false; // polygon vertex sample (kappa omitted)
};

struct BoundaryTrace {
    std::vector<TraceSample> samples;
    double total_length = 0;
};

void write_trace_csv(const BoundaryTrace& trace, std::ostream& out);

double min_curvature(const BoundaryTrace& trace);

struct ConditionA2 {
    bool holds = false;
    double margin = 0; // beta + min curvature
};
ConditionA2 check_condition_A2(double beta, const BoundaryTrace& trace);

// Test/diagnostic helpers on traces.
double trace_frenet_residual(const BoundaryTrace& trace);
double trace_total_turning(const BoundaryTrace& trace);
double hausdorff_distance(const BoundaryTrace& a, const BoundaryTrace& b);

// --------------------------------------------------------------- domains

struct BoundaryFrame {
    Vec2 tau;
    Vec2 nu;
    double kappa = 0;
};

class Domain;
using DomainPtr = std::shared_ptr<const Domain>;

class Domain {
public:
    enum class Kind { profile, cross, rounded_cross };

    virtual ~Domain() = default;
    virtual Kind kind() const = 0;
    virtual std::string describe() const = 0;
    virtual bool smooth() const = 0;
    virtual BoundaryTrace boundary_trace(int n) const = 0;
    virtual bool contains(Vec2 p) const = 0;
    // Frame of the boundary piece nearest to a point lying on (or very near)
    // the boundary.
    virtual BoundaryFrame boundary_frame(Vec2 p) const = 0;
    // Projects a point near the boundary onto the boundary piece with the
    // given tag (used when refining meshes).
    virtual Vec2 project_boundary(Vec2 p, int tag) const = 0;
    // Tag of the boundary piece nearest to a point on (or near) the boundary.
    virtual int classify_boundary(Vec2 p) const = 0;
};

// Profile domains {x : |x2| < phi(x1), |x1| < l}, symmetric about {x2 = 0}
// and convex in the x2 direction (assumption A1 by construction).
class ProfileDomain : public Domain {
public:
    Kind kind() const final { return Kind::profile; }
    virtual double half_width() const = 0;
    virtual double profile(double x) const = 0;
    virtual double profile_d1(double x) const = 0;
    virtual double profile_d2(double x) const = 0;
    // Dense upper boundary polyline from (-l, 0) to (l, 0), x increasing.
    virtual std::vector<Vec2> upper_polyline(int n) const = 0;

    bool contains(Vec2 p) const override;
    Vec2 project_boundary(Vec2 p, int tag) const override;
    BoundaryFrame boundary_frame(Vec2 p) const override;
    int classify_boundary(Vec2 p) const override { return p.y >= 0 ? 0 : 1; }
};

using ProfileDomainPtr = std::shared_ptr<const ProfileDomain>;

// Named analytic presets.
ProfileDomainPtr make_disk(double radius = 1.0);
ProfileDomainPtr make_ellipse(double a, double b);
// Two unit-height lobes bridged by a cosine neck; neck in [0, 1) controls the
// pinch depth (neck = 0 gives the unit disk). Nonconvex for neck large enough;
// its minimum curvature is reported numerically, not assumed.
ProfileDomainPtr make_peanut(double neck);
// neck value for which the sampled minimum curvature is -0.5
double peanut_neck_for_min_kappa_half();
ProfileDomainPtr make_stadium(double half_length, double cap_radius);
ProfileDomainPtr make_scaled(ProfileDomainPtr base, double factor);

// Profile of the Minkowski combination w0*A (+) w1*B of two profile domains
// (weights nonnegative, w0 + w1 = 1), computed as a sup-convolution on a
// uniform grid with derivative data recovered through the maximizing
// decomposition. Degenerate weights return the scaled input exactly.
ProfileDomainPtr sup_convolve_profiles(ProfileDomainPtr A, ProfileDomainPtr B,
                                       double w0, double w1, int grid_n = 2048);

class CrossPolygon final : public Domain {
public:
    CrossPolygon(double a, double b);
    Kind kind() const override { return Kind::cross; }
    std::string describe() const override;
    bool smooth() const override { return false; }
    BoundaryTrace boundary_trace(int n) const override;
    bool contains(Vec2 p) const override;
    BoundaryFrame boundary_frame(Vec2 p) const override;
    Vec2 project_boundary(Vec2 p, int tag) const override;
    int classify_boundary(Vec2 p) const override;

    double a() const { return a_; }
    double b() const { return b_; }
    // 12 vertices in clockwise order starting from (a, -1); the reentrant
    // ones are (+-1, +-1).
    const std::vector<Vec2>& vertices() const { return verts_; }
    static std::vector<Vec2> reentrant_vertices(double a, double b);

private:
    double a_, b_;
    std::vector<Vec2> verts_;
};

class RoundedCrossPolygon final : public Domain {
public:
    RoundedCrossPolygon(double a, double b, double rho);
    Kind kind() const override { return Kind::rounded_cross; }
    std::string describe() const override;
    bool smooth() const override { return true; } // C^{1,1}
    BoundaryTrace boundary_trace(int n) const override;
    bool contains(Vec2 p) const override;
    BoundaryFrame boundary_frame(Vec2 p) const override;
    Vec2 project_boundary(Vec2 p, int tag) const override;
    int classify_boundary(Vec2 p) const override;

    double a() const { return a_; }
    double b() const { return b_; }
    double rho() const { return rho_; }

    struct Piece {
        bool is_arc = false;
        Vec2 p0, p1;      // segment endpoints (clockwise)
        Vec2 center;      // arc data
        double ang0 = 0, ang1 = 0; // arc sweep, ang0 -> ang1
        double kappa = 0; // 0, +1/rho or -1/rho
        double length = 0;
    };
    const std::vector<Piece>& pieces() const { return pieces_; }

private:
    double a_, b_, rho_;
    std::vector<Piece> pieces_;
};

std::shared_ptr<const CrossPolygon> make_cross(double a, double b);
std::shared_ptr<const RoundedCrossPolygon> make_rounded_cross(double a, double b,
                                                              double rho);

// Parses a domain config like {"kind":"ellipse","a":2.0,"b":1.0}. Accepts
// kinds disk, ellipse, peanut, stadium, cross, rounded_cross.
DomainPtr domain_from_json_text(const std::string& text);

// ------------------------------------------------- deformation families

// Three-phase continuous family joining two profile domains: dilate the
// first endpoint up, Minkowski-interpolate, dilate down to the second
// endpoint. Every evaluated domain satisfies (A1); (A2) for the stored beta
// is certified on a t-grid at construction.
class DeformationFamily {
public:
    DomainPtr at(double t) const; // t in [0, 1]; endpoints are exact

    double beta = 0;
    double safety = 0;
    double eps = 0;     // blend constant, 0 < eps < min{1, beta/C}
    double C = 0;       // curvature lower-bound constant of the middle phase
    double l_star = 0;
    double delta0 = 0, delta1 = 0;
    ProfileDomainPtr omega0, omega1;
};

DeformationFamily build_family(ProfileDomainPtr omega0, ProfileDomainPtr omega1,
                               double beta, double safety);

} // namespace torsion
