#include "torsion/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>

#include "json.hpp"

namespace torsion {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double wrap_2pi(double t) {
    t = std::fmod(t, 2 * pi);
    if (t < 0) t += 2 * pi;
    return t;
}

// segment intersection test for the simple-boundary sweep
bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    const double d1 = cross(b - a, c - a);
    const double d2 = cross(b - a, d - a);
    const double d3 = cross(d - c, a - c);
    const double d4 = cross(d - c, b - c);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

void reject_self_intersection(const std::vector<Vec2>& pts, const std::string& who) {
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = pts[i], b = pts[(i + 1) % n];
        const double lox = std::min(a.x, b.x), hix = std::max(a.x, b.x);
        const double loy = std::min(a.y, b.y), hiy = std::max(a.y, b.y);
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue; // adjacent through the wrap
            const Vec2 c = pts[j], d = pts[(j + 1) % n];
            if (std::max(c.x, d.x) < lox || std::min(c.x, d.x) > hix ||
                std::max(c.y, d.y) < loy || std::min(c.y, d.y) > hiy)
                continue;
            if (segments_intersect(a, b, c, d))
                fail(who + ": boundary is not simple (self-intersection)");
        }
    }
}

Vec2 outward_normal(Vec2 tau) { return {-tau.y, tau.x}; }

} // namespace

// ----------------------------------------------------------------- traces

void write_trace_csv(const BoundaryTrace& trace, std::ostream& out) {
    out << "s,x,y,tx,ty,nx,ny,kappa,tag\n";
    for (const auto& q : trace.samples) {
        out << fmt17(q.s) << ',' << fmt17(q.p.x) << ',' << fmt17(q.p.y) << ','
            << fmt17(q.tau.x) << ',' << fmt17(q.tau.y) << ',' << fmt17(q.nu.x)
            << ',' << fmt17(q.nu.y) << ',' << fmt17(q.kappa) << ',' << q.tag
            << '\n';
    }
}

double min_curvature(const BoundaryTrace& trace) {
    require(!trace.samples.empty(), "min_curvature: empty trace");
    double m = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& q : trace.samples) {
        if (std::isnan(q.kappa)) continue;
        m = std::min(m, q.kappa);
        any = true;
    }
    require(any, "min_curvature: trace carries no curvature data");
    return m;
}

ConditionA2 check_condition_A2(double beta, const BoundaryTrace& trace) {
    require(beta > 0, "check_condition_A2: beta must be positive");
    const double margin = beta + min_curvature(trace);
    return {margin >= 0, margin};
}

double trace_frenet_residual(const BoundaryTrace& trace) {
    const auto& q = trace.samples;
    const std::size_t n = q.size();
    const double L = trace.total_length;
    double worst = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& prev = q[(i + n - 1) % n];
        const auto& next = q[(i + 1) % n];
        if (std::isnan(q[i].kappa) || std::isnan(prev.kappa) || std::isnan(next.kappa))
            continue;
        double ds = next.s - prev.s;
        if (ds <= 0) ds += L;
        const Vec2 dtau = {(next.tau.x - prev.tau.x) / ds, (next.tau.y - prev.tau.y) / ds};
        const Vec2 dnu = {(next.nu.x - prev.nu.x) / ds, (next.nu.y - prev.nu.y) / ds};
        const Vec2 r1 = dtau + q[i].kappa * q[i].nu;
        const Vec2 r2 = dnu - q[i].kappa * q[i].tau;
        worst = std::max(worst, std::max(norm(r1), norm(r2)));
    }
    return worst;
}

double trace_total_turning(const BoundaryTrace& trace) {
    const auto& q = trace.samples;
    const std::size_t n = q.size();
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 t0 = q[i].tau, t1 = q[(i + 1) % n].tau;
        total += std::atan2(cross(t0, t1), dot(t0, t1));
    }
    return total;
}

double hausdorff_distance(const BoundaryTrace& a, const BoundaryTrace& b) {
    auto one_sided = [](const BoundaryTrace& u, const BoundaryTrace& v) {
        double worst = 0;
        for (const auto& p : u.samples) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : v.samples) best = std::min(best, dist(p.p, q.p));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(one_sided(a, b), one_sided(b, a));
}

// --------------------------------------------------------- profile base

bool ProfileDomain::contains(Vec2 p) const {
    const double l = half_width();
    if (std::abs(p.x) >= l) return false;
    return std::abs(p.y) < profile(p.x);
}

Vec2 ProfileDomain::project_boundary(Vec2 p, int tag) const {
    const double l = half_width();
    const double x = std::clamp(p.x, -l, l);
    const double phi = std::abs(x) >= l ? 0.0 : profile(x);
    return {x, tag == 1 ? -phi : phi};
}

BoundaryFrame ProfileDomain::boundary_frame(Vec2 p) const {
    const double l = half_width();
    const double x = std::clamp(p.x, -l * (1 - 1e-12), l * (1 - 1e-12));
    double d1 = profile_d1(x);
    double d2 = profile_d2(x);
    if (!std::isfinite(d1)) d1 = std::copysign(1e12, d1);
    if (!std::isfinite(d2)) d2 = 0.0;
    const double g = std::sqrt(1 + d1 * d1);
    BoundaryFrame f;
    if (p.y >= 0) {
        f.tau = {1 / g, d1 / g};
    } else {
        f.tau = {-1 / g, d1 / g};
    }
    f.nu = outward_normal(f.tau);
    f.kappa = -d2 / (g * g * g);
    return f;
}

// ----------------------------------------------------- analytic presets

namespace {

// Clockwise closed curve p(t), t in [0, 2pi); p(0) is the right vertex
// (l, 0), the lower half is t in (0, pi), the upper half t in (pi, 2pi).
class AnalyticProfileDomain : public ProfileDomain {
public:
    bool smooth() const override { return true; }

    virtual Vec2 curve_point(double t) const = 0;
    virtual Vec2 curve_d1(double t) const = 0;
    virtual Vec2 curve_d2(double t) const = 0;
    virtual double param_of_point(Vec2 p) const = 0;

    BoundaryTrace boundary_trace(int n) const override {
        require(n >= 64, "boundary_trace: need n >= 64");
        BoundaryTrace tr;
        tr.samples.resize(n);
        std::vector<Vec2> pts(n);
        for (int i = 0; i < n; ++i) {
            const double t = 2 * pi * i / n;
            auto& q = tr.samples[i];
            q.p = curve_point(t);
            const Vec2 v = curve_d1(t);
            const Vec2 a = curve_d2(t);
            const double sp = norm(v);
            q.tau = {v.x / sp, v.y / sp};
            q.nu = outward_normal(q.tau);
            q.kappa = -(v.x * a.y - v.y * a.x) / (sp * sp * sp);
            q.tag = q.p.y >= 0 ? 0 : 1;
            pts[i] = q.p;
        }
        // arclength by per-interval Simpson of the speed
        double s = 0;
        for (int i = 0; i < n; ++i) {
            tr.samples[i].s = s;
            const double t0 = 2 * pi * i / n, t1 = 2 * pi * (i + 1) / n;
            const double sp0 = norm(curve_d1(t0));
            const double spm = norm(curve_d1(0.5 * (t0 + t1)));
            const double sp1 = norm(curve_d1(t1));
            s += (t1 - t0) * (sp0 + 4 * spm + sp1) / 6.0;
        }
        tr.total_length = s;
        reject_self_intersection(pts, describe());
        return tr;
    }

    std::vector<Vec2> upper_polyline(int n) const override {
        std::vector<Vec2> pts(n + 1);
        const double l = half_width();
        pts[0] = {-l, 0.0};
        pts[n] = {l, 0.0};
        for (int i = 1; i < n; ++i) pts[i] = curve_point(pi + pi * i / n);
        return pts;
    }

    BoundaryFrame boundary_frame(Vec2 p) const override {
        const double t = param_of_point(p);
        const Vec2 v = curve_d1(t);
        const Vec2 a = curve_d2(t);
        const double sp = norm(v);
        BoundaryFrame f;
        f.tau = {v.x / sp, v.y / sp};
        f.nu = outward_normal(f.tau);
        f.kappa = -(v.x * a.y - v.y * a.x) / (sp * sp * sp);
        return f;
    }
};

class EllipseDomain final : public AnalyticProfileDomain {
public:
    EllipseDomain(double a, double b) : a_(a), b_(b) {
        require(a > 0 && b > 0, "ellipse: semi-axes must be positive");
    }
    std::string describe() const override {
        return a_ == b_ ? "disk(" + fmt17(a_) + ")"
                        : "ellipse(" + fmt17(a_) + "," + fmt17(b_) + ")";
    }
    double half_width() const override { return a_; }
    double profile(double x) const override {
        const double u = x / a_;
        return b_ * std::sqrt(std::max(0.0, 1 - u * u));
    }
    double profile_d1(double x) const override {
        const double u = x / a_;
        return -(b_ / a_) * u / std::sqrt(std::max(1e-300, 1 - u * u));
    }
    double profile_d2(double x) const override {
        const double u = x / a_;
        const double w = std::max(1e-300, 1 - u * u);
        return -(b_ / (a_ * a_)) / (w * std::sqrt(w));
    }
    Vec2 curve_point(double t) const override {
        return {a_ * std::cos(t), -b_ * std::sin(t)};
    }
    Vec2 curve_d1(double t) const override {
        return {-a_ * std::sin(t), -b_ * std::cos(t)};
    }
    Vec2 curve_d2(double t) const override {
        return {-a_ * std::cos(t), b_ * std::sin(t)};
    }
    double param_of_point(Vec2 p) const override {
        return wrap_2pi(std::atan2(-p.y / b_, p.x / a_));
    }

private:
    double a_, b_;
};

class PeanutDomain final : public AnalyticProfileDomain {
public:
    explicit PeanutDomain(double neck) : k_(neck) {
        require(neck >= 0 && neck < 1, "peanut: neck must lie in [0, 1)");
    }
    std::string describe() const override { return "peanut(" + fmt17(k_) + ")"; }

    double g(double c) const { return 1 - k_ * std::pow(std::cos(pi * c / 2), 2); }
    double gd1(double c) const { return k_ * (pi / 2) * std::sin(pi * c); }
    double gd2(double c) const { return k_ * (pi * pi / 2) * std::cos(pi * c); }

    double half_width() const override { return 1.0; }
    double profile(double x) const override {
        return std::sqrt(std::max(0.0, 1 - x * x)) * g(x);
    }
    double profile_d1(double x) const override {
        const double w = std::sqrt(std::max(1e-300, 1 - x * x));
        return -x / w * g(x) + w * gd1(x);
    }
    double profile_d2(double x) const override {
        const double w = std::sqrt(std::max(1e-300, 1 - x * x));
        return -g(x) / (w * w * w) + 2 * (-x / w) * gd1(x) + w * gd2(x);
    }
    Vec2 curve_point(double t) const override {
        const double c = std::cos(t), s = std::sin(t);
        return {c, -s * g(c)};
    }
    Vec2 curve_d1(double t) const override {
        const double c = std::cos(t), s = std::sin(t);
        return {-s, -c * g(c) + s * s * gd1(c)};
    }
    Vec2 curve_d2(double t) const override {
        const double c = std::cos(t), s = std::sin(t);
        return {-c, s * g(c) + 3 * s * c * gd1(c) - s * s * s * gd2(c)};
    }
    double param_of_point(Vec2 p) const override {
        const double t = std::acos(std::clamp(p.x, -1.0, 1.0));
        return p.y <= 0 ? t : 2 * pi - t;
    }

private:
    double k_;
};

class StadiumDomain final : public AnalyticProfileDomain {
public:
    StadiumDomain(double c, double r) : c_(c), r_(r) {
        require(c > 0 && r > 0, "stadium: lengths must be positive");
        L_ = 2 * pi * r + 4 * c;
    }
    std::string describe() const override {
        return "stadium(" + fmt17(c_) + "," + fmt17(r_) + ")";
    }
    double half_width() const override { return c_ + r_; }
    double profile(double x) const override {
        const double ax = std::abs(x);
        if (ax <= c_) return r_;
        return std::sqrt(std::max(0.0, r_ * r_ - (ax - c_) * (ax - c_)));
    }
    double profile_d1(double x) const override {
        const double ax = std::abs(x);
        if (ax <= c_) return 0.0;
        const double d = ax - c_;
        const double w = std::sqrt(std::max(1e-300, r_ * r_ - d * d));
        return -std::copysign(d / w, x);
    }
    double profile_d2(double x) const override {
        const double ax = std::abs(x);
        if (ax <= c_) return 0.0;
        const double d = ax - c_;
        const double w2 = std::max(1e-300, r_ * r_ - d * d);
        return -r_ * r_ / (w2 * std::sqrt(w2));
    }

    // piecewise arclength parameterization, u = t * L / (2 pi)
    Vec2 curve_point(double t) const override {
        double u = wrap_2pi(t) * L_ / (2 * pi);
        const double q = pi * r_ / 2;
        if (u < q) {
            const double a = -u / r_;
            return {c_ + r_ * std::cos(a), r_ * std::sin(a)};
        }
        u -= q;
        if (u < 2 * c_) return {c_ - u, -r_};
        u -= 2 * c_;
        if (u < pi * r_) {
            const double a = -pi / 2 - u / r_;
            return {-c_ + r_ * std::cos(a), r_ * std::sin(a)};
        }
        u -= pi * r_;
        if (u < 2 * c_) return {-c_ + u, r_};
        u -= 2 * c_;
        const double a = pi / 2 - u / r_;
        return {c_ + r_ * std::cos(a), r_ * std::sin(a)};
    }
    Vec2 curve_d1(double t) const override {
        const double scale = L_ / (2 * pi);
        double u = wrap_2pi(t) * scale;
        const double q = pi * r_ / 2;
        auto cap = [&](double a) { return Vec2{std::sin(a) * scale, -std::cos(a) * scale}; };
        if (u < q) return cap(-u / r_);
        u -= q;
        if (u < 2 * c_) return {-scale, 0};
        u -= 2 * c_;
        if (u < pi * r_) return cap(-pi / 2 - u / r_);
        u -= pi * r_;
        if (u < 2 * c_) return {scale, 0};
        u -= 2 * c_;
        return cap(pi / 2 - u / r_);
    }
    Vec2 curve_d2(double t) const override {
        const double scale = L_ / (2 * pi);
        double u = wrap_2pi(t) * scale;
        const double q = pi * r_ / 2;
        auto cap = [&](double a) {
            return Vec2{-std::cos(a) * scale * scale / r_, -std::sin(a) * scale * scale / r_};
        };
        if (u < q) return cap(-u / r_);
        u -= q;
        if (u < 2 * c_) return {0, 0};
        u -= 2 * c_;
        if (u < pi * r_) return cap(-pi / 2 - u / r_);
        u -= pi * r_;
        if (u < 2 * c_) return {0, 0};
        u -= 2 * c_;
        return cap(pi / 2 - u / r_);
    }
    double param_of_point(Vec2 p) const override {
        double u;
        const double q = pi * r_ / 2;
        if (p.x > c_) {
            const double a = std::atan2(p.y, p.x - c_); // (-pi, pi]
            u = a <= 0 ? -a * r_ : L_ - a * r_;
        } else if (p.x < -c_) {
            double a = std::atan2(p.y, p.x + c_);
            if (a > 0) a -= 2 * pi; // continuous clockwise branch (-3pi/2 side)
            u = q + 2 * c_ + (-pi / 2 - a) * r_;
        } else {
            u = p.y <= 0 ? q + (c_ - p.x) : q + 2 * c_ + pi * r_ + (p.x + c_);
        }
        return wrap_2pi(u * 2 * pi / L_);
    }

private:
    double c_, r_, L_;
};

class ScaledProfileDomain final : public ProfileDomain {
public:
    ScaledProfileDomain(ProfileDomainPtr base, double f) : base_(std::move(base)), f_(f) {
        require(f > 0, "scaled domain: factor must be positive");
    }
    std::string describe() const override {
        return "scaled(" + base_->describe() + "," + fmt17(f_) + ")";
    }
    bool smooth() const override { return base_->smooth(); }
    double half_width() const override { return f_ * base_->half_width(); }
    double profile(double x) const override { return f_ * base_->profile(x / f_); }
    double profile_d1(double x) const override { return base_->profile_d1(x / f_); }
    double profile_d2(double x) const override { return base_->profile_d2(x / f_) / f_; }
    std::vector<Vec2> upper_polyline(int n) const override {
        auto pts = base_->upper_polyline(n);
        for (auto& p : pts) p = f_ * p;
        return pts;
    }
    BoundaryTrace boundary_trace(int n) const override {
        BoundaryTrace tr = base_->boundary_trace(n);
        for (auto& q : tr.samples) {
            q.p = f_ * q.p;
            q.s *= f_;
            q.kappa /= f_;
        }
        tr.total_length *= f_;
        return tr;
    }
    BoundaryFrame boundary_frame(Vec2 p) const override {
        BoundaryFrame f = base_->boundary_frame({p.x / f_, p.y / f_});
        f.kappa /= f_;
        return f;
    }

private:
    ProfileDomainPtr base_;
    double f_;
};

// Profile given by a uniform sample table with derivative data; produced by
// sup_convolve_profiles.
class TableProfileDomain final : public ProfileDomain {
public:
    TableProfileDomain(double l, std::vector<double> psi, std::vector<double> dpsi,
                       std::vector<double> ddpsi)
        : l_(l), psi_(std::move(psi)), dpsi_(std::move(dpsi)), ddpsi_(std::move(ddpsi)) {
        n_ = static_cast<int>(psi_.size()) - 1;
        require(n_ >= 16, "table profile: too few samples");
        dz_ = 2 * l_ / n_;
        // fill derivative gaps from neighbours (the maximizer formula leaves
        // NaN where the decomposition was degenerate)
        patch_nans(dpsi_);
        patch_nans(ddpsi_);
        for (int j = 1; j < n_; ++j)
            require(psi_[j] > 0, "table profile: phi must be positive inside");
    }
    std::string describe() const override { return "blend(" + fmt17(l_) + ")"; }
    bool smooth() const override { return true; }
    double half_width() const override { return l_; }

    double profile(double x) const override { return interp(psi_, x); }
    double profile_d1(double x) const override { return interp(dpsi_, x); }
    double profile_d2(double x) const override { return interp(ddpsi_, x); }

    std::vector<Vec2> upper_polyline(int n) const override {
        // resample the table polyline by arclength
        std::vector<Vec2> raw(n_ + 1);
        for (int j = 0; j <= n_; ++j) raw[j] = {z(j), psi_[j]};
        std::vector<double> cum(n_ + 1, 0.0);
        for (int j = 1; j <= n_; ++j) cum[j] = cum[j - 1] + dist(raw[j], raw[j - 1]);
        std::vector<Vec2> out(n + 1);
        out[0] = {-l_, 0.0};
        out[n] = {l_, 0.0};
        int seg = 0;
        for (int i = 1; i < n; ++i) {
            const double target = cum[n_] * i / n;
            while (seg < n_ - 1 && cum[seg + 1] < target) ++seg;
            const double f = (target - cum[seg]) / std::max(1e-300, cum[seg + 1] - cum[seg]);
            out[i] = raw[seg] + f * (raw[seg + 1] - raw[seg]);
        }
        return out;
    }

    BoundaryTrace boundary_trace(int n) const override {
        require(n >= 64, "boundary_trace: need n >= 64");
        const int half = n / 2;
        auto upper = upper_polyline(half);
        // clockwise loop: right vertex, lower half (x decreasing), left
        // vertex, upper half (x increasing)
        BoundaryTrace tr;
        tr.samples.resize(2 * half);
        std::vector<Vec2> pts(2 * half);
        for (int i = 0; i < half; ++i) {
            const Vec2 u = upper[half - i];
            tr.samples[i].p = {u.x, -u.y};
        }
        for (int i = 0; i < half; ++i) tr.samples[half + i].p = upper[i];
        const int m = 2 * half;
        for (int i = 0; i < m; ++i) pts[i] = tr.samples[i].p;
        double s = 0;
        for (int i = 0; i < m; ++i) {
            tr.samples[i].s = s;
            s += dist(pts[i], pts[(i + 1) % m]);
        }
        tr.total_length = s;
        for (int i = 0; i < m; ++i) {
            auto& q = tr.samples[i];
            const double ax = std::abs(q.p.x);
            const double d1 = interp(dpsi_, q.p.x);
            const bool steep = !(std::abs(d1) < 25.0) || ax > l_ - 3 * dz_;
            if (!steep) {
                const double g = std::sqrt(1 + d1 * d1);
                if (i >= half)
                    q.tau = {1 / g, d1 / g};
                else
                    q.tau = {-1 / g, d1 / g};
                q.nu = outward_normal(q.tau);
                const double d2 = interp(ddpsi_, q.p.x);
                q.kappa = -d2 / (g * g * g);
            } else {
                // near-vertex: chord tangent on the equal-arclength polyline
                const Vec2 prev = pts[(i + m - 1) % m], next = pts[(i + 1) % m];
                q.tau = normalized(next - prev);
                q.nu = outward_normal(q.tau);
                q.kappa = kNaN; // assigned by the finite-difference pass below
            }
            q.tag = i >= half ? 0 : 1;
        }
        // finite-difference curvature where the table was unusable
        for (int i = 0; i < m; ++i) {
            auto& q = tr.samples[i];
            if (!std::isnan(q.kappa)) continue;
            const auto& prev = tr.samples[(i + m - 1) % m];
            const auto& next = tr.samples[(i + 1) % m];
            double ds = next.s - prev.s;
            if (ds <= 0) ds += tr.total_length;
            const Vec2 dtau = {(next.tau.x - prev.tau.x) / ds, (next.tau.y - prev.tau.y) / ds};
            q.kappa = -dot(dtau, q.nu);
        }
        reject_self_intersection(pts, describe());
        return tr;
    }

private:
    double z(int j) const { return -l_ + dz_ * j; }
    double interp(const std::vector<double>& col, double x) const {
        const double u = (std::clamp(x, -l_, l_) + l_) / dz_;
        int j = std::min(n_ - 1, static_cast<int>(u));
        const double f = u - j;
        return col[j] * (1 - f) + col[j + 1] * f;
    }
    void patch_nans(std::vector<double>& col) {
        for (int j = 0; j <= n_; ++j) {
            if (!std::isnan(col[j])) continue;
            int a = j - 1, b = j + 1;
            while (a >= 0 && std::isnan(col[a])) --a;
            while (b <= n_ && std::isnan(col[b])) ++b;
            if (a >= 0 && b <= n_)
                col[j] = col[a] + (col[b] - col[a]) * (j - a) / double(b - a);
            else if (a >= 0)
                col[j] = col[a];
            else if (b <= n_)
                col[j] = col[b];
            else
                col[j] = 0;
        }
    }

    double l_;
    std::vector<double> psi_, dpsi_, ddpsi_;
    int n_ = 0;
    double dz_ = 0;
};

} // namespace

ProfileDomainPtr make_disk(double radius) {
    return std::make_shared<EllipseDomain>(radius, radius);
}
ProfileDomainPtr make_ellipse(double a, double b) {
    return std::make_shared<EllipseDomain>(a, b);
}
ProfileDomainPtr make_peanut(double neck) {
    return std::make_shared<PeanutDomain>(neck);
}
ProfileDomainPtr make_stadium(double half_length, double cap_radius) {
    return std::make_shared<StadiumDomain>(half_length, cap_radius);
}
ProfileDomainPtr make_scaled(ProfileDomainPtr base, double factor) {
    if (factor == 1.0) return base;
    return std::make_shared<ScaledProfileDomain>(std::move(base), factor);
}

// ------------------------------------------------------- sup-convolution

namespace {

struct MaxResult {
    double value = -std::numeric_limits<double>::infinity();
    double xi = 0;
    bool at_lo = false, at_hi = false;
};

// maximize F over [lo, hi] by scan plus golden-section refinement
MaxResult maximize_1d(const std::function<double(double)>& F, double lo, double hi) {
    constexpr int kScan = 257;
    MaxResult best;
    for (int i = 0; i < kScan; ++i) {
        const double x = lo + (hi - lo) * i / (kScan - 1);
        const double v = F(x);
        if (v > best.value) {
            best.value = v;
            best.xi = x;
        }
    }
    const double step = (hi - lo) / (kScan - 1);
    double a = std::max(lo, best.xi - step), b = std::min(hi, best.xi + step);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = F(x1), f2 = F(x2);
    for (int it = 0; it < 80 && b - a > 1e-14 * std::max(1.0, std::abs(b) + std::abs(a)); ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = F(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = F(x1);
        }
    }
    best.xi = 0.5 * (a + b);
    best.value = F(best.xi);
    const double tol = 1e-10 * (hi - lo);
    best.at_lo = best.xi - lo < tol;
    best.at_hi = hi - best.xi < tol;
    return best;
}

} // namespace

ProfileDomainPtr sup_convolve_profiles(ProfileDomainPtr A, ProfileDomainPtr B,
                                       double w0, double w1, int grid_n) {
    require(w0 >= 0 && w1 >= 0, "sup_convolve: weights must be nonnegative");
    require(std::abs(w0 + w1 - 1.0) <= 1e-12, "sup_convolve: weights must sum to 1");
    if (w1 == 0.0) return make_scaled(A, w0);
    if (w0 == 0.0) return make_scaled(B, w1);

    const double lA = A->half_width(), lB = B->half_width();
    const double l = w0 * lA + w1 * lB;
    const int N = grid_n;
    std::vector<double> psi(N + 1, 0.0), dpsi(N + 1, kNaN), ddpsi(N + 1, kNaN);

    const double dz = 2 * l / N;
#pragma omp parallel for schedule(static)
    for (int j = 1; j < N; ++j) {
        const double zj = -l + dz * j;
        const double lo = std::max(-w0 * lA, zj - w1 * lB);
        const double hi = std::min(w0 * lA, zj + w1 * lB);
        auto F = [&](double xi) {
            return w0 * A->profile(xi / w0) + w1 * B->profile((zj - xi) / w1);
        };
        const MaxResult m = maximize_1d(F, lo, hi);
        psi[j] = m.value;
        const double xiA = m.xi / w0;
        const double etaB = (zj - m.xi) / w1;
        if (!m.at_lo && !m.at_hi) {
            // interior maximizer: matched slopes, harmonic-type second derivative
            dpsi[j] = B->profile_d1(etaB);
            const double alpha = A->profile_d2(xiA) / w0;
            const double beta = B->profile_d2(etaB) / w1;
            if (std::isfinite(alpha) && std::isfinite(beta) &&
                std::abs(alpha + beta) > 1e-14 && std::abs(alpha) < 1e12 &&
                std::abs(beta) < 1e12)
                ddpsi[j] = alpha * beta / (alpha + beta);
        } else {
            // one summand pinned at its vertex: differentiate through the other
            const bool a_pinned = std::abs(std::abs(xiA) - lA) < 1e-8 * std::max(1.0, lA);
            if (a_pinned) {
                dpsi[j] = B->profile_d1(etaB);
                const double b2 = B->profile_d2(etaB) / w1;
                if (std::isfinite(b2) && std::abs(b2) < 1e12) ddpsi[j] = b2;
            } else {
                dpsi[j] = A->profile_d1(xiA);
                const double a2 = A->profile_d2(xiA) / w0;
                if (std::isfinite(a2) && std::abs(a2) < 1e12) ddpsi[j] = a2;
            }
        }
        if (!std::isfinite(dpsi[j]) || std::abs(dpsi[j]) > 1e12) dpsi[j] = kNaN;
    }
    return std::make_shared<TableProfileDomain>(l, std::move(psi), std::move(dpsi),
                                                std::move(ddpsi));
}

// ----------------------------------------------------------- cross polygon

CrossPolygon::CrossPolygon(double a, double b) : a_(a), b_(b) {
    require(a > 1 && b > 1, "cross polygon: need a > 1 and b > 1");
    verts_ = {{a, -1}, {1, -1}, {1, -b}, {-1, -b}, {-1, -1}, {-a, -1},
              {-a, 1}, {-1, 1}, {-1, b},  {1, b},   {1, 1},   {a, 1}};
}

std::string CrossPolygon::describe() const {
    return "cross(" + fmt17(a_) + "," + fmt17(b_) + ")";
}

std::vector<Vec2> CrossPolygon::reentrant_vertices(double, double) {
    return {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
}

bool CrossPolygon::contains(Vec2 p) const {
    const double ax = std::abs(p.x), ay = std::abs(p.y);
    return (ax < a_ && ay < 1) || (ax < 1 && ay < b_);
}

BoundaryTrace CrossPolygon::boundary_trace(int n) const {
    require(n >= 64, "boundary_trace: need n >= 64");
    const std::size_t ne = verts_.size();
    double perimeter = 0;
    for (std::size_t e = 0; e < ne; ++e)
        perimeter += dist(verts_[e], verts_[(e + 1) % ne]);
    BoundaryTrace tr;
    double s = 0;
    for (std::size_t e = 0; e < ne; ++e) {
        const Vec2 v0 = verts_[e], v1 = verts_[(e + 1) % ne];
        const double len = dist(v0, v1);
        const int m = std::max(1, static_cast<int>(std::llround(n * len / perimeter)));
        const Vec2 tau = normalized(v1 - v0);
        for (int j = 0; j < m; ++j) {
            TraceSample q;
            const double f = double(j) / m;
            q.p = v0 + f * (v1 - v0);
            q.tau = tau;
            q.nu = outward_normal(tau);
            q.kappa = j == 0 ? kNaN : 0.0;
            q.vertex = j == 0;
            q.tag = static_cast<int>(e);
            q.s = s + f * len;
            tr.samples.push_back(q);
        }
        s += len;
    }
    tr.total_length = perimeter;
    return tr;
}

int CrossPolygon::classify_boundary(Vec2 p) const {
    const std::size_t ne = verts_.size();
    double best = std::numeric_limits<double>::infinity();
    int tag = 0;
    for (std::size_t e = 0; e < ne; ++e) {
        const Vec2 v0 = verts_[e], v1 = verts_[(e + 1) % ne];
        const Vec2 d = v1 - v0;
        const double t = std::clamp(dot(p - v0, d) / dot(d, d), 0.0, 1.0);
        const double dd = dist(p, v0 + t * d);
        if (dd < best) {
            best = dd;
            tag = static_cast<int>(e);
        }
    }
    return tag;
}

BoundaryFrame CrossPolygon::boundary_frame(Vec2 p) const {
    const int e = classify_boundary(p);
    const Vec2 v0 = verts_[e], v1 = verts_[(e + 1) % verts_.size()];
    BoundaryFrame f;
    f.tau = normalized(v1 - v0);
    f.nu = outward_normal(f.tau);
    f.kappa = 0;
    return f;
}

Vec2 CrossPolygon::project_boundary(Vec2 p, int tag) const {
    const std::size_t ne = verts_.size();
    const std::size_t e = static_cast<std::size_t>(tag) % ne;
    const Vec2 v0 = verts_[e], v1 = verts_[(e + 1) % ne];
    const Vec2 d = v1 - v0;
    const double t = std::clamp(dot(p - v0, d) / dot(d, d), 0.0, 1.0);
    return v0 + t * d;
}

std::shared_ptr<const CrossPolygon> make_cross(double a, double b) {
    return std::make_shared<CrossPolygon>(a, b);
}

// --------------------------------------------------- rounded cross polygon

RoundedCrossPolygon::RoundedCrossPolygon(double a, double b, double rho)
    : a_(a), b_(b), rho_(rho) {
    require(a > 1 && b > 1, "rounded cross: need a > 1 and b > 1");
    require(rho > 0 && rho < std::min(a, b) - 1,
            "rounded cross: need rho in (0, min(a,b) - 1)");
    CrossPolygon base(a, b);
    const auto& V = base.vertices();
    const std::size_t nv = V.size();
    const double min_edge = std::min({a - 1, b - 1, 2.0});
    require(2 * rho <= min_edge, "rounded cross: rho too large for the shortest edge");

    // clockwise pieces: for each edge, the shortened segment then the arc at
    // its end vertex
    for (std::size_t e = 0; e < nv; ++e) {
        const Vec2 v0 = V[e], v1 = V[(e + 1) % nv], v2 = V[(e + 2) % nv];
        const Vec2 u_in = normalized(v1 - v0);
        const Vec2 u_out = normalized(v2 - v1);
        Piece seg;
        seg.is_arc = false;
        seg.p0 = v0 + rho * u_in; // tangent point of the previous corner
        seg.p1 = v1 - rho * u_in;
        seg.kappa = 0;
        seg.length = dist(seg.p0, seg.p1);
        pieces_.push_back(seg);

        const bool convex = cross(u_in, u_out) < 0; // right turn on a clockwise loop
        Piece arc;
        arc.is_arc = true;
        arc.p0 = v1 - rho * u_in;
        arc.p1 = v1 + rho * u_out;
        const Vec2 n_in = convex ? Vec2{u_in.y, -u_in.x} : Vec2{-u_in.y, u_in.x};
        arc.center = arc.p0 + rho * n_in;
        arc.ang0 = std::atan2(arc.p0.y - arc.center.y, arc.p0.x - arc.center.x);
        arc.ang1 = std::atan2(arc.p1.y - arc.center.y, arc.p1.x - arc.center.x);
        // quarter sweep: clockwise (decreasing) for convex corners,
        // counterclockwise for reentrant ones
        if (convex) {
            while (arc.ang1 > arc.ang0) arc.ang1 -= 2 * pi;
        } else {
            while (arc.ang1 < arc.ang0) arc.ang1 += 2 * pi;
        }
        arc.kappa = convex ? 1 / rho : -1 / rho;
        arc.length = rho * std::abs(arc.ang1 - arc.ang0);
        pieces_.push_back(arc);
    }
}

std::string RoundedCrossPolygon::describe() const {
    return "rounded_cross(" + fmt17(a_) + "," + fmt17(b_) + "," + fmt17(rho_) + ")";
}

bool RoundedCrossPolygon::contains(Vec2 p) const {
    const double ax = std::abs(p.x), ay = std::abs(p.y);
    const bool in_cross = (ax < a_ && ay < 1) || (ax < 1 && ay < b_);
    if (!in_cross) {
        // reentrant fillets add material beyond the corners (+-1, +-1)
        if (ax >= 1 && ax < 1 + rho_ && ay >= 1 && ay < 1 + rho_)
            return std::hypot(ax - (1 + rho_), ay - (1 + rho_)) > rho_;
        return false;
    }
    // convex corner cuts remove material near the eight outer corners
    if (ax > a_ - rho_ && ay > 1 - rho_ &&
        std::hypot(ax - (a_ - rho_), ay - (1 - rho_)) > rho_)
        return false;
    if (ax > 1 - rho_ && ay > b_ - rho_ &&
        std::hypot(ax - (1 - rho_), ay - (b_ - rho_)) > rho_)
        return false;
    return true;
}

BoundaryTrace RoundedCrossPolygon::boundary_trace(int n) const {
    require(n >= 64, "boundary_trace: need n >= 64");
    double perimeter = 0;
    for (const auto& pc : pieces_) perimeter += pc.length;
    BoundaryTrace tr;
    double s = 0;
    int tag = 0;
    for (const auto& pc : pieces_) {
        const int m = std::max(1, static_cast<int>(std::llround(n * pc.length / perimeter)));
        for (int j = 0; j < m; ++j) {
            const double f = double(j) / m;
            TraceSample q;
            q.tag = tag;
            q.s = s + f * pc.length;
            if (!pc.is_arc) {
                q.p = pc.p0 + f * (pc.p1 - pc.p0);
                q.tau = normalized(pc.p1 - pc.p0);
                q.kappa = 0;
            } else {
                const double ang = pc.ang0 + f * (pc.ang1 - pc.ang0);
                q.p = pc.center + Vec2{rho_ * std::cos(ang), rho_ * std::sin(ang)};
                const double dir = pc.ang1 > pc.ang0 ? 1.0 : -1.0;
                q.tau = {-std::sin(ang) * dir, std::cos(ang) * dir};
                q.kappa = pc.kappa;
            }
            q.nu = outward_normal(q.tau);
            tr.samples.push_back(q);
        }
        s += pc.length;
        ++tag;
    }
    tr.total_length = perimeter;
    return tr;
}

int RoundedCrossPolygon::classify_boundary(Vec2 p) const {
    double best = std::numeric_limits<double>::infinity();
    int tag = 0;
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
        const auto& pc = pieces_[k];
        double dd;
        if (!pc.is_arc) {
            const Vec2 d = pc.p1 - pc.p0;
            const double t = std::clamp(dot(p - pc.p0, d) / dot(d, d), 0.0, 1.0);
            dd = dist(p, pc.p0 + t * d);
        } else {
            double ang = std::atan2(p.y - pc.center.y, p.x - pc.center.x);
            const double lo = std::min(pc.ang0, pc.ang1), hi = std::max(pc.ang0, pc.ang1);
            while (ang < lo - pi) ang += 2 * pi;
            while (ang > hi + pi) ang -= 2 * pi;
            if (ang < lo || ang > hi) {
                dd = std::min(dist(p, pc.p0), dist(p, pc.p1));
            } else {
                dd = std::abs(dist(p, pc.center) - rho_);
            }
        }
        if (dd < best) {
            best = dd;
            tag = static_cast<int>(k);
        }
    }
    return tag;
}

BoundaryFrame RoundedCrossPolygon::boundary_frame(Vec2 p) const {
    const auto& pc = pieces_[classify_boundary(p)];
    BoundaryFrame f;
    if (!pc.is_arc) {
        f.tau = normalized(pc.p1 - pc.p0);
        f.nu = outward_normal(f.tau);
        f.kappa = 0;
        return f;
    }
    double ang = std::atan2(p.y - pc.center.y, p.x - pc.center.x);
    const double dir = pc.ang1 > pc.ang0 ? 1.0 : -1.0;
    f.tau = {-std::sin(ang) * dir, std::cos(ang) * dir};
    f.nu = outward_normal(f.tau);
    f.kappa = pc.kappa;
    return f;
}

Vec2 RoundedCrossPolygon::project_boundary(Vec2 p, int tag) const {
    const auto& pc = pieces_.at(static_cast<std::size_t>(tag) % pieces_.size());
    if (!pc.is_arc) {
        const Vec2 d = pc.p1 - pc.p0;
        const double t = std::clamp(dot(p - pc.p0, d) / dot(d, d), 0.0, 1.0);
        return pc.p0 + t * d;
    }
    return pc.center + rho_ * normalized(p - pc.center);
}

std::shared_ptr<const RoundedCrossPolygon> make_rounded_cross(double a, double b,
                                                              double rho) {
    return std::make_shared<RoundedCrossPolygon>(a, b, rho);
}

// ------------------------------------------------------------ json config

DomainPtr domain_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        fail(std::string("domain config: invalid JSON: ") + e.what());
    }
    const std::string kind = j.value("kind", "");
    auto num = [&](const char* key, double dflt = kNaN) {
        if (j.contains(key)) return j.at(key).get<double>();
        require(!std::isnan(dflt), std::string("domain config: missing field '") + key + "'");
        return dflt;
    };
    if (kind == "disk") return make_disk(num("radius", 1.0));
    if (kind == "ellipse") return make_ellipse(num("a"), num("b"));
    if (kind == "peanut") return make_peanut(num("neck"));
    if (kind == "stadium") return make_stadium(num("length", 1.0), num("radius", 0.5));
    if (kind == "cross") return make_cross(num("a"), num("b"));
    if (kind == "rounded_cross") return make_rounded_cross(num("a"), num("b"), num("rho"));
    fail("domain config: unknown kind '" + kind + "'");
}

// ----------------------------------------------------- deformation family

DomainPtr DeformationFamily::at(double t) const {
    require(t >= 0 && t <= 1, "family: t must lie in [0, 1]");
    if (t == 0.0) return omega0;
    if (t == 1.0) return omega1;
    if (t <= 1.0 / 3.0) {
        const double f = 1 - 3 * t + 3 * t / (eps * delta0);
        return make_scaled(omega0, f);
    }
    if (t >= 2.0 / 3.0) {
        const double f = 3 * t - 2 + (3 - 3 * t) / (eps * delta1);
        return make_scaled(omega1, f);
    }
    const double s = 3 * t - 1;
    return sup_convolve_profiles(make_scaled(omega0, 1 / (eps * delta0)),
                                 make_scaled(omega1, 1 / (eps * delta1)), 1 - s, s);
}

DeformationFamily build_family(ProfileDomainPtr omega0, ProfileDomainPtr omega1,
                               double beta, double safety) {
    require(beta > 0, "build_family: beta must be positive");
    require(safety > 0 && safety < 1, "build_family: safety must lie in (0, 1)");
    DeformationFamily fam;
    fam.omega0 = std::move(omega0);
    fam.omega1 = std::move(omega1);
    fam.beta = beta;
    fam.safety = safety;

    for (const auto& om : {fam.omega0, fam.omega1}) {
        const auto a2 = check_condition_A2(beta, om->boundary_trace(1024));
        require(a2.holds, "build_family: endpoint " + om->describe() +
                              " violates condition (A2), margin " + fmt17(a2.margin));
    }

    const double l0 = fam.omega0->half_width(), l1 = fam.omega1->half_width();
    fam.l_star = std::max(l0, l1);
    fam.delta0 = l0 / fam.l_star;
    fam.delta1 = l1 / fam.l_star;

    // curvature lower bound of the normalized middle family, sampled on a
    // t-grid and inflated (the underlying lemma only asserts existence of C)
    const auto A0 = make_scaled(fam.omega0, 1 / fam.delta0);
    const auto B0 = make_scaled(fam.omega1, 1 / fam.delta1);
    double worst = 0;
    constexpr int kGrid = 33;
    for (int i = 0; i < kGrid; ++i) {
        const double q = double(i) / (kGrid - 1);
        const auto dom = sup_convolve_profiles(A0, B0, 1 - q, q, 1024);
        worst = std::max(worst, -min_curvature(dom->boundary_trace(1024)));
    }
    fam.C = 1.25 * std::max(0.0, worst);
    fam.eps = safety * (fam.C > 0 ? std::min(1.0, beta / fam.C) : 1.0);

    for (int i = 0; i < kGrid; ++i) {
        const double t = double(i) / (kGrid - 1);
        const auto a2 = check_condition_A2(beta, fam.at(t)->boundary_trace(1024));
        require(a2.holds, "build_family: condition (A2) fails along the path at t = " +
                              fmt17(t) + " (margin " + fmt17(a2.margin) +
                              "); refine the C estimation grid");
    }
    return fam;
}

} // namespace torsion
