#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace torsion {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 normalized(Vec2 a) {
    const double n = norm(a);
    return {a.x / n, a.y / n};
}
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

/// Formats a double with 17 significant digits (decimal round-trip exact).
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

[[noreturn]] inline void fail(const std::string& msg) {
    throw std::runtime_error(msg);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

constexpr double pi = 3.14159265358979323846;

} // namespace torsion
