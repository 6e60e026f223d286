#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <json.hpp>

namespace swimcycle {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
    friend Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
    friend Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
    friend Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return a *= s; }
    friend Vec2 operator*(Vec2 a, double s) { return a *= s; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
inline Vec2 perp(const Vec2& a) { return {-a.y, a.x}; }

// Wraps into (-pi, pi].
double wrap_angle(double theta);

// Rigid motion of the plane: p -> R(theta) p + (tx, ty).
struct SE2 {
    double theta = 0.0;
    double tx = 0.0;
    double ty = 0.0;

    static SE2 identity() { return {}; }
    static SE2 rotation(double theta);
    static SE2 translation(double tx, double ty) { return {0.0, tx, ty}; }

    Vec2 act_point(const Vec2& p) const;
    Vec2 act_vector(const Vec2& v) const;
    SE2 inverse() const;

    Vec2 translation_part() const { return {tx, ty}; }
};

// "first b, then a"
SE2 compose(const SE2& a, const SE2& b);

// z^k by repeated composition (k may be negative).
SE2 power(const SE2& z, int k);

void to_json(nlohmann::json& j, const SE2& z);
void from_json(const nlohmann::json& j, SE2& z);

std::vector<Vec2> act_points(const SE2& z, std::span<const Vec2> points);
std::vector<Vec2> act_vectors(const SE2& z, std::span<const Vec2> vectors);

enum class DegeneratePolicy { Throw, TieBreak };

// Quotient of a configuration by SE(2): group part plus aligned representative.
struct Alignment {
    SE2 group;
    std::vector<Vec2> shape;
    std::vector<Vec2> velocities;
};

// Mass-weighted planar Procrustes against a template. The template is used
// through its centred copy, so the returned shape always has its mass
// centroid at the origin.
Alignment align(std::span<const Vec2> positions, std::span<const Vec2> velocities,
                std::span<const double> masses, std::span<const Vec2> templ,
                DegeneratePolicy policy = DegeneratePolicy::Throw);

// sum_i m_i |g^{-1} x_i - t_i|^2 with t the centred template.
double procrustes_objective(const SE2& g, std::span<const Vec2> positions,
                            std::span<const double> masses, std::span<const Vec2> templ);

Vec2 mass_centroid(std::span<const Vec2> points, std::span<const double> masses);

}  // namespace swimcycle
