#include "swimcycle/se2.hpp"

#include <numbers>
#include <string>

#include "swimcycle/error.hpp"

namespace swimcycle {

double wrap_angle(double theta) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (theta > -std::numbers::pi && theta <= std::numbers::pi) return theta;
    double r = std::remainder(theta, two_pi);  // [-pi, pi]
    if (r <= -std::numbers::pi) r += two_pi;
    return r;
}

SE2 SE2::rotation(double theta) { return {wrap_angle(theta), 0.0, 0.0}; }

Vec2 SE2::act_point(const Vec2& p) const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * p.x - s * p.y + tx, s * p.x + c * p.y + ty};
}

Vec2 SE2::act_vector(const Vec2& v) const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

SE2 SE2::inverse() const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {wrap_angle(-theta), -(c * tx + s * ty), s * tx - c * ty};
}

SE2 compose(const SE2& a, const SE2& b) {
    const Vec2 t = a.act_point(b.translation_part());
    return {wrap_angle(a.theta + b.theta), t.x, t.y};
}

SE2 power(const SE2& z, int k) {
    SE2 step = k >= 0 ? z : z.inverse();
    SE2 out = SE2::identity();
    for (int i = 0; i < std::abs(k); ++i) out = compose(step, out);
    return out;
}

void to_json(nlohmann::json& j, const SE2& z) {
    j = nlohmann::json{{"theta", z.theta}, {"tx", z.tx}, {"ty", z.ty}};
}

void from_json(const nlohmann::json& j, SE2& z) {
    z.theta = wrap_angle(j.at("theta").get<double>());
    z.tx = j.at("tx").get<double>();
    z.ty = j.at("ty").get<double>();
}

std::vector<Vec2> act_points(const SE2& z, std::span<const Vec2> points) {
    std::vector<Vec2> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(z.act_point(p));
    return out;
}

std::vector<Vec2> act_vectors(const SE2& z, std::span<const Vec2> vectors) {
    std::vector<Vec2> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) out.push_back(z.act_vector(v));
    return out;
}

Vec2 mass_centroid(std::span<const Vec2> points, std::span<const double> masses) {
    Vec2 c;
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        c += masses[i] * points[i];
        total += masses[i];
    }
    return (1.0 / total) * c;
}

namespace {

void check_sizes(std::span<const Vec2> positions, std::span<const double> masses,
                 std::span<const Vec2> templ) {
    if (positions.size() != templ.size() || masses.size() != templ.size())
        throw ShapeMismatch("align: positions/masses/template sizes differ (" +
                            std::to_string(positions.size()) + "/" +
                            std::to_string(masses.size()) + "/" +
                            std::to_string(templ.size()) + ")");
    if (templ.size() < 3) throw DegenerateShape("align: need at least 3 nodes");
}

std::vector<Vec2> centred(std::span<const Vec2> pts, std::span<const double> masses) {
    const Vec2 c = mass_centroid(pts, masses);
    std::vector<Vec2> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(p - c);
    return out;
}

}  // namespace

Alignment align(std::span<const Vec2> positions, std::span<const Vec2> velocities,
                std::span<const double> masses, std::span<const Vec2> templ,
                DegeneratePolicy policy) {
    check_sizes(positions, masses, templ);
    if (!velocities.empty() && velocities.size() != positions.size())
        throw ShapeMismatch("align: velocity count differs from position count");

    const std::vector<Vec2> t = centred(templ, masses);
    double t_scale = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) t_scale += masses[i] * dot(t[i], t[i]);
    if (!(t_scale > 0.0)) throw DegenerateShape("align: template nodes are coincident");

    const Vec2 c = mass_centroid(positions, masses);
    double s_cross = 0.0, s_dot = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const Vec2 x = positions[i] - c;
        s_cross += masses[i] * cross(t[i], x);
        s_dot += masses[i] * dot(t[i], x);
        scale += masses[i] * norm(t[i]) * norm(x);
    }

    double theta = 0.0;
    if (std::hypot(s_cross, s_dot) <= 1e-14 * scale || scale == 0.0) {
        if (policy == DegeneratePolicy::Throw)
            throw DegenerateShape("align: cross-covariance vanishes, rotation undetermined");
    } else {
        theta = std::atan2(s_cross, s_dot);
    }

    Alignment out;
    out.group = {wrap_angle(theta), c.x, c.y};
    const SE2 inv = out.group.inverse();
    out.shape = act_points(inv, positions);
    out.velocities = act_vectors(inv, velocities);
    return out;
}

double procrustes_objective(const SE2& g, std::span<const Vec2> positions,
                            std::span<const double> masses, std::span<const Vec2> templ) {
    check_sizes(positions, masses, templ);
    const std::vector<Vec2> t = centred(templ, masses);
    const SE2 inv = g.inverse();
    double f = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const Vec2 d = inv.act_point(positions[i]) - t[i];
        f += masses[i] * dot(d, d);
    }
    return f;
}

}  // namespace swimcycle
