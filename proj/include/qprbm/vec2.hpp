#pragma once

#include <cmath>

namespace qprbm {

// Planar point / vector. Components follow the coordinate convention
// x1 = horizontal, x2 = vertical; the quarter plane is {x1 >= 0, x2 >= 0}.
struct Vec2 {
    double x1 = 0.0;
    double x2 = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double a, double b) : x1(a), x2(b) {}

    constexpr double operator[](int i) const { return i == 0 ? x1 : x2; }

    constexpr Vec2 operator+(Vec2 o) const { return {x1 + o.x1, x2 + o.x2}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x1 - o.x1, x2 - o.x2}; }
    constexpr Vec2 operator*(double s) const { return {x1 * s, x2 * s}; }
    constexpr Vec2& operator+=(Vec2 o) {
        x1 += o.x1;
        x2 += o.x2;
        return *this;
    }
    constexpr bool operator==(const Vec2&) const = default;

    constexpr double dot(Vec2 o) const { return x1 * o.x1 + x2 * o.x2; }
    constexpr double norm2() const { return x1 * x1 + x2 * x2; }
    double norm() const { return std::hypot(x1, x2); }

    constexpr double comp(int i) const { return i == 0 ? x1 : x2; }
    void set_comp(int i, double v) { (i == 0 ? x1 : x2) = v; }
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

inline double dist(Vec2 a, Vec2 b) { return (a - b).norm(); }

}  // namespace qprbm
