#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace zebra {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline int sgn(const Rat& x) { return x.sign(); }
inline int sgn(const Int& x) { return x.sign(); }

// Exact 2D vector over the rationals. Every geometric predicate in the
// project bottoms out in signs of cross/dot products of these.
struct Vec2 {
    Rat x{0};
    Rat y{0};

    Vec2() = default;
    Vec2(Rat xx, Rat yy) : x(std::move(xx)), y(std::move(yy)) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2 operator*(const Rat& s) const { return {x * s, y * s}; }
    bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
    bool operator!=(const Vec2& o) const { return !(*this == o); }
    bool is_zero() const { return x == 0 && y == 0; }
};

inline Vec2 operator*(const Rat& s, const Vec2& v) { return v * s; }

inline Rat cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline Rat dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

// Strictly positive iff b lies counterclockwise of a (within a half turn).
inline int cross_sign(const Vec2& a, const Vec2& b) { return sgn(cross(a, b)); }
inline int dot_sign(const Vec2& a, const Vec2& b) { return sgn(dot(a, b)); }

inline bool parallel(const Vec2& a, const Vec2& b) { return cross(a, b) == 0; }
inline bool same_ray(const Vec2& a, const Vec2& b) {
    return cross(a, b) == 0 && dot_sign(a, b) > 0;
}

// Scalar affine map x |-> a*x + b with a != 0. Scalar derivative is what a
// translation / dilation / half-dilation structure permits; composing and
// inverting these stays in the family.
struct AffineMap {
    Rat a{1};
    Vec2 b{};

    Vec2 operator()(const Vec2& v) const { return {a * v.x + b.x, a * v.y + b.y}; }

    // this∘o: apply o first.
    AffineMap compose(const AffineMap& o) const {
        return {a * o.a, {a * o.b.x + b.x, a * o.b.y + b.y}};
    }
    AffineMap inverse() const {
        Rat ia = Rat(1) / a;
        return {ia, {-ia * b.x, -ia * b.y}};
    }
    bool operator==(const AffineMap& o) const { return a == o.a && b == o.b; }
    bool is_identity() const { return a == 1 && b.is_zero(); }

    // Fixed point, defined when a != 1.
    Vec2 fixed_point() const {
        Rat d = Rat(1) - a;
        return {b.x / d, b.y / d};
    }
};

inline AffineMap identity_map() { return AffineMap{}; }

// ---- rational string round-trips ("p" or "p/q") ------------------------

std::string rat_to_string(const Rat& r);
std::optional<Rat> rat_from_string(const std::string& s);

inline std::string vec_to_string(const Vec2& v) {
    return "(" + rat_to_string(v.x) + ", " + rat_to_string(v.y) + ")";
}

// Primitive integer direction vector: the canonical representative of the
// oriented ray through a nonzero rational vector. Two vectors canonicalize
// equal iff they are positive multiples of one another.
struct Direction {
    Int x{0};
    Int y{0};

    Direction() = default;
    explicit Direction(const Vec2& v);
    bool operator==(const Direction& o) const { return x == o.x && y == o.y; }
    Vec2 vec() const { return {Rat(x), Rat(y)}; }
    Direction opposite() const {
        Direction d;
        d.x = -x;
        d.y = -y;
        return d;
    }
};

// Unoriented slope dy/dx in Q ∪ {∞}, the index set of the foliation family.
struct Slope {
    bool infinite = false;
    Rat value{0};

    static Slope of(const Vec2& v) {
        if (v.is_zero()) throw std::invalid_argument("slope of zero vector");
        if (v.x == 0) return {true, Rat(0)};
        return {false, v.y / v.x};
    }
    bool operator==(const Slope& o) const {
        return infinite == o.infinite && (infinite || value == o.value);
    }
    std::string str() const { return infinite ? "inf" : rat_to_string(value); }
};

double to_double(const Rat& r);

}  // namespace zebra
