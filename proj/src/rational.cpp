#include "zebra/rational.hpp"

#include <boost/multiprecision/integer.hpp>

namespace zebra {

std::string rat_to_string(const Rat& r) {
    const Int& num = numerator(r);
    const Int& den = denominator(r);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

std::optional<Rat> rat_from_string(const std::string& s) {
    if (s.empty()) return std::nullopt;
    auto parse_int = [](const std::string& t) -> std::optional<Int> {
        if (t.empty()) return std::nullopt;
        std::size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
        if (i == t.size()) return std::nullopt;
        for (; i < t.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(t[i]))) return std::nullopt;
        return Int(t);
    };
    auto slash = s.find('/');
    if (slash == std::string::npos) {
        auto n = parse_int(s);
        if (!n) return std::nullopt;
        return Rat(*n);
    }
    auto n = parse_int(s.substr(0, slash));
    auto d = parse_int(s.substr(slash + 1));
    if (!n || !d || *d == 0) return std::nullopt;
    return Rat(*n, *d);
}

Direction::Direction(const Vec2& v) {
    if (v.is_zero()) throw std::invalid_argument("direction of zero vector");
    // Clear denominators, then divide out the gcd; sign of the multiplier is
    // kept positive so the oriented ray is preserved.
    Int nx = numerator(v.x) * denominator(v.y);
    Int ny = numerator(v.y) * denominator(v.x);
    Int g = boost::multiprecision::gcd(abs(nx), abs(ny));
    x = nx / g;
    y = ny / g;
}

double to_double(const Rat& r) { return r.convert_to<double>(); }

}  // namespace zebra
