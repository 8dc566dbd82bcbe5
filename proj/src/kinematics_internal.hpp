#pragma once

// Straight-line stepping internals shared by the tracers (kinematics.cpp)
// and the cylinder sweeps (closed_trails.cpp). Not installed; contracts may
// change freely with their callers.

#include <array>
#include <vector>

#include "zebra/errors.hpp"
#include "zebra/kinematics.hpp"
#include "zebra/surface.hpp"

namespace zebra {
namespace internal {

struct ExitInfo {
    Rat t;                       // exit parameter along p + t*d
    int tight[2] = {-1, -1};     // edges met at the exit point (1 or 2)
    int ntight = 0;
};

// Latest parameter at which p + t*d still lies in the closed triangle.
inline ExitInfo find_exit(const std::array<Vec2, 3>& tri, const Vec2& p,
                          const Vec2& d) {
    if (d.is_zero())
        throw Error(ErrorCode::InvalidArgument, "cannot trace a zero direction");
    bool have = false;
    Rat tmax = 0;
    Rat f[3], g[3];
    for (int e = 0; e < 3; ++e) {
        Vec2 edge = tri[(e + 1) % 3] - tri[e];
        f[e] = cross(edge, p - tri[e]);
        g[e] = cross(edge, d);
        if (f[e] < 0)
            throw Error(ErrorCode::InvalidArgument, "trace point left its triangle");
        if (g[e] < 0) {
            Rat te = -f[e] / g[e];
            if (!have || te < tmax) {
                tmax = te;
                have = true;
            }
        }
    }
    if (!have)
        throw Error(ErrorCode::InvalidArgument,
                    "direction never leaves the triangle");
    ExitInfo out;
    out.t = tmax;
    for (int e = 0; e < 3; ++e)
        if (f[e] + tmax * g[e] == 0) out.tight[out.ntight++] = e;
    if (out.ntight == 0 || out.ntight > 2)
        throw Error(ErrorCode::InvalidArgument, "degenerate triangle exit");
    return out;
}

inline int corner_of_tight_pair(int e0, int e1) {
    // Edges e and e+1 share corner e+1.
    if ((e0 + 1) % 3 == e1) return e1;
    return e0;  // pair {e1, e0} with e1 + 1 == e0 handled by sorted inputs {0,2}
}

// Shared stepping state for straight-line traces.
struct Walker {
    const Surface& s;
    int t;
    Vec2 p, d;
    AffineMap place = identity_map();  // chart of t -> starting chart
    Rat deriv = 1;                     // accumulated direction scaling
    std::vector<HalfEdge> word;

    explicit Walker(const Surface& s_, const SurfacePoint& start, Vec2 dir)
        : s(s_), t(start.tri), p(start.p), d(std::move(dir)) {}

    void cross_edge(HalfEdge h, const Vec2& exit_pt) {
        word.push_back(h);
        AffineMap back = s.glue(s.twin(h));  // current chart -> twin chart
        place = place.compose(s.glue(h));
        p = back(exit_pt);
        d = d * back.a;
        deriv = deriv * back.a;
        t = he_tri(s.twin(h));
    }

    // Returns false (leaving state untouched except for an error flag) when
    // the vertex is singular; passes straight through cone angle 2pi.
    bool pass_vertex(int corner, int* blocked_vertex) {
        int v = s.vertex_at(t, corner);
        if (s.cones()[v].alpha != 0) {
            if (blocked_vertex) *blocked_vertex = v;
            return false;
        }
        Vec2 apex = s.triangle(t)[corner];
        int tc = t, cc = corner;
        AffineMap m = identity_map();  // wedge chart -> current chart
        int guard = 0;
        while (true) {
            if (++guard > static_cast<int>(s.cones()[v].corners.size()) + 1)
                throw Error(ErrorCode::InvalidArgument,
                            "pass-through failed to find a continuation wedge");
            HalfEdge crossed = half_edge(tc, (cc + 2) % 3);
            AffineMap m_next = m.compose(s.glue(crossed));
            auto [t2, c2] = s.corner_next_ccw(tc, cc);
            word.push_back(crossed);
            place = place.compose(s.glue(crossed));
            tc = t2;
            cc = c2;
            m = m_next;
            const auto& tw = s.triangle(tc);
            Vec2 a = m(tw[(cc + 1) % 3]) - apex;
            Vec2 b = m(tw[(cc + 2) % 3]) - apex;
            bool inside = same_ray(d, a) ||
                          (cross_sign(a, d) > 0 && cross_sign(d, b) > 0);
            if (inside) {
                t = tc;
                p = tw[cc];
                d = d * (Rat(1) / m.a);
                deriv = deriv * (Rat(1) / m.a);
                return true;
            }
        }
    }
};

}  // namespace internal
}  // namespace zebra
