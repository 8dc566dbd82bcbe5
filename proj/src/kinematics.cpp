#include "zebra/kinematics.hpp"

#include <algorithm>

#include "kinematics_internal.hpp"
#include "zebra/errors.hpp"

namespace zebra {
namespace {

// c lies in the half-open ccw sector (a, b], where the sweep from a to b is
// strictly less than a half turn.
bool in_sector(const Vec2& a, const Vec2& b, const Vec2& c) {
    if (same_ray(c, b)) return true;
    if (parallel(c, a)) return false;
    return cross_sign(a, c) > 0 && cross_sign(c, b) > 0;
}

}  // namespace

FanAngle fan_angle(const std::vector<Vec2>& rays) {
    if (rays.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "fan needs at least two rays");
    for (size_t i = 0; i < rays.size(); ++i)
        if (rays[i].is_zero())
            throw Error(ErrorCode::InvalidArgument, "fan contains a zero ray");
    FanAngle out;
    const Vec2& r0 = rays.front();
    Vec2 r0n = -r0;
    for (size_t i = 1; i < rays.size(); ++i) {
        if (cross_sign(rays[i - 1], rays[i]) <= 0)
            throw Error(ErrorCode::InvalidArgument,
                        "fan rays must turn left by less than a half turn");
        if (in_sector(rays[i - 1], rays[i], r0)) ++out.half_turns;
        if (in_sector(rays[i - 1], rays[i], r0n)) ++out.half_turns;
    }
    out.exact = parallel(rays.back(), r0);
    return out;
}

AngleCmp angle_cmp_k_pi(const std::vector<Vec2>& rays, int k) {
    FanAngle fa = fan_angle(rays);
    if (fa.exact) {
        if (fa.half_turns == k) return AngleCmp::Equal;
        return fa.half_turns < k ? AngleCmp::Less : AngleCmp::Greater;
    }
    // theta in (half_turns*pi, (half_turns+1)*pi)
    return fa.half_turns < k ? AngleCmp::Less : AngleCmp::Greater;
}

AngleCmp angle_cmp_pi(const std::vector<Vec2>& rays) {
    return angle_cmp_k_pi(rays, 1);
}

bool word_is_closed(const Surface& s, const std::vector<HalfEdge>& word) {
    if (word.empty()) return false;
    for (size_t i = 0; i + 1 < word.size(); ++i)
        if (he_tri(s.twin(word[i])) != he_tri(word[i + 1])) return false;
    return he_tri(s.twin(word.back())) == he_tri(word.front());
}

std::vector<DevelopStep> develop_word(const Surface& s, int start_tri,
                                      const std::vector<HalfEdge>& word) {
    std::vector<DevelopStep> steps;
    steps.push_back({start_tri, identity_map()});
    int t = start_tri;
    AffineMap pl = identity_map();
    for (HalfEdge h : word) {
        if (he_tri(h) != t)
            throw Error(ErrorCode::InvalidArgument,
                        "dual word crossing does not start in the current triangle");
        pl = pl.compose(s.glue(h));
        t = he_tri(s.twin(h));
        steps.push_back({t, pl});
    }
    return steps;
}

AffineMap loop_holonomy(const Surface& s, const std::vector<HalfEdge>& word) {
    if (!word_is_closed(s, word))
        throw Error(ErrorCode::InvalidArgument, "word is not a closed dual loop");
    return develop_word(s, he_tri(word.front()), word).back().place;
}

LocatedPoint locate(const Surface& s, const SurfacePoint& q) {
    const auto& tri = s.triangle(q.tri);
    int zero[3], nz = 0;
    for (int e = 0; e < 3; ++e) {
        int sgn = cross_sign(tri[(e + 1) % 3] - tri[e], q.p - tri[e]);
        if (sgn < 0)
            throw Error(ErrorCode::InvalidArgument,
                        "point " + vec_to_string(q.p) + " is outside triangle " +
                            std::to_string(q.tri));
        if (sgn == 0) zero[nz++] = e;
    }
    LocatedPoint out;
    out.at = q;
    if (nz == 0) {
        out.locus = PointLocus::Interior;
        return out;
    }
    if (nz == 1) {
        out.locus = PointLocus::OnEdge;
        out.edge = zero[0];
        HalfEdge h = half_edge(q.tri, zero[0]);
        HalfEdge w = s.twin(h);
        if (w < h) {
            out.at.tri = he_tri(w);
            out.at.p = s.glue(w)(q.p);
        }
        return out;
    }
    out.locus = PointLocus::AtVertex;
    out.corner = (zero[0] == 0 && zero[1] == 2) ? 0 : zero[1];
    out.vertex = s.vertex_at(q.tri, out.corner);
    auto [ct, cc] = s.cones()[out.vertex].corners.front();
    out.at = {ct, s.triangle(ct)[cc]};
    return out;
}

std::vector<WedgePlacement> vertex_fan(const Surface& s, int tri, int corner) {
    std::vector<WedgePlacement> fan;
    int t = tri, c = corner;
    AffineMap m = identity_map();
    do {
        fan.push_back({t, c, m});
        HalfEdge crossed = half_edge(t, (c + 2) % 3);
        m = m.compose(s.glue(crossed));
        auto [t2, c2] = s.corner_next_ccw(t, c);
        t = t2;
        c = c2;
    } while (!(t == tri && c == corner));
    return fan;
}

ContinuationCone continuation_cone(const Surface& s, int tri, int corner,
                                   const Vec2& in_dir) {
    if (in_dir.is_zero())
        throw Error(ErrorCode::InvalidArgument, "zero arrival direction");
    int v = s.vertex_at(tri, corner);
    const ConeData& cone = s.cones()[v];
    if (cone.alpha == 0)
        throw Error(ErrorCode::RemovableVertex,
                    "vertex " + std::to_string(v) +
                        " has cone angle 2pi; trails pass it straight through");
    ContinuationCone out;
    out.alpha = cone.alpha;
    out.apex = s.triangle(tri)[corner];
    out.fan = vertex_fan(s, tri, corner);
    if (cone.is_pole) {
        out.pole_bounce = true;
        out.lo = out.hi = ConePos{0, -in_dir};
        return out;
    }
    // Sweep ccw from the backward ray -in_dir; outgoing rays between one half
    // turn and alpha+1 half turns are legal.
    Vec2 back = -in_dir;
    int n = static_cast<int>(out.fan.size());
    Vec2 prev = back;
    int crossings = 0;
    bool have_lo = false;
    for (int step = 0; step < 2 * n && crossings < out.alpha + 1; ++step) {
        const WedgePlacement& w = out.fan[step % n];
        const auto& tw = s.triangle(w.tri);
        Vec2 far_ray = w.place(tw[(w.corner + 2) % 3]) - w.place(tw[w.corner]);
        if (parallel(far_ray, prev) && same_ray(far_ray, prev)) continue;
        // Each sweep step turns less than pi, so it meets the in_dir line at
        // most once; crossing parity alternates the met direction.
        Vec2 met = crossings % 2 == 0 ? in_dir : back;
        if (in_sector(prev, far_ray, met)) {
            ++crossings;
            if (crossings == 1) {
                out.lo = ConePos{step % n, in_dir};
                have_lo = true;
            }
            if (crossings == out.alpha + 1)
                out.hi = ConePos{step % n, met};
        }
        prev = far_ray;
    }
    if (!have_lo || crossings < out.alpha + 1)
        throw Error(ErrorCode::InvalidArgument,
                    "continuation cone sweep failed to close");
    return out;
}

using internal::ExitInfo;
using internal::Walker;
using internal::corner_of_tight_pair;
using internal::find_exit;

LeafTrace trace_leaf(const Surface& s, const SurfacePoint& start, Vec2 dir,
                     int max_steps) {
    locate(s, start);  // containment check
    LeafTrace out;
    Walker w(s, start, std::move(dir));
    Vec2 d0 = w.d;
    out.polyline.push_back(start);
    for (int step = 0; step < max_steps; ++step) {
        if (w.t == start.tri && cross_sign(w.d, start.p - w.p) == 0) {
            Rat num = dot(start.p - w.p, w.d);
            if (num > 0 || (num == 0 && step > 0)) {
                Rat tback = num / dot(w.d, w.d);
                ExitInfo exit = find_exit(s.triangle(w.t), w.p, w.d);
                if (tback < exit.t || (tback == 0 && step > 0)) {
                    out.status = LeafTrace::Status::Closed;
                    out.steps = step;
                    out.holonomy = w.deriv;
                    out.orientation_preserving = dot(w.d, d0) > 0;
                    out.word = w.word;
                    out.polyline.push_back({w.t, start.p});
                    out.end = {w.t, start.p};
                    return out;
                }
            }
        }
        ExitInfo exit = find_exit(s.triangle(w.t), w.p, w.d);
        Vec2 exit_pt = w.p + w.d * exit.t;
        if (exit.ntight == 1) {
            w.cross_edge(half_edge(w.t, exit.tight[0]), exit_pt);
        } else {
            int corner = corner_of_tight_pair(exit.tight[0], exit.tight[1]);
            int blocked = -1;
            w.p = exit_pt;
            if (!w.pass_vertex(corner, &blocked)) {
                out.status = LeafTrace::Status::HitSingularity;
                out.steps = step + 1;
                out.singular_vertex = blocked;
                out.polyline.push_back({w.t, exit_pt});
                out.end = {w.t, exit_pt};
                return out;
            }
        }
        out.polyline.push_back({w.t, w.p});
        out.steps = step + 1;
    }
    out.status = LeafTrace::Status::Budget;
    out.end = {w.t, w.p};
    return out;
}

SegmentTrace trace_segment(const Surface& s, const SurfacePoint& start,
                           const Vec2& target, int max_steps) {
    locate(s, start);
    SegmentTrace out;
    Vec2 goal = target;  // in the current chart; transformed while crossing
    Walker w(s, start, target - start.p);
    if (w.d.is_zero()) {
        out.reached = true;
        out.end = start;
        out.end_place = identity_map();
        return out;
    }
    bool arrived = false;
    for (int step = 0; step < max_steps && !arrived; ++step) {
        w.d = goal - w.p;
        if (w.d.is_zero()) {
            arrived = true;
            break;
        }
        ExitInfo exit = find_exit(s.triangle(w.t), w.p, w.d);
        if (exit.t >= 1) {  // target inside (or on the rim of) this triangle
            arrived = true;
            break;
        }
        Vec2 exit_pt = w.p + w.d * exit.t;
        if (exit.ntight == 1) {
            HalfEdge h = half_edge(w.t, exit.tight[0]);
            AffineMap back = s.glue(s.twin(h));
            goal = back(goal);
            w.cross_edge(h, exit_pt);
        } else {
            int corner = corner_of_tight_pair(exit.tight[0], exit.tight[1]);
            int blocked = -1;
            w.p = exit_pt;
            AffineMap before = w.place;
            if (!w.pass_vertex(corner, &blocked)) {
                out.reached = false;
                out.obstruction = blocked;
                out.end = {w.t, exit_pt};
                out.end_place = w.place;
                out.end_dir = w.d;
                out.word = w.word;
                return out;
            }
            // pass_vertex composed `place` with the wedge-walk gluings; map
            // the goal through the same chart changes.
            goal = w.place.inverse()(before(goal));
        }
    }
    if (!arrived)
        throw Error(ErrorCode::BudgetExhausted,
                    "segment trace exceeded " + std::to_string(max_steps) +
                        " crossings");
    out.reached = true;
    out.end = {w.t, goal};
    out.end_place = w.place;
    out.end_dir = goal - w.p;
    if (out.end_dir.is_zero()) out.end_dir = w.d;
    out.word = w.word;
    return out;
}

}  // namespace zebra
