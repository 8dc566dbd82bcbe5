#include "zebra/invariants.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "zebra/errors.hpp"

namespace zebra {

// ======================= regions and Gauss-Bonnet ===========================

namespace {

int enc(int copy, int edge) { return 3 * copy + edge; }

struct UnionFind {
    std::vector<int> up;
    explicit UnionFind(int n) : up(n) {
        for (int i = 0; i < n; ++i) up[i] = i;
    }
    int find(int x) {
        while (up[x] != x) x = up[x] = up[up[x]];
        return x;
    }
    void unite(int a, int b) { up[find(a)] = find(b); }
};

}  // namespace

Region random_region(const Surface& s, int target_faces, uint64_t seed) {
    std::mt19937_64 rng(seed);
    Region r;
    std::vector<AffineMap> place;

    // Circular list of boundary copy-edges.
    struct BNode {
        int copy, edge;
        int prev, next;
        bool dead = false;
    };
    std::vector<BNode> bnodes;
    int bsize = 0;

    auto add_copy = [&](int tri, const AffineMap& m) {
        r.tris.push_back(tri);
        r.match.push_back({-1, -1, -1});
        place.push_back(m);
        return static_cast<int>(r.tris.size()) - 1;
    };

    add_copy(static_cast<int>(rng() % s.num_triangles()), identity_map());
    for (int e = 0; e < 3; ++e) {
        bnodes.push_back({0, e, (e + 2) % 3, (e + 1) % 3});
        ++bsize;
    }

    auto live_node = [&]() {
        std::vector<int> alive;
        for (int i = 0; i < static_cast<int>(bnodes.size()); ++i)
            if (!bnodes[i].dead) alive.push_back(i);
        return alive[rng() % alive.size()];
    };

    auto expand = [&](int bi) {
        BNode nd = bnodes[bi];
        HalfEdge h = half_edge(r.tris[nd.copy], nd.edge);
        HalfEdge w = s.twin(h);
        int j = add_copy(he_tri(w), place[nd.copy].compose(s.glue(h)));
        r.match[nd.copy][nd.edge] = enc(j, he_idx(w));
        r.match[j][he_idx(w)] = enc(nd.copy, nd.edge);
        int e1 = (he_idx(w) + 1) % 3, e2 = (he_idx(w) + 2) % 3;
        int n1 = static_cast<int>(bnodes.size());
        bnodes.push_back({j, e1, nd.prev, n1 + 1});
        bnodes.push_back({j, e2, n1, nd.next});
        bnodes[nd.prev].next = n1;
        bnodes[nd.next].prev = n1 + 1;
        bnodes[bi].dead = true;
        ++bsize;
    };

    // Zipping two adjacent boundary edges is what creates interior vertices;
    // allowed when they carry twin surface half-edges, their developments
    // agree, and closing them keeps the boundary a circle.
    auto try_zip = [&](int bi) {
        if (bsize < 4) return false;
        BNode& a = bnodes[bi];
        BNode& b = bnodes[a.next];
        HalfEdge ha = half_edge(r.tris[a.copy], a.edge);
        HalfEdge hb = half_edge(r.tris[b.copy], b.edge);
        if (s.twin(ha) != hb) return false;
        if (!(place[b.copy] == place[a.copy].compose(s.glue(ha)))) return false;
        r.match[a.copy][a.edge] = enc(b.copy, b.edge);
        r.match[b.copy][b.edge] = enc(a.copy, a.edge);
        int before = a.prev, after = b.next;
        bnodes[before].next = after;
        bnodes[after].prev = before;
        b.dead = true;
        a.dead = true;
        bsize -= 2;
        return true;
    };

    while (static_cast<int>(r.tris.size()) < target_faces) {
        int bi = live_node();
        if (rng() % 2 == 0 && try_zip(bi)) continue;
        expand(bi);
    }
    // Close whatever still zips, so regions routinely contain interior
    // vertices (where the checks have teeth).
    bool progress = true;
    while (progress) {
        progress = false;
        for (int i = 0; i < static_cast<int>(bnodes.size()); ++i)
            if (!bnodes[i].dead && try_zip(i)) progress = true;
    }
    return r;
}

GaussBonnetReport gauss_bonnet(const Surface& s, const Region& region) {
    GaussBonnetReport rep;
    int F = static_cast<int>(region.tris.size());
    rep.faces = F;
    rep.curvature = 0;
    if (F == 0 || static_cast<int>(region.match.size()) != F) return rep;

    // Matches must pair twin surface half-edges symmetrically.
    for (int i = 0; i < F; ++i)
        for (int e = 0; e < 3; ++e) {
            int m = region.match[i][e];
            if (m < 0) continue;
            int j = m / 3, f = m % 3;
            if (j < 0 || j >= F || region.match[j][f] != enc(i, e)) return rep;
            if (s.twin(half_edge(region.tris[i], e)) !=
                half_edge(region.tris[j], f))
                return rep;
        }

    // Connectivity and corner classes.
    UnionFind faces(F), corners(3 * F);
    int matched = 0;
    for (int i = 0; i < F; ++i)
        for (int e = 0; e < 3; ++e) {
            int m = region.match[i][e];
            if (m < 0) continue;
            int j = m / 3, f = m % 3;
            faces.unite(i, j);
            corners.unite(enc(i, e), enc(j, (f + 1) % 3));
            corners.unite(enc(i, (e + 1) % 3), enc(j, f));
            ++matched;
        }
    matched /= 2;
    for (int i = 1; i < F; ++i)
        if (faces.find(i) != faces.find(0)) return rep;

    int B = 3 * F - 2 * matched;  // boundary edges
    int E = matched + B;
    std::set<int> vclasses;
    for (int i = 0; i < 3 * F; ++i) vclasses.insert(corners.find(i));
    int V = static_cast<int>(vclasses.size());
    if (V - E + F != 1 || B == 0) return rep;

    // The boundary must form a single circle. Successor of boundary edge
    // (i, e): rotate around its head until the next boundary edge shows up.
    std::map<int, std::pair<int, int>> bnext;
    for (int i = 0; i < F; ++i)
        for (int e = 0; e < 3; ++e) {
            if (region.match[i][e] >= 0) continue;
            int cc = i, ee = (e + 1) % 3;
            while (region.match[cc][ee] >= 0) {
                int m = region.match[cc][ee];
                cc = m / 3;
                ee = (m % 3 + 1) % 3;
            }
            bnext[enc(i, e)] = {cc, ee};
        }
    {
        int start = bnext.begin()->first;
        int cur = start, seen = 0;
        do {
            auto [c, e] = bnext[cur];
            cur = enc(c, e);
            ++seen;
        } while (cur != start && seen <= B);
        if (seen != B) return rep;
    }
    rep.disk = true;

    std::map<int, std::vector<int>> members;  // class root -> corner codes
    for (int i = 0; i < 3 * F; ++i) members[corners.find(i)].push_back(i);
    auto corner_on_boundary = [&](int code) {
        int i = code / 3, c = code % 3;
        return region.match[i][c] < 0 || region.match[i][(c + 2) % 3] < 0;
    };

    rep.fans_closed = true;
    std::vector<std::pair<int, bool>> boundary_fans;  // (half_turns, exact)
    for (auto& [root, codes] : members) {
        bool boundary = false;
        for (int code : codes)
            if (corner_on_boundary(code)) boundary = true;
        if (!boundary) {
            ++rep.interior_vertices;
            // Develop the full fan; it must close up to an exact whole
            // number of turns around a common apex.
            int start = codes.front();
            int i = start / 3, c = start % 3;
            AffineMap m = identity_map();
            Vec2 apex = s.triangle(region.tris[i])[c];
            std::vector<Vec2> rays;
            rays.push_back(s.triangle(region.tris[i])[(c + 1) % 3] - apex);
            int guard = 0;
            bool walked = true;
            while (true) {
                if (++guard > 3 * F + 1) {
                    walked = false;
                    break;
                }
                rays.push_back(m(s.triangle(region.tris[i])[(c + 2) % 3]) -
                               apex);
                int mm = region.match[i][(c + 2) % 3];
                m = m.compose(s.glue(half_edge(region.tris[i], (c + 2) % 3)));
                i = mm / 3;
                c = mm % 3;
                if (enc(i, c) == start) break;
            }
            FanAngle fa;
            if (walked) fa = fan_angle(rays);
            if (!walked || !fa.exact || fa.half_turns % 2 != 0 ||
                fa.half_turns < 2 || !(m(apex) == apex))
                rep.fans_closed = false;
            else
                rep.curvature += fa.half_turns - 2;
        } else {
            ++rep.boundary_vertices;
            // Rotate clockwise to the first boundary edge of the arc, then
            // sweep the open fan counterclockwise.
            int code = codes.front();
            int i = code / 3, c = code % 3;
            int guard = 0;
            while (region.match[i][c] >= 0 && ++guard <= 3 * F) {
                int mm = region.match[i][c];
                i = mm / 3;
                c = (mm % 3 + 1) % 3;
            }
            AffineMap m = identity_map();
            Vec2 apex = s.triangle(region.tris[i])[c];
            std::vector<Vec2> rays;
            rays.push_back(s.triangle(region.tris[i])[(c + 1) % 3] - apex);
            guard = 0;
            while (true) {
                rays.push_back(m(s.triangle(region.tris[i])[(c + 2) % 3]) -
                               apex);
                int mm = region.match[i][(c + 2) % 3];
                if (mm < 0 || ++guard > 3 * F) break;
                m = m.compose(s.glue(half_edge(region.tris[i], (c + 2) % 3)));
                i = mm / 3;
                c = mm % 3;
            }
            FanAngle fa = fan_angle(rays);
            boundary_fans.push_back({fa.half_turns, fa.exact});
        }
    }

    rep.identity_holds =
        Int(2) * rep.interior_vertices + rep.boundary_vertices - F == 2;

    // All corner angles total F*pi; interior classes account for
    // (2*N_int + curvature)*pi of that, so the boundary corners must total
    // exactly (N_bd - 2 - curvature)*pi. Each boundary fan pins its angle to
    // [h*pi, (h+1)*pi] (equal to h*pi when exact), so the target must fall
    // inside the aggregated interval.
    Int target = Int(rep.boundary_vertices) - 2 - rep.curvature;
    Int lo = 0, hi = 0;
    for (auto [h, exact] : boundary_fans) {
        lo += h;
        hi += exact ? h : h + 1;
    }
    rep.boundary_consistent = rep.fans_closed && lo <= target && target <= hi;
    return rep;
}

// ======================= words and intersections ============================

std::vector<HalfEdge> reduce_word(const Surface& s,
                                  std::vector<HalfEdge> word) {
    std::vector<HalfEdge> st;
    for (HalfEdge h : word) {
        if (!st.empty() && st.back() == s.twin(h))
            st.pop_back();
        else
            st.push_back(h);
    }
    while (st.size() >= 2 && st.front() == s.twin(st.back())) {
        st.erase(st.begin());
        st.pop_back();
    }
    return st;
}

bool cyclic_words_equal(const Surface& s, std::vector<HalfEdge> a,
                        std::vector<HalfEdge> b) {
    a = reduce_word(s, std::move(a));
    b = reduce_word(s, std::move(b));
    if (a.size() != b.size()) return false;
    if (a.empty()) return true;
    for (size_t r = 0; r < a.size(); ++r) {
        bool ok = true;
        for (size_t i = 0; i < a.size() && ok; ++i)
            ok = a[(r + i) % a.size()] == b[i];
        if (ok) return true;
    }
    return false;
}

namespace {

// Point at parameter u along half-edge h, in the chart of its triangle.
Vec2 edge_point(const Surface& s, HalfEdge h, const Rat& u) {
    Vec2 a = s.he_tail(h), b = s.he_head(h);
    return a + (b - a) * u;
}

struct Chord {
    Vec2 p, q;
};

// The loop as one chord per triangle visit: entering through the twin of the
// previous crossing (at edge parameter 1-u seen from this side) and leaving
// through the next crossing (at parameter u).
std::map<int, std::vector<Chord>> loop_chords(const Surface& s,
                                              const std::vector<HalfEdge>& w,
                                              const Rat& u) {
    std::map<int, std::vector<Chord>> out;
    size_t n = w.size();
    for (size_t i = 0; i < n; ++i) {
        HalfEdge in = s.twin(w[i]);
        HalfEdge nxt = w[(i + 1) % n];
        out[he_tri(nxt)].push_back(
            {edge_point(s, in, Rat(1) - u), edge_point(s, nxt, u)});
    }
    return out;
}

// Signed crossings of two chord families; throws on degenerate contact.
int chord_intersections(const std::map<int, std::vector<Chord>>& ca,
                        const std::map<int, std::vector<Chord>>& cb) {
    int total = 0;
    for (const auto& [tri, as] : ca) {
        auto it = cb.find(tri);
        if (it == cb.end()) continue;
        for (const Chord& x : as)
            for (const Chord& y : it->second) {
                int d1 = cross_sign(x.q - x.p, y.p - x.p);
                int d2 = cross_sign(x.q - x.p, y.q - x.p);
                if (d1 == 0 && d2 == 0) {
                    // Collinear: degenerate only when the spans overlap.
                    Vec2 dir = x.q - x.p;
                    Rat s0 = dot(dir, y.p - x.p), s1 = dot(dir, y.q - x.p);
                    Rat len = dot(dir, dir);
                    Rat lo = std::min(s0, s1), hi = std::max(s0, s1);
                    if (hi < 0 || lo > len) continue;
                    throw Error(ErrorCode::InvalidArgument,
                                "representatives overlap");
                }
                int e1 = cross_sign(y.q - y.p, x.p - y.p);
                int e2 = cross_sign(y.q - y.p, x.q - y.p);
                if (d1 == 0 || d2 == 0 || e1 == 0 || e2 == 0) {
                    if (d1 == d2 || e1 == e2) continue;  // grazes one side
                    throw Error(ErrorCode::InvalidArgument,
                                "representatives touch");
                }
                if (d1 != d2 && e1 != e2) total += d2 > 0 ? 1 : -1;
            }
    }
    return total;
}

}  // namespace

int algebraic_intersection(const Surface& s, const std::vector<HalfEdge>& a,
                           const std::vector<HalfEdge>& b) {
    if (!word_is_closed(s, a) || !word_is_closed(s, b))
        throw Error(ErrorCode::InvalidArgument,
                    "algebraic intersection needs closed loops");
    // A few anchor-parameter pairs in case one yields a degenerate contact.
    const std::pair<int, int> params[] = {{2, 3}, {5, 7}, {7, 11}, {3, 13}};
    std::string last;
    for (auto [pa, pb] : params) {
        try {
            return chord_intersections(loop_chords(s, a, Rat(1) / pa),
                                       loop_chords(s, b, Rat(1) / pb));
        } catch (const Error& e) {
            last = e.what();
        }
    }
    throw Error(ErrorCode::InvalidArgument,
                "no transverse representatives found: " + last);
}

// ======================= corner legality ====================================

namespace {

AngleCmp cmp_against(const FanAngle& fa, int k) {
    if (fa.exact)
        return fa.half_turns == k
                   ? AngleCmp::Equal
                   : (fa.half_turns < k ? AngleCmp::Less : AngleCmp::Greater);
    // the angle lies strictly inside (half_turns*pi, (half_turns+1)*pi)
    return fa.half_turns < k ? AngleCmp::Less : AngleCmp::Greater;
}

AngleCmp invert(AngleCmp c) {
    if (c == AngleCmp::Less) return AngleCmp::Greater;
    if (c == AngleCmp::Greater) return AngleCmp::Less;
    return AngleCmp::Equal;
}

void push_ray(std::vector<Vec2>& rays, const Vec2& r) {
    if (!rays.empty() && same_ray(rays.back(), r)) return;
    rays.push_back(r);
}

Vec2 perp(const Vec2& v) { return {-v.y, v.x}; }

}  // namespace

CornerCheck check_corner(const Surface& s, int arr_tri, int arr_corner,
                         const Vec2& d_in, int out_tri, int out_corner,
                         const Vec2& d_out) {
    CornerCheck out;
    out.at_vertex = true;
    out.vertex = s.vertex_at(arr_tri, arr_corner);
    if (d_in.is_zero() || d_out.is_zero()) return out;
    if (s.vertex_at(out_tri, out_corner) != out.vertex) return out;
    const ConeData& cone = s.cones()[out.vertex];
    auto fan = vertex_fan(s, arr_tri, arr_corner);
    int k_out = -1;
    for (int i = 0; i < static_cast<int>(fan.size()); ++i)
        if (fan[i].tri == out_tri && fan[i].corner == out_corner) {
            k_out = i;
            break;
        }
    if (k_out < 0) return out;

    Vec2 d_out_dev = d_out * fan[k_out].place.a;
    if (cone.is_pole) {
        out.pole_bounce = same_ray(d_out_dev, -d_in);
        out.legal = out.pole_bounce;
        out.ccw_side = out.cw_side =
            out.legal ? AngleCmp::Equal : AngleCmp::Less;
        return out;
    }

    if (k_out == 0 && !same_ray(-d_in, d_out_dev) &&
        cross_sign(-d_in, d_out_dev) <= 0) {
        // Departing clockwise of the backward ray inside the arrival wedge:
        // the clockwise side of the corner is below pi.
        out.ccw_side = AngleCmp::Greater;
        out.cw_side = AngleCmp::Less;
        return out;
    }

    std::vector<Vec2> rays;
    rays.push_back(-d_in);
    Vec2 apex = s.triangle(arr_tri)[arr_corner];
    for (int i = 0; i < k_out; ++i)
        push_ray(rays,
                 fan[i].place(s.triangle(fan[i].tri)[(fan[i].corner + 2) % 3]) -
                     apex);
    push_ray(rays, d_out_dev);
    if (rays.size() < 2) {
        // Doubling straight back inside the arrival wedge: zero angle.
        out.ccw_side = AngleCmp::Less;
        out.cw_side = AngleCmp::Greater;
        return out;
    }
    try {
        out.ccw_fan = fan_angle(rays);
    } catch (const Error&) {
        return out;  // malformed direction data: not a trail corner
    }
    out.ccw_side = cmp_against(out.ccw_fan, 1);
    out.cw_side = invert(cmp_against(out.ccw_fan, cone.alpha + 1));
    out.legal = out.ccw_side != AngleCmp::Less && out.cw_side != AngleCmp::Less;
    return out;
}

// ======================= trail verification =================================

namespace {

bool same_surface_point(const Surface& s, const SurfacePoint& a,
                        const SurfacePoint& b) {
    LocatedPoint la = locate(s, a);
    LocatedPoint lb = locate(s, b);
    return la.at.tri == lb.at.tri && la.at.p == lb.at.p;
}

}  // namespace

namespace {

// Shared by verify_trail and trail_segment_ends: re-traces every segment,
// filling `ends`; returns the first defect found (empty string when clean).
std::string segment_ends_impl(const Surface& s, const Trail& trail,
                              std::vector<SegmentEnd>& ends) {
    size_t k = trail.segments.size();
    if (k == 0 || trail.points.size() != k + 1)
        return "a trail needs n segments and n+1 points";
    ends.assign(k, SegmentEnd{});

    for (size_t i = 0; i < k; ++i) {
        const SurfacePoint& from = trail.points[i];
        const SurfacePoint& stored = trail.points[i + 1];
        LocatedPoint ls;
        try {
            ls = locate(s, stored);
        } catch (const Error& e) {
            return "point " + std::to_string(i + 1) + ": " + e.what();
        }
        std::vector<DevelopStep> steps;
        try {
            steps = develop_word(s, from.tri, trail.segments[i]);
        } catch (const Error& e) {
            return "segment " + std::to_string(i) + ": " + e.what();
        }
        int end_tri = steps.back().tri;
        const AffineMap& m = steps.back().place;

        // The stored endpoint sits in the chart its own outgoing segment
        // uses, which may differ from the arrival chart only at a vertex.
        std::vector<Vec2> goals;
        if (stored.tri == end_tri) {
            goals.push_back(m(stored.p));
        } else {
            if (ls.locus != PointLocus::AtVertex) {
                return "segment " + std::to_string(i) +
                              " ends in a different chart than its endpoint";
            }
            for (int c = 0; c < 3; ++c)
                if (s.vertex_at(end_tri, c) == ls.vertex)
                    goals.push_back(m(s.triangle(end_tri)[c]));
            if (goals.empty()) {
                return "segment " + std::to_string(i) +
                              " does not end at its endpoint's vertex";
            }
        }

        bool accepted = false;
        std::string why = "could not be re-traced";
        for (const Vec2& g : goals) {
            if (g == from.p) {
                why = "has zero length";
                continue;
            }
            SegmentTrace tr;
            try {
                tr = trace_segment(s, from, g, 1 << 20);
            } catch (const Error& e) {
                why = e.what();
                continue;
            }
            if (!tr.reached) {
                why = "runs into singular vertex " +
                      std::to_string(tr.obstruction);
                continue;
            }
            if (tr.word != trail.segments[i]) {
                why = "does not cross its stored edges";
                continue;
            }
            if (!same_surface_point(s, tr.end, stored)) {
                why = "does not arrive at the stored endpoint";
                continue;
            }
            ends[i] = {tr.end, tr.end_dir, g - from.p};
            accepted = true;
            break;
        }
        if (!accepted) {
            return "segment " + std::to_string(i) + " " + why;
        }
    }

    return {};
}

}  // namespace

std::vector<SegmentEnd> trail_segment_ends(const Surface& s,
                                           const Trail& trail) {
    std::vector<SegmentEnd> ends;
    std::string problem = segment_ends_impl(s, trail, ends);
    if (!problem.empty())
        throw Error(ErrorCode::InvalidArgument, problem);
    return ends;
}

TrailCheck verify_trail(const Surface& s, const Trail& trail) {
    TrailCheck out;
    size_t k = trail.segments.size();
    if (k == 0 || trail.points.size() != k + 1) {
        out.problem = "a trail needs n segments and n+1 points";
        return out;
    }

    std::vector<SegmentEnd> ends;
    out.problem = segment_ends_impl(s, trail, ends);
    if (!out.problem.empty()) return out;
    if (trail.closed &&
        !same_surface_point(s, trail.points[k], trail.points[0])) {
        out.problem = "closed trail does not return to its first point";
        return out;
    }

    // Corner legality at interior points (plus the seam corner for closed
    // trails). Corner j joins segment (j-1 mod k) to segment j.
    size_t first_corner = trail.closed ? 0 : 1;
    for (size_t j = first_corner; j < k; ++j) {
        size_t seg_in = (j + k - 1) % k;
        const SegmentEnd& arr = ends[seg_in];
        LocatedPoint loc;
        try {
            loc = locate(s, arr.at);
        } catch (const Error& e) {
            out.problem =
                std::string("corner ") + std::to_string(j) + ": " + e.what();
            return out;
        }
        CornerCheck cc;
        if (loc.locus == PointLocus::AtVertex) {
            LocatedPoint lout = locate(s, trail.points[j]);
            if (lout.locus != PointLocus::AtVertex ||
                lout.vertex != loc.vertex) {
                out.problem = "corner " + std::to_string(j) +
                              " is not stored at the vertex it arrives at";
                return out;
            }
            cc = check_corner(s, arr.at.tri, loc.corner, arr.dir,
                              trail.points[j].tri, lout.corner,
                              ends[j].out_dir);
            if (!cc.legal)
                out.problem = "corner " + std::to_string(j) +
                              " turns by less than pi on one side";
        } else {
            // Flat subdivision point: the trail must continue straight.
            cc.at_vertex = false;
            bool ok = false;
            if (arr.at.tri == trail.points[j].tri) {
                ok = same_ray(arr.dir, ends[j].out_dir);
            } else if (loc.locus == PointLocus::OnEdge) {
                HalfEdge w = s.twin(half_edge(arr.at.tri, loc.edge));
                if (he_tri(w) == trail.points[j].tri)
                    ok = same_ray(arr.dir * s.glue(w).a, ends[j].out_dir);
            }
            cc.legal = ok;
            cc.ccw_side = cc.cw_side = AngleCmp::Equal;
            if (!ok)
                out.problem =
                    "flat corner " + std::to_string(j) + " is not straight";
        }
        out.corners.push_back(cc);
        if (!out.problem.empty()) return out;
    }

    // Aggregate turning for closed trails on dilation surfaces: directions
    // transport by positive scalars, so the per-corner fans concatenate into
    // one long counterclockwise fan once each junction (a straight segment)
    // is bridged by an explicit quarter-turn ray. The grand total is then
    // exact, and subtracting one half turn per junction leaves the sum of
    // the counterclockwise corner angles in half turns.
    if (trail.closed && s.mode() == Mode::Dilation) {
        bool eligible = true;
        int vertex_corners = 0;
        std::vector<Vec2> chain;
        for (size_t j = first_corner; j < k && eligible; ++j) {
            size_t seg_in = (j + k - 1) % k;
            const SegmentEnd& arr = ends[seg_in];
            LocatedPoint loc = locate(s, arr.at);
            if (loc.locus != PointLocus::AtVertex) continue;  // straight
            CornerCheck& cc = out.corners[j - first_corner];
            if (cc.pole_bounce) {
                eligible = false;
                break;
            }
            ++vertex_corners;
            if (!chain.empty()) push_ray(chain, perp(chain.back()));
            push_ray(chain, -arr.dir);
            LocatedPoint lout = locate(s, trail.points[j]);
            auto fan = vertex_fan(s, arr.at.tri, loc.corner);
            int k_out = -1;
            for (int w = 0; w < static_cast<int>(fan.size()); ++w)
                if (fan[w].tri == trail.points[j].tri &&
                    fan[w].corner == lout.corner) {
                    k_out = w;
                    break;
                }
            if (k_out < 0) {
                eligible = false;
                break;
            }
            Vec2 apex = arr.at.p;
            for (int w = 0; w < k_out; ++w)
                push_ray(chain,
                         fan[w].place(
                             s.triangle(fan[w].tri)[(fan[w].corner + 2) % 3]) -
                             apex);
            push_ray(chain, ends[j].out_dir * fan[k_out].place.a);
        }
        if (eligible && vertex_corners > 0 && !chain.empty()) {
            push_ray(chain, perp(chain.back()));
            push_ray(chain, chain.front());
            try {
                FanAngle total = fan_angle(chain);
                if (total.exact)
                    out.angle_sum_half_turns =
                        Int(total.half_turns) - vertex_corners;
            } catch (const Error&) {
                // leave unset
            }
        }
    }

    out.ok = out.problem.empty();
    return out;
}

// ======================= brute-force trail search ===========================

namespace {

struct Box {
    bool init = false;
    Rat x0, y0, x1, y1;
    void include(const Vec2& p) {
        if (!init) {
            x0 = x1 = p.x;
            y0 = y1 = p.y;
            init = true;
            return;
        }
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
    }
    void pad(const Rat& r) {
        x0 -= r;
        x1 += r;
        y0 -= r;
        y1 += r;
    }
    bool contains(const Vec2& p) const {
        return x0 <= p.x && p.x <= x1 && y0 <= p.y && p.y <= y1;
    }
};

// Exact triangle/rectangle overlap test by separating axes.
bool tri_meets_box(const Vec2& p0, const Vec2& p1, const Vec2& p2,
                   const Box& b) {
    const Vec2* p[3] = {&p0, &p1, &p2};
    bool all = true;
    for (int i = 0; i < 3; ++i) all = all && p[i]->x < b.x0;
    if (all) return false;
    all = true;
    for (int i = 0; i < 3; ++i) all = all && p[i]->x > b.x1;
    if (all) return false;
    all = true;
    for (int i = 0; i < 3; ++i) all = all && p[i]->y < b.y0;
    if (all) return false;
    all = true;
    for (int i = 0; i < 3; ++i) all = all && p[i]->y > b.y1;
    if (all) return false;
    Vec2 corners[4] = {{b.x0, b.y0}, {b.x1, b.y0}, {b.x1, b.y1}, {b.x0, b.y1}};
    for (int e = 0; e < 3; ++e) {
        Vec2 a = *p[e], d = *p[(e + 1) % 3] - *p[e];
        bool outside = true;
        for (int i = 0; i < 4 && outside; ++i)
            outside = cross_sign(d, corners[i] - a) < 0;
        if (outside) return false;
    }
    return true;
}

using MapKey = std::tuple<int, Rat, Rat, Rat>;  // (id, a, b.x, b.y)

MapKey map_key(int id, const AffineMap& m) { return {id, m.a, m.b.x, m.b.y}; }

// A lift of a singular vertex into the base chart, represented by the cone's
// first corner wedge and that wedge's placement.
struct LiftNode {
    int vertex, ct, cc;
    AffineMap place;  // chart of ct -> base chart
    Vec2 apex;        // developed position
};

// A straight saddle connection between two lifts, with the local data the
// legality checks need at both ends.
struct SaddleEdge {
    int to;
    int out_tri, out_corner;  // departure wedge
    Vec2 out_dir;             // chart of out_tri
    std::vector<HalfEdge> word;
    int arr_tri, arr_corner;  // arrival wedge
    Vec2 arr_dir;             // chart of arr_tri
};

struct Searcher {
    const Surface& s;
    const OracleBudget& budget;
    Box box;
    std::vector<LiftNode> nodes;
    std::map<MapKey, int> node_index;
    std::vector<std::vector<SaddleEdge>> edges;
    std::vector<bool> edges_done;
    int64_t work = 0;
    bool exhausted = true;
    std::vector<Trail> found;
    std::set<std::string> signatures;

    Searcher(const Surface& s_, const OracleBudget& b) : s(s_), budget(b) {}

    // Canonical representative of the lift of the vertex seen at
    // (tri, corner) when that chart is placed by `m` in the base chart.
    LiftNode canonical_lift(int tri, int corner, const AffineMap& m) const {
        int v = s.vertex_at(tri, corner);
        auto [ct, cc] = s.cones()[v].corners.front();
        for (const auto& w : vertex_fan(s, tri, corner))
            if (w.tri == ct && w.corner == cc) {
                AffineMap p = m.compose(w.place);
                return {v, ct, cc, p, p(s.triangle(ct)[cc])};
            }
        throw Error(ErrorCode::InvalidArgument, "fan misses its own corner");
    }

    int node_id(const LiftNode& n, bool create) {
        MapKey key = map_key(n.vertex, n.place);
        auto it = node_index.find(key);
        if (it != node_index.end()) return it->second;
        if (!create) return -1;
        node_index.emplace(key, static_cast<int>(nodes.size()));
        nodes.push_back(n);
        edges.emplace_back();
        edges_done.push_back(false);
        return static_cast<int>(nodes.size()) - 1;
    }

    // Collect every singular lift visible in the developed patch spanned by
    // the seed copies, clipped to the box.
    void collect_nodes(const std::vector<DevelopStep>& seeds) {
        std::vector<std::pair<int, AffineMap>> patch;
        std::map<MapKey, int> seen;
        auto add = [&](int tri, const AffineMap& m) {
            if (!tri_meets_box(m(s.triangle(tri)[0]), m(s.triangle(tri)[1]),
                               m(s.triangle(tri)[2]), box))
                return;
            if (!seen.emplace(map_key(tri, m), 1).second) return;
            patch.push_back({tri, m});
        };
        for (const auto& st : seeds) add(st.tri, st.place);
        for (size_t qi = 0; qi < patch.size(); ++qi) {
            if (static_cast<int>(patch.size()) >= budget.patch_depth) {
                exhausted = false;
                break;
            }
            auto [tri, m] = patch[qi];
            for (int e = 0; e < 3; ++e) {
                HalfEdge h = half_edge(tri, e);
                add(he_tri(s.twin(h)), m.compose(s.glue(h)));
            }
        }
        for (const auto& [tri, m] : patch)
            for (int c = 0; c < 3; ++c)
                if (s.vertex_singular(s.vertex_at(tri, c)) &&
                    box.contains(m(s.triangle(tri)[c])))
                    node_id(canonical_lift(tri, c, m), true);
    }

    void ensure_edges(int id) {
        if (edges_done[id]) return;
        edges_done[id] = true;
        LiftNode n = nodes[id];
        for (const auto& w : vertex_fan(s, n.ct, n.cc)) {
            Vec2 apex = s.triangle(w.tri)[w.corner];
            Vec2 near = s.triangle(w.tri)[(w.corner + 1) % 3] - apex;
            Vec2 far = s.triangle(w.tri)[(w.corner + 2) % 3] - apex;
            AffineMap W = n.place.compose(w.place);  // chart(w.tri) -> base
            AffineMap Winv = W.inverse();
            std::set<std::pair<Rat, Rat>> tried;
            for (size_t i2 = 0; i2 < nodes.size(); ++i2) {
                Vec2 goal = Winv(nodes[i2].apex);
                Vec2 d = goal - apex;
                if (d.is_zero()) continue;
                // Half-open direction sector (near, far] so each outgoing
                // ray from the cone belongs to exactly one wedge.
                if (!(same_ray(d, far) ||
                      (cross_sign(near, d) > 0 && cross_sign(d, far) > 0)))
                    continue;
                if (!tried.emplace(goal.x, goal.y).second) continue;
                ++work;
                SegmentTrace tr;
                try {
                    tr = trace_segment(s, {w.tri, apex}, goal,
                                       budget.max_steps);
                } catch (const Error&) {
                    exhausted = false;
                    continue;
                }
                if (!tr.reached) continue;  // a singular vertex blocks it
                LocatedPoint lp = locate(s, tr.end);
                if (lp.locus != PointLocus::AtVertex) continue;
                LiftNode arr = canonical_lift(tr.end.tri, lp.corner,
                                              W.compose(tr.end_place));
                int to = node_id(arr, false);
                if (to < 0) {
                    exhausted = false;  // lands outside the collected patch
                    continue;
                }
                edges[id].push_back({to, w.tri, w.corner, d, tr.word,
                                     tr.end.tri, lp.corner, tr.end_dir});
            }
        }
    }

    void emit(const std::vector<const SaddleEdge*>& chain) {
        std::vector<std::string> parts;
        for (const SaddleEdge* e : chain) {
            std::string p = std::to_string(e->out_tri) + "." +
                            std::to_string(e->out_corner) + ":";
            for (HalfEdge h : e->word) p += std::to_string(h) + ",";
            p += "@" + std::to_string(e->arr_corner);
            parts.push_back(std::move(p));
        }
        std::string best;
        for (size_t r = 0; r < parts.size(); ++r) {
            std::string cand;
            for (size_t i = 0; i < parts.size(); ++i)
                cand += parts[(r + i) % parts.size()] + ";";
            if (best.empty() || cand < best) best = cand;
        }
        if (!signatures.insert(best).second) return;
        Trail t;
        t.closed = true;
        for (const SaddleEdge* e : chain) {
            t.points.push_back(
                {e->out_tri, s.triangle(e->out_tri)[e->out_corner]});
            t.segments.push_back(e->word);
        }
        t.points.push_back(t.points.front());
        found.push_back(std::move(t));
    }

    void dfs(int goal, std::map<int, int>& dist,
             std::vector<const SaddleEdge*>& chain) {
        if (++work > budget.max_nodes) {
            exhausted = false;
            return;
        }
        const SaddleEdge& last = *chain.back();
        if (last.to == goal) {
            const SaddleEdge& first = *chain.front();
            CornerCheck cc =
                check_corner(s, last.arr_tri, last.arr_corner, last.arr_dir,
                             first.out_tri, first.out_corner, first.out_dir);
            if (cc.legal) emit(chain);
        }
        int depth = static_cast<int>(chain.size());
        if (depth >= budget.max_corners) return;
        ensure_edges(last.to);
        for (const SaddleEdge& e : edges[last.to]) {
            auto it = dist.find(e.to);
            if (it == dist.end() ||
                depth + 1 + it->second > budget.max_corners)
                continue;
            if (!check_corner(s, last.arr_tri, last.arr_corner, last.arr_dir,
                              e.out_tri, e.out_corner, e.out_dir)
                     .legal)
                continue;
            chain.push_back(&e);
            dfs(goal, dist, chain);
            chain.pop_back();
            if (work > budget.max_nodes) return;
        }
    }

    void run(int start, int goal) {
        // Forward closure to the corner bound, computing edges as needed.
        std::map<int, int> depth{{start, 0}};
        std::vector<int> order{start};
        for (size_t qi = 0; qi < order.size(); ++qi) {
            int id = order[qi];
            if (depth[id] >= budget.max_corners) continue;
            ensure_edges(id);
            if (work > budget.max_nodes) {
                exhausted = false;
                return;
            }
            for (const SaddleEdge& e : edges[id])
                if (depth.emplace(e.to, depth[id] + 1).second)
                    order.push_back(e.to);
        }
        if (!depth.count(goal)) return;
        // Graph distance back to the goal, for pruning: a chain only grows
        // while it can still reach the goal within the corner bound.
        std::map<int, std::vector<int>> rev;
        for (int id : order)
            for (const SaddleEdge& e : edges[id]) rev[e.to].push_back(id);
        std::map<int, int> dist{{goal, 0}};
        std::vector<int> q{goal};
        for (size_t qi = 0; qi < q.size(); ++qi)
            for (int from : rev[q[qi]])
                if (dist.emplace(from, dist[q[qi]] + 1).second)
                    q.push_back(from);
        std::vector<const SaddleEdge*> chain;
        for (const SaddleEdge& e : edges[start]) {
            auto it = dist.find(e.to);
            if (it == dist.end() || 1 + it->second > budget.max_corners)
                continue;
            chain.push_back(&e);
            dfs(goal, dist, chain);
            chain.pop_back();
            if (work > budget.max_nodes) {
                exhausted = false;
                return;
            }
        }
    }
};

}  // namespace

OracleResult brute_force_closed_trails(const Surface& s,
                                       const std::vector<HalfEdge>& word,
                                       const OracleBudget& budget) {
    if (s.has_poles())
        throw Error(ErrorCode::SurfaceHasPoles,
                    "the exhaustive search does not handle poles");
    if (!word_is_closed(s, word))
        throw Error(ErrorCode::InvalidArgument, "class word is not closed");
    if (reduce_word(s, word).empty())
        throw Error(ErrorCode::ClassTrivial, "the class is trivial");

    OracleResult out;
    AffineMap delta = loop_holonomy(s, word);
    auto band = develop_word(s, he_tri(word.front()), word);

    // Closed-leaf hunt: sample points on the first crossed edge; the leaf
    // through a sample x in the class's direction must aim at x's image
    // under the class's holonomy.
    {
        HalfEdge h0 = word.front();
        Vec2 a = s.he_tail(h0), b = s.he_head(h0);
        for (int i = 1; i <= budget.leaf_samples && !out.found_closed_leaf;
             ++i) {
            Vec2 x = a + (b - a) * (Rat(i) / (budget.leaf_samples + 1));
            Vec2 dir = delta(x) - x;
            if (dir.is_zero()) continue;
            LeafTrace lt;
            try {
                lt = trace_leaf(s, {he_tri(h0), x}, dir, budget.max_steps);
            } catch (const Error&) {
                continue;
            }
            if (lt.status != LeafTrace::Status::Closed) continue;
            if (cyclic_words_equal(s, lt.word, word)) {
                out.found_closed_leaf = true;
                out.sample_leaf = lt;
            }
        }
    }

    // Bent-trail search: chains of saddle connections between singular
    // lifts, from a lift to its image under the class's holonomy, with
    // every corner legal.
    Searcher se(s, budget);
    {
        std::vector<DevelopStep> seeds = band;
        for (const auto& st : band)
            seeds.push_back({st.tri, delta.compose(st.place)});
        Rat pad = 0;
        for (int t = 0; t < s.num_triangles(); ++t)
            for (int e = 0; e < 3; ++e) {
                Vec2 v = s.he_vector(half_edge(t, e));
                Rat ax = v.x < 0 ? Rat(-v.x) : v.x;
                Rat ay = v.y < 0 ? Rat(-v.y) : v.y;
                pad = std::max(pad, std::max(ax, ay));
            }
        for (const auto& st : seeds)
            for (int c = 0; c < 3; ++c)
                se.box.include(st.place(s.triangle(st.tri)[c]));
        se.box.pad(pad * 2);
        se.collect_nodes(seeds);
    }

    std::vector<int> starts;
    for (const auto& st : band)
        for (int c = 0; c < 3; ++c) {
            if (!s.vertex_singular(s.vertex_at(st.tri, c))) continue;
            int id = se.node_id(se.canonical_lift(st.tri, c, st.place), false);
            if (id >= 0 &&
                std::find(starts.begin(), starts.end(), id) == starts.end())
                starts.push_back(id);
        }
    for (int start : starts) {
        LiftNode goal_lift = se.nodes[start];
        goal_lift.place = delta.compose(goal_lift.place);
        goal_lift.apex = delta(goal_lift.apex);
        int goal = se.node_id(goal_lift, false);
        if (goal < 0) {
            se.exhausted = false;  // the holonomy image fell off the patch
            continue;
        }
        se.run(start, goal);
        if (se.work > budget.max_nodes) break;
    }

    out.trails = std::move(se.found);
    out.exhausted = se.exhausted;
    return out;
}

}  // namespace zebra
