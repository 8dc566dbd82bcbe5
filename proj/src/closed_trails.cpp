#include "zebra/closed_trails.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kinematics_internal.hpp"
#include "zebra/connect.hpp"
#include "zebra/errors.hpp"
#include "zebra/invariants.hpp"

namespace zebra {

namespace {

using internal::corner_of_tight_pair;
using internal::ExitInfo;
using internal::find_exit;
using internal::Walker;

// ---- small utilities ---------------------------------------------------------

std::string int_str(const Int& v) {
    std::ostringstream oss;
    oss << v;
    return oss.str();
}

bool same_surface_point(const Surface& s, const SurfacePoint& a,
                        const SurfacePoint& b) {
    LocatedPoint la = locate(s, a);
    LocatedPoint lb = locate(s, b);
    return la.at.tri == lb.at.tri && la.at.p == lb.at.p;
}

std::vector<HalfEdge> inverse_word(const Surface& s,
                                   const std::vector<HalfEdge>& w) {
    std::vector<HalfEdge> out;
    out.reserve(w.size());
    for (auto it = w.rbegin(); it != w.rend(); ++it) out.push_back(s.twin(*it));
    return out;
}

Vec2 centroid(const Surface& s, int tri) {
    const auto& t = s.triangle(tri);
    return (t[0] + t[1] + t[2]) * Rat(1, 3);
}

int corner_index_at(const Surface& s, int tri, const Vec2& p) {
    for (int c = 0; c < 3; ++c)
        if (s.corner(tri, c) == p) return c;
    throw Error(ErrorCode::InvalidArgument,
                "point expected at a triangle corner is not one");
}

// Half-open wedge cones about an apex: near ray a (toward corner+1), far ray
// b (toward corner+2). Near-inclusive is the convention the tracers use.
bool cone_contains_near(const Vec2& a, const Vec2& b, const Vec2& d) {
    return same_ray(d, a) || (cross_sign(a, d) > 0 && cross_sign(d, b) > 0);
}
bool cone_contains_far(const Vec2& a, const Vec2& b, const Vec2& d) {
    return same_ray(d, b) || (cross_sign(a, d) > 0 && cross_sign(d, b) > 0);
}

// Shortest dual-graph path between two triangles (breadth-first).
std::vector<HalfEdge> dual_path(const Surface& s, int from_tri, int to_tri) {
    if (from_tri == to_tri) return {};
    std::vector<HalfEdge> via(s.num_triangles(), -1);
    std::deque<int> queue{from_tri};
    via[from_tri] = -2;
    while (!queue.empty()) {
        int t = queue.front();
        queue.pop_front();
        for (int e = 0; e < 3; ++e) {
            HalfEdge h = half_edge(t, e);
            int nt = he_tri(s.twin(h));
            if (via[nt] != -1) continue;
            via[nt] = h;
            if (nt == to_tri) {
                std::vector<HalfEdge> path;
                int cur = to_tri;
                while (cur != from_tri) {
                    path.push_back(via[cur]);
                    cur = he_tri(via[cur]);
                }
                std::reverse(path.begin(), path.end());
                return path;
            }
            queue.push_back(nt);
        }
    }
    throw Error(ErrorCode::InvalidArgument, "dual graph is disconnected");
}

enum class Sweep { Left, Right };
Sweep opposite(Sweep s) { return s == Sweep::Left ? Sweep::Right : Sweep::Left; }

// ---- wedges around a vertex ---------------------------------------------------

struct DepartureWedge {
    int tri = -1;
    int corner = -1;
    Vec2 d;           // direction in the wedge's own chart
    AffineMap place;  // chart of `tri` -> chart of the query triangle
};

// The unique near-inclusive wedge of the (removable) vertex at (tri, corner)
// whose cone contains `d` (given in the chart of `tri`).
DepartureWedge find_departure_wedge(const Surface& s, int tri, int corner,
                                    const Vec2& d) {
    Vec2 apex = s.corner(tri, corner);
    auto fan = vertex_fan(s, tri, corner);
    for (const WedgePlacement& wp : fan) {
        Vec2 pa = wp.place(s.corner(wp.tri, (wp.corner + 1) % 3)) - apex;
        Vec2 pb = wp.place(s.corner(wp.tri, (wp.corner + 2) % 3)) - apex;
        if (cone_contains_near(pa, pb, d)) {
            DepartureWedge out;
            out.tri = wp.tri;
            out.corner = wp.corner;
            out.d = d * wp.place.inverse().a;
            out.place = wp.place;
            return out;
        }
    }
    throw Error(ErrorCode::InvalidArgument,
                "no wedge of the vertex contains the direction");
}

struct TurnOut {
    int tri = -1;
    int corner = -1;
    Vec2 d;
};

// Continuation of a boundary trail through a singular vertex: the outgoing
// ray making an angle of exactly pi with the incoming one on `cyl_side`.
// Measured from the backward ray, the side sector is swept clockwise for the
// left side and counterclockwise for the right, so the continuation lives in
// the first wedge claiming the (parallel-transported) direction vector in
// that scan order. Wedge cones are < pi, so the first claim sits exactly pi
// past the arrival.
TurnOut pi_turn(const Surface& s, int tri_in, int corner_in, const Vec2& d_in,
                Sweep cyl_side) {
    Vec2 apex = s.corner(tri_in, corner_in);
    auto fan = vertex_fan(s, tri_in, corner_in);
    int n = static_cast<int>(fan.size());
    for (int k = 0; k < n; ++k) {
        int i = (cyl_side == Sweep::Right) ? k : (n - k) % n;
        const WedgePlacement& wp = fan[i];
        Vec2 pa = wp.place(s.corner(wp.tri, (wp.corner + 1) % 3)) - apex;
        Vec2 pb = wp.place(s.corner(wp.tri, (wp.corner + 2) % 3)) - apex;
        if (cone_contains_near(pa, pb, d_in)) {
            TurnOut out;
            out.tri = wp.tri;
            out.corner = wp.corner;
            out.d = d_in * wp.place.inverse().a;
            return out;
        }
    }
    throw Error(ErrorCode::InvalidArgument,
                "half-turn continuation found no containing wedge");
}

// ---- saddle-connection chains --------------------------------------------------

// One vertex of a closed straight line (a junction chain) or of a closed
// trail: arrival and departure wedge data in their own charts.
struct ChainNode {
    int vertex = -1;
    int tri_in = -1, corner_in = -1;
    Vec2 d_in;
    int tri_out = -1, corner_out = -1;
    Vec2 d_out;
};

struct Chain {
    std::vector<ChainNode> nodes;
    // pieces[i]: crossing word of the straight run nodes[i] -> nodes[i+1]
    // (cyclically), without any vertex fan edges. Empty for a run along a
    // single edge.
    std::vector<std::vector<HalfEdge>> pieces;
    // A closed leaf with no vertex on it.
    std::vector<HalfEdge> bare;
    int bare_tri = -1;
    Vec2 bare_p, bare_d;
    bool nodeless() const { return nodes.empty(); }
};

std::string chain_signature(const Chain& ch) {
    if (ch.nodeless()) return {};
    auto part = [](int vertex, int tri, int corner, const Vec2& d) {
        Direction dd(d);
        std::ostringstream oss;
        oss << vertex << ':' << tri << ':' << corner << ':' << int_str(dd.x)
            << ',' << int_str(dd.y);
        return oss.str();
    };
    auto min_rotation = [](const std::vector<std::string>& parts) {
        size_t n = parts.size();
        std::string best;
        for (size_t r = 0; r < n; ++r) {
            std::string cand;
            for (size_t i = 0; i < n; ++i) {
                cand += parts[(r + i) % n];
                cand += ';';
            }
            if (best.empty() || cand < best) best = cand;
        }
        return best;
    };
    size_t n = ch.nodes.size();
    std::vector<std::string> fwd(n), rev(n);
    for (size_t i = 0; i < n; ++i) {
        const ChainNode& nd = ch.nodes[i];
        fwd[i] = part(nd.vertex, nd.tri_in, nd.corner_in, nd.d_in);
        const ChainNode& nr = ch.nodes[n - 1 - i];
        rev[i] = part(nr.vertex, nr.tri_out, nr.corner_out, -nr.d_out);
    }
    std::string a = min_rotation(fwd);
    std::string b = min_rotation(rev);
    return a < b ? a : b;
}

// Walks the straight line leaving the vertex wedge (tri0, corner0) in
// direction d0 (inside the wedge cone). Passes removable vertices straight
// through. Ends when the departure state recurs (a closed chain), when a
// singular vertex blocks the line, or when the budget runs out.
struct LineWalk {
    enum class Status { Closed, Singular, Budget };
    Status status = Status::Budget;
    Chain chain;         // Closed
    AffineMap place_in;  // Closed: chart of nodes[0].tri_in -> starting chart
    int hit_vertex = -1;               // Singular
    int arr_tri = -1, arr_corner = -1;  // Singular: arrival wedge
    Vec2 arr_d;                         // Singular: direction, arrival chart
};

LineWalk walk_line(const Surface& s, int tri0, int corner0, const Vec2& d0,
                   int budget) {
    LineWalk out;
    Walker w(s, SurfacePoint{tri0, s.corner(tri0, corner0)}, d0);
    std::vector<ChainNode> nodes;
    std::vector<std::vector<HalfEdge>> piece_at;  // word before each vertex hit
    std::optional<AffineMap> first_arrival_place;
    size_t mark = 0;
    int steps = 0;
    while (true) {
        if (++steps > budget) return out;
        ExitInfo ex = find_exit(s.triangle(w.t), w.p, w.d);
        Vec2 exit_pt = w.p + w.d * ex.t;
        if (ex.ntight == 1) {
            w.cross_edge(half_edge(w.t, ex.tight[0]), exit_pt);
            continue;
        }
        int corner = corner_of_tight_pair(ex.tight[0], ex.tight[1]);
        int v = s.vertex_at(w.t, corner);
        ChainNode node;
        node.vertex = v;
        node.tri_in = w.t;
        node.corner_in = corner;
        node.d_in = w.d;
        if (s.vertex_singular(v)) {
            out.status = LineWalk::Status::Singular;
            out.hit_vertex = v;
            out.arr_tri = w.t;
            out.arr_corner = corner;
            out.arr_d = w.d;
            return out;
        }
        if (!first_arrival_place) first_arrival_place = w.place;
        piece_at.emplace_back(w.word.begin() + mark, w.word.end());
        if (!w.pass_vertex(corner, nullptr))
            throw Error(ErrorCode::InvalidArgument,
                        "removable vertex failed to pass");
        mark = w.word.size();
        node.tri_out = w.t;
        node.corner_out = corner_index_at(s, w.t, w.p);
        node.d_out = w.d;
        nodes.push_back(node);
        if (w.t == tri0 && node.corner_out == corner0 && same_ray(w.d, d0)) {
            size_t m = nodes.size();
            out.chain.nodes = std::move(nodes);
            out.chain.pieces.resize(m);
            for (size_t i = 0; i < m; ++i)
                out.chain.pieces[i] = std::move(piece_at[(i + 1) % m]);
            out.place_in = *first_arrival_place;
            out.status = LineWalk::Status::Closed;
            return out;
        }
    }
}

// ---- boundary trails ------------------------------------------------------------

struct BoundaryStart {
    int tri = -1;
    int corner = -1;
    Vec2 d;
};

// Follows the closed trail that turns by exactly pi on `cyl_side` at every
// singular vertex it meets (passing straight through removable ones),
// starting from the departure wedge `dep0`. Returns the closed trail period
// or nothing when the budget runs out.
std::optional<Trail> boundary_walk(const Surface& s, const BoundaryStart& dep0,
                                   Sweep cyl_side, int budget) {
    Trail tr;
    tr.closed = true;
    BoundaryStart cur = dep0;
    int steps = 0;
    while (true) {
        SurfacePoint seg_start{cur.tri, s.corner(cur.tri, cur.corner)};
        Walker w(s, seg_start, cur.d);
        while (true) {
            if (++steps > budget) return std::nullopt;
            ExitInfo ex = find_exit(s.triangle(w.t), w.p, w.d);
            Vec2 exit_pt = w.p + w.d * ex.t;
            if (ex.ntight == 1) {
                w.cross_edge(half_edge(w.t, ex.tight[0]), exit_pt);
                continue;
            }
            int corner = corner_of_tight_pair(ex.tight[0], ex.tight[1]);
            int v = s.vertex_at(w.t, corner);
            if (!s.vertex_singular(v)) {
                if (!w.pass_vertex(corner, nullptr))
                    throw Error(ErrorCode::InvalidArgument,
                                "removable vertex failed to pass");
                continue;
            }
            tr.points.push_back(seg_start);
            tr.segments.push_back(w.word);
            TurnOut turn = pi_turn(s, w.t, corner, w.d, cyl_side);
            cur.tri = turn.tri;
            cur.corner = turn.corner;
            cur.d = turn.d;
            break;
        }
        if (cur.tri == dep0.tri && cur.corner == dep0.corner &&
            same_ray(cur.d, dep0.d)) {
            tr.points.push_back(tr.points.front());
            return tr;
        }
        if (static_cast<int>(tr.segments.size()) > budget) return std::nullopt;
    }
}

// ---- chains from and to closed trails -------------------------------------------

Chain chain_from_closed_trail(const Surface& s, const ClosedTrail& t) {
    const Trail& tr = t.period;
    size_t k = tr.segments.size();
    auto ends = trail_segment_ends(s, tr);
    Chain ch;
    if (t.bends.empty()) {
        for (const auto& seg : tr.segments)
            ch.bare.insert(ch.bare.end(), seg.begin(), seg.end());
        ch.bare_tri = tr.points[0].tri;
        ch.bare_p = tr.points[0].p;
        ch.bare_d = ends[0].out_dir;
        return ch;
    }
    size_t nb = t.bends.size();
    for (size_t bi = 0; bi < nb; ++bi) {
        int j = t.bends[bi].point;
        int jn = t.bends[(bi + 1) % nb].point;
        const SegmentEnd& arr = ends[(j + k - 1) % k];
        LocatedPoint lin = locate(s, arr.at);
        LocatedPoint lout = locate(s, tr.points[j]);
        ChainNode node;
        node.vertex = lout.vertex;
        node.tri_in = arr.at.tri;
        node.corner_in = lin.corner;
        node.d_in = arr.dir;
        node.tri_out = tr.points[j].tri;
        node.corner_out = lout.corner;
        node.d_out = ends[j].out_dir;
        ch.nodes.push_back(node);
        std::vector<HalfEdge> piece;
        size_t m = j;
        do {
            piece.insert(piece.end(), tr.segments[m].begin(),
                         tr.segments[m].end());
            m = (m + 1) % k;
        } while (static_cast<int>(m) != jn);
        ch.pieces.push_back(std::move(piece));
    }
    return ch;
}

Trail trail_of_chain(const Surface& s, const Chain& ch) {
    Trail tr;
    tr.closed = true;
    size_t n = ch.nodes.size();
    for (size_t i = 0; i < n; ++i) {
        const ChainNode& nd = ch.nodes[i];
        tr.points.push_back(
            {nd.tri_out, s.corner(nd.tri_out, nd.corner_out)});
        tr.segments.push_back(ch.pieces[i]);
    }
    tr.points.push_back(tr.points.front());
    return tr;
}

// ---- band words and strips -------------------------------------------------------

// Fan edges a leaf just past the chain on a given side crosses while passing
// a node, together with the resolved entry wedge. The scan walks far edges
// counterclockwise for the right side and near edges clockwise for the left;
// when the line runs along a fan ray the resolved wedges shift by one so the
// word stays on the chosen side of the run.
struct Passage {
    std::vector<HalfEdge> edges;
    int start_tri = -1;
    int start_corner = -1;
    Vec2 start_d;             // line direction in the start wedge's chart
    AffineMap start_to_arr;   // chart of start wedge -> chart of node.tri_in
};

std::pair<int, int> ccw_next(const Surface& s, int tri, int corner) {
    return s.corner_next_ccw(tri, corner);
}
std::pair<int, int> cw_prev(const Surface& s, int tri, int corner) {
    HalfEdge h = s.twin(half_edge(tri, corner));
    return {he_tri(h), (he_idx(h) + 1) % 3};
}

Passage node_passage(const Surface& s, const ChainNode& n, Sweep side) {
    Passage out;
    Vec2 near_in = s.corner(n.tri_in, (n.corner_in + 1) % 3) -
                   s.corner(n.tri_in, n.corner_in);
    Vec2 far_in = s.corner(n.tri_in, (n.corner_in + 2) % 3) -
                  s.corner(n.tri_in, n.corner_in);
    Vec2 back = -n.d_in;
    Vec2 near_out = s.corner(n.tri_out, (n.corner_out + 1) % 3) -
                    s.corner(n.tri_out, n.corner_out);
    Vec2 far_out = s.corner(n.tri_out, (n.corner_out + 2) % 3) -
                   s.corner(n.tri_out, n.corner_out);

    int st = n.tri_in, sc = n.corner_in;
    out.start_d = n.d_in;
    out.start_to_arr = identity_map();
    int tt = n.tri_out, tc = n.corner_out;
    if (side == Sweep::Right) {
        if (same_ray(back, far_in)) {
            HalfEdge fh = half_edge(n.tri_in, (n.corner_in + 2) % 3);
            auto nx = ccw_next(s, st, sc);
            st = nx.first;
            sc = nx.second;
            out.start_d = n.d_in * s.glue(s.twin(fh)).a;
            out.start_to_arr = s.glue(fh);
        }
        if (same_ray(n.d_out, near_out)) {
            auto pv = cw_prev(s, tt, tc);
            tt = pv.first;
            tc = pv.second;
        }
        int guard = 0;
        int limit = static_cast<int>(s.cone(n.vertex).corners.size()) + 2;
        int ct = st, cc = sc;
        while (!(ct == tt && cc == tc)) {
            if (++guard > limit)
                throw Error(ErrorCode::InvalidArgument,
                            "side passage walked past the vertex fan");
            out.edges.push_back(half_edge(ct, (cc + 2) % 3));
            auto nx = ccw_next(s, ct, cc);
            ct = nx.first;
            cc = nx.second;
        }
    } else {
        if (same_ray(back, near_in)) {
            HalfEdge nh = half_edge(n.tri_in, n.corner_in);
            auto pv = cw_prev(s, st, sc);
            st = pv.first;
            sc = pv.second;
            out.start_d = n.d_in * s.glue(s.twin(nh)).a;
            out.start_to_arr = s.glue(nh);
        }
        if (same_ray(n.d_out, far_out)) {
            auto nx = ccw_next(s, tt, tc);
            tt = nx.first;
            tc = nx.second;
        }
        int guard = 0;
        int limit = static_cast<int>(s.cone(n.vertex).corners.size()) + 2;
        int ct = st, cc = sc;
        while (!(ct == tt && cc == tc)) {
            if (++guard > limit)
                throw Error(ErrorCode::InvalidArgument,
                            "side passage walked past the vertex fan");
            out.edges.push_back(half_edge(ct, cc));
            auto pv = cw_prev(s, ct, cc);
            ct = pv.first;
            cc = pv.second;
        }
    }
    out.start_tri = st;
    out.start_corner = sc;
    return out;
}

// The crossing word of the closed leaves just past a chain on one side,
// anchored at a point and direction of the chain's line in the chart the
// word starts in.
struct Band {
    std::vector<HalfEdge> word;
    int strip_tri = -1;
    Vec2 x, d;                 // anchor on the line, strip chart
    AffineMap anchor_to_node0;  // strip chart -> chart of nodes[0].tri_in
};

Band band_word(const Surface& s, const Chain& ch, Sweep side) {
    Band out;
    if (ch.nodeless()) {
        if (ch.bare.empty())
            throw Error(ErrorCode::InvalidArgument, "degenerate band word");
        out.word = ch.bare;
        out.strip_tri = ch.bare_tri;
        out.x = ch.bare_p;
        out.d = ch.bare_d;
        out.anchor_to_node0 = identity_map();
        return out;
    }
    size_t n = ch.nodes.size();
    std::vector<Passage> pass(n);
    for (size_t i = 0; i < n; ++i) pass[i] = node_passage(s, ch.nodes[i], side);
    size_t ai = n;
    for (size_t i = 0; i < n; ++i) {
        if (!pass[i].edges.empty() || !ch.pieces[i].empty()) {
            ai = i;
            break;
        }
    }
    if (ai == n)
        throw Error(ErrorCode::InvalidArgument, "degenerate band word");
    for (size_t k = 0; k < n; ++k) {
        size_t i = (ai + k) % n;
        out.word.insert(out.word.end(), pass[i].edges.begin(),
                        pass[i].edges.end());
        out.word.insert(out.word.end(), ch.pieces[i].begin(),
                        ch.pieces[i].end());
    }
    const Passage& ap = pass[ai];
    if (!ap.edges.empty()) {
        out.strip_tri = ap.start_tri;
        out.x = s.corner(ap.start_tri, ap.start_corner);
        out.d = ap.start_d;
        out.anchor_to_node0 = ap.start_to_arr;
    } else {
        const ChainNode& nd = ch.nodes[ai];
        out.strip_tri = nd.tri_out;
        out.x = s.corner(nd.tri_out, nd.corner_out);
        out.d = nd.d_out;
        out.anchor_to_node0 = identity_map();
    }
    if (he_tri(out.word.front()) != out.strip_tri)
        throw Error(ErrorCode::InvalidArgument,
                    "band word does not start in its anchor chart");
    return out;
}

// ---- sweeping one side of a chain ------------------------------------------------

void push_ray(std::vector<Vec2>& rays, Vec2 r, Sweep side) {
    if (rays.empty()) {
        rays.push_back(std::move(r));
        return;
    }
    if (parallel(rays.back(), r)) return;
    bool want_pos = (side == Sweep::Left);
    if ((cross_sign(rays.back(), r) > 0) != want_pos) r = -r;
    rays.push_back(std::move(r));
}

struct SweepOutcome {
    std::vector<CylinderComponent> components;
    std::vector<AffineMap> comp_place;  // component chart -> input chart
    std::vector<ClosedTrail> junctions;
    std::optional<ClosedTrail> boundary;
    bool closes_up = false;
    std::vector<Vec2> rays;  // input chart, rotation-monotone toward `side`
    std::vector<std::string> chain_sigs;
};

SweepOutcome sweep_side(const Surface& s, const Chain& input, Sweep side,
                        int budget) {
    SweepOutcome out;
    std::set<std::string> seen;
    Chain ch = input;
    if (!ch.nodeless()) {
        std::string sig = chain_signature(ch);
        seen.insert(sig);
        out.chain_sigs.push_back(sig);
    }
    AffineMap to_node0 = identity_map();  // chart of ch.nodes[0].tri_in -> input chart
    bool comp_open = false;
    CylinderComponent cur;
    AffineMap cur_place;  // component chart -> input chart
    AffineMap cur_hin;    // component holonomy, input chart
    int bands = 0;

    auto finalize = [&](const Vec2& exit_dir_strip, const AffineMap& to_input) {
        Vec2 v_comp = exit_dir_strip * cur_place.inverse().compose(to_input).a;
        cur.slope_to = Slope::of(v_comp);
        out.components.push_back(cur);
        out.comp_place.push_back(cur_place);
        comp_open = false;
    };

    while (true) {
        if (++bands > budget)
            throw Error(ErrorCode::BudgetExhausted,
                        "cylinder sweep ran out of band budget");
        Band band = band_word(s, ch, side);
        AffineMap to_input = to_node0.compose(band.anchor_to_node0);
        auto steps = develop_word(s, band.strip_tri, band.word);
        AffineMap h = loop_holonomy(s, band.word);
        AffineMap hin = to_input.compose(h).compose(to_input.inverse());
        if (comp_open && !(hin == cur_hin)) {
            finalize(band.d, to_input);
            ClosedTrail jt = make_closed_trail(s, trail_of_chain(s, ch));
            out.junctions.push_back(std::move(jt));
        }
        if (!comp_open) {
            cur = CylinderComponent{};
            cur.holonomy = h;
            cur.band = band.word;
            cur.band_tri = band.strip_tri;
            cur.slope_from = Slope::of(band.d);
            if (h.a != 1) {
                cur.center = h.fixed_point();
                if (cross_sign(band.d, cur.center - band.x) != 0)
                    throw Error(ErrorCode::InvalidArgument,
                                "dilation center sits off its junction line");
            }
            cur_place = to_input;
            cur_hin = hin;
            comp_open = true;
        }
        push_ray(out.rays, band.d * to_input.a, side);

        // First vertex the moving leaf family hits: among the strip's placed
        // corners strictly on the sweep side, the closest line (flat) or the
        // smallest rotation about the dilation center.
        bool flat = (h.a == 1);
        Vec2 cen = flat ? Vec2{} : h.fixed_point();
        bool have = false;
        Vec2 best_v;
        int best_tri = -1, best_corner = -1;
        AffineMap best_place;
        for (const auto& st : steps) {
            for (int c = 0; c < 3; ++c) {
                Vec2 v = st.place(s.corner(st.tri, c));
                Rat sd = cross(band.d, v - band.x);
                if (side == Sweep::Right) sd = -sd;
                if (sd <= 0) continue;
                bool take = false;
                if (!have) {
                    take = true;
                } else if (flat) {
                    Rat gap = cross(band.d, v - best_v);
                    take = gap == 0 ? false
                           : side == Sweep::Right ? gap > 0 : gap < 0;
                } else {
                    Vec2 u = v - cen;
                    Vec2 w2 = best_v - cen;
                    Rat lhs, rhs;
                    if (side == Sweep::Left) {
                        lhs = dot(band.d, u) * cross(band.d, w2);
                        rhs = dot(band.d, w2) * cross(band.d, u);
                    } else {
                        lhs = dot(band.d, w2) * cross(band.d, u);
                        rhs = dot(band.d, u) * cross(band.d, w2);
                    }
                    take = lhs > rhs;
                }
                if (take) {
                    have = true;
                    best_v = v;
                    best_tri = st.tri;
                    best_corner = c;
                    best_place = st.place;
                }
            }
        }
        if (!have)
            throw Error(ErrorCode::InvalidArgument,
                        "sweep found no corner on its side of the band");
        Vec2 dir_strip = flat ? band.d : best_v - cen;
        int v_id = s.vertex_at(best_tri, best_corner);
        Vec2 dir_local = dir_strip * best_place.inverse().a;

        if (s.vertex_singular(v_id)) {
            finalize(dir_strip, to_input);
            push_ray(out.rays, dir_strip * to_input.a, side);
            // The half-turn continuation must be anchored at the wedge the
            // limiting leaf arrives through: among the strip wedges placed at
            // the event vertex, the one whose closed cone holds the backward
            // ray. The event corner's own cone may face away from it.
            Vec2 back = -dir_strip;
            int at_tri = -1, at_corner = -1;
            AffineMap at_place;
            for (const auto& st : steps) {
                for (int c = 0; c < 3 && at_tri < 0; ++c) {
                    if (!(st.place(s.corner(st.tri, c)) == best_v)) continue;
                    Vec2 pa = st.place(s.corner(st.tri, (c + 1) % 3)) - best_v;
                    Vec2 pb = st.place(s.corner(st.tri, (c + 2) % 3)) - best_v;
                    if (cone_contains_near(pa, pb, back) || same_ray(back, pb)) {
                        at_tri = st.tri;
                        at_corner = c;
                        at_place = st.place;
                    }
                }
                if (at_tri >= 0) break;
            }
            if (at_tri < 0)
                throw Error(ErrorCode::InvalidArgument,
                            "sweep event has no arrival wedge in its strip");
            TurnOut turn =
                pi_turn(s, at_tri, at_corner,
                        dir_strip * at_place.inverse().a, opposite(side));
            auto btr = boundary_walk(
                s, BoundaryStart{turn.tri, turn.corner, turn.d},
                opposite(side), budget);
            if (!btr)
                throw Error(ErrorCode::BudgetExhausted,
                            "boundary walk ran out of budget");
            out.boundary = make_closed_trail(s, *btr);
            return out;
        }

        DepartureWedge dep =
            find_departure_wedge(s, best_tri, best_corner, dir_local);
        LineWalk lw = walk_line(s, dep.tri, dep.corner, dep.d, budget);
        if (lw.status == LineWalk::Status::Budget)
            throw Error(ErrorCode::BudgetExhausted,
                        "junction line walk ran out of budget");
        if (lw.status == LineWalk::Status::Singular) {
            // The event line itself is a boundary chain through a
            // singularity; trace the full boundary trail from the blocking
            // vertex and stop the sweep there.
            finalize(dir_strip, to_input);
            push_ray(out.rays, dir_strip * to_input.a, side);
            TurnOut turn =
                pi_turn(s, lw.arr_tri, lw.arr_corner, lw.arr_d, opposite(side));
            auto btr = boundary_walk(
                s, BoundaryStart{turn.tri, turn.corner, turn.d},
                opposite(side), budget);
            if (!btr)
                throw Error(ErrorCode::BudgetExhausted,
                            "boundary walk ran out of budget");
            out.boundary = make_closed_trail(s, *btr);
            return out;
        }
        std::string sig = chain_signature(lw.chain);
        if (seen.count(sig)) {
            finalize(dir_strip, to_input);
            push_ray(out.rays, dir_strip * to_input.a, side);
            out.closes_up = true;
            return out;
        }
        seen.insert(sig);
        out.chain_sigs.push_back(sig);
        ch = lw.chain;
        to_node0 = to_input.compose(best_place)
                       .compose(dep.place)
                       .compose(lw.place_in);
    }
}

AffineMap holo_in(const SweepOutcome& o, size_t i) {
    return o.comp_place[i]
        .compose(o.components[i].holonomy)
        .compose(o.comp_place[i].inverse());
}

// Merge the first component into the last when a single-sided sweep wrapped
// all the way around: the band the sweep started in is interior to the last
// component it found. When the wrap instead stopped at a separating chain,
// the input chain is a junction of its own cylinder.
void wrap_merge(const Surface& s, SweepOutcome& o, const Chain& input) {
    if (!o.closes_up || o.components.size() < 2) return;
    if (holo_in(o, 0) == holo_in(o, o.components.size() - 1)) {
        o.components.front().slope_from = o.components.back().slope_from;
        o.components.pop_back();
        o.comp_place.pop_back();
    } else if (!input.nodeless()) {
        o.junctions.insert(o.junctions.begin(),
                           make_closed_trail(s, trail_of_chain(s, input)));
    }
}

Cylinder assemble_cylinder(const Surface& s, const Chain& ch,
                           const std::optional<ClosedTrail>& self,
                           bool do_right, bool do_left, bool self_is_boundary,
                           int budget, std::vector<std::string>* sigs_out) {
    SweepOutcome right, left;
    bool did_right = false, did_left = false;
    if (do_right) {
        right = sweep_side(s, ch, Sweep::Right, budget);
        wrap_merge(s, right, ch);
        did_right = true;
    }
    if (do_left && !(did_right && right.closes_up)) {
        left = sweep_side(s, ch, Sweep::Left, budget);
        wrap_merge(s, left, ch);
        did_left = true;
    }

    Cylinder out;
    out.closes_up = (did_right && right.closes_up) || (did_left && left.closes_up);

    std::vector<CylinderComponent> rev = right.components;
    std::reverse(rev.begin(), rev.end());
    for (auto& c : rev) std::swap(c.slope_from, c.slope_to);

    bool merged = false;
    if (did_right && did_left && !right.components.empty() &&
        !left.components.empty() &&
        holo_in(right, 0) == holo_in(left, 0)) {
        CylinderComponent joined = left.components.front();
        joined.slope_from = rev.back().slope_from;
        rev.pop_back();
        out.components = std::move(rev);
        out.components.push_back(std::move(joined));
        out.components.insert(out.components.end(),
                              left.components.begin() + 1,
                              left.components.end());
        merged = true;
    } else {
        out.components = std::move(rev);
        out.components.insert(out.components.end(), left.components.begin(),
                              left.components.end());
    }

    out.junctions.assign(right.junctions.rbegin(), right.junctions.rend());
    if (did_right && did_left && !merged && self) out.junctions.push_back(*self);
    out.junctions.insert(out.junctions.end(), left.junctions.begin(),
                         left.junctions.end());

    if (self_is_boundary && self) out.boundaries.push_back(*self);
    if (right.boundary) out.boundaries.push_back(*right.boundary);
    if (left.boundary) out.boundaries.push_back(*left.boundary);

    std::vector<Vec2> combined(right.rays.rbegin(), right.rays.rend());
    if (did_left) {
        std::vector<Vec2> lr = left.rays;
        if (combined.empty()) {
            combined = std::move(lr);
        } else if (!lr.empty()) {
            if (!same_ray(lr.front(), combined.back()))
                for (auto& v : lr) v = -v;
            combined.insert(combined.end(), lr.begin() + 1, lr.end());
        }
    }
    out.full = combined.size() >= 2 &&
               angle_cmp_k_pi(combined, 1) != AngleCmp::Less;

    if (sigs_out) {
        *sigs_out = right.chain_sigs;
        sigs_out->insert(sigs_out->end(), left.chain_sigs.begin(),
                         left.chain_sigs.end());
        std::string own = chain_signature(ch);
        if (!own.empty()) sigs_out->push_back(own);
    }
    return out;
}

// ---- helpers for the torus fast path ---------------------------------------------

// Splits a traced closed leaf into a two-segment closed trail so the closed
// trail machinery (verification, sweeping) can consume it.
Trail closed_leaf_trail(const Surface& s, const SurfacePoint& start,
                        const Vec2& dir, const std::vector<HalfEdge>& word) {
    Trail tr;
    tr.closed = true;
    ExitInfo ex = find_exit(s.triangle(start.tri), start.p, dir);
    Vec2 exit_pt = start.p + dir * ex.t;
    SurfacePoint mid;
    std::vector<HalfEdge> first_leg;
    if (ex.ntight == 1) {
        HalfEdge h = half_edge(start.tri, ex.tight[0]);
        if (word.empty() || word.front() != h)
            throw Error(ErrorCode::InvalidArgument,
                        "leaf word does not start at its first crossing");
        mid.tri = he_tri(s.twin(h));
        mid.p = s.glue(s.twin(h))(exit_pt);
        first_leg.push_back(h);
    } else {
        int corner = corner_of_tight_pair(ex.tight[0], ex.tight[1]);
        mid.tri = start.tri;
        mid.p = s.corner(start.tri, corner);
    }
    std::vector<HalfEdge> rest(word.begin() + first_leg.size(), word.end());
    tr.points = {start, mid, start};
    tr.segments = {std::move(first_leg), std::move(rest)};
    return tr;
}

// ---- candidate directions for junction lines --------------------------------------

// Directions from the vertex wedge (tri, corner) toward developed vertex
// lifts in a small patch of the universal cover, restricted to the wedge's
// cone. `removable_only` keeps only lifts of removable vertices.
std::vector<Vec2> candidate_dirs(const Surface& s, int tri, int corner,
                                 int patch, bool removable_only) {
    Cover cov(s, tri);
    Vec2 apex = s.corner(tri, corner);
    Vec2 a = s.corner(tri, (corner + 1) % 3) - apex;
    Vec2 b = s.corner(tri, (corner + 2) % 3) - apex;
    std::set<std::pair<Int, Int>> seen;
    std::vector<Vec2> out;
    for (int copy = 0; copy < cov.num_copies() && copy < patch; ++copy) {
        for (int e = 0; e < 3; ++e) cov.neighbor(copy, e);
        AffineMap pl = cov.placement(copy);
        int t = cov.tri(copy);
        for (int c = 0; c < 3; ++c) {
            int v = s.vertex_at(t, c);
            if (removable_only && s.vertex_singular(v)) continue;
            if (s.cone(v).is_pole) continue;
            Vec2 u = pl(s.corner(t, c)) - apex;
            if (u.is_zero()) continue;
            if (!cone_contains_near(a, b, u)) continue;
            Direction dd(u);
            if (seen.insert({dd.x, dd.y}).second) out.push_back(dd.vec());
        }
    }
    std::sort(out.begin(), out.end(), [](const Vec2& l, const Vec2& r) {
        if (l.x != r.x) return l.x < r.x;
        return l.y < r.y;
    });
    return out;
}

// ---- signatures of closed trails ---------------------------------------------------

Trail reverse_trail(const Surface& s, const Trail& tr) {
    size_t k = tr.segments.size();
    auto ends = trail_segment_ends(s, tr);
    Trail rev;
    rev.closed = tr.closed;
    for (size_t i = 0; i < k; ++i) rev.points.push_back(ends[k - 1 - i].at);
    rev.points.push_back(rev.points.front());
    for (size_t i = 0; i < k; ++i)
        rev.segments.push_back(inverse_word(s, tr.segments[k - 1 - i]));
    return rev;
}

std::string trail_units_signature(const Surface& s, const Trail& tr) {
    size_t k = tr.segments.size();
    auto ends = trail_segment_ends(s, tr);
    std::vector<int> bend_points;
    for (size_t j = 0; j < k; ++j) {
        LocatedPoint l = locate(s, tr.points[j]);
        if (l.locus == PointLocus::AtVertex) bend_points.push_back(static_cast<int>(j));
    }
    if (bend_points.empty()) return {};
    size_t nb = bend_points.size();
    std::vector<std::string> units(nb);
    for (size_t bi = 0; bi < nb; ++bi) {
        int j = bend_points[bi];
        int jn = bend_points[(bi + 1) % nb];
        LocatedPoint lo = locate(s, tr.points[j]);
        const Vec2& dout = ends[j].out_dir;
        // Canonical departure wedge: the smallest fan claim of the outgoing
        // ray, so the key does not depend on which chart stored the point.
        Vec2 apex = tr.points[j].p;
        auto fan = vertex_fan(s, tr.points[j].tri, lo.corner);
        std::string claim;
        for (const WedgePlacement& wp : fan) {
            Vec2 pa = wp.place(s.corner(wp.tri, (wp.corner + 1) % 3)) - apex;
            Vec2 pb = wp.place(s.corner(wp.tri, (wp.corner + 2) % 3)) - apex;
            if (!cone_contains_near(pa, pb, dout)) continue;
            Direction dd(dout * wp.place.inverse().a);
            std::ostringstream oss;
            oss << wp.tri << ':' << wp.corner << ':' << int_str(dd.x) << ','
                << int_str(dd.y);
            if (claim.empty() || oss.str() < claim) claim = oss.str();
        }
        std::ostringstream unit;
        unit << 'v' << lo.vertex << '@' << claim << '!';
        size_t m = j;
        do {
            for (HalfEdge h : tr.segments[m]) unit << h << '.';
            m = (m + 1) % k;
        } while (static_cast<int>(m) != jn);
        units[bi] = unit.str();
    }
    std::string best;
    for (size_t r = 0; r < nb; ++r) {
        std::string cand;
        for (size_t i = 0; i < nb; ++i) {
            cand += units[(r + i) % nb];
            cand += '|';
        }
        if (best.empty() || cand < best) best = cand;
    }
    return best;
}

// ---- lollipop extraction ------------------------------------------------------------

struct VertexKey {
    int copy = -1;
    int corner = -1;
    bool valid() const { return copy >= 0; }
    bool operator==(const VertexKey& o) const {
        return copy == o.copy && corner == o.corner;
    }
};

VertexKey canonical_lift(Cover& cover, int copy, int corner) {
    VertexKey best{copy, corner};
    for (auto& [cp, cc] : cover.close_fan(copy, corner)) {
        if (cp < best.copy || (cp == best.copy && cc < best.corner))
            best = VertexKey{cp, cc};
    }
    return best;
}

// When the connecting arc revisits a vertex at two deck-related lifts, the
// arc is a stick plus a closed loop ("stick and candy"); the enclosed loop
// between the closest such pair is the closed trail of the class.
std::optional<Trail> extract_lollipop(const Surface& s, Cover& cover, int c1,
                                      const std::vector<HalfEdge>& base_path,
                                      const SurfacePoint& q,
                                      const LocatedPoint& lq, const Trail& arc,
                                      const std::vector<SegmentEnd>& ends) {
    size_t k = arc.segments.size();
    if (k < 2) return std::nullopt;
    int cw = cover.follow_word(0, base_path);
    std::vector<HalfEdge> path = base_path;
    LocatedPoint l0 = locate(s, arc.points[0]);
    if (arc.points[0].tri != cover.tri(cw)) {
        if (lq.locus != PointLocus::AtVertex ||
            l0.locus != PointLocus::AtVertex)
            return std::nullopt;
        int tc = cover.tri(cw), cc = lq.corner;
        int guard = 0;
        int limit =
            static_cast<int>(s.cone(s.vertex_at(tc, cc)).corners.size()) + 2;
        while (!(tc == arc.points[0].tri && cc == l0.corner)) {
            if (++guard > limit) return std::nullopt;
            HalfEdge crossed = half_edge(tc, (cc + 2) % 3);
            path.push_back(crossed);
            cw = cover.neighbor(cw, he_idx(crossed));
            auto nx = s.corner_next_ccw(tc, cc);
            tc = nx.first;
            cc = nx.second;
        }
    }
    std::vector<VertexKey> key(k + 1), dkey(k + 1);
    int cur = cw;
    std::vector<HalfEdge> cur_path = path;
    for (size_t j = 0; j <= k; ++j) {
        int corner = -1;
        if (j == 0) {
            if (l0.locus == PointLocus::AtVertex) corner = l0.corner;
        } else {
            cur = cover.follow_word(cur, arc.segments[j - 1]);
            cur_path.insert(cur_path.end(), arc.segments[j - 1].begin(),
                            arc.segments[j - 1].end());
            LocatedPoint le = locate(s, ends[j - 1].at);
            if (le.locus == PointLocus::AtVertex &&
                ends[j - 1].at.tri == cover.tri(cur))
                corner = le.corner;
        }
        if (corner < 0) continue;
        key[j] = canonical_lift(cover, cur, corner);
        int dcur = cover.follow_word(c1, cur_path);
        dkey[j] = canonical_lift(cover, dcur, corner);
    }
    for (size_t span = 1; span + 1 <= k; ++span) {
        for (size_t j = 0; j + span <= k; ++j) {
            size_t l = j + span;
            if (j == 0 && l == k) continue;
            if (!key[j].valid() || !key[l].valid()) continue;
            if (!(key[l] == dkey[j])) continue;
            Trail candy;
            candy.closed = true;
            for (size_t m = j; m <= l; ++m) candy.points.push_back(arc.points[m]);
            for (size_t m = j; m < l; ++m)
                candy.segments.push_back(arc.segments[m]);
            return candy;
        }
    }
    return std::nullopt;
}

std::string cyclic_word_key(std::vector<HalfEdge> w) {
    if (w.empty()) return {};
    size_t n = w.size();
    std::string best;
    for (size_t r = 0; r < n; ++r) {
        std::ostringstream oss;
        for (size_t i = 0; i < n; ++i) oss << w[(r + i) % n] << '.';
        if (best.empty() || oss.str() < best) best = oss.str();
    }
    return best;
}

}  // namespace

// ---- classes -------------------------------------------------------------------------

HomotopyClass make_class(const Surface& s, std::vector<HalfEdge> word) {
    if (word.empty())
        throw Error(ErrorCode::InvalidArgument, "a class needs a nonempty word");
    for (HalfEdge h : word)
        if (h < 0 || h >= 3 * s.num_triangles())
            throw Error(ErrorCode::InvalidArgument, "half-edge out of range");
    if (!word_is_closed(s, word))
        throw Error(ErrorCode::InvalidArgument,
                    "the word is not a closed dual loop");
    HomotopyClass cls;
    cls.seed = he_tri(word.front());
    cls.holonomy = loop_holonomy(s, word);
    cls.word = std::move(word);
    return cls;
}

void validate_class(const Surface& s, const HomotopyClass& cls) {
    std::vector<HalfEdge> red = reduce_word(s, cls.word);
    if (red.empty())
        throw Error(ErrorCode::ClassTrivial,
                    "the word reduces to the trivial loop");
    size_t n = red.size();
    for (size_t d = 1; d < n; ++d) {
        if (n % d != 0) continue;
        bool periodic = true;
        for (size_t i = 0; i < n && periodic; ++i)
            periodic = (red[i] == red[(i + d) % n]);
        if (periodic)
            throw Error(ErrorCode::ClassIsPower,
                        "the word is a proper power of a shorter loop");
    }
}

// ---- closed trails ---------------------------------------------------------------------

ClosedTrail make_closed_trail(const Surface& s, Trail period) {
    if (!period.closed)
        throw Error(ErrorCode::InvalidArgument,
                    "a closed trail needs a closed period");
    TrailCheck chk = verify_trail(s, period);
    if (!chk.ok)
        throw Error(ErrorCode::InvalidArgument,
                    "closed trail rejected: " + chk.problem);
    ClosedTrail out;
    for (const auto& seg : period.segments)
        out.word.insert(out.word.end(), seg.begin(), seg.end());
    out.holonomy = loop_holonomy(s, out.word);
    for (size_t j = 0; j < chk.corners.size(); ++j) {
        const CornerCheck& cc = chk.corners[j];
        if (!cc.at_vertex) continue;
        TrailBend bend;
        bend.point = static_cast<int>(j);
        bend.vertex = cc.vertex;
        bend.right = cc.ccw_side == AngleCmp::Greater ? SideAngle::GreaterThanPi
                                                      : SideAngle::ExactlyPi;
        bend.left = cc.cw_side == AngleCmp::Greater ? SideAngle::GreaterThanPi
                                                    : SideAngle::ExactlyPi;
        out.bends.push_back(bend);
    }
    out.period = std::move(period);
    return out;
}

bool ClosedTrail::right_all_pi() const {
    for (const TrailBend& b : bends)
        if (b.right == SideAngle::GreaterThanPi) return false;
    return true;
}

bool ClosedTrail::left_all_pi() const {
    for (const TrailBend& b : bends)
        if (b.left == SideAngle::GreaterThanPi) return false;
    return true;
}

std::string closed_trail_signature(const Surface& s, const ClosedTrail& t) {
    if (t.bends.empty()) return {};
    std::string fwd = trail_units_signature(s, t.period);
    std::string rev = trail_units_signature(s, reverse_trail(s, t.period));
    return fwd < rev ? fwd : rev;
}

// ---- tightening ------------------------------------------------------------------------

TightenResult tighten(const Surface& s, const HomotopyClass& cls,
                      const SurfacePoint& start, int budget, int max_iter) {
    if (!s.is_leaf_triangulation())
        throw Error(ErrorCode::NotLeafTriangulation,
                    "tightening needs every cone angle to be at least 3 half-turns");
    Cover cover(s, cls.seed);
    int c1 = cover.follow_word(0, cls.word);
    TightenResult out;
    SurfacePoint q = start;
    std::optional<Trail> last_arc;
    for (int iter = 0; iter < max_iter; ++iter) {
        out.iterations = iter + 1;
        for (const SurfacePoint& prev : out.visited) {
            if (same_surface_point(s, prev, q)) {
                out.status = TightenResult::Status::Diverged;
                out.arc = last_arc;
                return out;
            }
        }
        out.visited.push_back(q);
        std::vector<HalfEdge> base_path = dual_path(s, cls.seed, q.tri);
        int cq = cover.follow_word(0, base_path);
        int cdq = cover.follow_word(c1, base_path);
        if (cdq == cq)
            throw Error(ErrorCode::ClassTrivial,
                        "the class acts trivially on the cover");
        RayCoverage cov(cover, DevelopedPoint{cq, q.p}, budget);
        Trail arc;
        try {
            arc = cov.trail_to(DevelopedPoint{cdq, q.p});
        } catch (const Error& e) {
            if (e.code() == ErrorCode::NotCovered) {
                if (cov.frontier_exhausted())
                    throw Error(ErrorCode::ConnectFailed,
                                "coverage completed without reaching the deck "
                                "translate of the seam point");
                throw Error(ErrorCode::BudgetExhausted,
                            "cover budget ran out while connecting the seam");
            }
            throw;
        }
        last_arc = arc;
        size_t k = arc.segments.size();
        auto ends = trail_segment_ends(s, arc);
        LocatedPoint lq = locate(s, q);
        bool pass = false;
        const SegmentEnd& arr = ends[k - 1];
        if (lq.locus == PointLocus::AtVertex) {
            LocatedPoint la = locate(s, arr.at);
            LocatedPoint lo = locate(s, arc.points[0]);
            if (la.locus == PointLocus::AtVertex &&
                lo.locus == PointLocus::AtVertex) {
                CornerCheck cc =
                    check_corner(s, arr.at.tri, la.corner, arr.dir,
                                 arc.points[0].tri, lo.corner, ends[0].out_dir);
                pass = cc.legal;
            }
        } else if (arr.at.tri == arc.points[0].tri) {
            pass = same_ray(arr.dir, ends[0].out_dir);
        } else {
            LocatedPoint la = locate(s, arr.at);
            if (la.locus == PointLocus::OnEdge) {
                HalfEdge w = s.twin(half_edge(arr.at.tri, la.edge));
                if (he_tri(w) == arc.points[0].tri)
                    pass = same_ray(arr.dir * s.glue(w).a, ends[0].out_dir);
            }
        }
        if (pass) {
            Trail period = arc;
            period.closed = true;
            if (auto candy = extract_lollipop(s, cover, c1, base_path, q, lq,
                                              arc, ends))
                period = *candy;
            // The wrap entry of a closed period repeats the first point's
            // stored representative exactly.
            period.points.back() = period.points.front();
            try {
                out.trail = make_closed_trail(s, std::move(period));
                out.status = TightenResult::Status::Closed;
                return out;
            } catch (const Error&) {
                out.status = TightenResult::Status::Diverged;
                out.arc = arc;
                return out;
            }
        }
        if (k >= 2) {
            q = arc.points[1];
        } else {
            Vec2 mid = arc.points[0].p + ends[0].out_dir * Rat(1, 2);
            SegmentTrace trm = trace_segment(s, arc.points[0], mid, 1 << 20);
            if (!trm.reached) {
                out.status = TightenResult::Status::Diverged;
                out.arc = arc;
                return out;
            }
            q = trm.end;
        }
    }
    out.status = TightenResult::Status::NotClosedYet;
    out.arc = last_arc;
    return out;
}

// ---- cylinders -------------------------------------------------------------------------

Cylinder extend_cylinder(const Surface& s, const ClosedTrail& t, int budget) {
    bool r = t.right_all_pi();
    bool l = t.left_all_pi();
    if (!r && !l)
        throw Error(ErrorCode::NotAllPiSide,
                    "the trail bends wider than a half-turn on both sides");
    Chain ch = chain_from_closed_trail(s, t);
    return assemble_cylinder(s, ch, t, r, l, /*self_is_boundary=*/r != l,
                             budget, nullptr);
}

std::vector<Cylinder> find_full_cylinders(const Surface& s, int budget) {
    std::vector<Cylinder> out;
    // A full cylinder sweeps a half-turn of slopes, which needs some gluing
    // with derivative != 1; on a pure translation surface every leaf family
    // keeps one slope forever.
    bool any_dilation = false;
    for (int h = 0; h < 3 * s.num_triangles() && !any_dilation; ++h)
        if (!(s.glue(h).a == 1)) any_dilation = true;
    if (!any_dilation) return out;

    std::set<std::string> seen_chains;
    std::set<std::string> seen_boundaries;
    int patch = budget / 512;
    if (patch < 6) patch = 6;
    if (patch > 32) patch = 32;
    // Candidate walks that do not close quickly are almost never junction
    // chains; keep the probe budget small and spend the real budget on the
    // sweeps of the candidates that do close.
    int probe = budget / 32;
    if (probe < 96) probe = 96;
    if (probe > budget) probe = budget;

    auto note_cylinder = [&](Cylinder&& cyl,
                             const std::vector<std::string>& sigs) {
        for (const std::string& sg : sigs)
            if (!sg.empty()) seen_chains.insert(sg);
        for (const ClosedTrail& b : cyl.boundaries)
            seen_boundaries.insert(closed_trail_signature(s, b));
        for (const ClosedTrail& j : cyl.junctions)
            seen_boundaries.insert(closed_trail_signature(s, j));
        if (cyl.full) out.push_back(std::move(cyl));
    };

    for (int v = 0; v < s.num_vertices(); ++v) {
        const ConeData& cone = s.cone(v);
        if (cone.is_pole) continue;
        bool singular = s.vertex_singular(v);
        for (const auto& [t, c] : cone.corners) {
            auto dirs = candidate_dirs(s, t, c, patch, !singular);
            for (const Vec2& d : dirs) {
                if (!singular) {
                    LineWalk lw = walk_line(s, t, c, d, probe);
                    if (lw.status != LineWalk::Status::Closed) continue;
                    std::string sig = chain_signature(lw.chain);
                    if (!seen_chains.insert(sig).second) continue;
                    try {
                        ClosedTrail jt =
                            make_closed_trail(s, trail_of_chain(s, lw.chain));
                        std::vector<std::string> sigs;
                        Cylinder cyl =
                            assemble_cylinder(s, lw.chain, jt, true, true,
                                              false, budget, &sigs);
                        note_cylinder(std::move(cyl), sigs);
                    } catch (const Error&) {
                        continue;
                    }
                } else {
                    for (Sweep cside : {Sweep::Left, Sweep::Right}) {
                        try {
                            auto btr = boundary_walk(
                                s, BoundaryStart{t, c, d}, cside, probe);
                            if (!btr) continue;
                            ClosedTrail bt = make_closed_trail(s, *btr);
                            bool all_pi = cside == Sweep::Left
                                              ? bt.left_all_pi()
                                              : bt.right_all_pi();
                            if (!all_pi) continue;
                            std::string bsig = closed_trail_signature(s, bt);
                            if (!seen_boundaries.insert(bsig).second) continue;
                            Chain bch = chain_from_closed_trail(s, bt);
                            std::vector<std::string> sigs;
                            Cylinder cyl = assemble_cylinder(
                                s, bch, bt, cside == Sweep::Right,
                                cside == Sweep::Left, true, budget, &sigs);
                            note_cylinder(std::move(cyl), sigs);
                        } catch (const Error&) {
                            continue;
                        }
                    }
                }
            }
        }
    }
    return out;
}

std::optional<FullCylinderHit> detect_full_cylinder_crossing(
    const Surface& s, const HomotopyClass& cls, int budget) {
    for (Cylinder& cyl : find_full_cylinders(s, budget)) {
        if (cyl.components.empty()) continue;
        const std::vector<HalfEdge>& core = cyl.components.front().band;
        int n = algebraic_intersection(s, cls.word, core);
        if (n != 0) {
            FullCylinderHit hit;
            hit.core = core;
            hit.intersection = n;
            hit.cylinder = std::move(cyl);
            return hit;
        }
    }
    return std::nullopt;
}

// ---- classification ----------------------------------------------------------------------

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::NR: return "NR";
        case Verdict::TF: return "TF";
        case Verdict::Cyl: return "Cyl";
        case Verdict::UT: return "UT";
        case Verdict::Inconclusive: return "Inconclusive";
    }
    return "?";
}

ClassifyBudget ClassifyBudget::scaled(int units) {
    ClassifyBudget b;
    auto sc = [&](int x) {
        long long v = static_cast<long long>(x) * units / 100;
        if (v < 1) v = 1;
        if (v > 1000000000LL) v = 1000000000LL;
        return static_cast<int>(v);
    };
    b.cover = sc(b.cover);
    b.steps = sc(b.steps);
    b.tighten_iters = sc(b.tighten_iters);
    b.sweep = sc(b.sweep);
    b.detect = sc(b.detect);
    return b;
}

namespace {

Classification classify_torus(const Surface& s, const HomotopyClass& cls,
                              const ClassifyBudget& budget) {
    Classification out;
    const AffineMap& h = cls.holonomy;
    if (h.is_identity()) {
        out.verdict = Verdict::NR;
        out.reason =
            "identity holonomy: a closed trail would develop onto a single "
            "point";
        if (auto hit = detect_full_cylinder_crossing(s, cls, budget.detect)) {
            out.cylinder = hit->cylinder;
            out.intersection = hit->intersection;
            out.reason += "; certified by a crossed full cylinder";
        }
        return out;
    }
    if (h.a == 1) {
        Vec2 x = centroid(s, cls.seed);
        LeafTrace lt = trace_leaf(s, SurfacePoint{cls.seed, x}, h.b,
                                  budget.steps);
        if (lt.status != LeafTrace::Status::Closed) {
            out.verdict = Verdict::Inconclusive;
            out.budget_note = "leaf trace budget ran out on the torus";
            return out;
        }
        AffineMap lh = loop_holonomy(s, lt.word);
        bool match = cyclic_words_equal(s, lt.word, cls.word) ||
                     cyclic_words_equal(s, lt.word, inverse_word(s, cls.word)) ||
                     lh == h || (lh.a == 1 && lh.b == -h.b);
        if (!match) {
            // The class translation is a proper multiple of the leaf period.
            out.verdict = Verdict::Inconclusive;
            out.budget_note =
                "closed leaf found but its period does not generate the class";
            if (!lh.b.is_zero()) {
                Rat ratio = lh.b.x != 0 ? h.b.x / lh.b.x : h.b.y / lh.b.y;
                if (parallel(lh.b, h.b) && denominator(ratio) == 1 &&
                    (numerator(ratio) > 1 || numerator(ratio) < -1))
                    throw Error(ErrorCode::ClassIsPower,
                                "the class translation is a proper multiple "
                                "of a leaf period");
            }
            return out;
        }
        out.verdict = Verdict::TF;
        out.leaf = lt;
        out.slope = Slope::of(h.b);
        out.reason =
            "translation holonomy: the torus is foliated by closed leaves of "
            "slope " +
            out.slope->str();
        return out;
    }
    // Dilation holonomy: only the leaves through rays from the fixed point
    // close up; nearby leaves spiral, so no foliation by closed leaves exists.
    Vec2 cen = h.fixed_point();
    Vec2 x = centroid(s, cls.seed);
    if (x == cen) {
        for (int c = 0; c < 3 && x == cen; ++c)
            x = (s.corner(cls.seed, c) + cen) * Rat(1, 2);
    }
    LeafTrace lt =
        trace_leaf(s, SurfacePoint{cls.seed, x}, x - cen, budget.steps);
    if (lt.status != LeafTrace::Status::Closed) {
        out.verdict = Verdict::Inconclusive;
        out.budget_note = "ray leaf trace budget ran out on the torus";
        return out;
    }
    bool match = cyclic_words_equal(s, lt.word, cls.word) ||
                 cyclic_words_equal(s, lt.word, inverse_word(s, cls.word));
    if (match) {
        out.verdict = Verdict::Cyl;
        out.reason =
            "dilation holonomy: the class is carried by the ray leaves "
            "through the fixed point, which sweep the whole torus";
        try {
            ClosedTrail ct = make_closed_trail(
                s, closed_leaf_trail(s, SurfacePoint{cls.seed, x}, x - cen,
                                     lt.word));
            out.trail = ct;
            out.cylinder = extend_cylinder(s, ct, budget.sweep);
        } catch (const Error&) {
            out.budget_note = "cylinder certificate omitted";
        }
        return out;
    }
    int n = algebraic_intersection(s, cls.word, lt.word);
    if (n != 0) {
        out.verdict = Verdict::NR;
        out.intersection = n;
        out.reason =
            "nonzero intersection with the closed ray leaves of the dilation "
            "holonomy rules out closed trails";
        try {
            ClosedTrail ct = make_closed_trail(
                s, closed_leaf_trail(s, SurfacePoint{cls.seed, x}, x - cen,
                                     lt.word));
            Cylinder cyl = extend_cylinder(s, ct, budget.sweep);
            if (cyl.full) out.cylinder = std::move(cyl);
        } catch (const Error&) {
        }
        return out;
    }
    out.verdict = Verdict::Inconclusive;
    out.budget_note =
        "class matches neither the ray family nor a crossing of it";
    return out;
}

}  // namespace

Classification classify(const Surface& s, const HomotopyClass& cls,
                        const ClassifyBudget& budget) {
    validate_class(s, cls);
    if (s.has_poles())
        throw Error(ErrorCode::SurfaceHasPoles,
                    "classification needs a surface without poles");
    bool torus = true;
    for (int v = 0; v < s.num_vertices(); ++v)
        if (s.cone(v).alpha != 0) torus = false;
    if (torus) return classify_torus(s, cls, budget);

    Classification out;
    std::vector<Cylinder> fulls = find_full_cylinders(s, budget.detect);
    std::string key = cyclic_word_key(cls.word);
    std::string ikey = cyclic_word_key(inverse_word(s, cls.word));
    for (Cylinder& cyl : fulls) {
        bool carried = false;
        auto match = [&](const std::vector<HalfEdge>& w) {
            std::string k = cyclic_word_key(w);
            if (k == key || k == ikey) carried = true;
        };
        for (const CylinderComponent& comp : cyl.components) match(comp.band);
        for (const ClosedTrail& j : cyl.junctions) match(j.word);
        for (const ClosedTrail& b : cyl.boundaries) match(b.word);
        if (carried) {
            out.verdict = Verdict::Cyl;
            out.reason = "the class is carried by a full cylinder";
            out.cylinder = std::move(cyl);
            return out;
        }
    }
    for (Cylinder& cyl : fulls) {
        if (cyl.components.empty()) continue;
        int n = algebraic_intersection(s, cls.word,
                                       cyl.components.front().band);
        if (n != 0) {
            out.verdict = Verdict::NR;
            out.intersection = n;
            out.cylinder = std::move(cyl);
            out.reason =
                "every loop of the class crosses a full cylinder, which a "
                "closed trail cannot do";
            return out;
        }
    }
    if (!s.is_leaf_triangulation()) {
        out.verdict = Verdict::Inconclusive;
        out.budget_note =
            "surface is not leaf-triangulated, so tightening is unavailable";
        return out;
    }

    SurfacePoint start{cls.seed, centroid(s, cls.seed)};
    TightenResult tr;
    try {
        tr = tighten(s, cls, start, budget.cover, budget.tighten_iters);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::BudgetExhausted) {
            out.verdict = Verdict::Inconclusive;
            out.budget_note = "cover budget ran out while tightening";
            return out;
        }
        if (e.code() == ErrorCode::ConnectFailed) {
            out.verdict = Verdict::Inconclusive;
            out.budget_note =
                "coverage completed without connecting the seam; the class "
                "may cross an undetected full cylinder";
            return out;
        }
        throw;
    }
    out.tighten_iterations = tr.iterations;
    if (tr.status == TightenResult::Status::NotClosedYet) {
        out.verdict = Verdict::Inconclusive;
        out.budget_note = "seam iteration budget ran out before closing";
        return out;
    }
    if (tr.status == TightenResult::Status::Diverged) {
        out.verdict = Verdict::Inconclusive;
        out.budget_note = "seam iteration revisited a point without closing";
        return out;
    }
    const ClosedTrail& t = *tr.trail;
    out.trail = t;
    if (!t.right_all_pi() && !t.left_all_pi()) {
        out.verdict = Verdict::UT;
        out.reason =
            "closed trail bends wider than a half-turn on each side; it is "
            "the only closed trail in its class";
        return out;
    }
    out.verdict = Verdict::Cyl;
    out.reason =
        "closed trail turns by exactly a half-turn along one side; its "
        "parallel leaves sweep a cylinder";
    try {
        out.cylinder = extend_cylinder(s, t, budget.sweep);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::BudgetExhausted) throw;
        out.budget_note = "sweep budget ran out; cylinder certificate omitted";
    }
    return out;
}

}  // namespace zebra
