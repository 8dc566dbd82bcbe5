#include "zebra/connect.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "zebra/errors.hpp"
#include "zebra/invariants.hpp"

namespace zebra {

namespace {

[[noreturn]] void inconsistent(const std::string& what) {
    throw Error(ErrorCode::InvalidArgument, "coverage inconsistency: " + what);
}

// Parameter of the intersection of the line through `apex` and `x` with the
// line T1 + u * (T2 - T1). The caller guarantees the lines are not parallel.
Rat edge_param(const Vec2& t1, const Vec2& t2, const Vec2& apex, const Vec2& x) {
    Vec2 d = x - apex;
    Rat den = cross(t2 - t1, d);
    if (den == 0) inconsistent("pencil ray parallel to exit edge");
    return cross(apex - t1, d) / den;
}

}  // namespace

// ---- Cover -------------------------------------------------------------------

Cover::Cover(const Surface& s, int base_tri) : s_(&s) {
    if (base_tri < 0 || base_tri >= s.num_triangles())
        throw Error(ErrorCode::InvalidArgument, "base triangle out of range");
    tri_.push_back(base_tri);
    nb_.push_back({-1, -1, -1});
    parent_.push_back(-1);
    parent_edge_.push_back(-1);
}

int Cover::neighbor(int copy, int edge) {
    int& slot = nb_[copy][edge];
    if (slot >= 0) return slot;
    HalfEdge h = half_edge(tri_[copy], edge);
    HalfEdge tw = s_->twin(h);
    int fresh = static_cast<int>(tri_.size());
    tri_.push_back(he_tri(tw));
    nb_.push_back({-1, -1, -1});
    parent_.push_back(copy);
    parent_edge_.push_back(edge);
    nb_[fresh][he_idx(tw)] = copy;
    slot = fresh;
    return fresh;
}

std::vector<std::pair<int, int>> Cover::close_fan(int copy, int corner) {
    const ConeData& cone = s_->cone(s_->vertex_at(tri_[copy], corner));
    int n = static_cast<int>(cone.corners.size());
    std::vector<std::pair<int, int>> fan;
    int c = copy, k = corner;
    for (int i = 0; i < n; ++i) {
        fan.push_back({c, k});
        if (i + 1 == n) break;
        HalfEdge crossed = half_edge(tri_[c], (k + 2) % 3);
        int next = neighbor(c, (k + 2) % 3);
        k = he_idx(s_->twin(crossed));
        c = next;
    }
    // The walk around a lifted vertex closes up after one surface fan: glue
    // the last wedge's far edge back to the first wedge's near edge.
    int& fwd = nb_[c][(k + 2) % 3];
    int& bwd = nb_[copy][corner];
    if (fwd >= 0 || bwd >= 0) {
        if (fwd != copy || bwd != c) inconsistent("vertex fan fails to close");
    } else {
        fwd = copy;
        bwd = c;
    }
    return fan;
}

int Cover::follow_word(int copy, const std::vector<HalfEdge>& word) {
    int c = copy;
    for (HalfEdge h : word) {
        if (he_tri(h) != tri_[c])
            throw Error(ErrorCode::InvalidArgument,
                        "word half-edge " + std::to_string(h) +
                            " does not belong to triangle " +
                            std::to_string(tri_[c]));
        c = neighbor(c, he_idx(h));
    }
    return c;
}

AffineMap Cover::placement(int copy) const {
    AffineMap m = identity_map();
    while (parent_[copy] >= 0) {
        int p = parent_[copy];
        // chart(copy) -> chart(p): crossing into p through its local edge.
        m = s_->glue(half_edge(tri_[p], parent_edge_[copy])).compose(m);
        copy = p;
    }
    return m;
}

// ---- RayCoverage -------------------------------------------------------------

struct RayCoverage::Reach {
    int copy = -1;
    int corner = -1;
    Vec2 back;
    Vec2 prev_apex;
    int prev = -1;
    bool along_edge = false;
};

const TriCover& RayCoverage::tri_cover(int copy) const {
    static const TriCover kUncovered{};
    if (copy < 0 || copy >= static_cast<int>(tris_.size())) return kUncovered;
    return tris_[copy];
}

bool RayCoverage::covered(int copy) const {
    return tri_cover(copy).status != TriStatus::Uncovered;
}

const EdgeCover* RayCoverage::edge_cover(int copy, int edge) const {
    if (copy < 0 || copy >= static_cast<int>(edge_of_.size())) return nullptr;
    int id = edge_of_[copy][edge];
    return id < 0 ? nullptr : &edges_[id];
}

int RayCoverage::record_of_corner(int copy, int corner) const {
    if (copy < 0 || copy >= static_cast<int>(rec_of_corner_.size())) return -1;
    return rec_of_corner_[copy][corner];
}

void RayCoverage::fit_arrays() {
    size_t n = static_cast<size_t>(cover_->num_copies());
    if (tris_.size() < n) tris_.resize(n);
    if (edge_of_.size() < n) edge_of_.resize(n, {-1, -1, -1});
    if (rec_of_corner_.size() < n) rec_of_corner_.resize(n, {-1, -1, -1});
}

void RayCoverage::enqueue(int rec) {
    enq_.resize(records_.size(), 0);
    if (!enq_[rec]) {
        enq_[rec] = 1;
        queue_.push_back(rec);
    }
}

RayCoverage::RayCoverage(Cover& cover, const DevelopedPoint& base, int budget)
    : cover_(&cover), base_(base), budget_(budget) {
    const Surface& s = cover.surface();
    if (!s.is_leaf_triangulation())
        throw Error(ErrorCode::NotLeafTriangulation,
                    "some vertex has cone angle below 3 half-turns");
    if (budget_ < 2)
        throw Error(ErrorCode::InvalidArgument, "coverage budget must be >= 2");
    cover_base();
    while (qhead_ < queue_.size() && covered_count_ < budget_)
        process_vertex(queue_[qhead_++]);
    queue_empty_ = qhead_ == queue_.size();
}

int RayCoverage::reach(const Reach& r) {
    fit_arrays();
    int existing = rec_of_corner_[r.copy][r.corner];
    if (existing >= 0) return existing;
    int id = static_cast<int>(records_.size());
    VertexRecord rec;
    rec.copy = r.copy;
    rec.corner = r.corner;
    rec.vertex = cover_->surface().vertex_at(cover_->tri(r.copy), r.corner);
    rec.back = r.back;
    rec.prev_apex = r.prev_apex;
    rec.prev = r.prev;
    rec.along_edge = r.along_edge;
    records_.push_back(rec);
    auto fan = cover_->close_fan(r.copy, r.corner);
    fit_arrays();
    for (auto [c, k] : fan) {
        if (rec_of_corner_[c][k] >= 0) inconsistent("vertex reached twice");
        rec_of_corner_[c][k] = id;
    }
    return id;
}

AffineMap RayCoverage::chart_to_record(int copy, int corner, int rec) const {
    const VertexRecord& r = records_[rec];
    if (r.copy == copy && r.corner == corner) return identity_map();
    const Surface& s = cover_->surface();
    // Walk the fan from (copy, corner), accumulating chart(w_i) -> chart(copy)
    // until the record's own wedge appears; the inverse is what we need.
    int c = copy, k = corner;
    AffineMap acc = identity_map();
    int n = static_cast<int>(s.cone(r.vertex).corners.size());
    for (int i = 0; i + 1 < n; ++i) {
        HalfEdge crossed = half_edge(cover_->tri(c), (k + 2) % 3);
        int next = cover_->neighbor_if_present(c, (k + 2) % 3);
        if (next < 0) inconsistent("record wedge not linked in fan");
        acc = acc.compose(s.glue(crossed));
        k = he_idx(s.twin(crossed));
        c = next;
        if (c == r.copy && k == r.corner) return acc.inverse();
    }
    inconsistent("record wedge not in its vertex fan");
}

void RayCoverage::store_edge(EdgeCover ec, int copy, int local) {
    const Surface& s = cover_->surface();
    int nb = cover_->neighbor(copy, local);
    fit_arrays();
    HalfEdge tw = s.twin(half_edge(cover_->tri(copy), local));
    if (edge_of_[copy][local] >= 0 || edge_of_[nb][he_idx(tw)] >= 0)
        inconsistent("edge covered twice");
    if (!ec.leaf) {
        // The pencils must tile the whole half-edge; consecutive pieces share
        // a boundary ray through a common edge point, so exact equality holds.
        if (ec.pieces.empty()) inconsistent("transverse edge without pencils");
        if (ec.pieces.front().t0 != 0 || ec.pieces.back().t1 != 1)
            inconsistent("pencils do not tile the edge");
        for (size_t i = 0; i + 1 < ec.pieces.size(); ++i)
            if (ec.pieces[i].t1 != ec.pieces[i + 1].t0)
                inconsistent("pencil intervals do not chain");
        for (const PencilPiece& q : ec.pieces)
            if (q.t0 > q.t1) inconsistent("pencil interval reversed");
    }
    int id = static_cast<int>(edges_.size());
    edges_.push_back(std::move(ec));
    edge_of_[copy][local] = id;
    edge_of_[nb][he_idx(tw)] = id;
}

std::vector<PencilPiece> RayCoverage::pieces_in_chart(int copy, int edge) const {
    const Surface& s = cover_->surface();
    const EdgeCover* ec = edge_cover(copy, edge);
    if (ec == nullptr || ec->leaf) inconsistent("entry edge carries no pencils");
    if (ec->from_copy == copy) {
        if (ec->from_edge != edge) inconsistent("edge cover direction mismatch");
        return ec->pieces;
    }
    // Stored on the far side: pull the pieces through the gluing and reverse
    // the parameterization (the twin half-edge runs the other way).
    HalfEdge h = half_edge(cover_->tri(copy), edge);
    const AffineMap& g = s.glue(h);
    AffineMap ginv = g.inverse();
    std::vector<PencilPiece> out;
    for (auto it = ec->pieces.rbegin(); it != ec->pieces.rend(); ++it) {
        PencilPiece p;
        p.apex = g(it->apex);
        p.to_apex = it->to_apex.compose(ginv);
        p.apex_ref = it->apex_ref;
        p.t0 = Rat(1) - it->t1;
        p.t1 = Rat(1) - it->t0;
        out.push_back(std::move(p));
    }
    return out;
}

// Classify a triangle copy entered transversely through its local edge
// `entry_edge`, install the pencils crossing its exit edges, and reach the
// opposite corner. Idempotent on covered copies (the entry must agree).
TriStatus RayCoverage::classify(int copy, int entry_edge) {
    const Surface& s = cover_->surface();
    fit_arrays();
    if (tris_[copy].status != TriStatus::Uncovered) {
        const TriCover& tc = tris_[copy];
        if (tc.status == TriStatus::Base || tc.status == TriStatus::DoubleLeaf ||
            tc.entry != entry_edge)
            inconsistent("triangle entered through a second edge");
        return tc.status;
    }
    int t = cover_->tri(copy);
    std::vector<PencilPiece> pieces = pieces_in_chart(copy, entry_edge);
    int e1 = (entry_edge + 1) % 3;  // runs p0 -> u
    int e2 = (entry_edge + 2) % 3;  // runs u -> p1
    const Vec2& p1 = s.corner(t, entry_edge);        // entry t = 0 end
    const Vec2& p0 = s.corner(t, e1);                // entry t = 1 end
    const Vec2& u = s.corner(t, e2);                 // opposite corner
    Vec2 d1 = p1 - pieces.front().apex;  // limit ray direction at p1
    Vec2 d0 = p0 - pieces.back().apex;   // limit ray direction at p0
    if (d1.is_zero() || d0.is_zero()) inconsistent("pencil apex at entry corner");
    if (cross_sign(p0 - p1, d1) <= 0 || cross_sign(p0 - p1, d0) <= 0)
        inconsistent("pencil fails to cross the entry edge");
    int c1 = cross_sign(u - p1, d1);  // >0: limit ray at p1 exits through e2
    int c0 = cross_sign(u - p0, d0);  // <0: limit ray at p0 exits through e1

    // Project the sub-family with entry parameters [lo, hi] onto one exit
    // edge (the projection reverses the parameter direction). An extra
    // corner pencil may join at the head or the tail of the exit interval.
    auto project = [&](int exit, const Rat& lo, const Rat& hi,
                       std::optional<PencilPiece> extra, bool extra_first) {
        const Vec2& t1v = s.corner(t, exit);
        const Vec2& t2v = s.corner(t, (exit + 1) % 3);
        std::vector<PencilPiece> out;
        if (extra && extra_first) out.push_back(*extra);
        for (auto it = pieces.rbegin(); it != pieces.rend(); ++it) {
            Rat a = it->t0 < lo ? lo : it->t0;
            Rat b = it->t1 > hi ? hi : it->t1;
            if (a >= b) continue;  // clipped away (boundary rays are shared)
            Vec2 xa = p1 + (p0 - p1) * a;
            Vec2 xb = p1 + (p0 - p1) * b;
            PencilPiece q;
            q.apex = it->apex;
            q.to_apex = it->to_apex;
            q.apex_ref = it->apex_ref;
            q.t0 = edge_param(t1v, t2v, it->apex, xb);
            q.t1 = edge_param(t1v, t2v, it->apex, xa);
            out.push_back(std::move(q));
        }
        if (extra && !extra_first) out.push_back(*extra);
        EdgeCover ec;
        ec.from_copy = copy;
        ec.from_edge = exit;
        ec.pieces = std::move(out);
        store_edge(std::move(ec), copy, exit);
    };

    // Writes through this reference all happen before anything below can
    // grow tris_ (reach and store_edge may create copies and resize it).
    TriCover& tc = tris_[copy];
    tc.entry = entry_edge;
    TriStatus result;
    if (c1 > 0 && c0 < 0) {
        result = tc.status = TriStatus::FullyTransverse;
        // Split the family along the ray through the opposite corner u.
        const PencilPiece* hit = nullptr;
        Rat tstar;
        for (const PencilPiece& q : pieces) {
            Rat k1 = cross(u - q.apex, p1 - q.apex);
            Rat k0 = cross(u - q.apex, p0 - q.apex);
            if (k1 == k0) continue;
            Rat ts = k1 / (k1 - k0);
            if (ts >= q.t0 && ts <= q.t1) {
                hit = &q;
                tstar = ts;
                break;
            }
        }
        if (hit == nullptr) inconsistent("no pencil ray hits the far corner");
        project(e2, Rat(0), tstar, std::nullopt, false);
        project(e1, tstar, Rat(1), std::nullopt, false);
        Reach r;
        r.copy = copy;
        r.corner = e2;
        r.back = hit->apex - u;
        r.prev_apex = hit->apex;
        r.prev = hit->apex_ref;
        r.along_edge = false;
        reach(r);
    } else if (c1 <= 0) {
        result = tc.status = TriStatus::CwLeaf;
        // Every through ray exits e1; edge e2 becomes a leaf flowing p1 -> u,
        // which runs against this chart's half-edge, so record the twin side.
        std::optional<PencilPiece> extra;
        if (c1 < 0) {
            // Rays bending around the vertex at p1 sweep the top of e1.
            int ref = record_of_corner(copy, entry_edge);
            if (ref < 0) inconsistent("entry corner not reached");
            tc.pencil_corner = entry_edge;
            PencilPiece q;
            q.apex = p1;
            q.apex_ref = ref;
            q.to_apex = chart_to_record(copy, entry_edge, ref);
            q.t0 = edge_param(s.corner(t, e1), s.corner(t, e2), p1, p1 + d1);
            q.t1 = Rat(1);
            extra = std::move(q);
        }
        project(e1, Rat(0), Rat(1), std::move(extra), false);
        EdgeCover leaf;
        leaf.leaf = true;
        leaf.leaf_copy = cover_->neighbor(copy, e2);
        leaf.leaf_edge = he_idx(s.twin(half_edge(t, e2)));
        store_edge(std::move(leaf), copy, e2);
        int prev = record_of_corner(copy, entry_edge);
        if (prev < 0) inconsistent("leaf source corner not reached");
        Reach r;
        r.copy = copy;
        r.corner = e2;
        r.back = p1 - u;
        r.prev_apex = p1;
        r.prev = prev;
        r.along_edge = true;
        reach(r);
    } else {
        result = tc.status = TriStatus::CcwLeaf;
        // Every through ray exits e2; edge e1 becomes a leaf flowing p0 -> u
        // along this chart's own half-edge orientation.
        std::optional<PencilPiece> extra;
        if (c0 > 0) {
            // Rays bending around the vertex at p0 sweep the start of e2.
            int ref = record_of_corner(copy, e1);
            if (ref < 0) inconsistent("entry corner not reached");
            tc.pencil_corner = e1;
            PencilPiece q;
            q.apex = p0;
            q.apex_ref = ref;
            q.to_apex = chart_to_record(copy, e1, ref);
            q.t0 = Rat(0);
            q.t1 = edge_param(s.corner(t, e2), s.corner(t, entry_edge), p0,
                              p0 + d0);
            extra = std::move(q);
        }
        project(e2, Rat(0), Rat(1), std::move(extra), true);
        EdgeCover leaf;
        leaf.leaf = true;
        leaf.leaf_copy = copy;
        leaf.leaf_edge = e1;
        store_edge(std::move(leaf), copy, e1);
        int prev = record_of_corner(copy, e1);
        if (prev < 0) inconsistent("leaf source corner not reached");
        HalfEdge tw = s.twin(half_edge(t, e1));
        Reach r;
        r.copy = cover_->neighbor(copy, e1);
        r.corner = he_idx(tw);
        r.back = s.he_vector(tw);
        r.prev_apex = s.glue(tw)(p0);
        r.prev = prev;
        r.along_edge = true;
        reach(r);
    }
    return result;
}

void RayCoverage::cover_base() {
    const Surface& s = cover_->surface();
    fit_arrays();
    int t0 = cover_->tri(base_.copy);
    LocatedPoint lp = locate(s, SurfacePoint{t0, base_.p});

    auto base_pencil = [&](int copy, int local, const Vec2& apex) {
        EdgeCover ec;
        ec.from_copy = copy;
        ec.from_edge = local;
        PencilPiece q;
        q.apex = apex;
        q.to_apex = identity_map();
        q.apex_ref = -1;
        q.t0 = Rat(0);
        q.t1 = Rat(1);
        ec.pieces.push_back(std::move(q));
        store_edge(std::move(ec), copy, local);
    };

    if (lp.locus == PointLocus::AtVertex) {
        // Rays leave the base vertex in every direction; processing the root
        // record covers its whole fan with double-leaf wedges.
        Reach r;
        r.copy = base_.copy;
        r.corner = lp.corner;
        r.back = Vec2{};
        r.prev_apex = Vec2{};
        r.prev = -1;
        r.along_edge = false;
        enqueue(reach(r));
        return;
    }

    if (lp.locus == PointLocus::Interior) {
        tris_[base_.copy].status = TriStatus::Base;
        ++covered_count_;
        base_chart_[base_.copy] = base_.p;
        for (int e = 0; e < 3; ++e) base_pencil(base_.copy, e, base_.p);
        for (int k = 0; k < 3; ++k) {
            Reach r;
            r.copy = base_.copy;
            r.corner = k;
            r.back = base_.p - s.corner(t0, k);
            r.prev_apex = base_.p;
            r.prev = -1;
            r.along_edge = false;
            enqueue(reach(r));
        }
        return;
    }

    // Base point in the interior of an edge: both sides are base triangles.
    int e0 = lp.edge;
    HalfEdge h0 = half_edge(t0, e0);
    HalfEdge tw0 = s.twin(h0);
    int c1 = cover_->neighbor(base_.copy, e0);
    fit_arrays();
    int t1 = cover_->tri(c1);
    Vec2 base1 = s.glue(tw0)(base_.p);
    tris_[base_.copy].status = TriStatus::Base;
    tris_[c1].status = TriStatus::Base;
    covered_count_ += 2;
    base_chart_[base_.copy] = base_.p;
    base_chart_[c1] = base1;
    for (int e = 0; e < 3; ++e) {
        if (e != e0) base_pencil(base_.copy, e, base_.p);
    }
    for (int e = 0; e < 3; ++e) {
        if (e != he_idx(tw0)) base_pencil(c1, e, base1);
    }
    {   // The carrying edge holds two half-leaves flowing away from the base.
        EdgeCover ec;
        ec.leaf = true;
        ec.from_base_point = true;
        ec.leaf_copy = base_.copy;
        ec.leaf_edge = e0;
        store_edge(std::move(ec), base_.copy, e0);
    }
    {   // Tail endpoint of the carrying half-edge, arrival along the edge.
        Reach r;
        r.copy = base_.copy;
        r.corner = e0;
        r.back = s.he_vector(h0);
        r.prev_apex = base_.p;
        r.prev = -1;
        r.along_edge = true;
        enqueue(reach(r));
    }
    {   // Head endpoint, seen from the far side.
        Reach r;
        r.copy = c1;
        r.corner = he_idx(tw0);
        r.back = s.he_vector(tw0);
        r.prev_apex = base1;
        r.prev = -1;
        r.along_edge = true;
        enqueue(reach(r));
    }
    {   // Opposite corners of the two base triangles.
        Reach r;
        r.copy = base_.copy;
        r.corner = (e0 + 2) % 3;
        r.back = base_.p - s.corner(t0, (e0 + 2) % 3);
        r.prev_apex = base_.p;
        r.prev = -1;
        r.along_edge = false;
        enqueue(reach(r));
    }
    {
        Reach r;
        r.copy = c1;
        r.corner = (he_idx(tw0) + 2) % 3;
        r.back = base1 - s.corner(t1, (he_idx(tw0) + 2) % 3);
        r.prev_apex = base1;
        r.prev = -1;
        r.along_edge = false;
        enqueue(reach(r));
    }
}

void RayCoverage::process_vertex(int rec_id) {
    const Surface& s = cover_->surface();
    VertexRecord rec = records_[rec_id];
    auto fan = cover_->close_fan(rec.copy, rec.corner);
    fit_arrays();
    int n = static_cast<int>(fan.size());
    const ConeData& cone = s.cone(rec.vertex);
    bool base_vertex = rec.prev == -1 && rec.back.is_zero();

    // Developed directions of the near edges E_i of the fan wedges, all in
    // the chart of the arrival wedge (directions transform by the scale
    // part of the chart-change maps).
    std::vector<Vec2> ray(n);
    std::vector<AffineMap> place(n);  // chart(fan[i]) -> chart(fan[0])
    {
        AffineMap m = identity_map();
        for (int i = 0; i < n; ++i) {
            place[i] = m;
            auto [c, k] = fan[i];
            ray[i] = s.he_vector(half_edge(cover_->tri(c), k)) * m.a;
            if (i + 1 < n)
                m = m.compose(s.glue(half_edge(cover_->tri(c), (k + 2) % 3)));
        }
    }

    // Sort every edge at the vertex by the counterclockwise angle it makes
    // with the backward arrival ray: below pi the rays cross it leaving
    // counterclockwise, beyond cone - pi clockwise, and in the closed band
    // between, the edge lies inside the cone of legal continuations and its
    // leaf flows away from the vertex.
    std::vector<FlagKind> flags(n, FlagKind::LeafAway);
    if (!base_vertex) {
        if (rec.along_edge) {
            if (!same_ray(rec.back, ray[0]))
                inconsistent("edge arrival not along the near edge");
            flags[0] = FlagKind::LeafToward;
        } else {
            if (cross_sign(ray[0], rec.back) <= 0 ||
                cross_sign(rec.back, ray[1 % n]) <= 0)
                inconsistent("arrival direction outside its wedge");
            flags[0] = FlagKind::TransverseCw;
        }
        std::vector<Vec2> chain{rec.back};
        for (int i = 1; i < n; ++i) {
            chain.push_back(ray[i]);
            if (angle_cmp_pi(chain) == AngleCmp::Less)
                flags[i] = FlagKind::TransverseCcw;
            else if (angle_cmp_k_pi(chain, cone.half_turns - 1) ==
                     AngleCmp::Greater)
                flags[i] = FlagKind::TransverseCw;
            else
                flags[i] = FlagKind::LeafAway;
        }
    }

    auto wedge_status = [&](int i) { return tris_[fan[i].first].status; };
    auto classify_wedge = [&](int i, bool far_entry) {
        auto [c, k] = fan[i];
        bool fresh = wedge_status(i) == TriStatus::Uncovered;
        TriStatus st = classify(c, far_entry ? (k + 2) % 3 : k);
        if (fresh && wedge_status(i) != TriStatus::Uncovered) ++covered_count_;
        return st;
    };
    // Double-leaf wedge: both vertex edges are leaves flowing away from this
    // vertex; the opposite edge carries one pencil with its apex here.
    auto cover_double_leaf = [&](int i) {
        auto [c, k] = fan[i];
        int t = cover_->tri(c);
        if (tris_[c].status != TriStatus::Uncovered)
            inconsistent("double-leaf wedge already covered");
        tris_[c].status = TriStatus::DoubleLeaf;
        tris_[c].apex_corner = k;
        ++covered_count_;
        if (edge_of_[c][k] < 0) {  // near edge: flow follows the half-edge
            EdgeCover ec;
            ec.leaf = true;
            ec.leaf_copy = c;
            ec.leaf_edge = k;
            store_edge(std::move(ec), c, k);
            fit_arrays();
        }
        if (edge_of_[c][(k + 2) % 3] < 0) {  // far edge: flow runs against
            EdgeCover ec;                    // the half-edge; store the twin
            ec.leaf = true;
            ec.leaf_copy = cover_->neighbor(c, (k + 2) % 3);
            ec.leaf_edge = he_idx(s.twin(half_edge(t, (k + 2) % 3)));
            store_edge(std::move(ec), c, (k + 2) % 3);
            fit_arrays();
        }
        {
            EdgeCover ec;
            ec.from_copy = c;
            ec.from_edge = (k + 1) % 3;
            PencilPiece q;
            q.apex = s.corner(t, k);
            q.to_apex = place[i];  // chart(c) -> chart of this record
            q.apex_ref = rec_id;
            q.t0 = Rat(0);
            q.t1 = Rat(1);
            ec.pieces.push_back(std::move(q));
            store_edge(std::move(ec), c, (k + 1) % 3);
            fit_arrays();
        }
        {   // Far endpoint of the near edge, reached along the previous
            // wedge's far edge.
            auto [cp, kp] = fan[(i + n - 1) % n];
            int tp = cover_->tri(cp);
            Reach ra;
            ra.copy = cp;
            ra.corner = (kp + 2) % 3;
            ra.back = s.he_vector(half_edge(tp, (kp + 2) % 3));
            ra.prev_apex = s.corner(tp, kp);
            ra.prev = rec_id;
            ra.along_edge = true;
            reach(ra);
        }
        {   // Far endpoint of the far edge, reached along it in this wedge.
            Reach rb;
            rb.copy = c;
            rb.corner = (k + 2) % 3;
            rb.back = s.he_vector(half_edge(t, (k + 2) % 3));
            rb.prev_apex = s.corner(t, k);
            rb.prev = rec_id;
            rb.along_edge = true;
            reach(rb);
        }
    };

    if (base_vertex) {
        for (int i = 0; i < n; ++i) cover_double_leaf(i);
    } else {
        if (wedge_status(0) == TriStatus::Uncovered)
            inconsistent("arrival wedge not covered");
        if (rec.along_edge && wedge_status(n - 1) == TriStatus::Uncovered)
            inconsistent("far side of the arrival leaf not covered");
        // Counterclockwise chain: wedges entered transversely through their
        // near edge; its end must match what the fan angles predict.
        for (int i = 1; i < n && flags[i] == FlagKind::TransverseCcw; ++i) {
            TriStatus st = classify_wedge(i, false);
            bool more = flags[(i + 1) % n] == FlagKind::TransverseCcw;
            if (more && st == TriStatus::CwLeaf)
                inconsistent("ccw chain stopped before its flags did");
            if (!more && st != TriStatus::CwLeaf)
                inconsistent("ccw chain ran past its leaf");
        }
        // Clockwise chain: wedges entered through their far edge. After an
        // arrival along a leaf, the wedge clockwise of the arrival edge is
        // already covered and the chain starts one wedge further down.
        int jstart = flags[0] == FlagKind::TransverseCw ? n - 1 : n - 2;
        for (int j = jstart;
             j >= 1 && flags[(j + 1) % n] == FlagKind::TransverseCw; --j) {
            TriStatus st = classify_wedge(j, true);
            bool more = flags[j] == FlagKind::TransverseCw;
            if (more && st == TriStatus::CcwLeaf)
                inconsistent("cw chain stopped before its flags did");
            if (!more && st != TriStatus::CcwLeaf)
                inconsistent("cw chain ran past its leaf");
        }
        // Wedges flanked by two leaf-away edges.
        for (int i = 1; i < n - 1; ++i)
            if (flags[i] == FlagKind::LeafAway &&
                flags[i + 1] == FlagKind::LeafAway)
                cover_double_leaf(i);
    }

    // Enqueue the far endpoints: counterclockwise transversals in ccw order,
    // then clockwise ones in cw order, then leaf targets in ccw order. This
    // order makes every dequeued record's arrival wedge already covered.
    auto push = [&](int i) {
        auto [c, k] = fan[i];
        int far_rec = rec_of_corner_[c][(k + 1) % 3];
        if (far_rec < 0) inconsistent("flag endpoint unreached");
        enqueue(far_rec);
    };
    for (int i = 1; i < n; ++i)
        if (flags[i] == FlagKind::TransverseCcw) push(i);
    if (flags[0] == FlagKind::TransverseCw) push(0);
    for (int i = n - 1; i >= 1; --i)
        if (flags[i] == FlagKind::TransverseCw) push(i);
    for (int i = 0; i < n; ++i)
        if (flags[i] == FlagKind::LeafAway) push(i);

    trace_.push_back({rec_id, std::move(flags)});
}

std::vector<PencilPiece> RayCoverage::pencils_into(int copy, int edge) const {
    const EdgeCover* ec = edge_cover(copy, edge);
    if (ec == nullptr || ec->leaf) return {};
    return pieces_in_chart(copy, edge);
}

Trail RayCoverage::trail_to(const DevelopedPoint& q) const {
    const Surface& s = cover_->surface();
    if (!covered(q.copy))
        throw Error(ErrorCode::NotCovered,
                    "target triangle not covered within budget " +
                        std::to_string(budget_));
    int t = cover_->tri(q.copy);
    LocatedPoint lp = locate(s, SurfacePoint{t, q.p});

    // Straight legs of the trail, collected backwards from q. Each leg runs
    // from a developed apex to a point, both in the chart of `copy`.
    struct Leg {
        int copy;
        Vec2 from;
        Vec2 to;
    };
    std::vector<Leg> legs;
    int rec_chain = -1;

    if (lp.locus == PointLocus::AtVertex) {
        rec_chain = record_of_corner(q.copy, lp.corner);
        if (rec_chain < 0) inconsistent("covered triangle with unreached corner");
    } else {
        const TriCover& tc = tris_[q.copy];
        Vec2 apex;
        int ref = -2;
        if (tc.status == TriStatus::Base) {
            auto it = base_chart_.find(q.copy);
            if (it == base_chart_.end()) inconsistent("base chart missing");
            apex = it->second;
            ref = -1;
            if (apex == q.p) {
                Trail tr;
                tr.points.push_back({t, q.p});
                return tr;
            }
        } else if (tc.status == TriStatus::DoubleLeaf) {
            apex = s.corner(t, tc.apex_corner);
            ref = record_of_corner(q.copy, tc.apex_corner);
            if (ref < 0) inconsistent("double-leaf apex unreached");
        } else {
            // Transversal statuses: find a pencil owning q among the entry
            // pieces, falling back to the triangle's corner pencil.
            const Vec2& p1 = s.corner(t, tc.entry);
            const Vec2& p0 = s.corner(t, (tc.entry + 1) % 3);
            for (const PencilPiece& pc : pieces_in_chart(q.copy, tc.entry)) {
                Vec2 d = q.p - pc.apex;
                if (d.is_zero()) continue;
                Rat den = cross(p0 - p1, d);
                if (den == 0) continue;
                Rat tt = cross(pc.apex - p1, d) / den;
                if (tt < pc.t0 || tt > pc.t1) continue;
                Vec2 x = p1 + (p0 - p1) * tt;  // the ray's entry crossing
                Rat sx = dot(x - pc.apex, d) / dot(d, d);
                if (sx < 0 || sx > 1) continue;  // crossing not behind q
                apex = pc.apex;
                ref = pc.apex_ref;
                break;
            }
            if (ref == -2 && tc.pencil_corner >= 0) {
                apex = s.corner(t, tc.pencil_corner);
                ref = record_of_corner(q.copy, tc.pencil_corner);
                if (ref < 0) inconsistent("corner pencil unreached");
            }
            if (ref == -2) inconsistent("no pencil owns the query point");
        }
        legs.push_back({q.copy, apex, q.p});
        rec_chain = ref;
    }
    while (rec_chain >= 0) {
        const VertexRecord& r = records_[rec_chain];
        if (r.prev == -1 && r.back.is_zero()) break;  // root: the base vertex
        Vec2 vpos = s.corner(cover_->tri(r.copy), r.corner);
        legs.push_back({r.copy, r.prev_apex, vpos});
        rec_chain = r.prev;
    }
    std::reverse(legs.begin(), legs.end());

    if (legs.empty()) {  // the query point is the base vertex itself
        Trail tr;
        tr.points.push_back({t, q.p});
        return tr;
    }

    // Trace each leg backwards, from its endpoint towards its apex (the
    // endpoint lies in the leg's chart triangle, the apex usually outside),
    // splitting wherever a singular vertex is passed straight through; then
    // flip the pieces to run forward.
    Trail out;
    for (const Leg& leg : legs) {
        struct Piece {
            SurfacePoint start;
            std::vector<HalfEdge> word;
        };
        std::vector<Piece> backward;
        SurfacePoint cur{cover_->tri(leg.copy), leg.to};
        Vec2 goal = leg.from;
        for (int guard = 0;; ++guard) {
            if (guard >= 100000)
                throw Error(ErrorCode::BudgetExhausted,
                            "trail leg split too many times");
            SegmentTrace tr = trace_segment(s, cur, goal, 1 << 20);
            std::vector<HalfEdge> fwd;
            for (auto it = tr.word.rbegin(); it != tr.word.rend(); ++it)
                fwd.push_back(s.twin(*it));
            backward.push_back({tr.end, std::move(fwd)});
            if (tr.reached) break;
            if (tr.end_place(tr.end.p) == goal) break;  // stopped at the apex
            goal = tr.end_place.inverse()(goal);
            cur = tr.end;
        }
        for (auto it = backward.rbegin(); it != backward.rend(); ++it) {
            out.points.push_back(it->start);
            out.segments.push_back(std::move(it->word));
        }
    }
    out.points.push_back({cover_->tri(legs.back().copy), legs.back().to});
    return out;
}

Trail trail_between(Cover& cover, const DevelopedPoint& p,
                    const DevelopedPoint& q, int budget) {
    const Surface& s = cover.surface();
    bool flat = true;
    for (int v = 0; v < s.num_vertices(); ++v)
        if (s.cone(v).alpha != 0) flat = false;
    if (!flat) {
        RayCoverage cov(cover, p, budget);
        return cov.trail_to(q);
    }
    // No singular vertices: a trail must be one straight segment, so the only
    // candidate is the straight development between the two lifts.
    if (p.copy == q.copy && p.p == q.p) {
        Trail tr;
        tr.points.push_back({cover.tri(p.copy), p.p});
        return tr;
    }
    Vec2 goal = cover.placement(p.copy).inverse()(cover.placement(q.copy)(q.p));
    SegmentTrace tr = trace_segment(s, {cover.tri(p.copy), p.p}, goal, budget);
    if (!tr.reached)
        throw Error(ErrorCode::ConnectFailed,
                    "straight segment obstructed by a marked vertex");
    if (cover.follow_word(p.copy, tr.word) != q.copy)
        throw Error(ErrorCode::ConnectFailed,
                    "no straight trail between these lifts");
    Trail out;
    out.points.push_back({cover.tri(p.copy), p.p});
    out.segments.push_back(tr.word);
    out.points.push_back(tr.end);
    return out;
}

// ---- Polygon convexity ---------------------------------------------------

ConvexityReport polygon_convexity_check(const Surface& s, const Trail& polygon) {
    if (!polygon.closed || polygon.segments.empty() ||
        polygon.points.size() != polygon.segments.size() + 1)
        throw Error(ErrorCode::InvalidArgument,
                    "polygon must be a closed trail");
    size_t k = polygon.segments.size();

    // Develop the boundary into the chart of the first point, and record
    // each arc's outgoing direction and far endpoint in its own start chart.
    std::vector<Vec2> dev(k + 1);
    std::vector<Vec2> out_dir(k);
    std::vector<Vec2> arc_end_local(k);
    {
        AffineMap m = identity_map();
        for (size_t i = 0; i < k; ++i) {
            dev[i] = m(polygon.points[i].p);
            auto steps =
                develop_word(s, polygon.points[i].tri, polygon.segments[i]);
            arc_end_local[i] = steps.back().place(polygon.points[i + 1].p);
            out_dir[i] = arc_end_local[i] - polygon.points[i].p;
            if (out_dir[i].is_zero())
                throw Error(ErrorCode::NotAPolygon, "degenerate boundary arc");
            m = m.compose(steps.back().place);
        }
        dev[k] = m(polygon.points[k].p);
    }

    // When the development closes up, the whole boundary lives in one plane
    // chart; reject self-intersections there.
    if (dev[k] == dev[0]) {
        auto on_seg = [](const Vec2& a, const Vec2& b, const Vec2& p) {
            return cross_sign(b - a, p - a) == 0 && dot(p - a, b - p) >= 0;
        };
        for (size_t i = 0; i + 1 < k; ++i) {
            for (size_t j = i + 1; j < k; ++j) {
                const Vec2 &a = dev[i], &b = dev[i + 1];
                const Vec2 &c = dev[j], &d = dev[j + 1];
                bool adjacent = (j == i + 1) || (i == 0 && j == k - 1);
                if (adjacent) {
                    Vec2 uu = b - a, vv = d - c;
                    if (cross_sign(uu, vv) == 0 && dot(uu, vv) < 0)
                        throw Error(ErrorCode::NotAPolygon,
                                    "boundary doubles back on itself");
                    continue;
                }
                int s1 = cross_sign(b - a, c - a);
                int s2 = cross_sign(b - a, d - a);
                int s3 = cross_sign(d - c, a - c);
                int s4 = cross_sign(d - c, b - c);
                bool hit = (s1 * s2 < 0 && s3 * s4 < 0) ||
                           (s1 == 0 && on_seg(a, b, c)) ||
                           (s2 == 0 && on_seg(a, b, d)) ||
                           (s3 == 0 && on_seg(c, d, a)) ||
                           (s4 == 0 && on_seg(c, d, b));
                if (hit)
                    throw Error(ErrorCode::NotAPolygon,
                                "boundary self-intersects in the development");
            }
        }
    }

    // The region sits on the left of the boundary, so it is convex exactly
    // when every corner turns through an exterior angle of at least pi
    // (measured counterclockwise from the reversed incoming direction to
    // the outgoing one).
    ConvexityReport rep;
    for (size_t i = 0; i < k; ++i) {
        size_t prev = (i + k - 1) % k;
        // Re-trace the incoming arc for its arrival chart and direction.
        SegmentTrace tr = trace_segment(s, polygon.points[prev],
                                        arc_end_local[prev], 1 << 20);
        if (!tr.reached)
            throw Error(ErrorCode::InvalidArgument,
                        "boundary arc obstructed by a singular vertex");
        const SurfacePoint& here = polygon.points[i];
        LocatedPoint le = locate(s, tr.end);
        LocatedPoint lh = locate(s, here);
        if (le.at.tri != lh.at.tri || !(le.at.p == lh.at.p))
            throw Error(ErrorCode::InvalidArgument,
                        "boundary arcs do not chain at corner " +
                            std::to_string(i));
        Vec2 d_in = tr.end_dir;
        const Vec2& d_out = out_dir[i];

        AngleCmp ext;
        bool at_vertex = lh.locus == PointLocus::AtVertex;
        bool at_pole = false;
        if (at_vertex) {
            at_pole = s.cone(lh.vertex).is_pole;
            CornerCheck cc = check_corner(s, tr.end.tri, le.corner, d_in,
                                          here.tri, lh.corner, d_out);
            ext = cc.pole_bounce ? AngleCmp::Equal : cc.ccw_side;
        } else {
            // Regular point: bring the arrival direction into here's chart.
            Vec2 din = d_in;
            if (tr.end.tri != here.tri) {
                if (le.locus != PointLocus::OnEdge)
                    throw Error(ErrorCode::InvalidArgument,
                                "polygon corner charts disagree");
                HalfEdge tw = s.twin(half_edge(tr.end.tri, le.edge));
                if (he_tri(tw) != here.tri)
                    throw Error(ErrorCode::InvalidArgument,
                                "polygon corner charts disagree");
                din = d_in * s.glue(tw).a;
            }
            if (same_ray(d_out, din))
                ext = AngleCmp::Equal;  // straight continuation
            else if (same_ray(d_out, Vec2{} - din))
                ext = AngleCmp::Less;  // full back-track: zero exterior angle
            else
                ext = cross_sign(Vec2{} - din, d_out) < 0 ? AngleCmp::Greater
                                                          : AngleCmp::Less;
        }
        if (ext != AngleCmp::Less || !rep.convex) continue;

        rep.convex = false;
        rep.witness_corner = static_cast<int>(i);
        if (at_pole) continue;  // a pi cone has no room for a chord
        if (at_vertex) {
            // Walk the fan counterclockwise from the outgoing ray until the
            // swept angle passes pi; the antipode of d_out lies in that
            // wedge, and the chord leaves along it.
            auto fanw = vertex_fan(s, here.tri, lh.corner);
            const Vec2& apexpos = here.p;
            std::vector<Vec2> chain{d_out};
            bool found = false;
            for (const WedgePlacement& w : fanw) {
                Vec2 far =
                    w.place(s.corner(w.tri, (w.corner + 2) % 3)) - apexpos;
                if (cross_sign(chain.back(), far) <= 0 &&
                    chain.size() == 1)
                    continue;  // wedge still clockwise of d_out
                chain.push_back(far);
                if (angle_cmp_pi(chain) != AngleCmp::Less) {
                    rep.chord_start =
                        SurfacePoint{w.tri, s.corner(w.tri, w.corner)};
                    rep.chord_dir = (Vec2{} - d_out) * (Rat(1) / w.place.a);
                    found = true;
                    break;
                }
            }
            if (!found) inconsistent("chord antipode not found in the fan");
        } else {
            rep.chord_start = here;
            rep.chord_dir = Vec2{} - d_out;
        }
    }
    return rep;
}

}  // namespace zebra
