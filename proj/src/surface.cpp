#include "zebra/surface.hpp"

#include <algorithm>

namespace zebra {

const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::DegenerateTriangle: return "DegenerateTriangle";
        case ErrorCode::UnpairedEdge: return "UnpairedEdge";
        case ErrorCode::NonParallelGluing: return "NonParallelGluing";
        case ErrorCode::SelfGluedEdge: return "SelfGluedEdge";
        case ErrorCode::NegativeDerivativeOnDilationSurface:
            return "NegativeDerivativeOnDilationSurface";
        case ErrorCode::ConditionDViolated: return "ConditionDViolated";
        case ErrorCode::ConditionEViolated: return "ConditionEViolated";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::RemovableVertex: return "RemovableVertex";
        case ErrorCode::NotLeafTriangulation: return "NotLeafTriangulation";
        case ErrorCode::BudgetExhausted: return "BudgetExhausted";
        case ErrorCode::NotCovered: return "NotCovered";
        case ErrorCode::NotAPolygon: return "NotAPolygon";
        case ErrorCode::ConnectFailed: return "ConnectFailed";
        case ErrorCode::SurfaceHasPoles: return "SurfaceHasPoles";
        case ErrorCode::ClassIsPower: return "ClassIsPower";
        case ErrorCode::ClassTrivial: return "ClassTrivial";
        case ErrorCode::NotAllPiSide: return "NotAllPiSide";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "UnknownError";
}

namespace {

// Scalar s with s*u == v, for parallel nonzero u, v.
Rat parallel_ratio(const Vec2& v, const Vec2& u) {
    if (u.x != 0) return v.x / u.x;
    return v.y / u.y;
}

}  // namespace

Surface Surface::build(SurfaceDescription desc) {
    Surface s;
    const int T = static_cast<int>(desc.triangles.size());
    if (T == 0) throw Error(ErrorCode::InvalidArgument, "surface has no triangles");

    for (int t = 0; t < T; ++t) {
        const auto& tr = desc.triangles[t];
        if (sgn(cross(tr[1] - tr[0], tr[2] - tr[0])) <= 0)
            throw Error(ErrorCode::DegenerateTriangle,
                        "triangle " + std::to_string(t) + " is not positively oriented");
    }

    s.twin_.assign(3 * T, -1);
    for (auto [h1, h2] : desc.gluings) {
        if (h1 < 0 || h2 < 0 || h1 >= 3 * T || h2 >= 3 * T)
            throw Error(ErrorCode::InvalidArgument, "gluing references a missing edge");
        if (h1 == h2)
            throw Error(ErrorCode::SelfGluedEdge,
                        "edge " + std::to_string(h1) + " glued to itself");
        if (s.twin_[h1] != -1 || s.twin_[h2] != -1)
            throw Error(ErrorCode::UnpairedEdge,
                        "edge glued more than once: " + std::to_string(h1) + " or " +
                            std::to_string(h2));
        s.twin_[h1] = h2;
        s.twin_[h2] = h1;
    }
    for (int h = 0; h < 3 * T; ++h)
        if (s.twin_[h] == -1)
            throw Error(ErrorCode::UnpairedEdge, "edge " + std::to_string(h) + " is unglued");

    // Chart transitions. The identified edges are traversed in opposite
    // boundary directions, so with u = vector of h and u' = vector of its
    // twin, the derivative satisfies a * u' = -u.
    s.glue_.assign(3 * T, AffineMap{});
    auto tail = [&](HalfEdge h) { return desc.triangles[he_tri(h)][he_idx(h)]; };
    auto head = [&](HalfEdge h) { return desc.triangles[he_tri(h)][(he_idx(h) + 1) % 3]; };
    for (int h = 0; h < 3 * T; ++h) {
        HalfEdge w = s.twin_[h];
        Vec2 u = head(h) - tail(h);
        Vec2 up = head(w) - tail(w);
        if (!parallel(u, up))
            throw Error(ErrorCode::NonParallelGluing,
                        "edges " + std::to_string(h) + " and " + std::to_string(w) +
                            " are glued but not parallel");
        Rat a = -parallel_ratio(u, up);
        if (desc.mode == Mode::Dilation && sgn(a) < 0)
            throw Error(ErrorCode::NegativeDerivativeOnDilationSurface,
                        "gluing of edges " + std::to_string(h) + ", " + std::to_string(w));
        AffineMap m{a, head(h) - a * tail(w)};
        if (m(head(w)) != tail(h))
            throw Error(ErrorCode::NonParallelGluing,
                        "gluing of edges " + std::to_string(h) + ", " + std::to_string(w) +
                            " does not match endpoints");
        s.glue_[h] = m;
    }

    // Vertex classes: CCW corner cycles. Each cycle produces exact cone
    // data by developing its wedge fan.
    s.vertex_of_corner_.assign(3 * T, -1);
    for (int t0 = 0; t0 < T; ++t0) {
        for (int c0 = 0; c0 < 3; ++c0) {
            if (s.vertex_of_corner_[3 * t0 + c0] != -1) continue;
            int vid = static_cast<int>(s.cones_.size());
            ConeData cone;
            cone.vertex = vid;

            AffineMap pl = identity_map();  // places current triangle in t0's chart
            Vec2 vdev = desc.triangles[t0][c0];
            int t = t0, c = c0;
            std::vector<Vec2> rays;
            rays.push_back(desc.triangles[t0][(c0 + 1) % 3] - desc.triangles[t0][c0]);
            do {
                s.vertex_of_corner_[3 * t + c] = vid;
                cone.corners.emplace_back(t, c);
                const auto& tr = desc.triangles[t];
                Vec2 u = pl.a * (tr[(c + 1) % 3] - tr[c]);
                Vec2 w = pl.a * (tr[(c + 2) % 3] - tr[c]);
                if (!same_ray(u, rays.back()))
                    throw Error(ErrorCode::NonParallelGluing,
                                "inconsistent wedge fan at a vertex of triangle " +
                                    std::to_string(t));
                rays.push_back(w);
                HalfEdge crossed = half_edge(t, (c + 2) % 3);
                pl = pl.compose(s.glue_[crossed]);
                auto [nt, nc] = s.corner_next_ccw(t, c);
                t = nt;
                c = nc;
            } while (!(t == t0 && c == c0));

            // Closing consistency: the final ray is back on the line of the
            // initial one, and the full wedge-cycle map fixes the vertex.
            if (!parallel(rays.back(), rays.front()))
                throw Error(ErrorCode::NonParallelGluing,
                            "vertex fan does not close onto its initial direction");
            if (pl(vdev) != vdev)
                throw Error(ErrorCode::NonParallelGluing,
                            "vertex wedge cycle does not fix the vertex");
            cone.holonomy = pl.a;

            // Exact half-turn count: each wedge turns by an angle in (0, pi);
            // count the steps whose sector sweeps past the line of rays[0].
            const Vec2& r0 = rays.front();
            Vec2 r0n{-r0.x, -r0.y};
            int k = 0;
            for (std::size_t i = 1; i < rays.size(); ++i) {
                const Vec2& a = rays[i - 1];
                const Vec2& b = rays[i];
                if (sgn(cross(a, b)) <= 0)
                    throw Error(ErrorCode::DegenerateTriangle,
                                "wedge angle not strictly inside (0, pi)");
                auto in_sector = [&](const Vec2& cvec) {
                    if (same_ray(cvec, b)) return true;       // landing on the far edge
                    if (parallel(cvec, a)) return false;      // belongs to previous step
                    return sgn(cross(a, cvec)) > 0 && sgn(cross(cvec, b)) > 0;
                };
                if (in_sector(r0) || in_sector(r0n)) ++k;
            }
            bool closes_positive = same_ray(rays.back(), rays.front());
            if ((k % 2 == 0) != closes_positive)
                throw Error(ErrorCode::NonParallelGluing,
                            "half-turn parity inconsistent with fan closure");
            cone.half_turns = k;
            cone.alpha = k - 2;
            cone.is_pole = (k == 1);
            s.cones_.push_back(std::move(cone));
        }
    }

    for (int v : desc.marked_removable) {
        if (v < 0 || v >= static_cast<int>(s.cones_.size()))
            s.warnings_.push_back("marked_removable refers to missing vertex " +
                                  std::to_string(v));
        else if (s.cones_[v].half_turns != 2)
            s.warnings_.push_back("vertex " + std::to_string(v) +
                                  " marked removable but cone angle is not 2pi");
    }

    s.desc_ = std::move(desc);
    return s;
}

bool Surface::has_poles() const {
    return std::any_of(cones_.begin(), cones_.end(),
                       [](const ConeData& c) { return c.is_pole; });
}

bool Surface::is_leaf_triangulation() const {
    return std::all_of(cones_.begin(), cones_.end(),
                       [](const ConeData& c) { return c.half_turns >= 3; });
}

EulerPoincareReport Surface::euler_poincare() const {
    EulerPoincareReport r;
    long long V = num_vertices(), E = num_edges(), F = num_triangles();
    r.chi = V - E + F;
    r.alpha_sum = 0;
    for (const auto& c : cones_) r.alpha_sum += c.alpha;
    r.holds = (r.alpha_sum == -2 * r.chi);
    return r;
}

}  // namespace zebra
