#pragma once

#include <array>
#include <set>
#include <utility>
#include <vector>

#include "zebra/errors.hpp"
#include "zebra/rational.hpp"

namespace zebra {

// What kind of transition maps the atlas permits. A translation surface is a
// dilation surface whose derivatives all happen to be 1, so it needs no mode
// of its own.
enum class Mode { Dilation, HalfDilation };

// A half-edge is 3*t + e; edge e of triangle t runs corner e -> corner (e+1)%3.
using HalfEdge = int;
inline HalfEdge half_edge(int tri, int edge) { return 3 * tri + edge; }
inline int he_tri(HalfEdge h) { return h / 3; }
inline int he_idx(HalfEdge h) { return h % 3; }

struct SurfaceDescription {
    std::vector<std::array<Vec2, 3>> triangles;  // CCW corners in chart coords
    std::vector<std::pair<HalfEdge, HalfEdge>> gluings;
    Mode mode = Mode::Dilation;
    std::set<int> marked_removable;  // vertex ids expected to be cone angle 2pi
    // Optional named free homotopy classes, each as a cyclic dual loop of
    // half-edges crossed in order.
    std::vector<std::pair<std::string, std::vector<HalfEdge>>> named_classes;
};

// One vertex of the glued surface: its corner cycle and exact cone data.
// Total cone angle is k half-turns; alpha = k - 2 is the singularity order
// (alpha = -1: pole, alpha = 0: removable for the foliations, alpha >= 1:
// genuine singularity). `holonomy` is the derivative of the wedge-cycle
// composition around the vertex; it can differ from 1 at a removable point
// (cone angle 2pi with nontrivial dilational holonomy), in which case no
// single chart covers a punctured neighborhood even though every leaf passes
// straight through.
struct ConeData {
    int vertex = -1;
    int half_turns = 0;  // k >= 1
    int alpha = 0;       // k - 2
    bool is_pole = false;
    Rat holonomy{1};
    std::vector<std::pair<int, int>> corners;  // (tri, corner) in CCW fan order
};

struct EulerPoincareReport {
    long long chi = 0;
    long long alpha_sum = 0;
    bool holds = false;
};

class Surface {
  public:
    // Validates and builds the half-edge complex. Throws zebra::Error with
    // codes DegenerateTriangle, UnpairedEdge, SelfGluedEdge,
    // NonParallelGluing or NegativeDerivativeOnDilationSurface.
    static Surface build(SurfaceDescription desc);

    const SurfaceDescription& description() const { return desc_; }
    Mode mode() const { return desc_.mode; }
    int num_triangles() const { return static_cast<int>(desc_.triangles.size()); }
    int num_edges() const { return num_triangles() * 3 / 2; }
    int num_vertices() const { return static_cast<int>(cones_.size()); }

    const std::array<Vec2, 3>& triangle(int t) const { return desc_.triangles[t]; }
    const Vec2& corner(int tri, int c) const { return desc_.triangles[tri][c]; }
    Vec2 he_tail(HalfEdge h) const { return corner(he_tri(h), he_idx(h)); }
    Vec2 he_head(HalfEdge h) const { return corner(he_tri(h), (he_idx(h) + 1) % 3); }
    Vec2 he_vector(HalfEdge h) const { return he_head(h) - he_tail(h); }

    HalfEdge twin(HalfEdge h) const { return twin_[h]; }
    // Chart transition: maps coordinates of twin(h)'s triangle into h's
    // triangle chart. glue(h)(tail of twin) == head of h exactly.
    const AffineMap& glue(HalfEdge h) const { return glue_[h]; }

    int vertex_at(int tri, int c) const { return vertex_of_corner_[3 * tri + c]; }
    const ConeData& cone(int vertex) const { return cones_[vertex]; }
    const std::vector<ConeData>& cones() const { return cones_; }

    // CCW walk around the vertex at corner (tri, c): the next corner of the
    // same vertex, reached by crossing the edge that enters the corner.
    std::pair<int, int> corner_next_ccw(int tri, int c) const {
        HalfEdge t = twin_[half_edge(tri, (c + 2) % 3)];
        return {he_tri(t), he_idx(t)};
    }

    // True singularities of the foliation family: alpha != 0.
    bool vertex_singular(int v) const { return cones_[v].alpha != 0; }
    bool has_poles() const;
    // Leaf triangulation: every vertex class has cone angle >= 3 half-turns.
    bool is_leaf_triangulation() const;

    EulerPoincareReport euler_poincare() const;

    const std::vector<std::string>& warnings() const { return warnings_; }

  private:
    Surface() = default;
    SurfaceDescription desc_;
    std::vector<HalfEdge> twin_;
    std::vector<AffineMap> glue_;
    std::vector<int> vertex_of_corner_;
    std::vector<ConeData> cones_;
    std::vector<std::string> warnings_;
};

}  // namespace zebra
