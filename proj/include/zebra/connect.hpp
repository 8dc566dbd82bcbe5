#pragma once

#include <array>
#include <map>
#include <optional>
#include <vector>

#include "zebra/kinematics.hpp"
#include "zebra/surface.hpp"

namespace zebra {

// ---- Lazily developed universal cover ---------------------------------------
//
// Copies of surface triangles, glued combinatorially. Geometry stays local:
// every copy uses the chart of its surface triangle, and crossing an edge
// transforms coordinates by the surface gluing. No global placements are
// stored (around a lifted cone point the developed charts overlap, so a
// placement does not identify a copy). Walking all the way around a lifted
// vertex returns to the starting copy; `close_fan` enforces that.

class Cover {
  public:
    explicit Cover(const Surface& s, int base_tri = 0);

    const Surface& surface() const { return *s_; }
    int num_copies() const { return static_cast<int>(tri_.size()); }
    int tri(int copy) const { return tri_[copy]; }
    // Neighbor copy across the local edge, created on demand.
    int neighbor(int copy, int edge);
    // Neighbor if it exists already, else -1.
    int neighbor_if_present(int copy, int edge) const { return nb_[copy][edge]; }

    // The wedges around the lifted vertex at (copy, corner), counterclockwise,
    // starting with (copy, corner); exactly the surface vertex fan, and the
    // walk is glued shut so it ends where it started.
    std::vector<std::pair<int, int>> close_fan(int copy, int corner);

    // Follow a dual word of half-edges starting at `copy` (each must belong
    // to the triangle the walk currently stands in).
    int follow_word(int copy, const std::vector<HalfEdge>& word);

    // Chart of `copy` -> chart of copy 0, composed along the creation tree.
    AffineMap placement(int copy) const;

  private:
    const Surface* s_;
    std::vector<int> tri_;
    std::vector<std::array<int, 3>> nb_;
    std::vector<int> parent_;       // creating copy (-1 for the root)
    std::vector<int> parent_edge_;  // local edge of the parent crossed
};

struct DevelopedPoint {
    int copy = 0;
    Vec2 p;  // chart of the copy's surface triangle
};

// ---- Ray coverage ------------------------------------------------------------
//
// The region of the cover foliated by the rays (trails emanating from a base
// point), grown one lifted vertex at a time. Each covered triangle records
// how the rays run through it; each crossed edge records the pencils of rays
// crossing it; each reached vertex records the unique trail arriving at it.

enum class TriStatus {
    Uncovered,
    Base,            // contains the base point; foliated by rays from it
    DoubleLeaf,      // both edges at the apex corner are leaves oriented away
    FullyTransverse, // rays enter through `entry` and exit through both others
    CwLeaf,          // rays enter through `entry`; the edge after the entry
                     // tail corner is a leaf, oriented clockwise around the
                     // triangle boundary
    CcwLeaf,         // mirror image: the leaf follows the entry head corner,
                     // oriented counterclockwise around the boundary
};

enum class FlagKind { LeafToward, LeafAway, TransverseCcw, TransverseCw };

struct TriCover {
    TriStatus status = TriStatus::Uncovered;
    int entry = -1;         // local edge index (FullyTransverse/CwLeaf/CcwLeaf)
    int apex_corner = -1;   // local corner index (DoubleLeaf)
    int pencil_corner = -1; // corner carrying an extra ray pencil (leaf cases
                            // whose limit ray points strictly into the triangle)
};

// One pencil of rays crossing an edge: over the parameter interval [t0, t1]
// of the half-edge, the rays emanate from a common developed apex point (the
// base point or the last bend of their trails).
struct PencilPiece {
    Vec2 apex;          // in the chart of the copy owning the half-edge
    AffineMap to_apex;  // that chart -> the chart the apex's record lives in
    int apex_ref = -1;  // vertex record id, or -1 for the base point
    Rat t0, t1;
};

struct EdgeCover {
    bool leaf = false;
    // Transverse edges: rays cross out of `from_copy` through `from_edge`
    // (pieces are stored in that copy's chart, ordered along the half-edge).
    int from_copy = -1;
    int from_edge = -1;
    std::vector<PencilPiece> pieces;
    // Leaf edges: the flow runs tail -> head of this copy-local half-edge.
    int leaf_copy = -1;
    int leaf_edge = -1;
    // Base point on an edge: the edge carries two half-leaves flowing away
    // from the base in both directions.
    bool from_base_point = false;
};

// The unique trail from the base to a reached lifted vertex arrives at wedge
// (copy, corner) moving so that `back` points from the vertex towards the
// previous bend `prev` (a record id, or -1 for the base point), whose
// developed position in the same chart is `prev_apex`.
struct VertexRecord {
    int copy = -1;
    int corner = -1;
    int vertex = -1;  // surface vertex id
    Vec2 back;
    Vec2 prev_apex;
    int prev = -1;
    bool along_edge = false;  // arrival runs along a leaf edge into the vertex
};

// Flags around a dequeued vertex, in ccw fan order from the arrival wedge;
// recorded so the three-consecutive-groups invariant can be checked.
struct VertexFlags {
    int record = -1;
    std::vector<FlagKind> flags;
};

class RayCoverage {
  public:
    // Foliates the cover by rays from `base` until `budget` copies carry a
    // status (or the queue empties: the whole cover is covered). Throws
    // NotLeafTriangulation if some vertex has cone angle < 3pi or the surface
    // has poles; coverage is monotone in the budget.
    RayCoverage(Cover& cover, const DevelopedPoint& base, int budget);

    Cover& cover() const { return *cover_; }
    const DevelopedPoint& base() const { return base_; }
    const TriCover& tri_cover(int copy) const;
    bool covered(int copy) const;
    int num_covered() const { return covered_count_; }
    bool frontier_exhausted() const { return queue_empty_; }

    const std::vector<VertexRecord>& records() const { return records_; }
    const std::vector<VertexFlags>& dequeue_trace() const { return trace_; }
    // Pencils crossing the given copy-local edge, converted into that copy's
    // chart (parameter along half_edge(tri(copy), edge)). Empty if the edge
    // is not a crossed transverse edge.
    std::vector<PencilPiece> pencils_into(int copy, int edge) const;

    // The trail from the base point to q (which must lie in a covered copy;
    // throws NotCovered otherwise, carrying the budget in its message).
    // A degenerate query q == base yields a single-point trail.
    Trail trail_to(const DevelopedPoint& q) const;

  private:
    struct Reach;
    void process_vertex(int rec);
    TriStatus classify(int copy, int entry_edge);
    int reach(const Reach& r);
    void cover_base();
    void fit_arrays();
    void enqueue(int rec);
    AffineMap chart_to_record(int copy, int corner, int rec) const;
    int record_of_corner(int copy, int corner) const;
    const EdgeCover* edge_cover(int copy, int edge) const;
    std::vector<PencilPiece> pieces_in_chart(int copy, int edge) const;
    void store_edge(EdgeCover ec, int copy, int local);

    Cover* cover_;
    DevelopedPoint base_;
    int budget_;
    std::vector<TriCover> tris_;
    std::vector<std::array<int, 3>> edge_of_;  // id into edges_, or -1
    std::vector<EdgeCover> edges_;
    std::vector<VertexRecord> records_;
    std::vector<std::array<int, 3>> rec_of_corner_;
    std::map<int, Vec2> base_chart_;  // base position per base-status copy
    std::vector<int> queue_;
    std::vector<char> enq_;
    size_t qhead_ = 0;
    std::vector<VertexFlags> trace_;
    int covered_count_ = 0;
    bool queue_empty_ = false;
};

// Convenience wrapper: grow a coverage from p and backtrack the trail to q.
// Throws NotCovered when the budget is too small to reach q's copy.
Trail trail_between(Cover& cover, const DevelopedPoint& p,
                    const DevelopedPoint& q, int budget);

// ---- Polygon convexity -------------------------------------------------------
//
// The polygon boundary is a closed trail of straight arcs walked with the
// polygon interior on its left. It is convex iff at every corner the angle
// on the right-hand side (outside) measures at least pi. At a failing corner
// the interior angle exceeds pi, so the ray at counterclockwise angle
// exactly pi from the outgoing boundary direction points strictly into the
// polygon: the leaf chord through that corner, returned as the witness
// (except at poles, whose cone is too small to hold a chord).

struct ConvexityReport {
    bool convex = true;
    int witness_corner = -1;            // index into trail.points
    std::optional<SurfacePoint> chord_start;
    std::optional<Vec2> chord_dir;      // chart of chord_start's triangle
};

ConvexityReport polygon_convexity_check(const Surface& s, const Trail& polygon);

}  // namespace zebra
