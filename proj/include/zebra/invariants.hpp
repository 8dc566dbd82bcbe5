#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zebra/kinematics.hpp"
#include "zebra/surface.hpp"

namespace zebra {

// ---- Developed disk regions and the Gauss-Bonnet ledger ---------------------
//
// A region is a disk assembled from copies of surface triangles: copy i wears
// surface triangle tris[i], and matched copy-edges are glued by the surface
// identification. Because copies are distinct, a region may wrap around the
// surface (or around a cone point) several times.

struct Region {
    std::vector<int> tris;
    // match[i][e] = 3*j + f when edge e of copy i is glued to edge f of copy
    // j (which must carry the twin surface half-edge), or -1 on the boundary.
    std::vector<std::array<int, 3>> match;
};

// Grows a random disk region: expand across a boundary edge, or zip two
// adjacent boundary edges when the surface and the development both allow it
// (zipping is what creates interior vertices).
Region random_region(const Surface& s, int target_faces, uint64_t seed);

struct GaussBonnetReport {
    bool disk = false;          // connected, V-E+F == 1, one boundary circle
    bool fans_closed = false;   // interior fans develop to exact full turns
    bool boundary_consistent = false;  // boundary angle intervals admit the
                                       // exact aggregate the identity demands
    bool identity_holds = false;       // 2*N_int + N_bd - F == 2, equivalently
                                       // the developed interior turns balance
                                       // the cone defects
    int faces = 0;
    int interior_vertices = 0;
    int boundary_vertices = 0;
    Int curvature;             // sum over interior vertices of (turns - 2)
    bool holds() const {
        return disk && fans_closed && boundary_consistent && identity_holds;
    }
};

// Develops the region and checks the flat-disk angle ledger: every interior
// vertex closes up to a whole number of full turns, and the turning locked in
// the combinatorics (2*N_int + N_bd - F = 2 plus interior cone defects)
// matches the developed picture.
GaussBonnetReport gauss_bonnet(const Surface& s, const Region& region);

// ---- Trail verification ------------------------------------------------------

struct CornerCheck {
    int vertex = -1;
    bool at_vertex = false;   // false: a flat subdivision point
    bool pole_bounce = false;
    AngleCmp ccw_side = AngleCmp::Equal;  // angle vs pi on the ccw side
    AngleCmp cw_side = AngleCmp::Equal;   // angle vs pi on the cw side
    FanAngle ccw_fan;                     // exact half-turn data, ccw side
    bool legal = false;
};

struct TrailCheck {
    bool ok = false;
    std::string problem;      // first defect found, empty when ok
    std::vector<CornerCheck> corners;  // interior corners (all, when closed)
    // Closed trails only: sum of the ccw-side corner angles is an exact
    // multiple of pi minus the full turns of the developed polyline.
    std::optional<Int> angle_sum_half_turns;
};

// Re-traces every segment, confirms the stored crossing words, and checks
// corner legality (both angles at least pi; poles bounce; flat corners must
// continue straight). For closed trails the last point must return to the
// first and the closing corner is checked as well.
TrailCheck verify_trail(const Surface& s, const Trail& trail);

// Endpoint data of one re-traced trail segment.
struct SegmentEnd {
    SurfacePoint at;  // arrival point, arrival chart
    Vec2 dir;         // arrival direction, arrival chart
    Vec2 out_dir;     // initial direction, chart of the segment's start point
};

// Re-traces each segment of a trail (the same procedure verify_trail uses)
// and returns the endpoint data. Throws InvalidArgument if any segment fails
// to re-trace; run verify_trail first for a diagnosis.
std::vector<SegmentEnd> trail_segment_ends(const Surface& s,
                                           const Trail& trail);

// Legality of one corner: the trail arrives at the vertex at
// (arr_tri, arr_corner) travelling in direction d_in (chart of arr_tri) and
// departs from the wedge (out_tri, out_corner) with direction d_out (chart
// of out_tri). Both wedges must belong to the same surface vertex.
CornerCheck check_corner(const Surface& s, int arr_tri, int arr_corner,
                         const Vec2& d_in, int out_tri, int out_corner,
                         const Vec2& d_out);

// ---- Exhaustive search for closed trails in a homotopy class ----------------

struct OracleBudget {
    int max_corners = 12;
    int patch_depth = 4096;      // max developed triangle copies in the patch
    int max_steps = 4096;        // crossings per traced segment
    int64_t max_nodes = 2000000;  // DFS node budget
    int leaf_samples = 64;       // transversal samples for closed-leaf hunt
};

struct OracleResult {
    bool found_closed_leaf = false;  // the class is swept by closed leaves
    LeafTrace sample_leaf;
    std::vector<Trail> trails;       // legal closed trails with >= 1 corner
    bool exhausted = true;           // false when a budget clipped the search
};

// Independent search for the closed trails of the free homotopy class of a
// closed dual word: develops the class's deck transformation, enumerates
// chains of straight saddle connections between singular vertex lifts that
// close up equivariantly, and separately samples for a closed-leaf family.
// Meant as a slow cross-check for the classifier on small examples.
OracleResult brute_force_closed_trails(const Surface& s,
                                       const std::vector<HalfEdge>& word,
                                       const OracleBudget& budget = {});

// Free (cyclic) reduction of dual words in the punctured surface: adjacent
// twin crossings cancel. Two closed words are compared up to rotation.
std::vector<HalfEdge> reduce_word(const Surface& s, std::vector<HalfEdge> word);
bool cyclic_words_equal(const Surface& s, std::vector<HalfEdge> a,
                        std::vector<HalfEdge> b);

// Algebraic (signed) intersection number of two closed dual loops, computed
// from transverse polyline representatives anchored on the crossed edges.
int algebraic_intersection(const Surface& s, const std::vector<HalfEdge>& a,
                           const std::vector<HalfEdge>& b);

}  // namespace zebra
