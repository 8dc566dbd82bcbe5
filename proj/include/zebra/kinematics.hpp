#pragma once

#include <vector>

#include "zebra/surface.hpp"

namespace zebra {

// ---- Exact angle bookkeeping ------------------------------------------------
//
// A fan is a sequence of rays r0..rm from a common apex with each consecutive
// turn strictly counterclockwise and strictly less than a half turn
// (cross(r_{i-1}, r_i) > 0). Its total angle is measured exactly against
// multiples of pi by counting how often the sweeping ray crosses the line
// spanned by r0.

struct FanAngle {
    int half_turns = 0;  // theta == half_turns*pi if exact, else it lies in
    bool exact = false;  // (half_turns*pi, (half_turns+1)*pi)
};

enum class AngleCmp { Less, Equal, Greater };

FanAngle fan_angle(const std::vector<Vec2>& rays);
AngleCmp angle_cmp_pi(const std::vector<Vec2>& rays);
// Compare the fan's total angle against k*pi.
AngleCmp angle_cmp_k_pi(const std::vector<Vec2>& rays, int k);

// ---- Developing along dual words -------------------------------------------
//
// A dual word is a sequence of half-edges h1..hn, each crossed outward from
// the triangle it belongs to; after crossing h the walk stands in the twin's
// triangle. Placements pull every visited triangle into the chart of the
// starting triangle.

bool word_is_closed(const Surface& s, const std::vector<HalfEdge>& word);

struct DevelopStep {
    int tri;
    AffineMap place;  // chart of `tri` -> chart of the starting triangle
};

// Placements of the n+1 triangles visited along the word (first entry is the
// starting triangle with the identity placement). Throws InvalidArgument if
// consecutive crossings do not chain.
std::vector<DevelopStep> develop_word(const Surface& s, int start_tri,
                                      const std::vector<HalfEdge>& word);

// For a closed word, the affine deck transformation of the corresponding
// free homotopy class: the placement of the final copy of the starting
// triangle.
AffineMap loop_holonomy(const Surface& s, const std::vector<HalfEdge>& word);

// ---- Points, vertex fans, continuation cones --------------------------------

struct SurfacePoint {
    int tri = 0;
    Vec2 p;  // in the chart of `tri`, inside or on the boundary
};

// Whereabouts of a point within its triangle's closure.
enum class PointLocus { Interior, OnEdge, AtVertex };

struct LocatedPoint {
    PointLocus locus;
    SurfacePoint at;  // canonical representative (smallest half-edge chart
                      // for edge points, the cone's first corner for vertices)
    int edge = -1;    // local edge index when OnEdge (before canonicalizing)
    int corner = -1;  // local corner index when AtVertex
    int vertex = -1;  // vertex id when AtVertex
};

// Validates containment (throws InvalidArgument otherwise) and canonicalizes.
LocatedPoint locate(const Surface& s, const SurfacePoint& q);

// The k wedges around the vertex at (tri, corner), in counterclockwise order
// starting with (tri, corner) itself, each placed into the chart of `tri`.
struct WedgePlacement {
    int tri;
    int corner;
    AffineMap place;
};
std::vector<WedgePlacement> vertex_fan(const Surface& s, int tri, int corner);

// Legal straight-or-bending continuations of a trail that runs into a
// singular vertex. The trail arrives at the corner (tri, corner) moving in
// direction `in_dir` (chart of tri). Outgoing rays u are legal iff both
// angles at the vertex between the backward ray and u measure at least pi;
// they sweep a closed cone of angle alpha*pi, developed here into the chart
// of the arrival triangle.
struct ConePos {
    int wedge;  // index into fan
    Vec2 ray;   // developed direction from the apex
};

struct ContinuationCone {
    bool pole_bounce = false;  // cone angle pi: the only continuation ray is
                               // the reversed arrival ray
    int alpha = 0;
    Vec2 apex;                         // developed vertex position
    std::vector<WedgePlacement> fan;   // full vertex fan, arrival wedge first
    ConePos lo, hi;  // boundary rays of the legal cone (ccw from lo to hi)
};

// Throws RemovableVertex when the vertex has cone angle exactly 2pi.
ContinuationCone continuation_cone(const Surface& s, int tri, int corner,
                                   const Vec2& in_dir);

// ---- Straight-line tracing ---------------------------------------------------

struct LeafTrace {
    enum class Status { Closed, HitSingularity, Budget };
    Status status;
    int steps = 0;
    int singular_vertex = -1;  // HitSingularity only
    Rat holonomy;        // Closed only: derivative of the first-return map
    bool orientation_preserving = true;  // Closed only
    std::vector<HalfEdge> word;          // edges crossed, in order
    std::vector<SurfacePoint> polyline;  // segment endpoints, local charts
    SurfacePoint end;
};

// Follows the leaf of the direction foliation through `start`. Removable
// (cone angle 2pi) vertices are passed straight through; any other vertex
// stops the trace. A leaf is closed when it returns to its start point.
LeafTrace trace_leaf(const Surface& s, const SurfacePoint& start, Vec2 dir,
                     int max_steps);

struct SegmentTrace {
    bool reached = false;    // false: ran into a singular vertex
    int obstruction = -1;    // vertex id blocking the segment
    std::vector<HalfEdge> word;
    SurfacePoint end;        // local coordinates of the target
    AffineMap end_place;     // chart of end.tri -> chart of start.tri
    Vec2 end_dir;            // direction of travel at arrival, chart of end.tri
};

// Develops the straight segment from `start` to the point `target` given in
// the chart of the starting triangle, crossing gluings as needed (passing
// straight through removable vertices). The segment must not run into a
// singular vertex; if it does, `reached` is false.
SegmentTrace trace_segment(const Surface& s, const SurfacePoint& start,
                           const Vec2& target, int max_steps);

// ---- Trails -----------------------------------------------------------------

// A trail is a piecewise straight path whose interior corners sit at
// singular vertices (or are flat). points[i] -> points[i+1] is straight and
// crosses segments[i]; points[i] is stored in the chart its outgoing segment
// starts in, so consecutive points may name the same surface point in
// different charts. A closed trail repeats its first point at the end.
struct Trail {
    std::vector<SurfacePoint> points;
    std::vector<std::vector<HalfEdge>> segments;
    bool closed = false;
};

}  // namespace zebra
