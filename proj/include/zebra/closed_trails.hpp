#pragma once
// Closed trails in free homotopy classes.
//
// A free homotopy class of loops is presented combinatorially as a cyclic
// dual-graph loop: the list of half-edges a representative crosses, in order.
// The classifier sorts a class into one of four mutually exclusive outcomes:
//
//   NR  — the class contains no closed trail;
//   TF  — the surface is a torus foliated by closed leaves in the class;
//   Cyl — the closed trails in the class sweep out a cylinder;
//   UT  — the class contains a unique closed trail, which has a bend
//         strictly wider than pi on each side;
//
// or reports Inconclusive with a note about which budget ran out.  Definite
// verdicts are certified exactly (a trail that verifies, a cylinder sweep, a
// forced intersection number) and never depend on the budget chosen.

#include <optional>
#include <string>
#include <vector>

#include "zebra/kinematics.hpp"
#include "zebra/rational.hpp"
#include "zebra/surface.hpp"

namespace zebra {

// ---------------------------------------------------------------------------
// Homotopy classes

struct HomotopyClass {
    int seed = 0;                 // triangle the loop starts and ends in
    std::vector<HalfEdge> word;   // cyclic dual loop of crossed half-edges
    AffineMap holonomy;           // affine holonomy of one period
};

// Wraps a cyclic dual word, checking that it is combinatorially a loop
// (consecutive crossings share a triangle and the word returns to its seed).
// Throws InvalidArgument otherwise.  The word is stored as given; no
// reduction is applied.
HomotopyClass make_class(const Surface& s, std::vector<HalfEdge> word);

// Rejects classes the classifier refuses to work on: a word whose cyclic
// reduction is empty (ClassTrivial) and a word that is a k-fold repetition
// of a shorter loop, k >= 2 (ClassIsPower).
void validate_class(const Surface& s, const HomotopyClass& cls);

// ---------------------------------------------------------------------------
// Closed trails

enum class SideAngle { ExactlyPi, GreaterThanPi };

// One vertex corner of a closed trail, with the exact comparison of the two
// side angles against pi.  (Angles below pi cannot occur on a trail.)
struct TrailBend {
    int point = 0;    // index into the period trail's point list
    int vertex = 0;   // surface vertex class of the bend
    SideAngle right = SideAngle::ExactlyPi;  // angle right of travel vs pi
    SideAngle left = SideAngle::ExactlyPi;   // angle left of travel vs pi
};

struct ClosedTrail {
    Trail period;                  // one period; closed (first point repeated)
    std::vector<HalfEdge> word;    // crossing word of the period
    AffineMap holonomy;            // affine holonomy of the period word
    std::vector<TrailBend> bends;  // vertex corners in period order

    bool right_all_pi() const;     // no bend wider than pi on the right
    bool left_all_pi() const;      // no bend wider than pi on the left
};

// Fills in word, holonomy and bend flags for a closed period trail, after
// running the full trail verifier on it.  Throws InvalidArgument if the
// trail is not closed or fails verification.
ClosedTrail make_closed_trail(const Surface& s, Trail period);

// Canonical rotation-invariant signature of a closed trail with at least one
// bend: two closed trails describe the same geometric trail iff their
// signatures match.  (Bend-free closed leaves are not canonical — any leaf of
// their band gives the same cylinder — and get an empty signature.)
std::string closed_trail_signature(const Surface& s, const ClosedTrail& t);

// ---------------------------------------------------------------------------
// Tightening

struct TightenResult {
    enum class Status {
        Closed,        // found a closed trail in the class
        NotClosedYet,  // iteration budget exhausted; arc holds the last try
        Diverged,      // the seam-point iteration entered a cycle
    };
    Status status = Status::NotClosedYet;
    std::optional<ClosedTrail> trail;   // set when status == Closed
    std::optional<Trail> arc;           // the last one-period arc otherwise
    std::vector<SurfacePoint> visited;  // iteration trace of seam points
    int iterations = 0;
};

// Searches the class for a closed trail by the seam-moving iteration: build
// the trail arc from the lift q~ to its deck translate delta(q~), test the
// trail angle condition where the two period ends meet, and on failure move
// the seam to the first bend of the arc (to the arc midpoint when it is
// straight).  When the period closes but overlaps its own deck translate,
// the enclosed simple sub-loop is extracted and returned instead.
//
// `budget` bounds the developed triangles per connect query; `max_iter`
// bounds seam moves.  Throws ConnectFailed when the underlying coverage
// gives up for a reason other than budget, BudgetExhausted when the cover
// budget runs out, and NotLeafTriangulation on unsupported surfaces.
TightenResult tighten(const Surface& s, const HomotopyClass& cls,
                      const SurfacePoint& start, int budget,
                      int max_iter = 64);

// ---------------------------------------------------------------------------
// Cylinders

// A maximal family of parallel-ish closed leaves with a common crossing word.
// Flat components (holonomy derivative 1) are swept by parallel leaves of a
// single slope; dilation components (derivative != 1) are swept by rays from
// the developed fixed point `center`, covering a closed interval of slopes.
// Slopes are reported in the chart of the component's first band triangle.
struct CylinderComponent {
    AffineMap holonomy;            // of the band word, in the component chart
    std::vector<HalfEdge> band;    // crossing word of its interior leaves
    int band_tri = 0;              // triangle whose chart anchors the band
    Vec2 center;                   // fixed point of `holonomy` when dilation
    Slope slope_from, slope_to;    // swept slope interval (equal when flat)

    bool dilation() const { return holonomy.a != 1; }
};

// The cylinder swept out by the closed trails of one class: an annulus of
// closed leaves, split into components where the dilational holonomy jumps
// (at closed leaves through cone-angle-2pi vertices with vertex derivative
// != 1), bounded by closed trails through singular vertices — or closing up
// around the surface with no boundary at all.
struct Cylinder {
    std::vector<CylinderComponent> components;  // in sweep order
    std::vector<ClosedTrail> junctions;  // component-separating closed leaves
    std::vector<ClosedTrail> boundaries; // singular boundary chains (0..2)
    bool closes_up = false;  // sweep wrapped around the surface
    bool full = false;       // the union of swept slopes is every slope
};

// Grows the cylinder of closed leaves adjacent to `t` on its all-pi side
// (both sides when both qualify), amalgamating across removable-vertex
// junctions, stopping at singular boundary chains, and detecting when the
// sweep wraps around the whole surface.  Throws NotAllPiSide if each side of
// `t` has a bend wider than pi.  `budget` caps traced crossings and bands.
Cylinder extend_cylinder(const Surface& s, const ClosedTrail& t,
                         int budget = 4096);

// Search for full cylinders (cylinders sweeping every slope).  Candidate
// core leaves are found by tracing closed leaves through removable vertices
// and all-pi-sided saddle chains through singular ones; each verified
// candidate is swept into its cylinder and kept when full.
std::vector<Cylinder> find_full_cylinders(const Surface& s, int budget = 4096);

// A certificate that every representative of a class crosses a full
// cylinder, which rules out closed trails in the class.
struct FullCylinderHit {
    Cylinder cylinder;             // the full cylinder being crossed
    std::vector<HalfEdge> core;    // crossing word of a core closed leaf
    int intersection = 0;          // forced algebraic intersection number
};

// Looks for a full cylinder whose core has nonzero algebraic intersection
// with the class.  A positive answer is exact; an empty answer only means
// nothing was found within budget.
std::optional<FullCylinderHit> detect_full_cylinder_crossing(
    const Surface& s, const HomotopyClass& cls, int budget = 4096);

// ---------------------------------------------------------------------------
// Classification

enum class Verdict { NR, TF, Cyl, UT, Inconclusive };

const char* verdict_name(Verdict v);

struct ClassifyBudget {
    int cover = 20000;       // developed triangles per connect query
    int steps = 4096;        // crossings per straight-line trace
    int tighten_iters = 64;  // seam moves in tighten
    int sweep = 4096;        // crossings and bands per cylinder sweep
    int detect = 4096;       // work units for full-cylinder detection

    // Proportional scaling: 100 units is the default budget.
    static ClassifyBudget scaled(int units);
};

struct Classification {
    Verdict verdict = Verdict::Inconclusive;
    std::string reason;     // one-line certificate summary
    std::optional<ClosedTrail> trail;   // UT: the unique trail
    std::optional<Cylinder> cylinder;   // Cyl: the swept cylinder;
                                        // NR: the full cylinder crossed
    std::optional<LeafTrace> leaf;      // TF: a sample closed leaf
    std::optional<Slope> slope;         // TF: the foliation slope
    int intersection = 0;               // NR by crossing: forced |i(.,.)| > 0
    std::string budget_note;            // Inconclusive: what ran out
    int tighten_iterations = 0;         // seam moves spent (when tighten ran)
};

// Decision procedure: validate the class; refuse surfaces with poles; on a
// torus without singular vertices decide TF/NR by holonomy algebra; look for
// a full-cylinder crossing (NR) or core match (Cyl); otherwise tighten and
// split UT from Cyl by the bend side flags.  Verdicts are deterministic and
// never flip with a larger budget; only Inconclusive can resolve.
// Throws SurfaceHasPoles, ClassTrivial, ClassIsPower.
Classification classify(const Surface& s, const HomotopyClass& cls,
                        const ClassifyBudget& budget = {});

}  // namespace zebra
