#pragma once

#include <string>
#include <vector>

#include "zebra/surface.hpp"

namespace zebra {

// A simple CCW polygon, triangulated as a fan from its first vertex. Rotate
// the vertex list so that the fan apex sees the whole polygon (for convex
// polygons any apex works; the L-shaped example fans from its reflex corner).
struct PolygonPatch {
    std::vector<Vec2> vertices;
};

struct PatchEdgeRef {
    int patch = 0;
    int edge = 0;  // boundary edge i runs vertex i -> vertex i+1 (mod n)
};

struct AssembleSpec {
    std::vector<PolygonPatch> patches;
    std::vector<std::pair<PatchEdgeRef, PatchEdgeRef>> gluings;
    Mode mode = Mode::Dilation;
    // Corners (patch, polygon vertex) whose glued vertex class is expected to
    // be removable (cone angle exactly 2pi).
    std::vector<std::pair<int, int>> removable_corners;
};

// Fan-triangulates the patches and resolves patch-edge gluings into the
// half-edge description. Throws ConditionDViolated for combinatorial pairing
// problems (self-glued or doubly glued boundary edges, bad references) and
// ConditionEViolated when a glued pair of boundary edges is not parallel.
// Boundary edges left unglued produce a warning here and fail later in
// Surface::build.
SurfaceDescription assemble(const AssembleSpec& spec,
                            std::vector<std::string>* warnings = nullptr);

// First global triangle index of each patch under fan triangulation.
std::vector<int> patch_triangle_offsets(const AssembleSpec& spec);
// The half-edge carrying a patch boundary edge.
HalfEdge patch_boundary_half_edge(const AssembleSpec& spec, PatchEdgeRef ref);

// Built-in example surfaces:
//   square_torus   flat torus, one removable vertex
//   octagon        genus-2 translation surface, one 6pi cone point
//   l_shaped       genus-2 translation surface, one 6pi cone point
//   pillowcase     half-dilation sphere, four poles
//   hopf_torus     dilation torus built from a square ring, derivative 2
//   fig2_amalgam   genus-2 dilation surface whose slope-0 core class bounds a
//                  full cylinder amalgamated from two dilation components and
//                  one flat component across cone-angle-2pi junction points
SurfaceDescription standard_example(const std::string& name);
std::vector<std::string> standard_example_names();

// JSON round trip. Rational coordinates are serialized as "p/q" strings and
// the round trip is bit-exact. parse_surface throws SyntaxError with
// line/column information on malformed input.
SurfaceDescription parse_surface(const std::string& json_text);
std::string serialize_surface(const SurfaceDescription& desc);

}  // namespace zebra
