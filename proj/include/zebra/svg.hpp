#pragma once
// SVG 1.1 renderings of developed pictures, for debugging and reports.
//
// Coordinates are emitted as floats: rendering is display-only and never a
// correctness surface. With `exact_overlay` set, every polygon and polyline
// additionally carries a `data-exact` attribute holding the exact rational
// coordinates it was projected from, so a picture can be audited.

#include <string>
#include <vector>

#include "zebra/closed_trails.hpp"
#include "zebra/connect.hpp"
#include "zebra/kinematics.hpp"
#include "zebra/surface.hpp"

namespace zebra {

struct SvgOptions {
    double margin = 0.05;       // fraction of the bounding box added as border
    bool exact_overlay = false; // embed rational coordinates as metadata
};

// Every triangle in its own chart coordinates (charts overlap freely).
std::string render_charts(const Surface& s, const SvgOptions& opt = {});

// The developed strip of a crossing word: each crossed triangle placed into
// the chart of `start_tri`. The word must start in `start_tri`.
std::string render_strip(const Surface& s, int start_tri,
                         const std::vector<HalfEdge>& word,
                         const SvgOptions& opt = {});

// A trail developed segment by segment: within a segment the picture is the
// exact development; at a bend the next segment is re-anchored at the bend's
// developed position (the fan unfolding between the two charts is not drawn).
std::string render_trail(const Surface& s, const Trail& t,
                         const SvgOptions& opt = {});

// The developed triangles of a ray coverage, color-coded by cover status,
// with the base point marked.
std::string render_coverage(const RayCoverage& cov, const SvgOptions& opt = {});

// The band strips of a cylinder's components, stacked vertically, with
// dilation fixed points marked.
std::string render_cylinder(const Surface& s, const Cylinder& c,
                            const SvgOptions& opt = {});

}  // namespace zebra
