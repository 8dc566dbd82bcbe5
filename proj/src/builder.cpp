#include "zebra/builder.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "zebra/errors.hpp"

namespace zebra {
namespace {

int patch_size(const AssembleSpec& spec, int p) {
    return static_cast<int>(spec.patches[p].vertices.size());
}

// Fan triangulation of an n-gon from vertex 0: triangles (v0, vi, vi+1) for
// i = 1..n-2. Boundary edge j (vertex j -> j+1) lands on:
//   j = 0      -> triangle 0, edge 0
//   1..n-2     -> triangle j-1, edge 1
//   j = n-1    -> triangle n-3, edge 2
HalfEdge boundary_he(int tri_offset, int n, int j) {
    if (j == 0) return half_edge(tri_offset, 0);
    if (j == n - 1) return half_edge(tri_offset + n - 3, 2);
    return half_edge(tri_offset + j - 1, 1);
}

// A corner (polygon vertex i) of the patch, as one of the fan-triangle
// corners that carry it.
std::pair<int, int> corner_of_patch_vertex(int tri_offset, int n, int i) {
    if (i == 0) return {tri_offset, 0};
    if (i == n - 1) return {tri_offset + n - 3, 2};
    return {tri_offset + i - 1, 1};
}

}  // namespace

std::vector<int> patch_triangle_offsets(const AssembleSpec& spec) {
    std::vector<int> off;
    int acc = 0;
    for (const auto& p : spec.patches) {
        off.push_back(acc);
        acc += static_cast<int>(p.vertices.size()) - 2;
    }
    return off;
}

HalfEdge patch_boundary_half_edge(const AssembleSpec& spec, PatchEdgeRef ref) {
    auto off = patch_triangle_offsets(spec);
    if (ref.patch < 0 || ref.patch >= static_cast<int>(spec.patches.size()))
        throw Error(ErrorCode::ConditionDViolated, "gluing references patch " +
                                                       std::to_string(ref.patch) +
                                                       " which does not exist");
    int n = patch_size(spec, ref.patch);
    if (ref.edge < 0 || ref.edge >= n)
        throw Error(ErrorCode::ConditionDViolated,
                    "gluing references edge " + std::to_string(ref.edge) +
                        " of a " + std::to_string(n) + "-gon");
    return boundary_he(off[ref.patch], n, ref.edge);
}

SurfaceDescription assemble(const AssembleSpec& spec,
                            std::vector<std::string>* warnings) {
    SurfaceDescription desc;
    desc.mode = spec.mode;
    auto off = patch_triangle_offsets(spec);

    for (int p = 0; p < static_cast<int>(spec.patches.size()); ++p) {
        const auto& vs = spec.patches[p].vertices;
        int n = static_cast<int>(vs.size());
        if (n < 3)
            throw Error(ErrorCode::ConditionDViolated,
                        "patch " + std::to_string(p) + " has fewer than 3 vertices");
        for (int i = 1; i + 1 < n; ++i) {
            if (cross_sign(vs[i] - vs[0], vs[i + 1] - vs[0]) <= 0)
                throw Error(ErrorCode::DegenerateTriangle,
                            "patch " + std::to_string(p) +
                                " is not fan-triangulable from its first vertex "
                                "(triangle " +
                                std::to_string(i - 1) + " is not positively oriented)");
            desc.triangles.push_back({vs[0], vs[i], vs[i + 1]});
        }
        // Interior fan diagonals: triangle i-1 edge 2 (v_{i+1} -> v0) against
        // triangle i edge 0 (v0 -> v_{i+1}).
        for (int i = 1; i + 2 < n; ++i)
            desc.gluings.push_back(
                {half_edge(off[p] + i - 1, 2), half_edge(off[p] + i, 0)});
    }

    std::map<HalfEdge, PatchEdgeRef> seen;
    for (const auto& [lhs, rhs] : spec.gluings) {
        HalfEdge a = patch_boundary_half_edge(spec, lhs);
        HalfEdge b = patch_boundary_half_edge(spec, rhs);
        if (a == b)
            throw Error(ErrorCode::ConditionDViolated,
                        "boundary edge glued to itself (patch " +
                            std::to_string(lhs.patch) + ", edge " +
                            std::to_string(lhs.edge) + ")");
        for (HalfEdge h : {a, b})
            if (seen.count(h))
                throw Error(ErrorCode::ConditionDViolated,
                            "boundary edge glued twice (patch " +
                                std::to_string(h == a ? lhs.patch : rhs.patch) +
                                ", edge " +
                                std::to_string(h == a ? lhs.edge : rhs.edge) + ")");
        seen[a] = lhs;
        seen[b] = rhs;
        Vec2 u = desc.triangles[he_tri(a)][(he_idx(a) + 1) % 3] -
                 desc.triangles[he_tri(a)][he_idx(a)];
        Vec2 v = desc.triangles[he_tri(b)][(he_idx(b) + 1) % 3] -
                 desc.triangles[he_tri(b)][he_idx(b)];
        if (!parallel(u, v))
            throw Error(ErrorCode::ConditionEViolated,
                        "glued boundary edges are not parallel: patch " +
                            std::to_string(lhs.patch) + " edge " +
                            std::to_string(lhs.edge) + " direction " +
                            vec_to_string(u) + " vs patch " +
                            std::to_string(rhs.patch) + " edge " +
                            std::to_string(rhs.edge) + " direction " +
                            vec_to_string(v));
        desc.gluings.push_back({a, b});
    }

    for (int p = 0; p < static_cast<int>(spec.patches.size()); ++p) {
        int n = patch_size(spec, p);
        for (int j = 0; j < n; ++j)
            if (!seen.count(boundary_he(off[p], n, j)) && warnings)
                warnings->push_back("patch " + std::to_string(p) + " edge " +
                                    std::to_string(j) + " is not glued");
    }

    if (!spec.removable_corners.empty()) {
        // Resolve (patch, polygon vertex) marks to glued vertex classes by
        // building once without marks.
        Surface probe = Surface::build(desc);
        for (auto [p, i] : spec.removable_corners) {
            auto [t, c] = corner_of_patch_vertex(off[p], patch_size(spec, p), i);
            desc.marked_removable.insert(probe.vertex_at(t, c));
        }
    }
    return desc;
}

namespace {

Vec2 v2(Rat x, Rat y) { return Vec2{std::move(x), std::move(y)}; }

PatchEdgeRef pe(int p, int e) { return PatchEdgeRef{p, e}; }

SurfaceDescription make_square_torus() {
    AssembleSpec spec;
    spec.patches.push_back({{v2(0, 0), v2(1, 0), v2(1, 1), v2(0, 1)}});
    spec.gluings = {{pe(0, 0), pe(0, 2)}, {pe(0, 1), pe(0, 3)}};
    spec.removable_corners = {{0, 0}};
    return assemble(spec);
}

SurfaceDescription make_octagon() {
    AssembleSpec spec;
    spec.patches.push_back({{v2(0, 0), v2(2, 0), v2(3, 1), v2(3, 3), v2(2, 4),
                             v2(0, 4), v2(-1, 3), v2(-1, 1)}});
    for (int j = 0; j < 4; ++j) spec.gluings.push_back({pe(0, j), pe(0, j + 4)});
    return assemble(spec);
}

SurfaceDescription make_l_shaped() {
    AssembleSpec spec;
    // L-shaped polygon (unit squares at (0,0), (1,0), (0,1)), fanned from the
    // reflex corner so every fan triangle is positively oriented.
    spec.patches.push_back({{v2(1, 1), v2(1, 2), v2(0, 2), v2(0, 1), v2(0, 0),
                             v2(1, 0), v2(2, 0), v2(2, 1)}});
    spec.gluings = {{pe(0, 4), pe(0, 1)},
                    {pe(0, 5), pe(0, 7)},
                    {pe(0, 6), pe(0, 3)},
                    {pe(0, 0), pe(0, 2)}};
    return assemble(spec);
}

SurfaceDescription make_pillowcase() {
    AssembleSpec spec;
    // A 2x2 square with marked midpoints on top and bottom sides, folded:
    // each half of the bottom is glued to the other half, likewise on top,
    // and left is glued to right. All four vertex classes become poles.
    spec.patches.push_back(
        {{v2(2, 0), v2(2, 2), v2(1, 2), v2(0, 2), v2(0, 0), v2(1, 0)}});
    spec.gluings = {{pe(0, 4), pe(0, 5)}, {pe(0, 1), pe(0, 2)}, {pe(0, 3), pe(0, 0)}};
    spec.mode = Mode::HalfDilation;
    return assemble(spec);
}

SurfaceDescription make_hopf_torus() {
    AssembleSpec spec;
    // Ring between the squares [-1,1]^2 and [-2,2]^2, split into four
    // trapezoids; each outer side is glued to the matching inner side by the
    // dilation x -> 2x.
    spec.patches.push_back({{v2(1, 1), v2(2, 2), v2(-2, 2), v2(-1, 1)}});    // top
    spec.patches.push_back({{v2(-1, 1), v2(-2, 2), v2(-2, -2), v2(-1, -1)}});  // left
    spec.patches.push_back({{v2(-1, -1), v2(-2, -2), v2(2, -2), v2(1, -1)}});  // bottom
    spec.patches.push_back({{v2(1, -1), v2(2, -2), v2(2, 2), v2(1, 1)}});      // right
    spec.gluings = {
        {pe(0, 2), pe(1, 0)}, {pe(1, 2), pe(2, 0)}, {pe(2, 2), pe(3, 0)},
        {pe(3, 2), pe(0, 0)},  // the four corner diagonals of the ring
        {pe(0, 1), pe(0, 3)}, {pe(1, 1), pe(1, 3)}, {pe(2, 1), pe(2, 3)},
        {pe(3, 1), pe(3, 3)},  // outer side -> inner side, derivative 2
    };
    for (int p = 0; p < 4; ++p) spec.removable_corners.push_back({p, 0});
    auto desc = assemble(spec);
    // Two interesting homotopy classes: "radial" crosses an outer/inner
    // gluing once (holonomy derivative 2), "angular" runs once around the
    // ring (trivial holonomy, not homotopic to any closed trail).
    desc.named_classes.push_back(
        {"radial", {half_edge(0, 1), half_edge(1, 0)}});
    desc.named_classes.push_back(
        {"angular",
         {half_edge(0, 0), half_edge(7, 0), half_edge(6, 0), half_edge(5, 0),
          half_edge(4, 0), half_edge(3, 0), half_edge(2, 0), half_edge(1, 0)}});
    return desc;
}

SurfaceDescription make_fig2_amalgam() {
    AssembleSpec spec;
    // Genus-2 dilation surface built around one cylinder with three
    // components: a flat band (the top halves of F1/F2/F3), the dilation
    // annulus D1 (derivative 2) and the dilation annulus D2 (derivative 3,
    // subdivided into three quadrilaterals so every triangle is embedded).
    // Two vertical slits in the F band, reglued crosswise, add the handle
    // that pushes the genus to 2; the slit bottoms sit on the D2/F junction
    // circle, which therefore becomes a boundary trail of the cylinder.
    spec.patches.push_back({{v2(0, 0), v2(1, 0), v2(1, Rat(1) / 2), v2(1, 1),
                             v2(0, 1)}});  // F1
    spec.patches.push_back({{v2(3, Rat(1) / 2), v2(3, 1), v2(1, 1),
                             v2(1, Rat(1) / 2), v2(1, 0), v2(3, 0)}});  // F2
    spec.patches.push_back(
        {{v2(4, 0), v2(4, 1), v2(3, 1), v2(3, Rat(1) / 2), v2(3, 0)}});  // F3
    spec.patches.push_back({{v2(4, 9), v2(0, 5), v2(0, 1), v2(1, 1), v2(3, 1),
                             v2(4, 1)}});  // D1, dilation 2x about (-4,1)
    // D2: 315-degree annular sector about (-2,3), dilation 3x.
    spec.patches.push_back(
        {{v2(0, 5), v2(4, 9), v2(-8, 9), v2(-4, 5)}});  // D2a, 45..135 deg
    spec.patches.push_back(
        {{v2(-4, 5), v2(-8, 9), v2(-8, -3), v2(-4, 1)}});  // D2b, 135..225 deg
    spec.patches.push_back({{v2(-4, 1), v2(-8, -3), v2(4, 3), v2(3, 3), v2(1, 3),
                             v2(0, 3)}});  // D2c, 225..360 deg
    constexpr int F1 = 0, F2 = 1, F3 = 2, D1 = 3, D2a = 4, D2b = 5, D2c = 6;
    spec.gluings = {
        {pe(F1, 4), pe(F3, 0)},   // left of band -> right of band
        {pe(F1, 1), pe(F3, 3)},   // slit banks, reglued crosswise...
        {pe(F2, 3), pe(F2, 5)},   // ...adding the handle
        {pe(F1, 2), pe(F2, 2)},   // upper banks close the slits
        {pe(F2, 0), pe(F3, 2)},
        {pe(F1, 3), pe(D1, 2)},   // band top = D1 bottom
        {pe(F2, 1), pe(D1, 3)},
        {pe(F3, 1), pe(D1, 4)},
        {pe(D1, 1), pe(D1, 5)},   // D1 return map x -> 2x + (4,-1)
        {pe(D1, 0), pe(D2a, 0)},  // D1 top = D2 start junction
        {pe(D2a, 3), pe(D2a, 1)},  // D2 return map x -> 3x + (4,-6)
        {pe(D2a, 2), pe(D2b, 0)},
        {pe(D2b, 3), pe(D2b, 1)},
        {pe(D2b, 2), pe(D2c, 0)},
        {pe(D2c, 5), pe(D2c, 1)},
        {pe(D2c, 2), pe(F3, 4)},  // D2 end junction = band bottom
        {pe(D2c, 3), pe(F2, 4)},
        {pe(D2c, 4), pe(F1, 0)},
    };
    // The seven cone-angle-2pi vertex classes (junction points and slit-edge
    // endpoints on the band top); the two slit endpoints' classes have cone
    // angle 4pi and stay singular.
    spec.removable_corners = {{F1, 0}, {F1, 4}, {D1, 0}, {D2a, 3},
                              {D2b, 3}, {F1, 3}, {F2, 1}};
    auto desc = assemble(spec);
    // "core": the class of the closed leaves of the cylinder, traced through
    // the flat band at height y = 6/7.
    desc.named_classes.push_back(
        {"core",
         {half_edge(2, 0), half_edge(1, 1), half_edge(4, 0), half_edge(3, 0),
          half_edge(8, 0), half_edge(7, 0)}});
    // "crossing": a class meeting every closed leaf of the cylinder once; it
    // climbs from the handle region through D1, sweeps around D2 and returns
    // through the band bottom.
    desc.named_classes.push_back(
        {"crossing",
         {half_edge(5, 0), half_edge(4, 0), half_edge(3, 1), half_edge(12, 0),
          half_edge(11, 0), half_edge(10, 0), half_edge(14, 2), half_edge(15, 1),
          half_edge(16, 2), half_edge(17, 1), half_edge(18, 2), half_edge(19, 2),
          half_edge(20, 1), half_edge(6, 0)}});
    return desc;
}

}  // namespace

std::vector<std::string> standard_example_names() {
    return {"square_torus", "octagon",    "l_shaped",
            "pillowcase",   "hopf_torus", "fig2_amalgam"};
}

SurfaceDescription standard_example(const std::string& name) {
    std::string n = name;
    if (n == "hopf_like_dilation_torus") n = "hopf_torus";
    if (n == "l-shaped" || n == "L" || n == "l") n = "l_shaped";
    if (n == "square_torus") return make_square_torus();
    if (n == "octagon") return make_octagon();
    if (n == "l_shaped") return make_l_shaped();
    if (n == "pillowcase") return make_pillowcase();
    if (n == "hopf_torus") return make_hopf_torus();
    if (n == "fig2_amalgam") return make_fig2_amalgam();
    throw Error(ErrorCode::InvalidArgument,
                "unknown example surface \"" + name + "\"");
}

namespace {

using nlohmann::json;

std::pair<int, int> line_col_of_offset(const std::string& text, size_t byte) {
    int line = 1, col = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

[[noreturn]] void bad_json(const std::string& what) {
    throw Error(ErrorCode::SyntaxError, "surface JSON: " + what);
}

Rat rat_field(const json& j, const char* where) {
    if (!j.is_string()) bad_json(std::string(where) + " must be a \"p/q\" string");
    try {
        return rat_from_string(j.get<std::string>());
    } catch (const Error& e) {
        bad_json(std::string(where) + ": " + e.what());
    }
}

}  // namespace

SurfaceDescription parse_surface(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        auto [line, col] = line_col_of_offset(json_text, e.byte ? e.byte - 1 : 0);
        throw Error(ErrorCode::SyntaxError,
                    "surface JSON: line " + std::to_string(line) + ", column " +
                        std::to_string(col) + ": " + e.what());
    }
    if (!j.is_object()) bad_json("top level must be an object");

    SurfaceDescription desc;
    if (j.contains("mode")) {
        std::string m = j["mode"].is_string() ? j["mode"].get<std::string>() : "";
        if (m == "dilation")
            desc.mode = Mode::Dilation;
        else if (m == "half_dilation")
            desc.mode = Mode::HalfDilation;
        else
            bad_json("mode must be \"dilation\" or \"half_dilation\"");
    }
    if (!j.contains("triangles") || !j["triangles"].is_array())
        bad_json("missing \"triangles\" array");
    for (const auto& tj : j["triangles"]) {
        if (!tj.is_array() || tj.size() != 3) bad_json("each triangle needs 3 points");
        std::array<Vec2, 3> tri;
        for (int c = 0; c < 3; ++c) {
            const auto& pj = tj[c];
            if (!pj.is_array() || pj.size() != 2)
                bad_json("each point is a [x, y] pair of rational strings");
            tri[c] = Vec2{rat_field(pj[0], "point x"), rat_field(pj[1], "point y")};
        }
        desc.triangles.push_back(tri);
    }
    auto parse_he = [&](const json& hj) -> HalfEdge {
        if (!hj.is_array() || hj.size() != 2 || !hj[0].is_number_integer() ||
            !hj[1].is_number_integer())
            bad_json("half-edges are [triangle, edge] integer pairs");
        int t = hj[0].get<int>(), e = hj[1].get<int>();
        if (t < 0 || t >= static_cast<int>(desc.triangles.size()) || e < 0 || e > 2)
            bad_json("half-edge [" + std::to_string(t) + ", " + std::to_string(e) +
                     "] out of range");
        return half_edge(t, e);
    };
    if (!j.contains("gluings") || !j["gluings"].is_array())
        bad_json("missing \"gluings\" array");
    for (const auto& gj : j["gluings"]) {
        if (!gj.is_array() || gj.size() != 2) bad_json("each gluing pairs two half-edges");
        desc.gluings.push_back({parse_he(gj[0]), parse_he(gj[1])});
    }
    if (j.contains("marked_removable")) {
        if (!j["marked_removable"].is_array())
            bad_json("marked_removable must be an array of vertex ids");
        for (const auto& vj : j["marked_removable"]) {
            if (!vj.is_number_integer()) bad_json("marked_removable entries are integers");
            desc.marked_removable.insert(vj.get<int>());
        }
    }
    if (j.contains("named_classes")) {
        if (!j["named_classes"].is_object())
            bad_json("named_classes must map names to half-edge lists");
        for (auto it = j["named_classes"].begin(); it != j["named_classes"].end();
             ++it) {
            if (!it.value().is_array()) bad_json("each named class is a half-edge list");
            std::vector<HalfEdge> word;
            for (const auto& hj : it.value()) word.push_back(parse_he(hj));
            desc.named_classes.push_back({it.key(), std::move(word)});
        }
    }
    return desc;
}

std::string serialize_surface(const SurfaceDescription& desc) {
    json j;
    j["mode"] = desc.mode == Mode::Dilation ? "dilation" : "half_dilation";
    j["triangles"] = json::array();
    for (const auto& tri : desc.triangles) {
        json tj = json::array();
        for (const auto& p : tri)
            tj.push_back({rat_to_string(p.x), rat_to_string(p.y)});
        j["triangles"].push_back(tj);
    }
    j["gluings"] = json::array();
    for (auto [a, b] : desc.gluings)
        j["gluings"].push_back({{he_tri(a), he_idx(a)}, {he_tri(b), he_idx(b)}});
    if (!desc.marked_removable.empty())
        j["marked_removable"] = desc.marked_removable;
    if (!desc.named_classes.empty()) {
        json nc = json::object();
        for (const auto& [name, word] : desc.named_classes) {
            json wj = json::array();
            for (HalfEdge h : word) wj.push_back({he_tri(h), he_idx(h)});
            nc[name] = wj;
        }
        j["named_classes"] = nc;
    }
    return j.dump(2) + "\n";
}

}  // namespace zebra
