// Command-line front end: surface ingestion, reports, SVG renders.
//
// Exit codes: 0 for definite results, 2 when a classification is
// Inconclusive, 1 for input or usage errors.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "zebra/builder.hpp"
#include "zebra/closed_trails.hpp"
#include "zebra/connect.hpp"
#include "zebra/errors.hpp"
#include "zebra/invariants.hpp"
#include "zebra/kinematics.hpp"
#include "zebra/surface.hpp"
#include "zebra/svg.hpp"

using json = nlohmann::ordered_json;
using namespace zebra;

namespace {

struct LoadedSurface {
    Surface surface = Surface::build([] {
        SurfaceDescription d;
        d.triangles.push_back({Vec2{Rat(0), Rat(0)}, Vec2{Rat(1), Rat(0)},
                               Vec2{Rat(1), Rat(1)}});
        d.triangles.push_back({Vec2{Rat(0), Rat(0)}, Vec2{Rat(1), Rat(1)},
                               Vec2{Rat(0), Rat(1)}});
        d.gluings = {{half_edge(0, 0), half_edge(1, 1)},
                     {half_edge(0, 1), half_edge(1, 2)},
                     {half_edge(0, 2), half_edge(1, 0)}};
        return d;
    }());
    std::string digest;
    std::string source;
};

uint64_t fnv1a(const std::string& bytes) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(uint64_t v) {
    std::ostringstream oss;
    oss << std::hex << v;
    return oss.str();
}

LoadedSurface load_surface(const std::string& file, const std::string& mode) {
    LoadedSurface out;
    SurfaceDescription desc;
    std::ifstream in(file);
    if (in) {
        std::ostringstream buf;
        buf << in.rdbuf();
        desc = parse_surface(buf.str());
        out.digest = hex64(fnv1a(buf.str()));
        out.source = file;
    } else {
        if (file.find('/') != std::string::npos ||
            file.find('.') != std::string::npos)
            throw Error(ErrorCode::InvalidArgument,
                        "cannot open file: " + file);
        desc = standard_example(file);  // throws InvalidArgument if unknown
        out.digest = hex64(fnv1a("builtin:" + file));
        out.source = "builtin:" + file;
    }
    bool want_translation = false;
    if (mode == "translation") {
        desc.mode = Mode::Dilation;
        want_translation = true;
    } else if (mode == "dilation") {
        desc.mode = Mode::Dilation;
    } else if (mode == "half-dilation") {
        desc.mode = Mode::HalfDilation;
    } else if (!mode.empty()) {
        throw Error(ErrorCode::InvalidArgument, "unknown mode: " + mode);
    }
    out.surface = Surface::build(std::move(desc));
    if (want_translation) {
        for (int h = 0; h < 3 * out.surface.num_triangles(); ++h)
            if (!(out.surface.glue(h).a == 1))
                throw Error(ErrorCode::NonParallelGluing,
                            "surface is not a translation surface (gluing "
                            "derivative != 1)");
    }
    return out;
}

SurfacePoint parse_point(const Surface& s, const std::string& text) {
    auto colon = text.find(':');
    auto comma = text.find(',', colon == std::string::npos ? 0 : colon);
    if (colon == std::string::npos || comma == std::string::npos)
        throw Error(ErrorCode::InvalidArgument,
                    "point format is tri:x,y with rational coordinates");
    SurfacePoint p;
    p.tri = std::stoi(text.substr(0, colon));
    p.p.x = rat_from_string(text.substr(colon + 1, comma - colon - 1));
    p.p.y = rat_from_string(text.substr(comma + 1));
    if (p.tri < 0 || p.tri >= s.num_triangles())
        throw Error(ErrorCode::InvalidArgument, "triangle index out of range");
    return p;
}

Vec2 parse_vec(const std::string& text) {
    auto comma = text.find(',');
    if (comma == std::string::npos)
        throw Error(ErrorCode::InvalidArgument,
                    "vector format is x,y with rational coordinates");
    return Vec2{rat_from_string(text.substr(0, comma)),
                rat_from_string(text.substr(comma + 1))};
}

std::vector<HalfEdge> parse_word(const std::string& text) {
    std::vector<HalfEdge> word;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) word.push_back(std::stoi(tok));
    }
    return word;
}

// A class argument is a named class from the surface description or an
// explicit comma-separated half-edge list.
HomotopyClass parse_class(const Surface& s, const std::string& text) {
    for (const auto& [name, word] : s.description().named_classes)
        if (name == text) return make_class(s, word);
    bool digits = !text.empty();
    for (char c : text)
        if (!(std::isdigit(static_cast<unsigned char>(c)) || c == ',' ))
            digits = false;
    if (digits) return make_class(s, parse_word(text));
    throw Error(ErrorCode::InvalidArgument,
                "unknown class name \"" + text +
                    "\" (and not a half-edge list)");
}

// The straight (p, q) loop on a torus-like chart: trace from a generic
// point to its translate by p*(1,0) + q*(0,1).
HomotopyClass slope_class(const Surface& s, int p, int q) {
    SurfacePoint start{0, Vec2{Rat(1, 3), Rat(1, 7)}};
    Vec2 target = start.p + Vec2{Rat(p), Rat(q)};
    SegmentTrace tr =
        trace_segment(s, start, target, 64 * (std::abs(p) + std::abs(q)) + 64);
    if (!tr.reached)
        throw Error(ErrorCode::InvalidArgument,
                    "slope class trace did not reach its translate");
    return make_class(s, tr.word);
}

json vec_json(const Vec2& v) {
    return json{{"x", rat_to_string(v.x)}, {"y", rat_to_string(v.y)}};
}

json map_json(const AffineMap& m) {
    return json{{"a", rat_to_string(m.a)}, {"b", vec_json(m.b)}};
}

json slope_json(const Slope& sl) {
    return sl.infinite ? json("inf") : json(rat_to_string(sl.value));
}

json trail_json(const Surface& s, const Trail& t) {
    json j;
    j["closed"] = t.closed;
    json pts = json::array();
    for (const auto& p : t.points) {
        json e;
        e["tri"] = p.tri;
        e["p"] = vec_json(p.p);
        pts.push_back(e);
    }
    j["points"] = pts;
    json segs = json::array();
    for (const auto& w : t.segments) segs.push_back(w);
    j["segments"] = segs;
    (void)s;
    return j;
}

json cylinder_json(const Surface& s, const Cylinder& c) {
    json j;
    json comps = json::array();
    for (const auto& comp : c.components) {
        json e;
        e["band"] = comp.band;
        e["band_tri"] = comp.band_tri;
        e["holonomy"] = map_json(comp.holonomy);
        e["dilation"] = comp.dilation();
        if (comp.dilation()) e["center"] = vec_json(comp.center);
        e["slope_from"] = slope_json(comp.slope_from);
        e["slope_to"] = slope_json(comp.slope_to);
        comps.push_back(e);
    }
    j["components"] = comps;
    json juncs = json::array();
    for (const auto& t : c.junctions) juncs.push_back(t.word);
    j["junctions"] = juncs;
    json bds = json::array();
    for (const auto& t : c.boundaries) bds.push_back(t.word);
    j["boundaries"] = bds;
    j["closes_up"] = c.closes_up;
    j["full"] = c.full;
    (void)s;
    return j;
}

struct Output {
    bool machine = false;
    json report;
    std::ostringstream human;

    void flush(double ms) {
        if (machine) {
            report["timing_ms"] = ms;
            std::cout << report.dump(2) << "\n";
        } else {
            std::cout << human.str();
        }
    }
};

int cmd_validate(const LoadedSurface& ls, Output& out) {
    const Surface& s = ls.surface;
    EulerPoincareReport ep = s.euler_poincare();
    out.report["triangles"] = s.num_triangles();
    out.report["edges"] = s.num_edges();
    out.report["vertices"] = s.num_vertices();
    json cones = json::array();
    for (const ConeData& c : s.cones()) {
        json e;
        e["vertex"] = c.vertex;
        e["half_turns"] = c.half_turns;
        e["alpha"] = c.alpha;
        e["pole"] = c.is_pole;
        e["holonomy"] = rat_to_string(c.holonomy);
        cones.push_back(e);
    }
    out.report["cones"] = cones;
    out.report["euler_poincare"] = {{"chi", ep.chi},
                                    {"alpha_sum", ep.alpha_sum},
                                    {"holds", ep.holds}};
    out.report["leaf_triangulation"] = s.is_leaf_triangulation();
    out.report["has_poles"] = s.has_poles();
    out.report["warnings"] = s.warnings();
    out.human << ls.source << ": " << s.num_triangles() << " triangles, "
              << s.num_edges() << " edges, " << s.num_vertices()
              << " vertices\n";
    for (const ConeData& c : s.cones())
        out.human << "  vertex " << c.vertex << ": cone " << c.half_turns
                  << "*pi, alpha " << c.alpha
                  << (c.is_pole ? " (pole)" : "") << ", holonomy "
                  << rat_to_string(c.holonomy) << "\n";
    out.human << "  chi = " << ep.chi << ", sum alpha = " << ep.alpha_sum
              << ", identity sum(alpha) == -2*chi "
              << (ep.holds ? "holds" : "FAILS") << "\n";
    out.human << "  leaf triangulation: "
              << (s.is_leaf_triangulation() ? "yes" : "no")
              << ", poles: " << (s.has_poles() ? "yes" : "no") << "\n";
    return ep.holds ? 0 : 1;
}

int cmd_trace(const LoadedSurface& ls, const std::string& start,
              const std::string& dir, int budget, Output& out) {
    const Surface& s = ls.surface;
    SurfacePoint p = parse_point(s, start);
    Vec2 d = parse_vec(dir);
    LeafTrace lt = trace_leaf(s, p, d, budget);
    const char* status = lt.status == LeafTrace::Status::Closed ? "closed"
                         : lt.status == LeafTrace::Status::HitSingularity
                             ? "hit-singularity"
                             : "budget";
    out.report["status"] = status;
    out.report["crossings"] = lt.word;
    out.report["holonomy"] = rat_to_string(lt.holonomy);
    out.report["orientation_preserving"] = lt.orientation_preserving;
    if (lt.status == LeafTrace::Status::HitSingularity)
        out.report["singular_vertex"] = lt.singular_vertex;
    out.report["end"] = {{"tri", lt.end.tri}, {"p", vec_json(lt.end.p)}};
    out.human << "leaf trace: " << status << " after " << lt.word.size()
              << " crossings\n";
    if (lt.status == LeafTrace::Status::Closed)
        out.human << "  closed leaf, derivative " << rat_to_string(lt.holonomy)
                  << (lt.orientation_preserving ? "" : " (orientation-reversing)")
                  << "\n";
    if (lt.status == LeafTrace::Status::HitSingularity)
        out.human << "  blocked at singular vertex " << lt.singular_vertex
                  << "\n";
    return 0;
}

int cmd_connect(const LoadedSurface& ls, const std::string& from,
                const std::string& to, int budget, Output& out) {
    const Surface& s = ls.surface;
    SurfacePoint p = parse_point(s, from);
    SurfacePoint q = parse_point(s, to);
    Cover cover(s, p.tri);
    RayCoverage cov(cover, DevelopedPoint{0, p.p}, budget);
    std::optional<Trail> trail;
    for (int copy = 0; copy < cover.num_copies() && !trail; ++copy) {
        if (cover.tri(copy) != q.tri || !cov.covered(copy)) continue;
        try {
            trail = cov.trail_to(DevelopedPoint{copy, q.p});
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NotCovered) throw;
        }
    }
    if (!trail) {
        out.report["connected"] = false;
        out.report["covered_copies"] = cov.num_covered();
        out.report["frontier_exhausted"] = cov.frontier_exhausted();
        out.human << "not connected within budget " << budget << " ("
                  << cov.num_covered() << " covered copies"
                  << (cov.frontier_exhausted() ? ", frontier exhausted" : "")
                  << ")\n";
        return 2;
    }
    TrailCheck chk = verify_trail(s, *trail);
    out.report["connected"] = true;
    out.report["trail"] = trail_json(s, *trail);
    out.report["verified"] = chk.ok;
    out.human << "trail with " << trail->segments.size()
              << " straight segments; verification "
              << (chk.ok ? "passed" : ("FAILED: " + chk.problem)) << "\n";
    return chk.ok ? 0 : 1;
}

int cmd_classify(const LoadedSurface& ls, const std::string& cls_text,
                 const std::string& slope_text, int units, int max_iter,
                 Output& out) {
    const Surface& s = ls.surface;
    if (cls_text.empty() && slope_text.empty())
        throw Error(ErrorCode::InvalidArgument,
                    "classify needs --class or --class-slope");
    HomotopyClass cls =
        !slope_text.empty()
            ? [&] {
                  Vec2 pq = parse_vec(slope_text);
                  return slope_class(s, pq.x.convert_to<int>(),
                                     pq.y.convert_to<int>());
              }()
            : parse_class(s, cls_text);
    ClassifyBudget budget = ClassifyBudget::scaled(units);
    if (max_iter > 0) budget.tighten_iters = max_iter;
    Classification c = classify(s, cls, budget);
    out.report["word"] = cls.word;
    out.report["holonomy"] = map_json(cls.holonomy);
    out.report["verdict"] = verdict_name(c.verdict);
    out.report["reason"] = c.reason;
    if (!c.budget_note.empty()) out.report["budget_note"] = c.budget_note;
    if (c.intersection != 0) out.report["intersection"] = c.intersection;
    if (c.tighten_iterations > 0)
        out.report["tighten_iterations"] = c.tighten_iterations;
    if (c.slope) out.report["slope"] = slope_json(*c.slope);
    if (c.trail) {
        out.report["trail"] = trail_json(s, c.trail->period);
        out.report["trail_word"] = c.trail->word;
        json bends = json::array();
        for (const TrailBend& b : c.trail->bends) {
            json e;
            e["vertex"] = b.vertex;
            e["right"] =
                b.right == SideAngle::ExactlyPi ? "pi" : "greater";
            e["left"] = b.left == SideAngle::ExactlyPi ? "pi" : "greater";
            bends.push_back(e);
        }
        out.report["bends"] = bends;
    }
    if (c.cylinder) out.report["cylinder"] = cylinder_json(s, *c.cylinder);
    out.human << "verdict: " << verdict_name(c.verdict) << "\n";
    if (!c.reason.empty()) out.human << "  " << c.reason << "\n";
    if (!c.budget_note.empty()) out.human << "  note: " << c.budget_note << "\n";
    if (c.slope) out.human << "  slope: " << c.slope->str() << "\n";
    if (c.intersection != 0)
        out.human << "  forced intersection number: " << c.intersection << "\n";
    if (c.trail)
        out.human << "  closed trail with " << c.trail->bends.size()
                  << " bends, word length " << c.trail->word.size() << "\n";
    if (c.cylinder) {
        out.human << "  cylinder: " << c.cylinder->components.size()
                  << " components, " << c.cylinder->junctions.size()
                  << " junctions, " << c.cylinder->boundaries.size()
                  << " boundaries"
                  << (c.cylinder->full ? ", full" : "")
                  << (c.cylinder->closes_up ? ", closes up" : "") << "\n";
        for (const auto& comp : c.cylinder->components)
            out.human << "    component: slopes "
                      << comp.slope_from.str() << " -> "
                      << comp.slope_to.str()
                      << (comp.dilation() ? " (dilation)" : " (flat)") << "\n";
    }
    return c.verdict == Verdict::Inconclusive ? 2 : 0;
}

int cmd_cylinders(const LoadedSurface& ls, int budget, Output& out) {
    const Surface& s = ls.surface;
    std::vector<Cylinder> fulls = find_full_cylinders(s, budget);
    json arr = json::array();
    for (const Cylinder& c : fulls) arr.push_back(cylinder_json(s, c));
    out.report["full_cylinders"] = arr;
    out.human << fulls.size() << " full cylinder(s)\n";
    for (const Cylinder& c : fulls) {
        out.human << "  cylinder: " << c.components.size() << " components, "
                  << c.junctions.size() << " junctions, "
                  << c.boundaries.size() << " boundaries"
                  << (c.closes_up ? ", closes up" : "") << "\n";
        for (const auto& comp : c.components)
            out.human << "    component: slopes " << comp.slope_from.str()
                      << " -> " << comp.slope_to.str()
                      << (comp.dilation() ? " (dilation)" : " (flat)") << "\n";
    }
    return 0;
}

int cmd_gauss_bonnet(const LoadedSurface& ls, const std::string& region_text,
                     int faces, int count, uint64_t seed, Output& out) {
    const Surface& s = ls.surface;
    std::vector<Region> regions;
    if (!region_text.empty()) {
        if (region_text.rfind("tri:", 0) != 0)
            throw Error(ErrorCode::InvalidArgument,
                        "region format is tri:N (or use --faces/--count)");
        int t = std::stoi(region_text.substr(4));
        if (t < 0 || t >= s.num_triangles())
            throw Error(ErrorCode::InvalidArgument,
                        "region triangle out of range");
        Region r;
        r.tris = {t};
        r.match = {{-1, -1, -1}};
        regions.push_back(r);
    } else {
        for (int i = 0; i < count; ++i)
            regions.push_back(random_region(s, faces, seed + i));
    }
    json arr = json::array();
    bool all = true;
    for (const Region& r : regions) {
        GaussBonnetReport rep = gauss_bonnet(s, r);
        all = all && rep.holds();
        json e;
        e["faces"] = rep.faces;
        e["interior_vertices"] = rep.interior_vertices;
        e["boundary_vertices"] = rep.boundary_vertices;
        e["curvature_half_turns"] = rep.curvature.convert_to<long long>();
        e["disk"] = rep.disk;
        e["holds"] = rep.holds();
        arr.push_back(e);
        out.human << "region with " << rep.faces << " faces: interior "
                  << rep.interior_vertices << ", boundary "
                  << rep.boundary_vertices << ", curvature "
                  << rep.curvature.convert_to<long long>() << "*pi: "
                  << (rep.holds() ? "holds" : "FAILS") << "\n";
    }
    out.report["regions"] = arr;
    out.report["all_hold"] = all;
    return all ? 0 : 1;
}

int cmd_render(const LoadedSurface& ls, const std::string& what,
               const std::string& cls_text, const std::string& from,
               const std::string& start, const std::string& word_text,
               int budget, bool exact, const std::string& out_file) {
    const Surface& s = ls.surface;
    SvgOptions opt;
    opt.exact_overlay = exact;
    std::string svg;
    if (what == "charts") {
        svg = render_charts(s, opt);
    } else if (what == "strip") {
        std::vector<HalfEdge> w = parse_word(word_text);
        if (w.empty())
            throw Error(ErrorCode::InvalidArgument, "strip render needs --word");
        int t = start.empty() ? he_tri(w.front()) : std::stoi(start);
        svg = render_strip(s, t, w, opt);
    } else if (what == "coverage") {
        SurfacePoint p = parse_point(s, from);
        Cover cover(s, p.tri);
        RayCoverage cov(cover, DevelopedPoint{0, p.p}, budget);
        svg = render_coverage(cov, opt);
    } else if (what == "trail" || what == "cylinder") {
        HomotopyClass cls = parse_class(s, cls_text);
        Classification c = classify(s, cls);
        if (what == "trail") {
            if (!c.trail)
                throw Error(ErrorCode::InvalidArgument,
                            "classification produced no trail to render");
            svg = render_trail(s, c.trail->period, opt);
        } else {
            if (!c.cylinder)
                throw Error(ErrorCode::InvalidArgument,
                            "classification produced no cylinder to render");
            svg = render_cylinder(s, *c.cylinder, opt);
        }
    } else {
        throw Error(ErrorCode::InvalidArgument,
                    "render target must be charts, strip, coverage, trail or "
                    "cylinder");
    }
    if (out_file.empty() || out_file == "-") {
        std::cout << svg;
    } else {
        std::ofstream f(out_file);
        f << svg;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact geometry of leaf foliations on triangulated surfaces"};
    app.require_subcommand(1);

    std::string file, mode, start, dir, from, to, cls_text, slope_text,
        region_text, what = "charts", word_text, out_file;
    int budget = 4096, units = 100, max_iter = 0, faces = 12, count = 5;
    uint64_t seed = 1;
    bool machine = false, exact = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("file", file,
                        "surface JSON file or builtin example name")
            ->required();
        cmd->add_option("--mode", mode,
                        "translation|dilation|half-dilation");
        cmd->add_flag("--json", machine, "machine-readable report");
    };

    CLI::App* v = app.add_subcommand("validate", "build and audit a surface");
    add_common(v);

    CLI::App* tr = app.add_subcommand("trace", "trace a leaf from a point");
    add_common(tr);
    tr->add_option("--start", start, "start point tri:x,y")->required();
    tr->add_option("--dir", dir, "direction x,y")->required();
    tr->add_option("--budget", budget, "max crossings");

    CLI::App* cn = app.add_subcommand("connect", "trail between two points");
    add_common(cn);
    cn->add_option("--from", from, "source point tri:x,y")->required();
    cn->add_option("--to", to, "target point tri:x,y")->required();
    cn->add_option("--budget", budget, "cover budget (developed triangles)");

    CLI::App* cl = app.add_subcommand("classify", "classify a homotopy class");
    add_common(cl);
    cl->add_option("--class", cls_text, "named class or half-edge list");
    cl->add_option("--class-slope", slope_text,
                   "torus class by integer slope p,q");
    cl->add_option("--budget", units, "budget units (100 = default budgets)");
    cl->add_option("--max-iter", max_iter, "tightening iteration cap");

    CLI::App* cy = app.add_subcommand("cylinders", "search full cylinders");
    add_common(cy);
    cy->add_option("--budget", budget, "search budget");

    CLI::App* gb = app.add_subcommand("gauss-bonnet",
                                      "check the developed-region ledger");
    add_common(gb);
    gb->add_option("--region", region_text, "tri:N for a one-triangle region");
    gb->add_option("--faces", faces, "faces per random region");
    gb->add_option("--count", count, "number of random regions");
    gb->add_option("--seed", seed, "random seed");

    CLI::App* rd = app.add_subcommand("render", "emit an SVG picture");
    add_common(rd);
    rd->add_option("--what", what, "charts|strip|coverage|trail|cylinder");
    rd->add_option("--class", cls_text, "class for trail/cylinder renders");
    rd->add_option("--from", from, "base point for coverage renders");
    rd->add_option("--start-tri", start, "start triangle for strip renders");
    rd->add_option("--word", word_text, "crossing word for strip renders");
    rd->add_option("--budget", budget, "coverage budget");
    rd->add_flag("--exact-overlay", exact, "embed rational coordinates");
    rd->add_option("--out", out_file, "output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    auto t0 = std::chrono::steady_clock::now();
    Output out;
    out.machine = machine;
    try {
        LoadedSurface ls = load_surface(file, mode);
        out.report["command"] = app.get_subcommands().front()->get_name();
        out.report["input_digest"] = ls.digest;
        int rc = 1;
        if (v->parsed()) rc = cmd_validate(ls, out);
        if (tr->parsed()) rc = cmd_trace(ls, start, dir, budget, out);
        if (cn->parsed()) rc = cmd_connect(ls, from, to, budget, out);
        if (cl->parsed())
            rc = cmd_classify(ls, cls_text, slope_text, units, max_iter, out);
        if (cy->parsed()) rc = cmd_cylinders(ls, budget, out);
        if (gb->parsed())
            rc = cmd_gauss_bonnet(ls, region_text, faces, count, seed, out);
        if (rd->parsed())
            return cmd_render(ls, what, cls_text, from, start, word_text,
                              budget, exact, out_file);
        double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
        out.flush(ms);
        return rc;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
