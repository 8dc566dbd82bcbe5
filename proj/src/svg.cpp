#include "zebra/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "zebra/errors.hpp"
#include "zebra/invariants.hpp"

namespace zebra {

namespace {

double to_double(const Rat& r) { return r.convert_to<double>(); }

struct Pt {
    double x = 0, y = 0;
};

Pt project(const Vec2& v) { return {to_double(v.x), to_double(v.y)}; }

std::string exact_attr(const std::vector<Vec2>& pts) {
    std::string out = " data-exact=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
        if (i) out += ';';
        out += vec_to_string(pts[i]);
    }
    out += '"';
    return out;
}

// Scene collector: gathers primitives, then emits one SVG with a viewBox
// fitted to everything drawn. The y axis is flipped at emission so the
// picture matches the usual mathematical orientation.
class Scene {
  public:
    explicit Scene(const SvgOptions& opt) : opt_(opt) {}

    void polygon(const std::vector<Vec2>& pts, const std::string& fill,
                 const std::string& stroke) {
        Item it;
        it.kind = Item::Polygon;
        it.pts = pts;
        it.fill = fill;
        it.stroke = stroke;
        add(std::move(it));
    }

    void polyline(const std::vector<Vec2>& pts, const std::string& stroke,
                  double width_scale = 1.0) {
        Item it;
        it.kind = Item::Polyline;
        it.pts = pts;
        it.stroke = stroke;
        it.width_scale = width_scale;
        add(std::move(it));
    }

    void dot(const Vec2& p, const std::string& fill) {
        Item it;
        it.kind = Item::Dot;
        it.pts = {p};
        it.fill = fill;
        add(std::move(it));
    }

    std::string emit() const {
        double minx = 0, miny = 0, maxx = 1, maxy = 1;
        bool first = true;
        for (const Item& it : items_) {
            for (const Vec2& v : it.pts) {
                Pt p = project(v);
                if (first) {
                    minx = maxx = p.x;
                    miny = maxy = p.y;
                    first = false;
                } else {
                    minx = std::min(minx, p.x);
                    maxx = std::max(maxx, p.x);
                    miny = std::min(miny, p.y);
                    maxy = std::max(maxy, p.y);
                }
            }
        }
        double w = maxx - minx, h = maxy - miny;
        if (w <= 0) w = 1;
        if (h <= 0) h = 1;
        double m = opt_.margin * std::max(w, h);
        double stroke = std::max(w, h) / 400.0;
        std::ostringstream oss;
        oss.precision(8);
        // y is flipped: a point (x, y) is drawn at (x, -y).
        double vx = minx - m, vy = -maxy - m, vw = w + 2 * m, vh = h + 2 * m;
        oss << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
               "viewBox=\""
            << vx << ' ' << vy << ' ' << vw << ' ' << vh
            << "\" width=\"800\" height=\"" << 800.0 * vh / vw << "\">\n";
        for (const Item& it : items_) {
            std::string exact =
                opt_.exact_overlay ? exact_attr(it.pts) : std::string{};
            if (it.kind == Item::Dot) {
                Pt p = project(it.pts[0]);
                oss << "  <circle cx=\"" << p.x << "\" cy=\"" << -p.y
                    << "\" r=\"" << 2.5 * stroke << "\" fill=\"" << it.fill
                    << "\"" << exact << "/>\n";
                continue;
            }
            oss << (it.kind == Item::Polygon ? "  <polygon" : "  <polyline")
                << " points=\"";
            for (size_t i = 0; i < it.pts.size(); ++i) {
                Pt p = project(it.pts[i]);
                if (i) oss << ' ';
                oss << p.x << ',' << -p.y;
            }
            oss << "\" fill=\""
                << (it.kind == Item::Polygon ? it.fill : std::string("none"))
                << "\" stroke=\"" << it.stroke << "\" stroke-width=\""
                << stroke * it.width_scale << "\"" << exact << "/>\n";
        }
        oss << "</svg>\n";
        return oss.str();
    }

  private:
    struct Item {
        enum Kind { Polygon, Polyline, Dot } kind = Polygon;
        std::vector<Vec2> pts;
        std::string fill = "none";
        std::string stroke = "black";
        double width_scale = 1.0;
    };
    void add(Item it) { items_.push_back(std::move(it)); }
    SvgOptions opt_;
    std::vector<Item> items_;
};

const char* kFills[] = {"#dbeafe", "#dcfce7", "#fef9c3",
                        "#fce7f3", "#e0e7ff", "#f1f5f9"};

std::vector<Vec2> placed_triangle(const Surface& s, int tri,
                                  const AffineMap& place) {
    return {place(s.corner(tri, 0)), place(s.corner(tri, 1)),
            place(s.corner(tri, 2))};
}

}  // namespace

std::string render_charts(const Surface& s, const SvgOptions& opt) {
    Scene sc(opt);
    for (int t = 0; t < s.num_triangles(); ++t)
        sc.polygon(placed_triangle(s, t, identity_map()), kFills[t % 6],
                   "#334155");
    return sc.emit();
}

std::string render_strip(const Surface& s, int start_tri,
                         const std::vector<HalfEdge>& word,
                         const SvgOptions& opt) {
    Scene sc(opt);
    auto steps = develop_word(s, start_tri, word);
    int i = 0;
    for (const DevelopStep& st : steps)
        sc.polygon(placed_triangle(s, st.tri, st.place), kFills[(i++) % 6],
                   "#334155");
    return sc.emit();
}

std::string render_trail(const Surface& s, const Trail& t,
                         const SvgOptions& opt) {
    Scene sc(opt);
    std::vector<Vec2> line;
    AffineMap anchor = identity_map();  // current segment chart -> picture
    int fill = 0;
    size_t nseg = t.segments.size();
    auto ends = trail_segment_ends(s, t);
    for (size_t j = 0; j < nseg; ++j) {
        auto steps = develop_word(s, t.points[j].tri, t.segments[j]);
        for (const DevelopStep& st : steps)
            sc.polygon(placed_triangle(s, st.tri, anchor.compose(st.place)),
                       kFills[(fill++) % 6], "#94a3b8");
        Vec2 from = anchor(t.points[j].p);
        if (line.empty() || !(line.back() == from)) line.push_back(from);
        // Developed end of the segment, from the arrival-chart endpoint. The
        // next point may be stored in a different chart (a bend's departure
        // wedge); the next segment is re-anchored there by translation.
        AffineMap at_end = anchor.compose(steps.back().place);
        Vec2 to = ends[j].at.tri == steps.back().tri ? at_end(ends[j].at.p)
                                                     : from;
        line.push_back(to);
        if (j + 1 < nseg) {
            if (t.points[j + 1].tri == steps.back().tri) {
                anchor = at_end;
            } else {
                AffineMap next;
                next.a = at_end.a;
                next.b = to - (t.points[j + 1].p * at_end.a);
                anchor = next;
            }
        }
    }
    sc.polyline(line, "#dc2626", 2.0);
    if (!t.points.empty()) sc.dot(t.points[0].p, "#dc2626");
    return sc.emit();
}

std::string render_coverage(const RayCoverage& cov, const SvgOptions& opt) {
    Scene sc(opt);
    Cover& cover = cov.cover();
    const Surface& s = cover.surface();
    for (int copy = 0; copy < cover.num_copies(); ++copy) {
        if (!cov.covered(copy)) continue;
        const char* fill = "#f1f5f9";
        switch (cov.tri_cover(copy).status) {
            case TriStatus::Base: fill = "#fde68a"; break;
            case TriStatus::DoubleLeaf: fill = "#bbf7d0"; break;
            case TriStatus::FullyTransverse: fill = "#bfdbfe"; break;
            case TriStatus::CwLeaf: fill = "#ddd6fe"; break;
            case TriStatus::CcwLeaf: fill = "#fecaca"; break;
            case TriStatus::Uncovered: break;
        }
        sc.polygon(placed_triangle(s, cover.tri(copy), cover.placement(copy)),
                   fill, "#334155");
    }
    AffineMap base_place = cover.placement(cov.base().copy);
    sc.dot(base_place(cov.base().p), "#b91c1c");
    return sc.emit();
}

std::string render_cylinder(const Surface& s, const Cylinder& c,
                            const SvgOptions& opt) {
    Scene sc(opt);
    Vec2 offset{Rat(0), Rat(0)};
    for (const CylinderComponent& comp : c.components) {
        // Stack each component's developed band, shifted so bands do not
        // overlap in the picture.
        auto steps = develop_word(s, comp.band_tri, comp.band);
        Rat miny, maxy;
        bool first = true;
        int fill = 0;
        for (const DevelopStep& st : steps) {
            std::vector<Vec2> pts;
            for (int k = 0; k < 3; ++k) {
                Vec2 v = st.place(s.corner(st.tri, k)) + offset;
                if (first || v.y < miny) miny = v.y;
                if (first || v.y > maxy) maxy = v.y;
                first = false;
                pts.push_back(v);
            }
            sc.polygon(pts, kFills[(fill++) % 6], "#334155");
        }
        if (comp.dilation()) sc.dot(comp.center + offset, "#b91c1c");
        offset.y = offset.y + (maxy - miny) + Rat(1);
    }
    return sc.emit();
}

}  // namespace zebra
