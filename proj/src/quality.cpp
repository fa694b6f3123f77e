#include "stresslab/quality.hpp"

#include "stresslab/error.hpp"
#include "stresslab/stress.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace stresslab {

std::int64_t c_deg(const Topology& topology) {
    std::int64_t total = 0;
    for (int u = 0; u < topology.node_count(); ++u) {
        const std::int64_t d = topology.degree(u);
        total += d * (d - 1) / 2;
    }
    return total;
}

namespace {

struct Triangle {
    int a, b, c;  // a < b < c
};

std::vector<Triangle> triangles(const Topology& topology) {
    std::vector<Triangle> out;
    for (const auto& e : topology.edges()) {
        // Third vertex above e.v so each triangle is found once via its lowest edge.
        for (int w : topology.neighbours(e.v))
            if (w > e.v && topology.has_edge(e.u, w)) out.push_back({e.u, e.v, w});
    }
    return out;
}

int shared_nodes(const Triangle& t, const Triangle& u) {
    int shared = 0;
    for (int x : {t.a, t.b, t.c})
        if (x == u.a || x == u.b || x == u.c) ++shared;
    return shared;
}

}  // namespace

std::int64_t c_tri(const Topology& topology) {
    const auto tris = triangles(topology);
    if (tris.empty()) return 0;

    // An edge is "part of or adjacent to any triangle" iff it touches a triangle vertex.
    std::vector<char> on_triangle(topology.node_count(), 0);
    for (const auto& t : tris) on_triangle[t.a] = on_triangle[t.b] = on_triangle[t.c] = 1;
    std::int64_t lone_edges = 0;
    for (const auto& e : topology.edges())
        if (!on_triangle[e.u] && !on_triangle[e.v]) ++lone_edges;

    std::int64_t total = static_cast<std::int64_t>(tris.size()) * lone_edges;
    for (std::size_t i = 0; i < tris.size(); ++i) {
        for (std::size_t j = i + 1; j < tris.size(); ++j) {
            switch (shared_nodes(tris[i], tris[j])) {
                case 2: total += 1; break;  // common edge
                case 1: total += 2; break;  // common node only
                default: total += 3; break;
            }
        }
    }
    return total;
}

std::int64_t c_4cyc(const Topology& topology) {
    // Each 4-cycle u-x-w-y has two diagonals {u,w} and {x,y}; summing C(common, 2)
    // over all unordered node pairs counts every cycle exactly twice.
    const int n = topology.node_count();
    std::int64_t twice = 0;
    std::vector<int> common(n, 0);
    for (int u = 0; u < n; ++u) {
        std::fill(common.begin(), common.end(), 0);
        for (int x : topology.neighbours(u))
            for (int w : topology.neighbours(x))
                if (w > u) ++common[w];
        for (int w = u + 1; w < n; ++w) twice += static_cast<std::int64_t>(common[w]) * (common[w] - 1) / 2;
    }
    return twice / 2;
}

CrossingBound crossing_bound(const Topology& topology) {
    CrossingBound b;
    const std::int64_t m = topology.edge_count();
    b.c_all = m * (m - 1) / 2;
    b.c_deg = c_deg(topology);
    b.c_tri = c_tri(topology);
    b.c_4cyc = c_4cyc(topology);
    b.c_mx = b.c_all - b.c_deg - b.c_tri - b.c_4cyc;
    return b;
}

int orientation(const Point& a, const Point& b, const Point& c) {
    const double left = (b.x - a.x) * (c.y - a.y);
    const double right = (b.y - a.y) * (c.x - a.x);
    const double det = left - right;
    // Static filter bound for orient2d (Shewchuk, ccwerrboundA).
    constexpr double eps = std::numeric_limits<double>::epsilon() / 2.0;
    constexpr double bound = (3.0 + 16.0 * eps) * eps;
    if (std::abs(det) > bound * (std::abs(left) + std::abs(right))) return det > 0 ? 1 : -1;

    using boost::multiprecision::cpp_rational;
    const cpp_rational ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y);
    const cpp_rational exact = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    return exact > 0 ? 1 : (exact < 0 ? -1 : 0);
}

namespace {

// p lies within the axis-aligned box of [a, b]; only meaningful when collinear.
bool within_box(const Point& a, const Point& b, const Point& p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

}  // namespace

bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d) {
    const int o1 = orientation(a, b, c);
    const int o2 = orientation(a, b, d);
    const int o3 = orientation(c, d, a);
    const int o4 = orientation(c, d, b);
    if (o1 * o2 < 0 && o3 * o4 < 0) return true;
    // Remaining contacts involve an endpoint lying on the other segment's line.
    if (o1 == 0 && within_box(a, b, c)) return true;
    if (o2 == 0 && within_box(a, b, d)) return true;
    if (o3 == 0 && within_box(c, d, a)) return true;
    if (o4 == 0 && within_box(c, d, b)) return true;
    return false;
}

std::int64_t count_crossings(const Drawing& drawing) {
    const auto edges = drawing.graph().edges();
    const auto pos = drawing.positions();
    std::int64_t crossings = 0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& e = edges[i];
        for (std::size_t j = i + 1; j < edges.size(); ++j) {
            const auto& f = edges[j];
            if (e.u == f.u || e.u == f.v || e.v == f.u || e.v == f.v) continue;
            if (segments_intersect(pos[e.u], pos[e.v], pos[f.u], pos[f.v])) ++crossings;
        }
    }
    return crossings;
}

double edge_crossing_metric(std::int64_t crossings, const CrossingBound& bound) {
    if (bound.c_mx <= 0) return 1.0;
    const double ratio = static_cast<double>(crossings) / static_cast<double>(bound.c_mx);
    return std::clamp(1.0 - ratio, 0.0, 1.0);
}

double edge_crossing_metric(const Drawing& drawing) {
    return edge_crossing_metric(count_crossings(drawing), crossing_bound(drawing.graph().topology()));
}

Box bounding_box(const Drawing& drawing) {
    const auto pos = drawing.positions();
    Box box{pos[0].x, pos[0].y, pos[0].x, pos[0].y};
    for (const auto& p : pos) {
        box.min_x = std::min(box.min_x, p.x);
        box.min_y = std::min(box.min_y, p.y);
        box.max_x = std::max(box.max_x, p.x);
        box.max_y = std::max(box.max_y, p.y);
    }
    return box;
}

double node_uniformity(const Drawing& drawing) { return node_uniformity(drawing, bounding_box(drawing)); }

double node_uniformity(const Drawing& drawing, Box frame) {
    const int n = drawing.node_count();
    if (n < 2) throw InvalidArgument("node uniformity needs at least two nodes");
    constexpr double kMargin = 1e-6;
    if (frame.max_x - frame.min_x <= 0.0) {
        frame.min_x -= kMargin;
        frame.max_x += kMargin;
    }
    if (frame.max_y - frame.min_y <= 0.0) {
        frame.min_y -= kMargin;
        frame.max_y += kMargin;
    }

    int k = 1;
    while (k * k < n) ++k;
    std::vector<int> counts(static_cast<std::size_t>(k) * k, 0);
    auto cell = [k](double v, double lo, double hi) {
        const int c = static_cast<int>(std::floor((v - lo) / (hi - lo) * k));
        return std::clamp(c, 0, k - 1);
    };
    for (const auto& p : drawing.positions())
        ++counts[static_cast<std::size_t>(cell(p.y, frame.min_y, frame.max_y)) * k +
                 cell(p.x, frame.min_x, frame.max_x)];

    const double cells = static_cast<double>(k) * k;
    const double expected = n / cells;
    double deviation = 0.0;
    for (int c : counts) deviation += std::abs(c - expected);
    const double worst = n * (1.0 - 1.0 / cells);
    return std::clamp(1.0 - 0.5 * deviation / worst, 0.0, 1.0);
}

double average_edge_length(const Drawing& drawing) {
    const auto edges = drawing.graph().edges();
    if (edges.empty()) throw InvalidArgument("average edge length of an edgeless graph is undefined");
    const auto pos = drawing.positions();
    double total = 0.0;
    for (const auto& e : edges) total += distance(pos[e.u], pos[e.v]);
    return total / static_cast<double>(edges.size());
}

double average_node_distance(const Drawing& drawing) {
    const int n = drawing.node_count();
    if (n < 2) throw InvalidArgument("average node distance needs at least two nodes");
    const auto pos = drawing.positions();
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) total += distance(pos[i], pos[j]);
    return total / (n * (n - 1) / 2.0);
}

MetricReport score_drawing(const Drawing& drawing, std::string drawing_id) {
    MetricReport r;
    r.drawing_id = std::move(drawing_id);
    r.kruskal_stress = kruskal_stress(drawing);
    r.ksm = 1.0 - r.kruskal_stress;
    r.metric_stress = metric_stress(drawing);
    r.normalized_metric_stress = normalized_metric_stress(drawing);
    r.crossings = count_crossings(drawing);
    r.edge_crossings = edge_crossing_metric(r.crossings, crossing_bound(drawing.graph().topology()));
    r.node_uniformity = node_uniformity(drawing);
    r.average_edge_length = average_edge_length(drawing);
    r.average_node_distance = average_node_distance(drawing);
    return r;
}

json report_to_json(const MetricReport& row) {
    json j{{"drawing_id", row.drawing_id},
           {"ksm", row.ksm},
           {"kruskal_stress", row.kruskal_stress},
           {"metric_stress", row.metric_stress},
           {"normalized_metric_stress", row.normalized_metric_stress},
           {"crossings", row.crossings},
           {"edge_crossings", row.edge_crossings},
           {"node_uniformity", row.node_uniformity},
           {"average_edge_length", row.average_edge_length},
           {"average_node_distance", row.average_node_distance}};
    if (row.target) j["target"] = *row.target;
    return j;
}

MetricReport report_from_json(const json& j) {
    try {
        MetricReport r;
        r.drawing_id = j.at("drawing_id").get<std::string>();
        r.ksm = j.at("ksm").get<double>();
        r.kruskal_stress = j.at("kruskal_stress").get<double>();
        r.metric_stress = j.at("metric_stress").get<double>();
        r.normalized_metric_stress = j.at("normalized_metric_stress").get<double>();
        r.crossings = j.at("crossings").get<std::int64_t>();
        r.edge_crossings = j.at("edge_crossings").get<double>();
        r.node_uniformity = j.at("node_uniformity").get<double>();
        r.average_edge_length = j.at("average_edge_length").get<double>();
        r.average_node_distance = j.at("average_node_distance").get<double>();
        if (auto it = j.find("target"); it != j.end() && !it->is_null()) r.target = it->get<double>();
        return r;
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("malformed metric report row: {}", e.what()));
    }
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"ksm",
                                                "kruskal_stress",
                                                "metric_stress",
                                                "normalized_metric_stress",
                                                "crossings",
                                                "edge_crossings",
                                                "node_uniformity",
                                                "average_edge_length",
                                                "average_node_distance"};
    return names;
}

double metric_value(const MetricReport& row, const std::string& name) {
    if (name == "ksm") return row.ksm;
    if (name == "kruskal_stress") return row.kruskal_stress;
    if (name == "metric_stress") return row.metric_stress;
    if (name == "normalized_metric_stress") return row.normalized_metric_stress;
    if (name == "crossings") return static_cast<double>(row.crossings);
    if (name == "edge_crossings") return row.edge_crossings;
    if (name == "node_uniformity") return row.node_uniformity;
    if (name == "average_edge_length") return row.average_edge_length;
    if (name == "average_node_distance") return row.average_node_distance;
    throw InvalidArgument(fmt::format("unknown metric '{}'", name));
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("pearson: samples differ in length");
    if (x.size() < 2) throw InvalidArgument("pearson: need at least two observations");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationMatrix correlation_matrix(const std::vector<MetricReport>& rows, const std::vector<std::string>& metrics) {
    if (rows.size() < 3) throw InvalidArgument("correlation matrix needs at least three rows");
    std::vector<std::vector<double>> columns;
    for (const auto& name : metrics) {
        std::vector<double> col;
        col.reserve(rows.size());
        for (const auto& r : rows) col.push_back(metric_value(r, name));
        columns.push_back(std::move(col));
    }
    CorrelationMatrix out;
    out.metrics = metrics;
    out.pearson.assign(metrics.size(), std::vector<std::optional<double>>(metrics.size()));
    for (std::size_t a = 0; a < metrics.size(); ++a) {
        for (std::size_t b = a; b < metrics.size(); ++b) {
            auto r = pearson(columns[a], columns[b]);
            if (a == b && r) r = 1.0;
            out.pearson[a][b] = out.pearson[b][a] = r;
        }
    }
    return out;
}

std::optional<double> CorrelationMatrix::at(const std::string& a, const std::string& b) const {
    auto ia = std::find(metrics.begin(), metrics.end(), a);
    auto ib = std::find(metrics.begin(), metrics.end(), b);
    if (ia == metrics.end() || ib == metrics.end()) throw InvalidArgument(fmt::format("no metric '{}' or '{}'", a, b));
    return pearson[ia - metrics.begin()][ib - metrics.begin()];
}

json correlation_to_json(const CorrelationMatrix& m) {
    json rows = json::array();
    for (const auto& row : m.pearson) {
        json r = json::array();
        for (const auto& v : row) r.push_back(v ? json(*v) : json(nullptr));
        rows.push_back(std::move(r));
    }
    return {{"metrics", m.metrics}, {"pearson", std::move(rows)}};
}

}  // namespace stresslab
