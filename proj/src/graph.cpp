#include "stresslab/graph.hpp"

#include "stresslab/error.hpp"
#include "stresslab/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace stresslab {

Topology::Topology(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)), adjacency_(n > 0 ? n : 0) {
    if (n <= 0) throw InvalidArgument("graph must have at least one node");
    for (auto& e : edges_) {
        if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n)
            throw InvalidArgument(fmt::format("edge ({}, {}) out of range for n = {}", e.u, e.v, n));
        if (e.u == e.v) throw InvalidArgument(fmt::format("self-loop at node {}", e.u));
        if (e.u > e.v) std::swap(e.u, e.v);
    }
    std::sort(edges_.begin(), edges_.end());
    if (auto dup = std::adjacent_find(edges_.begin(), edges_.end()); dup != edges_.end())
        throw InvalidArgument(fmt::format("duplicate edge ({}, {})", dup->u, dup->v));
    for (const auto& e : edges_) {
        adjacency_[e.u].push_back(e.v);
        adjacency_[e.v].push_back(e.u);
    }
    for (auto& list : adjacency_) std::sort(list.begin(), list.end());
}

bool Topology::has_edge(int u, int v) const noexcept {
    if (u < 0 || v < 0 || u >= n_ || v >= n_) return false;
    const auto& list = adjacency_[u];
    return std::binary_search(list.begin(), list.end(), v);
}

bool Topology::is_connected() const {
    std::vector<char> seen(n_, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int v : adjacency_[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                stack.push_back(v);
            }
        }
    }
    return reached == n_;
}

SquareMatrix<int> all_pairs_shortest_paths(const Topology& topology) {
    const int n = topology.node_count();
    constexpr int kUnreached = -1;
    SquareMatrix<int> dist(n, kUnreached);
    std::vector<int> queue;
    queue.reserve(n);
    for (int s = 0; s < n; ++s) {
        queue.clear();
        queue.push_back(s);
        dist(s, s) = 0;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            int u = queue[head];
            for (int v : topology.neighbours(u)) {
                if (dist(s, v) == kUnreached) {
                    dist(s, v) = dist(s, u) + 1;
                    queue.push_back(v);
                }
            }
        }
        if (static_cast<int>(queue.size()) != n) {
            auto missing = std::find(dist.data().begin() + static_cast<std::ptrdiff_t>(s) * n,
                                     dist.data().begin() + static_cast<std::ptrdiff_t>(s + 1) * n, kUnreached);
            int j = static_cast<int>(missing - (dist.data().begin() + static_cast<std::ptrdiff_t>(s) * n));
            throw ConnectivityError(fmt::format("graph is disconnected: node {} cannot reach node {}", s, j));
        }
    }
    return dist;
}

Graph::Graph(int n, std::vector<Edge> edges) : Graph(Topology(n, std::move(edges))) {}

Graph::Graph(Topology topology) : topology_(std::move(topology)), dist_(all_pairs_shortest_paths(topology_)) {}

bool satisfies_stimulus_edge_cap(const Topology& topology) noexcept {
    return topology.edge_count() < 2 * topology.node_count();
}

double default_edge_probability(int n) noexcept {
    if (n <= 1) return 1.0;
    return std::min(1.0, 3.0 / (n - 1));
}

Graph generate_graph(int n, double edge_probability, std::uint64_t seed, int max_attempts) {
    if (n < 2) throw InvalidArgument("generate_graph requires n >= 2");
    if (!(edge_probability > 0.0 && edge_probability <= 1.0))
        throw InvalidArgument(fmt::format("edge probability {} outside (0, 1]", edge_probability));
    if (max_attempts <= 0) throw InvalidArgument("attempt cap must be positive");

    Rng rng(seed);
    std::vector<Edge> edges;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        edges.clear();
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (rng.uniform() < edge_probability) edges.push_back({u, v});
        if (static_cast<int>(edges.size()) >= 2 * n || static_cast<int>(edges.size()) < n - 1) continue;
        Topology topology(n, edges);
        if (!topology.is_connected()) continue;
        return Graph(std::move(topology));
    }
    throw ConstraintError(fmt::format(
        "no connected graph with m < 2n found in {} samples of G({}, {}); the (n, p) pair is incompatible", max_attempts,
        n, edge_probability));
}

Drawing::Drawing(std::shared_ptr<const Graph> graph, std::vector<Point> pos, std::string graph_id)
    : graph_(std::move(graph)), pos_(std::move(pos)), graph_id_(std::move(graph_id)) {
    if (!graph_) throw InvalidArgument("drawing requires a graph");
    if (static_cast<int>(pos_.size()) != graph_->node_count())
        throw InvalidArgument(
            fmt::format("drawing has {} positions for a {}-node graph", pos_.size(), graph_->node_count()));
    for (const auto& p : pos_)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InvalidArgument("drawing has a non-finite coordinate");
    std::vector<Point> sorted = pos_;
    std::sort(sorted.begin(), sorted.end(), [](const Point& a, const Point& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end())
        throw InvalidArgument(fmt::format("two nodes share the position ({}, {})", dup->x, dup->y));
}

std::vector<Point> normalize_to_unit_square(std::span<const Point> points) {
    if (points.empty()) return {};
    double min_x = points[0].x, max_x = points[0].x, min_y = points[0].y, max_y = points[0].y;
    for (const auto& p : points) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    const double extent = std::max(max_x - min_x, max_y - min_y);
    const double scale = extent > 0.0 ? 1.0 / extent : 1.0;
    std::vector<Point> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back({(p.x - min_x) * scale, (p.y - min_y) * scale});
    return out;
}

double distance(const Point& a, const Point& b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

SquareMatrix<double> euclidean_distance_matrix(const Drawing& drawing) {
    const int n = drawing.node_count();
    const auto pos = drawing.positions();
    SquareMatrix<double> out(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) out(i, j) = out(j, i) = distance(pos[i], pos[j]);
    return out;
}

std::string render_svg(const Drawing& drawing, const SvgStyle& style) {
    const double lo = -style.margin;
    const double span = 1.0 + 2.0 * style.margin;
    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"{1:.4f} {1:.4f} {2:.4f} "
        "{2:.4f}\">\n",
        style.pixel_size, lo, span);
    svg += fmt::format("<rect x=\"{0:.4f}\" y=\"{0:.4f}\" width=\"{1:.4f}\" height=\"{1:.4f}\" fill=\"white\"/>\n", lo,
                       span);
    const auto pos = drawing.positions();
    svg += fmt::format("<g stroke=\"#333333\" stroke-width=\"{:.4f}\">\n", style.edge_width);
    for (const auto& e : drawing.graph().edges())
        svg += fmt::format("<line x1=\"{:.6f}\" y1=\"{:.6f}\" x2=\"{:.6f}\" y2=\"{:.6f}\"/>\n", pos[e.u].x,
                           pos[e.u].y, pos[e.v].x, pos[e.v].y);
    svg += "</g>\n";
    svg += fmt::format("<g fill=\"#4a7fb5\" stroke=\"#1f3b57\" stroke-width=\"{:.4f}\">\n", style.node_stroke_width);
    for (const auto& p : pos)
        svg += fmt::format("<circle cx=\"{:.6f}\" cy=\"{:.6f}\" r=\"{:.4f}\"/>\n", p.x, p.y, style.node_radius);
    svg += "</g>\n</svg>\n";
    return svg;
}

}  // namespace stresslab
