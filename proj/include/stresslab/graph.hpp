#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stresslab {

struct Edge {
    int u = 0;
    int v = 0;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Dense row-major n x n matrix.
template <typename T>
class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(int n, T fill = T{}) : n_(n), data_(static_cast<std::size_t>(n) * n, fill) {}

    int size() const noexcept { return n_; }
    T& operator()(int i, int j) noexcept { return data_[static_cast<std::size_t>(i) * n_ + j]; }
    const T& operator()(int i, int j) const noexcept { return data_[static_cast<std::size_t>(i) * n_ + j]; }
    std::span<const T> data() const noexcept { return data_; }

    friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

private:
    int n_ = 0;
    std::vector<T> data_;
};

/// Simple undirected graph without a connectivity requirement.
///
/// Edges are stored normalised (u < v) and sorted; neighbour lists are sorted.
class Topology {
public:
    Topology() = default;
    /// Throws InvalidArgument on self-loops, duplicate edges or out-of-range endpoints.
    Topology(int n, std::vector<Edge> edges);

    int node_count() const noexcept { return n_; }
    int edge_count() const noexcept { return static_cast<int>(edges_.size()); }
    std::span<const Edge> edges() const noexcept { return edges_; }
    std::span<const int> neighbours(int u) const noexcept { return adjacency_[u]; }
    int degree(int u) const noexcept { return static_cast<int>(adjacency_[u].size()); }
    bool has_edge(int u, int v) const noexcept;
    bool is_connected() const;

    friend bool operator==(const Topology& a, const Topology& b) { return a.n_ == b.n_ && a.edges_ == b.edges_; }

private:
    int n_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> adjacency_;
};

/// Connected simple graph together with its hop-count distance matrix.
class Graph {
public:
    /// Throws InvalidArgument for a malformed edge list and ConnectivityError if disconnected.
    Graph(int n, std::vector<Edge> edges);
    explicit Graph(Topology topology);

    const Topology& topology() const noexcept { return topology_; }
    int node_count() const noexcept { return topology_.node_count(); }
    int edge_count() const noexcept { return topology_.edge_count(); }
    std::span<const Edge> edges() const noexcept { return topology_.edges(); }
    const SquareMatrix<int>& distances() const noexcept { return dist_; }
    int distance(int i, int j) const noexcept { return dist_(i, j); }

    friend bool operator==(const Graph& a, const Graph& b) { return a.topology_ == b.topology_; }

private:
    Topology topology_;
    SquareMatrix<int> dist_;
};

/// True when m < 2n, the sparsity cap applied to stimulus graphs.
bool satisfies_stimulus_edge_cap(const Topology& topology) noexcept;

/// Default Erdős–Rényi edge probability for an n-node stimulus graph.
double default_edge_probability(int n) noexcept;

/// Rejection-samples G(n, p) until the result is connected with m < 2n.
/// Throws ConstraintError once max_attempts samples have been rejected.
Graph generate_graph(int n, double edge_probability, std::uint64_t seed, int max_attempts = 10'000);

/// BFS from every source. Throws ConnectivityError when some pair is unreachable.
SquareMatrix<int> all_pairs_shortest_paths(const Topology& topology);

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Node positions for a graph. Positions must be finite and pairwise distinct.
class Drawing {
public:
    Drawing(std::shared_ptr<const Graph> graph, std::vector<Point> pos, std::string graph_id = {});

    const Graph& graph() const noexcept { return *graph_; }
    const std::shared_ptr<const Graph>& graph_ptr() const noexcept { return graph_; }
    const std::string& graph_id() const noexcept { return graph_id_; }
    std::span<const Point> positions() const noexcept { return pos_; }
    int node_count() const noexcept { return static_cast<int>(pos_.size()); }

    std::optional<double> cached_ksm() const noexcept { return ksm_; }
    void set_cached_ksm(double value) noexcept { ksm_ = value; }

    /// Copy with every position mapped through f.
    template <typename F>
    Drawing transformed(F&& f) const {
        std::vector<Point> out;
        out.reserve(pos_.size());
        for (const auto& p : pos_) out.push_back(f(p));
        return Drawing(graph_, std::move(out), graph_id_);
    }

private:
    std::shared_ptr<const Graph> graph_;
    std::vector<Point> pos_;
    std::string graph_id_;
    std::optional<double> ksm_;
};

/// Uniformly scales and translates points so the bounding box fits [0,1]^2 with
/// its longer side spanning the full unit interval. Aspect ratio is preserved.
std::vector<Point> normalize_to_unit_square(std::span<const Point> points);

double distance(const Point& a, const Point& b) noexcept;

SquareMatrix<double> euclidean_distance_matrix(const Drawing& drawing);

struct SvgStyle {
    double node_radius = 0.012;
    double edge_width = 0.004;
    double node_stroke_width = 0.003;
    double margin = 0.05;
    int pixel_size = 480;
};

/// Deterministic SVG with one <line> per edge and one <circle> per node.
/// The viewBox is the unit square grown by style.margin on every side.
std::string render_svg(const Drawing& drawing, const SvgStyle& style = {});

}  // namespace stresslab
