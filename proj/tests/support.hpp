#pragma once
// Independent reference implementations and fixtures shared by the unit and acceptance tests.
// Nothing here calls into the library code it is used to check.

#include "stresslab/graph.hpp"
#include "stresslab/rng.hpp"
#include "stresslab/stimulus.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using stresslab::Point;
using Rational = boost::multiprecision::cpp_rational;

// ---------- fixtures ----------

inline std::shared_ptr<const stresslab::Graph> make_graph(int n, std::vector<stresslab::Edge> edges) {
    return std::make_shared<const stresslab::Graph>(n, std::move(edges));
}

inline std::shared_ptr<const stresslab::Graph> path_graph(int n) {
    std::vector<stresslab::Edge> e;
    for (int i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
    return make_graph(n, e);
}

inline std::shared_ptr<const stresslab::Graph> cycle_graph(int n) {
    std::vector<stresslab::Edge> e;
    for (int i = 0; i < n; ++i) e.push_back({i, (i + 1) % n});
    return make_graph(n, e);
}

inline std::shared_ptr<const stresslab::Graph> complete_graph(int n) {
    std::vector<stresslab::Edge> e;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) e.push_back({i, j});
    return make_graph(n, e);
}

inline std::shared_ptr<const stresslab::Graph> petersen_graph() {
    std::vector<stresslab::Edge> e;
    for (int i = 0; i < 5; ++i) {
        e.push_back({i, (i + 1) % 5});
        e.push_back({i, i + 5});
        e.push_back({5 + i, 5 + (i + 2) % 5});
    }
    return make_graph(10, e);
}

inline std::vector<Point> random_positions(int n, stresslab::Rng& rng) {
    std::vector<Point> pos(n);
    for (auto& p : pos) p = {rng.uniform(), rng.uniform()};
    return pos;
}

inline stresslab::Drawing random_drawing(std::shared_ptr<const stresslab::Graph> g, stresslab::Rng& rng) {
    const int n = g->node_count();
    return stresslab::Drawing(std::move(g), random_positions(n, rng));
}

// Distinct points on a coarse (k+1) x (k+1) lattice; collinear and touching configurations are common.
inline std::vector<Point> lattice_positions(int n, int k, stresslab::Rng& rng) {
    std::vector<int> cells((k + 1) * (k + 1));
    if (n > static_cast<int>(cells.size())) throw std::invalid_argument("lattice too small for n nodes");
    std::iota(cells.begin(), cells.end(), 0);
    rng.shuffle(cells);
    std::vector<Point> pos(n);
    for (int i = 0; i < n; ++i)
        pos[i] = {static_cast<double>(cells[i] % (k + 1)) / k, static_cast<double>(cells[i] / (k + 1)) / k};
    return pos;
}

// Connected random graph with m < 2n, sampled here rather than through the library generator.
inline std::shared_ptr<const stresslab::Graph> random_connected_graph(int n, double p, stresslab::Rng& rng) {
    for (;;) {
        std::vector<stresslab::Edge> e;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.uniform() < p) e.push_back({i, j});
        if (static_cast<int>(e.size()) >= 2 * n) continue;
        stresslab::Topology t(n, e);
        if (t.is_connected()) return make_graph(n, e);
    }
}

// ---------- shortest paths ----------

// Floyd-Warshall over hop counts.
inline std::vector<std::vector<int>> floyd_warshall(int n, const std::vector<stresslab::Edge>& edges) {
    const int inf = std::numeric_limits<int>::max() / 4;
    std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
    for (int i = 0; i < n; ++i) d[i][i] = 0;
    for (auto [u, v] : edges) d[u][v] = d[v][u] = 1;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    return d;
}

// ---------- isotonic regression ----------

// Exhaustive search over every split of the sequence into contiguous blocks whose
// means are non-decreasing; each block is fitted by its mean. Partial splits whose
// error already exceeds the best complete split are abandoned.
inline std::vector<double> isotonic_exhaustive(const std::vector<double>& x) {
    const int k = static_cast<int>(x.size());
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_fit;
    std::vector<std::pair<int, int>> blocks;
    auto recurse = [&](auto&& self, int start, double last_mean, double sse) -> void {
        if (start == k) {
            if (sse < best) {
                best = sse;
                best_fit.assign(k, 0.0);
                for (auto [a, b] : blocks) {
                    double s = 0.0;
                    for (int i = a; i < b; ++i) s += x[i];
                    for (int i = a; i < b; ++i) best_fit[i] = s / (b - a);
                }
            }
            return;
        }
        double sum = 0.0;
        for (int end = start + 1; end <= k; ++end) {
            sum += x[end - 1];
            const double mean = sum / (end - start);
            if (mean < last_mean) continue;
            double block_sse = 0.0;
            for (int i = start; i < end; ++i) block_sse += (x[i] - mean) * (x[i] - mean);
            if (sse + block_sse > best) continue;
            blocks.push_back({start, end});
            self(self, end, mean, sse + block_sse);
            blocks.pop_back();
        }
    };
    recurse(recurse, 0, -std::numeric_limits<double>::infinity(), 0.0);
    return best_fit;
}

// Integer variant: returns the minimum squared error scaled by 2520 = lcm(1..10), exact for
// integer inputs of length <= 10.
inline std::int64_t isotonic_exhaustive_scaled_sse(const std::vector<int>& x) {
    const int k = static_cast<int>(x.size());
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    // last block mean kept as the fraction (num, den)
    auto recurse = [&](auto&& self, int start, std::int64_t last_num, std::int64_t last_den,
                       std::int64_t sse) -> void {
        if (start == k) {
            best = std::min(best, sse);
            return;
        }
        std::int64_t sum = 0, sq = 0;
        for (int end = start + 1; end <= k; ++end) {
            sum += x[end - 1];
            sq += static_cast<std::int64_t>(x[end - 1]) * x[end - 1];
            const std::int64_t len = end - start;
            if (sum * last_den < last_num * len) continue;
            self(self, end, sum, len, sse + 2520 * sq - (2520 / len) * sum * sum);
        }
    };
    recurse(recurse, 0, -1, 1, 0);
    return best;
}

// Closed-form isotonic regression: fit_i = max_{a<=i} min_{b>=i} mean(x[a..b]).
inline std::vector<double> isotonic_minmax(const std::vector<double>& x) {
    const std::size_t k = x.size();
    std::vector<double> prefix(k + 1, 0.0);
    for (std::size_t i = 0; i < k; ++i) prefix[i + 1] = prefix[i] + x[i];
    std::vector<double> fit(k);
    for (std::size_t i = 0; i < k; ++i) {
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a <= i; ++a) {
            double lo = std::numeric_limits<double>::infinity();
            for (std::size_t b = i; b < k; ++b) lo = std::min(lo, (prefix[b + 1] - prefix[a]) / (b - a + 1));
            hi = std::max(hi, lo);
        }
        fit[i] = hi;
    }
    return fit;
}

// ---------- Kruskal stress ----------

// Sort pairs by (graph distance, drawn distance), fit monotonically, evaluate stress-1.
inline double kruskal_stress(const std::vector<Point>& pos, const std::vector<std::vector<int>>& dist,
                             bool exhaustive) {
    struct Row {
        int graph;
        double drawn;
    };
    std::vector<Row> rows;
    const int n = static_cast<int>(pos.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            rows.push_back({dist[i][j], std::hypot(pos[i].x - pos[j].x, pos[i].y - pos[j].y)});
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.graph != b.graph ? a.graph < b.graph : a.drawn < b.drawn;
    });
    std::vector<double> drawn;
    for (const auto& r : rows) drawn.push_back(r.drawn);
    const auto fit = exhaustive ? isotonic_exhaustive(drawn) : isotonic_minmax(drawn);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < drawn.size(); ++k) {
        num += (drawn[k] - fit[k]) * (drawn[k] - fit[k]);
        den += drawn[k] * drawn[k];
    }
    return std::sqrt(num / den);
}

// ---------- metric stress ----------

inline double metric_stress_at_scale(const std::vector<Point>& pos, const std::vector<std::vector<int>>& dist,
                                     double s) {
    double total = 0.0;
    const int n = static_cast<int>(pos.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double x = s * std::hypot(pos[i].x - pos[j].x, pos[i].y - pos[j].y);
            total += (x - dist[i][j]) * (x - dist[i][j]) / (dist[i][j] * dist[i][j]);
        }
    return total;
}

template <typename F>
double golden_section_minimum(F f, double lo, double hi, double tol = 1e-10) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    return (a + b) / 2.0;
}

// ---------- segment intersection ----------

// Exact parametric test: solve a + s(b - a) = c + t(d - c) over the rationals.
inline bool closed_segments_meet(Point a, Point b, Point c, Point d) {
    const Rational ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y), dx(d.x), dy(d.y);
    const Rational rx = bx - ax, ry = by - ay, qx = dx - cx, qy = dy - cy;
    const Rational wx = cx - ax, wy = cy - ay;
    const Rational denom = rx * qy - ry * qx;
    if (denom != 0) {
        const Rational s = (wx * qy - wy * qx) / denom;
        const Rational t = (wx * ry - wy * rx) / denom;
        return s >= 0 && s <= 1 && t >= 0 && t <= 1;
    }
    const Rational rr = rx * rx + ry * ry, qq = qx * qx + qy * qy;
    if (rr == 0 && qq == 0) return ax == cx && ay == cy;
    if (rr == 0) {
        // a is a point: it must lie on cd.
        const Rational vx = ax - cx, vy = ay - cy;
        const Rational along = vx * qx + vy * qy;
        return vx * qy - vy * qx == 0 && along >= 0 && along <= qq;
    }
    if (qq == 0) return closed_segments_meet(c, d, a, b);
    // Parallel: they meet only if collinear with overlapping projections.
    if (wx * ry - wy * rx != 0) return false;
    const Rational t0 = (wx * rx + wy * ry) / rr;
    const Rational t1 = t0 + (qx * rx + qy * ry) / rr;
    const Rational lo = t0 < t1 ? t0 : t1, hi = t0 < t1 ? t1 : t0;
    return hi >= 0 && lo <= 1;
}

inline std::int64_t count_crossings(const stresslab::Drawing& drawing) {
    const auto edges = drawing.graph().edges();
    const auto pos = drawing.positions();
    std::int64_t c = 0;
    for (std::size_t p = 0; p < edges.size(); ++p)
        for (std::size_t q = p + 1; q < edges.size(); ++q) {
            const auto e = edges[p], f = edges[q];
            if (e.u == f.u || e.u == f.v || e.v == f.u || e.v == f.v) continue;
            if (closed_segments_meet(pos[e.u], pos[e.v], pos[f.u], pos[f.v])) ++c;
        }
    return c;
}

// ---------- crossing bound terms ----------

inline std::int64_t adjacent_edge_pairs(const stresslab::Topology& t) {
    const auto edges = t.edges();
    std::int64_t c = 0;
    for (std::size_t p = 0; p < edges.size(); ++p)
        for (std::size_t q = p + 1; q < edges.size(); ++q) {
            const auto e = edges[p], f = edges[q];
            if (e.u == f.u || e.u == f.v || e.v == f.u || e.v == f.v) ++c;
        }
    return c;
}

inline std::int64_t four_cycles(const stresslab::Topology& t) {
    const int n = t.node_count();
    std::int64_t c = 0;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            for (int x = b + 1; x < n; ++x)
                for (int y = x + 1; y < n; ++y) {
                    const std::array<std::array<int, 4>, 3> orders{
                        {{a, b, x, y}, {a, b, y, x}, {a, x, b, y}}};
                    for (const auto& o : orders) {
                        bool ok = true;
                        for (int k = 0; k < 4; ++k) ok = ok && t.has_edge(o[k], o[(k + 1) % 4]);
                        if (ok) ++c;
                    }
                }
    return c;
}

inline std::int64_t triangle_term(const stresslab::Topology& t) {
    const int n = t.node_count();
    std::vector<std::array<int, 3>> triangles;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            for (int c = b + 1; c < n; ++c)
                if (t.has_edge(a, b) && t.has_edge(b, c) && t.has_edge(a, c)) triangles.push_back({a, b, c});
    std::set<int> on_triangle;
    for (const auto& tri : triangles) on_triangle.insert(tri.begin(), tri.end());
    std::int64_t lone = 0;
    for (auto e : t.edges())
        if (!on_triangle.count(e.u) && !on_triangle.count(e.v)) ++lone;
    std::int64_t total = lone * static_cast<std::int64_t>(triangles.size());
    for (std::size_t p = 0; p < triangles.size(); ++p)
        for (std::size_t q = p + 1; q < triangles.size(); ++q) {
            int shared = 0;
            for (int x : triangles[p])
                for (int y : triangles[q]) shared += x == y ? 1 : 0;
            total += shared == 2 ? 1 : shared == 1 ? 2 : 3;
        }
    return total;
}

// ---------- node uniformity ----------

inline double node_uniformity(const std::vector<Point>& pos, double x0, double y0, double x1, double y1) {
    const int n = static_cast<int>(pos.size());
    int k = 1;
    while (k * k < n) ++k;
    std::vector<int> hist(k * k, 0);
    for (const auto& p : pos) {
        int cx = static_cast<int>((p.x - x0) / (x1 - x0) * k);
        int cy = static_cast<int>((p.y - y0) / (y1 - y0) * k);
        cx = std::clamp(cx, 0, k - 1);
        cy = std::clamp(cy, 0, k - 1);
        ++hist[cy * k + cx];
    }
    const double expected = static_cast<double>(n) / (k * k);
    double tv = 0.0;
    for (int h : hist) tv += std::abs(h - expected);
    return 1.0 - 0.5 * tv / (n * (1.0 - 1.0 / (k * k)));
}

// ---------- statistics ----------

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// ---------- experiment fixtures ----------

// A catalog with five graphs, three sets and nine levels per size; achieved KSM sits
// within +-0.008 of each target.
inline stresslab::StimulusCatalog synthetic_catalog(std::vector<int> sizes, std::uint64_t seed) {
    stresslab::Rng rng(seed);
    stresslab::StimulusCatalog catalog;
    for (int size : sizes)
        for (int g = 0; g < 5; ++g)
            for (int s = 0; s < 3; ++s)
                for (int level = 0; level < 9; ++level)
                    catalog[{size, g, s, level}] = 0.40 + 0.05 * level + rng.uniform(-0.008, 0.008);
    return catalog;
}

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
    static std::uint64_t counter = 0;
    const auto base = std::filesystem::temp_directory_path() /
                      ("stresslab-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(base);
    std::filesystem::create_directories(base);
    return base;
}

}  // namespace oracle
