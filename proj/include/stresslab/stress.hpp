#pragma once

#include "stresslab/graph.hpp"

#include <span>
#include <vector>

namespace stresslab {

/// One pair of the Shepard diagram: drawn distance against graph distance.
struct ShepardPoint {
    double drawn = 0.0;
    int input = 0;
    int i = 0;
    int j = 0;
};

/// All C(n,2) pairs ordered by graph distance, ties broken by drawn distance
/// ascending and then by (i, j). This is Kruskal's primary approach to ties.
std::vector<ShepardPoint> shepard_points(const Drawing& drawing);

/// Least-squares non-decreasing fit (pool adjacent violators).
/// Each output block equals the mean of its members. Throws InvalidArgument on empty input.
std::vector<double> isotonic_fit(std::span<const double> values);
std::vector<double> isotonic_fit(std::span<const ShepardPoint> sorted_points);

/// Sum over pairs of (drawn - graph)^2 / graph^2 at the drawing's own scale.
double metric_stress(const Drawing& drawing);

/// Uniform scale s minimising metric stress of s * positions.
double optimal_metric_scale(const Drawing& drawing);

/// Metric stress at optimal_metric_scale divided by the number of node pairs, so
/// values are comparable across drawings of different scale and graph size.
double normalized_metric_stress(const Drawing& drawing);

/// Kruskal stress-1 in [0, 1]. Throws DegenerateDrawingError when all nodes coincide.
double kruskal_stress(const Drawing& drawing);

/// 1 - kruskal_stress.
double ksm(const Drawing& drawing);

/// Kruskal stress for many layouts of one graph with reusable buffers.
///
/// Pairs are pre-bucketed by graph distance, so each evaluation only sorts
/// drawn distances inside each bucket before the isotonic pass.
class KruskalEvaluator {
public:
    explicit KruskalEvaluator(const Graph& graph);

    double stress(std::span<const Point> positions);
    double ksm(std::span<const Point> positions) { return 1.0 - stress(positions); }

private:
    struct Pair {
        int i;
        int j;
    };
    int n_;
    std::vector<Pair> pairs_;              // grouped by graph distance ascending
    std::vector<std::size_t> bucket_ends_;  // exclusive end offset of each distance group
    std::vector<double> drawn_;
    std::vector<double> fitted_;
    std::vector<double> block_sum_;
    std::vector<std::size_t> block_count_;
};

}  // namespace stresslab
