#pragma once

#include "stresslab/graph.hpp"
#include "stresslab/io.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stresslab {

/// Terms of the tightened maximum-crossing bound.
///
/// c_mx is kept signed: graphs dense in triangles sharing edges (K4, the
/// diamond) make the printed exclusions overshoot, and the raw value is reported
/// as computed. edge_crossing_metric treats c_mx <= 0 as the zero-bound branch.
struct CrossingBound {
    std::int64_t c_all = 0;
    std::int64_t c_deg = 0;
    std::int64_t c_tri = 0;
    std::int64_t c_4cyc = 0;
    std::int64_t c_mx = 0;
};

std::int64_t c_deg(const Topology& topology);
std::int64_t c_tri(const Topology& topology);
std::int64_t c_4cyc(const Topology& topology);
CrossingBound crossing_bound(const Topology& topology);

/// Orientation of c relative to the directed line a->b: +1 left, -1 right, 0 collinear.
/// Exact: a floating-point filter with a rational fallback near zero.
int orientation(const Point& a, const Point& b, const Point& c);

/// True when the closed segments [a,b] and [c,d] share at least one point.
bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d);

/// Number of unordered pairs of edges without a common endpoint whose segments
/// meet: proper crossings, an endpoint touching the other edge's interior, and
/// collinear overlaps each count once.
std::int64_t count_crossings(const Drawing& drawing);

/// 1 - c / c_mx when c_mx > 0, otherwise 1; clamped to [0, 1].
double edge_crossing_metric(const Drawing& drawing);
double edge_crossing_metric(std::int64_t crossings, const CrossingBound& bound);

struct Box {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 1.0;
    double max_y = 1.0;
};

Box bounding_box(const Drawing& drawing);

/// 1 - total variation between the k x k cell histogram (k = ceil(sqrt(n))) of
/// `frame` and the uniform histogram, normalised so the worst case scores 0.
/// The single-argument form bins inside the nodes' own bounding box.
double node_uniformity(const Drawing& drawing);
double node_uniformity(const Drawing& drawing, Box frame);

/// Mean Euclidean edge length. Throws InvalidArgument for an edgeless graph.
double average_edge_length(const Drawing& drawing);
/// Mean Euclidean distance over all node pairs.
double average_node_distance(const Drawing& drawing);

/// One row of a metric report.
struct MetricReport {
    std::string drawing_id;
    double ksm = 0.0;
    double kruskal_stress = 0.0;
    double metric_stress = 0.0;
    double normalized_metric_stress = 0.0;
    std::int64_t crossings = 0;
    double edge_crossings = 0.0;  // EC metric
    double node_uniformity = 0.0;
    double average_edge_length = 0.0;
    double average_node_distance = 0.0;
    std::optional<double> target;
};

MetricReport score_drawing(const Drawing& drawing, std::string drawing_id);

json report_to_json(const MetricReport& row);
MetricReport report_from_json(const json& j);

/// Names accepted by metric_value and correlation_matrix.
const std::vector<std::string>& metric_names();
/// Throws InvalidArgument for an unknown name.
double metric_value(const MetricReport& row, const std::string& name);

struct CorrelationMatrix {
    std::vector<std::string> metrics;
    /// Row-major; nullopt where a column has zero variance.
    std::vector<std::vector<std::optional<double>>> pearson;

    std::optional<double> at(const std::string& a, const std::string& b) const;
};

/// Pearson correlations between the named columns. Requires at least 3 rows.
CorrelationMatrix correlation_matrix(const std::vector<MetricReport>& rows, const std::vector<std::string>& metrics);
/// Pearson coefficient of two equal-length samples; nullopt if either has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

json correlation_to_json(const CorrelationMatrix& m);

}  // namespace stresslab
