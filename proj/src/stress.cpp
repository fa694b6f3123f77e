#include "stresslab/stress.hpp"

#include "stresslab/error.hpp"

#include <algorithm>
#include <cmath>

namespace stresslab {

namespace {

constexpr double kCoincidentTolerance = 1e-12;

// Pool adjacent violators on `values`, writing block means into `out`.
// Block storage is passed in so the hot loop can reuse allocations.
void pava(std::span<const double> values, std::span<double> out, std::vector<double>& sums,
          std::vector<std::size_t>& counts) {
    sums.clear();
    counts.clear();
    for (double v : values) {
        double sum = v;
        std::size_t count = 1;
        // Merge while the previous block's mean exceeds the new block's mean.
        while (!sums.empty() && sums.back() * static_cast<double>(count) > sum * static_cast<double>(counts.back())) {
            sum += sums.back();
            count += counts.back();
            sums.pop_back();
            counts.pop_back();
        }
        sums.push_back(sum);
        counts.push_back(count);
    }
    std::size_t k = 0;
    for (std::size_t b = 0; b < sums.size(); ++b) {
        const double mean = sums[b] / static_cast<double>(counts[b]);
        for (std::size_t c = 0; c < counts[b]; ++c) out[k++] = mean;
    }
}

}  // namespace

std::vector<ShepardPoint> shepard_points(const Drawing& drawing) {
    const int n = drawing.node_count();
    const auto pos = drawing.positions();
    const auto& g = drawing.graph();
    std::vector<ShepardPoint> points;
    points.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) points.push_back({distance(pos[i], pos[j]), g.distance(i, j), i, j});
    std::sort(points.begin(), points.end(), [](const ShepardPoint& a, const ShepardPoint& b) {
        if (a.input != b.input) return a.input < b.input;
        if (a.drawn != b.drawn) return a.drawn < b.drawn;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    return points;
}

std::vector<double> isotonic_fit(std::span<const double> values) {
    if (values.empty()) throw InvalidArgument("isotonic_fit requires at least one value");
    std::vector<double> out(values.size());
    std::vector<double> sums;
    std::vector<std::size_t> counts;
    pava(values, out, sums, counts);
    return out;
}

std::vector<double> isotonic_fit(std::span<const ShepardPoint> sorted_points) {
    std::vector<double> drawn;
    drawn.reserve(sorted_points.size());
    for (const auto& p : sorted_points) drawn.push_back(p.drawn);
    return isotonic_fit(drawn);
}

double metric_stress(const Drawing& drawing) {
    const int n = drawing.node_count();
    const auto pos = drawing.positions();
    const auto& g = drawing.graph();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = g.distance(i, j);
            const double diff = distance(pos[i], pos[j]) - d;
            total += diff * diff / (d * d);
        }
    }
    return total;
}

double optimal_metric_scale(const Drawing& drawing) {
    // d/ds sum (s x - d)^2 / d^2 = 0  =>  s = sum(x/d) / sum(x^2/d^2)
    const int n = drawing.node_count();
    const auto pos = drawing.positions();
    const auto& g = drawing.graph();
    double numerator = 0.0;
    double denominator = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = g.distance(i, j);
            const double x = distance(pos[i], pos[j]);
            numerator += x / d;
            denominator += x * x / (d * d);
        }
    }
    if (!(denominator > kCoincidentTolerance * kCoincidentTolerance))
        throw DegenerateDrawingError("all nodes coincide; optimal scale is undefined");
    return numerator / denominator;
}

double normalized_metric_stress(const Drawing& drawing) {
    const double s = optimal_metric_scale(drawing);
    const int n = drawing.node_count();
    const auto pos = drawing.positions();
    const auto& g = drawing.graph();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = g.distance(i, j);
            const double diff = s * distance(pos[i], pos[j]) - d;
            total += diff * diff / (d * d);
        }
    }
    return total / (static_cast<double>(n) * (n - 1) / 2.0);
}

KruskalEvaluator::KruskalEvaluator(const Graph& graph) : n_(graph.node_count()) {
    int max_distance = 0;
    for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j) max_distance = std::max(max_distance, graph.distance(i, j));
    std::vector<std::vector<Pair>> buckets(max_distance + 1);
    for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j) buckets[graph.distance(i, j)].push_back({i, j});
    for (const auto& bucket : buckets) {
        if (bucket.empty()) continue;
        pairs_.insert(pairs_.end(), bucket.begin(), bucket.end());
        bucket_ends_.push_back(pairs_.size());
    }
    drawn_.resize(pairs_.size());
    fitted_.resize(pairs_.size());
    block_sum_.reserve(pairs_.size());
    block_count_.reserve(pairs_.size());
}

double KruskalEvaluator::stress(std::span<const Point> positions) {
    if (static_cast<int>(positions.size()) != n_)
        throw InvalidArgument("position count does not match the evaluator's graph");
    if (pairs_.empty()) throw DegenerateDrawingError("a single node has no pairwise distances");

    double max_drawn = 0.0;
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
        drawn_[k] = distance(positions[pairs_[k].i], positions[pairs_[k].j]);
        max_drawn = std::max(max_drawn, drawn_[k]);
    }
    if (max_drawn < kCoincidentTolerance) throw DegenerateDrawingError("all nodes coincide; Kruskal stress is undefined");

    std::size_t begin = 0;
    for (std::size_t end : bucket_ends_) {
        std::sort(drawn_.begin() + static_cast<std::ptrdiff_t>(begin), drawn_.begin() + static_cast<std::ptrdiff_t>(end));
        begin = end;
    }

    pava(drawn_, fitted_, block_sum_, block_count_);

    double residual = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < drawn_.size(); ++k) {
        const double diff = drawn_[k] - fitted_[k];
        residual += diff * diff;
        total += drawn_[k] * drawn_[k];
    }
    return std::sqrt(residual / total);
}

double kruskal_stress(const Drawing& drawing) {
    KruskalEvaluator evaluator(drawing.graph());
    return evaluator.stress(drawing.positions());
}

double ksm(const Drawing& drawing) { return 1.0 - kruskal_stress(drawing); }

}  // namespace stresslab
