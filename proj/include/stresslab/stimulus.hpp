#pragma once

#include "stresslab/graph.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace stresslab {

struct HillClimbConfig {
    double target_ksm = 0.6;
    double tolerance = 0.01;
    double initial_radius = std::sqrt(2.0) / 2.0;
    double min_radius = 0.02;
    long max_iterations = 200'000;
    std::uint64_t seed = 0;
    bool record_trace = false;

    /// Throws InvalidArgument when a field is out of range.
    void validate() const;

    /// Linear decay from initial_radius to zero over max_iterations, floored at min_radius.
    double radius_at(long iteration) const noexcept;
};

struct HillClimbResult {
    Drawing drawing;
    double ksm = 0.0;
    long iterations = 0;  // candidate evaluations performed
    long accepted = 0;
    /// |ksm - target| after initialisation and after every accepted move (when record_trace is set).
    std::vector<double> trace;
};

/// Moves one random node at a time inside a shrinking disc (clipped to the unit
/// square) and keeps a move only if it strictly reduces |ksm - target|. Returns as
/// soon as the drawing is within tolerance of the target.
///
/// Throws NonConvergenceError carrying the best KSM reached when max_iterations runs out.
HillClimbResult hill_climb(std::shared_ptr<const Graph> graph, const HillClimbConfig& config,
                           std::string graph_id = {});

// Corpus structure: per size, five graphs, three sets per graph, nine targets per set.
inline constexpr int kGraphsPerSize = 5;
inline constexpr int kSetsPerGraph = 3;
inline constexpr int kLevelsPerSet = 9;
inline constexpr double kLowestTarget = 0.40;
inline constexpr double kTargetStep = 0.05;

/// Target KSM for grid level 0..8 (0.40, 0.45, ..., 0.80).
double target_for_level(int level);
/// "0.40", "0.45", ... as used in file names.
std::string level_label(int level);
std::string graph_label(int index);  // "g0".."g4"
std::string set_label(int index);    // "s0".."s2"

/// Location of one drawing inside a corpus.
struct DrawingKey {
    int size = 0;
    int graph = 0;
    int set = 0;
    int level = 0;

    /// "<size>/<graph-id>/<set-id>/<target>", also the relative path without ".json".
    std::string ref() const;
    /// "<size>/<graph-id>"
    std::string graph_ref() const;
    friend auto operator<=>(const DrawingKey&, const DrawingKey&) = default;
};

/// Parses a ref produced by DrawingKey::ref. Throws InvalidArgument on malformed input.
DrawingKey parse_drawing_ref(const std::string& ref);

struct CorpusOptions {
    std::vector<int> sizes{10, 25, 50};
    std::uint64_t seed = 0;
    /// Edge probability per size; default_edge_probability(n) when unset.
    std::optional<double> edge_probability;
    int restarts = 5;  // extra attempts per drawing after the first
    int jobs = 1;
    HillClimbConfig climb{};  // target and seed are filled per drawing
    /// Called after each drawing completes (from worker threads; must be thread safe).
    std::function<void(const DrawingKey&, double ksm, bool reused)> on_progress;
};

struct ManifestEntry {
    std::string ref;
    double target = 0.0;
    double ksm = 0.0;
    std::uint64_t seed = 0;
    long iterations = 0;
    int restarts = 0;
    double wall_time_s = 0.0;
};

struct CorpusSummary {
    int generated = 0;
    int reused = 0;
    std::vector<ManifestEntry> entries;  // sorted by ref
};

/// Seed used for the hill climb of one drawing (restart 0). Independent of scheduling order.
std::uint64_t drawing_seed(std::uint64_t corpus_seed, const DrawingKey& key);
/// Seed used to generate graph `graph` of a given size.
std::uint64_t graph_seed(std::uint64_t corpus_seed, int size, int graph);

/// Builds (or completes) the stimulus corpus under `out_dir`:
///   <out>/<size>/<graph-id>/graph.json
///   <out>/<size>/<graph-id>/<set-id>/<target>.json
///   <out>/manifest.json
/// Drawings already present and within tolerance are kept; their manifest
/// entries are carried over from the previous manifest.
CorpusSummary build_corpus(const std::filesystem::path& out_dir, const CorpusOptions& options);

}  // namespace stresslab

namespace stresslab {

/// Achieved KSM for every drawing available to the scheduler.
using StimulusCatalog = std::map<DrawingKey, double>;

/// A stimulus corpus loaded from disk.
class Corpus {
public:
    /// Reads every <size>/<graph-id>/graph.json and its drawings under `dir`.
    /// Throws NotFoundError if `dir` does not exist.
    static Corpus load(const std::filesystem::path& dir);

    std::vector<int> sizes() const;
    std::shared_ptr<const Graph> graph(int size, int graph_index) const;
    const Drawing* find(const DrawingKey& key) const;
    const std::map<DrawingKey, Drawing>& drawings() const noexcept { return drawings_; }
    /// Cached KSM of each drawing, recomputed when the file stored none.
    StimulusCatalog catalog() const;

private:
    std::map<std::pair<int, int>, std::shared_ptr<const Graph>> graphs_;
    std::map<DrawingKey, Drawing> drawings_;
};

}  // namespace stresslab
