#include "stresslab/stimulus.hpp"

#include "stresslab/error.hpp"
#include "stresslab/io.hpp"
#include "stresslab/rng.hpp"
#include "stresslab/stress.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <set>
#include <thread>

namespace stresslab {

namespace fs = std::filesystem;

void HillClimbConfig::validate() const {
    if (!(target_ksm >= 0.0 && target_ksm <= 1.0)) throw InvalidArgument("target KSM must lie in [0, 1]");
    if (!(tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");
    if (!(initial_radius > 0.0)) throw InvalidArgument("initial radius must be positive");
    if (!(min_radius > 0.0) || min_radius > initial_radius)
        throw InvalidArgument("minimum radius must be positive and no larger than the initial radius");
    if (max_iterations <= 0) throw InvalidArgument("max_iterations must be positive");
}

double HillClimbConfig::radius_at(long iteration) const noexcept {
    const double frac = static_cast<double>(iteration) / static_cast<double>(max_iterations);
    return std::max(min_radius, initial_radius * (1.0 - frac));
}

namespace {

constexpr int kCandidateTries = 64;

// Uniform sample from the disc of `radius` around `centre` clipped to [0,1]^2.
std::optional<Point> sample_in_disc(Rng& rng, const Point& centre, double radius) {
    for (int t = 0; t < kCandidateTries; ++t) {
        const double dx = rng.uniform(-radius, radius);
        const double dy = rng.uniform(-radius, radius);
        if (dx * dx + dy * dy > radius * radius) continue;
        const Point p{centre.x + dx, centre.y + dy};
        if (p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0) continue;
        return p;
    }
    return std::nullopt;
}

}  // namespace

HillClimbResult hill_climb(std::shared_ptr<const Graph> graph, const HillClimbConfig& config, std::string graph_id) {
    config.validate();
    if (!graph) throw InvalidArgument("hill_climb requires a graph");
    const int n = graph->node_count();
    if (n < 2) throw InvalidArgument("hill_climb requires at least two nodes");

    Rng rng(config.seed);
    std::vector<Point> pos(n);
    for (auto& p : pos) p = {rng.uniform(), rng.uniform()};

    KruskalEvaluator evaluator(*graph);
    double current_ksm = evaluator.ksm(pos);
    double current_eval = std::abs(current_ksm - config.target_ksm);

    HillClimbResult result{Drawing(graph, pos, graph_id), current_ksm, 0, 0, {}};
    if (config.record_trace) result.trace.push_back(current_eval);

    long iteration = 0;
    while (current_eval > config.tolerance) {
        if (iteration >= config.max_iterations)
            throw NonConvergenceError(fmt::format("hill climb did not reach KSM {:.2f} +/- {} in {} iterations "
                                                  "(closest {:.4f})",
                                                  config.target_ksm, config.tolerance, iteration, current_ksm),
                                      current_ksm, iteration);
        const double radius = config.radius_at(iteration);
        const int node = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        const auto candidate = sample_in_disc(rng, pos[node], radius);
        if (!candidate) continue;  // pick another node; no evaluation spent

        ++iteration;
        const Point previous = pos[node];
        pos[node] = *candidate;
        const double candidate_ksm = evaluator.ksm(pos);
        const double candidate_eval = std::abs(candidate_ksm - config.target_ksm);
        if (candidate_eval < current_eval) {
            current_ksm = candidate_ksm;
            current_eval = candidate_eval;
            ++result.accepted;
            if (config.record_trace) result.trace.push_back(current_eval);
        } else {
            pos[node] = previous;
        }
    }

    result.drawing = Drawing(std::move(graph), std::move(pos), std::move(graph_id));
    result.drawing.set_cached_ksm(current_ksm);
    result.ksm = current_ksm;
    result.iterations = iteration;
    return result;
}

double target_for_level(int level) {
    if (level < 0 || level >= kLevelsPerSet) throw InvalidArgument(fmt::format("KSM level {} out of range", level));
    return kLowestTarget + kTargetStep * level;
}

std::string level_label(int level) { return fmt::format("{:.2f}", target_for_level(level)); }
std::string graph_label(int index) { return fmt::format("g{}", index); }
std::string set_label(int index) { return fmt::format("s{}", index); }

std::string DrawingKey::graph_ref() const { return fmt::format("{}/{}", size, graph_label(graph)); }

std::string DrawingKey::ref() const {
    return fmt::format("{}/{}/{}/{}", size, graph_label(graph), set_label(set), level_label(level));
}

namespace {

int parse_prefixed_index(const std::string& text, char prefix, int limit) {
    if (text.size() < 2 || text[0] != prefix) throw InvalidArgument(fmt::format("bad corpus component '{}'", text));
    int value = 0;
    for (std::size_t k = 1; k < text.size(); ++k) {
        if (text[k] < '0' || text[k] > '9') throw InvalidArgument(fmt::format("bad corpus component '{}'", text));
        value = value * 10 + (text[k] - '0');
        if (value >= limit) throw InvalidArgument(fmt::format("corpus component '{}' out of range", text));
    }
    return value;
}

int parse_level(const std::string& text) {
    for (int level = 0; level < kLevelsPerSet; ++level)
        if (level_label(level) == text) return level;
    throw InvalidArgument(fmt::format("'{}' is not a KSM target on the 0.05 grid", text));
}

int parse_size(const std::string& text) {
    if (text.empty() || text.size() > 6 || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw InvalidArgument(fmt::format("bad graph size '{}'", text));
    return std::stoi(text);
}

}  // namespace

DrawingKey parse_drawing_ref(const std::string& ref) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto slash = ref.find('/', start);
        parts.push_back(ref.substr(start, slash - start));
        if (slash == std::string::npos) break;
        start = slash + 1;
    }
    if (parts.size() != 4) throw InvalidArgument(fmt::format("drawing ref '{}' must have four components", ref));
    return {parse_size(parts[0]), parse_prefixed_index(parts[1], 'g', kGraphsPerSize),
            parse_prefixed_index(parts[2], 's', kSetsPerGraph), parse_level(parts[3])};
}

std::uint64_t graph_seed(std::uint64_t corpus_seed, int size, int graph) {
    return Rng(corpus_seed).split({hash_label("graph"), static_cast<std::uint64_t>(size), static_cast<std::uint64_t>(graph)}).key();
}

std::uint64_t drawing_seed(std::uint64_t corpus_seed, const DrawingKey& key) {
    return Rng(corpus_seed)
        .split({hash_label("drawing"), static_cast<std::uint64_t>(key.size), static_cast<std::uint64_t>(key.graph),
                static_cast<std::uint64_t>(key.set), static_cast<std::uint64_t>(key.level)})
        .key();
}

namespace {

json entry_to_json(const ManifestEntry& e) {
    return {{"ref", e.ref},           {"target", e.target},         {"ksm", e.ksm},
            {"seed", e.seed},         {"iterations", e.iterations}, {"restarts", e.restarts},
            {"wall_time_s", e.wall_time_s}};
}

ManifestEntry entry_from_json(const json& j) {
    return {j.at("ref").get<std::string>(), j.at("target").get<double>(),    j.at("ksm").get<double>(),
            j.at("seed").get<std::uint64_t>(), j.at("iterations").get<long>(), j.at("restarts").get<int>(),
            j.at("wall_time_s").get<double>()};
}

struct DrawingTask {
    DrawingKey key;
    std::shared_ptr<const Graph> graph;
};

}  // namespace

CorpusSummary build_corpus(const fs::path& out_dir, const CorpusOptions& options) {
    if (options.restarts < 0) throw InvalidArgument("restart budget must be non-negative");
    options.climb.validate();
    std::set<int> sizes(options.sizes.begin(), options.sizes.end());
    for (int size : sizes)
        if (size < 2) throw InvalidArgument(fmt::format("graph size {} is too small", size));

    fs::create_directories(out_dir);
    const fs::path manifest_path = out_dir / "manifest.json";

    std::map<std::string, ManifestEntry> previous;
    if (fs::exists(manifest_path)) {
        try {
            const json old_manifest = read_json_file(manifest_path);
            for (const auto& e : old_manifest.at("drawings")) {
                auto entry = entry_from_json(e);
                previous.emplace(entry.ref, entry);
            }
        } catch (const std::exception&) {
            previous.clear();  // unreadable manifest: rebuild entries from scratch
        }
    }

    json graph_entries = json::array();
    json probabilities = json::object();
    std::vector<DrawingTask> tasks;
    CorpusSummary summary;
    std::mutex mutex;

    for (int size : sizes) {
        const double p = options.edge_probability.value_or(default_edge_probability(size));
        probabilities[std::to_string(size)] = p;
        for (int g = 0; g < kGraphsPerSize; ++g) {
            const DrawingKey gkey{size, g, 0, 0};
            const fs::path graph_path = out_dir / gkey.graph_ref() / "graph.json";
            const std::uint64_t seed = graph_seed(options.seed, size, g);
            std::shared_ptr<const Graph> graph;
            if (fs::exists(graph_path))
                graph = std::make_shared<Graph>(graph_from_json(read_json_file(graph_path)));
            else {
                graph = std::make_shared<Graph>(generate_graph(size, p, seed));
                write_json_file_atomic(graph_path, graph_to_json(*graph));
            }
            graph_entries.push_back({{"ref", gkey.graph_ref()},
                                     {"seed", seed},
                                     {"n", graph->node_count()},
                                     {"m", graph->edge_count()}});

            for (int s = 0; s < kSetsPerGraph; ++s) {
                for (int level = 0; level < kLevelsPerSet; ++level) {
                    const DrawingKey key{size, g, s, level};
                    const fs::path path = out_dir / (key.ref() + ".json");
                    bool reusable = false;
                    if (fs::exists(path)) {
                        try {
                            Drawing d = drawing_from_json(read_json_file(path), graph);
                            const double k = ksm(d);
                            reusable = std::abs(k - target_for_level(level)) <= options.climb.tolerance;
                            if (reusable) {
                                auto it = previous.find(key.ref());
                                ManifestEntry entry = it != previous.end()
                                                          ? it->second
                                                          : ManifestEntry{key.ref(), target_for_level(level), k,
                                                                          drawing_seed(options.seed, key), 0, 0, 0.0};
                                entry.ksm = k;
                                summary.entries.push_back(entry);
                                ++summary.reused;
                                if (options.on_progress) options.on_progress(key, k, true);
                            }
                        } catch (const Error&) {
                            reusable = false;
                        }
                    }
                    if (!reusable) tasks.push_back({key, graph});
                }
            }
        }
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    auto worker = [&] {
        while (true) {
            const std::size_t k = next.fetch_add(1);
            if (k >= tasks.size()) return;
            {
                std::lock_guard lock(mutex);
                if (failure) return;
            }
            const auto& task = tasks[k];
            const auto started = std::chrono::steady_clock::now();
            HillClimbConfig config = options.climb;
            config.target_ksm = target_for_level(task.key.level);
            config.record_trace = false;
            const std::uint64_t base_seed = drawing_seed(options.seed, task.key);
            try {
                for (int attempt = 0;; ++attempt) {
                    config.seed = attempt == 0 ? base_seed : mix64(base_seed + static_cast<std::uint64_t>(attempt));
                    try {
                        auto result = hill_climb(task.graph, config, task.key.graph_ref());
                        write_json_file_atomic(out_dir / (task.key.ref() + ".json"), drawing_to_json(result.drawing));
                        const double wall =
                            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
                        std::lock_guard lock(mutex);
                        summary.entries.push_back({task.key.ref(), config.target_ksm, result.ksm, config.seed,
                                                   result.iterations, attempt, wall});
                        ++summary.generated;
                        if (options.on_progress) options.on_progress(task.key, result.ksm, false);
                        break;
                    } catch (const NonConvergenceError& e) {
                        if (attempt >= options.restarts)
                            throw NonConvergenceError(
                                fmt::format("{}: {} after {} restarts", task.key.ref(), e.what(), options.restarts),
                                e.best_ksm(), e.iterations());
                    }
                }
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(std::max<std::size_t>(tasks.size(), 1))));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    }

    std::sort(summary.entries.begin(), summary.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return parse_drawing_ref(a.ref) < parse_drawing_ref(b.ref); });

    json drawings = json::array();
    for (const auto& e : summary.entries) drawings.push_back(entry_to_json(e));
    json manifest{{"v", 1},
                  {"seed", options.seed},
                  {"sizes", std::vector<int>(sizes.begin(), sizes.end())},
                  {"edge_probability", probabilities},
                  {"tolerance", options.climb.tolerance},
                  {"max_iterations", options.climb.max_iterations},
                  {"restart_budget", options.restarts},
                  {"graphs", graph_entries},
                  {"drawings", drawings},
                  {"nondeterministic_fields", {"drawings[].wall_time_s"}}};
    write_json_file_atomic(manifest_path, manifest);

    if (failure) std::rethrow_exception(failure);
    return summary;
}

Corpus Corpus::load(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw NotFoundError(fmt::format("corpus directory {} not found", dir.string()));
    Corpus corpus;
    for (const auto& size_entry : fs::directory_iterator(dir)) {
        if (!size_entry.is_directory()) continue;
        int size;
        try {
            size = parse_size(size_entry.path().filename().string());
        } catch (const InvalidArgument&) {
            continue;
        }
        for (const auto& graph_entry : fs::directory_iterator(size_entry.path())) {
            if (!graph_entry.is_directory() || !fs::exists(graph_entry.path() / "graph.json")) continue;
            const int g = parse_prefixed_index(graph_entry.path().filename().string(), 'g', kGraphsPerSize);
            auto graph = std::make_shared<const Graph>(graph_from_json(read_json_file(graph_entry.path() / "graph.json")));
            if (graph->node_count() != size)
                throw InvalidArgument(fmt::format("{} has {} nodes, expected {}", graph_entry.path().string(),
                                                  graph->node_count(), size));
            corpus.graphs_.emplace(std::pair{size, g}, graph);
            for (const auto& set_entry : fs::directory_iterator(graph_entry.path())) {
                if (!set_entry.is_directory()) continue;
                const int s = parse_prefixed_index(set_entry.path().filename().string(), 's', kSetsPerGraph);
                for (const auto& file : fs::directory_iterator(set_entry.path())) {
                    if (file.path().extension() != ".json") continue;
                    const DrawingKey key{size, g, s, parse_level(file.path().stem().string())};
                    corpus.drawings_.emplace(key, drawing_from_json(read_json_file(file.path()), graph));
                }
            }
        }
    }
    return corpus;
}

std::vector<int> Corpus::sizes() const {
    std::set<int> out;
    for (const auto& [key, graph] : graphs_) out.insert(key.first);
    return {out.begin(), out.end()};
}

std::shared_ptr<const Graph> Corpus::graph(int size, int graph_index) const {
    auto it = graphs_.find({size, graph_index});
    return it == graphs_.end() ? nullptr : it->second;
}

const Drawing* Corpus::find(const DrawingKey& key) const {
    auto it = drawings_.find(key);
    return it == drawings_.end() ? nullptr : &it->second;
}

StimulusCatalog Corpus::catalog() const {
    StimulusCatalog out;
    for (const auto& [key, drawing] : drawings_) out.emplace(key, drawing.cached_ksm().value_or(ksm(drawing)));
    return out;
}

}  // namespace stresslab
