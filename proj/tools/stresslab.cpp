// Command-line entry point: stimulus generation, scoring, scheduling, analysis and the session service.

#include "stresslab/error.hpp"
#include "stresslab/experiment.hpp"
#include "stresslab/io.hpp"
#include "stresslab/quality.hpp"
#include "stresslab/session.hpp"
#include "stresslab/stimulus.hpp"
#include "stresslab/stress.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace stresslab;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    int verbosity = 0;
};

std::uint64_t require_seed(const Globals& g) {
    if (g.seed) return *g.seed;
    if (const char* env = std::getenv("STRESSLAB_SEED")) {
        try {
            std::size_t used = 0;
            const auto value = std::stoull(env, &used);
            if (used == std::string(env).size()) return value;
        } catch (const std::exception&) {
        }
        throw CLI::ValidationError("STRESSLAB_SEED", "must be an unsigned integer");
    }
    throw CLI::RequiredError("--seed (or STRESSLAB_SEED)");
}

std::vector<int> parse_sizes(const std::string& text) {
    std::vector<int> sizes;
    if (text.empty()) return sizes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            sizes.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw CLI::ValidationError("--sizes", fmt::format("'{}' is not an integer", item));
        }
    }
    return sizes;
}

std::vector<SessionLog> load_logs(const fs::path& source) {
    if (fs::is_regular_file(source) && source.extension() == ".tar") return read_study_archive(read_text_file(source));
    if (fs::is_regular_file(source)) return {read_session_log(source)};
    return read_session_logs(source);
}

// Runs fn(i) for i in [0, count) across `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

int run(int argc, char** argv, bool stimgen_alias) {
    CLI::App app{"Graph drawing stress metrics, stimulus generation and stress-perception experiments"};
    app.require_subcommand(stimgen_alias ? 0 : 1);
    app.fallthrough();
    Globals globals;
    app.add_option("--seed", globals.seed, "RNG seed (falls back to STRESSLAB_SEED)");
    app.add_flag("-v,--verbose", globals.verbosity, "More output on stderr");

    // gen-graphs
    auto* gen_graphs = app.add_subcommand("gen-graphs", "Sample connected Erdos-Renyi graphs with m < 2n");
    std::string graph_sizes = "10,25,50";
    int graph_count = kGraphsPerSize;
    std::optional<double> graph_p;
    fs::path graph_out = "graphs";
    gen_graphs->add_option("--sizes", graph_sizes, "Comma-separated node counts")->capture_default_str();
    gen_graphs->add_option("--count", graph_count, "Graphs per size")->capture_default_str()->check(CLI::PositiveNumber);
    gen_graphs->add_option("--p", graph_p, "Edge probability (default 3/(n-1))")->check(CLI::Range(0.0, 1.0));
    gen_graphs->add_option("--out", graph_out, "Output directory")->capture_default_str();

    // gen-stimuli
    auto* gen_stimuli = stimgen_alias ? &app : app.add_subcommand("gen-stimuli", "Build the hill-climbed stimulus corpus");
    std::string stim_sizes = "10,25,50";
    fs::path stim_out = "corpus";
    CorpusOptions corpus_options;
    gen_stimuli->add_option("--sizes", stim_sizes, "Comma-separated node counts")->capture_default_str();
    gen_stimuli->add_option("--out", stim_out, "Corpus directory")->capture_default_str();
    gen_stimuli->add_option("--jobs", corpus_options.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    gen_stimuli->add_option("--restarts", corpus_options.restarts, "Restarts per drawing after a failed climb")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    gen_stimuli->add_option("--max-iterations", corpus_options.climb.max_iterations, "Hill-climb iteration cap")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    gen_stimuli->add_option("--tolerance", corpus_options.climb.tolerance, "Allowed |KSM - target|")
        ->capture_default_str();
    gen_stimuli->add_option("--p", corpus_options.edge_probability, "Edge probability (default 3/(n-1))")
        ->check(CLI::Range(0.0, 1.0));

    // score
    auto* score = app.add_subcommand("score", "Compute the metric report of every drawing in a corpus");
    fs::path score_corpus, score_out = "report.jsonl";
    int score_jobs = 1;
    score->add_option("corpus", score_corpus, "Corpus directory")->required();
    score->add_option("--out", score_out, "Report path (JSONL)")->capture_default_str();
    score->add_option("--jobs", score_jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

    // correlate
    auto* correlate = app.add_subcommand("correlate", "Pearson correlation matrix over a metric report");
    fs::path corr_report, corr_out = "correlations.json";
    std::vector<std::string> corr_metrics{"ksm", "average_node_distance", "node_uniformity", "edge_crossings",
                                          "average_edge_length"};
    correlate->add_option("report", corr_report, "Metric report (JSONL)")->required();
    correlate->add_option("--out", corr_out, "Output JSON")->capture_default_str();
    correlate->add_option("--metrics", corr_metrics, "Metric columns")->delimiter(',')->capture_default_str();

    // schedule
    auto* schedule = app.add_subcommand("schedule", "Print the trial plan for one participant");
    fs::path sched_corpus = "corpus", sched_out;
    SessionConfig sched_config;
    std::string sched_mode = "trained-feedback";
    schedule->add_option("--corpus", sched_corpus, "Corpus directory")->capture_default_str();
    schedule->add_option("--mode", sched_mode, "trained-feedback | untrained | expert")
        ->capture_default_str()
        ->check(CLI::IsMember({"trained-feedback", "trained", "untrained", "expert"}));
    schedule->add_option("--size", sched_config.size, "Graph size")->capture_default_str();
    schedule->add_option("--participant", sched_config.participant_id, "Participant id")->required();
    schedule->add_option("--out", sched_out, "Output JSON (stdout when omitted)");

    // grade
    auto* grade_cmd = app.add_subcommand("grade", "Grade a session log");
    fs::path grade_log, grade_out;
    grade_cmd->add_option("log", grade_log, "Session log (JSONL)")->required()->check(CLI::ExistingFile);
    grade_cmd->add_option("--out", grade_out, "Graded trials (JSONL)");

    // aggregate
    auto* aggregate_cmd = app.add_subcommand("aggregate", "Per-delta accuracy, confidence and time table");
    fs::path agg_source, agg_out = "aggregate.csv", agg_audit;
    std::string agg_group;
    double agg_threshold = kOutlierThresholdSeconds;
    aggregate_cmd->add_option("source", agg_source, "Study directory, session log, or exported .tar")->required();
    aggregate_cmd->add_option("--group", agg_group, "trained | untrained | expert (all modes when omitted)")
        ->check(CLI::IsMember({"trained-feedback", "trained", "untrained", "expert"}));
    aggregate_cmd->add_option("--threshold", agg_threshold, "Response-time outlier threshold in seconds")
        ->capture_default_str();
    aggregate_cmd->add_option("--out", agg_out, "Output CSV")->capture_default_str();
    aggregate_cmd->add_option("--audit", agg_audit, "Write outlier replacements here (JSON)");

    // plot
    auto* plot = app.add_subcommand("plot", "Per-delta line charts from an aggregate CSV");
    fs::path plot_csv, plot_out = "plots";
    plot->add_option("csv", plot_csv, "Aggregate CSV")->required()->check(CLI::ExistingFile);
    plot->add_option("--out", plot_out, "Output directory")->capture_default_str();

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    fs::path serve_corpus = "corpus", serve_data = "data";
    std::string serve_host = "127.0.0.1";
    int serve_port = 8080;
    serve->add_option("--corpus", serve_corpus, "Corpus directory")->capture_default_str();
    serve->add_option("--data", serve_data, "Session data directory")->capture_default_str();
    serve->add_option("--host", serve_host, "Bind address")->capture_default_str();
    serve->add_option("--port", serve_port, "Port")->capture_default_str()->check(CLI::Range(1, 65535));

    // export
    auto* export_cmd = app.add_subcommand("export", "Archive a study's session logs");
    fs::path export_data = "data", export_out;
    std::string export_study = "default";
    export_cmd->add_option("--data", export_data, "Session data directory")->capture_default_str();
    export_cmd->add_option("--study", export_study, "Study id")->capture_default_str();
    export_cmd->add_option("--out", export_out, "Archive path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen_graphs) {
            const std::uint64_t seed = require_seed(globals);
            for (int size : parse_sizes(graph_sizes)) {
                const double p = graph_p.value_or(default_edge_probability(size));
                for (int g = 0; g < graph_count; ++g) {
                    const auto graph = generate_graph(size, p, graph_seed(seed, size, g));
                    const fs::path path = graph_out / std::to_string(size) / fmt::format("g{}.json", g);
                    write_json_file_atomic(path, graph_to_json(graph));
                    std::cout << fmt::format("{}: n={} m={}\n", path.string(), graph.node_count(), graph.edge_count());
                }
            }
            write_json_file_atomic(graph_out / "manifest.json",
                                   json{{"v", 1}, {"seed", seed}, {"sizes", parse_sizes(graph_sizes)}, {"count", graph_count}});
        } else if (stimgen_alias || *gen_stimuli) {
            corpus_options.seed = require_seed(globals);
            corpus_options.sizes = parse_sizes(stim_sizes);
            std::mutex out_mutex;
            if (globals.verbosity > 0)
                corpus_options.on_progress = [&](const DrawingKey& key, double k, bool reused) {
                    std::lock_guard lock(out_mutex);
                    std::cerr << fmt::format("{} ksm={:.4f}{}\n", key.ref(), k, reused ? " (kept)" : "");
                };
            const auto summary = build_corpus(stim_out, corpus_options);
            double worst = 0.0;
            for (const auto& e : summary.entries) worst = std::max(worst, std::abs(e.ksm - e.target));
            std::cout << fmt::format("{} drawings ({} generated, {} kept) in {}; max |ksm - target| = {:.4f}; seed {}\n",
                                     summary.entries.size(), summary.generated, summary.reused, stim_out.string(), worst,
                                     corpus_options.seed);
        } else if (*score) {
            const Corpus corpus = Corpus::load(score_corpus);
            std::vector<const std::pair<const DrawingKey, Drawing>*> items;
            for (const auto& item : corpus.drawings()) items.push_back(&item);
            std::vector<MetricReport> rows(items.size());
            parallel_for(items.size(), score_jobs, [&](std::size_t i) {
                rows[i] = score_drawing(items[i]->second, items[i]->first.ref());
                rows[i].target = target_for_level(items[i]->first.level);
            });
            std::string text;
            for (const auto& r : rows) text += report_to_json(r).dump() + "\n";
            write_text_file_atomic(score_out, text);
            std::cout << fmt::format("scored {} drawings -> {}\n", rows.size(), score_out.string());
        } else if (*correlate) {
            std::vector<MetricReport> rows;
            std::istringstream in(read_text_file(corr_report));
            for (std::string line; std::getline(in, line);)
                if (!line.empty()) rows.push_back(report_from_json(json::parse(line)));
            const auto matrix = correlation_matrix(rows, corr_metrics);
            write_json_file_atomic(corr_out, correlation_to_json(matrix));
            std::cout << fmt::format("{} drawings\n", rows.size());
            for (const auto& name : corr_metrics) {
                if (name == corr_metrics.front()) continue;
                const auto r = matrix.at(corr_metrics.front(), name);
                std::cout << fmt::format("{} vs {}: {}\n", corr_metrics.front(), name,
                                         r ? fmt::format("{:+.3f}", *r) : std::string("undefined"));
            }
        } else if (*schedule) {
            sched_config.seed = require_seed(globals);
            sched_config.mode = parse_mode(sched_mode);
            const auto catalog = Corpus::load(sched_corpus).catalog();
            const auto plans = schedule_session(sched_config, catalog);
            const std::string text = log_header_json("", sched_config, plans).dump(2) + "\n";
            if (sched_out.empty())
                std::cout << text;
            else
                write_text_file_atomic(sched_out, text);
        } else if (*grade_cmd) {
            const SessionLog log = read_session_log(grade_log);
            const auto graded = log.graded();
            std::string text;
            std::vector<GradedTrial> training;
            int main_total = 0, main_correct = 0;
            for (const auto& t : graded) {
                text += json{{"trial_index", t.plan.trial_index},
                             {"kind", to_string(t.plan.kind)},
                             {"size", t.plan.size},
                             {"delta", t.plan.delta()},
                             {"answer", to_string(t.response.answer)},
                             {"correct_answer", to_string(t.plan.correct_answer)},
                             {"correct", t.correct}}
                            .dump() +
                        "\n";
                if (t.plan.kind == TrialKind::Training)
                    training.push_back(t);
                else {
                    ++main_total;
                    main_correct += t.correct ? 1 : 0;
                }
            }
            if (!grade_out.empty()) write_text_file_atomic(grade_out, text);
            std::cout << fmt::format("participant {}: {}/{} main trials correct\n", log.config.participant_id,
                                     main_correct, main_total);
            if (static_cast<int>(training.size()) == kTrainingTrials && log.config.mode == Mode::TrainedFeedback)
                std::cout << fmt::format("training gate: {}\n", training_gate(training) ? "passed" : "failed");
        } else if (*aggregate_cmd) {
            auto logs = load_logs(agg_source);
            std::vector<GroupDeltaRow> rows;
            json audit = json::array();
            std::vector<std::pair<std::string, Mode>> groups;
            if (agg_group.empty())
                groups = {{"trained", Mode::TrainedFeedback}, {"untrained", Mode::Untrained}, {"expert", Mode::Expert}};
            else
                groups = {{agg_group, parse_mode(agg_group)}};
            for (const auto& [label, mode] : groups) {
                std::vector<SessionLog> members;
                for (const auto& log : logs)
                    if (log.config.mode == mode && log.config.total_trials() == static_cast<int>(log.responses.size()))
                        members.push_back(log);
                if (members.empty()) continue;
                auto cleaned = replace_outliers(std::move(members), agg_threshold);
                for (const auto& a : cleaned.audit)
                    audit.push_back({{"group", label},
                                     {"participant_id", a.participant_id},
                                     {"trial_index", a.trial_index},
                                     {"original", a.original},
                                     {"replacement", a.replacement}});
                const auto table = aggregate(cleaned.logs, label);
                rows.insert(rows.end(), table.group.begin(), table.group.end());
                std::cout << fmt::format("{}: {} participants, {} outliers replaced\n", label, cleaned.logs.size(),
                                         cleaned.audit.size());
            }
            write_text_file_atomic(agg_out, aggregate_csv(rows));
            if (!agg_audit.empty()) write_json_file_atomic(agg_audit, audit);
        } else if (*plot) {
            const auto rows = parse_aggregate_csv(read_text_file(plot_csv));
            for (auto q : {PlotQuantity::Accuracy, PlotQuantity::Time, PlotQuantity::Confidence}) {
                const fs::path path = plot_out / fmt::format("{}.svg", to_string(q));
                write_text_file_atomic(path, plot_svg(rows, q));
                std::cout << path.string() << "\n";
            }
        } else if (*serve) {
            auto corpus = std::make_shared<const Corpus>(Corpus::load(serve_corpus));
            SessionService service(corpus, ServiceOptions{serve_data, {}, {}});
            httplib::Server server;
            register_routes(server, service);
            std::cout << fmt::format("serving {} sessions on http://{}:{}\n", service.session_count(), serve_host,
                                     serve_port)
                      << std::flush;
            if (!server.listen(serve_host, serve_port))
                throw Error(fmt::format("cannot listen on {}:{}", serve_host, serve_port));
        } else if (*export_cmd) {
            write_text_file_atomic(export_out, export_study_archive(export_data, export_study));
            std::cout << export_out.string() << "\n";
        }
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int main(int argc, char** argv) {
#ifdef STRESSLAB_STIMGEN
    return run(argc, argv, true);
#else
    return run(argc, argv, false);
#endif
}
