#include "stresslab/experiment.hpp"

#include "stresslab/error.hpp"
#include "stresslab/rng.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace stresslab {

namespace fs = std::filesystem;

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::TrainedFeedback: return "trained-feedback";
        case Mode::Untrained: return "untrained";
        case Mode::Expert: return "expert";
    }
    return "?";
}

std::string_view to_string(Answer answer) {
    switch (answer) {
        case Answer::Left: return "left";
        case Answer::Same: return "same";
        case Answer::Right: return "right";
    }
    return "?";
}

std::string_view to_string(TrialKind kind) { return kind == TrialKind::Training ? "training" : "main"; }

Mode parse_mode(std::string_view text) {
    if (text == "trained-feedback" || text == "trained") return Mode::TrainedFeedback;
    if (text == "untrained") return Mode::Untrained;
    if (text == "expert") return Mode::Expert;
    throw InvalidArgument(fmt::format("unknown mode '{}'", text));
}

Answer parse_answer(std::string_view text) {
    if (text == "left") return Answer::Left;
    if (text == "same") return Answer::Same;
    if (text == "right") return Answer::Right;
    throw InvalidArgument(fmt::format("unknown answer '{}'", text));
}

TrialKind parse_trial_kind(std::string_view text) {
    if (text == "training") return TrialKind::Training;
    if (text == "main") return TrialKind::Main;
    throw InvalidArgument(fmt::format("unknown trial kind '{}'", text));
}

void SessionConfig::validate() const {
    if (participant_id.empty()) throw InvalidArgument("participant_id is required");
    if (study_id.empty()) throw InvalidArgument("study_id must not be empty");
    if (mode != Mode::Expert && std::find(kExpertSizes.begin(), kExpertSizes.end(), size) == kExpertSizes.end())
        throw InvalidArgument(fmt::format("unsupported graph size {}; expected 10, 25 or 50", size));
}

std::vector<int> SessionConfig::block_sizes() const {
    if (mode == Mode::Expert) return {kExpertSizes.begin(), kExpertSizes.end()};
    return {size};
}

int SessionConfig::total_trials() const {
    const int training = mode == Mode::Expert ? 0 : kTrainingTrials;
    return training + kMainTrialsPerSize * static_cast<int>(block_sizes().size());
}

void ResponseRecord::validate() const {
    if (trial_index <= 0) throw InvalidArgument("trial_index must be positive");
    if (!std::isfinite(response_time) || response_time <= 0.0)
        throw InvalidArgument("response_time must be a positive number of seconds");
}

namespace {

// Sets of one graph that contain a drawing at each level.
using LevelSets = std::array<std::vector<int>, kLevelsPerSet>;

LevelSets level_sets(const StimulusCatalog& catalog, int size, int graph) {
    LevelSets out;
    for (int s = 0; s < kSetsPerGraph; ++s)
        for (int level = 0; level < kLevelsPerSet; ++level)
            if (catalog.contains(DrawingKey{size, graph, s, level})) out[level].push_back(s);
    return out;
}

std::vector<int> graphs_of_size(const StimulusCatalog& catalog, int size) {
    std::vector<int> out;
    for (const auto& [key, ksm] : catalog)
        if (key.size == size && (out.empty() || out.back() != key.graph)) out.push_back(key.graph);
    return out;
}

// Lower endpoints `low` such that (low, low + delta) can be realised.
std::vector<int> admissible_lows(const LevelSets& sets, int delta) {
    std::vector<int> lows;
    for (int low = 0; low + delta < kLevelsPerSet; ++low) {
        const auto& a = sets[low];
        const auto& b = sets[low + delta];
        const bool ok = delta == 0 ? a.size() >= 2 : (!a.empty() && !b.empty());
        if (ok) lows.push_back(low);
    }
    return lows;
}

// Builds a plan for one (graph, delta) cell or throws SchedulingError.
TrialPlan make_trial(Rng& rng, const StimulusCatalog& catalog, const LevelSets& sets, int size, int graph, int delta,
                     TrialKind kind) {
    const auto lows = admissible_lows(sets, delta);
    if (lows.empty())
        throw SchedulingError(fmt::format("corpus has no pair of drawings of {}/{} with KSM difference {:.2f}", size,
                                          graph_label(graph), kTargetStep * delta));
    const int low = lows[rng.below(lows.size())];
    const int high = low + delta;

    int low_set, high_set;
    if (delta == 0) {
        const auto& pool = sets[low];
        const std::size_t first = rng.below(pool.size());
        std::size_t second = rng.below(pool.size() - 1);
        if (second >= first) ++second;
        low_set = pool[first];
        high_set = pool[second];
    } else {
        low_set = sets[low][rng.below(sets[low].size())];
        high_set = sets[high][rng.below(sets[high].size())];
    }

    const DrawingKey low_key{size, graph, low_set, low};
    const DrawingKey high_key{size, graph, high_set, high};
    const StimulusRef low_ref{low_key, catalog.at(low_key)};
    const StimulusRef high_ref{high_key, catalog.at(high_key)};

    TrialPlan plan;
    plan.kind = kind;
    plan.size = size;
    plan.graph = graph;
    plan.delta_steps = delta;
    if (rng.coin()) {
        plan.left = high_ref;
        plan.right = low_ref;
        plan.correct_answer = delta == 0 ? Answer::Same : Answer::Left;
    } else {
        plan.left = low_ref;
        plan.right = high_ref;
        plan.correct_answer = delta == 0 ? Answer::Same : Answer::Right;
    }
    return plan;
}

}  // namespace

std::vector<TrialPlan> schedule_training(const SessionConfig& config, const StimulusCatalog& catalog) {
    config.validate();
    if (config.mode == Mode::Expert) return {};

    const auto graphs = graphs_of_size(catalog, config.size);
    if (graphs.empty()) throw SchedulingError(fmt::format("corpus has no graphs of size {}", config.size));
    std::vector<LevelSets> sets;
    for (int g : graphs) sets.push_back(level_sets(catalog, config.size, g));

    Rng rng = Rng(config.seed).split({hash_label("training"), static_cast<std::uint64_t>(config.size)});
    std::vector<TrialPlan> plans;
    for (int t = 0; t < kTrainingTrials; ++t) {
        const int delta = kLevelsPerSet - 1 - t;  // 0.40 down to 0.00
        std::vector<std::size_t> usable;
        for (std::size_t g = 0; g < graphs.size(); ++g)
            if (!admissible_lows(sets[g], delta).empty()) usable.push_back(g);
        if (usable.empty())
            throw SchedulingError(fmt::format("no size-{} graph has a drawing pair with KSM difference {:.2f}",
                                              config.size, kTargetStep * delta));
        const std::size_t g = usable[rng.below(usable.size())];
        TrialPlan plan = make_trial(rng, catalog, sets[g], config.size, graphs[g], delta, TrialKind::Training);
        plan.trial_index = t + 1;
        plan.feedback = config.mode == Mode::TrainedFeedback;
        plans.push_back(plan);
    }
    return plans;
}

std::vector<TrialPlan> schedule_main(const SessionConfig& config, const StimulusCatalog& catalog, int size,
                                     int first_index) {
    config.validate();
    const auto graphs = graphs_of_size(catalog, size);
    if (static_cast<int>(graphs.size()) != kGraphsPerSize)
        throw SchedulingError(
            fmt::format("corpus has {} graphs of size {}; a main block needs {}", graphs.size(), size, kGraphsPerSize));

    Rng rng = Rng(config.seed).split({hash_label("main"), static_cast<std::uint64_t>(size)});
    std::vector<TrialPlan> plans;
    for (int g : graphs) {
        const auto sets = level_sets(catalog, size, g);
        for (int delta = 0; delta < kLevelsPerSet; ++delta)
            plans.push_back(make_trial(rng, catalog, sets, size, g, delta, TrialKind::Main));
    }
    rng.shuffle(plans);
    for (std::size_t k = 0; k < plans.size(); ++k) plans[k].trial_index = first_index + static_cast<int>(k);
    return plans;
}

std::vector<TrialPlan> schedule_main(const SessionConfig& config, const StimulusCatalog& catalog) {
    return schedule_main(config, catalog, config.size, 1);
}

std::vector<TrialPlan> schedule_session(const SessionConfig& config, const StimulusCatalog& catalog) {
    auto plans = schedule_training(config, catalog);
    for (int size : config.block_sizes()) {
        auto block = schedule_main(config, catalog, size, static_cast<int>(plans.size()) + 1);
        plans.insert(plans.end(), block.begin(), block.end());
    }
    return plans;
}

bool grade(const TrialPlan& plan, const ResponseRecord& response) {
    if (plan.trial_index != response.trial_index)
        throw InvalidArgument(
            fmt::format("response for trial {} graded against plan {}", response.trial_index, plan.trial_index));
    return response.answer == plan.correct_answer;
}

bool training_gate(std::span<const GradedTrial> training) {
    if (static_cast<int>(training.size()) != kTrainingTrials)
        throw InvalidArgument(fmt::format("training gate needs {} trials, got {}", kTrainingTrials, training.size()));
    const auto correct = std::count_if(training.begin(), training.end(), [](const GradedTrial& t) { return t.correct; });
    return correct >= kGatePassCount;
}

std::vector<GradedTrial> SessionLog::graded() const {
    std::map<int, const ResponseRecord*> by_index;
    for (const auto& r : responses) by_index[r.trial_index] = &r;
    std::vector<GradedTrial> out;
    for (const auto& plan : plans) {
        auto it = by_index.find(plan.trial_index);
        if (it == by_index.end()) continue;
        out.push_back({plan, *it->second, grade(plan, *it->second)});
    }
    return out;
}

std::vector<GradedTrial> SessionLog::graded_main() const {
    std::map<int, const ResponseRecord*> by_index;
    for (const auto& r : responses) by_index[r.trial_index] = &r;
    std::vector<int> missing;
    std::vector<GradedTrial> out;
    for (const auto& plan : plans) {
        if (plan.kind != TrialKind::Main) continue;
        auto it = by_index.find(plan.trial_index);
        if (it == by_index.end()) {
            missing.push_back(plan.trial_index);
            continue;
        }
        out.push_back({plan, *it->second, grade(plan, *it->second)});
    }
    if (!missing.empty())
        throw IncompleteLogError(fmt::format("session {} ({}) is missing main trials: {}", session_id,
                                             config.participant_id, fmt::join(missing, ", ")));
    return out;
}

// ---------------------------------------------------------------------------
// Serialisation

json config_to_json(const SessionConfig& config) {
    return {{"size", config.size},
            {"mode", to_string(config.mode)},
            {"seed", config.seed},
            {"participant_id", config.participant_id},
            {"study_id", config.study_id}};
}

SessionConfig config_from_json(const json& j) {
    try {
        SessionConfig c;
        c.mode = parse_mode(j.at("mode").get<std::string>());
        c.size = j.value("size", 10);
        c.seed = j.value("seed", std::uint64_t{0});
        c.participant_id = j.at("participant_id").get<std::string>();
        c.study_id = j.value("study_id", std::string{"default"});
        return c;
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("malformed session config: {}", e.what()));
    }
}

namespace {

json stimulus_to_json(const StimulusRef& s) { return {{"ref", s.key.ref()}, {"ksm", s.ksm}}; }

StimulusRef stimulus_from_json(const json& j) {
    return {parse_drawing_ref(j.at("ref").get<std::string>()), j.at("ksm").get<double>()};
}

}  // namespace

json plan_to_json(const TrialPlan& plan) {
    return {{"trial_index", plan.trial_index},
            {"kind", to_string(plan.kind)},
            {"size", plan.size},
            {"graph_id", graph_label(plan.graph)},
            {"left", stimulus_to_json(plan.left)},
            {"right", stimulus_to_json(plan.right)},
            {"delta", plan.delta()},
            {"delta_steps", plan.delta_steps},
            {"correct_answer", to_string(plan.correct_answer)},
            {"feedback", plan.feedback}};
}

TrialPlan plan_from_json(const json& j) {
    try {
        TrialPlan p;
        p.trial_index = j.at("trial_index").get<int>();
        p.kind = parse_trial_kind(j.at("kind").get<std::string>());
        p.left = stimulus_from_json(j.at("left"));
        p.right = stimulus_from_json(j.at("right"));
        p.size = j.at("size").get<int>();
        p.graph = p.left.key.graph;
        p.delta_steps = j.at("delta_steps").get<int>();
        p.correct_answer = parse_answer(j.at("correct_answer").get<std::string>());
        p.feedback = j.value("feedback", false);
        return p;
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("malformed trial plan: {}", e.what()));
    }
}

json response_to_json(const ResponseRecord& r) {
    json j{{"v", 1},
           {"type", "response"},
           {"trial_index", r.trial_index},
           {"answer", to_string(r.answer)},
           {"confident", r.confident},
           {"response_time", r.response_time}};
    if (r.presented_at) j["presented_at"] = *r.presented_at;
    if (r.received_at) j["received_at"] = *r.received_at;
    return j;
}

ResponseRecord response_from_json(const json& j) {
    try {
        ResponseRecord r;
        r.trial_index = j.at("trial_index").get<int>();
        r.answer = parse_answer(j.at("answer").get<std::string>());
        r.confident = j.at("confident").get<bool>();
        r.response_time = j.at("response_time").get<double>();
        if (auto it = j.find("presented_at"); it != j.end() && it->is_string()) r.presented_at = it->get<std::string>();
        if (auto it = j.find("received_at"); it != j.end() && it->is_string()) r.received_at = it->get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("malformed response record: {}", e.what()));
    }
}

json log_header_json(const std::string& session_id, const SessionConfig& config, std::span<const TrialPlan> plans) {
    json p = json::array();
    for (const auto& plan : plans) p.push_back(plan_to_json(plan));
    return {{"v", 1}, {"type", "header"}, {"session_id", session_id}, {"config", config_to_json(config)}, {"plans", p}};
}

ParsedLog parse_session_log(std::string_view text) {
    ParsedLog out;
    bool have_header = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t newline = text.find('\n', pos);
        const bool last = newline == std::string_view::npos;
        const std::string_view line = text.substr(pos, last ? std::string_view::npos : newline - pos);
        json j;
        bool parsed = !last;
        if (parsed) {
            try {
                j = json::parse(line);
            } catch (const json::exception&) {
                parsed = false;
            }
        }
        if (!parsed) {
            // Only an unterminated final line may be torn; anything else is corruption.
            const bool at_tail = last || text.find_first_not_of(" \t\r\n", newline + 1) == std::string_view::npos;
            if (at_tail && !line.empty()) {
                out.torn_tail = true;
                break;
            }
            if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
                pos = last ? text.size() : newline + 1;
                out.durable_bytes = pos;
                continue;
            }
            throw InvalidArgument(fmt::format("corrupt session log line at byte {}", pos));
        }
        const std::string type = j.value("type", std::string{});
        if (type == "header") {
            if (have_header) throw InvalidArgument("session log has two header lines");
            have_header = true;
            out.log.session_id = j.at("session_id").get<std::string>();
            out.log.config = config_from_json(j.at("config"));
            for (const auto& p : j.at("plans")) out.log.plans.push_back(plan_from_json(p));
        } else if (!have_header) {
            throw InvalidArgument("session log does not start with a header line");
        } else if (type == "response") {
            out.log.responses.push_back(response_from_json(j));
        } else if (type == "questionnaire") {
            out.log.questionnaire = j.at("answers");
        } else {
            throw InvalidArgument(fmt::format("unknown session log line type '{}'", type));
        }
        pos = newline + 1;
        out.durable_bytes = pos;
    }
    if (!have_header) throw InvalidArgument("session log has no header line");
    return out;
}

SessionLog read_session_log(const fs::path& path) {
    try {
        return parse_session_log(read_text_file(path)).log;
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string serialize_session_log(const SessionLog& log) {
    std::string out = log_header_json(log.session_id, log.config, log.plans).dump() + "\n";
    for (const auto& r : log.responses) out += response_to_json(r).dump() + "\n";
    if (log.questionnaire)
        out += json{{"v", 1}, {"type", "questionnaire"}, {"answers", *log.questionnaire}}.dump() + "\n";
    return out;
}

std::vector<SessionLog> read_session_logs(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw NotFoundError(fmt::format("{} is not a directory", dir.string()));
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<SessionLog> logs;
    for (const auto& f : files) logs.push_back(read_session_log(f));
    return logs;
}

// ---------------------------------------------------------------------------
// Analysis

AggregateTable aggregate(std::span<const SessionLog> logs, const std::string& group) {
    AggregateTable table;
    // (size, delta) -> accumulated group sums
    struct Sum {
        double accuracy = 0, confidence = 0, time = 0;
        int same = 0, participants = 0;
    };
    std::map<std::pair<int, int>, Sum> sums;

    for (const auto& log : logs) {
        const auto trials = log.graded_main();
        std::map<std::pair<int, int>, ParticipantDeltaRow> rows;
        std::map<std::pair<int, int>, int> counts;
        for (const auto& t : trials) {
            auto& row = rows[{t.plan.size, t.plan.delta_steps}];
            row.participant_id = log.config.participant_id;
            row.size = t.plan.size;
            row.delta_steps = t.plan.delta_steps;
            row.accuracy += t.correct ? 1 : 0;
            row.confidence += t.response.confident ? 2 : 0;
            row.mean_time += t.response.response_time;
            row.same_count += t.response.answer == Answer::Same ? 1 : 0;
            ++counts[{t.plan.size, t.plan.delta_steps}];
        }
        for (auto& [key, row] : rows) {
            row.mean_time /= counts[key];
            auto& s = sums[key];
            s.accuracy += row.accuracy;
            s.confidence += row.confidence;
            s.time += row.mean_time;
            s.same += row.same_count;
            ++s.participants;
            table.participants.push_back(row);
        }
    }
    for (const auto& [key, s] : sums) {
        table.group.push_back({group, key.first, key.second, s.accuracy / s.participants, s.confidence / s.participants,
                               s.time / s.participants, s.same, s.participants});
    }
    std::sort(table.participants.begin(), table.participants.end(), [](const auto& a, const auto& b) {
        return std::tie(a.participant_id, a.size, a.delta_steps) < std::tie(b.participant_id, b.size, b.delta_steps);
    });
    return table;
}

double overall_accuracy(const SessionLog& log, std::optional<int> size) {
    int total = 0, correct = 0;
    for (const auto& t : log.graded_main()) {
        if (size && t.plan.size != *size) continue;
        ++total;
        correct += t.correct ? 1 : 0;
    }
    if (total == 0) throw UndefinedStatisticError("no main trials to score");
    return static_cast<double>(correct) / total;
}

OutlierResult replace_outliers(std::vector<SessionLog> logs, double threshold) {
    OutlierResult out;
    for (auto& log : logs) {
        std::map<int, TrialKind> kinds;
        for (const auto& p : log.plans) kinds[p.trial_index] = p.kind;
        auto is_main = [&](const ResponseRecord& r) {
            auto it = kinds.find(r.trial_index);
            return it != kinds.end() && it->second == TrialKind::Main;
        };
        double kept_sum = 0.0;
        int kept = 0, over = 0;
        for (const auto& r : log.responses) {
            if (!is_main(r)) continue;
            if (r.response_time > threshold)
                ++over;
            else {
                kept_sum += r.response_time;
                ++kept;
            }
        }
        if (over == 0) continue;
        if (kept == 0)
            throw UndefinedStatisticError(fmt::format(
                "participant {} has no response time at or below {} s; replacement mean is undefined",
                log.config.participant_id, threshold));
        const double mean = kept_sum / kept;
        for (auto& r : log.responses) {
            if (!is_main(r) || r.response_time <= threshold) continue;
            out.audit.push_back({log.config.participant_id, r.trial_index, r.response_time, mean});
            r.response_time = mean;
        }
    }
    out.logs = std::move(logs);
    return out;
}

double t_two_tailed_p(double t, double df) {
    if (!(df > 0.0)) throw UndefinedStatisticError("t distribution needs positive degrees of freedom");
    if (!std::isfinite(t)) return 0.0;
    // P(|T| > |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2)
    return boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t));
}

namespace {

double mean_of(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double sum_sq_dev(std::span<const double> x, double mean) {
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return s;
}

}  // namespace

TTestResult t_test(std::span<const double> a, std::span<const double> b, bool paired, VarianceModel model) {
    if (a.size() < 2 || b.size() < 2) throw InvalidArgument("t-test needs at least two observations per sample");
    TTestResult r;
    double diff, se;
    if (paired) {
        if (a.size() != b.size()) throw InvalidArgument("paired t-test needs samples of equal length");
        std::vector<double> d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
        const double n = static_cast<double>(d.size());
        diff = mean_of(d);
        se = std::sqrt(sum_sq_dev(d, diff) / (n - 1.0) / n);
        r.df = n - 1.0;
    } else {
        const double na = static_cast<double>(a.size());
        const double nb = static_cast<double>(b.size());
        const double ma = mean_of(a), mb = mean_of(b);
        const double va = sum_sq_dev(a, ma) / (na - 1.0);
        const double vb = sum_sq_dev(b, mb) / (nb - 1.0);
        diff = ma - mb;
        if (model == VarianceModel::Pooled) {
            const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
            se = std::sqrt(pooled * (1.0 / na + 1.0 / nb));
            r.df = na + nb - 2.0;
        } else {
            const double qa = va / na, qb = vb / nb;
            se = std::sqrt(qa + qb);
            r.df = se > 0.0 ? (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0)) : na + nb - 2.0;
        }
    }
    if (se == 0.0) {
        if (diff == 0.0) return {0.0, r.df, 1.0};
        throw UndefinedStatisticError("t-test is undefined: zero variance with a non-zero mean difference");
    }
    r.t = diff / se;
    r.p = t_two_tailed_p(r.t, r.df);
    return r;
}

std::string aggregate_csv(std::span<const GroupDeltaRow> rows) {
    std::string out = "group,size,delta,mean_accuracy,mean_confidence,mean_time,same_count\n";
    for (const auto& r : rows)
        out += fmt::format("{},{},{:.2f},{:.6f},{:.6f},{:.6f},{}\n", r.group, r.size, kTargetStep * r.delta_steps,
                           r.mean_accuracy, r.mean_confidence, r.mean_time, r.same_count);
    return out;
}

std::vector<GroupDeltaRow> parse_aggregate_csv(std::string_view text) {
    std::vector<GroupDeltaRow> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 7) throw InvalidArgument(fmt::format("aggregate CSV row has {} cells: {}", cells.size(), line));
        try {
            GroupDeltaRow r;
            r.group = cells[0];
            r.size = std::stoi(cells[1]);
            r.delta_steps = static_cast<int>(std::lround(std::stod(cells[2]) / kTargetStep));
            r.mean_accuracy = std::stod(cells[3]);
            r.mean_confidence = std::stod(cells[4]);
            r.mean_time = std::stod(cells[5]);
            r.same_count = std::stoi(cells[6]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw InvalidArgument(fmt::format("malformed aggregate CSV row: {}", line));
        }
    }
    return rows;
}

std::string_view to_string(PlotQuantity q) {
    switch (q) {
        case PlotQuantity::Accuracy: return "accuracy";
        case PlotQuantity::Time: return "time";
        case PlotQuantity::Confidence: return "confidence";
    }
    return "?";
}

std::string plot_svg(std::span<const GroupDeltaRow> rows, PlotQuantity quantity) {
    constexpr double width = 640, height = 400, left = 60, right = 160, top = 30, bottom = 50;
    const double plot_w = width - left - right, plot_h = height - top - bottom;

    auto value = [quantity](const GroupDeltaRow& r) {
        switch (quantity) {
            case PlotQuantity::Accuracy: return r.mean_accuracy;
            case PlotQuantity::Time: return r.mean_time;
            case PlotQuantity::Confidence: return r.mean_confidence;
        }
        return 0.0;
    };
    double y_max = quantity == PlotQuantity::Accuracy ? 5.0 : quantity == PlotQuantity::Confidence ? 10.0 : 0.0;
    for (const auto& r : rows) y_max = std::max(y_max, value(r));
    if (y_max <= 0.0) y_max = 1.0;

    std::map<std::pair<std::string, int>, std::vector<std::pair<int, double>>> series;
    for (const auto& r : rows) series[{r.group, r.size}].push_back({r.delta_steps, value(r)});

    auto sx = [&](int steps) { return left + plot_w * steps / (kLevelsPerSet - 1.0); };
    auto sy = [&](double v) { return top + plot_h * (1.0 - v / y_max); };

    static constexpr std::array<const char*, 6> colours{"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};
    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
        width, height);
    svg += fmt::format("<text x=\"{}\" y=\"18\" text-anchor=\"middle\">Mean {} by KSM difference</text>\n",
                       left + plot_w / 2, to_string(quantity));
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", left, top + plot_h,
                       left + plot_w);
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", left, top, top + plot_h);
    for (int s = 0; s < kLevelsPerSet; ++s)
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.2f}</text>\n", sx(s),
                           top + plot_h + 18, kTargetStep * s);
    for (int t = 0; t <= 5; ++t) {
        const double v = y_max * t / 5.0;
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.1f}</text>\n", left - 6, sy(v) + 4, v);
    }
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">delta</text>\n", left + plot_w / 2, height - 10);

    std::size_t c = 0;
    for (auto& [key, points] : series) {
        std::sort(points.begin(), points.end());
        const char* colour = colours[c % colours.size()];
        std::string path;
        for (const auto& [steps, v] : points) path += fmt::format("{:.1f},{:.1f} ", sx(steps), sy(v));
        svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", colour, path);
        for (const auto& [steps, v] : points)
            svg += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"{}\"/>\n", sx(steps), sy(v), colour);
        const double ly = top + 16.0 * static_cast<double>(c);
        svg += fmt::format("<rect x=\"{}\" y=\"{:.1f}\" width=\"12\" height=\"3\" fill=\"{}\"/>\n", left + plot_w + 14,
                           ly + 4, colour);
        svg += fmt::format("<text x=\"{}\" y=\"{:.1f}\">{} n={}</text>\n", left + plot_w + 30, ly + 9, key.first,
                           key.second);
        ++c;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace stresslab
