#pragma once

#include "stresslab/io.hpp"
#include "stresslab/stimulus.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stresslab {

enum class Mode { TrainedFeedback, Untrained, Expert };
enum class Answer { Left, Same, Right };
enum class TrialKind { Training, Main };

std::string_view to_string(Mode mode);
std::string_view to_string(Answer answer);
std::string_view to_string(TrialKind kind);
/// Accept "trained-feedback" | "untrained" | "expert" (plus "trained" as a group alias).
Mode parse_mode(std::string_view text);
Answer parse_answer(std::string_view text);
TrialKind parse_trial_kind(std::string_view text);

inline constexpr int kTrainingTrials = 9;
inline constexpr int kMainTrialsPerSize = kGraphsPerSize * kLevelsPerSet;  // 45
inline constexpr int kGatePassCount = 5;                                  // strictly more than half of 9
inline constexpr double kOutlierThresholdSeconds = 200.0;
inline constexpr std::array<int, 3> kExpertSizes{10, 25, 50};

struct SessionConfig {
    int size = 10;
    Mode mode = Mode::TrainedFeedback;
    std::uint64_t seed = 0;
    std::string participant_id;
    std::string study_id = "default";

    /// Throws InvalidArgument for unsupported sizes or an empty participant id.
    void validate() const;
    /// Graph sizes presented, in order: {size}, or 10, 25, 50 for experts.
    std::vector<int> block_sizes() const;
    /// Total number of trials (training + main) in a complete session.
    int total_trials() const;
};

struct StimulusRef {
    DrawingKey key;
    double ksm = 0.0;
};

struct TrialPlan {
    int trial_index = 0;  // 1-based, unique within a session
    TrialKind kind = TrialKind::Main;
    int size = 0;
    int graph = 0;
    StimulusRef left;
    StimulusRef right;
    int delta_steps = 0;  // |level difference|; delta = 0.05 * delta_steps
    Answer correct_answer = Answer::Same;
    bool feedback = false;

    double delta() const noexcept { return kTargetStep * delta_steps; }
};

struct ResponseRecord {
    int trial_index = 0;
    Answer answer = Answer::Same;
    bool confident = false;
    double response_time = 0.0;  // seconds, client measured
    std::optional<std::string> presented_at;
    std::optional<std::string> received_at;  // stamped by the service

    /// Throws InvalidArgument unless response_time is finite and positive.
    void validate() const;
};

/// Nine training trials with deltas 0.40, 0.35, ..., 0.00 in that order.
/// Expert sessions have no training and yield an empty list.
std::vector<TrialPlan> schedule_training(const SessionConfig& config, const StimulusCatalog& catalog);

/// One trial per (graph, delta) cell of `size`, presented in random order.
/// Endpoints are drawn uniformly from the grid pairs realising each delta and
/// each endpoint drawing from the sets that contain it; zero-delta trials use
/// two different sets. Indices start at first_index.
std::vector<TrialPlan> schedule_main(const SessionConfig& config, const StimulusCatalog& catalog, int size,
                                     int first_index = 1);
std::vector<TrialPlan> schedule_main(const SessionConfig& config, const StimulusCatalog& catalog);

/// Training followed by every main block, indexed 1..total_trials().
std::vector<TrialPlan> schedule_session(const SessionConfig& config, const StimulusCatalog& catalog);

/// Throws InvalidArgument when the indices differ.
bool grade(const TrialPlan& plan, const ResponseRecord& response);

struct GradedTrial {
    TrialPlan plan;
    ResponseRecord response;
    bool correct = false;
};

/// Passes iff at least 5 of exactly 9 training trials are correct.
bool training_gate(std::span<const GradedTrial> training);

struct SessionLog {
    std::string session_id;
    SessionConfig config;
    std::vector<TrialPlan> plans;
    std::vector<ResponseRecord> responses;
    std::optional<json> questionnaire;

    /// Plans matched with responses, in plan order. Unanswered plans are skipped.
    std::vector<GradedTrial> graded() const;
    /// Graded main trials; throws IncompleteLogError naming every unanswered main trial.
    std::vector<GradedTrial> graded_main() const;
};

// JSONL session log: a header line (config + plans), then one line per
// response and optionally a questionnaire line. Every line carries "v": 1.
json config_to_json(const SessionConfig& config);
SessionConfig config_from_json(const json& j);
json plan_to_json(const TrialPlan& plan);
TrialPlan plan_from_json(const json& j);
json response_to_json(const ResponseRecord& record);
ResponseRecord response_from_json(const json& j);
json log_header_json(const std::string& session_id, const SessionConfig& config, std::span<const TrialPlan> plans);

struct ParsedLog {
    SessionLog log;
    /// Bytes covered by complete, well-formed lines. A torn final line (from an
    /// interrupted append) is excluded so callers can truncate back to it.
    std::size_t durable_bytes = 0;
    bool torn_tail = false;
};

/// Throws InvalidArgument for a missing header or a malformed line before the tail.
ParsedLog parse_session_log(std::string_view text);
SessionLog read_session_log(const std::filesystem::path& path);
std::string serialize_session_log(const SessionLog& log);

/// Every *.jsonl under `dir` (recursively), sorted by path.
std::vector<SessionLog> read_session_logs(const std::filesystem::path& dir);

struct ParticipantDeltaRow {
    std::string participant_id;
    int size = 0;
    int delta_steps = 0;
    int accuracy = 0;     // correct trials, 0..5
    int confidence = 0;   // 2 per confident trial, 0..10
    double mean_time = 0.0;
    int same_count = 0;
};

struct GroupDeltaRow {
    std::string group;
    int size = 0;
    int delta_steps = 0;
    double mean_accuracy = 0.0;
    double mean_confidence = 0.0;
    double mean_time = 0.0;
    int same_count = 0;  // total "same" answers across the group
    int participants = 0;
};

struct AggregateTable {
    std::vector<ParticipantDeltaRow> participants;
    std::vector<GroupDeltaRow> group;
};

/// Per-participant and group-mean per-delta table over main trials.
/// Throws IncompleteLogError if any log lacks main responses.
AggregateTable aggregate(std::span<const SessionLog> logs, const std::string& group);

/// Fraction of main trials answered correctly, optionally restricted to one size.
double overall_accuracy(const SessionLog& log, std::optional<int> size = std::nullopt);

struct OutlierReplacement {
    std::string participant_id;
    int trial_index = 0;
    double original = 0.0;
    double replacement = 0.0;
};

struct OutlierResult {
    std::vector<SessionLog> logs;
    std::vector<OutlierReplacement> audit;
};

/// Replaces every main-trial response time above `threshold` with the mean of the
/// same participant's main-trial times at or below it. Throws UndefinedStatisticError
/// when a participant has no time at or below the threshold.
OutlierResult replace_outliers(std::vector<SessionLog> logs, double threshold = kOutlierThresholdSeconds);

enum class VarianceModel { Pooled, Welch };

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-tailed
};

/// Student's t-test. Independent samples use `model`; paired uses difference scores.
/// Zero variance with a zero mean difference gives t = 0, p = 1; zero variance
/// otherwise throws UndefinedStatisticError.
TTestResult t_test(std::span<const double> a, std::span<const double> b, bool paired,
                   VarianceModel model = VarianceModel::Pooled);

/// Two-tailed p for a t statistic via the regularised incomplete beta function.
double t_two_tailed_p(double t, double df);

std::string aggregate_csv(std::span<const GroupDeltaRow> rows);
std::vector<GroupDeltaRow> parse_aggregate_csv(std::string_view text);

enum class PlotQuantity { Accuracy, Time, Confidence };
std::string_view to_string(PlotQuantity q);
/// Line chart of one per-delta quantity, one series per (group, size).
std::string plot_svg(std::span<const GroupDeltaRow> rows, PlotQuantity quantity);

}  // namespace stresslab
