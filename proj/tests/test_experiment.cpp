#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stresslab/error.hpp"
#include "stresslab/experiment.hpp"
#include "support.hpp"

#include <fstream>

using namespace stresslab;

namespace {

const StimulusCatalog& catalog() {
    static const StimulusCatalog c = oracle::synthetic_catalog({10, 25, 50}, 1234);
    return c;
}

SessionConfig config(Mode mode, std::uint64_t seed, std::string participant = "p", int size = 10) {
    SessionConfig c;
    c.mode = mode;
    c.seed = seed;
    c.size = size;
    c.participant_id = std::move(participant);
    return c;
}

// Independent ground truth for a plan: the higher-KSM side, or same when levels match.
Answer truth(const TrialPlan& p) {
    if (p.left.key.level == p.right.key.level) return Answer::Same;
    return catalog().at(p.left.key) > catalog().at(p.right.key) ? Answer::Left : Answer::Right;
}

ResponseRecord respond(const TrialPlan& p, Answer a, bool confident, double time) {
    ResponseRecord r;
    r.trial_index = p.trial_index;
    r.answer = a;
    r.confident = confident;
    r.response_time = time;
    return r;
}

// A complete log whose answers and timings are chosen by `policy`.
template <typename Policy>
SessionLog full_log(const SessionConfig& cfg, Policy policy) {
    SessionLog log;
    log.session_id = "s-" + cfg.participant_id;
    log.config = cfg;
    log.plans = schedule_session(cfg, catalog());
    for (const auto& p : log.plans) log.responses.push_back(policy(p));
    return log;
}

}  // namespace

TEST_CASE("mode, answer and kind names") {
    CHECK(to_string(Mode::TrainedFeedback) == "trained-feedback");
    CHECK(parse_mode("trained") == Mode::TrainedFeedback);
    CHECK(parse_mode("expert") == Mode::Expert);
    CHECK_THROWS_AS(parse_mode("novice"), InvalidArgument);
    CHECK(parse_answer("same") == Answer::Same);
    CHECK_THROWS_AS(parse_answer("up"), InvalidArgument);
    CHECK(parse_trial_kind(to_string(TrialKind::Main)) == TrialKind::Main);
}

TEST_CASE("session config") {
    CHECK(config(Mode::TrainedFeedback, 1).total_trials() == 54);
    CHECK(config(Mode::Untrained, 1).total_trials() == 54);
    CHECK(config(Mode::Expert, 1).total_trials() == 135);
    CHECK(config(Mode::Expert, 1, "p", 25).block_sizes() == std::vector<int>{10, 25, 50});
    CHECK(config(Mode::Untrained, 1, "p", 25).block_sizes() == std::vector<int>{25});
    CHECK_THROWS_AS(config(Mode::Untrained, 1, "p", 12).validate(), InvalidArgument);
    CHECK_THROWS_AS(config(Mode::Untrained, 1, "").validate(), InvalidArgument);
}

TEST_CASE("training schedule") {
    const auto trained = schedule_training(config(Mode::TrainedFeedback, 5), catalog());
    REQUIRE(trained.size() == 9);
    for (int k = 0; k < 9; ++k) {
        CHECK(trained[k].trial_index == k + 1);
        CHECK(trained[k].kind == TrialKind::Training);
        CHECK(trained[k].delta_steps == 8 - k);
        CHECK(trained[k].feedback);
        CHECK(trained[k].left.key.graph == trained[k].right.key.graph);
        CHECK(trained[k].correct_answer == truth(trained[k]));
    }
    CHECK(trained.front().delta() == doctest::Approx(0.40));
    CHECK(trained.back().delta() == 0.0);

    const auto untrained = schedule_training(config(Mode::Untrained, 5), catalog());
    REQUIRE(untrained.size() == 9);
    for (const auto& p : untrained) CHECK_FALSE(p.feedback);
    CHECK(schedule_training(config(Mode::Expert, 5), catalog()).empty());
}

TEST_CASE("schedules are deterministic per seed") {
    const auto a = schedule_session(config(Mode::TrainedFeedback, 99), catalog());
    const auto b = schedule_session(config(Mode::TrainedFeedback, 99), catalog());
    const auto c = schedule_session(config(Mode::TrainedFeedback, 100), catalog());
    REQUIRE(a.size() == b.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(plan_to_json(a[i]) == plan_to_json(b[i]));
        differs = differs || plan_to_json(a[i]) != plan_to_json(c[i]);
    }
    CHECK(differs);
}

TEST_CASE("main schedule covers every graph and delta once") {
    int left_high = 0, non_zero = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto plans = schedule_main(config(Mode::Untrained, seed), catalog());
        REQUIRE(plans.size() == 45);
        std::set<std::pair<int, int>> cells;
        std::map<int, int> per_delta, per_graph;
        for (const auto& p : plans) {
            CHECK(p.kind == TrialKind::Main);
            CHECK_FALSE(p.feedback);
            CHECK(p.left.key.graph == p.right.key.graph);
            CHECK(p.left.key.size == 10);
            CHECK(std::abs(p.left.key.level - p.right.key.level) == p.delta_steps);
            CHECK(p.correct_answer == truth(p));
            CHECK(p.left.ksm == catalog().at(p.left.key));
            if (p.delta_steps == 8) {
                CHECK(std::min(p.left.key.level, p.right.key.level) == 0);
                CHECK(std::max(p.left.key.level, p.right.key.level) == 8);
            }
            if (p.delta_steps == 0) CHECK(p.left.key.set != p.right.key.set);
            else {
                ++non_zero;
                left_high += p.correct_answer == Answer::Left ? 1 : 0;
            }
            cells.insert({p.graph, p.delta_steps});
            ++per_delta[p.delta_steps];
            ++per_graph[p.graph];
        }
        CHECK(cells.size() == 45);
        for (auto [d, count] : per_delta) CHECK(count == 5);
        for (auto [g, count] : per_graph) CHECK(count == 9);
    }
    const double share = static_cast<double>(left_high) / non_zero;
    CHECK(share > 0.45);
    CHECK(share < 0.55);
}

TEST_CASE("endpoint levels are spread over the admissible pairs") {
    std::map<int, int> low_levels;
    for (std::uint64_t seed = 0; seed < 400; ++seed)
        for (const auto& p : schedule_main(config(Mode::Untrained, seed), catalog()))
            if (p.delta_steps == 6) ++low_levels[std::min(p.left.key.level, p.right.key.level)];
    REQUIRE(low_levels.size() == 3);
    for (auto [low, count] : low_levels) {
        CHECK(low <= 2);
        CHECK(count > 400 * 5 / 3 * 0.85);
        CHECK(count < 400 * 5 / 3 * 1.15);
    }
}

TEST_CASE("expert sessions chain the three sizes") {
    const auto plans = schedule_session(config(Mode::Expert, 8), catalog());
    REQUIRE(plans.size() == 135);
    for (int k = 0; k < 135; ++k) {
        CHECK(plans[k].trial_index == k + 1);
        CHECK(plans[k].size == std::array{10, 25, 50}[k / 45]);
    }
}

TEST_CASE("scheduling fails when a cell cannot be realised") {
    StimulusCatalog thin = catalog();
    for (int s = 0; s < 3; ++s) thin.erase({10, 2, s, 8});
    CHECK_THROWS_AS(schedule_main(config(Mode::Untrained, 1), thin), SchedulingError);
    StimulusCatalog one_set = oracle::synthetic_catalog({10}, 4);
    for (int g = 0; g < 5; ++g)
        for (int level = 0; level < 9; ++level) {
            one_set.erase({10, g, 1, level});
            one_set.erase({10, g, 2, level});
        }
    CHECK_THROWS_AS(schedule_main(config(Mode::Untrained, 1), one_set), SchedulingError);
    CHECK_THROWS_AS(schedule_main(config(Mode::Untrained, 1, "p", 25), oracle::synthetic_catalog({10}, 4)),
                    SchedulingError);
}

TEST_CASE("grading") {
    TrialPlan p;
    p.trial_index = 3;
    p.left = {{10, 0, 0, 1}, 0.45};
    p.right = {{10, 0, 1, 6}, 0.70};
    p.delta_steps = 5;
    p.correct_answer = Answer::Right;
    CHECK(grade(p, respond(p, Answer::Right, true, 1.0)));
    CHECK_FALSE(grade(p, respond(p, Answer::Left, true, 1.0)));
    CHECK_FALSE(grade(p, respond(p, Answer::Same, true, 1.0)));
    ResponseRecord wrong = respond(p, Answer::Right, true, 1.0);
    wrong.trial_index = 4;
    CHECK_THROWS_AS(grade(p, wrong), InvalidArgument);

    TrialPlan same = p;
    same.delta_steps = 0;
    same.correct_answer = Answer::Same;
    CHECK(grade(same, respond(same, Answer::Same, false, 1.0)));
}

TEST_CASE("oracle participant scores every main trial") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto log = full_log(config(Mode::TrainedFeedback, seed), [](const TrialPlan& p) {
            return respond(p, truth(p), true, 3.0);
        });
        int correct = 0;
        for (const auto& g : log.graded_main()) correct += g.correct ? 1 : 0;
        CHECK(correct == 45);
    }
}

TEST_CASE("training gate") {
    const auto plans = schedule_training(config(Mode::TrainedFeedback, 1), catalog());
    auto graded_with = [&](int correct) {
        std::vector<GradedTrial> out;
        for (int k = 0; k < 9; ++k) out.push_back({plans[k], respond(plans[k], Answer::Same, false, 1), k < correct});
        return out;
    };
    CHECK(training_gate(graded_with(5)));
    CHECK_FALSE(training_gate(graded_with(4)));
    CHECK(training_gate(graded_with(9)));
    CHECK_FALSE(training_gate(graded_with(0)));
    auto eight = graded_with(9);
    eight.pop_back();
    CHECK_THROWS_AS(training_gate(eight), InvalidArgument);
}

TEST_CASE("response validation") {
    ResponseRecord r;
    r.trial_index = 1;
    r.response_time = 0.0;
    CHECK_THROWS_AS(r.validate(), InvalidArgument);
    r.response_time = -1;
    CHECK_THROWS_AS(r.validate(), InvalidArgument);
    r.response_time = std::nan("");
    CHECK_THROWS_AS(r.validate(), InvalidArgument);
    r.response_time = 0.25;
    CHECK_NOTHROW(r.validate());
}

TEST_CASE("session log serialisation and torn tails") {
    auto log = full_log(config(Mode::Untrained, 3, "alice"), [](const TrialPlan& p) {
        return respond(p, truth(p), p.trial_index % 2 == 0, 1.5 + p.trial_index);
    });
    log.questionnaire = json{{"strategy", "looked at spacing"}};
    const std::string text = serialize_session_log(log);
    const ParsedLog parsed = parse_session_log(text);
    CHECK_FALSE(parsed.torn_tail);
    CHECK(parsed.durable_bytes == text.size());
    CHECK(serialize_session_log(parsed.log) == text);
    CHECK(parsed.log.responses.size() == 54);
    CHECK(parsed.log.questionnaire == log.questionnaire);

    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) CHECK(json::parse(line).at("v") == 1);

    // Cut into the last line.
    const std::string torn = text.substr(0, text.size() - 7);
    const ParsedLog cut = parse_session_log(torn);
    CHECK(cut.torn_tail);
    CHECK(cut.log.responses.size() == 54);
    CHECK_FALSE(cut.log.questionnaire.has_value());
    CHECK(text.compare(0, cut.durable_bytes, torn, 0, cut.durable_bytes) == 0);
    CHECK(torn[cut.durable_bytes - 1] == '\n');

    // Complete JSON but no newline still counts as torn.
    const std::string unterminated = text.substr(0, text.size() - 1);
    CHECK(parse_session_log(unterminated).torn_tail);

    CHECK_THROWS_AS(parse_session_log("{\"v\":1,\"type\":\"response\"}\n"), InvalidArgument);
    const auto first_newline = text.find('\n');
    std::string corrupt = text;
    corrupt.insert(first_newline + 1, "garbage\n");
    CHECK_THROWS_AS(parse_session_log(corrupt), InvalidArgument);
}

TEST_CASE("incomplete logs are rejected by analysis") {
    auto log = full_log(config(Mode::Untrained, 3), [](const TrialPlan& p) { return respond(p, truth(p), true, 2); });
    log.responses.erase(log.responses.begin() + 20, log.responses.begin() + 22);
    CHECK_THROWS_AS(log.graded_main(), IncompleteLogError);
    try {
        log.graded_main();
    } catch (const IncompleteLogError& e) {
        const std::string what = e.what();
        CHECK(what.find("21") != std::string::npos);
        CHECK(what.find("22") != std::string::npos);
    }
    CHECK_THROWS_AS(aggregate(std::vector<SessionLog>{log}, "g"), IncompleteLogError);
}

TEST_CASE("aggregate simple participants") {
    auto perfect = full_log(config(Mode::Untrained, 4, "a"), [](const TrialPlan& p) { return respond(p, truth(p), true, 2); });
    auto same = full_log(config(Mode::Untrained, 5, "b"), [](const TrialPlan& p) { return respond(p, Answer::Same, false, 2); });
    const auto table = aggregate(std::vector<SessionLog>{perfect}, "g");
    REQUIRE(table.participants.size() == 9);
    for (const auto& r : table.participants) {
        CHECK(r.accuracy == 5);
        CHECK(r.confidence == 10);
    }
    const auto sames = aggregate(std::vector<SessionLog>{same}, "g");
    for (const auto& r : sames.participants) {
        CHECK(r.accuracy == (r.delta_steps == 0 ? 5 : 0));
        CHECK(r.same_count == 5);
        CHECK(r.confidence == 0);
    }
}

TEST_CASE("aggregate reproduces a hand-built cohort table") {
    // A answers correctly from delta 0.20 upwards, "same" below, confident from 0.30,
    // and takes 2 + steps seconds. B always answers "same", never confident, 10 s.
    auto a = full_log(config(Mode::TrainedFeedback, 11, "A"), [](const TrialPlan& p) {
        const Answer ans = p.delta_steps >= 4 ? truth(p) : Answer::Same;
        return respond(p, ans, p.delta_steps >= 6, 2.0 + p.delta_steps);
    });
    auto b = full_log(config(Mode::TrainedFeedback, 12, "B"),
                      [](const TrialPlan& p) { return respond(p, Answer::Same, false, 10.0); });
    const auto table = aggregate(std::vector<SessionLog>{a, b}, "trained");
    REQUIRE(table.group.size() == 9);
    for (const auto& row : table.group) {
        const int d = row.delta_steps;
        const double acc_a = (d == 0 || d >= 4) ? 5 : 0, acc_b = d == 0 ? 5 : 0;
        CHECK(row.group == "trained");
        CHECK(row.size == 10);
        CHECK(row.participants == 2);
        CHECK(row.mean_accuracy == doctest::Approx((acc_a + acc_b) / 2));
        CHECK(row.mean_confidence == doctest::Approx(d >= 6 ? 5.0 : 0.0));
        CHECK(row.mean_time == doctest::Approx((2.0 + d + 10.0) / 2));
        CHECK(row.same_count == (d <= 3 ? 10 : 5));
    }
}

TEST_CASE("aggregate does not depend on trial order") {
    auto log = full_log(config(Mode::Untrained, 21, "x"), [](const TrialPlan& p) {
        return respond(p, p.trial_index % 3 ? truth(p) : Answer::Left, p.trial_index % 2, 1.0 + p.trial_index % 7);
    });
    const auto base = aggregate(std::vector<SessionLog>{log}, "g");
    Rng rng(5);
    for (int t = 0; t < 10; ++t) {
        SessionLog shuffled = log;
        rng.shuffle(shuffled.plans);
        rng.shuffle(shuffled.responses);
        const auto again = aggregate(std::vector<SessionLog>{shuffled}, "g");
        REQUIRE(again.group.size() == base.group.size());
        for (std::size_t k = 0; k < base.group.size(); ++k) {
            CHECK(again.group[k].mean_accuracy == base.group[k].mean_accuracy);
            CHECK(again.group[k].mean_time == doctest::Approx(base.group[k].mean_time).epsilon(1e-14));
            CHECK(again.group[k].same_count == base.group[k].same_count);
        }
    }
}

TEST_CASE("outlier replacement") {
    int k = 0;
    auto log = full_log(config(Mode::Untrained, 31, "o"), [&](const TrialPlan& p) {
        return respond(p, truth(p), true, p.kind == TrialKind::Training ? 3.0 : (k++ % 2 ? 10.0 : 6.0));
    });
    SessionLog clean = log;
    auto untouched = replace_outliers({clean});
    CHECK(untouched.audit.empty());
    CHECK(serialize_session_log(untouched.logs[0]) == serialize_session_log(clean));

    // 23 main times are 6 s and 22 are 10 s; making one 6 s answer 250 s leaves 22 of each.
    int slot6 = -1;
    for (std::size_t i = 0; i < log.responses.size() && slot6 < 0; ++i)
        if (log.plans[i].kind == TrialKind::Main && log.responses[i].response_time == 6.0) slot6 = static_cast<int>(i);
    log.responses[slot6].response_time = 250.0;
    const auto result = replace_outliers({log});
    REQUIRE(result.audit.size() == 1);
    CHECK(result.audit[0].participant_id == "o");
    CHECK(result.audit[0].trial_index == log.plans[slot6].trial_index);
    CHECK(result.audit[0].original == 250.0);
    CHECK(result.audit[0].replacement == doctest::Approx(8.0));
    CHECK(result.logs[0].responses[slot6].response_time == doctest::Approx(8.0));

    const auto twice = replace_outliers(result.logs);
    CHECK(twice.audit.empty());
    CHECK(serialize_session_log(twice.logs[0]) == serialize_session_log(result.logs[0]));

    auto slow = full_log(config(Mode::Untrained, 32, "slow"), [](const TrialPlan& p) { return respond(p, truth(p), true, 300.0); });
    CHECK_THROWS_AS(replace_outliers({slow}), UndefinedStatisticError);
}

TEST_CASE("outlier audit over a cohort") {
    // 75 participants x 45 main trials = 3375 responses with eight slow ones.
    std::vector<SessionLog> cohort;
    for (int p = 0; p < 75; ++p)
        cohort.push_back(full_log(config(Mode::Untrained, 100 + p, "p" + std::to_string(p)),
                                  [&](const TrialPlan& plan) {
                                      const bool slow = p < 8 && plan.kind == TrialKind::Main && plan.trial_index == 30;
                                      return respond(plan, truth(plan), true, slow ? 240.0 : 5.0);
                                  }));
    const auto result = replace_outliers(cohort);
    CHECK(result.audit.size() == 8);
    for (const auto& a : result.audit) CHECK(a.replacement == doctest::Approx(5.0));
}

TEST_CASE("t-test on Student's sleep data") {
    const std::vector<double> a{0.7, -1.6, -0.2, -1.2, -0.1, 3.4, 3.7, 0.8, 0.0, 2.0};
    const std::vector<double> b{1.9, 0.8, 1.1, 0.1, -0.1, 4.4, 5.5, 1.6, 4.6, 3.4};
    const auto paired = t_test(a, b, true);
    CHECK(paired.t == doctest::Approx(-4.062127683382037).epsilon(1e-9));
    CHECK(paired.df == 9);
    CHECK(std::abs(paired.p - 0.00283289019738427) < 1e-6);

    const auto pooled = t_test(a, b, false);
    CHECK(pooled.t == doctest::Approx(-1.8608134674868524).epsilon(1e-9));
    CHECK(pooled.df == 18);
    CHECK(std::abs(pooled.p - 0.07918671421593829) < 1e-6);

    const auto welch = t_test(a, b, false, VarianceModel::Welch);
    CHECK(welch.df == doctest::Approx(17.776473516178488).epsilon(1e-9));
    CHECK(std::abs(welch.p - 0.07939414018735823) < 1e-6);

    const auto reversed = t_test(b, a, false);
    CHECK(reversed.t == doctest::Approx(-pooled.t).epsilon(1e-12));
    CHECK(reversed.p == doctest::Approx(pooled.p).epsilon(1e-12));
    const auto reversed_paired = t_test(b, a, true);
    CHECK(reversed_paired.t == doctest::Approx(-paired.t).epsilon(1e-12));
    CHECK(reversed_paired.p == doctest::Approx(paired.p).epsilon(1e-12));
}

TEST_CASE("t-test degenerate inputs") {
    const std::vector<double> x{1, 2, 3}, y{1, 2, 3};
    const auto same = t_test(x, y, false);
    CHECK(same.t == 0.0);
    CHECK(same.p == doctest::Approx(1.0));
    const auto paired = t_test(x, y, true);
    CHECK(paired.t == 0.0);
    CHECK(paired.p == 1.0);

    const std::vector<double> c1{2, 2, 2}, c2{5, 5, 5};
    CHECK_THROWS_AS(t_test(c1, c2, false), UndefinedStatisticError);
    CHECK_THROWS_AS(t_test(std::vector<double>{1}, x, false), InvalidArgument);
    CHECK_THROWS_AS(t_test(x, std::vector<double>{1, 2}, true), InvalidArgument);

    CHECK(t_two_tailed_p(0.0, 5) == doctest::Approx(1.0));
    CHECK(t_two_tailed_p(2.228138851986273, 10) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("aggregate csv round trip and plots") {
    auto a = full_log(config(Mode::Untrained, 41, "a"), [](const TrialPlan& p) { return respond(p, truth(p), true, 4.25); });
    const auto table = aggregate(std::vector<SessionLog>{a}, "untrained");
    const std::string csv = aggregate_csv(table.group);
    CHECK(csv.rfind("group,size,delta,mean_accuracy,mean_confidence,mean_time,same_count\n", 0) == 0);
    const auto back = parse_aggregate_csv(csv);
    REQUIRE(back.size() == table.group.size());
    for (std::size_t k = 0; k < back.size(); ++k) {
        CHECK(back[k].group == "untrained");
        CHECK(back[k].delta_steps == table.group[k].delta_steps);
        CHECK(back[k].mean_time == doctest::Approx(4.25));
        CHECK(back[k].same_count == table.group[k].same_count);
    }
    for (auto q : {PlotQuantity::Accuracy, PlotQuantity::Time, PlotQuantity::Confidence}) {
        const std::string svg = plot_svg(back, q);
        CHECK(svg.rfind("<svg", 0) == 0);
        CHECK(svg.find("polyline") != std::string::npos);
        CHECK(svg == plot_svg(back, q));
    }
    CHECK_THROWS_AS(parse_aggregate_csv("nonsense\n1,2\n"), InvalidArgument);
}

TEST_CASE("log files are discovered recursively") {
    const auto dir = oracle::fresh_temp_dir("logs");
    for (int p = 0; p < 3; ++p) {
        auto log = full_log(config(Mode::Untrained, 50 + p, "r" + std::to_string(p)),
                            [](const TrialPlan& plan) { return respond(plan, truth(plan), true, 2.0); });
        std::filesystem::create_directories(dir / "sub");
        std::ofstream(dir / "sub" / (log.session_id + ".jsonl")) << serialize_session_log(log);
    }
    std::ofstream(dir / "notes.txt") << "ignored";
    const auto logs = read_session_logs(dir);
    REQUIRE(logs.size() == 3);
    CHECK(logs[0].config.participant_id == "r0");
    CHECK(overall_accuracy(logs[1]) == 1.0);
    std::filesystem::remove_all(dir);
}
