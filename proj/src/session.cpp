#include "stresslab/session.hpp"

#include "stresslab/error.hpp"
#include "stresslab/rng.hpp"
#include "stresslab/tar.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>
#include <httplib.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <random>

namespace stresslab {

namespace fs = std::filesystem;

std::string_view to_string(SessionStatus status) {
    switch (status) {
        case SessionStatus::InTraining: return "in-training";
        case SessionStatus::FailedGate: return "failed-gate";
        case SessionStatus::InMain: return "in-main";
        case SessionStatus::Complete: return "complete";
    }
    return "?";
}

const std::vector<std::string>& hidden_payload_keys() {
    static const std::vector<std::string> keys{"ksm", "delta", "delta_steps", "correct_answer", "level", "target", "ref"};
    return keys;
}

std::string drawing_token(const DrawingKey& key) {
    return fmt::format("{:016x}", mix64(hash_label(key.ref()) ^ 0x5eed5eed5eed5eedULL));
}

namespace {

const json& questionnaire_questions() {
    static const json questions = json::array({
        {{"id", "strategy"}, {"type", "text"}, {"prompt", "What strategy did you use to decide which drawing had lower stress?"}},
        {{"id", "overall_confidence"},
         {"type", "choice"},
         {"prompt", "Overall, how confident are you in your responses?"},
         {"options", {"Very confident", "Somewhat confident", "Not very confident", "Not confident at all"}}},
        {{"id", "difficulty"},
         {"type", "choice"},
         {"prompt", "How difficult did you find the experiment?"},
         {"options", {"Very difficult", "Difficult", "Easy", "Very Easy"}}},
        {{"id", "familiarity"},
         {"type", "choice"},
         {"prompt", "How familiar are you with network diagrams?"},
         {"options", {"Very familiar", "Somewhat familiar", "Not very familiar", "They are new to me"}}},
        {{"id", "age_range"},
         {"type", "choice"},
         {"prompt", "Age range"},
         {"options", {"18-25", "26-35", "36-45", "46-55", "56-65", "66-75", "76+", "Prefer not to say"}}},
        {{"id", "gender"}, {"type", "text"}, {"prompt", "Gender"}},
    });
    return questions;
}

void validate_questionnaire(const json& answers) {
    if (!answers.is_object()) throw InvalidArgument("questionnaire answers must be an object");
    for (const auto& q : questionnaire_questions()) {
        const auto id = q.at("id").get<std::string>();
        auto it = answers.find(id);
        if (it == answers.end() || !it->is_string() || it->get<std::string>().empty())
            throw InvalidArgument(fmt::format("questionnaire field '{}' is required", id));
        if (q.contains("options")) {
            const auto& options = q.at("options");
            if (std::find(options.begin(), options.end(), *it) == options.end())
                throw InvalidArgument(fmt::format("'{}' is not an option for '{}'", it->get<std::string>(), id));
        }
    }
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    return fmt::format("{}.{:03d}Z", buf, static_cast<int>(ms));
}

std::string random_token() {
    std::random_device rd;
    std::uint64_t hi = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    std::uint64_t lo = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    return fmt::format("{:016x}{:016x}", hi, lo);
}

bool valid_token(const std::string& s) {
    return !s.empty() && s.size() <= 64 &&
           std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'; });
}

}  // namespace

SessionService::SessionService(std::shared_ptr<const Corpus> corpus, ServiceOptions options)
    : corpus_(std::move(corpus)), options_(std::move(options)) {
    if (!corpus_) throw InvalidArgument("session service needs a corpus");
    if (options_.data_root.empty()) throw InvalidArgument("session service needs a data directory");
    if (!options_.token_source) options_.token_source = random_token;
    catalog_ = corpus_->catalog();
    for (const auto& [key, ksm] : catalog_) tokens_.emplace(drawing_token(key), key);
    fs::create_directories(options_.data_root / "studies");
    replay_existing();
}

fs::path SessionService::study_dir(const std::string& study_id) const {
    if (!valid_token(study_id)) throw InvalidArgument(fmt::format("invalid study id '{}'", study_id));
    return options_.data_root / "studies" / study_id;
}

void SessionService::refresh_status(Session& s) const {
    const std::size_t cursor = s.responses.size();
    const std::size_t training = s.config.mode == Mode::Expert ? 0 : kTrainingTrials;
    if (s.config.mode == Mode::TrainedFeedback && cursor >= training) {
        std::vector<GradedTrial> graded;
        for (std::size_t k = 0; k < training; ++k)
            graded.push_back({s.plans[k], s.responses[k], grade(s.plans[k], s.responses[k])});
        if (!training_gate(graded)) {
            s.status = SessionStatus::FailedGate;
            return;
        }
    }
    if (cursor < training)
        s.status = SessionStatus::InTraining;
    else if (cursor < s.plans.size())
        s.status = SessionStatus::InMain;
    else
        s.status = SessionStatus::Complete;
}

void SessionService::replay_existing() {
    const fs::path studies = options_.data_root / "studies";
    for (const auto& study : fs::directory_iterator(studies)) {
        const fs::path sessions = study.path() / "sessions";
        if (!fs::is_directory(sessions)) continue;
        for (const auto& file : fs::directory_iterator(sessions)) {
            if (file.path().extension() != ".jsonl") continue;
            const std::string text = read_text_file(file.path());
            ParsedLog parsed;
            try {
                parsed = parse_session_log(text);
            } catch (const InvalidArgument&) {
                // A torn header means the session was never acknowledged.
                if (text.find('\n') == std::string::npos) {
                    fs::remove(file.path());
                    continue;
                }
                throw;
            }
            if (parsed.torn_tail) fs::resize_file(file.path(), parsed.durable_bytes);

            auto s = std::make_shared<Session>();
            s->id = parsed.log.session_id;
            s->config = parsed.log.config;
            s->plans = std::move(parsed.log.plans);
            s->responses = std::move(parsed.log.responses);
            s->questionnaire_done = parsed.log.questionnaire.has_value();
            s->log_path = file.path();
            refresh_status(*s);
            participants_[s->config.study_id][s->config.participant_id] = s->id;
            sessions_.emplace(s->id, std::move(s));
        }
    }
}

// After a failed append the file is the authority: drop any torn tail and reload what is durable.
void SessionService::resync(Session& s) const {
    const auto parsed = parse_session_log(read_text_file(s.log_path));
    if (parsed.torn_tail) fs::resize_file(s.log_path, parsed.durable_bytes);
    s.responses = parsed.log.responses;
    s.questionnaire_done = parsed.log.questionnaire.has_value();
    refresh_status(s);
}

void SessionService::append_line(const fs::path& path, const std::string& line) const {
    auto hook = [this](WritePoint p) {
        if (options_.fault_hook) options_.fault_hook(p);
    };
    hook(WritePoint::BeforeAppend);

    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(fmt::format("cannot open {}: {}", path.string(), std::strerror(errno)));
    struct Closer {
        int fd;
        ~Closer() { ::close(fd); }
    } closer{fd};
    const off_t original = ::lseek(fd, 0, SEEK_END);

    auto write_all = [&](const char* data, std::size_t size) {
        while (size > 0) {
            const ssize_t n = ::write(fd, data, size);
            if (n < 0) {
                if (errno == EINTR) continue;
                const int err = errno;
                if (::ftruncate(fd, original) != 0) { /* leave the torn tail for replay to drop */ }
                throw Error(fmt::format("write to {} failed: {}", path.string(), std::strerror(err)));
            }
            data += n;
            size -= static_cast<std::size_t>(n);
        }
    };
    const std::size_t half = line.size() / 2;
    write_all(line.data(), half);
    hook(WritePoint::PartialAppend);
    write_all(line.data() + half, line.size() - half);
    hook(WritePoint::AfterWrite);
    if (::fsync(fd) != 0) throw Error(fmt::format("fsync of {} failed: {}", path.string(), std::strerror(errno)));
    hook(WritePoint::AfterSync);
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError(fmt::format("no session '{}'", id));
    return it->second;
}

json SessionService::create_session(const json& request) {
    SessionConfig config = config_from_json(request);
    if (!request.contains("seed"))
        config.seed = mix64(hash_label(config.study_id) ^ mix64(hash_label(config.participant_id)));
    config.validate();
    const fs::path dir = study_dir(config.study_id) / "sessions";

    const auto sizes = corpus_->sizes();
    for (int size : config.block_sizes())
        if (std::find(sizes.begin(), sizes.end(), size) == sizes.end())
            throw NotFoundError(fmt::format("no stimuli for graph size {}", size));

    auto s = std::make_shared<Session>();
    s->config = config;
    s->plans = schedule_session(config, catalog_);

    std::unique_lock lock(mutex_);
    if (participants_[config.study_id].contains(config.participant_id))
        throw ConflictError(
            fmt::format("participant '{}' already took part in study '{}'", config.participant_id, config.study_id));
    do {
        s->id = options_.token_source();
        if (!valid_token(s->id)) throw Error("token source produced an invalid session id");
    } while (sessions_.contains(s->id));
    s->log_path = dir / (s->id + ".jsonl");
    fs::create_directories(dir);
    try {
        append_line(s->log_path, log_header_json(s->id, s->config, s->plans).dump() + "\n");
    } catch (...) {
        std::error_code ec;
        fs::remove(s->log_path, ec);
        throw;
    }
    refresh_status(*s);
    participants_[config.study_id][config.participant_id] = s->id;
    sessions_.emplace(s->id, s);
    lock.unlock();

    std::lock_guard session_lock(s->mutex);
    json reply{{"v", 1}, {"type", "session"}, {"session_id", s->id}, {"status", to_string(s->status)}};
    reply["trial"] = trial_payload(*s, 0);
    return reply;
}

json SessionService::trial_payload(const Session& s, std::size_t cursor) const {
    const auto& plan = s.plans[cursor];
    const auto blocks = s.config.block_sizes();
    const auto block = std::find(blocks.begin(), blocks.end(), plan.size) - blocks.begin();
    const bool new_block = cursor > 0 && s.plans[cursor - 1].size != plan.size;
    return {{"v", 1},
            {"type", "trial"},
            {"session_id", s.id},
            {"trial_index", plan.trial_index},
            {"kind", to_string(plan.kind)},
            {"block", {{"size", plan.size}, {"index", block + 1}, {"count", blocks.size()}}},
            {"break_before", new_block},
            {"left", {{"svg", fmt::format("/drawings/{}.svg", drawing_token(plan.left.key))}}},
            {"right", {{"svg", fmt::format("/drawings/{}.svg", drawing_token(plan.right.key))}}},
            {"options", {"left", "same", "right"}},
            {"confidence_options", {"confident", "not confident"}},
            {"progress", {{"completed", cursor}, {"total", s.plans.size()}}}};
}

json SessionService::questionnaire_payload(const Session& s) const {
    return {{"v", 1},
            {"type", "questionnaire"},
            {"session_id", s.id},
            {"status", to_string(s.status)},
            {"questionnaire", questionnaire_questions()}};
}

json SessionService::current_locked(const Session& s) const {
    switch (s.status) {
        case SessionStatus::FailedGate:
            return {{"v", 1}, {"type", "gate_failed"}, {"session_id", s.id}, {"status", to_string(s.status)}};
        case SessionStatus::Complete:
            if (!s.questionnaire_done) return questionnaire_payload(s);
            return {{"v", 1}, {"type", "complete"}, {"session_id", s.id}, {"status", to_string(s.status)}};
        default: {
            json payload = trial_payload(s, s.responses.size());
            payload["status"] = to_string(s.status);
            return payload;
        }
    }
}

json SessionService::current(const std::string& session_id) {
    auto s = find(session_id);
    std::lock_guard lock(s->mutex);
    return current_locked(*s);
}

SessionStatus SessionService::status(const std::string& session_id) {
    auto s = find(session_id);
    std::lock_guard lock(s->mutex);
    return s->status;
}

std::size_t SessionService::session_count() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

json SessionService::reply_after_response(const Session& s) const {
    const std::size_t cursor = s.responses.size();
    const auto& plan = s.plans[cursor - 1];
    const auto& response = s.responses.back();
    json reply{{"v", 1}, {"session_id", s.id}, {"status", to_string(s.status)}};

    const bool trained = s.config.mode == Mode::TrainedFeedback;
    if (trained && plan.kind == TrialKind::Training) {
        reply["feedback"] = {{"trial_index", plan.trial_index},
                             {"correct", grade(plan, response)},
                             {"correct_answer", to_string(plan.correct_answer)}};
    }
    if (trained && cursor == static_cast<std::size_t>(kTrainingTrials)) {
        int correct = 0;
        for (int k = 0; k < kTrainingTrials; ++k) correct += grade(s.plans[k], s.responses[k]) ? 1 : 0;
        reply["gate"] = {{"passed", correct >= kGatePassCount}, {"correct", correct}, {"required", kGatePassCount}};
    }

    switch (s.status) {
        case SessionStatus::FailedGate: reply["type"] = "gate_failed"; break;
        case SessionStatus::Complete:
            reply["type"] = "questionnaire";
            reply["questionnaire"] = questionnaire_questions();
            break;
        default:
            reply["type"] = reply.contains("feedback") ? "feedback" : "next";
            reply["next"] = trial_payload(s, cursor);
            break;
    }
    return reply;
}

json SessionService::submit_response(const std::string& session_id, const json& body) {
    auto s = find(session_id);
    std::lock_guard lock(s->mutex);

    ResponseRecord record = response_from_json(body);
    record.validate();
    record.received_at.reset();

    const std::size_t cursor = s->responses.size();
    if (cursor > 0) {
        // Retried submission of the trial just recorded: answer again without appending.
        const auto& last = s->responses.back();
        if (record.trial_index == last.trial_index) {
            if (record.answer == last.answer && record.confident == last.confident) return reply_after_response(*s);
            throw ConflictError(fmt::format("trial {} was already answered differently", record.trial_index));
        }
    }
    if (s->status == SessionStatus::FailedGate) throw GoneError("session ended at the training gate");
    if (s->status == SessionStatus::Complete) throw GoneError("all trials of this session are answered");
    if (record.trial_index != s->plans[cursor].trial_index)
        throw ConflictError(fmt::format("expected a response to trial {}, got trial {}", s->plans[cursor].trial_index,
                                        record.trial_index));

    record.received_at = utc_now();
    try {
        append_line(s->log_path, response_to_json(record).dump() + "\n");
    } catch (...) {
        resync(*s);
        throw;
    }
    s->responses.push_back(record);
    refresh_status(*s);
    return reply_after_response(*s);
}

json SessionService::submit_questionnaire(const std::string& session_id, const json& answers) {
    auto s = find(session_id);
    std::lock_guard lock(s->mutex);
    if (s->status == SessionStatus::FailedGate) throw GoneError("session ended at the training gate");
    if (s->status != SessionStatus::Complete) throw ConflictError("questionnaire opens after the last trial");
    if (s->questionnaire_done) throw ConflictError("questionnaire already submitted");
    validate_questionnaire(answers);

    try {
        append_line(s->log_path, json{{"v", 1}, {"type", "questionnaire"}, {"answers", answers}}.dump() + "\n");
    } catch (...) {
        resync(*s);
        throw;
    }
    s->questionnaire_done = true;

    int correct = 0, total = 0;
    for (std::size_t k = 0; k < s->plans.size(); ++k) {
        if (s->plans[k].kind != TrialKind::Main) continue;
        ++total;
        correct += grade(s->plans[k], s->responses[k]) ? 1 : 0;
    }
    return {{"v", 1},
            {"type", "complete"},
            {"session_id", s->id},
            {"status", to_string(s->status)},
            {"summary", {{"main_correct", correct}, {"main_total", total}}}};
}

std::string export_study_archive(const fs::path& data_root, const std::string& study_id) {
    if (!valid_token(study_id)) throw InvalidArgument(fmt::format("invalid study id '{}'", study_id));
    const fs::path dir = data_root / "studies" / study_id / "sessions";
    std::vector<fs::path> files;
    if (fs::is_directory(dir))
        for (const auto& f : fs::directory_iterator(dir))
            if (f.path().extension() == ".jsonl") files.push_back(f.path());
    std::sort(files.begin(), files.end());

    std::vector<TarEntry> entries;
    json sessions = json::array();
    for (const auto& f : files) {
        const std::string text = read_text_file(f);
        const auto parsed = parse_session_log(text);
        const std::string name = "sessions/" + f.filename().string();
        entries.push_back({name, text.substr(0, parsed.durable_bytes)});
        const SessionLog& log = parsed.log;
        sessions.push_back({{"file", name},
                            {"session_id", log.session_id},
                            {"participant_id", log.config.participant_id},
                            {"mode", to_string(log.config.mode)},
                            {"size", log.config.size},
                            {"records", log.responses.size()},
                            {"questionnaire", log.questionnaire.has_value()}});
    }
    json manifest{{"v", 1}, {"study_id", study_id}, {"sessions", sessions}};
    entries.insert(entries.begin(), TarEntry{"manifest.json", manifest.dump(2) + "\n"});
    return write_tar(entries);
}

std::vector<SessionLog> read_study_archive(std::string_view archive) {
    std::vector<SessionLog> logs;
    bool manifest = false;
    for (const auto& entry : read_tar(archive)) {
        if (entry.name == "manifest.json") {
            manifest = true;
            continue;
        }
        if (entry.name.size() > 6 && entry.name.ends_with(".jsonl")) logs.push_back(parse_session_log(entry.data).log);
    }
    if (!manifest) throw InvalidArgument("study archive has no manifest.json");
    return logs;
}

std::string SessionService::export_study(const std::string& study_id) {
    return export_study_archive(options_.data_root, study_id);
}

std::string SessionService::drawing_svg(const std::string& token) const {
    auto it = tokens_.find(token);
    if (it == tokens_.end()) throw NotFoundError(fmt::format("no drawing '{}'", token));
    const Drawing* d = corpus_->find(it->second);
    if (!d) throw NotFoundError(fmt::format("no drawing '{}'", token));
    return render_svg(*d);
}

int http_status_for(const std::exception& e) {
    if (dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const json::exception*>(&e)) return 400;
    if (dynamic_cast<const NotFoundError*>(&e) || dynamic_cast<const SchedulingError*>(&e)) return 404;
    if (dynamic_cast<const ConflictError*>(&e)) return 409;
    if (dynamic_cast<const GoneError*>(&e)) return 410;
    return 500;
}

namespace {

template <typename Handler>
auto guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const std::exception& e) {
            res.status = http_status_for(e);
            res.set_content(json{{"v", 1}, {"error", {{"status", res.status}, {"message", e.what()}}}}.dump(),
                            "application/json");
        }
    };
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("request body is not JSON: {}", e.what()));
    }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

void register_routes(httplib::Server& server, SessionService& service) {
    server.Post("/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    send_json(res, service.create_session(parse_body(req)), 201);
                }));
    server.Get(R"(/sessions/([A-Za-z0-9_-]+)/current)",
               guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   send_json(res, service.current(req.matches[1]));
               }));
    server.Post(R"(/sessions/([A-Za-z0-9_-]+)/responses)",
                guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    send_json(res, service.submit_response(req.matches[1], parse_body(req)));
                }));
    server.Post(R"(/sessions/([A-Za-z0-9_-]+)/questionnaire)",
                guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    send_json(res, service.submit_questionnaire(req.matches[1], parse_body(req)));
                }));
    server.Get(R"(/studies/([A-Za-z0-9_-]+)/export)",
               guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   res.set_content(service.export_study(req.matches[1]), "application/x-tar");
               }));
    server.Get(R"(/drawings/([0-9a-f]+)\.svg)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   res.set_content(service.drawing_svg(req.matches[1]), "image/svg+xml");
               }));
}

}  // namespace stresslab
