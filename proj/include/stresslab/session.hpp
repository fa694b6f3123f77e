#pragma once

#include "stresslab/experiment.hpp"
#include "stresslab/io.hpp"
#include "stresslab/stimulus.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace httplib {
class Server;
}

namespace stresslab {

enum class SessionStatus { InTraining, FailedGate, InMain, Complete };
std::string_view to_string(SessionStatus status);

/// Points inside a durable append where a fault can be injected.
enum class WritePoint {
    BeforeAppend,   // nothing written yet
    PartialAppend,  // half of the line written, no newline
    AfterWrite,     // full line written, not yet synced
    AfterSync,      // line durable, reply not yet built
};

struct ServiceOptions {
    std::filesystem::path data_root;
    /// Produces opaque session tokens; random by default.
    std::function<std::string()> token_source;
    /// Test hook invoked at every write point; throwing simulates a crash there.
    std::function<void(WritePoint)> fault_hook;
};

/// Keys that must never appear in a payload sent before the session completes
/// (outside the feedback block of a trained-feedback training reply).
const std::vector<std::string>& hidden_payload_keys();

/// Opaque drawing token used in stimulus URLs instead of the corpus ref.
std::string drawing_token(const DrawingKey& key);

/// Session store and request handlers behind the HTTP API.
///
/// Every session is an append-only JSONL log under
/// <data_root>/studies/<study_id>/sessions/<session_id>.jsonl. A response is
/// fsynced before any reply is built, and logs are replayed on construction,
/// dropping a torn final line.
class SessionService {
public:
    SessionService(std::shared_ptr<const Corpus> corpus, ServiceOptions options);

    json create_session(const json& request);
    json current(const std::string& session_id);
    json submit_response(const std::string& session_id, const json& record);
    json submit_questionnaire(const std::string& session_id, const json& answers);
    /// Deterministic tar with manifest.json and sessions/<id>.jsonl.
    std::string export_study(const std::string& study_id);
    /// SVG for a drawing token; throws NotFoundError for unknown tokens.
    std::string drawing_svg(const std::string& token) const;

    SessionStatus status(const std::string& session_id);
    std::size_t session_count() const;

private:
    struct Session {
        std::mutex mutex;
        std::string id;
        SessionConfig config;
        std::vector<TrialPlan> plans;
        std::vector<ResponseRecord> responses;
        bool questionnaire_done = false;
        SessionStatus status = SessionStatus::InTraining;
        std::filesystem::path log_path;
    };

    std::shared_ptr<Session> find(const std::string& id) const;
    void replay_existing();
    void refresh_status(Session& s) const;
    void resync(Session& s) const;
    void append_line(const std::filesystem::path& path, const std::string& line) const;
    json trial_payload(const Session& s, std::size_t cursor) const;
    json questionnaire_payload(const Session& s) const;
    json current_locked(const Session& s) const;
    json reply_after_response(const Session& s) const;
    std::filesystem::path study_dir(const std::string& study_id) const;

    std::shared_ptr<const Corpus> corpus_;
    StimulusCatalog catalog_;
    std::map<std::string, DrawingKey> tokens_;
    ServiceOptions options_;

    mutable std::mutex mutex_;  // guards the maps below
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::map<std::string, std::map<std::string, std::string>> participants_;  // study -> participant -> session
};

/// Deterministic tar of a study's session logs (torn tails dropped) plus manifest.json.
std::string export_study_archive(const std::filesystem::path& data_root, const std::string& study_id);
/// Session logs contained in an archive produced by export_study_archive.
std::vector<SessionLog> read_study_archive(std::string_view archive);

/// Registers the HTTP routes:
///   POST /sessions, GET /sessions/{id}/current, POST /sessions/{id}/responses,
///   POST /sessions/{id}/questionnaire, GET /studies/{id}/export, GET /drawings/{token}.svg
void register_routes(httplib::Server& server, SessionService& service);

/// HTTP status for a library error (400, 404, 409, 410 or 500).
int http_status_for(const std::exception& e);

}  // namespace stresslab
