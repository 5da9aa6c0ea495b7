#ifndef GLNS_SANDBOX_HPP
#define GLNS_SANDBOX_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "glns/operators.hpp"
#include "glns/problem.hpp"

namespace glns {

inline constexpr int kSandboxProtoVersion = 1;

/// One decoded reply line: status is "ok", "error" or "timeout".
struct SandboxReply {
    std::uint64_t seq = 0;
    std::string status;
    nlohmann::json result;
    std::string message;
    std::string category;  // syntax, runtime, contract, timeout; empty when ok

    bool ok() const { return status == "ok"; }
};

nlohmann::json solution_to_json(const Solution& solution);
Solution solution_from_json(const nlohmann::json& doc, ProblemKind kind);

/// Payload of the `instance` op: coordinates, demands, capacity, depot and the distance matrix.
nlohmann::json instance_payload(const Instance& instance, const std::string& instance_id);

std::string serialize_request(const nlohmann::json& request);
nlohmann::json parse_request(std::string_view line);
std::string serialize_reply(const SandboxReply& reply);
SandboxReply parse_reply(std::string_view line);

struct SandboxOptions {
    std::vector<std::string> command{"python3", "-m", "glns_sandbox"};
    int default_timeout_ms = 2000;
    int grace_ms = 500;        // slack added on top of a call's budget before the worker is killed
    bool silence_stderr = true;
};

/**
 * Client side of a worker process speaking line-delimited JSON on stdin/stdout.
 * Requests carry a monotonically increasing `seq` that the reply must echo.
 * When a call overruns its budget the worker is killed and respawned, and the
 * registered instances and loaded operators are replayed into the new worker.
 * All calls are serialized.
 */
class SandboxSession {
public:
    explicit SandboxSession(SandboxOptions options = {});
    ~SandboxSession();
    SandboxSession(const SandboxSession&) = delete;
    SandboxSession& operator=(const SandboxSession&) = delete;

    SandboxReply ping();
    SandboxReply load(const std::string& id, const std::string& source, OperatorKind kind);
    /// Registers the instance once per content and returns its id.
    std::string register_instance(const Instance& instance);
    SandboxReply destroy(const std::string& id, const Solution& solution, int count, const std::string& instance_id,
                         std::uint64_t seed, int timeout_ms = 0);
    SandboxReply repair(const std::string& id, const Solution& partial, const std::vector<int>& removed,
                        const std::string& instance_id, std::uint64_t seed, int timeout_ms = 0);
    void shutdown();

    int restarts() const { return restarts_; }
    bool running() const { return pid_ > 0; }

private:
    SandboxReply call(nlohmann::json request, int timeout_ms);
    SandboxReply exchange(nlohmann::json& request, int timeout_ms);
    void spawn();
    void kill_worker();
    void respawn();

    SandboxOptions options_;
    std::recursive_mutex mutex_;
    int pid_ = -1;
    int to_worker_ = -1;
    int from_worker_ = -1;
    std::string buffer_;
    std::uint64_t seq_ = 0;
    int restarts_ = 0;
    bool lost_ = false;  // last exchange timed out or the worker died
    std::map<std::string, std::pair<std::string, OperatorKind>> loaded_;
    std::map<std::string, nlohmann::json> instances_;  // id -> payload
    std::map<std::string, std::string> instance_ids_;  // fingerprint -> id
};

/// Operators that forward each call to a session. Replies other than ok raise OperatorError.
std::shared_ptr<const DestroyOperator> sandbox_destroy(std::shared_ptr<SandboxSession> session, std::string id,
                                                       int timeout_ms = 0);
std::shared_ptr<const RepairOperator> sandbox_repair(std::shared_ptr<SandboxSession> session, std::string id,
                                                     int timeout_ms = 0);

}  // namespace glns

#endif
