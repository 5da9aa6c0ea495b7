#include "glns/sandbox.hpp"

#include <chrono>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace glns {

// ---- protocol ------------------------------------------------------------------------------

nlohmann::json solution_to_json(const Solution& solution) {
    if (const auto* t = std::get_if<TourSolution>(&solution)) return t->tour;
    return std::get<RouteSolution>(solution).routes;
}

Solution solution_from_json(const nlohmann::json& doc, ProblemKind kind) {
    try {
        if (kind == ProblemKind::TSP) return TourSolution{doc.get<std::vector<int>>()};
        return RouteSolution{doc.get<std::vector<std::vector<int>>>()};
    } catch (const nlohmann::json::exception&) {
        throw OperatorError(kind == ProblemKind::TSP ? "expected a list of node indices" : "expected a list of routes");
    }
}

nlohmann::json instance_payload(const Instance& instance, const std::string& instance_id) {
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& p : instance.coords()) coords.push_back({p.x, p.y});
    nlohmann::json matrix = nlohmann::json::array();
    for (int i = 0; i < instance.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < instance.size(); ++j) row.push_back(instance.dist(i, j));
        matrix.push_back(std::move(row));
    }
    nlohmann::json doc{{"instance_id", instance_id},
                       {"kind", std::string(to_string(instance.kind()))},
                       {"coords", coords},
                       {"distance_matrix", matrix}};
    if (is_routing(instance.kind())) {
        std::vector<int> demands;
        for (int i = 0; i < instance.size(); ++i) demands.push_back(instance.demand(i));
        doc["demands"] = demands;
        doc["capacity"] = instance.capacity();
        doc["depot"] = instance.depot();
        doc["open_routes"] = instance.kind() == ProblemKind::OVRP;
    }
    return doc;
}

std::string serialize_request(const nlohmann::json& request) { return request.dump() + "\n"; }

nlohmann::json parse_request(std::string_view line) {
    try {
        auto doc = nlohmann::json::parse(line);
        if (!doc.is_object() || !doc.contains("seq") || !doc.contains("op"))
            throw FormatError("sandbox request needs 'seq' and 'op'");
        return doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed sandbox request: ") + e.what());
    }
}

std::string serialize_reply(const SandboxReply& reply) {
    nlohmann::json doc{{"seq", reply.seq}, {"status", reply.status}};
    if (reply.ok()) doc["result"] = reply.result;
    else doc["error"] = {{"message", reply.message}, {"category", reply.category}};
    return doc.dump() + "\n";
}

SandboxReply parse_reply(std::string_view line) {
    try {
        auto doc = nlohmann::json::parse(line);
        SandboxReply r;
        r.seq = doc.at("seq").get<std::uint64_t>();
        r.status = doc.at("status").get<std::string>();
        if (r.status != "ok" && r.status != "error" && r.status != "timeout")
            throw SandboxError("unknown reply status '" + r.status + "'");
        if (r.ok()) {
            if (!doc.contains("result")) throw SandboxError("ok reply without a result");
            r.result = doc["result"];
        } else {
            const auto& err = doc.at("error");
            r.message = err.value("message", std::string());
            r.category = err.value("category", std::string(r.status == "timeout" ? "timeout" : "runtime"));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw SandboxError(std::string("malformed sandbox reply: ") + e.what());
    }
}

// ---- session ----------------------------------------------------------------------------------

namespace {

std::string fingerprint(const Instance& instance) {
    // FNV-1a over everything that defines the instance
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    const int kind = static_cast<int>(instance.kind());
    mix(&kind, sizeof kind);
    for (const auto& pt : instance.coords()) {
        mix(&pt.x, sizeof pt.x);
        mix(&pt.y, sizeof pt.y);
    }
    if (is_routing(instance.kind())) {
        for (int i = 0; i < instance.size(); ++i) {
            const int d = instance.demand(i);
            mix(&d, sizeof d);
        }
        const int cap = instance.capacity();
        mix(&cap, sizeof cap);
    }
    return instance.name() + "#" + std::to_string(h);
}

using Clock = std::chrono::steady_clock;

}  // namespace

SandboxSession::SandboxSession(SandboxOptions options) : options_(std::move(options)) {
    if (options_.command.empty()) throw ConfigError("sandbox command is empty");
    spawn();
}

SandboxSession::~SandboxSession() {
    try {
        shutdown();
    } catch (...) {
    }
}

void SandboxSession::spawn() {
    std::signal(SIGPIPE, SIG_IGN);
    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0) throw SandboxError(std::string("pipe: ") + std::strerror(errno));
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw SandboxError(std::string("pipe: ") + std::strerror(errno));
    }
    int status_pipe[2];  // reports exec failure to the parent
    if (pipe2(status_pipe, O_CLOEXEC) != 0) throw SandboxError(std::string("pipe: ") + std::strerror(errno));

    const pid_t pid = fork();
    if (pid < 0) throw SandboxError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        if (options_.silence_stderr) {
            const int devnull = open("/dev/null", O_WRONLY);
            if (devnull >= 0) dup2(devnull, STDERR_FILENO);
        }
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(status_pipe[0]);
        std::vector<char*> argv;
        for (auto& a : options_.command) argv.push_back(a.data());
        argv.push_back(nullptr);
        execvp(argv[0], argv.data());
        const int err = errno;
        [[maybe_unused]] auto n = write(status_pipe[1], &err, sizeof err);
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    close(status_pipe[1]);
    int exec_errno = 0;
    const auto got = read(status_pipe[0], &exec_errno, sizeof exec_errno);
    close(status_pipe[0]);
    pid_ = pid;
    to_worker_ = in_pipe[1];
    from_worker_ = out_pipe[0];
    buffer_.clear();
    if (got == static_cast<ssize_t>(sizeof exec_errno)) {
        kill_worker();
        throw SandboxError("cannot start sandbox worker '" + options_.command[0] + "': " + std::strerror(exec_errno));
    }

    nlohmann::json hello{{"op", "ping"}, {"proto_version", kSandboxProtoVersion}};
    SandboxReply reply = exchange(hello, options_.default_timeout_ms);
    if (!reply.ok()) {
        kill_worker();
        throw SandboxError("sandbox worker failed the handshake: " + reply.message);
    }
    const int version = reply.result.value("proto_version", -1);
    if (version != kSandboxProtoVersion) {
        kill_worker();
        throw SandboxError("sandbox worker speaks protocol " + std::to_string(version) + ", expected " +
                           std::to_string(kSandboxProtoVersion));
    }
}

void SandboxSession::kill_worker() {
    if (to_worker_ >= 0) close(to_worker_);
    if (from_worker_ >= 0) close(from_worker_);
    to_worker_ = from_worker_ = -1;
    if (pid_ > 0) {
        kill(pid_, SIGKILL);
        waitpid(pid_, nullptr, 0);
    }
    pid_ = -1;
    buffer_.clear();
}

void SandboxSession::respawn() {
    kill_worker();
    ++restarts_;
    spawn();
    for (const auto& [id, payload] : instances_) {
        nlohmann::json req = payload;
        req["op"] = "instance";
        exchange(req, options_.default_timeout_ms);
    }
    for (const auto& [id, entry] : loaded_) {
        nlohmann::json req{{"op", "load"}, {"id", id}, {"source", entry.first}, {"kind", std::string(to_string(entry.second))}};
        exchange(req, options_.default_timeout_ms);
    }
}

// Sends one request and waits for the matching reply. A timeout or a dead
// worker is reported as a reply; the caller decides whether to respawn.
SandboxReply SandboxSession::exchange(nlohmann::json& request, int timeout_ms) {
    lost_ = false;
    request["seq"] = ++seq_;
    const std::uint64_t seq = seq_;
    auto failure = [&](const std::string& status, const std::string& category, const std::string& message) {
        lost_ = true;
        SandboxReply r;
        r.seq = seq;
        r.status = status;
        r.category = category;
        r.message = message;
        return r;
    };
    if (pid_ <= 0) return failure("error", "runtime", "sandbox worker is not running");

    const std::string line = serialize_request(request);
    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = write(to_worker_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            return failure("error", "runtime", "sandbox worker closed its input");
        }
        written += static_cast<std::size_t>(n);
    }

    const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms + options_.grace_ms);
    while (true) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string reply_line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            SandboxReply reply = parse_reply(reply_line);
            if (reply.seq < seq) continue;  // stale reply from an earlier request
            if (reply.seq != seq) throw SandboxError("sandbox reply out of order");
            return reply;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
        if (left <= 0) return failure("timeout", "timeout", "operator exceeded " + std::to_string(timeout_ms) + " ms");
        pollfd pfd{from_worker_, POLLIN, 0};
        const int ready = poll(&pfd, 1, static_cast<int>(left));
        if (ready < 0) {
            if (errno == EINTR) continue;
            return failure("error", "runtime", std::string("poll: ") + std::strerror(errno));
        }
        if (ready == 0) continue;
        char chunk[65536];
        const auto n = read(from_worker_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return failure("error", "runtime", "sandbox worker exited");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

SandboxReply SandboxSession::call(nlohmann::json request, int timeout_ms) {
    std::lock_guard lock(mutex_);
    if (timeout_ms <= 0) timeout_ms = options_.default_timeout_ms;
    if (pid_ <= 0) respawn();
    request["timeout_ms"] = timeout_ms;
    SandboxReply reply = exchange(request, timeout_ms);
    if (lost_) respawn();
    return reply;
}

SandboxReply SandboxSession::ping() {
    return call({{"op", "ping"}, {"proto_version", kSandboxProtoVersion}}, options_.default_timeout_ms);
}

SandboxReply SandboxSession::load(const std::string& id, const std::string& source, OperatorKind kind) {
    std::lock_guard lock(mutex_);
    SandboxReply reply =
        call({{"op", "load"}, {"id", id}, {"source", source}, {"kind", std::string(to_string(kind))}}, 0);
    if (reply.ok()) loaded_[id] = {source, kind};
    return reply;
}

std::string SandboxSession::register_instance(const Instance& instance) {
    std::lock_guard lock(mutex_);
    const std::string key = fingerprint(instance);
    if (auto it = instance_ids_.find(key); it != instance_ids_.end()) return it->second;
    const std::string id = "inst" + std::to_string(instance_ids_.size());
    nlohmann::json payload = instance_payload(instance, id);
    nlohmann::json req = payload;
    req["op"] = "instance";
    SandboxReply reply = call(req, 0);
    if (!reply.ok()) throw SandboxError("sandbox rejected instance '" + instance.name() + "': " + reply.message);
    instances_[id] = std::move(payload);
    instance_ids_[key] = id;
    return id;
}

SandboxReply SandboxSession::destroy(const std::string& id, const Solution& solution, int count,
                                     const std::string& instance_id, std::uint64_t seed, int timeout_ms) {
    return call({{"op", "destroy"},
                 {"id", id},
                 {"solution", solution_to_json(solution)},
                 {"count", count},
                 {"instance_id", instance_id},
                 {"seed", seed}},
                timeout_ms);
}

SandboxReply SandboxSession::repair(const std::string& id, const Solution& partial, const std::vector<int>& removed,
                                    const std::string& instance_id, std::uint64_t seed, int timeout_ms) {
    return call({{"op", "repair"},
                 {"id", id},
                 {"partial", solution_to_json(partial)},
                 {"removed", removed},
                 {"instance_id", instance_id},
                 {"seed", seed}},
                timeout_ms);
}

void SandboxSession::shutdown() {
    std::lock_guard lock(mutex_);
    if (pid_ <= 0) return;
    nlohmann::json req{{"op", "shutdown"}};
    exchange(req, 200);
    kill_worker();
}

// ---- operator adapters ------------------------------------------------------------------------

namespace {

std::string describe_failure(const SandboxReply& reply) {
    return "sandbox " + reply.category + " error: " + reply.message;
}

class SandboxDestroy final : public DestroyOperator {
public:
    SandboxDestroy(std::shared_ptr<SandboxSession> session, std::string id, int timeout_ms)
        : session_(std::move(session)), id_(std::move(id)), timeout_ms_(timeout_ms) {}

    DestroyOutcome apply(const Solution& solution, int count, const Instance& instance, Rng& rng) const override {
        const std::string inst = session_->register_instance(instance);
        const std::uint64_t seed = rng.next_u64() >> 11;
        SandboxReply reply = session_->destroy(id_, solution, count, inst, seed, timeout_ms_);
        if (!reply.ok()) throw OperatorError(describe_failure(reply));
        try {
            DestroyOutcome out;
            out.removed = reply.result.at("removed").get<std::vector<int>>();
            out.partial = solution_from_json(reply.result.at("partial"), instance.kind());
            return out;
        } catch (const nlohmann::json::exception&) {
            throw OperatorError("sandbox contract error: destroy must return removed elements and a partial solution");
        }
    }

private:
    std::shared_ptr<SandboxSession> session_;
    std::string id_;
    int timeout_ms_;
};

class SandboxRepair final : public RepairOperator {
public:
    SandboxRepair(std::shared_ptr<SandboxSession> session, std::string id, int timeout_ms)
        : session_(std::move(session)), id_(std::move(id)), timeout_ms_(timeout_ms) {}

    Solution apply(const Solution& partial, const std::vector<int>& removed, const Instance& instance,
                   Rng& rng) const override {
        const std::string inst = session_->register_instance(instance);
        const std::uint64_t seed = rng.next_u64() >> 11;
        SandboxReply reply = session_->repair(id_, partial, removed, inst, seed, timeout_ms_);
        if (!reply.ok()) throw OperatorError(describe_failure(reply));
        return solution_from_json(reply.result, instance.kind());
    }

private:
    std::shared_ptr<SandboxSession> session_;
    std::string id_;
    int timeout_ms_;
};

}  // namespace

std::shared_ptr<const DestroyOperator> sandbox_destroy(std::shared_ptr<SandboxSession> session, std::string id,
                                                       int timeout_ms) {
    return std::make_shared<SandboxDestroy>(std::move(session), std::move(id), timeout_ms);
}

std::shared_ptr<const RepairOperator> sandbox_repair(std::shared_ptr<SandboxSession> session, std::string id,
                                                     int timeout_ms) {
    return std::make_shared<SandboxRepair>(std::move(session), std::move(id), timeout_ms);
}

}  // namespace glns
