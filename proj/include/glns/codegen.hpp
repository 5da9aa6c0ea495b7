#ifndef GLNS_CODEGEN_HPP
#define GLNS_CODEGEN_HPP

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "glns/operators.hpp"
#include "glns/problem.hpp"

namespace glns {

enum class Action { I1, I2, M1, M2, C1, C2 };

std::string_view to_string(Action action);
Action parse_action(std::string_view text);

/// Operator kind an action produces; C2 produces both and reports Destroy.
OperatorKind action_kind(Action action);

struct GenerationRequest {
    Action action = Action::I1;
    ProblemKind problem = ProblemKind::TSP;
    std::vector<OperatorRecord> parents;     // m: 1, c1: 2 of the same kind, c2: destroy then repair
    std::vector<OperatorRecord> references;  // i1/i2 context

    void validate() const;
};

/// Problem statement inserted into every prompt.
std::string_view task_description(ProblemKind problem);

/// Fills the action's template. Byte-stable for identical requests.
std::string render_prompt(const GenerationRequest& request);

struct Artifact {
    OperatorKind kind = OperatorKind::Destroy;
    std::string source;
};

struct GenerationResponse {
    std::string description;
    std::vector<Artifact> artifacts;
    std::string raw;
};

/**
 * Extracts the first {description} outside code fences and the fenced code
 * blocks. For c2 the single block is split at the top-level `destroy` and
 * `repair`/`insert` definitions.
 */
GenerationResponse parse_response(std::string_view text, Action action);

/// Hex SHA-256.
std::string sha256_hex(std::string_view data);

struct CallContext {
    Action action = Action::I1;
    std::uint64_t nonce = 0;  // caller-supplied; the mock folds it into its seed
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string generate(const std::string& prompt, const CallContext& context) = 0;
    virtual std::string name() const = 0;
};

struct MockOptions {
    std::uint64_t seed = 0;
    double fault_rate = 0.0;  // chance of answering with a deliberately broken operator or no code
};

/**
 * Offline backend. Reads only the prompt: the action and problem come from the
 * template text, parent operators from their `# glns-template:` lines. The reply
 * is a pure function of (prompt, seed, nonce) and always parses.
 */
class MockBackend final : public Backend {
public:
    explicit MockBackend(MockOptions options = {}) : options_(options) {}
    std::string generate(const std::string& prompt, const CallContext& context) override;
    std::string name() const override { return "mock"; }

private:
    MockOptions options_;
};

struct RemoteOptions {
    std::string endpoint;  // full URL of a chat-completions route
    std::string api_key;
    std::string model = "deepseek-chat";
    double temperature = 1.0;
    int max_tokens = 4096;
    int retries = 3;
    int backoff_ms = 500;
    int timeout_s = 120;

    /// GLNS_LLM_ENDPOINT, GLNS_LLM_KEY, GLNS_LLM_MODEL override the corresponding fields.
    void apply_environment();
};

class RemoteBackend final : public Backend {
public:
    explicit RemoteBackend(RemoteOptions options);
    std::string generate(const std::string& prompt, const CallContext& context) override;
    std::string name() const override { return "remote"; }

private:
    RemoteOptions options_;
    std::string base_;
    std::string path_;
};

/// JSON-lines log of backend calls: {ts, action, prompt_sha, response, latency_ms}.
class Transcript {
public:
    Transcript() = default;
    explicit Transcript(const std::filesystem::path& path);

    void append(Action action, const std::string& prompt, const std::string& response, double latency_ms);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::ofstream out_;
    std::size_t count_ = 0;
};

/// Backend wrapper that records every call in a transcript.
class RecordingBackend final : public Backend {
public:
    RecordingBackend(Backend& inner, Transcript& transcript) : inner_(inner), transcript_(transcript) {}
    std::string generate(const std::string& prompt, const CallContext& context) override;
    std::string name() const override { return inner_.name(); }

private:
    Backend& inner_;
    Transcript& transcript_;
};

}  // namespace glns

#endif
