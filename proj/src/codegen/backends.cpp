#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "glns/codegen.hpp"
#include "glns/rng.hpp"

namespace glns {

// ---- mock --------------------------------------------------------------------------------

namespace {

struct Variant {
    std::string name;
    ParamMap params;
};

bool contains(std::string_view text, std::string_view needle) { return text.find(needle) != std::string_view::npos; }

std::optional<Action> detect_action(std::string_view prompt) {
    if (contains(prompt, "Synergistic Joint Crossover")) return Action::C2;
    if (contains(prompt, "by combining the ideas/logic of two parent operators")) return Action::C1;
    if (contains(prompt, "Generate novel algorithmic mechanisms or formulas")) return Action::M1;
    if (contains(prompt, "Adjust current parameter settings")) return Action::M2;
    if (contains(prompt, "design a new 'Destroy Operator'")) return Action::I1;
    if (contains(prompt, "design a new 'Repair Operator'")) return Action::I2;
    return std::nullopt;
}

ProblemKind detect_problem(std::string_view prompt) {
    const auto at = prompt.find("Problem Description:\n");
    const std::string_view rest = at == std::string_view::npos ? prompt : prompt.substr(at);
    const std::string_view line = rest.substr(0, rest.find('\n', 21));
    if (contains(line, "Open Vehicle Routing")) return ProblemKind::OVRP;
    if (contains(line, "Capacitated Vehicle Routing")) return ProblemKind::CVRP;
    return ProblemKind::TSP;
}

std::vector<std::optional<Variant>> parent_variants(std::string_view prompt) {
    std::vector<std::optional<Variant>> out;
    // every fenced block after the problem description is one parent
    std::size_t pos = prompt.find("Problem Description:\n");
    if (pos == std::string_view::npos) return out;
    while (true) {
        const auto open = prompt.find("```python\n", pos);
        if (open == std::string_view::npos) break;
        const auto close = prompt.find("```", open + 10);
        if (close == std::string_view::npos) break;
        const auto directive = parse_template_directive(prompt.substr(open + 10, close - open - 10));
        if (directive) out.push_back(Variant{directive->name, directive->params});
        else out.push_back(std::nullopt);
        pos = close + 3;
    }
    return out;
}

std::vector<const OperatorTemplate*> candidates(OperatorKind kind, ProblemKind problem, bool diagnostic) {
    std::vector<const OperatorTemplate*> out;
    for (const auto& t : operator_templates())
        if (t.kind == kind && t.supports(problem) && t.diagnostic == diagnostic) out.push_back(&t);
    return out;
}

double snap(const ParamSpec& p, double v) {
    v = std::clamp(v, p.min, p.max);
    return p.integer ? std::round(v) : v;
}

Variant random_variant(OperatorKind kind, ProblemKind problem, Rng& rng) {
    const auto pool = candidates(kind, problem, false);
    const OperatorTemplate& t = *pool[rng.index(pool.size())];
    Variant v{t.name, {}};
    for (const auto& p : t.params) v.params[p.name] = snap(p, rng.uniform(p.min, p.max));
    return v;
}

void jitter_one(Variant& v, Rng& rng) {
    const auto& t = find_template(v.name);
    if (t.params.empty()) return;
    const ParamSpec& p = t.params[rng.index(t.params.size())];
    const double span = p.max - p.min;
    double next = v.params[p.name] + rng.uniform(-0.2, 0.2) * span;
    if (p.integer && snap(p, next) == v.params[p.name]) next += rng.bernoulli(0.5) ? 1.0 : -1.0;
    v.params[p.name] = snap(p, next);
}

// another template of the same kind, inheriting whatever parameters it shares with the parent
Variant swap_logic(const Variant& parent, ProblemKind problem, Rng& rng) {
    const auto& pt = find_template(parent.name);
    auto pool = candidates(pt.kind, problem, false);
    if (pool.size() > 1)
        pool.erase(std::remove_if(pool.begin(), pool.end(), [&](const OperatorTemplate* t) { return t->name == pt.name; }),
                   pool.end());
    const OperatorTemplate& t = *pool[rng.index(pool.size())];
    Variant v{t.name, t.defaults()};
    for (auto& [k, val] : v.params) {
        auto it = parent.params.find(k);
        if (it != parent.params.end()) val = it->second;
    }
    jitter_one(v, rng);
    return v;
}

Variant blend(const Variant& inspiration, const Variant& base, Rng& rng) {
    Variant v = base;
    bool changed = false;
    for (auto& [k, val] : v.params) {
        auto it = inspiration.params.find(k);
        if (it == inspiration.params.end()) continue;
        const double a = rng.uniform();
        const double mixed = a * it->second + (1.0 - a) * val;
        const auto& t = find_template(v.name);
        const auto spec = std::find_if(t.params.begin(), t.params.end(), [&](const ParamSpec& p) { return p.name == k; });
        const double snapped = snap(*spec, mixed);
        changed = changed || snapped != val;
        val = snapped;
    }
    if (!changed) jitter_one(v, rng);
    return v;
}

std::string describe(const Variant& v) {
    return find_template(v.name).summary + " (" + v.name + ")";
}

std::string respond(const std::string& description, const std::string& source) {
    return "{" + description + "}\n\n```python\n" + source + "```\n";
}

}  // namespace

std::string MockBackend::generate(const std::string& prompt, const CallContext& context) {
    const std::string digest = sha256_hex(prompt);
    const std::uint64_t prompt_key = std::stoull(digest.substr(0, 16), nullptr, 16);
    Rng rng(derive_seed(prompt_key, options_.seed, context.nonce));

    const Action action = detect_action(prompt).value_or(context.action);
    const ProblemKind problem = detect_problem(prompt);
    auto parents = parent_variants(prompt);

    OperatorKind kind = action_kind(action);
    if (action == Action::M1 || action == Action::M2 || action == Action::C1) {
        kind = contains(prompt, "We have a Repair operator") || contains(prompt, "create a NEW Repair operator")
                   ? OperatorKind::Repair
                   : OperatorKind::Destroy;
    }

    if (options_.fault_rate > 0.0 && rng.uniform() < options_.fault_rate) {
        if (rng.bernoulli(0.25)) return "I would remove the longest edges first and reinsert greedily.\n";
        const auto faults = candidates(kind, problem, true);
        const Variant bad{faults[rng.index(faults.size())]->name, {}};
        const std::string source = template_source(bad.name, {}, problem);
        if (action != Action::C2) return respond(describe(bad), source);
        const Variant repair = random_variant(OperatorKind::Repair, problem, rng);
        return respond(describe(bad), source + "\n\n" + template_source(repair.name, repair.params, problem));
    }

    auto parent_or_random = [&](std::size_t idx, OperatorKind k) {
        if (idx < parents.size() && parents[idx] && find_template(parents[idx]->name).kind == k &&
            find_template(parents[idx]->name).supports(problem) && !find_template(parents[idx]->name).diagnostic)
            return *parents[idx];
        return random_variant(k, problem, rng);
    };

    Variant out;
    switch (action) {
        case Action::I1:
        case Action::I2: out = random_variant(kind, problem, rng); break;
        case Action::M2: {
            out = parent_or_random(0, kind);
            jitter_one(out, rng);
            break;
        }
        case Action::M1: out = swap_logic(parent_or_random(0, kind), problem, rng); break;
        case Action::C1: {
            const Variant p1 = parent_or_random(0, kind);
            const Variant p2 = parent_or_random(1, kind);
            out = blend(p1, p2, rng);
            break;
        }
        case Action::C2: {
            auto evolve = [&](Variant v) {
                if (rng.bernoulli(0.5)) return swap_logic(v, problem, rng);
                jitter_one(v, rng);
                return v;
            };
            const Variant d = evolve(parent_or_random(0, OperatorKind::Destroy));
            const Variant r = evolve(parent_or_random(1, OperatorKind::Repair));
            const std::string source =
                template_source(d.name, d.params, problem) + "\n\n" + template_source(r.name, r.params, problem);
            return respond(describe(d) + " paired with " + describe(r), source);
        }
    }
    return respond(describe(out), template_source(out.name, out.params, problem));
}

// ---- remote ---------------------------------------------------------------------------------

void RemoteOptions::apply_environment() {
    if (const char* v = std::getenv("GLNS_LLM_ENDPOINT"); v && *v) endpoint = v;
    if (const char* v = std::getenv("GLNS_LLM_KEY"); v && *v) api_key = v;
    if (const char* v = std::getenv("GLNS_LLM_MODEL"); v && *v) model = v;
}

RemoteBackend::RemoteBackend(RemoteOptions options) : options_(std::move(options)) {
    const auto scheme_end = options_.endpoint.find("://");
    if (options_.endpoint.empty() || scheme_end == std::string::npos)
        throw ConfigError("remote backend needs an endpoint URL such as https://host/v1/chat/completions");
    const auto path_start = options_.endpoint.find('/', scheme_end + 3);
    base_ = options_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : options_.endpoint.substr(path_start);
    if (options_.retries < 0) throw ConfigError("retries must be >= 0");
}

std::string RemoteBackend::generate(const std::string& prompt, const CallContext&) {
    nlohmann::json body{{"model", options_.model},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                        {"temperature", options_.temperature},
                        {"max_tokens", options_.max_tokens}};
    const std::string payload = body.dump();
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(options_.backoff_ms << (attempt - 1)));
        httplib::Client client(base_);
        client.set_connection_timeout(options_.timeout_s, 0);
        client.set_read_timeout(options_.timeout_s, 0);
        client.set_write_timeout(options_.timeout_s, 0);
        auto res = client.Post(path_, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
        try {
            auto doc = nlohmann::json::parse(res->body);
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("unexpected response body: ") + e.what());
        }
    }
    throw BackendError("backend unreachable after " + std::to_string(options_.retries + 1) + " attempts (" + last_error +
                       ")");
}

// ---- transcript -------------------------------------------------------------------------------

Transcript::Transcript(const std::filesystem::path& path) : out_(path, std::ios::app) {
    if (!out_) throw Error("cannot open transcript " + path.string());
}

void Transcript::append(Action action, const std::string& prompt, const std::string& response, double latency_ms) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t secs = std::chrono::system_clock::to_time_t(now);
    std::tm utc{};
    gmtime_r(&secs, &utc);
    std::ostringstream ts;
    ts << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
    nlohmann::json line{{"ts", ts.str()},
                        {"action", std::string(to_string(action))},
                        {"prompt_sha", sha256_hex(prompt)},
                        {"response", response},
                        {"latency_ms", latency_ms}};
    std::lock_guard lock(mutex_);
    if (out_.is_open()) out_ << line.dump() << '\n' << std::flush;
    ++count_;
}

std::size_t Transcript::size() const {
    std::lock_guard lock(mutex_);
    return count_;
}

std::string RecordingBackend::generate(const std::string& prompt, const CallContext& context) {
    const auto start = std::chrono::steady_clock::now();
    std::string response;
    try {
        response = inner_.generate(prompt, context);
    } catch (const std::exception& e) {
        transcript_.append(context.action, prompt, std::string("<error> ") + e.what(),
                           std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
        throw;
    }
    transcript_.append(context.action, prompt, response,
                       std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    return response;
}

}  // namespace glns
