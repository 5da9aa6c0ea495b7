#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "glns/codegen.hpp"
#include "glns/errors.hpp"

using namespace glns;

namespace {

bool contains(const std::string& haystack, std::string_view needle) {
    return haystack.find(needle) != std::string::npos;
}

GenerationRequest request(Action action, ProblemKind problem, std::vector<OperatorRecord> parents = {}) {
    GenerationRequest r;
    r.action = action;
    r.problem = problem;
    r.parents = std::move(parents);
    return r;
}

}  // namespace

TEST_SUITE("codegen") {

TEST_CASE("actions round-trip through their names") {
    for (Action a : {Action::I1, Action::I2, Action::M1, Action::M2, Action::C1, Action::C2})
        CHECK(parse_action(to_string(a)) == a);
    CHECK(action_kind(Action::I1) == OperatorKind::Destroy);
    CHECK(action_kind(Action::I2) == OperatorKind::Repair);
    CHECK_THROWS_AS(parse_action("m3"), Error);
}

TEST_CASE("initialisation prompts carry the problem, the signature and the reference listing") {
    auto r = request(Action::I1, ProblemKind::TSP);
    const std::string empty = render_prompt(r);
    CHECK(contains(empty, "Problem Description:\n"));
    CHECK(contains(empty, "Traveling Salesman Problem"));
    CHECK(contains(empty, "function named destroy"));
    CHECK(contains(empty, "(none)"));

    r.references.push_back(builtin_record("d0", "random_removal"));
    const std::string listed = render_prompt(r);
    CHECK_FALSE(contains(listed, "(none)"));
    CHECK(contains(listed, "# glns-template: random_removal"));
    CHECK(render_prompt(r) == listed);

    const std::string repair = render_prompt(request(Action::I2, ProblemKind::CVRP));
    CHECK(contains(repair, "function named repair"));
    CHECK(contains(repair, std::string(task_description(ProblemKind::CVRP))));
}

TEST_CASE("mutation prompts differ only in their strategy advice") {
    const auto parent = builtin_record("r0", "greedy_insertion");
    const std::string m1 = render_prompt(request(Action::M1, ProblemKind::TSP, {parent}));
    const std::string m2 = render_prompt(request(Action::M2, ProblemKind::TSP, {parent}));
    CHECK(contains(m1, "Generate novel algorithmic mechanisms"));
    CHECK(contains(m2, "Adjust current parameter settings"));
    CHECK(contains(m1, "def repair("));
    CHECK(m1 != m2);
}

TEST_CASE("crossover prompts include both parents") {
    const auto d = builtin_record("d0", "random_removal");
    const auto d2 = builtin_record("d1", "worst_removal");
    const auto r = builtin_record("r0", "greedy_insertion");
    const std::string c1 = render_prompt(request(Action::C1, ProblemKind::TSP, {d, d2}));
    CHECK(contains(c1, "random_removal"));
    CHECK(contains(c1, "worst_removal"));
    const std::string c2 = render_prompt(request(Action::C2, ProblemKind::OVRP, {d, r}));
    CHECK(contains(c2, "random_removal"));
    CHECK(contains(c2, "greedy_insertion"));
}

TEST_CASE("malformed requests are rejected") {
    const auto d = builtin_record("d0", "random_removal");
    const auto r = builtin_record("r0", "greedy_insertion");
    CHECK_THROWS_AS(render_prompt(request(Action::M1, ProblemKind::TSP)), RequestError);
    CHECK_THROWS_AS(render_prompt(request(Action::C1, ProblemKind::TSP, {d, r})), RequestError);
    CHECK_THROWS_AS(render_prompt(request(Action::C2, ProblemKind::TSP, {r, d})), RequestError);
    auto i1 = request(Action::I1, ProblemKind::TSP);
    i1.references.push_back(r);
    CHECK_THROWS_AS(render_prompt(i1), RequestError);
}

TEST_CASE("responses yield the first braced description and the fenced code") {
    const std::string text =
        "Idea {remove a long segment} and {ignored}\n"
        "```python\n"
        "def destroy(current_solution, destroy_cnt, distance_matrix):\n"
        "    return [], list(current_solution)\n"
        "```\n";
    const auto r = parse_response(text, Action::M1);
    CHECK(r.description == "remove a long segment");
    REQUIRE(r.artifacts.size() == 1);
    CHECK(r.artifacts[0].kind == OperatorKind::Destroy);
    CHECK(contains(r.artifacts[0].source, "def destroy("));
    CHECK(r.raw == text);

    CHECK_THROWS_AS(parse_response("no code here {at all}", Action::M1), ResponseParseError);
    CHECK_THROWS_AS(parse_response("```\nx = 1\n```\n", Action::M1), ResponseParseError);

    const auto insert = parse_response("```\ndef insert(a, b, c):\n    return a\n```\n", Action::C1);
    CHECK(insert.artifacts.at(0).kind == OperatorKind::Repair);
}

TEST_CASE("joint responses are split at the top-level entry points") {
    const std::string text =
        "{pair}\n```python\n"
        "import random\n"
        "def destroy(s, k, d):\n"
        "    def helper():\n"
        "        return 1\n"
        "    return [], s\n"
        "\n"
        "# rebuild\n"
        "def repair(p, r, d):\n"
        "    return p + r\n"
        "```\n";
    const auto r = parse_response(text, Action::C2);
    REQUIRE(r.artifacts.size() == 2);
    CHECK(r.artifacts[0].kind == OperatorKind::Destroy);
    CHECK(r.artifacts[1].kind == OperatorKind::Repair);
    CHECK(contains(r.artifacts[0].source, "import random"));
    CHECK(contains(r.artifacts[0].source, "def helper"));
    CHECK_FALSE(contains(r.artifacts[0].source, "def repair"));
    CHECK(contains(r.artifacts[1].source, "# rebuild"));
    CHECK(contains(r.artifacts[1].source, "import random"));

    CHECK_THROWS_AS(parse_response("```\ndef destroy(s, k, d):\n    return [], s\n```\n", Action::C2),
                    ResponseParseError);
}

TEST_CASE("sha256 matches the standard test vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("mock replies are a pure function of prompt, seed and nonce") {
    const std::string prompt = render_prompt(request(Action::I1, ProblemKind::TSP));
    MockBackend a({7, 0.0});
    MockBackend b({7, 0.0});
    MockBackend other({8, 0.0});
    CallContext ctx{Action::I1, 3};
    const std::string reply = a.generate(prompt, ctx);
    CHECK(reply == b.generate(prompt, ctx));
    CHECK(reply == a.generate(prompt, ctx));

    bool nonce_matters = false;
    bool seed_matters = false;
    for (std::uint64_t nonce = 0; nonce < 16; ++nonce) {
        nonce_matters |= a.generate(prompt, {Action::I1, nonce}) != reply;
        seed_matters |= other.generate(prompt, {Action::I1, nonce}) != a.generate(prompt, {Action::I1, nonce});
    }
    CHECK(nonce_matters);
    CHECK(seed_matters);
}

TEST_CASE("mock replies parse into operators of the requested kind") {
    MockBackend mock({1, 0.0});
    const auto d = builtin_record("d0", "random_removal");
    const auto r = builtin_record("r0", "greedy_insertion");
    for (ProblemKind problem : {ProblemKind::TSP, ProblemKind::CVRP, ProblemKind::OVRP}) {
        for (std::uint64_t nonce = 0; nonce < 10; ++nonce) {
            const auto i2 = parse_response(mock.generate(render_prompt(request(Action::I2, problem)), {Action::I2, nonce}),
                                           Action::I2);
            REQUIRE(i2.artifacts.size() == 1);
            CHECK(i2.artifacts[0].kind == OperatorKind::Repair);
            const auto dir = parse_template_directive(i2.artifacts[0].source);
            REQUIRE(dir.has_value());
            CHECK(find_template(dir->name).supports(problem));

            const auto m = parse_response(mock.generate(render_prompt(request(Action::M2, problem, {d})), {Action::M2, nonce}),
                                          Action::M2);
            CHECK(m.artifacts.at(0).kind == OperatorKind::Destroy);

            const auto c2 = parse_response(
                mock.generate(render_prompt(request(Action::C2, problem, {d, r})), {Action::C2, nonce}), Action::C2);
            REQUIRE(c2.artifacts.size() == 2);
            CHECK(c2.artifacts[0].kind == OperatorKind::Destroy);
            CHECK(c2.artifacts[1].kind == OperatorKind::Repair);
        }
    }
}

TEST_CASE("mock fault injection produces diagnostic operators") {
    MockBackend faulty({2, 1.0});
    const std::string prompt = render_prompt(request(Action::I1, ProblemKind::TSP));
    int diagnostic = 0;
    for (std::uint64_t nonce = 0; nonce < 20; ++nonce) {
        const std::string reply = faulty.generate(prompt, {Action::I1, nonce});
        try {
            const auto parsed = parse_response(reply, Action::I1);
            const auto dir = parse_template_directive(parsed.artifacts.at(0).source);
            if (dir && find_template(dir->name).diagnostic) ++diagnostic;
        } catch (const ResponseParseError&) {
            ++diagnostic;
        }
    }
    CHECK(diagnostic == 20);
}

TEST_CASE("remote backend posts a chat request and retries transient failures") {
    httplib::Server server;
    std::atomic<int> hits{0};
    nlohmann::json last_body;
    std::string last_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = ++hits;
        if (n == 1) {
            res.status = 500;
            return;
        }
        if (n == 2) {
            res.status = 429;
            return;
        }
        last_body = nlohmann::json::parse(req.body);
        last_auth = req.get_header_value("Authorization");
        nlohmann::json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "```\ndef destroy(a,b,c):\n    pass\n```"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    server.Post("/bad", [](const httplib::Request&, httplib::Response& res) { res.status = 401; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteOptions o;
    o.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    o.api_key = "secret";
    o.model = "test-model";
    o.retries = 2;
    o.backoff_ms = 1;
    o.timeout_s = 5;
    RemoteBackend backend(o);

    const auto dir = std::filesystem::temp_directory_path() / "glns_transcript_test.jsonl";
    std::filesystem::remove(dir);
    std::string content;
    {
        Transcript transcript(dir);
        RecordingBackend recorded(backend, transcript);
        content = recorded.generate("hello", {Action::M1, 0});
        CHECK(transcript.size() == 1);
    }
    CHECK(hits == 3);
    CHECK(contains(content, "def destroy"));
    CHECK(last_body["model"] == "test-model");
    CHECK(last_body["messages"][0]["content"] == "hello");
    CHECK(last_auth == "Bearer secret");

    std::ifstream in(dir);
    std::string line;
    REQUIRE(std::getline(in, line));
    const auto logged = nlohmann::json::parse(line);
    CHECK(logged["action"] == "m1");
    CHECK(logged["prompt_sha"] == sha256_hex("hello"));
    CHECK(logged["response"] == content);
    std::filesystem::remove(dir);

    o.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/down";
    o.retries = 1;
    RemoteBackend exhausted(o);
    CHECK_THROWS_AS(exhausted.generate("x", {}), BackendError);

    o.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/bad";
    RemoteBackend rejected(o);
    CHECK_THROWS_AS(rejected.generate("x", {}), BackendError);

    server.stop();
    worker.join();

    o.endpoint = "not a url";
    CHECK_THROWS_AS(RemoteBackend{o}, ConfigError);
}

}  // TEST_SUITE
