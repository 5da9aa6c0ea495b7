#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <memory>

#include "glns/engine.hpp"
#include "glns/errors.hpp"
#include "glns/instance_io.hpp"
#include "glns/sandbox.hpp"

using namespace glns;

namespace {

SandboxOptions worker_options(int timeout_ms = 2000) {
    SandboxOptions o;
    o.command = {"python3", GLNS_FIXTURES_DIR "/mini_worker.py"};
    o.default_timeout_ms = timeout_ms;
    o.grace_ms = 200;
    return o;
}

Instance instance(ProblemKind kind, int n, std::uint64_t seed) {
    GeneratorConfig g;
    g.kind = kind;
    g.n = n;
    g.seed = seed;
    return generate(g);
}

constexpr const char* kLoop = R"(def destroy(current_solution, destroy_cnt, distance_matrix):
    while True:
        pass
)";

constexpr const char* kRaise = R"(def destroy(current_solution, destroy_cnt, distance_matrix):
    raise ValueError("boom")
)";

constexpr const char* kExit = R"(import os
def destroy(current_solution, destroy_cnt, distance_matrix):
    os._exit(3)
)";

constexpr const char* kFirst = R"(def destroy(current_solution, destroy_cnt, distance_matrix):
    removed = list(current_solution[:destroy_cnt])
    return removed, list(current_solution[destroy_cnt:])
)";

}  // namespace

TEST_SUITE("sandbox") {

TEST_CASE("requests and replies serialize to single JSON lines") {
    const nlohmann::json req{{"seq", 4}, {"op", "ping"}};
    const std::string line = serialize_request(req);
    CHECK(line.back() == '\n');
    CHECK(line.find('\n') == line.size() - 1);
    CHECK(parse_request(line) == req);
    CHECK_THROWS_AS(parse_request("{\"op\": \"ping\"}"), FormatError);
    CHECK_THROWS_AS(parse_request("not json"), FormatError);

    SandboxReply ok;
    ok.seq = 9;
    ok.status = "ok";
    ok.result = {{"x", 1}};
    const auto back = parse_reply(serialize_reply(ok));
    CHECK(back.ok());
    CHECK(back.seq == 9);
    CHECK(back.result == ok.result);

    SandboxReply err;
    err.seq = 2;
    err.status = "error";
    err.category = "syntax";
    err.message = "bad indent";
    const auto err_back = parse_reply(serialize_reply(err));
    CHECK_FALSE(err_back.ok());
    CHECK(err_back.category == "syntax");
    CHECK(err_back.message == "bad indent");
    CHECK_THROWS_AS(parse_reply("{\"seq\": 1, \"status\": \"maybe\"}"), SandboxError);
}

TEST_CASE("solutions and instances map onto the wire format") {
    const Solution tour = TourSolution{{2, 0, 1}};
    CHECK(solution_from_json(solution_to_json(tour), ProblemKind::TSP) == tour);
    const Solution routes = RouteSolution{{{1, 2}, {3}}};
    CHECK(solution_from_json(solution_to_json(routes), ProblemKind::CVRP) == routes);
    CHECK_THROWS_AS(solution_from_json(nlohmann::json{{1, 2}}, ProblemKind::TSP), OperatorError);

    const auto inst = instance(ProblemKind::OVRP, 5, 3);
    const auto payload = instance_payload(inst, "i0");
    CHECK(payload["distance_matrix"].size() == 6);
    CHECK(payload["distance_matrix"][1][2].get<double>() == inst.dist(1, 2));
    CHECK(payload["open_routes"] == true);
    CHECK(payload["depot"] == inst.depot());
}

TEST_CASE("the handshake checks the protocol version") {
    SandboxSession session(worker_options());
    const auto reply = session.ping();
    CHECK(reply.ok());
    CHECK(reply.result["proto_version"] == kSandboxProtoVersion);

    setenv("MINI_WORKER_PROTO", "99", 1);
    CHECK_THROWS_AS(SandboxSession{worker_options()}, SandboxError);
    unsetenv("MINI_WORKER_PROTO");

    SandboxOptions missing = worker_options();
    missing.command = {"/nonexistent/glns-worker"};
    CHECK_THROWS_AS(SandboxSession{missing}, SandboxError);
}

TEST_CASE("load reports syntax and contract failures by category") {
    SandboxSession session(worker_options());
    const auto syntax = session.load("bad", "def destroy(:\n", OperatorKind::Destroy);
    CHECK(syntax.category == "syntax");
    const auto contract = session.load("named", "def other(a, b, c):\n    return a\n", OperatorKind::Destroy);
    CHECK(contract.category == "contract");
    CHECK(session.load("first", kFirst, OperatorKind::Destroy).ok());
}

TEST_CASE("sandboxed greedy insertion matches the native operator") {
    auto session = std::make_shared<SandboxSession>(worker_options());
    auto native = make_repair("greedy_insertion");
    int compared = 0;
    for (std::uint64_t k = 0; k < 50; ++k) {
        const ProblemKind kind = k % 3 == 0 ? ProblemKind::TSP : (k % 3 == 1 ? ProblemKind::CVRP : ProblemKind::OVRP);
        const auto inst = instance(kind, 8 + static_cast<int>(k % 13), k);
        const std::string id = std::string("greedy_") + std::string(to_string(kind));
        if (k < 3) REQUIRE(session->load(id, template_source("greedy_insertion", {}, kind), OperatorKind::Repair).ok());
        auto remote = sandbox_repair(session, id);

        Rng rng(derive_seed(91, k));
        const Solution start = random_initial_solution(inst, rng);
        const auto outcome = random_removal(start, destroy_count(static_cast<int>(element_count(start)), 0.3), inst, rng);
        Rng r1(1);
        Rng r2(1);
        const Solution a = native->apply(outcome.partial, outcome.removed, inst, r1);
        const Solution b = remote->apply(outcome.partial, outcome.removed, inst, r2);
        CHECK(a == b);
        CHECK(cost(inst, a) == cost(inst, b));
        ++compared;
    }
    CHECK(compared == 50);
    CHECK(session->restarts() == 0);
}

TEST_CASE("a runaway operator is stopped within its budget and the session recovers") {
    SandboxOptions o = worker_options();
    auto session = std::make_shared<SandboxSession>(o);
    const auto inst = instance(ProblemKind::TSP, 10, 1);
    const std::string inst_id = session->register_instance(inst);
    REQUIRE(session->load("loop", kLoop, OperatorKind::Destroy).ok());
    REQUIRE(session->load("first", kFirst, OperatorKind::Destroy).ok());

    const Solution tour = TourSolution{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
    const int budget_ms = 300;
    const auto start = std::chrono::steady_clock::now();
    const auto reply = session->destroy("loop", tour, 3, inst_id, 0, budget_ms);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(reply.status == "timeout");
    CHECK(reply.category == "timeout");
    CHECK(elapsed <= budget_ms / 1000.0 + 0.5);
    CHECK(session->restarts() == 1);

    const auto after = session->destroy("first", tour, 3, inst_id, 0);
    REQUIRE(after.ok());
    CHECK(after.result["removed"] == nlohmann::json{0, 1, 2});
    CHECK(session->ping().ok());

    auto op = sandbox_destroy(session, "loop", 100);
    Rng rng(0);
    CHECK_THROWS_AS(op->apply(tour, 2, inst, rng), OperatorError);
    CHECK(session->restarts() == 2);
}

TEST_CASE("a raising operator is a runtime error and a dying worker is respawned") {
    auto session = std::make_shared<SandboxSession>(worker_options());
    const auto inst = instance(ProblemKind::TSP, 6, 2);
    const std::string inst_id = session->register_instance(inst);
    CHECK(session->register_instance(inst) == inst_id);
    REQUIRE(session->load("raise", kRaise, OperatorKind::Destroy).ok());
    REQUIRE(session->load("exit", kExit, OperatorKind::Destroy).ok());
    REQUIRE(session->load("first", kFirst, OperatorKind::Destroy).ok());
    const Solution tour = TourSolution{{0, 1, 2, 3, 4, 5}};

    const auto raised = session->destroy("raise", tour, 2, inst_id, 0);
    CHECK(raised.category == "runtime");
    CHECK(raised.message.find("boom") != std::string::npos);
    CHECK(session->restarts() == 0);

    auto op = sandbox_destroy(session, "raise");
    Rng rng(0);
    CHECK_THROWS_WITH_AS(op->apply(tour, 2, inst, rng), doctest::Contains("runtime"), OperatorError);

    const auto died = session->destroy("exit", tour, 2, inst_id, 0);
    CHECK_FALSE(died.ok());
    CHECK(died.category == "runtime");
    CHECK(session->restarts() == 1);
    CHECK(session->destroy("first", tour, 2, inst_id, 0).ok());
}

TEST_CASE("contract violations in the reply surface as operator errors") {
    auto session = std::make_shared<SandboxSession>(worker_options());
    REQUIRE(session->load("wrong", "def destroy(s, k, d):\n    return 5\n", OperatorKind::Destroy).ok());
    const auto inst = instance(ProblemKind::TSP, 5, 4);
    auto op = sandbox_destroy(session, "wrong");
    Rng rng(0);
    CHECK_THROWS_WITH_AS(op->apply(TourSolution{{0, 1, 2, 3, 4}}, 1, inst, rng), doctest::Contains("contract"),
                         OperatorError);
}

}  // TEST_SUITE
