#include <doctest.h>

#include <set>

#include "glns/errors.hpp"
#include "glns/evolution.hpp"
#include "glns/instance_io.hpp"

using namespace glns;

namespace {

std::vector<Instance> batch(ProblemKind kind, int n, int count) {
    std::vector<Instance> out;
    for (int i = 0; i < count; ++i) {
        GeneratorConfig g;
        g.kind = kind;
        g.n = n;
        g.seed = derive_seed(404, static_cast<std::uint64_t>(i));
        out.push_back(generate(g));
    }
    return out;
}

EvolutionConfig small_config(int generations) {
    EvolutionConfig c;
    c.max_generations = generations;
    c.period = 5;
    c.episodes_per_instance = 2;
    c.filter_instance_size = 10;
    c.filter_instances = 2;
    c.episode.iterations = 20;
    return c;
}

class SilentBackend final : public Backend {
public:
    std::string generate(const std::string&, const CallContext&) override { return "I have no code for you."; }
    std::string name() const override { return "silent"; }
};

OperatorRecord native(const std::string& id, const std::string& name, const ParamMap& params = {}) {
    OperatorRecord r = builtin_record(id, name, params);
    r.source = template_source(name, r.params, ProblemKind::TSP);
    return r;
}

std::set<std::string> ids(const Population& pop) {
    std::set<std::string> out;
    for (const auto& r : pop.records) out.insert(r.id);
    return out;
}

}  // namespace

TEST_SUITE("evolution") {

TEST_CASE("pruning takes the lowest fitness and breaks ties toward the younger record") {
    const std::vector<double> fitness{3.0, 1.0, 1.0, 5.0, 0.5};
    const std::vector<std::uint64_t> inserted{0, 1, 7, 3, 4};
    CHECK(prune_indices(fitness, inserted, 2) == std::vector<std::size_t>{2, 4});
    CHECK(prune_indices(fitness, inserted, 3) == std::vector<std::size_t>{1, 2, 4});
    CHECK(prune_indices(fitness, inserted, 0).empty());
    CHECK_THROWS_AS(prune_indices(fitness, inserted, 5), ConfigError);
    const std::vector<std::uint64_t> short_inserted{0, 1};
    CHECK_THROWS_AS(prune_indices(fitness, short_inserted, 1), StateError);
}

TEST_CASE("mutation action follows the rank terciles") {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        CHECK(choose_mutation_action(0, 6, rng) == Action::M2);
        CHECK(choose_mutation_action(1, 6, rng) == Action::M2);
        CHECK(choose_mutation_action(4, 6, rng) == Action::M1);
        CHECK(choose_mutation_action(5, 6, rng) == Action::M1);
    }
    int m1 = 0;
    for (int t = 0; t < 2000; ++t) m1 += choose_mutation_action(2, 6, rng) == Action::M1;
    CHECK(m1 > 850);
    CHECK(m1 < 1150);
    CHECK_THROWS_AS(choose_mutation_action(3, 3, rng), SelectionError);
}

TEST_CASE("homogeneous parents are distinct and favour fitter records") {
    Rng rng(2);
    const std::vector<double> fitness{10.0, 0.0, 0.0, 10.0};
    int favoured = 0;
    for (int t = 0; t < 500; ++t) {
        const auto [a, b] = select_homogeneous_parents(fitness, rng);
        CHECK(a != b);
        favoured += (a == 0 || a == 3);
    }
    CHECK(favoured > 450);
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(select_homogeneous_parents(one, rng), SelectionError);
}

TEST_CASE("the synergy pair is the argmax, falling back to fitness sums") {
    Rng rng(3);
    auto s = PortfolioState::zeros(3, 2);
    s.synergy[2][1] = 4.0;
    s.synergy[0][0] = 4.0;
    s.synergy[1][1] = 1.0;
    CHECK(select_synergy_pair(s, rng) == std::pair<std::size_t, std::size_t>{0, 0});

    auto empty = PortfolioState::zeros(3, 2);
    empty.fitness_d = {0.0, 2.0, 1.0};
    empty.fitness_r = {0.5, 3.0};
    CHECK(select_synergy_pair(empty, rng) == std::pair<std::size_t, std::size_t>{1, 1});

    auto lone = PortfolioState::zeros(2, 2);
    lone.synergy[1][0] = 1.0;
    for (int t = 0; t < 20; ++t) CHECK(select_synergy_pair(lone, rng, true) == std::pair<std::size_t, std::size_t>{1, 0});
}

TEST_CASE("removing records keeps the surviving metrics aligned") {
    auto s = PortfolioState::zeros(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        s.fitness_d[i] = static_cast<double>(i);
        s.fitness_r[i] = 10.0 + static_cast<double>(i);
        for (std::size_t j = 0; j < 3; ++j) s.synergy[i][j] = static_cast<double>(10 * i + j);
    }
    const auto out = remove_from_state(s, {1}, {0, 2});
    CHECK(out.fitness_d == std::vector<double>{0.0, 2.0});
    CHECK(out.fitness_r == std::vector<double>{11.0});
    CHECK(out.synergy == std::vector<std::vector<double>>{{1.0}, {21.0}});
}

TEST_CASE("the admission filter sorts diagnostic operators into categories") {
    OperatorResolver resolver(ProblemKind::TSP, nullptr);
    auto config = small_config(1);
    config.filter_budget_ms = 100.0;

    CHECK(pre_evaluation_filter(native("a", "random_removal"), resolver, config, 1).passed);
    CHECK(pre_evaluation_filter(native("b", "dapi"), resolver, config, 1).passed);

    const auto crash = pre_evaluation_filter(native("c", "fault_crash"), resolver, config, 1);
    CHECK_FALSE(crash.passed);
    CHECK(crash.category == "error");
    CHECK(pre_evaluation_filter(native("d", "fault_duplicate"), resolver, config, 1).category == "coverage");
    CHECK(pre_evaluation_filter(native("e", "fault_slow", {{"delay_ms", 300}}), resolver, config, 1).category ==
          "timeout");
    CHECK(pre_evaluation_filter(native("f", "fault_drop"), resolver, config, 1).category == "coverage");
    CHECK(pre_evaluation_filter(native("g", "fault_crash_repair"), resolver, config, 1).category == "error");

    OperatorRecord foreign;
    foreign.id = "x";
    foreign.kind = OperatorKind::Destroy;
    foreign.provenance = Provenance::Generated;
    foreign.source = "def destroy(s, k, d):\n    return [], s\n";
    CHECK_THROWS_AS(pre_evaluation_filter(foreign, resolver, config, 1), SandboxError);

    OperatorResolver vrp(ProblemKind::CVRP, nullptr);
    const auto wrong = pre_evaluation_filter(native("h", "acsr"), vrp, config, 1);
    CHECK_FALSE(wrong.passed);
    CHECK(wrong.category == "error");
}

TEST_CASE("seeding fills both pools with the expert operators first") {
    MockBackend mock({5, 0.0});
    Evolution evo(ProblemKind::TSP, batch(ProblemKind::TSP, 10, 2), mock, small_config(0));
    evo.seed(11);
    const auto& st = evo.state();
    REQUIRE(st.pop_d.size() == 5);
    REQUIRE(st.pop_r.size() == 5);
    CHECK(st.pop_d.records[0].id == "random_removal");
    CHECK(st.pop_d.records[1].id == "worst_removal");
    CHECK(st.pop_r.records[0].id == "greedy_insertion");
    CHECK(ids(st.pop_d).size() == 5);
    CHECK(ids(st.pop_r).size() == 5);
    for (const auto& r : st.pop_d.records) CHECK(r.kind == OperatorKind::Destroy);
    for (const auto& r : st.pop_r.records) CHECK(r.kind == OperatorKind::Repair);

    SilentBackend silent;
    Evolution stuck(ProblemKind::TSP, batch(ProblemKind::TSP, 10, 1), silent, small_config(0));
    CHECK_THROWS_AS(stuck.seed(1), SeedingError);
    Evolution unseeded(ProblemKind::TSP, batch(ProblemKind::TSP, 10, 1), silent, small_config(1));
    CHECK_THROWS_AS(unseeded.run(), StateError);
}

TEST_CASE("a short evolution keeps the pools full and the best score nonincreasing") {
    MockBackend mock({6, 0.2});
    const auto instances = batch(ProblemKind::TSP, 12, 2);
    Evolution evo(ProblemKind::TSP, instances, mock, small_config(10));
    evo.seed(3);
    std::vector<double> scores;
    int phases = 0;
    EvolutionHooks hooks;
    hooks.on_generation = [&](const GenerationLog& log) { scores.push_back(log.best_cost); };
    hooks.after_management = [&](const EvolutionState& st) {
        ++phases;
        CHECK(st.pop_d.size() == 5);
        CHECK(st.pop_r.size() == 5);
        CHECK(ids(st.pop_d).size() == 5);
        CHECK(ids(st.pop_r).size() == 5);
    };
    evo.run(hooks);
    CHECK(phases == 2);
    REQUIRE(scores.size() == 10);
    for (std::size_t i = 1; i < scores.size(); ++i) CHECK(scores[i] <= scores[i - 1]);
    CHECK(evo.state().generation == 10);
    for (std::size_t b = 0; b < 2; ++b)
        CHECK(cost(instances[b], evo.state().best_solutions[b]) == doctest::Approx(evo.state().best_costs[b]));
    CHECK(evo.best_score() == scores.back());
}

TEST_CASE("reruns produce identical logs and a restored snapshot continues identically") {
    const auto instances = batch(ProblemKind::CVRP, 8, 2);
    auto run_logs = [&](int generations, const nlohmann::json* from, nlohmann::json* snapshot_at_5) {
        MockBackend mock({9, 0.1});
        Evolution evo(ProblemKind::CVRP, instances, mock, small_config(generations));
        if (from) evo.restore(*from);
        else evo.seed(21);
        std::vector<std::string> lines;
        EvolutionHooks hooks;
        hooks.on_generation = [&](const GenerationLog& log) { lines.push_back(log.to_json().dump()); };
        hooks.after_management = [&](const EvolutionState& st) {
            if (snapshot_at_5 && st.generation == 5) *snapshot_at_5 = evo.snapshot();
        };
        evo.run(hooks);
        return std::make_pair(lines, evo.snapshot());
    };
    nlohmann::json mid;
    const auto [full, full_end] = run_logs(10, nullptr, &mid);
    const auto [again, again_end] = run_logs(10, nullptr, nullptr);
    REQUIRE(full.size() == again.size());
    for (std::size_t i = 0; i < full.size(); ++i) CHECK(full[i] == again[i]);
    CHECK(full_end == again_end);

    REQUIRE(mid.is_object());
    CHECK(mid["generation"] == 5);
    const auto [tail, tail_end] = run_logs(10, &mid, nullptr);
    REQUIRE(tail.size() == 5);
    CHECK(std::vector<std::string>(full.begin() + 5, full.end()) == tail);
    CHECK(tail_end == full_end);

    MockBackend mock({9, 0.1});
    Evolution other(ProblemKind::TSP, batch(ProblemKind::TSP, 8, 2), mock, small_config(10));
    CHECK_THROWS_AS(other.restore(mid), Error);
}

TEST_CASE("configuration limits are enforced") {
    auto c = small_config(1);
    c.prune_count = c.capacity;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(1);
    c.strategy_weights = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(1);
    c.episodes_per_instance = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    MockBackend mock;
    CHECK_THROWS_AS(Evolution(ProblemKind::TSP, {}, mock, small_config(1)), ConfigError);
    CHECK_THROWS_AS(Evolution(ProblemKind::CVRP, batch(ProblemKind::TSP, 8, 1), mock, small_config(1)), ConfigError);
}

}  // TEST_SUITE
