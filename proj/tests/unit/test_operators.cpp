#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "glns/instance_io.hpp"
#include "glns/operators.hpp"

using namespace glns;

namespace {

Instance make(ProblemKind kind, int n, std::uint64_t seed) {
    GeneratorConfig g;
    g.kind = kind;
    g.n = n;
    g.seed = seed;
    return generate(g);
}

Solution start_solution(const Instance& inst, Rng& rng) {
    std::vector<int> nodes = inst.elements();
    rng.shuffle(std::span<int>(nodes));
    if (inst.kind() == ProblemKind::TSP) return TourSolution{nodes};
    RouteSolution s;
    int load = inst.capacity();
    for (int v : nodes) {
        if (load + inst.demand(v) > inst.capacity()) {
            s.routes.emplace_back();
            load = 0;
        }
        s.routes.back().push_back(v);
        load += inst.demand(v);
    }
    return s;
}

}  // namespace

TEST_SUITE("operators") {

TEST_CASE("destroy count rounds and stays within [1, n-1]") {
    CHECK(destroy_count(10, 0.2) == 2);
    CHECK(destroy_count(50, 0.2) == 10);
    CHECK(destroy_count(3, 0.2) == 1);
    CHECK(destroy_count(2, 0.9) == 1);
    CHECK(destroy_count(12, 0.125) == 2);  // 1.5 rounds up
}

TEST_CASE("conservation check catches loss, duplication and strangers") {
    const Solution tour = TourSolution{{0, 1, 2, 3, 4}};
    CHECK(check_conservation(tour, {{1, 3}, TourSolution{{0, 2, 4}}}).empty());
    CHECK_FALSE(check_conservation(tour, {{1}, TourSolution{{0, 2, 4}}}).empty());
    CHECK_FALSE(check_conservation(tour, {{1, 3, 3}, TourSolution{{0, 2, 4}}}).empty());
    CHECK_FALSE(check_conservation(tour, {{1, 9}, TourSolution{{0, 2, 3, 4}}}).empty());
}

TEST_CASE("every built-in template keeps its contract on every supported kind") {
    for (auto kind : {ProblemKind::TSP, ProblemKind::CVRP, ProblemKind::OVRP}) {
        const auto inst = make(kind, 15, 77);
        for (const auto& t : operator_templates()) {
            if (t.diagnostic || !t.supports(kind)) continue;
            CAPTURE(t.name);
            CAPTURE(to_string(kind));
            Rng rng(1);
            for (int trial = 0; trial < 30; ++trial) {
                const Solution s = start_solution(inst, rng);
                const int count = 1 + static_cast<int>(rng.index(10));
                DestroyOutcome out;
                Solution repaired;
                if (t.kind == OperatorKind::Destroy) {
                    out = make_destroy(t.name)->apply(s, count, inst, rng);
                    REQUIRE(check_conservation(s, out).empty());
                    CHECK(out.removed.size() == static_cast<std::size_t>(count));
                    repaired = make_repair("greedy_insertion")->apply(out.partial, out.removed, inst, rng);
                } else {
                    out = make_destroy("random_removal")->apply(s, count, inst, rng);
                    repaired = make_repair(t.name)->apply(out.partial, out.removed, inst, rng);
                }
                REQUIRE(check_feasible(inst, repaired).ok());
            }
        }
    }
}

TEST_CASE("worst removal with zero noise takes the outlier first") {
    Instance::Spec spec;
    spec.kind = ProblemKind::TSP;
    spec.coords = {{0, 0}, {1, 0}, {2, 0}, {1, 5}, {2, 1}};
    const Instance inst(spec);
    Rng rng(0);
    const auto out = worst_removal(TourSolution{{0, 1, 3, 2, 4}}, 1, inst, rng);
    REQUIRE(out.removed.size() == 1);
    CHECK(out.removed[0] == 3);
}

TEST_CASE("greedy insertion puts a point back between its neighbours on a line") {
    Instance::Spec spec;
    spec.kind = ProblemKind::TSP;
    spec.coords = {{0, 0}, {1, 0}, {2, 0}, {3, 0}, {1.5, 3}};
    const Instance inst(spec);
    Rng rng(0);
    const Solution out = greedy_insertion(TourSolution{{0, 2, 3, 4}}, {1}, inst, rng);
    CHECK(std::get<TourSolution>(out).tour == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("greedy insertion opens a route when no route has room") {
    Instance::Spec spec;
    spec.kind = ProblemKind::CVRP;
    spec.coords = {{0, 0}, {1, 0}, {2, 0}};
    spec.demands = {0, 6, 6};
    spec.capacity = 10;
    const Instance inst(spec);
    Rng rng(0);
    const Solution out = greedy_insertion(RouteSolution{{{1}}}, {2}, inst, rng);
    CHECK(std::get<RouteSolution>(out).routes.size() == 2);
}

TEST_CASE("regret insertion with k=2 serves the customer with the most to lose first") {
    Instance::Spec spec;
    spec.kind = ProblemKind::TSP;
    spec.coords = {{0, 0}, {4, 0}, {4, 4}, {0, 4}, {2, -0.1}, {2, 2}};
    const Instance inst(spec);
    Rng rng(0);
    const Solution out = regret_k_insertion(TourSolution{{0, 1, 2, 3}}, {5, 4}, inst, rng);
    const auto& tour = std::get<TourSolution>(out).tour;
    REQUIRE(tour.size() == 6);
    const auto at = [&](int v) { return std::find(tour.begin(), tour.end(), v) - tour.begin(); };
    CHECK(std::abs(at(4) - at(0)) == 1);
}

TEST_CASE("window score counts internal and boundary edges") {
    Instance::Spec spec;
    spec.kind = ProblemKind::TSP;
    spec.coords = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const Instance inst(spec);
    const std::vector<int> tour{0, 1, 2, 3};
    CHECK(acsr_window_score(inst, tour, 0, 1) == doctest::Approx(2.0));
    CHECK(acsr_window_score(inst, tour, 3, 2) == doctest::Approx(3.0));
}

TEST_CASE("ACSR in the greedy single-segment regime removes the costliest window") {
    Instance::Spec spec;
    spec.kind = ProblemKind::TSP;
    for (int i = 0; i < 10; ++i) spec.coords.push_back({static_cast<double>(i), 0.0});
    spec.coords[5].y = 8.0;
    spec.coords[6].y = 8.0;
    const Instance inst(spec);
    std::vector<int> tour(10);
    for (int i = 0; i < 10; ++i) tour[static_cast<std::size_t>(i)] = i;
    Rng rng(4);
    AcsrOptions o;
    o.greedy_prob = 1.0;
    const auto out = acsr_destroy(TourSolution{tour}, 2, inst, rng, o);
    std::set<int> removed(out.removed.begin(), out.removed.end());
    CHECK(removed == std::set<int>{5, 6});
}

TEST_CASE("DAPI schedule follows its linear rules") {
    const auto s = dapi_schedule(0.25);
    CHECK(s.random_threshold == doctest::Approx(0.4));
    CHECK(s.temperature == doctest::Approx(2.5));
    CHECK(s.two_opt_prob == doctest::Approx(0.4));
    Instance::Spec spec;
    spec.kind = ProblemKind::TSP;
    spec.coords = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const Instance inst(spec);
    CHECK(dapi_diversity(inst, {0, 1, 2, 3}) == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("two-opt sweep untangles a crossing") {
    Instance::Spec spec;
    spec.kind = ProblemKind::TSP;
    spec.coords = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const Instance inst(spec);
    std::vector<int> tour{0, 2, 1, 3};
    CHECK(two_opt_sweep(inst, tour));
    CHECK(tour_length(inst, tour) == doctest::Approx(4.0));
    CHECK_FALSE(two_opt_sweep(inst, tour));
}

TEST_CASE("ACAGI consolidation respects capacity and the size bound") {
    const auto inst = make(ProblemKind::CVRP, 40, 3);
    Rng rng(8);
    AcagiOptions o;
    o.consolidate_max_customers = 6;
    for (int trial = 0; trial < 20; ++trial) {
        const Solution s = start_solution(inst, rng);
        const auto cut = random_removal(s, 12, inst, rng);
        const Solution out = acagi_repair(cut.partial, cut.removed, inst, rng, o);
        REQUIRE(check_feasible(inst, out).ok());
    }
}

TEST_CASE("templates normalise parameters and reject unknown keys") {
    const auto& t = find_template("regret_insertion");
    const auto p = t.normalise({{"k", 9.0}});
    CHECK(p.at("k") == 4.0);
    CHECK(p.at("noise") == 0.0);
    CHECK_THROWS_AS(t.normalise({{"bogus", 1.0}}), ConfigError);
    CHECK_THROWS_AS(find_template("nope"), ConfigError);
    CHECK_THROWS_AS(make_repair("random_removal"), ConfigError);
}

TEST_CASE("operator specs parse names and parameters") {
    const auto [name, params] = parse_operator_spec("worst_removal:noise=0.25");
    CHECK(name == "worst_removal");
    CHECK(params.at("noise") == 0.25);
    CHECK(parse_operator_spec("dapi").second.empty());
    CHECK_THROWS(parse_operator_spec("dapi:temp_base"));
}

TEST_CASE("records and template sources round-trip") {
    OperatorRecord r = builtin_record("w", "worst_removal", {{"noise", 0.3}});
    r.source = template_source("worst_removal", r.params, ProblemKind::CVRP);
    const auto back = record_from_json(record_to_json(r));
    CHECK(back.id == "w");
    CHECK(back.template_name == "worst_removal");
    CHECK(back.params == r.params);
    CHECK(back.source == r.source);

    const auto d = parse_template_directive(r.source);
    REQUIRE(d.has_value());
    CHECK(d->name == "worst_removal");
    CHECK(d->params.at("noise") == 0.3);
    CHECK_FALSE(parse_template_directive("# glns-template: nope {}\ndef destroy(a, b, c):\n    pass\n").has_value());
    CHECK_FALSE(parse_template_directive("def destroy(a, b, c):\n    pass\n").has_value());
}

TEST_CASE("diagnostic templates break exactly the contract they target") {
    const auto inst = make(ProblemKind::TSP, 12, 1);
    Rng rng(2);
    const Solution s = start_solution(inst, rng);
    CHECK_THROWS(make_destroy("fault_crash")->apply(s, 3, inst, rng));
    CHECK_FALSE(check_conservation(s, make_destroy("fault_duplicate")->apply(s, 3, inst, rng)).empty());
    const auto cut = random_removal(s, 3, inst, rng);
    CHECK_FALSE(check_feasible(inst, make_repair("fault_drop")->apply(cut.partial, cut.removed, inst, rng)).ok());
    CHECK_THROWS(make_repair("fault_crash_repair")->apply(cut.partial, cut.removed, inst, rng));
}

}
