#include <doctest.h>

#include <cmath>

#include "glns/instance_io.hpp"
#include "glns/problem.hpp"
#include "glns/rng.hpp"

using namespace glns;

namespace {

Instance square_tsp() {
    Instance::Spec spec;
    spec.kind = ProblemKind::TSP;
    spec.name = "square";
    spec.coords = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    return Instance(spec);
}

Instance line_vrp(ProblemKind kind) {
    Instance::Spec spec;
    spec.kind = kind;
    spec.name = "line";
    spec.coords = {{0, 0}, {1, 0}, {2, 0}, {0, 3}};
    spec.demands = {0, 4, 4, 5};
    spec.capacity = 8;
    return Instance(spec);
}

}  // namespace

TEST_SUITE("problem") {

TEST_CASE("tour cost on the unit square") {
    const auto inst = square_tsp();
    CHECK(tsp_cost(inst, TourSolution{{0, 1, 2, 3}}) == doctest::Approx(4.0));
    CHECK(tsp_cost(inst, TourSolution{{0, 2, 1, 3}}) == doctest::Approx(2.0 + 2.0 * std::sqrt(2.0)));
    CHECK(cost(inst, Solution{TourSolution{{3, 2, 1, 0}}}) == doctest::Approx(4.0));
}

TEST_CASE("closed and open route costs by hand") {
    const auto cvrp = line_vrp(ProblemKind::CVRP);
    const RouteSolution s{{{1, 2}, {3}}};
    // 0->1->2->0 = 1 + 1 + 2, 0->3->0 = 3 + 3
    CHECK(cvrp_cost(cvrp, s) == doctest::Approx(10.0));
    const auto ovrp = line_vrp(ProblemKind::OVRP);
    CHECK(ovrp_cost(ovrp, s) == doctest::Approx(5.0));
    CHECK(cost(ovrp, Solution{s}) == doctest::Approx(5.0));
}

TEST_CASE("feasibility flags missing, duplicate, overloaded and depot entries") {
    const auto inst = line_vrp(ProblemKind::CVRP);
    CHECK(check_feasible(inst, RouteSolution{{{1, 2}, {3}}}).ok());
    CHECK_FALSE(check_feasible(inst, RouteSolution{{{1, 2}}}).ok());
    CHECK_FALSE(check_feasible(inst, RouteSolution{{{1, 2}, {3, 1}}}).ok());
    CHECK_FALSE(check_feasible(inst, RouteSolution{{{1, 2, 3}}}).ok());
    CHECK_FALSE(check_feasible(inst, RouteSolution{{{1, 2}, {0, 3}}}).ok());
    CHECK_FALSE(check_feasible(inst, RouteSolution{{{1, 2}, {}, {3}}}).ok());
    CHECK_FALSE(check_feasible(inst, TourSolution{{1, 2, 3}}).ok());
    CHECK_THROWS_AS(cvrp_cost(inst, RouteSolution{{{1, 2, 3}}}), InfeasibleSolutionError);

    const auto tsp = square_tsp();
    CHECK(check_feasible(tsp, TourSolution{{2, 0, 3, 1}}).ok());
    CHECK_FALSE(check_feasible(tsp, TourSolution{{0, 1, 2}}).ok());
    CHECK_FALSE(check_feasible(tsp, TourSolution{{0, 1, 2, 2}}).ok());
    CHECK_FALSE(check_feasible(tsp, TourSolution{{0, 1, 2, 7}}).ok());
}

TEST_CASE("open cost equals closed cost minus return arcs, bitwise") {
    int checked = 0;
    for (std::uint64_t i = 0; i < 10; ++i) {
        GeneratorConfig g;
        g.kind = ProblemKind::OVRP;
        g.n = 15;
        g.seed = 900 + i;
        const Instance ovrp = generate(g);
        Instance::Spec closed_spec = ovrp.spec();
        closed_spec.kind = ProblemKind::CVRP;
        const Instance cvrp(closed_spec);
        Rng rng(i);
        for (int k = 0; k < 10; ++k) {
            std::vector<int> customers = ovrp.elements();
            rng.shuffle(std::span<int>(customers));
            RouteSolution s;
            int load = ovrp.capacity();
            for (int c : customers) {
                if (load + ovrp.demand(c) > ovrp.capacity() || rng.bernoulli(0.15)) {
                    s.routes.emplace_back();
                    load = 0;
                }
                s.routes.back().push_back(c);
                load += ovrp.demand(c);
            }
            double returns = 0.0;
            for (const auto& r : s.routes) returns += ovrp.dist(r.back(), ovrp.depot());
            const double expected = cvrp_cost(cvrp, s) - returns;
            CHECK(ovrp_cost(ovrp, s) == expected);
            ++checked;
        }
    }
    CHECK(checked == 100);
}

TEST_CASE("unchecked cost agrees with the validating cost") {
    const auto inst = line_vrp(ProblemKind::OVRP);
    const RouteSolution s{{{2, 1}, {3}}};
    CHECK(unchecked_cost(inst, s) == cost(inst, Solution{s}));
}

TEST_CASE("problem kind names round-trip") {
    for (auto k : {ProblemKind::TSP, ProblemKind::CVRP, ProblemKind::OVRP}) CHECK(parse_problem_kind(to_string(k)) == k);
    CHECK_THROWS(parse_problem_kind("vrptw"));
}

}
