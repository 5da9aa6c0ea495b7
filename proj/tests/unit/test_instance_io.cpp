#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "glns/instance_io.hpp"

using namespace glns;

namespace {

const std::string kFixtures = GLNS_FIXTURES_DIR;

// Brute force over all tours starting at node 0.
double brute_force_tsp(const Instance& inst) {
    std::vector<int> rest(static_cast<std::size_t>(inst.size() - 1));
    std::iota(rest.begin(), rest.end(), 1);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = inst.dist(0, rest.front()) + inst.dist(rest.back(), 0);
        for (std::size_t i = 0; i + 1 < rest.size(); ++i) c += inst.dist(rest[i], rest[i + 1]);
        best = std::min(best, c);
    } while (std::next_permutation(rest.begin(), rest.end()));
    return best;
}

// Brute force over every ordered split of every customer permutation.
double brute_force_vrp(const Instance& inst) {
    std::vector<int> perm = inst.elements();
    const bool open = inst.kind() == ProblemKind::OVRP;
    const int n = static_cast<int>(perm.size());
    double best = std::numeric_limits<double>::infinity();
    do {
        for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
            double c = 0.0;
            int load = 0;
            int prev = inst.depot();
            bool ok = true;
            for (int i = 0; i < n && ok; ++i) {
                const int v = perm[static_cast<std::size_t>(i)];
                if (i > 0 && (mask >> (i - 1)) & 1u) {
                    if (!open) c += inst.dist(prev, inst.depot());
                    prev = inst.depot();
                    load = 0;
                }
                load += inst.demand(v);
                ok = load <= inst.capacity();
                c += inst.dist(prev, v);
                prev = v;
            }
            if (!ok) continue;
            if (!open) c += inst.dist(prev, inst.depot());
            best = std::min(best, c);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST_SUITE("instance_io") {

TEST_CASE("benchmark fixtures parse to their node counts") {
    const auto berlin = load_instance(kFixtures + "/berlin52.tsp");
    CHECK(berlin.size() == 52);
    CHECK(berlin.kind() == ProblemKind::TSP);
    CHECK(berlin.name() == "berlin52");
    CHECK(berlin.distance_rule() == DistanceRule::RoundedEuclidean);
    // nodes 1 (565,575) and 2 (25,185): sqrt(540^2 + 390^2) = 666.1
    CHECK(berlin.dist(0, 1) == 666.0);

    const auto a32 = load_instance(kFixtures + "/A-n32-k5.vrp");
    CHECK(a32.size() == 32);
    CHECK(a32.kind() == ProblemKind::CVRP);
    CHECK(a32.capacity() == 100);
    CHECK(a32.depot() == 0);
    CHECK(a32.elements().size() == 31);
    int total = 0;
    for (int v : a32.elements()) total += a32.demand(v);
    CHECK(total == 410);

    const auto tri = load_instance(kFixtures + "/triangle345.tsp");
    CHECK(tri.dist(0, 2) == 5.0);
    CHECK(tri.dist(1, 2) == 4.0);
}

TEST_CASE("EUC_2D rounds to nearest and CEIL_2D rounds up") {
    const std::string base = "NAME : t\nTYPE : TSP\nDIMENSION : 2\nEDGE_WEIGHT_TYPE : ";
    const auto euc = parse_tsplib(base + "EUC_2D\nNODE_COORD_SECTION\n1 0 0\n2 1 1\nEOF\n");
    CHECK(euc.dist(0, 1) == 1.0);
    const auto ceil = parse_tsplib(base + "CEIL_2D\nNODE_COORD_SECTION\n1 0 0\n2 1 1\nEOF\n");
    CHECK(ceil.dist(0, 1) == 2.0);
    CHECK_THROWS_AS(parse_tsplib(base + "GEO\nNODE_COORD_SECTION\n1 0 0\n2 1 1\nEOF\n"), UnsupportedFormatError);
    CHECK_THROWS(parse_tsplib(base + "EUC_2D\nNODE_COORD_SECTION\n1 0 0\nEOF\n"));
}

TEST_CASE("generator is deterministic and stays on the unit square") {
    GeneratorConfig g;
    g.kind = ProblemKind::CVRP;
    g.n = 30;
    g.seed = 17;
    const auto a = generate(g);
    const auto b = generate(g);
    CHECK(a.coords() == b.coords());
    CHECK(a.demands() == b.demands());
    CHECK(a.size() == 31);
    CHECK(a.coords()[0] == Point{0.5, 0.5});
    for (int v : a.elements()) {
        CHECK(a.demand(v) >= 1);
        CHECK(a.demand(v) <= 9);
        CHECK(a.coords()[static_cast<std::size_t>(v)].x >= 0.0);
        CHECK(a.coords()[static_cast<std::size_t>(v)].x < 1.0);
    }
    g.seed = 18;
    CHECK(generate(g).coords() != a.coords());
}

TEST_CASE("native JSON and TSPLIB writers round-trip exactly") {
    GeneratorConfig g;
    g.kind = ProblemKind::OVRP;
    g.n = 12;
    g.seed = 5;
    const auto inst = generate(g);
    const auto back = instance_from_json(instance_to_json(inst));
    CHECK(back.coords() == inst.coords());
    CHECK(back.demands() == inst.demands());
    CHECK(back.kind() == ProblemKind::OVRP);
    CHECK(back.capacity() == inst.capacity());

    g.kind = ProblemKind::TSP;
    const auto tsp = generate(g);
    const auto parsed = parse_tsplib(write_tsplib(tsp));
    CHECK(parsed.coords() == tsp.coords());
    CHECK(parsed.dist(1, 7) == std::round(tsp.dist(1, 7)));
}

TEST_CASE("Held-Karp matches brute force on small tours") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        GeneratorConfig g;
        g.n = 8;
        g.seed = seed;
        const auto inst = generate(g);
        const auto exact = held_karp_tsp(inst);
        CHECK(exact.cost == doctest::Approx(brute_force_tsp(inst)).epsilon(1e-12));
        CHECK(check_feasible(inst, exact.solution).ok());
        CHECK(cost(inst, exact.solution) == doctest::Approx(exact.cost).epsilon(1e-12));
    }
}

TEST_CASE("exact VRP matches brute force for closed and open routes") {
    for (auto kind : {ProblemKind::CVRP, ProblemKind::OVRP}) {
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            GeneratorConfig g;
            g.kind = kind;
            g.n = 6;
            g.seed = 40 + seed;
            g.capacity = 15;
            const auto inst = generate(g);
            const auto exact = exact_vrp(inst);
            CHECK(exact.cost == doctest::Approx(brute_force_vrp(inst)).epsilon(1e-12));
            CHECK(check_feasible(inst, exact.solution).ok());
            CHECK(cost(inst, exact.solution) == doctest::Approx(exact.cost).epsilon(1e-12));
        }
    }
}

TEST_CASE("exact_reference covers only small instances") {
    GeneratorConfig g;
    g.n = 10;
    CHECK(exact_reference(generate(g)).has_value());
    g.n = 11;
    CHECK_FALSE(exact_reference(generate(g)).has_value());
    g.kind = ProblemKind::CVRP;
    g.n = 8;
    CHECK(exact_reference(generate(g)).has_value());
    g.n = 9;
    CHECK_FALSE(exact_reference(generate(g)).has_value());
}

TEST_CASE("gap arithmetic") {
    CHECK(gap(10.5, 10.0) == doctest::Approx(0.05));
    CHECK(gap(9.0, 10.0) == doctest::Approx(-0.1));
    CHECK_THROWS_AS(gap(1.0, 0.0), DomainError);
}

TEST_CASE("reference table CSV round-trip") {
    ReferenceTable t;
    t.set("a", 7542.0, ReferenceSource::File);
    t.set("b", 1.2345678901234567, ReferenceSource::Oracle);
    const auto back = ReferenceTable::parse_csv(t.to_csv());
    REQUIRE(back.size() == 2);
    CHECK(back.find("b")->cost == 1.2345678901234567);
    CHECK(back.find("b")->source == ReferenceSource::Oracle);
    CHECK_FALSE(back.find("c").has_value());
    CHECK_THROWS(ReferenceTable::parse_csv("name,cost,source\na,-1,file\n"));
}

TEST_CASE("scaling factor is the largest coordinate extent") {
    const auto tri = load_instance(kFixtures + "/triangle345.tsp");
    CHECK(scaling_factor(tri) == 4.0);
}

}
