#include "glns/problem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace glns {

std::string_view to_string(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::TSP: return "tsp";
        case ProblemKind::CVRP: return "cvrp";
        case ProblemKind::OVRP: return "ovrp";
    }
    return "?";
}

ProblemKind parse_problem_kind(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "tsp") return ProblemKind::TSP;
    if (lower == "cvrp") return ProblemKind::CVRP;
    if (lower == "ovrp") return ProblemKind::OVRP;
    throw ConfigError("unknown problem kind '" + std::string(text) + "'");
}

std::string_view to_string(DistanceRule rule) {
    switch (rule) {
        case DistanceRule::Euclidean: return "euclidean";
        case DistanceRule::RoundedEuclidean: return "euc_2d";
        case DistanceRule::CeilEuclidean: return "ceil_2d";
    }
    return "?";
}

DistanceRule parse_distance_rule(std::string_view text) {
    if (text == "euclidean") return DistanceRule::Euclidean;
    if (text == "euc_2d") return DistanceRule::RoundedEuclidean;
    if (text == "ceil_2d") return DistanceRule::CeilEuclidean;
    throw ConfigError("unknown distance rule '" + std::string(text) + "'");
}

Instance::Instance(Spec spec) : spec_(std::move(spec)) {
    const int n = static_cast<int>(spec_.coords.size());
    if (spec_.kind == ProblemKind::TSP) {
        if (n < 2) throw ConfigError("TSP instance needs at least 2 nodes");
        spec_.demands.clear();
        spec_.capacity = 0;
        spec_.depot = 0;
    } else {
        if (n < 1) throw ConfigError("routing instance needs a depot");
        if (spec_.capacity <= 0) throw ConfigError("capacity must be positive");
        if (spec_.depot < 0 || spec_.depot >= n) throw ConfigError("depot index out of range");
        if (static_cast<int>(spec_.demands.size()) != n) throw ConfigError("demand list length must equal node count");
        if (spec_.demands[static_cast<std::size_t>(spec_.depot)] != 0) throw ConfigError("depot demand must be 0");
        for (int i = 0; i < n; ++i) {
            const int q = spec_.demands[static_cast<std::size_t>(i)];
            if (q < 0) throw ConfigError("negative demand at node " + std::to_string(i));
            if (q > spec_.capacity)
                throw ConfigError("demand of node " + std::to_string(i) + " exceeds capacity");
        }
    }

    coords_count_ = static_cast<std::size_t>(n);
    dist_.assign(coords_count_ * coords_count_, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dx = spec_.coords[static_cast<std::size_t>(i)].x - spec_.coords[static_cast<std::size_t>(j)].x;
            const double dy = spec_.coords[static_cast<std::size_t>(i)].y - spec_.coords[static_cast<std::size_t>(j)].y;
            double d = std::sqrt(dx * dx + dy * dy);
            if (spec_.distance_rule == DistanceRule::RoundedEuclidean) d = std::floor(d + 0.5);
            else if (spec_.distance_rule == DistanceRule::CeilEuclidean) d = std::ceil(d);
            dist_[static_cast<std::size_t>(i) * coords_count_ + static_cast<std::size_t>(j)] = d;
            dist_[static_cast<std::size_t>(j) * coords_count_ + static_cast<std::size_t>(i)] = d;
            max_dist_ = std::max(max_dist_, d);
        }
    }

    for (int i = 0; i < n; ++i) {
        if (spec_.kind == ProblemKind::TSP || i != spec_.depot) elements_.push_back(i);
    }
}

std::size_t element_count(const Solution& solution) {
    if (const auto* t = std::get_if<TourSolution>(&solution)) return t->tour.size();
    std::size_t count = 0;
    for (const auto& route : std::get<RouteSolution>(solution).routes) count += route.size();
    return count;
}

std::vector<int> flatten(const Solution& solution) {
    if (const auto* t = std::get_if<TourSolution>(&solution)) return t->tour;
    std::vector<int> out;
    for (const auto& route : std::get<RouteSolution>(solution).routes) out.insert(out.end(), route.begin(), route.end());
    return out;
}

std::string FeasibilityReport::summary() const {
    if (ok()) return "ok";
    std::ostringstream out;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i) out << "; ";
        out << violations[i].message;
    }
    return out.str();
}

InfeasibleSolutionError::InfeasibleSolutionError(FeasibilityReport report)
    : Error("infeasible solution: " + report.summary()), report_(std::move(report)) {}

namespace {

void check_coverage(const Instance& instance, const std::vector<int>& nodes, FeasibilityReport& report) {
    const int n = instance.size();
    std::vector<int> seen(static_cast<std::size_t>(n), 0);
    for (int v : nodes) {
        if (v < 0 || v >= n) {
            report.violations.push_back({Violation::Type::Coverage, v, -1, 0, "node " + std::to_string(v) + " out of range"});
            continue;
        }
        ++seen[static_cast<std::size_t>(v)];
    }
    for (int v : instance.elements()) {
        const int c = seen[static_cast<std::size_t>(v)];
        if (c == 0)
            report.violations.push_back({Violation::Type::Coverage, v, -1, 0, "node " + std::to_string(v) + " missing"});
        else if (c > 1)
            report.violations.push_back({Violation::Type::Coverage, v, -1, 0,
                                         "node " + std::to_string(v) + " visited " + std::to_string(c) + " times"});
    }
}

}  // namespace

FeasibilityReport check_feasible(const Instance& instance, const Solution& solution) {
    FeasibilityReport report;
    if (instance.kind() == ProblemKind::TSP) {
        const auto* tour = std::get_if<TourSolution>(&solution);
        if (!tour) {
            report.violations.push_back({Violation::Type::Structure, -1, -1, 0, "TSP instance needs a tour solution"});
            return report;
        }
        check_coverage(instance, tour->tour, report);
        return report;
    }

    const auto* routes = std::get_if<RouteSolution>(&solution);
    if (!routes) {
        report.violations.push_back({Violation::Type::Structure, -1, -1, 0, "routing instance needs a route solution"});
        return report;
    }
    std::vector<int> customers;
    for (std::size_t r = 0; r < routes->routes.size(); ++r) {
        const auto& route = routes->routes[r];
        const int ri = static_cast<int>(r);
        if (route.empty())
            report.violations.push_back({Violation::Type::Structure, -1, ri, 0, "route " + std::to_string(r) + " is empty"});
        int load = 0;
        for (int v : route) {
            if (v == instance.depot()) {
                report.violations.push_back(
                    {Violation::Type::Structure, v, ri, 0, "route " + std::to_string(r) + " contains the depot"});
                continue;
            }
            customers.push_back(v);
            if (v >= 0 && v < instance.size()) load += instance.demand(v);
        }
        if (load > instance.capacity())
            report.violations.push_back({Violation::Type::Capacity, -1, ri, load,
                                         "route " + std::to_string(r) + " load " + std::to_string(load) +
                                             " exceeds capacity " + std::to_string(instance.capacity())});
    }
    check_coverage(instance, customers, report);
    return report;
}

double tour_length(const Instance& instance, const std::vector<int>& tour) {
    if (tour.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < tour.size(); ++i) total += instance.dist(tour[i], tour[i + 1]);
    total += instance.dist(tour.back(), tour.front());
    return total;
}

double route_length(const Instance& instance, const std::vector<int>& route, bool open) {
    if (route.empty()) return 0.0;
    const int depot = instance.depot();
    double total = instance.dist(depot, route.front());
    for (std::size_t i = 0; i + 1 < route.size(); ++i) total += instance.dist(route[i], route[i + 1]);
    if (!open) total += instance.dist(route.back(), depot);
    return total;
}

int route_load(const Instance& instance, const std::vector<int>& route) {
    int load = 0;
    for (int v : route) load += instance.demand(v);
    return load;
}

namespace {

double closed_routes_cost(const Instance& instance, const RouteSolution& solution) {
    double total = 0.0;
    for (const auto& route : solution.routes) total += route_length(instance, route, false);
    return total;
}

double return_arcs(const Instance& instance, const RouteSolution& solution) {
    double total = 0.0;
    for (const auto& route : solution.routes) total += instance.dist(route.back(), instance.depot());
    return total;
}

void require_feasible(const Instance& instance, const Solution& solution) {
    auto report = check_feasible(instance, solution);
    if (!report.ok()) throw InfeasibleSolutionError(std::move(report));
}

}  // namespace

double tsp_cost(const Instance& instance, const TourSolution& tour) {
    if (instance.kind() != ProblemKind::TSP) throw InvalidSolutionError("tsp_cost called on a non-TSP instance");
    if (static_cast<int>(tour.tour.size()) != instance.size())
        throw InvalidSolutionError("tour has " + std::to_string(tour.tour.size()) + " nodes, instance has " +
                                   std::to_string(instance.size()));
    auto report = check_feasible(instance, tour);
    if (!report.ok()) throw InvalidSolutionError("invalid tour: " + report.summary());
    return tour_length(instance, tour.tour);
}

double cvrp_cost(const Instance& instance, const RouteSolution& solution) {
    if (!is_routing(instance.kind())) throw InvalidSolutionError("cvrp_cost called on a TSP instance");
    require_feasible(instance, solution);
    return closed_routes_cost(instance, solution);
}

// The open objective is defined as the closed objective minus the return arcs,
// evaluated in route order, so the identity holds exactly in floating point.
double ovrp_cost(const Instance& instance, const RouteSolution& solution) {
    if (!is_routing(instance.kind())) throw InvalidSolutionError("ovrp_cost called on a TSP instance");
    require_feasible(instance, solution);
    return closed_routes_cost(instance, solution) - return_arcs(instance, solution);
}

double cost(const Instance& instance, const Solution& solution) {
    switch (instance.kind()) {
        case ProblemKind::TSP: {
            const auto* tour = std::get_if<TourSolution>(&solution);
            if (!tour) throw InvalidSolutionError("TSP instance needs a tour solution");
            return tsp_cost(instance, *tour);
        }
        case ProblemKind::CVRP:
        case ProblemKind::OVRP: {
            const auto* routes = std::get_if<RouteSolution>(&solution);
            if (!routes) throw InvalidSolutionError("routing instance needs a route solution");
            return instance.kind() == ProblemKind::CVRP ? cvrp_cost(instance, *routes) : ovrp_cost(instance, *routes);
        }
    }
    return 0.0;
}

double unchecked_cost(const Instance& instance, const Solution& solution) {
    if (const auto* tour = std::get_if<TourSolution>(&solution)) return tour_length(instance, tour->tour);
    const auto& routes = std::get<RouteSolution>(solution);
    if (instance.kind() == ProblemKind::OVRP) return closed_routes_cost(instance, routes) - return_arcs(instance, routes);
    return closed_routes_cost(instance, routes);
}

}  // namespace glns
