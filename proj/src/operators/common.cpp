#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "glns/operators.hpp"

namespace glns {

std::string_view to_string(OperatorKind kind) { return kind == OperatorKind::Destroy ? "destroy" : "repair"; }

OperatorKind parse_operator_kind(std::string_view text) {
    if (text == "destroy") return OperatorKind::Destroy;
    if (text == "repair") return OperatorKind::Repair;
    throw ConfigError("unknown operator kind '" + std::string(text) + "'");
}

int destroy_count(int n, double epsilon) {
    if (n < 2) throw ConfigError("destroy_count: need at least 2 elements");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("destroy_count: epsilon must lie in (0, 1)");
    const long rounded = std::lround(epsilon * n);
    return static_cast<int>(std::clamp<long>(rounded, 1, n - 1));
}

std::string check_conservation(const Solution& original, const DestroyOutcome& outcome) {
    if (original.index() != outcome.partial.index()) return "partial solution has the wrong shape";
    if (const auto* routes = std::get_if<RouteSolution>(&outcome.partial)) {
        for (const auto& r : routes->routes)
            if (r.empty()) return "partial solution contains an empty route";
    }
    std::unordered_map<int, int> balance;
    for (int v : flatten(original)) ++balance[v];
    for (int v : outcome.removed) --balance[v];
    for (int v : flatten(outcome.partial)) --balance[v];
    for (const auto& [node, count] : balance) {
        if (count > 0) return "node " + std::to_string(node) + " lost by destroy";
        if (count < 0) return "node " + std::to_string(node) + " duplicated by destroy";
    }
    return {};
}

double removal_saving(const Instance& instance, const Solution& solution, int node) {
    if (const auto* t = std::get_if<TourSolution>(&solution)) {
        const auto& tour = t->tour;
        const auto it = std::find(tour.begin(), tour.end(), node);
        if (it == tour.end()) throw OperatorError("node " + std::to_string(node) + " not in tour");
        const std::size_t n = tour.size();
        if (n <= 1) return 0.0;
        const std::size_t i = static_cast<std::size_t>(it - tour.begin());
        const int prev = tour[(i + n - 1) % n];
        const int next = tour[(i + 1) % n];
        return instance.dist(prev, node) + instance.dist(node, next) - instance.dist(prev, next);
    }
    const int depot = instance.depot();
    const bool open = instance.kind() == ProblemKind::OVRP;
    for (const auto& route : std::get<RouteSolution>(solution).routes) {
        const auto it = std::find(route.begin(), route.end(), node);
        if (it == route.end()) continue;
        const std::size_t i = static_cast<std::size_t>(it - route.begin());
        const int prev = i > 0 ? route[i - 1] : depot;
        if (i + 1 == route.size() && open) return instance.dist(prev, node);
        const int next = i + 1 < route.size() ? route[i + 1] : depot;
        return instance.dist(prev, node) + instance.dist(node, next) - instance.dist(prev, next);
    }
    throw OperatorError("node " + std::to_string(node) + " not in any route");
}

Solution remove_nodes(const Solution& solution, const std::vector<int>& nodes) {
    auto drop = [&](int v) { return std::find(nodes.begin(), nodes.end(), v) != nodes.end(); };
    if (const auto* t = std::get_if<TourSolution>(&solution)) {
        TourSolution out;
        out.tour.reserve(t->tour.size());
        for (int v : t->tour)
            if (!drop(v)) out.tour.push_back(v);
        return out;
    }
    RouteSolution out;
    for (const auto& route : std::get<RouteSolution>(solution).routes) {
        std::vector<int> kept;
        for (int v : route)
            if (!drop(v)) kept.push_back(v);
        if (!kept.empty()) out.routes.push_back(std::move(kept));
    }
    return out;
}

std::vector<InsertionSlot> insertion_slots(const Instance& instance, const Solution& partial, int node) {
    std::vector<InsertionSlot> slots;
    if (const auto* t = std::get_if<TourSolution>(&partial)) {
        const auto& tour = t->tour;
        const std::size_t n = tour.size();
        if (n == 0) {
            slots.push_back({0, 0, 0.0});
            return slots;
        }
        if (n == 1) {
            slots.push_back({0, 0, 2.0 * instance.dist(tour[0], node)});
            return slots;
        }
        slots.reserve(n);
        for (std::size_t p = 0; p < n; ++p) {
            const int a = tour[p];
            const int b = tour[(p + 1) % n];
            slots.push_back({0, static_cast<int>(p), instance.dist(a, node) + instance.dist(node, b) - instance.dist(a, b)});
        }
        return slots;
    }
    const auto& routes = std::get<RouteSolution>(partial).routes;
    const int depot = instance.depot();
    const bool open = instance.kind() == ProblemKind::OVRP;
    const int q = instance.demand(node);
    for (std::size_t r = 0; r < routes.size(); ++r) {
        const auto& route = routes[r];
        if (route_load(instance, route) + q > instance.capacity()) continue;
        for (std::size_t p = 0; p <= route.size(); ++p) {
            const int prev = p > 0 ? route[p - 1] : depot;
            double delta;
            if (p == route.size() && open) {
                delta = instance.dist(prev, node);
            } else {
                const int next = p < route.size() ? route[p] : depot;
                delta = instance.dist(prev, node) + instance.dist(node, next) - instance.dist(prev, next);
            }
            slots.push_back({static_cast<int>(r), static_cast<int>(p), delta});
        }
    }
    return slots;
}

void insert_at(Solution& partial, const InsertionSlot& slot, int node) {
    if (auto* t = std::get_if<TourSolution>(&partial)) {
        if (t->tour.empty()) {
            t->tour.push_back(node);
            return;
        }
        t->tour.insert(t->tour.begin() + slot.position + 1, node);
        return;
    }
    auto& route = std::get<RouteSolution>(partial).routes.at(static_cast<std::size_t>(slot.route));
    route.insert(route.begin() + slot.position, node);
}

void open_route(Solution& partial, int node) {
    auto* routes = std::get_if<RouteSolution>(&partial);
    if (!routes) throw OperatorError("cannot open a route in a tour");
    routes->routes.push_back({node});
}

}  // namespace glns
