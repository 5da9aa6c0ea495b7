// Progressive stochastic-worst removal and adaptive context-aware greedy
// insertion for capacitated routing. Both score arcs as closed routes
// (depot at both ends) regardless of the instance variant.

#include <algorithm>
#include <cmath>

#include "glns/operators.hpp"

namespace glns {

namespace {

const std::vector<std::vector<int>>& routes_of(const Solution& solution, const char* op) {
    const auto* r = std::get_if<RouteSolution>(&solution);
    if (!r) throw OperatorError(std::string(op) + " works on route solutions only");
    return r->routes;
}

double closed_saving(const Instance& instance, const std::vector<int>& route, std::size_t i) {
    const int depot = instance.depot();
    const int node = route[i];
    const int prev = i > 0 ? route[i - 1] : depot;
    const int next = i + 1 < route.size() ? route[i + 1] : depot;
    return instance.dist(prev, node) + instance.dist(node, next) - instance.dist(prev, next);
}

}  // namespace

DestroyOutcome pswr_destroy(const Solution& solution, int count, const Instance& instance, Rng& rng,
                            const PswrOptions& options) {
    auto routes = routes_of(solution, "pswr_destroy");
    if (count < 1) throw OperatorError("pswr_destroy: count must be >= 1");
    std::vector<int> customers = flatten(solution);
    if (static_cast<int>(customers.size()) <= count) return {customers, RouteSolution{}};

    std::vector<int> removed;
    while (static_cast<int>(removed.size()) < count) {
        const double greedy_ratio =
            std::max(options.ratio_floor, static_cast<double>(removed.size()) / static_cast<double>(count));
        struct Candidate {
            double saving;
            int node;
        };
        std::vector<Candidate> remaining;
        for (const auto& route : routes)
            for (std::size_t i = 0; i < route.size(); ++i) remaining.push_back({closed_saving(instance, route, i), route[i]});
        if (remaining.empty()) break;

        int selected;
        if (rng.uniform() < greedy_ratio) {
            std::stable_sort(remaining.begin(), remaining.end(), [](const Candidate& a, const Candidate& b) {
                if (a.saving != b.saving) return a.saving > b.saving;
                return a.node < b.node;
            });
            const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, options.top_k)), remaining.size());
            selected = remaining[rng.index(top)].node;
        } else {
            selected = remaining[rng.index(remaining.size())].node;
        }
        removed.push_back(selected);
        for (auto& route : routes) {
            auto it = std::find(route.begin(), route.end(), selected);
            if (it != route.end()) {
                route.erase(it);
                break;
            }
        }
    }
    RouteSolution partial;
    for (auto& route : routes)
        if (!route.empty()) partial.routes.push_back(std::move(route));
    return {removed, partial};
}

Solution acagi_repair(const Solution& partial, const std::vector<int>& removed, const Instance& instance, Rng& rng,
                      const AcagiOptions& options) {
    std::vector<std::vector<int>> routes = routes_of(partial, "acagi_repair");
    const int depot = instance.depot();
    const double capacity = instance.capacity();

    auto delta_at = [&](const std::vector<int>& route, std::size_t pos, int customer) {
        if (route.empty()) return instance.dist(depot, customer) + instance.dist(customer, depot);
        const int prev = pos > 0 ? route[pos - 1] : depot;
        const int next = pos < route.size() ? route[pos] : depot;
        return instance.dist(prev, customer) + instance.dist(customer, next) - instance.dist(prev, next);
    };

    std::vector<int> loads;
    loads.reserve(routes.size());
    for (const auto& r : routes) loads.push_back(route_load(instance, r));

    struct Option {
        double cost;
        std::size_t route;
        std::size_t position;
        int route_load;
        std::size_t route_length;
    };

    double difficulty = 0.0;
    const double threshold = static_cast<double>(removed.size()) * options.difficulty_frac;
    std::vector<Option> candidates;
    for (std::size_t idx = 0; idx < removed.size(); ++idx) {
        const int customer = removed[idx];
        const int demand = instance.demand(customer);
        candidates.clear();
        for (std::size_t r = 0; r < routes.size(); ++r) {
            if (loads[r] + demand > instance.capacity()) continue;
            for (std::size_t p = 0; p <= routes[r].size(); ++p)
                candidates.push_back({delta_at(routes[r], p, customer), r, p, loads[r], routes[r].size()});
        }
        candidates.push_back(
            {instance.dist(depot, customer) + instance.dist(customer, depot), routes.size(), 0, 0, 0});

        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Option& a, const Option& b) { return a.cost < b.cost; });
        const double best_cost = candidates.front().cost;
        const std::size_t still_pending = removed.size() - idx - 1;
        if (still_pending > 0 && candidates.size() < 3) difficulty = difficulty * options.difficulty_decay + 1.0;
        else difficulty = difficulty * options.difficulty_decay;

        std::size_t k_regret;
        double exploration;
        if (difficulty > threshold) {
            k_regret = std::min<std::size_t>(4, candidates.size());
            exploration = options.explore_hard;
        } else {
            k_regret = std::min<std::size_t>(3, std::max<std::size_t>(2, candidates.size() / 3));
            exploration = options.explore_easy;
        }

        const Option* selected = &candidates.front();
        if (candidates.size() >= k_regret) {
            std::vector<std::pair<double, std::size_t>> scored;
            for (std::size_t i = 0; i < std::min(k_regret, candidates.size()); ++i) {
                const Option& c = candidates[i];
                double score = c.cost - best_cost;
                score += options.load_penalty * (capacity > 0 ? c.route_load / capacity : 0.0);
                if (c.route_length > 0)
                    score += options.length_penalty * (static_cast<double>(c.route_length) / options.length_divisor);
                if (rng.uniform() < exploration && best_cost > 0)
                    score += rng.uniform(-options.noise, options.noise) * best_cost;
                scored.emplace_back(score, i);
            }
            if (!scored.empty()) {
                std::stable_sort(scored.begin(), scored.end(),
                                 [](const auto& a, const auto& b) { return a.first < b.first; });
                std::size_t pick = scored.front().second;
                const double greedy_p =
                    options.greedy_base - options.greedy_slope * (threshold > 0 ? difficulty / threshold : 0.0);
                if (!(rng.uniform() < greedy_p)) {
                    const std::size_t top = std::min<std::size_t>(3, scored.size());
                    double total = 0.0;
                    for (std::size_t i = 0; i < top; ++i) total += 1.0 / static_cast<double>(i + 1);
                    const double target = rng.uniform() * total;
                    double cumulative = 0.0;
                    for (std::size_t i = 0; i < top; ++i) {
                        cumulative += 1.0 / static_cast<double>(i + 1);
                        if (target <= cumulative) {
                            pick = scored[i].second;
                            break;
                        }
                    }
                }
                selected = &candidates[pick];
            }
        }

        if (selected->route == routes.size()) {
            routes.push_back({customer});
            loads.push_back(demand);
        } else {
            auto& route = routes[selected->route];
            route.insert(route.begin() + static_cast<std::ptrdiff_t>(selected->position), customer);
            loads[selected->route] += demand;
        }
    }

    std::vector<std::vector<int>> final_routes;
    std::vector<int> final_loads;
    for (std::size_t r = 0; r < routes.size(); ++r) {
        if (routes[r].empty()) continue;
        final_routes.push_back(std::move(routes[r]));
        final_loads.push_back(loads[r]);
    }

    if (options.consolidate && final_routes.size() > 1) {
        std::vector<std::vector<int>> merged;
        std::vector<bool> used(final_routes.size(), false);
        for (std::size_t i = 0; i < final_routes.size(); ++i) {
            if (used[i]) continue;
            std::vector<int> current = final_routes[i];
            int load = final_loads[i];
            for (std::size_t j = i + 1; j < final_routes.size(); ++j) {
                if (used[j]) continue;
                if (load + final_loads[j] <= instance.capacity() &&
                    static_cast<int>(current.size() + final_routes[j].size()) < options.consolidate_max_customers) {
                    current.insert(current.end(), final_routes[j].begin(), final_routes[j].end());
                    load += final_loads[j];
                    used[j] = true;
                }
            }
            merged.push_back(std::move(current));
            used[i] = true;
        }
        final_routes = std::move(merged);
    }
    return RouteSolution{final_routes};
}

}  // namespace glns
