#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "glns/operators.hpp"
#include "operators/internal.hpp"

namespace glns {

namespace detail {

void require_count(const Solution& solution, int count, const char* op) {
    const int size = static_cast<int>(element_count(solution));
    if (count < 1) throw OperatorError(std::string(op) + ": count must be >= 1");
    if (count > size - 1)
        throw OperatorError(std::string(op) + ": count " + std::to_string(count) + " too large for " +
                            std::to_string(size) + " elements");
}

std::vector<NodeSaving> all_savings(const Instance& instance, const Solution& solution) {
    std::vector<NodeSaving> out;
    if (const auto* t = std::get_if<TourSolution>(&solution)) {
        const auto& tour = t->tour;
        const std::size_t n = tour.size();
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (n <= 1) {
                out.push_back({tour[i], 0.0});
                continue;
            }
            const int prev = tour[(i + n - 1) % n];
            const int next = tour[(i + 1) % n];
            const int v = tour[i];
            out.push_back({v, instance.dist(prev, v) + instance.dist(v, next) - instance.dist(prev, next)});
        }
        return out;
    }
    const int depot = instance.depot();
    const bool open = instance.kind() == ProblemKind::OVRP;
    for (const auto& route : std::get<RouteSolution>(solution).routes) {
        for (std::size_t i = 0; i < route.size(); ++i) {
            const int v = route[i];
            const int prev = i > 0 ? route[i - 1] : depot;
            if (open && i + 1 == route.size()) {
                out.push_back({v, instance.dist(prev, v)});
                continue;
            }
            const int next = i + 1 < route.size() ? route[i + 1] : depot;
            out.push_back({v, instance.dist(prev, v) + instance.dist(v, next) - instance.dist(prev, next)});
        }
    }
    return out;
}

std::size_t ranked_pick(std::size_t size, double noise, Rng& rng) {
    if (noise <= 0.0 || size <= 1) return 0;
    const double y = rng.uniform();
    const auto idx = static_cast<std::size_t>(std::floor(std::pow(y, 1.0 / noise) * static_cast<double>(size)));
    return std::min(idx, size - 1);
}

}  // namespace detail

using detail::NodeSaving;

DestroyOutcome random_removal(const Solution& solution, int count, const Instance& instance, Rng& rng,
                              const RandomRemovalOptions& options) {
    detail::require_count(solution, count, "random_removal");
    std::vector<int> removed;
    removed.reserve(static_cast<std::size_t>(count));
    if (options.bias <= 0.0) {
        std::vector<int> pool = flatten(solution);
        for (int i = 0; i < count; ++i) {
            const std::size_t j = static_cast<std::size_t>(i) + rng.index(pool.size() - static_cast<std::size_t>(i));
            std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
            removed.push_back(pool[static_cast<std::size_t>(i)]);
        }
    } else {
        auto savings = detail::all_savings(instance, solution);
        double top = 0.0;
        for (const auto& s : savings) top = std::max(top, s.saving);
        std::vector<double> weights;
        weights.reserve(savings.size());
        for (const auto& s : savings)
            weights.push_back(1.0 + options.bias * (top > 0.0 ? std::max(0.0, s.saving) / top : 0.0));
        for (int i = 0; i < count; ++i) {
            const std::size_t pick = rng.weighted_index(weights);
            removed.push_back(savings[pick].node);
            weights[pick] = 0.0;
        }
    }
    return {removed, remove_nodes(solution, removed)};
}

DestroyOutcome worst_removal(const Solution& solution, int count, const Instance& instance, Rng& rng,
                             const WorstRemovalOptions& options) {
    detail::require_count(solution, count, "worst_removal");
    Solution current = solution;
    std::vector<int> removed;
    for (int step = 0; step < count; ++step) {
        auto savings = detail::all_savings(instance, current);
        std::stable_sort(savings.begin(), savings.end(), [](const NodeSaving& a, const NodeSaving& b) {
            if (a.saving != b.saving) return a.saving > b.saving;
            return a.node < b.node;
        });
        const int victim = savings[detail::ranked_pick(savings.size(), options.noise, rng)].node;
        removed.push_back(victim);
        current = remove_nodes(current, {victim});
    }
    return {removed, current};
}

DestroyOutcome related_removal(const Solution& solution, int count, const Instance& instance, Rng& rng,
                               const RelatedRemovalOptions& options) {
    detail::require_count(solution, count, "related_removal");
    const std::vector<int> elements = flatten(solution);
    const int seed = elements[rng.index(elements.size())];
    std::vector<int> others;
    others.reserve(elements.size());
    for (int v : elements)
        if (v != seed) others.push_back(v);
    std::stable_sort(others.begin(), others.end(), [&](int a, int b) {
        const double da = instance.dist(seed, a);
        const double db = instance.dist(seed, b);
        if (da != db) return da < db;
        return a < b;
    });
    std::vector<int> removed{seed};
    while (static_cast<int>(removed.size()) < count) {
        const std::size_t pick = detail::ranked_pick(others.size(), options.noise, rng);
        removed.push_back(others[pick]);
        others.erase(others.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return {removed, remove_nodes(solution, removed)};
}

namespace {

double perturbed(double delta, double noise, Rng& rng) {
    if (noise <= 0.0) return delta;
    return delta * (1.0 + noise * rng.uniform(-1.0, 1.0));
}

}  // namespace

Solution greedy_insertion(const Solution& partial, const std::vector<int>& removed, const Instance& instance, Rng& rng,
                          const GreedyInsertionOptions& options) {
    Solution out = partial;
    for (int v : removed) {
        const auto slots = insertion_slots(instance, out, v);
        if (slots.empty()) {
            open_route(out, v);
            continue;
        }
        std::size_t best = 0;
        double best_delta = perturbed(slots[0].delta, options.noise, rng);
        for (std::size_t i = 1; i < slots.size(); ++i) {
            const double d = perturbed(slots[i].delta, options.noise, rng);
            if (d < best_delta) {
                best_delta = d;
                best = i;
            }
        }
        insert_at(out, slots[best], v);
    }
    return out;
}

Solution regret_k_insertion(const Solution& partial, const std::vector<int>& removed, const Instance& instance, Rng& rng,
                            const RegretInsertionOptions& options) {
    if (options.k < 2) throw OperatorError("regret_k_insertion: k must be >= 2");
    Solution out = partial;
    std::vector<int> pending = removed;
    constexpr double inf = std::numeric_limits<double>::infinity();
    while (!pending.empty()) {
        std::size_t chosen = 0;
        double chosen_regret = -inf;
        std::optional<InsertionSlot> chosen_slot;
        for (std::size_t e = 0; e < pending.size(); ++e) {
            auto slots = insertion_slots(instance, out, pending[e]);
            double regret = inf;
            std::optional<InsertionSlot> best_slot;
            if (!slots.empty()) {
                std::vector<double> deltas;
                deltas.reserve(slots.size());
                for (auto& s : slots) deltas.push_back(perturbed(s.delta, options.noise, rng));
                std::size_t best = 0;
                for (std::size_t i = 1; i < deltas.size(); ++i)
                    if (deltas[i] < deltas[best]) best = i;
                best_slot = slots[best];
                const double best_delta = deltas[best];
                const std::size_t kth = std::min<std::size_t>(static_cast<std::size_t>(options.k), deltas.size()) - 1;
                std::nth_element(deltas.begin(), deltas.begin() + static_cast<std::ptrdiff_t>(kth), deltas.end());
                regret = deltas[kth] - best_delta;
            }
            if (regret > chosen_regret) {
                chosen_regret = regret;
                chosen = e;
                chosen_slot = best_slot;
            }
        }
        const int v = pending[chosen];
        if (chosen_slot) insert_at(out, *chosen_slot, v);
        else open_route(out, v);
        pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(chosen));
    }
    return out;
}

}  // namespace glns
