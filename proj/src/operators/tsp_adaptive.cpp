// Adaptive continuous-segment removal and diversity-adaptive probabilistic
// insertion for the TSP.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "glns/operators.hpp"
#include "operators/internal.hpp"

namespace glns {

namespace {

const std::vector<int>& tour_of(const Solution& solution, const char* op) {
    const auto* t = std::get_if<TourSolution>(&solution);
    if (!t) throw OperatorError(std::string(op) + " works on TSP tours only");
    return t->tour;
}

}  // namespace

double acsr_window_score(const Instance& instance, const std::vector<int>& tour, int start, int count) {
    const int n = static_cast<int>(tour.size());
    auto at = [&](int i) { return tour[static_cast<std::size_t>(((i % n) + n) % n)]; };
    double score = 0.0;
    for (int i = 0; i < count - 1; ++i) score += instance.dist(at(start + i), at(start + i + 1));
    if (count < n) {
        score += instance.dist(at(start - 1), at(start));
        score += instance.dist(at(start + count - 1), at(start + count));
    }
    return score;
}

DestroyOutcome acsr_destroy(const Solution& solution, int count, const Instance& instance, Rng& rng,
                            const AcsrOptions& options) {
    const auto& tour = tour_of(solution, "acsr_destroy");
    detail::require_count(solution, count, "acsr_destroy");
    const int n = static_cast<int>(tour.size());

    std::vector<int> positions;
    if (count <= n * options.moderate_ratio) {
        std::vector<double> scores(static_cast<std::size_t>(n));
        for (int s = 0; s < n; ++s) scores[static_cast<std::size_t>(s)] = acsr_window_score(instance, tour, s, count);
        std::size_t start = 0;
        if (rng.uniform() < options.greedy_prob) {
            for (std::size_t s = 1; s < scores.size(); ++s)
                if (scores[s] > scores[start]) start = s;
        } else if (std::accumulate(scores.begin(), scores.end(), 0.0) > 0.0) {
            start = rng.weighted_index(scores);
        } else {
            start = rng.index(scores.size());
        }
        for (int i = 0; i < count; ++i) positions.push_back((static_cast<int>(start) + i) % n);
    } else {
        // several random circular segments whose sizes add up to count
        const int cap = std::max(2, static_cast<int>(count * options.segment_frac));
        std::set<int> chosen;
        int remaining = count;
        int segments = 0;
        while (remaining > 0 && segments < n) {
            const int max_size = std::min(remaining, cap);
            const int size = static_cast<int>(rng.uniform_int(1, max_size));
            const int start = static_cast<int>(rng.uniform_int(0, n - 1));
            for (int i = 0; i < size; ++i) chosen.insert((start + i) % n);
            remaining -= size;
            ++segments;
        }
        positions.assign(chosen.begin(), chosen.end());
        if (static_cast<int>(positions.size()) > count) positions.resize(static_cast<std::size_t>(count));
    }

    std::vector<int> removed;
    removed.reserve(static_cast<std::size_t>(count));
    for (int p : positions) removed.push_back(tour[static_cast<std::size_t>(p)]);
    Solution partial = remove_nodes(solution, removed);

    // overlapping segments can fall short of count; top up uniformly
    const int missing = count - static_cast<int>(removed.size());
    if (missing > 0) {
        auto extra = random_removal(partial, missing, instance, rng);
        removed.insert(removed.end(), extra.removed.begin(), extra.removed.end());
        partial = std::move(extra.partial);
    }
    return {removed, partial};
}

double dapi_diversity(const Instance& instance, const std::vector<int>& path) {
    if (path.size() <= 1) return 0.5;
    const double top = instance.max_distance();
    if (!(top > 0.0)) return 0.0;
    const double avg = tour_length(instance, path) / static_cast<double>(path.size());
    return std::min(avg / top, 1.0);
}

DapiSchedule dapi_schedule(double diversity, const DapiOptions& options) {
    DapiSchedule s;
    s.diversity = diversity;
    s.random_threshold = options.random_base + options.random_scale * (1.0 - diversity);
    s.temperature = std::max(options.temp_base - options.temp_scale * diversity, 1e-6);
    s.two_opt_prob = options.two_opt_base + options.two_opt_scale * s.random_threshold;
    return s;
}

bool two_opt_sweep(const Instance& instance, std::vector<int>& tour) {
    const std::size_t n = tour.size();
    if (n < 4) return false;
    bool improved = false;
    for (std::size_t i = 0; i + 2 < n; ++i) {
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue;
            const int a = tour[i], b = tour[i + 1], c = tour[j], d = tour[(j + 1) % n];
            const double delta = instance.dist(a, c) + instance.dist(b, d) - instance.dist(a, b) - instance.dist(c, d);
            if (delta < -1e-12) {
                std::reverse(tour.begin() + static_cast<std::ptrdiff_t>(i) + 1, tour.begin() + static_cast<std::ptrdiff_t>(j) + 1);
                improved = true;
            }
        }
    }
    return improved;
}

Solution dapi_repair(const Solution& partial, const std::vector<int>& removed, const Instance& instance, Rng& rng,
                     const DapiOptions& options) {
    std::vector<int> tour = tour_of(partial, "dapi_repair");
    if (removed.empty()) return TourSolution{tour};

    const DapiSchedule schedule = dapi_schedule(dapi_diversity(instance, tour), options);
    std::vector<int> order = removed;
    rng.shuffle(std::span<int>(order));

    if (tour.size() <= 1) {
        tour.insert(tour.end(), order.begin(), order.end());
        return TourSolution{tour};
    }

    std::vector<double> costs;
    for (int city : order) {
        const std::size_t n = tour.size();
        // n + 1 slots; slot 0 and slot n both sit between the last and the first node
        costs.assign(n + 1, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            const int prev = i > 0 ? tour[i - 1] : tour[n - 1];
            const int next = i < n ? tour[i] : tour[0];
            costs[i] = instance.dist(prev, city) + instance.dist(city, next) - instance.dist(prev, next);
        }
        std::size_t pos = 0;
        if (rng.uniform() < schedule.random_threshold) {
            pos = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(n)));
        } else if (rng.uniform() < options.softmax_prob) {
            const double min_c = *std::min_element(costs.begin(), costs.end());
            const double scale = std::max(1.0, min_c);
            std::vector<double> weights(costs.size());
            for (std::size_t i = 0; i < costs.size(); ++i)
                weights[i] = std::exp(-(costs[i] - min_c) / scale / schedule.temperature);
            pos = rng.weighted_index(weights);
        } else {
            pos = static_cast<std::size_t>(std::min_element(costs.begin(), costs.end()) - costs.begin());
        }
        tour.insert(tour.begin() + static_cast<std::ptrdiff_t>(pos), city);
    }

    if (rng.uniform() < schedule.two_opt_prob) two_opt_sweep(instance, tour);
    return TourSolution{tour};
}

}  // namespace glns
