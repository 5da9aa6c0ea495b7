#ifndef GLNS_ENGINE_HPP
#define GLNS_ENGINE_HPP

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glns/operators.hpp"
#include "glns/problem.hpp"
#include "glns/rng.hpp"

namespace glns {

/// Selection weights, fitness and synergy for a destroy pool of size nd and a repair pool of size nr.
struct PortfolioState {
    std::vector<double> weights_d;
    std::vector<double> weights_r;
    std::vector<double> fitness_d;
    std::vector<double> fitness_r;
    std::vector<std::vector<double>> synergy;  // synergy[i][j], destroy i by repair j

    static PortfolioState zeros(std::size_t nd, std::size_t nr);

    std::size_t destroy_size() const { return fitness_d.size(); }
    std::size_t repair_size() const { return fitness_r.size(); }

    void reset_weights();
    /// Zeroes fitness and synergy. Weights are left alone.
    void reset_metrics();
    /// Adds another state's fitness and synergy (same dimensions).
    void accumulate(const PortfolioState& other);
    /// Largest deviation between the fitness vectors and the synergy marginals.
    double marginal_error() const;
};

struct EpisodeConfig {
    int iterations = 100;
    double initial_temperature = 100.0;
    double cooling_rate = 0.97;
    double destruction_ratio = 0.2;
    double smoothing = 0.5;
    std::array<double, 4> sigma{1.5, 1.2, 0.8, 0.1};
    double call_time_cap_ms = 0.0;  // 0 disables the per-call cap

    void validate() const;
};

/// Roulette-wheel pick proportional to weight.
std::size_t roulette_select(std::span<const double> weights, Rng& rng);

struct Acceptance {
    int tier = 4;  // 1 new best, 2 improving, 3 accepted worse or equal, 4 rejected
    bool accepted = false;
};

Acceptance classify_and_accept(double cost_new, double cost_curr, double cost_best, double temperature, Rng& rng);

void apply_reward(PortfolioState& state, std::size_t i, std::size_t j, double sigma, double lambda);

/// Executable destroy and repair pools with their display ids.
struct Portfolio {
    std::vector<std::string> destroy_ids;
    std::vector<std::shared_ptr<const DestroyOperator>> destroy;
    std::vector<std::string> repair_ids;
    std::vector<std::shared_ptr<const RepairOperator>> repair;

    void add_destroy(std::string id, std::shared_ptr<const DestroyOperator> op);
    void add_repair(std::string id, std::shared_ptr<const RepairOperator> op);
};

/// Portfolio of named templates, e.g. {"random_removal", "worst_removal:noise=0.2"}.
Portfolio builtin_portfolio(const std::vector<std::string>& destroy_specs, const std::vector<std::string>& repair_specs);

struct TraceRow {
    int iter = 0;
    double current_cost = 0.0;
    double best_cost = 0.0;
    std::string destroy_id;
    std::string repair_id;
    int tier = 0;  // 0 for the initial solution row
    double temperature = 0.0;
};

struct EpisodeResult {
    Solution best_solution;
    double best_cost = 0.0;
    std::vector<TraceRow> trace;
    double final_temperature = 0.0;
    std::vector<int> failures_d;
    std::vector<int> failures_r;
    std::vector<std::string> errors;
};

/// TSP: random permutation. CVRP/OVRP: shuffled customers packed into routes in order.
Solution random_initial_solution(const Instance& instance, Rng& rng);

/**
 * One adaptive LNS episode. Weights are reset to 1 on entry; fitness and
 * synergy in `state` keep accumulating. An operator that throws, breaks its
 * contract or exceeds the call cap scores the lowest tier for that iteration.
 */
EpisodeResult run_episode(const Instance& instance, const Portfolio& portfolio, PortfolioState& state,
                          const EpisodeConfig& config, Rng& rng, const Solution* initial = nullptr);

struct EvaluationResult {
    PortfolioState state;
    std::vector<double> mean_best_cost;   // per instance, over the K episodes
    std::vector<EpisodeResult> episodes;  // instance-major, K per instance
    std::vector<int> failures_d;
    std::vector<int> failures_r;
};

/**
 * K episodes per instance from fresh random starts. Episode (b, k) draws from
 * the stream derive_seed(seed, b, k), so the result does not depend on `jobs`.
 * Metrics are merged in instance order.
 */
EvaluationResult run_evaluation_phase(std::span<const Instance> batch, const Portfolio& portfolio,
                                      const PortfolioState& start, const EpisodeConfig& config, int episodes_per_instance,
                                      std::uint64_t seed, int jobs = 1);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

/// max(100 ms, 50 x median wall time of one destroy+repair call among the classical built-ins on `instance`).
double calibrate_call_cap_ms(const Instance& instance, std::uint64_t seed);

/// Runs `task(i)` for i in [0, count) on up to `jobs` threads. The first exception is rethrown.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task);

}  // namespace glns

#endif
