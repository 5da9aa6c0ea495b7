#ifndef GLNS_EVOLUTION_HPP
#define GLNS_EVOLUTION_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glns/codegen.hpp"
#include "glns/engine.hpp"
#include "glns/operators.hpp"
#include "glns/problem.hpp"
#include "glns/rng.hpp"
#include "glns/sandbox.hpp"

namespace glns {

enum class Strategy { Mutation, Homogeneous, Synergistic };

struct Population {
    std::vector<OperatorRecord> records;
    std::vector<std::uint64_t> inserted;  // insertion counter per record; larger is younger
    int capacity = 5;

    std::size_t size() const { return records.size(); }
    bool full() const { return static_cast<int>(records.size()) >= capacity; }
    int vacancies() const { return std::max(0, capacity - static_cast<int>(records.size())); }
    bool has_id(const std::string& id) const;
};

struct EvolutionConfig {
    int max_generations = 200;
    int capacity = 5;
    int prune_count = 2;
    int period = 10;
    int episodes_per_instance = 10;  // K
    std::array<double, 3> strategy_weights{1.0, 1.0, 1.0};  // mutation, homogeneous, synergistic
    bool synergy_roulette = false;  // roulette over S instead of argmax when picking the c2 pair
    int filter_instance_size = 20;
    int filter_instances = 3;
    double filter_budget_ms = 250.0;  // per operator call
    int attempts_per_vacancy = 10;
    double clone_jitter = 0.2;  // fraction of a parameter's range used when cloning an elite
    EpisodeConfig episode;
    int jobs = 1;

    void validate() const;
};

/// Mutation action for the record ranked `rank` (0 = best) in a pool of `pool_size`.
Action choose_mutation_action(std::size_t rank, std::size_t pool_size, Rng& rng);

/// Two distinct indices drawn proportionally to fitness plus a small floor.
std::pair<std::size_t, std::size_t> select_homogeneous_parents(std::span<const double> fitness, Rng& rng);

/// argmax of the synergy matrix (lowest (i, j) on ties), or of F^d[i] + F^r[j] when S has no positive entry.
std::pair<std::size_t, std::size_t> select_synergy_pair(const PortfolioState& state, Rng& rng, bool roulette = false);

/// Indices of the `m` lowest-fitness records, ties going to the younger record. Sorted ascending.
std::vector<std::size_t> prune_indices(std::span<const double> fitness, std::span<const std::uint64_t> inserted, int m);

/// Drops the given destroy/repair indices from the state, keeping the surviving entries.
PortfolioState remove_from_state(const PortfolioState& state, const std::vector<std::size_t>& destroy_idx,
                                 const std::vector<std::size_t>& repair_idx);

struct FilterReport {
    bool passed = false;
    std::string category;  // error, coverage, feasibility, timeout, infrastructure
    std::string violation;
    double max_call_ms = 0.0;
};

/**
 * Maps records to executable operators. Records with a known template run
 * in-process; anything else is loaded into the sandbox session, which must
 * be configured.
 */
class OperatorResolver {
public:
    OperatorResolver(ProblemKind problem, std::shared_ptr<SandboxSession> sandbox, int sandbox_timeout_ms = 0);

    std::shared_ptr<const DestroyOperator> destroy(const OperatorRecord& record);
    std::shared_ptr<const RepairOperator> repair(const OperatorRecord& record);
    Portfolio portfolio(const Population& pop_d, const Population& pop_r);
    ProblemKind problem() const { return problem_; }

private:
    void ensure_loaded(const OperatorRecord& record);

    ProblemKind problem_;
    std::shared_ptr<SandboxSession> sandbox_;
    int sandbox_timeout_ms_;
};

/// Runs the candidate on small seeded instances, paired with greedy_insertion or random_removal.
FilterReport pre_evaluation_filter(const OperatorRecord& record, OperatorResolver& resolver, const EvolutionConfig& config,
                                   std::uint64_t seed);

struct EvolutionState {
    Population pop_d;
    Population pop_r;
    PortfolioState portfolio;
    int generation = 0;
    std::uint64_t seed = 0;
    std::uint64_t next_insert = 0;
    std::uint64_t next_id = 0;
    std::vector<double> best_costs;  // per instance
    std::vector<Solution> best_solutions;
    std::pair<std::string, std::string> best_pair;
};

struct GenerationLog {
    int g = 0;
    std::vector<std::string> action_log;
    std::vector<double> fitness_d;
    std::vector<double> fitness_r;
    std::vector<std::vector<double>> synergy;
    double best_cost = 0.0;

    nlohmann::json to_json() const;
};

struct EvolutionHooks {
    std::function<void(const GenerationLog&)> on_generation;
    std::function<void(const EvolutionState&)> after_management;
};

class Evolution {
public:
    Evolution(ProblemKind problem, std::vector<Instance> batch, Backend& backend, EvolutionConfig config,
              std::shared_ptr<SandboxSession> sandbox = nullptr);

    /// Seeds both pools: expert built-ins first, the rest via i1/i2.
    void seed(std::uint64_t seed);
    /// Restores a snapshot written by snapshot().
    void restore(const nlohmann::json& snapshot);
    /// Runs generations until max_generations.
    void run(const EvolutionHooks& hooks = {});

    /// One management phase: prune, replenish from the surviving metrics, reset.
    std::vector<std::string> manage(Rng& rng);

    nlohmann::json snapshot() const;
    const EvolutionState& state() const { return state_; }
    EvolutionState& mutable_state() { return state_; }
    const EvolutionConfig& config() const { return config_; }
    OperatorResolver& resolver() { return resolver_; }

    /// Mean over instances of the best cost seen so far.
    double best_score() const;

private:
    OperatorRecord make_record(const Artifact& artifact, const std::string& description);
    FilterReport admit(Population& pop, OperatorRecord record, std::uint64_t filter_seed);
    /// One backend round trip for a single-kind action; true when a record was admitted.
    bool generate_into(Population& pop, OperatorKind kind, Action action, const std::vector<OperatorRecord>& parents,
                       Rng& rng, std::vector<std::string>& log);
    bool joint_crossover(std::size_t d, std::size_t r, Rng& rng, std::vector<std::string>& log);
    void clone_elite(Population& pop, std::size_t survivors, const std::vector<double>& fitness, Rng& rng,
                     std::vector<std::string>& log);
    void replenish(Rng& rng, std::vector<std::string>& log);

    ProblemKind problem_;
    std::vector<Instance> batch_;
    Backend& backend_;
    EvolutionConfig config_;
    OperatorResolver resolver_;
    EvolutionState state_;
};

}  // namespace glns

#endif
