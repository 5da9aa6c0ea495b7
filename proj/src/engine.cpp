#include "glns/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

namespace glns {

// ---- portfolio state ------------------------------------------------------------

PortfolioState PortfolioState::zeros(std::size_t nd, std::size_t nr) {
    PortfolioState s;
    s.weights_d.assign(nd, 1.0);
    s.weights_r.assign(nr, 1.0);
    s.fitness_d.assign(nd, 0.0);
    s.fitness_r.assign(nr, 0.0);
    s.synergy.assign(nd, std::vector<double>(nr, 0.0));
    return s;
}

void PortfolioState::reset_weights() {
    std::fill(weights_d.begin(), weights_d.end(), 1.0);
    std::fill(weights_r.begin(), weights_r.end(), 1.0);
}

void PortfolioState::reset_metrics() {
    std::fill(fitness_d.begin(), fitness_d.end(), 0.0);
    std::fill(fitness_r.begin(), fitness_r.end(), 0.0);
    for (auto& row : synergy) std::fill(row.begin(), row.end(), 0.0);
}

void PortfolioState::accumulate(const PortfolioState& other) {
    if (other.destroy_size() != destroy_size() || other.repair_size() != repair_size())
        throw StateError("cannot merge portfolio states of different dimensions");
    for (std::size_t i = 0; i < fitness_d.size(); ++i) fitness_d[i] += other.fitness_d[i];
    for (std::size_t j = 0; j < fitness_r.size(); ++j) fitness_r[j] += other.fitness_r[j];
    for (std::size_t i = 0; i < synergy.size(); ++i)
        for (std::size_t j = 0; j < synergy[i].size(); ++j) synergy[i][j] += other.synergy[i][j];
}

double PortfolioState::marginal_error() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < destroy_size(); ++i) {
        double row = 0.0;
        for (double v : synergy[i]) row += v;
        worst = std::max(worst, std::abs(row - fitness_d[i]));
    }
    for (std::size_t j = 0; j < repair_size(); ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < destroy_size(); ++i) col += synergy[i][j];
        worst = std::max(worst, std::abs(col - fitness_r[j]));
    }
    return worst;
}

void EpisodeConfig::validate() const {
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (!(initial_temperature > 0.0)) throw ConfigError("initial temperature must be > 0");
    if (!(cooling_rate > 0.0 && cooling_rate < 1.0)) throw ConfigError("cooling rate must lie in (0, 1)");
    if (!(smoothing > 0.0 && smoothing < 1.0)) throw ConfigError("smoothing must lie in (0, 1)");
    if (!(destruction_ratio > 0.0 && destruction_ratio < 1.0)) throw ConfigError("destruction ratio must lie in (0, 1)");
    if (!(sigma[0] >= sigma[1] && sigma[1] >= sigma[2] && sigma[2] >= sigma[3] && sigma[3] > 0.0))
        throw ConfigError("rewards must satisfy sigma1 >= sigma2 >= sigma3 >= sigma4 > 0");
    if (call_time_cap_ms < 0.0) throw ConfigError("call time cap must be >= 0");
}

// ---- selection, acceptance, reward -----------------------------------------------------

std::size_t roulette_select(std::span<const double> weights, Rng& rng) {
    if (weights.empty()) throw SelectionError("roulette over an empty pool");
    for (double w : weights)
        if (!(w > 0.0) || !std::isfinite(w)) throw SelectionError("roulette weights must be positive and finite");
    return rng.weighted_index(weights);
}

Acceptance classify_and_accept(double cost_new, double cost_curr, double cost_best, double temperature, Rng& rng) {
    if (!(temperature > 0.0)) throw DomainError("temperature must be > 0");
    if (cost_new < cost_best) return {1, true};
    if (cost_new < cost_curr) return {2, true};
    const double u = rng.uniform();
    if (std::exp(-(cost_new - cost_curr) / temperature) > u) return {3, true};
    return {4, false};
}

void apply_reward(PortfolioState& state, std::size_t i, std::size_t j, double sigma, double lambda) {
    if (i >= state.destroy_size() || j >= state.repair_size())
        throw StateError("reward index (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
    state.weights_d[i] = lambda * state.weights_d[i] + (1.0 - lambda) * sigma;
    state.weights_r[j] = lambda * state.weights_r[j] + (1.0 - lambda) * sigma;
    state.fitness_d[i] += sigma;
    state.fitness_r[j] += sigma;
    state.synergy[i][j] += sigma;
}

// ---- portfolios ------------------------------------------------------------------------------

void Portfolio::add_destroy(std::string id, std::shared_ptr<const DestroyOperator> op) {
    destroy_ids.push_back(std::move(id));
    destroy.push_back(std::move(op));
}

void Portfolio::add_repair(std::string id, std::shared_ptr<const RepairOperator> op) {
    repair_ids.push_back(std::move(id));
    repair.push_back(std::move(op));
}

Portfolio builtin_portfolio(const std::vector<std::string>& destroy_specs, const std::vector<std::string>& repair_specs) {
    Portfolio p;
    for (const auto& spec : destroy_specs) {
        auto [name, params] = parse_operator_spec(spec);
        p.add_destroy(spec, make_destroy(name, params));
    }
    for (const auto& spec : repair_specs) {
        auto [name, params] = parse_operator_spec(spec);
        p.add_repair(spec, make_repair(name, params));
    }
    return p;
}

// ---- episodes ----------------------------------------------------------------------------------

Solution random_initial_solution(const Instance& instance, Rng& rng) {
    std::vector<int> nodes = instance.elements();
    rng.shuffle(std::span<int>(nodes));
    if (instance.kind() == ProblemKind::TSP) return TourSolution{nodes};
    RouteSolution out;
    int load = 0;
    for (int v : nodes) {
        const int d = instance.demand(v);
        if (out.routes.empty() || load + d > instance.capacity()) {
            out.routes.push_back({});
            load = 0;
        }
        out.routes.back().push_back(v);
        load += d;
    }
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

EpisodeResult run_episode(const Instance& instance, const Portfolio& portfolio, PortfolioState& state,
                          const EpisodeConfig& config, Rng& rng, const Solution* initial) {
    config.validate();
    const std::size_t nd = portfolio.destroy.size();
    const std::size_t nr = portfolio.repair.size();
    if (nd == 0 || nr == 0) throw ConfigError("episode needs nonempty destroy and repair pools");
    if (state.destroy_size() != nd || state.repair_size() != nr || state.weights_d.size() != nd ||
        state.weights_r.size() != nr || state.synergy.size() != nd)
        throw StateError("portfolio state dimensions do not match the pools");

    state.reset_weights();
    Solution current = initial ? *initial : random_initial_solution(instance, rng);
    double current_cost = cost(instance, current);

    EpisodeResult result;
    result.best_solution = current;
    result.best_cost = current_cost;
    result.failures_d.assign(nd, 0);
    result.failures_r.assign(nr, 0);
    result.trace.reserve(static_cast<std::size_t>(config.iterations) + 1);
    result.trace.push_back({0, current_cost, current_cost, "", "", 0, config.initial_temperature});

    const int count = destroy_count(static_cast<int>(element_count(current)), config.destruction_ratio);
    double temperature = config.initial_temperature;

    for (int t = 1; t <= config.iterations; ++t) {
        const std::size_t i = roulette_select(state.weights_d, rng);
        const std::size_t j = roulette_select(state.weights_r, rng);

        std::optional<Solution> candidate;
        bool in_repair = false;
        auto fail = [&](bool repair_side, const std::string& what) {
            if (repair_side) ++result.failures_r[j];
            else ++result.failures_d[i];
            const std::string& id = repair_side ? portfolio.repair_ids[j] : portfolio.destroy_ids[i];
            result.errors.push_back("iter " + std::to_string(t) + " " + id + ": " + what);
        };
        try {
            auto start = Clock::now();
            DestroyOutcome outcome = portfolio.destroy[i]->apply(current, count, instance, rng);
            const double destroy_ms = elapsed_ms(start);
            if (config.call_time_cap_ms > 0.0 && destroy_ms > config.call_time_cap_ms) {
                fail(false, "exceeded the call time cap");
            } else if (auto broken = check_conservation(current, outcome); !broken.empty()) {
                fail(false, broken);
            } else {
                in_repair = true;
                start = Clock::now();
                Solution repaired = portfolio.repair[j]->apply(outcome.partial, outcome.removed, instance, rng);
                const double repair_ms = elapsed_ms(start);
                if (config.call_time_cap_ms > 0.0 && repair_ms > config.call_time_cap_ms) {
                    fail(true, "exceeded the call time cap");
                } else if (auto report = check_feasible(instance, repaired); !report.ok()) {
                    fail(true, report.summary());
                } else {
                    candidate = std::move(repaired);
                }
            }
        } catch (const std::exception& e) {
            fail(in_repair, e.what());
        }

        int tier = 4;
        if (candidate) {
            const double candidate_cost = unchecked_cost(instance, *candidate);
            const Acceptance acc = classify_and_accept(candidate_cost, current_cost, result.best_cost, temperature, rng);
            tier = acc.tier;
            if (acc.accepted) {
                current = std::move(*candidate);
                current_cost = candidate_cost;
            }
            if (tier == 1) {
                result.best_solution = current;
                result.best_cost = current_cost;
            }
        }
        apply_reward(state, i, j, config.sigma[static_cast<std::size_t>(tier - 1)], config.smoothing);
        result.trace.push_back({t, current_cost, result.best_cost, portfolio.destroy_ids[i], portfolio.repair_ids[j], tier,
                                temperature});
        temperature *= config.cooling_rate;
    }
    result.final_temperature = temperature;
    return result;
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

EvaluationResult run_evaluation_phase(std::span<const Instance> batch, const Portfolio& portfolio,
                                      const PortfolioState& start, const EpisodeConfig& config, int episodes_per_instance,
                                      std::uint64_t seed, int jobs) {
    if (batch.empty()) throw ConfigError("evaluation needs at least one instance");
    if (episodes_per_instance < 1) throw ConfigError("episodes per instance must be >= 1");
    const std::size_t k = static_cast<std::size_t>(episodes_per_instance);
    const std::size_t total = batch.size() * k;

    std::vector<EpisodeResult> episodes(total);
    std::vector<PortfolioState> locals(total, PortfolioState::zeros(start.destroy_size(), start.repair_size()));
    parallel_for(total, jobs, [&](std::size_t e) {
        const std::size_t b = e / k;
        Rng rng(derive_seed(seed, b, e % k));
        episodes[e] = run_episode(batch[b], portfolio, locals[e], config, rng);
    });

    EvaluationResult out;
    out.state = start;
    out.failures_d.assign(start.destroy_size(), 0);
    out.failures_r.assign(start.repair_size(), 0);
    out.mean_best_cost.assign(batch.size(), 0.0);
    for (std::size_t e = 0; e < total; ++e) {
        out.state.accumulate(locals[e]);
        out.mean_best_cost[e / k] += episodes[e].best_cost / static_cast<double>(k);
        for (std::size_t i = 0; i < out.failures_d.size(); ++i) out.failures_d[i] += episodes[e].failures_d[i];
        for (std::size_t j = 0; j < out.failures_r.size(); ++j) out.failures_r[j] += episodes[e].failures_r[j];
    }
    // weights as left by the last episode
    out.state.weights_d = locals.back().weights_d;
    out.state.weights_r = locals.back().weights_r;
    out.episodes = std::move(episodes);
    return out;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
    out << "iter,current_cost,best_cost,destroy_id,repair_id,tier,temperature\n";
    const auto old_precision = out.precision(17);
    for (const auto& row : trace) {
        out << row.iter << ',' << row.current_cost << ',' << row.best_cost << ',' << row.destroy_id << ','
            << row.repair_id << ',' << row.tier << ',' << row.temperature << '\n';
    }
    out.precision(old_precision);
}

double calibrate_call_cap_ms(const Instance& instance, std::uint64_t seed) {
    const std::vector<std::string> destroys{"random_removal", "worst_removal", "related_removal"};
    const std::vector<std::string> repairs{"greedy_insertion", "regret_insertion"};
    Rng rng(seed);
    const Solution base = random_initial_solution(instance, rng);
    const int n = static_cast<int>(element_count(base));
    if (n < 2) return 100.0;
    const int count = destroy_count(n, 0.2);
    std::vector<double> times;
    for (const auto& d : destroys) {
        for (const auto& r : repairs) {
            auto start = Clock::now();
            auto outcome = make_destroy(d)->apply(base, count, instance, rng);
            make_repair(r)->apply(outcome.partial, outcome.removed, instance, rng);
            times.push_back(elapsed_ms(start));
        }
    }
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
    return std::max(100.0, 50.0 * times[times.size() / 2]);
}

}  // namespace glns
