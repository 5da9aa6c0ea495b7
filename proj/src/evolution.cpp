#include "glns/evolution.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "glns/instance_io.hpp"

namespace glns {

bool Population::has_id(const std::string& id) const {
    return std::any_of(records.begin(), records.end(), [&](const OperatorRecord& r) { return r.id == id; });
}

void EvolutionConfig::validate() const {
    if (max_generations < 0) throw ConfigError("max_generations must be >= 0");
    if (capacity < 1) throw ConfigError("population capacity must be >= 1");
    if (prune_count < 0 || prune_count >= capacity) throw ConfigError("prune count must satisfy 0 <= M < N");
    if (period < 1) throw ConfigError("management period must be >= 1");
    if (episodes_per_instance < 1) throw ConfigError("episodes per instance must be >= 1");
    double total = 0.0;
    for (double w : strategy_weights) {
        if (w < 0.0) throw ConfigError("strategy weights must be >= 0");
        total += w;
    }
    if (!(total > 0.0)) throw ConfigError("strategy weights must not all be zero");
    if (filter_instance_size < 3) throw ConfigError("filter instance size must be >= 3");
    if (filter_instances < 1) throw ConfigError("filter needs at least one instance");
    if (!(filter_budget_ms > 0.0)) throw ConfigError("filter budget must be > 0");
    if (attempts_per_vacancy < 1) throw ConfigError("attempts per vacancy must be >= 1");
    if (clone_jitter < 0.0) throw ConfigError("clone jitter must be >= 0");
    episode.validate();
}

// ---- selection helpers ------------------------------------------------------------------------

Action choose_mutation_action(std::size_t rank, std::size_t pool_size, Rng& rng) {
    if (pool_size == 0 || rank >= pool_size) throw SelectionError("rank out of range");
    const double third = static_cast<double>(pool_size) / 3.0;
    const double r = static_cast<double>(rank);
    if (r < third) return Action::M2;
    if (r >= 2.0 * third) return Action::M1;
    return rng.bernoulli(0.5) ? Action::M1 : Action::M2;
}

std::pair<std::size_t, std::size_t> select_homogeneous_parents(std::span<const double> fitness, Rng& rng) {
    if (fitness.size() < 2) throw SelectionError("homogeneous crossover needs at least two records");
    double mean = 0.0;
    for (double f : fitness) {
        if (f < 0.0) throw SelectionError("fitness must be >= 0");
        mean += f;
    }
    mean /= static_cast<double>(fitness.size());
    const double floor = 0.01 * mean + 1e-9;
    std::vector<double> weights;
    weights.reserve(fitness.size());
    for (double f : fitness) weights.push_back(f + floor);
    const std::size_t a = rng.weighted_index(weights);
    weights[a] = 0.0;
    const std::size_t b = rng.weighted_index(weights);
    return {a, b};
}

std::pair<std::size_t, std::size_t> select_synergy_pair(const PortfolioState& state, Rng& rng, bool roulette) {
    const std::size_t nd = state.destroy_size();
    const std::size_t nr = state.repair_size();
    if (nd == 0 || nr == 0) throw SelectionError("synergy pair needs nonempty pools");
    bool any_positive = false;
    for (const auto& row : state.synergy)
        for (double v : row) any_positive = any_positive || v > 0.0;

    if (any_positive && roulette) {
        std::vector<double> flat;
        flat.reserve(nd * nr);
        for (const auto& row : state.synergy)
            for (double v : row) flat.push_back(std::max(0.0, v));
        const std::size_t k = rng.weighted_index(flat);
        return {k / nr, k % nr};
    }
    std::pair<std::size_t, std::size_t> best{0, 0};
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nd; ++i) {
        for (std::size_t j = 0; j < nr; ++j) {
            const double v = any_positive ? state.synergy[i][j] : state.fitness_d[i] + state.fitness_r[j];
            if (v > best_value) {
                best_value = v;
                best = {i, j};
            }
        }
    }
    return best;
}

std::vector<std::size_t> prune_indices(std::span<const double> fitness, std::span<const std::uint64_t> inserted, int m) {
    if (fitness.size() != inserted.size()) throw StateError("fitness and insertion counters differ in length");
    if (m < 0 || static_cast<std::size_t>(m) >= fitness.size() + (m == 0 ? 1 : 0))
        throw ConfigError("prune count must be smaller than the population");
    std::vector<std::size_t> order(fitness.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (fitness[a] != fitness[b]) return fitness[a] < fitness[b];
        return inserted[a] > inserted[b];
    });
    order.resize(static_cast<std::size_t>(m));
    std::sort(order.begin(), order.end());
    return order;
}

PortfolioState remove_from_state(const PortfolioState& state, const std::vector<std::size_t>& destroy_idx,
                                 const std::vector<std::size_t>& repair_idx) {
    auto keep = [](std::size_t n, const std::vector<std::size_t>& drop) {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < n; ++i)
            if (std::find(drop.begin(), drop.end(), i) == drop.end()) out.push_back(i);
        return out;
    };
    const auto kd = keep(state.destroy_size(), destroy_idx);
    const auto kr = keep(state.repair_size(), repair_idx);
    PortfolioState out = PortfolioState::zeros(kd.size(), kr.size());
    for (std::size_t a = 0; a < kd.size(); ++a) {
        out.weights_d[a] = state.weights_d[kd[a]];
        out.fitness_d[a] = state.fitness_d[kd[a]];
        for (std::size_t b = 0; b < kr.size(); ++b) out.synergy[a][b] = state.synergy[kd[a]][kr[b]];
    }
    for (std::size_t b = 0; b < kr.size(); ++b) {
        out.weights_r[b] = state.weights_r[kr[b]];
        out.fitness_r[b] = state.fitness_r[kr[b]];
    }
    return out;
}

// ---- resolver and filter ----------------------------------------------------------------------

OperatorResolver::OperatorResolver(ProblemKind problem, std::shared_ptr<SandboxSession> sandbox, int sandbox_timeout_ms)
    : problem_(problem), sandbox_(std::move(sandbox)), sandbox_timeout_ms_(sandbox_timeout_ms) {}

void OperatorResolver::ensure_loaded(const OperatorRecord& record) {
    if (!sandbox_) throw SandboxError("record '" + record.id + "' needs the sandbox, but none is configured");
    SandboxReply reply = sandbox_->load(record.id, record.source, record.kind);
    if (!reply.ok()) throw OperatorError("sandbox " + reply.category + " error on load: " + reply.message);
}

std::shared_ptr<const DestroyOperator> OperatorResolver::destroy(const OperatorRecord& record) {
    if (record.kind != OperatorKind::Destroy) throw OperatorError("'" + record.id + "' is not a destroy operator");
    if (record.native()) {
        if (!find_template(record.template_name).supports(problem_))
            throw OperatorError("template '" + record.template_name + "' does not support " +
                                std::string(to_string(problem_)));
        return make_destroy(record.template_name, record.params);
    }
    ensure_loaded(record);
    return sandbox_destroy(sandbox_, record.id, sandbox_timeout_ms_);
}

std::shared_ptr<const RepairOperator> OperatorResolver::repair(const OperatorRecord& record) {
    if (record.kind != OperatorKind::Repair) throw OperatorError("'" + record.id + "' is not a repair operator");
    if (record.native()) {
        if (!find_template(record.template_name).supports(problem_))
            throw OperatorError("template '" + record.template_name + "' does not support " +
                                std::string(to_string(problem_)));
        return make_repair(record.template_name, record.params);
    }
    ensure_loaded(record);
    return sandbox_repair(sandbox_, record.id, sandbox_timeout_ms_);
}

Portfolio OperatorResolver::portfolio(const Population& pop_d, const Population& pop_r) {
    Portfolio p;
    for (const auto& r : pop_d.records) p.add_destroy(r.id, destroy(r));
    for (const auto& r : pop_r.records) p.add_repair(r.id, repair(r));
    return p;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); }

std::string violation_category(const FeasibilityReport& report) {
    for (const auto& v : report.violations)
        if (v.type == Violation::Type::Coverage) return "coverage";
    return "feasibility";
}

}  // namespace

FilterReport pre_evaluation_filter(const OperatorRecord& record, OperatorResolver& resolver, const EvolutionConfig& config,
                                   std::uint64_t seed) {
    FilterReport report;
    auto fail = [&](std::string category, std::string what) {
        report.passed = false;
        report.category = std::move(category);
        report.violation = std::move(what);
        return report;
    };

    std::shared_ptr<const DestroyOperator> destroy;
    std::shared_ptr<const RepairOperator> repair;
    try {
        if (record.kind == OperatorKind::Destroy) {
            destroy = resolver.destroy(record);
            repair = make_repair("greedy_insertion");
        } else {
            destroy = make_destroy("random_removal");
            repair = resolver.repair(record);
        }
    } catch (const SandboxError&) {
        throw;
    } catch (const std::exception& e) {
        return fail("error", e.what());
    }
    const bool candidate_is_destroy = record.kind == OperatorKind::Destroy;
    std::ostringstream budget_text;
    budget_text << config.filter_budget_ms;
    const std::string budget = budget_text.str();

    for (int k = 0; k < config.filter_instances; ++k) {
        GeneratorConfig gen;
        gen.kind = resolver.problem();
        gen.n = config.filter_instance_size;
        gen.seed = derive_seed(seed, static_cast<std::uint64_t>(k));
        const Instance instance = generate(gen);
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k), 1));
        const Solution start = random_initial_solution(instance, rng);
        const int count = destroy_count(static_cast<int>(element_count(start)), config.episode.destruction_ratio);

        DestroyOutcome outcome;
        auto t0 = Clock::now();
        try {
            outcome = destroy->apply(start, count, instance, rng);
        } catch (const SandboxError&) {
            throw;
        } catch (const std::exception& e) {
            if (candidate_is_destroy) {
                const std::string what = e.what();
                return fail(what.find("timeout") != std::string::npos ? "timeout" : "error", what);
            }
            return fail("error", std::string("partner destroy failed: ") + e.what());
        }
        const double destroy_ms = ms_since(t0);
        if (candidate_is_destroy) {
            report.max_call_ms = std::max(report.max_call_ms, destroy_ms);
            if (destroy_ms > config.filter_budget_ms)
                return fail("timeout", "destroy exceeded the " + budget + " ms budget");
            if (auto broken = check_conservation(start, outcome); !broken.empty()) return fail("coverage", broken);
        }

        Solution repaired;
        t0 = Clock::now();
        try {
            repaired = repair->apply(outcome.partial, outcome.removed, instance, rng);
        } catch (const SandboxError&) {
            throw;
        } catch (const std::exception& e) {
            const std::string what = e.what();
            if (!candidate_is_destroy)
                return fail(what.find("timeout") != std::string::npos ? "timeout" : "error", what);
            return fail("error", "partner repair failed: " + what);
        }
        const double repair_ms = ms_since(t0);
        if (!candidate_is_destroy) {
            report.max_call_ms = std::max(report.max_call_ms, repair_ms);
            if (repair_ms > config.filter_budget_ms)
                return fail("timeout", "repair exceeded the " + budget + " ms budget");
        }
        if (auto feas = check_feasible(instance, repaired); !feas.ok()) return fail(violation_category(feas), feas.summary());
    }
    report.passed = true;
    return report;
}

// ---- logs ---------------------------------------------------------------------------------------

nlohmann::json GenerationLog::to_json() const {
    nlohmann::ordered_json doc;
    doc["g"] = g;
    doc["action_log"] = action_log;
    doc["fitness_d"] = fitness_d;
    doc["fitness_r"] = fitness_r;
    doc["synergy"] = synergy;
    doc["best_cost"] = best_cost;
    return nlohmann::json::parse(doc.dump());
}

// ---- evolution ------------------------------------------------------------------------------------

Evolution::Evolution(ProblemKind problem, std::vector<Instance> batch, Backend& backend, EvolutionConfig config,
                     std::shared_ptr<SandboxSession> sandbox)
    : problem_(problem),
      batch_(std::move(batch)),
      backend_(backend),
      config_(std::move(config)),
      resolver_(problem, sandbox, static_cast<int>(std::lround(config_.filter_budget_ms))) {
    config_.validate();
    if (batch_.empty()) throw ConfigError("evolution needs a nonempty instance batch");
    for (const auto& inst : batch_)
        if (inst.kind() != problem_) throw ConfigError("instance '" + inst.name() + "' is not a " + std::string(to_string(problem_)) + " instance");
}

double Evolution::best_score() const {
    if (state_.best_costs.empty()) return std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (double c : state_.best_costs) total += c;
    return total / static_cast<double>(state_.best_costs.size());
}

OperatorRecord Evolution::make_record(const Artifact& artifact, const std::string& description) {
    OperatorRecord r;
    r.id = std::string(artifact.kind == OperatorKind::Destroy ? "d" : "r") + std::to_string(++state_.next_id);
    r.kind = artifact.kind;
    r.provenance = Provenance::Generated;
    r.description = description;
    r.source = artifact.source;
    if (auto directive = parse_template_directive(artifact.source)) {
        const auto& t = find_template(directive->name);
        if (t.kind == artifact.kind && t.supports(problem_)) {
            r.template_name = directive->name;
            r.params = directive->params;
        }
    }
    return r;
}

FilterReport Evolution::admit(Population& pop, OperatorRecord record, std::uint64_t filter_seed) {
    FilterReport report = pre_evaluation_filter(record, resolver_, config_, filter_seed);
    if (report.passed) {
        pop.records.push_back(std::move(record));
        pop.inserted.push_back(state_.next_insert++);
    }
    return report;
}

namespace {

std::string parents_note(const std::vector<OperatorRecord>& parents) {
    if (parents.empty()) return {};
    std::string out = " <-";
    for (const auto& p : parents) out += " " + p.id;
    return out;
}

}  // namespace

bool Evolution::generate_into(Population& pop, OperatorKind kind, Action action,
                              const std::vector<OperatorRecord>& parents, Rng& rng, std::vector<std::string>& log) {
    GenerationRequest request;
    request.action = action;
    request.problem = problem_;
    request.parents = parents;
    if (action == Action::I1 || action == Action::I2) request.references = pop.records;
    const std::string prompt = render_prompt(request);
    const std::uint64_t nonce = rng.next_u64();
    const std::uint64_t filter_seed = rng.next_u64();
    const std::string head = std::string(to_string(action)) + parents_note(parents);

    GenerationResponse response;
    try {
        response = parse_response(backend_.generate(prompt, {action, nonce}), action);
    } catch (const BackendError& e) {
        log.push_back(head + " backend error: " + e.what());
        return false;
    } catch (const ResponseParseError& e) {
        log.push_back(head + " rejected (parse): " + e.what());
        return false;
    }
    if (response.artifacts.front().kind != kind) {
        log.push_back(head + " rejected (contract): produced a " + std::string(to_string(response.artifacts.front().kind)) +
                      " operator");
        return false;
    }
    OperatorRecord record = make_record(response.artifacts.front(), response.description);
    const std::string id = record.id;
    const FilterReport report = admit(pop, std::move(record), filter_seed);
    if (!report.passed) {
        log.push_back(head + " " + id + " rejected (" + report.category + "): " + report.violation);
        return false;
    }
    log.push_back(head + " " + id + " admitted");
    return true;
}

bool Evolution::joint_crossover(std::size_t d, std::size_t r, Rng& rng, std::vector<std::string>& log) {
    GenerationRequest request;
    request.action = Action::C2;
    request.problem = problem_;
    request.parents = {state_.pop_d.records[d], state_.pop_r.records[r]};
    const std::string prompt = render_prompt(request);
    const std::uint64_t nonce = rng.next_u64();
    const std::uint64_t filter_seed = rng.next_u64();
    const std::string head = "c2" + parents_note(request.parents);

    GenerationResponse response;
    try {
        response = parse_response(backend_.generate(prompt, {Action::C2, nonce}), Action::C2);
    } catch (const BackendError& e) {
        log.push_back(head + " backend error: " + e.what());
        return false;
    } catch (const ResponseParseError& e) {
        log.push_back(head + " rejected (parse): " + e.what());
        return false;
    }
    OperatorRecord dr = make_record(response.artifacts[0], response.description);
    OperatorRecord rr = make_record(response.artifacts[1], response.description);
    const FilterReport fd = pre_evaluation_filter(dr, resolver_, config_, filter_seed);
    const FilterReport fr = fd.passed ? pre_evaluation_filter(rr, resolver_, config_, derive_seed(filter_seed, 1))
                                      : FilterReport{};
    if (!fd.passed || !fr.passed) {
        const FilterReport& bad = fd.passed ? fr : fd;
        const std::string& bad_id = fd.passed ? rr.id : dr.id;
        log.push_back(head + " " + dr.id + "+" + rr.id + " rejected (" + bad_id + " " + bad.category + "): " +
                      bad.violation);
        return false;
    }
    const std::string ids = dr.id + "+" + rr.id;
    state_.pop_d.records.push_back(std::move(dr));
    state_.pop_d.inserted.push_back(state_.next_insert++);
    state_.pop_r.records.push_back(std::move(rr));
    state_.pop_r.inserted.push_back(state_.next_insert++);
    log.push_back(head + " " + ids + " admitted");
    return true;
}

void Evolution::seed(std::uint64_t seed) {
    state_ = EvolutionState{};
    state_.seed = seed;
    state_.pop_d.capacity = config_.capacity;
    state_.pop_r.capacity = config_.capacity;

    auto add_builtin = [&](Population& pop, const std::string& name) {
        if (pop.full()) return;
        OperatorRecord r = builtin_record(name, name);
        r.source = template_source(name, r.params, problem_);
        pop.records.push_back(std::move(r));
        pop.inserted.push_back(state_.next_insert++);
    };
    add_builtin(state_.pop_d, "random_removal");
    add_builtin(state_.pop_d, "worst_removal");
    add_builtin(state_.pop_r, "greedy_insertion");

    Rng rng(derive_seed(seed, 0x5EED));
    std::vector<std::string> log;
    auto fill = [&](Population& pop, OperatorKind kind, Action action) {
        const int limit = config_.attempts_per_vacancy * pop.vacancies();
        for (int attempt = 0; attempt < limit && !pop.full(); ++attempt) generate_into(pop, kind, action, {}, rng, log);
        return pop.vacancies();
    };
    const int missing_d = fill(state_.pop_d, OperatorKind::Destroy, Action::I1);
    const int missing_r = fill(state_.pop_r, OperatorKind::Repair, Action::I2);
    if (missing_d > 0 || missing_r > 0) {
        std::string what = "seeding left " + std::to_string(missing_d) + " destroy and " + std::to_string(missing_r) +
                           " repair slot(s) unfilled";
        if (!log.empty()) what += "; last: " + log.back();
        throw SeedingError(what);
    }
    state_.portfolio = PortfolioState::zeros(state_.pop_d.size(), state_.pop_r.size());
    state_.best_costs.assign(batch_.size(), std::numeric_limits<double>::infinity());
    state_.best_solutions.assign(batch_.size(), Solution{});
}

void Evolution::clone_elite(Population& pop, std::size_t survivors, const std::vector<double>& fitness, Rng& rng,
                            std::vector<std::string>& log) {
    std::size_t elite = 0;
    for (std::size_t i = 1; i < survivors; ++i)
        if (fitness[i] > fitness[elite]) elite = i;
    const OperatorRecord& parent = pop.records[elite];
    for (int tries = 0; tries < config_.attempts_per_vacancy; ++tries) {
        OperatorRecord clone = parent;
        clone.id = std::string(parent.kind == OperatorKind::Destroy ? "d" : "r") + std::to_string(++state_.next_id);
        clone.provenance = Provenance::Generated;
        clone.description = "clone of " + parent.id + " with jittered parameters";
        if (clone.native()) {
            const auto& t = find_template(clone.template_name);
            for (const auto& p : t.params) {
                const double v = clone.params[p.name] + rng.uniform(-1.0, 1.0) * config_.clone_jitter * (p.max - p.min);
                clone.params[p.name] = v;
            }
            clone.params = t.normalise(clone.params);
            clone.source = template_source(clone.template_name, clone.params, problem_);
        }
        const std::string id = clone.id;
        const FilterReport report = admit(pop, std::move(clone), rng.next_u64());
        if (report.passed) {
            log.push_back("clone " + id + " <- " + parent.id + " admitted");
            return;
        }
        log.push_back("clone " + id + " <- " + parent.id + " rejected (" + report.category + "): " + report.violation);
    }
    throw ReplenishError("could not refill the " + std::string(to_string(parent.kind)) +
                         " pool: backend attempts and elite clones exhausted");
}

void Evolution::replenish(Rng& rng, std::vector<std::string>& log) {
    Population& pd = state_.pop_d;
    Population& pr = state_.pop_r;
    const std::size_t survivors_d = pd.size();
    const std::size_t survivors_r = pr.size();
    const PortfolioState& metrics = state_.portfolio;  // indexed by survivors
    const int limit = config_.attempts_per_vacancy * (pd.vacancies() + pr.vacancies());
    const std::vector<double> weights(config_.strategy_weights.begin(), config_.strategy_weights.end());

    auto pick_pool = [&]() -> OperatorKind {
        if (!pd.full() && !pr.full()) return rng.bernoulli(0.5) ? OperatorKind::Destroy : OperatorKind::Repair;
        return pd.full() ? OperatorKind::Repair : OperatorKind::Destroy;
    };

    for (int attempt = 0; attempt < limit && (!pd.full() || !pr.full()); ++attempt) {
        const auto strategy = static_cast<Strategy>(rng.weighted_index(weights));
        if (strategy == Strategy::Synergistic) {
            if (pd.full() || pr.full()) {
                log.push_back("c2 discarded: needs a vacancy in both pools");
                continue;
            }
            const auto [i, j] = select_synergy_pair(metrics, rng, config_.synergy_roulette);
            joint_crossover(i, j, rng, log);
            continue;
        }
        const OperatorKind kind = pick_pool();
        Population& pop = kind == OperatorKind::Destroy ? pd : pr;
        const std::size_t survivors = kind == OperatorKind::Destroy ? survivors_d : survivors_r;
        const std::vector<double>& fitness = kind == OperatorKind::Destroy ? metrics.fitness_d : metrics.fitness_r;
        if (strategy == Strategy::Mutation) {
            const std::size_t parent = rng.index(survivors);
            std::size_t rank = 0;
            for (std::size_t k = 0; k < survivors; ++k)
                if (fitness[k] > fitness[parent] || (fitness[k] == fitness[parent] && k < parent)) ++rank;
            const Action action = choose_mutation_action(rank, survivors, rng);
            generate_into(pop, kind, action, {pop.records[parent]}, rng, log);
        } else {
            if (survivors < 2) {
                log.push_back("c1 discarded: fewer than two surviving parents");
                continue;
            }
            const auto [a, b] = select_homogeneous_parents(std::span<const double>(fitness.data(), survivors), rng);
            generate_into(pop, kind, Action::C1, {pop.records[a], pop.records[b]}, rng, log);
        }
    }
    while (!pd.full()) clone_elite(pd, survivors_d, metrics.fitness_d, rng, log);
    while (!pr.full()) clone_elite(pr, survivors_r, metrics.fitness_r, rng, log);
}

std::vector<std::string> Evolution::manage(Rng& rng) {
    std::vector<std::string> log;
    const auto [bi, bj] = select_synergy_pair(state_.portfolio, rng, false);
    state_.best_pair = {state_.pop_d.records[bi].id, state_.pop_r.records[bj].id};
    log.push_back("best_pair " + state_.best_pair.first + " " + state_.best_pair.second);

    auto drop = [&](Population& pop, const std::vector<double>& fitness, const char* label) {
        const auto idx = prune_indices(fitness, pop.inserted, std::min<int>(config_.prune_count, static_cast<int>(pop.size()) - 1));
        std::string line = std::string("prune ") + label + ":";
        for (auto it = idx.rbegin(); it != idx.rend(); ++it) {
            line += " " + pop.records[*it].id;
            pop.records.erase(pop.records.begin() + static_cast<std::ptrdiff_t>(*it));
            pop.inserted.erase(pop.inserted.begin() + static_cast<std::ptrdiff_t>(*it));
        }
        log.push_back(line);
        return idx;
    };
    const auto gone_d = drop(state_.pop_d, state_.portfolio.fitness_d, "d");
    const auto gone_r = drop(state_.pop_r, state_.portfolio.fitness_r, "r");
    state_.portfolio = remove_from_state(state_.portfolio, gone_d, gone_r);

    replenish(rng, log);
    state_.portfolio = PortfolioState::zeros(state_.pop_d.size(), state_.pop_r.size());
    return log;
}

void Evolution::run(const EvolutionHooks& hooks) {
    if (state_.pop_d.records.empty() || state_.pop_r.records.empty()) throw StateError("populations are not seeded");
    Portfolio portfolio = resolver_.portfolio(state_.pop_d, state_.pop_r);
    for (int g = state_.generation + 1; g <= config_.max_generations; ++g) {
        EvaluationResult eval = run_evaluation_phase(batch_, portfolio, state_.portfolio, config_.episode,
                                                     config_.episodes_per_instance,
                                                     derive_seed(state_.seed, static_cast<std::uint64_t>(g)), config_.jobs);
        state_.portfolio = eval.state;
        for (std::size_t b = 0; b < batch_.size(); ++b) {
            for (int k = 0; k < config_.episodes_per_instance; ++k) {
                const auto& ep = eval.episodes[b * static_cast<std::size_t>(config_.episodes_per_instance) + static_cast<std::size_t>(k)];
                if (ep.best_cost < state_.best_costs[b]) {
                    state_.best_costs[b] = ep.best_cost;
                    state_.best_solutions[b] = ep.best_solution;
                }
            }
        }

        GenerationLog entry;
        entry.g = g;
        entry.fitness_d = state_.portfolio.fitness_d;
        entry.fitness_r = state_.portfolio.fitness_r;
        entry.synergy = state_.portfolio.synergy;
        for (std::size_t i = 0; i < eval.failures_d.size(); ++i)
            if (eval.failures_d[i] > 0)
                entry.action_log.push_back("failures " + state_.pop_d.records[i].id + " " + std::to_string(eval.failures_d[i]));
        for (std::size_t j = 0; j < eval.failures_r.size(); ++j)
            if (eval.failures_r[j] > 0)
                entry.action_log.push_back("failures " + state_.pop_r.records[j].id + " " + std::to_string(eval.failures_r[j]));

        const bool manage_now = g % config_.period == 0;
        if (manage_now) {
            Rng rng(derive_seed(state_.seed, 0x4D414E, static_cast<std::uint64_t>(g)));
            auto actions = manage(rng);
            entry.action_log.insert(entry.action_log.end(), actions.begin(), actions.end());
            portfolio = resolver_.portfolio(state_.pop_d, state_.pop_r);
        }
        entry.best_cost = best_score();
        state_.generation = g;
        if (hooks.on_generation) hooks.on_generation(entry);
        if (manage_now && hooks.after_management) hooks.after_management(state_);
    }
}

// ---- snapshots ---------------------------------------------------------------------------------------

namespace {

nlohmann::json population_to_json(const Population& pop) {
    nlohmann::json records = nlohmann::json::array();
    for (std::size_t i = 0; i < pop.size(); ++i) {
        nlohmann::json r = record_to_json(pop.records[i]);
        r["inserted"] = pop.inserted[i];
        records.push_back(std::move(r));
    }
    return {{"capacity", pop.capacity}, {"records", records}};
}

Population population_from_json(const nlohmann::json& doc) {
    Population pop;
    pop.capacity = doc.at("capacity").get<int>();
    for (const auto& r : doc.at("records")) {
        pop.records.push_back(record_from_json(r));
        pop.inserted.push_back(r.at("inserted").get<std::uint64_t>());
    }
    return pop;
}

}  // namespace

nlohmann::json Evolution::snapshot() const {
    nlohmann::json best_solutions = nlohmann::json::array();
    for (const auto& s : state_.best_solutions) best_solutions.push_back(solution_to_json(s));
    nlohmann::json best_costs = nlohmann::json::array();
    for (double c : state_.best_costs) {
        if (std::isfinite(c)) best_costs.push_back(c);
        else best_costs.push_back(nullptr);
    }
    return {{"format", "glns-population"},
            {"version", 1},
            {"problem", std::string(to_string(problem_))},
            {"generation", state_.generation},
            {"seed", state_.seed},
            {"next_insert", state_.next_insert},
            {"next_id", state_.next_id},
            {"pop_d", population_to_json(state_.pop_d)},
            {"pop_r", population_to_json(state_.pop_r)},
            {"portfolio",
             {{"weights_d", state_.portfolio.weights_d},
              {"weights_r", state_.portfolio.weights_r},
              {"fitness_d", state_.portfolio.fitness_d},
              {"fitness_r", state_.portfolio.fitness_r},
              {"synergy", state_.portfolio.synergy}}},
            {"best_costs", best_costs},
            {"best_solutions", best_solutions},
            {"best_pair", {state_.best_pair.first, state_.best_pair.second}}};
}

void Evolution::restore(const nlohmann::json& doc) {
    try {
        if (doc.value("format", std::string()) != "glns-population") throw FormatError("not a population snapshot");
        if (parse_problem_kind(doc.at("problem").get<std::string>()) != problem_)
            throw ConfigError("snapshot was written for a different problem kind");
        EvolutionState s;
        s.generation = doc.at("generation").get<int>();
        s.seed = doc.at("seed").get<std::uint64_t>();
        s.next_insert = doc.at("next_insert").get<std::uint64_t>();
        s.next_id = doc.at("next_id").get<std::uint64_t>();
        s.pop_d = population_from_json(doc.at("pop_d"));
        s.pop_r = population_from_json(doc.at("pop_r"));
        const auto& p = doc.at("portfolio");
        s.portfolio.weights_d = p.at("weights_d").get<std::vector<double>>();
        s.portfolio.weights_r = p.at("weights_r").get<std::vector<double>>();
        s.portfolio.fitness_d = p.at("fitness_d").get<std::vector<double>>();
        s.portfolio.fitness_r = p.at("fitness_r").get<std::vector<double>>();
        s.portfolio.synergy = p.at("synergy").get<std::vector<std::vector<double>>>();
        for (const auto& c : doc.at("best_costs"))
            s.best_costs.push_back(c.is_null() ? std::numeric_limits<double>::infinity() : c.get<double>());
        for (const auto& sol : doc.at("best_solutions"))
            s.best_solutions.push_back(sol.is_array() && !sol.empty() ? solution_from_json(sol, problem_) : Solution{});
        const auto pair = doc.at("best_pair").get<std::vector<std::string>>();
        if (pair.size() == 2) s.best_pair = {pair[0], pair[1]};
        if (s.best_costs.size() != batch_.size()) throw ConfigError("snapshot was written for a batch of a different size");
        if (s.portfolio.destroy_size() != s.pop_d.size() || s.portfolio.repair_size() != s.pop_r.size())
            throw FormatError("snapshot portfolio does not match its populations");
        state_ = std::move(s);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed snapshot: ") + e.what());
    }
}

}  // namespace glns
