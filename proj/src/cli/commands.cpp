#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "glns/cli.hpp"
#include "glns/errors.hpp"

namespace fs = std::filesystem;

namespace glns::cli {

namespace {

using Clock = std::chrono::steady_clock;

std::string num(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, end);
}

std::string pct(double fraction) {
    if (std::abs(fraction) < 5e-5) fraction = 0.0;
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << fraction * 100.0 << '%';
    return out.str();
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep)) {
        while (!item.empty() && (item.back() == '\r' || item.back() == ' ')) item.pop_back();
        while (!item.empty() && item.front() == ' ') item.erase(item.begin());
        out.push_back(item);
    }
    if (!text.empty() && text.back() == sep) out.emplace_back();
    return out;
}

std::vector<std::string> nonempty(std::vector<std::string> items) {
    items.erase(std::remove_if(items.begin(), items.end(), [](const std::string& s) { return s.empty(); }), items.end());
    return items;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

fs::path prepare_out(const Settings& s) {
    const fs::path dir = s.get("run.out");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
    open_out(dir / "effective_config.ini") << s.effective_ini();
    return dir;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

void write_timing(const fs::path& dir, const std::vector<std::pair<std::string, double>>& phases) {
    auto out = open_out(dir / "timing.csv");
    out << "phase,seconds\n";
    for (const auto& [name, secs] : phases) out << name << ',' << num(secs) << '\n';
}

std::shared_ptr<SandboxSession> sandbox_if_enabled(const Settings& s) {
    if (!s.get_bool("sandbox.enabled")) return nullptr;
    return std::make_shared<SandboxSession>(sandbox_options(s));
}

struct BuiltPortfolio {
    Portfolio portfolio;
    std::shared_ptr<SandboxSession> sandbox;
};

BuiltPortfolio snapshot_portfolio(const Settings& s, ProblemKind kind) {
    const fs::path path = s.get("solve.snapshot");
    if (path.empty()) throw ConfigError("method 'snapshot' needs solve.snapshot (--snapshot FILE)");
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read snapshot " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("snapshot " + path.string() + ": " + e.what());
    }
    if (parse_problem_kind(doc.at("problem").get<std::string>()) != kind)
        throw ConfigError("snapshot " + path.string() + " was evolved for another problem kind");
    const auto pair = doc.at("best_pair").get<std::vector<std::string>>();
    if (pair.size() != 2 || pair[0].empty()) throw ConfigError("snapshot has no best pair yet (no management phase ran)");

    auto find = [&](const char* pool, const std::string& id) {
        for (const auto& r : doc.at(pool).at("records"))
            if (r.at("id").get<std::string>() == id) return record_from_json(r);
        throw ConfigError("unknown operator id '" + id + "' in snapshot");
    };
    BuiltPortfolio out;
    out.sandbox = sandbox_if_enabled(s);
    OperatorResolver resolver(kind, out.sandbox, s.get_int("sandbox.timeout_ms"));
    out.portfolio.add_destroy(pair[0], resolver.destroy(find("pop_d", pair[0])));
    out.portfolio.add_repair(pair[1], resolver.repair(find("pop_r", pair[1])));
    return out;
}

BuiltPortfolio build_portfolio(const std::string& method, ProblemKind kind, const Settings& s) {
    if (method == "snapshot") return snapshot_portfolio(s, kind);
    const auto [d, r] = method_specs(method, kind, s);
    for (const auto& spec : d) {
        if (!find_template(parse_operator_spec(spec).first).supports(kind))
            throw ConfigError("operator '" + spec + "' does not support " + std::string(to_string(kind)));
    }
    for (const auto& spec : r) {
        if (!find_template(parse_operator_spec(spec).first).supports(kind))
            throw ConfigError("operator '" + spec + "' does not support " + std::string(to_string(kind)));
    }
    return BuiltPortfolio{builtin_portfolio(d, r), nullptr};
}

std::vector<Instance> batch_from_settings(const Settings& s, ProblemKind kind, int n) {
    const auto paths = nonempty(split(s.get("instances.paths"), ';'));
    if (!paths.empty()) {
        auto batch = load_batch(paths);
        for (const auto& inst : batch)
            if (inst.kind() != kind && !(kind == ProblemKind::OVRP && inst.kind() == ProblemKind::CVRP))
                throw ConfigError("instance '" + inst.name() + "' is not a " + std::string(to_string(kind)) + " instance");
        if (kind == ProblemKind::OVRP) {
            for (auto& inst : batch) {
                if (inst.kind() == ProblemKind::OVRP) continue;
                Instance::Spec spec = inst.spec();
                spec.kind = ProblemKind::OVRP;
                inst = Instance(spec);
            }
        }
        return batch;
    }
    return generated_batch(s, kind, n, s.get_int("instances.count"), s.get_u64("run.seed"));
}

/// Reference table from solve.references, optionally completed by the exact oracle.
std::optional<ReferenceTable> references_for(const Settings& s, const std::vector<Instance>& batch) {
    std::optional<ReferenceTable> table;
    if (!s.get("solve.references").empty()) table = ReferenceTable::load(s.get("solve.references"));
    if (s.get_bool("solve.oracle")) {
        if (!table) table.emplace();
        for (const auto& inst : batch) {
            if (table->find(inst.name())) continue;
            if (auto ref = exact_reference(inst)) table->set(inst.name(), *ref, ReferenceSource::Oracle);
        }
    }
    if (s.get_bool("solve.require_gap")) {
        if (!table) throw ConfigError("gaps requested but no reference table (--references or --oracle)");
        for (const auto& inst : batch)
            if (!table->find(inst.name())) throw ConfigError("missing reference for instance '" + inst.name() + "'");
    }
    return table;
}

// ---- gen ----------------------------------------------------------------------------------------

int cmd_gen(const Settings& s, std::ostream& out) {
    const fs::path dir = prepare_out(s);
    const ProblemKind kind = parse_problem_kind(s.get("instances.kind"));
    const int n = s.get_int("instances.n");
    const int count = s.get_int("instances.count");
    if (count < 0) throw ConfigError("instances.count must be >= 0");
    const auto batch = generated_batch(s, kind, n, count, s.get_u64("run.seed"));

    nlohmann::ordered_json manifest;
    manifest["format"] = "glns-manifest";
    manifest["kind"] = std::string(to_string(kind));
    manifest["n"] = n;
    manifest["count"] = count;
    manifest["seed"] = s.get_u64("run.seed");
    manifest["instances"] = nlohmann::json::array();
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const std::string file = batch[i].name() + ".json";
        save_instance_json(batch[i], dir / file);
        manifest["instances"].push_back(
            {{"name", batch[i].name()}, {"file", file}, {"seed", derive_seed(s.get_u64("run.seed"), i)}});
    }
    open_out(dir / "manifest.json") << manifest.dump(2) << '\n';
    out << "wrote " << batch.size() << " instance(s) and manifest.json to " << dir.string() << '\n';
    return 0;
}

// ---- solve ----------------------------------------------------------------------------------------

int cmd_solve(const Settings& s, std::ostream& out) {
    const auto t0 = Clock::now();
    const fs::path dir = prepare_out(s);
    const ProblemKind kind = parse_problem_kind(s.get("instances.kind"));
    const auto batch = batch_from_settings(s, kind, s.get_int("instances.n"));
    if (batch.empty()) throw ConfigError("solve needs at least one instance");
    const std::string method = s.get("solve.method");
    const auto built = build_portfolio(method, kind, s);
    const EpisodeConfig cfg = episode_config(s, true);
    const int reps = s.get_int("solve.repetitions");
    const std::uint64_t seed = s.get_u64("run.seed");
    const auto refs = references_for(s, batch);
    const double setup_s = seconds_since(t0);

    const auto t1 = Clock::now();
    const MethodResult result = solve_batch(batch, method, built.portfolio, cfg, reps, seed, s.get_int("run.jobs"));
    const double solve_s = seconds_since(t1);

    auto results = open_out(dir / "results.csv");
    results << "instance,method,rep,seed,best_cost\n";
    const bool traces = s.get_bool("solve.traces");
    if (traces) fs::create_directories(dir / "traces");
    for (std::size_t b = 0; b < batch.size(); ++b) {
        for (int r = 0; r < reps; ++r) {
            const auto& ep = result.evaluation.episodes[b * static_cast<std::size_t>(reps) + static_cast<std::size_t>(r)];
            results << batch[b].name() << ',' << method << ',' << r << ',' << derive_seed(seed, b, static_cast<std::uint64_t>(r))
                    << ',' << num(ep.best_cost) << '\n';
            if (traces) {
                auto trace = open_out(dir / "traces" / (batch[b].name() + "_r" + std::to_string(r) + ".csv"));
                write_trace_csv(trace, ep.trace);
            }
        }
    }

    auto summary = open_out(dir / "summary.csv");
    summary << "instance,method,mean_best_cost,reference,gap\n";
    std::vector<double> gaps;
    double mean_cost = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const double c = result.mean_best_cost[b];
        mean_cost += c / static_cast<double>(batch.size());
        summary << batch[b].name() << ',' << method << ',' << num(c) << ',';
        if (refs) {
            if (auto ref = refs->find(batch[b].name())) {
                const double g = gap(c, ref->cost);
                gaps.push_back(g);
                summary << num(ref->cost) << ',' << num(g);
            } else {
                summary << ',';
            }
        } else {
            summary << ',';
        }
        summary << '\n';
    }
    if (refs) open_out(dir / "references.csv") << refs->to_csv();
    write_timing(dir, {{"setup", setup_s}, {"solve", solve_s}});

    out << method << " on " << batch.size() << " instance(s) x " << reps << " rep(s), T=" << cfg.iterations
        << ": mean best cost " << num(mean_cost);
    if (!gaps.empty())
        out << ", mean gap " << pct(std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size()))
            << " over " << gaps.size() << " referenced instance(s)";
    out << '\n';
    return 0;
}

// ---- evolve -----------------------------------------------------------------------------------------

int cmd_evolve(const Settings& s, const std::string& resume, std::ostream& out) {
    const auto t0 = Clock::now();
    const fs::path dir = prepare_out(s);
    const ProblemKind kind = parse_problem_kind(s.get("instances.kind"));
    const auto batch = batch_from_settings(s, kind, s.get_int("instances.n"));
    const EvolutionConfig cfg = evolution_config(s);

    std::unique_ptr<Backend> backend;
    const std::string mode = s.get("llm.backend");
    if (mode == "mock") {
        backend = std::make_unique<MockBackend>(MockOptions{s.get_u64("llm.mock_seed"), s.get_double("llm.fault_rate")});
    } else if (mode == "remote") {
        backend = std::make_unique<RemoteBackend>(remote_options(s));
    } else {
        throw ConfigError("llm.backend must be 'mock' or 'remote', got '" + mode + "'");
    }

    if (resume.empty()) {
        for (const char* name : {"events.jsonl", "best_score.csv", "transcript.jsonl"}) fs::remove(dir / name);
    }
    Transcript transcript(dir / "transcript.jsonl");
    RecordingBackend recording(*backend, transcript);
    Evolution evo(kind, batch, recording, cfg, sandbox_if_enabled(s));

    if (!resume.empty()) {
        std::ifstream in(resume);
        if (!in) throw ConfigError("cannot read snapshot " + resume);
        try {
            evo.restore(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("snapshot " + resume + ": " + e.what());
        }
    } else {
        evo.seed(s.get_u64("run.seed"));
    }

    const bool fresh_scores = !fs::exists(dir / "best_score.csv");
    std::ofstream events(dir / "events.jsonl", std::ios::binary | std::ios::app);
    std::ofstream scores(dir / "best_score.csv", std::ios::binary | std::ios::app);
    if (!events || !scores) throw Error("cannot write event logs in " + dir.string());
    if (fresh_scores) scores << "generation,best_score\n";

    int managements = 0;
    EvolutionHooks hooks;
    hooks.on_generation = [&](const GenerationLog& log) {
        events << log.to_json().dump() << '\n';
        scores << log.g << ',' << num(log.best_cost) << '\n';
        events.flush();
        scores.flush();
    };
    hooks.after_management = [&](const EvolutionState& state) {
        ++managements;
        open_out(dir / ("population_g" + std::to_string(state.generation) + ".json")) << evo.snapshot().dump(2) << '\n';
    };
    const int start_generation = evo.state().generation;
    evo.run(hooks);
    open_out(dir / "population.json") << evo.snapshot().dump(2) << '\n';
    write_timing(dir, {{"evolve", seconds_since(t0)}});

    const auto& st = evo.state();
    out << "generations " << start_generation + 1 << ".." << st.generation << ", " << managements
        << " management phase(s), " << transcript.size() << " backend call(s), best score " << num(evo.best_score());
    if (!st.best_pair.first.empty()) out << ", best pair " << st.best_pair.first << " + " << st.best_pair.second;
    out << '\n';
    return 0;
}

// ---- bench -----------------------------------------------------------------------------------------

int cmd_bench(const Settings& s, std::ostream& out) {
    const auto t0 = Clock::now();
    const fs::path dir = prepare_out(s);
    const ProblemKind kind = parse_problem_kind(s.get("instances.kind"));
    const auto methods = s.get_list("bench.methods");
    if (methods.size() < 2) throw ConfigError("bench needs at least two methods");
    std::vector<int> sizes;
    for (double v : s.get_doubles("bench.sizes")) sizes.push_back(static_cast<int>(v));
    if (sizes.empty()) throw ConfigError("bench needs at least one size");
    const EpisodeConfig cfg = episode_config(s, true);
    const int reps = s.get_int("solve.repetitions");
    const std::uint64_t seed = s.get_u64("run.seed");

    struct Cell {
        double mean_obj = 0.0;
        std::optional<double> mean_gap;
    };
    std::map<std::pair<std::string, int>, Cell> cells;
    auto rows = open_out(dir / "bench_instances.csv");
    rows << "size,instance,method,best_cost,reference,gap\n";

    for (int n : sizes) {
        const auto batch = generated_batch(s, kind, n, s.get_int("instances.count"), seed);
        const auto refs = references_for(s, batch);
        std::vector<std::string> names;
        for (const auto& inst : batch) names.push_back(inst.name());
        for (const auto& method : methods) {
            const auto built = build_portfolio(method, kind, s);
            const MethodResult result = solve_batch(batch, method, built.portfolio, cfg, reps, seed, s.get_int("run.jobs"));
            if (result.mean_best_cost.size() != names.size())
                throw StateError("method '" + method + "' returned a different instance set");
            Cell cell;
            std::vector<double> gaps;
            for (std::size_t b = 0; b < batch.size(); ++b) {
                const double c = result.mean_best_cost[b];
                cell.mean_obj += c / static_cast<double>(batch.size());
                rows << n << ',' << names[b] << ',' << method << ',' << num(c) << ',';
                std::optional<ReferenceEntry> ref;
                if (refs) ref = refs->find(names[b]);
                if (ref) {
                    gaps.push_back(gap(c, ref->cost));
                    rows << num(ref->cost) << ',' << num(gaps.back());
                } else {
                    rows << ',';
                }
                rows << '\n';
            }
            if (!gaps.empty() && gaps.size() == batch.size())
                cell.mean_gap = std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
            cells[{method, n}] = cell;
        }
    }

    auto csv = open_out(dir / "bench.csv");
    csv << "size,method,mean_obj,mean_gap\n";
    for (int n : sizes)
        for (const auto& m : methods) {
            const Cell& c = cells[{m, n}];
            csv << n << ',' << m << ',' << num(c.mean_obj) << ',' << (c.mean_gap ? num(*c.mean_gap) : "") << '\n';
        }

    std::ostringstream table;
    std::size_t width = 6;
    for (const auto& m : methods) width = std::max(width, m.size());
    table << std::left << std::setw(static_cast<int>(width)) << "method";
    for (int n : sizes) {
        const std::string head = std::string(to_string(kind)) + std::to_string(n);
        table << "  " << std::right << std::setw(9) << (head + " Gap") << std::setw(10) << "Obj";
    }
    table << '\n';
    for (const auto& m : methods) {
        table << std::left << std::setw(static_cast<int>(width)) << m;
        for (int n : sizes) {
            const Cell& c = cells[{m, n}];
            std::ostringstream obj;
            obj << std::fixed << std::setprecision(4) << c.mean_obj;
            table << "  " << std::right << std::setw(9) << (c.mean_gap ? pct(*c.mean_gap) : "-") << std::setw(10) << obj.str();
        }
        table << '\n';
    }
    open_out(dir / "table.txt") << table.str();
    write_timing(dir, {{"bench", seconds_since(t0)}});
    out << table.str();
    return 0;
}

// ---- gap ---------------------------------------------------------------------------------------------

int cmd_gap(const Settings& s, const std::string& results_path, bool rebase, std::ostream& out, std::ostream& err) {
    if (results_path.empty()) throw ConfigError("gap needs --results FILE");
    const fs::path dir = prepare_out(s);
    const auto results = read_results_csv(results_path);
    std::optional<ReferenceTable> refs;
    if (!s.get("solve.references").empty()) refs = ReferenceTable::load(s.get("solve.references"));
    if (!rebase && !refs) throw ConfigError("gap needs --references FILE unless --rebase is given");
    const GapReport report = compute_gaps(results, refs ? &*refs : nullptr, rebase);
    for (const auto& name : report.skipped) err << "warning: no reference for " << name << ", row skipped\n";

    auto csv = open_out(dir / "gaps.csv");
    csv << "instance,method,cost,reference,gap\n";
    for (const auto& r : report.rows)
        csv << r.instance << ',' << r.method << ',' << num(r.cost) << ',' << num(r.reference) << ',' << num(r.gap) << '\n';
    auto summary = open_out(dir / "gap_summary.csv");
    summary << "method,count,mean_gap,median_gap\n";
    for (const auto& g : report.summary) {
        summary << g.method << ',' << g.count << ',' << num(g.mean) << ',' << num(g.median) << '\n';
        out << (g.method.empty() ? "-" : g.method) << ": " << g.count << " row(s), mean gap " << pct(g.mean)
            << ", median gap " << pct(g.median) << '\n';
    }
    return 0;
}

}  // namespace

// ---- shared pieces -------------------------------------------------------------------------------

std::pair<std::vector<std::string>, std::vector<std::string>> method_specs(const std::string& method, ProblemKind problem,
                                                                           const Settings& settings) {
    if (method == "alns")
        return {{"random_removal", "worst_removal", "related_removal"},
                {"greedy_insertion", "regret_insertion:k=2", "regret_insertion:k=3"}};
    if (method == "glns") {
        if (problem == ProblemKind::TSP) return {{"acsr"}, {"dapi"}};
        return {{"pswr"}, {"acagi"}};
    }
    if (method == "pair") {
        auto d = nonempty(split(settings.get("solve.destroy"), ';'));
        auto r = nonempty(split(settings.get("solve.repair"), ';'));
        if (d.empty() || r.empty()) throw ConfigError("method 'pair' needs solve.destroy and solve.repair (--destroy/--repair)");
        return {d, r};
    }
    throw ConfigError("unknown method '" + method + "' (expected alns, glns, pair or snapshot)");
}

std::vector<Instance> generated_batch(const Settings& settings, ProblemKind kind, int n, int count, std::uint64_t seed) {
    if (count < 0) throw ConfigError("instance count must be >= 0");
    std::vector<Instance> batch;
    batch.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        GeneratorConfig g = generator_config(settings, n, derive_seed(seed, static_cast<std::uint64_t>(i)));
        g.kind = kind;
        std::ostringstream name;
        name << to_string(kind) << n << '_' << std::setw(3) << std::setfill('0') << i;
        g.name = name.str();
        batch.push_back(generate(g));
    }
    return batch;
}

std::vector<Instance> load_batch(const std::vector<std::string>& paths) {
    std::vector<Instance> batch;
    auto is_instance_file = [](const fs::path& p) {
        const auto ext = p.extension().string();
        return (ext == ".json" || ext == ".tsp" || ext == ".vrp") && p.filename() != "manifest.json";
    };
    for (const auto& raw : paths) {
        const fs::path path = raw;
        if (fs::is_directory(path)) {
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(path))
                if (entry.is_regular_file() && is_instance_file(entry.path())) files.push_back(entry.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) batch.push_back(load_instance(f));
            continue;
        }
        if (path.filename() == "manifest.json") {
            std::ifstream in(path);
            if (!in) throw ConfigError("cannot read manifest " + path.string());
            try {
                const auto doc = nlohmann::json::parse(in);
                for (const auto& item : doc.at("instances"))
                    batch.push_back(load_instance(path.parent_path() / item.at("file").get<std::string>()));
            } catch (const nlohmann::json::exception& e) {
                throw FormatError("manifest " + path.string() + ": " + e.what());
            }
            continue;
        }
        batch.push_back(load_instance(path));
    }
    return batch;
}

MethodResult solve_batch(const std::vector<Instance>& batch, const std::string& method, const Portfolio& portfolio,
                         const EpisodeConfig& config, int repetitions, std::uint64_t seed, int jobs) {
    MethodResult out;
    out.method = method;
    out.evaluation = run_evaluation_phase(batch, portfolio,
                                          PortfolioState::zeros(portfolio.destroy.size(), portfolio.repair.size()), config,
                                          repetitions, seed, jobs);
    out.mean_best_cost = out.evaluation.mean_best_cost;
    return out;
}

GapReport compute_gaps(const std::vector<GapRow>& results, const ReferenceTable* references, bool rebase) {
    GapReport report;
    std::map<std::string, double> best;
    if (rebase) {
        for (const auto& r : results) {
            auto [it, fresh] = best.emplace(r.instance, r.cost);
            if (!fresh) it->second = std::min(it->second, r.cost);
        }
    }
    std::map<std::string, std::vector<double>> by_method;
    std::vector<std::string> order;
    for (const auto& r : results) {
        GapRow row = r;
        if (rebase) {
            row.reference = best.at(r.instance);
        } else {
            std::optional<ReferenceEntry> ref;
            if (references) ref = references->find(r.instance);
            if (!ref) {
                report.skipped.push_back(r.instance + "," + r.method);
                continue;
            }
            row.reference = ref->cost;
        }
        row.gap = gap(row.cost, row.reference);
        if (!by_method.count(row.method)) order.push_back(row.method);
        by_method[row.method].push_back(row.gap);
        report.rows.push_back(row);
    }
    for (const auto& m : order) {
        auto gaps = by_method[m];
        GapSummary g;
        g.method = m;
        g.count = gaps.size();
        g.mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
        std::sort(gaps.begin(), gaps.end());
        const std::size_t mid = gaps.size() / 2;
        g.median = gaps.size() % 2 == 1 ? gaps[mid] : 0.5 * (gaps[mid - 1] + gaps[mid]);
        report.summary.push_back(g);
    }
    return report;
}

std::vector<GapRow> read_results_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read results file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty results file");
    const auto header = split(line, ',');
    auto column = [&](const std::string& name) -> int {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int c_instance = column("instance");
    int c_cost = column("best_cost");
    if (c_cost < 0) c_cost = column("mean_best_cost");
    if (c_cost < 0) c_cost = column("cost");
    const int c_method = column("method");
    if (c_instance < 0 || c_cost < 0)
        throw FormatError(path.string() + ": results need 'instance' and 'best_cost' (or 'cost') columns");

    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::pair<double, int>> sums;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line, ',');
        const auto need = static_cast<std::size_t>(std::max({c_instance, c_cost, c_method}) + 1);
        if (cells.size() < need) throw ParseError("too few columns", line_no);
        double cost = 0.0;
        const auto& text = cells[static_cast<std::size_t>(c_cost)];
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), cost);
        if (ec != std::errc() || ptr != text.data() + text.size()) throw ParseError("bad cost '" + text + "'", line_no);
        const std::pair<std::string, std::string> key{cells[static_cast<std::size_t>(c_instance)],
                                                      c_method >= 0 ? cells[static_cast<std::size_t>(c_method)] : ""};
        auto [it, fresh] = sums.emplace(key, std::make_pair(0.0, 0));
        if (fresh) order.push_back(key);
        it->second.first += cost;
        it->second.second += 1;
    }
    std::vector<GapRow> rows;
    for (const auto& key : order) {
        GapRow r;
        r.instance = key.first;
        r.method = key.second;
        r.cost = sums[key].first / sums[key].second;
        rows.push_back(r);
    }
    return rows;
}

// ---- entry point ------------------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"G-LNS: adaptive destroy/repair search with an evolving operator portfolio", "glns"};
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string config_path, out_dir;
    std::vector<std::string> overrides;
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--set", overrides, "Override a config key: section.key=value");

    std::map<std::string, std::string> flags;
    auto flag = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
        return sub->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
    };
    auto switch_flag = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
        return sub->add_flag_function(name, [&flags, key](std::int64_t) { flags[key] = "true"; }, help);
    };
    auto instance_flags = [&](CLI::App* sub) {
        flag(sub, "--kind", "instances.kind", "tsp, cvrp or ovrp");
        flag(sub, "--n", "instances.n", "Cities (TSP) or customers (VRP)");
        flag(sub, "--count", "instances.count", "Number of generated instances");
        flag(sub, "--capacity", "instances.capacity", "Vehicle capacity for generated VRP instances");
    };
    std::vector<std::string> instance_paths, destroy_specs, repair_specs;

    auto* gen = app.add_subcommand("gen", "Generate a seeded instance batch with a manifest");
    instance_flags(gen);

    auto* solve = app.add_subcommand("solve", "Run the adaptive engine on an instance batch");
    instance_flags(solve);
    solve->add_option("--instances", instance_paths, "Instance files, directories or manifest.json");
    flag(solve, "--method", "solve.method", "alns, glns, pair or snapshot");
    solve->add_option("--destroy", destroy_specs, "Destroy spec for method pair, e.g. worst_removal:noise=0.1");
    solve->add_option("--repair", repair_specs, "Repair spec for method pair");
    flag(solve, "--snapshot", "solve.snapshot", "Population snapshot whose best pair is used");
    flag(solve, "--iterations", "episode.test_iterations", "LNS iterations per run");
    flag(solve, "--repetitions", "solve.repetitions", "Independent runs per instance");
    flag(solve, "--references", "solve.references", "Reference table CSV (name,cost,source)");
    switch_flag(solve, "--oracle", "solve.oracle", "Fill missing references with the exact oracle on small instances");
    switch_flag(solve, "--gap", "solve.require_gap", "Fail unless every instance has a reference");
    switch_flag(solve, "--sandbox", "sandbox.enabled", "Run non-template operators in the sandbox worker");

    auto* evolve = app.add_subcommand("evolve", "Evolve destroy/repair populations");
    instance_flags(evolve);
    evolve->add_option("--instances", instance_paths, "Training instance files, directories or manifest.json");
    flag(evolve, "--generations", "evolution.generations", "Maximum generation");
    flag(evolve, "--episodes", "evolution.episodes", "Episodes per instance per generation");
    flag(evolve, "--iterations", "episode.iterations", "LNS iterations per episode");
    flag(evolve, "--backend", "llm.backend", "mock or remote");
    flag(evolve, "--fault-rate", "llm.fault_rate", "Mock backend fault rate");
    switch_flag(evolve, "--sandbox", "sandbox.enabled", "Run non-template operators in the sandbox worker");
    std::string resume;
    evolve->add_option("--resume", resume, "Continue from a population snapshot")->check(CLI::ExistingFile);

    auto* bench = app.add_subcommand("bench", "Compare methods across problem sizes");
    flag(bench, "--kind", "instances.kind", "tsp, cvrp or ovrp");
    flag(bench, "--count", "instances.count", "Instances per size");
    flag(bench, "--capacity", "instances.capacity", "Vehicle capacity for generated VRP instances");
    flag(bench, "--sizes", "bench.sizes", "Comma-separated sizes");
    flag(bench, "--methods", "bench.methods", "Comma-separated methods");
    flag(bench, "--iterations", "episode.test_iterations", "LNS iterations per run");
    flag(bench, "--repetitions", "solve.repetitions", "Independent runs per instance");
    flag(bench, "--references", "solve.references", "Reference table CSV");
    switch_flag(bench, "--oracle", "solve.oracle", "Fill missing references with the exact oracle");
    flag(bench, "--snapshot", "solve.snapshot", "Snapshot for the snapshot method");

    auto* gapc = app.add_subcommand("gap", "Gap report for a results file");
    std::string results_path;
    bool rebase = false;
    gapc->add_option("--results", results_path, "CSV with instance, method and best_cost columns")->required();
    flag(gapc, "--references", "solve.references", "Reference table CSV");
    gapc->add_flag("--rebase", rebase, "Use the best cost among methods as each instance's reference");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        Settings settings = Settings::defaults();
        if (!config_path.empty()) settings.merge_file(config_path);
        settings.merge_environment();
        for (const auto& item : overrides) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + item + "'");
            settings.set(item.substr(0, eq), item.substr(eq + 1));
        }
        for (const auto& [key, value] : flags) settings.set(key, value);
        if (seed) settings.set("run.seed", std::to_string(*seed));
        if (jobs) settings.set("run.jobs", std::to_string(*jobs));
        if (!out_dir.empty()) settings.set("run.out", out_dir);
        auto join = [](const std::vector<std::string>& items) {
            std::string s;
            for (const auto& i : items) s += (s.empty() ? "" : ";") + i;
            return s;
        };
        if (!instance_paths.empty()) settings.set("instances.paths", join(instance_paths));
        if (!destroy_specs.empty()) settings.set("solve.destroy", join(destroy_specs));
        if (!repair_specs.empty()) settings.set("solve.repair", join(repair_specs));
        if (settings.get_int("run.jobs") < 1) throw ConfigError("run.jobs must be >= 1");

        if (*gen) return cmd_gen(settings, out);
        if (*solve) return cmd_solve(settings, out);
        if (*evolve) return cmd_evolve(settings, resume, out);
        if (*bench) return cmd_bench(settings, out);
        if (*gapc) return cmd_gap(settings, results_path, rebase, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace glns::cli
