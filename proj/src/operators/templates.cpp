#include <algorithm>
#include <chrono>
#include <functional>
#include <sstream>
#include <thread>

#include "glns/operators.hpp"

namespace glns {

namespace {

const std::vector<ProblemKind> kAll{ProblemKind::TSP, ProblemKind::CVRP, ProblemKind::OVRP};
const std::vector<ProblemKind> kTsp{ProblemKind::TSP};
const std::vector<ProblemKind> kVrp{ProblemKind::CVRP, ProblemKind::OVRP};

std::vector<OperatorTemplate> build_templates() {
    using K = OperatorKind;
    std::vector<OperatorTemplate> t;
    t.push_back({"random_removal", K::Destroy, kAll, {{"bias", 0.0, 0.0, 2.0}}, "remove uniformly random nodes"});
    t.push_back({"worst_removal", K::Destroy, kAll, {{"noise", 0.0, 0.0, 1.0}},
                 "repeatedly remove the node with the largest detour saving"});
    t.push_back({"related_removal", K::Destroy, kAll, {{"noise", 0.0, 0.0, 1.0}},
                 "remove a random seed node and its nearest neighbours"});
    t.push_back({"acsr", K::Destroy, kTsp,
                 {{"greedy_prob", 0.7, 0.0, 1.0}, {"moderate_ratio", 0.4, 0.1, 0.9}, {"segment_frac", 0.3, 0.1, 1.0}},
                 "remove the most expensive contiguous segment, or several random segments when the count is large"});
    t.push_back({"pswr", K::Destroy, kVrp, {{"top_k", 3, 1, 10, true}, {"ratio_floor", 0.0, 0.0, 1.0}},
                 "shift from random to top-k worst removal as the removal progresses"});
    t.push_back({"greedy_insertion", K::Repair, kAll, {{"noise", 0.0, 0.0, 0.5}},
                 "insert each node at its cheapest feasible position"});
    t.push_back({"regret_insertion", K::Repair, kAll, {{"k", 2, 2, 4, true}, {"noise", 0.0, 0.0, 0.5}},
                 "insert the node with the largest k-regret first"});
    t.push_back({"dapi", K::Repair, kTsp,
                 {{"random_base", 0.1, 0.0, 0.5},
                  {"random_scale", 0.4, 0.0, 0.5},
                  {"softmax_prob", 0.8, 0.0, 1.0},
                  {"temp_base", 3.0, 0.5, 5.0},
                  {"temp_scale", 2.0, 0.0, 4.0},
                  {"two_opt_base", 0.2, 0.0, 1.0},
                  {"two_opt_scale", 0.5, 0.0, 1.0}},
                 "softmax insertion whose temperature and randomness follow tour diversity"});
    t.push_back({"acagi", K::Repair, kVrp,
                 {{"difficulty_decay", 0.8, 0.0, 1.0},
                  {"difficulty_frac", 0.3, 0.05, 1.0},
                  {"load_penalty", 0.15, 0.0, 1.0},
                  {"length_penalty", 0.05, 0.0, 0.5},
                  {"explore_hard", 0.4, 0.0, 1.0},
                  {"explore_easy", 0.2, 0.0, 1.0},
                  {"noise", 0.1, 0.0, 0.5},
                  {"greedy_base", 0.8, 0.0, 1.0},
                  {"greedy_slope", 0.2, 0.0, 1.0},
                  {"consolidate", 1, 0, 1, true},
                  {"consolidate_max_customers", 15, 2, 100, true}},
                 "regret insertion with cached loads, adaptive depth and exploration, then route consolidation"});

    OperatorTemplate crash{"fault_crash", K::Destroy, kAll, {}, "raises on every call"};
    crash.diagnostic = true;
    t.push_back(crash);
    OperatorTemplate dup{"fault_duplicate", K::Destroy, kAll, {}, "reports one removed node twice"};
    dup.diagnostic = true;
    t.push_back(dup);
    OperatorTemplate slow{"fault_slow", K::Destroy, kAll, {{"delay_ms", 500, 0, 60000, true}}, "sleeps before a random removal"};
    slow.diagnostic = true;
    t.push_back(slow);
    OperatorTemplate drop{"fault_drop", K::Repair, kAll, {}, "loses one removed node"};
    drop.diagnostic = true;
    t.push_back(drop);
    OperatorTemplate crash_r{"fault_crash_repair", K::Repair, kAll, {}, "raises on every call"};
    crash_r.diagnostic = true;
    t.push_back(crash_r);
    return t;
}

using DestroyFn = std::function<DestroyOutcome(const Solution&, int, const Instance&, Rng&)>;
using RepairFn = std::function<Solution(const Solution&, const std::vector<int>&, const Instance&, Rng&)>;

class FnDestroy final : public DestroyOperator {
public:
    explicit FnDestroy(DestroyFn fn) : fn_(std::move(fn)) {}
    DestroyOutcome apply(const Solution& s, int count, const Instance& inst, Rng& rng) const override {
        return fn_(s, count, inst, rng);
    }

private:
    DestroyFn fn_;
};

class FnRepair final : public RepairOperator {
public:
    explicit FnRepair(RepairFn fn) : fn_(std::move(fn)) {}
    Solution apply(const Solution& p, const std::vector<int>& removed, const Instance& inst, Rng& rng) const override {
        return fn_(p, removed, inst, rng);
    }

private:
    RepairFn fn_;
};

std::string format_number(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

bool OperatorTemplate::supports(ProblemKind problem) const {
    return std::find(problems.begin(), problems.end(), problem) != problems.end();
}

ParamMap OperatorTemplate::defaults() const {
    ParamMap out;
    for (const auto& p : params) out[p.name] = p.default_value;
    return out;
}

ParamMap OperatorTemplate::normalise(const ParamMap& given) const {
    ParamMap out = defaults();
    for (const auto& [key, value] : given) {
        auto spec = std::find_if(params.begin(), params.end(), [&](const ParamSpec& p) { return p.name == key; });
        if (spec == params.end()) throw ConfigError("operator '" + name + "' has no parameter '" + key + "'");
        double v = std::clamp(value, spec->min, spec->max);
        if (spec->integer) v = std::round(v);
        out[key] = v;
    }
    return out;
}

const std::vector<OperatorTemplate>& operator_templates() {
    static const std::vector<OperatorTemplate> templates = build_templates();
    return templates;
}

bool has_template(std::string_view name) {
    const auto& all = operator_templates();
    return std::any_of(all.begin(), all.end(), [&](const OperatorTemplate& t) { return t.name == name; });
}

const OperatorTemplate& find_template(std::string_view name) {
    for (const auto& t : operator_templates())
        if (t.name == name) return t;
    throw ConfigError("unknown operator '" + std::string(name) + "'");
}

std::shared_ptr<const DestroyOperator> make_destroy(std::string_view name, const ParamMap& raw) {
    const auto& t = find_template(name);
    if (t.kind != OperatorKind::Destroy) throw ConfigError("'" + t.name + "' is not a destroy operator");
    const ParamMap p = t.normalise(raw);
    if (t.name == "random_removal")
        return std::make_shared<FnDestroy>([o = RandomRemovalOptions{p.at("bias")}](const Solution& s, int c, const Instance& i, Rng& r) {
            return random_removal(s, c, i, r, o);
        });
    if (t.name == "worst_removal")
        return std::make_shared<FnDestroy>([o = WorstRemovalOptions{p.at("noise")}](const Solution& s, int c, const Instance& i, Rng& r) {
            return worst_removal(s, c, i, r, o);
        });
    if (t.name == "related_removal")
        return std::make_shared<FnDestroy>([o = RelatedRemovalOptions{p.at("noise")}](const Solution& s, int c, const Instance& i, Rng& r) {
            return related_removal(s, c, i, r, o);
        });
    if (t.name == "acsr") {
        AcsrOptions o{p.at("greedy_prob"), p.at("moderate_ratio"), p.at("segment_frac")};
        return std::make_shared<FnDestroy>(
            [o](const Solution& s, int c, const Instance& i, Rng& r) { return acsr_destroy(s, c, i, r, o); });
    }
    if (t.name == "pswr") {
        PswrOptions o{static_cast<int>(p.at("top_k")), p.at("ratio_floor")};
        return std::make_shared<FnDestroy>(
            [o](const Solution& s, int c, const Instance& i, Rng& r) { return pswr_destroy(s, c, i, r, o); });
    }
    if (t.name == "fault_crash")
        return std::make_shared<FnDestroy>([](const Solution&, int, const Instance&, Rng&) -> DestroyOutcome {
            throw OperatorError("fault_crash: deliberate failure");
        });
    if (t.name == "fault_duplicate")
        return std::make_shared<FnDestroy>([](const Solution& s, int c, const Instance& i, Rng& r) {
            auto out = random_removal(s, c, i, r);
            out.removed.push_back(out.removed.front());
            return out;
        });
    if (t.name == "fault_slow")
        return std::make_shared<FnDestroy>([ms = static_cast<int>(p.at("delay_ms"))](const Solution& s, int c, const Instance& i, Rng& r) {
            std::this_thread::sleep_for(std::chrono::milliseconds(ms));
            return random_removal(s, c, i, r);
        });
    throw ConfigError("no implementation for destroy operator '" + t.name + "'");
}

std::shared_ptr<const RepairOperator> make_repair(std::string_view name, const ParamMap& raw) {
    const auto& t = find_template(name);
    if (t.kind != OperatorKind::Repair) throw ConfigError("'" + t.name + "' is not a repair operator");
    const ParamMap p = t.normalise(raw);
    if (t.name == "greedy_insertion")
        return std::make_shared<FnRepair>([o = GreedyInsertionOptions{p.at("noise")}](const Solution& s, const std::vector<int>& rm,
                                                                                    const Instance& i, Rng& r) {
            return greedy_insertion(s, rm, i, r, o);
        });
    if (t.name == "regret_insertion") {
        RegretInsertionOptions o{static_cast<int>(p.at("k")), p.at("noise")};
        return std::make_shared<FnRepair>([o](const Solution& s, const std::vector<int>& rm, const Instance& i, Rng& r) {
            return regret_k_insertion(s, rm, i, r, o);
        });
    }
    if (t.name == "dapi") {
        DapiOptions o{p.at("random_base"), p.at("random_scale"), p.at("softmax_prob"), p.at("temp_base"),
                      p.at("temp_scale"),  p.at("two_opt_base"), p.at("two_opt_scale")};
        return std::make_shared<FnRepair>([o](const Solution& s, const std::vector<int>& rm, const Instance& i, Rng& r) {
            return dapi_repair(s, rm, i, r, o);
        });
    }
    if (t.name == "acagi") {
        AcagiOptions o;
        o.difficulty_decay = p.at("difficulty_decay");
        o.difficulty_frac = p.at("difficulty_frac");
        o.load_penalty = p.at("load_penalty");
        o.length_penalty = p.at("length_penalty");
        o.explore_hard = p.at("explore_hard");
        o.explore_easy = p.at("explore_easy");
        o.noise = p.at("noise");
        o.greedy_base = p.at("greedy_base");
        o.greedy_slope = p.at("greedy_slope");
        o.consolidate = p.at("consolidate") != 0.0;
        o.consolidate_max_customers = static_cast<int>(p.at("consolidate_max_customers"));
        return std::make_shared<FnRepair>([o](const Solution& s, const std::vector<int>& rm, const Instance& i, Rng& r) {
            return acagi_repair(s, rm, i, r, o);
        });
    }
    if (t.name == "fault_drop")
        return std::make_shared<FnRepair>([](const Solution& s, const std::vector<int>& rm, const Instance& i, Rng& r) {
            std::vector<int> kept(rm.begin() + (rm.empty() ? 0 : 1), rm.end());
            return greedy_insertion(s, kept, i, r);
        });
    if (t.name == "fault_crash_repair")
        return std::make_shared<FnRepair>([](const Solution&, const std::vector<int>&, const Instance&, Rng&) -> Solution {
            throw OperatorError("fault_crash_repair: deliberate failure");
        });
    throw ConfigError("no implementation for repair operator '" + t.name + "'");
}

std::pair<std::string, ParamMap> parse_operator_spec(std::string_view text) {
    const auto colon = text.find(':');
    std::string name(text.substr(0, colon));
    ParamMap params;
    if (colon != std::string_view::npos) {
        std::string rest(text.substr(colon + 1));
        std::istringstream in(rest);
        std::string item;
        while (std::getline(in, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw ConfigError("operator parameter '" + item + "' must be key=value");
            try {
                params[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
            } catch (const std::exception&) {
                throw ConfigError("operator parameter '" + item + "' is not numeric");
            }
        }
    }
    find_template(name).normalise(params);
    return {name, params};
}

std::string_view to_string(Provenance provenance) {
    return provenance == Provenance::Builtin ? "builtin" : "generated";
}

OperatorRecord builtin_record(std::string id, std::string_view template_name, const ParamMap& params) {
    const auto& t = find_template(template_name);
    OperatorRecord r;
    r.id = std::move(id);
    r.kind = t.kind;
    r.provenance = Provenance::Builtin;
    r.description = t.summary;
    r.template_name = t.name;
    r.params = t.normalise(params);
    return r;
}

nlohmann::json record_to_json(const OperatorRecord& record) {
    nlohmann::json doc;
    doc["id"] = record.id;
    doc["kind"] = std::string(to_string(record.kind));
    doc["provenance"] = std::string(to_string(record.provenance));
    doc["description"] = record.description;
    if (record.native()) {
        doc["template"] = record.template_name;
        doc["params"] = record.params;
    }
    doc["source"] = record.source;
    return doc;
}

OperatorRecord record_from_json(const nlohmann::json& doc) {
    try {
        OperatorRecord r;
        r.id = doc.at("id").get<std::string>();
        r.kind = parse_operator_kind(doc.at("kind").get<std::string>());
        const auto prov = doc.at("provenance").get<std::string>();
        if (prov == "builtin") r.provenance = Provenance::Builtin;
        else if (prov == "generated") r.provenance = Provenance::Generated;
        else throw FormatError("unknown provenance '" + prov + "'");
        r.description = doc.value("description", std::string());
        if (doc.contains("template")) {
            r.template_name = doc["template"].get<std::string>();
            r.params = find_template(r.template_name).normalise(doc.value("params", ParamMap{}));
        }
        r.source = doc.value("source", std::string());
        if (r.provenance == Provenance::Generated && r.source.empty())
            throw FormatError("generated record '" + r.id + "' has no source");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed operator record: ") + e.what());
    }
}

// ---- python reference sources --------------------------------------------------

namespace {

constexpr const char* kDirective = "# glns-template: ";

constexpr const char* kRandomTsp = R"(def destroy(current_solution, destroy_cnt, distance_matrix):
    """Remove destroy_cnt cities chosen uniformly at random."""
    import random
    partial = list(current_solution)
    removed = []
    for _ in range(min(destroy_cnt, len(partial) - 1)):
        idx = random.randrange(len(partial))
        removed.append(partial.pop(idx))
    return removed, partial
)";

constexpr const char* kRandomVrp = R"(def destroy(current_solution, destroy_cnt, problem_data):
    """Remove destroy_cnt customers chosen uniformly at random; drop emptied routes."""
    import random
    routes = [list(r) for r in current_solution]
    customers = [c for r in routes for c in r]
    removed = random.sample(customers, min(destroy_cnt, len(customers) - 1))
    gone = set(removed)
    partial = [[c for c in r if c not in gone] for r in routes]
    return removed, [r for r in partial if r]
)";

constexpr const char* kWorstTsp = R"(def destroy(current_solution, destroy_cnt, distance_matrix):
    """Repeatedly remove the city whose removal shortens the tour the most."""
    d = distance_matrix
    tour = list(current_solution)
    removed = []
    for _ in range(min(destroy_cnt, len(tour) - 1)):
        n = len(tour)
        best_i, best_saving = 0, None
        for i in range(n):
            prev, node, nxt = tour[i - 1], tour[i], tour[(i + 1) % n]
            saving = d[prev][node] + d[node][nxt] - d[prev][nxt]
            if best_saving is None or saving > best_saving or (saving == best_saving and node < tour[best_i]):
                best_i, best_saving = i, saving
        removed.append(tour.pop(best_i))
    return removed, tour
)";

constexpr const char* kWorstVrp = R"(def destroy(current_solution, destroy_cnt, problem_data):
    """Repeatedly remove the customer with the largest detour saving; drop emptied routes."""
    d = problem_data['distance_matrix']
    depot = problem_data['depot_idx']
    open_routes = problem_data.get('open_routes', False)
    routes = [list(r) for r in current_solution]
    total = sum(len(r) for r in routes)
    removed = []
    for _ in range(min(destroy_cnt, total - 1)):
        best = None
        for r, route in enumerate(routes):
            for i, node in enumerate(route):
                prev = route[i - 1] if i > 0 else depot
                if open_routes and i == len(route) - 1:
                    saving = d[prev][node]
                else:
                    nxt = route[i + 1] if i + 1 < len(route) else depot
                    saving = d[prev][node] + d[node][nxt] - d[prev][nxt]
                if best is None or saving > best[0] or (saving == best[0] and node < best[3]):
                    best = (saving, r, i, node)
        _, r, i, node = best
        removed.append(routes[r].pop(i))
        routes = [route for route in routes if route]
    return removed, routes
)";

constexpr const char* kGreedyTsp = R"(def repair(partial_solution, removed_elements, distance_matrix):
    """Insert each removed city, in order, where it lengthens the tour least."""
    d = distance_matrix
    tour = list(partial_solution)
    for city in removed_elements:
        n = len(tour)
        if n <= 1:
            tour.append(city)
            continue
        best_p, best_delta = 0, None
        for p in range(n):
            a, b = tour[p], tour[(p + 1) % n]
            delta = d[a][city] + d[city][b] - d[a][b]
            if best_delta is None or delta < best_delta:
                best_p, best_delta = p, delta
        tour.insert(best_p + 1, city)
    return tour
)";

constexpr const char* kGreedyVrp = R"(def repair(partial_solution, removed_elements, problem_data):
    """Insert each removed customer, in order, at its cheapest capacity-feasible position."""
    d = problem_data['distance_matrix']
    demands = problem_data['demands']
    capacity = problem_data['capacity']
    depot = problem_data['depot_idx']
    open_routes = problem_data.get('open_routes', False)
    routes = [list(r) for r in partial_solution]
    for c in removed_elements:
        best = None
        for r, route in enumerate(routes):
            if sum(demands[v] for v in route) + demands[c] > capacity:
                continue
            for p in range(len(route) + 1):
                prev = route[p - 1] if p > 0 else depot
                if open_routes and p == len(route):
                    delta = d[prev][c]
                else:
                    nxt = route[p] if p < len(route) else depot
                    delta = d[prev][c] + d[c][nxt] - d[prev][nxt]
                if best is None or delta < best[0]:
                    best = (delta, r, p)
        if best is None:
            routes.append([c])
        else:
            routes[best[1]].insert(best[2], c)
    return routes
)";

std::string placeholder_body(const OperatorTemplate& t, ProblemKind problem) {
    const char* third = problem == ProblemKind::TSP ? "distance_matrix" : "problem_data";
    std::ostringstream out;
    if (t.kind == OperatorKind::Destroy)
        out << "def destroy(current_solution, destroy_cnt, " << third << "):\n";
    else
        out << "def repair(partial_solution, removed_elements, " << third << "):\n";
    out << "    \"\"\"" << t.summary << ". Executed natively from the template line above.\"\"\"\n";
    out << "    raise NotImplementedError('template-backed operator')\n";
    return out.str();
}

}  // namespace

std::string template_source(std::string_view template_name, const ParamMap& params, ProblemKind problem) {
    const auto& t = find_template(template_name);
    const ParamMap p = t.normalise(params);
    std::ostringstream out;
    out << kDirective << t.name << " {";
    bool first = true;
    for (const auto& [k, v] : p) {
        out << (first ? "" : ", ") << '"' << k << "\": " << format_number(v);
        first = false;
    }
    out << "}\n";

    const bool tsp = problem == ProblemKind::TSP;
    // defaults of the three seed operators have real reference implementations
    const bool at_defaults = p == t.defaults();
    if (at_defaults && t.name == "random_removal") out << (tsp ? kRandomTsp : kRandomVrp);
    else if (at_defaults && t.name == "worst_removal") out << (tsp ? kWorstTsp : kWorstVrp);
    else if (at_defaults && t.name == "greedy_insertion") out << (tsp ? kGreedyTsp : kGreedyVrp);
    else out << placeholder_body(t, problem);
    return out.str();
}

std::optional<TemplateDirective> parse_template_directive(std::string_view source) {
    const std::string_view marker(kDirective);
    std::size_t pos = 0;
    while (pos < source.size()) {
        std::size_t end = source.find('\n', pos);
        if (end == std::string_view::npos) end = source.size();
        std::string_view line = source.substr(pos, end - pos);
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
        if (line.substr(0, marker.size()) == marker) {
            std::string_view rest = line.substr(marker.size());
            const auto space = rest.find(' ');
            std::string name(rest.substr(0, space));
            if (!has_template(name)) return std::nullopt;
            ParamMap params;
            if (space != std::string_view::npos) {
                try {
                    auto doc = nlohmann::json::parse(rest.substr(space + 1));
                    params = doc.get<ParamMap>();
                } catch (const nlohmann::json::exception&) {
                    return std::nullopt;
                }
            }
            try {
                return TemplateDirective{name, find_template(name).normalise(params)};
            } catch (const ConfigError&) {
                return std::nullopt;
            }
        }
        pos = end + 1;
    }
    return std::nullopt;
}

}  // namespace glns
