#include "glns/instance_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "glns/rng.hpp"

namespace glns {

void GeneratorConfig::validate() const {
    if (kind == ProblemKind::TSP && n < 2) throw ConfigError("generator: n must be >= 2");
    if (kind != ProblemKind::TSP && n < 1) throw ConfigError("generator: need at least one customer");
    if (demand_min < 1) throw ConfigError("generator: demand_min must be >= 1");
    if (demand_max < demand_min) throw ConfigError("generator: empty demand range");
    if (kind != ProblemKind::TSP && capacity < demand_max)
        throw ConfigError("generator: capacity must be >= demand_max");
}

Instance generate(const GeneratorConfig& config) {
    config.validate();
    Rng rng(config.seed);
    Instance::Spec spec;
    spec.kind = config.kind;
    spec.name = config.name.empty()
                    ? std::string(to_string(config.kind)) + std::to_string(config.n) + "_s" + std::to_string(config.seed)
                    : config.name;
    spec.distance_rule = DistanceRule::Euclidean;
    if (config.kind == ProblemKind::TSP) {
        spec.coords.reserve(static_cast<std::size_t>(config.n));
        for (int i = 0; i < config.n; ++i) {
            const double x = rng.uniform();
            const double y = rng.uniform();
            spec.coords.push_back({x, y});
        }
        return Instance(std::move(spec));
    }
    spec.capacity = config.capacity;
    spec.depot = 0;
    spec.coords.push_back(config.depot_position);
    spec.demands.push_back(0);
    for (int i = 0; i < config.n; ++i) {
        const double x = rng.uniform();
        const double y = rng.uniform();
        spec.coords.push_back({x, y});
    }
    for (int i = 0; i < config.n; ++i)
        spec.demands.push_back(static_cast<int>(rng.uniform_int(config.demand_min, config.demand_max)));
    return Instance(std::move(spec));
}

// ---- TSPLIB / CVRPLIB ------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

std::vector<std::string> tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

double parse_double(const std::string& token, int line) {
    try {
        std::size_t used = 0;
        double v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        throw ParseError("expected a number, got '" + token + "'", line);
    }
}

long long parse_int(const std::string& token, int line) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size())
        throw ParseError("expected an integer, got '" + token + "'", line);
    return v;
}

struct RawLib {
    std::map<std::string, std::string> fields;
    std::map<long long, Point> coords;
    std::map<long long, long long> demands;
    std::vector<long long> depots;
    bool has_coords = false;
    bool has_demands = false;
    bool has_depots = false;
};

bool is_section(const std::string& key) {
    return key.size() > 8 && key.compare(key.size() - 8, 8, "_SECTION") == 0;
}

RawLib read_lib(std::string_view text) {
    RawLib raw;
    std::vector<std::string> lines;
    {
        std::string current;
        std::istringstream in{std::string(text)};
        while (std::getline(in, current)) {
            if (!current.empty() && current.back() == '\r') current.pop_back();
            lines.push_back(current);
        }
    }

    auto dimension = [&](int line) -> long long {
        auto it = raw.fields.find("DIMENSION");
        if (it == raw.fields.end()) throw ParseError("section before DIMENSION", line);
        return parse_int(it->second, line);
    };

    std::size_t i = 0;
    while (i < lines.size()) {
        const int lineno = static_cast<int>(i) + 1;
        std::string line = trim(lines[i]);
        ++i;
        if (line.empty()) continue;
        if (upper(line) == "EOF") break;

        std::string key;
        std::string value;
        if (auto colon = line.find(':'); colon != std::string::npos) {
            key = upper(trim(line.substr(0, colon)));
            value = trim(line.substr(colon + 1));
        } else {
            auto parts = tokens(line);
            key = upper(parts.front());
            value = parts.size() > 1 ? trim(line.substr(line.find(parts[1]))) : "";
        }

        if (!is_section(key)) {
            raw.fields[key] = value;
            continue;
        }

        if (key == "DEPOT_SECTION") {
            raw.has_depots = true;
            bool terminated = false;
            while (i < lines.size()) {
                const int ln = static_cast<int>(i) + 1;
                std::string body = trim(lines[i]);
                ++i;
                if (body.empty()) continue;
                const long long id = parse_int(tokens(body).front(), ln);
                if (id == -1) {
                    terminated = true;
                    break;
                }
                raw.depots.push_back(id);
            }
            if (!terminated) throw ParseError("DEPOT_SECTION not terminated by -1", static_cast<int>(lines.size()));
            continue;
        }

        const bool coords = key == "NODE_COORD_SECTION";
        const bool demands = key == "DEMAND_SECTION";
        if (!coords && !demands) throw UnsupportedFormatError("unsupported section " + key);
        const long long dim = dimension(lineno);
        long long read = 0;
        while (read < dim) {
            if (i >= lines.size())
                throw ParseError(key + " truncated after " + std::to_string(read) + " of " + std::to_string(dim) +
                                     " entries",
                                 static_cast<int>(lines.size()));
            const int ln = static_cast<int>(i) + 1;
            std::string body = trim(lines[i]);
            if (body.empty()) {
                ++i;
                continue;
            }
            auto parts = tokens(body);
            const std::string head = upper(parts.front());
            if (head == "EOF" || is_section(head) || body.find(':') != std::string::npos)
                throw ParseError(key + " truncated after " + std::to_string(read) + " of " + std::to_string(dim) +
                                     " entries",
                                 ln);
            ++i;
            const long long id = parse_int(parts.front(), ln);
            if (coords) {
                if (parts.size() < 3) throw ParseError("coordinate line needs id x y", ln);
                raw.coords[id] = {parse_double(parts[1], ln), parse_double(parts[2], ln)};
            } else {
                if (parts.size() < 2) throw ParseError("demand line needs id demand", ln);
                raw.demands[id] = parse_int(parts[1], ln);
            }
            ++read;
        }
        (coords ? raw.has_coords : raw.has_demands) = true;
    }
    return raw;
}

DistanceRule edge_rule(const RawLib& raw) {
    auto it = raw.fields.find("EDGE_WEIGHT_TYPE");
    if (it == raw.fields.end()) throw UnsupportedFormatError("missing EDGE_WEIGHT_TYPE");
    const std::string type = upper(it->second);
    if (type == "EUC_2D") return DistanceRule::RoundedEuclidean;
    if (type == "CEIL_2D") return DistanceRule::CeilEuclidean;
    throw UnsupportedFormatError("unsupported EDGE_WEIGHT_TYPE " + it->second);
}

/// Node ids in file order mapped to dense 0-based indices.
std::map<long long, int> index_nodes(const RawLib& raw) {
    std::map<long long, int> index;
    int next = 0;
    for (const auto& [id, p] : raw.coords) index[id] = next++;
    return index;
}

std::string field_or(const RawLib& raw, const std::string& key, const std::string& fallback) {
    auto it = raw.fields.find(key);
    return it == raw.fields.end() ? fallback : it->second;
}

}  // namespace

Instance parse_tsplib(std::string_view text) {
    RawLib raw = read_lib(text);
    const DistanceRule rule = edge_rule(raw);
    if (!raw.has_coords) throw ParseError("missing NODE_COORD_SECTION", 0);
    Instance::Spec spec;
    spec.kind = ProblemKind::TSP;
    spec.name = field_or(raw, "NAME", "unnamed");
    spec.distance_rule = rule;
    for (const auto& [id, p] : raw.coords) spec.coords.push_back(p);
    return Instance(std::move(spec));
}

Instance parse_cvrplib(std::string_view text) {
    RawLib raw = read_lib(text);
    const DistanceRule rule = edge_rule(raw);
    if (!raw.has_coords) throw ParseError("missing NODE_COORD_SECTION", 0);
    if (!raw.has_demands) throw ParseError("missing DEMAND_SECTION", 0);
    auto cap = raw.fields.find("CAPACITY");
    if (cap == raw.fields.end()) throw ParseError("missing CAPACITY", 0);

    const auto index = index_nodes(raw);
    Instance::Spec spec;
    spec.kind = ProblemKind::CVRP;
    spec.name = field_or(raw, "NAME", "unnamed");
    spec.distance_rule = rule;
    spec.capacity = static_cast<int>(parse_int(cap->second, 0));
    for (const auto& [id, p] : raw.coords) spec.coords.push_back(p);
    spec.demands.assign(spec.coords.size(), 0);
    for (const auto& [id, q] : raw.demands) {
        auto it = index.find(id);
        if (it == index.end()) throw FormatError("demand for unknown node " + std::to_string(id));
        spec.demands[static_cast<std::size_t>(it->second)] = static_cast<int>(q);
    }
    long long depot_id = raw.depots.empty() ? raw.coords.begin()->first : raw.depots.front();
    auto dit = index.find(depot_id);
    if (dit == index.end()) throw FormatError("depot refers to unknown node " + std::to_string(depot_id));
    spec.depot = dit->second;
    if (spec.demands[static_cast<std::size_t>(spec.depot)] != 0)
        throw FormatError("depot demand must be 0, got " + std::to_string(spec.demands[static_cast<std::size_t>(spec.depot)]));
    return Instance(std::move(spec));
}

namespace {

std::string exact_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string write_tsplib(const Instance& instance) {
    std::ostringstream out;
    const bool vrp = is_routing(instance.kind());
    out << "NAME : " << instance.name() << "\n";
    out << "TYPE : " << (vrp ? "CVRP" : "TSP") << "\n";
    out << "DIMENSION : " << instance.size() << "\n";
    const char* rule = instance.distance_rule() == DistanceRule::CeilEuclidean ? "CEIL_2D" : "EUC_2D";
    out << "EDGE_WEIGHT_TYPE : " << rule << "\n";
    if (vrp) out << "CAPACITY : " << instance.capacity() << "\n";
    out << "NODE_COORD_SECTION\n";
    for (int i = 0; i < instance.size(); ++i) {
        const Point& p = instance.coords()[static_cast<std::size_t>(i)];
        out << (i + 1) << " " << exact_number(p.x) << " " << exact_number(p.y) << "\n";
    }
    if (vrp) {
        out << "DEMAND_SECTION\n";
        for (int i = 0; i < instance.size(); ++i) out << (i + 1) << " " << instance.demand(i) << "\n";
        out << "DEPOT_SECTION\n" << (instance.depot() + 1) << "\n-1\n";
    }
    out << "EOF\n";
    return out.str();
}

// ---- JSON ------------------------------------------------------------------

nlohmann::json instance_to_json(const Instance& instance) {
    nlohmann::json doc;
    doc["kind"] = std::string(to_string(instance.kind()));
    doc["name"] = instance.name();
    auto coords = nlohmann::json::array();
    for (const auto& p : instance.coords()) coords.push_back({p.x, p.y});
    doc["coords"] = coords;
    doc["demands"] = instance.demands();
    if (is_routing(instance.kind())) {
        doc["capacity"] = instance.capacity();
        doc["depot"] = instance.depot();
    } else {
        doc["capacity"] = nullptr;
        doc["depot"] = nullptr;
    }
    if (instance.distance_rule() != DistanceRule::Euclidean)
        doc["distance"] = std::string(to_string(instance.distance_rule()));
    return doc;
}

Instance instance_from_json(const nlohmann::json& doc) {
    try {
        Instance::Spec spec;
        spec.kind = parse_problem_kind(doc.at("kind").get<std::string>());
        spec.name = doc.value("name", std::string("unnamed"));
        for (const auto& p : doc.at("coords")) spec.coords.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        if (doc.contains("demands") && !doc["demands"].is_null()) spec.demands = doc["demands"].get<std::vector<int>>();
        if (doc.contains("capacity") && !doc["capacity"].is_null()) spec.capacity = doc["capacity"].get<int>();
        if (doc.contains("depot") && !doc["depot"].is_null()) spec.depot = doc["depot"].get<int>();
        if (doc.contains("distance")) spec.distance_rule = parse_distance_rule(doc["distance"].get<std::string>());
        return Instance(std::move(spec));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed instance JSON: ") + e.what());
    }
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

Instance load_instance(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    const std::string text = read_file(path);
    if (ext == ".json") {
        try {
            return instance_from_json(nlohmann::json::parse(text));
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(path.string() + ": " + e.what());
        }
    }
    if (ext == ".vrp") return parse_cvrplib(text);
    if (ext == ".tsp") return parse_tsplib(text);
    throw UnsupportedFormatError("unknown instance file extension: " + path.string());
}

void save_instance_json(const Instance& instance, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << instance_to_json(instance).dump() << "\n";
}

double scaling_factor(const Instance& instance) {
    const auto& c = instance.coords();
    if (c.empty()) return 0.0;
    double x0 = c[0].x, x1 = c[0].x, y0 = c[0].y, y1 = c[0].y;
    for (const auto& p : c) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return std::max(x1 - x0, y1 - y0);
}

double gap(double obj, double reference) {
    if (!(reference > 0.0)) throw DomainError("gap: reference must be positive");
    return (obj - reference) / reference;
}

// ---- reference tables --------------------------------------------------------

void ReferenceTable::set(const std::string& name, double cost, ReferenceSource source) {
    if (!(cost > 0.0)) throw DomainError("reference cost for '" + name + "' must be positive");
    entries_[name] = {cost, source};
}

std::optional<ReferenceEntry> ReferenceTable::find(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

ReferenceTable ReferenceTable::parse_csv(std::string_view text) {
    ReferenceTable table;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream row(line);
        while (std::getline(row, cell, ',')) cells.push_back(trim(cell));
        if (header) {
            header = false;
            if (cells.size() < 2 || cells[0] != "name" || cells[1] != "cost")
                throw ParseError("reference table must start with header name,cost,source", lineno);
            continue;
        }
        if (cells.size() < 2) throw ParseError("reference row needs name,cost", lineno);
        ReferenceSource source = ReferenceSource::File;
        if (cells.size() > 2 && cells[2] == "oracle") source = ReferenceSource::Oracle;
        table.set(cells[0], parse_double(cells[1], lineno), source);
    }
    return table;
}

ReferenceTable ReferenceTable::load(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

std::string ReferenceTable::to_csv() const {
    std::ostringstream out;
    out << "name,cost,source\n";
    for (const auto& [name, entry] : entries_)
        out << name << "," << exact_number(entry.cost) << "," << (entry.source == ReferenceSource::Oracle ? "oracle" : "file")
            << "\n";
    return out.str();
}

// ---- exact oracles -----------------------------------------------------------

ExactResult held_karp_tsp(const Instance& instance) {
    if (instance.kind() != ProblemKind::TSP) throw ConfigError("held_karp_tsp needs a TSP instance");
    const int n = instance.size();
    if (n > 20) throw ConfigError("held_karp_tsp: instance too large");
    if (n <= 3) {
        TourSolution t;
        for (int i = 0; i < n; ++i) t.tour.push_back(i);
        return {tour_length(instance, t.tour), t};
    }
    // node 0 is the fixed start; subsets range over nodes 1..n-1
    const int m = n - 1;
    const std::size_t full = std::size_t{1} << m;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(full * static_cast<std::size_t>(m), inf);
    std::vector<int> parent(full * static_cast<std::size_t>(m), -1);
    auto at = [m](std::size_t mask, int last) { return mask * static_cast<std::size_t>(m) + static_cast<std::size_t>(last); };
    for (int j = 0; j < m; ++j) dp[at(std::size_t{1} << j, j)] = instance.dist(0, j + 1);
    for (std::size_t mask = 1; mask < full; ++mask) {
        for (int last = 0; last < m; ++last) {
            if (!(mask & (std::size_t{1} << last))) continue;
            const double base = dp[at(mask, last)];
            if (base == inf) continue;
            for (int next = 0; next < m; ++next) {
                if (mask & (std::size_t{1} << next)) continue;
                const std::size_t nm = mask | (std::size_t{1} << next);
                const double cand = base + instance.dist(last + 1, next + 1);
                if (cand < dp[at(nm, next)]) {
                    dp[at(nm, next)] = cand;
                    parent[at(nm, next)] = last;
                }
            }
        }
    }
    double best = inf;
    int best_last = -1;
    for (int last = 0; last < m; ++last) {
        const double cand = dp[at(full - 1, last)] + instance.dist(last + 1, 0);
        if (cand < best) {
            best = cand;
            best_last = last;
        }
    }
    std::vector<int> rev;
    std::size_t mask = full - 1;
    int cur = best_last;
    while (cur >= 0) {
        rev.push_back(cur + 1);
        const int prev = parent[at(mask, cur)];
        mask &= ~(std::size_t{1} << cur);
        cur = prev;
    }
    TourSolution tour;
    tour.tour.push_back(0);
    tour.tour.insert(tour.tour.end(), rev.rbegin(), rev.rend());
    return {tour_length(instance, tour.tour), tour};
}

ExactResult exact_vrp(const Instance& instance) {
    if (!is_routing(instance.kind())) throw ConfigError("exact_vrp needs a CVRP/OVRP instance");
    const std::vector<int>& customers = instance.elements();
    const int m = static_cast<int>(customers.size());
    if (m > 14) throw ConfigError("exact_vrp: instance too large");
    if (m == 0) return {0.0, RouteSolution{}};
    const bool open = instance.kind() == ProblemKind::OVRP;
    const int depot = instance.depot();
    const std::size_t full = std::size_t{1} << m;
    constexpr double inf = std::numeric_limits<double>::infinity();

    // shortest depot-anchored path over each subset, ending at `last`
    std::vector<double> path(full * static_cast<std::size_t>(m), inf);
    std::vector<int> parent(full * static_cast<std::size_t>(m), -1);
    auto at = [m](std::size_t mask, int last) { return mask * static_cast<std::size_t>(m) + static_cast<std::size_t>(last); };
    std::vector<int> load(full, 0);
    for (std::size_t mask = 1; mask < full; ++mask) {
        int low = 0;
        while (!(mask & (std::size_t{1} << low))) ++low;
        load[mask] = load[mask & (mask - 1)] + instance.demand(customers[static_cast<std::size_t>(low)]);
    }
    for (int j = 0; j < m; ++j) path[at(std::size_t{1} << j, j)] = instance.dist(depot, customers[static_cast<std::size_t>(j)]);
    for (std::size_t mask = 1; mask < full; ++mask) {
        if (load[mask] > instance.capacity()) continue;
        for (int last = 0; last < m; ++last) {
            const double base = path[at(mask, last)];
            if (base == inf) continue;
            for (int next = 0; next < m; ++next) {
                if (mask & (std::size_t{1} << next)) continue;
                const std::size_t nm = mask | (std::size_t{1} << next);
                if (load[nm] > instance.capacity()) continue;
                const double cand = base + instance.dist(customers[static_cast<std::size_t>(last)], customers[static_cast<std::size_t>(next)]);
                if (cand < path[at(nm, next)]) {
                    path[at(nm, next)] = cand;
                    parent[at(nm, next)] = last;
                }
            }
        }
    }
    std::vector<double> route_cost(full, inf);
    std::vector<int> route_last(full, -1);
    for (std::size_t mask = 1; mask < full; ++mask) {
        if (load[mask] > instance.capacity()) continue;
        for (int last = 0; last < m; ++last) {
            const double base = path[at(mask, last)];
            if (base == inf) continue;
            const double c = open ? base : base + instance.dist(customers[static_cast<std::size_t>(last)], depot);
            if (c < route_cost[mask]) {
                route_cost[mask] = c;
                route_last[mask] = last;
            }
        }
    }

    // set partition over customer subsets; each block contains the lowest remaining customer
    std::vector<double> part(full, inf);
    std::vector<std::size_t> choice(full, 0);
    part[0] = 0.0;
    for (std::size_t mask = 1; mask < full; ++mask) {
        const std::size_t low = mask & (~mask + 1);
        const std::size_t rest = mask ^ low;
        for (std::size_t sub = rest;; sub = (sub - 1) & rest) {
            const std::size_t block = sub | low;
            if (route_cost[block] < inf && part[mask ^ block] < inf) {
                const double c = route_cost[block] + part[mask ^ block];
                if (c < part[mask]) {
                    part[mask] = c;
                    choice[mask] = block;
                }
            }
            if (sub == 0) break;
        }
    }

    RouteSolution solution;
    std::size_t mask = full - 1;
    while (mask) {
        const std::size_t block = choice[mask];
        std::vector<int> rev;
        std::size_t bm = block;
        int cur = route_last[block];
        while (cur >= 0) {
            rev.push_back(customers[static_cast<std::size_t>(cur)]);
            const int prev = parent[at(bm, cur)];
            bm &= ~(std::size_t{1} << cur);
            cur = prev;
        }
        solution.routes.emplace_back(rev.rbegin(), rev.rend());
        mask ^= block;
    }
    return {unchecked_cost(instance, solution), solution};
}

std::optional<double> exact_reference(const Instance& instance) {
    if (instance.kind() == ProblemKind::TSP) {
        if (instance.size() > 10) return std::nullopt;
        return held_karp_tsp(instance).cost;
    }
    if (static_cast<int>(instance.elements().size()) > 8) return std::nullopt;
    return exact_vrp(instance).cost;
}

}  // namespace glns
