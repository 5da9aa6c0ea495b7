#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "glns/cli.hpp"
#include "glns/errors.hpp"

namespace glns::cli {

namespace {

const std::vector<std::pair<std::string, std::string>>& builtin_defaults() {
    static const std::vector<std::pair<std::string, std::string>> table{
        {"run.seed", "0"},
        {"run.jobs", "1"},
        {"run.out", "out"},

        {"episode.iterations", "100"},
        {"episode.test_iterations", "500"},
        {"episode.initial_temperature", "100"},
        {"episode.cooling_rate", "0.97"},
        {"episode.destruction_ratio", "0.2"},
        {"episode.smoothing", "0.5"},
        {"episode.sigma", "1.5,1.2,0.8,0.1"},
        {"episode.call_time_cap_ms", "0"},

        {"evolution.generations", "200"},
        {"evolution.capacity", "5"},
        {"evolution.prune", "2"},
        {"evolution.period", "10"},
        {"evolution.episodes", "10"},
        {"evolution.strategy_weights", "1,1,1"},
        {"evolution.synergy_roulette", "false"},
        {"evolution.filter_size", "20"},
        {"evolution.filter_instances", "3"},
        {"evolution.filter_budget_ms", "250"},
        {"evolution.attempts_per_vacancy", "10"},
        {"evolution.clone_jitter", "0.2"},

        {"instances.kind", "tsp"},
        {"instances.n", "50"},
        {"instances.count", "16"},
        {"instances.capacity", "50"},
        {"instances.demand_min", "1"},
        {"instances.demand_max", "9"},
        {"instances.paths", ""},

        {"solve.method", "glns"},
        {"solve.destroy", ""},
        {"solve.repair", ""},
        {"solve.snapshot", ""},
        {"solve.repetitions", "3"},
        {"solve.references", ""},
        {"solve.oracle", "false"},
        {"solve.require_gap", "false"},
        {"solve.traces", "true"},

        {"bench.methods", "alns,glns"},
        {"bench.sizes", "10,20"},

        {"llm.backend", "mock"},
        {"llm.mock_seed", "0"},
        {"llm.fault_rate", "0"},
        {"llm.endpoint", ""},
        {"llm.key", ""},
        {"llm.model", "deepseek-chat"},
        {"llm.temperature", "1.0"},
        {"llm.max_tokens", "4096"},
        {"llm.retries", "3"},
        {"llm.backoff_ms", "500"},
        {"llm.timeout_s", "120"},

        {"sandbox.enabled", "false"},
        {"sandbox.command", "python3 -m glns_sandbox"},
        {"sandbox.timeout_ms", "2000"},
        {"sandbox.grace_ms", "500"},
    };
    return table;
}

bool is_secret(const std::string& key) { return key == "llm.key"; }

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

}  // namespace

std::string_view to_string(Layer layer) {
    switch (layer) {
        case Layer::Default: return "default";
        case Layer::File: return "file";
        case Layer::Environment: return "env";
        case Layer::Flag: return "flag";
    }
    return "default";
}

Settings Settings::defaults() {
    Settings s;
    for (const auto& [key, value] : builtin_defaults()) s.values_[key] = Entry{value, Layer::Default};
    return s;
}

void Settings::set(const std::string& key, const std::string& value, Layer layer) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = Entry{trim(value), layer};
}

void Settings::merge_text(const std::string& text, Layer layer) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) set(section + "." + key, value.data(), layer);
    }
}

void Settings::merge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    merge_text(text.str(), Layer::File);
}

std::string Settings::env_name(const std::string& key) {
    std::string out = "GLNS_";
    for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

void Settings::merge_environment(const std::function<std::optional<std::string>(const std::string&)>& lookup) {
    for (auto& [key, entry] : values_) {
        const std::string name = env_name(key);
        std::optional<std::string> value;
        if (lookup) {
            value = lookup(name);
        } else if (const char* raw = std::getenv(name.c_str())) {
            value = std::string(raw);
        }
        if (value) entry = Entry{trim(*value), Layer::Environment};
    }
}

const std::string& Settings::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second.value;
}

Layer Settings::layer(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second.layer;
}

int Settings::get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
    }
}

std::uint64_t Settings::get_u64(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
        const std::uint64_t out = std::stoull(v, &used, 0);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" + v + "'");
    }
}

double Settings::get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
    }
}

bool Settings::get_bool(const std::string& key) const {
    std::string v = get(key);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off" || v.empty()) return false;
    throw ConfigError("config key '" + key + "' expects a boolean, got '" + get(key) + "'");
}

std::vector<std::string> Settings::get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream in(get(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> Settings::get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : get_list(key)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' expects a list of numbers, got '" + get(key) + "'");
        }
    }
    return out;
}

std::string Settings::effective_ini() const {
    std::ostringstream out;
    std::string section;
    for (const auto& [key, entry] : values_) {
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out << '\n';
            out << '[' << sec << "]\n";
            section = sec;
        }
        std::string value = entry.value;
        if (is_secret(key) && !value.empty()) value = "***";
        out << "; " << to_string(entry.layer) << '\n' << key.substr(dot + 1) << " = " << value << '\n';
    }
    return out.str();
}

// ---- typed views --------------------------------------------------------------------------------

EpisodeConfig episode_config(const Settings& s, bool test_budget) {
    EpisodeConfig c;
    c.iterations = s.get_int(test_budget ? "episode.test_iterations" : "episode.iterations");
    c.initial_temperature = s.get_double("episode.initial_temperature");
    c.cooling_rate = s.get_double("episode.cooling_rate");
    c.destruction_ratio = s.get_double("episode.destruction_ratio");
    c.smoothing = s.get_double("episode.smoothing");
    const auto sigma = s.get_doubles("episode.sigma");
    if (sigma.size() != 4) throw ConfigError("episode.sigma needs four values");
    std::copy(sigma.begin(), sigma.end(), c.sigma.begin());
    c.call_time_cap_ms = s.get_double("episode.call_time_cap_ms");
    c.validate();
    return c;
}

EvolutionConfig evolution_config(const Settings& s) {
    EvolutionConfig c;
    c.max_generations = s.get_int("evolution.generations");
    c.capacity = s.get_int("evolution.capacity");
    c.prune_count = s.get_int("evolution.prune");
    c.period = s.get_int("evolution.period");
    c.episodes_per_instance = s.get_int("evolution.episodes");
    const auto weights = s.get_doubles("evolution.strategy_weights");
    if (weights.size() != 3) throw ConfigError("evolution.strategy_weights needs three values");
    std::copy(weights.begin(), weights.end(), c.strategy_weights.begin());
    c.synergy_roulette = s.get_bool("evolution.synergy_roulette");
    c.filter_instance_size = s.get_int("evolution.filter_size");
    c.filter_instances = s.get_int("evolution.filter_instances");
    c.filter_budget_ms = s.get_double("evolution.filter_budget_ms");
    c.attempts_per_vacancy = s.get_int("evolution.attempts_per_vacancy");
    c.clone_jitter = s.get_double("evolution.clone_jitter");
    c.episode = episode_config(s, false);
    c.jobs = s.get_int("run.jobs");
    c.validate();
    return c;
}

GeneratorConfig generator_config(const Settings& s, int n, std::uint64_t seed) {
    GeneratorConfig g;
    g.kind = parse_problem_kind(s.get("instances.kind"));
    g.n = n;
    g.seed = seed;
    g.capacity = s.get_int("instances.capacity");
    g.demand_min = s.get_int("instances.demand_min");
    g.demand_max = s.get_int("instances.demand_max");
    return g;
}

RemoteOptions remote_options(const Settings& s) {
    RemoteOptions o;
    o.endpoint = s.get("llm.endpoint");
    o.api_key = s.get("llm.key");
    o.model = s.get("llm.model");
    o.temperature = s.get_double("llm.temperature");
    o.max_tokens = s.get_int("llm.max_tokens");
    o.retries = s.get_int("llm.retries");
    o.backoff_ms = s.get_int("llm.backoff_ms");
    o.timeout_s = s.get_int("llm.timeout_s");
    return o;
}

SandboxOptions sandbox_options(const Settings& s) {
    SandboxOptions o;
    o.command.clear();
    std::istringstream in(s.get("sandbox.command"));
    for (std::string word; in >> word;) o.command.push_back(word);
    if (o.command.empty()) throw ConfigError("sandbox.command is empty");
    o.default_timeout_ms = s.get_int("sandbox.timeout_ms");
    o.grace_ms = s.get_int("sandbox.grace_ms");
    return o;
}

}  // namespace glns::cli
