#ifndef GLNS_CLI_HPP
#define GLNS_CLI_HPP

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glns/codegen.hpp"
#include "glns/engine.hpp"
#include "glns/evolution.hpp"
#include "glns/instance_io.hpp"
#include "glns/sandbox.hpp"

namespace glns::cli {

enum class Layer { Default, File, Environment, Flag };

std::string_view to_string(Layer layer);

/**
 * Layered `section.key` settings. Every key has a built-in default; the config
 * file, GLNS_<SECTION>_<KEY> environment variables and command-line flags
 * override it in that order. Unknown keys are rejected.
 */
class Settings {
public:
    static Settings defaults();

    /// INI syntax: `[section]` headers and `key = value` lines, `#` or `;` comments.
    void merge_file(const std::filesystem::path& path);
    void merge_text(const std::string& text, Layer layer = Layer::File);
    /// `lookup` maps a variable name to its value; defaults to getenv.
    void merge_environment(const std::function<std::optional<std::string>(const std::string&)>& lookup = {});
    void set(const std::string& key, const std::string& value, Layer layer = Layer::Flag);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::string& get(const std::string& key) const;
    Layer layer(const std::string& key) const;
    int get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::string> get_list(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key) const;

    /// Re-readable INI echo; a comment above each key names its layer. Secrets are masked.
    std::string effective_ini() const;

    static std::string env_name(const std::string& key);

private:
    struct Entry {
        std::string value;
        Layer layer = Layer::Default;
    };
    std::map<std::string, Entry> values_;
};

EpisodeConfig episode_config(const Settings& settings, bool test_budget = false);
EvolutionConfig evolution_config(const Settings& settings);
GeneratorConfig generator_config(const Settings& settings, int n, std::uint64_t seed);
RemoteOptions remote_options(const Settings& settings);
SandboxOptions sandbox_options(const Settings& settings);

/// Destroy/repair spec lists for a named method: alns, glns, or `pair` from solve.destroy/solve.repair.
std::pair<std::vector<std::string>, std::vector<std::string>> method_specs(const std::string& method, ProblemKind problem,
                                                                           const Settings& settings);

/// Generated batch: instance i uses seed derive_seed(seed, i).
std::vector<Instance> generated_batch(const Settings& settings, ProblemKind kind, int n, int count, std::uint64_t seed);

/// Instances from files, directories (sorted) or gen manifests.
std::vector<Instance> load_batch(const std::vector<std::string>& paths);

struct MethodResult {
    std::string method;
    std::vector<double> mean_best_cost;  // per instance
    EvaluationResult evaluation;
};

/// Runs `repetitions` independent episodes per instance; episode (b, r) uses derive_seed(seed, b, r).
MethodResult solve_batch(const std::vector<Instance>& batch, const std::string& method, const Portfolio& portfolio,
                         const EpisodeConfig& config, int repetitions, std::uint64_t seed, int jobs);

struct GapRow {
    std::string instance;
    std::string method;
    double cost = 0.0;
    double reference = 0.0;
    double gap = 0.0;
};

struct GapSummary {
    std::string method;
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
};

struct GapReport {
    std::vector<GapRow> rows;
    std::vector<std::string> skipped;  // "instance,method" rows without a reference
    std::vector<GapSummary> summary;   // per method, in order of first appearance
};

/// Results rows are (instance, method, cost). With `rebase`, each instance's reference is the best cost among all methods.
GapReport compute_gaps(const std::vector<GapRow>& results, const ReferenceTable* references, bool rebase);

/// Parses a CSV with `instance` and `best_cost` (or `cost`) columns and an optional `method` column.
/// Repeated (instance, method) rows are averaged.
std::vector<GapRow> read_results_csv(const std::filesystem::path& path);

/// Entry point shared by the executable and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace glns::cli

#endif
