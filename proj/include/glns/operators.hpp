#ifndef GLNS_OPERATORS_HPP
#define GLNS_OPERATORS_HPP

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "glns/problem.hpp"
#include "glns/rng.hpp"

namespace glns {

enum class OperatorKind { Destroy, Repair };

std::string_view to_string(OperatorKind kind);
OperatorKind parse_operator_kind(std::string_view text);

using ParamMap = std::map<std::string, double>;

struct DestroyOutcome {
    std::vector<int> removed;
    Solution partial;
};

/// Number of elements a destroy step removes: max(1, round(epsilon * n)), capped at n - 1.
int destroy_count(int n, double epsilon);

/// Checks that `outcome` is a disjoint split of `original`; returns an empty string when it is.
std::string check_conservation(const Solution& original, const DestroyOutcome& outcome);

// ---- uniform operator interfaces --------------------------------------------

class DestroyOperator {
public:
    virtual ~DestroyOperator() = default;
    virtual DestroyOutcome apply(const Solution& solution, int count, const Instance& instance, Rng& rng) const = 0;
};

class RepairOperator {
public:
    virtual ~RepairOperator() = default;
    virtual Solution apply(const Solution& partial, const std::vector<int>& removed, const Instance& instance,
                           Rng& rng) const = 0;
};

// ---- neighbourhood helpers shared by the operators ----------------------------

/// Marginal cost of taking `node` out of its position, given its neighbours in the solution.
double removal_saving(const Instance& instance, const Solution& solution, int node);

/// Removes `nodes` from a solution; emptied routes are dropped.
Solution remove_nodes(const Solution& solution, const std::vector<int>& nodes);

/// One insertion slot. For tours, `position` is the edge index (between tour[p] and tour[p+1]).
/// For routes, `position` is the index the node takes inside route `route`.
struct InsertionSlot {
    int route = 0;
    int position = 0;
    double delta = 0.0;
};

/// Every capacity-feasible slot for `node`, ordered by (route, position).
std::vector<InsertionSlot> insertion_slots(const Instance& instance, const Solution& partial, int node);
void insert_at(Solution& partial, const InsertionSlot& slot, int node);
/// Appends a fresh single-customer route.
void open_route(Solution& partial, int node);

// ---- classical portfolio --------------------------------------------------------

struct RandomRemovalOptions {
    double bias = 0.0;  // > 0 tilts selection toward nodes with large removal saving
};
DestroyOutcome random_removal(const Solution& solution, int count, const Instance& instance, Rng& rng,
                              const RandomRemovalOptions& options = {});

struct WorstRemovalOptions {
    double noise = 0.0;  // 0 removes the exact worst node each step
};
DestroyOutcome worst_removal(const Solution& solution, int count, const Instance& instance, Rng& rng,
                             const WorstRemovalOptions& options = {});

struct RelatedRemovalOptions {
    double noise = 0.0;  // 0 removes the exact nearest neighbours of the seed
};
DestroyOutcome related_removal(const Solution& solution, int count, const Instance& instance, Rng& rng,
                               const RelatedRemovalOptions& options = {});

struct GreedyInsertionOptions {
    double noise = 0.0;  // relative perturbation of insertion deltas
};
Solution greedy_insertion(const Solution& partial, const std::vector<int>& removed, const Instance& instance, Rng& rng,
                          const GreedyInsertionOptions& options = {});

struct RegretInsertionOptions {
    int k = 2;
    double noise = 0.0;
};
Solution regret_k_insertion(const Solution& partial, const std::vector<int>& removed, const Instance& instance, Rng& rng,
                            const RegretInsertionOptions& options = {});

// ---- adaptive continuous-segment removal (TSP) --------------------------------------

struct AcsrOptions {
    double greedy_prob = 0.7;     // chance of taking the best-scoring window
    double moderate_ratio = 0.4;  // count <= ratio * n selects the single-segment regime
    double segment_frac = 0.3;    // aggressive regime segment cap as a fraction of count
};

/// Window score for a contiguous circular segment of `count` nodes starting at `start`:
/// its internal edges plus the two boundary edges.
double acsr_window_score(const Instance& instance, const std::vector<int>& tour, int start, int count);
DestroyOutcome acsr_destroy(const Solution& solution, int count, const Instance& instance, Rng& rng,
                            const AcsrOptions& options = {});

// ---- diversity-adaptive probabilistic insertion (TSP) -------------------------------

struct DapiOptions {
    double random_base = 0.1;
    double random_scale = 0.4;
    double softmax_prob = 0.8;
    double temp_base = 3.0;
    double temp_scale = 2.0;
    double two_opt_base = 0.2;
    double two_opt_scale = 0.5;
};

struct DapiSchedule {
    double diversity = 0.0;
    double random_threshold = 0.0;
    double temperature = 0.0;
    double two_opt_prob = 0.0;
};

/// Mean circular edge length over the largest matrix entry, capped at 1 (0.5 for paths of <= 1 node).
double dapi_diversity(const Instance& instance, const std::vector<int>& path);
DapiSchedule dapi_schedule(double diversity, const DapiOptions& options = {});
Solution dapi_repair(const Solution& partial, const std::vector<int>& removed, const Instance& instance, Rng& rng,
                     const DapiOptions& options = {});

/// One first-improvement 2-opt sweep over the tour; returns true if any move was applied.
bool two_opt_sweep(const Instance& instance, std::vector<int>& tour);

// ---- progressive stochastic-worst removal (CVRP) -------------------------------------

struct PswrOptions {
    int top_k = 3;
    double ratio_floor = 0.0;  // lower bound on the greedy ratio; 1 forces the greedy branch
};
DestroyOutcome pswr_destroy(const Solution& solution, int count, const Instance& instance, Rng& rng,
                            const PswrOptions& options = {});

// ---- adaptive context-aware greedy insertion (CVRP) -------------------------------------

struct AcagiOptions {
    double difficulty_decay = 0.8;
    double difficulty_frac = 0.3;
    double load_penalty = 0.15;
    double length_penalty = 0.05;
    double length_divisor = 20.0;
    double explore_hard = 0.4;
    double explore_easy = 0.2;
    double noise = 0.1;
    double greedy_base = 0.8;
    double greedy_slope = 0.2;
    bool consolidate = true;
    int consolidate_max_customers = 15;  // merged routes must hold fewer customers than this
};
Solution acagi_repair(const Solution& partial, const std::vector<int>& removed, const Instance& instance, Rng& rng,
                      const AcagiOptions& options = {});

// ---- templates: named, parameterised built-ins -------------------------------------------

struct ParamSpec {
    std::string name;
    double default_value = 0.0;
    double min = 0.0;
    double max = 1.0;
    bool integer = false;
};

struct OperatorTemplate {
    std::string name;
    OperatorKind kind = OperatorKind::Destroy;
    std::vector<ProblemKind> problems;
    std::vector<ParamSpec> params;
    std::string summary;
    bool diagnostic = false;  // deliberately faulty, used to exercise the admission filter

    bool supports(ProblemKind problem) const;
    ParamMap defaults() const;
    /// Fills missing parameters with defaults and clamps values into range; unknown keys are rejected.
    ParamMap normalise(const ParamMap& params) const;
};

const std::vector<OperatorTemplate>& operator_templates();
const OperatorTemplate& find_template(std::string_view name);
bool has_template(std::string_view name);

std::shared_ptr<const DestroyOperator> make_destroy(std::string_view name, const ParamMap& params = {});
std::shared_ptr<const RepairOperator> make_repair(std::string_view name, const ParamMap& params = {});

/// Parses `name` or `name:key=value,key=value`.
std::pair<std::string, ParamMap> parse_operator_spec(std::string_view text);

// ---- operator records ----------------------------------------------------------------------

enum class Provenance { Builtin, Generated };
std::string_view to_string(Provenance provenance);

/**
 * An operator as it lives in a population. Native records name a template and
 * its parameters and run in-process. Records without a template carry external
 * source that only the sandbox can execute.
 */
struct OperatorRecord {
    std::string id;
    OperatorKind kind = OperatorKind::Destroy;
    Provenance provenance = Provenance::Builtin;
    std::string description;
    std::string template_name;
    ParamMap params;
    std::string source;

    bool native() const { return !template_name.empty(); }
};

OperatorRecord builtin_record(std::string id, std::string_view template_name, const ParamMap& params = {});

nlohmann::json record_to_json(const OperatorRecord& record);
OperatorRecord record_from_json(const nlohmann::json& doc);

/// Python source for a template, headed by a machine-readable template directive line.
std::string template_source(std::string_view template_name, const ParamMap& params, ProblemKind problem);

struct TemplateDirective {
    std::string name;
    ParamMap params;
};
/// Finds a `# glns-template: <name> <json>` line naming a known template.
std::optional<TemplateDirective> parse_template_directive(std::string_view source);

}  // namespace glns

#endif
