#ifndef GLNS_INSTANCE_IO_HPP
#define GLNS_INSTANCE_IO_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "glns/problem.hpp"

namespace glns {

struct GeneratorConfig {
    ProblemKind kind = ProblemKind::TSP;
    int n = 50;  // cities for TSP, customers for CVRP/OVRP
    std::uint64_t seed = 0;
    int capacity = 50;
    int demand_min = 1;
    int demand_max = 9;
    Point depot_position{0.5, 0.5};
    std::string name;  // generated from kind/n/seed when empty

    void validate() const;
};

/// Uniform instances on the unit square. Deterministic in the config.
Instance generate(const GeneratorConfig& config);

/// TSPLIB95 reader. Supports EUC_2D (nearest-integer rounding) and CEIL_2D.
Instance parse_tsplib(std::string_view text);

/// CVRPLIB .vrp reader (CAPACITY, NODE_COORD_SECTION, DEMAND_SECTION, DEPOT_SECTION).
Instance parse_cvrplib(std::string_view text);

/// Writes an instance in TSPLIB syntax with round-trip exact coordinates. Unrounded metrics are written as EUC_2D.
std::string write_tsplib(const Instance& instance);

nlohmann::json instance_to_json(const Instance& instance);
Instance instance_from_json(const nlohmann::json& doc);

/// Reads .json (native), .tsp, or .vrp based on extension.
Instance load_instance(const std::filesystem::path& path);
void save_instance_json(const Instance& instance, const std::filesystem::path& path);

/// Largest axis-aligned extent of the coordinates.
double scaling_factor(const Instance& instance);

/// Signed relative excess of `obj` over `reference`.
double gap(double obj, double reference);

enum class ReferenceSource { Oracle, File };

struct ReferenceEntry {
    double cost = 0.0;
    ReferenceSource source = ReferenceSource::File;
};

class ReferenceTable {
public:
    void set(const std::string& name, double cost, ReferenceSource source);
    std::optional<ReferenceEntry> find(const std::string& name) const;
    const std::map<std::string, ReferenceEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    /// CSV with header `name,cost,source`.
    static ReferenceTable parse_csv(std::string_view text);
    static ReferenceTable load(const std::filesystem::path& path);
    std::string to_csv() const;

private:
    std::map<std::string, ReferenceEntry> entries_;
};

// ---- exact oracles ---------------------------------------------------------

struct ExactResult {
    double cost = 0.0;
    Solution solution;
};

/// Held-Karp dynamic program over all tours. Practical up to about 16 nodes.
ExactResult held_karp_tsp(const Instance& instance);

/// Optimal CVRP/OVRP by per-subset route optimisation plus set partitioning. Practical up to about 12 customers.
ExactResult exact_vrp(const Instance& instance);

/// Exact optimum when the instance is small enough (TSP n <= 10, CVRP/OVRP n <= 8 customers).
std::optional<double> exact_reference(const Instance& instance);

}  // namespace glns

#endif
