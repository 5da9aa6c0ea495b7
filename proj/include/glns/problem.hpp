#ifndef GLNS_PROBLEM_HPP
#define GLNS_PROBLEM_HPP

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "glns/errors.hpp"

namespace glns {

enum class ProblemKind { TSP, CVRP, OVRP };

std::string_view to_string(ProblemKind kind);
ProblemKind parse_problem_kind(std::string_view text);
inline bool is_routing(ProblemKind kind) { return kind != ProblemKind::TSP; }

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

/// How pairwise distances are derived from coordinates.
enum class DistanceRule {
    Euclidean,          // exact real-valued distance
    RoundedEuclidean,   // TSPLIB EUC_2D: nearest integer
    CeilEuclidean,      // TSPLIB CEIL_2D
};

std::string_view to_string(DistanceRule rule);
DistanceRule parse_distance_rule(std::string_view text);

/**
 * One routing case. The distance matrix is computed once at construction and
 * the object is immutable afterwards, so it can be shared across threads.
 *
 * For TSP the demand list is empty and there is no depot. For CVRP/OVRP node
 * `depot()` is the depot and every other node is a customer.
 */
class Instance {
public:
    struct Spec {
        ProblemKind kind = ProblemKind::TSP;
        std::string name;
        std::vector<Point> coords;
        std::vector<int> demands;
        int capacity = 0;
        int depot = 0;
        DistanceRule distance_rule = DistanceRule::Euclidean;
    };

    explicit Instance(Spec spec);

    ProblemKind kind() const { return spec_.kind; }
    const std::string& name() const { return spec_.name; }
    int size() const { return static_cast<int>(spec_.coords.size()); }
    const std::vector<Point>& coords() const { return spec_.coords; }
    const std::vector<int>& demands() const { return spec_.demands; }
    int demand(int node) const { return spec_.demands[static_cast<std::size_t>(node)]; }
    int capacity() const { return spec_.capacity; }
    int depot() const { return spec_.depot; }
    DistanceRule distance_rule() const { return spec_.distance_rule; }
    const Spec& spec() const { return spec_; }

    double dist(int i, int j) const {
        return dist_[static_cast<std::size_t>(i) * coords_count_ + static_cast<std::size_t>(j)];
    }
    double max_distance() const { return max_dist_; }

    /// Nodes that appear in solutions: every node for TSP, every non-depot node otherwise.
    const std::vector<int>& elements() const { return elements_; }

private:
    Spec spec_;
    std::size_t coords_count_ = 0;
    std::vector<double> dist_;
    std::vector<int> elements_;
    double max_dist_ = 0.0;
};

struct TourSolution {
    std::vector<int> tour;
    bool operator==(const TourSolution&) const = default;
};

/// Routes list customers only; the depot is implicit at both ends.
struct RouteSolution {
    std::vector<std::vector<int>> routes;
    bool operator==(const RouteSolution&) const = default;
};

using Solution = std::variant<TourSolution, RouteSolution>;

/// Total number of nodes carried by a (possibly partial) solution.
std::size_t element_count(const Solution& solution);
std::vector<int> flatten(const Solution& solution);

struct Violation {
    enum class Type { Coverage, Capacity, Structure };
    Type type = Type::Coverage;
    int node = -1;
    int route = -1;
    int load = 0;
    std::string message;
};

struct FeasibilityReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string summary() const;
};

class InfeasibleSolutionError : public Error {
public:
    explicit InfeasibleSolutionError(FeasibilityReport report);
    const FeasibilityReport& report() const { return report_; }

private:
    FeasibilityReport report_;
};

FeasibilityReport check_feasible(const Instance& instance, const Solution& solution);

double tsp_cost(const Instance& instance, const TourSolution& tour);
double cvrp_cost(const Instance& instance, const RouteSolution& solution);
double ovrp_cost(const Instance& instance, const RouteSolution& solution);

/// Cost under the instance's own objective; validates the solution first.
double cost(const Instance& instance, const Solution& solution);

/// Same arc sums without validation, for hot loops over solutions already known to be valid.
double route_length(const Instance& instance, const std::vector<int>& route, bool open);
double tour_length(const Instance& instance, const std::vector<int>& tour);
double unchecked_cost(const Instance& instance, const Solution& solution);

int route_load(const Instance& instance, const std::vector<int>& route);

}  // namespace glns

#endif
