#ifndef GLNS_OPERATORS_INTERNAL_HPP
#define GLNS_OPERATORS_INTERNAL_HPP

#include <vector>

#include "glns/operators.hpp"

namespace glns::detail {

struct NodeSaving {
    int node;
    double saving;
};

/// Throws OperatorError unless 1 <= count <= elements - 1.
void require_count(const Solution& solution, int count, const char* op);

/// Removal saving of every node, in solution order.
std::vector<NodeSaving> all_savings(const Instance& instance, const Solution& solution);

/// Index into a ranked list: 0 when noise is 0, otherwise floor(u^(1/noise) * size).
std::size_t ranked_pick(std::size_t size, double noise, Rng& rng);

}  // namespace glns::detail

#endif
