#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "extr/dataset.hpp"
#include "extr/matrix.hpp"

namespace extr {

// Squared Euclidean distances between the two group samples, restricted to a
// column subset.
struct CostMatrix {
    Matrix entries;  // n0 x n1
};

// Coupling between the two empirical measures with uniform marginals
// 1/n0 (rows) and 1/n1 (columns). Solved exactly on integer masses, so the
// support is a vertex solution (at most n0+n1-1 positive entries) and the
// duals certify optimality: u_i + v_j <= c_ij with equality on the support.
struct TransportPlan {
    Matrix gamma;                  // n0 x n1
    std::vector<double> dual_row;  // u, size n0
    std::vector<double> dual_col;  // v, size n1
    double objective = 0.0;        // sum c_ij * gamma_ij (squared 2-Wasserstein)
};

// Pairs (x_i, repaired x_i) for one group; anchors live in the repaired
// column subspace.
struct RepairMap {
    int group = 0;
    Matrix anchors_src;                  // n_s x d
    Matrix anchors_dst;                  // n_s x d
    std::pair<double, double> weights{0.5, 0.5};  // (pi0, pi1), sum 1
};

struct TotalRepairResult {
    Dataset repaired;
    RepairMap map0;
    RepairMap map1;
};

CostMatrix cost_matrix(const GroupedData& g, const std::vector<std::size_t>& cols);
CostMatrix cost_matrix(const GroupedData& g);  // all columns

TransportPlan solve_transport(const CostMatrix& c);

// Barycentric projection of the coupled barycenter atoms: one target per
// source point on each side.
std::pair<RepairMap, RepairMap> barycentric_pairs(const TransportPlan& plan,
                                                  const GroupedData& g,
                                                  std::pair<double, double> weights,
                                                  const std::vector<std::size_t>& cols);

// Replaces the selected columns of every row by its group's barycentric
// image; other columns are untouched. Default weights are the empirical
// group proportions (n0/n, n1/n). Duplicate source rows (on the selected
// columns) are collapsed before the solve and always map to one image.
TotalRepairResult total_repair(const Dataset& ds, const std::vector<std::size_t>& cols,
                               std::optional<std::pair<double, double>> weights = std::nullopt);

namespace detail {
// Exact min-cost transportation on integer supplies/demands (successive
// shortest paths with node potentials, then support cycles cancelled so the
// flow is a vertex). Exposed for tests.
struct IntegerFlowResult {
    std::vector<std::vector<std::int64_t>> flow;  // n0 x n1
    std::vector<double> dual_row;                 // u
    std::vector<double> dual_col;                 // v
};
IntegerFlowResult solve_transport_integer(const Matrix& cost,
                                          const std::vector<std::int64_t>& supplies,
                                          const std::vector<std::int64_t>& demands);
}  // namespace detail

}  // namespace extr
