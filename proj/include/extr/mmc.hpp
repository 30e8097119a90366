#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "extr/matrix.hpp"
#include "extr/ot.hpp"

namespace extr {

// Complete directed graph given as a dense arc-cost matrix. The diagonal is
// fixed at 0 and never participates in cycles.
struct WeightedDigraph {
    std::size_t n = 0;
    Matrix costs;  // n x n
};

// Integer-scaled copy of a graph's costs: int_costs = round((c + shift) * scale).
// scale is a power of ten, chosen no larger than 10^digits and small enough
// that the bisection's epsilon steps stay far above the rounding unit of the
// potentials.
struct ScaledInstance {
    std::vector<std::vector<std::int64_t>> int_costs;
    double scale = 1.0;
    double shift = 0.0;
    std::int64_t c_bound = 1;  // 1 + max |int_costs|
};

// Node-split bipartite assignment instance: arc (i, j') costs int_costs[i][j]
// for i != j, and the diagonal arcs (i, i') cost delta.
struct AssignmentInstance {
    const ScaledInstance* base = nullptr;
    double delta = 0.0;
    std::size_t n = 0;
    double cost(std::size_t i, std::size_t j) const {
        return i == j ? delta : static_cast<double>(base->int_costs[i][j]);
    }
};

struct AssignmentState {
    std::vector<double> pot_row;  // pi(i), i in N1
    std::vector<double> pot_col;  // pi(j'), j' in N2
    std::vector<long> match_row;  // row -> col, -1 if unassigned
    std::vector<long> match_col;  // col -> row, -1 if unassigned
    double delta = 0.0;
    double eps = 0.0;
    double lb = 0.0;
    double ub = 0.0;

    bool is_uniform() const {
        for (std::size_t i = 0; i < match_row.size(); ++i) {
            if (match_row[i] != static_cast<long>(i)) return false;
        }
        return true;
    }
    bool is_complete() const {
        for (long m : match_row) {
            if (m < 0) return false;
        }
        return true;
    }
};

struct CycleResult {
    std::vector<std::size_t> cycle;  // closed vertex list (front == back), 0-based
    double mean = 0.0;               // total / length, from the original costs
    double total = 0.0;
    std::size_t length = 0;          // number of arcs
    std::string solver;
    std::size_t iterations = 0;
    double quantization = 0.0;       // mean-error bound introduced by scaling
};

struct HybridConfig {
    int scale_digits = 6;
    // Test hook: called once per bisection iteration, after the assignment
    // solve and before the bracket update.
    struct Step {
        std::size_t iteration;
        double delta, eps, lb, ub;
        std::vector<long> match_row;
        bool uniform;
    };
    std::function<void(const Step&)> observer;
};

// Arc costs <x_i, xt_i - xt_j> from a repair map's anchor pairs. No
// deduplication is applied here; repeated images simply yield zero-cost arcs.
WeightedDigraph build_interp_graph(const RepairMap& rm);

// Exact reference solver (walk-length dynamic program plus tight-arc cycle
// recovery). O(n^3).
CycleResult karp_mcm(const WeightedDigraph& g);

ScaledInstance scale_costs(const WeightedDigraph& g, int digits);

AssignmentInstance node_split(const ScaledInstance& s, double delta);

// One auction pass: an upfront price raise of k*eps on every column, then
// bids of exactly eps. A row stops bidding after L potential raises.
void auction_phase(AssignmentState& state, const AssignmentInstance& inst, int k, long upper_l);

// Completes the matching by successive shortest paths over the quantized
// lengths max(0, rc/eps + 1), updating potentials from the Dijkstra labels.
void ssp_phase(AssignmentState& state, const AssignmentInstance& inst);

// Scaled bisection around the optimal cycle mean; each iteration solves one
// assignment instance with the phases above. Exact on integer-cost graphs.
CycleResult hybrid_mcm(const WeightedDigraph& g, const HybridConfig& cfg = {});

}  // namespace extr
