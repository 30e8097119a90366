#include "extr/mmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "extr/errors.hpp"

namespace extr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_graph(const WeightedDigraph& g) {
    if (g.n < 2 || g.costs.rows() != g.n || g.costs.cols() != g.n) {
        throw SolverError("mcm: graph needs n >= 2 and a square cost matrix");
    }
    for (std::size_t i = 0; i < g.n; ++i) {
        for (std::size_t j = 0; j < g.n; ++j) {
            if (i == j) continue;
            if (!std::isfinite(g.costs(i, j))) throw SolverError("mcm: non-finite arc cost");
        }
    }
}

// Canonical closed form: rotate so the smallest vertex leads, append it again.
std::vector<std::size_t> canonical_cycle(std::vector<std::size_t> verts) {
    const auto it = std::min_element(verts.begin(), verts.end());
    std::rotate(verts.begin(), it, verts.end());
    verts.push_back(verts.front());
    return verts;
}

CycleResult finish_result(const WeightedDigraph& g, std::vector<std::size_t> verts,
                          std::string solver, std::size_t iterations, double quantization) {
    CycleResult r;
    r.cycle = canonical_cycle(std::move(verts));
    r.length = r.cycle.size() - 1;
    double total = 0.0;
    for (std::size_t e = 0; e < r.length; ++e) total += g.costs(r.cycle[e], r.cycle[e + 1]);
    r.total = total;
    r.mean = total / static_cast<double>(r.length);
    r.solver = std::move(solver);
    r.iterations = iterations;
    r.quantization = quantization;
    return r;
}

// Finds a directed cycle among the arcs flagged in `tight` (iterative DFS).
std::vector<std::size_t> find_cycle_in_subgraph(std::size_t n,
                                                const std::vector<std::vector<char>>& tight) {
    std::vector<int> color(n, 0);  // 0 white, 1 on stack, 2 done
    std::vector<std::size_t> next_arc(n, 0);
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < n; ++s) {
        if (color[s] != 0) continue;
        stack.assign(1, s);
        color[s] = 1;
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            bool advanced = false;
            for (std::size_t& j = next_arc[v]; j < n; ++j) {
                if (j == v || !tight[v][j]) continue;
                if (color[j] == 1) {
                    // Cycle: suffix of the stack from j to v.
                    auto it = std::find(stack.begin(), stack.end(), j);
                    return {it, stack.end()};
                }
                if (color[j] == 0) {
                    color[j] = 1;
                    stack.push_back(j);
                    ++j;
                    advanced = true;
                    break;
                }
            }
            if (!advanced) {
                color[v] = 2;
                stack.pop_back();
            }
        }
    }
    return {};
}

}  // namespace

WeightedDigraph build_interp_graph(const RepairMap& rm) {
    const std::size_t n = rm.anchors_src.rows();
    if (n < 2) throw SolverError("interp graph: need at least 2 anchors");
    if (rm.anchors_dst.rows() != n || rm.anchors_dst.cols() != rm.anchors_src.cols()) {
        throw SolverError("interp graph: anchor matrices do not match");
    }
    WeightedDigraph g;
    g.n = n;
    g.costs = Matrix(n, n, 0.0);
    const std::size_t d = rm.anchors_src.cols();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                s += rm.anchors_src(i, k) * (rm.anchors_dst(i, k) - rm.anchors_dst(j, k));
            }
            g.costs(i, j) = s;
        }
    }
    return g;
}

CycleResult karp_mcm(const WeightedDigraph& g) {
    validate_graph(g);
    const std::size_t n = g.n;

    // D[k][v]: cheapest walk of exactly k arcs from vertex 0 to v.
    std::vector<std::vector<double>> dw(n + 1, std::vector<double>(n, kInf));
    dw[0][0] = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        for (std::size_t v = 0; v < n; ++v) {
            double best = kInf;
            for (std::size_t u = 0; u < n; ++u) {
                if (u == v || dw[k - 1][u] == kInf) continue;
                best = std::min(best, dw[k - 1][u] + g.costs(u, v));
            }
            dw[k][v] = best;
        }
    }

    // min over v of max over k of (D[n][v]-D[k][v])/(n-k); ratios are compared
    // by cross-multiplication so integer-valued inputs stay exact.
    double best_num = 0.0;
    std::size_t best_den = 1;
    bool have = false;
    for (std::size_t v = 0; v < n; ++v) {
        if (dw[n][v] == kInf) continue;
        double num = 0.0;
        std::size_t den = 1;
        bool inner = false;
        for (std::size_t k = 0; k < n; ++k) {
            if (dw[k][v] == kInf) continue;
            const double cand_num = dw[n][v] - dw[k][v];
            const std::size_t cand_den = n - k;
            if (!inner || cand_num * static_cast<double>(den) >
                              num * static_cast<double>(cand_den)) {
                num = cand_num;
                den = cand_den;
                inner = true;
            }
        }
        if (!inner) continue;
        if (!have || num * static_cast<double>(best_den) < best_num * static_cast<double>(den)) {
            best_num = num;
            best_den = den;
            have = true;
        }
    }
    if (!have) throw SolverError("karp: no cycle found (internal)");

    // Recover a cycle: under w = den*c - num the optimal cycle mean is 0, so
    // after value iteration every zero-mean cycle is made of tight arcs.
    std::vector<double> dist(n, 0.0);
    double wmax = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) wmax = std::max(wmax, std::fabs(static_cast<double>(best_den) * g.costs(i, j) - best_num));
        }
    }
    const double tol = 1e-12 * wmax * static_cast<double>(n);
    for (std::size_t round = 0; round < n + 1; ++round) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double w = static_cast<double>(best_den) * g.costs(i, j) - best_num;
                if (dist[i] + w < dist[j] - tol) {
                    dist[j] = dist[i] + w;
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }
    std::vector<std::vector<char>> tight(n, std::vector<char>(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double w = static_cast<double>(best_den) * g.costs(i, j) - best_num;
            tight[i][j] = (dist[i] + w <= dist[j] + tol) ? 1 : 0;
        }
    }
    std::vector<std::size_t> cyc = find_cycle_in_subgraph(n, tight);
    if (cyc.empty()) throw SolverError("karp: tight subgraph has no cycle (internal)");
    return finish_result(g, std::move(cyc), "karp", n, 0.0);
}

ScaledInstance scale_costs(const WeightedDigraph& g, int digits) {
    validate_graph(g);
    const std::size_t n = g.n;
    double lo = 0.0, maxabs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            lo = std::min(lo, g.costs(i, j));
            maxabs = std::max(maxabs, std::fabs(g.costs(i, j)));
        }
    }
    ScaledInstance s;
    s.shift = -lo;  // lo <= 0, so shifted costs are nonnegative

    // Largest power of ten <= 10^digits keeping the integer range small enough
    // that the bisection's potentials move in steps far above their rounding
    // unit (c_bound capped near 2^40 / n^2).
    const double cap = std::ldexp(1.0, 40) / (static_cast<double>(n) * static_cast<double>(n));
    const double span = maxabs + s.shift;
    double scale = std::pow(10.0, digits);
    while (span * scale > cap && scale > 1e-12) scale /= 10.0;
    s.scale = scale;

    s.int_costs.assign(n, std::vector<std::int64_t>(n, 0));
    std::int64_t imax = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const std::int64_t v = std::llround((g.costs(i, j) + s.shift) * scale);
            s.int_costs[i][j] = v;
            imax = std::max(imax, std::llabs(v));
        }
    }
    s.c_bound = 1 + imax;
    return s;
}

AssignmentInstance node_split(const ScaledInstance& s, double delta) {
    AssignmentInstance inst;
    inst.base = &s;
    inst.delta = delta;
    inst.n = s.int_costs.size();
    return inst;
}

void auction_phase(AssignmentState& state, const AssignmentInstance& inst, int k, long upper_l) {
    const std::size_t n = inst.n;
    const double eps = state.eps;
    if (!(eps > 0.0)) throw SolverError("auction: eps must be positive");

    for (std::size_t j = 0; j < n; ++j) state.pot_col[j] += static_cast<double>(k) * eps;

    std::vector<long> raises(n, 0);
    while (true) {
        long row = -1;
        for (std::size_t i = 0; i < n; ++i) {
            if (state.match_row[i] < 0 && raises[i] < upper_l) {
                row = static_cast<long>(i);
                break;
            }
        }
        if (row < 0) break;
        const std::size_t i = static_cast<std::size_t>(row);

        long target = -1;
        for (std::size_t j = 0; j < n; ++j) {
            const double rc = inst.cost(i, j) - state.pot_row[i] + state.pot_col[j];
            if (rc <= 0.0) {
                target = static_cast<long>(j);
                break;
            }
        }
        if (target >= 0) {
            const std::size_t j = static_cast<std::size_t>(target);
            state.pot_col[j] += eps;
            if (state.match_col[j] >= 0) state.match_row[state.match_col[j]] = -1;
            state.match_col[j] = row;
            state.match_row[i] = target;
        } else {
            state.pot_row[i] += eps;
        }
        ++raises[i];
    }
}

void ssp_phase(AssignmentState& state, const AssignmentInstance& inst) {
    const std::size_t n = inst.n;
    const double eps = state.eps;
    if (!(eps > 0.0)) throw SolverError("ssp: eps must be positive");

    std::vector<double> dist(2 * n);
    std::vector<long> parent(2 * n);
    std::vector<char> done(2 * n);

    while (true) {
        long source = -1;
        for (std::size_t i = 0; i < n; ++i) {
            if (state.match_row[i] < 0) {
                source = static_cast<long>(i);
                break;
            }
        }
        if (source < 0) break;

        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        dist[static_cast<std::size_t>(source)] = 0.0;

        long terminal = -1;
        double reach = 0.0;
        while (true) {
            long best = -1;
            double bd = kInf;
            for (std::size_t v = 0; v < 2 * n; ++v) {
                if (!done[v] && dist[v] < bd) {
                    bd = dist[v];
                    best = static_cast<long>(v);
                }
            }
            if (best < 0) break;
            done[best] = 1;
            if (best >= static_cast<long>(n) && state.match_col[best - n] < 0) {
                terminal = best;
                reach = bd;
                break;
            }
            if (best < static_cast<long>(n)) {
                const std::size_t i = static_cast<std::size_t>(best);
                for (std::size_t j = 0; j < n; ++j) {
                    const std::size_t v = n + j;
                    if (done[v]) continue;
                    const double rc = inst.cost(i, j) - state.pot_row[i] + state.pot_col[j];
                    const double len = std::max(0.0, rc / eps + 1.0);
                    if (dist[i] + len < dist[v]) {
                        dist[v] = dist[i] + len;
                        parent[v] = best;
                    }
                }
            } else {
                const std::size_t j = static_cast<std::size_t>(best) - n;
                const long owner = state.match_col[j];
                if (owner >= 0 && !done[owner]) {
                    const std::size_t i = static_cast<std::size_t>(owner);
                    const double rc = inst.cost(i, j) - state.pot_row[i] + state.pot_col[j];
                    const double len = std::max(0.0, -rc / eps + 1.0);
                    if (dist[best] + len < dist[i]) {
                        dist[i] = dist[best] + len;
                        parent[i] = best;
                    }
                }
            }
        }
        if (terminal < 0) throw SolverError("ssp: no augmenting path (internal)");

        for (std::size_t v = 0; v < 2 * n; ++v) {
            if (done[v] && dist[v] < reach) {
                const double bump = eps * (reach - dist[v]);
                if (v < n) state.pot_row[v] += bump;
                else state.pot_col[v - n] += bump;
            }
        }

        // Walk the alternating path back from the free column.
        long v = terminal;
        while (true) {
            const long i = parent[v];
            const long old = state.match_row[static_cast<std::size_t>(i)];
            state.match_row[static_cast<std::size_t>(i)] = v - static_cast<long>(n);
            state.match_col[static_cast<std::size_t>(v) - n] = i;
            if (i == source) break;
            v = old + static_cast<long>(n);
        }
    }
}

CycleResult hybrid_mcm(const WeightedDigraph& g, const HybridConfig& cfg) {
    validate_graph(g);
    const std::size_t n = g.n;
    const ScaledInstance scaled = scale_costs(g, cfg.scale_digits);
    const double cb = static_cast<double>(scaled.c_bound);

    AssignmentState st;
    st.lb = -cb;
    st.ub = cb;
    st.pot_row.assign(n, -cb / 2.0);
    st.pot_col.assign(n, 0.0);
    st.match_row.assign(n, -1);
    st.match_col.assign(n, -1);

    const double stop = 1.0 / (static_cast<double>(n) * static_cast<double>(n));

    // Best candidate cycle, compared exactly on the scaled integers.
    bool have_best = false;
    std::int64_t best_total = 0;
    std::size_t best_len = 1;
    std::vector<std::size_t> best_cycle;

    auto better = [&](std::int64_t total, std::size_t len) {
        if (!have_best) return true;
        return static_cast<__int128>(total) * static_cast<__int128>(best_len) <
               static_cast<__int128>(best_total) * static_cast<__int128>(len);
    };

    std::size_t iter = 0;
    const std::size_t max_iter = 64 + static_cast<std::size_t>(
        std::ceil(std::log(std::max(2.0, 2.0 * cb / stop)) / std::log(4.0 / 3.0)));

    while (st.ub - st.lb >= stop) {
        if (++iter > max_iter) throw SolverError("hybrid mcm: bisection guard tripped");

        st.delta = 0.5 * (st.ub + st.lb);
        st.eps = 0.125 * (st.ub - st.lb);
        const int k = 3;
        const long upper_l = 2 * (k + 1) *
                             static_cast<long>(std::ceil(std::sqrt(static_cast<double>(n))));
        const AssignmentInstance inst = node_split(scaled, st.delta);

        std::fill(st.match_row.begin(), st.match_row.end(), -1);
        std::fill(st.match_col.begin(), st.match_col.end(), -1);
        auction_phase(st, inst, k, upper_l);
        ssp_phase(st, inst);

        const bool uniform = st.is_uniform();
        if (cfg.observer) {
            cfg.observer(HybridConfig::Step{iter, st.delta, st.eps, st.lb, st.ub,
                                            st.match_row, uniform});
        }

        if (uniform) {
            st.lb = st.delta - 2.0 * st.eps;
        } else {
            st.ub = st.delta + 2.0 * st.eps;
            // Non-fixed points of the matching permutation decompose into
            // vertex-disjoint cycles of the original graph.
            std::vector<char> seen(n, 0);
            for (std::size_t s = 0; s < n; ++s) {
                if (seen[s] || st.match_row[s] == static_cast<long>(s)) continue;
                std::vector<std::size_t> verts;
                std::size_t v = s;
                while (!seen[v]) {
                    seen[v] = 1;
                    verts.push_back(v);
                    v = static_cast<std::size_t>(st.match_row[v]);
                }
                std::int64_t total = 0;
                for (std::size_t e = 0; e < verts.size(); ++e) {
                    total += scaled.int_costs[verts[e]][verts[(e + 1) % verts.size()]];
                }
                if (better(total, verts.size())) {
                    have_best = true;
                    best_total = total;
                    best_len = verts.size();
                    best_cycle = verts;
                }
            }
        }
    }

    if (!have_best) {
        // Unreachable for a sound bracket; kept as the documented fallback.
        CycleResult r = karp_mcm(g);
        r.solver = "hybrid(karp-fallback)";
        r.iterations = iter;
        return r;
    }
    return finish_result(g, std::move(best_cycle), "hybrid", iter, 0.5 / scaled.scale);
}

}  // namespace extr
