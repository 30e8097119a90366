#include "extr/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "extr/errors.hpp"

namespace extr {

namespace {

std::vector<std::size_t> all_columns(std::size_t d) {
    std::vector<std::size_t> cols(d);
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    return cols;
}

Matrix select_columns(const Matrix& m, const std::vector<std::size_t>& cols) {
    Matrix out(m.rows(), cols.size());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t jj = 0; jj < cols.size(); ++jj) out(i, jj) = m(i, cols[jj]);
    }
    return out;
}

}  // namespace

CostMatrix cost_matrix(const GroupedData& g, const std::vector<std::size_t>& cols) {
    if (cols.empty()) throw DataError("cost_matrix: empty column subset");
    for (std::size_t c : cols) {
        if (c >= g.group0.cols()) throw DataError("cost_matrix: column index out of range");
    }
    const Matrix a = select_columns(g.group0, cols);
    const Matrix b = select_columns(g.group1, cols);
    CostMatrix cm;
    cm.entries = Matrix(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            cm.entries(i, j) = squared_distance(a.row(i), b.row(j));
        }
    }
    return cm;
}

CostMatrix cost_matrix(const GroupedData& g) {
    return cost_matrix(g, all_columns(g.group0.cols()));
}

namespace detail {

IntegerFlowResult solve_transport_integer(const Matrix& cost,
                                          const std::vector<std::int64_t>& supplies,
                                          const std::vector<std::int64_t>& demands) {
    const std::size_t n0 = cost.rows();
    const std::size_t n1 = cost.cols();
    if (supplies.size() != n0 || demands.size() != n1) {
        throw SolverError("transport: supply/demand sizes do not match the cost matrix");
    }
    const std::int64_t total = std::accumulate(supplies.begin(), supplies.end(), std::int64_t{0});
    if (total != std::accumulate(demands.begin(), demands.end(), std::int64_t{0})) {
        throw SolverError("transport: total supply and demand differ");
    }
    for (std::size_t i = 0; i < n0; ++i) {
        for (std::size_t j = 0; j < n1; ++j) {
            if (!std::isfinite(cost(i, j)) || cost(i, j) < 0.0) {
                throw SolverError("transport: costs must be finite and nonnegative");
            }
        }
    }

    const std::size_t nv = n0 + n1;  // rows first, then columns
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::int64_t> supply = supplies;
    std::vector<std::int64_t> demand = demands;
    std::vector<std::vector<std::int64_t>> flow(n0, std::vector<std::int64_t>(n1, 0));
    std::vector<double> pi(nv, 0.0);  // reduced cost of i->j is c + pi[i] - pi[n0+j]

    std::vector<double> dist(nv);
    std::vector<int> parent(nv);
    std::vector<char> done(nv);

    std::int64_t remaining = total;
    std::size_t guard = 50 * nv + 1000;
    while (remaining > 0) {
        if (guard-- == 0) throw SolverError("transport: augmentation guard tripped");

        std::fill(dist.begin(), dist.end(), inf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        for (std::size_t i = 0; i < n0; ++i) {
            if (supply[i] > 0) dist[i] = 0.0;
        }

        long terminal = -1;
        while (true) {
            // Dense Dijkstra step: finalize the cheapest open node.
            long best = -1;
            double best_d = inf;
            for (std::size_t v = 0; v < nv; ++v) {
                if (!done[v] && dist[v] < best_d) {
                    best_d = dist[v];
                    best = static_cast<long>(v);
                }
            }
            if (best < 0) break;
            done[best] = 1;
            if (best >= static_cast<long>(n0) && demand[best - n0] > 0) {
                terminal = best;
                break;
            }
            if (best < static_cast<long>(n0)) {
                const std::size_t i = static_cast<std::size_t>(best);
                for (std::size_t j = 0; j < n1; ++j) {
                    const std::size_t v = n0 + j;
                    if (done[v]) continue;
                    const double len = std::max(0.0, cost(i, j) + pi[i] - pi[v]);
                    if (dist[i] + len < dist[v]) {
                        dist[v] = dist[i] + len;
                        parent[v] = best;
                    }
                }
            } else {
                const std::size_t j = static_cast<std::size_t>(best) - n0;
                for (std::size_t i = 0; i < n0; ++i) {
                    if (done[i] || flow[i][j] <= 0) continue;
                    const double len = std::max(0.0, -(cost(i, j) + pi[i] - pi[n0 + j]));
                    if (dist[best] + len < dist[i]) {
                        dist[i] = dist[best] + len;
                        parent[i] = best;
                    }
                }
            }
        }
        if (terminal < 0) throw SolverError("transport: no augmenting path (internal)");

        const double reach = dist[terminal];
        for (std::size_t v = 0; v < nv; ++v) pi[v] += std::min(dist[v], reach);

        // Trace back to a supply row and find the bottleneck.
        std::int64_t bottleneck = demand[static_cast<std::size_t>(terminal) - n0];
        for (long v = terminal; parent[v] >= 0; v = parent[v]) {
            const long p = parent[v];
            if (v >= static_cast<long>(n0)) continue;  // backward arc col->row
            const std::size_t i = static_cast<std::size_t>(v);
            const std::size_t j = static_cast<std::size_t>(p) - n0;
            bottleneck = std::min(bottleneck, flow[i][j]);
        }
        {
            long v = terminal;
            while (parent[v] >= 0) v = parent[v];
            bottleneck = std::min(bottleneck, supply[static_cast<std::size_t>(v)]);
        }
        if (bottleneck <= 0) throw SolverError("transport: zero bottleneck (internal)");

        // Apply the augmentation.
        {
            long v = terminal;
            while (parent[v] >= 0) {
                const long p = parent[v];
                if (v >= static_cast<long>(n0)) {
                    flow[static_cast<std::size_t>(p)][static_cast<std::size_t>(v) - n0] += bottleneck;
                } else {
                    flow[static_cast<std::size_t>(v)][static_cast<std::size_t>(p) - n0] -= bottleneck;
                }
                v = p;
            }
            supply[static_cast<std::size_t>(v)] -= bottleneck;
        }
        demand[static_cast<std::size_t>(terminal) - n0] -= bottleneck;
        remaining -= bottleneck;
    }

    // Cancel cycles in the support so the flow is a vertex of the polytope.
    // Support cycles of an optimal flow carry zero net cost, so optimality is
    // unaffected; each pass removes at least one support edge.
    while (true) {
        std::vector<long> via(nv, -1);  // DFS parent
        std::vector<char> color(nv, 0);
        std::vector<std::size_t> cyc;

        auto find_cycle = [&]() -> bool {
            for (std::size_t start = 0; start < nv && cyc.empty(); ++start) {
                if (color[start]) continue;
                std::vector<std::size_t> stack{start};
                via[start] = -2;
                while (!stack.empty() && cyc.empty()) {
                    const std::size_t v = stack.back();
                    stack.pop_back();
                    if (color[v]) continue;
                    color[v] = 1;
                    auto visit = [&](std::size_t w) {
                        if (static_cast<long>(w) == via[v]) return;
                        if (!color[w]) {
                            via[w] = static_cast<long>(v);
                            stack.push_back(w);
                        } else {
                            // Back edge: walk both endpoints up to their meet.
                            std::vector<std::size_t> pv{v}, pw{w};
                            for (long x = via[v]; x >= 0; x = via[static_cast<std::size_t>(x)])
                                pv.push_back(static_cast<std::size_t>(x));
                            for (long x = via[w]; x >= 0; x = via[static_cast<std::size_t>(x)])
                                pw.push_back(static_cast<std::size_t>(x));
                            for (std::size_t a = 0; a < pv.size() && cyc.empty(); ++a) {
                                for (std::size_t b = 0; b < pw.size(); ++b) {
                                    if (pv[a] == pw[b]) {
                                        for (std::size_t x = 0; x <= a; ++x) cyc.push_back(pv[x]);
                                        for (std::size_t x = b; x-- > 0;) cyc.push_back(pw[x]);
                                        break;
                                    }
                                }
                            }
                        }
                    };
                    if (v < n0) {
                        for (std::size_t j = 0; j < n1 && cyc.empty(); ++j) {
                            if (flow[v][j] > 0) visit(n0 + j);
                        }
                    } else {
                        for (std::size_t i = 0; i < n0 && cyc.empty(); ++i) {
                            if (flow[i][v - n0] > 0) visit(i);
                        }
                    }
                }
            }
            return !cyc.empty();
        };

        if (!find_cycle()) break;

        // Alternate +/- around the even-length cycle; kill the minimum edge.
        const std::size_t len = cyc.size();
        std::int64_t delta = std::numeric_limits<std::int64_t>::max();
        for (std::size_t e = 0; e < len; e += 2) {
            const std::size_t a = cyc[e], b = cyc[(e + 1) % len];
            const std::size_t i = std::min(a, b), j = std::max(a, b) - n0;
            delta = std::min(delta, flow[i][j]);
        }
        for (std::size_t e = 0; e < len; ++e) {
            const std::size_t a = cyc[e], b = cyc[(e + 1) % len];
            const std::size_t i = std::min(a, b), j = std::max(a, b) - n0;
            flow[i][j] += (e % 2 == 0) ? -delta : delta;
        }
    }

    IntegerFlowResult res;
    res.flow = std::move(flow);
    res.dual_row.resize(n0);
    res.dual_col.resize(n1);
    for (std::size_t i = 0; i < n0; ++i) res.dual_row[i] = -pi[i];
    for (std::size_t j = 0; j < n1; ++j) res.dual_col[j] = pi[n0 + j];
    return res;
}

}  // namespace detail

TransportPlan solve_transport(const CostMatrix& c) {
    const std::size_t n0 = c.entries.rows();
    const std::size_t n1 = c.entries.cols();
    if (n0 == 0 || n1 == 0) throw SolverError("solve_transport: empty cost matrix");

    // Uniform marginals scaled to integers: row mass 1/n0 becomes n1 units.
    std::vector<std::int64_t> supplies(n0, static_cast<std::int64_t>(n1));
    std::vector<std::int64_t> demands(n1, static_cast<std::int64_t>(n0));
    auto res = detail::solve_transport_integer(c.entries, supplies, demands);

    TransportPlan plan;
    plan.gamma = Matrix(n0, n1);
    const double unit = 1.0 / (static_cast<double>(n0) * static_cast<double>(n1));
    double obj = 0.0;
    for (std::size_t i = 0; i < n0; ++i) {
        for (std::size_t j = 0; j < n1; ++j) {
            const double g = static_cast<double>(res.flow[i][j]) * unit;
            plan.gamma(i, j) = g;
            obj += c.entries(i, j) * g;
        }
    }
    plan.objective = obj;
    // The duals certify per unit of scaled mass already (arc costs were not
    // scaled), so they transfer to the unit-mass problem unchanged.
    plan.dual_row = std::move(res.dual_row);
    plan.dual_col = std::move(res.dual_col);
    return plan;
}

std::pair<RepairMap, RepairMap> barycentric_pairs(const TransportPlan& plan,
                                                  const GroupedData& g,
                                                  std::pair<double, double> weights,
                                                  const std::vector<std::size_t>& cols) {
    const std::size_t n0 = plan.gamma.rows();
    const std::size_t n1 = plan.gamma.cols();
    if (n0 != g.group0.rows() || n1 != g.group1.rows()) {
        throw SolverError("barycentric_pairs: plan does not match group sizes");
    }
    const double pi0 = weights.first, pi1 = weights.second;
    if (pi0 < 0.0 || pi1 < 0.0 || std::fabs(pi0 + pi1 - 1.0) > 1e-12) {
        throw DataError("barycentric weights must be nonnegative and sum to 1");
    }
    const Matrix a = select_columns(g.group0, cols);
    const Matrix b = select_columns(g.group1, cols);
    const std::size_t d = cols.size();

    RepairMap m0, m1;
    m0.group = 0;
    m1.group = 1;
    m0.weights = m1.weights = weights;
    m0.anchors_src = a;
    m1.anchors_src = b;
    m0.anchors_dst = Matrix(n0, d);
    m1.anchors_dst = Matrix(n1, d);

    for (std::size_t i = 0; i < n0; ++i) {
        double mass = 0.0;
        std::vector<double> acc(d, 0.0);
        for (std::size_t j = 0; j < n1; ++j) {
            const double w = plan.gamma(i, j);
            if (w == 0.0) continue;
            mass += w;
            for (std::size_t k = 0; k < d; ++k) acc[k] += w * b(j, k);
        }
        if (mass <= 0.0) throw SolverError("barycentric_pairs: zero row mass");
        for (std::size_t k = 0; k < d; ++k) m0.anchors_dst(i, k) = pi0 * a(i, k) + pi1 * acc[k] / mass;
    }
    for (std::size_t j = 0; j < n1; ++j) {
        double mass = 0.0;
        std::vector<double> acc(d, 0.0);
        for (std::size_t i = 0; i < n0; ++i) {
            const double w = plan.gamma(i, j);
            if (w == 0.0) continue;
            mass += w;
            for (std::size_t k = 0; k < d; ++k) acc[k] += w * a(i, k);
        }
        if (mass <= 0.0) throw SolverError("barycentric_pairs: zero column mass");
        for (std::size_t k = 0; k < d; ++k) m1.anchors_dst(j, k) = pi1 * b(j, k) + pi0 * acc[k] / mass;
    }
    return {m0, m1};
}

TotalRepairResult total_repair(const Dataset& ds, const std::vector<std::size_t>& cols,
                               std::optional<std::pair<double, double>> weights) {
    if (cols.empty()) throw DataError("total_repair: empty column subset");
    const GroupedData g = split_by_group(ds);
    const std::size_t n0 = g.group0.rows();
    const std::size_t n1 = g.group1.rows();
    const std::pair<double, double> w =
        weights.value_or(std::pair<double, double>{static_cast<double>(n0) / static_cast<double>(n0 + n1),
                                                   static_cast<double>(n1) / static_cast<double>(n0 + n1)});
    if (w.first < 0.0 || w.second < 0.0 || std::fabs(w.first + w.second - 1.0) > 1e-12) {
        throw DataError("total_repair: weights must be nonnegative and sum to 1");
    }

    const Matrix a = select_columns(g.group0, cols);
    const Matrix b = select_columns(g.group1, cols);

    // Collapse duplicate points (on the selected columns) so equal sources are
    // guaranteed equal images.
    auto collapse = [](const Matrix& m, std::vector<std::size_t>& owner) {
        std::map<std::vector<double>, std::size_t> seen;
        std::vector<std::size_t> reps;
        owner.resize(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            std::vector<double> key(m.row(i).begin(), m.row(i).end());
            auto [it, inserted] = seen.emplace(std::move(key), reps.size());
            if (inserted) reps.push_back(i);
            owner[i] = it->second;
        }
        Matrix uniq(reps.size(), m.cols());
        for (std::size_t u = 0; u < reps.size(); ++u) {
            for (std::size_t k = 0; k < m.cols(); ++k) uniq(u, k) = m(reps[u], k);
        }
        return uniq;
    };

    std::vector<std::size_t> owner0, owner1;
    const Matrix u0 = collapse(a, owner0);
    const Matrix u1 = collapse(b, owner1);

    std::vector<std::int64_t> mult0(u0.rows(), 0), mult1(u1.rows(), 0);
    for (std::size_t i = 0; i < n0; ++i) ++mult0[owner0[i]];
    for (std::size_t j = 0; j < n1; ++j) ++mult1[owner1[j]];

    Matrix cost(u0.rows(), u1.rows());
    for (std::size_t i = 0; i < u0.rows(); ++i) {
        for (std::size_t j = 0; j < u1.rows(); ++j) {
            cost(i, j) = squared_distance(u0.row(i), u1.row(j));
        }
    }
    std::vector<std::int64_t> supplies(u0.rows()), demands(u1.rows());
    for (std::size_t i = 0; i < u0.rows(); ++i) supplies[i] = mult0[i] * static_cast<std::int64_t>(n1);
    for (std::size_t j = 0; j < u1.rows(); ++j) demands[j] = mult1[j] * static_cast<std::int64_t>(n0);

    const auto res = detail::solve_transport_integer(cost, supplies, demands);
    const std::size_t d = cols.size();

    // Barycentric images of the unique points.
    Matrix img0(u0.rows(), d), img1(u1.rows(), d);
    for (std::size_t i = 0; i < u0.rows(); ++i) {
        std::int64_t mass = 0;
        std::vector<double> acc(d, 0.0);
        for (std::size_t j = 0; j < u1.rows(); ++j) {
            const std::int64_t f = res.flow[i][j];
            if (f == 0) continue;
            mass += f;
            for (std::size_t k = 0; k < d; ++k) acc[k] += static_cast<double>(f) * u1(j, k);
        }
        for (std::size_t k = 0; k < d; ++k) {
            img0(i, k) = w.first * u0(i, k) + w.second * acc[k] / static_cast<double>(mass);
        }
    }
    for (std::size_t j = 0; j < u1.rows(); ++j) {
        std::int64_t mass = 0;
        std::vector<double> acc(d, 0.0);
        for (std::size_t i = 0; i < u0.rows(); ++i) {
            const std::int64_t f = res.flow[i][j];
            if (f == 0) continue;
            mass += f;
            for (std::size_t k = 0; k < d; ++k) acc[k] += static_cast<double>(f) * u0(i, k);
        }
        for (std::size_t k = 0; k < d; ++k) {
            img1(j, k) = w.second * u1(j, k) + w.first * acc[k] / static_cast<double>(mass);
        }
    }

    TotalRepairResult out;
    out.repaired = ds;
    out.map0.group = 0;
    out.map1.group = 1;
    out.map0.weights = out.map1.weights = w;
    out.map0.anchors_src = a;
    out.map1.anchors_src = b;
    out.map0.anchors_dst = Matrix(n0, d);
    out.map1.anchors_dst = Matrix(n1, d);

    for (std::size_t r = 0; r < n0; ++r) {
        const std::size_t u = owner0[r];
        for (std::size_t k = 0; k < d; ++k) {
            out.map0.anchors_dst(r, k) = img0(u, k);
            out.repaired.features(g.row_index0[r], cols[k]) = img0(u, k);
        }
    }
    for (std::size_t r = 0; r < n1; ++r) {
        const std::size_t u = owner1[r];
        for (std::size_t k = 0; k < d; ++k) {
            out.map1.anchors_dst(r, k) = img1(u, k);
            out.repaired.features(g.row_index1[r], cols[k]) = img1(u, k);
        }
    }
    return out;
}

}  // namespace extr
