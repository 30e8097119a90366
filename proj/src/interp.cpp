#include "extr/interp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "extr/csv.hpp"
#include "extr/errors.hpp"
#include "extr/rng.hpp"

namespace extr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::size_t> argmax_set(const InterpolationModel& m, std::span<const double> x,
                                    double& smax) {
    smax = -kInf;
    const std::size_t n = m.n_anchors();
    for (std::size_t j = 0; j < n; ++j) {
        const double s = dot(x, m.anchors_dst.row(j)) - m.psi[j];
        if (s > smax) smax = s;
    }
    const double tol = 1e-12 * (1.0 + std::fabs(smax));
    std::vector<std::size_t> set;
    for (std::size_t j = 0; j < n; ++j) {
        const double s = dot(x, m.anchors_dst.row(j)) - m.psi[j];
        if (s >= smax - tol) set.push_back(j);
    }
    return set;
}

double objective_h(const InterpolationModel& m, std::span<const double> x,
                   const std::vector<double>& u) {
    double smax;
    argmax_set(m, u, smax);
    return smax + squared_distance(u, x) / (2.0 * m.eps0);
}

std::string cycle_to_string(const CycleResult& cr) {
    std::string s;
    for (std::size_t i = 0; i < cr.cycle.size(); ++i) {
        if (i) s += "->";
        s += std::to_string(cr.cycle[i] + 1);
    }
    return s;
}

}  // namespace

std::string to_string(EvalOption o) {
    switch (o) {
        case EvalOption::Step1: return "step1";
        case EvalOption::Regularized: return "regularized";
        case EvalOption::Hybrid: return "hybrid";
    }
    return "?";
}

EvalOption eval_option_from_int(int option) {
    if (option == 1) return EvalOption::Step1;
    if (option == 2) return EvalOption::Regularized;
    if (option == 3) return EvalOption::Hybrid;
    throw DataError("option must be 1, 2 or 3");
}

double score_max(const InterpolationModel& m, std::span<const double> x) {
    double smax;
    argmax_set(m, x, smax);
    return smax;
}

std::vector<double> potentials_from_mcm(const WeightedDigraph& g, double eps_star) {
    const std::size_t n = g.n;
    double wmax = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) wmax = std::max(wmax, std::fabs(g.costs(i, j) - eps_star));
        }
    }
    const double tol = 1e-13 * wmax;

    std::vector<double> dist(n, kInf);
    dist[0] = 0.0;
    for (std::size_t round = 0; round + 1 < n; ++round) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (dist[i] == kInf) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double cand = dist[i] + g.costs(i, j) - eps_star;
                if (cand < dist[j] - tol) {
                    dist[j] = cand;
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dist[i] + g.costs(i, j) - eps_star < dist[j] - tol) {
                throw SolverError("potentials: negative cycle under reduced costs");
            }
        }
    }
    std::vector<double> psi(n);
    for (std::size_t i = 0; i < n; ++i) psi[i] = -dist[i];
    return psi;
}

InterpolationModel fit_interpolation(const RepairMap& rm, EvalOption option,
                                     const FitConfig& cfg) {
    const std::size_t n_all = rm.anchors_src.rows();
    const std::size_t d = rm.anchors_src.cols();
    if (n_all < 2) throw SolverError("fit: need at least 2 anchors");

    // Collapse anchors sharing an image; repeated images would force the
    // smoothing optimum to 0 through zero-cost two-cycles.
    std::map<std::vector<double>, std::size_t> seen;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n_all; ++i) {
        std::vector<double> key(rm.anchors_dst.row(i).begin(), rm.anchors_dst.row(i).end());
        if (seen.emplace(std::move(key), keep.size()).second) keep.push_back(i);
    }
    if (keep.size() < 2) {
        throw SolverError("fit: fewer than 2 distinct anchor images after deduplication");
    }

    RepairMap dd;
    dd.group = rm.group;
    dd.weights = rm.weights;
    dd.anchors_src = Matrix(keep.size(), d);
    dd.anchors_dst = Matrix(keep.size(), d);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        for (std::size_t c = 0; c < d; ++c) {
            dd.anchors_src(k, c) = rm.anchors_src(keep[k], c);
            dd.anchors_dst(k, c) = rm.anchors_dst(keep[k], c);
        }
    }

    const WeightedDigraph g = build_interp_graph(dd);
    HybridConfig hc;
    hc.scale_digits = cfg.scale_digits;
    const CycleResult cr = hybrid_mcm(g, hc);
    if (!(cr.mean > 0.0)) {
        throw SolverError("fit: anchors are not strictly cyclically monotone; cycle " +
                          cycle_to_string(cr) + " has mean " + csv::format_double(cr.mean));
    }

    // Scaling may overshoot the true optimum by the quantization bound; back
    // off just enough for the reduced costs to stay cycle-nonnegative.
    std::vector<double> psi;
    double eps_eff = cr.mean;
    const double step = std::max(cr.quantization, 1e-12 * cr.mean);
    bool ok = false;
    for (int attempt = 0; attempt < 6 && !ok; ++attempt) {
        try {
            psi = potentials_from_mcm(g, eps_eff);
            ok = true;
        } catch (const SolverError&) {
            eps_eff -= step;
            if (!(eps_eff > 0.0)) break;
        }
    }
    if (!ok) throw SolverError("fit: could not extract potentials (degenerate smoothing value)");

    InterpolationModel m;
    m.group = rm.group;
    m.anchors_src = std::move(dd.anchors_src);
    m.anchors_dst = std::move(dd.anchors_dst);
    m.psi = std::move(psi);
    m.eps_star = cr.mean;
    m.option = option;
    m.density_threshold = cfg.density_threshold;
    m.step1_interval = cfg.step1_interval;
    m.sgd = cfg.sgd;

    // Realized margins: at each anchor its own score must beat every rival.
    double min_margin = kInf;
    const std::size_t n = m.n_anchors();
    for (std::size_t i = 0; i < n; ++i) {
        const double own = dot(m.anchors_src.row(i), m.anchors_dst.row(i)) - m.psi[i];
        double rival = -kInf;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            rival = std::max(rival, dot(m.anchors_src.row(i), m.anchors_dst.row(j)) - m.psi[j]);
        }
        min_margin = std::min(min_margin, own - rival);
    }
    if (!(min_margin > 0.0)) {
        throw SolverError("fit: score margins are not strictly positive (mean " +
                          csv::format_double(cr.mean) + ")");
    }
    m.eps0 = 0.5 * min_margin;

    // Median nearest-anchor distance, for the density-gated hybrid option.
    std::vector<double> nearest(n, kInf);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            nearest[i] = std::min(nearest[i],
                                  squared_distance(m.anchors_src.row(i), m.anchors_src.row(j)));
        }
    }
    for (double& v : nearest) v = std::sqrt(v);
    std::sort(nearest.begin(), nearest.end());
    m.density_radius = nearest[n / 2];
    return m;
}

std::vector<double> eval_step1(const InterpolationModel& m, std::span<const double> x) {
    if (x.size() != m.d()) throw DataError("eval: point dimension does not match the model");
    double smax;
    const std::vector<std::size_t> set = argmax_set(m, x, smax);
    // Exact lowest-index winner; the tolerance set above only widens ties.
    std::size_t best = set.front();
    double bs = dot(x, m.anchors_dst.row(best)) - m.psi[best];
    for (std::size_t j : set) {
        const double s = dot(x, m.anchors_dst.row(j)) - m.psi[j];
        if (s > bs) {
            best = j;
            bs = s;
        }
    }
    auto row = m.anchors_dst.row(best);
    return {row.begin(), row.end()};
}

std::vector<double> prox_sgd(const InterpolationModel& m, std::span<const double> x,
                             const SgdConfig& cfg) {
    if (x.size() != m.d()) throw DataError("prox: point dimension does not match the model");
    if (!(m.eps0 > 0.0)) throw SolverError("prox: model has nonpositive eps0");
    const std::size_t d = m.d();
    const double eps0 = m.eps0;

    std::vector<double> u(m.anchors_src.row(0).begin(), m.anchors_src.row(0).end());
    Rng rng(split_seed(cfg.seed, 0x5d6d));
    double h_prev = kInf;

    for (std::size_t t = 1; t <= cfg.max_epochs; ++t) {
        double smax;
        const std::vector<std::size_t> set = argmax_set(m, u, smax);
        const double h = smax + squared_distance(u, x) / (2.0 * eps0);
        if (!std::isfinite(h)) throw SolverError("prox: non-finite iterate");
        if (t > 1 && cfg.rtol1 > 0.0) {
            const double rel = (h_prev - h) / std::max(1.0, std::fabs(h_prev));
            if (rel >= 0.0 && rel < cfg.rtol1) break;
        }
        h_prev = h;

        // Vertex subgradients dst_j + (u - x)/eps0 over the active set; the
        // smallest norm doubles as the stationarity test.
        double min_norm2 = kInf;
        for (std::size_t j : set) {
            double nn = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double vc = m.anchors_dst(j, c) + (u[c] - x[c]) / eps0;
                nn += vc * vc;
            }
            min_norm2 = std::min(min_norm2, nn);
        }
        if (min_norm2 < cfg.rtol2 * cfg.rtol2) break;

        const std::size_t pick = set.size() == 1 ? set[0] : set[rng.below(set.size())];
        const double eta = eps0 / static_cast<double>(t);
        for (std::size_t c = 0; c < d; ++c) {
            const double vc = m.anchors_dst(pick, c) + (u[c] - x[c]) / eps0;
            u[c] -= eta * vc;
        }
    }
    return u;
}

double prox_exact_1d(const InterpolationModel& m, double x) {
    if (m.d() != 1) throw SolverError("exact prox is only defined for 1-d models");
    const double eps0 = m.eps0;
    const std::size_t n = m.n_anchors();

    // Upper envelope of the lines a_j*u + b_j.
    std::vector<std::pair<double, double>> lines(n);
    for (std::size_t j = 0; j < n; ++j) lines[j] = {m.anchors_dst(j, 0), -m.psi[j]};
    std::sort(lines.begin(), lines.end(), [](const auto& p, const auto& q) {
        return p.first < q.first || (p.first == q.first && p.second > q.second);
    });
    std::vector<double> a, b, from;  // segments, from[k] = left end of segment k
    for (const auto& [ai, bi] : lines) {
        if (!a.empty() && a.back() == ai) continue;  // dominated duplicate slope
        double start = -kInf;
        while (!a.empty()) {
            start = (b.back() - bi) / (ai - a.back());
            if (start <= from.back()) {
                a.pop_back();
                b.pop_back();
                from.pop_back();
            } else {
                break;
            }
        }
        a.push_back(ai);
        b.push_back(bi);
        from.push_back(a.size() == 1 ? -kInf : start);
    }

    // Strictly convex objective: minimize over each segment's clamped
    // stationary point and take the best.
    double best_u = 0.0, best_val = kInf;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double lo = from[k];
        const double hi = (k + 1 < a.size()) ? from[k + 1] : kInf;
        double u = x - eps0 * a[k];
        u = std::min(std::max(u, lo), hi);
        const double val = a[k] * u + b[k] + (u - x) * (u - x) / (2.0 * eps0);
        if (val < best_val) {
            best_val = val;
            best_u = u;
        }
    }
    return best_u;
}

namespace {

std::vector<double> regularized_eval(const InterpolationModel& m, std::span<const double> x,
                                     const SgdConfig& sgd) {
    std::vector<double> prox;
    if (m.d() == 1) {
        prox.assign(1, prox_exact_1d(m, x[0]));
    } else {
        prox = prox_sgd(m, x, sgd);
    }
    std::vector<double> out(m.d());
    for (std::size_t c = 0; c < m.d(); ++c) out[c] = (x[c] - prox[c]) / m.eps0;
    return out;
}

bool use_step1_here(const InterpolationModel& m, std::span<const double> x) {
    if (m.step1_interval) {
        return x[0] >= m.step1_interval->first && x[0] <= m.step1_interval->second;
    }
    const double thr = m.density_threshold.value_or(0.05);
    const double r2 = m.density_radius * m.density_radius;
    std::size_t near = 0;
    for (std::size_t i = 0; i < m.n_anchors(); ++i) {
        if (squared_distance(m.anchors_src.row(i), x) <= r2) ++near;
    }
    return static_cast<double>(near) / static_cast<double>(m.n_anchors()) >= thr;
}

}  // namespace

std::vector<double> eval_extr(const InterpolationModel& m, std::span<const double> x,
                              const SgdConfig& sgd) {
    if (x.size() != m.d()) throw DataError("eval: point dimension does not match the model");
    switch (m.option) {
        case EvalOption::Step1:
            return eval_step1(m, x);
        case EvalOption::Regularized:
            return regularized_eval(m, x, sgd);
        case EvalOption::Hybrid:
            return use_step1_here(m, x) ? eval_step1(m, x) : regularized_eval(m, x, sgd);
    }
    throw SolverError("eval: unknown option");
}

std::vector<double> eval_extr(const InterpolationModel& m, std::span<const double> x) {
    return eval_extr(m, x, m.sgd);
}

Dataset repair_new(const InterpolationModel& m0, const InterpolationModel& m1,
                   const Dataset& ds, const std::vector<std::size_t>& cols) {
    if (m0.group != 0 || m1.group != 1) throw DataError("repair_new: models must be group 0 and 1");
    if (cols.empty()) throw DataError("repair_new: empty column subset");
    if (m0.d() != cols.size() || m1.d() != cols.size()) {
        throw DataError("repair_new: column subset does not match the models' dimension");
    }
    for (std::size_t c : cols) {
        if (c >= ds.d()) throw DataError("repair_new: column index out of range");
    }
    Dataset out = ds;
    std::vector<double> x(cols.size());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const InterpolationModel& m = (ds.protected_attr[i] == 0) ? m0 : m1;
        for (std::size_t k = 0; k < cols.size(); ++k) x[k] = ds.features(i, cols[k]);
        const std::vector<double> y = eval_extr(m, x);
        for (std::size_t k = 0; k < cols.size(); ++k) out.features(i, cols[k]) = y[k];
    }
    return out;
}

void save_model(const InterpolationModel& m, const std::string& path) {
    std::ostringstream out;
    out << "extr-model 1\n";
    out << "group " << m.group << '\n';
    out << "option " << to_string(m.option) << '\n';
    out << "eps_star " << csv::format_double(m.eps_star) << '\n';
    out << "eps0 " << csv::format_double(m.eps0) << '\n';
    out << "density_threshold "
        << (m.density_threshold ? csv::format_double(*m.density_threshold) : std::string("none"))
        << '\n';
    out << "density_radius " << csv::format_double(m.density_radius) << '\n';
    if (m.step1_interval) {
        out << "step1_interval " << csv::format_double(m.step1_interval->first) << ' '
            << csv::format_double(m.step1_interval->second) << '\n';
    } else {
        out << "step1_interval none\n";
    }
    out << "sgd " << m.sgd.max_epochs << ' ' << csv::format_double(m.sgd.rtol1) << ' '
        << csv::format_double(m.sgd.rtol2) << ' ' << m.sgd.seed << '\n';
    out << "anchors " << m.n_anchors() << ' ' << m.d() << '\n';
    for (std::size_t i = 0; i < m.n_anchors(); ++i) {
        for (std::size_t c = 0; c < m.d(); ++c) {
            if (c) out << ' ';
            out << csv::format_double(m.anchors_src(i, c));
        }
        for (std::size_t c = 0; c < m.d(); ++c) {
            out << ' ' << csv::format_double(m.anchors_dst(i, c));
        }
        out << '\n';
    }
    out << "psi\n";
    for (std::size_t i = 0; i < m.n_anchors(); ++i) out << csv::format_double(m.psi[i]) << '\n';
    csv::write_file_atomic(path, out.str());
}

InterpolationModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (!in || tag != "extr-model") throw DataError("not a model file: " + path);
    if (version != 1) {
        throw DataError("unsupported model version " + std::to_string(version) + " in " + path);
    }

    InterpolationModel m;
    std::string key, sval;
    in >> key >> m.group;
    if (key != "group") throw DataError("malformed model file: " + path);
    in >> key >> sval;
    if (sval == "step1") m.option = EvalOption::Step1;
    else if (sval == "regularized") m.option = EvalOption::Regularized;
    else if (sval == "hybrid") m.option = EvalOption::Hybrid;
    else throw DataError("malformed model option in " + path);
    in >> key >> m.eps_star;
    if (key != "eps_star") throw DataError("malformed model file: " + path);
    in >> key >> m.eps0;
    if (key != "eps0") throw DataError("malformed model file: " + path);
    in >> key >> sval;
    if (key != "density_threshold") throw DataError("malformed model file: " + path);
    if (sval != "none") {
        double v;
        if (!csv::parse_double(sval, v)) throw DataError("malformed density_threshold in " + path);
        m.density_threshold = v;
    }
    in >> key >> m.density_radius;
    in >> key >> sval;
    if (key != "step1_interval") throw DataError("malformed model file: " + path);
    if (sval != "none") {
        double a, b;
        if (!csv::parse_double(sval, a)) throw DataError("malformed interval in " + path);
        in >> b;
        m.step1_interval = {a, b};
    }
    in >> key >> m.sgd.max_epochs >> m.sgd.rtol1 >> m.sgd.rtol2 >> m.sgd.seed;
    std::size_t n = 0, d = 0;
    in >> key >> n >> d;
    if (!in || key != "anchors" || n == 0 || d == 0) throw DataError("malformed anchors in " + path);
    m.anchors_src = Matrix(n, d);
    m.anchors_dst = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) in >> m.anchors_src(i, c);
        for (std::size_t c = 0; c < d; ++c) in >> m.anchors_dst(i, c);
    }
    in >> key;
    if (key != "psi") throw DataError("malformed model file: " + path);
    m.psi.resize(n);
    for (std::size_t i = 0; i < n; ++i) in >> m.psi[i];
    if (!in) throw DataError("truncated model file: " + path);
    return m;
}

}  // namespace extr
