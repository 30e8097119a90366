#include "extr/fairness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "extr/csv.hpp"
#include "extr/errors.hpp"
#include "extr/ot.hpp"
#include "extr/rng.hpp"

namespace extr {

DIEstimate disparate_impact_from_counts(std::size_t fav0, std::size_t n0, std::size_t fav1,
                                        std::size_t n1) {
    if (n0 == 0 || n1 == 0) throw DataError("disparate impact: a protected group is empty");
    DIEstimate e;
    e.n0 = n0;
    e.n1 = n1;
    e.p0 = static_cast<double>(fav0) / static_cast<double>(n0);
    e.p1 = static_cast<double>(fav1) / static_cast<double>(n1);
    if (e.p1 == 0.0) {
        throw SolverError("disparate impact undefined: privileged favorable rate is zero");
    }
    e.di = e.p0 / e.p1;
    return e;
}

DIEstimate disparate_impact(const std::vector<int>& outcome,
                            const std::vector<int>& protected_attr) {
    if (outcome.size() != protected_attr.size()) {
        throw DataError("disparate impact: vector lengths differ");
    }
    std::size_t fav0 = 0, n0 = 0, fav1 = 0, n1 = 0;
    for (std::size_t i = 0; i < outcome.size(); ++i) {
        if (protected_attr[i] == 0) {
            ++n0;
            fav0 += (outcome[i] == 1);
        } else {
            ++n1;
            fav1 += (outcome[i] == 1);
        }
    }
    return disparate_impact_from_counts(fav0, n0, fav1, n1);
}

std::pair<double, double> di_confidence_interval(const DIEstimate& e, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("confidence level must satisfy 0 < alpha < 1");
    if (!(e.p0 > 0.0 && e.p0 < 1.0 && e.p1 > 0.0 && e.p1 < 1.0)) {
        throw SolverError("confidence interval undefined for degenerate rates 0 or 1");
    }
    const double z = normal_quantile(1.0 - alpha / 2.0);
    const double se = std::sqrt((1.0 - e.p0) / (static_cast<double>(e.n0) * e.p0) +
                                (1.0 - e.p1) / (static_cast<double>(e.n1) * e.p1));
    return {e.di - z * e.di * se, e.di + z * e.di * se};
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& label) {
    if (pred.size() != label.size()) throw DataError("accuracy: vector lengths differ");
    if (pred.empty()) throw DataError("accuracy: empty vectors");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += (pred[i] == label[i]);
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

namespace {

double penalized_nll(const Matrix& z, const std::vector<int>& y, const std::vector<double>& beta,
                     double l2) {
    const std::size_t n = z.rows();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double eta = dot(z.row(i), beta);
        // log(1 + e^eta) - y*eta, computed stably.
        const double softplus = (eta > 0.0) ? eta + std::log1p(std::exp(-eta))
                                            : std::log1p(std::exp(eta));
        loss += softplus - (y[i] ? eta : 0.0);
    }
    loss /= static_cast<double>(n);
    for (std::size_t j = 1; j < beta.size(); ++j) loss += 0.5 * l2 * beta[j] * beta[j];
    return loss;
}

void nll_gradient(const Matrix& z, const std::vector<int>& y, const std::vector<double>& beta,
                  double l2, std::vector<double>& grad) {
    const std::size_t n = z.rows();
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double eta = dot(z.row(i), beta);
        const double p = 1.0 / (1.0 + std::exp(-eta));
        const double r = p - (y[i] ? 1.0 : 0.0);
        const auto row = z.row(i);
        for (std::size_t j = 0; j < beta.size(); ++j) grad[j] += r * row[j];
    }
    for (double& gj : grad) gj /= static_cast<double>(n);
    for (std::size_t j = 1; j < beta.size(); ++j) grad[j] += l2 * beta[j];
}

}  // namespace

Classifier fit_logistic(const Matrix& x, const std::vector<int>& y, const LogisticConfig& cfg) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (y.size() != n) throw DataError("logistic fit: label length differs from row count");
    if (n < d + 1) throw DataError("logistic fit: need at least d+1 rows");
    const long pos = std::count(y.begin(), y.end(), 1);
    if (pos == 0 || pos == static_cast<long>(n)) {
        throw DataError("logistic fit: labels are constant");
    }

    // Standardize columns; constant columns are left centered only.
    std::vector<double> mean(d, 0.0), sd(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x(i, j);
        mean[j] = s / static_cast<double>(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = x(i, j) - mean[j];
            v += c * c;
        }
        v /= static_cast<double>(n);
        sd[j] = (v > 0.0) ? std::sqrt(v) : 1.0;
    }
    Matrix z(n, d + 1);
    for (std::size_t i = 0; i < n; ++i) {
        z(i, 0) = 1.0;
        for (std::size_t j = 0; j < d; ++j) z(i, j + 1) = (x(i, j) - mean[j]) / sd[j];
    }

    std::vector<double> beta(d + 1, 0.0), grad(d + 1), trial(d + 1);
    double loss = penalized_nll(z, y, beta, cfg.l2);
    std::size_t iters = 0;
    bool converged = false;
    double step = 1.0;
    for (; iters < cfg.max_iters; ++iters) {
        nll_gradient(z, y, beta, cfg.l2, grad);
        double gmax = 0.0, g2 = 0.0;
        for (double gj : grad) {
            gmax = std::max(gmax, std::fabs(gj));
            g2 += gj * gj;
        }
        if (gmax < cfg.grad_tol) {
            converged = true;
            break;
        }
        step = std::min(step * 2.0, 1e4);  // re-grow after cautious iterations
        double new_loss;
        while (true) {
            for (std::size_t j = 0; j < beta.size(); ++j) trial[j] = beta[j] - step * grad[j];
            new_loss = penalized_nll(z, y, trial, cfg.l2);
            if (new_loss <= loss - 1e-4 * step * g2 || step < 1e-14) break;
            step *= 0.5;
        }
        beta.swap(trial);
        loss = new_loss;
    }

    Classifier c;
    c.iterations = iters;
    c.final_loss = loss;
    c.converged = converged;
    c.coefficients.assign(d + 1, 0.0);
    double intercept = beta[0];
    for (std::size_t j = 0; j < d; ++j) {
        c.coefficients[j + 1] = beta[j + 1] / sd[j];
        intercept -= beta[j + 1] * mean[j] / sd[j];
    }
    c.coefficients[0] = intercept;
    return c;
}

std::vector<double> predict_proba(const Classifier& c, const Matrix& x) {
    if (c.coefficients.size() != x.cols() + 1) {
        throw DataError("predict: feature count does not match the classifier");
    }
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double eta = c.coefficients[0];
        for (std::size_t j = 0; j < x.cols(); ++j) eta += c.coefficients[j + 1] * x(i, j);
        out[i] = 1.0 / (1.0 + std::exp(-eta));
    }
    return out;
}

std::vector<int> predict(const Classifier& c, const Matrix& x) {
    const std::vector<double> p = predict_proba(c, x);
    std::vector<int> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = (p[i] >= 0.5) ? 1 : 0;
    return out;
}

namespace {

Aggregate aggregate_rows(const std::vector<FoldMetrics>& rows, const std::string& pass) {
    std::vector<double> acc, di;
    for (const auto& r : rows) {
        if (r.pass != pass) continue;
        acc.push_back(r.accuracy);
        di.push_back(r.di);
    }
    auto mean_sd = [](const std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        const double sd = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
        return std::pair<double, double>{m, sd};
    };
    Aggregate a;
    std::tie(a.accuracy_mean, a.accuracy_sd) = mean_sd(acc);
    std::tie(a.di_mean, a.di_sd) = mean_sd(di);
    return a;
}

}  // namespace

EvalReport run_procedure(const Dataset& ds, const ProcedureConfig& cfg) {
    if (!ds.label) throw DataError("evaluation requires a labeled dataset");
    std::vector<std::size_t> cols = cfg.cols;
    if (cols.empty()) {
        cols.resize(ds.d());
        std::iota(cols.begin(), cols.end(), std::size_t{0});
    }

    const FoldPlan plan = kfold_split(ds, cfg.folds, cfg.seed);
    EvalReport rep;
    rep.folds = cfg.folds;
    rep.option = cfg.option;
    rep.seed = cfg.seed;

    using clock = std::chrono::steady_clock;
    for (std::size_t f = 0; f < cfg.folds; ++f) {
        try {
            auto [test, train] = fold_partition(ds, plan, f);

            const auto t0 = clock::now();
            {
                const Classifier g = fit_logistic(train.features, *train.label, cfg.lr);
                const std::vector<int> pred = predict(g, test.features);
                FoldMetrics fm;
                fm.fold = f + 1;
                fm.pass = "benchmark";
                fm.accuracy = accuracy(pred, *test.label);
                fm.di = disparate_impact(pred, test.protected_attr).di;
                rep.rows.push_back(fm);
            }
            const auto t1 = clock::now();
            {
                FitConfig fit_cfg = cfg.fit;
                fit_cfg.sgd.seed = split_seed(cfg.seed, 100 + f);
                TotalRepairResult repaired = total_repair(train, cols, cfg.weights);
                const InterpolationModel m0 =
                    fit_interpolation(repaired.map0, cfg.option, fit_cfg);
                const InterpolationModel m1 =
                    fit_interpolation(repaired.map1, cfg.option, fit_cfg);
                const Dataset test_rep = repair_new(m0, m1, test, cols);
                const Classifier g = fit_logistic(repaired.repaired.features,
                                                  *repaired.repaired.label, cfg.lr);
                const std::vector<int> pred = predict(g, test_rep.features);
                FoldMetrics fm;
                fm.fold = f + 1;
                fm.pass = "extr";
                fm.accuracy = accuracy(pred, *test_rep.label);
                fm.di = disparate_impact(pred, test_rep.protected_attr).di;
                rep.rows.push_back(fm);
            }
            const auto t2 = clock::now();
            rep.benchmark_seconds += std::chrono::duration<double>(t1 - t0).count();
            rep.extr_seconds += std::chrono::duration<double>(t2 - t1).count();
        } catch (const std::exception& e) {
            throw SolverError("fold " + std::to_string(f + 1) + " failed: " + e.what());
        }
    }

    rep.benchmark = aggregate_rows(rep.rows, "benchmark");
    rep.extr = aggregate_rows(rep.rows, "extr");
    return rep;
}

std::vector<int> load_predictions_csv(const std::string& path, std::size_t n_rows) {
    const csv::Table t = csv::read_table(path);
    if (t.header.size() != 2 || t.header[0] != "row_id" || t.header[1] != "prediction") {
        throw DataError("predictions file must have header: row_id,prediction");
    }
    std::vector<int> out(n_rows, -1);
    for (const auto& row : t.rows) {
        double id, p;
        if (!csv::parse_double(row[0], id) || !csv::parse_double(row[1], p) ||
            (p != 0.0 && p != 1.0)) {
            throw DataError("predictions file: row_id must be integer, prediction in {0,1}");
        }
        const auto idx = static_cast<std::size_t>(id);
        if (idx >= n_rows) throw DataError("predictions file: row_id out of range");
        out[idx] = static_cast<int>(p);
    }
    for (std::size_t i = 0; i < n_rows; ++i) {
        if (out[i] < 0) throw DataError("predictions file: missing row " + std::to_string(i));
    }
    return out;
}

}  // namespace extr
