#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "extr/dataset.hpp"
#include "extr/interp.hpp"
#include "extr/matrix.hpp"

namespace extr {

// Ratio of favorable-outcome rates, unprivileged over privileged; 1 is fair.
struct DIEstimate {
    double di = 0.0;
    double p0 = 0.0;  // P(outcome = 1 | S = 0)
    double p1 = 0.0;
    std::size_t n0 = 0;
    std::size_t n1 = 0;
};

DIEstimate disparate_impact(const std::vector<int>& outcome,
                            const std::vector<int>& protected_attr);

// From the four favorable/unfavorable counts directly.
DIEstimate disparate_impact_from_counts(std::size_t fav0, std::size_t n0, std::size_t fav1,
                                        std::size_t n1);

// Delta-method interval for the rate ratio:
// di * (1 -+ z * sqrt((1-p0)/(n0 p0) + (1-p1)/(n1 p1))).
std::pair<double, double> di_confidence_interval(const DIEstimate& e, double alpha);

double accuracy(const std::vector<int>& pred, const std::vector<int>& label);

struct LogisticConfig {
    double l2 = 1e-4;              // ridge penalty on the non-intercept weights
    std::size_t max_iters = 5000;
    double grad_tol = 1e-8;
};

struct Classifier {
    std::vector<double> coefficients;  // d+1, intercept first, raw feature scale
    std::size_t iterations = 0;
    double final_loss = 0.0;
    bool converged = true;
};

// Penalized maximum likelihood by full-batch gradient descent with
// backtracking; features are standardized internally for conditioning and the
// coefficients mapped back. Deterministic.
Classifier fit_logistic(const Matrix& x, const std::vector<int>& y, const LogisticConfig& cfg = {});

std::vector<double> predict_proba(const Classifier& c, const Matrix& x);
std::vector<int> predict(const Classifier& c, const Matrix& x);  // threshold 0.5

struct ProcedureConfig {
    std::size_t folds = 10;
    EvalOption option = EvalOption::Regularized;
    std::vector<std::size_t> cols;  // columns to repair; empty = all
    std::optional<std::pair<double, double>> weights;  // empirical proportions if unset
    std::uint64_t seed = 0;
    LogisticConfig lr;
    FitConfig fit;
};

struct FoldMetrics {
    std::size_t fold = 0;       // 1-based
    std::string pass;           // "benchmark" or "extr"
    double accuracy = 0.0;
    double di = 0.0;
};

struct Aggregate {
    double accuracy_mean = 0.0, accuracy_sd = 0.0;
    double di_mean = 0.0, di_sd = 0.0;
};

struct EvalReport {
    std::size_t folds = 0;
    EvalOption option = EvalOption::Regularized;
    std::uint64_t seed = 0;
    std::vector<FoldMetrics> rows;  // 2 per fold, benchmark first
    Aggregate benchmark;
    Aggregate extr;
    double benchmark_seconds = 0.0;  // wall clock, in-memory only
    double extr_seconds = 0.0;
};

// Per fold: a plain classifier on the raw training split (benchmark pass),
// then repair-train / fit models / repair-test / retrain (extr pass); test
// accuracy and test-prediction disparate impact are recorded for both.
EvalReport run_procedure(const Dataset& ds, const ProcedureConfig& cfg);

// Predictions supplied externally as (row_id, prediction) CSV; row_id 0-based.
std::vector<int> load_predictions_csv(const std::string& path, std::size_t n_rows);

}  // namespace extr
