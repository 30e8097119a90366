#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "extr/dataset.hpp"
#include "extr/matrix.hpp"
#include "extr/mmc.hpp"
#include "extr/ot.hpp"

namespace extr {

enum class EvalOption { Step1, Regularized, Hybrid };

std::string to_string(EvalOption o);
EvalOption eval_option_from_int(int option);  // 1 -> Step1, 2 -> Regularized, 3 -> Hybrid

struct SgdConfig {
    std::size_t max_epochs = 100000;  // T
    double rtol1 = 1e-9;              // relative objective decrease
    double rtol2 = 1e-7;              // subgradient norm
    std::uint64_t seed = 0;
};

struct FitConfig {
    int scale_digits = 6;
    std::optional<double> density_threshold;              // hybrid rule, default 0.05
    std::optional<std::pair<double, double>> step1_interval;  // hybrid override on coord 0
    SgdConfig sgd;
};

// The fitted continuous extension of a discrete repair map: anchor pairs with
// per-anchor potentials psi, the optimal smoothing value, and the evaluation
// option. Immutable after fit; evaluations are pure.
struct InterpolationModel {
    int group = 0;
    Matrix anchors_src;  // n x d, duplicates on anchors_dst collapsed
    Matrix anchors_dst;
    std::vector<double> psi;
    double eps_star = 0.0;  // optimal cycle mean of the smoothing program
    double eps0 = 0.0;      // half the realized score-margin minimum
    EvalOption option = EvalOption::Regularized;
    std::optional<double> density_threshold;
    double density_radius = 0.0;  // median nearest-anchor distance
    std::optional<std::pair<double, double>> step1_interval;
    SgdConfig sgd;

    std::size_t n_anchors() const { return anchors_src.rows(); }
    std::size_t d() const { return anchors_src.cols(); }
};

// max_j <x, dst_j> - psi_j.
double score_max(const InterpolationModel& m, std::span<const double> x);

// Shortest-path potentials on the reduced arc costs c - eps_star; valid as
// long as no cycle mean drops below eps_star. psi[0] is normalized to 0.
std::vector<double> potentials_from_mcm(const WeightedDigraph& g, double eps_star);

// Collapses duplicate images, solves the smoothing program via the scaled
// bisection, extracts potentials, and validates the score margins.
InterpolationModel fit_interpolation(const RepairMap& rm, EvalOption option,
                                     const FitConfig& cfg = {});

// Piecewise-constant extension: the image whose affine score wins at x
// (ties broken by lowest index).
std::vector<double> eval_step1(const InterpolationModel& m, std::span<const double> x);

// Proximal point of eps0 * (max of affine scores) at x, by stochastic
// subgradient descent on the strongly convex objective.
std::vector<double> prox_sgd(const InterpolationModel& m, std::span<const double> x,
                             const SgdConfig& cfg);

// Exact 1-d proximal point by scanning the envelope segments.
double prox_exact_1d(const InterpolationModel& m, double x);

// The fitted map: Step1, or (x - prox(x)) / eps0, or the density-gated mix.
// For d == 1 the Regularized branch uses the exact prox.
std::vector<double> eval_extr(const InterpolationModel& m, std::span<const double> x);
std::vector<double> eval_extr(const InterpolationModel& m, std::span<const double> x,
                              const SgdConfig& sgd);

// Routes each row to its group's model and replaces the selected columns.
Dataset repair_new(const InterpolationModel& m0, const InterpolationModel& m1,
                   const Dataset& ds, const std::vector<std::size_t>& cols);

// Versioned flat-text persistence; load rejects any other version.
void save_model(const InterpolationModel& m, const std::string& path);
InterpolationModel load_model(const std::string& path);

}  // namespace extr
