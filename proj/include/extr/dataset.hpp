#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "extr/matrix.hpp"

namespace extr {

// Labeled tabular sample with a binary protected attribute.
// Group encoding: 1 = privileged/majority, 0 = unprivileged.
// Label encoding: 1 = favorable outcome.
struct Dataset {
    Matrix features;                         // n x d
    std::vector<std::string> feature_names;  // size d
    std::vector<int> protected_attr;         // size n, values {0,1}
    std::optional<std::vector<int>> label;   // size n, values {0,1}
    std::string protected_name = "s";
    std::string label_name = "y";

    std::size_t n() const { return features.rows(); }
    std::size_t d() const { return features.cols(); }
    std::size_t column_index(const std::string& name) const;  // throws DataError if absent
};

struct GroupedData {
    Matrix group0;                       // n0 x d, rows with S=0, original order
    Matrix group1;                       // n1 x d, rows with S=1, original order
    std::vector<std::size_t> row_index0; // original row positions (0-based)
    std::vector<std::size_t> row_index1;
};

struct SyntheticConfig {
    std::size_t n0 = 0;
    std::size_t n1 = 0;
    std::vector<double> means0;
    std::vector<double> means1;
    std::vector<double> cov_diag;  // per-feature variances, all > 0
    std::vector<double> beta0;     // length d+1, intercept first
    std::vector<double> beta1;
    std::uint64_t seed = 0;
};

struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;  // per row, fold id in [0, k)
    std::uint64_t seed = 0;
    bool stratified_by_label = false;      // false when the label fallback fired
};

// CSV ingestion. The protected column must hold {0,1} or exactly two distinct
// strings (lexically smaller -> 0). Remaining columns are numeric features.
Dataset load_csv(const std::string& path, const std::string& protected_col,
                 const std::optional<std::string>& label_col = std::nullopt);

std::string to_csv(const Dataset& ds);
void write_csv(const Dataset& ds, const std::string& path);

// protected := 1 where age > threshold (strictly), else 0.
Dataset binarize_protected_age(const Dataset& ds, const std::string& age_col,
                               double threshold, bool drop_age_col = false);

GroupedData split_by_group(const Dataset& ds);

// Rebuilds the full feature matrix from group rows and their original indices.
Matrix merge_groups(const GroupedData& g);

// Two diagonal Gaussians with group-dependent logistic labels; group 0 rows
// first, then group 1. Deterministic: substreams are derived from cfg.seed
// (stream 0/1 for the group features, 2/3 for the group labels).
Dataset gen_biased_gaussian(const SyntheticConfig& cfg);

// Stratified K-fold assignment: by (S,Y) when labels are present and every
// stratum has at least K rows, else by S, else unstratified.
FoldPlan kfold_split(const Dataset& ds, std::size_t k, std::uint64_t seed);

// Rows of ds whose fold == fold_id (test part) and the complement (train part).
std::pair<Dataset, Dataset> fold_partition(const Dataset& ds, const FoldPlan& plan,
                                           std::size_t fold_id);

}  // namespace extr
