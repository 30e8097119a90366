#include "extr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "extr/csv.hpp"
#include "extr/errors.hpp"
#include "extr/rng.hpp"

namespace extr {

namespace {

// Parses a binary column: numeric {0,1}, or exactly two distinct strings
// mapped by lexical order (smaller -> 0).
std::vector<int> parse_binary_column(const std::vector<std::string>& cells,
                                     const std::string& col_name) {
    std::vector<int> out(cells.size());
    bool all_numeric = true;
    for (const auto& c : cells) {
        double v;
        if (!csv::parse_double(c, v) || (v != 0.0 && v != 1.0)) {
            all_numeric = false;
            break;
        }
    }
    if (all_numeric) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            double v;
            csv::parse_double(cells[i], v);
            out[i] = (v == 1.0) ? 1 : 0;
        }
        return out;
    }
    std::set<std::string> values(cells.begin(), cells.end());
    if (values.size() != 2) {
        throw DataError("column '" + col_name + "' must hold {0,1} or exactly two distinct values, found " +
                        std::to_string(values.size()));
    }
    const std::string& zero = *values.begin();
    for (std::size_t i = 0; i < cells.size(); ++i) out[i] = (cells[i] == zero) ? 0 : 1;
    return out;
}

void require_group_presence(const std::vector<int>& s) {
    const std::size_t ones = static_cast<std::size_t>(std::count(s.begin(), s.end(), 1));
    if (ones == 0 || ones == s.size()) {
        throw DataError("a protected group is empty (need both S=0 and S=1 rows)");
    }
}

}  // namespace

std::size_t Dataset::column_index(const std::string& name) const {
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
        if (feature_names[j] == name) return j;
    }
    throw DataError("no feature column named '" + name + "'");
}

Dataset load_csv(const std::string& path, const std::string& protected_col,
                 const std::optional<std::string>& label_col) {
    const csv::Table t = csv::read_table(path);
    if (t.rows.size() < 2) throw DataError("fewer than 2 data rows in " + path);

    long prot_idx = -1, label_idx = -1;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        if (t.header[j] == protected_col) prot_idx = static_cast<long>(j);
        if (label_col && t.header[j] == *label_col) label_idx = static_cast<long>(j);
    }
    if (prot_idx < 0) throw DataError("missing column '" + protected_col + "' in " + path);
    if (label_col && label_idx < 0) throw DataError("missing column '" + *label_col + "' in " + path);

    Dataset ds;
    ds.protected_name = protected_col;
    std::vector<std::size_t> feature_cols;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        if (static_cast<long>(j) == prot_idx || static_cast<long>(j) == label_idx) continue;
        feature_cols.push_back(j);
        ds.feature_names.push_back(t.header[j]);
    }
    if (feature_cols.empty()) throw DataError("no feature columns left in " + path);

    const std::size_t n = t.rows.size();
    ds.features = Matrix(n, feature_cols.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t jj = 0; jj < feature_cols.size(); ++jj) {
            const std::string& cell = t.rows[i][feature_cols[jj]];
            double v;
            if (!csv::parse_double(cell, v) || !std::isfinite(v)) {
                throw DataError("non-numeric value at row " + std::to_string(i + 1) +
                                ", column '" + t.header[feature_cols[jj]] + "'");
            }
            ds.features(i, jj) = v;
        }
    }

    std::vector<std::string> prot_cells(n), label_cells(n);
    for (std::size_t i = 0; i < n; ++i) prot_cells[i] = t.rows[i][static_cast<std::size_t>(prot_idx)];
    ds.protected_attr = parse_binary_column(prot_cells, protected_col);
    require_group_presence(ds.protected_attr);

    if (label_col) {
        ds.label_name = *label_col;
        for (std::size_t i = 0; i < n; ++i) label_cells[i] = t.rows[i][static_cast<std::size_t>(label_idx)];
        ds.label = parse_binary_column(label_cells, *label_col);
    }
    return ds;
}

std::string to_csv(const Dataset& ds) {
    std::ostringstream out;
    for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
        if (j) out << ',';
        out << ds.feature_names[j];
    }
    out << ',' << ds.protected_name;
    if (ds.label) out << ',' << ds.label_name;
    out << '\n';
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t j = 0; j < ds.d(); ++j) {
            if (j) out << ',';
            out << csv::format_double(ds.features(i, j));
        }
        out << ',' << ds.protected_attr[i];
        if (ds.label) out << ',' << (*ds.label)[i];
        out << '\n';
    }
    return out.str();
}

void write_csv(const Dataset& ds, const std::string& path) {
    csv::write_file_atomic(path, to_csv(ds));
}

Dataset binarize_protected_age(const Dataset& ds, const std::string& age_col,
                               double threshold, bool drop_age_col) {
    const std::size_t age_idx = ds.column_index(age_col);
    Dataset out = ds;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        out.protected_attr[i] = (ds.features(i, age_idx) > threshold) ? 1 : 0;
    }
    if (drop_age_col) {
        Matrix reduced(ds.n(), ds.d() - 1);
        std::vector<std::string> names;
        for (std::size_t j = 0, jj = 0; j < ds.d(); ++j) {
            if (j == age_idx) continue;
            names.push_back(ds.feature_names[j]);
            for (std::size_t i = 0; i < ds.n(); ++i) reduced(i, jj) = ds.features(i, j);
            ++jj;
        }
        out.features = std::move(reduced);
        out.feature_names = std::move(names);
    }
    return out;
}

GroupedData split_by_group(const Dataset& ds) {
    require_group_presence(ds.protected_attr);
    GroupedData g;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        (ds.protected_attr[i] == 0 ? g.row_index0 : g.row_index1).push_back(i);
    }
    g.group0 = Matrix(g.row_index0.size(), ds.d());
    g.group1 = Matrix(g.row_index1.size(), ds.d());
    for (std::size_t r = 0; r < g.row_index0.size(); ++r) {
        for (std::size_t j = 0; j < ds.d(); ++j) g.group0(r, j) = ds.features(g.row_index0[r], j);
    }
    for (std::size_t r = 0; r < g.row_index1.size(); ++r) {
        for (std::size_t j = 0; j < ds.d(); ++j) g.group1(r, j) = ds.features(g.row_index1[r], j);
    }
    return g;
}

Matrix merge_groups(const GroupedData& g) {
    const std::size_t n = g.row_index0.size() + g.row_index1.size();
    Matrix full(n, g.group0.cols());
    for (std::size_t r = 0; r < g.row_index0.size(); ++r) {
        for (std::size_t j = 0; j < full.cols(); ++j) full(g.row_index0[r], j) = g.group0(r, j);
    }
    for (std::size_t r = 0; r < g.row_index1.size(); ++r) {
        for (std::size_t j = 0; j < full.cols(); ++j) full(g.row_index1[r], j) = g.group1(r, j);
    }
    return full;
}

Dataset gen_biased_gaussian(const SyntheticConfig& cfg) {
    const std::size_t d = cfg.means0.size();
    if (d == 0 || cfg.means1.size() != d || cfg.cov_diag.size() != d) {
        throw DataError("synthetic config: means0, means1 and cov_diag must share a positive length");
    }
    for (double v : cfg.cov_diag) {
        if (!(v > 0.0)) throw DataError("synthetic config: cov_diag entries must be > 0");
    }
    if (cfg.beta0.size() != d + 1 || cfg.beta1.size() != d + 1) {
        throw DataError("synthetic config: beta vectors must have length d+1 (intercept first)");
    }
    if (cfg.n0 == 0 || cfg.n1 == 0) throw DataError("synthetic config: group sizes must be positive");

    Dataset ds;
    ds.feature_names.resize(d);
    for (std::size_t j = 0; j < d; ++j) ds.feature_names[j] = "x" + std::to_string(j + 1);
    const std::size_t n = cfg.n0 + cfg.n1;
    ds.features = Matrix(n, d);
    ds.protected_attr.resize(n);
    ds.label = std::vector<int>(n);

    std::vector<double> sd(d);
    for (std::size_t j = 0; j < d; ++j) sd[j] = std::sqrt(cfg.cov_diag[j]);

    for (int s = 0; s <= 1; ++s) {
        Rng feat_rng(split_seed(cfg.seed, static_cast<std::uint64_t>(s)));
        Rng label_rng(split_seed(cfg.seed, 2 + static_cast<std::uint64_t>(s)));
        const auto& means = (s == 0) ? cfg.means0 : cfg.means1;
        const auto& beta = (s == 0) ? cfg.beta0 : cfg.beta1;
        const std::size_t offset = (s == 0) ? 0 : cfg.n0;
        const std::size_t count = (s == 0) ? cfg.n0 : cfg.n1;
        for (std::size_t r = 0; r < count; ++r) {
            const std::size_t i = offset + r;
            ds.protected_attr[i] = s;
            double eta = beta[0];
            for (std::size_t j = 0; j < d; ++j) {
                const double x = feat_rng.normal(means[j], sd[j]);
                ds.features(i, j) = x;
                eta += beta[j + 1] * x;
            }
            const double p = 1.0 / (1.0 + std::exp(-eta));
            (*ds.label)[i] = label_rng.bernoulli(p) ? 1 : 0;
        }
    }
    return ds;
}

FoldPlan kfold_split(const Dataset& ds, std::size_t k, std::uint64_t seed) {
    const std::size_t n = ds.n();
    if (k < 2 || k > n) throw DataError("fold count must satisfy 2 <= K <= n");

    // Strata keyed by (S, Y) first; degrade to S, then to a single stratum,
    // whenever some stratum is smaller than K.
    auto build_strata = [&](int mode) {
        std::map<int, std::vector<std::size_t>> strata;
        for (std::size_t i = 0; i < n; ++i) {
            int key = 0;
            if (mode == 2) key = ds.protected_attr[i] * 2 + (*ds.label)[i];
            else if (mode == 1) key = ds.protected_attr[i];
            strata[key].push_back(i);
        }
        return strata;
    };

    int mode = ds.label ? 2 : 1;
    std::map<int, std::vector<std::size_t>> strata = build_strata(mode);
    auto too_small = [&](const std::map<int, std::vector<std::size_t>>& st) {
        for (const auto& [key, rows] : st) {
            if (rows.size() < k) return true;
        }
        return false;
    };
    while (mode > 0 && too_small(strata)) {
        --mode;
        strata = build_strata(mode);
    }

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.stratified_by_label = (mode == 2);
    plan.assignments.assign(n, 0);

    Rng rng(split_seed(seed, 0xf01d));
    std::size_t cursor = 0;  // shared round-robin cursor keeps global sizes within 1
    for (auto& [key, rows] : strata) {
        // Fisher-Yates within the stratum.
        for (std::size_t i = rows.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.below(i));
            std::swap(rows[i - 1], rows[j]);
        }
        for (std::size_t idx : rows) {
            plan.assignments[idx] = cursor % k;
            ++cursor;
        }
    }
    return plan;
}

std::pair<Dataset, Dataset> fold_partition(const Dataset& ds, const FoldPlan& plan,
                                           std::size_t fold_id) {
    if (plan.assignments.size() != ds.n()) throw DataError("fold plan does not match dataset size");
    if (fold_id >= plan.k) throw DataError("fold id out of range");
    std::vector<std::size_t> test_rows, train_rows;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        (plan.assignments[i] == fold_id ? test_rows : train_rows).push_back(i);
    }
    auto subset = [&](const std::vector<std::size_t>& rows) {
        Dataset out;
        out.feature_names = ds.feature_names;
        out.protected_name = ds.protected_name;
        out.label_name = ds.label_name;
        out.features = Matrix(rows.size(), ds.d());
        out.protected_attr.resize(rows.size());
        if (ds.label) out.label = std::vector<int>(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t j = 0; j < ds.d(); ++j) out.features(r, j) = ds.features(rows[r], j);
            out.protected_attr[r] = ds.protected_attr[rows[r]];
            if (ds.label) (*out.label)[r] = (*ds.label)[rows[r]];
        }
        return out;
    };
    return {subset(test_rows), subset(train_rows)};
}

}  // namespace extr
