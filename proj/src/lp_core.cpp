#include "lpreform/lp_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lpreform/errors.hpp"

namespace lpreform {

const char* to_string(RowSense sense) {
    switch (sense) {
        case RowSense::LE: return "LE";
        case RowSense::GE: return "GE";
        case RowSense::EQ: return "EQ";
    }
    return "?";
}

const char* to_string(PermutationSource source) {
    switch (source) {
        case PermutationSource::Identity: return "Identity";
        case PermutationSource::Sampled: return "Sampled";
        case PermutationSource::Oracle: return "Oracle";
        case PermutationSource::Manual: return "Manual";
    }
    return "?";
}

// SparseMatrix ---------------------------------------------------------------

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries) {
    for (const auto& t : entries) {
        if (t.row >= rows || t.col >= cols) {
            throw DimensionMismatch("triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                                    ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
        }
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.col != b.col ? a.col < b.col : a.row < b.row;
    });

    SparseMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.col_start.assign(cols + 1, 0);
    std::size_t k = 0;
    while (k < entries.size()) {
        std::size_t row = entries[k].row;
        std::size_t col = entries[k].col;
        double sum = 0.0;
        while (k < entries.size() && entries[k].row == row && entries[k].col == col) {
            sum += entries[k].value;
            ++k;
        }
        if (sum != 0.0) {
            m.row_index.push_back(row);
            m.value.push_back(sum);
            ++m.col_start[col + 1];
        }
    }
    std::partial_sum(m.col_start.begin(), m.col_start.end(), m.col_start.begin());
    return m;
}

SparseMatrix SparseMatrix::transposed() const {
    SparseMatrix t;
    t.rows = cols;
    t.cols = rows;
    t.col_start.assign(rows + 1, 0);
    for (std::size_t r : row_index) ++t.col_start[r + 1];
    std::partial_sum(t.col_start.begin(), t.col_start.end(), t.col_start.begin());
    t.row_index.resize(nnz());
    t.value.resize(nnz());
    std::vector<std::size_t> next(t.col_start.begin(), t.col_start.end() - 1);
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t k = col_start[j]; k < col_start[j + 1]; ++k) {
            std::size_t pos = next[row_index[k]]++;
            t.row_index[pos] = j;
            t.value[pos] = value[k];
        }
    }
    return t;
}

void SparseMatrix::validate() const {
    if (col_start.size() != cols + 1 || col_start.front() != 0 || col_start.back() != value.size() ||
        row_index.size() != value.size()) {
        throw InvalidInstance("sparse matrix storage arrays are inconsistent");
    }
    for (std::size_t j = 0; j < cols; ++j) {
        if (col_start[j] > col_start[j + 1]) throw InvalidInstance("column starts are not monotone");
        for (std::size_t k = col_start[j]; k < col_start[j + 1]; ++k) {
            if (row_index[k] >= rows) throw InvalidInstance("row index out of range in column " + std::to_string(j));
            if (k > col_start[j] && row_index[k] <= row_index[k - 1]) {
                throw InvalidInstance("row indices not strictly increasing in column " + std::to_string(j));
            }
            if (value[k] == 0.0) throw InvalidInstance("stored zero in column " + std::to_string(j));
            if (!std::isfinite(value[k])) throw InvalidInstance("non-finite coefficient in column " + std::to_string(j));
        }
    }
}

// LpInstance -----------------------------------------------------------------

double LpInstance::row_lower(std::size_t i) const {
    double r = row_range[i];
    switch (row_sense[i]) {
        case RowSense::LE: return r == 0.0 ? -kInfinity : rhs[i] - std::abs(r);
        case RowSense::GE: return rhs[i];
        case RowSense::EQ: return r < 0.0 ? rhs[i] + r : rhs[i];
    }
    return rhs[i];
}

double LpInstance::row_upper(std::size_t i) const {
    double r = row_range[i];
    switch (row_sense[i]) {
        case RowSense::LE: return rhs[i];
        case RowSense::GE: return r == 0.0 ? kInfinity : rhs[i] + std::abs(r);
        case RowSense::EQ: return r > 0.0 ? rhs[i] + r : rhs[i];
    }
    return rhs[i];
}

double LpInstance::objective_value(std::span<const double> x) const {
    double v = objective_offset;
    for (std::size_t j = 0; j < objective.size(); ++j) v += objective[j] * x[j];
    return v;
}

double LpInstance::max_violation(std::span<const double> x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < num_cols(); ++j) {
        worst = std::max({worst, col_lower[j] - x[j], x[j] - col_upper[j]});
    }
    std::vector<double> activity(num_rows(), 0.0);
    for (std::size_t j = 0; j < num_cols(); ++j) {
        auto rows = matrix.column_rows(j);
        auto vals = matrix.column_values(j);
        for (std::size_t k = 0; k < rows.size(); ++k) activity[rows[k]] += vals[k] * x[j];
    }
    for (std::size_t i = 0; i < num_rows(); ++i) {
        worst = std::max({worst, row_lower(i) - activity[i], activity[i] - row_upper(i)});
    }
    return worst;
}

void LpInstance::validate() const {
    matrix.validate();
    const std::size_t m = matrix.rows;
    const std::size_t n = matrix.cols;
    if (objective.size() != n || col_lower.size() != n || col_upper.size() != n || col_names.size() != n) {
        throw InvalidInstance("column-indexed vectors do not match " + std::to_string(n) + " columns");
    }
    if (rhs.size() != m || row_sense.size() != m || row_range.size() != m || row_names.size() != m) {
        throw InvalidInstance("row-indexed vectors do not match " + std::to_string(m) + " rows");
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (std::isnan(col_lower[j]) || std::isnan(col_upper[j]) || col_lower[j] > col_upper[j]) {
            throw InvalidInstance("column " + col_names[j] + " has lower bound above upper bound");
        }
        if (col_lower[j] == kInfinity || col_upper[j] == -kInfinity) {
            throw InvalidInstance("column " + col_names[j] + " has an unsatisfiable infinite bound");
        }
        if (!std::isfinite(objective[j])) throw InvalidInstance("non-finite cost on column " + col_names[j]);
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (!std::isfinite(rhs[i]) || !std::isfinite(row_range[i])) {
            throw InvalidInstance("non-finite right-hand side or range on row " + row_names[i]);
        }
    }
}

// LpBuilder ------------------------------------------------------------------

std::size_t LpBuilder::add_column(std::string name, double cost, double lower, double upper) {
    lp_.col_names.push_back(std::move(name));
    lp_.objective.push_back(cost);
    lp_.col_lower.push_back(lower);
    lp_.col_upper.push_back(upper);
    return lp_.col_names.size() - 1;
}

std::size_t LpBuilder::add_row(std::string name, RowSense sense, double rhs, double range) {
    lp_.row_names.push_back(std::move(name));
    lp_.row_sense.push_back(sense);
    lp_.rhs.push_back(rhs);
    lp_.row_range.push_back(range);
    return lp_.row_names.size() - 1;
}

void LpBuilder::add_coefficient(std::size_t row, std::size_t col, double value) {
    entries_.push_back({row, col, value});
}

LpInstance LpBuilder::build() && {
    lp_.matrix = SparseMatrix::from_triplets(lp_.row_names.size(), lp_.col_names.size(), std::move(entries_));
    lp_.validate();
    return std::move(lp_);
}

// Standard form --------------------------------------------------------------

double StandardFormLp::original_objective(std::span<const double> x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < original_cols; ++j) v += objective[j] * x[j];
    return objective_sign * v + objective_offset;
}

std::vector<double> StandardFormLp::original_point(std::span<const double> x) const {
    return {x.begin(), x.begin() + static_cast<std::ptrdiff_t>(original_cols)};
}

std::vector<double> StandardFormLp::extend_point(std::span<const double> x_original) const {
    std::vector<double> x(num_cols(), 0.0);
    std::copy(x_original.begin(), x_original.end(), x.begin());
    std::vector<double> activity(num_rows(), 0.0);
    for (std::size_t j = 0; j < original_cols; ++j) {
        auto rows = matrix.column_rows(j);
        auto vals = matrix.column_values(j);
        for (std::size_t k = 0; k < rows.size(); ++k) activity[rows[k]] += vals[k] * x[j];
    }
    for (std::size_t i = 0; i < num_rows(); ++i) {
        if (!row_slack[i]) continue;
        std::size_t s = *row_slack[i];
        double coef = matrix.column_values(s)[0];
        x[s] = (rhs[i] - activity[i]) / coef;
    }
    return x;
}

StandardFormLp to_standard_form(const LpInstance& lp) {
    lp.validate();
    const std::size_t m = lp.num_rows();
    const std::size_t n = lp.num_cols();

    StandardFormLp sf;
    sf.objective_sign = lp.sense == ObjectiveSense::Maximize ? -1.0 : 1.0;
    sf.objective_offset = lp.objective_offset;
    sf.original_cols = n;
    sf.rhs = lp.rhs;
    sf.row_slack.assign(m, std::nullopt);
    sf.objective.reserve(n + m);
    for (double c : lp.objective) sf.objective.push_back(sf.objective_sign * c);
    sf.col_lower = lp.col_lower;
    sf.col_upper = lp.col_upper;
    for (std::size_t j = 0; j < n; ++j) sf.origin.push_back({ColumnOrigin::Kind::Original, j});

    // Slack coefficient and upper bound per row, following the row interval.
    //   LE:  a x + s = b,  s in [0, |R|] or [0, inf)
    //   GE:  a x - s = b,  likewise
    //   EQ:  R > 0 -> a x - s = b;  R < 0 -> a x + s = b;  R = 0 -> no slack
    SparseMatrix& A = sf.matrix;
    A = lp.matrix;
    sf.slack_begin = n;
    for (std::size_t i = 0; i < m; ++i) {
        double coef = 0.0;
        double range = lp.row_range[i];
        switch (lp.row_sense[i]) {
            case RowSense::LE: coef = 1.0; break;
            case RowSense::GE: coef = -1.0; break;
            case RowSense::EQ: coef = range > 0.0 ? -1.0 : (range < 0.0 ? 1.0 : 0.0); break;
        }
        if (coef == 0.0) continue;
        std::size_t col = A.cols++;
        A.row_index.push_back(i);
        A.value.push_back(coef);
        A.col_start.push_back(A.value.size());
        sf.row_slack[i] = col;
        sf.objective.push_back(0.0);
        sf.col_lower.push_back(0.0);
        sf.col_upper.push_back(range == 0.0 ? kInfinity : std::abs(range));
        sf.origin.push_back({ColumnOrigin::Kind::Slack, i});
    }
    sf.slack_end = A.cols;
    return sf;
}

// Permutations ---------------------------------------------------------------

void check_permutation(std::span<const std::size_t> perm, std::size_t size) {
    if (perm.size() != size) {
        throw InvalidPermutation("permutation has length " + std::to_string(perm.size()) + ", expected " +
                                 std::to_string(size));
    }
    std::vector<bool> seen(size, false);
    for (std::size_t v : perm) {
        if (v >= size || seen[v]) throw InvalidPermutation("not a bijection: index " + std::to_string(v));
        seen[v] = true;
    }
}

ColumnPermutation::ColumnPermutation(std::vector<std::size_t> perm, PermutationSource source)
    : perm_(std::move(perm)), source_(source) {
    check_permutation(perm_, perm_.size());
}

ColumnPermutation ColumnPermutation::identity(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    return ColumnPermutation(std::move(p), PermutationSource::Identity);
}

bool ColumnPermutation::is_identity() const {
    for (std::size_t j = 0; j < perm_.size(); ++j) {
        if (perm_[j] != j) return false;
    }
    return true;
}

ColumnPermutation ColumnPermutation::inverse() const {
    std::vector<std::size_t> inv(perm_.size());
    for (std::size_t j = 0; j < perm_.size(); ++j) inv[perm_[j]] = j;
    return ColumnPermutation(std::move(inv), source_);
}

ColumnPermutation compose(const ColumnPermutation& second, const ColumnPermutation& first) {
    if (second.size() != first.size()) throw DimensionMismatch("composing permutations of different sizes");
    // apply(first) maps column j <- in[first[j]]; then apply(second) maps j <- mid[second[j]].
    std::vector<std::size_t> r(first.size());
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = first[second[j]];
    return ColumnPermutation(std::move(r), PermutationSource::Manual);
}

LpInstance apply_permutation(const LpInstance& lp, const ColumnPermutation& p) {
    const std::size_t n = lp.num_cols();
    if (p.size() != n) {
        throw DimensionMismatch("permutation of size " + std::to_string(p.size()) + " applied to " +
                                std::to_string(n) + " columns");
    }
    LpInstance out;
    out.name = lp.name;
    out.objective_name = lp.objective_name;
    out.sense = lp.sense;
    out.objective_offset = lp.objective_offset;
    out.rhs = lp.rhs;
    out.row_sense = lp.row_sense;
    out.row_range = lp.row_range;
    out.row_names = lp.row_names;
    out.objective.resize(n);
    out.col_lower.resize(n);
    out.col_upper.resize(n);
    out.col_names.resize(n);

    SparseMatrix& A = out.matrix;
    A.rows = lp.matrix.rows;
    A.cols = n;
    A.col_start.reserve(n + 1);
    A.row_index.reserve(lp.nnz());
    A.value.reserve(lp.nnz());
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t src = p[j];
        out.objective[j] = lp.objective[src];
        out.col_lower[j] = lp.col_lower[src];
        out.col_upper[j] = lp.col_upper[src];
        out.col_names[j] = lp.col_names[src];
        auto rows = lp.matrix.column_rows(src);
        auto vals = lp.matrix.column_values(src);
        A.row_index.insert(A.row_index.end(), rows.begin(), rows.end());
        A.value.insert(A.value.end(), vals.begin(), vals.end());
        A.col_start.push_back(A.value.size());
    }
    return out;
}

void ClusterSplit::validate(std::size_t n) const {
    if (members.size() != k) throw InvalidK("split lists " + std::to_string(members.size()) + " clusters, k = " + std::to_string(k));
    if (assignment.size() != n) throw DimensionMismatch("split assignment does not cover " + std::to_string(n) + " columns");
    std::vector<bool> seen(n, false);
    for (std::size_t c = 0; c < k; ++c) {
        if (members[c].empty()) throw EmptyCluster("cluster " + std::to_string(c) + " is empty");
        for (std::size_t t = 0; t < members[c].size(); ++t) {
            std::size_t j = members[c][t];
            if (j >= n || seen[j] || assignment[j] != c) {
                throw InvalidPermutation("cluster " + std::to_string(c) + " membership is inconsistent at column " +
                                         std::to_string(j));
            }
            if (t > 0 && j <= members[c][t - 1]) {
                throw InvalidPermutation("cluster " + std::to_string(c) + " does not keep original column order");
            }
            seen[j] = true;
        }
    }
}

ColumnPermutation expand_cluster_permutation(const ClusterSplit& split, std::span<const std::size_t> cluster_perm) {
    check_permutation(cluster_perm, split.k);
    std::vector<std::size_t> perm;
    perm.reserve(split.assignment.size());
    for (std::size_t c : cluster_perm) {
        perm.insert(perm.end(), split.members[c].begin(), split.members[c].end());
    }
    ColumnPermutation out(std::move(perm), PermutationSource::Sampled);
    return out.is_identity() ? ColumnPermutation::identity(out.size()) : out;
}

}  // namespace lpreform
