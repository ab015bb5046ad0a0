#include "lpreform/graph.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

namespace lpreform {

double normalize_bound(double value, double max_finite_abs) {
    if (value == kInfinity) return 1.0;
    if (value == -kInfinity) return -1.0;
    return value / (max_finite_abs + 1.0);
}

namespace {

double max_finite_abs(const std::vector<double>& values) {
    double best = 0.0;
    for (double v : values) {
        if (std::isfinite(v)) best = std::max(best, std::abs(v));
    }
    return best;
}

}  // namespace

BipartiteGraph featurize(const LpInstance& lp, const FeaturizeOptions& options) {
    const std::size_t m = lp.num_rows();
    const std::size_t n = lp.num_cols();
    BipartiteGraph g;
    g.num_cons = m;
    g.num_vars = n;

    std::vector<double> row_norm(m, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        auto rows = lp.matrix.column_rows(j);
        auto vals = lp.matrix.column_values(j);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (options.row_norm == RowNorm::L2) {
                row_norm[rows[k]] += vals[k] * vals[k];
            } else {
                row_norm[rows[k]] = std::max(row_norm[rows[k]], std::abs(vals[k]));
            }
        }
    }
    if (options.row_norm == RowNorm::L2) {
        for (double& v : row_norm) v = std::sqrt(v);
    }

    std::vector<double> lb_cons(m), ub_cons(m);
    for (std::size_t i = 0; i < m; ++i) {
        lb_cons[i] = lp.row_lower(i);
        ub_cons[i] = lp.row_upper(i);
    }
    const double lb_cons_scale = max_finite_abs(lb_cons);
    const double ub_cons_scale = max_finite_abs(ub_cons);
    g.cons_feats.resize(m * BipartiteGraph::kConsFeatures);
    for (std::size_t i = 0; i < m; ++i) {
        double rhs = lp.rhs[i];
        if (row_norm[i] > 0.0) {
            rhs /= row_norm[i];
        } else {
            spdlog::warn("featurize: row '{}' has no nonzeros, rhs feature left unnormalized", lp.row_names[i]);
        }
        g.cons_feats[i * 3 + 0] = rhs;
        g.cons_feats[i * 3 + 1] = normalize_bound(ub_cons[i], ub_cons_scale);
        g.cons_feats[i * 3 + 2] = normalize_bound(lb_cons[i], lb_cons_scale);
    }

    const double lb_var_scale = max_finite_abs(lp.col_lower);
    const double ub_var_scale = max_finite_abs(lp.col_upper);
    double cost_scale = 0.0;
    for (double c : lp.objective) cost_scale = std::max(cost_scale, std::abs(c));
    if (cost_scale == 0.0) cost_scale = 1.0;
    g.var_feats.resize(n * BipartiteGraph::kVarFeatures);
    for (std::size_t j = 0; j < n; ++j) {
        g.var_feats[j * 3 + 0] = normalize_bound(lp.col_lower[j], lb_var_scale);
        g.var_feats[j * 3 + 1] = normalize_bound(lp.col_upper[j], ub_var_scale);
        g.var_feats[j * 3 + 2] = lp.objective[j] / cost_scale;
    }

    g.edges.reserve(lp.nnz());
    g.cons_edges.resize(m);
    g.var_edges.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        auto rows = lp.matrix.column_rows(j);
        auto vals = lp.matrix.column_values(j);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            std::size_t id = g.edges.size();
            g.edges.push_back({rows[k], j, vals[k] / row_norm[rows[k]]});
            g.cons_edges[rows[k]].push_back(id);
            g.var_edges[j].push_back(id);
        }
    }
    return g;
}

GraphStats graph_stats(const BipartiteGraph& g) { return {g.num_cons, g.num_vars, g.edges.size()}; }

}  // namespace lpreform
