#pragma once

#include <cstddef>
#include <vector>

#include "lpreform/lp_core.hpp"

namespace lpreform {

enum class RowNorm { L2, MaxAbs };

struct FeaturizeOptions {
    RowNorm row_norm = RowNorm::L2;
};

/// Constraint/variable bipartite view of an LpInstance.
///
/// Constraint features: [rhs_norm, ub_cons_norm, lb_cons_norm]
/// Variable features:   [lb_var_norm, ub_var_norm, obj_norm]
/// Edge feature:        A_ij / norm(row i)
struct BipartiteGraph {
    static constexpr std::size_t kConsFeatures = 3;
    static constexpr std::size_t kVarFeatures = 3;

    struct Edge {
        std::size_t row;
        std::size_t col;
        double feat;
    };

    std::size_t num_cons = 0;
    std::size_t num_vars = 0;
    std::vector<double> cons_feats;  // num_cons x kConsFeatures, row-major
    std::vector<double> var_feats;   // num_vars x kVarFeatures, row-major
    std::vector<Edge> edges;         // column-major order of A
    std::vector<std::vector<std::size_t>> cons_edges;  // edge ids incident to each constraint
    std::vector<std::vector<std::size_t>> var_edges;   // edge ids incident to each variable

    double cons_feat(std::size_t i, std::size_t f) const { return cons_feats[i * kConsFeatures + f]; }
    double var_feat(std::size_t j, std::size_t f) const { return var_feats[j * kVarFeatures + f]; }
};

BipartiteGraph featurize(const LpInstance& lp, const FeaturizeOptions& options = {});

struct GraphStats {
    std::size_t m = 0;
    std::size_t n = 0;
    std::size_t nnz = 0;

    friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

GraphStats graph_stats(const BipartiteGraph& g);

/// Maps a bound onto [-1, 1]: finite values divide by (max finite |bound| + 1),
/// infinities clamp to their sign.
double normalize_bound(double value, double max_finite_abs);

}  // namespace lpreform
