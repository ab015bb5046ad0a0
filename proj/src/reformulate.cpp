#include "lpreform/reformulate.hpp"

#include <algorithm>
#include <cctype>

#include "lpreform/errors.hpp"
#include "lpreform/parallel.hpp"
#include "lpreform/random.hpp"

namespace lpreform {

std::string to_string(SplitMethod m) {
    switch (m) {
        case SplitMethod::ContiguousBlocks: return "contiguous";
        case SplitMethod::RoundRobin: return "round-robin";
        case SplitMethod::ByNamePrefix: return "name-prefix";
    }
    return "?";
}

SplitMethod parse_split_method(const std::string& s) {
    if (s == "contiguous") return SplitMethod::ContiguousBlocks;
    if (s == "round-robin") return SplitMethod::RoundRobin;
    if (s == "name-prefix") return SplitMethod::ByNamePrefix;
    throw ConfigError("unknown split method '" + s + "' (expected contiguous, round-robin or name-prefix)");
}

std::string to_string(nn::Pool p) {
    switch (p) {
        case nn::Pool::Mean: return "mean";
        case nn::Pool::Max: return "max";
        case nn::Pool::Min: return "min";
    }
    return "?";
}

nn::Pool parse_pool(const std::string& s) {
    if (s == "mean") return nn::Pool::Mean;
    if (s == "max") return nn::Pool::Max;
    if (s == "min") return nn::Pool::Min;
    throw ConfigError("unknown pooling '" + s + "' (expected mean, max or min)");
}

namespace {

ClusterSplit from_groups(std::vector<std::vector<std::size_t>> groups, std::size_t n) {
    ClusterSplit s;
    s.k = groups.size();
    s.assignment.assign(n, 0);
    for (std::size_t c = 0; c < groups.size(); ++c) {
        std::sort(groups[c].begin(), groups[c].end());
        for (std::size_t j : groups[c]) s.assignment[j] = c;
    }
    s.members = std::move(groups);
    s.validate(n);
    return s;
}

std::vector<std::vector<std::size_t>> contiguous(std::size_t n, std::size_t k) {
    std::vector<std::vector<std::size_t>> groups(k);
    const std::size_t block = (n + k - 1) / k;
    if (block * (k - 1) < n) {
        for (std::size_t j = 0; j < n; ++j) groups[j / block].push_back(j);
        return groups;
    }
    // ceil-sized blocks would leave trailing clusters empty; balance instead.
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t j = 0;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t t = 0; t < base + (c < extra ? 1 : 0); ++t) groups[c].push_back(j++);
    }
    return groups;
}

std::string name_prefix(const std::string& name) {
    auto it = std::find_if(name.begin(), name.end(), [](unsigned char ch) { return std::isdigit(ch); });
    return std::string(name.begin(), it);
}

std::vector<std::vector<std::size_t>> by_prefix(const LpInstance& lp, std::size_t k) {
    std::vector<std::string> order;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t j = 0; j < lp.num_cols(); ++j) {
        std::string pre = name_prefix(lp.col_names[j]);
        auto it = std::find(order.begin(), order.end(), pre);
        if (it == order.end()) {
            order.push_back(pre);
            groups.emplace_back();
            it = order.end() - 1;
        }
        groups[static_cast<std::size_t>(it - order.begin())].push_back(j);
    }
    while (groups.size() > k) {
        // Smallest group (first on ties) merges into its smaller neighbour (left on ties).
        std::size_t g = 0;
        for (std::size_t i = 1; i < groups.size(); ++i) {
            if (groups[i].size() < groups[g].size()) g = i;
        }
        std::size_t into;
        if (g == 0) {
            into = 1;
        } else if (g + 1 == groups.size()) {
            into = g - 1;
        } else {
            into = groups[g - 1].size() <= groups[g + 1].size() ? g - 1 : g + 1;
        }
        groups[into].insert(groups[into].end(), groups[g].begin(), groups[g].end());
        std::sort(groups[into].begin(), groups[into].end());
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(g));
    }
    while (groups.size() < k) {
        // Fewer prefixes than clusters: halve the largest group (first on ties).
        std::size_t g = 0;
        for (std::size_t i = 1; i < groups.size(); ++i) {
            if (groups[i].size() > groups[g].size()) g = i;
        }
        const std::size_t half = (groups[g].size() + 1) / 2;
        std::vector<std::size_t> tail(groups[g].begin() + static_cast<std::ptrdiff_t>(half), groups[g].end());
        groups[g].resize(half);
        groups.insert(groups.begin() + static_cast<std::ptrdiff_t>(g) + 1, std::move(tail));
    }
    return groups;
}

}  // namespace

ClusterSplit split_variables(const LpInstance& lp, std::size_t k, SplitMethod method) {
    const std::size_t n = lp.num_cols();
    if (k < 1 || k > n) {
        throw InvalidK("split_variables: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    switch (method) {
        case SplitMethod::ContiguousBlocks: return from_groups(contiguous(n, k), n);
        case SplitMethod::RoundRobin: {
            std::vector<std::vector<std::size_t>> groups(k);
            for (std::size_t j = 0; j < n; ++j) groups[j % k].push_back(j);
            return from_groups(std::move(groups), n);
        }
        case SplitMethod::ByNamePrefix: return from_groups(by_prefix(lp, k), n);
    }
    throw InvalidK("split_variables: unknown method");
}

nn::Tensor pool_clusters(const nn::Tensor& var_embs, const ClusterSplit& split, nn::Pool pool) {
    if (split.assignment.size() != static_cast<std::size_t>(var_embs.rows())) {
        throw DimensionMismatch("pool_clusters: split covers " + std::to_string(split.assignment.size()) +
                                " variables, embeddings have " + std::to_string(var_embs.rows()) + " rows");
    }
    return nn::segment_pool(var_embs, split.members, pool);
}

const SolverEnvironment& ReformulateConfig::environment() const {
    static const SimplexEnvironment simplex;
    return env ? *env : simplex;
}

std::size_t effective_k(const ReformulateConfig& cfg, std::size_t n) {
    return std::max<std::size_t>(1, std::min(cfg.k_clusters, n));
}

PolicyForward policy_forward(const LpInstance& lp, const BipartiteGraph& g, const Policy& policy,
                             const ReformulateConfig& cfg, nn::DecodeMode mode, std::uint64_t seed) {
    if (lp.num_cols() == 0) throw InvalidInstance("policy_forward: instance has no columns");
    PolicyForward out;
    out.split = split_variables(lp, effective_k(cfg, lp.num_cols()), cfg.split_method);
    out.var_embs = nn::gcnn_forward(g, policy.params, policy.dims);
    nn::Tensor sigma = pool_clusters(out.var_embs, out.split, cfg.pool);
    auto ptr = nn::pointer_forward(sigma, policy.params, policy.dims, mode, seed);
    out.sample.column_perm = expand_cluster_permutation(out.split, ptr.perm);
    out.sample.cluster_perm = std::move(ptr.perm);
    out.sample.log_prob = ptr.log_prob;
    return out;
}

PermutationSample propose_permutation(const LpInstance& lp, const Policy& policy, const ReformulateConfig& cfg,
                                      nn::DecodeMode mode, std::uint64_t seed) {
    return policy_forward(lp, featurize(lp, cfg.features), policy, cfg, mode, seed).sample;
}

std::uint64_t shot_seed(std::uint64_t base, std::size_t shot) { return derive_seed(base, shot); }

KShotResult k_shot_reformulate(const LpInstance& lp, const Policy& policy, std::size_t k_shots,
                               const ReformulateConfig& cfg, std::uint64_t seed) {
    if (k_shots < 1) throw ConfigError("k_shot_reformulate: k_shots must be at least 1");
    KShotResult result;
    result.baseline =
        evaluate_metric(cfg.environment(), lp, ColumnPermutation::identity(lp.num_cols()), cfg.metric, cfg.solver);

    const BipartiteGraph g = featurize(lp, cfg.features);
    result.shots.resize(k_shots);
    parallel_for(k_shots, cfg.jobs, [&](std::size_t i) {
        ShotResult& shot = result.shots[i];
        shot.seed = shot_seed(seed, i);
        shot.sample = policy_forward(lp, g, policy, cfg, nn::DecodeMode::Sample, shot.seed).sample;
        try {
            shot.metric = evaluate_metric(cfg.environment(), lp, shot.sample.column_perm, cfg.metric, cfg.solver);
            shot.sample.reward = result.baseline - *shot.metric;
        } catch (const NonOptimalStatus& e) {
            shot.failure = e.what();
        }
    });

    bool found = false;
    for (std::size_t i = 0; i < k_shots; ++i) {
        const auto& m = result.shots[i].metric;
        if (m && (!found || *m < *result.shots[result.best].metric)) {
            result.best = i;
            found = true;
        }
    }
    if (!found) throw AllSolvesFailed("k_shot_reformulate: no shot solved '" + lp.name + "' to optimality");
    return result;
}

nlohmann::json reformulation_report(const LpInstance& lp, const KShotResult& result) {
    const ShotResult& best = result.best_shot();
    nlohmann::json shots = nlohmann::json::array();
    for (const auto& s : result.shots) {
        nlohmann::json j{{"seed", s.seed}, {"cluster_perm", s.sample.cluster_perm}};
        if (s.metric) {
            j["iterations"] = *s.metric;
        } else {
            j["iterations"] = nullptr;
            j["failure"] = s.failure;
        }
        shots.push_back(std::move(j));
    }
    nlohmann::json report{
        {"instance", lp.name},
        {"m", lp.num_rows()},
        {"n", lp.num_cols()},
        {"nnz", lp.nnz()},
        {"baseline_iterations", result.baseline},
        {"shots", std::move(shots)},
        {"best_shot", result.best},
        {"cluster_perm", best.sample.cluster_perm},
        {"column_perm", best.sample.column_perm.perm()},
        {"improvement", result.baseline - *best.metric},
    };
    // A zero-iteration baseline has no meaningful ratio unless the shot also took zero.
    if (result.baseline > 0.0) {
        report["ratio"] = *best.metric / result.baseline;
    } else {
        report["ratio"] = *best.metric == 0.0 ? nlohmann::json(1.0) : nlohmann::json(nullptr);
    }
    return report;
}

}  // namespace lpreform
