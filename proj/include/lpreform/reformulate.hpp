#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpreform/graph.hpp"
#include "lpreform/lp_core.hpp"
#include "lpreform/nn/networks.hpp"
#include "lpreform/simplex.hpp"

namespace lpreform {

enum class SplitMethod { ContiguousBlocks, RoundRobin, ByNamePrefix };

std::string to_string(SplitMethod m);
SplitMethod parse_split_method(const std::string& s);
std::string to_string(nn::Pool p);
nn::Pool parse_pool(const std::string& s);

ClusterSplit split_variables(const LpInstance& lp, std::size_t k, SplitMethod method);

/// k x width cluster embeddings, differentiable through `var_embs`.
nn::Tensor pool_clusters(const nn::Tensor& var_embs, const ClusterSplit& split, nn::Pool pool);

/// Network weights plus the architecture they were built for.
struct Policy {
    nn::ModelDims dims;
    nn::ParamSet params;

    static Policy create(const nn::ModelDims& dims, std::uint64_t seed) { return {dims, nn::init_policy_params(dims, seed)}; }
};

struct ReformulateConfig {
    std::size_t k_clusters = 20;
    SplitMethod split_method = SplitMethod::ContiguousBlocks;
    nn::Pool pool = nn::Pool::Mean;
    FeaturizeOptions features;
    Metric metric = Metric::Iterations;
    SolverConfig solver;
    std::size_t jobs = 1;
    /// Solver used for metric evaluation; the built-in simplex when null.
    std::shared_ptr<const SolverEnvironment> env;

    const SolverEnvironment& environment() const;
};

struct PermutationSample {
    std::vector<std::size_t> cluster_perm;
    ColumnPermutation column_perm;
    nn::Tensor log_prob;  // 1x1, differentiable w.r.t. GCNN and pointer parameters
    std::optional<double> reward;
};

/// Everything one forward pass produces; training needs the embeddings for the critic.
struct PolicyForward {
    ClusterSplit split;
    nn::Tensor var_embs;
    PermutationSample sample;
};

/// Cluster count actually used for an instance: min(k_clusters, n), at least 1.
std::size_t effective_k(const ReformulateConfig& cfg, std::size_t n);

PolicyForward policy_forward(const LpInstance& lp, const BipartiteGraph& g, const Policy& policy,
                             const ReformulateConfig& cfg, nn::DecodeMode mode, std::uint64_t seed);

PermutationSample propose_permutation(const LpInstance& lp, const Policy& policy, const ReformulateConfig& cfg,
                                      nn::DecodeMode mode, std::uint64_t seed);

struct ShotResult {
    std::uint64_t seed = 0;
    PermutationSample sample;
    std::optional<double> metric;  // empty when the solve was not Optimal
    std::string failure;
};

struct KShotResult {
    double baseline = 0.0;
    std::size_t best = 0;  // index into shots
    std::vector<ShotResult> shots;

    const ShotResult& best_shot() const { return shots[best]; }
};

/// Seed of shot i, shared across calls so shot sets are nested in k_shots.
std::uint64_t shot_seed(std::uint64_t base, std::size_t shot);

/// Samples k_shots permutations and keeps the one with the lowest metric
/// (first drawn on ties). Solves run on cfg.jobs threads.
KShotResult k_shot_reformulate(const LpInstance& lp, const Policy& policy, std::size_t k_shots,
                               const ReformulateConfig& cfg, std::uint64_t seed);

nlohmann::json reformulation_report(const LpInstance& lp, const KShotResult& result);

}  // namespace lpreform
