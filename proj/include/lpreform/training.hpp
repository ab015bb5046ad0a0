#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpreform/nn/checkpoint.hpp"
#include "lpreform/nn/optim.hpp"
#include "lpreform/reformulate.hpp"

namespace lpreform {

enum class RewardMode { Raw, Relative };

std::string to_string(RewardMode m);
RewardMode parse_reward_mode(const std::string& s);

/// Reward of one reformulation. Relative divides by max(baseline, 1).
double reward(double baseline, double permuted, RewardMode mode);

struct TrainConfig {
    std::uint64_t steps = 40000;
    std::size_t batch_size = 8;
    double lr = 1e-4;
    double lr_decay = 0.96;
    std::uint64_t decay_interval = 1000;
    double clip_norm = 0.0;  // global gradient norm per parameter group; 0 disables
    RewardMode reward_mode = RewardMode::Raw;
    std::uint64_t seed = 1;
    std::size_t k_shot_eval = 3;
    std::size_t train_size = 640;
    std::size_t val_size = 320;
    nn::ModelDims dims;
    ReformulateConfig reform;  // clusters, pooling, split, metric, solver and worker count

    /// Checkpoint and metrics CSV go here; nothing is written when empty.
    std::filesystem::path out_dir;
    std::uint64_t checkpoint_every = 1000;

    /// T=5000 and k=5 for the desk-scale item placement run.
    static TrainConfig desk();
    static TrainConfig paper();

    void validate() const;
    nlohmann::json to_json() const;
};

struct RewardRecord {
    std::size_t instance = 0;  // index into the training set
    double baseline_iterations = 0.0;
    double permuted_iterations = 0.0;
    double reward = 0.0;
    double baseline_prediction = 0.0;
};

struct StepLog {
    std::uint64_t step = 0;  // 1-based
    double mean_reward = 0.0;
    double critic_loss = 0.0;
    double lr = 0.0;
    double wall_time = 0.0;  // seconds since the start of this process's run
    std::size_t skipped = 0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const StepLog& s);

/// Everything needed to continue training bit-exactly.
struct TrainState {
    Policy policy;
    nn::AdamState policy_opt;
    nn::AdamState critic_opt;
    std::uint64_t step = 0;
    std::string rng_state;  // draws of batch members
};

TrainState initial_state(const TrainConfig& cfg);
nn::Checkpoint to_checkpoint(const TrainState& s, const TrainConfig& cfg);
TrainState from_checkpoint(const nn::Checkpoint& ckpt);
/// Loads a checkpoint written by train() and returns only the policy.
Policy load_policy(const std::filesystem::path& path);

inline const std::string kCheckpointFile = "checkpoint.ckpt";
inline const std::string kMetricsFile = "metrics.csv";

struct TrainResult {
    TrainState state;
    std::vector<StepLog> log;
    std::vector<std::size_t> dropped;  // training instances rejected by the baseline screen
};

/// REINFORCE with a learned baseline. Each step draws batch_size instances with
/// replacement, samples one permutation per instance, and takes one Adam step
/// on the policy (GCNN and pointer) and one on the critic. Runs until
/// state.step == cfg.steps, starting from `resume` when given.
TrainResult train(const TrainConfig& cfg, const std::vector<LpInstance>& instances,
                  std::optional<TrainState> resume = std::nullopt);

/// One training step's policy and critic losses for fixed rewards, exposed so
/// the gradient estimator can be checked directly. Returns the summed loss
/// -(1/B) sum (R_i - b_i) log p_i + (1/B) sum (b_i - R_i)^2 on `policy.params`.
nn::Tensor surrogate_loss(const std::vector<nn::Tensor>& log_probs, const std::vector<nn::Tensor>& predictions,
                          const std::vector<double>& rewards);

struct EvalConfig {
    std::size_t k_shots = 3;
    nn::DecodeMode mode = nn::DecodeMode::Sample;  // Greedy takes one deterministic shot
    std::uint64_t seed = 1;
    ReformulateConfig reform;
};

struct EvalRecord {
    std::string instance;
    double baseline_iterations = 0.0;
    double best_iterations = 0.0;
    double ratio = 0.0;
    double baseline_time = 0.0;
    double best_time = 0.0;
    std::size_t best_shot = 0;
    std::vector<std::size_t> cluster_perm;
    std::string failure;  // empty on success

    bool ok() const { return failure.empty(); }
};

struct EvalReport {
    std::vector<EvalRecord> records;
    std::size_t failures = 0;
    double mean_ratio = 0.0;
    double mean_iteration_reduction = 0.0;  // 1 - ratio, averaged
    double stderr_iteration_reduction = 0.0;
    double mean_time_reduction = 0.0;
    double stderr_time_reduction = 0.0;
    double fraction_improved = 0.0;  // share of successful instances with ratio < 1

    /// Sorted (ratio, cumulative probability) pairs over successful instances.
    std::vector<std::pair<double, double>> ratio_cdf() const;
    nlohmann::json summary() const;
};

/// Per-instance baseline and k-shot solves; failures are recorded, not thrown.
EvalReport evaluate(const Policy& policy, const std::vector<LpInstance>& instances, const EvalConfig& cfg);

/// Columns: instance, baseline_iterations, best_iterations, ratio, best_shot, cluster_perm, failure.
/// Timing is left out so the file is reproducible.
std::string evaluation_csv(const EvalReport& report);
std::string ratio_cdf_csv(const EvalReport& report);

struct OracleResult {
    std::vector<std::vector<std::size_t>> perms;  // every cluster permutation in lexicographic order
    std::vector<std::optional<double>> metric;    // empty where the solve failed
    std::size_t best = 0;

    /// Index of `perm` in the table.
    std::size_t find(const std::vector<std::size_t>& perm) const;
    /// Whether entry q is at or below the table's `fraction` quantile, taken as
    /// the value at sorted position floor(fraction * (N - 1)).
    bool in_bottom(std::size_t q, double fraction) const;
};

/// Solves the instance under every ordering of the split's clusters (k <= 9).
OracleResult brute_force_oracle(const LpInstance& lp, const ClusterSplit& split, const ReformulateConfig& cfg);

std::string oracle_csv(const OracleResult& r);

/// A uniformly random cluster permutation (Fisher-Yates).
std::vector<std::size_t> random_cluster_permutation(std::size_t k, Rng& rng);

}  // namespace lpreform
