#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpreform/graph.hpp"
#include "lpreform/nn/params.hpp"

namespace lpreform::nn {

struct ModelDims {
    int width = 64;           // GCNN embedding width
    int rounds = 2;           // message-passing rounds
    int pointer_hidden = 128; // LSTM / attention width
    int critic_hidden = 64;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Creates every parameter (GCNN, pointer, critic) in a fixed order from `seed`.
ParamSet init_policy_params(const ModelDims& dims, std::uint64_t seed);

inline const std::string kGcnnPrefix = "gcnn.";
inline const std::string kPointerPrefix = "pointer.";
inline const std::string kCriticPrefix = "critic.";

/// Running moments for one pre-norm layer during calibration.
struct Calibration {
    std::string target;
    RowVector sum;
    RowVector sum_sq;
    double count = 0.0;

    void observe(const Matrix& x);
    /// 2 x c: row 0 is the shift (-mean), row 1 the factor (1/std, or 1 when flat).
    Matrix finalize() const;
};

/// Pre-norm layer names in forward order; calibration proceeds in this order.
std::vector<std::string> gcnn_prenorm_names(const ModelDims& dims);

/// Returns the n x width variable embeddings. Layers without frozen
/// statistics act as the identity; the one named by `cal` records its input.
Tensor gcnn_forward(const BipartiteGraph& g, const ParamSet& p, const ModelDims& dims, Calibration* cal = nullptr);

/// Calibrates every pre-norm layer on `batch`, one layer at a time, and
/// freezes the statistics as buffers of `p`. Already-frozen layers are kept.
void calibrate_prenorm(ParamSet& p, const ModelDims& dims, const std::vector<const BipartiteGraph*>& batch);

enum class DecodeMode { Sample, Greedy, Forced };

struct PointerOutput {
    std::vector<std::size_t> perm;
    Tensor log_prob;                            // 1x1, differentiable
    std::vector<double> step_log_probs;         // chosen entry per step
    std::vector<std::vector<double>> step_probs; // full distribution per step
};

/// Decodes a permutation of the k rows of `cluster_embs`. Forced mode scores
/// the given `forced` order instead of choosing.
PointerOutput pointer_forward(const Tensor& cluster_embs, const ParamSet& p, const ModelDims& dims, DecodeMode mode,
                              std::uint64_t seed, const std::vector<std::size_t>* forced = nullptr);

/// Scalar baseline from mean-pooled embeddings. Gradients stop at the input.
Tensor critic_forward(const Tensor& var_embs, const ParamSet& p);

}  // namespace lpreform::nn
