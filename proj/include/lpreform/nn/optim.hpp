#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lpreform/nn/params.hpp"

namespace lpreform::nn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::uint64_t step = 0;
    std::map<std::string, Matrix> m;
    std::map<std::string, Matrix> v;

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Global L2 norm of the gradients of `names`.
double grad_norm(const ParamSet& p, const std::vector<std::string>& names);

/// Clips the gradients of `names` to global L2 norm `clip_norm` (no-op when
/// clip_norm <= 0), then applies one Adam descent step. Returns the pre-clip norm.
double adam_step(ParamSet& p, const std::vector<std::string>& names, AdamState& state, double lr, double clip_norm,
                 const AdamConfig& cfg = {});

/// lr0 * decay^(floor(step / interval)).
double decayed_lr(double lr0, double decay, std::uint64_t interval, std::uint64_t step);

}  // namespace lpreform::nn
