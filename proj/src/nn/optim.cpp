#include "lpreform/nn/optim.hpp"

#include <cmath>

#include "lpreform/errors.hpp"

namespace lpreform::nn {

double grad_norm(const ParamSet& p, const std::vector<std::string>& names) {
    double sq = 0.0;
    for (const auto& n : names) sq += p.get(n).grad().squaredNorm();
    return std::sqrt(sq);
}

double adam_step(ParamSet& p, const std::vector<std::string>& names, AdamState& state, double lr, double clip_norm,
                 const AdamConfig& cfg) {
    const double norm = grad_norm(p, names);
    if (!std::isfinite(norm)) throw NonFinite("adam_step: non-finite gradient");
    const double factor = clip_norm > 0.0 && norm > clip_norm ? clip_norm / norm : 1.0;

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (const auto& n : names) {
        Tensor param = p.get(n);
        const Matrix g = param.grad() * factor;
        auto [mit, m_new] = state.m.try_emplace(n, Matrix::Zero(g.rows(), g.cols()));
        auto [vit, v_new] = state.v.try_emplace(n, Matrix::Zero(g.rows(), g.cols()));
        Matrix& m = mit->second;
        Matrix& v = vit->second;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        param.mutable_value().array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
        if (!param.value().allFinite()) throw NonFinite("adam_step: parameter '" + n + "' became non-finite");
    }
    return norm;
}

double decayed_lr(double lr0, double decay, std::uint64_t interval, std::uint64_t step) {
    if (interval == 0) return lr0;
    return lr0 * std::pow(decay, static_cast<double>(step / interval));
}

}  // namespace lpreform::nn
