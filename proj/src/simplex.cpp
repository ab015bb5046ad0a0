#include "lpreform/simplex.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>

#include "lpreform/errors.hpp"

namespace lpreform {

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::Infeasible: return "Infeasible";
        case SolveStatus::Unbounded: return "Unbounded";
        case SolveStatus::IterationLimit: return "IterationLimit";
        case SolveStatus::NumericalError: return "NumericalError";
    }
    return "?";
}

const char* to_string(Pricing pricing) { return pricing == Pricing::Dantzig ? "Dantzig" : "Bland"; }

const char* to_string(Metric metric) { return metric == Metric::Iterations ? "Iterations" : "SolveTime"; }

namespace {
std::string lower(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}
}  // namespace

Metric parse_metric(const std::string& s) {
    const std::string l = lower(s);
    if (l == "iterations") return Metric::Iterations;
    if (l == "solvetime" || l == "solve-time" || l == "time") return Metric::SolveTime;
    throw ConfigError("unknown metric '" + s + "' (expected iterations or solvetime)");
}

Pricing parse_pricing(const std::string& s) {
    const std::string l = lower(s);
    if (l == "dantzig") return Pricing::Dantzig;
    if (l == "bland") return Pricing::Bland;
    throw ConfigError("unknown pricing '" + s + "' (expected dantzig or bland)");
}

void SolverConfig::validate() const {
    if (!(primal_tolerance > 0.0) || !(dual_tolerance > 0.0) || !(pivot_tolerance > 0.0)) {
        throw ConfigError("solver tolerances must be positive");
    }
    if (iteration_limit == 0) throw ConfigError("iteration_limit must be positive");
    if (refactor_interval == 0) throw ConfigError("refactor_interval must be positive");
}

std::vector<std::size_t> Basis::nonbasic() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < status.size(); ++j) {
        if (status[j] != BoundStatus::Basic) out.push_back(j);
    }
    return out;
}

namespace {

BoundStatus resting_status(double lower, double upper) {
    if (std::isfinite(lower)) return BoundStatus::AtLower;
    if (std::isfinite(upper)) return BoundStatus::AtUpper;
    return BoundStatus::AtZero;
}

double resting_value(BoundStatus s, double lower, double upper) {
    switch (s) {
        case BoundStatus::AtLower: return lower;
        case BoundStatus::AtUpper: return upper;
        default: return 0.0;
    }
}

}  // namespace

Basis initial_slack_basis(const StandardFormLp& lp) {
    const std::size_t m = lp.num_rows();
    const std::size_t n = lp.num_cols();
    Basis basis;
    basis.num_structural = n;
    basis.status.assign(n + m, BoundStatus::AtLower);
    for (std::size_t j = 0; j < n; ++j) basis.status[j] = resting_status(lp.col_lower[j], lp.col_upper[j]);
    basis.basic.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t col = lp.row_slack[i] ? *lp.row_slack[i] : n + i;
        basis.basic[i] = col;
        basis.status[col] = BoundStatus::Basic;
    }
    return basis;
}

namespace {

/// Working state of one solve. Artificial column n+i is art_sign[i] * e_i.
class RevisedSimplex {
public:
    RevisedSimplex(const StandardFormLp& lp, const SolverConfig& cfg)
        : lp_(lp), cfg_(cfg), m_(lp.num_rows()), n_(lp.num_cols()), total_(n_ + m_) {
        lower_.assign(total_, 0.0);
        upper_.assign(total_, 0.0);
        cost_.assign(total_, 0.0);
        x_.assign(total_, 0.0);
        art_sign_.assign(m_, 1.0);
        for (double b : lp.rhs) rhs_scale_ = std::max(rhs_scale_, 1.0 + std::abs(b));
        for (std::size_t j = 0; j < n_; ++j) {
            lower_[j] = lp.col_lower[j];
            upper_[j] = lp.col_upper[j];
        }
    }

    SolveResult run() {
        SolveResult result;
        SolveMetrics& metrics = result.metrics;
        crash();

        auto t0 = std::chrono::steady_clock::now();
        SolveStatus status = SolveStatus::Optimal;
        if (artificial_count_ > 0) {
            for (std::size_t i = 0; i < m_; ++i) cost_[n_ + i] = 1.0;
            status = iterate(metrics.phase1_iterations, /*phase_one=*/true);
            if (status == SolveStatus::Optimal) {
                double infeasibility = 0.0;
                for (std::size_t i = 0; i < m_; ++i) infeasibility += x_[n_ + i];
                if (infeasibility > cfg_.primal_tolerance) status = SolveStatus::Infeasible;
            }
            for (std::size_t i = 0; i < m_; ++i) {
                cost_[n_ + i] = 0.0;
                upper_[n_ + i] = 0.0;
            }
        }
        if (status == SolveStatus::Optimal) {
            for (std::size_t j = 0; j < n_; ++j) cost_[j] = lp_.objective[j];
            status = iterate(metrics.phase2_iterations, /*phase_one=*/false);
        }
        auto t1 = std::chrono::steady_clock::now();

        metrics.iterations = metrics.phase1_iterations + metrics.phase2_iterations;
        metrics.solve_time = std::chrono::duration<double>(t1 - t0).count();
        metrics.max_inf = max_infeasibility();
        if (status == SolveStatus::Optimal && metrics.max_inf > 1e-6) status = SolveStatus::NumericalError;
        metrics.status = status;

        BasicSolution& sol = result.solution;
        sol.x.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
        sol.objective = lp_.original_objective(sol.x);
        sol.basis.num_structural = n_;
        sol.basis.basic = head_;
        sol.basis.status = status_;
        result.x_original = lp_.original_point(sol.x);
        return result;
    }

private:
    // Column access over structural and artificial columns.
    template <typename F>
    void for_column(std::size_t j, F&& f) const {
        if (j < n_) {
            auto rows = lp_.matrix.column_rows(j);
            auto vals = lp_.matrix.column_values(j);
            for (std::size_t k = 0; k < rows.size(); ++k) f(rows[k], vals[k]);
        } else {
            f(j - n_, art_sign_[j - n_]);
        }
    }

    /// Slack basis, with an artificial replacing any slack whose value would
    /// violate its bounds at the resting point of the nonbasic columns.
    void crash() {
        Basis basis = initial_slack_basis(lp_);
        status_ = basis.status;
        head_ = basis.basic;
        for (std::size_t j = 0; j < n_; ++j) {
            if (status_[j] != BoundStatus::Basic) x_[j] = resting_value(status_[j], lower_[j], upper_[j]);
        }
        std::vector<double> residual = lp_.rhs;
        for (std::size_t j = 0; j < n_; ++j) {
            if (status_[j] == BoundStatus::Basic || x_[j] == 0.0) continue;
            for_column(j, [&](std::size_t i, double a) { residual[i] -= a * x_[j]; });
        }
        for (std::size_t i = 0; i < m_; ++i) {
            std::size_t col = head_[i];
            if (col < n_) {
                double coef = lp_.matrix.column_values(col)[0];
                double value = residual[i] / coef;
                if (value >= lower_[col] - cfg_.primal_tolerance && value <= upper_[col] + cfg_.primal_tolerance) {
                    x_[col] = std::clamp(value, lower_[col], upper_[col]);
                    continue;
                }
                // Slack rests at its nearest bound and an artificial absorbs the rest.
                double bound = value < lower_[col] ? lower_[col] : upper_[col];
                status_[col] = value < lower_[col] ? BoundStatus::AtLower : BoundStatus::AtUpper;
                x_[col] = bound;
                residual[i] -= coef * bound;
                std::size_t art = n_ + i;
                status_[art] = BoundStatus::Basic;
                head_[i] = art;
            }
            art_sign_[i] = residual[i] < 0.0 ? -1.0 : 1.0;
            x_[n_ + i] = std::abs(residual[i]);
            upper_[n_ + i] = kInfinity;
            ++artificial_count_;
        }
        for (std::size_t i = 0; i < m_; ++i) {
            if (status_[n_ + i] != BoundStatus::Basic) {
                status_[n_ + i] = BoundStatus::AtLower;
                upper_[n_ + i] = 0.0;
            }
        }
        refactor();
    }

    void refactor() {
        // Dense LU with partial pivoting of B, then B^{-1} by solving against I.
        std::vector<double> lu(m_ * m_, 0.0);
        for (std::size_t c = 0; c < m_; ++c) {
            for_column(head_[c], [&](std::size_t i, double a) { lu[i * m_ + c] = a; });
        }
        std::vector<std::size_t> piv(m_);
        for (std::size_t k = 0; k < m_; ++k) {
            std::size_t p = k;
            double best = std::abs(lu[k * m_ + k]);
            for (std::size_t i = k + 1; i < m_; ++i) {
                double v = std::abs(lu[i * m_ + k]);
                if (v > best) {
                    best = v;
                    p = i;
                }
            }
            if (best < 1e-12) throw RankDeficient(k);
            piv[k] = p;
            if (p != k) {
                for (std::size_t c = 0; c < m_; ++c) std::swap(lu[k * m_ + c], lu[p * m_ + c]);
            }
            double d = lu[k * m_ + k];
            for (std::size_t i = k + 1; i < m_; ++i) {
                double f = lu[i * m_ + k] / d;
                lu[i * m_ + k] = f;
                if (f == 0.0) continue;
                for (std::size_t c = k + 1; c < m_; ++c) lu[i * m_ + c] -= f * lu[k * m_ + c];
            }
        }
        binv_.assign(m_ * m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) binv_[i * m_ + i] = 1.0;
        // Apply row swaps, then forward and backward substitution on every column of I.
        for (std::size_t k = 0; k < m_; ++k) {
            if (piv[k] != k) {
                for (std::size_t c = 0; c < m_; ++c) std::swap(binv_[k * m_ + c], binv_[piv[k] * m_ + c]);
            }
        }
        for (std::size_t k = 0; k < m_; ++k) {
            for (std::size_t i = k + 1; i < m_; ++i) {
                double f = lu[i * m_ + k];
                if (f == 0.0) continue;
                for (std::size_t c = 0; c < m_; ++c) binv_[i * m_ + c] -= f * binv_[k * m_ + c];
            }
        }
        for (std::size_t kk = m_; kk-- > 0;) {
            double d = lu[kk * m_ + kk];
            for (std::size_t c = 0; c < m_; ++c) binv_[kk * m_ + c] /= d;
            for (std::size_t i = 0; i < kk; ++i) {
                double f = lu[i * m_ + kk];
                if (f == 0.0) continue;
                for (std::size_t c = 0; c < m_; ++c) binv_[i * m_ + c] -= f * binv_[kk * m_ + c];
            }
        }
        pivots_since_refactor_ = 0;
        recompute_basics();
    }

    /// x_B = B^{-1} (b - A_N x_N)
    void recompute_basics() {
        std::vector<double> r = lp_.rhs;
        for (std::size_t j = 0; j < total_; ++j) {
            if (status_[j] == BoundStatus::Basic || x_[j] == 0.0) continue;
            for_column(j, [&](std::size_t i, double a) { r[i] -= a * x_[j]; });
        }
        for (std::size_t i = 0; i < m_; ++i) {
            double v = 0.0;
            const double* row = &binv_[i * m_];
            for (std::size_t k = 0; k < m_; ++k) v += row[k] * r[k];
            x_[head_[i]] = v;
        }
    }

    double residual_norm() const {
        std::vector<double> r = lp_.rhs;
        for (std::size_t j = 0; j < total_; ++j) {
            if (x_[j] == 0.0) continue;
            for_column(j, [&](std::size_t i, double a) { r[i] -= a * x_[j]; });
        }
        double worst = 0.0;
        for (double v : r) worst = std::max(worst, std::abs(v));
        return worst;
    }

    void compute_duals(std::vector<double>& y) const {
        y.assign(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            double cb = cost_[head_[i]];
            if (cb == 0.0) continue;
            const double* row = &binv_[i * m_];
            for (std::size_t k = 0; k < m_; ++k) y[k] += cb * row[k];
        }
    }

    double reduced_cost(std::size_t j, const std::vector<double>& y) const {
        double d = cost_[j];
        for_column(j, [&](std::size_t i, double a) { d -= y[i] * a; });
        return d;
    }

    /// Improvement available from moving nonbasic column j; 0 if not eligible.
    double eligibility(std::size_t j, double d) const {
        switch (status_[j]) {
            case BoundStatus::AtLower: return (d < -cfg_.dual_tolerance && upper_[j] > lower_[j]) ? -d : 0.0;
            case BoundStatus::AtUpper: return (d > cfg_.dual_tolerance && upper_[j] > lower_[j]) ? d : 0.0;
            case BoundStatus::AtZero: return std::abs(d) > cfg_.dual_tolerance ? std::abs(d) : 0.0;
            default: return 0.0;
        }
    }

    SolveStatus iterate(std::size_t& counter, bool phase_one) {
        std::vector<double> y;
        std::vector<double> alpha(m_);
        const std::size_t candidates = phase_one ? total_ : n_;
        std::size_t stall = 0;
        bool rechecked = false;
        while (true) {
            if (total_iterations_ >= cfg_.iteration_limit) return SolveStatus::IterationLimit;
            if (pivots_since_refactor_ >= cfg_.refactor_interval) refactor();

            compute_duals(y);
            bool bland = cfg_.pricing == Pricing::Bland || stall > cfg_.bland_stall_threshold;

            // Pricing: largest improvement rate, lowest index on ties (or first eligible under Bland).
            std::size_t q = total_;
            double best = 0.0;
            double best_d = 0.0;
            for (std::size_t j = 0; j < candidates; ++j) {
                if (status_[j] == BoundStatus::Basic) continue;
                double d = reduced_cost(j, y);
                double score = eligibility(j, d);
                if (score <= 0.0) continue;
                if (bland) {
                    q = j;
                    best_d = d;
                    break;
                }
                if (score > best * (1.0 + 1e-12) + 1e-14) {
                    best = score;
                    q = j;
                    best_d = d;
                }
            }
            if (q == total_) {
                // Confirm optimality on a fresh factorization before stopping.
                if (!rechecked && pivots_since_refactor_ > 0) {
                    refactor();
                    rechecked = true;
                    continue;
                }
                return SolveStatus::Optimal;
            }
            rechecked = false;

            // alpha = B^{-1} a_q
            std::fill(alpha.begin(), alpha.end(), 0.0);
            for_column(q, [&](std::size_t r, double a) {
                for (std::size_t i = 0; i < m_; ++i) alpha[i] += binv_[i * m_ + r] * a;
            });
            const double dir = best_d < 0.0 ? 1.0 : -1.0;

            // Ratio test over basic variables plus the entering column's own bound flip.
            double theta = kInfinity;
            std::size_t leave = m_;
            bool leave_to_upper = false;
            const double tie = 1e-12;
            for (std::size_t i = 0; i < m_; ++i) {
                if (std::abs(alpha[i]) <= cfg_.pivot_tolerance) continue;
                std::size_t col = head_[i];
                double rate = -dir * alpha[i];
                double ratio;
                bool to_upper;
                if (rate < 0.0) {
                    if (!std::isfinite(lower_[col])) continue;
                    ratio = std::max(0.0, (x_[col] - lower_[col]) / -rate);
                    to_upper = false;
                } else {
                    if (!std::isfinite(upper_[col])) continue;
                    ratio = std::max(0.0, (upper_[col] - x_[col]) / rate);
                    to_upper = true;
                }
                bool take = false;
                if (ratio < theta - tie) {
                    take = true;
                } else if (ratio <= theta + tie && leave < m_) {
                    std::size_t incumbent = head_[leave];
                    if (bland) {
                        take = col < incumbent;
                    } else {
                        double a = std::abs(alpha[i]);
                        double b = std::abs(alpha[leave]);
                        take = a > b || (a == b && col < incumbent);
                    }
                }
                if (take) {
                    theta = ratio;
                    leave = i;
                    leave_to_upper = to_upper;
                }
            }
            double flip = upper_[q] - lower_[q];
            bool bound_flip = std::isfinite(flip) && flip <= theta;
            if (bound_flip) theta = flip;
            if (!std::isfinite(theta)) return SolveStatus::Unbounded;

            ++counter;
            ++total_iterations_;
            stall = theta <= 1e-12 ? stall + 1 : 0;

            x_[q] += dir * theta;
            for (std::size_t i = 0; i < m_; ++i) x_[head_[i]] -= theta * dir * alpha[i];

            if (bound_flip) {
                status_[q] = dir > 0.0 ? BoundStatus::AtUpper : BoundStatus::AtLower;
                x_[q] = dir > 0.0 ? upper_[q] : lower_[q];
            } else {
                std::size_t out = head_[leave];
                status_[out] = leave_to_upper ? BoundStatus::AtUpper : BoundStatus::AtLower;
                x_[out] = leave_to_upper ? upper_[out] : lower_[out];
                if (out >= n_) upper_[out] = 0.0;
                head_[leave] = q;
                status_[q] = BoundStatus::Basic;
                pivot_inverse(leave, alpha);
                ++pivots_since_refactor_;
            }
            if (residual_norm() > 1e-7 * rhs_scale_) refactor();
        }
    }

    void pivot_inverse(std::size_t r, const std::vector<double>& alpha) {
        double* pivot_row = &binv_[r * m_];
        double inv = 1.0 / alpha[r];
        for (std::size_t c = 0; c < m_; ++c) pivot_row[c] *= inv;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r || alpha[i] == 0.0) continue;
            double f = alpha[i];
            double* row = &binv_[i * m_];
            for (std::size_t c = 0; c < m_; ++c) row[c] -= f * pivot_row[c];
        }
    }

    /// max(|A x - b|, bound violation, dual infeasibility) on the structural columns.
    double max_infeasibility() const {
        double worst = 0.0;
        std::vector<double> r = lp_.rhs;
        for (std::size_t j = 0; j < n_; ++j) {
            worst = std::max({worst, lower_[j] - x_[j], x_[j] - upper_[j]});
            if (x_[j] == 0.0) continue;
            for_column(j, [&](std::size_t i, double a) { r[i] -= a * x_[j]; });
        }
        for (double v : r) worst = std::max(worst, std::abs(v));
        std::vector<double> y;
        compute_duals(y);
        for (std::size_t j = 0; j < n_; ++j) {
            double d = reduced_cost(j, y);
            switch (status_[j]) {
                case BoundStatus::Basic: worst = std::max(worst, std::abs(d)); break;
                case BoundStatus::AtLower: worst = std::max(worst, upper_[j] > lower_[j] ? -d : 0.0); break;
                case BoundStatus::AtUpper: worst = std::max(worst, upper_[j] > lower_[j] ? d : 0.0); break;
                case BoundStatus::AtZero: worst = std::max(worst, std::abs(d)); break;
            }
        }
        return worst;
    }

    const StandardFormLp& lp_;
    const SolverConfig& cfg_;
    std::size_t m_;
    std::size_t n_;
    std::size_t total_;
    std::vector<double> lower_, upper_, cost_, x_, art_sign_;
    std::vector<BoundStatus> status_;
    std::vector<std::size_t> head_;
    std::vector<double> binv_;
    double rhs_scale_ = 1.0;
    std::size_t artificial_count_ = 0;
    std::size_t pivots_since_refactor_ = 0;
    std::size_t total_iterations_ = 0;
};

}  // namespace

SolveResult SimplexEnvironment::solve(const LpInstance& lp, const SolverConfig& cfg) const {
    cfg.validate();
    StandardFormLp sf = to_standard_form(lp);
    return RevisedSimplex(sf, cfg).run();
}

SolveResult solve(const LpInstance& lp, const SolverConfig& cfg) { return SimplexEnvironment().solve(lp, cfg); }

double evaluate_metric(const SolverEnvironment& env, const LpInstance& lp, const ColumnPermutation& perm,
                       Metric metric, const SolverConfig& cfg) {
    SolveResult r = perm.is_identity() && perm.size() == lp.num_cols() ? env.solve(lp, cfg)
                                                                       : env.solve(apply_permutation(lp, perm), cfg);
    if (r.metrics.status != SolveStatus::Optimal) throw NonOptimalStatus(to_string(r.metrics.status));
    return metric == Metric::Iterations ? static_cast<double>(r.metrics.iterations) : r.metrics.solve_time;
}

double evaluate_metric(const LpInstance& lp, const ColumnPermutation& perm, Metric metric, const SolverConfig& cfg) {
    return evaluate_metric(SimplexEnvironment(), lp, perm, metric, cfg);
}

}  // namespace lpreform
