#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lpreform/lp_core.hpp"

namespace lpreform {

enum class Pricing { Dantzig, Bland };

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit, NumericalError };

const char* to_string(SolveStatus status);
const char* to_string(Pricing pricing);

struct SolverConfig {
    double primal_tolerance = 1e-6;
    double dual_tolerance = 1e-9;
    double pivot_tolerance = 1e-9;
    std::size_t iteration_limit = 100000;
    Pricing pricing = Pricing::Dantzig;
    /// Consecutive degenerate pivots after which Dantzig pricing falls back to Bland.
    std::size_t bland_stall_threshold = 100;
    std::size_t refactor_interval = 50;

    void validate() const;
};

enum class BoundStatus { Basic, AtLower, AtUpper, AtZero };

/// Columns [0, num_structural) are standard-form columns; column
/// num_structural + i is the artificial unit column of row i.
struct Basis {
    std::size_t num_structural = 0;
    std::vector<std::size_t> basic;
    std::vector<BoundStatus> status;

    std::size_t num_columns() const { return status.size(); }
    bool is_artificial(std::size_t col) const { return col >= num_structural; }
    std::vector<std::size_t> nonbasic() const;
};

/// Structural slack basis: the slack of each inequality row where one exists,
/// otherwise the row's artificial. Nonbasic columns sit at a finite bound
/// (lower first) or at zero when free.
Basis initial_slack_basis(const StandardFormLp& lp);

struct BasicSolution {
    std::vector<double> x;  // standard-form columns
    double objective = 0.0;  // in the original objective sense
    Basis basis;
};

struct SolveMetrics {
    std::size_t iterations = 0;
    std::size_t phase1_iterations = 0;
    std::size_t phase2_iterations = 0;
    double solve_time = 0.0;  // seconds, pivot loop only
    double max_inf = 0.0;
    SolveStatus status = SolveStatus::IterationLimit;
};

struct SolveResult {
    BasicSolution solution;
    SolveMetrics metrics;
    std::vector<double> x_original;
};

/// Solver used as the reward environment. Implementations must be reentrant.
class SolverEnvironment {
public:
    virtual ~SolverEnvironment() = default;
    virtual SolveResult solve(const LpInstance& lp, const SolverConfig& cfg) const = 0;
    virtual std::string name() const = 0;
};

/// Bounded two-phase primal revised simplex with a dense basis inverse.
class SimplexEnvironment final : public SolverEnvironment {
public:
    SolveResult solve(const LpInstance& lp, const SolverConfig& cfg) const override;
    std::string name() const override { return "simplex"; }
};

SolveResult solve(const LpInstance& lp, const SolverConfig& cfg = {});

enum class Metric { Iterations, SolveTime };

const char* to_string(Metric metric);
/// Accepts the to_string spellings, case-insensitively.
Metric parse_metric(const std::string& s);
Pricing parse_pricing(const std::string& s);

/// Metric of solving lp with its columns reordered by perm. Throws
/// NonOptimalStatus unless the solve is optimal.
double evaluate_metric(const SolverEnvironment& env, const LpInstance& lp, const ColumnPermutation& perm,
                       Metric metric, const SolverConfig& cfg);

double evaluate_metric(const LpInstance& lp, const ColumnPermutation& perm, Metric metric, const SolverConfig& cfg);

}  // namespace lpreform
