#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lpreform {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Magnitudes at or above this are read as infinite and written as +-1e30.
inline constexpr double kMpsInfinity = 1e30;

enum class RowSense { LE, GE, EQ };
enum class ObjectiveSense { Minimize, Maximize };

const char* to_string(RowSense sense);

/// Compressed sparse column storage. Row indices are strictly increasing
/// within each column and no explicit zeros are stored.
struct SparseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> col_start{0};
    std::vector<std::size_t> row_index;
    std::vector<double> value;

    struct Triplet {
        std::size_t row;
        std::size_t col;
        double value;
    };

    /// Duplicate (row, col) entries are summed; entries that end up zero are dropped.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);

    std::size_t nnz() const { return value.size(); }
    std::span<const std::size_t> column_rows(std::size_t j) const {
        return {row_index.data() + col_start[j], col_start[j + 1] - col_start[j]};
    }
    std::span<const double> column_values(std::size_t j) const {
        return {value.data() + col_start[j], col_start[j + 1] - col_start[j]};
    }

    SparseMatrix transposed() const;

    /// Throws InvalidInstance if the structural invariants do not hold.
    void validate() const;

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;
};

/// A linear program over original (user-facing) rows and columns.
///
/// Each row i reads  row_lower(i) <= A_i x <= row_upper(i)  where the interval
/// is derived from row_sense, rhs and the optional MPS range value
/// (row_range[i] == 0 means no range).
struct LpInstance {
    std::string name;
    std::string objective_name = "obj";
    ObjectiveSense sense = ObjectiveSense::Minimize;
    std::vector<double> objective;
    double objective_offset = 0.0;
    SparseMatrix matrix;
    std::vector<double> rhs;
    std::vector<RowSense> row_sense;
    std::vector<double> row_range;
    std::vector<double> col_lower;
    std::vector<double> col_upper;
    std::vector<std::string> col_names;
    std::vector<std::string> row_names;

    std::size_t num_rows() const { return matrix.rows; }
    std::size_t num_cols() const { return matrix.cols; }
    std::size_t nnz() const { return matrix.nnz(); }

    double row_lower(std::size_t i) const;
    double row_upper(std::size_t i) const;

    /// Objective value of a point in original column space, offset included.
    double objective_value(std::span<const double> x) const;

    /// max(row activity violation, bound violation) for a point in original space.
    double max_violation(std::span<const double> x) const;

    void validate() const;

    friend bool operator==(const LpInstance&, const LpInstance&) = default;
};

/// Incremental construction helper used by the generators and tests.
class LpBuilder {
public:
    explicit LpBuilder(std::string name) { lp_.name = std::move(name); }

    std::size_t add_column(std::string name, double cost, double lower = 0.0, double upper = kInfinity);
    std::size_t add_row(std::string name, RowSense sense, double rhs, double range = 0.0);
    void add_coefficient(std::size_t row, std::size_t col, double value);
    void set_sense(ObjectiveSense sense) { lp_.sense = sense; }

    LpInstance build() &&;

private:
    LpInstance lp_;
    std::vector<SparseMatrix::Triplet> entries_;
};

/// Where a standard-form column came from.
struct ColumnOrigin {
    enum class Kind { Original, Slack };
    Kind kind;
    std::size_t index;  // original column index, or row index for a slack
};

/// Equality-form LP  min c^T x  s.t.  A x = b,  lower <= x <= upper.
///
/// Columns [0, n) are the original columns; [slack_begin, slack_end) hold one
/// slack or surplus per inequality (or ranged) row. A maximization is stored
/// with a negated objective; `objective_sign` recovers the original value.
struct StandardFormLp {
    std::vector<double> objective;
    double objective_sign = 1.0;
    double objective_offset = 0.0;
    SparseMatrix matrix;
    std::vector<double> rhs;
    std::vector<double> col_lower;
    std::vector<double> col_upper;
    std::size_t original_cols = 0;
    std::size_t slack_begin = 0;
    std::size_t slack_end = 0;
    std::vector<ColumnOrigin> origin;
    std::vector<std::optional<std::size_t>> row_slack;

    std::size_t num_rows() const { return matrix.rows; }
    std::size_t num_cols() const { return matrix.cols; }

    /// Objective in the original sense, offset included.
    double original_objective(std::span<const double> x) const;

    /// Restricts a standard-form point to the original columns.
    std::vector<double> original_point(std::span<const double> x) const;

    /// Extends an original point with the slack values that make every row tight.
    std::vector<double> extend_point(std::span<const double> x_original) const;
};

StandardFormLp to_standard_form(const LpInstance& lp);

enum class PermutationSource { Identity, Sampled, Oracle, Manual };

const char* to_string(PermutationSource source);

/// Column reordering: column j of a permuted instance is column perm[j] of the input.
class ColumnPermutation {
public:
    ColumnPermutation() = default;
    explicit ColumnPermutation(std::vector<std::size_t> perm, PermutationSource source = PermutationSource::Manual);

    static ColumnPermutation identity(std::size_t n);

    std::size_t size() const { return perm_.size(); }
    std::size_t operator[](std::size_t j) const { return perm_[j]; }
    const std::vector<std::size_t>& perm() const { return perm_; }
    PermutationSource source() const { return source_; }
    bool is_identity() const;

    ColumnPermutation inverse() const;

    friend bool operator==(const ColumnPermutation& a, const ColumnPermutation& b) { return a.perm_ == b.perm_; }

private:
    std::vector<std::size_t> perm_;
    PermutationSource source_ = PermutationSource::Identity;
};

/// Permutation whose action equals applying `first` and then `second`:
/// apply(compose(second, first)) == apply(second) . apply(first).
ColumnPermutation compose(const ColumnPermutation& second, const ColumnPermutation& first);

LpInstance apply_permutation(const LpInstance& lp, const ColumnPermutation& p);

/// Partition of the columns into k ordered clusters; members keep original order.
struct ClusterSplit {
    std::size_t k = 0;
    std::vector<std::size_t> assignment;
    std::vector<std::vector<std::size_t>> members;

    void validate(std::size_t n) const;
};

ColumnPermutation expand_cluster_permutation(const ClusterSplit& split, std::span<const std::size_t> cluster_perm);

/// Throws InvalidPermutation unless `perm` is a bijection on {0..size-1}.
void check_permutation(std::span<const std::size_t> perm, std::size_t size);

// MPS (free format) --------------------------------------------------------

LpInstance parse_mps(std::istream& in);
LpInstance read_mps(const std::filesystem::path& path);
void format_mps(const LpInstance& lp, std::ostream& out);
void write_mps(const LpInstance& lp, const std::filesystem::path& path);

// Sparsity image -------------------------------------------------------------

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, 0 = nonzero present, 255 = empty

    std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
};

/// Max-pooled presence image of A on at most max_dim x max_dim cells.
GrayImage sparsity_pattern(const LpInstance& lp, std::size_t max_dim);

void write_pgm(const GrayImage& image, const std::filesystem::path& path, bool binary = true);

void emit_sparsity_image(const LpInstance& lp, const std::filesystem::path& path, std::size_t max_dim);

}  // namespace lpreform
