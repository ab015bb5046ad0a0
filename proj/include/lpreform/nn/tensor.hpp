#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lpreform::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Node {
    Matrix value;
    Matrix grad;  // empty until something flows into it
    bool requires_grad = false;
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    Matrix& grad_buffer();
};

/// Handle to a node of the computation tape. Copies share the node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Matrix value, bool requires_grad = false);

    /// Leaf that accumulates gradients; grad starts at zero.
    static Tensor parameter(Matrix value);

    bool defined() const { return node_ != nullptr; }
    const Matrix& value() const { return node_->value; }
    Matrix& mutable_value() const { return node_->value; }
    const Matrix& grad() const;
    Matrix& mutable_grad() const { return node_->grad_buffer(); }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    double item() const;
    void zero_grad();
    Tensor detach() const { return Tensor(node_->value, false); }

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;

    friend Tensor make_op(Matrix value, std::vector<Tensor> inputs, std::function<void(Node&)> fn);
};

/// Creates an op node; backward is recorded only when an input is tracked.
Tensor make_op(Matrix value, std::vector<Tensor> inputs, std::function<void(Node&)> fn);

/// Reverse-mode pass from a 1x1 loss. Gradients accumulate into every tracked
/// leaf reachable from the loss.
void backward(const Tensor& loss);

/// Throws NonFinite naming `where` if any entry is NaN or infinite.
void check_finite(const Tensor& t, const std::string& where);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// a (r x c) plus a 1 x c bias broadcast over rows.
Tensor add_row_bias(const Tensor& a, const Tensor& bias);
/// (a + shift) .* factor, per column, with constant shift/factor.
Tensor affine_columns(const Tensor& a, const RowVector& shift, const RowVector& factor);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& index);
Tensor scatter_add_rows(const Tensor& a, const std::vector<std::size_t>& index, std::size_t out_rows);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor stack_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor row(const Tensor& a, Eigen::Index r);
Tensor transpose(const Tensor& a);

enum class Pool { Mean, Max, Min };
/// One output row per segment, pooling the listed rows of `a`. Max/Min route
/// gradient to the first extremal row per column.
Tensor segment_pool(const Tensor& a, const std::vector<std::vector<std::size_t>>& segments, Pool pool);
Tensor mean_rows(const Tensor& a);

/// Row-vector log-softmax where masked entries are exactly -inf.
Tensor masked_log_softmax(const Tensor& scores, const std::vector<bool>& masked);
Tensor pick(const Tensor& a, Eigen::Index r, Eigen::Index c);
Tensor sum(const Tensor& a);

}  // namespace lpreform::nn
