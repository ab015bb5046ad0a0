#include "lpreform/nn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "lpreform/errors.hpp"

namespace lpreform::nn {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

std::shared_ptr<Node> new_node(Matrix value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    return n;
}

void require_shape(bool ok, const char* op) {
    if (!ok) throw DimensionMismatch(std::string(op) + ": incompatible shapes");
}

// Accumulates into a parent only when it is tracked.
template <class F>
void flow(Node& self, std::size_t i, F&& f) {
    Node& p = *self.parents[i];
    if (p.requires_grad) f(p.grad_buffer());
}

}  // namespace

Matrix& Node::grad_buffer() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
}

Tensor::Tensor(Matrix value, bool requires_grad) : node_(new_node(std::move(value), requires_grad)) {}

Tensor Tensor::parameter(Matrix value) {
    Tensor t(std::move(value), true);
    t.node_->grad_buffer();
    return t;
}

const Matrix& Tensor::grad() const { return node_->grad_buffer(); }

double Tensor::item() const {
    require_shape(rows() == 1 && cols() == 1, "item");
    return node_->value(0, 0);
}

void Tensor::zero_grad() { node_->grad_buffer().setZero(); }

Tensor make_op(Matrix value, std::vector<Tensor> inputs, std::function<void(Node&)> fn) {
    bool tracked = false;
    for (const auto& t : inputs) tracked = tracked || t.requires_grad();
    auto node = new_node(std::move(value), tracked);
    if (tracked) {
        node->parents.reserve(inputs.size());
        for (auto& t : inputs) node->parents.push_back(t.node_);
        node->backward_fn = std::move(fn);
    }
    return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
    require_shape(loss.rows() == 1 && loss.cols() == 1, "backward");
    if (!std::isfinite(loss.item())) throw NonFinite("backward: loss is not finite");
    if (!loss.requires_grad()) return;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{loss.node().get()};
    seen.insert(stack.back());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (!p->requires_grad) continue;
            if (p->id >= n->id) throw GraphCycle("backward: parent created after child");
            if (seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->id > b->id; });

    loss.node()->grad_buffer()(0, 0) += 1.0;
    for (Node* n : order) {
        n->grad_buffer();
        if (n->backward_fn) n->backward_fn(*n);
    }
    for (Node* n : order) {
        if (n->backward_fn && !n->grad.allFinite()) throw NonFinite("backward: non-finite gradient");
    }
}

void check_finite(const Tensor& t, const std::string& where) {
    if (!t.value().allFinite()) throw NonFinite(where + ": non-finite activation");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_shape(a.cols() == b.rows(), "matmul");
    Matrix out = a.value() * b.value();
    return make_op(std::move(out), {a, b}, [](Node& self) {
        const Matrix& A = self.parents[0]->value;
        const Matrix& B = self.parents[1]->value;
        flow(self, 0, [&](Matrix& g) { g.noalias() += self.grad * B.transpose(); });
        flow(self, 1, [&](Matrix& g) { g.noalias() += A.transpose() * self.grad; });
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
    return make_op(a.value() + b.value(), {a, b}, [](Node& self) {
        flow(self, 0, [&](Matrix& g) { g += self.grad; });
        flow(self, 1, [&](Matrix& g) { g += self.grad; });
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
    return make_op(a.value() - b.value(), {a, b}, [](Node& self) {
        flow(self, 0, [&](Matrix& g) { g += self.grad; });
        flow(self, 1, [&](Matrix& g) { g -= self.grad; });
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
    Matrix out = a.value().cwiseProduct(b.value());
    return make_op(std::move(out), {a, b}, [](Node& self) {
        const Matrix& A = self.parents[0]->value;
        const Matrix& B = self.parents[1]->value;
        flow(self, 0, [&](Matrix& g) { g += self.grad.cwiseProduct(B); });
        flow(self, 1, [&](Matrix& g) { g += self.grad.cwiseProduct(A); });
    });
}

Tensor scale(const Tensor& a, double s) {
    return make_op(a.value() * s, {a}, [s](Node& self) { flow(self, 0, [&](Matrix& g) { g += s * self.grad; }); });
}

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
    require_shape(bias.rows() == 1 && bias.cols() == a.cols(), "add_row_bias");
    Matrix out = a.value();
    out.rowwise() += bias.value().row(0);
    return make_op(std::move(out), {a, bias}, [](Node& self) {
        flow(self, 0, [&](Matrix& g) { g += self.grad; });
        flow(self, 1, [&](Matrix& g) { g += self.grad.colwise().sum(); });
    });
}

Tensor affine_columns(const Tensor& a, const RowVector& shift, const RowVector& factor) {
    require_shape(shift.size() == a.cols() && factor.size() == a.cols(), "affine_columns");
    Matrix out = a.value();
    out.rowwise() += shift;
    out.array().rowwise() *= factor.array();
    return make_op(std::move(out), {a}, [factor](Node& self) {
        flow(self, 0, [&](Matrix& g) { g.array() += self.grad.array().rowwise() * factor.array(); });
    });
}

Tensor relu(const Tensor& a) {
    Matrix out = a.value().cwiseMax(0.0);
    return make_op(std::move(out), {a}, [](Node& self) {
        const Matrix& A = self.parents[0]->value;
        flow(self, 0, [&](Matrix& g) { g.array() += (A.array() > 0.0).select(self.grad.array(), 0.0); });
    });
}

Tensor tanh(const Tensor& a) {
    Matrix out = a.value().array().tanh().matrix();
    return make_op(std::move(out), {a}, [](Node& self) {
        flow(self, 0, [&](Matrix& g) { g.array() += self.grad.array() * (1.0 - self.value.array().square()); });
    });
}

Tensor sigmoid(const Tensor& a) {
    Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    return make_op(std::move(out), {a}, [](Node& self) {
        flow(self, 0, [&](Matrix& g) {
            g.array() += self.grad.array() * self.value.array() * (1.0 - self.value.array());
        });
    });
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& index) {
    Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
    for (std::size_t e = 0; e < index.size(); ++e) {
        require_shape(static_cast<Eigen::Index>(index[e]) < a.rows(), "gather_rows");
        out.row(static_cast<Eigen::Index>(e)) = a.value().row(static_cast<Eigen::Index>(index[e]));
    }
    return make_op(std::move(out), {a}, [index](Node& self) {
        flow(self, 0, [&](Matrix& g) {
            for (std::size_t e = 0; e < index.size(); ++e) {
                g.row(static_cast<Eigen::Index>(index[e])) += self.grad.row(static_cast<Eigen::Index>(e));
            }
        });
    });
}

Tensor scatter_add_rows(const Tensor& a, const std::vector<std::size_t>& index, std::size_t out_rows) {
    require_shape(static_cast<Eigen::Index>(index.size()) == a.rows(), "scatter_add_rows");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(out_rows), a.cols());
    for (std::size_t e = 0; e < index.size(); ++e) {
        require_shape(index[e] < out_rows, "scatter_add_rows");
        out.row(static_cast<Eigen::Index>(index[e])) += a.value().row(static_cast<Eigen::Index>(e));
    }
    return make_op(std::move(out), {a}, [index](Node& self) {
        flow(self, 0, [&](Matrix& g) {
            for (std::size_t e = 0; e < index.size(); ++e) {
                g.row(static_cast<Eigen::Index>(e)) += self.grad.row(static_cast<Eigen::Index>(index[e]));
            }
        });
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require_shape(a.rows() == b.rows(), "concat_cols");
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a.value(), b.value();
    const Eigen::Index ca = a.cols();
    const Eigen::Index cb = b.cols();
    return make_op(std::move(out), {a, b}, [ca, cb](Node& self) {
        flow(self, 0, [&](Matrix& g) { g += self.grad.leftCols(ca); });
        flow(self, 1, [&](Matrix& g) { g += self.grad.rightCols(cb); });
    });
}

Tensor stack_rows(const std::vector<Tensor>& parts) {
    require_shape(!parts.empty(), "stack_rows");
    Eigen::Index total = 0;
    for (const auto& p : parts) {
        require_shape(p.cols() == parts[0].cols(), "stack_rows");
        total += p.rows();
    }
    Matrix out(total, parts[0].cols());
    std::vector<Eigen::Index> offsets;
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        offsets.push_back(at);
        out.middleRows(at, p.rows()) = p.value();
        at += p.rows();
    }
    return make_op(std::move(out), parts, [offsets](Node& self) {
        for (std::size_t i = 0; i < offsets.size(); ++i) {
            flow(self, i, [&](Matrix& g) { g += self.grad.middleRows(offsets[i], g.rows()); });
        }
    });
}

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
    require_shape(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols");
    Matrix out = a.value().middleCols(start, count);
    return make_op(std::move(out), {a}, [start, count](Node& self) {
        flow(self, 0, [&](Matrix& g) { g.middleCols(start, count) += self.grad; });
    });
}

Tensor row(const Tensor& a, Eigen::Index r) {
    require_shape(r >= 0 && r < a.rows(), "row");
    Matrix out = a.value().row(r);
    return make_op(std::move(out), {a}, [r](Node& self) { flow(self, 0, [&](Matrix& g) { g.row(r) += self.grad; }); });
}

Tensor transpose(const Tensor& a) {
    Matrix out = a.value().transpose();
    return make_op(std::move(out), {a}, [](Node& self) {
        flow(self, 0, [&](Matrix& g) { g += self.grad.transpose(); });
    });
}

Tensor segment_pool(const Tensor& a, const std::vector<std::vector<std::size_t>>& segments, Pool pool) {
    const Eigen::Index c = a.cols();
    const auto k = static_cast<Eigen::Index>(segments.size());
    Matrix out(k, c);
    // For Max/Min: source row per (segment, column).
    std::vector<std::size_t> source;
    if (pool != Pool::Mean) source.assign(static_cast<std::size_t>(k * c), 0);
    for (Eigen::Index s = 0; s < k; ++s) {
        const auto& members = segments[static_cast<std::size_t>(s)];
        if (members.empty()) throw EmptyCluster("segment_pool: segment " + std::to_string(s) + " is empty");
        for (std::size_t r : members) require_shape(static_cast<Eigen::Index>(r) < a.rows(), "segment_pool");
        if (pool == Pool::Mean) {
            RowVector acc = RowVector::Zero(c);
            for (std::size_t r : members) acc += a.value().row(static_cast<Eigen::Index>(r));
            out.row(s) = acc / static_cast<double>(members.size());
            continue;
        }
        for (Eigen::Index col = 0; col < c; ++col) {
            std::size_t best = members[0];
            for (std::size_t r : members) {
                double v = a.value()(static_cast<Eigen::Index>(r), col);
                double b = a.value()(static_cast<Eigen::Index>(best), col);
                if (pool == Pool::Max ? v > b : v < b) best = r;
            }
            source[static_cast<std::size_t>(s * c + col)] = best;
            out(s, col) = a.value()(static_cast<Eigen::Index>(best), col);
        }
    }
    return make_op(std::move(out), {a}, [segments, source, pool, c](Node& self) {
        flow(self, 0, [&](Matrix& g) {
            for (std::size_t s = 0; s < segments.size(); ++s) {
                const auto si = static_cast<Eigen::Index>(s);
                if (pool == Pool::Mean) {
                    const double w = 1.0 / static_cast<double>(segments[s].size());
                    for (std::size_t r : segments[s]) g.row(static_cast<Eigen::Index>(r)) += w * self.grad.row(si);
                    continue;
                }
                for (Eigen::Index col = 0; col < c; ++col) {
                    g(static_cast<Eigen::Index>(source[s * static_cast<std::size_t>(c) + static_cast<std::size_t>(col)]), col) +=
                        self.grad(si, col);
                }
            }
        });
    });
}

Tensor mean_rows(const Tensor& a) {
    require_shape(a.rows() > 0, "mean_rows");
    const double w = 1.0 / static_cast<double>(a.rows());
    Matrix out = a.value().colwise().sum() * w;
    return make_op(std::move(out), {a}, [w](Node& self) {
        flow(self, 0, [&](Matrix& g) { g.rowwise() += w * self.grad.row(0); });
    });
}

Tensor masked_log_softmax(const Tensor& scores, const std::vector<bool>& masked) {
    require_shape(scores.rows() == 1 && static_cast<std::size_t>(scores.cols()) == masked.size(), "masked_log_softmax");
    const Eigen::Index k = scores.cols();
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < k; ++j) {
        if (!masked[static_cast<std::size_t>(j)]) top = std::max(top, scores.value()(0, j));
    }
    require_shape(std::isfinite(top), "masked_log_softmax (all entries masked)");
    double total = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
        if (!masked[static_cast<std::size_t>(j)]) total += std::exp(scores.value()(0, j) - top);
    }
    const double lse = top + std::log(total);
    Matrix out(1, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        out(0, j) = masked[static_cast<std::size_t>(j)] ? -std::numeric_limits<double>::infinity() : scores.value()(0, j) - lse;
    }
    return make_op(std::move(out), {scores}, [masked](Node& self) {
        flow(self, 0, [&](Matrix& g) {
            const Eigen::Index k = self.value.cols();
            double upstream = 0.0;
            for (Eigen::Index j = 0; j < k; ++j) {
                if (!masked[static_cast<std::size_t>(j)]) upstream += self.grad(0, j);
            }
            for (Eigen::Index j = 0; j < k; ++j) {
                if (masked[static_cast<std::size_t>(j)]) continue;
                g(0, j) += self.grad(0, j) - std::exp(self.value(0, j)) * upstream;
            }
        });
    });
}

Tensor pick(const Tensor& a, Eigen::Index r, Eigen::Index c) {
    require_shape(r >= 0 && r < a.rows() && c >= 0 && c < a.cols(), "pick");
    Matrix out(1, 1);
    out(0, 0) = a.value()(r, c);
    return make_op(std::move(out), {a}, [r, c](Node& self) { flow(self, 0, [&](Matrix& g) { g(r, c) += self.grad(0, 0); }); });
}

Tensor sum(const Tensor& a) {
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return make_op(std::move(out), {a}, [](Node& self) { flow(self, 0, [&](Matrix& g) { g.array() += self.grad(0, 0); }); });
}

}  // namespace lpreform::nn
