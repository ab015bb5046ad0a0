#include "lpreform/nn/networks.hpp"

#include <cmath>
#include <limits>

#include "lpreform/errors.hpp"

namespace lpreform::nn {

namespace {

std::string round_prefix(int r) { return kGcnnPrefix + "r" + std::to_string(r) + "."; }

void add_linear(ParamSet& p, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng) {
    p.add(name + ".w", glorot(in, out, rng));
    p.add(name + ".b", Matrix::Zero(1, out));
}

void add_lstm(ParamSet& p, const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng) {
    p.add(name + ".wx", glorot(in, 4 * hidden, rng));
    p.add(name + ".wh", glorot(hidden, 4 * hidden, rng));
    Matrix b = Matrix::Zero(1, 4 * hidden);
    b.middleCols(hidden, hidden).setOnes();  // forget gate
    p.add(name + ".b", std::move(b));
}

Tensor linear(const Tensor& x, const ParamSet& p, const std::string& name) {
    return add_row_bias(matmul(x, p.get(name + ".w")), p.get(name + ".b"));
}

Tensor prenorm(const std::string& name, const Tensor& x, const ParamSet& p, Calibration* cal,
               const Matrix* observed = nullptr) {
    if (const Matrix* b = p.buffer(name)) return affine_columns(x, b->row(0), b->row(1));
    if (cal && cal->target == name) cal->observe(observed ? *observed : x.value());
    return x;
}

Matrix gather_value(const Matrix& x, const std::vector<std::size_t>& index) {
    Matrix out(static_cast<Eigen::Index>(index.size()), x.cols());
    for (std::size_t e = 0; e < index.size(); ++e) {
        out.row(static_cast<Eigen::Index>(e)) = x.row(static_cast<Eigen::Index>(index[e]));
    }
    return out;
}

// One half-pass: aggregates g(target, other, e) into `target` nodes, then f.
// `target_index` maps edges to the side being updated.
Tensor half_pass(const std::string& gname, const std::string& fname, const Tensor& target, const Tensor& other,
                 const std::vector<std::size_t>& target_index, const std::vector<std::size_t>& other_index,
                 const Tensor& edge_feats, const ParamSet& p, Calibration* cal) {
    Matrix obs_target, obs_other;
    const bool observing = cal != nullptr;
    if (observing && cal->target == gname + ".pn_self") obs_target = gather_value(target.value(), target_index);
    if (observing && cal->target == gname + ".pn_other") obs_other = gather_value(other.value(), other_index);

    Tensor ps = prenorm(gname + ".pn_self", target, p, cal, obs_target.size() ? &obs_target : nullptr);
    Tensor po = prenorm(gname + ".pn_other", other, p, cal, obs_other.size() ? &obs_other : nullptr);
    Tensor pe = prenorm(gname + ".pn_edge", edge_feats, p, cal);

    // First layer of g is affine, so project per node and gather per edge.
    Tensor h = add(gather_rows(matmul(ps, p.get(gname + ".w_self")), target_index),
                   gather_rows(matmul(po, p.get(gname + ".w_other")), other_index));
    h = relu(add_row_bias(add(h, matmul(pe, p.get(gname + ".w_edge"))), p.get(gname + ".b1")));
    // The second layer is affine as well, so it commutes with the edge sum:
    // aggregate first, then project, adding the bias once per incident edge.
    Matrix degree = Matrix::Zero(target.rows(), 1);
    for (std::size_t t : target_index) degree(static_cast<Eigen::Index>(t), 0) += 1.0;
    Tensor summed = scatter_add_rows(h, target_index, static_cast<std::size_t>(target.rows()));
    Tensor agg = add(matmul(summed, p.get(gname + ".l2.w")), matmul(Tensor(std::move(degree)), p.get(gname + ".l2.b")));

    Tensor in = prenorm(fname + ".pn", concat_cols(target, agg), p, cal);
    Tensor hidden = relu(linear(in, p, fname + ".l1"));
    return linear(hidden, p, fname + ".l2");
}

void add_g(ParamSet& p, const std::string& name, Eigen::Index w, Rng& rng) {
    // Slices of one (2w+1) x w Glorot matrix, so the init matches the unfactorized layer.
    Matrix full = glorot(2 * w + 1, w, rng);
    p.add(name + ".w_self", full.topRows(w));
    p.add(name + ".w_other", full.middleRows(w, w));
    p.add(name + ".w_edge", full.bottomRows(1));
    p.add(name + ".b1", Matrix::Zero(1, w));
    add_linear(p, name + ".l2", w, w, rng);
}

struct LstmState {
    Tensor h;
    Tensor c;
};

LstmState lstm(const Tensor& x, const LstmState& s, const ParamSet& p, const std::string& name, Eigen::Index hidden) {
    Tensor z = add_row_bias(add(matmul(x, p.get(name + ".wx")), matmul(s.h, p.get(name + ".wh"))), p.get(name + ".b"));
    Tensor i = sigmoid(slice_cols(z, 0, hidden));
    Tensor f = sigmoid(slice_cols(z, hidden, hidden));
    Tensor g = tanh(slice_cols(z, 2 * hidden, hidden));
    Tensor o = sigmoid(slice_cols(z, 3 * hidden, hidden));
    Tensor c = add(mul(f, s.c), mul(i, g));
    return {mul(o, tanh(c)), c};
}

}  // namespace

void Calibration::observe(const Matrix& x) {
    if (count == 0.0) {
        sum = RowVector::Zero(x.cols());
        sum_sq = RowVector::Zero(x.cols());
    }
    sum += x.colwise().sum();
    sum_sq += x.array().square().matrix().colwise().sum();
    count += static_cast<double>(x.rows());
}

Matrix Calibration::finalize() const {
    const Eigen::Index c = sum.size();
    Matrix out(2, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        double mean = count > 0 ? sum(j) / count : 0.0;
        double var = count > 0 ? std::max(0.0, sum_sq(j) / count - mean * mean) : 0.0;
        double sd = std::sqrt(var);
        out(0, j) = -mean;
        out(1, j) = sd > 1e-8 ? 1.0 / sd : 1.0;
    }
    return out;
}

ParamSet init_policy_params(const ModelDims& dims, std::uint64_t seed) {
    Rng rng(seed);
    ParamSet p;
    const Eigen::Index w = dims.width;
    add_linear(p, kGcnnPrefix + "cons_embed", BipartiteGraph::kConsFeatures, w, rng);
    add_linear(p, kGcnnPrefix + "var_embed", BipartiteGraph::kVarFeatures, w, rng);
    for (int r = 0; r < dims.rounds; ++r) {
        const std::string pre = round_prefix(r);
        for (const char* side : {"c", "v"}) {
            add_g(p, pre + "g" + side, w, rng);
            add_linear(p, pre + "f" + side + ".l1", 2 * w, w, rng);
            add_linear(p, pre + "f" + side + ".l2", w, w, rng);
        }
    }

    const Eigen::Index h = dims.pointer_hidden;
    add_linear(p, kPointerPrefix + "proj", w, h, rng);
    add_lstm(p, kPointerPrefix + "enc", h, h, rng);
    add_lstm(p, kPointerPrefix + "dec", h, h, rng);
    p.add(kPointerPrefix + "att.w_ref", glorot(h, h, rng));
    p.add(kPointerPrefix + "att.w_q", glorot(h, h, rng));
    // Zero score vector: an untrained policy is exactly uniform over orders.
    p.add(kPointerPrefix + "att.v", Matrix::Zero(h, 1));
    p.add(kPointerPrefix + "start", glorot(1, h, rng));

    add_linear(p, kCriticPrefix + "l1", w, dims.critic_hidden, rng);
    add_linear(p, kCriticPrefix + "l2", dims.critic_hidden, 1, rng);
    return p;
}

std::vector<std::string> gcnn_prenorm_names(const ModelDims& dims) {
    std::vector<std::string> names{kGcnnPrefix + "cons_embed.pn", kGcnnPrefix + "var_embed.pn"};
    for (int r = 0; r < dims.rounds; ++r) {
        const std::string pre = round_prefix(r);
        for (const char* side : {"c", "v"}) {
            for (const char* part : {".pn_self", ".pn_other", ".pn_edge"}) names.push_back(pre + "g" + side + part);
            names.push_back(pre + "f" + side + ".pn");
        }
    }
    return names;
}

Tensor gcnn_forward(const BipartiteGraph& g, const ParamSet& p, const ModelDims& dims, Calibration* cal) {
    auto to_matrix = [](const std::vector<double>& v, std::size_t rows, std::size_t cols) {
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows * cols; ++i) m.data()[i] = v[i];
        return m;
    };
    Tensor cons_raw(to_matrix(g.cons_feats, g.num_cons, BipartiteGraph::kConsFeatures));
    Tensor var_raw(to_matrix(g.var_feats, g.num_vars, BipartiteGraph::kVarFeatures));
    Matrix e(static_cast<Eigen::Index>(g.edges.size()), 1);
    std::vector<std::size_t> rows(g.edges.size()), cols(g.edges.size());
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        e(static_cast<Eigen::Index>(k), 0) = g.edges[k].feat;
        rows[k] = g.edges[k].row;
        cols[k] = g.edges[k].col;
    }
    Tensor edges(std::move(e));

    const std::string ce = kGcnnPrefix + "cons_embed";
    const std::string ve = kGcnnPrefix + "var_embed";
    Tensor c = relu(linear(prenorm(ce + ".pn", cons_raw, p, cal), p, ce));
    Tensor v = relu(linear(prenorm(ve + ".pn", var_raw, p, cal), p, ve));
    for (int r = 0; r < dims.rounds; ++r) {
        const std::string pre = round_prefix(r);
        c = half_pass(pre + "gc", pre + "fc", c, v, rows, cols, edges, p, cal);
        v = half_pass(pre + "gv", pre + "fv", v, c, cols, rows, edges, p, cal);
    }
    check_finite(v, "gcnn_forward");
    return v;
}

void calibrate_prenorm(ParamSet& p, const ModelDims& dims, const std::vector<const BipartiteGraph*>& batch) {
    for (const auto& name : gcnn_prenorm_names(dims)) {
        if (p.buffer(name)) continue;
        Calibration cal{name, {}, {}, 0.0};
        for (const BipartiteGraph* g : batch) gcnn_forward(*g, p, dims, &cal);
        if (cal.count > 0) p.set_buffer(name, cal.finalize());
    }
}

PointerOutput pointer_forward(const Tensor& cluster_embs, const ParamSet& p, const ModelDims& dims, DecodeMode mode,
                              std::uint64_t seed, const std::vector<std::size_t>* forced) {
    const auto k = static_cast<std::size_t>(cluster_embs.rows());
    if (k == 0) throw InvalidK("pointer_forward: no clusters");
    if (mode == DecodeMode::Forced && (!forced || forced->size() != k)) {
        throw InvalidPermutation("pointer_forward: forced order has wrong length");
    }
    const Eigen::Index h = dims.pointer_hidden;
    const std::string enc = kPointerPrefix + "enc";
    const std::string dec = kPointerPrefix + "dec";

    Tensor x = linear(cluster_embs, p, kPointerPrefix + "proj");
    LstmState s{Tensor(Matrix::Zero(1, h)), Tensor(Matrix::Zero(1, h))};
    std::vector<Tensor> enc_states;
    enc_states.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        s = lstm(row(x, static_cast<Eigen::Index>(i)), s, p, enc, h);
        enc_states.push_back(s.h);
    }
    Tensor ref = matmul(stack_rows(enc_states), p.get(kPointerPrefix + "att.w_ref"));

    PointerOutput out;
    std::vector<bool> masked(k, false);
    Rng rng(seed);
    Tensor input = p.get(kPointerPrefix + "start");
    Tensor total;
    for (std::size_t t = 0; t < k; ++t) {
        s = lstm(input, s, p, dec, h);
        Tensor q = matmul(s.h, p.get(kPointerPrefix + "att.w_q"));
        Tensor scores = transpose(matmul(tanh(add_row_bias(ref, q)), p.get(kPointerPrefix + "att.v")));
        Tensor logp = masked_log_softmax(scores, masked);

        std::vector<double> probs(k);
        for (std::size_t j = 0; j < k; ++j) probs[j] = masked[j] ? 0.0 : std::exp(logp.value()(0, static_cast<Eigen::Index>(j)));

        std::size_t choice = k;
        if (mode == DecodeMode::Forced) {
            choice = (*forced)[t];
            if (choice >= k || masked[choice]) throw InvalidPermutation("pointer_forward: forced order is not a bijection");
        } else if (mode == DecodeMode::Greedy) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < k; ++j) {
                if (!masked[j] && logp.value()(0, static_cast<Eigen::Index>(j)) > best) {
                    best = logp.value()(0, static_cast<Eigen::Index>(j));
                    choice = j;
                }
            }
        } else {
            const double u = uniform01(rng);
            double cum = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                if (masked[j]) continue;
                choice = j;  // last unmasked absorbs rounding
                cum += probs[j];
                if (u < cum) break;
            }
        }

        Tensor chosen = pick(logp, 0, static_cast<Eigen::Index>(choice));
        out.step_log_probs.push_back(chosen.item());
        out.step_probs.push_back(std::move(probs));
        total = total.defined() ? add(total, chosen) : chosen;
        out.perm.push_back(choice);
        masked[choice] = true;
        input = row(x, static_cast<Eigen::Index>(choice));
    }
    check_finite(total, "pointer_forward");
    out.log_prob = total;
    return out;
}

Tensor critic_forward(const Tensor& var_embs, const ParamSet& p) {
    if (var_embs.rows() == 0) throw InvalidInstance("critic_forward: no variables");
    Tensor pooled = mean_rows(var_embs.detach());
    Tensor out = linear(relu(linear(pooled, p, kCriticPrefix + "l1")), p, kCriticPrefix + "l2");
    check_finite(out, "critic_forward");
    return out;
}

}  // namespace lpreform::nn
