#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "lpreform/errors.hpp"
#include "lpreform/graph.hpp"
#include "lpreform/nn/checkpoint.hpp"
#include "lpreform/nn/networks.hpp"
#include "lpreform/nn/optim.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace lpreform;
using namespace lpreform::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
    return m;
}

void report(const std::vector<testing::GradMismatch>& bad) {
    for (const auto& b : bad) {
        MESSAGE(b.name << "[" << b.index << "] analytic=" << b.analytic << " numeric=" << b.numeric);
    }
    CHECK(bad.empty());
}

// Small widths keep finite differences fast; the code paths are the same.
const ModelDims kSmall{8, 2, 6, 5};

ParamSet small_params(std::uint64_t seed, bool random_scores = true) {
    ParamSet p = init_policy_params(kSmall, seed);
    if (random_scores) {
        std::mt19937_64 rng(seed + 7);
        p.get(kPointerPrefix + "att.v").node()->value = random_matrix(kSmall.pointer_hidden, 1, rng);
    }
    return p;
}

std::vector<std::string> all_names(const ParamSet& p) { return p.names(); }

}  // namespace

TEST_CASE("backward: sum of parameters gives unit gradients, zero scaling gives zeros") {
    std::mt19937_64 rng(1);
    ParamSet p;
    p.add("a", random_matrix(3, 4, rng));
    p.add("b", random_matrix(1, 2, rng));
    backward(add(sum(p.get("a")), sum(p.get("b"))));
    CHECK(p.get("a").grad().isApprox(Matrix::Ones(3, 4)));
    CHECK(p.get("b").grad().isApprox(Matrix::Ones(1, 2)));

    p.zero_grad();
    backward(scale(sum(mul(p.get("a"), p.get("a"))), 0.0));
    CHECK(p.get("a").grad().isZero(0.0));
    CHECK(p.get("b").grad().isZero(0.0));
}

TEST_CASE("backward: untouched parameters keep zero gradients and gradients accumulate") {
    ParamSet p;
    p.add("used", Matrix::Constant(1, 1, 2.0));
    p.add("unused", Matrix::Constant(2, 2, 5.0));
    backward(mul(p.get("used"), p.get("used")));
    backward(mul(p.get("used"), p.get("used")));
    CHECK(p.get("used").grad()(0, 0) == doctest::Approx(8.0));
    CHECK(p.get("unused").grad().isZero(0.0));
}

TEST_CASE("backward: errors") {
    ParamSet p;
    p.add("a", Matrix::Ones(2, 2));
    CHECK_THROWS_AS(backward(p.get("a")), DimensionMismatch);
    CHECK_THROWS_AS(backward(scale(sum(p.get("a")), std::numeric_limits<double>::infinity())), NonFinite);

    Tensor leaf = Tensor::parameter(Matrix::Ones(1, 1));
    Tensor child = scale(leaf, 2.0);
    leaf.node()->parents.push_back(child.node());
    CHECK_THROWS_AS(backward(child), GraphCycle);
    leaf.node()->parents.clear();
}

TEST_CASE("every op matches central differences") {
    std::mt19937_64 rng(3);
    ParamSet p;
    p.add("a", random_matrix(4, 3, rng));
    p.add("b", random_matrix(3, 5, rng));
    p.add("c", random_matrix(4, 3, rng));
    p.add("bias", random_matrix(1, 3, rng));
    p.add("s", random_matrix(1, 4, rng));
    RowVector shift = random_matrix(1, 3, rng);
    RowVector factor = random_matrix(1, 3, rng);
    const std::vector<std::size_t> idx{2, 0, 2, 3, 1};
    const std::vector<std::vector<std::size_t>> segs{{0, 2}, {1}, {3, 0, 1}};

    auto weighted = [&](const Tensor& t) {
        std::mt19937_64 r2(static_cast<std::uint64_t>(t.rows() * 31 + t.cols()));
        return sum(mul(t, Tensor(random_matrix(t.rows(), t.cols(), r2))));
    };
    std::map<std::string, std::function<Tensor(const ParamSet&)>> cases{
        {"matmul", [&](const ParamSet& q) { return weighted(matmul(q.get("a"), q.get("b"))); }},
        {"add/sub/mul", [&](const ParamSet& q) {
             return weighted(mul(sub(q.get("a"), q.get("c")), add(q.get("a"), q.get("c"))));
         }},
        {"bias/affine", [&](const ParamSet& q) {
             return weighted(affine_columns(add_row_bias(q.get("a"), q.get("bias")), shift, factor));
         }},
        {"relu/tanh/sigmoid", [&](const ParamSet& q) {
             return weighted(add(relu(q.get("a")), mul(tanh(q.get("c")), sigmoid(q.get("a")))));
         }},
        {"gather/scatter", [&](const ParamSet& q) {
             return weighted(scatter_add_rows(tanh(gather_rows(q.get("a"), idx)), idx, 6));
         }},
        {"concat/stack/slice/row/transpose", [&](const ParamSet& q) {
             Tensor cc = concat_cols(q.get("a"), q.get("c"));
             Tensor bt = transpose(q.get("b"));
             Tensor st = stack_rows({row(cc, 1), concat_cols(slice_cols(cc, 2, 3), slice_cols(cc, 3, 3)), concat_cols(bt, bt)});
             return weighted(st);
         }},
        {"segment mean/max/min", [&](const ParamSet& q) {
             return weighted(concat_cols(segment_pool(q.get("a"), segs, Pool::Mean),
                                         concat_cols(segment_pool(q.get("a"), segs, Pool::Max),
                                                     segment_pool(q.get("c"), segs, Pool::Min))));
         }},
        {"mean_rows", [&](const ParamSet& q) { return weighted(mean_rows(q.get("a"))); }},
        {"masked_log_softmax/pick", [&](const ParamSet& q) {
             Tensor ls = masked_log_softmax(q.get("s"), {false, true, false, false});
             return add(pick(ls, 0, 0), scale(pick(ls, 0, 3), 0.5));
         }},
    };
    for (const auto& [name, fn] : cases) {
        INFO(name);
        report(testing::gradcheck(p, all_names(p), fn, 20));
    }
}

TEST_CASE("masked log-softmax: exact zeros on masked entries, k=1 gives log-prob 0") {
    Tensor s(Matrix::Constant(1, 4, 0.3));
    Tensor ls = masked_log_softmax(s, {true, false, true, false});
    CHECK(std::isinf(ls.value()(0, 0)));
    CHECK(std::exp(ls.value()(0, 0)) == 0.0);
    CHECK(std::exp(ls.value()(0, 1)) + std::exp(ls.value()(0, 3)) == doctest::Approx(1.0).epsilon(1e-12));
    Tensor one = masked_log_softmax(Tensor(Matrix::Constant(1, 1, 7.5)), {false});
    CHECK(one.value()(0, 0) == 0.0);
}

TEST_CASE("gcnn: gradient check on a random instance") {
    std::mt19937_64 rng(21);
    auto lp = testing::random_small_lp(rng, 3, 4);
    auto g = featurize(lp);
    ParamSet p = small_params(5);
    calibrate_prenorm(p, kSmall, {&g});
    const Matrix r = random_matrix(4, kSmall.width, rng);
    auto names = p.names_with_prefix(kGcnnPrefix);
    report(testing::gradcheck(p, names, [&](const ParamSet& q) {
        return sum(mul(gcnn_forward(g, q, kSmall), Tensor(r)));
    }, 6));
}

TEST_CASE("gcnn: zero-edge graph and duplicate instances") {
    LpBuilder b("iso");
    b.add_column("x", 1.0, 0.0, 4.0);
    b.add_column("y", -2.0, -kInfinity, 3.0);
    b.add_column("z", 1.0, 0.0, 4.0);
    b.add_row("r", RowSense::LE, 1.0);
    auto g = featurize(std::move(b).build());
    REQUIRE(g.edges.empty());
    ParamSet p = small_params(9);
    Matrix v = gcnn_forward(g, p, kSmall).value();
    // x and z have identical features and no neighbours, so identical embeddings.
    CHECK(v.row(0) == v.row(2));

    auto g2 = g;
    g2.var_feats[1 * 3 + 2] = 0.25;  // perturb y only
    Matrix v2 = gcnn_forward(g2, p, kSmall).value();
    CHECK(v2.row(0) == v.row(0));
    CHECK(v2.row(2) == v.row(2));
    CHECK(v2.row(1) != v.row(1));

    // Two disjoint copies of one instance: each copy's embeddings coincide.
    std::mt19937_64 rng(4);
    auto lp = testing::random_small_lp(rng, 3, 4);
    LpBuilder d("dup");
    for (int copy = 0; copy < 2; ++copy) {
        for (std::size_t j = 0; j < 4; ++j) {
            d.add_column("x" + std::to_string(copy) + std::to_string(j), lp.objective[j], lp.col_lower[j], lp.col_upper[j]);
        }
    }
    for (int copy = 0; copy < 2; ++copy) {
        for (std::size_t i = 0; i < 3; ++i) d.add_row("r" + std::to_string(copy) + std::to_string(i), lp.row_sense[i], lp.rhs[i]);
    }
    for (int copy = 0; copy < 2; ++copy) {
        for (std::size_t j = 0; j < 4; ++j) {
            auto rows = lp.matrix.column_rows(j);
            auto vals = lp.matrix.column_values(j);
            for (std::size_t k = 0; k < rows.size(); ++k) d.add_coefficient(copy * 3 + rows[k], copy * 4 + j, vals[k]);
        }
    }
    auto gd = featurize(std::move(d).build());
    Matrix vd = gcnn_forward(gd, p, kSmall).value();
    CHECK(vd.topRows(4).isApprox(vd.bottomRows(4), 1e-12));
}

TEST_CASE("gcnn: equivariance under variable and constraint relabeling") {
    std::mt19937_64 rng(8);
    ParamSet p = small_params(3);
    for (int t = 0; t < 5; ++t) {
        auto lp = testing::random_small_lp(rng, 4, 6);
        auto g = featurize(lp);
        calibrate_prenorm(p, kSmall, {&g});
        Matrix v = gcnn_forward(g, p, kSmall).value();

        ColumnPermutation perm(testing::random_permutation(rng, 6), PermutationSource::Manual);
        Matrix vp = gcnn_forward(featurize(apply_permutation(lp, perm)), p, kSmall).value();
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(vp.row(static_cast<Eigen::Index>(j)).isApprox(v.row(static_cast<Eigen::Index>(perm[j])), 1e-12));
        }

        // Reverse the constraint order.
        LpInstance rev = lp;
        std::vector<std::size_t> order(lp.num_rows());
        std::iota(order.rbegin(), order.rend(), 0);
        std::vector<SparseMatrix::Triplet> trip;
        for (std::size_t j = 0; j < lp.num_cols(); ++j) {
            auto rows = lp.matrix.column_rows(j);
            auto vals = lp.matrix.column_values(j);
            for (std::size_t k = 0; k < rows.size(); ++k) trip.push_back({lp.num_rows() - 1 - rows[k], j, vals[k]});
        }
        rev.matrix = SparseMatrix::from_triplets(lp.num_rows(), lp.num_cols(), trip);
        for (std::size_t i = 0; i < lp.num_rows(); ++i) {
            rev.rhs[i] = lp.rhs[order[i]];
            rev.row_sense[i] = lp.row_sense[order[i]];
            rev.row_range[i] = lp.row_range[order[i]];
            rev.row_names[i] = lp.row_names[order[i]];
        }
        Matrix vr = gcnn_forward(featurize(rev), p, kSmall).value();
        CHECK(vr.isApprox(v, 1e-12));
    }
}

TEST_CASE("prenorm calibration standardizes the first layer input") {
    std::mt19937_64 rng(2);
    std::vector<BipartiteGraph> graphs;
    for (int i = 0; i < 4; ++i) graphs.push_back(featurize(testing::random_small_lp(rng, 4, 6)));
    std::vector<const BipartiteGraph*> batch;
    for (auto& g : graphs) batch.push_back(&g);
    ParamSet p = small_params(1);
    calibrate_prenorm(p, kSmall, batch);
    for (const auto& name : gcnn_prenorm_names(kSmall)) CHECK(p.buffer(name) != nullptr);

    const Matrix& b = *p.buffer(kGcnnPrefix + "var_embed.pn");
    RowVector mean = RowVector::Zero(3), sq = RowVector::Zero(3);
    double count = 0;
    for (auto& g : graphs) {
        for (std::size_t j = 0; j < g.num_vars; ++j) {
            for (int f = 0; f < 3; ++f) {
                double z = (g.var_feat(j, static_cast<std::size_t>(f)) + b(0, f)) * b(1, f);
                mean(f) += z;
                sq(f) += z * z;
            }
            ++count;
        }
    }
    for (int f = 0; f < 3; ++f) {
        CHECK(mean(f) / count == doctest::Approx(0.0).epsilon(1e-9));
        double var = sq(f) / count;
        // Constant features keep factor 1 and collapse to zero.
        CHECK((var == doctest::Approx(1.0).epsilon(1e-9) || var == doctest::Approx(0.0)));
    }

    // Frozen statistics are not recomputed by a second calibration.
    Matrix before = *p.buffer(kGcnnPrefix + "cons_embed.pn");
    calibrate_prenorm(p, kSmall, {batch[0]});
    CHECK(*p.buffer(kGcnnPrefix + "cons_embed.pn") == before);
}

TEST_CASE("pointer: k=1, bijection, distributions and log-prob bookkeeping") {
    ParamSet p = small_params(2);
    std::mt19937_64 rng(6);
    Tensor one(random_matrix(1, kSmall.width, rng));
    auto o1 = pointer_forward(one, p, kSmall, DecodeMode::Sample, 1);
    CHECK(o1.perm == std::vector<std::size_t>{0});
    CHECK(o1.log_prob.item() == 0.0);

    for (int t = 0; t < 20; ++t) {
        Tensor embs(random_matrix(5, kSmall.width, rng));
        auto out = pointer_forward(embs, p, kSmall, t % 2 ? DecodeMode::Greedy : DecodeMode::Sample,
                                   static_cast<std::uint64_t>(t));
        std::set<std::size_t> seen(out.perm.begin(), out.perm.end());
        CHECK(seen.size() == 5);
        CHECK(*seen.rbegin() == 4);
        double total = 0.0;
        std::set<std::size_t> chosen;
        for (std::size_t s = 0; s < 5; ++s) {
            double mass = 0.0;
            for (std::size_t j = 0; j < 5; ++j) {
                if (chosen.count(j)) CHECK(out.step_probs[s][j] == 0.0);
                mass += out.step_probs[s][j];
            }
            CHECK(std::abs(mass - 1.0) <= 1e-6);
            chosen.insert(out.perm[s]);
            total += out.step_log_probs[s];
        }
        CHECK(std::abs(total - out.log_prob.item()) <= 1e-10);
    }
}

TEST_CASE("pointer: sampling is reproducible and greedy ignores the seed") {
    ParamSet p = small_params(4);
    std::mt19937_64 rng(10);
    Tensor embs(random_matrix(6, kSmall.width, rng));
    auto a = pointer_forward(embs, p, kSmall, DecodeMode::Sample, 99);
    auto b = pointer_forward(embs, p, kSmall, DecodeMode::Sample, 99);
    CHECK(a.perm == b.perm);
    CHECK(a.log_prob.item() == b.log_prob.item());
    auto g1 = pointer_forward(embs, p, kSmall, DecodeMode::Greedy, 1);
    auto g2 = pointer_forward(embs, p, kSmall, DecodeMode::Greedy, 2);
    CHECK(g1.perm == g2.perm);

    auto forced = pointer_forward(embs, p, kSmall, DecodeMode::Forced, 0, &a.perm);
    CHECK(forced.log_prob.item() == a.log_prob.item());
    std::vector<std::size_t> bad{0, 0, 1, 2, 3, 4};
    CHECK_THROWS_AS(pointer_forward(embs, p, kSmall, DecodeMode::Forced, 0, &bad), InvalidPermutation);
}

namespace {

// Max over the 6 orders of |count - N p| / sqrt(N p (1 - p)).
double max_z(const std::map<std::vector<std::size_t>, int>& counts, const std::map<std::vector<std::size_t>, double>& probs,
             int n) {
    double worst = 0.0;
    for (const auto& [perm, prob] : probs) {
        auto it = counts.find(perm);
        double c = it == counts.end() ? 0.0 : it->second;
        worst = std::max(worst, std::abs(c - n * prob) / std::sqrt(n * prob * (1 - prob)));
    }
    return worst;
}

}  // namespace

TEST_CASE("pointer: untrained sampling is uniform over 3! orders within 3 sigma") {
    ParamSet p = init_policy_params(ModelDims{}, 17);
    std::mt19937_64 rng(12);
    Tensor embs(random_matrix(3, 64, rng));
    const int n = 10000;
    std::map<std::vector<std::size_t>, int> counts;
    for (int s = 0; s < n; ++s) ++counts[pointer_forward(embs, p, ModelDims{}, DecodeMode::Sample, derive_seed(5, s)).perm];
    std::map<std::vector<std::size_t>, double> uniform;
    std::vector<std::size_t> perm{0, 1, 2};
    do uniform[perm] = 1.0 / 6.0;
    while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(counts.size() == 6);
    CHECK(max_z(counts, uniform, n) < 3.0);
}

TEST_CASE("pointer: sampled frequencies follow the model's own probabilities") {
    ParamSet p = small_params(23);
    p.get(kPointerPrefix + "att.v").node()->value *= 3.0;
    std::mt19937_64 rng(13);
    Tensor embs(random_matrix(3, kSmall.width, rng));
    std::map<std::vector<std::size_t>, double> model;
    std::vector<std::size_t> perm{0, 1, 2};
    do model[perm] = std::exp(pointer_forward(embs, p, kSmall, DecodeMode::Forced, 0, &perm).log_prob.item());
    while (std::next_permutation(perm.begin(), perm.end()));
    double total = 0.0;
    for (auto& [_, pr] : model) total += pr;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    const int n = 10000;
    std::map<std::vector<std::size_t>, int> counts;
    for (int s = 0; s < n; ++s) ++counts[pointer_forward(embs, p, kSmall, DecodeMode::Sample, derive_seed(8, s)).perm];
    CHECK(max_z(counts, model, n) < 3.0);
}

TEST_CASE("pointer: gradient check on forced log-probability") {
    ParamSet p = small_params(31);
    std::mt19937_64 rng(14);
    p.add("embs", random_matrix(4, kSmall.width, rng));
    std::vector<std::size_t> order{2, 0, 3, 1};
    auto names = p.names_with_prefix(kPointerPrefix);
    names.push_back("embs");
    report(testing::gradcheck(p, names, [&](const ParamSet& q) {
        return pointer_forward(q.get("embs"), q, kSmall, DecodeMode::Forced, 0, &order).log_prob;
    }, 8));
}

TEST_CASE("critic: pooling invariances, stop-gradient and gradient check") {
    ParamSet p = small_params(41);
    std::mt19937_64 rng(15);
    Matrix row_m = random_matrix(1, kSmall.width, rng);
    Matrix rep(4, kSmall.width);
    for (int i = 0; i < 4; ++i) rep.row(i) = row_m.row(0);
    CHECK(critic_forward(Tensor(rep), p).item() == doctest::Approx(critic_forward(Tensor(row_m), p).item()).epsilon(1e-14));

    Matrix m = random_matrix(5, kSmall.width, rng);
    Matrix shuffled = m.colwise().reverse();
    CHECK(critic_forward(Tensor(m), p).item() == doctest::Approx(critic_forward(Tensor(shuffled), p).item()).epsilon(1e-12));

    p.add("embs", m);
    backward(critic_forward(p.get("embs"), p));
    CHECK(p.get("embs").grad().isZero(0.0));

    report(testing::gradcheck(p, p.names_with_prefix(kCriticPrefix), [&](const ParamSet& q) {
        return critic_forward(q.get("embs"), q);
    }, 20));
}

TEST_CASE("full pipeline gradient on a 3-cluster toy instance") {
    std::mt19937_64 rng(16);
    auto lp = testing::random_small_lp(rng, 3, 6);
    auto g = featurize(lp);
    ParamSet p = small_params(51);
    calibrate_prenorm(p, kSmall, {&g});
    const std::vector<std::vector<std::size_t>> clusters{{0, 1}, {2, 3}, {4, 5}};
    const std::vector<std::size_t> order{1, 2, 0};
    auto names = p.names_with_prefix(kGcnnPrefix);
    for (auto& n : p.names_with_prefix(kPointerPrefix)) names.push_back(n);
    report(testing::gradcheck(p, names, [&](const ParamSet& q) {
        Tensor sigma = segment_pool(gcnn_forward(g, q, kSmall), clusters, Pool::Mean);
        return scale(pointer_forward(sigma, q, kSmall, DecodeMode::Forced, 0, &order).log_prob, 1.7);
    }, 4));
}

TEST_CASE("adam: zero gradient, clipping and a quadratic bowl") {
    ParamSet p;
    p.add("w", Matrix::Constant(1, 4, 0.5));
    AdamState st;
    const auto names = p.names();
    adam_step(p, names, st, 1e-2, 1.0);
    CHECK(st.step == 1);
    CHECK(p.get("w").value() == Matrix::Constant(1, 4, 0.5));

    // Norm-10 gradient clipped to norm 1: the first moment records the clipped gradient.
    p.get("w").mutable_grad() = Matrix::Constant(1, 4, 5.0);
    AdamState st2;
    double pre = adam_step(p, names, st2, 1e-3, 1.0);
    CHECK(pre == doctest::Approx(10.0));
    CHECK((st2.m.at("w") / 0.1).norm() == doctest::Approx(1.0));

    ParamSet q;
    q.add("w", (Matrix(1, 4) << 0.5, -0.5, 0.5, -0.5).finished());
    AdamState sq;
    for (int i = 0; i < 500; ++i) {
        q.zero_grad();
        backward(sum(mul(q.get("w"), q.get("w"))));
        adam_step(q, q.names(), sq, 1e-2, 0.0);
    }
    CHECK(q.get("w").value().norm() < 1e-3);

    CHECK(decayed_lr(1e-4, 0.96, 1000, 999) == 1e-4);
    CHECK(decayed_lr(1e-4, 0.96, 1000, 2500) == doctest::Approx(1e-4 * 0.96 * 0.96));

    p.get("w").mutable_grad()(0, 0) = std::nan("");
    CHECK_THROWS_AS(adam_step(p, names, st, 1e-2, 1.0), NonFinite);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    std::mt19937_64 rng(18);
    ParamSet p = small_params(61);
    auto g = featurize(testing::random_small_lp(rng, 3, 5));
    calibrate_prenorm(p, kSmall, {&g});
    backward(sum(gcnn_forward(g, p, kSmall)));
    AdamState st;
    adam_step(p, p.names_with_prefix(kGcnnPrefix), st, 1e-3, 1.0);

    Checkpoint ck;
    ck.step = 42;
    ck.meta = R"({"note":"x"})";
    Rng r(7);
    r();
    ck.rng_state = rng_state(r);
    ck.params = p.clone();
    ck.optimizers["policy"] = st;
    auto path = std::filesystem::temp_directory_path() / "lpreform_ckpt_test.bin";
    save_checkpoint(ck, path);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.step == 42);
    CHECK(back.meta == ck.meta);
    CHECK(back.rng_state == ck.rng_state);
    CHECK(back.params.names() == p.names());
    CHECK(back.params.hash(p.names()) == p.hash(p.names()));
    CHECK(back.params.buffer_names() == p.buffer_names());
    for (const auto& n : p.buffer_names()) CHECK(*back.params.buffer(n) == *p.buffer(n));
    CHECK(back.optimizers.at("policy") == st);
    Rng restored;
    restore_rng(restored, back.rng_state);
    CHECK(restored() == r());

    // Corruption is detected.
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("X", 1);
    }
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    save_checkpoint(ck, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
}
