#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "lpreform/datagen.hpp"
#include "lpreform/errors.hpp"
#include "lpreform/training.hpp"
#include "support/critic_fit.hpp"
#include "support/gradcheck.hpp"

using namespace lpreform;

namespace {

const nn::ModelDims kSmall{8, 2, 6, 5};

std::vector<LpInstance> tiny_dataset(std::size_t count, std::uint64_t seed = 3) {
    ScenarioSpec s;
    s.items = 6;
    s.bins = 3;
    s.dims = 1;
    s.instance_count = count;
    s.seed = seed;
    std::vector<LpInstance> out;
    for (auto& g : generate(s)) out.push_back(std::move(g.lp));
    return out;
}

LpInstance infeasible_lp() {
    LpBuilder b("infeasible");
    b.add_column("x0", 1.0, 0.0, 1.0);
    b.add_column("x1", 1.0, 0.0, 1.0);
    b.add_row("r0", RowSense::GE, 5.0);
    b.add_coefficient(0, 0, 1.0);
    b.add_coefficient(0, 1, 1.0);
    return std::move(b).build();
}

TrainConfig tiny_config(const std::filesystem::path& dir = {}) {
    TrainConfig c;
    c.steps = 6;
    c.batch_size = 3;
    c.lr = 1e-3;
    c.decay_interval = 2;
    c.dims = kSmall;
    c.reform.k_clusters = 3;
    c.checkpoint_every = 2;
    c.seed = 17;
    c.out_dir = dir;
    return c;
}

std::vector<std::string> policy_names(const nn::ParamSet& p) {
    auto n = p.names_with_prefix(nn::kGcnnPrefix);
    auto q = p.names_with_prefix(nn::kPointerPrefix);
    n.insert(n.end(), q.begin(), q.end());
    return n;
}

// Metrics file without the wall_time column.
std::string metrics_without_time(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto d = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(d);
    return d;
}

void randomize_scores(Policy& policy, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1, 1);
    auto& v = policy.params.get("pointer.att.v").mutable_value();
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = d(rng);
}

}  // namespace

TEST_CASE("reward: raw and relative modes") {
    CHECK(reward(120, 100, RewardMode::Raw) == 20);
    CHECK(reward(100, 120, RewardMode::Raw) == -20);
    CHECK(reward(200, 150, RewardMode::Relative) == 0.25);
    CHECK(reward(0, 3, RewardMode::Relative) == -3);
    CHECK(parse_reward_mode(to_string(RewardMode::Relative)) == RewardMode::Relative);
    CHECK_THROWS_AS(parse_reward_mode("scaled"), ConfigError);
}

TEST_CASE("TrainConfig: profiles, validation and metrics rows") {
    auto desk = TrainConfig::desk();
    CHECK(desk.steps == 5000);
    CHECK(desk.reform.k_clusters == 5);
    CHECK(desk.batch_size == 8);
    auto paper = TrainConfig::paper();
    CHECK(paper.steps == 40000);
    CHECK(paper.reform.k_clusters == 20);
    CHECK(paper.train_size == 640);
    CHECK(paper.val_size == 320);
    CHECK(paper.lr == 1e-4);
    CHECK(paper.lr_decay == 0.96);
    CHECK(paper.to_json()["k_shot_eval"] == 3);

    TrainConfig bad;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.steps = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    CHECK(metrics_csv_header() == "step,mean_reward,critic_loss,lr,wall_time\n");
    CHECK(metrics_csv_row({3, 1.5, 0.25, 1e-4, 2.0, 0}) == "3,1.5,0.25,0.0001,2.000\n");
}

TEST_CASE("surrogate loss: analytic gradient matches finite differences with constant advantages") {
    Policy policy = Policy::create(kSmall, 5);
    randomize_scores(policy, 9);
    auto data = tiny_dataset(3);
    std::vector<BipartiteGraph> graphs;
    std::vector<ClusterSplit> splits;
    for (const auto& lp : data) {
        graphs.push_back(featurize(lp));
        splits.push_back(split_variables(lp, 3, SplitMethod::ContiguousBlocks));
    }
    std::vector<const BipartiteGraph*> gp;
    for (const auto& g : graphs) gp.push_back(&g);
    nn::calibrate_prenorm(policy.params, kSmall, gp);

    const std::vector<std::vector<std::size_t>> orders{{2, 0, 1}, {0, 1, 2}, {1, 2, 0}};
    const std::vector<double> rewards{3.0, -1.0, 0.5};
    const std::vector<double> baselines{0.5, 0.25, -2.0};
    auto log_probs = [&](const nn::ParamSet& p) {
        std::vector<nn::Tensor> out;
        for (std::size_t i = 0; i < data.size(); ++i) {
            auto v = nn::gcnn_forward(graphs[i], p, kSmall);
            auto s = pool_clusters(v, splits[i], nn::Pool::Mean);
            out.push_back(nn::pointer_forward(s, p, kSmall, nn::DecodeMode::Forced, 0, &orders[i]).log_prob);
        }
        return out;
    };
    auto constants = [](const std::vector<double>& v) {
        std::vector<nn::Tensor> out;
        for (double x : v) out.emplace_back(nn::Matrix::Constant(1, 1, x));
        return out;
    };

    auto policy_loss = [&](const nn::ParamSet& p) { return surrogate_loss(log_probs(p), constants(baselines), rewards); };
    auto bad = testing::gradcheck(policy.params, policy_names(policy.params), policy_loss, 4, 1e-6);
    for (const auto& m : bad) MESSAGE(m.name << "[" << m.index << "] " << m.analytic << " vs " << m.numeric);
    CHECK(bad.empty());

    // Critic half: log p held constant, predictions from the critic.
    std::vector<nn::Matrix> embs;
    for (const auto& g : graphs) embs.push_back(nn::gcnn_forward(g, policy.params, kSmall).value());
    auto critic_loss = [&](const nn::ParamSet& p) {
        std::vector<nn::Tensor> preds;
        for (const auto& e : embs) preds.push_back(nn::critic_forward(nn::Tensor(e), p));
        return surrogate_loss(constants({0.0, 0.0, 0.0}), preds, rewards);
    };
    CHECK(testing::gradcheck(policy.params, policy.params.names_with_prefix(nn::kCriticPrefix), critic_loss).empty());

    // Zero advantage: nothing reaches the policy parameters.
    policy.params.zero_grad();
    nn::backward(surrogate_loss(log_probs(policy.params), constants(rewards), rewards));
    for (const auto& n : policy_names(policy.params)) CHECK(policy.params.get(n).grad().isZero(0.0));

    CHECK_THROWS_AS(surrogate_loss({}, {}, {}), DimensionMismatch);
}

TEST_CASE("train: policy and critic updates stay in their own parameters") {
    Policy policy = Policy::create(kSmall, 2);
    randomize_scores(policy, 4);
    auto lp = tiny_dataset(1)[0];
    auto fwd = policy_forward(lp, featurize(lp), policy, [] {
        ReformulateConfig c;
        c.k_clusters = 3;
        return c;
    }(), nn::DecodeMode::Sample, 1);
    nn::Tensor pred = nn::critic_forward(fwd.var_embs, policy.params);

    const auto pol = policy_names(policy.params);
    const auto crit = policy.params.names_with_prefix(nn::kCriticPrefix);
    const auto hp = policy.params.hash(pol);
    const auto hc = policy.params.hash(crit);

    // Critic regression only: no gradient and no change on the policy side.
    policy.params.zero_grad();
    nn::Tensor d = nn::sub(pred, nn::Tensor(nn::Matrix::Constant(1, 1, 4.0)));
    nn::backward(nn::mul(d, d));
    for (const auto& n : pol) CHECK(policy.params.get(n).grad().isZero(0.0));
    nn::AdamState cs;
    nn::adam_step(policy.params, crit, cs, 1e-2, 0.0);
    CHECK(policy.params.hash(pol) == hp);
    CHECK(policy.params.hash(crit) != hc);

    // Policy term only: the critic is untouched.
    policy.params.zero_grad();
    nn::backward(nn::scale(fwd.sample.log_prob, -2.0));
    for (const auto& n : crit) CHECK(policy.params.get(n).grad().isZero(0.0));
    const auto hc2 = policy.params.hash(crit);
    nn::AdamState ps;
    nn::adam_step(policy.params, pol, ps, 1e-2, 0.0);
    CHECK(policy.params.hash(crit) == hc2);
    CHECK(policy.params.hash(pol) != hp);
}

TEST_CASE("train: a single cluster leaves GCNN and pointer unchanged") {
    auto data = tiny_dataset(4);
    TrainConfig cfg = tiny_config();
    cfg.reform.k_clusters = 1;
    cfg.steps = 3;
    const TrainState init = initial_state(cfg);
    const auto pol = policy_names(init.policy.params);
    const auto crit = init.policy.params.names_with_prefix(nn::kCriticPrefix);
    auto r = train(cfg, data);
    CHECK(r.state.step == 3);
    CHECK(r.state.policy.params.hash(pol) == init.policy.params.hash(pol));
    CHECK(r.state.policy.params.hash(crit) != init.policy.params.hash(crit));
    for (const auto& s : r.log) CHECK(s.mean_reward == 0.0);
}

TEST_CASE("train: logs, checkpoints and worker-count independence") {
    auto data = tiny_dataset(5);
    auto dir = fresh_dir("lpreform_test_train_a");
    TrainConfig cfg = tiny_config(dir);
    auto a = train(cfg, data);
    REQUIRE(a.log.size() == 6);
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].step == i + 1);
        CHECK(a.log[i].lr == doctest::Approx(nn::decayed_lr(cfg.lr, cfg.lr_decay, cfg.decay_interval, i)));
        CHECK(std::isfinite(a.log[i].mean_reward));
    }
    CHECK(a.dropped.empty());

    // The checkpoint holds the final state bit-exactly.
    TrainState loaded = from_checkpoint(nn::load_checkpoint(dir / kCheckpointFile));
    CHECK(loaded.step == 6);
    CHECK(loaded.policy.dims == kSmall);
    CHECK(loaded.rng_state == a.state.rng_state);
    CHECK(loaded.policy_opt == a.state.policy_opt);
    CHECK(loaded.critic_opt == a.state.critic_opt);
    const auto& names = a.state.policy.params.names();
    CHECK(loaded.policy.params.hash(names) == a.state.policy.params.hash(names));
    for (const auto& b : a.state.policy.params.buffer_names()) {
        REQUIRE(loaded.policy.params.buffer(b));
        CHECK(*loaded.policy.params.buffer(b) == *a.state.policy.params.buffer(b));
    }

    std::ifstream csv(dir / kMetricsFile);
    std::string header;
    std::getline(csv, header);
    CHECK(header == "step,mean_reward,critic_loss,lr,wall_time");

    TrainConfig threaded = tiny_config();
    threaded.reform.jobs = 3;
    auto b = train(threaded, data);
    REQUIRE(b.log.size() == a.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(metrics_csv_row({a.log[i].step, a.log[i].mean_reward, a.log[i].critic_loss, a.log[i].lr, 0.0, 0}) ==
              metrics_csv_row({b.log[i].step, b.log[i].mean_reward, b.log[i].critic_loss, b.log[i].lr, 0.0, 0}));
    }
    CHECK(b.state.policy.params.hash(names) == a.state.policy.params.hash(names));
    std::filesystem::remove_all(dir);
}

TEST_CASE("train: resuming from a checkpoint reproduces the uninterrupted run") {
    auto data = tiny_dataset(5);
    auto full_dir = fresh_dir("lpreform_test_train_full");
    auto part_dir = fresh_dir("lpreform_test_train_part");
    auto full = train(tiny_config(full_dir), data);

    TrainConfig first = tiny_config(part_dir);
    first.steps = 3;
    train(first, data);
    TrainState mid = from_checkpoint(nn::load_checkpoint(part_dir / kCheckpointFile));
    CHECK(mid.step == 3);
    // A stray row past the checkpoint (as after a crash) is discarded on resume.
    {
        std::ofstream extra(part_dir / kMetricsFile, std::ios::app);
        extra << "4,9,9,9,9.000\n";
    }
    auto resumed = train(tiny_config(part_dir), data, mid);
    CHECK(resumed.state.step == 6);
    CHECK(resumed.log.size() == 3);

    CHECK(metrics_without_time(part_dir / kMetricsFile) == metrics_without_time(full_dir / kMetricsFile));
    const auto& names = full.state.policy.params.names();
    CHECK(resumed.state.policy.params.hash(names) == full.state.policy.params.hash(names));
    CHECK(resumed.state.policy_opt == full.state.policy_opt);
    std::filesystem::remove_all(full_dir);
    std::filesystem::remove_all(part_dir);
}

TEST_CASE("train: unsolvable instances are screened out") {
    auto data = tiny_dataset(3);
    data.insert(data.begin() + 1, infeasible_lp());
    TrainConfig cfg = tiny_config();
    cfg.steps = 2;
    auto r = train(cfg, data);
    CHECK(r.dropped == std::vector<std::size_t>{1});
    CHECK_THROWS_AS(train(cfg, {infeasible_lp()}), ConfigError);
}

TEST_CASE("train: non-finite parameters abort and keep the last checkpoint") {
    auto data = tiny_dataset(3);
    auto dir = fresh_dir("lpreform_test_train_nan");
    TrainConfig cfg = tiny_config(dir);
    cfg.steps = 2;
    auto r = train(cfg, data);
    TrainState broken = r.state;
    broken.policy.params = r.state.policy.params.clone();
    broken.policy.params.get("critic.l2.b").mutable_value()(0, 0) = std::nan("");
    cfg.steps = 4;
    CHECK_THROWS_AS(train(cfg, data, broken), NonFinite);
    auto kept = nn::load_checkpoint(dir / kCheckpointFile);
    CHECK(kept.step == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("train: mismatched model dimensions are rejected on resume") {
    auto data = tiny_dataset(2);
    TrainConfig cfg = tiny_config();
    TrainState s = initial_state(cfg);
    cfg.dims.width = 12;
    CHECK_THROWS_AS(train(cfg, data, s), ConfigError);
}

TEST_CASE("critic: converges to a constant reward within 2000 steps") {
    Policy policy = Policy::create({}, 8);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<nn::Matrix> inputs;
    for (int i = 0; i < 4; ++i) {
        nn::Matrix x(10 + i, 64);
        for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] = d(rng);
        inputs.push_back(x);
    }
    for (double target : {1.0, -3.0}) {
        nn::ParamSet p = policy.params.clone();
        auto fit = testing::fit_critic_constant(p, inputs, target, TrainConfig{}.lr, 2000);
        INFO("target " << target << " steps " << fit.steps << " error " << fit.worst_rel_error);
        CHECK(fit.converged);
    }
}

TEST_CASE("evaluate: a single cluster gives ratio exactly one") {
    auto data = tiny_dataset(3);
    Policy policy = Policy::create(kSmall, 1);
    EvalConfig ec;
    ec.reform.k_clusters = 1;
    auto rep = evaluate(policy, data, ec);
    REQUIRE(rep.records.size() == 3);
    for (const auto& r : rep.records) {
        CHECK(r.ok());
        CHECK(r.ratio == 1.0);
        CHECK(r.best_iterations == r.baseline_iterations);
    }
    CHECK(rep.mean_ratio == 1.0);
    CHECK(rep.fraction_improved == 0.0);
    CHECK(rep.ratio_cdf().back().second == 1.0);
}

TEST_CASE("evaluate: failures are recorded, output is reproducible") {
    auto data = tiny_dataset(3);
    data.push_back(infeasible_lp());
    Policy policy = Policy::create(kSmall, 1);
    randomize_scores(policy, 2);
    EvalConfig ec;
    ec.reform.k_clusters = 3;
    ec.k_shots = 2;
    auto rep = evaluate(policy, data, ec);
    CHECK(rep.failures == 1);
    CHECK_FALSE(rep.records[3].ok());
    CHECK(rep.records[3].failure.find("Infeasible") != std::string::npos);
    CHECK(rep.ratio_cdf().size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(rep.records[i].ratio == doctest::Approx(rep.records[i].best_iterations / rep.records[i].baseline_iterations));
    }

    EvalConfig threaded = ec;
    threaded.reform.jobs = 4;
    auto again = evaluate(policy, data, threaded);
    CHECK(evaluation_csv(again) == evaluation_csv(rep));
    CHECK(ratio_cdf_csv(again) == ratio_cdf_csv(rep));

    const std::string csv = evaluation_csv(rep);
    CHECK(csv.rfind("instance,baseline_iterations,best_iterations,ratio,best_shot,cluster_perm,failure\n", 0) == 0);
    CHECK(rep.summary()["failures"] == 1);

    ec.mode = nn::DecodeMode::Greedy;
    auto greedy = evaluate(policy, data, ec);
    for (std::size_t i = 0; i < 3; ++i) CHECK(greedy.records[i].best_shot == 0);
}

TEST_CASE("evaluate: an untrained policy matches uniformly random orders") {
    ScenarioSpec spec = desk_item_placement();
    spec.instance_count = 40;
    spec.seed = 99;
    std::vector<LpInstance> data;
    for (auto& g : generate(spec)) data.push_back(std::move(g.lp));

    Policy policy = Policy::create(nn::ModelDims{}, 4);
    EvalConfig ec;
    ec.reform.k_clusters = 3;
    ec.k_shots = 1;
    auto rep = evaluate(policy, data, ec);
    REQUIRE(rep.failures == 0);

    // Exact expectation of the one-shot ratio under uniform orders, from the oracle.
    double expected = 0.0, variance = 0.0;
    for (const auto& lp : data) {
        auto orc = brute_force_oracle(lp, split_variables(lp, 3, SplitMethod::ContiguousBlocks), ec.reform);
        const double base = *orc.metric[orc.find({0, 1, 2})];
        double m = 0.0, m2 = 0.0;
        for (const auto& v : orc.metric) {
            m += *v / base / 6.0;
            m2 += (*v / base) * (*v / base) / 6.0;
        }
        expected += m / 40.0;
        variance += (m2 - m * m) / (40.0 * 40.0);
    }
    INFO("observed " << rep.mean_ratio << " expected " << expected << " sd " << std::sqrt(variance));
    CHECK(std::abs(rep.mean_ratio - expected) <= 3.0 * std::sqrt(variance) + 1e-12);
}

TEST_CASE("brute_force_oracle: table shape, minimum and tie order") {
    auto lp = tiny_dataset(1)[0];
    ReformulateConfig cfg;
    auto one = brute_force_oracle(lp, split_variables(lp, 1, SplitMethod::ContiguousBlocks), cfg);
    CHECK(one.perms == std::vector<std::vector<std::size_t>>{{0}});
    CHECK(one.best == 0);

    auto three = brute_force_oracle(lp, split_variables(lp, 3, SplitMethod::ContiguousBlocks), cfg);
    REQUIRE(three.perms.size() == 6);
    CHECK(std::is_sorted(three.perms.begin(), three.perms.end()));
    CHECK(three.find({0, 1, 2}) == 0);
    CHECK(three.find({2, 1, 0}) == 5);
    for (const auto& m : three.metric) {
        REQUIRE(m);
        CHECK(*three.metric[three.best] <= *m);
    }
    for (std::size_t q = 0; q < three.best; ++q) CHECK(*three.metric[q] > *three.metric[three.best]);
    CHECK(three.in_bottom(three.best, 0.3));
    CHECK_THROWS_AS(three.find({0, 0, 1}), InvalidPermutation);

    const std::string csv = oracle_csv(three);
    CHECK(csv.rfind("cluster_perm,iterations\n0 1 2,", 0) == 0);

    auto wide = tiny_dataset(1)[0];
    CHECK_THROWS_AS(brute_force_oracle(wide, split_variables(wide, 10, SplitMethod::ContiguousBlocks), cfg),
                    TooManyPermutations);
}

TEST_CASE("OracleResult::in_bottom uses the floor quantile position") {
    OracleResult r;
    r.perms.resize(6);
    r.metric = {10.0, 12.0, 8.0, std::nullopt, 9.0, 12.0};
    // Solved values sorted: 8 9 10 12 12; position floor(0.3 * 4) = 1, threshold 9.
    CHECK(r.in_bottom(2, 0.3));
    CHECK(r.in_bottom(4, 0.3));
    CHECK_FALSE(r.in_bottom(0, 0.3));
    CHECK_FALSE(r.in_bottom(3, 0.3));
    CHECK(r.in_bottom(5, 1.0));
}

TEST_CASE("random_cluster_permutation: bijective and uniform") {
    Rng rng(5);
    std::map<std::vector<std::size_t>, int> counts;
    const int draws = 6000;
    for (int i = 0; i < draws; ++i) counts[random_cluster_permutation(3, rng)]++;
    CHECK(counts.size() == 6);
    const double p = 1.0 / 6.0, sd = std::sqrt(draws * p * (1 - p));
    for (const auto& [perm, c] : counts) CHECK(std::abs(c - draws * p) <= 3 * sd);
    CHECK(random_cluster_permutation(1, rng) == std::vector<std::size_t>{0});
}
