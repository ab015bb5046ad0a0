#include "lpreform/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "lpreform/errors.hpp"
#include "lpreform/parallel.hpp"
#include "lpreform/random.hpp"

namespace lpreform {

std::string to_string(RewardMode m) { return m == RewardMode::Raw ? "raw" : "relative"; }

RewardMode parse_reward_mode(const std::string& s) {
    if (s == "raw") return RewardMode::Raw;
    if (s == "relative") return RewardMode::Relative;
    throw ConfigError("unknown reward mode '" + s + "' (expected raw or relative)");
}

double reward(double baseline, double permuted, RewardMode mode) {
    const double r = baseline - permuted;
    return mode == RewardMode::Raw ? r : r / std::max(baseline, 1.0);
}

TrainConfig TrainConfig::desk() {
    TrainConfig c;
    c.steps = 5000;
    c.reform.k_clusters = 5;
    c.train_size = 400;
    c.val_size = 50;
    c.checkpoint_every = 500;
    return c;
}

TrainConfig TrainConfig::paper() { return TrainConfig{}; }

void TrainConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("train: " + what);
    };
    require(steps >= 1, "steps must be at least 1");
    require(batch_size >= 1, "batch_size must be at least 1");
    require(lr > 0.0 && std::isfinite(lr), "lr must be positive");
    require(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay must lie in (0, 1]");
    require(decay_interval >= 1, "decay_interval must be at least 1");
    require(clip_norm >= 0.0, "clip_norm must be non-negative");
    require(k_shot_eval >= 1, "k_shot_eval must be at least 1");
    require(checkpoint_every >= 1, "checkpoint_every must be at least 1");
    require(reform.k_clusters >= 1, "k_clusters must be at least 1");
    require(dims.width > 0 && dims.rounds > 0 && dims.pointer_hidden > 0 && dims.critic_hidden > 0,
            "model dimensions must be positive");
    reform.solver.validate();
}

nlohmann::json TrainConfig::to_json() const {
    return {
        {"steps", steps},
        {"batch_size", batch_size},
        {"lr", lr},
        {"lr_decay", lr_decay},
        {"decay_interval", decay_interval},
        {"clip_norm", clip_norm},
        {"reward_mode", to_string(reward_mode)},
        {"seed", seed},
        {"k_shot_eval", k_shot_eval},
        {"train_size", train_size},
        {"val_size", val_size},
        {"dims", {{"width", dims.width}, {"rounds", dims.rounds}, {"pointer_hidden", dims.pointer_hidden},
                  {"critic_hidden", dims.critic_hidden}}},
        {"k_clusters", reform.k_clusters},
        {"split_method", to_string(reform.split_method)},
        {"pool", to_string(reform.pool)},
        {"metric", to_string(reform.metric)},
        {"row_norm", reform.features.row_norm == RowNorm::L2 ? "l2" : "max-abs"},
        {"pricing", to_string(reform.solver.pricing)},
        {"iteration_limit", reform.solver.iteration_limit},
        {"jobs", reform.jobs},
        {"checkpoint_every", checkpoint_every},
    };
}

std::string metrics_csv_header() { return "step,mean_reward,critic_loss,lr,wall_time\n"; }

std::string metrics_csv_row(const StepLog& s) {
    return fmt::format("{},{},{},{},{:.3f}\n", s.step, s.mean_reward, s.critic_loss, s.lr, s.wall_time);
}

TrainState initial_state(const TrainConfig& cfg) {
    TrainState s;
    s.policy = Policy::create(cfg.dims, cfg.seed);
    s.rng_state = rng_state(Rng(derive_seed(cfg.seed, 1)));
    return s;
}

nn::Checkpoint to_checkpoint(const TrainState& s, const TrainConfig& cfg) {
    nn::Checkpoint c;
    c.step = s.step;
    const auto& d = s.policy.dims;
    c.meta = nlohmann::json{{"dims", {{"width", d.width}, {"rounds", d.rounds}, {"pointer_hidden", d.pointer_hidden},
                                      {"critic_hidden", d.critic_hidden}}},
                            {"config", cfg.to_json()}}
                 .dump();
    c.rng_state = s.rng_state;
    c.params = s.policy.params.clone();
    c.optimizers["policy"] = s.policy_opt;
    c.optimizers["critic"] = s.critic_opt;
    return c;
}

TrainState from_checkpoint(const nn::Checkpoint& ckpt) {
    TrainState s;
    try {
        const auto meta = nlohmann::json::parse(ckpt.meta);
        const auto& d = meta.at("dims");
        s.policy.dims = {d.at("width").get<int>(), d.at("rounds").get<int>(), d.at("pointer_hidden").get<int>(),
                         d.at("critic_hidden").get<int>()};
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint metadata lacks model dimensions: ") + e.what());
    }
    s.policy.params = ckpt.params.clone();
    s.step = ckpt.step;
    s.rng_state = ckpt.rng_state;
    auto opt = [&](const std::string& name) {
        auto it = ckpt.optimizers.find(name);
        return it == ckpt.optimizers.end() ? nn::AdamState{} : it->second;
    };
    s.policy_opt = opt("policy");
    s.critic_opt = opt("critic");
    return s;
}

Policy load_policy(const std::filesystem::path& path) { return from_checkpoint(nn::load_checkpoint(path)).policy; }

namespace {

nn::Tensor instance_loss(const nn::Tensor& log_prob, const nn::Tensor& prediction, double r, double inv_b) {
    const double advantage = r - prediction.item();
    nn::Tensor diff = nn::sub(prediction, nn::Tensor(nn::Matrix::Constant(1, 1, r)));
    return nn::add(nn::scale(log_prob, -advantage * inv_b), nn::scale(nn::mul(diff, diff), inv_b));
}

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t step, std::size_t i) {
    return derive_seed(derive_seed(seed, step + 2), i);
}

bool prenorm_calibrated(const Policy& p) {
    for (const auto& name : nn::gcnn_prenorm_names(p.dims)) {
        if (!p.params.buffer(name)) return false;
    }
    return true;
}

// Keeps the header and the rows up to `step` of an earlier run's metrics file.
std::string truncated_metrics(const std::filesystem::path& path, std::uint64_t step) {
    std::ifstream in(path);
    std::string out = metrics_csv_header();
    std::string line;
    if (!std::getline(in, line)) return out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (std::stoull(line.substr(0, line.find(','))) > step) break;
        out += line + "\n";
    }
    return out;
}

struct Slot {
    Policy replica;
    PolicyForward fwd;
    nn::Tensor prediction;
    std::optional<double> reward;
};

}  // namespace

nn::Tensor surrogate_loss(const std::vector<nn::Tensor>& log_probs, const std::vector<nn::Tensor>& predictions,
                          const std::vector<double>& rewards) {
    if (log_probs.empty() || log_probs.size() != predictions.size() || log_probs.size() != rewards.size()) {
        throw DimensionMismatch("surrogate_loss: inputs must be non-empty and equally long");
    }
    const double inv_b = 1.0 / static_cast<double>(rewards.size());
    nn::Tensor total = instance_loss(log_probs[0], predictions[0], rewards[0], inv_b);
    for (std::size_t i = 1; i < rewards.size(); ++i) {
        total = nn::add(total, instance_loss(log_probs[i], predictions[i], rewards[i], inv_b));
    }
    return total;
}

TrainResult train(const TrainConfig& cfg, const std::vector<LpInstance>& instances, std::optional<TrainState> resume) {
    cfg.validate();
    TrainResult result;
    TrainState& st = result.state;
    st = resume ? std::move(*resume) : initial_state(cfg);
    if (!(st.policy.dims == cfg.dims)) throw ConfigError("train: checkpoint model dimensions differ from the config");
    const SolverEnvironment& env = cfg.reform.environment();

    // Screen: identity baselines must solve; they are reused as reward reference.
    std::vector<std::optional<double>> base(instances.size());
    parallel_for(instances.size(), cfg.reform.jobs, [&](std::size_t i) {
        try {
            base[i] = evaluate_metric(env, instances[i], ColumnPermutation::identity(instances[i].num_cols()),
                                      cfg.reform.metric, cfg.reform.solver);
        } catch (const NonOptimalStatus& e) {
            spdlog::warn("train: dropping '{}': {}", instances[i].name, e.what());
        }
    });
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (base[i]) {
            kept.push_back(i);
        } else {
            result.dropped.push_back(i);
        }
    }
    if (kept.empty()) throw ConfigError("train: no training instance solves to optimality");
    std::vector<BipartiteGraph> graphs(instances.size());
    parallel_for(kept.size(), cfg.reform.jobs,
                 [&](std::size_t t) { graphs[kept[t]] = featurize(instances[kept[t]], cfg.reform.features); });

    Rng rng;
    restore_rng(rng, st.rng_state);
    const auto policy_names = [&] {
        auto g = st.policy.params.names_with_prefix(nn::kGcnnPrefix);
        auto p = st.policy.params.names_with_prefix(nn::kPointerPrefix);
        g.insert(g.end(), p.begin(), p.end());
        return g;
    }();
    const auto critic_names = st.policy.params.names_with_prefix(nn::kCriticPrefix);

    std::ofstream csv;
    const bool persist = !cfg.out_dir.empty();
    if (persist) {
        std::filesystem::create_directories(cfg.out_dir);
        const auto path = cfg.out_dir / kMetricsFile;
        const std::string prefix = resume ? truncated_metrics(path, st.step) : metrics_csv_header();
        csv.open(path, std::ios::trunc);
        if (!csv) throw IoError("cannot write " + path.string());
        csv << prefix;
    }

    const auto start = std::chrono::steady_clock::now();
    const std::size_t B = cfg.batch_size;
    while (st.step < cfg.steps) {
        const std::uint64_t t = st.step;
        const double lr = nn::decayed_lr(cfg.lr, cfg.lr_decay, cfg.decay_interval, t);
        std::vector<std::size_t> batch(B);
        for (auto& b : batch) b = kept[uniform_index(rng, kept.size())];

        if (!prenorm_calibrated(st.policy)) {
            std::vector<const BipartiteGraph*> gs;
            for (std::size_t b : batch) gs.push_back(&graphs[b]);
            nn::calibrate_prenorm(st.policy.params, st.policy.dims, gs);
        }

        std::vector<Slot> slots(B);
        parallel_for(B, cfg.reform.jobs, [&](std::size_t i) {
            Slot& s = slots[i];
            const std::size_t inst = batch[i];
            s.replica = Policy{st.policy.dims, st.policy.params.clone()};
            s.fwd = policy_forward(instances[inst], graphs[inst], s.replica, cfg.reform, nn::DecodeMode::Sample,
                                   sample_seed(cfg.seed, t, i));
            s.prediction = nn::critic_forward(s.fwd.var_embs, s.replica.params);
            try {
                const double m = evaluate_metric(env, instances[inst], s.fwd.sample.column_perm, cfg.reform.metric,
                                                 cfg.reform.solver);
                s.reward = reward(*base[inst], m, cfg.reward_mode);
            } catch (const NonOptimalStatus& e) {
                spdlog::warn("train: step {} skips '{}': {}", t + 1, instances[inst].name, e.what());
            }
        });

        StepLog log;
        log.step = t + 1;
        log.lr = lr;
        const std::size_t used = static_cast<std::size_t>(
            std::count_if(slots.begin(), slots.end(), [](const Slot& s) { return s.reward.has_value(); }));
        log.skipped = B - used;
        if (used > 0) {
            const double inv_b = 1.0 / static_cast<double>(used);
            parallel_for(B, cfg.reform.jobs, [&](std::size_t i) {
                Slot& s = slots[i];
                if (s.reward) nn::backward(instance_loss(s.fwd.sample.log_prob, s.prediction, *s.reward, inv_b));
            });
            st.policy.params.zero_grad();
            for (const Slot& s : slots) {
                if (!s.reward) continue;
                st.policy.params.accumulate_grads(s.replica.params);
                const double d = s.prediction.item() - *s.reward;
                log.mean_reward += *s.reward * inv_b;
                log.critic_loss += d * d * inv_b;
            }
            nn::adam_step(st.policy.params, policy_names, st.policy_opt, lr, cfg.clip_norm);
            nn::adam_step(st.policy.params, critic_names, st.critic_opt, lr, cfg.clip_norm);
        }
        st.step = t + 1;
        st.rng_state = rng_state(rng);
        log.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back(log);

        if (persist) {
            csv << metrics_csv_row(log) << std::flush;
            if (st.step % cfg.checkpoint_every == 0 || st.step == cfg.steps) {
                nn::save_checkpoint(to_checkpoint(st, cfg), cfg.out_dir / kCheckpointFile);
            }
        }
        if (st.step % 100 == 0) {
            spdlog::info("train: step {}/{} mean_reward {:.3f} critic_loss {:.3f} lr {:.3g}", st.step, cfg.steps,
                         log.mean_reward, log.critic_loss, lr);
        }
    }
    return result;
}

std::vector<std::pair<double, double>> EvalReport::ratio_cdf() const {
    std::vector<double> r;
    for (const auto& rec : records) {
        if (rec.ok()) r.push_back(rec.ratio);
    }
    std::sort(r.begin(), r.end());
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < r.size(); ++i) {
        out.emplace_back(r[i], static_cast<double>(i + 1) / static_cast<double>(r.size()));
    }
    return out;
}

nlohmann::json EvalReport::summary() const {
    return {
        {"instances", records.size()},
        {"failures", failures},
        {"mean_ratio", mean_ratio},
        {"mean_iteration_reduction", mean_iteration_reduction},
        {"stderr_iteration_reduction", stderr_iteration_reduction},
        {"mean_time_reduction", mean_time_reduction},
        {"stderr_time_reduction", stderr_time_reduction},
        {"fraction_improved", fraction_improved},
    };
}

namespace {

std::pair<double, double> mean_stderr(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

}  // namespace

EvalReport evaluate(const Policy& policy, const std::vector<LpInstance>& instances, const EvalConfig& cfg) {
    if (cfg.k_shots < 1) throw ConfigError("evaluate: k_shots must be at least 1");
    EvalReport report;
    report.records.resize(instances.size());
    ReformulateConfig inner = cfg.reform;
    inner.jobs = 1;
    const SolverEnvironment& env = cfg.reform.environment();

    parallel_for(instances.size(), cfg.reform.jobs, [&](std::size_t i) {
        const LpInstance& lp = instances[i];
        EvalRecord& rec = report.records[i];
        rec.instance = lp.name;
        try {
            const auto base = env.solve(lp, cfg.reform.solver);
            if (base.metrics.status != SolveStatus::Optimal) {
                throw NonOptimalStatus(std::string(to_string(base.metrics.status)) + " on baseline");
            }
            rec.baseline_iterations = static_cast<double>(base.metrics.iterations);
            rec.baseline_time = base.metrics.solve_time;

            const std::uint64_t seed = derive_seed(cfg.seed, i);
            PermutationSample best;
            if (cfg.mode == nn::DecodeMode::Sample) {
                auto k = k_shot_reformulate(lp, policy, cfg.k_shots, inner, seed);
                rec.best_shot = k.best;
                best = k.best_shot().sample;
            } else {
                best = propose_permutation(lp, policy, inner, nn::DecodeMode::Greedy, seed);
            }
            rec.cluster_perm = best.cluster_perm;
            const auto r = env.solve(apply_permutation(lp, best.column_perm), cfg.reform.solver);
            if (r.metrics.status != SolveStatus::Optimal) throw NonOptimalStatus(to_string(r.metrics.status));
            rec.best_iterations = static_cast<double>(r.metrics.iterations);
            rec.best_time = r.metrics.solve_time;
            if (rec.baseline_iterations > 0.0) {
                rec.ratio = rec.best_iterations / rec.baseline_iterations;
            } else {
                rec.ratio = rec.best_iterations == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
            }
        } catch (const Error& e) {
            rec.failure = e.what();
        }
    });

    std::vector<double> ratios, iter_red, time_red;
    for (const auto& rec : report.records) {
        if (!rec.ok()) {
            ++report.failures;
            continue;
        }
        ratios.push_back(rec.ratio);
        iter_red.push_back(1.0 - rec.ratio);
        if (rec.baseline_time > 0.0) time_red.push_back(1.0 - rec.best_time / rec.baseline_time);
    }
    report.mean_ratio = mean_stderr(ratios).first;
    std::tie(report.mean_iteration_reduction, report.stderr_iteration_reduction) = mean_stderr(iter_red);
    std::tie(report.mean_time_reduction, report.stderr_time_reduction) = mean_stderr(time_red);
    if (!ratios.empty()) {
        report.fraction_improved = static_cast<double>(std::count_if(ratios.begin(), ratios.end(),
                                                                     [](double r) { return r < 1.0; })) /
                                   static_cast<double>(ratios.size());
    }
    return report;
}

std::string evaluation_csv(const EvalReport& report) {
    std::string out = "instance,baseline_iterations,best_iterations,ratio,best_shot,cluster_perm,failure\n";
    for (const auto& r : report.records) {
        if (r.ok()) {
            out += fmt::format("{},{},{},{},{},{},\n", r.instance, r.baseline_iterations, r.best_iterations, r.ratio,
                               r.best_shot, join(r.cluster_perm));
        } else {
            out += fmt::format("{},,,,,,{}\n", r.instance, csv_quote(r.failure));
        }
    }
    return out;
}

std::string ratio_cdf_csv(const EvalReport& report) {
    std::string out = "ratio,cumulative_probability\n";
    for (const auto& [r, p] : report.ratio_cdf()) out += fmt::format("{},{}\n", r, p);
    return out;
}

std::size_t OracleResult::find(const std::vector<std::size_t>& perm) const {
    auto it = std::lower_bound(perms.begin(), perms.end(), perm);
    if (it == perms.end() || *it != perm) throw InvalidPermutation("oracle table has no entry " + join(perm));
    return static_cast<std::size_t>(it - perms.begin());
}

bool OracleResult::in_bottom(std::size_t q, double fraction) const {
    if (!metric.at(q)) return false;
    std::vector<double> sorted;
    for (const auto& m : metric) {
        if (m) sorted.push_back(*m);
    }
    std::sort(sorted.begin(), sorted.end());
    const auto pos = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(sorted.size() - 1)));
    return *metric[q] <= sorted[pos];
}

OracleResult brute_force_oracle(const LpInstance& lp, const ClusterSplit& split, const ReformulateConfig& cfg) {
    constexpr std::size_t kMaxK = 9;
    if (split.k > kMaxK) {
        throw TooManyPermutations("brute_force_oracle: k=" + std::to_string(split.k) + " exceeds " +
                                  std::to_string(kMaxK));
    }
    OracleResult r;
    std::vector<std::size_t> p(split.k);
    std::iota(p.begin(), p.end(), 0);
    do r.perms.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));

    r.metric.resize(r.perms.size());
    const SolverEnvironment& env = cfg.environment();
    parallel_for(r.perms.size(), cfg.jobs, [&](std::size_t q) {
        try {
            r.metric[q] = evaluate_metric(env, lp, expand_cluster_permutation(split, r.perms[q]), cfg.metric, cfg.solver);
        } catch (const NonOptimalStatus&) {
        }
    });
    bool found = false;
    for (std::size_t q = 0; q < r.perms.size(); ++q) {
        if (r.metric[q] && (!found || *r.metric[q] < *r.metric[r.best])) {
            r.best = q;
            found = true;
        }
    }
    if (!found) throw AllSolvesFailed("brute_force_oracle: no ordering of '" + lp.name + "' solved");
    return r;
}

std::string oracle_csv(const OracleResult& r) {
    std::string out = "cluster_perm,iterations\n";
    for (std::size_t q = 0; q < r.perms.size(); ++q) {
        out += join(r.perms[q]) + "," + (r.metric[q] ? fmt::format("{}", *r.metric[q]) : std::string()) + "\n";
    }
    return out;
}

std::vector<std::size_t> random_cluster_permutation(std::size_t k, Rng& rng) {
    std::vector<std::size_t> p(k);
    std::iota(p.begin(), p.end(), 0);
    for (std::size_t i = k; i > 1; --i) std::swap(p[i - 1], p[uniform_index(rng, i)]);
    return p;
}

}  // namespace lpreform
