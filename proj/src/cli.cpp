#include "lpreform/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "lpreform/errors.hpp"

namespace lpreform::cli {

namespace fs = std::filesystem;
using nlohmann::json;

ExperimentConfig profile_defaults(const std::string& profile) {
    ExperimentConfig c;
    c.profile = profile;
    if (profile == "desk") {
        c.datagen = desk_item_placement();
        c.datagen.instance_count = 500;
        c.training = TrainConfig::desk();
    } else if (profile == "paper") {
        c.datagen = paper_item_placement();
        c.datagen.instance_count = 10000;
        c.training = TrainConfig::paper();
    } else {
        throw ConfigError("unknown profile '" + profile + "' (expected desk or paper)");
    }
    c.k_shots = c.training.k_shot_eval;
    return c;
}

json ExperimentConfig::to_json() const {
    json dg = datagen.to_json();
    dg.erase("seed");
    dg["max_retries"] = datagen.max_retries;
    const auto& s = training.reform.solver;
    json tr = training.to_json();
    // Clustering, solver, seed and job settings live in their own sections.
    for (const char* k : {"k_clusters", "split_method", "pool", "metric", "row_norm", "pricing", "iteration_limit",
                          "jobs", "seed", "k_shot_eval"}) {
        tr.erase(k);
    }
    return {
        {"profile", profile},
        {"seed", seed},
        {"jobs", jobs},
        {"datagen", dg},
        {"simplex_env",
         {{"pricing", to_string(s.pricing)},
          {"iteration_limit", s.iteration_limit},
          {"primal_tolerance", s.primal_tolerance},
          {"dual_tolerance", s.dual_tolerance},
          {"pivot_tolerance", s.pivot_tolerance},
          {"bland_stall_threshold", s.bland_stall_threshold},
          {"refactor_interval", s.refactor_interval}}},
        {"reformulate",
         {{"k_clusters", training.reform.k_clusters},
          {"split_method", to_string(training.reform.split_method)},
          {"pool", to_string(training.reform.pool)},
          {"metric", to_string(training.reform.metric)},
          {"row_norm", training.reform.features.row_norm == RowNorm::L2 ? "l2" : "max-abs"},
          {"k_shots", k_shots}}},
        {"training", tr},
    };
}

namespace {

template <typename T>
void take(const json& section, const char* key, T& into) {
    if (section.contains(key)) into = section.at(key).get<T>();
}

void check_keys(const json& section, const std::string& where, std::initializer_list<const char*> known) {
    if (!section.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (const auto& [k, v] : section.items()) {
        bool ok = false;
        for (const char* name : known) ok = ok || k == name;
        if (!ok) throw ConfigError("config: unknown key '" + where + "." + k + "'");
    }
}

RowNorm parse_row_norm(const std::string& s) {
    if (s == "l2") return RowNorm::L2;
    if (s == "max-abs") return RowNorm::MaxAbs;
    throw ConfigError("unknown row norm '" + s + "' (expected l2 or max-abs)");
}

}  // namespace

void apply_json(ExperimentConfig& c, const json& j) {
    try {
        check_keys(j, "<root>",
                   {"profile", "seed", "jobs", "datagen", "simplex_env", "reformulate", "training", "command"});
        take(j, "seed", c.seed);
        take(j, "jobs", c.jobs);
        if (j.contains("datagen")) {
            const json& d = j.at("datagen");
            check_keys(d, "datagen",
                       {"scenario", "items", "bins", "dims", "weight_min", "weight_max", "capacity_lo", "capacity_hi",
                        "tasks", "workers", "products", "periods", "size_jitter", "cost_min", "cost_max",
                        "instance_count", "fractions", "max_retries"});
            if (d.contains("scenario")) c.datagen.scenario = parse_scenario(d.at("scenario").get<std::string>());
            auto& g = c.datagen;
            take(d, "items", g.items);
            take(d, "bins", g.bins);
            take(d, "dims", g.dims);
            take(d, "weight_min", g.weight_min);
            take(d, "weight_max", g.weight_max);
            take(d, "capacity_lo", g.capacity_lo);
            take(d, "capacity_hi", g.capacity_hi);
            take(d, "tasks", g.tasks);
            take(d, "workers", g.workers);
            take(d, "products", g.products);
            take(d, "periods", g.periods);
            take(d, "size_jitter", g.size_jitter);
            take(d, "cost_min", g.cost_min);
            take(d, "cost_max", g.cost_max);
            take(d, "instance_count", g.instance_count);
            take(d, "max_retries", g.max_retries);
            if (d.contains("fractions")) {
                auto f = d.at("fractions").get<std::vector<double>>();
                if (f.size() != 3) throw ConfigError("config: datagen.fractions needs three values");
                g.fractions = {f[0], f[1], f[2]};
            }
        }
        auto& reform = c.training.reform;
        if (j.contains("simplex_env")) {
            const json& s = j.at("simplex_env");
            check_keys(s, "simplex_env",
                       {"pricing", "iteration_limit", "primal_tolerance", "dual_tolerance", "pivot_tolerance",
                        "bland_stall_threshold", "refactor_interval"});
            auto& sc = reform.solver;
            if (s.contains("pricing")) sc.pricing = parse_pricing(s.at("pricing").get<std::string>());
            take(s, "iteration_limit", sc.iteration_limit);
            take(s, "primal_tolerance", sc.primal_tolerance);
            take(s, "dual_tolerance", sc.dual_tolerance);
            take(s, "pivot_tolerance", sc.pivot_tolerance);
            take(s, "bland_stall_threshold", sc.bland_stall_threshold);
            take(s, "refactor_interval", sc.refactor_interval);
        }
        if (j.contains("reformulate")) {
            const json& r = j.at("reformulate");
            check_keys(r, "reformulate", {"k_clusters", "split_method", "pool", "metric", "row_norm", "k_shots"});
            take(r, "k_clusters", reform.k_clusters);
            take(r, "k_shots", c.k_shots);
            if (r.contains("split_method")) reform.split_method = parse_split_method(r.at("split_method").get<std::string>());
            if (r.contains("pool")) reform.pool = parse_pool(r.at("pool").get<std::string>());
            if (r.contains("metric")) reform.metric = parse_metric(r.at("metric").get<std::string>());
            if (r.contains("row_norm")) reform.features.row_norm = parse_row_norm(r.at("row_norm").get<std::string>());
        }
        if (j.contains("training")) {
            const json& t = j.at("training");
            check_keys(t, "training",
                       {"steps", "batch_size", "lr", "lr_decay", "decay_interval", "clip_norm", "reward_mode",
                        "train_size", "val_size", "dims", "checkpoint_every"});
            auto& tc = c.training;
            take(t, "steps", tc.steps);
            take(t, "batch_size", tc.batch_size);
            take(t, "lr", tc.lr);
            take(t, "lr_decay", tc.lr_decay);
            take(t, "decay_interval", tc.decay_interval);
            take(t, "clip_norm", tc.clip_norm);
            take(t, "train_size", tc.train_size);
            take(t, "val_size", tc.val_size);
            take(t, "checkpoint_every", tc.checkpoint_every);
            if (t.contains("reward_mode")) tc.reward_mode = parse_reward_mode(t.at("reward_mode").get<std::string>());
            if (t.contains("dims")) {
                const json& d = t.at("dims");
                check_keys(d, "training.dims", {"width", "rounds", "pointer_hidden", "critic_hidden"});
                take(d, "width", tc.dims.width);
                take(d, "rounds", tc.dims.rounds);
                take(d, "pointer_hidden", tc.dims.pointer_hidden);
                take(d, "critic_hidden", tc.dims.critic_hidden);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

namespace {

struct Flags {
    std::string config;
    std::string profile = "desk";
    std::uint64_t seed = 0;
    std::string out_dir;
    std::size_t jobs = 0;
    std::size_t k_shots = 0;
    std::size_t clusters = 0;
    std::string pool;
    std::string split_method;
    std::string metric;
    int verbosity = 0;
    bool quiet = false;
};

struct Given {
    CLI::Option* config;
    CLI::Option* profile;
    CLI::Option* seed;
    CLI::Option* jobs;
    CLI::Option* k_shots;
    CLI::Option* clusters;
    CLI::Option* pool;
    CLI::Option* split_method;
    CLI::Option* metric;
};

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
    }
}

// Profile defaults, then the config file, then flags and environment.
ExperimentConfig resolve(const Flags& f, const Given& g) {
    json file;
    if (g.config->count()) file = read_json_file(f.config);
    std::string profile = f.profile;
    if (!g.profile->count() && file.contains("profile")) profile = file.at("profile").get<std::string>();
    ExperimentConfig c = profile_defaults(profile);
    if (!file.is_null()) apply_json(c, file);
    if (g.seed->count()) c.seed = f.seed;
    if (g.jobs->count()) c.jobs = f.jobs;
    if (g.k_shots->count()) c.k_shots = f.k_shots;
    if (g.clusters->count()) c.training.reform.k_clusters = f.clusters;
    if (g.pool->count()) c.training.reform.pool = parse_pool(f.pool);
    if (g.split_method->count()) c.training.reform.split_method = parse_split_method(f.split_method);
    if (g.metric->count()) c.training.reform.metric = parse_metric(f.metric);

    c.datagen.seed = c.seed;
    c.training.seed = c.seed;
    c.training.reform.jobs = c.jobs;
    c.training.k_shot_eval = c.k_shots;
    if (c.jobs < 1) throw ConfigError("--jobs must be at least 1");
    if (c.k_shots < 1) throw ConfigError("--k-shots must be at least 1");
    c.datagen.validate();
    c.training.validate();
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
    if (!os) throw IoError("failed writing " + path.string());
}

fs::path require_out_dir(const Flags& f, const std::string& cmd) {
    if (f.out_dir.empty()) throw ConfigError(cmd + ": --out-dir is required");
    fs::create_directories(f.out_dir);
    return f.out_dir;
}

void echo_config(const fs::path& dir, const ExperimentConfig& c, const std::string& cmd, const json& inputs) {
    json j = c.to_json();
    j["command"] = {{"subcommand", cmd}, {"inputs", inputs}};
    write_text(dir / "effective_config.json", j.dump(2) + "\n");
}

Manifest select_split(const Manifest& m, const std::string& split) {
    if (split == "all") return m;
    Manifest out;
    out.scenario = m.scenario;
    for (const auto& e : m.entries) {
        if (e.split == split) out.entries.push_back(e);
    }
    return out;
}

Policy policy_for(const std::string& checkpoint, const ExperimentConfig& c) {
    if (!checkpoint.empty()) return load_policy(checkpoint);
    spdlog::warn("no --checkpoint given; using an untrained policy from seed {}", c.seed);
    return Policy::create(c.training.dims, c.seed);
}

int cmd_generate(const Flags& f, const ExperimentConfig& c, std::ostream& out) {
    const fs::path dir = require_out_dir(f, "generate");
    echo_config(dir, c, "generate", json::object());
    auto instances = generate(c.datagen, c.jobs);
    Manifest m = write_dataset(c.datagen, instances, dir);
    DatasetSplit split = split_dataset(m, c.datagen.fractions, c.seed);
    std::map<std::string, std::string> tag;
    for (const Manifest* part : {&split.train, &split.val, &split.test}) {
        for (const auto& e : part->entries) tag[e.name] = e.split;
    }
    for (auto& e : m.entries) e.split = tag[e.name];
    save_manifest(m, dir / "manifest.json");
    out << json{{"manifest", (dir / "manifest.json").string()},
                {"instances", m.entries.size()},
                {"train", split.train.entries.size()},
                {"val", split.val.entries.size()},
                {"test", split.test.entries.size()}}
               .dump()
        << "\n";
    return 0;
}

int cmd_solve(const Flags& f, const ExperimentConfig& c, const std::string& input, std::ostream& out) {
    const LpInstance lp = read_mps(input);
    const SolveResult r = solve(lp, c.training.reform.solver);
    json j{{"instance", lp.name},
           {"status", to_string(r.metrics.status)},
           {"iterations", r.metrics.iterations},
           {"phase1_iterations", r.metrics.phase1_iterations},
           {"phase2_iterations", r.metrics.phase2_iterations},
           {"solve_time", r.metrics.solve_time},
           {"max_inf", r.metrics.max_inf}};
    j["objective"] = r.metrics.status == SolveStatus::Optimal ? json(r.solution.objective) : json(nullptr);
    if (!f.out_dir.empty()) {
        const fs::path dir = require_out_dir(f, "solve");
        echo_config(dir, c, "solve", {{"mps", input}});
        write_text(dir / "solve.json", j.dump(2) + "\n");
    }
    out << j.dump() << "\n";
    return 0;
}

int cmd_train(const Flags& f, const ExperimentConfig& c, const std::string& data, bool resume, std::ostream& out) {
    const fs::path dir = require_out_dir(f, "train");
    echo_config(dir, c, "train", {{"data", data}, {"resume", resume}});
    const Manifest all = load_manifest(data);
    Manifest m = select_split(all, "train");
    if (m.entries.empty()) m = all;  // untagged manifest: train on everything
    if (m.entries.size() > c.training.train_size) m.entries.resize(c.training.train_size);
    const auto instances = load_instances(m, fs::path(data).parent_path());

    TrainConfig tc = c.training;
    tc.out_dir = dir;
    std::optional<TrainState> state;
    if (resume && fs::exists(dir / kCheckpointFile)) {
        state = from_checkpoint(nn::load_checkpoint(dir / kCheckpointFile));
        spdlog::info("train: resuming from step {}", state->step);
    }
    auto result = train(tc, instances, std::move(state));
    out << json{{"checkpoint", (dir / kCheckpointFile).string()},
                {"metrics", (dir / kMetricsFile).string()},
                {"steps", result.state.step},
                {"instances", instances.size()},
                {"dropped", result.dropped.size()}}
               .dump()
        << "\n";
    return 0;
}

int cmd_reformulate(const Flags& f, const ExperimentConfig& c, const std::string& input, const std::string& checkpoint,
                    bool images, std::ostream& out) {
    const fs::path dir = require_out_dir(f, "reformulate");
    echo_config(dir, c, "reformulate", {{"mps", input}, {"checkpoint", checkpoint}, {"images", images}});
    const LpInstance lp = read_mps(input);
    const Policy policy = policy_for(checkpoint, c);
    const KShotResult r = k_shot_reformulate(lp, policy, c.k_shots, c.training.reform, c.seed);
    const LpInstance permuted = apply_permutation(lp, r.best_shot().sample.column_perm);

    const std::string stem = fs::path(input).stem().string();
    std::ostringstream mps;
    mps << "* reformulated " << lp.name << ": cluster order";
    for (std::size_t k : r.best_shot().sample.cluster_perm) mps << ' ' << k;
    mps << '\n';
    format_mps(permuted, mps);
    write_text(dir / (stem + ".reformulated.mps"), mps.str());

    json report = reformulation_report(lp, r);
    write_text(dir / "report.json", report.dump(2) + "\n");
    if (images) {
        emit_sparsity_image(lp, dir / (stem + ".original.pgm"), 512);
        emit_sparsity_image(permuted, dir / (stem + ".reformulated.pgm"), 512);
    }
    out << report.dump() << "\n";
    return 0;
}

int cmd_evaluate(const Flags& f, const ExperimentConfig& c, const std::string& data, const std::string& checkpoint,
                 const std::string& split, bool greedy, std::ostream& out) {
    const fs::path dir = require_out_dir(f, "evaluate");
    echo_config(dir, c, "evaluate", {{"data", data}, {"checkpoint", checkpoint}, {"split", split}, {"greedy", greedy}});
    const Manifest m = select_split(load_manifest(data), split);
    if (m.entries.empty()) throw ConfigError("evaluate: split '" + split + "' has no instances");
    const auto instances = load_instances(m, fs::path(data).parent_path());
    const Policy policy = policy_for(checkpoint, c);

    EvalConfig ec;
    ec.k_shots = c.k_shots;
    ec.mode = greedy ? nn::DecodeMode::Greedy : nn::DecodeMode::Sample;
    ec.seed = c.seed;
    ec.reform = c.training.reform;
    const EvalReport rep = evaluate(policy, instances, ec);
    write_text(dir / "evaluation.csv", evaluation_csv(rep));
    write_text(dir / "ratio_cdf.csv", ratio_cdf_csv(rep));
    write_text(dir / "summary.json", rep.summary().dump(2) + "\n");
    out << rep.summary().dump() << "\n";
    return 0;
}

int cmd_oracle(const Flags& f, const ExperimentConfig& c, const std::string& input, std::ostream& out) {
    const fs::path dir = require_out_dir(f, "oracle");
    echo_config(dir, c, "oracle", {{"mps", input}});
    const LpInstance lp = read_mps(input);
    const ReformulateConfig& rc = c.training.reform;
    const ClusterSplit split = split_variables(lp, effective_k(rc, lp.num_cols()), rc.split_method);
    const OracleResult r = brute_force_oracle(lp, split, rc);
    write_text(dir / "oracle.csv", oracle_csv(r));
    const std::size_t id = 0;  // identity is first in lexicographic order
    json j{{"instance", lp.name},
           {"rows", r.perms.size()},
           {"best_perm", r.perms[r.best]},
           {"best", r.metric[r.best] ? json(*r.metric[r.best]) : json(nullptr)},
           {"identity", r.metric[id] ? json(*r.metric[id]) : json(nullptr)}};
    out << j.dump() << "\n";
    return 0;
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message) {
    err << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Learned column reordering for LP instances", "lpreform"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags f;
    Given g{};
    g.config = app.add_option("--config", f.config, "JSON config with datagen, simplex_env, reformulate and training sections")
                   ->envname("LPREFORM_CONFIG");
    g.profile = app.add_option("--profile", f.profile, "Default sizes: desk or paper")
                    ->envname("LPREFORM_PROFILE")
                    ->check(CLI::IsMember({"desk", "paper"}));
    g.seed = app.add_option("--seed", f.seed, "Seed for generation, training and sampling")->envname("LPREFORM_SEED");
    app.add_option("--out-dir", f.out_dir, "Directory for every output file")->envname("LPREFORM_OUT_DIR");
    g.jobs = app.add_option("--jobs", f.jobs, "Worker threads for solver calls")->envname("LPREFORM_JOBS");
    g.k_shots = app.add_option("--k-shots", f.k_shots, "Sampled permutations per instance")->envname("LPREFORM_K_SHOTS");
    g.clusters = app.add_option("--clusters", f.clusters, "Number of variable clusters")->envname("LPREFORM_CLUSTERS");
    g.pool = app.add_option("--pool", f.pool, "Cluster pooling: mean, max or min")->envname("LPREFORM_POOL");
    g.split_method = app.add_option("--split-method", f.split_method, "contiguous, round-robin or name-prefix")
                         ->envname("LPREFORM_SPLIT_METHOD");
    g.metric = app.add_option("--metric", f.metric, "Reward metric: iterations or solvetime")->envname("LPREFORM_METRIC");
    app.add_flag("-v,--verbose", f.verbosity, "More log output (repeatable)");
    app.add_flag("-q,--quiet", f.quiet, "Only warnings and errors");

    std::string scenario;
    std::size_t count = 0;
    auto* gen = app.add_subcommand("generate", "Generate a scenario dataset with split tags");
    auto* scenario_opt = gen->add_option("--scenario", scenario, "item-placement, apportionment or planning-chain");
    auto* count_opt = gen->add_option("--count", count, "Number of instances");

    std::string input, pricing;
    auto* sol = app.add_subcommand("solve", "Solve one MPS file and print its metrics as JSON");
    sol->add_option("mps", input, "MPS file")->required()->check(CLI::ExistingFile);
    auto* pricing_opt = sol->add_option("--pricing", pricing, "dantzig or bland");

    std::string data;
    bool resume = false;
    auto* tr = app.add_subcommand("train", "Train the policy and critic on a dataset manifest");
    tr->add_option("--data", data, "manifest.json from generate")->required()->check(CLI::ExistingFile);
    tr->add_flag("--resume", resume, "Continue from the checkpoint in --out-dir if present");
    std::size_t steps = 0;
    auto* steps_opt = tr->add_option("--steps", steps, "Training steps");

    std::string checkpoint;
    bool images = false;
    auto* ref = app.add_subcommand("reformulate", "Reorder the columns of one MPS file");
    ref->add_option("mps", input, "MPS file")->required()->check(CLI::ExistingFile);
    ref->add_option("--checkpoint", checkpoint, "Trained checkpoint")->check(CLI::ExistingFile);
    ref->add_flag("--images", images, "Write sparsity images of both orders");

    std::string split = "test";
    bool greedy = false;
    auto* ev = app.add_subcommand("evaluate", "Compare k-shot reformulation with the original order");
    ev->add_option("--data", data, "manifest.json from generate")->required()->check(CLI::ExistingFile);
    ev->add_option("--checkpoint", checkpoint, "Trained checkpoint")->check(CLI::ExistingFile);
    ev->add_option("--split", split, "train, val, test or all")->check(CLI::IsMember({"train", "val", "test", "all"}));
    ev->add_flag("--greedy", greedy, "One greedy decode instead of k sampled shots");

    auto* orc = app.add_subcommand("oracle", "Solve under every cluster order (k <= 9)");
    orc->add_option("mps", input, "MPS file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        report_error(err, "UsageError", e.what());
        return 1;
    }

    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("lpreform", sink);
    logger->set_level(f.quiet ? spdlog::level::warn : f.verbosity > 0 ? spdlog::level::debug : spdlog::level::info);
    auto previous = spdlog::default_logger();
    spdlog::set_default_logger(logger);
    struct Restore {
        std::shared_ptr<spdlog::logger> p;
        ~Restore() { spdlog::set_default_logger(p); }
    } restore{previous};

    try {
        ExperimentConfig c = resolve(f, g);
        if (*scenario_opt) c.datagen.scenario = parse_scenario(scenario);
        if (*count_opt) c.datagen.instance_count = count;
        if (*pricing_opt) c.training.reform.solver.pricing = parse_pricing(pricing);
        if (*steps_opt) c.training.steps = steps;
        c.datagen.validate();
        c.training.validate();

        if (gen->parsed()) return cmd_generate(f, c, out);
        if (sol->parsed()) return cmd_solve(f, c, input, out);
        if (tr->parsed()) return cmd_train(f, c, data, resume, out);
        if (ref->parsed()) return cmd_reformulate(f, c, input, checkpoint, images, out);
        if (ev->parsed()) return cmd_evaluate(f, c, data, checkpoint, split, greedy, out);
        if (orc->parsed()) return cmd_oracle(f, c, input, out);
    } catch (const Error& e) {
        report_error(err, e.kind(), e.what());
        return 2;
    } catch (const std::exception& e) {
        report_error(err, "InternalError", e.what());
        return 3;
    }
    return 1;
}

}  // namespace lpreform::cli
