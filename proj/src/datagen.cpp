#include "lpreform/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "lpreform/errors.hpp"
#include "lpreform/parallel.hpp"
#include "lpreform/random.hpp"

namespace lpreform {

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::ItemPlacement: return "item-placement";
        case Scenario::Apportionment: return "apportionment";
        case Scenario::PlanningChain: return "planning-chain";
    }
    return "?";
}

Scenario parse_scenario(const std::string& s) {
    if (s == "item-placement") return Scenario::ItemPlacement;
    if (s == "apportionment") return Scenario::Apportionment;
    if (s == "planning-chain") return Scenario::PlanningChain;
    throw ConfigError("unknown scenario '" + s + "' (expected item-placement, apportionment or planning-chain)");
}

void ScenarioSpec::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("scenario: " + what);
    };
    require(items > 0 && bins > 0 && dims > 0, "items, bins and dims must be positive");
    require(tasks > size_jitter && workers > size_jitter, "tasks and workers must exceed size_jitter");
    require(products > 0 && periods > size_jitter, "products and periods must be positive and exceed size_jitter");
    require(weight_min >= 1 && weight_min <= weight_max, "weight range must satisfy 1 <= min <= max");
    require(cost_min > 0 && cost_min <= cost_max, "cost range must satisfy 0 < min <= max");
    require(capacity_lo > 0 && capacity_lo <= capacity_hi, "capacity range must satisfy 0 < lo <= hi");
    require(instance_count > 0, "instance_count must be positive");
    require(max_retries > 0, "max_retries must be positive");
}

nlohmann::json ScenarioSpec::to_json() const {
    return {
        {"scenario", to_string(scenario)},
        {"items", items},
        {"bins", bins},
        {"dims", dims},
        {"weight_min", weight_min},
        {"weight_max", weight_max},
        {"capacity_lo", capacity_lo},
        {"capacity_hi", capacity_hi},
        {"tasks", tasks},
        {"workers", workers},
        {"products", products},
        {"periods", periods},
        {"size_jitter", size_jitter},
        {"cost_min", cost_min},
        {"cost_max", cost_max},
        {"seed", seed},
        {"instance_count", instance_count},
        {"fractions", {fractions.train, fractions.val, fractions.test}},
    };
}

ScenarioSpec desk_item_placement() {
    ScenarioSpec s;
    s.scenario = Scenario::ItemPlacement;
    s.items = 30;
    s.bins = 5;
    s.dims = 2;
    return s;
}

ScenarioSpec paper_item_placement() {
    ScenarioSpec s = desk_item_placement();
    s.items = 49;
    s.bins = 19;
    s.dims = 8;
    return s;
}

namespace {

int uniform_int(Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

double log_uniform(Rng& rng, double lo, double hi) { return std::exp(uniform(rng, std::log(lo), std::log(hi))); }

std::size_t jittered(Rng& rng, std::size_t base, std::size_t jitter) {
    return base - jitter + uniform_index(rng, 2 * jitter + 1);
}

std::string idx(std::size_t a) { return std::to_string(a); }
std::string idx(std::size_t a, std::size_t b) { return std::to_string(a) + "_" + std::to_string(b); }

// Multi-dimensional multi-knapsack relaxation: every item is spread over the
// bins, and load above a bin's capacity in any dimension is paid for through
// an overload column. Columns are bin-major (x then u per bin), so contiguous
// clusters of size items+dims coincide with bins.
LpInstance item_placement(const ScenarioSpec& s, Rng& rng, const std::string& name) {
    const std::size_t I = s.items, B = s.bins, D = s.dims;
    std::vector<std::vector<int>> w(I, std::vector<int>(D));
    std::vector<double> total(D, 0.0);
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t d = 0; d < D; ++d) {
            w[i][d] = uniform_int(rng, s.weight_min, s.weight_max);
            total[d] += w[i][d];
        }
    }
    std::vector<double> factor(B);
    for (auto& f : factor) f = uniform(rng, s.capacity_lo, s.capacity_hi);
    std::vector<double> overload(D);
    for (auto& c : overload) c = std::round(log_uniform(rng, s.cost_min, s.cost_max));

    LpBuilder b(name);
    const std::size_t stride = I + D;
    for (std::size_t k = 0; k < B; ++k) {
        for (std::size_t i = 0; i < I; ++i) b.add_column("x" + idx(k, i), 0.0, 0.0, 1.0);
        for (std::size_t d = 0; d < D; ++d) b.add_column("u" + idx(k, d), overload[d]);
    }

    std::size_t row = 0;
    for (std::size_t i = 0; i < I; ++i, ++row) {
        b.add_row("a" + idx(i), RowSense::EQ, 1.0);
        for (std::size_t k = 0; k < B; ++k) b.add_coefficient(row, k * stride + i, 1.0);
    }
    for (std::size_t k = 0; k < B; ++k) {
        for (std::size_t d = 0; d < D; ++d, ++row) {
            b.add_row("l" + idx(k, d), RowSense::LE, std::floor(total[d] / static_cast<double>(B) * factor[k]));
            for (std::size_t i = 0; i < I; ++i) b.add_coefficient(row, k * stride + i, w[i][d]);
            b.add_coefficient(row, k * stride + I + d, -1.0);
        }
    }
    return std::move(b).build();
}

// Fractional bin packing: tasks split across workers, paying for each
// worker opened (y) in proportion to its use.
LpInstance apportionment(const ScenarioSpec& s, Rng& rng, const std::string& name) {
    const std::size_t T = jittered(rng, s.tasks, s.size_jitter);
    const std::size_t W = jittered(rng, s.workers, s.size_jitter);
    std::vector<int> load(T);
    double total = 0.0;
    for (auto& l : load) {
        l = uniform_int(rng, s.weight_min, s.weight_max);
        total += l;
    }
    std::vector<double> cap(W), cost(W);
    const double fair = total / static_cast<double>(W);
    for (std::size_t k = 0; k < W; ++k) {
        cap[k] = std::ceil(fair * uniform(rng, 1.0, 2.0));
        cost[k] = std::round(log_uniform(rng, s.cost_min, s.cost_max));
    }

    LpBuilder b(name);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < W; ++k) b.add_column("a" + idx(t, k), 0.0, 0.0, 1.0);
    }
    for (std::size_t k = 0; k < W; ++k) b.add_column("y" + idx(k), cost[k], 0.0, 1.0);
    const std::size_t y0 = T * W;

    std::size_t row = 0;
    for (std::size_t t = 0; t < T; ++t, ++row) {
        b.add_row("assign" + idx(t), RowSense::EQ, 1.0);
        for (std::size_t k = 0; k < W; ++k) b.add_coefficient(row, t * W + k, 1.0);
    }
    for (std::size_t k = 0; k < W; ++k, ++row) {
        b.add_row("cap" + idx(k), RowSense::LE, 0.0);
        for (std::size_t t = 0; t < T; ++t) b.add_coefficient(row, t * W + k, load[t]);
        b.add_coefficient(row, y0 + k, -cap[k]);
    }
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < W; ++k, ++row) {
            b.add_row("link" + idx(t, k), RowSense::LE, 0.0);
            b.add_coefficient(row, t * W + k, 1.0);
            b.add_coefficient(row, y0 + k, -1.0);
        }
    }
    return std::move(b).build();
}

// Multi-period production with inventory balance and shared capacity.
LpInstance planning_chain(const ScenarioSpec& s, Rng& rng, const std::string& name) {
    const std::size_t P = s.products;
    const std::size_t T = jittered(rng, s.periods, s.size_jitter);
    std::vector<std::vector<int>> demand(P, std::vector<int>(T));
    std::vector<int> use(P);
    std::vector<double> hold(P);
    for (std::size_t p = 0; p < P; ++p) {
        use[p] = uniform_int(rng, 1, 3);
        hold[p] = std::round(log_uniform(rng, s.cost_min, s.cost_max)) / 4.0;
        for (std::size_t t = 0; t < T; ++t) demand[p][t] = uniform_int(rng, s.weight_min, s.weight_max);
    }

    LpBuilder b(name);
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t t = 0; t < T; ++t) b.add_column("q" + idx(p, t), std::round(log_uniform(rng, s.cost_min, s.cost_max)));
    }
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t t = 0; t < T; ++t) b.add_column("s" + idx(p, t), hold[p]);
    }
    const std::size_t s0 = P * T;

    std::size_t row = 0;
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t t = 0; t < T; ++t, ++row) {
            b.add_row("bal" + idx(p, t), RowSense::EQ, demand[p][t]);
            b.add_coefficient(row, p * T + t, 1.0);
            b.add_coefficient(row, s0 + p * T + t, -1.0);
            if (t > 0) b.add_coefficient(row, s0 + p * T + t - 1, 1.0);
        }
    }
    for (std::size_t t = 0; t < T; ++t, ++row) {
        double need = 0.0;
        for (std::size_t p = 0; p < P; ++p) need += use[p] * demand[p][t];
        // Capacity covers each period's own demand, so producing to order is feasible.
        b.add_row("cap" + idx(t), RowSense::LE, std::ceil(need * uniform(rng, 1.0, 1.5)));
        for (std::size_t p = 0; p < P; ++p) b.add_coefficient(row, p * T + t, use[p]);
    }
    return std::move(b).build();
}

std::string instance_name(const ScenarioSpec& spec, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", index);
    return to_string(spec.scenario) + "-" + buf;
}

}  // namespace

GeneratedInstance generate_instance(const ScenarioSpec& spec, std::size_t index) {
    spec.validate();
    GeneratedInstance out;
    out.seed = derive_seed(spec.seed, index);
    Rng rng(out.seed);
    const std::string name = instance_name(spec, index);
    for (std::size_t attempt = 0; attempt < spec.max_retries; ++attempt) {
        switch (spec.scenario) {
            case Scenario::ItemPlacement: out.lp = item_placement(spec, rng, name); break;
            case Scenario::Apportionment: out.lp = apportionment(spec, rng, name); break;
            case Scenario::PlanningChain: out.lp = planning_chain(spec, rng, name); break;
        }
        auto r = solve(out.lp, spec.solver);
        if (r.metrics.status == SolveStatus::Optimal && r.metrics.iterations >= 1) {
            out.baseline_iterations = r.metrics.iterations;
            return out;
        }
        spdlog::warn("generate: {} attempt {} rejected ({}, {} iterations)", name, attempt,
                     to_string(r.metrics.status), r.metrics.iterations);
    }
    throw GenerationFailed("generate: " + name + " not solvable after " + std::to_string(spec.max_retries) + " attempts");
}

std::vector<GeneratedInstance> generate(const ScenarioSpec& spec, std::size_t jobs) {
    spec.validate();
    std::vector<GeneratedInstance> out(spec.instance_count);
    parallel_for(spec.instance_count, jobs, [&](std::size_t i) { out[i] = generate_instance(spec, i); });
    return out;
}

Manifest write_dataset(const ScenarioSpec& spec, const std::vector<GeneratedInstance>& instances,
                       const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "instances");
    Manifest m;
    m.scenario = spec.to_json();
    for (const auto& g : instances) {
        ManifestEntry e;
        e.name = g.lp.name;
        e.path = "instances/" + g.lp.name + ".mps";
        e.seed = g.seed;
        e.rows = g.lp.num_rows();
        e.cols = g.lp.num_cols();
        e.nnz = g.lp.nnz();
        e.baseline_iterations = g.baseline_iterations;
        write_mps(g.lp, dir / e.path);
        m.entries.push_back(std::move(e));
    }
    save_manifest(m, dir / "manifest.json");
    return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : m.entries) {
        entries.push_back({{"name", e.name},
                           {"path", e.path},
                           {"seed", e.seed},
                           {"rows", e.rows},
                           {"cols", e.cols},
                           {"nnz", e.nnz},
                           {"baseline_iterations", e.baseline_iterations},
                           {"split", e.split}});
    }
    nlohmann::json j{{"scenario", m.scenario}, {"instances", std::move(entries)}};
    std::ofstream os(path);
    if (!os) throw IoError("cannot write manifest " + path.string());
    os << j.dump(2) << '\n';
    if (!os) throw IoError("failed writing manifest " + path.string());
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest " + path.string());
    Manifest m;
    try {
        nlohmann::json j = nlohmann::json::parse(is);
        m.scenario = j.value("scenario", nlohmann::json::object());
        for (const auto& e : j.at("instances")) {
            m.entries.push_back({e.at("name").get<std::string>(), e.at("path").get<std::string>(),
                                 e.value("seed", std::uint64_t{0}), e.value("rows", std::size_t{0}),
                                 e.value("cols", std::size_t{0}), e.value("nnz", std::size_t{0}),
                                 e.value("baseline_iterations", std::size_t{0}), e.value("split", std::string{})});
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("malformed manifest " + path.string() + ": " + ex.what());
    }
    return m;
}

DatasetSplit split_dataset(const Manifest& manifest, const SplitFractions& f, std::uint64_t seed) {
    const double parts[3] = {f.train, f.val, f.test};
    for (double p : parts) {
        if (!(p >= 0.0 && p <= 1.0)) throw BadFractions("split fractions must lie in [0, 1]");
    }
    if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw BadFractions("split fractions must sum to 1");

    const std::size_t n = manifest.entries.size();
    // Largest-remainder apportionment of n over the three parts.
    std::size_t sizes[3];
    double rem[3];
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
        double exact = parts[k] * static_cast<double>(n);
        sizes[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        rem[k] = exact - static_cast<double>(sizes[k]);
        assigned += sizes[k];
    }
    while (assigned < n) {
        int best = 0;
        for (int k = 1; k < 3; ++k) {
            if (rem[k] > rem[best] + 1e-12) best = k;
        }
        ++sizes[best];
        rem[best] = -1.0;
        ++assigned;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    std::vector<int> tag(n);
    for (std::size_t pos = 0; pos < n; ++pos) tag[order[pos]] = pos < sizes[0] ? 0 : pos < sizes[0] + sizes[1] ? 1 : 2;
    DatasetSplit out;
    Manifest* targets[3] = {&out.train, &out.val, &out.test};
    const char* names[3] = {"train", "val", "test"};
    for (auto* t : targets) t->scenario = manifest.scenario;
    for (std::size_t i = 0; i < n; ++i) {
        ManifestEntry e = manifest.entries[i];
        e.split = names[tag[i]];
        targets[tag[i]]->entries.push_back(std::move(e));
    }
    return out;
}

std::vector<LpInstance> load_instances(const Manifest& m, const std::filesystem::path& base_dir) {
    std::vector<LpInstance> out;
    out.reserve(m.entries.size());
    for (const auto& e : m.entries) out.push_back(read_mps(base_dir / e.path));
    return out;
}

}  // namespace lpreform
