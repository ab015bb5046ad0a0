#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpreform/lp_core.hpp"
#include "lpreform/simplex.hpp"

namespace lpreform {

enum class Scenario { ItemPlacement, Apportionment, PlanningChain };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& s);

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct ScenarioSpec {
    Scenario scenario = Scenario::ItemPlacement;

    // ItemPlacement: items spread over bins with `dims` load measures. Bin b's
    // capacity is its fair share scaled by a factor drawn from [capacity_lo, capacity_hi].
    std::size_t items = 30;
    std::size_t bins = 5;
    std::size_t dims = 2;
    int weight_min = 1;
    int weight_max = 10;
    double capacity_lo = 0.2;
    double capacity_hi = 2.0;

    // Apportionment: tasks apportioned over workers; sizes vary by +-size_jitter.
    std::size_t tasks = 20;
    std::size_t workers = 6;

    // PlanningChain: products over periods with inventory carry-over.
    std::size_t products = 4;
    std::size_t periods = 8;

    std::size_t size_jitter = 2;
    double cost_min = 1.0;  // log-uniform cost range
    double cost_max = 10.0;

    std::uint64_t seed = 1;
    std::size_t instance_count = 10;
    SplitFractions fractions;
    std::size_t max_retries = 20;
    SolverConfig solver;

    /// Throws ConfigError on empty sizes or inverted ranges.
    void validate() const;
    nlohmann::json to_json() const;
};

/// The size preset used by the acceptance run and the `desk` profile.
ScenarioSpec desk_item_placement();
/// The `paper` profile preset: 201 rows and 1083 columns.
ScenarioSpec paper_item_placement();

struct GeneratedInstance {
    LpInstance lp;
    std::uint64_t seed = 0;  // per-instance generator seed
    std::size_t baseline_iterations = 0;
};

/// Instance `index` of the scenario; retries with fresh draws until the
/// simplex solves it to Optimal in at least one iteration.
GeneratedInstance generate_instance(const ScenarioSpec& spec, std::size_t index);

/// All instances, generated on up to `jobs` threads in index order.
std::vector<GeneratedInstance> generate(const ScenarioSpec& spec, std::size_t jobs = 1);

struct ManifestEntry {
    std::string name;
    std::string path;  // relative to the manifest's directory
    std::uint64_t seed = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t nnz = 0;
    std::size_t baseline_iterations = 0;
    std::string split;  // "train", "val", "test" or empty

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
    nlohmann::json scenario;
    std::vector<ManifestEntry> entries;

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Writes one MPS file per instance plus manifest.json under `dir`.
Manifest write_dataset(const ScenarioSpec& spec, const std::vector<GeneratedInstance>& instances,
                       const std::filesystem::path& dir);

void save_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

struct DatasetSplit {
    Manifest train;
    Manifest val;
    Manifest test;
};

/// Seeded shuffle, then sizes floor(f * N) for train and val with the
/// remainder going to test (largest fractional remainders first). Entries keep
/// their original relative order inside each split and get their split tag.
DatasetSplit split_dataset(const Manifest& manifest, const SplitFractions& fractions, std::uint64_t seed);

/// Loads every instance of a manifest; paths resolve against `base_dir`.
std::vector<LpInstance> load_instances(const Manifest& m, const std::filesystem::path& base_dir);

}  // namespace lpreform
