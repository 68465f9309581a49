#pragma once
// Experiment harness: builds environments and policies from a run config,
// plays them for T rounds per seed and writes CSV logs.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mufasa/agents.hpp"
#include "mufasa/config.hpp"
#include "mufasa/diagnostics.hpp"
#include "mufasa/envs.hpp"

namespace mufasa {

struct SyntheticData {
    std::size_t classes = 2;
    std::size_t dim = 4;
    std::size_t rows = 1000;
    double spread = 0.3;
};

struct RunConfig {
    std::size_t T = 1000;
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path outdir = "out";
    std::vector<std::string> agents{"mufasa"};
    // Seed lists given per agent (`<agent>.seeds`); compare requires them to agree.
    std::map<std::string, std::vector<std::uint64_t>> agent_seeds;

    EnvSpec env;                // datasets are attached per seed
    bool synthetic = false;     // dataset bandits without a CSV file
    SyntheticData synthetic_data;
    std::shared_ptr<const Dataset> dataset;  // loaded CSV, if any

    MufasaConfig mufasa;
    MufasaConfig neuucb;
    LinUcbConfig linucb;
    KerUcbConfig kerucb;

    std::string snapshot;  // canonical text of the source config
};

/// Throws ConfigError / ParseError naming the offending key. Relative dataset
/// paths resolve against `base_dir`.
RunConfig parse_run_config(const Config& cfg, const std::filesystem::path& base_dir = ".");
RunConfig load_run_config(const std::filesystem::path& path);

/// Environment spec for one seed (synthetic datasets depend on the seed).
EnvSpec env_for_seed(const RunConfig& rc, std::uint64_t seed);
std::unique_ptr<Policy> make_policy(const RunConfig& rc, const std::string& agent, const Environment& env,
                                    std::uint64_t seed);

/// One (agent, seed) run. Rows are streamed to `csv` when given.
RunLog run_single(const RunConfig& rc, const std::string& agent, std::uint64_t seed, std::ostream* csv = nullptr);

/// Seeds run in parallel up to this many threads (`MUFASA_THREADS`,
/// defaulting to the hardware concurrency).
std::size_t thread_cap();

/// Runs every (agent, seed) pair, writing `<outdir>/<agent>_<seed>.csv`,
/// `summary.csv` and `run_meta.txt`. Logs come back in (agent, seed) order.
std::vector<RunLog> run_all(const RunConfig& rc);

/// run_all plus `compare.csv` (t, agent, mean_cum_regret, std). Prints a
/// per-agent table to `table`.
std::vector<RunLog> compare(const RunConfig& rc, std::ostream& table);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for one value
};
MeanStd mean_std(const std::vector<double>& v);

}  // namespace mufasa
