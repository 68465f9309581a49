#pragma once
// Simulated multi-facet environments: per-bandit reward functions h_k, a
// final-reward function H, Gaussian noise on the final reward, sub-reward
// masking, and the exhaustive regret oracle.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "mufasa/bandit.hpp"
#include "mufasa/rng.hpp"

namespace mufasa {

enum class SubRewardKind { linear, square, cosine, dataset };
enum class FinalRewardKind { h1_sum, h2_weighted, weights, nonlinear_sqrt };
enum class MaskKind { all, subset, none };

struct DatasetRound {
    Vector x;
    std::size_t label = 0;
};

struct Dataset {
    std::vector<DatasetRound> rows;
    std::size_t classes = 0;
    std::size_t dim = 0;
};

/// Parses `label,f0,f1,...` (header row required). Features are divided by
/// the largest row norm. `classes` = 0 infers max(label) + 1.
Dataset ingest_csv(const std::filesystem::path& path, std::size_t classes = 0);

/// Gaussian clusters around random unit centres, one per class.
Dataset synthetic_dataset(std::size_t classes, std::size_t dim, std::size_t rows, double spread,
                          std::uint64_t seed);

struct BanditEnvSpec {
    SubRewardKind kind = SubRewardKind::linear;
    std::size_t dim = 10;   // feature dimension of an arm (C * row dim in dataset mode)
    std::size_t arms = 10;  // n_k
    Vector hidden;          // a_k, drawn from the run seed when empty
    std::shared_ptr<const Dataset> data;  // dataset mode only
    std::size_t pool_size = 0;            // dataset mode; 0 means every class
};

struct EnvSpec {
    std::vector<BanditEnvSpec> bandits;
    FinalRewardKind final_kind = FinalRewardKind::h1_sum;
    Vector weights;  // FinalRewardKind::weights
    double c_bar = 1.0;
    double noise_sigma = 0.0;
    double sub_noise_sigma = 0.0;
    MaskKind mask = MaskKind::all;
    std::set<std::size_t> mask_subset;  // bandits whose sub-rewards are revealed
    // Two-class dataset bandits, offered only the two combinations where
    // exactly one bandit plays its correct arm.
    bool tradeoff = false;

    std::size_t bandit_count() const noexcept { return bandits.size(); }
    /// Throws ConfigError.
    void validate() const;
};

/// Default c_bar for H: 1 for the sum, 2 for 2 r1 + r2.
double default_c_bar(FinalRewardKind kind, std::span<const double> weights);
/// Smallest valid l2 Lipschitz constant for linear H kinds; +inf for sqrt.
double tight_lipschitz(const EnvSpec& spec);

struct Observation {
    double final_reward = 0.0;                  // with noise
    std::map<std::size_t, double> sub_rewards;  // after masking
    Vector clean_sub_rewards;
    double h_clean = 0.0;
};

class Environment {
public:
    Environment(EnvSpec spec, std::uint64_t seed);

    const EnvSpec& spec() const noexcept { return spec_; }
    std::size_t bandit_count() const noexcept { return spec_.bandit_count(); }

    /// Arm sets for round t; a pure function of (seed, t). Also becomes the
    /// round that observe() and sub_reward() refer to.
    RoundArms gen_round(std::size_t t);

    double sub_reward(std::size_t k, std::span<const double> x) const;
    double final_reward(std::span<const double> r) const;
    /// Clean H of a combination in the current round.
    double expected(const Combination& c) const;

    Observation observe(std::size_t t, const Combination& c) const;

    struct Best {
        ArmIndices arms;
        double value = 0.0;
    };
    Best oracle_best(const RoundArms& round, std::size_t cap = kDefaultCombinationCap) const;

    /// Hidden vector a_k actually in use.
    const Vector& hidden(std::size_t k) const { return spec_.bandits.at(k).hidden; }
    std::size_t reshuffles() const noexcept { return reshuffles_; }

private:
    std::size_t dataset_row(std::size_t k, std::size_t t);

    EnvSpec spec_;
    std::uint64_t seed_;
    std::vector<std::size_t> labels_;  // current round, dataset mode
    std::vector<std::size_t> row_dim_;
    std::vector<std::vector<std::size_t>> perm_;
    std::vector<std::size_t> perm_epoch_;
    std::size_t reshuffles_ = 0;
};

/// Counts pairs with |H(r) - H(r')| > c_bar |r - r'| + 1e-12 over `pairs`
/// random sub-reward vectors drawn from [-1, 1]^K.
std::size_t lipschitz_audit(const Environment& env, double c_bar, std::size_t pairs, std::uint64_t seed);

/// Uniform draw from the unit ball in R^d.
Vector unit_ball(Rng& rng, std::size_t d);

std::string to_string(SubRewardKind k);
std::string to_string(FinalRewardKind k);
SubRewardKind parse_sub_reward(const std::string& s);
FinalRewardKind parse_final_reward(const std::string& s);

}  // namespace mufasa
