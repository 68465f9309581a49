#pragma once
// Types shared by environments, policies and the runner.

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "mufasa/assembly.hpp"
#include "mufasa/confidence.hpp"
#include "mufasa/tensor.hpp"

namespace mufasa {

inline constexpr std::size_t kDefaultCombinationCap = 1'000'000;

struct ArmSet {
    std::vector<Vector> arms;
    // Persistent arm identities (class index in dataset mode); empty when arms
    // are fresh every round.
    std::vector<std::size_t> ids;
};

/// Everything a policy may see at the start of a round.
struct RoundArms {
    std::vector<ArmSet> bandits;
    // When set, only these combinations are playable instead of the full
    // Cartesian product of the arm sets.
    std::optional<std::vector<std::vector<std::size_t>>> allowed;

    std::size_t bandit_count() const noexcept { return bandits.size(); }
};

using ArmIndices = std::vector<std::size_t>;

/// Playable combinations in lexicographic order of (i_1, ..., i_K).
/// Throws ContractViolation naming the product when it exceeds `cap`.
std::vector<ArmIndices> enumerate_combinations(const RoundArms& round,
                                               std::size_t cap = kDefaultCombinationCap);

Combination resolve(const RoundArms& round, const ArmIndices& idx);

/// Training branch taken at the end of a round.
enum class Branch { none, all, partial };
const char* to_string(Branch b);

struct RoundOutcome {
    std::size_t t = 0;
    Combination chosen;
    double final_reward = 0.0;
    std::map<std::size_t, double> sub_rewards;  // observed (possibly partial)
    UcbBreakdown ucb;
    double predicted = 0.0;
    std::optional<double> h_clean;
    std::optional<double> h_star;
    std::optional<double> regret;
};

}  // namespace mufasa
