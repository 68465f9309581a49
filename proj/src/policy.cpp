#include "mufasa/agents.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "mufasa/error.hpp"

namespace mufasa {

std::vector<ArmIndices> enumerate_combinations(const RoundArms& round, std::size_t cap) {
    const std::size_t K = round.bandit_count();
    if (K == 0) throw ContractViolation("round has no bandits");
    for (std::size_t k = 0; k < K; ++k) {
        if (round.bandits[k].arms.empty()) {
            throw ContractViolation("bandit " + std::to_string(k) + " offers no arms");
        }
    }
    if (round.allowed) {
        std::vector<ArmIndices> out = *round.allowed;
        if (out.size() > cap) {
            throw ContractViolation("combination count " + std::to_string(out.size()) + " exceeds cap " +
                                    std::to_string(cap));
        }
        for (const ArmIndices& idx : out) {
            if (idx.size() != K) throw ContractViolation("allowed combination has the wrong length");
            for (std::size_t k = 0; k < K; ++k) {
                if (idx[k] >= round.bandits[k].arms.size()) {
                    throw ContractViolation("allowed combination indexes a missing arm");
                }
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }
    std::size_t product = 1;
    std::string factors;
    bool overflow = false;
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t n = round.bandits[k].arms.size();
        factors += (k ? "*" : "") + std::to_string(n);
        if (overflow || product > std::numeric_limits<std::size_t>::max() / n) {
            overflow = true;
            continue;
        }
        product *= n;
    }
    if (overflow || product > cap) {
        throw ContractViolation("combination product " + factors + (overflow ? "" : " = " + std::to_string(product)) +
                                " exceeds cap " + std::to_string(cap));
    }
    std::vector<ArmIndices> out;
    out.reserve(product);
    ArmIndices idx(K, 0);
    while (true) {
        out.push_back(idx);
        std::size_t k = K;
        while (k-- > 0) {
            if (++idx[k] < round.bandits[k].arms.size()) break;
            idx[k] = 0;
        }
        if (k == static_cast<std::size_t>(-1)) break;
    }
    return out;
}

Combination resolve(const RoundArms& round, const ArmIndices& idx) {
    if (idx.size() != round.bandit_count()) throw ContractViolation("combination length differs from K");
    Combination c;
    c.arms = idx;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= round.bandits[k].arms.size()) throw ContractViolation("arm index out of range");
        c.features.push_back(round.bandits[k].arms[idx[k]]);
    }
    return c;
}

const char* to_string(Branch b) {
    switch (b) {
        case Branch::none: return "none";
        case Branch::all: return "all";
        case Branch::partial: return "partial";
    }
    return "?";
}

std::size_t argmax_first(std::span<const double> scores) {
    if (scores.empty()) throw ContractViolation("argmax of an empty score list");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return best;
}

Selection RandomPolicy::select(const RoundArms& round) {
    if (pending_) throw ContractViolation("select called twice without observe");
    Selection s;
    if (round.allowed) {
        const std::vector<ArmIndices> combos = enumerate_combinations(round);
        s.arms = combos[rng_.uniform_index(combos.size())];
    } else {
        for (const ArmSet& set : round.bandits) s.arms.push_back(rng_.uniform_index(set.arms.size()));
    }
    s.combination = resolve(round, s.arms);
    s.ucb.per_bandit.assign(round.bandit_count(), 0.0);
    pending_ = true;
    return s;
}

void RandomPolicy::observe(const RoundOutcome&) {
    if (!pending_) throw ContractViolation("observe without a pending selection");
    pending_ = false;
}

}  // namespace mufasa
