#pragma once
// Decision policies behind one select/observe contract.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mufasa/assembly.hpp"
#include "mufasa/bandit.hpp"
#include "mufasa/confidence.hpp"
#include "mufasa/rng.hpp"

namespace mufasa {

struct Selection {
    ArmIndices arms;
    Combination combination;
    UcbBreakdown ucb;
    double predicted = 0.0;
    double score = 0.0;  // predicted + ucb.total
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    /// Must not look at rewards of the current round.
    virtual Selection select(const RoundArms& round) = 0;
    /// Exactly once per select().
    virtual void observe(const RoundOutcome& outcome) = 0;
    /// Training branch taken by the most recent observe().
    virtual Branch last_branch() const { return Branch::none; }
};

/// Index of the highest score; ties go to the lowest index.
std::size_t argmax_first(std::span<const double> scores);

// ---------------------------------------------------------------------------

struct MufasaConfig {
    std::size_t sub_depth = 2;
    std::size_t sub_width = 32;
    std::size_t sub_out = 1;
    std::size_t shared_depth = 2;
    std::size_t shared_width = 32;
    bool zero_init_mode = true;
    bool use_shared = true;
    double lambda = 1.0;
    double eta = 0.01;
    std::size_t J = 100;
    std::size_t train_every = 50;
    bool warm_start = true;
    bool normalize_loss = false;
    std::size_t max_history = 0;  // 0 = unlimited
    bool recompute_design = false;
    UcbConfig ucb;  // ucb.c_bar doubles as the model's C-bar
    std::size_t combination_cap = kDefaultCombinationCap;
};

class MufasaAgent final : public Policy {
public:
    MufasaAgent(std::vector<std::size_t> input_dims, MufasaConfig cfg, std::uint64_t seed);

    std::string name() const override { return "mufasa"; }
    Selection select(const RoundArms& round) override;
    void observe(const RoundOutcome& outcome) override;
    Branch last_branch() const override { return last_branch_; }

    /// Scores every playable combination of `round` (enumeration order) and
    /// remembers the per-arm and per-combination work for commit().
    std::vector<double> score(const RoundArms& round);
    /// Chooses the combination at `index` of the last score() call.
    Selection commit(std::size_t index);

    /// Bonus of one combination recomputed from scratch, bypassing the
    /// per-arm cache used by score().
    UcbBreakdown bonus_uncached(const RoundArms& round, const ArmIndices& idx) const;

    const Assembly& model() const noexcept { return model_; }
    const AssembledParams& params() const noexcept { return params_; }
    void set_params(AssembledParams p) { params_ = std::move(p); }
    const MufasaConfig& config() const noexcept { return cfg_; }
    const DesignState& design(std::size_t k) const { return designs_.at(k); }
    const DesignState& shared_design() const { return shared_design_; }

    std::size_t rounds() const noexcept { return rounds_; }
    std::size_t all_trainings() const noexcept { return all_count_; }
    std::size_t partial_trainings() const noexcept { return partial_count_; }
    /// |Omega_t| for every observed round.
    const std::vector<std::size_t>& omega_sizes() const noexcept { return omega_sizes_; }
    std::size_t omega_total() const noexcept { return omega_.size(); }
    /// Zero the bonus (greedy model-only selection); used for sanity checks.
    void disable_bonus(bool off) { no_bonus_ = off; }

private:
    struct ArmEval {
        Vector f;
        Vector g_cur, g_init;
        double bonus = 0.0;
    };
    struct Pending {
        RoundArms round;
        std::vector<ArmIndices> combos;
        std::vector<std::vector<ArmEval>> arms;
        std::vector<UcbBreakdown> ucb;
        std::vector<double> predicted;
        std::vector<Vector> g_shared_cur, g_shared_init;
        std::optional<std::size_t> chosen;
    };

    double schedule_weight(std::size_t k, std::size_t arm, const ArmSet& set) const;
    double arm_bonus(std::size_t k, const ArmEval& e, double w) const;
    double shared_bonus(const Vector& g_cur, const Vector& g_init) const;
    void train();

    Assembly model_;
    MufasaConfig cfg_;
    AssembledParams params_;
    AssembledParams init_;  // theta = theta0 for init-gradient streams
    std::vector<DesignState> designs_;
    DesignState shared_design_;

    std::optional<Pending> pending_;
    std::vector<FullObservation> full_history_;
    std::vector<TrainingSample> omega_;
    std::vector<std::size_t> omega_sizes_;
    std::vector<Combination> played_;
    std::vector<std::map<std::size_t, std::size_t>> pulls_;
    bool all_full_ = true;
    bool no_bonus_ = false;
    std::size_t rounds_ = 0;
    std::size_t all_count_ = 0;
    std::size_t partial_count_ = 0;
    Branch last_branch_ = Branch::none;
};

// ---------------------------------------------------------------------------
// Baselines: one independent single-bandit learner per bandit. A combination's
// score is the sum of its arms' scores, which on a full Cartesian product is
// the product of the per-bandit argmaxes.

struct LinUcbConfig {
    double alpha = 1.0;
    double lambda = 1.0;
};

class LinUcbPolicy final : public Policy {
public:
    LinUcbPolicy(std::vector<std::size_t> input_dims, LinUcbConfig cfg);
    std::string name() const override { return "linucb"; }
    Selection select(const RoundArms& round) override;
    void observe(const RoundOutcome& outcome) override;

    /// Per-arm score x^T theta_hat + alpha sqrt(x^T A^-1 x) for bandit k.
    double arm_score(std::size_t k, std::span<const double> x) const;
    const Vector& theta_hat(std::size_t k) const { return bandits_.at(k).theta; }

private:
    struct Ridge {
        Matrix a_inv;
        Vector b, theta;
    };
    LinUcbConfig cfg_;
    std::vector<Ridge> bandits_;
    std::optional<Selection> pending_;
};

struct KerUcbConfig {
    double bandwidth = 1.0;
    double beta = 1.0;
    double lambda = 1.0;
    std::size_t budget = 1000;
    double jitter = 1e-8;
};

class KerUcbPolicy final : public Policy {
public:
    KerUcbPolicy(std::size_t bandits, KerUcbConfig cfg);
    std::string name() const override { return "kerucb"; }
    Selection select(const RoundArms& round) override;
    void observe(const RoundOutcome& outcome) override;

    double kernel(std::span<const double> a, std::span<const double> b) const;
    struct Posterior {
        double mean = 0.0;
        double sd = 0.0;
    };
    Posterior posterior(std::size_t k, std::span<const double> x) const;
    std::size_t stored(std::size_t k) const { return bandits_.at(k).xs.size(); }

private:
    struct Gp {
        std::vector<Vector> xs;
        Vector r;
        Matrix k_inv;  // (K + lambda I)^-1
        Vector alpha;  // k_inv r
    };
    void add(Gp& gp, const Vector& x, double r) const;

    KerUcbConfig cfg_;
    std::vector<Gp> bandits_;
    std::optional<Selection> pending_;
};

/// One single-network agent per bandit, each a K = 1 assembled model without
/// the shared network and with C-bar = 1.
class NeuUcbPolicy final : public Policy {
public:
    NeuUcbPolicy(std::vector<std::size_t> input_dims, MufasaConfig per_bandit, std::uint64_t seed);
    std::string name() const override { return "neuucb"; }
    Selection select(const RoundArms& round) override;
    void observe(const RoundOutcome& outcome) override;
    Branch last_branch() const override;
    const MufasaAgent& agent(std::size_t k) const { return *agents_.at(k); }

private:
    std::vector<std::unique_ptr<MufasaAgent>> agents_;
    std::optional<Selection> pending_;
};

class RandomPolicy final : public Policy {
public:
    explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
    std::string name() const override { return "random"; }
    Selection select(const RoundArms& round) override;
    void observe(const RoundOutcome& outcome) override;

private:
    Rng rng_;
    bool pending_ = false;
};

}  // namespace mufasa
