#include <algorithm>
#include <cmath>
#include <string>

#include "mufasa/agents.hpp"
#include "mufasa/error.hpp"

namespace mufasa {
namespace {

AssembledSpec spec_for(const std::vector<std::size_t>& dims, const MufasaConfig& cfg) {
    AssembledSpec s = make_assembled_spec(dims, cfg.sub_depth, cfg.sub_width, cfg.sub_out,
                                          cfg.shared_depth, cfg.shared_width, cfg.zero_init_mode,
                                          cfg.ucb.c_bar);
    s.use_shared = cfg.use_shared;
    return s;
}

TrainConfig train_config(const MufasaConfig& cfg) {
    TrainConfig tc;
    tc.eta = cfg.eta;
    tc.steps = cfg.J;
    tc.lambda_reg = cfg.lambda;
    tc.warm_start = cfg.warm_start;
    tc.normalize = cfg.normalize_loss;
    return tc;
}

}  // namespace

MufasaAgent::MufasaAgent(std::vector<std::size_t> input_dims, MufasaConfig cfg, std::uint64_t seed)
    : model_(spec_for(input_dims, cfg)), cfg_(std::move(cfg)) {
    cfg_.ucb.validate();
    if (cfg_.train_every == 0) throw ConfigError("train_every must be at least 1");
    if (!(cfg_.lambda > 0.0)) throw ConfigError("lambda must be positive");
    params_ = model_.init(seed);
    init_ = params_;
    const std::size_t K = model_.bandits();
    for (std::size_t k = 0; k < K; ++k) {
        designs_.emplace_back(model_.sub(k).param_count(), cfg_.lambda,
                              static_cast<double>(cfg_.sub_width));
    }
    if (cfg_.use_shared) {
        shared_design_ = DesignState(model_.shared().param_count(), cfg_.lambda,
                                     static_cast<double>(cfg_.shared_width));
    }
    pulls_.resize(K);
}

double MufasaAgent::schedule_weight(std::size_t k, std::size_t arm, const ArmSet& set) const {
    const LambdaSchedule& s = cfg_.ucb.schedule;
    if (s.per_arm && !set.ids.empty()) {
        const auto it = pulls_[k].find(set.ids[arm]);
        return s.weight(it == pulls_[k].end() ? 0 : it->second);
    }
    return s.weight(rounds_);
}

double MufasaAgent::arm_bonus(std::size_t k, const ArmEval& e, double w) const {
    const DesignState& d = designs_[k];
    if (cfg_.ucb.mode == UcbMode::empirical) return empirical_bonus(d, e.g_cur, e.g_init, w);
    const double delta = cfg_.ucb.delta / static_cast<double>(model_.bandits() + 1);
    const Gammas g = gamma_terms(cfg_.ucb, rounds_, d.logdet_ratio(), cfg_.lambda, cfg_.sub_depth,
                                 static_cast<double>(cfg_.sub_width), delta);
    return theoretical_bonus(d, e.g_cur, e.g_init, g);
}

double MufasaAgent::shared_bonus(const Vector& g_cur, const Vector& g_init) const {
    const DesignState& d = shared_design_;
    if (cfg_.ucb.mode == UcbMode::empirical) {
        return empirical_bonus(d, g_cur, g_init, cfg_.ucb.schedule.weight(rounds_));
    }
    const double delta = cfg_.ucb.delta / static_cast<double>(model_.bandits() + 1);
    const Gammas g = gamma_terms(cfg_.ucb, rounds_, d.logdet_ratio(), cfg_.lambda, cfg_.shared_depth,
                                 static_cast<double>(cfg_.shared_width), delta);
    return theoretical_bonus(d, g_cur, g_init, g);
}

std::vector<double> MufasaAgent::score(const RoundArms& round) {
    const std::size_t K = model_.bandits();
    if (round.bandit_count() != K) {
        throw ContractViolation("round offers " + std::to_string(round.bandit_count()) + " bandits, model has " +
                                std::to_string(K));
    }
    if (pending_ && pending_->chosen) throw ContractViolation("select called twice without observe");

    Pending p;
    p.round = round;
    p.combos = enumerate_combinations(round, cfg_.combination_cap);

    // The per-bandit terms depend only on that bandit's arm: evaluate each arm once.
    p.arms.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        const ArmSet& set = round.bandits[k];
        const Mlp& net = model_.sub(k);
        p.arms[k].resize(set.arms.size());
        for (std::size_t i = 0; i < set.arms.size(); ++i) {
            ArmEval& e = p.arms[k][i];
            e.f = net.forward(params_.subs[k], set.arms[i]);
            e.g_cur = net.grad(params_.subs[k], set.arms[i]);
            e.g_init = net.grad(init_.subs[k], set.arms[i]);
            e.bonus = no_bonus_ ? 0.0 : arm_bonus(k, e, schedule_weight(k, i, set));
        }
    }

    const std::size_t out = cfg_.sub_out;
    std::vector<double> scores(p.combos.size());
    p.ucb.resize(p.combos.size());
    p.predicted.resize(p.combos.size());
    Vector f(K * out);
    Vector per_bandit(K);
    for (std::size_t j = 0; j < p.combos.size(); ++j) {
        const ArmIndices& idx = p.combos[j];
        for (std::size_t k = 0; k < K; ++k) {
            const ArmEval& e = p.arms[k][idx[k]];
            std::copy(e.f.begin(), e.f.end(), f.begin() + static_cast<std::ptrdiff_t>(k * out));
            per_bandit[k] = e.bonus;
        }
        const double pred = model_.combine(params_, f);
        double bf = 0.0;
        if (cfg_.use_shared && !no_bonus_) {
            const Vector in = model_.shared_input(f);
            bf = shared_bonus(model_.shared().grad(params_.shared, in), model_.shared().grad(init_.shared, in));
        }
        p.ucb[j] = ucb_total(per_bandit, bf, cfg_.ucb.c_bar);
        p.predicted[j] = pred;
        scores[j] = pred + p.ucb[j].total;
    }
    pending_ = std::move(p);
    return scores;
}

Selection MufasaAgent::commit(std::size_t index) {
    if (!pending_ || pending_->chosen) throw ContractViolation("commit without a fresh score()");
    Pending& p = *pending_;
    if (index >= p.combos.size()) throw ContractViolation("commit index out of range");
    p.chosen = index;
    Selection s;
    s.arms = p.combos[index];
    s.combination = resolve(p.round, s.arms);
    s.ucb = p.ucb[index];
    s.predicted = p.predicted[index];
    s.score = s.predicted + s.ucb.total;
    if (cfg_.use_shared) {
        Vector f;
        for (std::size_t k = 0; k < s.arms.size(); ++k) {
            const Vector& fk = p.arms[k][s.arms[k]].f;
            f.insert(f.end(), fk.begin(), fk.end());
        }
        const Vector in = model_.shared_input(f);
        p.g_shared_cur = {model_.shared().grad(params_.shared, in)};
        p.g_shared_init = {model_.shared().grad(init_.shared, in)};
    }
    return s;
}

Selection MufasaAgent::select(const RoundArms& round) {
    const std::vector<double> scores = score(round);
    return commit(argmax_first(scores));
}

UcbBreakdown MufasaAgent::bonus_uncached(const RoundArms& round, const ArmIndices& idx) const {
    const std::size_t K = model_.bandits();
    const Combination c = resolve(round, idx);
    Vector per_bandit(K);
    Vector f;
    for (std::size_t k = 0; k < K; ++k) {
        const Mlp& net = model_.sub(k);
        ArmEval e;
        e.g_cur = net.grad(params_.subs[k], c.features[k]);
        e.g_init = net.grad(init_.subs[k], c.features[k]);
        per_bandit[k] = no_bonus_ ? 0.0 : arm_bonus(k, e, schedule_weight(k, idx[k], round.bandits[k]));
        const Vector fk = net.forward(params_.subs[k], c.features[k]);
        f.insert(f.end(), fk.begin(), fk.end());
    }
    double bf = 0.0;
    if (cfg_.use_shared && !no_bonus_) {
        const Vector in = model_.shared_input(f);
        bf = shared_bonus(model_.shared().grad(params_.shared, in), model_.shared().grad(init_.shared, in));
    }
    return ucb_total(per_bandit, bf, cfg_.ucb.c_bar);
}

void MufasaAgent::observe(const RoundOutcome& outcome) {
    if (!pending_ || !pending_->chosen) throw ContractViolation("observe without a pending selection");
    Pending& p = *pending_;
    const ArmIndices& arms = p.combos[*p.chosen];
    if (!outcome.chosen.arms.empty() && outcome.chosen.arms != arms) {
        throw ContractViolation("outcome reports a different combination than the one selected");
    }
    const std::size_t K = model_.bandits();
    for (std::size_t k = 0; k < K; ++k) {
        const ArmEval& e = p.arms[k][arms[k]];
        designs_[k].update(e.g_cur, e.g_init);
    }
    if (cfg_.use_shared) shared_design_.update(p.g_shared_cur.front(), p.g_shared_init.front());

    Combination chosen = resolve(p.round, arms);
    if (outcome.sub_rewards.size() == K) {
        FullObservation obs;
        obs.inputs = chosen.features;
        obs.final_reward = outcome.final_reward;
        obs.sub_rewards.resize(K);
        for (const auto& [k, r] : outcome.sub_rewards) {
            if (k >= K) throw ContractViolation("sub-reward for a bandit that does not exist");
            obs.sub_rewards[k] = r;
        }
        full_history_.push_back(std::move(obs));
    } else {
        all_full_ = false;
    }
    std::vector<TrainingSample> omega = build_partial_samples(chosen, outcome.final_reward, outcome.sub_rewards,
                                                              cfg_.ucb.c_bar);
    omega_sizes_.push_back(omega.size());
    for (TrainingSample& s : omega) omega_.push_back(std::move(s));
    for (std::size_t k = 0; k < K; ++k) {
        if (!p.round.bandits[k].ids.empty()) ++pulls_[k][p.round.bandits[k].ids[arms[k]]];
    }
    if (cfg_.recompute_design) played_.push_back(std::move(chosen));

    pending_.reset();
    ++rounds_;
    last_branch_ = Branch::none;
    if (rounds_ % cfg_.train_every == 0) train();
}

void MufasaAgent::train() {
    const TrainConfig tc = train_config(cfg_);
    const std::size_t window = cfg_.max_history == 0 ? rounds_ : std::min(cfg_.max_history, rounds_);
    // Sub-reward completeness is judged over the whole history so far, and
    // rounds before the window no longer matter once it slides.
    bool full = all_full_;
    if (!full && cfg_.max_history != 0 && full_history_.size() >= window) {
        // Every round in the window was complete iff the last `window` rounds
        // all contributed K + 1 samples.
        full = true;
        for (std::size_t i = omega_sizes_.size() - window; i < omega_sizes_.size(); ++i) {
            if (omega_sizes_[i] != model_.bandits() + 1) full = false;
        }
    }
    if (full) {
        const std::span<const FullObservation> hist(full_history_.data() + (full_history_.size() - window), window);
        params_ = model_.train_all(params_, hist, tc).params;
        ++all_count_;
        last_branch_ = Branch::all;
    } else {
        std::size_t skip = 0;
        for (std::size_t i = 0; i + window < omega_sizes_.size(); ++i) skip += omega_sizes_[i];
        const std::span<const TrainingSample> samples(omega_.data() + skip, omega_.size() - skip);
        params_ = model_.train_partial(params_, samples, tc).params;
        ++partial_count_;
        last_branch_ = Branch::partial;
    }

    if (cfg_.recompute_design) {
        const std::size_t K = model_.bandits();
        std::vector<Vector> grads;
        grads.reserve(played_.size());
        for (std::size_t k = 0; k < K; ++k) {
            grads.clear();
            for (const Combination& c : played_) grads.push_back(model_.sub(k).grad(params_.subs[k], c.features[k]));
            designs_[k].rebuild_current(grads);
        }
        if (cfg_.use_shared) {
            grads.clear();
            for (const Combination& c : played_) {
                const Vector in = model_.shared_input(model_.sub_outputs(params_, c.features));
                grads.push_back(model_.shared().grad(params_.shared, in));
            }
            shared_design_.rebuild_current(grads);
        }
    }
}

}  // namespace mufasa
