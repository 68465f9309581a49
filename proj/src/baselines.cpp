#include <algorithm>
#include <cmath>
#include <string>

#include "mufasa/agents.hpp"
#include "mufasa/error.hpp"
#include "mufasa/kernels.hpp"

namespace mufasa {
namespace {

// Picks the combination maximising the sum of per-arm scores.
Selection pick_by_arm_scores(const RoundArms& round, const std::vector<Vector>& arm_scores,
                             const std::vector<Vector>& arm_bonus) {
    const std::vector<ArmIndices> combos = enumerate_combinations(round, kDefaultCombinationCap);
    std::vector<double> scores(combos.size(), 0.0);
    for (std::size_t j = 0; j < combos.size(); ++j) {
        for (std::size_t k = 0; k < combos[j].size(); ++k) scores[j] += arm_scores[k][combos[j][k]];
    }
    const std::size_t best = argmax_first(scores);
    Selection s;
    s.arms = combos[best];
    s.combination = resolve(round, s.arms);
    s.ucb.per_bandit.resize(s.arms.size());
    for (std::size_t k = 0; k < s.arms.size(); ++k) {
        s.ucb.per_bandit[k] = arm_bonus[k][s.arms[k]];
        s.ucb.total += s.ucb.per_bandit[k];
    }
    s.score = scores[best];
    s.predicted = s.score - s.ucb.total;
    return s;
}

std::vector<double> require_all_sub_rewards(const RoundOutcome& o, std::size_t K, const char* who) {
    if (o.sub_rewards.size() != K) {
        throw Unsupported(std::string(who) + " needs every sub-reward; only " + std::to_string(o.sub_rewards.size()) +
                          " of " + std::to_string(K) + " were revealed");
    }
    std::vector<double> r(K);
    for (const auto& [k, v] : o.sub_rewards) {
        if (k >= K) throw ContractViolation("sub-reward for a bandit that does not exist");
        r[k] = v;
    }
    return r;
}

}  // namespace

// --- LinUCB ---------------------------------------------------------------

LinUcbPolicy::LinUcbPolicy(std::vector<std::size_t> input_dims, LinUcbConfig cfg) : cfg_(cfg) {
    if (!(cfg_.lambda > 0.0)) throw ConfigError("linucb lambda must be positive");
    if (cfg_.alpha < 0.0) throw ConfigError("linucb alpha must be non-negative");
    for (std::size_t d : input_dims) {
        if (d == 0) throw ConfigError("linucb input dimension must be positive");
        Ridge r;
        r.a_inv = Matrix::identity(d);
        for (std::size_t i = 0; i < d; ++i) r.a_inv(i, i) = 1.0 / cfg_.lambda;
        r.b.assign(d, 0.0);
        r.theta.assign(d, 0.0);
        bandits_.push_back(std::move(r));
    }
}

double LinUcbPolicy::arm_score(std::size_t k, std::span<const double> x) const {
    const Ridge& r = bandits_.at(k);
    if (x.size() != r.theta.size()) throw ContractViolation("linucb arm has the wrong dimension");
    return kernels::dot(x.data(), r.theta.data(), x.size()) + cfg_.alpha * quad_norm(r.a_inv, x);
}

Selection LinUcbPolicy::select(const RoundArms& round) {
    if (pending_) throw ContractViolation("select called twice without observe");
    if (round.bandit_count() != bandits_.size()) throw ContractViolation("linucb: wrong number of bandits");
    std::vector<Vector> scores(bandits_.size()), bonus(bandits_.size());
    for (std::size_t k = 0; k < bandits_.size(); ++k) {
        for (const Vector& x : round.bandits[k].arms) {
            const double b = cfg_.alpha * quad_norm(bandits_[k].a_inv, x);
            bonus[k].push_back(b);
            scores[k].push_back(arm_score(k, x));
        }
    }
    pending_ = pick_by_arm_scores(round, scores, bonus);
    return *pending_;
}

void LinUcbPolicy::observe(const RoundOutcome& outcome) {
    if (!pending_) throw ContractViolation("observe without a pending selection");
    const std::vector<double> r = require_all_sub_rewards(outcome, bandits_.size(), "linucb");
    Vector scratch;
    for (std::size_t k = 0; k < bandits_.size(); ++k) {
        Ridge& rd = bandits_[k];
        const Vector& x = pending_->combination.features[k];
        sherman_morrison_update_inplace(rd.a_inv, x, 1.0, scratch);
        kernels::axpy(r[k], x.data(), rd.b.data(), x.size());
        rd.theta = matvec(rd.a_inv, rd.b);
    }
    pending_.reset();
}

// --- KerUCB ---------------------------------------------------------------

KerUcbPolicy::KerUcbPolicy(std::size_t bandits, KerUcbConfig cfg) : cfg_(cfg), bandits_(bandits) {
    if (!(cfg_.bandwidth > 0.0)) throw ConfigError("kerucb bandwidth must be positive");
    if (!(cfg_.lambda > 0.0)) throw ConfigError("kerucb lambda must be positive");
    if (cfg_.beta < 0.0) throw ConfigError("kerucb beta must be non-negative");
}

double KerUcbPolicy::kernel(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-s / (2.0 * cfg_.bandwidth * cfg_.bandwidth));
}

KerUcbPolicy::Posterior KerUcbPolicy::posterior(std::size_t k, std::span<const double> x) const {
    const Gp& gp = bandits_.at(k);
    const double kxx = kernel(x, x);
    if (gp.xs.empty()) return {0.0, std::sqrt(kxx)};
    const std::size_t n = gp.xs.size();
    Vector kx(n);
    for (std::size_t i = 0; i < n; ++i) kx[i] = kernel(gp.xs[i], x);
    const double mean = kernels::dot(kx.data(), gp.alpha.data(), n);
    const double q = quad_norm(gp.k_inv, kx);
    const double var = kxx - q * q;
    return {mean, std::sqrt(std::max(var, 0.0))};
}

void KerUcbPolicy::add(Gp& gp, const Vector& x, double r) const {
    if (gp.xs.size() >= cfg_.budget) return;
    const std::size_t n = gp.xs.size();
    Vector kx(n);
    for (std::size_t i = 0; i < n; ++i) kx[i] = kernel(gp.xs[i], x);
    const Vector v = n ? matvec(gp.k_inv, kx) : Vector{};
    const double s = kernel(x, x) + cfg_.lambda + cfg_.jitter - (n ? kernels::dot(kx.data(), v.data(), n) : 0.0);
    if (!(s > kSingularThreshold)) throw NotSpd("kerucb kernel matrix lost positive definiteness");
    // Bordered inverse of [[K, k], [k^T, kxx + lambda]].
    Matrix next(n + 1, n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) next(i, j) = gp.k_inv(i, j) + v[i] * v[j] / s;
        next(i, n) = -v[i] / s;
        next(n, i) = -v[i] / s;
    }
    next(n, n) = 1.0 / s;
    gp.k_inv = std::move(next);
    gp.xs.push_back(x);
    gp.r.push_back(r);
    gp.alpha = matvec(gp.k_inv, gp.r);
}

Selection KerUcbPolicy::select(const RoundArms& round) {
    if (pending_) throw ContractViolation("select called twice without observe");
    if (round.bandit_count() != bandits_.size()) throw ContractViolation("kerucb: wrong number of bandits");
    std::vector<Vector> scores(bandits_.size()), bonus(bandits_.size());
    for (std::size_t k = 0; k < bandits_.size(); ++k) {
        for (const Vector& x : round.bandits[k].arms) {
            const Posterior p = posterior(k, x);
            bonus[k].push_back(cfg_.beta * p.sd);
            scores[k].push_back(p.mean + cfg_.beta * p.sd);
        }
    }
    pending_ = pick_by_arm_scores(round, scores, bonus);
    return *pending_;
}

void KerUcbPolicy::observe(const RoundOutcome& outcome) {
    if (!pending_) throw ContractViolation("observe without a pending selection");
    const std::vector<double> r = require_all_sub_rewards(outcome, bandits_.size(), "kerucb");
    for (std::size_t k = 0; k < bandits_.size(); ++k) add(bandits_[k], pending_->combination.features[k], r[k]);
    pending_.reset();
}

// --- NeuUCB ---------------------------------------------------------------

NeuUcbPolicy::NeuUcbPolicy(std::vector<std::size_t> input_dims, MufasaConfig per_bandit, std::uint64_t seed) {
    per_bandit.use_shared = false;
    per_bandit.ucb.c_bar = 1.0;
    for (std::size_t k = 0; k < input_dims.size(); ++k) {
        agents_.push_back(std::make_unique<MufasaAgent>(std::vector<std::size_t>{input_dims[k]}, per_bandit,
                                                        seed + k));
    }
}

Selection NeuUcbPolicy::select(const RoundArms& round) {
    if (pending_) throw ContractViolation("select called twice without observe");
    const std::size_t K = agents_.size();
    if (round.bandit_count() != K) throw ContractViolation("neuucb: wrong number of bandits");
    std::vector<Vector> scores(K), bonus(K, Vector{});
    for (std::size_t k = 0; k < K; ++k) {
        RoundArms single;
        single.bandits.push_back(round.bandits[k]);
        scores[k] = agents_[k]->score(single);
        bonus[k].assign(scores[k].size(), 0.0);
    }
    Selection s = pick_by_arm_scores(round, scores, bonus);
    s.ucb.total = 0.0;
    s.predicted = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const Selection sk = agents_[k]->commit(s.arms[k]);
        s.ucb.per_bandit[k] = sk.ucb.total;
        s.ucb.total += sk.ucb.total;
        s.predicted += sk.predicted;
    }
    pending_ = s;
    return s;
}

void NeuUcbPolicy::observe(const RoundOutcome& outcome) {
    if (!pending_) throw ContractViolation("observe without a pending selection");
    const std::vector<double> r = require_all_sub_rewards(outcome, agents_.size(), "neuucb");
    for (std::size_t k = 0; k < agents_.size(); ++k) {
        RoundOutcome o;
        o.t = outcome.t;
        o.chosen.arms = {pending_->arms[k]};
        o.final_reward = r[k];
        o.sub_rewards[0] = r[k];
        agents_[k]->observe(o);
    }
    pending_.reset();
}

Branch NeuUcbPolicy::last_branch() const {
    return agents_.empty() ? Branch::none : agents_.front()->last_branch();
}

}  // namespace mufasa
