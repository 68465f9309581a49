#include <doctest.h>

#include <cmath>

#include "mufasa/agents.hpp"
#include "mufasa/envs.hpp"
#include "mufasa/error.hpp"

using namespace mufasa;

namespace {

EnvSpec linear_env(std::size_t K, std::size_t dim, std::size_t arms, MaskKind mask = MaskKind::all) {
    EnvSpec s;
    for (std::size_t k = 0; k < K; ++k) s.bandits.push_back(BanditEnvSpec{SubRewardKind::linear, dim, arms, {}, nullptr, 0});
    s.mask = mask;
    return s;
}

MufasaConfig small_config() {
    MufasaConfig c;
    c.sub_width = 8;
    c.shared_width = 8;
    c.J = 20;
    c.train_every = 10;
    return c;
}

RoundOutcome outcome_of(std::size_t t, const Selection& s, const Observation& o) {
    RoundOutcome out;
    out.t = t;
    out.chosen = s.combination;
    out.final_reward = o.final_reward;
    out.sub_rewards = o.sub_rewards;
    out.ucb = s.ucb;
    out.predicted = s.predicted;
    return out;
}

// Runs `rounds` rounds and returns the chosen arms.
std::vector<ArmIndices> play(Policy& p, Environment& env, std::size_t rounds) {
    std::vector<ArmIndices> choices;
    for (std::size_t t = 0; t < rounds; ++t) {
        const RoundArms r = env.gen_round(t);
        const Selection s = p.select(r);
        choices.push_back(s.arms);
        p.observe(outcome_of(t, s, env.observe(t, s.combination)));
    }
    return choices;
}

RoundArms fixed_round(std::vector<std::vector<Vector>> arms) {
    RoundArms r;
    for (auto& a : arms) r.bandits.push_back(ArmSet{std::move(a), {}});
    return r;
}

}  // namespace

TEST_CASE("enumeration order and counts") {
    const RoundArms r = fixed_round({{Vector{1}, Vector{2}}, {Vector{1}, Vector{2}, Vector{3}}});
    const auto c = enumerate_combinations(r);
    REQUIRE(c.size() == 6);
    CHECK(c.front() == ArmIndices{0, 0});
    CHECK(c[1] == ArmIndices{0, 1});
    CHECK(c.back() == ArmIndices{1, 2});
    CHECK(enumerate_combinations(fixed_round({std::vector<Vector>(5, Vector{1})})).size() == 5);
    CHECK(enumerate_combinations(fixed_round({std::vector<Vector>(10, Vector{1}), std::vector<Vector>(10, Vector{1})})).size() == 100);
}

TEST_CASE("enumeration cap names the product") {
    const RoundArms r = fixed_round({std::vector<Vector>(10, Vector{1}), std::vector<Vector>(20, Vector{1})});
    try {
        enumerate_combinations(r, 100);
        FAIL("expected the cap to trip");
    } catch (const ContractViolation& e) {
        const std::string msg = e.what();
        CHECK(msg.find("10") != std::string::npos);
        CHECK(msg.find("20") != std::string::npos);
        CHECK(msg.find("200") != std::string::npos);
    }
}

TEST_CASE("allowed combinations restrict enumeration") {
    RoundArms r = fixed_round({{Vector{1}, Vector{2}}, {Vector{1}, Vector{2}}});
    r.allowed = std::vector<ArmIndices>{{0, 1}, {1, 0}};
    CHECK(enumerate_combinations(r) == std::vector<ArmIndices>{{0, 1}, {1, 0}});
    r.allowed = std::vector<ArmIndices>{{0, 2}};
    CHECK_THROWS_AS(enumerate_combinations(r), ContractViolation);
}

TEST_CASE("argmax with ties") {
    CHECK(argmax_first(Vector{0.6, 0.55}) == 0);
    CHECK(argmax_first(Vector{0.2, 0.7, 0.7}) == 1);
    CHECK(argmax_first(Vector{1.0}) == 0);
    CHECK_THROWS_AS(argmax_first(Vector{}), ContractViolation);
}

TEST_CASE("argmax is unchanged by a positive rescaling") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        Vector pred(7), bonus(7), a(7), b(7);
        for (std::size_t j = 0; j < 7; ++j) {
            pred[j] = rng.normal();
            bonus[j] = rng.uniform();
            a[j] = pred[j] + bonus[j];
            b[j] = 3.5 * pred[j] + 3.5 * bonus[j];
        }
        CHECK(argmax_first(a) == argmax_first(b));
    }
}

TEST_CASE("mufasa score decomposes into prediction plus bonus") {
    Environment env(linear_env(2, 4, 3), 1);
    MufasaAgent agent({4, 4}, small_config(), 5);
    play(agent, env, 15);
    const Selection s = agent.select(env.gen_round(15));
    CHECK(s.score == s.predicted + s.ucb.total);
    CHECK(s.predicted == agent.model().forward(agent.params(), s.combination.features));
    double per = 0.0;
    for (double v : s.ucb.per_bandit) per += v;
    CHECK(s.ucb.total == doctest::Approx(agent.config().ucb.c_bar * per + s.ucb.shared));
}

TEST_CASE("cached per-arm bonuses equal a fresh recomputation") {
    for (bool per_arm_schedule : {false, true}) {
        Environment env(linear_env(2, 4, 4), 2);
        MufasaConfig cfg = small_config();
        cfg.ucb.schedule.per_arm = per_arm_schedule;
        MufasaAgent agent({4, 4}, cfg, 6);
        play(agent, env, 25);
        const RoundArms r = env.gen_round(25);
        const auto combos = enumerate_combinations(r);
        const Vector scores = agent.score(r);
        for (std::size_t i = 0; i < combos.size(); ++i) {
            const double pred = agent.model().forward(agent.params(), resolve(r, combos[i]).features);
            const UcbBreakdown fresh = agent.bonus_uncached(r, combos[i]);
            CHECK(std::abs(scores[i] - (pred + fresh.total)) <= 1e-12);
        }
        agent.commit(argmax_first(scores));
    }
}

TEST_CASE("theoretical bonus mode runs and is finite") {
    Environment env(linear_env(2, 3, 3), 3);
    MufasaConfig cfg = small_config();
    cfg.ucb.mode = UcbMode::theoretical;
    MufasaAgent agent({3, 3}, cfg, 1);
    play(agent, env, 12);
    const Selection s = agent.select(env.gen_round(12));
    CHECK(std::isfinite(s.ucb.total));
    CHECK(s.ucb.total > 0.0);
}

TEST_CASE("training branch follows sub-reward availability") {
    SUBCASE("every sub-reward") {
        Environment env(linear_env(2, 3, 3), 4);
        MufasaAgent agent({3, 3}, small_config(), 2);
        play(agent, env, 40);
        CHECK(agent.all_trainings() == 4);
        CHECK(agent.partial_trainings() == 0);
        CHECK(agent.last_branch() == Branch::all);
        CHECK(agent.design(0).update_count() == 40);
        CHECK(agent.shared_design().update_count() == 40);
    }
    SUBCASE("one masked bandit") {
        EnvSpec s = linear_env(2, 3, 3, MaskKind::subset);
        s.mask_subset = {0};
        Environment env(s, 4);
        MufasaAgent agent({3, 3}, small_config(), 2);
        play(agent, env, 40);
        CHECK(agent.all_trainings() == 0);
        CHECK(agent.partial_trainings() == 4);
        for (std::size_t n : agent.omega_sizes()) CHECK(n == 2);
        CHECK(agent.omega_total() == 80);
    }
}

TEST_CASE("agent contract violations") {
    Environment env(linear_env(2, 3, 3), 5);
    MufasaAgent agent({3, 3}, small_config(), 0);
    const RoundArms r = env.gen_round(0);
    RoundOutcome o;
    CHECK_THROWS_AS(agent.observe(o), ContractViolation);
    const Selection s = agent.select(r);
    CHECK_THROWS_AS(agent.select(r), ContractViolation);
    const Observation ob = env.observe(0, s.combination);
    RoundOutcome wrong = outcome_of(0, s, ob);
    wrong.chosen.arms[0] = (s.arms[0] + 1) % 3;
    CHECK_THROWS_AS(agent.observe(wrong), ContractViolation);
    agent.observe(outcome_of(0, s, ob));
    CHECK_THROWS_AS(agent.observe(outcome_of(0, s, ob)), ContractViolation);
    CHECK_THROWS_AS(agent.select(fixed_round({{Vector{1, 0, 0}}})), ContractViolation);

    MufasaConfig bad = small_config();
    bad.train_every = 0;
    CHECK_THROWS_AS(MufasaAgent({3}, bad, 0), ConfigError);
}

TEST_CASE("same seed and history give identical choices") {
    Environment e1(linear_env(2, 4, 4), 6), e2(linear_env(2, 4, 4), 6);
    MufasaAgent a({4, 4}, small_config(), 9), b({4, 4}, small_config(), 9);
    CHECK(play(a, e1, 30) == play(b, e2, 30));
    CHECK(a.params() == b.params());
}

TEST_CASE("greedy selection with a perfect model picks the best combination") {
    // One-layer bandit nets with W = a_k / sqrt(m) compute h_k exactly.
    EnvSpec spec = linear_env(2, 5, 6);
    Environment env(spec, 7);
    MufasaConfig cfg = small_config();
    cfg.sub_depth = 1;
    cfg.use_shared = false;
    cfg.train_every = 1000000;
    MufasaAgent agent({5, 5}, cfg, 1);
    AssembledParams p = agent.params();
    const double sm = std::sqrt(static_cast<double>(cfg.sub_width));
    for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < 5; ++i) p.subs[k].theta[i] = env.hidden(k)[i] / sm;
    }
    agent.set_params(p);
    agent.disable_bonus(true);
    for (std::size_t t = 0; t < 50; ++t) {
        const RoundArms r = env.gen_round(t);
        const Selection s = agent.select(r);
        CHECK(s.arms == env.oracle_best(r).arms);
        agent.observe(outcome_of(t, s, env.observe(t, s.combination)));
    }
}

TEST_CASE("final-reward-only training reduces held-out error") {
    Environment env(linear_env(2, 10, 10, MaskKind::none), 0);
    MufasaConfig cfg;
    cfg.zero_init_mode = false;
    MufasaAgent agent({10, 10}, cfg, 1);
    auto held_out_mse = [&](const AssembledParams& p) {
        double se = 0.0;
        for (std::size_t t = 100000; t < 100200; ++t) {
            const RoundArms r = env.gen_round(t);
            const Combination c = resolve(r, {t % 10, (t / 10) % 10});
            const double d = agent.model().forward(p, c.features) - env.expected(c);
            se += d * d;
        }
        return se / 200;
    };
    const double before = held_out_mse(agent.params());
    play(agent, env, 500);
    CHECK(agent.partial_trainings() == 10);
    const double after = held_out_mse(agent.params());
    MESSAGE("held-out MSE " << before << " -> " << after);
    CHECK(after <= 0.7 * before);
}

TEST_CASE("linucb examples") {
    LinUcbPolicy fresh({2}, LinUcbConfig{1.0, 4.0});
    CHECK(fresh.arm_score(0, Vector{0.6, 0.8}) == doctest::Approx(0.5));
    const Selection tie = fresh.select(fixed_round({{Vector{0.8, 0.6}, Vector{0.6, 0.8}}}));
    CHECK(tie.arms == ArmIndices{0});

    LinUcbPolicy greedy({1}, LinUcbConfig{0.0, 1.0});
    const RoundArms r = fixed_round({{Vector{1.0}}});
    const Selection s = greedy.select(r);
    RoundOutcome o;
    o.chosen = s.combination;
    o.final_reward = 1.0;
    o.sub_rewards = {{0, 1.0}};
    greedy.observe(o);
    CHECK(greedy.theta_hat(0)[0] == doctest::Approx(0.5));
    CHECK(greedy.arm_score(0, Vector{1.0}) == doctest::Approx(0.5));
}

TEST_CASE("baselines refuse masked sub-rewards") {
    Environment env(linear_env(2, 3, 3, MaskKind::none), 0);
    LinUcbPolicy lin({3, 3}, LinUcbConfig{});
    KerUcbPolicy ker(2, KerUcbConfig{});
    NeuUcbPolicy neu({3, 3}, small_config(), 0);
    for (Policy* p : std::initializer_list<Policy*>{&lin, &ker, &neu}) {
        const RoundArms r = env.gen_round(0);
        const Selection s = p->select(r);
        CHECK_THROWS_AS(p->observe(outcome_of(0, s, env.observe(0, s.combination))), Unsupported);
    }
}

TEST_CASE("kerucb examples") {
    KerUcbPolicy ker(1, KerUcbConfig{1.0, 1.0, 1e-9, 1000, 1e-12});
    CHECK(ker.kernel(Vector{0.3, 0.4}, Vector{0.3, 0.4}) == 1.0);
    CHECK(ker.kernel(Vector{0, 0}, Vector{1, 0}) == doctest::Approx(std::exp(-0.5)));
    const auto empty = ker.posterior(0, Vector{0.5, 0.5});
    CHECK(empty.mean == 0.0);
    CHECK(empty.sd == 1.0);
    const Selection s = ker.select(fixed_round({{Vector{0.1, 0.0}, Vector{0.0, 0.2}}}));
    CHECK(s.arms == ArmIndices{0});
    RoundOutcome o;
    o.chosen = s.combination;
    o.sub_rewards = {{0, 0.7}};
    ker.observe(o);
    CHECK(ker.stored(0) == 1);
    CHECK(ker.posterior(0, Vector{0.1, 0.0}).mean == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("kerucb stops storing at its budget") {
    Environment env(linear_env(1, 3, 4), 0);
    KerUcbPolicy ker(1, KerUcbConfig{1.0, 1.0, 1.0, 5, 1e-8});
    play(ker, env, 12);
    CHECK(ker.stored(0) == 5);
}

TEST_CASE("neuucb with one bandit matches a shared-less single-bandit mufasa") {
    Environment e1(linear_env(1, 4, 5), 8), e2(linear_env(1, 4, 5), 8);
    MufasaConfig cfg = small_config();
    NeuUcbPolicy neu({4}, cfg, 3);
    MufasaConfig solo = cfg;
    solo.use_shared = false;
    solo.ucb.c_bar = 1.0;
    MufasaAgent agent({4}, solo, 3);
    CHECK(play(neu, e1, 30) == play(agent, e2, 30));
}

TEST_CASE("untrained neuucb follows its initial bonuses") {
    Environment env(linear_env(2, 3, 4), 9);
    NeuUcbPolicy a({3, 3}, small_config(), 4), b({3, 3}, small_config(), 4);
    CHECK(play(a, env, 5) == play(b, env, 5));
}

TEST_CASE("random policy is uniform and seeded") {
    const RoundArms r = fixed_round({std::vector<Vector>(4, Vector{1}), std::vector<Vector>(5, Vector{1})});
    RandomPolicy p(11);
    std::vector<std::size_t> counts(4, 0);
    const std::size_t n = 100000;
    for (std::size_t t = 0; t < n; ++t) {
        const Selection s = p.select(r);
        ++counts[s.arms[0]];
        p.observe(RoundOutcome{});
    }
    const double expect = n / 4.0, sd = std::sqrt(n * 0.25 * 0.75);
    for (std::size_t c : counts) CHECK(std::abs(static_cast<double>(c) - expect) <= 3 * sd);

    RandomPolicy a(5), b(5);
    for (int i = 0; i < 20; ++i) {
        CHECK(a.select(r).arms == b.select(r).arms);
        a.observe(RoundOutcome{});
        b.observe(RoundOutcome{});
    }
    RandomPolicy one(1);
    CHECK(one.select(fixed_round({{Vector{1}}})).arms == ArmIndices{0});
}
