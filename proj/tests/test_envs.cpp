#include <doctest.h>

#include <cmath>
#include <memory>

#include "mufasa/envs.hpp"
#include "mufasa/error.hpp"

using namespace mufasa;

namespace {

const std::string kData = MUFASA_TEST_DATA;

EnvSpec linear_spec(std::size_t K, std::size_t dim, std::size_t arms) {
    EnvSpec s;
    for (std::size_t k = 0; k < K; ++k) s.bandits.push_back(BanditEnvSpec{SubRewardKind::linear, dim, arms, {}, nullptr, 0});
    return s;
}

std::shared_ptr<const Dataset> clusters(std::size_t classes, std::size_t dim, std::uint64_t seed) {
    return std::make_shared<const Dataset>(synthetic_dataset(classes, dim, 50, 0.3, seed));
}

}  // namespace

TEST_CASE("sub-reward examples") {
    EnvSpec s = linear_spec(2, 4, 3);
    s.bandits[0].hidden = {1, 0, 0, 0};
    s.bandits[1].kind = SubRewardKind::square;
    s.bandits[1].hidden = {1, 0, 0, 0};
    const Environment env(s, 0);
    CHECK(env.sub_reward(0, Vector(4, 0.0)) == 0.0);
    CHECK(env.sub_reward(0, Vector{0.3, 1, 1, 1}) == doctest::Approx(0.3));
    CHECK(env.sub_reward(1, Vector{0.5, 0, 0, 0}) == doctest::Approx(0.25));
    CHECK_THROWS_AS(env.sub_reward(0, Vector{1, 0}), ContractViolation);
}

TEST_CASE("hidden vectors are normalized") {
    EnvSpec s = linear_spec(1, 2, 3);
    s.bandits[0].hidden = {3, 4};
    const Environment env(s, 0);
    CHECK(env.hidden(0)[0] == doctest::Approx(0.6));
    CHECK(env.sub_reward(0, Vector{1, 0}) == doctest::Approx(0.6));
}

TEST_CASE("final reward examples") {
    EnvSpec s = linear_spec(2, 3, 3);
    const Environment h1(s, 0);
    CHECK(h1.final_reward(Vector{1, 0}) == 1.0);
    CHECK(h1.final_reward(Vector{0, 0}) == 0.0);
    s.final_kind = FinalRewardKind::h2_weighted;
    const Environment h2(s, 0);
    CHECK(h2.final_reward(Vector{1, 0}) == 2.0);
    CHECK(h2.final_reward(Vector{0, 1}) == 1.0);
    CHECK(h2.final_reward(Vector{0, 0}) == 0.0);
    s.final_kind = FinalRewardKind::nonlinear_sqrt;
    const Environment sq(s, 0);
    CHECK(sq.final_reward(Vector{0.25, -3}) == doctest::Approx(0.5));
    CHECK(sq.final_reward(Vector{0, 0}) == 0.0);
    s.final_kind = FinalRewardKind::weights;
    s.weights = {0.5, 3};
    const Environment w(s, 0);
    CHECK(w.final_reward(Vector{2, 1}) == doctest::Approx(4.0));
    CHECK_THROWS_AS(w.final_reward(Vector{1}), ContractViolation);
}

TEST_CASE("configured c_bar defaults") {
    CHECK(default_c_bar(FinalRewardKind::h1_sum, {}) == 1.0);
    CHECK(default_c_bar(FinalRewardKind::h2_weighted, {}) == 2.0);
    EnvSpec s = linear_spec(2, 3, 3);
    CHECK(tight_lipschitz(s) == doctest::Approx(std::sqrt(2.0)));
    s.final_kind = FinalRewardKind::h2_weighted;
    CHECK(tight_lipschitz(s) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("Lipschitz audit") {
    EnvSpec s = linear_spec(2, 3, 3);
    const Environment h1(s, 0);
    CHECK(lipschitz_audit(h1, std::sqrt(2.0), 2000, 1) == 0);
    CHECK(lipschitz_audit(h1, 1.0, 2000, 1) > 0);
    s.final_kind = FinalRewardKind::h2_weighted;
    const Environment h2(s, 0);
    CHECK(lipschitz_audit(h2, std::sqrt(5.0), 2000, 1) == 0);
}

TEST_CASE("a single revealed sub-reward never exceeds its scaled value") {
    // H evaluated on (0, .., r^k, .., 0) against c_bar r^k for r^k >= 0.
    for (auto kind : {FinalRewardKind::h1_sum, FinalRewardKind::h2_weighted}) {
        EnvSpec s = linear_spec(2, 3, 3);
        s.final_kind = kind;
        const double c_bar = default_c_bar(kind, {});
        const Environment env(s, 0);
        Rng rng(4);
        for (int i = 0; i < 1000; ++i) {
            const double r = rng.uniform() * 3.0;
            for (std::size_t k = 0; k < 2; ++k) {
                Vector padded(2, 0.0);
                padded[k] = r;
                CHECK(env.final_reward(padded) <= c_bar * r + 1e-12);
            }
        }
    }
}

TEST_CASE("rounds are deterministic and inside the unit ball") {
    Environment a(linear_spec(2, 10, 10), 3), b(linear_spec(2, 10, 10), 3);
    for (std::size_t t : {0u, 5u, 999u}) {
        const RoundArms ra = a.gen_round(t), rb = b.gen_round(t);
        for (std::size_t k = 0; k < 2; ++k) {
            REQUIRE(ra.bandits[k].arms.size() == 10);
            CHECK(ra.bandits[k].arms == rb.bandits[k].arms);
            for (const Vector& x : ra.bandits[k].arms) CHECK(norm2(x) <= 1.0 + 1e-12);
        }
    }
    CHECK(a.gen_round(1).bandits[0].arms != a.gen_round(2).bandits[0].arms);
    CHECK(a.hidden(0) == b.hidden(0));
}

TEST_CASE("noise-free rewards equal the clean value") {
    Environment env(linear_spec(2, 4, 5), 1);
    const RoundArms r = env.gen_round(0);
    const Combination c = resolve(r, {1, 3});
    const Observation o = env.observe(0, c);
    CHECK(o.final_reward == o.h_clean);
    CHECK(o.h_clean == env.expected(c));
    CHECK(o.sub_rewards.size() == 2);
    CHECK(o.sub_rewards.at(1) == o.clean_sub_rewards[1]);
}

TEST_CASE("noise has the configured scale") {
    EnvSpec s = linear_spec(1, 3, 2);
    s.noise_sigma = 0.5;
    Environment env(s, 2);
    double s2 = 0.0;
    const int n = 4000;
    for (int t = 0; t < n; ++t) {
        const RoundArms r = env.gen_round(t);
        const Observation o = env.observe(t, resolve(r, {0}));
        s2 += (o.final_reward - o.h_clean) * (o.final_reward - o.h_clean);
    }
    CHECK(std::sqrt(s2 / n) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("sub-reward masks") {
    EnvSpec s = linear_spec(3, 3, 2);
    s.mask = MaskKind::none;
    Environment none(s, 0);
    CHECK(none.observe(0, resolve(none.gen_round(0), {0, 0, 0})).sub_rewards.empty());
    s.mask = MaskKind::subset;
    s.mask_subset = {0, 2};
    Environment sub(s, 0);
    const Observation o = sub.observe(0, resolve(sub.gen_round(0), {0, 1, 0}));
    CHECK(o.sub_rewards.size() == 2);
    CHECK(o.sub_rewards.count(1) == 0);
    s.mask_subset = {3};
    CHECK_THROWS_AS(Environment(s, 0), ConfigError);
}

TEST_CASE("oracle finds the best combination") {
    Environment env(linear_spec(2, 5, 6), 4);
    for (std::size_t t = 0; t < 20; ++t) {
        const RoundArms r = env.gen_round(t);
        const auto best = env.oracle_best(r);
        double brute = -1e300;
        for (const auto& idx : enumerate_combinations(r)) brute = std::max(brute, env.expected(resolve(r, idx)));
        CHECK(best.value == brute);
        CHECK(env.expected(resolve(r, best.arms)) == brute);
    }
}

TEST_CASE("dataset bandit layout") {
    EnvSpec s;
    s.bandits.push_back(BanditEnvSpec{SubRewardKind::dataset, 0, 0, {}, clusters(10, 4, 1), 0});
    Environment env(s, 0);
    const RoundArms r = env.gen_round(0);
    REQUIRE(r.bandits[0].arms.size() == 10);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        const Vector& x = r.bandits[0].arms[i];
        CHECK(x.size() == 40);
        CHECK(r.bandits[0].ids[i] == i);
        std::size_t blocks = 0;
        for (std::size_t b = 0; b < 10; ++b) {
            bool any = false;
            for (std::size_t j = 0; j < 4; ++j) any = any || x[b * 4 + j] != 0.0;
            blocks += any ? 1 : 0;
        }
        CHECK(blocks == 1);
        const double rew = env.sub_reward(0, x);
        CHECK((rew == 0.0 || rew == 1.0));
        correct += rew == 1.0 ? 1 : 0;
    }
    CHECK(correct == 1);
}

TEST_CASE("dataset pool keeps the correct class") {
    EnvSpec s;
    s.bandits.push_back(BanditEnvSpec{SubRewardKind::dataset, 0, 0, {}, clusters(6, 3, 2), 3});
    Environment env(s, 1);
    for (std::size_t t = 0; t < 30; ++t) {
        const RoundArms r = env.gen_round(t);
        REQUIRE(r.bandits[0].arms.size() == 3);
        CHECK(env.oracle_best(r).value == 1.0);
    }
}

TEST_CASE("dataset rows wrap with a reshuffle") {
    EnvSpec s;
    s.bandits.push_back(BanditEnvSpec{SubRewardKind::dataset, 0, 0, {}, clusters(2, 2, 3), 0});
    Environment env(s, 0);
    for (std::size_t t = 0; t < 120; ++t) env.gen_round(t);
    CHECK(env.reshuffles() == 2);
}

TEST_CASE("tradeoff rounds offer exactly a (1,0) and a (0,1) combination") {
    EnvSpec s;
    for (int k = 0; k < 2; ++k) s.bandits.push_back(BanditEnvSpec{SubRewardKind::dataset, 0, 0, {}, clusters(2, 3, 4 + k), 0});
    s.final_kind = FinalRewardKind::h2_weighted;
    s.tradeoff = true;
    Environment env(s, 0);
    for (std::size_t t = 0; t < 25; ++t) {
        const RoundArms r = env.gen_round(t);
        REQUIRE(r.allowed.has_value());
        const auto combos = enumerate_combinations(r);
        REQUIRE(combos.size() == 2);
        std::set<double> values;
        for (const auto& idx : combos) {
            const Observation o = env.observe(t, resolve(r, idx));
            values.insert(o.h_clean);
            CHECK(o.clean_sub_rewards[0] + o.clean_sub_rewards[1] == 1.0);
        }
        CHECK(values == std::set<double>{1.0, 2.0});
    }
    s.bandits.pop_back();
    CHECK_THROWS_AS(Environment(s, 0), ConfigError);
}

TEST_CASE("csv ingestion") {
    const Dataset d = ingest_csv(kData + "/small.csv");
    CHECK(d.rows.size() == 6);
    CHECK(d.classes == 3);
    CHECK(d.dim == 2);
    // Largest row norm is 5.
    CHECK(d.rows[0].x == Vector{0.6, 0.8});
    double worst = 0.0;
    for (const auto& r : d.rows) worst = std::max(worst, norm2(r.x));
    CHECK(worst == doctest::Approx(1.0));
    CHECK(ingest_csv(kData + "/small.csv", 5).classes == 5);
    CHECK_THROWS_AS(ingest_csv(kData + "/small.csv", 2), ParseError);
}

TEST_CASE("csv errors carry line numbers") {
    try {
        ingest_csv(kData + "/bad_cell.csv");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    try {
        ingest_csv(kData + "/ragged.csv");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(ingest_csv(kData + "/missing.csv"), ParseError);
}

TEST_CASE("unit ball draws") {
    Rng rng(9);
    double mean_norm = 0.0;
    for (int i = 0; i < 2000; ++i) {
        const double n = norm2(unit_ball(rng, 3));
        CHECK(n <= 1.0);
        mean_norm += n / 2000;
    }
    // E|x| = d / (d + 1) for the uniform ball.
    CHECK(mean_norm == doctest::Approx(0.75).epsilon(0.03));
}

TEST_CASE("kind names") {
    CHECK(parse_sub_reward("square") == SubRewardKind::square);
    CHECK(parse_final_reward("h2_weighted") == FinalRewardKind::h2_weighted);
    CHECK(to_string(SubRewardKind::dataset) == "dataset");
    CHECK_THROWS_AS(parse_sub_reward("cubic"), ConfigError);
}
