#include <catch2/catch_amalgamated.hpp>

#include "drmdp/dp.hpp"
#include "drmdp/envs.hpp"
#include "oracles.hpp"

using namespace drmdp;

TEST_CASE("coin toss rewards follow the betting rules") {
    const Environment env = coin_toss_env(1.0);
    const int up = env.actions.index_of({1.0});
    const int stay = env.actions.index_of({0.0});
    const int down = env.actions.index_of({-1.0});
    REQUIRE(up >= 0);

    CHECK(env.reward(3, up, 5) == 1.0);    // bet up, state rose
    CHECK(env.reward(3, up, 3) == -1.0);   // tie loses the stake
    CHECK(env.reward(3, down, 5) == -1.0);
    CHECK(env.reward(3, down, 1) == 1.0);
    for (int x = 0; x < 11; ++x)
        for (int y = 0; y < 11; ++y) CHECK(env.reward(x, stay, y) == 0.0);
}

TEST_CASE("binomial pmf values and symmetry") {
    const Distribution d0 = binomial_pmf(10, 0.0);
    CHECK(d0.weight(0) == 1.0);
    const Distribution mid = binomial_pmf(10, 0.5);
    CHECK(mid.weight(5) == Catch::Approx(252.0 / 1024.0).margin(1e-15));
    for (double p : {0.15, 0.4, 0.7}) {
        const Distribution a = binomial_pmf(10, p);
        const Distribution b = binomial_pmf(10, 1.0 - p);
        for (int k = 0; k <= 10; ++k)
            CHECK(a.weight(k) == Catch::Approx(b.weight(10 - k)).margin(1e-14));
    }
    CHECK_THROWS_AS(binomial_pmf(10, 1.5), std::invalid_argument);
}

TEST_CASE("coin toss kernel is state and action independent") {
    const Environment env = coin_toss_env(0.5);
    CHECK(validate_kernel(env.reference).empty());
    const Distribution& base = env.reference.row(0, 0);
    for (int x = 0; x < 11; ++x)
        for (int a = 0; a < 3; ++a)
            for (int y = 0; y < 11; ++y)
                CHECK(env.reference.row(x, a).weight(y) == base.weight(y));
}

TEST_CASE("at radius zero the coin Q-values depend on x only through the reward") {
    const Environment env = coin_toss_env(0.0);
    const ViResult vi = value_iteration(env);
    // Q*(x,a) = rbar(x,a) + alpha E[V], so Q* - rbar is one constant
    const Distribution& rho = env.reference.row(0, 0);
    std::vector<double> rbar(11 * 3);
    for (int x = 0; x < 11; ++x)
        for (int a = 0; a < 3; ++a) {
            double s = 0.0;
            for (int y = 0; y < 11; ++y) s += rho.weight(y) * env.reward(x, a, y);
            rbar[static_cast<std::size_t>(x * 3 + a)] = s;
        }
    const double shift = vi.q(0, 0) - rbar[0];
    for (int x = 0; x < 11; ++x)
        for (int a = 0; a < 3; ++a)
            CHECK(vi.q(x, a) - rbar[static_cast<std::size_t>(x * 3 + a)] ==
                  Catch::Approx(shift).margin(1e-8));
}

TEST_CASE("bandit kernel encodes the self-excitement shift") {
    const Environment env = bandit_env();
    CHECK(env.n_states() == 20);
    CHECK(env.n_actions() == 10);
    CHECK(validate_kernel(env.reference).empty());

    const int x_win2 = env.states.index_of({3.0, 2.0});   // previous win on arm 2
    const int x_loss1 = env.states.index_of({-2.0, 1.0}); // previous loss on arm 1
    const int a_arm2 = env.actions.index_of({4.0, 2.0});
    REQUIRE(x_win2 >= 0);
    REQUIRE(a_arm2 >= 0);

    const int win_state = env.states.index_of({4.0, 2.0});
    const int loss_state = env.states.index_of({-4.0, 2.0});
    CHECK(env.reference.row(x_win2, a_arm2).weight(win_state) == Catch::Approx(0.7));
    CHECK(env.reference.row(x_win2, a_arm2).weight(loss_state) == Catch::Approx(0.3));
    // no excitement across arms
    CHECK(env.reference.row(x_loss1, a_arm2).weight(win_state) == Catch::Approx(0.6));

    // every row has exactly two support states
    for (int x = 0; x < 20; ++x)
        for (int a = 0; a < 10; ++a) {
            int support = 0;
            for (int y = 0; y < 20; ++y)
                if (env.reference.row(x, a).weight(y) > 0.0) ++support;
            CHECK(support == 2);
        }

    // reward is the realized return, whatever was played
    for (int x = 0; x < 20; ++x)
        for (int a = 0; a < 10; ++a) CHECK(env.reward(x, a, loss_state) == -4.0);

    CHECK_THROWS_AS(bandit_env({0.95, 0.5}, 0.1, 0.5), std::invalid_argument);
}

TEST_CASE("return encoding thresholds") {
    const std::vector<double> raw = {0.015, 0.004, -0.004, -0.02, 0.0, 0.01, -0.01};
    const ReturnSeries s = encode_returns(raw, 0.01);
    CHECK(s.encoded == std::vector<int>{2, 1, -1, -2, 1, 1, -1});

    const std::vector<double> bad = {0.1, std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(encode_returns(bad, 0.01), std::invalid_argument);
    CHECK_THROWS_AS(encode_returns(raw, 0.0), std::invalid_argument);

    // encode(decode(.)) is the identity on already-encoded sequences
    std::vector<double> round(s.encoded.size());
    for (std::size_t i = 0; i < s.encoded.size(); ++i)
        round[i] = representative_return(s.encoded[i], 0.01);
    CHECK(encode_returns(round, 0.01).encoded == s.encoded);
}

TEST_CASE("empirical kernel counts windows and smooths unseen prefixes") {
    // constant series: the only seen window is (1,1)
    const ReturnSeries ones = ReturnSeries::from_encoded({1, 1, 1, 1, 1, 1});
    const Kernel k = empirical_kernel(ones, 2, 1e-9);
    const StateSpace states = stock::states(2);

    const int x_from_one = states.index_of({-2.0, 1.0});  // prefix pi(x) = (1)
    const int to_one = states.index_of({1.0, 1.0});
    REQUIRE(x_from_one >= 0);
    CHECK(k.row(x_from_one, 0).weight(to_one) == Catch::Approx(1.0).margin(1e-8));

    // unseen prefix (2): exactly uniform over its class
    const int x_from_two = states.index_of({1.0, 2.0});
    for (int i = 0; i < 4; ++i) {
        const int target = states.index_of({2.0, static_cast<double>(kReturnAlphabet[static_cast<std::size_t>(i)])});
        CHECK(k.row(x_from_two, 0).weight(target) == 0.25);
    }

    // rows sum to one exactly by the smoothing identity
    for (int x = 0; x < states.size(); ++x) {
        double sum = 0.0;
        for (int y = 0; y < states.size(); ++y) sum += k.row(x, 0).weight(y);
        CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    }

    CHECK_THROWS_AS(empirical_kernel(ones, 2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(empirical_kernel(ReturnSeries::from_encoded({1}), 2, 1e-9),
                    std::invalid_argument);
}

TEST_CASE("empirical kernel matches an independent window counter") {
    Rng rng(123);
    const auto chain = oracles::SyntheticChain::make(3, rng);
    const std::vector<int> symbols = chain.simulate(800, rng);
    const ReturnSeries series = ReturnSeries::from_encoded(symbols);
    const double kappa = 1e-6;
    const Kernel k = empirical_kernel(series, 3, kappa);
    const StateSpace states = stock::states(3);
    const auto counts = oracles::count_windows(symbols, 3);

    for (int x = 0; x < states.size(); ++x) {
        const int prefix = x % 16;
        double total = kappa;
        for (double c : counts[static_cast<std::size_t>(prefix)]) total += c;
        for (int i = 0; i < 4; ++i) {
            const double expected =
                (counts[static_cast<std::size_t>(prefix)][static_cast<std::size_t>(i)] +
                 kappa / 4.0) /
                total;
            const int y = prefix * 4 + i;
            CHECK(k.row(x, 0).weight(y) == Catch::Approx(expected).margin(1e-12));
        }
    }
}

TEST_CASE("stock environment rewards correct predictions and confines support") {
    Rng rng(55);
    const auto chain = oracles::SyntheticChain::make(3, rng);
    const ReturnSeries series = ReturnSeries::from_encoded(chain.simulate(500, rng));
    const Environment env = stock_env(series, 3, 1e-9, 0.1);
    CHECK(env.n_states() == 64);
    CHECK(env.n_actions() == 4);
    CHECK(env.spec.setting == Setting::setting2);

    for (int x = 0; x < env.n_states(); ++x) {
        for (int a = 0; a < 4; ++a) {
            const double predicted = env.actions.action(a)[0];
            int support = 0;
            for (int y = 0; y < env.n_states(); ++y) {
                const double w = env.reference.row(x, a).weight(y);
                CHECK(env.reward(x, a, y) == (env.states.point(y)[2] == predicted ? 1.0 : 0.0));
                if (w > 0.0) {
                    ++support;
                    // carried-over prefix matches pi(x)
                    CHECK(env.states.point(y)[0] == env.states.point(x)[1]);
                    CHECK(env.states.point(y)[1] == env.states.point(x)[2]);
                }
            }
            CHECK(support <= 4);
        }
    }
}

TEST_CASE("heavy smoothing pushes rows to uniform") {
    const ReturnSeries series = ReturnSeries::from_encoded({1, 2, -1, -2, 1, 2, 1, 1, -1});
    const Kernel k = empirical_kernel(series, 2, 1e9);
    for (int x = 0; x < 16; ++x)
        for (int y = 0; y < 16; ++y) {
            const double w = k.row(x, 0).weight(y);
            if (w > 0.0) CHECK(w == Catch::Approx(0.25).margin(1e-6));
        }
}

TEST_CASE("rollouts accumulate rewards deterministically") {
    const Environment env = coin_toss_env(0.0);
    const int stay = env.actions.index_of({0.0});
    Policy zeros;
    zeros.action.assign(11, stay);
    for (double p : {0.1, 0.5, 0.9})
        CHECK(rollout(zeros, coin::kernel(p), env.reward, 5000, 7) == 0.0);

    // a single step from a point-mass kernel pays the single reward entry
    Kernel point(11, 3);
    for (int x = 0; x < 11; ++x)
        for (int a = 0; a < 3; ++a) point.set_row(x, a, Distribution::point_mass(9, 11));
    Policy up;
    up.action.assign(11, env.actions.index_of({1.0}));
    CHECK(rollout(up, point, env.reward, 1, 3, 4) == env.reward(4, up.action[4], 9));

    const double a = rollout(up, coin::kernel(0.4), env.reward, 10000, 21);
    const double b = rollout(up, coin::kernel(0.4), env.reward, 10000, 21);
    CHECK(a == b);
}

TEST_CASE("iid round moments match a long rollout") {
    const Environment env = coin_toss_env(0.0);
    const Policy pi = greedy_policy(value_iteration(env).q);
    const Kernel true_kernel = coin::kernel(0.35);
    const RoundMoments m = iid_round_moments(pi, true_kernel, env.reward);
    const long rounds = 200000;
    const double total = rollout(pi, true_kernel, env.reward, rounds, 12345);
    CHECK(std::abs(total - m.total_mean(rounds)) <= 4.0 * m.total_std(rounds));

    // degenerate case: never playing has zero mean and zero spread
    Policy zeros;
    zeros.action.assign(11, env.actions.index_of({0.0}));
    const RoundMoments z = iid_round_moments(zeros, true_kernel, env.reward);
    CHECK(z.mean == 0.0);
    CHECK(z.variance == 0.0);
    CHECK(z.total_std(rounds) == 0.0);

    // the shortcut refuses kernels whose rows differ
    const Environment bandit = bandit_env();
    Policy first;
    first.action.assign(20, 0);
    CHECK_THROWS_AS(iid_round_moments(first, bandit.reference, bandit.reward),
                    std::invalid_argument);
}
