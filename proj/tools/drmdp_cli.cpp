// Batch front end: exact robust solve, Q-learning runs, policy evaluation
// under misspecified kernels, Wasserstein distances, and the canned
// experiment recipes. JSON config in, JSON/CSV artifacts out.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drmdp/drmdp.hpp"

namespace fs = std::filesystem;
using namespace drmdp;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    bool seed_given = false;
    int threads = 1;
};

fs::path out_path(const GlobalOpts& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return fs::path(g.out_dir) / name;
}

std::string fmt(double v, const char* spec = "%.12g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

QTableMeta meta_for(const Environment& env, double tol) {
    return QTableMeta{env.spec.alpha, env.spec.epsilon, env.spec.q,
                      setting_to_string(env.spec.setting, env.spec.h), tol};
}

// ---------------------------------------------------------------------------
// solve / train / eval
// ---------------------------------------------------------------------------

int cmd_solve(const GlobalOpts& g) {
    const RunConfig cfg = parse_config_file(g.config_path);
    const Environment env = build_environment(cfg);
    const ViResult vi = value_iteration(env, cfg.tol, cfg.max_iter, g.threads);
    const Policy pi = greedy_policy(vi.q);

    write_qtable_json(out_path(g, "qtable.json").string(), env.states, env.actions, vi.q,
                      meta_for(env, cfg.tol));
    write_policy_csv(out_path(g, "policy.csv").string(), env.actions, pi);
    write_value_csv(out_path(g, "value.csv").string(), value_from_q(vi.q));
    std::cout << "solved in " << vi.iterations << " iterations, residual " << fmt(vi.residual)
              << "\n";
    return 0;
}

int cmd_train(const GlobalOpts& g) {
    RunConfig cfg = parse_config_file(g.config_path);
    if (g.seed_given) cfg.seed = g.seed;
    const Environment env = build_environment(cfg);
    const ViResult exact = value_iteration(env, cfg.tol, cfg.max_iter, g.threads);

    for (int replica = 0; replica < cfg.replicas; ++replica) {
        TrainConfig tc;
        tc.steps = cfg.steps;
        tc.seed = cfg.seed + static_cast<std::uint64_t>(replica);
        tc.x0 = cfg.x0;
        tc.schedule = Schedule(cfg.schedule_beta);
        tc.exploration = Exploration{cfg.eps_tilde, cfg.eps_decay};
        tc.robust = true;
        tc.lambda_cache = cfg.lambda_cache;
        tc.snapshot_interval = cfg.snapshot_interval;
        const TrainResult res = train(env, tc, &exact.q);

        const std::string suffix = "_seed" + std::to_string(tc.seed);
        write_qtable_json(out_path(g, "qtable" + suffix + ".json").string(), env.states,
                          env.actions, res.q, meta_for(env, 0.0));
        write_snapshots_csv(out_path(g, "snapshots" + suffix + ".csv").string(), res.snapshots);
        if (!res.snapshots.empty())
            std::cout << "seed " << tc.seed << ": final sup-norm error "
                      << fmt(res.snapshots.back().sup_norm_error) << "\n";
    }
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& policy_path, long rounds_flag,
             int seeds_flag) {
    RunConfig cfg = parse_config_file(g.config_path);
    if (g.seed_given) cfg.seed = g.seed;
    const Environment env = build_environment(cfg);
    const Policy pi = read_policy_csv(policy_path, env.actions);
    pi.validate(env.n_states(), env.n_actions());
    const Kernel true_kernel = build_true_kernel(cfg);
    const long rounds = rounds_flag > 0 ? rounds_flag : cfg.rounds;
    const int seeds = seeds_flag > 0 ? seeds_flag : cfg.replicas;

    std::vector<double> totals;
    for (int i = 0; i < seeds; ++i)
        totals.push_back(rollout(pi, true_kernel, env.reward, rounds,
                                 cfg.seed + static_cast<std::uint64_t>(i), cfg.x0));

    double mean = 0.0;
    for (double t : totals) mean += t;
    mean /= static_cast<double>(totals.size());
    double var = 0.0;
    for (double t : totals) var += (t - mean) * (t - mean);
    const double sample_std =
        totals.size() > 1 ? std::sqrt(var / static_cast<double>(totals.size() - 1)) : 0.0;

    auto out = detail::open_out(out_path(g, "report.csv").string());
    out << "seed,cumulative_reward\n";
    for (int i = 0; i < seeds; ++i)
        out << cfg.seed + static_cast<std::uint64_t>(i) << ","
            << detail::format_double(totals[static_cast<std::size_t>(i)]) << "\n";
    out << "mean," << detail::format_double(mean) << "\n";
    out << "sample_std," << detail::format_double(sample_std) << "\n";
    std::cout << "mean " << fmt(mean) << " +/- " << fmt(sample_std) << " over " << seeds
              << " seeds x " << rounds << " rounds\n";
    return 0;
}

// ---------------------------------------------------------------------------
// wasserstein
// ---------------------------------------------------------------------------

CostMatrix read_cost_csv(const std::string& path, int n) {
    auto in = detail::open_in(path);
    std::vector<double> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        for (const auto& field : detail::split(line, ',')) {
            double v;
            if (field == "inf") {
                v = kInfiniteCost;
            } else if (!detail::parse_double(field, v)) {
                throw std::invalid_argument("cost csv: bad entry: " + field);
            }
            entries.push_back(v);
        }
    }
    if (entries.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
        throw std::invalid_argument("cost csv: expected a " + std::to_string(n) + "x" +
                                    std::to_string(n) + " matrix");
    return CostMatrix(n, std::move(entries));
}

int cmd_wasserstein(const std::string& p_path, const std::string& q_path, int order,
                    const std::string& cost_path) {
    auto [ps, pw] = read_distribution_csv(p_path);
    auto [qs, qw] = read_distribution_csv(q_path);

    // sort both by support value, then require the supports to coincide
    auto sort_by_support = [](std::vector<double>& s, std::vector<double>& w) {
        std::vector<std::size_t> idx(s.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
        std::vector<double> s2, w2;
        for (std::size_t i : idx) {
            s2.push_back(s[i]);
            w2.push_back(w[i]);
        }
        s = std::move(s2);
        w = std::move(w2);
    };
    sort_by_support(ps, pw);
    sort_by_support(qs, qw);
    if (ps.size() != qs.size())
        throw std::invalid_argument("wasserstein: supports have different sizes");
    for (std::size_t i = 0; i < ps.size(); ++i)
        if (std::abs(ps[i] - qs[i]) > 1e-12)
            throw std::invalid_argument("wasserstein: supports do not match");

    const Distribution p(std::move(pw)), q(std::move(qw));
    double distance;
    if (!cost_path.empty()) {
        const CostMatrix cost = read_cost_csv(cost_path, static_cast<int>(ps.size()));
        distance = std::pow(w_distance_lp(p, q, cost).cost, 1.0 / static_cast<double>(order));
    } else if (order == 1) {
        distance = w_distance_1d(p, q, ps, 1);
    } else {
        std::vector<Point> pts;
        for (double s : ps) pts.push_back({s});
        const StateSpace states(std::move(pts));
        distance = std::pow(w_distance_lp(p, q, cost_c1(states, order)).cost,
                            1.0 / static_cast<double>(order));
    }
    std::cout << fmt(distance) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

constexpr std::array<std::array<double, 11>, 4> kCoinPolicyRows = {{
    {1, 1, 1, 1, 1, 0, -1, -1, -1, -1, -1},   // non-robust
    {1, 1, 1, 0, 0, 0, 0, 0, -1, -1, -1},     // eps = 0.5
    {1, 1, 0, 0, 0, 0, 0, 0, 0, -1, -1},      // eps = 1
    {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},        // eps = 2
}};
constexpr std::array<double, 4> kCoinEpsilons = {0.0, 0.5, 1.0, 2.0};
const std::array<std::string, 4> kCoinLabels = {"non-robust", "robust eps=0.5", "robust eps=1",
                                                "robust eps=2"};

constexpr std::array<double, 9> kTable2P = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
constexpr std::array<std::array<double, 9>, 4> kTable2Published = {{
    {-31386, -18438, -1567, 22892, 35082, 22956, -656, -18374, -31091},
    {-24728, 4554, 16491, 13323, 9920, 13170, 16825, 4451, -24427},
    {-8174, 15201, 11091, 4387, 2050, 4373, 11139, 15276, -7611},
    {0, 0, 0, 0, 0, 0, 0, 0, 0},
}};

constexpr std::array<std::array<double, 2>, 6> kTable4Pairs = {
    {{0.4, 0.6}, {0.45, 0.5}, {0.45, 0.55}, {0.6, 0.4}, {0.5, 0.5}, {0.55, 0.45}}};
constexpr std::array<double, 6> kTable4PublishedNonRobust = {122514, 30898, 74690, -47601, 30127,
                                                         -11515};
constexpr std::array<double, 6> kTable4PublishedRobust = {125290, 31045, 77086, -38322, 33982, -5880};

struct CoinSolution {
    std::vector<Policy> policies;
    std::vector<QTable> tables;
};

CoinSolution solve_coin_family(int threads) {
    CoinSolution out;
    for (double eps : kCoinEpsilons) {
        const ViResult vi = value_iteration(coin_toss_env(eps), 1e-10, 10000, threads);
        out.policies.push_back(greedy_policy(vi.q));
        out.tables.push_back(vi.q);
    }
    return out;
}

/// EXACT when each state matches or its top-two values are separated by less
/// than the tie tolerance (the published rows came from stochastic runs).
std::string table1_row_verdict(const Environment& env, const QTable& q, const Policy& pi,
                               const std::array<double, 11>& expected, int* mismatches) {
    *mismatches = 0;
    for (int x = 0; x < 11; ++x) {
        const double got = env.actions.action(pi.action[static_cast<std::size_t>(x)])[0];
        if (got == expected[static_cast<std::size_t>(x)]) continue;
        std::array<double, 3> row = {q(x, 0), q(x, 1), q(x, 2)};
        std::sort(row.begin(), row.end());
        if (row[2] - row[1] < 1e-6) continue;  // documented near-tie exemption
        ++*mismatches;
    }
    return *mismatches == 0 ? "EXACT" : "FAIL";
}

int cmd_reproduce_table1(const GlobalOpts& g) {
    const CoinSolution sol = solve_coin_family(g.threads);
    auto csv = detail::open_out(out_path(g, "table1.csv").string());
    csv << "strategy,s0,s1,s2,s3,s4,s5,s6,s7,s8,s9,s10,verdict\n";
    std::cout << "state:            ";
    for (int x = 0; x <= 10; ++x) std::cout << x << "\t";
    std::cout << "\n";
    int failures = 0;
    for (std::size_t row = 0; row < 4; ++row) {
        const Environment env = coin_toss_env(kCoinEpsilons[row]);
        int mismatches = 0;
        const std::string verdict = table1_row_verdict(env, sol.tables[row], sol.policies[row],
                                                       kCoinPolicyRows[row], &mismatches);
        if (verdict != "EXACT") ++failures;
        std::cout << kCoinLabels[row] << ":\t";
        csv << kCoinLabels[row];
        for (int x = 0; x <= 10; ++x) {
            const double a = env.actions.action(sol.policies[row].action[static_cast<std::size_t>(x)])[0];
            std::cout << a << "\t";
            csv << "," << fmt(a, "%g");
        }
        std::cout << verdict << "\n";
        csv << "," << verdict << "\n";
    }
    if (failures > 0) std::cout << failures << " row(s) off the published policies\n";
    return 0;
}

int cmd_reproduce_table2(const GlobalOpts& g) {
    const CoinSolution sol = solve_coin_family(g.threads);
    const Environment env = coin_toss_env(0.0);
    const long rounds = 100000;
    auto csv = detail::open_out(out_path(g, "table2.csv").string());
    csv << "strategy,p_true,total,expected_total,three_sigma,published_total,verdict\n";
    int failures = 0;
    for (std::size_t row = 0; row < 4; ++row) {
        for (std::size_t col = 0; col < kTable2P.size(); ++col) {
            const Kernel true_kernel = coin::kernel(kTable2P[col]);
            const std::uint64_t seed = g.seed + 100 * row + col;
            const double total =
                rollout(sol.policies[row], true_kernel, env.reward, rounds, seed);
            const RoundMoments m = iid_round_moments(sol.policies[row], true_kernel, env.reward);
            std::string verdict;
            if (row == 3) {
                verdict = total == 0.0 && m.mean == 0.0 ? "EXACT" : "FAIL";
            } else {
                verdict = std::abs(total - m.total_mean(rounds)) <= 3.0 * m.total_std(rounds)
                              ? "PASS-3sigma"
                              : "FAIL-3sigma";
            }
            if (verdict.rfind("FAIL", 0) == 0) ++failures;
            csv << kCoinLabels[row] << "," << fmt(kTable2P[col], "%g") << "," << fmt(total, "%g")
                << "," << fmt(m.total_mean(rounds)) << "," << fmt(3.0 * m.total_std(rounds))
                << "," << fmt(kTable2Published[row][col], "%g") << "," << verdict << "\n";
            std::cout << kCoinLabels[row] << " p=" << kTable2P[col] << ": total " << total
                      << " expected " << fmt(m.total_mean(rounds), "%.1f") << " +/- "
                      << fmt(3.0 * m.total_std(rounds), "%.1f") << " [published "
                      << kTable2Published[row][col] << " INFO] " << verdict << "\n";
        }
    }
    if (failures > 0) std::cout << failures << " cell(s) outside the 3-sigma bands\n";
    return 0;
}

int cmd_reproduce_table4(const GlobalOpts& g) {
    const ViResult robust_vi = value_iteration(bandit_env({0.4, 0.6}, 0.1, 0.5), 1e-10, 10000,
                                               g.threads);
    const ViResult plain_vi = value_iteration(bandit_env({0.4, 0.6}, 0.1, 0.0), 1e-10, 10000,
                                              g.threads);
    const Environment base = bandit_env({0.4, 0.6}, 0.1, 0.0);
    const Policy robust_pi = greedy_policy(robust_vi.q);
    const Policy plain_pi = greedy_policy(plain_vi.q);

    auto mean_invested = [&](const Policy& pi) {
        double s = 0.0;
        for (int x = 0; x < 20; ++x) s += base.actions.action(pi.action[static_cast<std::size_t>(x)])[0];
        return s / 20.0;
    };
    const double robust_stake = mean_invested(robust_pi);
    const double plain_stake = mean_invested(plain_pi);
    const bool stake_ok = robust_stake <= plain_stake;

    auto csv = detail::open_out(out_path(g, "table4.csv").string());
    csv << "p1_true,p2_true,robust_total,non_robust_total,robust_exact_per_round,"
           "non_robust_exact_per_round,published_robust,published_non_robust,verdict\n";
    std::cout << "mean invested amount: robust " << robust_stake << " vs non-robust "
              << plain_stake << " [published 2.8 vs 3.3 INFO] " << (stake_ok ? "PASS" : "FAIL")
              << "\n";

    int failures = stake_ok ? 0 : 1;
    const long rounds = 100000;
    for (std::size_t i = 0; i < kTable4Pairs.size(); ++i) {
        const auto [p1, p2] = kTable4Pairs[i];
        const Kernel true_kernel = bandit_env({p1, p2}, 0.1, 0.0).reference;
        const double robust_total = rollout(robust_pi, true_kernel, base.reward, rounds,
                                            g.seed + 1000 + i);
        const double plain_total = rollout(plain_pi, true_kernel, base.reward, rounds,
                                           g.seed + 2000 + i);
        const double robust_exact = average_reward_exact(true_kernel, base.reward, robust_pi, 0);
        const double plain_exact = average_reward_exact(true_kernel, base.reward, plain_pi, 0);

        // the misspecified pairs are the ordering checks; the rest is INFO
        const bool checked = (p1 == 0.6 && p2 == 0.4) || (p1 == 0.55 && p2 == 0.45);
        std::string verdict = "INFO";
        if (checked) {
            verdict = robust_exact > plain_exact ? "PASS" : "FAIL";
            if (verdict == "FAIL") ++failures;
        }
        csv << fmt(p1, "%g") << "," << fmt(p2, "%g") << "," << fmt(robust_total, "%g") << ","
            << fmt(plain_total, "%g") << "," << fmt(robust_exact) << "," << fmt(plain_exact)
            << "," << fmt(kTable4PublishedRobust[i], "%g") << ","
            << fmt(kTable4PublishedNonRobust[i], "%g") << "," << verdict << "\n";
        std::cout << "(" << p1 << "," << p2 << "): robust " << robust_total << " non-robust "
                  << plain_total << " exact/round " << fmt(robust_exact, "%.4f") << " vs "
                  << fmt(plain_exact, "%.4f") << " [published " << kTable4PublishedRobust[i] << " vs "
                  << kTable4PublishedNonRobust[i] << " INFO] " << verdict << "\n";
    }
    if (failures > 0)
        std::cout << failures << " ordering check(s) FAIL: the exact solutions do not show the "
                     "published trained-run ordering\n";
    return 0;
}

int cmd_reproduce_table5(const GlobalOpts& g, const std::string& returns_csv, int eval_window) {
    if (returns_csv.empty())
        throw std::invalid_argument(
            "table5 needs the daily returns file: rerun with --returns-csv PATH (one return per "
            "line, or date,return rows; decimal fractions). The published accuracies came from a "
            "proprietary price history that is not bundled; results are reported as INFO only.");
    const int h = 5;
    const ReturnSeries full = encode_returns(read_returns_csv(returns_csv), 0.01);
    if (static_cast<int>(full.size()) < eval_window + h + 50)
        throw std::invalid_argument("table5: series too short for the evaluation window");

    const std::size_t n_train = full.size() - static_cast<std::size_t>(eval_window);
    std::vector<int> train_symbols(full.encoded.begin(),
                                   full.encoded.begin() + static_cast<long>(n_train));
    const ReturnSeries train_series = ReturnSeries::from_encoded(std::move(train_symbols));

    const Environment robust_env = stock_env(train_series, h, 1e-9, 0.1);
    const Environment plain_env = stock_env(train_series, h, 1e-9, 0.0);

    TrainConfig tc;
    tc.steps = 50000;
    tc.seed = g.seed;
    tc.x0 = stock::tuple_index(std::span<const int>(train_series.encoded).first(h));
    const Policy robust_pi = greedy_policy(train(robust_env, tc).q);
    const Policy plain_pi = greedy_policy(train(plain_env, tc).q);
    Policy trivial;
    trivial.action.assign(static_cast<std::size_t>(robust_env.n_states()),
                          robust_env.actions.index_of({-1.0}));

    auto accuracy = [&](const Policy& pi) {
        int correct = 0;
        for (std::size_t t = n_train; t < full.size(); ++t) {
            std::vector<int> window(full.encoded.begin() + static_cast<long>(t) - h,
                                    full.encoded.begin() + static_cast<long>(t));
            const int x = stock::tuple_index(window);
            const double predicted =
                robust_env.actions.action(pi.action[static_cast<std::size_t>(x)])[0];
            if (predicted == static_cast<double>(full.encoded[t])) ++correct;
        }
        return 100.0 * static_cast<double>(correct) / static_cast<double>(eval_window);
    };

    const double acc_plain = accuracy(plain_pi);
    const double acc_robust = accuracy(robust_pi);
    const double acc_trivial = accuracy(trivial);

    auto csv = detail::open_out(out_path(g, "table5.csv").string());
    csv << "strategy,accuracy_percent,published_accuracy_percent,verdict\n";
    csv << "non-robust," << fmt(acc_plain) << ",23.40,INFO\n";
    csv << "robust," << fmt(acc_robust) << ",28.72,INFO\n";
    csv << "trivial," << fmt(acc_trivial) << ",21.27,INFO\n";
    std::cout << "non-robust " << acc_plain << "% [published 23.40% INFO]\n"
              << "robust     " << acc_robust << "% [published 28.72% INFO]\n"
              << "trivial    " << acc_trivial << "% [published 21.27% INFO]\n"
              << "INFO only: published values depend on the proprietary return series.\n";
    return 0;
}

// ---------------------------------------------------------------------------

int dispatch(const std::string& table, const GlobalOpts& g, const std::string& returns_csv,
             int eval_window) {
    if (table == "table1") return cmd_reproduce_table1(g);
    if (table == "table2") return cmd_reproduce_table2(g);
    if (table == "table4") return cmd_reproduce_table4(g);
    if (table == "table5") return cmd_reproduce_table5(g, returns_csv, eval_window);
    throw std::invalid_argument("unknown table id: " + table +
                                " (expected table1, table2, table4 or table5)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-state distributionally robust MDP toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    std::string policy_path, table_id, returns_csv, p_path, q_path, cost_path;
    long rounds = 0;
    int seeds = 0, order = 1, eval_window = 100;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* copt = cmd->add_option("--config", g.config_path, "JSON run configuration");
        if (needs_config) copt->required();
        cmd->add_option("--out", g.out_dir, "output directory");
        cmd->add_option("--seed", g.seed, "base seed")->each([&](const std::string&) {
            g.seed_given = true;
        });
        cmd->add_option("--threads", g.threads, "worker threads for value iteration");
    };

    CLI::App* solve = app.add_subcommand("solve", "exact robust value iteration");
    add_common(solve, true);

    CLI::App* train_cmd = app.add_subcommand("train", "robust Q-learning runs");
    add_common(train_cmd, true);

    CLI::App* eval = app.add_subcommand("eval", "roll a policy under a true kernel");
    add_common(eval, true);
    eval->add_option("--policy", policy_path, "policy csv")->required();
    eval->add_option("--rounds", rounds, "rounds per seed");
    eval->add_option("--seeds", seeds, "number of seeds");

    CLI::App* rep = app.add_subcommand("reproduce", "regenerate a published experiment");
    add_common(rep, false);
    rep->add_option("table", table_id, "table1 | table2 | table4 | table5")->required();
    rep->add_option("--returns-csv", returns_csv, "daily returns file (table5)");
    rep->add_option("--eval-window", eval_window, "evaluation days at the end of the series");

    CLI::App* wass = app.add_subcommand("wasserstein", "distance between two distribution files");
    wass->add_option("--p", p_path, "first distribution csv")->required();
    wass->add_option("--q", q_path, "second distribution csv")->required();
    wass->add_option("--order", order, "Wasserstein order");
    wass->add_option("--cost", cost_path, "dense cost matrix csv (overrides the ground cost)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(g);
        if (train_cmd->parsed()) return cmd_train(g);
        if (eval->parsed()) return cmd_eval(g, policy_path, rounds, seeds);
        if (rep->parsed()) return dispatch(table_id, g, returns_csv, eval_window);
        if (wass->parsed()) return cmd_wasserstein(p_path, q_path, order, cost_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
