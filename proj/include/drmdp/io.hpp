#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "drmdp/dp.hpp"
#include "drmdp/envs.hpp"
#include "drmdp/qlearn.hpp"

namespace drmdp {

using nlohmann::json;

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open for reading: " + path);
    return in;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) parts.push_back(cur);
    return parts;
}

inline bool parse_double(const std::string& s, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

/// Reject keys outside the documented schema; silent typos in epsilon or
/// alpha would otherwise invalidate a whole experiment.
inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw std::invalid_argument("unknown key \"" + it.key() + "\" in " + where);
    }
}

}  // namespace detail

struct QTableMeta {
    double alpha = 0.45;
    double epsilon = 0.0;
    int q = 1;
    std::string setting = "setting1";
    double tol = 0.0;
};

struct QTableFile {
    std::vector<Point> states;
    std::vector<Point> actions;
    QTable q;
    QTableMeta meta;
};

inline void write_qtable_json(const std::string& path, const StateSpace& states,
                              const ActionSpace& actions, const QTable& q,
                              const QTableMeta& meta) {
    json j;
    j["states"] = states.points();
    j["actions"] = actions.actions();
    std::vector<double> flat(q.flat_values().begin(), q.flat_values().end());
    j["q"] = flat;
    j["meta"] = {{"alpha", meta.alpha},
                 {"epsilon", meta.epsilon},
                 {"q", meta.q},
                 {"setting", meta.setting},
                 {"tol", meta.tol}};
    auto out = detail::open_out(path);
    out << j.dump(2) << "\n";
}

inline QTableFile read_qtable_json(const std::string& path) {
    auto in = detail::open_in(path);
    json j = json::parse(in);
    detail::reject_unknown_keys(j, {"states", "actions", "q", "meta"}, path);
    QTableFile f;
    f.states = j.at("states").get<std::vector<Point>>();
    f.actions = j.at("actions").get<std::vector<Point>>();
    const auto flat = j.at("q").get<std::vector<double>>();
    const int nx = static_cast<int>(f.states.size());
    const int na = static_cast<int>(f.actions.size());
    if (flat.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(na))
        throw std::invalid_argument("q-table json: matrix shape mismatch in " + path);
    f.q = QTable(nx, na);
    for (int x = 0; x < nx; ++x)
        for (int a = 0; a < na; ++a)
            f.q.at(x, a) = flat[static_cast<std::size_t>(x) * static_cast<std::size_t>(na) +
                                static_cast<std::size_t>(a)];
    const json& m = j.at("meta");
    detail::reject_unknown_keys(m, {"alpha", "epsilon", "q", "setting", "tol"}, path + " meta");
    f.meta.alpha = m.at("alpha").get<double>();
    f.meta.epsilon = m.at("epsilon").get<double>();
    f.meta.q = m.at("q").get<int>();
    f.meta.setting = m.at("setting").get<std::string>();
    f.meta.tol = m.value("tol", 0.0);
    return f;
}

/// Multi-component action values are joined with ';' inside the CSV field.
inline std::string action_value_string(const Point& a) {
    std::string s;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) s += ';';
        s += detail::format_double(a[i]);
    }
    return s;
}

inline void write_policy_csv(const std::string& path, const ActionSpace& actions,
                             const Policy& policy) {
    auto out = detail::open_out(path);
    out << "state_index,action_value\n";
    for (std::size_t x = 0; x < policy.action.size(); ++x)
        out << x << "," << action_value_string(actions.action(policy.action[x])) << "\n";
}

inline Policy read_policy_csv(const std::string& path, const ActionSpace& actions) {
    auto in = detail::open_in(path);
    std::string line;
    Policy pi;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("state_index", 0) == 0) continue;
        }
        const auto parts = detail::split(line, ',');
        if (parts.size() != 2) throw std::invalid_argument("policy csv: bad line: " + line);
        Point a;
        for (const auto& comp : detail::split(parts[1], ';')) {
            double v;
            if (!detail::parse_double(comp, v))
                throw std::invalid_argument("policy csv: bad action value: " + parts[1]);
            a.push_back(v);
        }
        const int idx = actions.index_of(a);
        if (idx < 0)
            throw std::invalid_argument("policy csv: action not in the action space: " + parts[1]);
        pi.action.push_back(idx);
    }
    return pi;
}

inline void write_value_csv(const std::string& path, std::span<const double> v) {
    auto out = detail::open_out(path);
    out << "state_index,value\n";
    for (std::size_t x = 0; x < v.size(); ++x)
        out << x << "," << detail::format_double(v[x]) << "\n";
}

inline void write_snapshots_csv(const std::string& path, std::span<const Snapshot> snaps) {
    auto out = detail::open_out(path);
    out << "t,sup_norm_error,epsilon_greedy,seed\n";
    for (const Snapshot& s : snaps)
        out << s.t << "," << detail::format_double(s.sup_norm_error) << ","
            << detail::format_double(s.eps_tilde) << "," << s.seed << "\n";
}

/// One `support_value,weight` pair per line; header optional.
inline std::pair<std::vector<double>, std::vector<double>> read_distribution_csv(
    const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    std::vector<double> support, weights;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto parts = detail::split(line, ',');
        if (parts.size() != 2)
            throw std::invalid_argument("distribution csv: expected support_value,weight: " + line);
        double s, w;
        if (!detail::parse_double(parts[0], s) || !detail::parse_double(parts[1], w)) {
            if (support.empty()) continue;  // header line
            throw std::invalid_argument("distribution csv: bad line: " + line);
        }
        support.push_back(s);
        weights.push_back(w);
    }
    if (support.empty()) throw std::invalid_argument("distribution csv: no data in " + path);
    return {std::move(support), std::move(weights)};
}

/**
 * Daily returns as decimal fractions, one row per day, either `return` or
 * `date,return`; a header is detected by failing to parse as a number.
 */
inline std::vector<double> read_returns_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    std::vector<double> returns;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto parts = detail::split(line, ',');
        const std::string& field = parts.size() >= 2 ? parts[1] : parts[0];
        double v;
        if (!detail::parse_double(field, v)) {
            if (first) {
                first = false;
                continue;
            }
            throw std::invalid_argument("returns csv: bad line: " + line);
        }
        first = false;
        returns.push_back(v);
    }
    if (returns.empty()) throw std::invalid_argument("returns csv: no data in " + path);
    return returns;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    // environment block
    std::string env_type;                        // coin_toss | bandit | stock
    std::array<double, 2> bandit_p_hat = {0.4, 0.6};
    double bandit_lambda_excite = 0.1;
    std::string stock_returns_csv;
    std::vector<int> stock_series;               // inline alternative to the csv
    int stock_h = 5;
    double stock_kappa = 1e-9;
    double stock_threshold = 0.01;

    double alpha = 0.45;
    double epsilon = 0.0;
    int q = 1;
    std::optional<std::string> setting;          // derived from env when absent

    double schedule_beta = 1.0;
    double eps_tilde = 0.1;
    double eps_decay = 1.0;
    long steps = 50000;
    std::uint64_t seed = 1;
    int replicas = 1;
    int x0 = 0;
    double tol = 1e-10;
    int max_iter = 10000;
    long snapshot_interval = 1000;
    bool lambda_cache = false;

    // eval block
    std::optional<double> true_p;                // coin: Bin(10, p_true) rows
    std::optional<std::array<double, 2>> true_p_hat;  // bandit: replaces p_hat
    long rounds = 100000;
};

inline RunConfig parse_config(const json& j) {
    detail::reject_unknown_keys(
        j,
        {"environment", "alpha", "epsilon", "q", "setting", "schedule", "exploration", "steps",
         "seed", "replicas", "x0", "tol", "max_iter", "snapshot_interval", "lambda_cache",
         "true_kernel", "rounds"},
        "config");
    RunConfig cfg;

    const json& env = j.at("environment");
    detail::reject_unknown_keys(
        env, {"type", "p_hat", "lambda_excite", "returns_csv", "series", "h", "kappa", "threshold"},
        "config.environment");
    cfg.env_type = env.at("type").get<std::string>();
    if (cfg.env_type != "coin_toss" && cfg.env_type != "bandit" && cfg.env_type != "stock")
        throw std::invalid_argument("config: unknown environment type \"" + cfg.env_type + "\"");
    if (env.contains("p_hat")) {
        const auto v = env.at("p_hat").get<std::vector<double>>();
        if (v.size() != 2) throw std::invalid_argument("config: p_hat needs two entries");
        cfg.bandit_p_hat = {v[0], v[1]};
    }
    if (env.contains("lambda_excite")) cfg.bandit_lambda_excite = env.at("lambda_excite").get<double>();
    if (env.contains("returns_csv")) cfg.stock_returns_csv = env.at("returns_csv").get<std::string>();
    if (env.contains("series")) cfg.stock_series = env.at("series").get<std::vector<int>>();
    if (env.contains("h")) cfg.stock_h = env.at("h").get<int>();
    if (env.contains("kappa")) cfg.stock_kappa = env.at("kappa").get<double>();
    if (env.contains("threshold")) cfg.stock_threshold = env.at("threshold").get<double>();

    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
    if (j.contains("q")) cfg.q = j.at("q").get<int>();
    if (j.contains("setting")) cfg.setting = j.at("setting").get<std::string>();
    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        detail::reject_unknown_keys(s, {"family", "beta"}, "config.schedule");
        if (s.contains("family") && s.at("family").get<std::string>() != "inv_visits")
            throw std::invalid_argument("config: unknown schedule family");
        if (s.contains("beta")) cfg.schedule_beta = s.at("beta").get<double>();
    }
    if (j.contains("exploration")) {
        const json& e = j.at("exploration");
        detail::reject_unknown_keys(e, {"eps_tilde", "decay"}, "config.exploration");
        if (e.contains("eps_tilde")) cfg.eps_tilde = e.at("eps_tilde").get<double>();
        if (e.contains("decay")) cfg.eps_decay = e.at("decay").get<double>();
    }
    if (j.contains("steps")) cfg.steps = j.at("steps").get<long>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("replicas")) cfg.replicas = j.at("replicas").get<int>();
    if (j.contains("x0")) cfg.x0 = j.at("x0").get<int>();
    if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
    if (j.contains("max_iter")) cfg.max_iter = j.at("max_iter").get<int>();
    if (j.contains("snapshot_interval")) cfg.snapshot_interval = j.at("snapshot_interval").get<long>();
    if (j.contains("lambda_cache")) cfg.lambda_cache = j.at("lambda_cache").get<bool>();
    if (j.contains("rounds")) cfg.rounds = j.at("rounds").get<long>();
    if (j.contains("true_kernel")) {
        const json& t = j.at("true_kernel");
        detail::reject_unknown_keys(t, {"p_true", "p_hat"}, "config.true_kernel");
        if (t.contains("p_true")) cfg.true_p = t.at("p_true").get<double>();
        if (t.contains("p_hat")) {
            const auto v = t.at("p_hat").get<std::vector<double>>();
            if (v.size() != 2) throw std::invalid_argument("config: true_kernel.p_hat needs two entries");
            cfg.true_p_hat = std::array<double, 2>{v[0], v[1]};
        }
    }

    if (!(cfg.eps_tilde >= 0.0 && cfg.eps_tilde <= 1.0))
        throw std::invalid_argument("config: eps_tilde must lie in [0,1]");
    if (!(cfg.eps_decay > 0.0 && cfg.eps_decay <= 1.0))
        throw std::invalid_argument("config: exploration decay must lie in (0,1]");
    if (cfg.steps < 0) throw std::invalid_argument("config: steps must be >= 0");
    if (cfg.replicas < 1) throw std::invalid_argument("config: replicas must be >= 1");
    if (cfg.rounds < 0) throw std::invalid_argument("config: rounds must be >= 0");
    Schedule(cfg.schedule_beta);  // validates beta
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    auto in = detail::open_in(path);
    json j = json::parse(in);
    return parse_config(j);
}

inline ReturnSeries load_series(const RunConfig& cfg) {
    if (!cfg.stock_series.empty())
        return ReturnSeries::from_encoded(cfg.stock_series, cfg.stock_threshold);
    if (cfg.stock_returns_csv.empty())
        throw std::invalid_argument(
            "config: stock environment needs environment.returns_csv or environment.series");
    return encode_returns(read_returns_csv(cfg.stock_returns_csv), cfg.stock_threshold);
}

inline Environment build_environment(const RunConfig& cfg) {
    Environment env = [&] {
        if (cfg.env_type == "coin_toss") return coin_toss_env(cfg.epsilon, cfg.alpha);
        if (cfg.env_type == "bandit")
            return bandit_env(cfg.bandit_p_hat, cfg.bandit_lambda_excite, cfg.epsilon, cfg.alpha);
        return stock_env(load_series(cfg), cfg.stock_h, cfg.stock_kappa, cfg.epsilon, cfg.alpha);
    }();
    env.spec.q = cfg.q;
    if (cfg.setting) {
        const auto [s, h] = setting_from_string(*cfg.setting);
        const Setting derived = env.spec.setting;
        const bool compatible =
            (derived == Setting::setting2 && s == Setting::setting2 && h == env.spec.h) ||
            (derived == Setting::setting1 && (s == Setting::setting1 || s == Setting::none));
        if (!compatible)
            throw std::invalid_argument("config: setting \"" + *cfg.setting +
                                        "\" does not match the environment");
        if (s == Setting::none && env.spec.epsilon != 0.0)
            throw std::invalid_argument("config: setting \"none\" requires epsilon = 0");
    }
    env.validate();
    return env;
}

/// The kernel the evaluation rollouts draw from, per the true_kernel block.
inline Kernel build_true_kernel(const RunConfig& cfg) {
    if (cfg.env_type == "coin_toss") {
        if (!cfg.true_p) throw std::invalid_argument("config: true_kernel.p_true required");
        return coin::kernel(*cfg.true_p);
    }
    if (cfg.env_type == "bandit") {
        if (!cfg.true_p_hat) throw std::invalid_argument("config: true_kernel.p_hat required");
        return bandit_env(*cfg.true_p_hat, cfg.bandit_lambda_excite, 0.0, cfg.alpha).reference;
    }
    throw std::invalid_argument("config: true_kernel is only defined for coin_toss and bandit");
}

}  // namespace drmdp
