// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#include "babc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "babc/agent.hpp"
#include "babc/csv.hpp"
#include "babc/errors.hpp"
#include "babc/hmc.hpp"
#include "babc/model.hpp"
#include "babc/oracle.hpp"
#include "babc/rng.hpp"
#include "babc/smc.hpp"

namespace babc {

namespace {

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) parts.push_back(cur);
    return parts;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    for (const std::string& part : split(s, ',')) {
        const std::string t = trimmed(part);
        if (t.empty()) continue;
        try {
            std::size_t pos = 0;
            const int v = std::stoi(t, &pos);
            if (pos != t.size()) throw std::invalid_argument(t);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError(std::string("invalid ") + what + " entry: '" + t +
                              "'");
        }
    }
    if (out.empty())
        throw ConfigError(std::string("empty ") + what + " list");
    return out;
}

/// Parses one side of an event term: "theta_<k>" with 1-based k.
int parse_theta_index(const std::string& term, int d) {
    const std::string t = trimmed(term);
    if (t.rfind("theta_", 0) != 0)
        throw ConfigError("event term must look like theta_i>theta_j, got '" +
                          t + "'");
    int k = 0;
    try {
        std::size_t pos = 0;
        k = std::stoi(t.substr(6), &pos);
        if (pos != t.size() - 6) throw std::invalid_argument(t);
    } catch (const std::exception&) {
        throw ConfigError("invalid parameter index in event term '" + t + "'");
    }
    if (k < 1 || k > d)
        throw ConfigError("event index " + std::to_string(k) +
                          " outside 1.." + std::to_string(d));
    return k - 1;
}

Event parse_event(const std::string& spec, int d) {
    Event ev;
    for (const std::string& part : split(spec, ',')) {
        const std::string t = trimmed(part);
        if (t.empty()) continue;
        const auto gt = t.find('>');
        if (gt == std::string::npos)
            throw ConfigError("event term must contain '>': '" + t + "'");
        const int i = parse_theta_index(t.substr(0, gt), d);
        const int j = parse_theta_index(t.substr(gt + 1), d);
        const Event one = greater_event(i, j, d);
        ev.insert(ev.end(), one.begin(), one.end());
    }
    return ev;
}

std::vector<std::string> theta_header(const std::string& prefix, int d) {
    std::vector<std::string> cells(prefix.empty() ? 0 : 1);
    if (!prefix.empty()) cells[0] = prefix;
    for (int j = 1; j <= d; ++j) cells.push_back("theta_" + std::to_string(j));
    return cells;
}

std::string join_path(const std::string& dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw ConfigError("cannot create output directory '" + dir +
                          "': " + ec.message());
}

/// The r1..r4 of a five-state environment spec, if it is one.
std::optional<std::array<double, 4>> five_state_rewards(const std::string& env) {
    if (env.rfind("five_state:", 0) != 0) return std::nullopt;
    const auto parts = split(env.substr(11), ',');
    if (parts.size() != 4) return std::nullopt;
    std::array<double, 4> r{};
    for (int k = 0; k < 4; ++k) {
        try {
            std::size_t pos = 0;
            r[k] = std::stod(trimmed(parts[k]), &pos);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    return r;
}

SmcConfig smc_config_of(const RunConfig& cfg) {
    SmcConfig smc;
    smc.alpha = cfg.alpha;
    smc.gr_threshold = cfg.gr_threshold;
    smc.gr_majority = cfg.gr_majority;
    smc.n_m = cfg.n_m;
    smc.n_b = cfg.n_b;
    smc.hmc_max_steps = cfg.hmc_max_steps;
    smc.adaptive = (cfg.mode == "adaptive");
    return smc;
}

HmcPlan plan_of(const RunConfig& cfg) {
    HmcPlan plan;
    plan.delta_star = cfg.delta_star0;
    plan.l_star = cfg.l_star0;
    plan.max_steps = cfg.hmc_max_steps;
    return plan;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_offline(const RunConfig& cfg, const std::string& out_dir,
                 const std::string& data_path, int warmup_override) {
    const TabularMdp mdp = from_env_spec(cfg.env);
    const QIndex idx(mdp);
    const int d = idx.d_theta();
    if (d == 0)
        throw ConfigError(
            "environment has no nonterminal pairs; nothing to sample");
    ensure_out_dir(out_dir);

    const Dataset::Dedup mode = mdp.reward_noise_sd().has_value()
                                    ? Dataset::Dedup::Multiset
                                    : Dataset::Dedup::UniquePairs;
    const Dataset data =
        data_path.empty() ? Dataset(mode) : load_dataset(data_path, mdp);
    const Dataset empty(mode);

    const PriorSpec prior{cfg.prior_sigma, {}};
    const Tolerance eps = Tolerance::at(cfg.eps_target);
    Posterior post(mdp, idx, prior, data, empty,
                   ToleranceAssignment{eps, eps});

    HmcPlan plan = plan_of(cfg);
    plan.mass_diag.assign(d, 1.0);
    const int warmup =
        warmup_override >= 0 ? warmup_override : (cfg.hmc_max_steps + 4) / 5;
    plan.max_steps = warmup + cfg.hmc_max_steps;

    Rng rng = substream(cfg.seed, "offline");
    const std::vector<double> theta0(d, 0.0);
    const ChainStats chain =
        hmc_chain(theta0, plan, cfg.delta_star0, cfg.l_star0, post, rng);
    if (chain.proposals > 0 &&
        static_cast<double>(chain.accepts) / chain.proposals < 0.01)
        std::fprintf(stderr,
                     "bellman-abc: warning: HMC acceptance below 1%%; "
                     "samples are unlikely to explore the posterior\n");

    CsvWriter w(join_path(out_dir, "samples.csv"));
    w.row(theta_header("sample_index", d));
    for (int m = warmup; m < chain.n_samples; ++m) {
        std::vector<std::string> cells;
        cells.reserve(static_cast<std::size_t>(d) + 1);
        cells.push_back(CsvWriter::num(static_cast<std::int64_t>(m - warmup + 1)));
        const double* th = chain.sample(m);
        for (int j = 0; j < d; ++j) cells.push_back(CsvWriter::num(th[j]));
        w.row(cells);
    }
    w.close();
}

void cmd_online(const RunConfig& cfg, const std::string& out_dir,
                int particle_stride) {
    const TabularMdp mdp = from_env_spec(cfg.env);
    const QIndex idx(mdp);
    const int d = idx.d_theta();
    ensure_out_dir(out_dir);

    OnlineConfig oc;
    oc.n_particles = cfg.n_particles;
    oc.prior = PriorSpec{cfg.prior_sigma, {}};
    oc.eps_target = cfg.eps_target;
    oc.episodes = cfg.episodes;
    oc.smc = smc_config_of(cfg);
    oc.plan = plan_of(cfg);
    oc.seed = cfg.seed;

    CsvWriter parts(join_path(out_dir, "particles.csv"));
    {
        std::vector<std::string> head = {"episode", "particle", "weight"};
        for (int j = 1; j <= d; ++j)
            head.push_back("theta_" + std::to_string(j));
        parts.row(head);
    }
    const auto observer = [&](int e, const ParticleSet& ps) {
        if (particle_stride <= 0) return;
        if (e % particle_stride != 0 && e != cfg.episodes) return;
        const std::vector<double> w = normalized_weights(ps);
        for (int i = 0; i < ps.n; ++i) {
            std::vector<std::string> cells;
            cells.reserve(static_cast<std::size_t>(d) + 3);
            cells.push_back(CsvWriter::num(static_cast<std::int64_t>(e)));
            cells.push_back(CsvWriter::num(static_cast<std::int64_t>(i)));
            cells.push_back(CsvWriter::num(w[i]));
            const double* th = ps.theta(i);
            for (int j = 0; j < d; ++j) cells.push_back(CsvWriter::num(th[j]));
            parts.row(cells);
        }
    };

    const OnlineResult res = run_online(mdp, oc, observer);

    CsvWriter eps(join_path(out_dir, "episodes.csv"));
    eps.row({"episode", "steps", "return", "regret", "cumulative_regret"});
    for (const EpisodeLog& log : res.logs)
        eps.row({CsvWriter::num(static_cast<std::int64_t>(log.episode)),
                 CsvWriter::num(static_cast<std::int64_t>(log.steps)),
                 CsvWriter::num(log.ret), CsvWriter::num(log.regret),
                 CsvWriter::num(log.cumulative_regret)});
    eps.close();

    CsvWriter trace(join_path(out_dir, "trace.csv"));
    trace.row({"update_index", "stage", "eps_old", "eps_new", "ess",
               "resampled", "gr_pass_fraction", "bellman_error",
               "accept_rate"});
    for (const TraceRow& row : res.trace)
        trace.row({CsvWriter::num(static_cast<std::uint64_t>(row.update_index)),
                   stage_name(row.stage), CsvWriter::num(row.eps_old),
                   CsvWriter::num(row.eps_new), CsvWriter::num(row.ess),
                   CsvWriter::num(static_cast<std::int64_t>(row.resampled ? 1 : 0)),
                   CsvWriter::num(row.gr_pass_fraction),
                   CsvWriter::num(row.bellman_error),
                   CsvWriter::num(row.accept_rate)});
    trace.close();
    parts.close();

    if (res.aborted) throw DegeneracyError(res.abort_reason);
}

void cmd_oracle(const RunConfig& cfg, const std::string& event_spec,
                bool closed_form, int n_mc, const std::string& data_path) {
    const TabularMdp mdp = from_env_spec(cfg.env);
    const QIndex idx(mdp);
    const int d = idx.d_theta();

    const Dataset data =
        data_path.empty() ? complete_dataset(mdp) : load_dataset(data_path, mdp);
    const Event ev = parse_event(event_spec, d);

    Rng rng = substream(cfg.seed, "oracle");
    const EventEstimate est =
        event_probability(mdp, idx, data, cfg.prior_sigma, cfg.eps_target, ev,
                          n_mc, rng);
    std::printf("probability %s\n", CsvWriter::num(est.probability).c_str());
    std::printf("std_error %s\n", CsvWriter::num(est.std_error).c_str());

    if (closed_form) {
        const auto r = five_state_rewards(cfg.env);
        if (!r)
            throw ConfigError(
                "--closed-form requires a five_state:r1,r2,r3,r4 environment");
        const double p = five_state_choice_probability(
            (*r)[0], (*r)[1], (*r)[2], (*r)[3], cfg.prior_sigma,
            cfg.eps_target);
        std::printf("closed_form %s\n", CsvWriter::num(p).c_str());
    }
}

void cmd_benchmark(const RunConfig& cfg, const std::string& out_dir,
                   const std::string& depths_str,
                   const std::string& seeds_str) {
    const std::vector<int> depths = parse_int_list(depths_str, "depth");
    const std::vector<int> seeds = parse_int_list(seeds_str, "seed");
    for (int d : depths)
        if (d < 1) throw ConfigError("depths must be at least 1");
    ensure_out_dir(out_dir);

    CsvWriter w(join_path(out_dir, "learning_time.csv"));
    w.row({"depth", "seed", "learning_time", "episodes_run"});

    std::vector<std::pair<int, double>> medians;
    for (int depth : depths) {
        std::vector<double> lts;
        for (int seed : seeds) {
            std::optional<int> lt;
            std::size_t episodes_run = 0;
            try {
                const TabularMdp mdp = deep_sea(depth);
                OnlineConfig oc;
                oc.n_particles = cfg.n_particles;
                oc.prior = PriorSpec{cfg.prior_sigma, {}};
                oc.eps_target = cfg.eps_target;
                oc.episodes = cfg.episodes;
                oc.smc = smc_config_of(cfg);
                oc.plan = plan_of(cfg);
                oc.seed = static_cast<std::uint64_t>(seed);
                const OnlineResult res = run_online(mdp, oc);
                episodes_run = res.logs.size();
                lt = learning_time(res.logs);
            } catch (const Error& err) {
                std::fprintf(stderr,
                             "bellman-abc: depth %d seed %d failed: %s\n",
                             depth, seed, err.what());
            }
            w.row({CsvWriter::num(static_cast<std::int64_t>(depth)),
                   CsvWriter::num(static_cast<std::int64_t>(seed)),
                   lt ? CsvWriter::num(static_cast<std::int64_t>(*lt))
                      : std::string(),
                   CsvWriter::num(static_cast<std::int64_t>(episodes_run))});
            if (lt) lts.push_back(static_cast<double>(*lt));
        }
        if (!lts.empty()) {
            std::sort(lts.begin(), lts.end());
            const std::size_t n = lts.size();
            const double med = (n % 2 == 1)
                                   ? lts[n / 2]
                                   : 0.5 * (lts[n / 2 - 1] + lts[n / 2]);
            medians.emplace_back(depth, med);
        }
    }
    w.close();

    // Log-log fit of median learning time against depth.
    std::vector<std::pair<double, double>> pts;
    for (const auto& [depth, med] : medians)
        if (depth > 0 && med > 0.0)
            pts.emplace_back(std::log(static_cast<double>(depth)),
                             std::log(med));
    if (pts.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (const auto& [x, y] : pts) {
            mx += x;
            my += y;
        }
        mx /= pts.size();
        my /= pts.size();
        double sxy = 0.0, sxx = 0.0;
        for (const auto& [x, y] : pts) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
        }
        if (sxx > 0.0) {
            std::printf("log_log_slope %s\n",
                        CsvWriter::num(sxy / sxx).c_str());
            return;
        }
    }
    std::printf("log_log_slope n/a\n");
}

} // namespace

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
    if (!j.is_object())
        throw ConfigError("config file '" + path +
                          "' must hold a single JSON object");
    RunConfig cfg;
    try {
        for (const auto& [key, val] : j.items()) {
            if (key == "env") cfg.env = val.get<std::string>();
            else if (key == "n_particles") cfg.n_particles = val.get<int>();
            else if (key == "prior_sigma") cfg.prior_sigma = val.get<double>();
            else if (key == "alpha") cfg.alpha = val.get<double>();
            else if (key == "eps_target") cfg.eps_target = val.get<double>();
            else if (key == "gr_threshold") cfg.gr_threshold = val.get<double>();
            else if (key == "gr_majority") cfg.gr_majority = val.get<double>();
            else if (key == "n_m") cfg.n_m = val.get<int>();
            else if (key == "n_b") cfg.n_b = val.get<int>();
            else if (key == "hmc_max_steps") cfg.hmc_max_steps = val.get<int>();
            else if (key == "delta_star0") cfg.delta_star0 = val.get<double>();
            else if (key == "l_star0") cfg.l_star0 = val.get<int>();
            else if (key == "episodes") cfg.episodes = val.get<int>();
            else if (key == "seed") cfg.seed = val.get<std::uint64_t>();
            else if (key == "mode") cfg.mode = val.get<std::string>();
            else
                throw ConfigError("config file '" + path +
                                  "': unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
    return cfg;
}

void validate_config(const RunConfig& cfg) {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (cfg.n_particles < 2)
        throw ConfigError("n_particles must be at least 2");
    if (!positive(cfg.prior_sigma))
        throw ConfigError("prior_sigma must be positive and finite");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw ConfigError("alpha must lie in (0, 1)");
    if (!positive(cfg.eps_target))
        throw ConfigError("eps_target must be positive and finite");
    if (!positive(cfg.gr_threshold))
        throw ConfigError("gr_threshold must be positive and finite");
    if (!(cfg.gr_majority >= 0.0 && cfg.gr_majority <= 1.0))
        throw ConfigError("gr_majority must lie in [0, 1]");
    if (cfg.n_m < 1) throw ConfigError("n_m must be at least 1");
    if (cfg.n_b < 1) throw ConfigError("n_b must be at least 1");
    if (cfg.hmc_max_steps < 1)
        throw ConfigError("hmc_max_steps must be at least 1");
    if (!positive(cfg.delta_star0))
        throw ConfigError("delta_star0 must be positive and finite");
    if (cfg.l_star0 < 1) throw ConfigError("l_star0 must be at least 1");
    if (cfg.episodes < 1) throw ConfigError("episodes must be at least 1");
    if (cfg.mode != "adaptive" && cfg.mode != "non_adaptive")
        throw ConfigError("mode must be 'adaptive' or 'non_adaptive'");
}

Dataset load_dataset(const std::string& path, const TabularMdp& mdp) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file '" + path + "'");
    Dataset data(mdp.reward_noise_sd().has_value()
                     ? Dataset::Dedup::Multiset
                     : Dataset::Dedup::UniquePairs);
    auto fail = [&](int line, const std::string& what) {
        throw ConfigError(path + ":" + std::to_string(line) + ": " + what);
    };
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trimmed(line);
        if (t.empty() || t[0] == '#') continue;
        if (!saw_header) {
            std::string squished;
            for (char c : t)
                if (c != ' ' && c != '\t') squished.push_back(c);
            if (squished != "s,a,r,s_next")
                fail(lineno, "expected header 's,a,r,s_next'");
            saw_header = true;
            continue;
        }
        const auto parts = split(t, ',');
        if (parts.size() != 4) fail(lineno, "expected 4 fields");
        int s = 0, label = 0, s_next = 0;
        double r = 0.0;
        try {
            std::size_t pos = 0;
            s = std::stoi(trimmed(parts[0]), &pos);
            label = std::stoi(trimmed(parts[1]), &pos);
            r = std::stod(trimmed(parts[2]), &pos);
            s_next = std::stoi(trimmed(parts[3]), &pos);
        } catch (const std::exception&) {
            fail(lineno, "malformed field");
        }
        if (s < 0 || s >= mdp.n_states()) fail(lineno, "state out of range");
        if (s_next < 0 || s_next >= mdp.n_states())
            fail(lineno, "successor state out of range");
        if (mdp.is_goal(s)) fail(lineno, "record at a goal state");
        if (!std::isfinite(r)) fail(lineno, "reward must be finite");
        const int a = mdp.action_position(s, label);
        if (a < 0) fail(lineno, "inadmissible action label");
        if (!data.add(Transition{s, a, r, s_next}))
            fail(lineno, "duplicate state-action pair");
    }
    if (!saw_header && lineno > 0)
        throw ConfigError(path + ": missing 's,a,r,s_next' header");
    return data;
}

Dataset complete_dataset(const TabularMdp& mdp) {
    Dataset data(Dataset::Dedup::UniquePairs);
    for (int s = 0; s < mdp.n_states(); ++s) {
        if (mdp.is_goal(s)) continue;
        for (int a = 0; a < mdp.n_actions(s); ++a) {
            const auto& act = mdp.action(s, a);
            int s_next = act.successors.front().first;
            double best = act.successors.front().second;
            for (const auto& [sp, p] : act.successors)
                if (p > best) {
                    best = p;
                    s_next = sp;
                }
            data.add(Transition{s, a, act.mean_reward, s_next});
        }
    }
    return data;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{
        "bellman-abc: Bayesian inference of optimal action values in "
        "goal-directed MDPs, with posterior-sampling exploration"};
    app.require_subcommand(1);

    std::string config_path, env, out_dir = ".", mode, data_path;
    std::string event_spec, depths_str = "3,4,5,6", seeds_str = "0,1,2,3,4";
    std::uint64_t seed = 0;
    int particles = 0, episodes = 0, warmup = -1, n_mc = 1000000;
    int particle_stride = 10;
    double eps_target = 0.0;
    bool closed_form = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--env", env, "environment spec: deep_sea:<d>, "
                                      "two_state, five_state:r1,r2,r3,r4");
        sub->add_option("--seed", seed, "master random seed");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--particles", particles, "particle count");
        sub->add_option("--eps-target", eps_target, "target bandwidth");
        sub->add_option("--mode", mode, "adaptive|non_adaptive");
    };

    CLI::App* off = app.add_subcommand(
        "offline", "HMC samples from the fixed-bandwidth posterior");
    add_common(off);
    off->add_option("--data", data_path, "dataset CSV (s,a,r,s_next)");
    off->add_option("--warmup", warmup, "discarded warmup steps");

    CLI::App* onl = app.add_subcommand(
        "online", "posterior-sampling exploration on an environment");
    add_common(onl);
    onl->add_option("--episodes", episodes, "episode count");
    onl->add_option("--particle-stride", particle_stride,
                    "episodes between particle snapshots (0: none)");

    CLI::App* orc = app.add_subcommand(
        "oracle", "exact posterior event probability (Monte-Carlo Gaussian)");
    add_common(orc);
    orc->add_option("--event", event_spec,
                    "comma-separated terms theta_i>theta_j (empty: whole "
                    "space)");
    orc->add_flag("--closed-form", closed_form,
                  "also print the five-state closed-form choice probability");
    orc->add_option("--n-mc", n_mc, "Monte-Carlo draws per assignment");
    orc->add_option("--data", data_path, "dataset CSV (default: complete)");

    CLI::App* ben = app.add_subcommand(
        "benchmark", "learning-time sweep over deep-sea depths");
    add_common(ben);
    ben->add_option("--episodes", episodes, "episode budget per run");
    ben->add_option("--depths", depths_str, "comma-separated depths");
    ben->add_option("--seeds", seeds_str, "comma-separated seeds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        CLI::App* sub = app.get_subcommands().front();
        const auto opt_count = [&](const std::string& name) -> std::size_t {
            const CLI::Option* o = sub->get_option_no_throw(name);
            return o ? o->count() : 0;
        };
        if (opt_count("--env")) cfg.env = env;
        if (opt_count("--seed")) cfg.seed = seed;
        if (opt_count("--particles")) cfg.n_particles = particles;
        if (opt_count("--eps-target")) cfg.eps_target = eps_target;
        if (opt_count("--mode")) cfg.mode = mode;
        if (opt_count("--episodes")) cfg.episodes = episodes;
        validate_config(cfg);

        if (off->parsed()) {
            cmd_offline(cfg, out_dir, data_path, warmup);
        } else if (onl->parsed()) {
            cmd_online(cfg, out_dir, particle_stride);
        } else if (orc->parsed()) {
            cmd_oracle(cfg, event_spec, closed_form, n_mc, data_path);
        } else if (ben->parsed()) {
            cmd_benchmark(cfg, out_dir, depths_str, seeds_str);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "bellman-abc: configuration error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "bellman-abc: numerical error: %s\n", e.what());
        return 3;
    } catch (const DegeneracyError& e) {
        std::fprintf(stderr, "bellman-abc: degeneracy: %s\n", e.what());
        return 4;
    }
}

} // namespace babc
