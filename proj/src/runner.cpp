#include "mufasa/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <ostream>
#include <thread>

#include "mufasa/error.hpp"
#include "mufasa/rng.hpp"

namespace mufasa {
namespace {

constexpr std::uint64_t kAgentStream = 0xa9e47;
constexpr std::uint64_t kDataStream = 0xda7a;

const std::vector<std::string> kAgentKinds{"mufasa", "neuucb", "linucb", "kerucb", "random"};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Per-bandit value: a single entry applies to every bandit.
template <class T>
std::vector<T> per_bandit(const std::vector<T>& v, std::size_t K, T fallback, const std::string& key) {
    if (v.empty()) return std::vector<T>(K, fallback);
    if (v.size() == 1) return std::vector<T>(K, v.front());
    if (v.size() != K) {
        throw ConfigError(key + ": expected 1 or " + std::to_string(K) + " values, got " + std::to_string(v.size()));
    }
    return v;
}

std::vector<std::uint64_t> to_seeds(const std::vector<std::size_t>& v) {
    return std::vector<std::uint64_t>(v.begin(), v.end());
}

// Neural agent settings: `<prefix>.key` overrides the shared top-level `key`.
MufasaConfig read_neural(const Config& c, const std::string& prefix, double default_c_bar) {
    auto key = [&](const std::string& k) { return c.has(prefix + "." + k) ? prefix + "." + k : k; };
    MufasaConfig m;
    m.sub_depth = c.get_size(key("depth"), m.sub_depth);
    m.sub_width = c.get_size(key("width"), m.sub_width);
    m.sub_depth = c.get_size(key("sub_depth"), m.sub_depth);
    m.sub_width = c.get_size(key("sub_width"), m.sub_width);
    m.shared_depth = c.get_size(key("shared_depth"), m.shared_depth);
    m.shared_width = c.get_size(key("shared_width"), m.shared_width);
    m.zero_init_mode = c.get_bool(key("zero_init_mode"), m.zero_init_mode);
    m.use_shared = c.get_bool(key("use_shared"), m.use_shared);
    m.lambda = c.get_double(key("lambda"), m.lambda);
    m.eta = c.get_double(key("eta"), m.eta);
    m.J = c.get_size(key("J"), m.J);
    m.train_every = c.get_size(key("train_every"), m.train_every);
    m.warm_start = c.get_bool(key("warm_start"), m.warm_start);
    m.normalize_loss = c.get_bool(key("normalize_loss"), m.normalize_loss);
    m.max_history = c.get_size(key("max_history"), m.max_history);
    m.recompute_design = c.get_bool(key("recompute_design"), m.recompute_design);
    m.combination_cap = c.get_size(key("combination_cap"), m.combination_cap);

    UcbConfig& u = m.ucb;
    if (const auto v = c.raw(key("ucb.mode"))) u.mode = parse_ucb_mode(*v);
    if (const auto v = c.raw(key("ucb.schedule"))) {
        const bool per_arm = u.schedule.per_arm;
        u.schedule = parse_schedule(*v);
        u.schedule.per_arm = per_arm;
    }
    u.schedule.per_arm = c.get_bool(key("ucb.per_arm"), u.schedule.per_arm);
    u.delta = c.get_double(key("ucb.delta"), u.delta);
    u.S = c.get_double(key("ucb.S"), u.S);
    u.c_L = c.get_double(key("ucb.c_L"), u.c_L);
    u.C1 = c.get_double(key("ucb.C1"), u.C1);
    u.C2 = c.get_double(key("ucb.C2"), u.C2);
    u.c_bar = c.get_double(key("c_bar"), default_c_bar);
    u.eta = m.eta;
    u.J = m.J;
    u.validate();
    return m;
}

}  // namespace

RunConfig parse_run_config(const Config& c, const std::filesystem::path& base_dir) {
    RunConfig rc;
    rc.T = c.get_size("T", rc.T);
    if (rc.T < 1) throw ConfigError("T (line " + std::to_string(c.line_of("T")) + "): must be at least 1");
    if (c.has("seeds")) rc.seeds = to_seeds(c.get_sizes("seeds"));
    if (rc.seeds.empty()) throw ConfigError("seeds: at least one seed is required");
    rc.outdir = c.get_string("outdir", rc.outdir.string());
    if (rc.outdir.is_relative()) rc.outdir = base_dir / rc.outdir;
    if (c.has("agents")) {
        rc.agents = c.get_list("agents");
    } else if (c.has("agent")) {
        rc.agents = {c.get_string("agent", "mufasa")};
    }
    if (rc.agents.empty()) throw ConfigError("agents: at least one agent is required");
    for (const std::string& a : rc.agents) {
        if (std::find(kAgentKinds.begin(), kAgentKinds.end(), a) == kAgentKinds.end()) {
            throw ConfigError("agents: unknown agent '" + a + "' (expected mufasa, neuucb, linucb, kerucb or random)");
        }
        if (std::count(rc.agents.begin(), rc.agents.end(), a) > 1) {
            throw ConfigError("agents: '" + a + "' listed twice");
        }
        if (c.has(a + ".seeds")) rc.agent_seeds[a] = to_seeds(c.get_sizes(a + ".seeds"));
    }

    // Environment.
    EnvSpec& e = rc.env;
    const std::size_t K = c.get_size("env.K", 2);
    if (K < 1) throw ConfigError("env.K: must be at least 1");
    std::vector<std::string> kinds = per_bandit(c.get_list("env.kind"), K, std::string("linear"), "env.kind");
    const std::vector<std::size_t> dims = per_bandit(c.get_sizes("env.dim"), K, std::size_t{10}, "env.dim");
    const std::vector<std::size_t> arms = per_bandit(c.get_sizes("env.arms"), K, std::size_t{10}, "env.arms");
    const std::vector<std::size_t> pools =
        per_bandit(c.get_sizes("env.pool_size"), K, std::size_t{0}, "env.pool_size");
    e.bandits.resize(K);
    bool any_dataset = false;
    for (std::size_t k = 0; k < K; ++k) {
        try {
            e.bandits[k].kind = parse_sub_reward(kinds[k]);
        } catch (const ConfigError& err) {
            throw ConfigError("env.kind (line " + std::to_string(c.line_of("env.kind")) + "): " + err.what());
        }
        e.bandits[k].dim = dims[k];
        e.bandits[k].arms = arms[k];
        e.bandits[k].pool_size = pools[k];
        if (e.bandits[k].kind == SubRewardKind::dataset) any_dataset = true;
    }
    try {
        e.final_kind = parse_final_reward(c.get_string("env.final", "h1_sum"));
    } catch (const ConfigError& err) {
        throw ConfigError("env.final (line " + std::to_string(c.line_of("env.final")) + "): " + err.what());
    }
    e.weights = c.get_doubles("env.weights");
    e.c_bar = c.get_double("env.c_bar", default_c_bar(e.final_kind, e.weights));
    e.noise_sigma = c.get_double("env.noise_sigma", 0.0);
    e.sub_noise_sigma = c.get_double("env.sub_noise_sigma", 0.0);
    const std::string mask = c.get_string("env.mask", "all");
    if (mask == "all") {
        e.mask = MaskKind::all;
    } else if (mask == "none") {
        e.mask = MaskKind::none;
    } else {
        e.mask = MaskKind::subset;
        for (std::size_t k : c.get_sizes("env.mask")) e.mask_subset.insert(k);
    }
    e.tradeoff = c.get_bool("env.tradeoff", false);

    if (c.has("env.dataset")) {
        std::filesystem::path p = c.get_string("env.dataset", "");
        if (p.is_relative()) p = base_dir / p;
        if (!std::filesystem::exists(p)) {
            throw ConfigError("env.dataset (line " + std::to_string(c.line_of("env.dataset")) + "): no such file " +
                              p.string());
        }
        rc.dataset = std::make_shared<const Dataset>(ingest_csv(p, c.get_size("env.classes", 0)));
    } else if (any_dataset) {
        rc.synthetic = true;
        SyntheticData& s = rc.synthetic_data;
        s.classes = c.get_size("env.classes", s.classes);
        s.dim = c.get_size("env.synthetic.dim", s.dim);
        s.rows = c.get_size("env.synthetic.rows", s.rows);
        s.spread = c.get_double("env.synthetic.spread", s.spread);
        if (s.classes < 2 || s.dim < 1 || s.rows < 1) {
            throw ConfigError("env.synthetic: need at least 2 classes, dim 1 and 1 row");
        }
    }

    rc.mufasa = read_neural(c, "mufasa", e.c_bar);
    rc.neuucb = read_neural(c, "neuucb", 1.0);
    rc.linucb.alpha = c.get_double("linucb.alpha", rc.linucb.alpha);
    rc.linucb.lambda = c.get_double("linucb.lambda", c.get_double("lambda", rc.linucb.lambda));
    rc.kerucb.bandwidth = c.get_double("kerucb.bandwidth", rc.kerucb.bandwidth);
    rc.kerucb.beta = c.get_double("kerucb.beta", rc.kerucb.beta);
    rc.kerucb.lambda = c.get_double("kerucb.lambda", c.get_double("lambda", rc.kerucb.lambda));
    rc.kerucb.budget = c.get_size("kerucb.budget", rc.kerucb.budget);
    rc.kerucb.jitter = c.get_double("kerucb.jitter", rc.kerucb.jitter);

    const std::vector<std::string> left = c.unused();
    if (!left.empty()) {
        throw ConfigError(left.front() + " (line " + std::to_string(c.line_of(left.front())) + "): unknown key");
    }
    // Validate the environment once with a placeholder dataset.
    EnvSpec probe = env_for_seed(rc, rc.seeds.front());
    probe.validate();
    rc.snapshot = c.snapshot();
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(Config::load(path), path.parent_path().empty() ? "." : path.parent_path());
}

EnvSpec env_for_seed(const RunConfig& rc, std::uint64_t seed) {
    EnvSpec e = rc.env;
    std::shared_ptr<const Dataset> data = rc.dataset;
    if (rc.synthetic) {
        const SyntheticData& s = rc.synthetic_data;
        data = std::make_shared<const Dataset>(
            synthetic_dataset(s.classes, s.dim, s.rows, s.spread, Rng::derive(seed, kDataStream)));
    }
    for (BanditEnvSpec& b : e.bandits) {
        if (b.kind == SubRewardKind::dataset) b.data = data;
    }
    return e;
}

std::unique_ptr<Policy> make_policy(const RunConfig& rc, const std::string& agent, const Environment& env,
                                    std::uint64_t seed) {
    std::vector<std::size_t> dims;
    for (const BanditEnvSpec& b : env.spec().bandits) dims.push_back(b.dim);
    const std::uint64_t s = Rng::derive(seed, kAgentStream);
    if (agent == "mufasa") return std::make_unique<MufasaAgent>(dims, rc.mufasa, s);
    if (agent == "neuucb") return std::make_unique<NeuUcbPolicy>(dims, rc.neuucb, s);
    if (agent == "linucb") return std::make_unique<LinUcbPolicy>(dims, rc.linucb);
    if (agent == "kerucb") return std::make_unique<KerUcbPolicy>(dims.size(), rc.kerucb);
    if (agent == "random") return std::make_unique<RandomPolicy>(s);
    throw ConfigError("unknown agent '" + agent + "'");
}

RunLog run_single(const RunConfig& rc, const std::string& agent, std::uint64_t seed, std::ostream* csv) {
    Environment env(env_for_seed(rc, seed), seed);
    std::unique_ptr<Policy> policy = make_policy(rc, agent, env, seed);
    RunLog log;
    log.agent = agent;
    log.seed = seed;
    log.config_snapshot = rc.snapshot;
    log.rounds.reserve(rc.T);
    if (csv) write_run_header(*csv);
    double cum = 0.0;
    for (std::size_t t = 0; t < rc.T; ++t) {
        const RoundArms round = env.gen_round(t);
        const Environment::Best best = env.oracle_best(round);
        const Selection sel = policy->select(round);
        const Observation obs = env.observe(t, sel.combination);

        RoundOutcome out;
        out.t = t;
        out.chosen = sel.combination;
        out.final_reward = obs.final_reward;
        out.sub_rewards = obs.sub_rewards;
        out.ucb = sel.ucb;
        out.predicted = sel.predicted;
        out.h_clean = obs.h_clean;
        out.h_star = best.value;
        out.regret = best.value - obs.h_clean;
        policy->observe(out);

        RoundRecord r;
        r.t = t + 1;
        r.choice = sel.arms;
        r.R = obs.final_reward;
        r.h_clean = obs.h_clean;
        r.h_star = best.value;
        r.regret = *out.regret;
        cum += r.regret;
        r.cum_regret = cum;
        r.ucb_width = sel.ucb.total;
        r.predicted = sel.predicted;
        r.branch = policy->last_branch();
        if (csv) write_run_row(*csv, r);
        log.rounds.push_back(std::move(r));
    }
    return log;
}

std::size_t thread_cap() {
    if (const char* v = std::getenv("MUFASA_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(v, &end, 10);
        if (*v != '\0' && *end == '\0' && n >= 1) return static_cast<std::size_t>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

MeanStd mean_std(const std::vector<double>& v) {
    MeanStd m;
    if (v.empty()) return m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - m.mean) * (x - m.mean);
        m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return m;
}

namespace {

struct Job {
    std::string agent;
    std::uint64_t seed;
};

std::vector<Job> jobs_for(const RunConfig& rc) {
    std::vector<Job> jobs;
    for (const std::string& a : rc.agents) {
        const auto it = rc.agent_seeds.find(a);
        for (std::uint64_t s : it == rc.agent_seeds.end() ? rc.seeds : it->second) jobs.push_back({a, s});
    }
    return jobs;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
}

}  // namespace

std::vector<RunLog> run_all(const RunConfig& rc) {
    std::filesystem::create_directories(rc.outdir);
    {
        Environment env(env_for_seed(rc, rc.seeds.front()), rc.seeds.front());
        const std::size_t bad = lipschitz_audit(env, rc.env.c_bar, 10000, 0);
        if (bad > 0) {
            std::cerr << "lipschitz audit: " << bad << " of 10000 pairs exceed c_bar = " << rc.env.c_bar
                      << " (tight constant " << tight_lipschitz(rc.env) << ")\n";
        }
    }

    const std::vector<Job> jobs = jobs_for(rc);
    std::vector<RunLog> logs(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const std::filesystem::path p = rc.outdir / (jobs[i].agent + "_" + std::to_string(jobs[i].seed) + ".csv");
            std::ofstream out(p, std::ios::binary);
            try {
                if (!out) throw Error("cannot write " + p.string());
                logs[i] = run_single(rc, jobs[i].agent, jobs[i].seed, &out);
            } catch (...) {
                out.flush();
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n = std::min(thread_cap(), jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            throw Error(jobs[i].agent + " seed " + std::to_string(jobs[i].seed) + ": " + e.what());
        }
    }

    std::string summary = "agent,seed,cum_regret,ucb_coverage\n";
    std::size_t i = 0;
    for (const std::string& a : rc.agents) {
        std::vector<double> regs, covs;
        for (; i < jobs.size() && jobs[i].agent == a; ++i) {
            const double reg = logs[i].rounds.empty() ? 0.0 : logs[i].rounds.back().cum_regret;
            const double cov = ucb_coverage(logs[i]);
            regs.push_back(reg);
            covs.push_back(cov);
            summary += a + "," + std::to_string(jobs[i].seed) + "," + num(reg) + "," + num(cov) + "\n";
        }
        const MeanStd r = mean_std(regs), c = mean_std(covs);
        summary += a + ",mean," + num(r.mean) + "," + num(c.mean) + "\n";
        summary += a + ",std," + num(r.std) + "," + num(c.std) + "\n";
    }
    write_text(rc.outdir / "summary.csv", summary);
    write_text(rc.outdir / "run_meta.txt", "rng = " + std::string(Rng::kAlgorithm) + "\n" + rc.snapshot);
    return logs;
}

std::vector<RunLog> compare(const RunConfig& rc, std::ostream& table) {
    for (const auto& [agent, seeds] : rc.agent_seeds) {
        if (seeds != rc.seeds) {
            throw ConfigError(agent + ".seeds: compare needs every agent to use the same seed list");
        }
    }
    std::vector<RunLog> logs = run_all(rc);
    std::string curve = "t,agent,mean_cum_regret,std\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-8s %16s %16s\n", "agent", "mean_cum_regret", "std");
    table << line;
    const std::size_t S = rc.seeds.size();
    for (std::size_t a = 0; a < rc.agents.size(); ++a) {
        for (std::size_t t = 0; t < rc.T; ++t) {
            std::vector<double> v(S);
            for (std::size_t s = 0; s < S; ++s) v[s] = logs[a * S + s].rounds[t].cum_regret;
            const MeanStd m = mean_std(v);
            curve += std::to_string(t + 1) + "," + rc.agents[a] + "," + num(m.mean) + "," + num(m.std) + "\n";
            if (t + 1 == rc.T) {
                std::snprintf(line, sizeof line, "%-8s %16.4f %16.4f\n", rc.agents[a].c_str(), m.mean, m.std);
                table << line;
            }
        }
    }
    write_text(rc.outdir / "compare.csv", curve);
    return logs;
}

}  // namespace mufasa
