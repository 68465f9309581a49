#include "mufasa/assembly.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include "mufasa/error.hpp"
#include "mufasa/kernels.hpp"
#include "mufasa/rng.hpp"

namespace mufasa {

void AssembledSpec::validate() const {
    if (subs.empty()) throw ConfigError("assembled model needs at least one bandit");
    const std::size_t out = subs.front().out_dim;
    for (const NetSpec& s : subs) {
        s.validate();
        if (s.out_dim != out) throw ConfigError("all bandit networks must share the output width");
    }
    if (!(c_bar > 0.0)) throw ConfigError("c_bar must be positive");
    if (use_shared) {
        shared.validate();
        const std::size_t expect = out * subs.size() * (zero_init_mode ? 2 : 1);
        if (shared.in_dim != expect) {
            throw ConfigError("shared network input is " + std::to_string(shared.in_dim) +
                              ", expected " + std::to_string(expect));
        }
        if (shared.out_dim != 1) throw ConfigError("shared network must have a scalar output");
    } else if (out != 1) {
        throw ConfigError("without the shared network every bandit network needs a scalar output");
    }
}

AssembledSpec make_assembled_spec(std::span<const std::size_t> input_dims, std::size_t sub_depth,
                                  std::size_t sub_width, std::size_t sub_out,
                                  std::size_t shared_depth, std::size_t shared_width,
                                  bool zero_init_mode, double c_bar) {
    AssembledSpec s;
    for (std::size_t d : input_dims) {
        s.subs.push_back(NetSpec{sub_depth, sub_width, d, sub_out, false});
    }
    s.shared = NetSpec{shared_depth, shared_width,
                       sub_out * input_dims.size() * (zero_init_mode ? 2 : 1), 1, true};
    s.zero_init_mode = zero_init_mode;
    s.c_bar = c_bar;
    return s;
}

namespace {

NetSpec shared_or_placeholder(const AssembledSpec& s) {
    if (s.use_shared) return s.shared;
    NetSpec p = s.shared;
    p.validate();
    return p;
}

bool is_zero(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace

Assembly::Assembly(AssembledSpec spec)
    : spec_((spec.validate(), std::move(spec))), shared_(shared_or_placeholder(spec_)) {
    subs_.reserve(spec_.subs.size());
    for (const NetSpec& s : spec_.subs) subs_.emplace_back(s);
}

AssembledParams Assembly::init(std::uint64_t seed) const {
    AssembledParams p;
    p.shared = shared_.init(Rng::derive(seed, 0));
    for (std::size_t k = 0; k < subs_.size(); ++k) p.subs.push_back(subs_[k].init(Rng::derive(seed, k + 1)));
    return p;
}

void Assembly::check_inputs(std::span<const Vector> xs) const {
    if (xs.size() != subs_.size()) {
        throw ContractViolation("combination has " + std::to_string(xs.size()) +
                                " feature vectors for " + std::to_string(subs_.size()) + " bandits");
    }
}

Vector Assembly::sub_outputs(const AssembledParams& p, std::span<const Vector> xs) const {
    check_inputs(xs);
    Vector f;
    f.reserve(subs_.size() * spec_.sub_out());
    for (std::size_t k = 0; k < subs_.size(); ++k) {
        const Vector out = subs_[k].forward(p.subs[k], xs[k]);
        f.insert(f.end(), out.begin(), out.end());
    }
    return f;
}

Vector Assembly::shared_input(std::span<const double> f) const {
    Vector in(f.begin(), f.end());
    if (spec_.zero_init_mode) in.insert(in.end(), f.begin(), f.end());
    return in;
}

double Assembly::combine(const AssembledParams& p, std::span<const double> f) const {
    if (!spec_.use_shared) {
        double s = 0.0;
        for (double v : f) s += v;
        return s;
    }
    const Vector in = shared_input(f);
    return shared_.forward_scalar(p.shared, in);
}

double Assembly::forward(const AssembledParams& p, std::span<const Vector> xs) const {
    return combine(p, sub_outputs(p, xs));
}

Vector Assembly::grad_sub(const AssembledParams& p, std::span<const Vector> xs, std::size_t k) const {
    check_inputs(xs);
    if (spec_.sub_out() != 1) {
        throw Unsupported("per-bandit confidence terms need scalar bandit-network outputs");
    }
    if (k >= subs_.size()) throw ContractViolation("bandit index out of range");
    return subs_[k].grad(p.subs[k], xs[k]);
}

Vector Assembly::grad_shared_at(const NetParams& shared, std::span<const double> f) const {
    if (!spec_.use_shared) throw Unsupported("shared network is disabled");
    const Vector in = shared_input(f);
    return shared_.grad(shared, in);
}

Vector Assembly::grad_shared(const AssembledParams& p, std::span<const Vector> xs) const {
    return grad_shared_at(p.shared, sub_outputs(p, xs));
}

AssembledTrainResult Assembly::train_all(const AssembledParams& p,
                                         std::span<const FullObservation> history,
                                         const TrainConfig& cfg) const {
    const std::size_t K = subs_.size();
    for (const FullObservation& obs : history) {
        check_inputs(obs.inputs);
        if (obs.sub_rewards.size() != K) {
            throw ContractViolation("all-sub-reward training needs every sub-reward in every round");
        }
    }
    AssembledTrainResult result;
    result.params = p;
    if (history.empty()) return result;

    std::vector<Vector> inputs(history.size());
    std::vector<double> targets(history.size());
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < history.size(); ++i) {
            inputs[i] = history[i].inputs[k];
            targets[i] = history[i].sub_rewards[k];
        }
        TrainConfig c = cfg;
        c.m_scale = static_cast<double>(spec_.subs[k].width);
        TrainResult r = subs_[k].train(p.subs[k], inputs, targets, c);
        result.params.subs[k] = std::move(r.params);
        result.halvings += r.halvings;
        if (!spec_.use_shared && k == 0) result.loss_trace = std::move(r.loss_trace);
    }
    if (spec_.use_shared) {
        // The shared network learns H from the observed sub-reward vectors.
        for (std::size_t i = 0; i < history.size(); ++i) {
            inputs[i] = shared_input(history[i].sub_rewards);
            targets[i] = history[i].final_reward;
        }
        TrainConfig c = cfg;
        c.m_scale = static_cast<double>(spec_.shared.width);
        TrainResult r = shared_.train(p.shared, inputs, targets, c);
        result.params.shared = std::move(r.params);
        result.halvings += r.halvings;
        result.loss_trace = std::move(r.loss_trace);
    }
    return result;
}

std::size_t Assembly::joint_param_count() const noexcept {
    std::size_t n = spec_.use_shared ? shared_.param_count() : 0;
    for (const Mlp& s : subs_) n += s.param_count();
    return n;
}

Vector Assembly::flatten(const AssembledParams& p) const {
    Vector flat;
    flat.reserve(joint_param_count());
    if (spec_.use_shared) flat.insert(flat.end(), p.shared.theta.begin(), p.shared.theta.end());
    for (const NetParams& s : p.subs) flat.insert(flat.end(), s.theta.begin(), s.theta.end());
    return flat;
}

void Assembly::unflatten(std::span<const double> flat, AssembledParams& p) const {
    if (flat.size() != joint_param_count()) throw ContractViolation("joint parameter size mismatch");
    std::size_t off = 0;
    if (spec_.use_shared) {
        std::copy_n(flat.begin() + off, p.shared.theta.size(), p.shared.theta.begin());
        off += p.shared.theta.size();
    }
    for (NetParams& s : p.subs) {
        std::copy_n(flat.begin() + off, s.theta.size(), s.theta.begin());
        off += s.theta.size();
    }
}

double Assembly::joint_loss(const AssembledParams& p, std::span<const TrainingSample> samples,
                            const TrainConfig& cfg, Vector* grad) const {
    const std::size_t K = subs_.size();
    const std::size_t out = spec_.sub_out();
    const std::size_t shared_count = spec_.use_shared ? shared_.param_count() : 0;
    std::vector<std::size_t> sub_offset(K);
    {
        std::size_t off = shared_count;
        for (std::size_t k = 0; k < K; ++k) {
            sub_offset[k] = off;
            off += subs_[k].param_count();
        }
    }
    if (grad) grad->assign(joint_param_count(), 0.0);

    std::vector<ForwardCache> caches(K);
    std::vector<char> active(K);
    ForwardCache shared_cache;
    Vector f(K * out);
    Vector in_grad(spec_.use_shared ? shared_.spec().in_dim : 0);
    Vector df(out);
    double loss = 0.0;

    for (const TrainingSample& s : samples) {
        check_inputs(s.inputs);
        for (std::size_t k = 0; k < K; ++k) {
            active[k] = !is_zero(s.inputs[k]);
            if (active[k]) {
                subs_[k].forward(p.subs[k], s.inputs[k], caches[k]);
                std::copy(caches[k].out.begin(), caches[k].out.end(), f.begin() + k * out);
            } else {
                // Bias-free ReLU chain: a zero input gives a zero output and gradient.
                std::fill_n(f.begin() + k * out, out, 0.0);
            }
        }
        double pred;
        if (spec_.use_shared) {
            const Vector sin = shared_input(f);
            shared_.forward(p.shared, sin, shared_cache);
            pred = shared_cache.out[0];
        } else {
            pred = 0.0;
            for (double v : f) pred += v;
        }
        const double resid = pred - s.target;
        loss += 0.5 * resid * resid;
        if (!grad || resid == 0.0) continue;

        if (spec_.use_shared) {
            shared_.backward(p.shared, shared_cache, std::span<const double>(&resid, 1), 1.0,
                             std::span<double>(grad->data(), shared_count), in_grad);
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (!active[k]) continue;
            for (std::size_t o = 0; o < out; ++o) {
                if (!spec_.use_shared) {
                    df[o] = resid;
                } else {
                    df[o] = in_grad[k * out + o];
                    if (spec_.zero_init_mode) df[o] += in_grad[K * out + k * out + o];
                }
            }
            subs_[k].backward(p.subs[k], caches[k], df, 1.0,
                              std::span<double>(grad->data() + sub_offset[k], subs_[k].param_count()));
        }
    }

    const double width = static_cast<double>(spec_.use_shared ? spec_.shared.width : spec_.subs[0].width);
    const double reg = width * cfg.lambda_reg;
    double dist2 = 0.0;
    auto add_reg = [&](const NetParams& np, std::size_t off) {
        for (std::size_t i = 0; i < np.theta.size(); ++i) {
            const double d = np.theta[i] - np.theta0[i];
            dist2 += d * d;
            if (grad) (*grad)[off + i] += reg * d;
        }
    };
    if (spec_.use_shared) add_reg(p.shared, 0);
    for (std::size_t k = 0; k < K; ++k) add_reg(p.subs[k], sub_offset[k]);
    loss += 0.5 * reg * dist2;

    if (cfg.normalize && !samples.empty()) {
        const double inv = 1.0 / static_cast<double>(samples.size());
        loss *= inv;
        if (grad) {
            for (double& g : *grad) g *= inv;
        }
    }
    return loss;
}

AssembledTrainResult Assembly::train_partial(const AssembledParams& p,
                                             std::span<const TrainingSample> samples,
                                             const TrainConfig& cfg) const {
    AssembledTrainResult result;
    result.params = p;
    if (!cfg.warm_start) {
        result.params.shared.theta = p.shared.theta0;
        for (NetParams& s : result.params.subs) s.theta = s.theta0;
    }
    if (samples.empty() || cfg.steps == 0 || cfg.eta == 0.0) return result;

    Vector flat = flatten(result.params);
    AssembledParams probe = result.params;
    const Objective objective = [&](std::span<const double> theta, Vector* grad) {
        unflatten(theta, probe);
        return joint_loss(probe, samples, cfg, grad);
    };
    DescentResult d = descend(flat, objective, cfg);
    unflatten(flat, result.params);
    result.loss_trace = std::move(d.loss_trace);
    result.halvings = d.halvings;
    return result;
}

std::vector<TrainingSample> build_partial_samples(const Combination& x, double final_reward,
                                                  const std::map<std::size_t, double>& available,
                                                  double c_bar) {
    const std::size_t K = x.features.size();
    std::vector<TrainingSample> out;
    out.reserve(available.size() + 1);
    out.push_back(TrainingSample{x.features, final_reward});
    for (const auto& [k, r] : available) {
        if (k >= K) throw ContractViolation("sub-reward for bandit " + std::to_string(k) + " of " + std::to_string(K));
        TrainingSample s;
        s.inputs.resize(K);
        for (std::size_t j = 0; j < K; ++j) {
            s.inputs[j] = (j == k) ? x.features[j] : Vector(x.features[j].size(), 0.0);
        }
        s.target = c_bar * r;
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------

void save_assembled(const std::filesystem::path& dir, const AssembledSpec& spec,
                    const AssembledParams& p, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    std::ofstream m(dir / "manifest.txt");
    if (!m) throw Error("cannot write " + (dir / "manifest.txt").string());
    m << "mufasa-assembly 1\n"
      << "K " << spec.bandits() << '\n'
      << "zero_init_mode " << (spec.zero_init_mode ? 1 : 0) << '\n'
      << "use_shared " << (spec.use_shared ? 1 : 0) << '\n';
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", spec.c_bar);
    m << "c_bar " << buf << '\n' << "seed " << seed << '\n' << "shared shared.mlp\n";
    {
        std::ofstream f(dir / "shared.mlp");
        save_params(f, spec.shared, p.shared, seed);
    }
    for (std::size_t k = 0; k < spec.bandits(); ++k) {
        const std::string name = "sub_" + std::to_string(k) + ".mlp";
        m << "sub " << k << ' ' << name << '\n';
        std::ofstream f(dir / name);
        save_params(f, spec.subs[k], p.subs[k], seed);
    }
}

LoadedAssembly load_assembled(const std::filesystem::path& dir) {
    std::ifstream m(dir / "manifest.txt");
    if (!m) throw ParseError("cannot open " + (dir / "manifest.txt").string(), 0);
    LoadedAssembly out;
    std::string line;
    long line_no = 0;
    std::size_t K = 0;
    std::string shared_file;
    std::map<std::size_t, std::string> sub_files;
    while (std::getline(m, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (line_no == 1) {
            if (line != "mufasa-assembly 1") throw ParseError("not an assembly manifest", line_no);
            continue;
        }
        bool ok = true;
        if (key == "K") {
            ok = static_cast<bool>(ls >> K);
        } else if (key == "zero_init_mode") {
            int v = 0;
            ok = static_cast<bool>(ls >> v);
            out.spec.zero_init_mode = v != 0;
        } else if (key == "use_shared") {
            int v = 0;
            ok = static_cast<bool>(ls >> v);
            out.spec.use_shared = v != 0;
        } else if (key == "c_bar") {
            ok = static_cast<bool>(ls >> out.spec.c_bar);
        } else if (key == "seed") {
            ok = static_cast<bool>(ls >> out.seed);
        } else if (key == "shared") {
            ok = static_cast<bool>(ls >> shared_file);
        } else if (key == "sub") {
            std::size_t k = 0;
            std::string f;
            ok = static_cast<bool>(ls >> k >> f);
            sub_files[k] = f;
        } else if (!key.empty()) {
            throw ParseError("unknown manifest key '" + key + "'", line_no);
        }
        if (!ok) throw ParseError("malformed manifest entry", line_no);
    }
    if (K == 0 || sub_files.size() != K || shared_file.empty()) {
        throw ParseError("manifest does not list every component", line_no);
    }
    {
        std::ifstream f(dir / shared_file);
        LoadedNet n = load_params(f);
        out.spec.shared = n.spec;
        out.params.shared = std::move(n.params);
    }
    for (std::size_t k = 0; k < K; ++k) {
        auto it = sub_files.find(k);
        if (it == sub_files.end()) throw ParseError("missing sub network " + std::to_string(k), 0);
        std::ifstream f(dir / it->second);
        LoadedNet n = load_params(f);
        out.spec.subs.push_back(n.spec);
        out.params.subs.push_back(std::move(n.params));
    }
    out.spec.validate();
    return out;
}

}  // namespace mufasa
