#include "mufasa/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "mufasa/error.hpp"
#include "mufasa/kernels.hpp"
#include "mufasa/rng.hpp"

namespace mufasa {

double NetSpec::scale() const { return std::sqrt(static_cast<double>(width)); }

void NetSpec::validate() const {
    if (depth < 1) throw ConfigError("network depth must be at least 1");
    if (width < 2 || width % 2 != 0) {
        throw ConfigError("network width must be even and >= 2, got " + std::to_string(width));
    }
    if (in_dim < 1) throw ConfigError("network input dimension must be positive");
    if (out_dim < 1) throw ConfigError("network output dimension must be positive");
    if (antisymmetric_head && depth == 1 && in_dim % 2 != 0) {
        throw ConfigError("a one-layer antisymmetric head needs an even input dimension");
    }
}

Mlp::Mlp(NetSpec spec) : spec_(spec) {
    spec_.validate();
    const std::size_t depth = spec_.depth;
    layers_.resize(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        layers_[l].rows = (l + 1 == depth) ? spec_.out_dim : spec_.width;
        layers_[l].cols = (l == 0) ? spec_.in_dim : spec_.width;
    }
    std::size_t offset = 0;
    for (std::size_t l = depth; l-- > 0;) {
        layers_[l].offset = offset;
        offset += layers_[l].rows * layers_[l].cols;
    }
    count_ = offset;
}

NetParams Mlp::init(std::uint64_t seed) const {
    Rng rng(seed);
    const double m = static_cast<double>(spec_.width);
    const double block_sd = std::sqrt(4.0 / m);
    const double dense_sd = std::sqrt(2.0 / m);
    Vector theta(count_, 0.0);
    const std::size_t depth = spec_.depth;
    for (std::size_t l = 0; l < depth; ++l) {
        const LayerShape& s = layers_[l];
        double* w = theta.data() + s.offset;
        const bool head = (l + 1 == depth);
        if (head && spec_.antisymmetric_head) {
            // (w^T, -w^T) per output row.
            const std::size_t half = s.cols / 2;
            for (std::size_t r = 0; r < s.rows; ++r) {
                for (std::size_t c = 0; c < half; ++c) {
                    const double v = rng.normal(0.0, dense_sd);
                    w[r * s.cols + c] = v;
                    w[r * s.cols + half + c] = -v;
                }
            }
        } else if (s.rows % 2 == 0 && s.cols % 2 == 0) {
            // [[w, 0], [0, w]]
            const std::size_t hr = s.rows / 2;
            const std::size_t hc = s.cols / 2;
            for (std::size_t r = 0; r < hr; ++r) {
                for (std::size_t c = 0; c < hc; ++c) {
                    const double v = rng.normal(0.0, block_sd);
                    w[r * s.cols + c] = v;
                    w[(hr + r) * s.cols + hc + c] = v;
                }
            }
        } else {
            // No mirrored split exists; keep the per-row variance of the block scheme.
            for (std::size_t i = 0; i < s.rows * s.cols; ++i) w[i] = rng.normal(0.0, dense_sd);
        }
    }
    NetParams p;
    p.theta = theta;
    p.theta0 = std::move(theta);
    return p;
}

void Mlp::check_input(std::span<const double> x) const {
    if (x.size() != spec_.in_dim) {
        throw ContractViolation("network input has " + std::to_string(x.size()) +
                                " entries, expected " + std::to_string(spec_.in_dim));
    }
}

void Mlp::forward(const NetParams& p, std::span<const double> x, ForwardCache& cache) const {
    check_input(x);
    const std::size_t depth = spec_.depth;
    cache.act.resize(depth);
    cache.pre.resize(depth - 1);
    cache.act[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l + 1 < depth; ++l) {
        const LayerShape& s = layers_[l];
        Vector& pre = cache.pre[l];
        pre.resize(s.rows);
        kernels::gemv(p.theta.data() + s.offset, s.rows, s.cols, cache.act[l].data(), pre.data());
        Vector& a = cache.act[l + 1];
        a.resize(s.rows);
        for (std::size_t i = 0; i < s.rows; ++i) a[i] = pre[i] > 0.0 ? pre[i] : 0.0;
    }
    const LayerShape& h = layers_[depth - 1];
    cache.out.resize(h.rows);
    kernels::gemv(p.theta.data() + h.offset, h.rows, h.cols, cache.act[depth - 1].data(),
                  cache.out.data());
    const double sc = spec_.scale();
    for (double& v : cache.out) v *= sc;
}

Vector Mlp::forward(const NetParams& p, std::span<const double> x) const {
    ForwardCache cache;
    forward(p, x, cache);
    return std::move(cache.out);
}

double Mlp::forward_scalar(const NetParams& p, std::span<const double> x) const {
    if (spec_.out_dim != 1) throw Unsupported("forward_scalar on a network with several outputs");
    ForwardCache cache;
    forward(p, x, cache);
    return cache.out[0];
}

void Mlp::backward(const NetParams& p, const ForwardCache& cache, std::span<const double> out_grad,
                   double weight, std::span<double> grad, std::span<double> input_grad) const {
    const std::size_t depth = spec_.depth;
    const double* theta = p.theta.data();
    const LayerShape& h = layers_[depth - 1];
    const double sc = spec_.scale();

    Vector d(h.cols);
    Vector scaled(out_grad.begin(), out_grad.end());
    for (double& v : scaled) v *= sc;
    if (!grad.empty()) {
        kernels::ger(grad.data() + h.offset, h.rows, h.cols, weight, scaled.data(),
                     cache.act[depth - 1].data());
    }
    kernels::gemv_t(theta + h.offset, h.rows, h.cols, scaled.data(), d.data());

    Vector next;
    for (std::size_t l = depth - 1; l-- > 0;) {
        const LayerShape& s = layers_[l];
        const Vector& pre = cache.pre[l];
        // Subgradient of relu at exactly zero is taken as zero.
        for (std::size_t i = 0; i < s.rows; ++i) {
            if (!(pre[i] > 0.0)) d[i] = 0.0;
        }
        if (!grad.empty()) {
            kernels::ger(grad.data() + s.offset, s.rows, s.cols, weight, d.data(),
                         cache.act[l].data());
        }
        if (l == 0 && input_grad.empty()) break;
        next.resize(s.cols);
        kernels::gemv_t(theta + s.offset, s.rows, s.cols, d.data(), next.data());
        d.swap(next);
    }
    if (!input_grad.empty()) {
        if (input_grad.size() != spec_.in_dim) {
            throw ContractViolation("input gradient buffer has the wrong size");
        }
        std::copy(d.begin(), d.end(), input_grad.begin());
    }
}

Vector Mlp::grad(const NetParams& p, std::span<const double> x) const {
    if (spec_.out_dim != 1) {
        throw Unsupported("parameter gradient needs a scalar output; take per-output gradients via backward()");
    }
    ForwardCache cache;
    forward(p, x, cache);
    Vector g(count_, 0.0);
    const double one = 1.0;
    backward(p, cache, std::span<const double>(&one, 1), 1.0, g);
    return g;
}

namespace {

struct LossEval {
    double loss = 0.0;
    Vector grad;
};

void evaluate(const Mlp& net, const NetParams& p, std::span<const Vector> inputs,
              std::span<const double> targets, const TrainConfig& cfg, bool want_grad,
              ForwardCache& cache, LossEval& out) {
    const std::size_t n = inputs.size();
    const std::size_t count = net.param_count();
    out.loss = 0.0;
    if (want_grad) out.grad.assign(count, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        net.forward(p, inputs[i], cache);
        const double resid = cache.out[0] - targets[i];
        out.loss += 0.5 * resid * resid;
        if (want_grad && resid != 0.0) {
            net.backward(p, cache, std::span<const double>(&resid, 1), 1.0, out.grad);
        }
    }
    const double reg = cfg.m_scale * cfg.lambda_reg;
    double dist2 = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double diff = p.theta[i] - p.theta0[i];
        dist2 += diff * diff;
        if (want_grad) out.grad[i] += reg * diff;
    }
    out.loss += 0.5 * reg * dist2;
    if (cfg.normalize && n > 0) {
        const double inv = 1.0 / static_cast<double>(n);
        out.loss *= inv;
        if (want_grad) {
            for (double& g : out.grad) g *= inv;
        }
    }
}

}  // namespace

double training_loss(const Mlp& net, const NetParams& p, std::span<const Vector> inputs,
                     std::span<const double> targets, const TrainConfig& cfg) {
    ForwardCache cache;
    LossEval e;
    evaluate(net, p, inputs, targets, cfg, false, cache, e);
    return e.loss;
}

TrainResult Mlp::train(const NetParams& start, std::span<const Vector> inputs,
                       std::span<const double> targets, const TrainConfig& cfg) const {
    if (inputs.size() != targets.size()) {
        throw ContractViolation("train: " + std::to_string(inputs.size()) + " inputs but " +
                                std::to_string(targets.size()) + " targets");
    }
    if (spec_.out_dim != 1) throw Unsupported("train needs a scalar-output network");
    if (!(cfg.eta >= 0.0) || !(cfg.lambda_reg >= 0.0)) {
        throw ConfigError("train: eta and lambda must be non-negative");
    }
    for (const Vector& x : inputs) check_input(x);

    TrainResult result;
    result.params = start;
    if (!cfg.warm_start) result.params.theta = start.theta0;
    if (inputs.empty() || cfg.steps == 0 || cfg.eta == 0.0) {
        if (!inputs.empty()) {
            result.loss_trace.push_back(training_loss(*this, result.params, inputs, targets, cfg));
        }
        return result;
    }

    ForwardCache cache;
    LossEval e;
    NetParams probe = result.params;
    const Objective objective = [&](std::span<const double> theta, Vector* grad) {
        std::copy(theta.begin(), theta.end(), probe.theta.begin());
        evaluate(*this, probe, inputs, targets, cfg, grad != nullptr, cache, e);
        if (grad) grad->swap(e.grad);
        return e.loss;
    };
    DescentResult d = descend(result.params.theta, objective, cfg);
    result.loss_trace = std::move(d.loss_trace);
    result.halvings = d.halvings;
    return result;
}

DescentResult descend(Vector& theta, const Objective& objective, const TrainConfig& cfg) {
    DescentResult out;
    auto guard = [&](double loss, std::size_t step) {
        if (!(loss <= cfg.divergence_limit)) {
            throw Divergence("training loss " + std::to_string(loss) + " at step " + std::to_string(step) +
                             " exceeds the divergence guard");
        }
    };
    Vector g, cand_g, cand(theta.size());
    double loss = objective(theta, &g);
    guard(loss, 0);
    out.loss_trace.push_back(loss);
    double eta = cfg.eta;
    bool stalled = false;
    for (std::size_t j = 1; j <= cfg.steps; ++j) {
        if (!stalled) {
            for (;;) {
                cand = theta;
                kernels::axpy(-eta, g.data(), cand.data(), cand.size());
                const double next = objective(cand, &cand_g);
                if (!cfg.backtrack || next <= loss) {
                    theta.swap(cand);
                    g.swap(cand_g);
                    loss = next;
                    break;
                }
                if (out.halvings == cfg.max_halvings) {
                    stalled = true;
                    break;
                }
                eta *= 0.5;
                ++out.halvings;
            }
        }
        guard(loss, j);
        out.loss_trace.push_back(loss);
    }
    return out;
}

NetParams init_params(const NetSpec& spec, std::uint64_t seed) { return Mlp(spec).init(seed); }

Vector forward(const NetSpec& spec, const NetParams& p, std::span<const double> x) {
    return Mlp(spec).forward(p, x);
}

Vector grad_params(const NetSpec& spec, const NetParams& p, std::span<const double> x) {
    return Mlp(spec).grad(p, x);
}

TrainResult train(const NetSpec& spec, const NetParams& p, std::span<const Vector> inputs,
                  std::span<const double> targets, const TrainConfig& cfg) {
    return Mlp(spec).train(p, inputs, targets, cfg);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr const char* kMagic = "mufasa-mlp 1";
constexpr const char* kOrder = "WL..W1/row-major";

void write_values(std::ostream& os, const char* name, const Vector& v) {
    os << name << ' ' << v.size() << '\n';
    char buf[40];
    for (double x : v) {
        std::snprintf(buf, sizeof buf, "%.17g\n", x);
        os << buf;
    }
}

std::string next_line(std::istream& is, long& line_no) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("unexpected end of parameter file", line_no + 1);
    ++line_no;
    return line;
}

template <typename T>
T keyed(std::istream& is, long& line_no, const std::string& key) {
    std::istringstream ls(next_line(is, line_no));
    std::string k;
    T value{};
    if (!(ls >> k >> value) || k != key) throw ParseError("expected '" + key + " <value>'", line_no);
    return value;
}

Vector read_values(std::istream& is, long& line_no, const std::string& key, std::size_t expected) {
    const auto n = keyed<std::size_t>(is, line_no, key);
    if (n != expected) {
        throw ParseError(key + " count " + std::to_string(n) + " does not match the spec (" +
                             std::to_string(expected) + ")",
                         line_no);
    }
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string s = next_line(is, line_no);
        char* end = nullptr;
        v[i] = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0') throw ParseError("bad number '" + s + "'", line_no);
    }
    return v;
}

}  // namespace

void save_params(std::ostream& os, const NetSpec& spec, const NetParams& p, std::uint64_t seed) {
    os << kMagic << '\n'
       << "depth " << spec.depth << '\n'
       << "width " << spec.width << '\n'
       << "in_dim " << spec.in_dim << '\n'
       << "out_dim " << spec.out_dim << '\n'
       << "antisymmetric_head " << (spec.antisymmetric_head ? 1 : 0) << '\n'
       << "seed " << seed << '\n'
       << "order " << kOrder << '\n';
    write_values(os, "theta", p.theta);
    write_values(os, "theta0", p.theta0);
}

LoadedNet load_params(std::istream& is) {
    long line_no = 0;
    if (next_line(is, line_no) != kMagic) throw ParseError("not a mufasa parameter file", line_no);
    LoadedNet out;
    out.spec.depth = keyed<std::size_t>(is, line_no, "depth");
    out.spec.width = keyed<std::size_t>(is, line_no, "width");
    out.spec.in_dim = keyed<std::size_t>(is, line_no, "in_dim");
    out.spec.out_dim = keyed<std::size_t>(is, line_no, "out_dim");
    out.spec.antisymmetric_head = keyed<int>(is, line_no, "antisymmetric_head") != 0;
    out.seed = keyed<std::uint64_t>(is, line_no, "seed");
    if (keyed<std::string>(is, line_no, "order") != kOrder) {
        throw ParseError("unsupported flatten order", line_no);
    }
    try {
        out.spec.validate();
    } catch (const ConfigError& e) {
        throw ParseError(e.what(), line_no);
    }
    const std::size_t count = Mlp(out.spec).param_count();
    out.params.theta = read_values(is, line_no, "theta", count);
    out.params.theta0 = read_values(is, line_no, "theta0", count);
    return out;
}

}  // namespace mufasa
