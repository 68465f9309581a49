#pragma once
// Bias-free fully connected ReLU network
//
//     f(x; theta) = sqrt(m) * W_L relu(W_{L-1} ... relu(W_1 x))
//
// Parameters are stored flattened in the canonical order W_L, W_{L-1}, ..., W_1
// with each matrix row-major. Gradients, design matrices and serialized files
// all use that order.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "mufasa/tensor.hpp"

namespace mufasa {

struct NetSpec {
    std::size_t depth = 2;   // L >= 1
    std::size_t width = 32;  // m, even
    std::size_t in_dim = 1;
    std::size_t out_dim = 1;
    bool antisymmetric_head = false;

    double scale() const;
    /// Throws ConfigError.
    void validate() const;
    bool operator==(const NetSpec&) const = default;
};

struct NetParams {
    Vector theta;   // current parameters, canonical flatten order
    Vector theta0;  // initialization snapshot, regularizer anchor
    bool operator==(const NetParams&) const = default;
};

struct TrainConfig {
    double eta = 0.01;
    std::size_t steps = 100;  // J
    double lambda_reg = 1.0;
    double m_scale = 1.0;  // width entering the m * lambda regularizer coefficient
    // Start from theta0 instead of the supplied parameters.
    bool warm_start = true;
    // Divide the loss by the sample count. The minimizer is unchanged; only the
    // effective step shrinks.
    bool normalize = false;
    // Halve the step whenever it would raise the loss; the reduced step stays
    // in force for the rest of the call.
    bool backtrack = true;
    std::size_t max_halvings = 40;
    double divergence_limit = 1e12;
};

struct TrainResult {
    NetParams params;
    std::vector<double> loss_trace;  // loss at theta_0 ... theta_J
    std::size_t halvings = 0;
};

/// Loss at `theta`, writing the gradient when `grad` is non-null.
using Objective = std::function<double(std::span<const double> theta, Vector* grad)>;

struct DescentResult {
    std::vector<double> loss_trace;  // J + 1 entries
    std::size_t halvings = 0;
};

/// cfg.steps gradient steps on `theta` with step size cfg.eta (see
/// TrainConfig::backtrack). Throws Divergence past cfg.divergence_limit.
DescentResult descend(Vector& theta, const Objective& objective, const TrainConfig& cfg);

/// Activations recorded by a forward pass, consumed by backward().
struct ForwardCache {
    std::vector<Vector> act;  // act[0] = x, act[l] = relu(pre[l-1]) for hidden layers
    std::vector<Vector> pre;  // pre-activations of the hidden layers
    Vector out;
};

struct LayerShape {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;  // into the flat parameter vector
};

class Mlp {
public:
    explicit Mlp(NetSpec spec);

    const NetSpec& spec() const noexcept { return spec_; }
    std::size_t param_count() const noexcept { return count_; }
    /// Shape of W_{l+1}; l in [0, depth).
    const LayerShape& layer(std::size_t l) const { return layers_[l]; }

    NetParams init(std::uint64_t seed) const;

    Vector forward(const NetParams& p, std::span<const double> x) const;
    double forward_scalar(const NetParams& p, std::span<const double> x) const;
    void forward(const NetParams& p, std::span<const double> x, ForwardCache& cache) const;

    /// Accumulates weight * J^T out_grad into grad (flat, param_count entries)
    /// and, when input_grad is non-empty, writes J_x^T out_grad into it.
    void backward(const NetParams& p, const ForwardCache& cache, std::span<const double> out_grad,
                  double weight, std::span<double> grad, std::span<double> input_grad = {}) const;

    /// d f / d theta for a scalar-output net. Throws Unsupported otherwise.
    Vector grad(const NetParams& p, std::span<const double> x) const;

    TrainResult train(const NetParams& start, std::span<const Vector> inputs,
                      std::span<const double> targets, const TrainConfig& cfg) const;

private:
    void check_input(std::span<const double> x) const;

    NetSpec spec_;
    std::vector<LayerShape> layers_;
    std::size_t count_ = 0;
};

NetParams init_params(const NetSpec& spec, std::uint64_t seed);
Vector forward(const NetSpec& spec, const NetParams& p, std::span<const double> x);
Vector grad_params(const NetSpec& spec, const NetParams& p, std::span<const double> x);
TrainResult train(const NetSpec& spec, const NetParams& p, std::span<const Vector> inputs,
                  std::span<const double> targets, const TrainConfig& cfg);

/// Regularized square loss  sum (f - y)^2 / 2 + m_scale * lambda * |theta - theta0|^2 / 2,
/// divided by the sample count when cfg.normalize is set.
double training_loss(const Mlp& net, const NetParams& p, std::span<const Vector> inputs,
                     std::span<const double> targets, const TrainConfig& cfg);

// Text serialization: header lines, then one %.17g value per line.
void save_params(std::ostream& os, const NetSpec& spec, const NetParams& p, std::uint64_t seed);
struct LoadedNet {
    NetSpec spec;
    NetParams params;
    std::uint64_t seed = 0;
};
LoadedNet load_params(std::istream& is);

}  // namespace mufasa
