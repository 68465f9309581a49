#pragma once
// Assembled reward model: K per-bandit networks f_k feeding one shared
// network F. In zero-init mode F sees concat(f_t, f_t) so that the mirrored
// initialization makes the whole model output exactly zero before training.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "mufasa/mlp.hpp"

namespace mufasa {

struct AssembledSpec {
    std::vector<NetSpec> subs;  // one per bandit
    NetSpec shared;
    bool zero_init_mode = true;
    double c_bar = 1.0;
    // With the shared net disabled the model is the plain sum of the f_k
    // (for K = 1 this is a single NeuralUCB-style network).
    bool use_shared = true;

    std::size_t bandits() const noexcept { return subs.size(); }
    std::size_t sub_out() const noexcept { return subs.empty() ? 0 : subs.front().out_dim; }
    void validate() const;
};

/// Spec with equal depth/width across the bandit networks.
AssembledSpec make_assembled_spec(std::span<const std::size_t> input_dims, std::size_t sub_depth,
                                  std::size_t sub_width, std::size_t sub_out,
                                  std::size_t shared_depth, std::size_t shared_width,
                                  bool zero_init_mode, double c_bar);

struct AssembledParams {
    NetParams shared;
    std::vector<NetParams> subs;
    bool operator==(const AssembledParams&) const = default;
};

/// One arm per bandit.
struct Combination {
    std::vector<std::size_t> arms;
    std::vector<Vector> features;
};

/// One element of Omega_t.
struct TrainingSample {
    std::vector<Vector> inputs;
    double target = 0.0;
};

/// A round with every sub-reward observed (input to the all-sub-reward trainer).
struct FullObservation {
    std::vector<Vector> inputs;
    double final_reward = 0.0;
    Vector sub_rewards;
};

struct AssembledTrainResult {
    AssembledParams params;
    std::vector<double> loss_trace;  // shared/joint loss per step
    std::size_t halvings = 0;
};

class Assembly {
public:
    explicit Assembly(AssembledSpec spec);

    const AssembledSpec& spec() const noexcept { return spec_; }
    std::size_t bandits() const noexcept { return spec_.bandits(); }
    const Mlp& sub(std::size_t k) const { return subs_.at(k); }
    const Mlp& shared() const noexcept { return shared_; }

    AssembledParams init(std::uint64_t seed) const;

    /// Concatenated sub-network outputs f_t.
    Vector sub_outputs(const AssembledParams& p, std::span<const Vector> xs) const;
    /// Shared-network input for a given f_t (duplicated in zero-init mode).
    Vector shared_input(std::span<const double> f) const;
    /// F evaluated on an already computed f_t.
    double combine(const AssembledParams& p, std::span<const double> f) const;
    double forward(const AssembledParams& p, std::span<const Vector> xs) const;

    Vector grad_sub(const AssembledParams& p, std::span<const Vector> xs, std::size_t k) const;
    Vector grad_shared(const AssembledParams& p, std::span<const Vector> xs) const;
    /// G(f; theta^Sigma) evaluated at a given f_t.
    Vector grad_shared_at(const NetParams& shared, std::span<const double> f) const;

    AssembledTrainResult train_all(const AssembledParams& p, std::span<const FullObservation> history,
                                   const TrainConfig& cfg) const;
    AssembledTrainResult train_partial(const AssembledParams& p,
                                       std::span<const TrainingSample> samples,
                                       const TrainConfig& cfg) const;

    /// End-to-end loss over Omega samples with regularizer m2*lambda*|theta - theta0|^2/2.
    /// When grad is non-null it receives the gradient in joint flatten order.
    double joint_loss(const AssembledParams& p, std::span<const TrainingSample> samples,
                      const TrainConfig& cfg, Vector* grad) const;

    /// Joint flatten order: theta^Sigma, theta^1, ..., theta^K.
    Vector flatten(const AssembledParams& p) const;
    void unflatten(std::span<const double> flat, AssembledParams& p) const;
    std::size_t joint_param_count() const noexcept;

private:
    void check_inputs(std::span<const Vector> xs) const;

    AssembledSpec spec_;
    std::vector<Mlp> subs_;
    Mlp shared_;
};

/// Omega_t: the full combination with its final reward, plus one zero-padded
/// sample per observed sub-reward targeted at c_bar * r^k.
std::vector<TrainingSample> build_partial_samples(const Combination& x, double final_reward,
                                                  const std::map<std::size_t, double>& available,
                                                  double c_bar);

// Manifest plus one parameter file per component.
void save_assembled(const std::filesystem::path& dir, const AssembledSpec& spec,
                    const AssembledParams& p, std::uint64_t seed);
struct LoadedAssembly {
    AssembledSpec spec;
    AssembledParams params;
    std::uint64_t seed = 0;
};
LoadedAssembly load_assembled(const std::filesystem::path& dir);

}  // namespace mufasa
