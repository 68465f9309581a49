#pragma once
// Gradient design matrices and the UCB bonuses built on them.
//
// Each stream keeps A = lambda I + sum g g^T / m for gradients at the current
// parameters and A' for gradients at the initialization, together with both
// inverses (rank-one updates, re-synchronized from A every kResyncInterval
// updates) and a running log det A'.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mufasa/tensor.hpp"

namespace mufasa {

inline constexpr std::size_t kResyncInterval = 500;

class DesignState {
public:
    DesignState() = default;
    DesignState(std::size_t dim, double lambda, double m_width);

    /// Adds g_current g_current^T / m to A and g_init g_init^T / m to A'.
    void update(std::span<const double> g_current, std::span<const double> g_init);

    /// Rebuilds A (not A') from gradients re-evaluated at the current parameters.
    void rebuild_current(std::span<const Vector> gradients);

    std::size_t dim() const noexcept { return a_inv_.rows(); }
    double lambda() const noexcept { return lambda_; }
    double m_width() const noexcept { return m_width_; }
    std::size_t update_count() const noexcept { return count_; }
    double logdet_a0() const noexcept { return logdet_a0_; }
    /// log det A' - P log lambda.
    double logdet_ratio() const noexcept;

    const Matrix& a_inv() const noexcept { return a_inv_; }
    const Matrix& a0_inv() const noexcept { return a0_inv_; }
    const Matrix& a() const noexcept { return a_; }
    const Matrix& a0() const noexcept { return a0_; }

    /// |g / sqrt(m)| under A^-1 and A'^-1.
    double current_norm(std::span<const double> g) const;
    double init_norm(std::span<const double> g) const;

private:
    Matrix a_inv_, a0_inv_, a_, a0_;
    double lambda_ = 1.0;
    double m_width_ = 1.0;
    std::size_t count_ = 0;
    std::size_t since_resync_ = 0;
    double logdet_a0_ = 0.0;
    Vector scratch_;
};

DesignState update_design(DesignState state, std::span<const double> g_current,
                          std::span<const double> g_init);

enum class UcbMode { empirical, theoretical };

struct LambdaSchedule {
    enum class Kind { inv_sqrt, inv_log, constant };
    Kind kind = Kind::inv_sqrt;
    double constant = 0.5;
    // Use per-arm pull counts instead of the round index when the environment
    // keeps arm identities fixed.
    bool per_arm = false;

    /// Weight on the initialization term, clamped into [0, 1].
    double weight(std::size_t t) const;
};

struct UcbConfig {
    UcbMode mode = UcbMode::empirical;
    double delta = 0.1;
    double S = 1.0;
    double c_bar = 1.0;
    LambdaSchedule schedule;
    double c_L = 1.0;
    double C1 = 1.0;
    double C2 = 1.0;
    double eta = 0.01;
    std::size_t J = 100;
    void validate() const;
};

struct Gammas {
    double g1 = 0.0, g2 = 0.0, g3 = 0.0, g4 = 0.0;
};

struct UcbBreakdown {
    std::vector<double> per_bandit;
    double shared = 0.0;
    double total = 0.0;
};

/// (1 - w) |g_t/sqrt(m)|_{A^-1} + w |g_0/sqrt(m)|_{A'^-1}
double empirical_bonus(const DesignState& s, std::span<const double> g_t,
                       std::span<const double> g_0, double w);
double empirical_bonus(const DesignState& s, std::span<const double> g_t,
                       std::span<const double> g_0, std::size_t t, const LambdaSchedule& schedule);

/// Coefficients of the single-network confidence bound for a network of
/// depth L and width m with ridge lambda after t rounds. `delta` is the
/// failure probability actually spent on this network.
Gammas gamma_terms(const UcbConfig& cfg, std::size_t t, double logdet_ratio, double lambda,
                   std::size_t depth, double m, double delta);

double theoretical_bonus(const DesignState& s, std::span<const double> g_t,
                         std::span<const double> g_0, const Gammas& gamma);

UcbBreakdown ucb_total(std::span<const double> per_bandit, double shared, double c_bar);

/// Number of times gamma_terms clamped a negative (1 - eta m lambda) factor.
std::uint64_t gamma_clamp_count() noexcept;

std::string to_string(UcbMode m);
UcbMode parse_ucb_mode(const std::string& s);
LambdaSchedule parse_schedule(const std::string& s);

}  // namespace mufasa
