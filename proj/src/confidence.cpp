#include "mufasa/confidence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "mufasa/error.hpp"
#include "mufasa/kernels.hpp"

namespace mufasa {
namespace {
std::atomic<std::uint64_t> g_gamma_clamps{0};
}

DesignState::DesignState(std::size_t dim, double lambda, double m_width)
    : a_inv_(Matrix::identity(dim, 1.0 / lambda)),
      a0_inv_(Matrix::identity(dim, 1.0 / lambda)),
      a_(Matrix::identity(dim, lambda)),
      a0_(Matrix::identity(dim, lambda)),
      lambda_(lambda),
      m_width_(m_width),
      logdet_a0_(static_cast<double>(dim) * std::log(lambda)) {
    if (!(lambda > 0.0)) throw ConfigError("design ridge lambda must be positive");
    if (!(m_width > 0.0)) throw ConfigError("design width scaling must be positive");
}

void DesignState::update(std::span<const double> g_current, std::span<const double> g_init) {
    const std::size_t n = dim();
    if (g_current.size() != n || g_init.size() != n) {
        throw ContractViolation("design update with gradient of " + std::to_string(g_current.size()) +
                                "/" + std::to_string(g_init.size()) + " entries, expected " +
                                std::to_string(n));
    }
    const double c = 1.0 / m_width_;
    sherman_morrison_update_inplace(a_inv_, g_current, c, scratch_);
    const double q0 = sherman_morrison_update_inplace(a0_inv_, g_init, c, scratch_);
    logdet_a0_ += std::log1p(c * q0);
    kernels::ger(a_.data(), n, n, c, g_current.data(), g_current.data());
    kernels::ger(a0_.data(), n, n, c, g_init.data(), g_init.data());
    ++count_;
    if (++since_resync_ >= kResyncInterval) {
        a_inv_ = direct_inverse(a_);
        a0_inv_ = direct_inverse(a0_);
        since_resync_ = 0;
    }
}

void DesignState::rebuild_current(std::span<const Vector> gradients) {
    const std::size_t n = dim();
    a_ = Matrix::identity(n, lambda_);
    const double c = 1.0 / m_width_;
    for (const Vector& g : gradients) {
        if (g.size() != n) throw ContractViolation("design rebuild with mismatched gradient");
        kernels::ger(a_.data(), n, n, c, g.data(), g.data());
    }
    a_inv_ = direct_inverse(a_);
}

double DesignState::logdet_ratio() const noexcept {
    return logdet_a0_ - static_cast<double>(dim()) * std::log(lambda_);
}

double DesignState::current_norm(std::span<const double> g) const {
    return quad_norm(a_inv_, g) / std::sqrt(m_width_);
}

double DesignState::init_norm(std::span<const double> g) const {
    return quad_norm(a0_inv_, g) / std::sqrt(m_width_);
}

DesignState update_design(DesignState state, std::span<const double> g_current,
                          std::span<const double> g_init) {
    state.update(g_current, g_init);
    return state;
}

double LambdaSchedule::weight(std::size_t t) const {
    const double x = static_cast<double>(t);
    double w = 0.0;
    switch (kind) {
        case Kind::inv_sqrt: w = 1.0 / std::sqrt(x + 1.0); break;
        case Kind::inv_log: w = 1.0 / std::log(x + 2.0); break;
        case Kind::constant: w = constant; break;
    }
    return std::clamp(w, 0.0, 1.0);
}

void UcbConfig::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("ucb delta must lie in (0, 1)");
    if (!(c_bar > 0.0)) throw ConfigError("ucb c_bar must be positive");
    if (schedule.kind == LambdaSchedule::Kind::constant &&
        !(schedule.constant >= 0.0 && schedule.constant <= 1.0)) {
        throw ConfigError("constant schedule value must lie in [0, 1]");
    }
}

double empirical_bonus(const DesignState& s, std::span<const double> g_t,
                       std::span<const double> g_0, double w) {
    double b = 0.0;
    if (w < 1.0) b += (1.0 - w) * s.current_norm(g_t);
    if (w > 0.0) b += w * s.init_norm(g_0);
    return b;
}

double empirical_bonus(const DesignState& s, std::span<const double> g_t,
                       std::span<const double> g_0, std::size_t t, const LambdaSchedule& schedule) {
    return empirical_bonus(s, g_t, g_0, schedule.weight(t));
}

Gammas gamma_terms(const UcbConfig& cfg, std::size_t t, double logdet_ratio, double lambda,
                   std::size_t depth, double m, double delta) {
    if (!(m > 1.0)) throw ContractViolation("gamma terms need width m > 1");
    if (!(delta > 0.0 && delta <= 1.0)) throw ContractViolation("gamma terms need delta in (0, 1]");
    const double tt = static_cast<double>(t);
    const double L = static_cast<double>(depth);
    const double logm = std::log(m);
    Gammas g;

    double base = 1.0 - cfg.eta * m * lambda;
    if (base < 0.0) {
        g_gamma_clamps.fetch_add(1, std::memory_order_relaxed);
        base = 0.0;
    }
    const double geometric = std::pow(base, static_cast<double>(cfg.J) / 2.0);
    g.g1 = (lambda + tt * cfg.c_L * L) * (geometric * std::sqrt(tt / lambda)) + 1.0;
    g.g2 = std::sqrt(std::max(0.0, logdet_ratio) - 2.0 * std::log(delta)) + std::sqrt(lambda) * cfg.S;
    const double width_factor = std::pow(m, -1.0 / 6.0) * std::sqrt(logm);
    g.g3 = cfg.C2 * width_factor * std::pow(tt, 1.0 / 6.0) * std::pow(lambda, -7.0 / 6.0) * std::pow(L, 3.5);
    g.g4 = cfg.C1 * width_factor * std::pow(tt, 2.0 / 3.0) * std::pow(lambda, -2.0 / 3.0) * L * L * L;
    return g;
}

double theoretical_bonus(const DesignState& s, std::span<const double> g_t,
                         std::span<const double> g_0, const Gammas& gamma) {
    return gamma.g1 * s.current_norm(g_t) + gamma.g2 * s.init_norm(g_0) + gamma.g1 * gamma.g3 +
           gamma.g4;
}

UcbBreakdown ucb_total(std::span<const double> per_bandit, double shared, double c_bar) {
    UcbBreakdown b;
    b.per_bandit.assign(per_bandit.begin(), per_bandit.end());
    b.shared = shared;
    if (!(shared >= 0.0)) throw ContractViolation("negative shared bonus");
    double sum = 0.0;
    for (double v : per_bandit) {
        if (!(v >= 0.0)) throw ContractViolation("negative per-bandit bonus");
        sum += v;
    }
    b.total = c_bar * sum + shared;
    return b;
}

std::uint64_t gamma_clamp_count() noexcept { return g_gamma_clamps.load(std::memory_order_relaxed); }

std::string to_string(UcbMode m) { return m == UcbMode::empirical ? "empirical" : "theoretical"; }

UcbMode parse_ucb_mode(const std::string& s) {
    if (s == "empirical") return UcbMode::empirical;
    if (s == "theoretical") return UcbMode::theoretical;
    throw ConfigError("unknown ucb mode '" + s + "' (empirical|theoretical)");
}

LambdaSchedule parse_schedule(const std::string& s) {
    LambdaSchedule out;
    if (s == "inv_sqrt") {
        out.kind = LambdaSchedule::Kind::inv_sqrt;
    } else if (s == "inv_log") {
        out.kind = LambdaSchedule::Kind::inv_log;
    } else if (s.rfind("constant", 0) == 0) {
        out.kind = LambdaSchedule::Kind::constant;
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw ConfigError("constant schedule needs a value, e.g. constant:0.5");
        try {
            out.constant = std::stod(s.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad constant schedule value in '" + s + "'");
        }
    } else {
        throw ConfigError("unknown schedule '" + s + "' (inv_sqrt|inv_log|constant:<w>)");
    }
    return out;
}

}  // namespace mufasa
