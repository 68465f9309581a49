#include "mufasa/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mufasa/error.hpp"
#include "mufasa/kernels.hpp"

namespace mufasa {
namespace {

// Sub-stream identifiers for Rng::derive.
constexpr std::uint64_t kArmStream = 0x41524d53;     // per-round arm draws
constexpr std::uint64_t kNoiseStream = 0x4e4f4953;   // per-round reward noise
constexpr std::uint64_t kHiddenStream = 0x48494444;  // hidden vectors a_k
constexpr std::uint64_t kPermStream = 0x5045524d;    // dataset epoch order

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void rescale_by_max_norm(std::vector<DatasetRound>& rows) {
    double max_norm = 0.0;
    for (const DatasetRound& r : rows) max_norm = std::max(max_norm, norm2(r.x));
    if (max_norm > 0.0) {
        for (DatasetRound& r : rows) {
            for (double& v : r.x) v /= max_norm;
        }
    }
}

}  // namespace

Vector unit_ball(Rng& rng, std::size_t d) {
    Vector x(d);
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (double& v : x) {
            v = rng.normal();
            n2 += v * v;
        }
    } while (n2 == 0.0);
    const double radius = std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    const double s = radius / std::sqrt(n2);
    for (double& v : x) v *= s;
    return x;
}

Dataset ingest_csv(const std::filesystem::path& path, std::size_t classes) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    std::string line;
    long line_no = 0;
    std::size_t columns = 0;
    Dataset ds;
    std::size_t max_label = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_csv(line);
        if (columns == 0) {
            if (trim(cells.front()) != "label" || cells.size() < 2) {
                throw ParseError("header must be 'label,f0,f1,...'", line_no);
            }
            columns = cells.size();
            continue;
        }
        if (cells.size() != columns) {
            throw ParseError("expected " + std::to_string(columns) + " cells, found " +
                                 std::to_string(cells.size()),
                             line_no);
        }
        DatasetRound row;
        {
            const std::string s = trim(cells[0]);
            char* end = nullptr;
            const long label = std::strtol(s.c_str(), &end, 10);
            if (s.empty() || *end != '\0' || label < 0) {
                throw ParseError("label '" + s + "' is not a non-negative integer", line_no);
            }
            row.label = static_cast<std::size_t>(label);
            if (classes > 0 && row.label >= classes) {
                throw ParseError("label " + s + " outside 0.." + std::to_string(classes - 1), line_no);
            }
        }
        row.x.resize(columns - 1);
        for (std::size_t c = 1; c < columns; ++c) {
            const std::string s = trim(cells[c]);
            char* end = nullptr;
            row.x[c - 1] = std::strtod(s.c_str(), &end);
            if (s.empty() || *end != '\0' || !std::isfinite(row.x[c - 1])) {
                throw ParseError("cell " + std::to_string(c) + " ('" + s + "') is not numeric", line_no);
            }
        }
        max_label = std::max(max_label, row.label);
        ds.rows.push_back(std::move(row));
    }
    if (columns == 0) throw ParseError("empty file " + path.string(), line_no);
    if (ds.rows.empty()) throw ParseError("no data rows in " + path.string(), line_no);
    ds.dim = columns - 1;
    ds.classes = classes > 0 ? classes : max_label + 1;
    rescale_by_max_norm(ds.rows);
    return ds;
}

Dataset synthetic_dataset(std::size_t classes, std::size_t dim, std::size_t rows, double spread,
                          std::uint64_t seed) {
    if (classes < 2 || dim < 1 || rows < 1) throw ConfigError("synthetic dataset needs >= 2 classes, dim >= 1, rows >= 1");
    Rng rng(seed);
    std::vector<Vector> centres(classes);
    for (Vector& c : centres) {
        c = unit_ball(rng, dim);
        const double n = norm2(c);
        for (double& v : c) v /= n;
    }
    Dataset ds;
    ds.classes = classes;
    ds.dim = dim;
    ds.rows.resize(rows);
    const double sd = spread / std::sqrt(static_cast<double>(dim));
    for (DatasetRound& r : ds.rows) {
        r.label = rng.uniform_index(classes);
        r.x = centres[r.label];
        for (double& v : r.x) v += sd * rng.normal();
    }
    rescale_by_max_norm(ds.rows);
    return ds;
}

void EnvSpec::validate() const {
    const std::size_t K = bandits.size();
    if (K == 0) throw ConfigError("env.K must be at least 1");
    for (std::size_t k = 0; k < K; ++k) {
        const BanditEnvSpec& b = bandits[k];
        const std::string where = "env bandit " + std::to_string(k) + ": ";
        if (b.kind == SubRewardKind::dataset) {
            if (!b.data) throw ConfigError(where + "dataset sub-reward needs a dataset");
            const std::size_t pool = b.pool_size == 0 ? b.data->classes : b.pool_size;
            if (pool < 1 || pool > b.data->classes) {
                throw ConfigError(where + "pool_size must lie in 1.." + std::to_string(b.data->classes));
            }
        } else {
            if (b.dim < 1) throw ConfigError(where + "dim must be positive");
            if (b.arms < 1) throw ConfigError(where + "arms must be positive");
            if (!b.hidden.empty() && b.hidden.size() != b.dim) {
                throw ConfigError(where + "hidden vector length differs from dim");
            }
        }
    }
    if (final_kind == FinalRewardKind::weights && weights.size() != K) {
        throw ConfigError("env.weights must list one weight per bandit");
    }
    if (!(c_bar > 0.0)) throw ConfigError("env.c_bar must be positive");
    if (!(noise_sigma >= 0.0) || !(sub_noise_sigma >= 0.0)) throw ConfigError("noise levels must be non-negative");
    for (std::size_t k : mask_subset) {
        if (k >= K) throw ConfigError("env.mask lists bandit " + std::to_string(k) + " but K = " + std::to_string(K));
    }
    if (tradeoff) {
        if (K != 2) throw ConfigError("tradeoff environments have exactly two bandits");
        for (const BanditEnvSpec& b : bandits) {
            if (b.kind != SubRewardKind::dataset || b.data->classes != 2) {
                throw ConfigError("tradeoff environments need two-class dataset bandits");
            }
        }
    }
}

double default_c_bar(FinalRewardKind kind, std::span<const double> weights) {
    switch (kind) {
        case FinalRewardKind::h1_sum: return 1.0;
        case FinalRewardKind::h2_weighted: return 2.0;
        case FinalRewardKind::weights: return norm2(weights);
        case FinalRewardKind::nonlinear_sqrt: return 1.0;
    }
    return 1.0;
}

double tight_lipschitz(const EnvSpec& spec) {
    const double K = static_cast<double>(spec.bandit_count());
    switch (spec.final_kind) {
        case FinalRewardKind::h1_sum: return std::sqrt(K);
        case FinalRewardKind::h2_weighted: return std::sqrt(4.0 + (K - 1.0));
        case FinalRewardKind::weights: return norm2(spec.weights);
        case FinalRewardKind::nonlinear_sqrt: return std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::infinity();
}

Environment::Environment(EnvSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
    spec_.validate();
    const std::size_t K = spec_.bandit_count();
    labels_.assign(K, 0);
    row_dim_.assign(K, 0);
    perm_.resize(K);
    perm_epoch_.assign(K, std::numeric_limits<std::size_t>::max());
    for (std::size_t k = 0; k < K; ++k) {
        BanditEnvSpec& b = spec_.bandits[k];
        if (b.kind == SubRewardKind::dataset) {
            row_dim_[k] = b.data->dim;
            b.dim = b.data->classes * b.data->dim;
            b.arms = b.pool_size == 0 ? b.data->classes : b.pool_size;
        } else if (b.hidden.empty()) {
            Rng rng(Rng::derive(seed_, kHiddenStream + k));
            b.hidden = unit_ball(rng, b.dim);
        }
        if (b.kind != SubRewardKind::dataset) {
            const double n = norm2(b.hidden);
            if (!(n > 0.0)) throw ConfigError("hidden vector must be non-zero");
            for (double& v : b.hidden) v /= n;
        }
    }
}

std::size_t Environment::dataset_row(std::size_t k, std::size_t t) {
    const std::size_t n = spec_.bandits[k].data->rows.size();
    const std::size_t epoch = t / n;
    if (perm_epoch_[k] != epoch) {
        if (perm_epoch_[k] != std::numeric_limits<std::size_t>::max() && epoch > perm_epoch_[k]) ++reshuffles_;
        std::vector<std::size_t>& p = perm_[k];
        p.resize(n);
        std::iota(p.begin(), p.end(), std::size_t{0});
        Rng rng(Rng::derive(Rng::derive(seed_, kPermStream + k), epoch));
        for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.uniform_index(i)]);
        perm_epoch_[k] = epoch;
    }
    return perm_[k][t % n];
}

RoundArms Environment::gen_round(std::size_t t) {
    Rng rng(Rng::derive(Rng::derive(seed_, kArmStream), t));
    const std::size_t K = spec_.bandit_count();
    RoundArms round;
    round.bandits.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        const BanditEnvSpec& b = spec_.bandits[k];
        ArmSet& set = round.bandits[k];
        if (b.kind != SubRewardKind::dataset) {
            set.arms.reserve(b.arms);
            for (std::size_t i = 0; i < b.arms; ++i) set.arms.push_back(unit_ball(rng, b.dim));
            continue;
        }
        const DatasetRound& row = b.data->rows[dataset_row(k, t)];
        labels_[k] = row.label;
        const std::size_t C = b.data->classes;
        std::vector<std::size_t> pool;
        if (b.arms == C) {
            pool.resize(C);
            std::iota(pool.begin(), pool.end(), std::size_t{0});
        } else {
            // Correct class plus a random subset of the others.
            std::vector<std::size_t> others;
            for (std::size_t c = 0; c < C; ++c) {
                if (c != row.label) others.push_back(c);
            }
            for (std::size_t i = others.size(); i > 1; --i) std::swap(others[i - 1], others[rng.uniform_index(i)]);
            pool.assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(b.arms - 1));
            pool.push_back(row.label);
            std::sort(pool.begin(), pool.end());
        }
        for (std::size_t c : pool) {
            Vector x(b.dim, 0.0);
            std::copy(row.x.begin(), row.x.end(), x.begin() + static_cast<std::ptrdiff_t>(c * row_dim_[k]));
            set.arms.push_back(std::move(x));
            set.ids.push_back(c);
        }
    }
    if (spec_.tradeoff) {
        // With two classes the arm at position c is class c.
        const std::size_t l1 = labels_[0], l2 = labels_[1];
        std::vector<ArmIndices> allowed{{l1, 1 - l2}, {1 - l1, l2}};
        std::sort(allowed.begin(), allowed.end());
        round.allowed = std::move(allowed);
    }
    return round;
}

double Environment::sub_reward(std::size_t k, std::span<const double> x) const {
    const BanditEnvSpec& b = spec_.bandits.at(k);
    if (x.size() != b.dim) {
        throw ContractViolation("sub_reward: arm of " + std::to_string(x.size()) + " entries for bandit of dim " +
                                std::to_string(b.dim));
    }
    if (b.kind == SubRewardKind::dataset) {
        // The arm's class is the block holding its features.
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] != 0.0) return (i / row_dim_[k]) == labels_[k] ? 1.0 : 0.0;
        }
        return 0.0;
    }
    const double z = kernels::dot(b.hidden.data(), x.data(), x.size());
    switch (b.kind) {
        case SubRewardKind::linear: return z;
        case SubRewardKind::square: return z * z;
        case SubRewardKind::cosine: return 0.5 * (std::cos(3.0 * z) + 1.0);
        case SubRewardKind::dataset: break;
    }
    throw ConfigError("unknown sub-reward kind");
}

double Environment::final_reward(std::span<const double> r) const {
    const std::size_t K = spec_.bandit_count();
    if (r.size() != K) {
        throw ContractViolation("final_reward: " + std::to_string(r.size()) + " sub-rewards for K = " + std::to_string(K));
    }
    double s = 0.0;
    switch (spec_.final_kind) {
        case FinalRewardKind::h1_sum:
            for (double v : r) s += v;
            return s;
        case FinalRewardKind::h2_weighted:
            for (std::size_t k = 0; k < K; ++k) s += (k == 0 ? 2.0 : 1.0) * r[k];
            return s;
        case FinalRewardKind::weights:
            for (std::size_t k = 0; k < K; ++k) s += spec_.weights[k] * r[k];
            return s;
        case FinalRewardKind::nonlinear_sqrt:
            for (double v : r) s += std::max(v, 0.0);
            return std::sqrt(s);
    }
    throw ConfigError("unknown final-reward kind");
}

double Environment::expected(const Combination& c) const {
    Vector r(c.features.size());
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = sub_reward(k, c.features[k]);
    return final_reward(r);
}

Observation Environment::observe(std::size_t t, const Combination& c) const {
    const std::size_t K = spec_.bandit_count();
    if (c.features.size() != K) throw ContractViolation("observe: combination does not cover every bandit");
    Observation obs;
    obs.clean_sub_rewards.resize(K);
    for (std::size_t k = 0; k < K; ++k) obs.clean_sub_rewards[k] = sub_reward(k, c.features[k]);
    obs.h_clean = final_reward(obs.clean_sub_rewards);

    Rng rng(Rng::derive(Rng::derive(seed_, kNoiseStream), t));
    const double eps = rng.normal();
    obs.final_reward = obs.h_clean + spec_.noise_sigma * eps;
    for (std::size_t k = 0; k < K; ++k) {
        const bool revealed = spec_.mask == MaskKind::all ||
                              (spec_.mask == MaskKind::subset && spec_.mask_subset.count(k) > 0);
        const double e = rng.normal();
        if (revealed) obs.sub_rewards[k] = obs.clean_sub_rewards[k] + spec_.sub_noise_sigma * e;
    }
    return obs;
}

Environment::Best Environment::oracle_best(const RoundArms& round, std::size_t cap) const {
    const std::size_t K = round.bandit_count();
    std::vector<Vector> per_arm(K);
    for (std::size_t k = 0; k < K; ++k) {
        for (const Vector& x : round.bandits[k].arms) per_arm[k].push_back(sub_reward(k, x));
    }
    Best best;
    best.value = -std::numeric_limits<double>::infinity();
    Vector r(K);
    for (const ArmIndices& idx : enumerate_combinations(round, cap)) {
        for (std::size_t k = 0; k < K; ++k) r[k] = per_arm[k][idx[k]];
        const double h = final_reward(r);
        if (h > best.value) {
            best.value = h;
            best.arms = idx;
        }
    }
    return best;
}

std::size_t lipschitz_audit(const Environment& env, double c_bar, std::size_t pairs, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t K = env.bandit_count();
    Vector r(K), q(K);
    std::size_t failures = 0;
    for (std::size_t i = 0; i < pairs; ++i) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            r[k] = 2.0 * rng.uniform() - 1.0;
            q[k] = 2.0 * rng.uniform() - 1.0;
            d2 += (r[k] - q[k]) * (r[k] - q[k]);
        }
        if (std::abs(env.final_reward(r) - env.final_reward(q)) > c_bar * std::sqrt(d2) + 1e-12) ++failures;
    }
    return failures;
}

std::string to_string(SubRewardKind k) {
    switch (k) {
        case SubRewardKind::linear: return "linear";
        case SubRewardKind::square: return "square";
        case SubRewardKind::cosine: return "cosine";
        case SubRewardKind::dataset: return "dataset";
    }
    return "?";
}

std::string to_string(FinalRewardKind k) {
    switch (k) {
        case FinalRewardKind::h1_sum: return "h1_sum";
        case FinalRewardKind::h2_weighted: return "h2_weighted";
        case FinalRewardKind::weights: return "weights";
        case FinalRewardKind::nonlinear_sqrt: return "nonlinear_sqrt";
    }
    return "?";
}

SubRewardKind parse_sub_reward(const std::string& s) {
    if (s == "linear") return SubRewardKind::linear;
    if (s == "square") return SubRewardKind::square;
    if (s == "cosine") return SubRewardKind::cosine;
    if (s == "dataset") return SubRewardKind::dataset;
    throw ConfigError("unknown sub-reward kind '" + s + "' (linear|square|cosine|dataset)");
}

FinalRewardKind parse_final_reward(const std::string& s) {
    if (s == "h1_sum" || s == "h1") return FinalRewardKind::h1_sum;
    if (s == "h2_weighted" || s == "h2") return FinalRewardKind::h2_weighted;
    if (s == "weights") return FinalRewardKind::weights;
    if (s == "nonlinear_sqrt") return FinalRewardKind::nonlinear_sqrt;
    throw ConfigError("unknown final-reward kind '" + s + "' (h1_sum|h2_weighted|weights|nonlinear_sqrt)");
}

}  // namespace mufasa
