#pragma once
// Post-hoc analysis: the infinite-width NTK over a set of contexts, the
// log-det effective dimension, regret accounting and UCB coverage.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mufasa/bandit.hpp"
#include "mufasa/tensor.hpp"

namespace mufasa {

struct NtkResult {
    Matrix M;                        // T x T kernel
    std::vector<double> sigma_trace;  // trace of Sigma^l, l = 0..L
    std::vector<double> m_trace;      // trace of M^l, l = 0..L
};

/// Closed-form NTK of a depth-L bias-free ReLU network. Throws
/// ContractViolation for L = 0 or a zero-norm context.
NtkResult ntk_matrix(std::span<const Vector> contexts, std::size_t depth);

/// log det(I + M / lambda) / log(1 + T / lambda).
double effective_dimension(const Matrix& M, std::size_t T, double lambda);

/// The n largest eigenvalues of a symmetric matrix, descending.
std::vector<double> top_eigenvalues(const Matrix& M, std::size_t n);

struct RoundRecord {
    std::size_t t = 0;  // 1-based
    ArmIndices choice;
    double R = 0.0;
    std::optional<double> h_clean;
    std::optional<double> h_star;
    double regret = 0.0;
    double cum_regret = 0.0;
    double ucb_width = 0.0;
    double predicted = 0.0;  // not part of the CSV schema
    Branch branch = Branch::none;
};

struct RunLog {
    std::string agent;
    std::uint64_t seed = 0;
    std::string config_snapshot;
    std::vector<RoundRecord> rounds;
};

extern const char* const kRunLogHeader;

/// "i-j-..." rendering of a combination.
std::string format_choice(const ArmIndices& a);
ArmIndices parse_choice(const std::string& s);

void write_run_header(std::ostream& os);
void write_run_row(std::ostream& os, const RoundRecord& r);
/// Reads a log written by write_run_header/write_run_row. Throws ParseError.
RunLog read_run_csv(const std::filesystem::path& path);

struct RegretSeries {
    std::vector<double> per_round;
    std::vector<double> cumulative;
};
/// Regret from the clean values. Throws ContractViolation when a round lacks
/// h_clean or h_star.
RegretSeries regret_series(const RunLog& log);

/// Fraction of rounds with |predicted - h_clean| <= ucb_width.
double ucb_coverage(const RunLog& log);

}  // namespace mufasa
