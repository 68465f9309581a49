#include "mufasa/diagnostics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mufasa/error.hpp"

namespace mufasa {

NtkResult ntk_matrix(std::span<const Vector> contexts, std::size_t depth) {
    if (depth == 0) throw ContractViolation("ntk_matrix: depth must be at least 1");
    const std::size_t T = contexts.size();
    for (std::size_t i = 0; i < T; ++i) {
        if (contexts[i].size() != contexts.front().size()) {
            throw ContractViolation("ntk_matrix: contexts have different dimensions");
        }
        if (norm2(contexts[i]) == 0.0) {
            throw ContractViolation("ntk_matrix: context " + std::to_string(i) + " has zero norm");
        }
    }
    Matrix sigma(T, T);
    for (std::size_t i = 0; i < T; ++i) {
        for (std::size_t j = i; j < T; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < contexts[i].size(); ++c) s += contexts[i][c] * contexts[j][c];
            sigma(i, j) = sigma(j, i) = s;
        }
    }
    Matrix m = sigma;
    auto trace = [T](const Matrix& a) {
        double s = 0.0;
        for (std::size_t i = 0; i < T; ++i) s += a(i, i);
        return s;
    };
    NtkResult out;
    out.sigma_trace.push_back(trace(sigma));
    out.m_trace.push_back(trace(m));

    constexpr double pi = std::numbers::pi;
    Matrix next(T, T);
    for (std::size_t l = 1; l <= depth; ++l) {
        for (std::size_t i = 0; i < T; ++i) {
            for (std::size_t j = i; j < T; ++j) {
                const double scale = std::sqrt(sigma(i, i) * sigma(j, j));
                const double c = std::clamp(sigma(i, j) / scale, -1.0, 1.0);
                const double theta = std::acos(c);
                const double s = scale / pi * (std::sin(theta) + (pi - theta) * c);
                next(i, j) = next(j, i) = s;
                const double mij = m(i, j) * (pi - theta) / pi + s;
                m(i, j) = m(j, i) = mij;
            }
        }
        std::swap(sigma, next);
        out.sigma_trace.push_back(trace(sigma));
        out.m_trace.push_back(trace(m));
    }
    out.M = Matrix(T, T);
    for (std::size_t i = 0; i < T; ++i) {
        for (std::size_t j = 0; j < T; ++j) out.M(i, j) = 0.5 * (m(i, j) + sigma(i, j));
    }
    return out;
}

double effective_dimension(const Matrix& M, std::size_t T, double lambda) {
    if (!(lambda > 0.0)) throw ContractViolation("effective_dimension: lambda must be positive");
    if (!M.square()) throw ContractViolation("effective_dimension: matrix is not square");
    if (T == 0) throw ContractViolation("effective_dimension: T must be positive");
    Matrix a = M;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) /= lambda;
        a(i, i) += 1.0;
    }
    return log_det(a) / std::log1p(static_cast<double>(T) / lambda);
}

std::vector<double> top_eigenvalues(const Matrix& M, std::size_t n) {
    if (!M.square()) throw ContractViolation("top_eigenvalues: matrix is not square");
    const Eigen::Index T = static_cast<Eigen::Index>(M.rows());
    Eigen::MatrixXd e(T, T);
    for (Eigen::Index i = 0; i < T; ++i) {
        for (Eigen::Index j = 0; j < T; ++j) e(i, j) = M(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(e, Eigen::EigenvaluesOnly);
    std::vector<double> ev(solver.eigenvalues().data(), solver.eigenvalues().data() + T);
    std::sort(ev.begin(), ev.end(), std::greater<>());
    if (ev.size() > n) ev.resize(n);
    return ev;
}

const char* const kRunLogHeader = "t,choice,R,H_clean,H_star,regret,cum_regret,ucb_width,branch";

std::string format_choice(const ArmIndices& a) {
    std::string s;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (k) s += '-';
        s += std::to_string(a[k]);
    }
    return s;
}

ArmIndices parse_choice(const std::string& s) {
    ArmIndices out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, '-')) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(part.c_str(), &end, 10);
        if (part.empty() || *end != '\0') throw ParseError("bad choice '" + s + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

double cell_double(const std::string& cell, std::size_t line, const char* column) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0') {
        throw ParseError(std::string("non-numeric ") + column + " '" + cell + "'", line);
    }
    return v;
}

}  // namespace

void write_run_header(std::ostream& os) { os << kRunLogHeader << '\n'; }

void write_run_row(std::ostream& os, const RoundRecord& r) {
    os << r.t << ',' << format_choice(r.choice) << ',' << num(r.R) << ',' << opt(r.h_clean) << ','
       << opt(r.h_star) << ',' << num(r.regret) << ',' << num(r.cum_regret) << ',' << num(r.ucb_width) << ','
       << to_string(r.branch) << '\n';
}

RunLog read_run_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty run log", 1);
    if (line != kRunLogHeader) throw ParseError("unexpected header '" + line + "'", 1);
    RunLog log;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() != 9) throw ParseError("expected 9 columns, got " + std::to_string(cells.size()), lineno);
        RoundRecord r;
        r.t = static_cast<std::size_t>(cell_double(cells[0], lineno, "t"));
        try {
            r.choice = parse_choice(cells[1]);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), lineno);
        }
        r.R = cell_double(cells[2], lineno, "R");
        if (!cells[3].empty()) r.h_clean = cell_double(cells[3], lineno, "H_clean");
        if (!cells[4].empty()) r.h_star = cell_double(cells[4], lineno, "H_star");
        r.regret = cell_double(cells[5], lineno, "regret");
        r.cum_regret = cell_double(cells[6], lineno, "cum_regret");
        r.ucb_width = cell_double(cells[7], lineno, "ucb_width");
        if (cells[8] == "all") {
            r.branch = Branch::all;
        } else if (cells[8] == "partial") {
            r.branch = Branch::partial;
        } else if (cells[8] == "none") {
            r.branch = Branch::none;
        } else {
            throw ParseError("unknown branch '" + cells[8] + "'", lineno);
        }
        log.rounds.push_back(std::move(r));
    }
    return log;
}

RegretSeries regret_series(const RunLog& log) {
    RegretSeries s;
    double cum = 0.0;
    for (const RoundRecord& r : log.rounds) {
        if (!r.h_clean || !r.h_star) {
            throw ContractViolation("regret_series: round " + std::to_string(r.t) + " has no oracle value");
        }
        const double reg = *r.h_star - *r.h_clean;
        cum += reg;
        s.per_round.push_back(reg);
        s.cumulative.push_back(cum);
    }
    return s;
}

double ucb_coverage(const RunLog& log) {
    if (log.rounds.empty()) return 0.0;
    std::size_t hit = 0, counted = 0;
    for (const RoundRecord& r : log.rounds) {
        if (!r.h_clean) continue;
        ++counted;
        if (std::abs(r.predicted - *r.h_clean) <= r.ucb_width) ++hit;
    }
    return counted ? static_cast<double>(hit) / static_cast<double>(counted) : 0.0;
}

}  // namespace mufasa
