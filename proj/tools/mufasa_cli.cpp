// mufasa: run bandit experiments and NTK diagnostics from the command line.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mufasa/diagnostics.hpp"
#include "mufasa/error.hpp"
#include "mufasa/runner.hpp"

namespace {

constexpr std::size_t kMaxNtkContexts = 500;

// Contexts for the ntk command: one comma-separated row per context. A header
// row is skipped when its first cell is not numeric.
std::vector<mufasa::Vector> read_contexts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mufasa::ParseError("cannot open " + path);
    std::vector<mufasa::Vector> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        mufasa::Vector row;
        std::stringstream ss(line);
        std::string cell;
        bool header = false;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || *end != '\0') {
                if (lineno == 1 && row.empty()) {
                    header = true;
                    break;
                }
                throw mufasa::ParseError("non-numeric cell '" + cell + "'", lineno);
            }
            row.push_back(v);
        }
        if (header) continue;
        if (!line.empty() && line.back() == ',') throw mufasa::ParseError("empty cell", lineno);
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw mufasa::ParseError("expected " + std::to_string(rows.front().size()) + " columns, got " +
                                         std::to_string(row.size()),
                                     lineno);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw mufasa::ParseError("no contexts in " + path);
    return rows;
}

int cmd_run(const std::string& config) {
    const mufasa::RunConfig rc = mufasa::load_run_config(config);
    const std::vector<mufasa::RunLog> logs = mufasa::run_all(rc);
    for (const mufasa::RunLog& log : logs) {
        std::printf("%s seed %llu: cum_regret %.4f\n", log.agent.c_str(), static_cast<unsigned long long>(log.seed),
                    log.rounds.empty() ? 0.0 : log.rounds.back().cum_regret);
    }
    std::printf("wrote %s\n", rc.outdir.string().c_str());
    return 0;
}

int cmd_compare(const std::string& config) {
    const mufasa::RunConfig rc = mufasa::load_run_config(config);
    mufasa::compare(rc, std::cout);
    std::printf("wrote %s\n", (rc.outdir / "compare.csv").string().c_str());
    return 0;
}

int cmd_ntk(const std::string& csv, std::size_t depth, double lambda) {
    const std::vector<mufasa::Vector> ctx = read_contexts(csv);
    if (ctx.size() > kMaxNtkContexts) {
        throw mufasa::ContractViolation(std::to_string(ctx.size()) + " contexts exceed the limit of " +
                                        std::to_string(kMaxNtkContexts) + "; subsample the file first");
    }
    const mufasa::NtkResult ntk = mufasa::ntk_matrix(ctx, depth);
    const double p = mufasa::effective_dimension(ntk.M, ctx.size(), lambda);
    std::printf("T = %zu\n", ctx.size());
    std::printf("effective_dimension = %.10g\n", p);
    std::printf("top_eigenvalues =");
    for (double ev : mufasa::top_eigenvalues(ntk.M, 5)) std::printf(" %.10g", ev);
    std::printf("\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-facet contextual bandits with assembled neural networks"};
    app.require_subcommand(1);

    std::string run_config, compare_config, ntk_csv;
    std::size_t depth = 2;
    double lambda = 1.0;

    CLI::App* run = app.add_subcommand("run", "Play every configured agent and seed, writing CSV logs");
    run->add_option("config", run_config, "Run configuration file")->required();
    CLI::App* cmp = app.add_subcommand("compare", "Run several agents and write mean regret curves");
    cmp->add_option("config", compare_config, "Run configuration file")->required();
    CLI::App* ntk = app.add_subcommand("ntk", "Effective dimension of the NTK over CSV contexts");
    ntk->add_option("csv", ntk_csv, "One context per row")->required();
    ntk->add_option("--depth", depth, "Network depth L")->check(CLI::PositiveNumber);
    ntk->add_option("--lambda", lambda, "Regularization")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(run_config);
        if (*cmp) return cmd_compare(compare_config);
        if (*ntk) return cmd_ntk(ntk_csv, depth, lambda);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mufasa: %s\n", e.what());
        return 1;
    }
    return 0;
}
