#pragma once
// Monte-Carlo evaluation of the NTK recursion for one pair of contexts, used
// to check the closed-form kernel. Each layer draws (a, b) from the 2x2
// Gaussian built from the previous layer's entries.

#include <cmath>

#include "mufasa/rng.hpp"
#include "mufasa/tensor.hpp"

namespace mufasa::testing {

struct PairKernel {
    double sii = 0.0, sjj = 0.0, sij = 0.0;  // Sigma entries
    double mij = 0.0;                        // M entry
    double ntk() const { return 0.5 * (mij + sij); }
};

inline PairKernel monte_carlo_ntk(const Vector& xi, const Vector& xj, std::size_t depth, std::size_t samples,
                                  std::uint64_t seed) {
    PairKernel k;
    for (std::size_t d = 0; d < xi.size(); ++d) {
        k.sii += xi[d] * xi[d];
        k.sjj += xj[d] * xj[d];
        k.sij += xi[d] * xj[d];
    }
    k.mij = k.sij;
    Rng rng(seed);
    for (std::size_t l = 1; l <= depth; ++l) {
        const double si = std::sqrt(k.sii);
        const double slope = k.sij / si;
        const double rest = std::sqrt(std::max(0.0, k.sjj - slope * slope));
        double e_aa = 0.0, e_bb = 0.0, e_ab = 0.0, e_dd = 0.0;
        for (std::size_t s = 0; s < samples; ++s) {
            const double z1 = rng.normal(), z2 = rng.normal();
            const double a = si * z1, b = slope * z1 + rest * z2;
            const double ra = a > 0 ? a : 0.0, rb = b > 0 ? b : 0.0;
            e_aa += ra * ra;
            e_bb += rb * rb;
            e_ab += ra * rb;
            e_dd += (a > 0 && b > 0) ? 1.0 : 0.0;
        }
        const double n = static_cast<double>(samples);
        k.sii = 2.0 * e_aa / n;
        k.sjj = 2.0 * e_bb / n;
        k.sij = 2.0 * e_ab / n;
        k.mij = k.mij * 2.0 * e_dd / n + k.sij;
    }
    return k;
}

}  // namespace mufasa::testing
