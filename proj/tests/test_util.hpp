#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "snsce/rng.hpp"
#include "snsce/segmentation.hpp"
#include "snsce/types.hpp"

namespace snsce::testing {

/// Step profile observed through a single-tap sensor: |sqrt(p_n) + w|^2,
/// w ~ CN(0, mean(p) 10^(-snr/10)).
inline RVector noisy_profile(const RVector& p, double snr_db, Rng& rng) {
    const double var = p.mean() * std::pow(10.0, -snr_db / 10.0);
    RVector out(p.size());
    for (Eigen::Index n = 0; n < p.size(); ++n)
        out(n) = std::norm(std::sqrt(p(n)) + complex_normal(rng, var));
    return out;
}

inline RVector step_profile(int N, int at, double lo, double hi) {
    RVector p(N);
    for (int n = 0; n < N; ++n) p(n) = (n + 1 < at) ? lo : hi;
    return p;
}

inline CMatrix random_cmatrix(int r, int c, Rng& rng, double var = 1.0) {
    CMatrix m(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) m(i, j) = complex_normal(rng, var);
    return m;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
    MeanSe r;
    if (v.empty()) return r;
    for (double x : v) r.mean += x;
    r.mean /= v.size();
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - r.mean) * (x - r.mean);
        r.se = std::sqrt(ss / (v.size() - 1) / v.size());
    }
    return r;
}

// Exhaustive minimum-variance h-subset; ties go to the subset whose sorted
// values come first lexicographically.
inline McdEstimate brute_mcd(const std::vector<double>& w, int h) {
    const int W = static_cast<int>(w.size());
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_set;
    for (unsigned mask = 0; mask < (1u << W); ++mask) {
        if (std::popcount(mask) != h) continue;
        std::vector<double> s;
        for (int i = 0; i < W; ++i)
            if (mask & (1u << i)) s.push_back(w[i]);
        std::sort(s.begin(), s.end());
        const double mu = std::accumulate(s.begin(), s.end(), 0.0) / h;
        double ss = 0.0;
        for (double v : s) ss += (v - mu) * (v - mu);
        const double var = ss / (h - 1);
        const bool tie = std::isfinite(best) && std::abs(var - best) <= 1e-9 * std::max(best, 1e-300);
        if ((!tie && var < best) || (tie && s < best_set)) {
            if (!tie) best = var;
            best_set = s;
        }
    }
    McdEstimate e;
    e.subset = best_set;
    e.mu0 = std::accumulate(best_set.begin(), best_set.end(), 0.0) / h;
    double ss = 0.0;
    for (double v : best_set) ss += (v - e.mu0) * (v - e.mu0);
    e.sigma0 = mcd_c0(h, W) * ss / (h - 1);
    return e;
}

}  // namespace snsce::testing
