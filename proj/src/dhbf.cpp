#include "snsce/dhbf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace snsce {

IndexList prune_subarrays(const RVector& power, const SegmentationResult& seg, double eta) {
    if (!(eta >= 0.0)) throw ConfigError("prune threshold must be non-negative");
    IndexList on;
    const auto ranges = seg.ranges();
    for (int s = 0; s < static_cast<int>(ranges.size()); ++s) {
        const auto [b, e] = ranges[s];
        if (e > power.size()) throw std::invalid_argument("segmentation longer than the power profile");
        if (power.segment(b, e - b).mean() > eta) on.push_back(s);
    }
    if (on.empty()) throw EmptySceneError("every subarray is below the prune threshold");
    return on;
}

int RfAllocation::max_load() const {
    int m = 0;
    for (const auto& c : classes) m = std::max(m, static_cast<int>(c.size()));
    return m;
}

int RfAllocation::class_elements(int chain) const {
    int total = 0;
    for (int s : classes[chain]) total += sizes[s];
    return total;
}

namespace {

std::vector<int> by_size_descending(const std::vector<int>& sizes) {
    std::vector<int> order(sizes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sizes[a] > sizes[b]; });
    return order;
}

void check_allocation_inputs(const std::vector<int>& sizes, int N_RF) {
    if (sizes.empty()) throw ConfigError("no subarrays to allocate");
    if (N_RF < 1) throw ConfigError("N_RF must be at least 1");
    for (int s : sizes)
        if (s < 1) throw ConfigError("subarray sizes must be positive");
}

}  // namespace

RfAllocation mef_gaa(const std::vector<int>& sizes, int N_RF) {
    check_allocation_inputs(sizes, N_RF);
    RfAllocation a;
    a.sizes = sizes;
    a.classes.assign(N_RF, {});
    const std::vector<int> order = by_size_descending(sizes);
    const int NS = static_cast<int>(sizes.size());

    if (NS >= N_RF) {
        std::vector<long> load(N_RF, 0);
        for (int s : order) {
            const int k = static_cast<int>(std::min_element(load.begin(), load.end()) - load.begin());
            a.classes[k].push_back(s);
            load[k] += sizes[s];
        }
    } else {
        for (int c = 0; c < N_RF; ++c) a.classes[c].push_back(order[c % NS]);
    }
    return a;
}

RfAllocation random_allocation(const std::vector<int>& sizes, int N_RF, Rng& rng) {
    check_allocation_inputs(sizes, N_RF);
    RfAllocation a;
    a.sizes = sizes;
    a.classes.assign(N_RF, {});
    const int NS = static_cast<int>(sizes.size());
    std::vector<int> perm(NS);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    if (NS >= N_RF) {
        for (int i = 0; i < NS; ++i) {
            const int c = i < N_RF ? i : static_cast<int>(rng() % static_cast<unsigned>(N_RF));
            a.classes[c].push_back(perm[i]);
        }
    } else {
        for (int c = 0; c < N_RF; ++c)
            a.classes[c].push_back(c < NS ? perm[c] : perm[rng() % static_cast<unsigned>(NS)]);
    }
    return a;
}

MeasurementPlan build_combiners(const RfAllocation& alloc, const std::vector<ElementRange>& subarrays,
                                int N, int P, double noise_var, Rng& rng) {
    if (alloc.sizes.size() != subarrays.size())
        throw ConfigError("allocation and subarray list disagree");
    if (P < 1) throw ConfigError("pilot count must be positive");
    if (P < alloc.max_load())
        throw PilotError("P = " + std::to_string(P) + " is below the chain load " +
                         std::to_string(alloc.max_load()));
    for (std::size_t s = 0; s < subarrays.size(); ++s) {
        const auto [b, e] = subarrays[s];
        if (b < 0 || e > N || e - b != alloc.sizes[s]) throw ConfigError("subarray range out of bounds");
    }

    MeasurementPlan plan;
    plan.N = N;
    plan.P = P;
    plan.noise_var = noise_var;
    plan.subarrays = subarrays;
    plan.alloc = alloc;
    plan.effective_pilots.assign(subarrays.size(), 0);
    const int R = alloc.chains();
    plan.schedule.assign(R, std::vector<int>(P, -1));
    plan.combiners.assign(P, CMatrix::Zero(R, N));

    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    for (int p = 0; p < P; ++p) {
        for (int c = 0; c < R; ++c) {
            const int load = alloc.load(c);
            if (load == 0) continue;
            const int s = alloc.classes[c][p % load];
            plan.schedule[c][p] = s;
            ++plan.effective_pilots[s];
            const auto [b, e] = subarrays[s];
            const double scale = 1.0 / std::sqrt(static_cast<double>(e - b));
            for (int n = b; n < e; ++n) plan.combiners[p](c, n) = std::polar(scale, phase(rng));
        }
    }
    return plan;
}

std::vector<CMatrix> simulate_reception(const CMatrix& H, const MeasurementPlan& plan, Rng& rng) {
    if (H.rows() != plan.N) throw std::invalid_argument("channel and plan disagree on N");
    std::vector<CMatrix> y;
    y.reserve(plan.P);
    CMatrix noise(H.rows(), H.cols());
    for (int p = 0; p < plan.P; ++p) {
        if (plan.noise_var > 0.0) {
            for (Eigen::Index m = 0; m < H.cols(); ++m)
                for (Eigen::Index n = 0; n < H.rows(); ++n) noise(n, m) = complex_normal(rng, plan.noise_var);
            y.push_back(plan.combiners[p] * (H + noise));
        } else {
            y.push_back(plan.combiners[p] * H);
        }
    }
    return y;
}

std::vector<SubarrayObservation> decouple(const std::vector<CMatrix>& y, const MeasurementPlan& plan) {
    if (static_cast<int>(y.size()) != plan.P) throw std::invalid_argument("schedule mismatch: slot count");
    const int R = plan.alloc.chains();
    const Eigen::Index M = y.empty() ? 0 : y.front().cols();
    for (const CMatrix& yp : y)
        if (yp.rows() != R || yp.cols() != M) throw std::invalid_argument("schedule mismatch: slot shape");

    std::vector<SubarrayObservation> out(plan.subarrays.size());
    std::vector<int> filled(plan.subarrays.size(), 0);
    for (std::size_t s = 0; s < out.size(); ++s) {
        const auto [b, e] = plan.subarrays[s];
        out[s].range = plan.subarrays[s];
        out[s].noise_var = plan.noise_var;
        out[s].Y.resize(plan.effective_pilots[s], M);
        out[s].Phi.resize(plan.effective_pilots[s], e - b);
    }
    for (int p = 0; p < plan.P; ++p) {
        for (int c = 0; c < R; ++c) {
            const int s = plan.schedule[c][p];
            if (s < 0) continue;
            const auto [b, e] = plan.subarrays[s];
            const int row = filled[s]++;
            out[s].Y.row(row) = y[p].row(c);
            out[s].Phi.row(row) = plan.combiners[p].block(c, b, 1, e - b);
        }
    }
    return out;
}

std::vector<SubarrayObservation> fully_connected_observations(const CMatrix& H,
                                                              const std::vector<ElementRange>& subarrays,
                                                              int N_RF, int P, double noise_var,
                                                              Rng& combiner_rng, Rng& noise_rng) {
    const int NS = static_cast<int>(subarrays.size());
    const int N = static_cast<int>(H.rows());
    const Eigen::Index M = H.cols();
    if (NS < 1) throw ConfigError("no subarrays to observe");
    if (N_RF < 1) throw ConfigError("N_RF must be at least 1");
    if (P < NS) throw PilotError("P = " + std::to_string(P) + " is below the subarray count " + std::to_string(NS));
    int n_on = 0;
    for (const auto& [b, e] : subarrays) {
        if (b < 0 || e > N || e <= b) throw ConfigError("subarray range out of bounds");
        n_on += e - b;
    }
    const int groups = P / NS;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_on));

    std::vector<SubarrayObservation> out(NS);
    for (int s = 0; s < NS; ++s) {
        out[s].range = subarrays[s];
        out[s].Y.resize(static_cast<Eigen::Index>(groups) * N_RF, M);
        out[s].Phi.resize(static_cast<Eigen::Index>(groups) * N_RF, subarrays[s].second - subarrays[s].first);
        out[s].noise_var = noise_var / NS;
    }

    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    auto code = [&](int t, int s) { return std::polar(1.0, -2.0 * kPi * t * s / NS); };
    CMatrix noise(N, M);
    for (int g = 0; g < groups; ++g) {
        // Per chain, one random-phase row piece per subarray.
        std::vector<CMatrix> u(NS, CMatrix::Zero(N_RF, N));
        for (int s = 0; s < NS; ++s)
            for (int c = 0; c < N_RF; ++c)
                for (int n = subarrays[s].first; n < subarrays[s].second; ++n)
                    u[s](c, n) = std::polar(scale, phase(combiner_rng));
        std::vector<CMatrix> decoded(NS, CMatrix::Zero(N_RF, M));
        for (int t = 0; t < NS; ++t) {
            CMatrix Ut = CMatrix::Zero(N_RF, N);
            for (int s = 0; s < NS; ++s) Ut += code(t, s) * u[s];
            CMatrix y;
            if (noise_var > 0.0) {
                for (Eigen::Index m = 0; m < M; ++m)
                    for (int n = 0; n < N; ++n) noise(n, m) = complex_normal(noise_rng, noise_var);
                y = Ut * (H + noise);
            } else {
                y = Ut * H;
            }
            for (int s = 0; s < NS; ++s) decoded[s] += std::conj(code(t, s)) / static_cast<double>(NS) * y;
        }
        for (int s = 0; s < NS; ++s) {
            const auto [b, e] = subarrays[s];
            out[s].Y.middleRows(static_cast<Eigen::Index>(g) * N_RF, N_RF) = decoded[s];
            out[s].Phi.middleRows(static_cast<Eigen::Index>(g) * N_RF, N_RF) = u[s].middleCols(b, e - b);
        }
    }
    return out;
}

}  // namespace snsce
