#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "snsce/dhbf.hpp"
#include "test_util.hpp"

using namespace snsce;
using snsce::testing::random_cmatrix;

namespace {

std::vector<ElementRange> contiguous(const std::vector<int>& sizes) {
    std::vector<ElementRange> out;
    int b = 0;
    for (int s : sizes) {
        out.emplace_back(b, b + s);
        b += s;
    }
    return out;
}

// Smallest achievable max-minus-min class element count over all assignments
// that leave no class empty.
int best_spread(const std::vector<int>& sizes, int R) {
    const int NS = static_cast<int>(sizes.size());
    std::vector<int> a(NS, 0);
    int best = std::numeric_limits<int>::max();
    while (true) {
        std::vector<int> load(R, 0), cnt(R, 0);
        for (int i = 0; i < NS; ++i) {
            load[a[i]] += sizes[i];
            ++cnt[a[i]];
        }
        if (*std::min_element(cnt.begin(), cnt.end()) > 0)
            best = std::min(best, *std::max_element(load.begin(), load.end()) -
                                      *std::min_element(load.begin(), load.end()));
        int i = 0;
        while (i < NS && ++a[i] == R) a[i++] = 0;
        if (i == NS) break;
    }
    return best;
}

}  // namespace

TEST_CASE("prune_subarrays") {
    const SegmentationResult seg = segmentation_from_breakpoints({1, 5, 9, 13}, 12);
    RVector p(12);
    p << 3, 3, 3, 3, 1, 1, 1, 1, 5, 5, 5, 5;

    SUBCASE("eta = 0 keeps every subarray") { CHECK(prune_subarrays(p, seg, 0.0) == IndexList{0, 1, 2}); }
    SUBCASE("a subarray at the noise floor goes off") {
        // Noise floor 1: the middle subarray sits exactly on it.
        CHECK(prune_subarrays(p, seg, 2.0 * 1.0) == IndexList{0, 2});
    }
    SUBCASE("the comparison is strict") { CHECK(prune_subarrays(p, seg, 3.0) == IndexList{2}); }
    SUBCASE("infinite threshold empties the scene") {
        CHECK_THROWS_AS(prune_subarrays(p, seg, std::numeric_limits<double>::infinity()), EmptySceneError);
    }
    SUBCASE("negative threshold") { CHECK_THROWS_AS(prune_subarrays(p, seg, -1.0), ConfigError); }
}

TEST_CASE("mef_gaa examples") {
    SUBCASE("more chains than subarrays") {
        const RfAllocation a = mef_gaa({6, 3}, 4);
        CHECK(a.chains() == 4);
        CHECK(a.max_load() == 1);
        std::vector<int> served(2, 0);
        for (const auto& c : a.classes) {
            REQUIRE(c.size() == 1);
            ++served[c[0]];
        }
        CHECK(served == std::vector<int>{2, 2});
    }
    SUBCASE("greedy balance") {
        const RfAllocation a = mef_gaa({5, 4, 3, 2}, 2);
        // sizes index: 0->5, 1->4, 2->3, 3->2
        CHECK(a.classes[0] == IndexList{0, 3});
        CHECK(a.classes[1] == IndexList{1, 2});
        CHECK(a.class_elements(0) == 7);
        CHECK(a.class_elements(1) == 7);
    }
    SUBCASE("single subarray, two chains") {
        const RfAllocation a = mef_gaa({8}, 2);
        CHECK(a.classes[0] == IndexList{0});
        CHECK(a.classes[1] == IndexList{0});
        Rng rng(3);
        const MeasurementPlan plan = build_combiners(a, contiguous({8}), 8, 6, 0.0, rng);
        CHECK(plan.effective_pilots[0] == 12);
    }
    SUBCASE("ties go to the lowest class") {
        const RfAllocation a = mef_gaa({4, 4, 4}, 2);
        CHECK(a.classes[0] == IndexList{0, 2});
        CHECK(a.classes[1] == IndexList{1});
    }
    SUBCASE("bad input") {
        CHECK_THROWS_AS(mef_gaa({}, 2), ConfigError);
        CHECK_THROWS_AS(mef_gaa({3}, 0), ConfigError);
    }
}

TEST_CASE("mef_gaa properties against exhaustive assignment") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int NS = 1 + static_cast<int>(rng() % 8);
        const int R = 1 + static_cast<int>(rng() % 3);
        std::vector<int> sizes(NS);
        for (int& s : sizes) s = 1 + static_cast<int>(rng() % 20);
        const RfAllocation a = mef_gaa(sizes, R);
        CAPTURE(NS);
        CAPTURE(R);

        std::vector<int> seen(NS, 0);
        for (const auto& c : a.classes)
            for (int s : c) ++seen[s];
        if (NS >= R) {
            // Disjoint cover, no idle chain.
            for (int v : seen) CHECK(v == 1);
            for (int c = 0; c < R; ++c) CHECK(a.load(c) >= 1);
            int lo = std::numeric_limits<int>::max(), hi = 0;
            for (int c = 0; c < R; ++c) {
                lo = std::min(lo, a.class_elements(c));
                hi = std::max(hi, a.class_elements(c));
            }
            const int biggest = *std::max_element(sizes.begin(), sizes.end());
            CHECK(hi - lo <= biggest);
            CHECK(hi - lo >= best_spread(sizes, R));
        } else {
            for (int c = 0; c < R; ++c) CHECK(a.load(c) == 1);
            for (int v : seen) CHECK(v >= 1);
        }
    }
}

TEST_CASE("build_combiners schedule and normalization") {
    Rng rng(5);
    SUBCASE("one subarray per chain: mask always on") {
        const RfAllocation a = mef_gaa({4, 4}, 2);
        const MeasurementPlan plan = build_combiners(a, contiguous({4, 4}), 8, 3, 0.1, rng);
        for (int p = 0; p < 3; ++p)
            for (int c = 0; c < 2; ++c) {
                const int s = plan.schedule[c][p];
                for (int n = 0; n < 8; ++n) {
                    const bool on = n >= plan.subarrays[s].first && n < plan.subarrays[s].second;
                    CHECK((std::abs(plan.combiners[p](c, n)) > 0.0) == on);
                }
            }
    }
    SUBCASE("two subarrays on one chain alternate") {
        RfAllocation a;
        a.sizes = {3, 5};
        a.classes = {{0, 1}};
        const MeasurementPlan plan = build_combiners(a, contiguous({3, 5}), 8, 4, 0.0, rng);
        CHECK(plan.schedule[0] == std::vector<int>{0, 1, 0, 1});
        CHECK(plan.effective_pilots == std::vector<int>{2, 2});
    }
    SUBCASE("too few pilots") {
        RfAllocation a;
        a.sizes = {3, 5, 2};
        a.classes = {{0, 1, 2}};
        CHECK_THROWS_AS(build_combiners(a, contiguous({3, 5, 2}), 10, 2, 0.0, rng), PilotError);
    }
    SUBCASE("unit rows, unit-modulus entries, disjoint supports, pilot conservation") {
        const std::vector<int> sizes{7, 5, 9, 3, 6};
        const RfAllocation a = mef_gaa(sizes, 3);
        const int P = 12;
        const MeasurementPlan plan = build_combiners(a, contiguous(sizes), 30, P, 0.0, rng);
        int total = 0;
        for (int e : plan.effective_pilots) {
            CHECK(e >= 1);
            total += e;
        }
        CHECK(total == P * 3);
        for (int p = 0; p < P; ++p) {
            for (int c = 0; c < 3; ++c) {
                CHECK(plan.combiners[p].row(c).norm() == doctest::Approx(1.0).epsilon(1e-12));
                const auto [b, e] = plan.subarrays[plan.schedule[c][p]];
                for (int n = b; n < e; ++n)
                    CHECK(std::abs(plan.combiners[p](c, n)) == doctest::Approx(1.0 / std::sqrt(e - b)));
            }
            for (int n = 0; n < 30; ++n) {
                int nz = 0;
                for (int c = 0; c < 3; ++c) nz += std::abs(plan.combiners[p](c, n)) > 0.0;
                CHECK(nz <= 1);
            }
        }
    }
}

TEST_CASE("reception and decoupling") {
    Rng rng(8);
    const std::vector<int> sizes{6, 10, 4, 8};
    const auto ranges = contiguous(sizes);
    const RfAllocation a = mef_gaa(sizes, 2);

    SUBCASE("zero channel, zero noise") {
        const MeasurementPlan plan = build_combiners(a, ranges, 28, 8, 0.0, rng);
        for (const CMatrix& y : simulate_reception(CMatrix::Zero(28, 3), plan, rng)) CHECK(y.norm() == 0.0);
    }
    SUBCASE("noiseless round trip is exact") {
        const MeasurementPlan plan = build_combiners(a, ranges, 28, 8, 0.0, rng);
        const CMatrix H = random_cmatrix(28, 3, rng);
        const auto y = simulate_reception(H, plan, rng);
        for (int p = 0; p < 8; ++p) CHECK((y[p] - plan.combiners[p] * H).norm() == 0.0);
        const auto obs = decouple(y, plan);
        REQUIRE(obs.size() == 4);
        for (std::size_t s = 0; s < obs.size(); ++s) {
            const auto [b, e] = ranges[s];
            CHECK(obs[s].Y.rows() == plan.effective_pilots[s]);
            CHECK((obs[s].Y - obs[s].Phi * H.middleRows(b, e - b)).norm() < 1e-12);
        }
    }
    SUBCASE("two subarrays on one chain, P = 2") {
        RfAllocation one;
        one.sizes = {5, 7};
        one.classes = {{0, 1}};
        const MeasurementPlan plan = build_combiners(one, contiguous({5, 7}), 12, 2, 0.0, rng);
        const CMatrix H = random_cmatrix(12, 1, rng);
        const auto obs = decouple(simulate_reception(H, plan, rng), plan);
        // Direct computation: slot l activates subarray l.
        for (int l = 0; l < 2; ++l) {
            const auto [b, e] = plan.subarrays[l];
            const cplx direct = (plan.combiners[l].block(0, b, 1, e - b) * H.middleRows(b, e - b))(0, 0);
            CHECK(std::abs(obs[l].Y(0, 0) - direct) < 1e-12);
        }
    }
    SUBCASE("a channel confined to one subarray leaves the others silent") {
        const MeasurementPlan plan = build_combiners(a, ranges, 28, 8, 0.0, rng);
        CMatrix H = CMatrix::Zero(28, 2);
        H.middleRows(6, 10) = random_cmatrix(10, 2, rng);
        const auto obs = decouple(simulate_reception(H, plan, rng), plan);
        CHECK(obs[0].Y.norm() == 0.0);
        CHECK(obs[2].Y.norm() == 0.0);
        CHECK(obs[1].Y.norm() > 0.0);
    }
    SUBCASE("slot relabeling leaves the observations unchanged") {
        MeasurementPlan plan = build_combiners(a, ranges, 28, 8, 0.0, rng);
        const CMatrix H = random_cmatrix(28, 2, rng);
        const auto ref = decouple(simulate_reception(H, plan, rng), plan);
        // Swap slots 0 and 2: rows may reorder, the row set may not change.
        std::swap(plan.combiners[0], plan.combiners[2]);
        for (auto& sch : plan.schedule) std::swap(sch[0], sch[2]);
        const auto obs = decouple(simulate_reception(H, plan, rng), plan);
        for (std::size_t s = 0; s < obs.size(); ++s) {
            CHECK((obs[s].Phi.adjoint() * obs[s].Phi - ref[s].Phi.adjoint() * ref[s].Phi).norm() < 1e-14);
            CHECK((obs[s].Phi.adjoint() * obs[s].Y - ref[s].Phi.adjoint() * ref[s].Y).norm() < 1e-12);
            CHECK((obs[s].Y.adjoint() * obs[s].Y - ref[s].Y.adjoint() * ref[s].Y).norm() < 1e-12);
        }
    }
    SUBCASE("schedule mismatch") {
        const MeasurementPlan plan = build_combiners(a, ranges, 28, 8, 0.0, rng);
        auto y = simulate_reception(CMatrix::Zero(28, 1), plan, rng);
        y.pop_back();
        CHECK_THROWS(decouple(y, plan));
    }
}

TEST_CASE("per-measurement SNR matches the nominal value") {
    Rng rng(21);
    const int N = 16;
    const double snr_db = 10.0;
    const double sigma2 = std::pow(10.0, -snr_db / 10.0);
    const RfAllocation a = mef_gaa({N}, 1);
    double sig = 0.0, noise = 0.0;
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
        CMatrix h = random_cmatrix(N, 1, rng);
        h /= h.norm();  // unit-energy column
        const MeasurementPlan plan = build_combiners(a, contiguous({N}), N, 1, sigma2, rng);
        const cplx clean = (plan.combiners[0] * h)(0, 0);
        const cplx y = simulate_reception(h, plan, rng)[0](0, 0);
        sig += std::norm(clean);
        noise += std::norm(y - clean);
    }
    // A unit-norm row against a unit-energy column: E|u^H h|^2 = 1/N.
    const double measured = 10.0 * std::log10(sig / noise);
    const double nominal = snr_db + 10.0 * std::log10(1.0 / N);
    CHECK(std::abs(measured - nominal) < 0.2);
}

TEST_CASE("fully connected observations") {
    Rng crng(1), nrng(2);
    const auto ranges = contiguous({5, 9, 6});
    const CMatrix H = random_cmatrix(20, 3, crng);

    SUBCASE("noiseless decoding is exact") {
        const auto obs = fully_connected_observations(H, ranges, 2, 7, 0.0, crng, nrng);
        for (std::size_t s = 0; s < obs.size(); ++s) {
            const auto [b, e] = ranges[s];
            CHECK(obs[s].Y.rows() == 2 * (7 / 3));
            CHECK((obs[s].Y - obs[s].Phi * H.middleRows(b, e - b)).norm() < 1e-12);
        }
    }
    SUBCASE("decoded noise variance") {
        const double sigma2 = 0.5;
        double acc = 0.0;
        int count = 0;
        for (int rep = 0; rep < 300; ++rep) {
            Rng c_noisy = crng, c_ref = crng;  // same combiner draw for both
            const auto noisy = fully_connected_observations(H, ranges, 2, 6, sigma2, c_noisy, nrng);
            const auto ref = fully_connected_observations(H, ranges, 2, 6, 0.0, c_ref, nrng);
            crng = c_noisy;
            for (std::size_t s = 0; s < noisy.size(); ++s) {
                acc += (noisy[s].Y - ref[s].Y).squaredNorm();
                count += static_cast<int>(noisy[s].Y.size());
                CHECK(noisy[s].noise_var == doctest::Approx(sigma2 / 3));
            }
        }
        CHECK(acc / count == doctest::Approx(sigma2 / 3).epsilon(0.05));
    }
    SUBCASE("fewer pilots than subarrays") {
        CHECK_THROWS_AS(fully_connected_observations(H, ranges, 2, 2, 0.0, crng, nrng), PilotError);
    }
}
