#include "snsce/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

namespace snsce {

std::vector<std::pair<int, int>> SegmentationResult::ranges() const {
    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
        out.emplace_back(breakpoints[i] - 1, breakpoints[i + 1] - 1);
    return out;
}

std::vector<IndexList> SegmentationResult::subarrays() const {
    std::vector<IndexList> out;
    for (auto [b, e] : ranges()) {
        IndexList s(e - b);
        std::iota(s.begin(), s.end(), b + 1);
        out.push_back(std::move(s));
    }
    return out;
}

SegmentationResult segmentation_from_breakpoints(IndexList breakpoints, int N) {
    if (breakpoints.size() < 2 || breakpoints.front() != 1 || breakpoints.back() != N + 1)
        throw std::invalid_argument("breakpoints must start at 1 and end at N+1");
    for (std::size_t i = 1; i < breakpoints.size(); ++i)
        if (breakpoints[i] <= breakpoints[i - 1])
            throw std::invalid_argument("breakpoints must be strictly increasing");
    SegmentationResult r;
    r.breakpoints = std::move(breakpoints);
    r.scores = RVector::Zero(N);
    r.flags.assign(N, 0);
    r.os = RVector::Zero(N);
    r.roc_score = RVector::Zero(N);
    return r;
}

double chi2_quantile(double p, double dof) {
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    if (p <= 0.0) return 0.0;
    return boost::math::quantile(boost::math::chi_squared(dof), p);
}

double chi2_cdf(double x, double dof) {
    if (std::isinf(x)) return 1.0;
    if (x <= 0.0) return 0.0;
    return boost::math::cdf(boost::math::chi_squared(dof), x);
}

double mcd_c0(int h, int W) {
    const double a = static_cast<double>(h) / W;
    return a / chi2_cdf(chi2_quantile(a, 1.0), 3.0);
}

double mcd_c1() {
    static const double c1 = 0.975 / chi2_cdf(chi2_quantile(0.975, 1.0), 3.0);
    return c1;
}

double score_threshold() {
    static const double c = std::sqrt(chi2_quantile(0.975, 1.0));
    return c;
}

int default_mcd_h(int W) {
    const int lo = (W + 3) / 2;  // ceil((W+2)/2)
    const int h = static_cast<int>(std::ceil(0.75 * W));
    return std::clamp(h, std::min(lo, W), W);
}

McdEstimate mcd_univariate(std::span<const double> window, int h) {
    const int W = static_cast<int>(window.size());
    if (W < 2 || 2 * h < W + 2 || h > W)
        throw std::invalid_argument("mcd_univariate: need (W+2)/2 <= h <= W");
    std::vector<double> x(window.begin(), window.end());
    std::sort(x.begin(), x.end());

    // Running centred sums give every contiguous candidate in O(W).
    const double c = x[W / 2];
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < h; ++i) {
        s1 += x[i] - c;
        s2 += (x[i] - c) * (x[i] - c);
    }
    int best = 0;
    double best_var = std::max(0.0, (s2 - s1 * s1 / h) / (h - 1));
    for (int j = 1; j + h <= W; ++j) {
        const double out = x[j - 1] - c, in = x[j + h - 1] - c;
        s1 += in - out;
        s2 += in * in - out * out;
        const double v = std::max(0.0, (s2 - s1 * s1 / h) / (h - 1));
        // Near-equal candidates count as ties so the earliest start wins.
        if (v < best_var * (1.0 - 1e-9)) {
            best_var = v;
            best = j;
        }
    }

    McdEstimate est;
    est.subset.assign(x.begin() + best, x.begin() + best + h);
    double mu = 0.0;
    for (double v : est.subset) mu += v;
    mu /= h;
    double ss = 0.0;
    for (double v : est.subset) ss += (v - mu) * (v - mu);
    est.mu0 = mu;
    est.sigma0 = mcd_c0(h, W) * ss / (h - 1);
    return est;
}

double variance_floor(std::span<const double> window) {
    double mean = 0.0;
    for (double v : window) mean += v;
    mean /= std::max<std::size_t>(1, window.size());
    return std::max(1e-12 * mean * mean, std::numeric_limits<double>::min());
}

void reweight_mcd(std::span<const double> window, WindowStats& st) {
    const double floor = variance_floor(window);
    const double s0 = std::max(st.sigma0, floor);
    const double cut = chi2_quantile(0.975, 1.0);
    double sw = 0.0, swp = 0.0;
    std::vector<char> keep(window.size(), 0);
    for (std::size_t i = 0; i < window.size(); ++i) {
        const double di = (window[i] - st.mu0) / std::sqrt(s0);
        if (di * di < cut) {
            keep[i] = 1;
            sw += 1.0;
            swp += window[i];
        }
    }
    st.c1 = mcd_c1();
    if (sw == 0.0) {
        st.mu_mcd = st.mu0;
        st.sigma_mcd = s0;
        return;
    }
    st.mu_mcd = swp / sw;
    double ss = 0.0;
    for (std::size_t i = 0; i < window.size(); ++i)
        if (keep[i]) ss += (window[i] - st.mu_mcd) * (window[i] - st.mu_mcd);
    st.sigma_mcd = sw > 1.0 ? st.c1 * ss / (sw - 1.0) : 0.0;
    st.sigma_mcd = std::max(st.sigma_mcd, floor);
}

WindowStats window_stats(std::span<const double> window, int h) {
    WindowStats st;
    st.h = h;
    st.c0 = mcd_c0(h, static_cast<int>(window.size()));
    const McdEstimate est = mcd_univariate(window, h);
    st.mu0 = est.mu0;
    st.sigma0 = est.sigma0;
    reweight_mcd(window, st);
    return st;
}

double score_distance(double p_last, const WindowStats& st) {
    return std::abs(p_last - st.mu_mcd) / std::sqrt(st.sigma_mcd);
}

namespace {

void check_profile(const RVector& p) {
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (!std::isfinite(p(i)) || p(i) < 0.0)
            throw std::invalid_argument("power profile must be finite and non-negative");
}

// Local maxima above rel * max; plateaus report their first element.
IndexList pick_peaks(const RVector& s, double rel) {
    IndexList out;
    const double top = s.size() ? s.maxCoeff() : 0.0;
    if (!(top > 0.0)) return out;
    const Eigen::Index n = s.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double left = i > 0 ? s(i - 1) : -1.0;
        const double right = i + 1 < n ? s(i + 1) : -1.0;
        if (s(i) > rel * top && s(i) > left && s(i) >= right) out.push_back(static_cast<int>(i));
    }
    return out;
}

SegmentationResult finish(IndexList interior0, int N) {
    IndexList bp{1};
    for (int n : interior0)
        if (n + 1 > bp.back()) bp.push_back(n + 1);
    if (bp.back() == N + 1) bp.pop_back();
    bp.push_back(N + 1);
    return segmentation_from_breakpoints(std::move(bp), N);
}

}  // namespace

SegmentationResult pass_segment(const RVector& profile, const PassOptions& opt) {
    const int N = static_cast<int>(profile.size());
    const int W = opt.W;
    if (W < 8 || W % 4 != 0) throw std::invalid_argument("pass_segment: W must be >= 8 and divisible by 4");
    if (N < W) throw std::invalid_argument("pass_segment: N must be >= W");
    check_profile(profile);
    const int h = opt.h > 0 ? opt.h : default_mcd_h(W);
    if (2 * h < W + 2 || h > W) throw std::invalid_argument("pass_segment: h out of range");

    const double c_sd = score_threshold();
    RVector D = RVector::Zero(N);
    std::vector<int> d(N, 0);
    const double* data = profile.data();
    for (int n = W - 1; n < N; ++n) {
        std::span<const double> win(data + n - W + 1, W);
        const WindowStats st = window_stats(win, h);
        D(n) = score_distance(profile(n), st);
        d[n] = D(n) > c_sd ? 1 : 0;
    }

    std::vector<int> prefix(N + 1, 0);
    for (int n = 0; n < N; ++n) prefix[n + 1] = prefix[n] + d[n];
    const int half = W / 2;
    RVector os(N);
    IndexList accepted;
    int cluster_first = -1, cluster_best = -1;
    auto flush = [&]() {
        if (cluster_best < 0) return;
        // Neighbouring clusters closer than W/4 collapse onto the stronger point.
        if (!accepted.empty() && cluster_best - accepted.back() < W / 4) {
            if (D(cluster_best) > D(accepted.back())) accepted.back() = cluster_best;
        } else {
            accepted.push_back(cluster_best);
        }
    };
    for (int n = 0; n < N; ++n) {
        const int end = std::min(N, n + half);
        os(n) = prefix[end] - prefix[n];
        // W/4 out of W/2, prorated for a truncated suffix.
        const double need = 0.25 * W * (end - n) / static_cast<double>(half);
        if (!(d[n] && os(n) >= need)) continue;
        // Points inside one outlier-sum horizon describe the same change; keep the strongest.
        if (cluster_first >= 0 && n - cluster_first < half) {
            if (D(n) > D(cluster_best)) cluster_best = n;
        } else {
            flush();
            cluster_first = cluster_best = n;
        }
    }
    flush();
    // A detection must leave at least W/4 elements for the last subarray.
    while (!accepted.empty() && N - accepted.back() < W / 4) accepted.pop_back();

    SegmentationResult r = finish(accepted, N);
    r.scores = D;
    r.flags = d;
    r.os = os;
    r.roc_score = os.maxCoeff() > 0.0 ? os : D;
    return r;
}

SegmentationResult rfem_segment(const RVector& profile, const RfemOptions& opt) {
    const int N = static_cast<int>(profile.size());
    if (N < 3) throw std::invalid_argument("rfem_segment: N must be >= 3");
    check_profile(profile);
    RVector diff = RVector::Zero(N);
    for (int n = 1; n < N; ++n) diff(n) = std::abs(profile(n) - profile(n - 1));
    SegmentationResult r = finish(pick_peaks(diff, opt.rel_threshold), N);
    r.scores = diff;
    r.roc_score = diff;
    return r;
}

SegmentationResult afm_segment(const RVector& profile, const AfmOptions& opt) {
    const int N = static_cast<int>(profile.size());
    if (N < 3) throw std::invalid_argument("afm_segment: N must be >= 3");
    check_profile(profile);
    const int w = std::max(1, std::min(opt.half_width, N / 2));
    // C[j] = sum of the first j samples; a change at element n splits C at index n.
    std::vector<double> C(N + 1, 0.0);
    for (int n = 0; n < N; ++n) C[n + 1] = C[n] + profile(n);
    auto slope = [&](int a, int b) {  // least-squares slope of C over indices a..b
        const int m = b - a + 1;
        const double xm = 0.5 * (a + b);
        double ym = 0.0;
        for (int i = a; i <= b; ++i) ym += C[i];
        ym /= m;
        double sxy = 0.0, sxx = 0.0;
        for (int i = a; i <= b; ++i) {
            sxy += (i - xm) * (C[i] - ym);
            sxx += (i - xm) * (i - xm);
        }
        return sxy / sxx;
    };
    RVector score = RVector::Zero(N);
    for (int n = w; n <= N - w; ++n) {
        if (n >= N) break;
        score(n) = std::abs(slope(n, n + w) - slope(n - w, n));
    }
    SegmentationResult r = finish(pick_peaks(score, opt.rel_threshold), N);
    r.scores = score;
    r.roc_score = score;
    return r;
}

std::vector<int> breakpoint_labels(const IndexList& truth, int N, int match_tol) {
    std::vector<int> lab(N, 0);
    for (int b : truth) {
        if (b <= 1 || b >= N + 1) continue;
        for (int n = std::max(1, b - match_tol); n <= std::min(N, b + match_tol); ++n) lab[n - 1] = 1;
    }
    return lab;
}

double mann_whitney_auc(const RVector& score, const std::vector<int>& labels) {
    const int n = static_cast<int>(score.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return score(a) < score(b); });
    std::vector<double> rank(n);
    for (int i = 0; i < n;) {
        int j = i;
        while (j + 1 < n && score(idx[j + 1]) == score(idx[i])) ++j;
        const double mid = 0.5 * (i + j) + 1.0;
        for (int k = i; k <= j; ++k) rank[idx[k]] = mid;
        i = j + 1;
    }
    double npos = 0.0, rsum = 0.0;
    for (int i = 0; i < n; ++i)
        if (labels[i]) {
            npos += 1.0;
            rsum += rank[i];
        }
    const double nneg = n - npos;
    if (npos == 0.0 || nneg == 0.0) return 0.5;
    return (rsum - npos * (npos + 1.0) / 2.0) / (npos * nneg);
}

AucResult auc_score(const RVector& score, const IndexList& truth, int match_tol) {
    const int N = static_cast<int>(score.size());
    const std::vector<int> lab = breakpoint_labels(truth, N, match_tol);
    const int npos = std::accumulate(lab.begin(), lab.end(), 0);
    AucResult r;
    if (npos == 0 || npos == N) {
        r.degenerate = true;
        return r;
    }
    const double a = mann_whitney_auc(score, lab);
    r.auc = std::clamp(std::max(a, 1.0 - a), 0.5, 1.0);
    return r;
}

AucResult auc_binary(const IndexList& detected, const IndexList& truth, int N, int match_tol) {
    // Single ROC point: TPR over interior truth points matched by a detection,
    // FPR over detections that match none, normalised by the non-breakpoint count.
    auto interior = [N](int b) { return b > 1 && b <= N; };
    auto near = [match_tol](int a, int b) { return std::abs(a - b) <= match_tol; };
    int positives = 0, hits = 0, false_alarms = 0;
    for (int b : truth) {
        if (!interior(b)) continue;
        ++positives;
        if (std::any_of(detected.begin(), detected.end(), [&](int d) { return interior(d) && near(d, b); })) ++hits;
    }
    for (int d : detected) {
        if (!interior(d)) continue;
        if (std::none_of(truth.begin(), truth.end(), [&](int b) { return interior(b) && near(d, b); })) ++false_alarms;
    }
    AucResult r;
    if (positives == 0 || positives >= N) {
        r.degenerate = true;
        return r;
    }
    const double tpr = static_cast<double>(hits) / positives;
    const double fpr = std::min(1.0, static_cast<double>(false_alarms) / (N - positives));
    const double a = 0.5 * (1.0 + tpr - fpr);
    r.auc = std::max(a, 1.0 - a);
    return r;
}

}  // namespace snsce
