#pragma once

#include <span>
#include <utility>
#include <vector>

#include "snsce/types.hpp"

namespace snsce {

/// Robust location/scale of one sliding window.
struct WindowStats {
    double mu0 = 0.0;
    double sigma0 = 0.0;
    double mu_mcd = 0.0;
    double sigma_mcd = 0.0;
    int h = 0;
    double c0 = 1.0;
    double c1 = 1.0;
};

struct SegmentationResult {
    IndexList breakpoints;      ///< 1-based, {1, ..., N+1}
    RVector scores;             ///< score distance per element (0 where not evaluated)
    std::vector<int> flags;     ///< d_n
    RVector os;                 ///< outlier sums
    RVector roc_score;          ///< continuous score used for the ROC

    int subarray_count() const { return static_cast<int>(breakpoints.size()) - 1; }
    /// 0-based half-open element ranges [begin, end) of each subarray.
    std::vector<std::pair<int, int>> ranges() const;
    /// 1-based element index sets of each subarray.
    std::vector<IndexList> subarrays() const;
};

/// Builds a result from a breakpoint set; validates endpoints and ordering.
SegmentationResult segmentation_from_breakpoints(IndexList breakpoints, int N);

double chi2_quantile(double p, double dof);
double chi2_cdf(double x, double dof);
/// c0 = (h/W) / P[chi2(3) < chi2_{h/W}(1)].
double mcd_c0(int h, int W);
/// c1 = 0.975 / P[chi2(3) < chi2_{0.975}(1)].
double mcd_c1();
/// sqrt(chi2_{0.975}(1)).
double score_threshold();

struct McdEstimate {
    double mu0 = 0.0;
    double sigma0 = 0.0;
    std::vector<double> subset;  ///< selected values, ascending
};

/// Exact univariate MCD: the minimum-variance contiguous h-run of the sorted window.
McdEstimate mcd_univariate(std::span<const double> window, int h);

/// Default subset size ceil(0.75 W), clamped to the legal range.
int default_mcd_h(int W);

/// Variance floor 1e-12 * mean^2 (never below the smallest normal double).
double variance_floor(std::span<const double> window);

/// One-step reweighting; fills mu_mcd and sigma_mcd (floored) of stats.
void reweight_mcd(std::span<const double> window, WindowStats& stats);

WindowStats window_stats(std::span<const double> window, int h);

double score_distance(double p_last, const WindowStats& stats);

struct PassOptions {
    int W = 32;
    int h = 0;  ///< 0 selects ceil(0.75 W)
};

SegmentationResult pass_segment(const RVector& profile, const PassOptions& opt);

struct RfemOptions {
    double rel_threshold = 0.5;  ///< peaks above this fraction of the largest difference
};

struct AfmOptions {
    int half_width = 8;          ///< points per side of the two linear fits
    double rel_threshold = 0.5;
};

SegmentationResult rfem_segment(const RVector& profile, const RfemOptions& opt = {});
SegmentationResult afm_segment(const RVector& profile, const AfmOptions& opt = {});

struct AucResult {
    double auc = 0.5;
    bool degenerate = false;  ///< no interior truth breakpoint or no negatives
};

/// Per-element labels: 1 within match_tol of an interior truth breakpoint.
std::vector<int> breakpoint_labels(const IndexList& truth, int N, int match_tol);

/// Mann-Whitney AUC of a score sequence against binary labels (mid-ranks for ties).
double mann_whitney_auc(const RVector& score, const std::vector<int>& labels);

/// max(AUC, 1 - AUC) of a continuous score against the truth breakpoints.
AucResult auc_score(const RVector& score, const IndexList& truth, int match_tol);

/// Single-point AUC of a detected breakpoint set: (1 + TPR - FPR) / 2 with
/// truth points matched within match_tol.
AucResult auc_binary(const IndexList& detected, const IndexList& truth, int N, int match_tol);

}  // namespace snsce
