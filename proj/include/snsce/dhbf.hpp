#pragma once

#include <utility>
#include <vector>

#include "snsce/channel.hpp"
#include "snsce/rng.hpp"
#include "snsce/segmentation.hpp"
#include "snsce/types.hpp"

namespace snsce {

using ElementRange = std::pair<int, int>;  ///< 0-based half-open [begin, end)

/// Indices (into seg.ranges()) of the subarrays whose mean element power exceeds eta.
/// Throws EmptySceneError when nothing survives.
IndexList prune_subarrays(const RVector& power, const SegmentationResult& seg, double eta);

/// RF-chain to subarray mapping.
struct RfAllocation {
    std::vector<IndexList> classes;  ///< per chain, subarray indices in activation order
    std::vector<int> sizes;          ///< element count per subarray

    int chains() const { return static_cast<int>(classes.size()); }
    int load(int chain) const { return static_cast<int>(classes[chain].size()); }
    int max_load() const;
    int class_elements(int chain) const;
};

/// Max-element-first greedy allocation. Surplus chains (fewer subarrays than chains)
/// are handed out round-robin in descending size order.
RfAllocation mef_gaa(const std::vector<int>& sizes, int N_RF);

/// Uniformly random assignment; every chain gets a subarray when there are enough.
RfAllocation random_allocation(const std::vector<int>& sizes, int N_RF, Rng& rng);

struct MeasurementPlan {
    int N = 0;
    int P = 0;
    double noise_var = 0.0;
    std::vector<ElementRange> subarrays;
    RfAllocation alloc;
    std::vector<CMatrix> combiners;             ///< per slot, N_RF x N with SS-SM masks applied
    std::vector<std::vector<int>> schedule;     ///< [chain][slot] -> active subarray
    std::vector<int> effective_pilots;          ///< per subarray, summed over serving chains
};

/// Unit-modulus random-phase rows restricted to the slot's active subarray, each
/// scaled to unit norm. Throws PilotError when a chain has more subarrays than slots.
MeasurementPlan build_combiners(const RfAllocation& alloc, const std::vector<ElementRange>& subarrays,
                                int N, int P, double noise_var, Rng& rng);

/// y_p = U_p (H + N_p), one N_RF x M matrix per slot.
std::vector<CMatrix> simulate_reception(const CMatrix& H, const MeasurementPlan& plan, Rng& rng);

struct SubarrayObservation {
    ElementRange range;
    CMatrix Y;    ///< effective_pilots x M
    CMatrix Phi;  ///< effective_pilots x subarray length
    double noise_var = 0.0;  ///< per-row noise variance after decoupling
};

/// Routes every chain's measurement to the subarray active in its slot.
std::vector<SubarrayObservation> decouple(const std::vector<CMatrix>& y, const MeasurementPlan& plan);

/// Fully connected combining decoupled by orthogonal time codes across the N_S subarrays:
/// every group of N_S slots yields one row per chain and subarray, with noise variance
/// noise_var / N_S. Slots beyond the last full group are unused. Throws PilotError when P < N_S.
std::vector<SubarrayObservation> fully_connected_observations(const CMatrix& H,
                                                              const std::vector<ElementRange>& subarrays,
                                                              int N_RF, int P, double noise_var,
                                                              Rng& combiner_rng, Rng& noise_rng);

}  // namespace snsce
