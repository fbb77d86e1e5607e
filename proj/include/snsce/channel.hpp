#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "snsce/rng.hpp"
#include "snsce/types.hpp"

namespace snsce {

/// Array, carrier, pilot and RF-chain parameters shared by every stage.
struct SystemConfig {
    int N = 256;         ///< antenna count
    int M = 5;           ///< subcarrier count
    int K = 3;           ///< UE count
    int L = 3;           ///< paths per UE
    double fc = 28e9;    ///< carrier frequency [Hz]
    double B = 100e6;    ///< bandwidth [Hz]
    double d = 0.0;      ///< element spacing [m]; 0 selects half a wavelength at fc
    double c = kSpeedOfLight;
    int N_RF = 4;
    int P = 32;          ///< pilot symbols
    int SI_min = 32;     ///< minimum stationary interval [elements]
    std::uint64_t seed = 0;

    double wavelength() const { return c / fc; }
    double spacing() const { return d > 0.0 ? d : 0.5 * wavelength(); }
    double wavenumber(double f) const { return 2.0 * kPi * f / c; }
    /// Centered element offset (2n - N - 1)/2 for the 0-based index n.
    double element_offset(int n) const { return n - 0.5 * (N - 1); }
    /// f_m = fc + B(2m - M - 1)/(2M) for the 1-based m; takes the 0-based index.
    double subcarrier_frequency(int m) const {
        return fc + B * (2.0 * (m + 1) - M - 1) / (2.0 * M);
    }
    int block_count() const { return (N + SI_min - 1) / SI_min; }

    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

enum class PathKind { ideal, non_ideal };

/// Knife-edge obstacle described from the array reference point.
struct Obstacle {
    double h_ref = 0.0;   ///< edge clearance above (+) or below (-) the reference LoS [m]
    double d1_ref = 0.0;  ///< BS-side distance to the edge [m]
    double d2_ref = 0.0;  ///< UE-side distance to the edge [m]
};

struct PathParams {
    cplx g{1.0, 0.0};
    double r = 10.0;
    double theta = 0.0;
    PathKind kind = PathKind::ideal;
    std::optional<Obstacle> obstacle;
    double t_d = 0.0;  ///< diffraction intensity, non-ideal paths only
    int ue = 0;        ///< owning UE
};

/// Per-element knife-edge quantities of a non-ideal path.
struct ElementGeometry {
    double delta = 0.0;  ///< signed element position used by the geometry [m]
    double q = 0.0;
    double h = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double nu = 0.0;
    double A = 0.0;
};

struct VisibilityMask {
    RVector s;                 ///< non-negative weight per element, 0 outside the VR
    std::vector<int> blocks;   ///< block states (ideal paths only)
    std::vector<ElementGeometry> geometry;  ///< non-ideal paths only
    bool warning = false;      ///< degenerate chain forced a fallback visible block
};

struct Path {
    PathParams params;
    VisibilityMask mask;
};

struct ChannelRealization {
    CMatrix H;                 ///< N x M, column m is the channel at subcarrier m
    std::vector<Path> paths;
    RVector power;             ///< noiseless per-element received power
    RVector freqs;             ///< subcarrier frequencies [Hz]
    IndexList truth_breakpoints;  ///< 1-based, starts at 1, ends at N+1
};

enum class SteeringMode { exact, taylor };

/// Element-to-source distances r^(n).
RVector element_distances(double r, double theta, const SystemConfig& cfg,
                          SteeringMode mode = SteeringMode::exact);

/// Near-field steering vector (1/sqrt(N)) exp(-j k (r^(n) - r)); freq <= 0 selects fc.
CVector steering_vector(double r, double theta, const SystemConfig& cfg,
                        SteeringMode mode = SteeringMode::exact, double freq = 0.0);

/// Distance-only mask r / r^(n).
RVector ideal_mask(const PathParams& path, const SystemConfig& cfg);

struct FresnelCS {
    double C = 0.0;
    double S = 0.0;
};

/// Fresnel integrals C(v), S(v) with kernel pi t^2 / 2.
FresnelCS fresnel_cs(double v);

/// Single knife-edge power gain A(v).
double diffraction_gain(double v);

/// Per-element clearance, distances and Fresnel-Kirchhoff parameter.
std::vector<ElementGeometry> diffraction_geometry(const PathParams& path,
                                                  const SystemConfig& cfg);

/// (r/r^(n)) [t_d (sqrt(A_n) - 1) + 1] before any visibility thresholding.
RVector nonideal_mask_raw(const PathParams& path, const SystemConfig& cfg,
                          std::vector<ElementGeometry>* geometry = nullptr);

/// Diffraction mask over the whole array. Throws ConfigError when t_d would make
/// some element non-positive.
RVector nonideal_mask(const PathParams& path, const SystemConfig& cfg);

struct MarkovParams {
    double p_stay_visible = 0.8;
    double p_stay_blocked = 0.8;
    std::optional<bool> initial_visible;  ///< stationary draw when unset
    int max_resample = 1000;
};

/// Draws the BS-VR support of a path and returns the weighted mask.
VisibilityMask sample_vr(const PathParams& path, const SystemConfig& cfg,
                         const MarkovParams& markov, double power_threshold, Rng& rng);

enum class PowerMode {
    per_subcarrier,  ///< sum over subcarriers of |h_m^(n)|^2
    coherent,        ///< |sum_m h_m^(n)|^2
};

RVector received_power(const CMatrix& H, PowerMode mode = PowerMode::per_subcarrier);

/// Power seen by a per-element sensor: sum_m |h_m^(n) + w|^2 with w ~ CN(0, noise_var).
RVector measure_power(const CMatrix& H, double noise_var, Rng& rng);

IndexList visibility_breakpoints(const std::vector<Path>& paths, int N);

/// Superposes the masked per-path components over the subcarrier grid.
ChannelRealization assemble_channel(const SystemConfig& cfg, std::vector<Path> paths,
                                    PowerMode mode = PowerMode::per_subcarrier);

/// Length-S DFT (unnormalized) of [0_{P0}, h_vr, 0_{R0}].
CVector zero_padded_angular_spectrum(const CVector& h_vr, int P0, int R0);

/// The same spectrum written as an interpolation of the Q-point DFT of h_vr.
CVector angular_interpolation(const CVector& h_vr, int P0, int R0);

double fresnel_distance(const SystemConfig& cfg);
double rayleigh_distance(const SystemConfig& cfg);

// ---------------------------------------------------------------------------
// Random scenarios

struct ScenarioParams {
    double r_min = 10.0;
    double r_max = 100.0;
    double theta_max = 2.0 * kPi / 3.0;
    double gain_variance = 1.0;
    double nonideal_prob = 0.5;     ///< chance that a UE carries one non-ideal path
    double t_d = 1.0;
    double power_threshold = 0.1;
    double h_ref_wavelengths = 5.0;  ///< h_ref ~ U(-x lambda, x lambda)
    double d1_fraction_min = 0.3;
    double d1_fraction_max = 0.7;
    MarkovParams markov;
    bool full_visibility = false;   ///< skip VR sampling (no SnS)
    std::optional<double> fixed_distance;
};

struct Scene {
    SystemConfig cfg;
    ChannelRealization total;           ///< every UE superposed
    std::vector<CMatrix> ue_channels;   ///< per-UE N x M channels
};

Scene generate_scene(const SystemConfig& cfg, const ScenarioParams& params, Rng& rng);

}  // namespace snsce
