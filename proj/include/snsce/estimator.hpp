#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "snsce/types.hpp"

namespace snsce {

/// Far-field dictionary on a sin-angle grid; columns exp(j pi n z_k) / sqrt(N_sub), n = 0..N_sub-1.
struct Codebook {
    CMatrix D;
    RVector z;  ///< sin of the grid angles

    RVector angles() const { return z.array().asin(); }
};

Codebook dft_codebook(int N_sub);
CMatrix codebook_matrix(const RVector& z, int N_sub);

struct EstimatorConfig {
    int U = 16;               ///< block length
    int T_ite = 30;
    double delta1 = 1e-6;     ///< relative change of the posterior mean
    double alm_c = 1.0;
    double alm_alpha = 0.1;
    int alm_iters = 5;
    bool learn_correlation = true;  ///< false keeps every P_g = I
    double p_shrink = 0.7;    ///< weight of I in the unit-diagonal learned correlation; 0 = raw update
    bool learn_noise = true;
    std::optional<double> noise_init;  ///< default var(y) * 1e-2
    double prune_rel = 1e-3;  ///< prune when mean gamma_g < prune_rel * max; 0 disables
    double eps_pd = 1e-6;
    double noise_floor = 1e-12;  ///< relative to the mean observation power

    // Off-grid module
    double support_fraction = 0.1;  ///< keep atoms above this share of the strongest row energy
    int R_ite = 50;
    double delta2 = 1e-6;
    double armijo_shrink = 0.5;
    double armijo_c = 1e-4;
    int max_backtracks = 30;

    /// Throws ConfigError on inconsistent values.
    void validate(int N_sub) const;
};

/// Contiguous atom ranges of the block partition (the last block may be short).
std::vector<std::pair<int, int>> block_ranges(int N_sub, int U);

struct SblResult {
    CMatrix X;                    ///< N_sub x M posterior mean
    std::vector<RVector> gamma;   ///< per block, intra-block variances
    std::vector<CMatrix> Pg;      ///< per block correlation
    std::vector<CMatrix> Sigma;   ///< per block posterior covariance (shared by all subcarriers)
    std::vector<bool> active;
    double noise_var = 0.0;
    int iterations = 0;
    std::vector<double> mean_change;  ///< relative squared change of X per iteration
    std::vector<int> active_trace;

    /// Block-diagonal prior covariance Q P Q (zero on pruned blocks).
    CMatrix prior_covariance() const;
    IndexList active_blocks() const;
};

using IterationHook = std::function<void(int iteration, const SblResult& state)>;

/// Block posterior for fixed hyperparameters: fills X and Sigma of state.
/// Returns tr(C^{-1}) with C = sigma^2 I + Psi V Psi^H.
double sbl_posterior(const CMatrix& Y, const CMatrix& Psi, const std::vector<std::pair<int, int>>& blocks,
                     SblResult& state);

/// gamma_{g,u} fixed-point update for one block from R = sum_m R_m.
RVector update_gamma(const CMatrix& R, const CMatrix& P, const RVector& gamma, int M);

/// I inner ALM iterations on the active blocks; lambda is updated in place.
void update_p_alm(const std::vector<CMatrix>& R, const std::vector<RVector>& gamma,
                  const std::vector<bool>& active, int M, const EstimatorConfig& cfg,
                  std::vector<CMatrix>& P, std::vector<double>& lambda);

/// EM noise update; tr_Cinv is tr(C^{-1}) from the posterior.
double update_noise(const CMatrix& Y, const CMatrix& Psi, const CMatrix& X, double sigma2_prev,
                    double tr_Cinv, double floor);

/// Assorted block SBL jointly over the M columns of Y (shared block support).
SblResult absbl_mmv(const CMatrix& Y, const CMatrix& Psi, const EstimatorConfig& cfg,
                    const IterationHook& hook = {});

/// The same prior run separately on every column (no inter-subcarrier sharing).
CMatrix absbl_per_column(const CMatrix& Y, const CMatrix& Psi, const EstimatorConfig& cfg);

/// Block SBL with one variance per block and an AR(1) intra-block correlation shared by all blocks.
SblResult bsbl(const CMatrix& Y, const CMatrix& Psi, const EstimatorConfig& cfg,
               const IterationHook& hook = {});
CMatrix bsbl_per_column(const CMatrix& Y, const CMatrix& Psi, const EstimatorConfig& cfg);

struct SompOptions {
    int max_atoms = 0;           ///< 0 selects rows(Psi) / 2
    double residual_tol = 0.0;   ///< stop when ||R||_F^2 <= tol
};

struct SompResult {
    CMatrix X;
    IndexList support;  ///< in selection order
};

SompResult somp(const CMatrix& Y, const CMatrix& Psi, const SompOptions& opt);

struct OffgridResult {
    RVector z;           ///< refined grid of the selected atoms
    IndexList support;   ///< selected codebook columns
    CMatrix X;           ///< |support| x M
    CMatrix H;           ///< N_sub x M channel estimate
    std::vector<double> residual_trace;  ///< objective after every accepted step
    int iterations = 0;
};

/// f(z, X) = ||Y - Phi D(z) X||_F^2.
double offgrid_objective(const CMatrix& Y, const CMatrix& Phi, const RVector& z, const CMatrix& X);
/// Analytic gradient of f with respect to z at fixed X.
RVector offgrid_gradient(const CMatrix& Y, const CMatrix& Phi, const RVector& z, const CMatrix& X);

/// Alternating least squares / Armijo gradient refinement of the significant atoms
/// of an on-grid estimate X_grid (coefficients over codebook.D).
OffgridResult offgrid_refine(const CMatrix& Y, const CMatrix& Phi, const Codebook& codebook,
                             const CMatrix& X_grid, const EstimatorConfig& cfg);

double nmse(const CMatrix& H_hat, const CMatrix& H);

}  // namespace snsce
