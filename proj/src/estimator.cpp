#include "snsce/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace snsce {

namespace {

constexpr cplx kJ{0.0, 1.0};

double log_det_pd(const CMatrix& A) {
    Eigen::LLT<CMatrix> llt(A);
    if (llt.info() != Eigen::Success) throw NumericalError("log-det of a non-PD matrix");
    double s = 0.0;
    for (Eigen::Index i = 0; i < A.rows(); ++i) s += std::log(std::real(llt.matrixL()(i, i)));
    return 2.0 * s;
}

CMatrix hermitian_floor(const CMatrix& A, double floor) {
    const CMatrix S = 0.5 * (A + A.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(S);
    if (es.info() != Eigen::Success) throw NumericalError("eigen-decomposition failed");
    const RVector ev = es.eigenvalues().cwiseMax(floor);
    return es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

void check_finite(const CMatrix& A, const char* what) {
    if (!A.allFinite()) throw NumericalError(std::string("non-finite ") + what);
}

void check_inputs(const CMatrix& Y, const CMatrix& Psi) {
    if (Y.rows() != Psi.rows()) throw std::invalid_argument("Y and Psi row counts differ");
    if (Y.rows() < 1 || Psi.cols() < 1) throw std::invalid_argument("empty sensing problem");
    if (!Y.allFinite() || !Psi.allFinite()) throw std::invalid_argument("non-finite observations");
}

// Per-block second moment summed over columns: M Sigma_g + X_g X_g^H.
CMatrix block_moment(const SblResult& s, int g, std::pair<int, int> blk) {
    const auto [b, e] = blk;
    const CMatrix Xg = s.X.middleRows(b, e - b);
    return static_cast<double>(s.X.cols()) * s.Sigma[g] + Xg * Xg.adjoint();
}

double observation_variance(const CMatrix& Y) {
    const cplx mean = Y.mean();
    return (Y.array() - mean).abs2().mean();
}

SblResult initial_state(const CMatrix& Y, const CMatrix& Psi, const EstimatorConfig& cfg,
                        const std::vector<std::pair<int, int>>& blocks) {
    SblResult s;
    s.X = CMatrix::Zero(Psi.cols(), Y.cols());
    for (const auto& [b, e] : blocks) {
        s.gamma.push_back(RVector::Ones(e - b));
        s.Pg.push_back(CMatrix::Identity(e - b, e - b));
        s.Sigma.push_back(CMatrix::Zero(e - b, e - b));
        s.active.push_back(true);
    }
    s.noise_var = cfg.noise_init ? *cfg.noise_init : observation_variance(Y) * 1e-2;
    return s;
}

SblResult all_pruned(const CMatrix& Y, const CMatrix& Psi, const std::vector<std::pair<int, int>>& blocks) {
    SblResult s;
    s.X = CMatrix::Zero(Psi.cols(), Y.cols());
    for (const auto& [b, e] : blocks) {
        s.gamma.push_back(RVector::Zero(e - b));
        s.Pg.push_back(CMatrix::Identity(e - b, e - b));
        s.Sigma.push_back(CMatrix::Zero(e - b, e - b));
        s.active.push_back(false);
    }
    s.noise_var = 0.0;
    return s;
}

void prune(SblResult& s, double rel) {
    if (rel <= 0.0) return;
    double mx = 0.0;
    for (std::size_t g = 0; g < s.gamma.size(); ++g)
        if (s.active[g]) mx = std::max(mx, s.gamma[g].mean());
    for (std::size_t g = 0; g < s.gamma.size(); ++g)
        if (s.active[g] && s.gamma[g].mean() < rel * mx) {
            s.active[g] = false;
            s.gamma[g].setZero();
        }
}

double relative_change(const CMatrix& a, const CMatrix& b) {
    const double den = b.squaredNorm();
    const double num = (a - b).squaredNorm();
    return den > 0.0 ? num / den : (num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
}

int active_count(const SblResult& s) {
    return static_cast<int>(std::count(s.active.begin(), s.active.end(), true));
}

using HyperUpdate = std::function<void(SblResult&, const std::vector<CMatrix>&, int)>;

// Shared EM driver: posterior, hyperparameter update, posterior, noise, stop test.
SblResult run_em(const CMatrix& Y, const CMatrix& Psi, const EstimatorConfig& cfg,
                 const HyperUpdate& hyper, const IterationHook& hook) {
    check_inputs(Y, Psi);
    cfg.validate(static_cast<int>(Psi.cols()));
    const auto blocks = block_ranges(static_cast<int>(Psi.cols()), cfg.U);
    if (Y.squaredNorm() == 0.0) return all_pruned(Y, Psi, blocks);

    const int M = static_cast<int>(Y.cols());
    const double floor = cfg.noise_floor * Y.cwiseAbs2().mean();
    SblResult s = initial_state(Y, Psi, cfg, blocks);
    double tr_cinv = sbl_posterior(Y, Psi, blocks, s);

    for (int t = 1; t <= cfg.T_ite; ++t) {
        std::vector<CMatrix> R(blocks.size());
        for (std::size_t g = 0; g < blocks.size(); ++g)
            if (s.active[g]) R[g] = block_moment(s, static_cast<int>(g), blocks[g]);
        prune(s, cfg.prune_rel);
        if (active_count(s) == 0) throw NumericalError("every block was pruned");
        hyper(s, R, M);

        const CMatrix X_prev = s.X;
        tr_cinv = sbl_posterior(Y, Psi, blocks, s);
        if (cfg.learn_noise) s.noise_var = update_noise(Y, Psi, s.X, s.noise_var, tr_cinv, floor);
        if (!std::isfinite(s.noise_var)) throw NumericalError("non-finite noise variance");

        s.iterations = t;
        s.mean_change.push_back(relative_change(s.X, X_prev));
        s.active_trace.push_back(active_count(s));
        if (hook) hook(t, s);
        if (s.mean_change.back() < cfg.delta1) break;
    }
    return s;
}

}  // namespace

Codebook dft_codebook(int N_sub) {
    if (N_sub < 1) throw ConfigError("codebook size must be positive");
    Codebook cb;
    cb.z.resize(N_sub);
    for (int k = 0; k < N_sub; ++k) cb.z(k) = 2.0 * k / N_sub - 1.0;
    cb.D = codebook_matrix(cb.z, N_sub);
    return cb;
}

CMatrix codebook_matrix(const RVector& z, int N_sub) {
    CMatrix D(N_sub, z.size());
    const double scale = 1.0 / std::sqrt(static_cast<double>(N_sub));
    for (Eigen::Index k = 0; k < z.size(); ++k)
        for (int n = 0; n < N_sub; ++n) D(n, k) = std::polar(scale, kPi * n * z(k));
    return D;
}

void EstimatorConfig::validate(int N_sub) const {
    if (N_sub < 1) throw ConfigError("empty subarray");
    if (U < 1) throw ConfigError("block length U must be positive");
    if (T_ite < 1 || R_ite < 0 || alm_iters < 0) throw ConfigError("iteration counts out of range");
    if (!(delta1 > 0.0) || !(delta2 > 0.0)) throw ConfigError("stopping tolerances must be positive");
    if (!(eps_pd > 0.0) || !(noise_floor > 0.0)) throw ConfigError("floors must be positive");
    if (!(p_shrink >= 0.0 && p_shrink <= 1.0)) throw ConfigError("p_shrink must lie in [0, 1]");
    if (prune_rel < 0.0 || prune_rel >= 1.0) throw ConfigError("prune threshold must lie in [0, 1)");
    if (!(support_fraction > 0.0) || support_fraction > 1.0) throw ConfigError("support fraction out of range");
    if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0) || !(armijo_c > 0.0 && armijo_c < 1.0))
        throw ConfigError("backtracking parameters out of range");
    if (noise_init && !(*noise_init > 0.0)) throw ConfigError("initial noise variance must be positive");
}

std::vector<std::pair<int, int>> block_ranges(int N_sub, int U) {
    const int u = std::max(1, std::min(U, N_sub));
    std::vector<std::pair<int, int>> out;
    for (int b = 0; b < N_sub; b += u) out.emplace_back(b, std::min(N_sub, b + u));
    return out;
}

CMatrix SblResult::prior_covariance() const {
    int n = 0;
    for (const RVector& g : gamma) n += static_cast<int>(g.size());
    CMatrix V = CMatrix::Zero(n, n);
    int b = 0;
    for (std::size_t g = 0; g < gamma.size(); ++g) {
        const int u = static_cast<int>(gamma[g].size());
        if (active[g]) {
            const RVector q = gamma[g].cwiseSqrt();
            V.block(b, b, u, u) = q.asDiagonal() * Pg[g] * q.asDiagonal();
        }
        b += u;
    }
    return V;
}

IndexList SblResult::active_blocks() const {
    IndexList out;
    for (std::size_t g = 0; g < active.size(); ++g)
        if (active[g]) out.push_back(static_cast<int>(g));
    return out;
}

double sbl_posterior(const CMatrix& Y, const CMatrix& Psi, const std::vector<std::pair<int, int>>& blocks,
                     SblResult& s) {
    const Eigen::Index E = Psi.rows();
    CMatrix C = CMatrix::Identity(E, E) * s.noise_var;
    std::vector<CMatrix> B(blocks.size());
    for (std::size_t g = 0; g < blocks.size(); ++g) {
        if (!s.active[g]) continue;
        const auto [b, e] = blocks[g];
        const RVector q = s.gamma[g].cwiseSqrt();
        const CMatrix V = q.asDiagonal() * s.Pg[g] * q.asDiagonal();
        B[g] = Psi.middleCols(b, e - b) * V;
        C.noalias() += B[g] * Psi.middleCols(b, e - b).adjoint();
    }
    C = 0.5 * (C + C.adjoint());

    Eigen::LLT<CMatrix> llt(C);
    if (llt.info() != Eigen::Success) {
        // Ridge fallback for a numerically singular system.
        const double ridge = 1e-10 * std::max(std::real(C.trace()) / E, 1e-300);
        llt.compute(C + ridge * CMatrix::Identity(E, E));
        if (llt.info() != Eigen::Success) throw NumericalError("posterior system is singular");
    }
    const CMatrix Z = llt.solve(Y);
    const CMatrix Cinv = llt.solve(CMatrix::Identity(E, E));

    for (std::size_t g = 0; g < blocks.size(); ++g) {
        const auto [b, e] = blocks[g];
        if (!s.active[g]) {
            s.X.middleRows(b, e - b).setZero();
            s.Sigma[g].setZero(e - b, e - b);
            continue;
        }
        const RVector q = s.gamma[g].cwiseSqrt();
        const CMatrix V = q.asDiagonal() * s.Pg[g] * q.asDiagonal();
        s.X.middleRows(b, e - b) = B[g].adjoint() * Z;
        CMatrix Sg = V - B[g].adjoint() * llt.solve(B[g]);
        s.Sigma[g] = 0.5 * (Sg + Sg.adjoint());
    }
    check_finite(s.X, "posterior mean");
    return std::real(Cinv.trace());
}

RVector update_gamma(const CMatrix& R, const CMatrix& P, const RVector& gamma, int M) {
    const int U = static_cast<int>(gamma.size());
    const CMatrix Pinv = P.llt().solve(CMatrix::Identity(U, U));
    const RVector q = gamma.cwiseSqrt();
    const double qmax = q.size() ? q.maxCoeff() : 0.0;
    RVector out(U);
    for (int u = 0; u < U; ++u) {
        const double A = std::real(Pinv(u, u)) * std::max(0.0, std::real(R(u, u)));
        // u-excluded contribution of the remaining entries of the block.
        double B = 0.0;
        for (int j = 0; j < U; ++j)
            if (j != u && q(j) > 1e-8 * qmax) B += std::real(Pinv(u, j) * R(j, u)) / q(j);
        // Positive root of M q^2 - B q - A = 0, written without cancellation.
        const double disc = std::sqrt(B * B + 4.0 * M * A);
        const double root = B >= 0.0 ? (B + disc) / (2.0 * M) : (disc > -B ? 2.0 * A / (disc - B) : 0.0);
        out(u) = root * root;
    }
    return out;
}

void update_p_alm(const std::vector<CMatrix>& R, const std::vector<RVector>& gamma,
                  const std::vector<bool>& active, int M, const EstimatorConfig& cfg,
                  std::vector<CMatrix>& P, std::vector<double>& lambda) {
    const int G = static_cast<int>(P.size());
    int full_len = 0;
    for (int g = 0; g < G; ++g) full_len = std::max(full_len, static_cast<int>(gamma[g].size()));

    // Unconstrained target Q^{-1} R Q^{-1} / M.
    std::vector<CMatrix> S(G);
    IndexList constrained;
    for (int g = 0; g < G; ++g) {
        if (!active[g]) continue;
        RVector q = gamma[g].cwiseSqrt();
        const double qmax = q.maxCoeff();
        if (!(qmax > 0.0)) continue;
        q = q.cwiseMax(1e-8 * qmax);
        const RVector qi = q.cwiseInverse();
        S[g] = qi.asDiagonal() * R[g] * qi.asDiagonal() / static_cast<double>(M);
        // Unit-diagonal correlation, shrunk toward identity; Q alone carries the scale.
        // p_shrink = 0 keeps the raw target.
        if (cfg.p_shrink > 0.0) {
            const RVector dn = S[g].diagonal().real().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
            S[g] = (1.0 - cfg.p_shrink) * (dn.asDiagonal() * S[g] * dn.asDiagonal()) +
                   cfg.p_shrink * CMatrix::Identity(S[g].rows(), S[g].cols());
        }
        if (static_cast<int>(gamma[g].size()) == full_len) constrained.push_back(g);
    }

    if (constrained.size() < 2) {
        for (int g = 0; g < G; ++g)
            if (S[g].size()) P[g] = hermitian_floor(S[g], cfg.eps_pd);
        return;
    }
    for (int g = 0; g < G; ++g)
        if (S[g].size() && static_cast<int>(gamma[g].size()) != full_len) P[g] = hermitian_floor(S[g], cfg.eps_pd);

    for (int it = 0; it < cfg.alm_iters; ++it) {
        CMatrix Pbar = CMatrix::Zero(full_len, full_len);
        for (int g : constrained) Pbar += P[g];
        Pbar /= static_cast<double>(constrained.size());
        const double ld_bar = log_det_pd(hermitian_floor(Pbar, cfg.eps_pd));
        std::vector<double> resid(G, 0.0);
        for (int g : constrained) resid[g] = M * (log_det_pd(P[g]) - ld_bar);
        for (int g : constrained) {
            const double scale = std::clamp(1.0 + 2.0 * lambda[g] + 2.0 * cfg.alm_c * resid[g], 0.5, 2.0);
            P[g] = hermitian_floor(S[g] / scale, cfg.eps_pd);
            lambda[g] += cfg.alm_alpha * resid[g];
        }
    }
}

double update_noise(const CMatrix& Y, const CMatrix& Psi, const CMatrix& X, double sigma2_prev,
                    double tr_Cinv, double floor) {
    const double E = static_cast<double>(Y.rows());
    const double M = static_cast<double>(Y.cols());
    const double fit = (Y - Psi * X).squaredNorm();
    // M [n_active - tr(Sigma V^{-1})] = M [E - sigma^2 tr(C^{-1})].
    const double dof = std::max(0.0, M * (E - sigma2_prev * tr_Cinv));
    return std::max(floor, (fit + sigma2_prev * dof) / (M * E));
}

SblResult absbl_mmv(const CMatrix& Y, const CMatrix& Psi, const EstimatorConfig& cfg, const IterationHook& hook) {
    std::vector<double> lambda;
    auto hyper = [&](SblResult& s, const std::vector<CMatrix>& R, int M) {
        if (lambda.empty()) lambda.assign(s.gamma.size(), 0.0);
        for (std::size_t g = 0; g < s.gamma.size(); ++g)
            if (s.active[g]) s.gamma[g] = update_gamma(R[g], s.Pg[g], s.gamma[g], M);
        if (cfg.learn_correlation) update_p_alm(R, s.gamma, s.active, M, cfg, s.Pg, lambda);
        for (std::size_t g = 0; g < s.gamma.size(); ++g)
            if (!s.gamma[g].allFinite()) throw NumericalError("non-finite gamma update");
    };
    return run_em(Y, Psi, cfg, hyper, hook);
}

CMatrix absbl_per_column(const CMatrix& Y, const CMatrix& Psi, const EstimatorConfig& cfg) {
    CMatrix X(Psi.cols(), Y.cols());
    for (Eigen::Index m = 0; m < Y.cols(); ++m) X.col(m) = absbl_mmv(Y.col(m), Psi, cfg).X;
    return X;
}

SblResult bsbl(const CMatrix& Y, const CMatrix& Psi, const EstimatorConfig& cfg, const IterationHook& hook) {
    auto hyper = [&](SblResult& s, const std::vector<CMatrix>& R, int M) {
        int full_len = 0;
        for (const RVector& g : s.gamma) full_len = std::max(full_len, static_cast<int>(g.size()));
        CMatrix Bsum = CMatrix::Zero(full_len, full_len);
        int used = 0;
        for (std::size_t g = 0; g < s.gamma.size(); ++g) {
            if (!s.active[g]) continue;
            const int u = static_cast<int>(s.gamma[g].size());
            const CMatrix Binv = s.Pg[g].llt().solve(CMatrix::Identity(u, u));
            const double gam = std::max(0.0, std::real((Binv * R[g]).trace())) / (u * M);
            s.gamma[g].setConstant(gam);
            if (u == full_len && gam > 0.0) {
                Bsum += R[g] / (gam * M);
                ++used;
            }
        }
        if (!cfg.learn_correlation || used == 0 || full_len < 2) return;
        // AR(1) regularization of the shared correlation.
        double diag = 0.0, sub = 0.0;
        for (int i = 0; i < full_len; ++i) diag += std::real(Bsum(i, i));
        for (int i = 0; i + 1 < full_len; ++i) sub += std::real(Bsum(i + 1, i));
        diag /= full_len;
        sub /= full_len - 1;
        const double r = diag > 0.0 ? std::clamp(sub / diag, -0.99, 0.99) : 0.0;
        CMatrix T(full_len, full_len);
        for (int i = 0; i < full_len; ++i)
            for (int j = 0; j < full_len; ++j) T(i, j) = std::pow(r, std::abs(i - j));
        for (std::size_t g = 0; g < s.gamma.size(); ++g) {
            const int u = static_cast<int>(s.gamma[g].size());
            s.Pg[g] = T.topLeftCorner(u, u);
        }
    };
    return run_em(Y, Psi, cfg, hyper, hook);
}

CMatrix bsbl_per_column(const CMatrix& Y, const CMatrix& Psi, const EstimatorConfig& cfg) {
    CMatrix X(Psi.cols(), Y.cols());
    for (Eigen::Index m = 0; m < Y.cols(); ++m) X.col(m) = bsbl(Y.col(m), Psi, cfg).X;
    return X;
}

SompResult somp(const CMatrix& Y, const CMatrix& Psi, const SompOptions& opt) {
    check_inputs(Y, Psi);
    const int E = static_cast<int>(Psi.rows());
    const int N = static_cast<int>(Psi.cols());
    int max_atoms = opt.max_atoms > 0 ? opt.max_atoms : std::max(1, E / 2);
    max_atoms = std::min({max_atoms, N, E});
    const double tol = std::max(opt.residual_tol, 1e-24 * Y.squaredNorm());

    SompResult out;
    out.X = CMatrix::Zero(N, Y.cols());
    const RVector col_norm2 = Psi.colwise().squaredNorm().transpose();
    std::vector<bool> used(N, false);
    CMatrix R = Y;
    CMatrix Xs;
    while (static_cast<int>(out.support.size()) < max_atoms && R.squaredNorm() > tol) {
        const RVector score = (Psi.adjoint() * R).rowwise().squaredNorm();
        int best = -1;
        double best_v = -1.0;
        for (int k = 0; k < N; ++k) {
            if (used[k] || col_norm2(k) <= 0.0) continue;
            const double v = score(k) / col_norm2(k);
            if (v > best_v) {
                best_v = v;
                best = k;
            }
        }
        if (best < 0) break;
        used[best] = true;
        out.support.push_back(best);
        CMatrix A(E, out.support.size());
        for (std::size_t i = 0; i < out.support.size(); ++i) A.col(i) = Psi.col(out.support[i]);
        Xs = A.colPivHouseholderQr().solve(Y);
        R = Y - A * Xs;
    }
    for (std::size_t i = 0; i < out.support.size(); ++i) out.X.row(out.support[i]) = Xs.row(i);
    return out;
}

double offgrid_objective(const CMatrix& Y, const CMatrix& Phi, const RVector& z, const CMatrix& X) {
    return (Y - Phi * codebook_matrix(z, static_cast<int>(Phi.cols())) * X).squaredNorm();
}

RVector offgrid_gradient(const CMatrix& Y, const CMatrix& Phi, const RVector& z, const CMatrix& X) {
    const int Ns = static_cast<int>(Phi.cols());
    const CMatrix D = codebook_matrix(z, Ns);
    const CMatrix R = Y - Phi * D * X;
    CMatrix ND = D;
    for (int n = 0; n < Ns; ++n) ND.row(n) *= static_cast<double>(n);
    const CMatrix G = R.adjoint() * (Phi * ND);  // M x K
    RVector g(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        cplx acc{0.0, 0.0};
        for (Eigen::Index m = 0; m < X.cols(); ++m) acc += X(k, m) * G(m, k);
        g(k) = -2.0 * std::real(kJ * kPi * acc);
    }
    return g;
}

OffgridResult offgrid_refine(const CMatrix& Y, const CMatrix& Phi, const Codebook& codebook,
                             const CMatrix& X_grid, const EstimatorConfig& cfg) {
    const int Ns = static_cast<int>(Phi.cols());
    if (codebook.D.rows() != Ns || X_grid.rows() != codebook.D.cols() || Y.rows() != Phi.rows())
        throw std::invalid_argument("off-grid inputs have inconsistent shapes");
    OffgridResult out;
    out.H = codebook.D * X_grid;

    const RVector energy = X_grid.rowwise().squaredNorm();
    const double emax = energy.size() ? energy.maxCoeff() : 0.0;
    if (!(emax > 0.0)) return out;
    for (Eigen::Index k = 0; k < energy.size(); ++k)
        if (energy(k) >= cfg.support_fraction * emax) out.support.push_back(static_cast<int>(k));
    // Keep the system overdetermined: the strongest atoms win.
    const int cap = static_cast<int>(Phi.rows());
    if (static_cast<int>(out.support.size()) > cap) {
        std::stable_sort(out.support.begin(), out.support.end(),
                         [&](int a, int b) { return energy(a) > energy(b); });
        out.support.resize(cap);
        std::sort(out.support.begin(), out.support.end());
    }

    RVector z(out.support.size());
    for (std::size_t i = 0; i < out.support.size(); ++i) z(i) = codebook.z(out.support[i]);
    CMatrix X = X_grid(out.support, Eigen::all);

    auto drop_weakest = [&]() {
        const RVector e = X.rowwise().squaredNorm();
        Eigen::Index w;
        e.minCoeff(&w);
        std::vector<int> keep;
        for (Eigen::Index i = 0; i < z.size(); ++i)
            if (i != w) keep.push_back(static_cast<int>(i));
        RVector z2(keep.size());
        CMatrix X2(keep.size(), X.cols());
        IndexList s2;
        for (std::size_t i = 0; i < keep.size(); ++i) {
            z2(i) = z(keep[i]);
            X2.row(i) = X.row(keep[i]);
            s2.push_back(out.support[keep[i]]);
        }
        z = z2;
        X = X2;
        out.support = s2;
    };

    bool have_ls = false;
    for (int r = 0; r < cfg.R_ite && z.size() > 0; ++r) {
        const CMatrix A = Phi * codebook_matrix(z, Ns);
        Eigen::ColPivHouseholderQR<CMatrix> qr(A);
        if (qr.rank() < z.size()) {
            drop_weakest();
            --r;
            continue;
        }
        const CMatrix X_new = qr.solve(Y);
        const double f0 = (Y - A * X_new).squaredNorm();
        out.residual_trace.push_back(f0);
        const bool settled = have_ls && relative_change(X_new, X) < cfg.delta2;
        X = X_new;
        have_ls = true;
        out.iterations = r + 1;
        if (settled) break;

        const RVector g = offgrid_gradient(Y, Phi, z, X);
        const double gmax = g.cwiseAbs().maxCoeff();
        if (!(gmax > 0.0) || !std::isfinite(gmax)) break;
        double rho = (1.0 / Ns) / gmax;
        bool accepted = false;
        for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
            const RVector z_try = (z - rho * g).cwiseMax(-1.0).cwiseMin(1.0);
            const double f = offgrid_objective(Y, Phi, z_try, X);
            if (f <= f0 - cfg.armijo_c * rho * g.squaredNorm()) {
                z = z_try;
                out.residual_trace.push_back(f);
                accepted = true;
                break;
            }
            rho *= cfg.armijo_shrink;
        }
        if (!accepted) break;
    }
    out.z = z;
    out.X = X;
    if (z.size() > 0 && have_ls) out.H = codebook_matrix(z, Ns) * X;
    return out;
}

double nmse(const CMatrix& H_hat, const CMatrix& H) {
    if (H_hat.rows() != H.rows() || H_hat.cols() != H.cols()) throw std::invalid_argument("shape mismatch");
    const double den = H.squaredNorm();
    if (!(den > 0.0)) throw std::invalid_argument("zero-norm reference channel");
    return (H_hat - H).squaredNorm() / den;
}

}  // namespace snsce
