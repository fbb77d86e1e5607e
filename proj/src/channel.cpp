#include "snsce/channel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace snsce {

void SystemConfig::validate() const {
    std::ostringstream err;
    if (N < 2) err << "N must be >= 2; ";
    if (M < 1) err << "M must be >= 1; ";
    if (K < 1) err << "K must be >= 1; ";
    if (L < 1) err << "L must be >= 1; ";
    if (!(fc > 0.0) || !std::isfinite(fc)) err << "fc must be positive; ";
    if (!(B >= 0.0) || !std::isfinite(B)) err << "B must be non-negative; ";
    if (B >= 2.0 * fc) err << "B must be below 2*fc; ";
    if (d < 0.0 || !std::isfinite(d)) err << "d must be positive (0 selects lambda/2); ";
    if (!(c > 0.0)) err << "c must be positive; ";
    if (N_RF < 1) err << "N_RF must be >= 1; ";
    if (P < 1) err << "P must be >= 1; ";
    if (SI_min < 1 || SI_min > N) err << "SI_min must lie in [1, N]; ";
    const std::string msg = err.str();
    if (!msg.empty()) throw ConfigError("SystemConfig: " + msg.substr(0, msg.size() - 2));
}

RVector element_distances(double r, double theta, const SystemConfig& cfg, SteeringMode mode) {
    if (!(r > 0.0)) throw std::invalid_argument("element_distances: r must be positive");
    const double d = cfg.spacing();
    const double st = std::sin(theta);
    const double ct = std::cos(theta);
    RVector out(cfg.N);
    for (int n = 0; n < cfg.N; ++n) {
        const double x = cfg.element_offset(n) * d;
        if (mode == SteeringMode::exact) {
            out(n) = std::sqrt(r * r + x * x - 2.0 * x * r * st);
        } else {
            out(n) = r - x * st + (x * ct) * (x * ct) / (2.0 * r);
        }
    }
    return out;
}

CVector steering_vector(double r, double theta, const SystemConfig& cfg, SteeringMode mode,
                        double freq) {
    if (!(r > 0.0)) throw std::invalid_argument("steering_vector: r must be positive");
    const double k = cfg.wavenumber(freq > 0.0 ? freq : cfg.fc);
    const RVector rn = element_distances(r, theta, cfg, mode);
    const double a = 1.0 / std::sqrt(static_cast<double>(cfg.N));
    CVector b(cfg.N);
    for (int n = 0; n < cfg.N; ++n) b(n) = std::polar(a, -k * (rn(n) - r));
    return b;
}

RVector ideal_mask(const PathParams& path, const SystemConfig& cfg) {
    const RVector rn = element_distances(path.r, path.theta, cfg, SteeringMode::exact);
    return rn.cwiseInverse() * path.r;
}

FresnelCS fresnel_cs(double v) {
    constexpr double eps = 1e-16;
    constexpr int max_iter = 200;
    constexpr double fpmin = 1e-300;
    constexpr double xmin = 1.5;
    constexpr double half_pi = 0.5 * kPi;

    const double ax = std::abs(v);
    FresnelCS out;
    if (ax < 1e-150) {
        out.C = ax;
        out.S = 0.0;
    } else if (ax <= xmin) {
        // Power series, alternating between the C and S partial sums.
        double sum = 0.0, sums = 0.0, sumc = ax;
        double sign = 1.0;
        const double fact = half_pi * ax * ax;
        bool odd = true;
        double term = ax;
        double n = 3.0;
        for (int k = 1; k <= max_iter; ++k) {
            term *= fact / k;
            sum += sign * term / n;
            const double test = std::abs(sum) * eps;
            if (odd) {
                sign = -sign;
                sums = sum;
                sum = sumc;
            } else {
                sumc = sum;
                sum = sums;
            }
            if (term < test) break;
            odd = !odd;
            n += 2.0;
        }
        out.C = sumc;
        out.S = sums;
    } else {
        // Continued fraction for the complementary error function (modified Lentz).
        const double pix2 = kPi * ax * ax;
        cplx b(1.0, -pix2);
        cplx cc(1.0 / fpmin, 0.0);
        cplx d = 1.0 / b;
        cplx h = d;
        double n = -1.0;
        for (int k = 2; k <= max_iter; ++k) {
            n += 2.0;
            const double a = -n * (n + 1.0);
            b += 4.0;
            d = 1.0 / (a * d + b);
            cc = b + a / cc;
            const cplx del = cc * d;
            h *= del;
            if (std::abs(del.real() - 1.0) + std::abs(del.imag()) < eps) break;
        }
        h *= cplx(ax, -ax);
        const cplx cs = cplx(0.5, 0.5) * (1.0 - std::polar(1.0, 0.5 * pix2) * h);
        out.C = cs.real();
        out.S = cs.imag();
    }
    if (v < 0.0) {
        out.C = -out.C;
        out.S = -out.S;
    }
    return out;
}

double diffraction_gain(double v) {
    const FresnelCS f = fresnel_cs(v);
    const double a = 1.0 - f.C - f.S;
    const double b = f.C - f.S;
    return 0.25 * (a * a + b * b);
}

std::vector<ElementGeometry> diffraction_geometry(const PathParams& path, const SystemConfig& cfg) {
    if (path.kind != PathKind::non_ideal || !path.obstacle)
        throw std::invalid_argument("diffraction_geometry: non-ideal path with obstacle required");
    const Obstacle& ob = *path.obstacle;
    if (!(ob.d1_ref > 0.0) || !(ob.d2_ref > 0.0))
        throw GeometryError("diffraction_geometry: d1_ref and d2_ref must be positive");
    const double d = cfg.spacing();
    const double lambda = cfg.wavelength();
    const double st = std::sin(path.theta);
    const double ct = std::cos(path.theta);
    const double dsum = ob.d1_ref + ob.d2_ref;

    std::vector<ElementGeometry> geo(cfg.N);
    for (int n = 0; n < cfg.N; ++n) {
        ElementGeometry& g = geo[n];
        // Signed so that the element sits where the steering vector places it.
        g.delta = -cfg.element_offset(n) * d;
        g.q = dsum + g.delta * st;
        const double lat = g.delta * ct;
        const double rho = std::sqrt(g.q * g.q + lat * lat);
        g.h = (ob.h_ref * g.q + ob.d2_ref * lat) / rho;
        g.d2 = (ob.d2_ref * g.q - ob.h_ref * lat) / rho;
        g.d1 = dsum + g.delta * st + lat * lat / (2.0 * dsum) - g.d2;
        if (!(g.d1 > 0.0) || !(g.d2 > 0.0)) {
            std::ostringstream os;
            os << "diffraction_geometry: obstacle not between element " << (n + 1)
               << " and the UE (d1=" << g.d1 << ", d2=" << g.d2 << ")";
            throw GeometryError(os.str());
        }
        g.nu = g.h * std::sqrt(2.0 * (g.d1 + g.d2) / (lambda * g.d1 * g.d2));
        g.A = diffraction_gain(g.nu);
    }
    return geo;
}

RVector nonideal_mask_raw(const PathParams& path, const SystemConfig& cfg,
                          std::vector<ElementGeometry>* geometry) {
    std::vector<ElementGeometry> geo = diffraction_geometry(path, cfg);
    RVector s = ideal_mask(path, cfg);
    for (int n = 0; n < cfg.N; ++n) s(n) *= path.t_d * (std::sqrt(geo[n].A) - 1.0) + 1.0;
    if (geometry) *geometry = std::move(geo);
    return s;
}

RVector nonideal_mask(const PathParams& path, const SystemConfig& cfg) {
    std::vector<ElementGeometry> geo;
    RVector s = nonideal_mask_raw(path, cfg, &geo);
    double min_root = 1.0;
    for (const auto& g : geo) min_root = std::min(min_root, std::sqrt(g.A));
    if (!(path.t_d * (1.0 - min_root) < 1.0)) {
        std::ostringstream os;
        os << "nonideal_mask: t_d=" << path.t_d << " makes the mask non-positive (bound "
           << 1.0 / (1.0 - min_root) << ")";
        throw ConfigError(os.str());
    }
    return s;
}

namespace {

std::vector<int> draw_chain(int blocks, const MarkovParams& mk, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool state;
    if (mk.initial_visible) {
        state = *mk.initial_visible;
    } else {
        const double leave_v = 1.0 - mk.p_stay_visible;
        const double leave_b = 1.0 - mk.p_stay_blocked;
        const double pv = (leave_v + leave_b) > 0.0 ? leave_b / (leave_v + leave_b) : 0.5;
        state = u(rng) < pv;
    }
    std::vector<int> z(blocks);
    for (int b = 0; b < blocks; ++b) {
        if (b > 0) {
            const double stay = state ? mk.p_stay_visible : mk.p_stay_blocked;
            if (!(u(rng) < stay)) state = !state;
        }
        z[b] = state ? 1 : 0;
    }
    return z;
}

}  // namespace

VisibilityMask sample_vr(const PathParams& path, const SystemConfig& cfg,
                         const MarkovParams& markov, double power_threshold, Rng& rng) {
    for (double p : {markov.p_stay_visible, markov.p_stay_blocked})
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sample_vr: probabilities must lie in [0, 1]");
    VisibilityMask vm;
    if (path.kind == PathKind::non_ideal) {
        RVector raw = nonideal_mask_raw(path, cfg, &vm.geometry);
        const double peak = raw.maxCoeff();
        vm.s = RVector::Zero(cfg.N);
        for (int n = 0; n < cfg.N; ++n)
            if (raw(n) > 0.0 && raw(n) > power_threshold * peak) vm.s(n) = raw(n);
        return vm;
    }

    const int blocks = cfg.block_count();
    std::vector<int> z;
    bool ok = false;
    for (int attempt = 0; attempt <= std::max(0, markov.max_resample); ++attempt) {
        z = draw_chain(blocks, markov, rng);
        if (std::any_of(z.begin(), z.end(), [](int v) { return v == 1; })) {
            ok = true;
            break;
        }
    }
    if (!ok) {
        std::uniform_int_distribution<int> pick(0, blocks - 1);
        z[pick(rng)] = 1;
        vm.warning = true;
    }
    vm.blocks = z;
    const RVector base = ideal_mask(path, cfg);
    vm.s = RVector::Zero(cfg.N);
    for (int n = 0; n < cfg.N; ++n)
        if (z[n / cfg.SI_min]) vm.s(n) = base(n);
    return vm;
}

RVector received_power(const CMatrix& H, PowerMode mode) {
    if (mode == PowerMode::coherent) return H.rowwise().sum().cwiseAbs2();
    return H.cwiseAbs2().rowwise().sum();
}

RVector measure_power(const CMatrix& H, double noise_var, Rng& rng) {
    RVector p = RVector::Zero(H.rows());
    for (Eigen::Index n = 0; n < H.rows(); ++n)
        for (Eigen::Index m = 0; m < H.cols(); ++m)
            p(n) += std::norm(H(n, m) + complex_normal(rng, noise_var));
    return p;
}

IndexList visibility_breakpoints(const std::vector<Path>& paths, int N) {
    IndexList bp{1};
    for (int n = 1; n < N; ++n) {
        bool change = false;
        for (const Path& p : paths) {
            if ((p.mask.s(n) > 0.0) != (p.mask.s(n - 1) > 0.0)) {
                change = true;
                break;
            }
        }
        if (change) bp.push_back(n + 1);
    }
    bp.push_back(N + 1);
    return bp;
}

ChannelRealization assemble_channel(const SystemConfig& cfg, std::vector<Path> paths,
                                    PowerMode mode) {
    const int N = cfg.N;
    const int M = cfg.M;
    ChannelRealization out;
    out.freqs.resize(M);
    for (int m = 0; m < M; ++m) out.freqs(m) = cfg.subcarrier_frequency(m);
    out.H = CMatrix::Zero(N, M);

    const double a = 1.0 / std::sqrt(static_cast<double>(N));
    const double df = M > 1 ? cfg.B / M : 0.0;
    constexpr int kReanchor = 32;
    for (const Path& path : paths) {
        if (path.mask.s.size() != N) throw std::invalid_argument("assemble_channel: mask length != N");
        const RVector rn = element_distances(path.params.r, path.params.theta, cfg);
        for (int n = 0; n < N; ++n) {
            const double s = path.mask.s(n);
            if (s == 0.0) continue;
            const cplx amp = path.params.g * (a * s);
            // exp(-j k_m r^(n)) along the uniform grid via a re-anchored geometric recurrence.
            const cplx step = std::polar(1.0, -2.0 * kPi * df * rn(n) / cfg.c);
            cplx ph;
            for (int m = 0; m < M; ++m) {
                if (m % kReanchor == 0)
                    ph = std::polar(1.0, -cfg.wavenumber(out.freqs(m)) * rn(n));
                else
                    ph *= step;
                out.H(n, m) += amp * ph;
            }
        }
    }
    out.power = received_power(out.H, mode);
    out.truth_breakpoints = visibility_breakpoints(paths, N);
    out.paths = std::move(paths);
    return out;
}

CVector zero_padded_angular_spectrum(const CVector& h_vr, int P0, int R0) {
    const int Q = static_cast<int>(h_vr.size());
    if (Q < 1 || P0 < 0 || R0 < 0)
        throw std::invalid_argument("zero_padded_angular_spectrum: need Q >= 1, P0, R0 >= 0");
    const int S = P0 + Q + R0;
    CVector out(S);
    for (int k = 0; k < S; ++k) {
        cplx acc = 0.0;
        for (int q = 0; q < Q; ++q) {
            const long long idx = static_cast<long long>(k) * (P0 + q) % S;
            acc += h_vr(q) * std::polar(1.0, -2.0 * kPi * static_cast<double>(idx) / S);
        }
        out(k) = acc;
    }
    return out;
}

CVector angular_interpolation(const CVector& h_vr, int P0, int R0) {
    const int Q = static_cast<int>(h_vr.size());
    if (Q < 1 || P0 < 0 || R0 < 0)
        throw std::invalid_argument("angular_interpolation: need Q >= 1, P0, R0 >= 0");
    const int S = P0 + Q + R0;
    const CVector Hq = zero_padded_angular_spectrum(h_vr, 0, 0);
    const long long QS = static_cast<long long>(Q) * S;
    CVector out(S);
    for (int k = 0; k < S; ++k) {
        const cplx num = 1.0 - std::polar(1.0, -2.0 * kPi * static_cast<double>((1LL * k * Q) % S) / S);
        cplx acc = 0.0;
        for (int m = 0; m < Q; ++m) {
            // Exponent (2pi/Q)(m - kQ/S) = 2pi (mS - kQ)/(QS); singular when it is a multiple of 2pi.
            long long e = (1LL * m * S - 1LL * k * Q) % QS;
            if (e < 0) e += QS;
            if (e == 0) {
                acc += Hq(m);
            } else {
                const cplx den = 1.0 - std::polar(1.0, 2.0 * kPi * static_cast<double>(e) / QS);
                acc += Hq(m) / static_cast<double>(Q) * num / den;
            }
        }
        const long long sh = (1LL * k * P0) % S;
        out(k) = std::polar(1.0, -2.0 * kPi * static_cast<double>(sh) / S) * acc;
    }
    return out;
}

double fresnel_distance(const SystemConfig& cfg) {
    const double D = (cfg.N - 1) * cfg.spacing();
    return 0.62 * std::sqrt(D * D * D / cfg.wavelength());
}

double rayleigh_distance(const SystemConfig& cfg) {
    const double D = (cfg.N - 1) * cfg.spacing();
    return 2.0 * D * D / cfg.wavelength();
}

Scene generate_scene(const SystemConfig& cfg, const ScenarioParams& sp, Rng& rng) {
    cfg.validate();
    if (!(sp.r_min > 0.0) || sp.r_max < sp.r_min) throw ConfigError("scenario: need 0 < r_min <= r_max");
    const double lambda = cfg.wavelength();
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    Scene scene;
    scene.cfg = cfg;
    std::vector<Path> all;
    for (int k = 0; k < cfg.K; ++k) {
        std::vector<Path> ue_paths;
        const bool has_nonideal = u01(rng) < sp.nonideal_prob;
        for (int l = 0; l < cfg.L; ++l) {
            Path p;
            p.params.ue = k;
            p.params.g = complex_normal(rng, sp.gain_variance);
            p.params.r = sp.fixed_distance ? *sp.fixed_distance : uniform(rng, sp.r_min, sp.r_max);
            p.params.theta = uniform(rng, -sp.theta_max, sp.theta_max);
            if (l == 0 && has_nonideal) {
                p.params.kind = PathKind::non_ideal;
                p.params.t_d = sp.t_d;
                // Redraw the obstacle if it does not sit between every element and the UE.
                bool placed = false;
                for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
                    Obstacle ob;
                    ob.d1_ref = uniform(rng, sp.d1_fraction_min, sp.d1_fraction_max) * p.params.r;
                    ob.d2_ref = p.params.r - ob.d1_ref;
                    ob.h_ref = uniform(rng, -sp.h_ref_wavelengths * lambda, sp.h_ref_wavelengths * lambda);
                    p.params.obstacle = ob;
                    try {
                        p.mask = sample_vr(p.params, cfg, sp.markov, sp.power_threshold, rng);
                        placed = true;
                    } catch (const GeometryError&) {
                    }
                }
                if (!placed) throw GeometryError("generate_scene: could not place an obstacle");
                if (sp.full_visibility) {
                    p.mask.s = nonideal_mask_raw(p.params, cfg).cwiseMax(0.0);
                }
            } else if (sp.full_visibility) {
                p.mask.s = ideal_mask(p.params, cfg);
                p.mask.blocks.assign(cfg.block_count(), 1);
            } else {
                p.mask = sample_vr(p.params, cfg, sp.markov, sp.power_threshold, rng);
            }
            ue_paths.push_back(std::move(p));
        }
        scene.ue_channels.push_back(assemble_channel(cfg, ue_paths).H);
        for (auto& p : ue_paths) all.push_back(std::move(p));
    }
    scene.total = assemble_channel(cfg, std::move(all));
    return scene;
}

}  // namespace snsce
