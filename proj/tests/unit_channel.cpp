#include <cmath>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "snsce/channel.hpp"

using namespace snsce;

namespace {

SystemConfig small_cfg(int N, int M = 1) {
    SystemConfig cfg;
    cfg.N = N;
    cfg.M = M;
    cfg.SI_min = 1;
    return cfg;
}

double quad_cos(double v) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 61>::integrate(
        [](double t) { return std::cos(kPi * t * t / 2.0); }, 0.0, v, 15, 1e-14);
}

double quad_sin(double v) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 61>::integrate(
        [](double t) { return std::sin(kPi * t * t / 2.0); }, 0.0, v, 15, 1e-14);
}

// World coordinates: array on the x axis centred at the origin, UE at
// (r sin(theta), r cos(theta)).
struct Pt {
    double x, y;
};

}  // namespace

TEST_CASE("steering vector trivial cases") {
    SystemConfig cfg = small_cfg(2);
    cfg.N = 1;
    CVector b = steering_vector(7.0, 0.4, cfg);
    CHECK(std::abs(b(0) - cplx(1.0, 0.0)) < 1e-15);

    cfg.N = 2;
    b = steering_vector(3.0, 0.0, cfg, SteeringMode::taylor);
    const double d = cfg.spacing();
    const cplx expect = std::polar(1.0 / std::sqrt(2.0), -cfg.wavenumber(cfg.fc) * d * d / (8.0 * 3.0));
    CHECK(std::abs(b(0) - expect) < 1e-14);
    CHECK(std::abs(b(1) - expect) < 1e-14);

    CHECK_THROWS_AS(steering_vector(0.0, 0.0, cfg), std::invalid_argument);
}

TEST_CASE("steering vector matches Euclidean distances") {
    SystemConfig cfg = small_cfg(4);
    const double r = 10.0, th = kPi / 6.0;
    const CVector b = steering_vector(r, th, cfg);
    const CVector bt = steering_vector(r, th, cfg, SteeringMode::taylor);
    const double k = cfg.wavenumber(cfg.fc);
    const double d = cfg.spacing();
    const Pt ue{r * std::sin(th), r * std::cos(th)};
    for (int n = 1; n <= 4; ++n) {
        const Pt el{(2.0 * n - 4 - 1) / 2.0 * d, 0.0};
        const double dist = std::hypot(ue.x - el.x, ue.y - el.y);
        const cplx oracle = std::polar(0.5, -k * (dist - r));
        CHECK(std::abs(b(n - 1) - oracle) < 1e-12);
        // Taylor remainder is third order in the element offset.
        const double x = std::abs(el.x);
        const double bound = k * x * x * x / (r * r);
        CHECK(std::abs(std::arg(b(n - 1) / bt(n - 1))) <= bound + 1e-12);
    }
}

TEST_CASE("steering vector has unit norm") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        SystemConfig cfg = small_cfg(2 + static_cast<int>(rng() % 300));
        const double r = uniform(rng, 0.5, 200.0), th = uniform(rng, -3.0, 3.0);
        CHECK(std::abs(steering_vector(r, th, cfg).norm() - 1.0) < 1e-12);
        CHECK(std::abs(steering_vector(r, th, cfg, SteeringMode::taylor).norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("ideal mask") {
    SystemConfig cfg = small_cfg(9);
    PathParams p;
    p.r = 4.0;
    p.theta = 1.1;
    RVector s = ideal_mask(p, cfg);
    CHECK(s(4) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK((s.array() > 0.0).all());

    cfg.N = 8;
    p.r = 5.0;
    p.theta = 0.5;
    s = ideal_mask(p, cfg);
    const RVector rn = element_distances(p.r, p.theta, cfg);
    const double d = cfg.spacing();
    for (int n = 1; n <= 8; ++n) {
        const double Dn = (2.0 * n - 8 - 1) / 2.0;
        const double oracle = 5.0 / std::sqrt(25.0 + Dn * d * Dn * d - 2.0 * Dn * d * 5.0 * std::sin(0.5));
        CHECK(std::abs(s(n - 1) - oracle) < 1e-12);
        CHECK(std::abs(s(n - 1) * rn(n - 1) - p.r) < 1e-12 * p.r);
    }

    // Far field: deviation bounded by the aperture over the distance.
    cfg.N = 64;
    p.r = 1e4;
    s = ideal_mask(p, cfg);
    const double aperture = 64 * d;
    CHECK((s.array() - 1.0).abs().maxCoeff() <= aperture / p.r);
}

TEST_CASE("Fresnel integrals against quadrature") {
    CHECK(fresnel_cs(0.0).C == 0.0);
    CHECK(fresnel_cs(0.0).S == 0.0);
    for (double v : {-7.3, -2.0, -1.5, -0.3, 0.01, 0.5, 1.0, 1.49, 1.5, 1.51, 2.2, 3.7, 6.0, 11.0}) {
        const FresnelCS f = fresnel_cs(v);
        CHECK(std::abs(f.C - quad_cos(v)) <= 1e-9);
        CHECK(std::abs(f.S - quad_sin(v)) <= 1e-9);
        const FresnelCS g = fresnel_cs(-v);
        CHECK(g.C == -f.C);
        CHECK(g.S == -f.S);
    }
    const FresnelCS one = fresnel_cs(1.0);
    CHECK(one.C == doctest::Approx(0.7799).epsilon(1e-4));
    CHECK(one.S == doctest::Approx(0.4383).epsilon(1e-4));
}

TEST_CASE("knife-edge gain") {
    CHECK(std::abs(diffraction_gain(0.0) - 0.25) < 1e-15);
    CHECK(std::abs(diffraction_gain(-60.0) - 1.0) < 1e-2);
    const double c = quad_cos(1.0), s = quad_sin(1.0);
    const double oracle = 0.25 * ((1 - c - s) * (1 - c - s) + (c - s) * (c - s));
    CHECK(std::abs(diffraction_gain(1.0) - oracle) < 1e-9);
    CHECK(10.0 * std::log10(diffraction_gain(1.0)) == doctest::Approx(-13.9).epsilon(0.01));
    double prev = diffraction_gain(0.0);
    for (int i = 1; i <= 300; ++i) {
        const double a = diffraction_gain(0.01 * i);
        CHECK(a < prev);
        CHECK(a > 0.0);
        prev = a;
    }
}

TEST_CASE("diffraction geometry closed forms") {
    SystemConfig cfg = small_cfg(17);
    PathParams p;
    p.kind = PathKind::non_ideal;
    p.theta = 0.0;
    p.r = 30.0;
    p.obstacle = Obstacle{0.02, 20.0, 10.0};
    auto geo = diffraction_geometry(p, cfg);
    // Centre element of an odd array sits at the reference point.
    CHECK(geo[8].delta == 0.0);
    CHECK(geo[8].h == doctest::Approx(0.02));
    CHECK(geo[8].d2 == doctest::Approx(10.0));

    p.obstacle->h_ref = 0.0;
    geo = diffraction_geometry(p, cfg);
    for (int n = 0; n < 8; ++n) {
        CHECK(geo[n].h * geo[16 - n].h < 0.0);
        CHECK(std::abs(geo[n].h + geo[16 - n].h) < 1e-15);
    }

    p.obstacle = Obstacle{0.0, 20.0, -1.0};
    CHECK_THROWS_AS(diffraction_geometry(p, cfg), GeometryError);
}

TEST_CASE("diffraction geometry matches a coordinate construction") {
    SystemConfig cfg = small_cfg(16);
    PathParams p;
    p.kind = PathKind::non_ideal;
    p.theta = 0.3;
    p.obstacle = Obstacle{0.05, 20.0, 10.0};
    p.r = 30.0;
    const auto geo = diffraction_geometry(p, cfg);
    const double d = cfg.spacing(), lambda = cfg.wavelength();
    const double st = std::sin(p.theta), ct = std::cos(p.theta);
    const Pt ue{p.r * st, p.r * ct};
    // Frame at the UE: e1 points back to the reference point, e2 is its clockwise normal.
    const Pt e1{-st, -ct}, e2{ct, -st};
    const Pt edge{ue.x + 10.0 * e1.x + 0.05 * e2.x, ue.y + 10.0 * e1.y + 0.05 * e2.y};
    for (int n = 1; n <= 16; ++n) {
        const Pt el{(2.0 * n - 16 - 1) / 2.0 * d, 0.0};
        const Pt a{el.x - ue.x, el.y - ue.y};
        const Pt b{edge.x - ue.x, edge.y - ue.y};
        const double len = std::hypot(a.x, a.y);
        const double h = (a.x * b.y - a.y * b.x) / len;
        const double d2 = (a.x * b.x + a.y * b.y) / len;
        const double d1 = len - d2;
        const double nu = h * std::sqrt(2.0 * (d1 + d2) / (lambda * d1 * d2));
        CHECK(std::abs(geo[n - 1].h - h) < 1e-12);
        CHECK(std::abs(geo[n - 1].d2 - d2) < 1e-12);
        // d1 uses a second-order expansion of the element-UE distance.
        const double x = std::abs(el.x);
        CHECK(std::abs(geo[n - 1].d1 - d1) < x * x * x / (p.r * p.r) + 1e-12);
        CHECK(std::abs(geo[n - 1].nu - nu) < 1e-9 * std::max(1.0, std::abs(nu)));
    }
}

TEST_CASE("non-ideal mask") {
    SystemConfig cfg = small_cfg(33);
    PathParams p;
    p.kind = PathKind::non_ideal;
    p.r = 30.0;
    p.theta = 0.0;
    p.obstacle = Obstacle{0.0, 20.0, 10.0};

    p.t_d = 0.0;
    CHECK((nonideal_mask(p, cfg) - ideal_mask(p, cfg)).cwiseAbs().maxCoeff() == 0.0);

    // Edge far below every element-UE line: A ~ 1 everywhere.
    p.obstacle->h_ref = -1e3;
    p.t_d = 0.7;
    CHECK((nonideal_mask(p, cfg) - ideal_mask(p, cfg)).cwiseAbs().maxCoeff() < 1e-3);

    p.obstacle->h_ref = 0.0;
    p.t_d = 1.0;
    const RVector s = nonideal_mask(p, cfg);
    const RVector si = ideal_mask(p, cfg);
    CHECK(std::abs(s(16) - 0.5 * si(16)) < 1e-12);

    // Deep shadow with strong t_d cannot keep the mask positive.
    p.obstacle->h_ref = 2.0;
    p.t_d = 1.5;
    CHECK_THROWS_AS(nonideal_mask(p, cfg), ConfigError);
}

TEST_CASE("visibility regions") {
    SystemConfig cfg = small_cfg(64);
    cfg.SI_min = 8;
    PathParams p;
    p.r = 20.0;
    Rng rng(11);

    MarkovParams mk;
    mk.p_stay_visible = 1.0;
    mk.initial_visible = true;
    VisibilityMask vm = sample_vr(p, cfg, mk, 0.1, rng);
    CHECK((vm.s.array() > 0.0).all());
    CHECK(!vm.warning);
    CHECK((vm.s - ideal_mask(p, cfg)).cwiseAbs().maxCoeff() == 0.0);

    mk.p_stay_blocked = 1.0;
    mk.initial_visible = false;
    mk.max_resample = 20;
    vm = sample_vr(p, cfg, mk, 0.1, rng);
    CHECK(vm.warning);
    CHECK(std::count(vm.blocks.begin(), vm.blocks.end(), 1) == 1);
    CHECK((vm.s.array() > 0.0).count() == 8);

    // Mean visible run length SI_min / (1 - p_stay_visible).
    SystemConfig big = small_cfg(4 * 2000);
    big.SI_min = 4;
    MarkovParams m8;
    double runs = 0.0, total = 0.0;
    for (int t = 0; t < 200; ++t) {
        vm = sample_vr(p, big, m8, 0.1, rng);
        int len = 0;
        for (int n = 0; n <= big.N; ++n) {
            if (n < big.N && vm.s(n) > 0.0) {
                ++len;
            } else if (len > 0) {
                runs += 1.0;
                total += len;
                len = 0;
            }
        }
    }
    CHECK(total / runs == doctest::Approx(5.0 * big.SI_min).epsilon(0.05));
}

TEST_CASE("non-ideal visibility is thresholded") {
    SystemConfig cfg = small_cfg(256);
    PathParams p;
    p.kind = PathKind::non_ideal;
    p.r = 20.0;
    p.theta = 0.2;
    p.t_d = 1.5;
    p.obstacle = Obstacle{0.0, 10.0, 10.0};
    Rng rng(1);
    VisibilityMask vm = sample_vr(p, cfg, {}, 0.1, rng);
    const RVector raw = nonideal_mask_raw(p, cfg);
    for (int n = 0; n < cfg.N; ++n) {
        if (raw(n) > 0.1 * raw.maxCoeff()) CHECK(vm.s(n) == raw(n));
        else CHECK(vm.s(n) == 0.0);
    }
    CHECK((vm.s.array() == 0.0).any());
    CHECK(vm.geometry.size() == 256u);
}

TEST_CASE("channel assembly") {
    SystemConfig cfg = small_cfg(32, 4);
    Rng rng(5);
    std::vector<Path> a, b;
    for (int i = 0; i < 3; ++i) {
        Path p;
        p.params.g = complex_normal(rng);
        p.params.r = uniform(rng, 5.0, 50.0);
        p.params.theta = uniform(rng, -1.0, 1.0);
        p.mask.s = ideal_mask(p.params, cfg);
        for (int n = 0; n < 4 * i; ++n) p.mask.s(n) = 0.0;
        (i < 2 ? a : b).push_back(p);
    }
    std::vector<Path> all = a;
    all.insert(all.end(), b.begin(), b.end());
    const auto ha = assemble_channel(cfg, a), hb = assemble_channel(cfg, b), hab = assemble_channel(cfg, all);
    CHECK((hab.H - ha.H - hb.H).cwiseAbs().maxCoeff() < 1e-14);

    // Direct evaluation of the masked sum at every subcarrier.
    for (int m = 0; m < cfg.M; ++m) {
        const double f = cfg.subcarrier_frequency(m);
        CVector col = CVector::Zero(cfg.N);
        for (const Path& p : all)
            col += p.params.g * std::polar(1.0, -2.0 * kPi * f * p.params.r / cfg.c) *
                   steering_vector(p.params.r, p.params.theta, cfg, SteeringMode::exact, f)
                       .cwiseProduct(p.mask.s.cast<cplx>());
        CHECK((col - hab.H.col(m)).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(hab.freqs(0) == doctest::Approx(cfg.fc - cfg.B / 2 + cfg.B / (2 * cfg.M)));

    // Gain linearity.
    std::vector<Path> scaled = all;
    scaled[1].params.g *= cplx(2.0, -1.0);
    const auto hs = assemble_channel(cfg, scaled);
    const auto h1 = assemble_channel(cfg, {all[1]});
    CHECK((hs.H - hab.H - cplx(1.0, -1.0) * h1.H).cwiseAbs().maxCoeff() < 1e-13);

    // Truth breakpoints from mask support edges.
    CHECK(hab.truth_breakpoints == IndexList{1, 5, 9, 33});

    for (auto& p : all) p.mask.s.setZero();
    const auto z = assemble_channel(cfg, all);
    CHECK(z.H.cwiseAbs().maxCoeff() == 0.0);
    CHECK(z.power.maxCoeff() == 0.0);
    CHECK(z.truth_breakpoints == IndexList{1, 33});
}

TEST_CASE("long subcarrier grids keep phase accuracy") {
    SystemConfig cfg = small_cfg(8, 200);
    Path p;
    p.params.r = 37.3;
    p.params.theta = 0.4;
    p.mask.s = RVector::Ones(8);
    const auto h = assemble_channel(cfg, {p});
    for (int m : {0, 31, 32, 117, 199}) {
        const double f = cfg.subcarrier_frequency(m);
        const CVector ref = std::polar(1.0, -2.0 * kPi * f * p.params.r / cfg.c) *
                            steering_vector(p.params.r, p.params.theta, cfg, SteeringMode::exact, f);
        CHECK((ref - h.H.col(m)).cwiseAbs().maxCoeff() < 1e-11);
    }
}

TEST_CASE("received power mean follows the per-element energy budget") {
    // Unit masks, full visibility: E[p_n] = M K L sigma^2 / N.
    SystemConfig cfg = small_cfg(64, 20);
    Rng rng(17);
    const int reps = 2000;
    RVector acc = RVector::Zero(cfg.N);
    double sum = 0.0, sum2 = 0.0;
    for (int t = 0; t < reps; ++t) {
        std::vector<Path> ps;
        for (int k = 0; k < 4; ++k) {
            Path p;
            p.params.g = complex_normal(rng);
            p.params.r = uniform(rng, 10.0, 100.0);
            p.params.theta = uniform(rng, -2.0, 2.0);
            p.mask.s = RVector::Ones(cfg.N);
            ps.push_back(p);
        }
        const auto h = assemble_channel(cfg, ps);
        const double v = h.power.mean();
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum2 / reps - mean * mean) / (reps - 1));
    const double expect = 20.0 * 4.0 / 64.0;
    CHECK(std::abs(mean - expect) < 3.0 * se);
}

TEST_CASE("zero-padded spectrum equals the interpolation formula") {
    Rng rng(23);
    CVector h(8);
    for (int i = 0; i < 8; ++i) h(i) = complex_normal(rng);
    const CVector direct = zero_padded_angular_spectrum(h, 3, 5);
    const CVector interp = angular_interpolation(h, 3, 5);
    CHECK((direct - interp).cwiseAbs().maxCoeff() < 1e-10);

    // No padding: the plain Q-point DFT.
    const CVector plain = zero_padded_angular_spectrum(h, 0, 0);
    for (int k = 0; k < 8; ++k) {
        cplx acc = 0.0;
        for (int q = 0; q < 8; ++q) acc += h(q) * std::polar(1.0, -2.0 * kPi * k * q / 8.0);
        CHECK(std::abs(acc - plain(k)) < 1e-12);
    }
    CHECK((angular_interpolation(h, 0, 0) - plain).cwiseAbs().maxCoeff() < 1e-10);

    // Shift theorem: a leading pad only changes phases.
    const CVector lead = zero_padded_angular_spectrum(h, 5, 0);
    const CVector trail = zero_padded_angular_spectrum(h, 0, 5);
    CHECK((lead.cwiseAbs() - trail.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-12);

    // Parseval with the unnormalized forward transform: sum |X|^2 = S sum |x|^2.
    CHECK(direct.squaredNorm() == doctest::Approx(16.0 * h.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("near-field distances") {
    SystemConfig cfg;
    cfg.N = 128;
    const double D = 127 * cfg.spacing();
    CHECK(rayleigh_distance(cfg) == doctest::Approx(2 * D * D / cfg.wavelength()));
    CHECK(rayleigh_distance(cfg) == doctest::Approx(86.4).epsilon(0.01));
    CHECK(fresnel_distance(cfg) == doctest::Approx(3.36).epsilon(0.01));
}

TEST_CASE("config validation") {
    SystemConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.SI_min = cfg.N + 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SystemConfig{};
    cfg.N = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("random scenes") {
    SystemConfig cfg;
    cfg.N = 256;
    cfg.K = 3;
    cfg.L = 3;
    ScenarioParams sp;
    sp.t_d = 1.5;
    Rng rng(99);
    for (int t = 0; t < 20; ++t) {
        const Scene sc = generate_scene(cfg, sp, rng);
        CHECK(sc.total.paths.size() == 9u);
        CMatrix sum = CMatrix::Zero(cfg.N, cfg.M);
        for (const auto& h : sc.ue_channels) sum += h;
        CHECK((sum - sc.total.H).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(sc.total.H.allFinite());
        const auto& bp = sc.total.truth_breakpoints;
        CHECK(bp.front() == 1);
        CHECK(bp.back() == cfg.N + 1);
        CHECK(std::is_sorted(bp.begin(), bp.end()));
        for (const auto& p : sc.total.paths) {
            CHECK((p.mask.s.array() >= 0.0).all());
            CHECK((p.mask.s.array() > 0.0).any());
        }
    }
}
