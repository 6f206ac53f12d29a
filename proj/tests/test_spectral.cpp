#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sqg/basis.hpp>
#include <sqg/spectral.hpp>
#include <sqg/config.hpp>
#include <sqg/solver.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace sqg;

// ============================================================================
// helpers
// ============================================================================

static double trapz_inner(const EigenBasis& b, const Eigen::ArrayXXd& f,
                          const Eigen::ArrayXXd& g) {
    Eigen::ArrayXd wx = Eigen::ArrayXd::Ones(b.grid.nx);
    Eigen::ArrayXd wy = Eigen::ArrayXd::Ones(b.grid.ny);
    wx(0) = wx(b.grid.nx - 1) = 0.5;
    wy(0) = wy(b.grid.ny - 1) = 0.5;
    double s = (((f * g).colwise() * wx).rowwise().sum().matrix()).dot(wy.matrix());
    return s * b.grid.hx * b.grid.hy;
}

static SpectralField random_field(const BasisPtr& b, Rng& rng, double amp = 1.0) {
    SpectralField f = SpectralField::zero(b);
    for (int j = 0; j < b->n_modes; ++j) f.c[j] = amp * rng.uniform(-1.0, 1.0);
    return f;
}

// brute-force evaluation of the subordination integrand on a very fine
// composite Simpson mesh in log t; independent of the production quadrature
static double simpson_subordination(double mu, double s) {
    double eps = 1e-14, big = 1e6;
    double lo = std::log(eps), hi = std::log(big);
    int n = 200000;  // must be even
    double h = (hi - lo) / n, acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        double u = lo + i * h, t = std::exp(u);
        double f = (1.0 - std::exp(-t * mu)) * std::pow(t, -0.5 * s);  // dt = t du
        double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * f;
    }
    acc *= h / 3.0;
    // analytic tails: series of 1 - e^{-mu t} below eps, integrand ~ t^{-1-s/2}
    // above big (mu*big >> 1 for every mu used here)
    acc += mu * std::pow(eps, 1.0 - 0.5 * s) / (1.0 - 0.5 * s) -
           0.5 * mu * mu * std::pow(eps, 2.0 - 0.5 * s) / (2.0 - 0.5 * s);
    acc += (2.0 / s) * std::pow(big, -0.5 * s);
    return acc;
}

// ============================================================================
// rectangle eigenbasis
// ============================================================================

TEST_CASE("rectangle eigenvalues are pi^2 (k^2/Lx^2 + l^2/Ly^2), ascending") {
    BasisPtr b = build_eigenbasis(DomainSpec::rectangle(1.3, 0.7), 40);
    for (int j = 0; j < b->n_modes; ++j) {
        auto [k, l] = b->modes[j];
        double mu = M_PI * M_PI * (k * k / (1.3 * 1.3) + l * l / (0.7 * 0.7));
        CHECK(b->mu(j) == doctest::Approx(mu).epsilon(1e-13));
        if (j) CHECK(b->mu(j) >= b->mu(j - 1));
    }
}

TEST_CASE("first eigenvalue of the unit square is 2 pi^2") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 4);
    CHECK(b->mu(0) == doctest::Approx(2.0 * M_PI * M_PI).epsilon(1e-14));
    auto [k, l] = b->modes[0];
    CHECK(k == 1);
    CHECK(l == 1);
}

TEST_CASE("mode samples are orthonormal under the trapezoid inner product") {
    BasisPtr b = build_eigenbasis(DomainSpec::rectangle(1.3, 0.7), 16);
    for (int i = 0; i < b->n_modes; ++i)
        for (int j = i; j < b->n_modes; ++j) {
            double ip = trapz_inner(*b, b->mode_values(i), b->mode_values(j));
            CHECK(ip == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-11));
        }
}

TEST_CASE("analyze inverts synth for band-limited data") {
    BasisPtr b = build_eigenbasis(DomainSpec::rectangle(2.0, 1.0), 64);
    Rng rng(7, "roundtrip");
    SpectralField f = random_field(b, rng);
    Eigen::VectorXd back = b->analyze(b->synth(f.c));
    CHECK((back - f.c).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("synth_grad matches the analytic derivative of a single mode") {
    BasisPtr b = build_eigenbasis(DomainSpec::rectangle(1.0, 1.5), 30);
    int pick = 5;
    auto [k, l] = b->modes[pick];
    Eigen::VectorXd c = Eigen::VectorXd::Zero(b->n_modes);
    c[pick] = 1.0;
    Eigen::ArrayXXd gx, gy;
    b->synth_grad(c, gx, gy);
    double ax = k * M_PI / 1.0, ay = l * M_PI / 1.5;
    double nf = std::sqrt(2.0 / 1.0) * std::sqrt(2.0 / 1.5);
    for (int j = 0; j < b->grid.ny; j += 7)
        for (int i = 0; i < b->grid.nx; i += 7) {
            double x = b->grid.x(i), y = b->grid.y(j);
            CHECK(gx(i, j) ==
                  doctest::Approx(nf * ax * std::cos(ax * x) * std::sin(ay * y)).epsilon(1e-12));
            CHECK(gy(i, j) ==
                  doctest::Approx(nf * ay * std::sin(ax * x) * std::cos(ay * y)).epsilon(1e-12));
        }
}

TEST_CASE("modes vanish on the boundary rows of the grid") {
    BasisPtr b = build_eigenbasis(DomainSpec::rectangle(0.9, 1.1), 12);
    for (int j = 0; j < b->n_modes; ++j) {
        Eigen::ArrayXXd w = b->mode_values(j);
        CHECK(w.row(0).abs().maxCoeff() < 1e-13);
        CHECK(w.row(b->grid.nx - 1).abs().maxCoeff() < 1e-13);
        CHECK(w.col(0).abs().maxCoeff() < 1e-13);
        CHECK(w.col(b->grid.ny - 1).abs().maxCoeff() < 1e-13);
    }
}

// ============================================================================
// discretized-domain eigenbasis, checked against its own stencil
// ============================================================================

TEST_CASE("masked-domain modes satisfy the 5-point eigenrelation") {
    // L-shaped mask: the eigensolve must reproduce -Delta_h w = mu w when
    // the stencil is applied directly (zero outside the mask)
    int n = 14;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) mask(i, j) = !(i >= n / 2 && j >= n / 2);
    double h = 0.05;
    BasisPtr b = build_eigenbasis(DomainSpec::discretized(mask, h), 6);
    // vecs sit on the padded grid (zero ring), mask node (i,j) -> (i+1,j+1)
    for (int m = 0; m < b->n_modes; ++m) {
        const Eigen::ArrayXXd& w = b->vecs[m];
        double worst = 0.0, scale = w.abs().maxCoeff();
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                if (!mask(i, j)) continue;
                double lap = (4.0 * w(i + 1, j + 1) - w(i, j + 1) - w(i + 2, j + 1) -
                              w(i + 1, j) - w(i + 1, j + 2)) /
                             (h * h);
                worst = std::max(worst, std::abs(lap - b->mu(m) * w(i + 1, j + 1)));
            }
        CHECK(worst < 1e-8 * b->mu(m) * scale);
    }
}

// ============================================================================
// eigenbasis cache round-trip
// ============================================================================

TEST_CASE("cache save/load is bit-exact") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "sqg_cache_test";
    fs::create_directories(dir);
    std::string path = (dir / "basis").string();

    BasisPtr b = build_eigenbasis(DomainSpec::rectangle(1.7, 0.4), 25);
    save_eigenbasis(*b, path);
    BasisPtr r = load_eigenbasis(path);

    REQUIRE(r->n_modes == b->n_modes);
    CHECK((r->mu.array() == b->mu.array()).all());
    CHECK((r->Sx.array() == b->Sx.array()).all());
    CHECK((r->Sy.array() == b->Sy.array()).all());
    CHECK((r->Cx.array() == b->Cx.array()).all());
    CHECK(r->modes == b->modes);
    CHECK(r->grid.same(b->grid));
    fs::remove_all(dir);
}

TEST_CASE("cache round-trip also covers the masked-domain payload") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "sqg_cache_test2";
    fs::create_directories(dir);
    std::string path = (dir / "basis").string();

    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask(8, 8);
    mask.setConstant(true);
    BasisPtr b = build_eigenbasis(DomainSpec::discretized(mask, 0.1), 5);
    save_eigenbasis(*b, path);
    BasisPtr r = load_eigenbasis(path);
    REQUIRE(r->n_modes == b->n_modes);
    CHECK((r->mu.array() == b->mu.array()).all());
    for (int m = 0; m < b->n_modes; ++m)
        CHECK((r->vecs[m] == b->vecs[m]).all());
    fs::remove_all(dir);
}

// ============================================================================
// fractional powers
// ============================================================================

TEST_CASE("power s = 2 multiplies by mu; s = 0 is the identity") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 20);
    Rng rng(3, "powers");
    SpectralField f = random_field(b, rng);
    SpectralField two = apply_dirichlet_power(f, 2.0);
    SpectralField zero = apply_dirichlet_power(f, 0.0);
    for (int j = 0; j < b->n_modes; ++j) {
        CHECK(two.c[j] == doctest::Approx(b->mu(j) * f.c[j]).epsilon(1e-14));
        CHECK(zero.c[j] == doctest::Approx(f.c[j]).epsilon(1e-14));
    }
}

TEST_CASE("powers compose additively") {
    BasisPtr b = build_eigenbasis(DomainSpec::rectangle(1.0, 2.0), 24);
    Rng rng(5, "compose");
    SpectralField f = random_field(b, rng);
    SpectralField ab = apply_dirichlet_power(apply_dirichlet_power(f, 0.6), 0.9);
    SpectralField once = apply_dirichlet_power(f, 1.5);
    CHECK((ab.c - once.c).cwiseAbs().maxCoeff() < 1e-12 * once.c.cwiseAbs().maxCoeff());
}

TEST_CASE("powers at or below -2 are rejected") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 4);
    SpectralField f = SpectralField::zero(b);
    CHECK_THROWS_AS(apply_dirichlet_power(f, -2.0), config_error);
    CHECK_THROWS_AS(apply_dirichlet_power(f, -2.5), config_error);
}

// ============================================================================
// heat semigroup
// ============================================================================

TEST_CASE("heat semigroup is a per-mode exponential and composes in t") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 16);
    Rng rng(11, "heat");
    SpectralField f = random_field(b, rng);
    double t = 0.013;
    SpectralField ht = heat_semigroup(f, t);
    for (int j = 0; j < b->n_modes; ++j)
        CHECK(ht.c[j] == doctest::Approx(std::exp(-t * b->mu(j)) * f.c[j]).epsilon(1e-13));
    SpectralField twice = heat_semigroup(heat_semigroup(f, 0.004), 0.009);
    CHECK((twice.c - ht.c).cwiseAbs().maxCoeff() < 1e-14);
    SpectralField id = heat_semigroup(f, 0.0);
    CHECK((id.c - f.c).cwiseAbs().maxCoeff() == 0.0);
}

// ============================================================================
// subordination quadrature against a brute-force oracle
// ============================================================================

TEST_CASE("subordination integral matches fine composite Simpson") {
    SubordinationQuad q;
    for (double s : {0.5, 1.0, 1.5})
        for (double mu : {19.7, 2.0 * M_PI * M_PI, 350.0}) {
            double got = subordination_integral(mu, s, 1e-8 / 400.0, 40.0 / 19.0, q);
            double want = simpson_subordination(mu, s);
            CHECK(got == doctest::Approx(want).epsilon(1e-7));
        }
}

TEST_CASE("subordinated Lambda^s agrees with the direct spectral power") {
    BasisPtr b = build_eigenbasis(DomainSpec::rectangle(1.0, 1.4), 48);
    Rng rng(2, "subord");
    SpectralField f = random_field(b, rng);
    for (double s : {0.5, 1.0, 1.5}) {
        SpectralField via = lambda_via_subordination(f, s);
        SpectralField direct = apply_dirichlet_power(f, s);
        double rel = (via.c - direct.c).norm() / direct.c.norm();
        CHECK(rel < 1e-10);
    }
}

// ============================================================================
// Riesz velocity
// ============================================================================

TEST_CASE("velocity of a single mode matches the analytic perp gradient") {
    double Lx = 1.0, Ly = 1.0;
    BasisPtr b = build_eigenbasis(DomainSpec::rectangle(Lx, Ly), 30, 128);
    int pick = 7;
    auto [k, l] = b->modes[pick];
    SpectralField th = SpectralField::zero(b);
    th.c[pick] = 1.0;
    GridField ux, uy;
    riesz_velocity(th, ux, uy);
    double mu = b->mu(pick), sq = std::sqrt(mu);
    double ax = k * M_PI / Lx, ay = l * M_PI / Ly;
    double nf = 2.0 / std::sqrt(Lx * Ly);
    for (int j = 0; j < b->grid.ny; j += 11)
        for (int i = 0; i < b->grid.nx; i += 11) {
            double x = b->grid.x(i), y = b->grid.y(j);
            // psi = w / sqrt(mu); u = (-d2 psi, d1 psi)
            double want_x = -nf * ay * std::sin(ax * x) * std::cos(ay * y) / sq;
            double want_y = nf * ax * std::cos(ax * x) * std::sin(ay * y) / sq;
            CHECK(ux.v(i, j) == doctest::Approx(want_x).epsilon(1e-11));
            CHECK(uy.v(i, j) == doctest::Approx(want_y).epsilon(1e-11));
        }
}

// ============================================================================
// deterministic RNG & initial data
// ============================================================================

TEST_CASE("rng streams are reproducible and label-separated") {
    Rng a(123, "alpha"), b(123, "alpha"), c(123, "beta");
    bool differ = false;
    for (int i = 0; i < 16; ++i) {
        auto va = a.next_u64();
        CHECK(va == b.next_u64());
        if (va != c.next_u64()) differ = true;
    }
    CHECK(differ);
}

TEST_CASE("initial data is seed-deterministic and band-limited") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 32 * 32);
    Config c;
    c.set("initial.type", "random_band");
    c.set("initial.band", "6");
    c.set("initial.amplitude", "0.5");
    SpectralField f1 = initial_data(c, b, Rng(9, "ic"));
    SpectralField f2 = initial_data(c, b, Rng(9, "ic"));
    CHECK((f1.c - f2.c).cwiseAbs().maxCoeff() == 0.0);
    // stays below the dealias cutoff of the automatic grid
    for (int j = 0; j < b->n_modes; ++j) {
        auto [k, l] = b->modes[j];
        if (k > (2 * b->kmax) / 3 || l > (2 * b->lmax) / 3) CHECK(f1.c[j] == 0.0);
    }
    CHECK(f1.c.cwiseAbs().maxCoeff() > 0.0);
}
