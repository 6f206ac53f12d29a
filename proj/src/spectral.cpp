#include "sqg/spectral.hpp"

#include <cmath>

#include "sqg/gauss.hpp"

namespace sqg {

SpectralField project(const BasisPtr& basis, const GridField& f) {
    if (!basis) throw config_error("project: null basis");
    if (!f.g.same(basis->grid)) throw config_error("project: grid mismatch");
    return SpectralField(basis, basis->analyze(f.v));
}

GridField reconstruct(const SpectralField& f) {
    if (!f.basis) throw config_error("reconstruct: empty field");
    GridField out(f.basis->grid);
    out.v = f.basis->synth(f.c);
    return out;
}

void reconstruct_grad(const SpectralField& f, GridField& fx, GridField& fy) {
    if (!f.basis) throw config_error("reconstruct_grad: empty field");
    fx = GridField(f.basis->grid);
    fy = GridField(f.basis->grid);
    f.basis->synth_grad(f.c, fx.v, fy.v);
}

SpectralField apply_dirichlet_power(const SpectralField& f, double s) {
    if (s <= -2.0) throw config_error("apply_dirichlet_power: s must be > -2");
    SpectralField out = f;
    for (int j = 0; j < f.basis->n_modes; ++j)
        out.c(j) = f.c(j) * std::pow(f.basis->mu(j), 0.5 * s);
    if (!out.c.allFinite()) throw numerical_error("apply_dirichlet_power: non-finite result");
    return out;
}

SpectralField heat_semigroup(const SpectralField& f, double t) {
    if (t < 0) throw config_error("heat_semigroup: t must be >= 0");
    SpectralField out = f;
    for (int j = 0; j < f.basis->n_modes; ++j)
        out.c(j) = f.c(j) * std::exp(-t * f.basis->mu(j));
    return out;
}

// window part by composite Gauss-Legendre in u = log t, plus analytic tails:
//   below t_min: series of 1-e^{-mu t} in powers of mu t;
//   above t_max: (1-e^{-t mu}) ~ 1, remainder e^{-t_max mu} negligible by choice.
double subordination_integral(double mu, double s, double t_min, double t_max,
                              const SubordinationQuad& q) {
    const double a = 0.5 * s;
    const double u0 = std::log(t_min), u1 = std::log(t_max);
    double acc = 0.0;
    const double du = (u1 - u0) / q.panels;
    for (int p = 0; p < q.panels; ++p) {
        for (auto [u, w] : gauss_legendre(q.nodes_per_panel, u0 + p * du, u0 + (p + 1) * du)) {
            double t = std::exp(u);
            acc += w * (-std::expm1(-t * mu)) * std::pow(t, -a);
        }
    }
    // lower tail: mu t^{1-a}/(1-a) - mu^2 t^{2-a}/(2(2-a)) + mu^3 t^{3-a}/(6(3-a))
    double mt = mu * t_min;
    acc += std::pow(t_min, -a) * t_min *
           (mu / (1 - a) - mu * mt / (2 * (2 - a)) + mu * mt * mt / (6 * (3 - a)));
    // upper tail: int_tmax^inf t^{-1-a} dt, dropping e^{-t mu} (mu t_max >= 40)
    acc += std::pow(t_max, -a) / a;
    return acc;
}

double subordination_multiplier(double mu, double s, double mu_min, double mu_max,
                                const SubordinationQuad& q) {
    if (!(s > 0.0 && s < 2.0))
        throw config_error("subordination: s must lie in (0,2)");
    if (!(mu > 0) || !(mu_min > 0) || mu_max < mu_min)
        throw config_error("subordination: invalid spectrum bounds");
    double t_min = q.t_min > 0 ? q.t_min : 1e-8 / mu_max;
    double t_max = q.t_max > 0 ? q.t_max : 40.0 / mu_min;
    double num = subordination_integral(mu, s, t_min, t_max, q);
    // the dropped upper remainder needs mu * t_max >= 40; the mu = 1
    // normalization integral gets its own window extent for that
    double den = subordination_integral(1.0, s, t_min, std::max(t_max, 40.0), q);
    return num / den;
}

SpectralField lambda_via_subordination(const SpectralField& f, double s,
                                       const SubordinationQuad& q) {
    if (!(s > 0.0 && s < 2.0))
        throw config_error("lambda_via_subordination: s must lie in (0,2)");
    const auto& mu = f.basis->mu;
    double mu_min = mu(0), mu_max = mu(f.basis->n_modes - 1);
    SpectralField out = f;
    for (int j = 0; j < f.basis->n_modes; ++j)
        out.c(j) = f.c(j) * subordination_multiplier(mu(j), s, mu_min, mu_max, q);
    if (!out.c.allFinite()) throw numerical_error("lambda_via_subordination: non-finite result");
    return out;
}

void riesz_velocity(const SpectralField& theta, GridField& ux, GridField& uy) {
    SpectralField psi = apply_dirichlet_power(theta, -1.0);
    GridField px, py;
    reconstruct_grad(psi, px, py);
    ux = py;
    ux.v = -py.v;
    uy = px;
}

}  // namespace sqg
