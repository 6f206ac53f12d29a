#pragma once

#include "sqg/basis.hpp"

namespace sqg {

SpectralField project(const BasisPtr& basis, const GridField& f);
GridField reconstruct(const SpectralField& f);
void reconstruct_grad(const SpectralField& f, GridField& fx, GridField& fy);

// Spectral fractional power mu^(s/2) per mode.  Rejects s <= -2 (the
// multiplier would not define a bounded map on the truncated basis range
// used downstream).
SpectralField apply_dirichlet_power(const SpectralField& f, double s);

// e^{t Delta_D}, t >= 0.
SpectralField heat_semigroup(const SpectralField& f, double t);

// Quadrature layout for the subordination integral
//   lambda^{s/2} = c_s int_0^inf (1 - e^{-t lambda}) t^{-1-s/2} dt,
// composite Gauss-Legendre in u = log t on [t_min, t_max] plus analytic
// series tails outside that window.
struct SubordinationQuad {
    int panels = 32;
    int nodes_per_panel = 12;
    double t_min = 0.0;  // 0 = auto: 1e-8 / mu_max
    double t_max = 0.0;  // 0 = auto: 40 / mu_min
};

// Raw window+tails value of int (1-e^{-t mu}) t^{-1-s/2} dt.
double subordination_integral(double mu, double s, double t_min, double t_max,
                              const SubordinationQuad& q);

// Per-mode multipliers for mu in [mu_min, mu_max]; normalized so mu = 1
// maps to 1 (i.e. divided by the same quadrature evaluated at mu = 1).
double subordination_multiplier(double mu, double s, double mu_min, double mu_max,
                                const SubordinationQuad& q = {});

// Lambda^s theta with Lambda = (-Delta_D)^(1/2) evaluated through the heat
// subordination formula; s in (0,2).
SpectralField lambda_via_subordination(const SpectralField& f, double s,
                                       const SubordinationQuad& q = {});

// u = grad^perp Lambda^{-1} theta = (-d2 psi, d1 psi), psi = Lambda^{-1} theta.
void riesz_velocity(const SpectralField& theta, GridField& ux, GridField& uy);

}  // namespace sqg
