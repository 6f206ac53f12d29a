#pragma once

#include <cmath>
#include <utility>
#include <vector>

namespace sqg {

// Gauss-Legendre nodes/weights on [-1,1], Newton on Legendre polynomials.
inline std::vector<std::pair<double, double>> gauss_legendre(int n) {
    std::vector<std::pair<double, double>> out(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        out[i] = {-x, w};
        out[n - 1 - i] = {x, w};
    }
    return out;
}

// Nodes/weights for integrating over [a,b].
inline std::vector<std::pair<double, double>> gauss_legendre(int n, double a, double b) {
    auto base = gauss_legendre(n);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (auto& [x, w] : base) {
        x = mid + half * x;
        w *= half;
    }
    return base;
}

}  // namespace sqg
