#include "sqg/basis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <tuple>

namespace sqg {

using json = nlohmann::json;

DomainSpec DomainSpec::rectangle(double Lx, double Ly) {
    if (!(Lx > 0) || !(Ly > 0)) throw config_error("rectangle: sides must be positive");
    DomainSpec d;
    d.kind = Kind::rectangle;
    d.Lx = Lx;
    d.Ly = Ly;
    return d;
}

DomainSpec DomainSpec::discretized(
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask, double h) {
    if (!(h > 0)) throw config_error("discretized: spacing must be positive");
    if (mask.rows() < 1 || mask.cols() < 1 || !mask.any())
        throw config_error("discretized: empty interior mask");
    DomainSpec d;
    d.kind = Kind::discretized;
    d.mask = std::move(mask);
    d.h = h;
    return d;
}

// ===================================================================
// rectangle basis
// ===================================================================

static void build_rectangle(EigenBasis& b, int n_modes, int grid_n) {
    const double Lx = b.domain.Lx, Ly = b.domain.Ly;

    // first n_modes of mu_{kl} = pi^2 (k^2/Lx^2 + l^2/Ly^2); the candidate
    // pool is enlarged until the cut eigenvalue is safely interior
    int K = std::max(8, static_cast<int>(2 * std::sqrt((double)n_modes)) + 4);
    std::vector<std::tuple<double, int, int>> pool;
    for (;;) {
        pool.clear();
        for (int k = 1; k <= K; ++k)
            for (int l = 1; l <= K; ++l)
                pool.emplace_back(M_PI * M_PI * (k * k / (Lx * Lx) + l * l / (Ly * Ly)), k, l);
        std::sort(pool.begin(), pool.end());
        double mu_cut = std::get<0>(pool[n_modes - 1]);
        double mu_edge = M_PI * M_PI * ((K + 1.0) * (K + 1.0) / std::max(Lx * Lx, Ly * Ly) +
                                        1.0 / std::min(Lx * Lx, Ly * Ly));
        if ((long)pool.size() >= n_modes && mu_edge > mu_cut) break;
        K *= 2;
    }
    pool.resize(n_modes);

    b.n_modes = n_modes;
    b.mu.resize(n_modes);
    b.modes.resize(n_modes);
    for (int j = 0; j < n_modes; ++j) {
        b.mu(j) = std::get<0>(pool[j]);
        b.modes[j] = {std::get<1>(pool[j]), std::get<2>(pool[j])};
        b.kmax = std::max(b.kmax, b.modes[j].first);
        b.lmax = std::max(b.lmax, b.modes[j].second);
    }

    int n = grid_n > 0 ? grid_n : std::max(2 * std::max(b.kmax, b.lmax), 16);
    if (n <= std::max(b.kmax, b.lmax))
        throw config_error("build_eigenbasis: grid too coarse for the requested modes");
    b.grid = Grid2D{n + 1, n + 1, Lx / n, Ly / n, 0.0, 0.0};

    b.Sx.resize(b.kmax, b.grid.nx);
    b.Cx.resize(b.kmax, b.grid.nx);
    for (int k = 1; k <= b.kmax; ++k)
        for (int i = 0; i < b.grid.nx; ++i) {
            double a = k * M_PI / Lx;
            b.Sx(k - 1, i) = std::sqrt(2.0 / Lx) * std::sin(a * b.grid.x(i));
            b.Cx(k - 1, i) = std::sqrt(2.0 / Lx) * a * std::cos(a * b.grid.x(i));
        }
    b.Sy.resize(b.lmax, b.grid.ny);
    b.Cy.resize(b.lmax, b.grid.ny);
    for (int l = 1; l <= b.lmax; ++l)
        for (int j = 0; j < b.grid.ny; ++j) {
            double a = l * M_PI / Ly;
            b.Sy(l - 1, j) = std::sqrt(2.0 / Ly) * std::sin(a * b.grid.y(j));
            b.Cy(l - 1, j) = std::sqrt(2.0 / Ly) * a * std::cos(a * b.grid.y(j));
        }
}

// scatter coefficient vector into the (kmax x lmax) wavenumber array
static Eigen::MatrixXd to_wavenumber_array(const EigenBasis& b, const Eigen::VectorXd& c) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(b.kmax, b.lmax);
    for (int j = 0; j < b.n_modes; ++j)
        C(b.modes[j].first - 1, b.modes[j].second - 1) = c(j);
    return C;
}

// ===================================================================
// discretized basis (dense eigensolve)
// ===================================================================

static void build_discretized(EigenBasis& b, int n_modes) {
    const auto& mask = b.domain.mask;
    const double h = b.domain.h;
    const int mx = static_cast<int>(mask.rows()), my = static_cast<int>(mask.cols());

    // node grid with a zero ring around the mask bounding box
    b.grid = Grid2D{mx + 2, my + 2, h, h, -h, -h};

    Eigen::ArrayXXi idx = Eigen::ArrayXXi::Constant(mx, my, -1);
    int n_int = 0;
    for (int j = 0; j < my; ++j)
        for (int i = 0; i < mx; ++i)
            if (mask(i, j)) idx(i, j) = n_int++;
    if (n_modes < 1 || n_modes > n_int)
        throw config_error("build_eigenbasis: n_modes outside [1, interior node count]");
    if (n_int > 4096)
        throw config_error("build_eigenbasis: discretized domain too large for dense solve");

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_int, n_int);
    auto at = [&](int i, int j) { return (i >= 0 && i < mx && j >= 0 && j < my) ? idx(i, j) : -1; };
    for (int j = 0; j < my; ++j)
        for (int i = 0; i < mx; ++i) {
            int r = idx(i, j);
            if (r < 0) continue;
            A(r, r) = 4.0 / (h * h);
            for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                int cidx = at(i + di, j + dj);
                if (cidx >= 0) A(r, cidx) = -1.0 / (h * h);
            }
        }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw numerical_error("discretized eigensolve failed");

    b.n_modes = n_modes;
    b.mu = es.eigenvalues().head(n_modes);
    b.vecs.resize(n_modes);
    b.vecs_dx.resize(n_modes);
    b.vecs_dy.resize(n_modes);
    for (int m = 0; m < n_modes; ++m) {
        Eigen::VectorXd v = es.eigenvectors().col(m);
        // deterministic sign: first nonzero component positive
        for (int r = 0; r < n_int; ++r)
            if (std::abs(v(r)) > 1e-12) {
                if (v(r) < 0) v = -v;
                break;
            }
        v /= h * v.norm();  // grid-l2 normalization ~ L2
        Eigen::ArrayXXd w = Eigen::ArrayXXd::Zero(b.grid.nx, b.grid.ny);
        for (int j = 0; j < my; ++j)
            for (int i = 0; i < mx; ++i)
                if (idx(i, j) >= 0) w(i + 1, j + 1) = v(idx(i, j));
        GridField f;
        f.g = b.grid;
        f.v = w;
        b.vecs[m] = w;
        b.vecs_dx[m] = diff_x(f).v;
        b.vecs_dy[m] = diff_y(f).v;
    }
}

// ===================================================================
// shared interface
// ===================================================================

Eigen::ArrayXXd EigenBasis::mode_values(int j) const {
    if (j < 0 || j >= n_modes) throw config_error("mode index out of range");
    if (domain.kind == DomainSpec::Kind::rectangle) {
        auto [k, l] = modes[j];
        return (Sx.row(k - 1).transpose() * Sy.row(l - 1)).array();
    }
    return vecs[j];
}

Eigen::ArrayXXd EigenBasis::synth(const Eigen::VectorXd& coeff) const {
    if (coeff.size() != n_modes) throw config_error("synth: coefficient size mismatch");
    if (domain.kind == DomainSpec::Kind::rectangle) {
        Eigen::MatrixXd C = to_wavenumber_array(*this, coeff);
        return (Sx.transpose() * C * Sy).array();
    }
    Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(grid.nx, grid.ny);
    for (int j = 0; j < n_modes; ++j) out += coeff(j) * vecs[j];
    return out;
}

void EigenBasis::synth_grad(const Eigen::VectorXd& coeff, Eigen::ArrayXXd& gx,
                            Eigen::ArrayXXd& gy) const {
    if (coeff.size() != n_modes) throw config_error("synth_grad: coefficient size mismatch");
    if (domain.kind == DomainSpec::Kind::rectangle) {
        Eigen::MatrixXd C = to_wavenumber_array(*this, coeff);
        gx = (Cx.transpose() * C * Sy).array();
        gy = (Sx.transpose() * C * Cy).array();
        return;
    }
    gx = Eigen::ArrayXXd::Zero(grid.nx, grid.ny);
    gy = gx;
    for (int j = 0; j < n_modes; ++j) {
        gx += coeff(j) * vecs_dx[j];
        gy += coeff(j) * vecs_dy[j];
    }
}

Eigen::VectorXd EigenBasis::analyze(const Eigen::ArrayXXd& values) const {
    if (values.rows() != grid.nx || values.cols() != grid.ny)
        throw config_error("analyze: grid shape mismatch");
    if (domain.kind == DomainSpec::Kind::rectangle) {
        // boundary rows of Sx/Sy vanish, so the plain h^2-weighted product
        // equals the trapezoid rule and is exact below the grid Nyquist
        Eigen::MatrixXd C = grid.hx * grid.hy * (Sx * values.matrix() * Sy.transpose());
        Eigen::VectorXd c(n_modes);
        for (int j = 0; j < n_modes; ++j)
            c(j) = C(modes[j].first - 1, modes[j].second - 1);
        return c;
    }
    Eigen::VectorXd c(n_modes);
    for (int j = 0; j < n_modes; ++j)
        c(j) = grid.hx * grid.hy * (values * vecs[j]).sum();
    return c;
}

BasisPtr build_eigenbasis(const DomainSpec& domain, int n_modes, int grid_n) {
    if (n_modes < 1) throw config_error("build_eigenbasis: n_modes must be >= 1");
    auto b = std::make_shared<EigenBasis>();
    b->domain = domain;
    if (domain.kind == DomainSpec::Kind::rectangle)
        build_rectangle(*b, n_modes, grid_n);
    else
        build_discretized(*b, n_modes);
    return b;
}

// ===================================================================
// cache io
// ===================================================================

void save_eigenbasis(const EigenBasis& b, const std::string& path) {
    json hdr;
    hdr["format_version"] = 1;
    hdr["domain_kind"] = b.domain.kind_name();
    hdr["n_modes"] = b.n_modes;
    hdr["grid"] = {{"nx", b.grid.nx}, {"ny", b.grid.ny}, {"hx", b.grid.hx},
                   {"hy", b.grid.hy}, {"x0", b.grid.x0}, {"y0", b.grid.y0}};
    long per_mode;
    if (b.domain.kind == DomainSpec::Kind::rectangle) {
        hdr["Lx"] = b.domain.Lx;
        hdr["Ly"] = b.domain.Ly;
        json m = json::array();
        for (auto [k, l] : b.modes) m.push_back({k, l});
        hdr["modes"] = m;
        per_mode = 0;
    } else {
        hdr["h"] = b.domain.h;
        hdr["mask_rows"] = static_cast<int>(b.domain.mask.rows());
        hdr["mask_cols"] = static_cast<int>(b.domain.mask.cols());
        std::string bits;
        for (long j = 0; j < b.domain.mask.cols(); ++j)
            for (long i = 0; i < b.domain.mask.rows(); ++i)
                bits.push_back(b.domain.mask(i, j) ? '1' : '0');
        hdr["mask"] = bits;
        per_mode = b.grid.count();
    }
    std::string htxt = hdr.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("save_eigenbasis: cannot open " + path);
    std::uint64_t hlen = htxt.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(htxt.data(), static_cast<std::streamsize>(hlen));
    out.write(reinterpret_cast<const char*>(b.mu.data()),
              static_cast<std::streamsize>(8 * b.n_modes));
    if (per_mode > 0)
        for (int m = 0; m < b.n_modes; ++m)
            out.write(reinterpret_cast<const char*>(b.vecs[m].data()),
                      static_cast<std::streamsize>(8 * per_mode));
    if (!out) throw numerical_error("save_eigenbasis: write failed");
}

BasisPtr load_eigenbasis(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("load_eigenbasis: cannot open " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string htxt(hlen, '\0');
    in.read(htxt.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw config_error("load_eigenbasis: truncated header");
    json hdr = json::parse(htxt);
    if (hdr.value("format_version", -1) != 1)
        throw config_error("load_eigenbasis: unsupported format version");

    int n_modes = hdr.at("n_modes");
    std::string kind = hdr.at("domain_kind");
    auto b = std::make_shared<EigenBasis>();
    if (kind == "rectangle") {
        b->domain = DomainSpec::rectangle(hdr.at("Lx"), hdr.at("Ly"));
        int n = hdr.at("grid").at("nx").get<int>() - 1;
        // rebuild tables, then overwrite mu with the stored payload bit-exactly
        *b = *build_eigenbasis(b->domain, n_modes, n);
        in.read(reinterpret_cast<char*>(b->mu.data()),
                static_cast<std::streamsize>(8 * n_modes));
    } else if (kind == "discretized") {
        int mr = hdr.at("mask_rows"), mc = hdr.at("mask_cols");
        std::string bits = hdr.at("mask");
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask(mr, mc);
        for (int j = 0; j < mc; ++j)
            for (int i = 0; i < mr; ++i) mask(i, j) = bits[j * (size_t)mr + i] == '1';
        b->domain = DomainSpec::discretized(std::move(mask), hdr.at("h"));
        b->n_modes = n_modes;
        b->grid = Grid2D{hdr.at("grid").at("nx"), hdr.at("grid").at("ny"),
                         hdr.at("grid").at("hx"), hdr.at("grid").at("hy"),
                         hdr.at("grid").at("x0"), hdr.at("grid").at("y0")};
        b->mu.resize(n_modes);
        in.read(reinterpret_cast<char*>(b->mu.data()),
                static_cast<std::streamsize>(8 * n_modes));
        b->vecs.resize(n_modes);
        b->vecs_dx.resize(n_modes);
        b->vecs_dy.resize(n_modes);
        for (int m = 0; m < n_modes; ++m) {
            b->vecs[m].resize(b->grid.nx, b->grid.ny);
            in.read(reinterpret_cast<char*>(b->vecs[m].data()),
                    static_cast<std::streamsize>(8 * b->grid.count()));
            GridField f;
            f.g = b->grid;
            f.v = b->vecs[m];
            b->vecs_dx[m] = diff_x(f).v;
            b->vecs_dy[m] = diff_y(f).v;
        }
    } else {
        throw config_error("load_eigenbasis: unknown domain kind " + kind);
    }
    if (!in) throw config_error("load_eigenbasis: truncated payload");
    return b;
}

}  // namespace sqg
