#include "thinlim/thin_domain.hpp"

#include "thinlim/constants.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace thinlim {

namespace {

SurfaceField scalar_diff(const SurfaceField& a, const SurfaceField& b)
{
    SurfaceField d = a;
    d.val -= b.val;
    d.grad -= b.grad;
    d.hess -= b.hess;
    return d;
}

// P_0..P_L at x and their derivatives
void legendre(int L, double x, Eigen::VectorXd& p, Eigen::VectorXd& dp)
{
    p.resize(L + 1);
    dp.resize(L + 1);
    p[0] = 1.0;
    dp[0] = 0.0;
    if (L >= 1) {
        p[1] = x;
        dp[1] = 1.0;
    }
    for (int n = 1; n < L; ++n) {
        p[n + 1] = ((2.0 * n + 1.0) * x * p[n] - n * p[n - 1]) / (n + 1.0);
        dp[n + 1] = dp[n - 1] + (2.0 * n + 1.0) * p[n];
    }
}

// D(i,j) = l_j'(s_i) for the Lagrange basis on the nodes s
Eigen::MatrixXd lagrange_diff(const Eigen::VectorXd& s)
{
    const int n = int(s.size());
    Eigen::VectorXd lam = Eigen::VectorXd::Ones(n);
    for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m)
            if (m != j)
                lam[j] /= (s[j] - s[m]);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            if (i != j)
                D(i, j) = (lam[j] / lam[i]) / (s[i] - s[j]);
        D(i, i) = -D.row(i).sum();
    }
    return D;
}

void fill_node(BulkGrid& G, const ThinDomainSpec& spec, int k, int q, int p)
{
    const Surface& S = *spec.S;
    const Vec3 n = S.n.col(k);
    const double s = G.s[q], eg = spec.eps * spec.g.val(k, 0);
    const double r = spec.eps * (spec.g0.val(k, 0) + s * spec.g.val(k, 0));
    const Mat3 M = Mat3::Identity() - r * S.W[k];
    const double J = M.determinant();
    if (!(J > tol::singular_pivot))
        throw std::invalid_argument("I - rW is singular inside the slab");
    const Mat3 B = M.inverse();
    const Vec3 rho = spec.eps * (spec.g0.dvec(k) + s * spec.g.dvec(k));
    G.r[p] = r;
    G.J[p] = J;
    G.B[p] = B;
    G.rho.col(p) = rho;
    G.x.col(p) = S.x.col(k) + r * n;
    G.grad_s.col(p) = n / eg - B * rho / eg;
}

} // namespace

ThinDomainSpec make_spec(const Surface& S, const SurfaceField& g0, const SurfaceField& g1, double eps, double gamma0,
                         double gamma1, double bracket, double friction_c)
{
    if (!(eps > 0.0))
        throw std::invalid_argument("eps must be positive");
    ThinDomainSpec spec;
    spec.S = &S;
    spec.g0 = ensure_jets(S, g0);
    spec.g1 = ensure_jets(S, g1);
    spec.g = scalar_diff(spec.g1, spec.g0);
    spec.eps = eps;
    spec.gamma0 = gamma0;
    spec.gamma1 = gamma1;
    if (!(spec.g.val.minCoeff() > 0.0))
        throw std::invalid_argument("thickness g = g1 - g0 must be positive at every node");
    const double emax = admissible_eps(S, spec.g0, spec.g1, bracket);
    if (eps > emax) {
        std::ostringstream os;
        os << "eps = " << eps << " exceeds the admissible range (" << emax << ") of the curvature bracket";
        throw std::invalid_argument(os.str());
    }
    if (gamma0 < 0.0 || gamma1 < 0.0 || gamma0 > friction_c * eps || gamma1 > friction_c * eps)
        throw std::invalid_argument("friction coefficients must satisfy 0 <= gamma <= c eps");
    return spec;
}

double admissible_eps(const Surface& S, const SurfaceField& g0, const SurfaceField& g1, double bracket)
{
    const Eigen::MatrixX2d K = principal_curvatures(S);
    double emax = std::numeric_limits<double>::infinity();
    for (int k = 0; k < S.size(); ++k)
        for (const SurfaceField* g : {&g0, &g1})
            for (int c = 0; c < 2; ++c) {
                // 1 - eps a must stay inside [1/c, c]
                const double a = g->val(k, 0) * K(k, c);
                if (a > 0.0)
                    emax = std::min(emax, (1.0 - 1.0 / bracket) / a);
                else if (a < 0.0)
                    emax = std::min(emax, (bracket - 1.0) / -a);
            }
    return emax;
}

double jacobian(const ThinDomainSpec& spec, int k, double r)
{
    const double lo = spec.eps * spec.g0.val(k, 0), hi = spec.eps * spec.g1.val(k, 0);
    const double slack = 1e-12 * (1.0 + std::abs(lo) + std::abs(hi));
    if (r < lo - slack || r > hi + slack)
        throw std::out_of_range("r outside the slab");
    return (Mat3::Identity() - r * spec.S->W[k]).determinant();
}

BulkGrid make_grid(const ThinDomainSpec& spec, int ns)
{
    if (ns < 1)
        throw std::invalid_argument("need at least one normal point");
    const Surface& S = *spec.S;
    BulkGrid G;
    G.spec = &spec;
    G.N = S.size();
    G.ns = ns;
    Eigen::VectorXd t, wt;
    gauss_legendre(ns, t, wt);
    G.s = 0.5 * (t.array() + 1.0);
    G.ws = 0.5 * wt;
    const int Nb = G.size();
    G.r.resize(Nb);
    G.J.resize(Nb);
    G.w.resize(Nb);
    G.x.resize(3, Nb);
    G.rho.resize(3, Nb);
    G.grad_s.resize(3, Nb);
    G.B.resize(Nb);
    for (int k = 0; k < G.N; ++k)
        for (int q = 0; q < ns; ++q) {
            const int p = G.node(k, q);
            fill_node(G, spec, k, q, p);
            G.w[p] = S.w[k] * G.ws[q] * spec.eps * spec.g.val(k, 0) * G.J[p];
        }
    return G;
}

BulkGrid sheet_grid(const ThinDomainSpec& spec, int side)
{
    if (side != 0 && side != 1)
        throw std::invalid_argument("sheet index must be 0 or 1");
    const Surface& S = *spec.S;
    BulkGrid G;
    G.spec = &spec;
    G.N = S.size();
    G.ns = 1;
    G.sheet = side;
    G.s = Eigen::VectorXd::Constant(1, double(side));
    G.ws = Eigen::VectorXd::Ones(1);
    const int Nb = G.N;
    G.r.resize(Nb);
    G.J.resize(Nb);
    G.w.resize(Nb);
    G.x.resize(3, Nb);
    G.rho.resize(3, Nb);
    G.grad_s.resize(3, Nb);
    G.B.resize(Nb);
    const SurfaceField tau = sheet_tau(spec, side), ne = boundary_normal(spec, side);
    G.normal = ne.val.transpose();
    for (int k = 0; k < G.N; ++k) {
        fill_node(G, spec, k, 0, k);
        G.w[k] = S.w[k] * G.J[k] * std::sqrt(1.0 + spec.eps * spec.eps * tau.vec(k).squaredNorm());
    }
    return G;
}

BulkField BulkField::zero(int n, int comps)
{
    BulkField f;
    f.comps = comps;
    f.val = Eigen::MatrixXd::Zero(n, comps);
    f.grad = Eigen::MatrixXd::Zero(n, 3 * comps);
    return f;
}

Mat3 BulkField::jac(int p) const
{
    Mat3 G;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            G(a, b) = grad(p, 3 * a + b);
    return G;
}

BulkField operator-(const BulkField& a, const BulkField& b)
{
    BulkField d = a;
    d.val -= b.val;
    if (a.has_grad() && b.has_grad())
        d.grad -= b.grad;
    else
        d.grad.resize(0, 0);
    return d;
}

BulkField operator+(const BulkField& a, const BulkField& b)
{
    BulkField d = a;
    d.val += b.val;
    if (a.has_grad() && b.has_grad())
        d.grad += b.grad;
    else
        d.grad.resize(0, 0);
    return d;
}

BulkField operator*(double c, const BulkField& a)
{
    BulkField d = a;
    d.val *= c;
    d.grad *= c;
    return d;
}

BulkField from_slice_jets(const BulkGrid& grid, const Eigen::MatrixXd& val, const Eigen::MatrixXd& G,
                          const Eigen::MatrixXd& Us)
{
    const int c = int(val.cols()), Nb = grid.size();
    BulkField f;
    f.comps = c;
    f.val = val;
    f.grad.resize(Nb, 3 * c);
    for (int p = 0; p < Nb; ++p) {
        const Mat3& B = grid.B[p];
        const Vec3 ds = grid.grad_s.col(p);
        for (int b = 0; b < c; ++b) {
            Vec3 Gi(G(p, b), G(p, c + b), G(p, 2 * c + b));
            const Vec3 d = B * Gi + ds * Us(p, b);
            for (int a = 0; a < 3; ++a)
                f.grad(p, c * a + b) = d[a];
        }
    }
    return f;
}

void slice_jets(const BulkGrid& grid, const BulkField& f, Eigen::MatrixXd& G, Eigen::MatrixXd& Us)
{
    const ThinDomainSpec& spec = *grid.spec;
    const Surface& S = *spec.S;
    const int c = f.comps, Nb = grid.size();
    G.resize(Nb, 3 * c);
    Us.resize(Nb, c);
    for (int p = 0; p < Nb; ++p) {
        const int k = grid.surf(p);
        const Vec3 n = S.n.col(k);
        const double eg = spec.eps * spec.g.val(k, 0);
        const Mat3 M = Mat3::Identity() - grid.r[p] * S.W[k];
        const Vec3 Pds = S.P(k) * grid.grad_s.col(p);
        for (int b = 0; b < c; ++b) {
            const Vec3 d(f.grad(p, b), f.grad(p, c + b), f.grad(p, 2 * c + b));
            const double us = eg * n.dot(d);
            Us(p, b) = us;
            const Vec3 Gi = M * (d - n * n.dot(d) - Pds * us);
            for (int i = 0; i < 3; ++i)
                G(p, c * i + b) = Gi[i];
        }
    }
}

BulkField bulk_gradient(const BulkGrid& grid, const Eigen::MatrixXd& val)
{
    if (grid.sheet >= 0 || grid.ns < 2)
        throw std::invalid_argument("nodal differentiation needs a volume grid with ns >= 2");
    const Surface& S = *grid.spec->S;
    const ScalarBasis& Bs = S.basis;
    const int c = int(val.cols()), Nb = grid.size(), N = grid.N, ns = grid.ns;
    Eigen::MatrixXd G(Nb, 3 * c), Us(Nb, c);
    const Eigen::MatrixXd D = lagrange_diff(grid.s);
    const Eigen::MatrixXd proj = Bs.val.transpose() * S.w.asDiagonal();
    for (int q = 0; q < ns; ++q) {
        Eigen::MatrixXd layer(N, c);
        for (int k = 0; k < N; ++k)
            layer.row(k) = val.row(grid.node(k, q));
        const Eigen::MatrixXd g = Bs.grad * (proj * layer); // 3N x c
        for (int k = 0; k < N; ++k)
            for (int i = 0; i < 3; ++i)
                for (int b = 0; b < c; ++b)
                    G(grid.node(k, q), c * i + b) = g(3 * k + i, b);
    }
    for (int k = 0; k < N; ++k)
        for (int q = 0; q < ns; ++q) {
            Eigen::RowVectorXd d = Eigen::RowVectorXd::Zero(c);
            for (int m = 0; m < ns; ++m)
                d += D(q, m) * val.row(grid.node(k, m));
            Us.row(grid.node(k, q)) = d;
        }
    return from_slice_jets(grid, val, G, Us);
}

double integrate_bulk(const BulkGrid& grid, const Eigen::VectorXd& phi) { return grid.w.dot(phi); }

double integrate_bulk(const BulkGrid& grid, const BulkField& phi)
{
    if (phi.comps != 1)
        throw std::invalid_argument("integrate_bulk expects a scalar field");
    return grid.w.dot(phi.val.col(0));
}

double bulk_inner(const BulkGrid& grid, const BulkField& a, const BulkField& b)
{
    return grid.w.dot(a.val.cwiseProduct(b.val).rowwise().sum());
}

double bulk_l2(const BulkGrid& grid, const BulkField& f) { return std::sqrt(bulk_inner(grid, f, f)); }

double bulk_h1(const BulkGrid& grid, const BulkField& f)
{
    const BulkField e = f.has_grad() ? f : bulk_gradient(grid, f.val);
    return std::sqrt(bulk_inner(grid, e, e) + grid.w.dot(e.grad.rowwise().squaredNorm()));
}

double bulk_lp(const BulkGrid& grid, const BulkField& f, double p)
{
    const Eigen::VectorXd a = f.val.rowwise().norm();
    return std::pow(grid.w.dot(a.array().pow(p).matrix()), 1.0 / p);
}

double bulk_h2_proxy(const BulkGrid& grid, const BulkField& f)
{
    const BulkField e = f.has_grad() ? f : bulk_gradient(grid, f.val);
    const BulkField second = bulk_gradient(grid, e.grad);
    return std::sqrt(grid.w.dot(e.val.rowwise().squaredNorm() + e.grad.rowwise().squaredNorm() +
                                second.grad.rowwise().squaredNorm()));
}

double unweighted_l2_sq(const BulkGrid& grid, const BulkField& f)
{
    const ThinDomainSpec& spec = *grid.spec;
    double s = 0.0;
    for (int p = 0; p < grid.size(); ++p) {
        const int k = grid.surf(p);
        s += spec.S->w[k] * grid.ws[grid.layer(p)] * spec.eps * spec.g.val(k, 0) * f.val.row(p).squaredNorm();
    }
    return s;
}

SurfaceField sheet_tau(const ThinDomainSpec& spec, int side)
{
    const Surface& S = *spec.S;
    const SurfaceField& gi = spec.side(side);
    SurfaceField t = SurfaceField::vector(S.size());
    t.tangential = true;
    t.grad.resize(S.size(), 9);
    for (int k = 0; k < S.size(); ++k) {
        const Mat3 M = Mat3::Identity() - spec.eps * gi.val(k, 0) * S.W[k];
        if (std::abs(M.determinant()) < tol::singular_pivot)
            throw std::runtime_error("I - eps g_i W is numerically singular");
        const Mat3 B = M.inverse();
        const Vec3 tau = B * gi.dvec(k);
        t.val.row(k) = tau.transpose();
        const Mat3 h = gi.hmat(k);
        for (int i = 0; i < 3; ++i) {
            const Mat3 dM = -spec.eps * (gi.grad(k, i) * S.W[k] + gi.val(k, 0) * S.dW[k][i]);
            const Vec3 d = B * (Vec3(h.row(i).transpose()) - dM * tau);
            for (int j = 0; j < 3; ++j)
                t.grad(k, 3 * i + j) = d[j];
        }
    }
    return t;
}

SurfaceField boundary_normal(const ThinDomainSpec& spec, int side)
{
    const Surface& S = *spec.S;
    const SurfaceField tau = sheet_tau(spec, side);
    SurfaceField ne = SurfaceField::vector(S.size());
    const double sign = side == 0 ? -1.0 : 1.0;
    for (int k = 0; k < S.size(); ++k) {
        const Vec3 t = tau.vec(k);
        ne.val.row(k) = (sign * (S.n.col(k) - spec.eps * t) / std::sqrt(1.0 + spec.eps * spec.eps * t.squaredNorm())).transpose();
    }
    return ne;
}

BulkField constant_extension(const BulkGrid& grid, const SurfaceField& eta)
{
    const Surface& S = *grid.spec->S;
    const SurfaceField e = eta.has_grad() ? eta : with_jets(S, eta);
    const int c = e.comps, Nb = grid.size();
    Eigen::MatrixXd val(Nb, c), G(Nb, 3 * c);
    for (int p = 0; p < Nb; ++p) {
        val.row(p) = e.val.row(grid.surf(p));
        G.row(p) = e.grad.row(grid.surf(p)).head(3 * c);
    }
    return from_slice_jets(grid, val, G, Eigen::MatrixXd::Zero(Nb, c));
}

BulkField normal_derivative(const BulkGrid& grid, const BulkField& phi)
{
    const ThinDomainSpec& spec = *grid.spec;
    const int c = phi.comps, Nb = grid.size();
    BulkField out;
    out.comps = c;
    out.val.resize(Nb, c);
    if (phi.has_grad()) {
        for (int p = 0; p < Nb; ++p) {
            const Vec3 n = spec.S->n.col(grid.surf(p));
            for (int b = 0; b < c; ++b)
                out.val(p, b) = n[0] * phi.grad(p, b) + n[1] * phi.grad(p, c + b) + n[2] * phi.grad(p, 2 * c + b);
        }
        return out;
    }
    if (grid.sheet >= 0 || grid.ns < 2)
        throw std::invalid_argument("normal differentiation of nodal data needs a volume grid");
    const Eigen::MatrixXd D = lagrange_diff(grid.s);
    for (int k = 0; k < grid.N; ++k)
        for (int q = 0; q < grid.ns; ++q) {
            Eigen::RowVectorXd d = Eigen::RowVectorXd::Zero(c);
            for (int m = 0; m < grid.ns; ++m)
                d += D(q, m) * phi.val.row(grid.node(k, m));
            out.val.row(grid.node(k, q)) = d / (spec.eps * spec.g.val(k, 0));
        }
    return out;
}

BulkField extend_E(const BulkGrid& grid, const SurfaceField& v)
{
    const ThinDomainSpec& spec = *grid.spec;
    const Surface& S = *spec.S;
    if (v.comps != 3)
        throw std::invalid_argument("extend_E expects a vector field");
    const double scale = std::max(1.0, v.val.cwiseAbs().maxCoeff());
    if (max_normal_component(S, v) > tol::tangential * scale)
        throw std::invalid_argument("extend_E requires a tangential field");
    const SurfaceField e = v.has_grad() ? v : with_jets(S, v);
    const SurfaceField t0 = sheet_tau(spec, 0), t1 = sheet_tau(spec, 1);
    const int Nb = grid.size();
    Eigen::MatrixXd val(Nb, 3), G(Nb, 9), Us(Nb, 3);
    for (int p = 0; p < Nb; ++p) {
        const int k = grid.surf(p);
        const double s = grid.s[grid.layer(p)], eps = spec.eps;
        const Vec3 n = S.n.col(k), vk = e.vec(k);
        const Vec3 psi = eps * (s * t1.vec(k) + (1.0 - s) * t0.vec(k));
        const double a = vk.dot(psi);
        val.row(p) = (vk + a * n).transpose();
        const Mat3 Dv = e.jac(k), Dt0 = t0.jac(k), Dt1 = t1.jac(k);
        for (int i = 0; i < 3; ++i) {
            const Vec3 dpsi = eps * (s * Dt1.row(i).transpose() + (1.0 - s) * Dt0.row(i).transpose());
            const double da = Dv.row(i).dot(psi) + vk.dot(dpsi);
            const Vec3 dn = -S.W[k].row(i).transpose();
            const Vec3 gi = Dv.row(i).transpose() + da * n + a * dn;
            for (int j = 0; j < 3; ++j)
                G(p, 3 * i + j) = gi[j];
        }
        Us.row(p) = (vk.dot(eps * (t1.vec(k) - t0.vec(k))) * n).transpose();
    }
    return from_slice_jets(grid, val, G, Us);
}

BulkField sample_bulk(const BulkGrid& grid, const std::function<double(const Vec3&)>& f,
                      const std::function<Vec3(const Vec3&)>& grad)
{
    const int Nb = grid.size();
    BulkField out = BulkField::zero(Nb, 1);
    for (int p = 0; p < Nb; ++p) {
        const Vec3 x = grid.x.col(p);
        out.val(p, 0) = f(x);
        out.grad.row(p) = grad(x).transpose();
    }
    return out;
}

BulkField rigid_field(const BulkGrid& grid, const Eigen::Matrix<double, 6, 1>& ab)
{
    const int Nb = grid.size();
    const Vec3 a = ab.head<3>(), b = ab.tail<3>();
    Mat3 A; // A x = a x x
    A << 0, -a[2], a[1], a[2], 0, -a[0], -a[1], a[0], 0;
    const Mat3 Jt = A.transpose();
    BulkField out = BulkField::zero(Nb, 3);
    for (int p = 0; p < Nb; ++p) {
        out.val.row(p) = (A * grid.x.col(p) + b).transpose();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                out.grad(p, 3 * i + j) = Jt(i, j);
    }
    return out;
}

double sheet_flux(const BulkGrid& sheet, const BulkField& u)
{
    if (sheet.sheet < 0)
        throw std::invalid_argument("sheet_flux needs a sheet grid");
    double m = 0.0;
    for (int p = 0; p < sheet.size(); ++p)
        m = std::max(m, std::abs(sheet.normal.col(p).dot(u.vec(p))));
    return m;
}

double max_divergence(const BulkField& u)
{
    if (u.comps != 3 || !u.has_grad())
        throw std::invalid_argument("max_divergence needs a vector field with gradient");
    return (u.grad.col(0) + u.grad.col(4) + u.grad.col(8)).cwiseAbs().maxCoeff();
}

PiolaSpace piola_space(const ThinDomainSpec& spec, int modes, int mode_degree)
{
    const Surface& S = *spec.S;
    PiolaSpace V;
    V.spec = &spec;
    V.modes = modes;
    SurfaceField one = SurfaceField::scalar(S.size());
    one.val.setOnes();
    one.grad = Eigen::MatrixXd::Zero(S.size(), 3);
    one.hess = Eigen::MatrixXd::Zero(S.size(), 9);
    V.stream = weighted_solenoidal_basis(S, one, nullptr);
    if (modes > 0) {
        const int d = mode_degree < 0 ? std::max(2, S.basis.degree - 2) : mode_degree;
        V.tang = d == S.basis.degree ? tangent_basis(S) : tangent_basis(S, scalar_basis(S, d));
    }
    return V;
}

BulkBasis evaluate(const PiolaSpace& V, const BulkGrid& grid)
{
    const ThinDomainSpec& spec = *grid.spec;
    const Surface& S = *spec.S;
    const int n0 = V.stream.size(), nT = V.modes > 0 ? V.tang.size() : 0, n = V.size(), Nb = grid.size();
    const double eps = spec.eps;
    BulkBasis out;
    out.val.resize(3 * Nb, n);
    out.grad.resize(9 * Nb, n);

    // reference jets per node: Ut, D_i Ut, d_s Ut (3 x n), Us, d_s Us (1 x n), D_i Us (3 x n)
    Eigen::MatrixXd Ut(3, n), SUt(3, n), DUs(3, n);
    Eigen::RowVectorXd Us(n), SUs(n);
    std::array<Eigen::MatrixXd, 3> DUt;
    for (auto& d : DUt)
        d.resize(3, n);
    Eigen::VectorXd P, dP;
    for (int p = 0; p < Nb; ++p) {
        const int k = grid.surf(p);
        const double s = grid.s[grid.layer(p)], x = 2.0 * s - 1.0;
        legendre(V.modes + 1, x, P, dP);
        Ut.leftCols(n0) = V.stream.val.middleRows<3>(3 * k);
        for (int i = 0; i < 3; ++i)
            DUt[i].leftCols(n0) = V.stream.grad.middleRows<3>(9 * k + 3 * i);
        SUt.leftCols(n0).setZero();
        Us.head(n0).setZero();
        SUs.head(n0).setZero();
        DUs.leftCols(n0).setZero();
        for (int m = 1; m <= V.modes; ++m) {
            const int c0 = n0 + (m - 1) * nT;
            const double phi = P[m], dphi = 2.0 * dP[m], Phi = (P[m + 1] - P[m - 1]) / (2.0 * (2 * m + 1));
            const auto t = V.tang.val.middleRows<3>(3 * k);
            Ut.middleCols(c0, nT) = phi * t;
            SUt.middleCols(c0, nT) = dphi * t;
            for (int i = 0; i < 3; ++i)
                DUt[i].middleCols(c0, nT) = phi * V.tang.grad.middleRows<3>(9 * k + 3 * i);
            Us.segment(c0, nT) = -Phi * V.tang.div.row(k);
            SUs.segment(c0, nT) = -phi * V.tang.div.row(k);
            DUs.middleCols(c0, nT) = -Phi * V.tang.grad_div.middleRows<3>(3 * k);
        }

        const Vec3 nv = S.n.col(k);
        const Mat3& W = S.W[k];
        const double r = grid.r[p], J = grid.J[p], gk = spec.g.val(k, 0), eg = eps * gk;
        const Mat3 M = Mat3::Identity() - r * W, &B = grid.B[p];
        const Vec3 rho = grid.rho.col(p), dg = spec.g.dvec(k);
        const Mat3 R = eps * (spec.g0.hmat(k) + s * spec.g.hmat(k));
        Vec3 dJ;
        for (int i = 0; i < 3; ++i)
            dJ[i] = -J * (B * (rho[i] * W + r * S.dW[k][i])).trace();
        const double sJ = -J * eg * (B * W).trace();
        const double h = eg * J, sh = eg * sJ;
        Vec3 dh;
        for (int i = 0; i < 3; ++i)
            dh[i] = eps * dg[i] * J + eg * dJ[i];

        const Eigen::RowVectorXd nc = rho.transpose() * Ut + eg * Us; // normal coefficient
        const Eigen::MatrixXd N = M * Ut + nv * nc;
        const Eigen::MatrixXd U = N / h;
        std::array<Eigen::MatrixXd, 3> G;
        for (int i = 0; i < 3; ++i) {
            const Mat3 dM = -(rho[i] * W + r * S.dW[k][i]);
            const Eigen::RowVectorXd dnc = R.row(i) * Ut + rho.transpose() * DUt[i] + eps * dg[i] * Us + eg * DUs.row(i);
            const Eigen::MatrixXd DN = dM * Ut + M * DUt[i] + nv * dnc - W.row(i).transpose() * nc;
            G[i] = (DN - U * dh[i]) / h;
        }
        const Eigen::RowVectorXd snc = eps * dg.transpose() * Ut + rho.transpose() * SUt + eg * SUs;
        const Eigen::MatrixXd SN = -eg * W * Ut + M * SUt + nv * snc;
        const Eigen::MatrixXd Sd = (SN - U * sh) / h;

        out.val.middleRows<3>(3 * p) = U;
        const Vec3 ds = grid.grad_s.col(p);
        for (int a = 0; a < 3; ++a)
            out.grad.middleRows<3>(9 * p + 3 * a) = B(a, 0) * G[0] + B(a, 1) * G[1] + B(a, 2) * G[2] + ds[a] * Sd;
    }
    return out;
}

BulkField field_of(const BulkBasis& F, const Eigen::VectorXd& c)
{
    const int Nb = int(F.val.rows() / 3);
    const Eigen::VectorXd v = F.val * c, g = F.grad * c;
    BulkField f;
    f.comps = 3;
    f.val = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(v.data(), Nb, 3);
    f.grad = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 9, Eigen::RowMajor>>(g.data(), Nb, 9);
    return f;
}

Eigen::MatrixXd bulk_mass(const BulkGrid& grid, const BulkBasis& F)
{
    Eigen::VectorXd sw(F.val.rows());
    for (int p = 0; p < grid.size(); ++p)
        sw.segment<3>(3 * p).setConstant(std::sqrt(grid.w[p]));
    const Eigen::MatrixXd X = sw.asDiagonal() * F.val;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(F.size(), F.size());
    G.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    return G.selfadjointView<Eigen::Lower>();
}

Eigen::MatrixXd bulk_grad_gram(const BulkGrid& grid, const BulkBasis& F)
{
    Eigen::VectorXd sw(F.grad.rows());
    for (int p = 0; p < grid.size(); ++p)
        sw.segment<9>(9 * p).setConstant(std::sqrt(grid.w[p]));
    const Eigen::MatrixXd X = sw.asDiagonal() * F.grad;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(F.size(), F.size());
    G.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    return G.selfadjointView<Eigen::Lower>();
}

Eigen::MatrixXd bulk_strain_gram(const BulkGrid& grid, const BulkBasis& F)
{
    Eigen::MatrixXd X(F.grad.rows(), F.size());
    for (int p = 0; p < grid.size(); ++p) {
        const double sw = std::sqrt(grid.w[p]);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                X.row(9 * p + 3 * a + b) = 0.5 * sw * (F.grad.row(9 * p + 3 * a + b) + F.grad.row(9 * p + 3 * b + a));
    }
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(F.size(), F.size());
    G.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    return G.selfadjointView<Eigen::Lower>();
}

Eigen::VectorXd bulk_load(const BulkGrid& grid, const BulkBasis& F, const BulkField& f)
{
    if (f.comps != 3)
        throw std::invalid_argument("bulk_load expects a vector field");
    Eigen::VectorXd wf(F.val.rows());
    for (int p = 0; p < grid.size(); ++p)
        wf.segment<3>(3 * p) = grid.w[p] * f.vec(p);
    return F.val.transpose() * wf;
}

BulkLeray make_leray(const BulkGrid& grid, const BulkBasis& basis)
{
    BulkLeray L;
    L.grid = &grid;
    L.basis = &basis;
    const Eigen::MatrixXd M = bulk_mass(grid, basis);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    const Eigen::VectorXd& lam = es.eigenvalues();
    int first = 0;
    while (first < lam.size() && lam[first] < tol::rank_cut * lam[lam.size() - 1])
        ++first;
    const int r = int(lam.size()) - first;
    L.Q = es.eigenvectors().rightCols(r) * lam.tail(r).cwiseSqrt().cwiseInverse().asDiagonal();
    return L;
}

Eigen::VectorXd BulkLeray::coeffs(const BulkField& u) const
{
    return Q * (Q.transpose() * bulk_load(*grid, *basis, u));
}

BulkField BulkLeray::apply(const BulkField& u) const { return field_of(*basis, coeffs(u)); }

void write_csv(const std::string& path, const BulkGrid& grid, const BulkField& f)
{
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write " + path);
    os << "node,s3,x,y,z";
    for (int j = 0; j < f.comps; ++j)
        os << ",v" << j;
    os << '\n' << std::setprecision(17);
    for (int p = 0; p < grid.size(); ++p) {
        os << grid.surf(p) << ',' << grid.s[grid.layer(p)] << ',' << grid.x(0, p) << ',' << grid.x(1, p) << ','
           << grid.x(2, p);
        for (int j = 0; j < f.comps; ++j)
            os << ',' << f.val(p, j);
        os << '\n';
    }
}

} // namespace thinlim
