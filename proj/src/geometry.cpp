#include "thinlim/geometry.hpp"
#include "thinlim/constants.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <stdexcept>

namespace thinlim {

namespace {

constexpr double pi = std::numbers::pi;

struct ChartPoint {
    Vec3 x, n;
    Mat3 W;
    Eigen::Matrix<double, 3, 2> T; // columns mu_t, mu_phi
    Eigen::Matrix2d metric;
    double area = 0.0; // |mu_t x mu_phi|
};

ChartPoint eval_chart(const Profile& p, double t, double phi, int orientation)
{
    const Eigen::Vector4d r = p.rho(t), z = p.z(t);
    const double c = std::cos(phi), s = std::sin(phi);
    ChartPoint cp;
    cp.x = Vec3(r[0] * c, r[0] * s, z[0]);
    const Vec3 mt(r[1] * c, r[1] * s, z[1]);
    const Vec3 mp(-r[0] * s, r[0] * c, 0.0);
    const Vec3 mtt(r[2] * c, r[2] * s, z[2]);
    const Vec3 mtp(-r[1] * s, r[1] * c, 0.0);
    const Vec3 mpp(-r[0] * c, -r[0] * s, 0.0);
    const double speed = std::hypot(r[1], z[1]);
    cp.n = double(orientation) * Vec3(z[1] * c, z[1] * s, -r[1]) / speed;
    cp.T.col(0) = mt;
    cp.T.col(1) = mp;
    cp.metric << mt.dot(mt), mt.dot(mp), mp.dot(mt), mp.dot(mp);
    cp.area = mt.cross(mp).norm();
    Eigen::Matrix2d h;
    h << mtt.dot(cp.n), mtp.dot(cp.n), mtp.dot(cp.n), mpp.dot(cp.n);
    const Eigen::Matrix2d gi = cp.metric.inverse();
    cp.W = cp.T * gi * h * gi * cp.T.transpose();
    return cp;
}

// D_i W from a fourth-order stencil in chart coordinates.
std::array<Mat3, 3> chart_dW(const Profile& p, double t, double phi, int orientation, const ChartPoint& cp)
{
    const double h = tol::chart_fd_step;
    auto diff = [&](int a) {
        auto at = [&](double d) {
            return a == 0 ? eval_chart(p, t + d, phi, orientation).W : eval_chart(p, t, phi + d, orientation).W;
        };
        return Mat3((-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h));
    };
    const std::array<Mat3, 2> dW = {diff(0), diff(1)};
    const Eigen::Matrix<double, 3, 2> up = cp.T * cp.metric.inverse();
    std::array<Mat3, 3> out;
    for (int i = 0; i < 3; ++i)
        out[i] = up(i, 0) * dW[0] + up(i, 1) * dW[1];
    return out;
}

std::array<Mat3, 3> sphere_dW(const Vec3& n)
{
    const Mat3 P = projector<double>(n);
    std::array<Mat3, 3> out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                out[i](j, k) = P(i, j) * n(k) + n(j) * P(i, k);
    return out;
}

bool segments_cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c, const Eigen::Vector2d& d)
{
    auto orient = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q, const Eigen::Vector2d& r) {
        return (q - p).x() * (r - p).y() - (q - p).y() * (r - p).x();
    };
    const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    return o1 * o2 < 0.0 && o3 * o4 < 0.0;
}

void check_profile(const Profile& p)
{
    const int m = int(tol::self_intersection_samples) / 4;
    const double t0 = 0.0, t1 = p.polar ? pi : 2.0 * pi;
    std::vector<Eigen::Vector2d> pts(m + 1);
    for (int i = 0; i <= m; ++i) {
        const double t = t0 + (t1 - t0) * i / m;
        pts[i] = Eigen::Vector2d(p.rho(t)[0], p.z(t)[0]);
        const bool interior = !p.polar || (i > 0 && i < m);
        if (interior && pts[i].x() <= 0.0)
            throw std::invalid_argument("profile touches or crosses the axis of revolution");
        const double speed = std::hypot(p.rho(t)[1], p.z(t)[1]);
        if (speed < 1e-12)
            throw std::invalid_argument("profile is not regular");
    }
    if (p.polar && (std::abs(pts[0].x()) > 1e-10 || std::abs(pts[m].x()) > 1e-10))
        throw std::invalid_argument("polar profile must start and end on the axis");
    for (int i = 0; i < m; ++i)
        for (int j = i + 2; j < m; ++j) {
            if (!p.polar && i == 0 && j == m - 1)
                continue;
            if (segments_cross(pts[i], pts[i + 1], pts[j], pts[j + 1]))
                throw std::invalid_argument("profile is self-intersecting");
        }
}

// Legendre P_0..P_L with first and second derivatives at t.
void legendre_all(int L, double t, Eigen::VectorXd& p, Eigen::VectorXd& dp, Eigen::VectorXd& ddp)
{
    p.setZero(L + 1);
    dp.setZero(L + 1);
    ddp.setZero(L + 1);
    p[0] = 1.0;
    if (L == 0)
        return;
    p[1] = t;
    dp[1] = 1.0;
    for (int k = 1; k < L; ++k) {
        p[k + 1] = ((2 * k + 1) * t * p[k] - k * p[k - 1]) / (k + 1);
        dp[k + 1] = dp[k - 1] + (2 * k + 1) * p[k];
        ddp[k + 1] = ddp[k - 1] + (2 * k + 1) * dp[k];
    }
}

} // namespace

AmbientScalar AmbientScalar::constant(double c)
{
    return {[c](const Vec3&) { return c; }, [](const Vec3&) { return Vec3::Zero().eval(); },
            [](const Vec3&) { return Mat3::Zero().eval(); }, "constant"};
}

AmbientScalar AmbientScalar::affine(double c, const Vec3& b)
{
    return {[c, b](const Vec3& x) { return c + b.dot(x); }, [b](const Vec3&) { return b; },
            [](const Vec3&) { return Mat3::Zero().eval(); }, "affine"};
}

AmbientScalar AmbientScalar::quadratic(double c, const Vec3& b, const Mat3& Q)
{
    const Mat3 S = sym<double>(Q);
    return {[c, b, S](const Vec3& x) { return c + b.dot(x) + x.dot(S * x); },
            [b, S](const Vec3& x) { return (b + 2.0 * S * x).eval(); }, [S](const Vec3&) { return (2.0 * S).eval(); },
            "quadratic"};
}

AmbientScalar AmbientScalar::exponential(const Vec3& k)
{
    return {[k](const Vec3& x) { return std::exp(k.dot(x)); },
            [k](const Vec3& x) { return (std::exp(k.dot(x)) * k).eval(); },
            [k](const Vec3& x) { return (std::exp(k.dot(x)) * k * k.transpose()).eval(); }, "exponential"};
}

Profile Profile::sphere(double radius)
{
    Profile p;
    p.rho = [radius](double t) {
        return Eigen::Vector4d(radius * std::sin(t), radius * std::cos(t), -radius * std::sin(t), -radius * std::cos(t));
    };
    p.z = [radius](double t) {
        return Eigen::Vector4d(-radius * std::cos(t), radius * std::sin(t), radius * std::cos(t), -radius * std::sin(t));
    };
    p.polar = true;
    p.name = "sphere";
    return p;
}

Profile Profile::torus(double R, double a)
{
    if (!(R > a && a > 0.0))
        throw std::invalid_argument("torus requires R > a > 0");
    Profile p;
    p.rho = [R, a](double t) {
        return Eigen::Vector4d(R + a * std::cos(t), -a * std::sin(t), -a * std::cos(t), a * std::sin(t));
    };
    p.z = [a](double t) {
        return Eigen::Vector4d(a * std::sin(t), a * std::cos(t), -a * std::sin(t), -a * std::cos(t));
    };
    p.polar = false;
    p.name = "torus";
    return p;
}

Profile Profile::spheroid(double a, double c)
{
    Profile p;
    p.rho = [a](double t) {
        return Eigen::Vector4d(a * std::sin(t), a * std::cos(t), -a * std::sin(t), -a * std::cos(t));
    };
    p.z = [c](double t) {
        return Eigen::Vector4d(-c * std::cos(t), c * std::sin(t), c * std::cos(t), -c * std::sin(t));
    };
    p.polar = true;
    p.name = "spheroid";
    return p;
}

Mat3 SurfaceField::jac(int k) const
{
    Mat3 J;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            J(i, j) = grad(k, 3 * i + j);
    return J;
}

Mat3 SurfaceField::hmat(int k) const
{
    Mat3 H;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            H(i, j) = hess(k, 3 * i + j);
    return H;
}

void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights)
{
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes = es.eigenvalues();
    weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
    // one Newton polish on P_n
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd p, dp, ddp;
        legendre_all(n, nodes[i], p, dp, ddp);
        nodes[i] -= p[n] / dp[n];
        legendre_all(n, nodes[i], p, dp, ddp);
        weights[i] = 2.0 / ((1.0 - nodes[i] * nodes[i]) * dp[n] * dp[n]);
    }
}

int default_degree(int n_t) { return std::max(2, n_t / 3); }

Surface build_axisymmetric(const Profile& profile, int n_t, int n_phi, int degree, int orientation)
{
    if (n_t < 2 || n_phi < 3)
        throw std::invalid_argument("grid too coarse");
    check_profile(profile);
    Surface S;
    S.kind = profile.name;
    S.n_t = n_t;
    S.n_phi = n_phi;
    S.orientation = orientation;
    S.profile = profile;
    const int N = n_t * n_phi;
    S.param.resize(2, N);
    S.x.resize(3, N);
    S.n.resize(3, N);
    S.W.resize(N);
    S.dW.resize(N);
    S.w.resize(N);

    Eigen::VectorXd tn(n_t), tw(n_t);
    if (profile.polar) {
        Eigen::VectorXd xi, wi;
        gauss_legendre(n_t, xi, wi);
        for (int i = 0; i < n_t; ++i) {
            tn[i] = std::acos(-xi[i]); // south to north
            tw[i] = wi[i] / std::sin(tn[i]);
        }
    } else {
        for (int i = 0; i < n_t; ++i) {
            tn[i] = 2.0 * pi * (i + 0.5) / n_t;
            tw[i] = 2.0 * pi / n_t;
        }
    }
    const double dphi = 2.0 * pi / n_phi;
    const bool sphere = profile.name == "sphere";
    int k = 0;
    for (int i = 0; i < n_t; ++i)
        for (int j = 0; j < n_phi; ++j, ++k) {
            const double phi = dphi * j;
            const ChartPoint cp = eval_chart(profile, tn[i], phi, orientation);
            S.param.col(k) << tn[i], phi;
            S.x.col(k) = cp.x;
            S.n.col(k) = cp.n;
            S.W[k] = sym<double>(cp.W);
            S.w[k] = tw[i] * dphi * cp.area;
            S.dW[k] = sphere ? sphere_dW(cp.n) : chart_dW(profile, tn[i], phi, orientation, cp);
        }
    S.radius = 0.0;
    for (int q = 0; q < N; ++q)
        S.radius = std::max(S.radius, S.x.col(q).cwiseAbs().maxCoeff());
    S.radius *= 1.0 + 1e-12;
    S.basis = scalar_basis(S, degree < 0 ? default_degree(n_t) : degree);
    return S;
}

Surface build_sphere(int level, int degree)
{
    if (level < 0)
        throw std::invalid_argument("level must be nonnegative");
    const int n_t = 8 * (level + 1);
    Surface S = build_axisymmetric(Profile::sphere(1.0), n_t, 2 * n_t, degree, 1);
    S.kind = "sphere";
    return S;
}

ScalarBasis scalar_basis(const Surface& S, int degree)
{
    const int N = S.size();
    const int L = degree;
    std::vector<std::array<int, 3>> exps;
    for (int d = 0; d <= L; ++d)
        for (int a = d; a >= 0; --a)
            for (int b = d - a; b >= 0; --b)
                exps.push_back({a, b, d - a - b});
    const int nr = int(exps.size());
    Eigen::MatrixXd Rv(N, nr), Rg(3 * N, nr), Rh(9 * N, nr);
    const double R = S.radius;
    for (int k = 0; k < N; ++k) {
        std::array<Eigen::VectorXd, 3> p, dp, ddp;
        for (int c = 0; c < 3; ++c)
            legendre_all(L, S.x(c, k) / R, p[c], dp[c], ddp[c]);
        const Vec3 n = S.n.col(k);
        const Mat3 P = S.P(k);
        const Mat3& W = S.W[k];
        for (int q = 0; q < nr; ++q) {
            const auto [a, b, c] = exps[q];
            const double v = p[0][a] * p[1][b] * p[2][c];
            const Vec3 g = Vec3(dp[0][a] * p[1][b] * p[2][c], p[0][a] * dp[1][b] * p[2][c], p[0][a] * p[1][b] * dp[2][c]) / R;
            Mat3 h;
            h(0, 0) = ddp[0][a] * p[1][b] * p[2][c];
            h(1, 1) = p[0][a] * ddp[1][b] * p[2][c];
            h(2, 2) = p[0][a] * p[1][b] * ddp[2][c];
            h(0, 1) = h(1, 0) = dp[0][a] * dp[1][b] * p[2][c];
            h(0, 2) = h(2, 0) = dp[0][a] * p[1][b] * dp[2][c];
            h(1, 2) = h(2, 1) = p[0][a] * dp[1][b] * dp[2][c];
            h /= R * R;
            Rv(k, q) = v;
            const Vec3 tg = P * g;
            Rg.block<3, 1>(3 * k, q) = tg;
            const Mat3 sh = W * n.dot(g) + (W * g) * n.transpose() + P * h * P;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    Rh(9 * k + 3 * i + j, q) = sh(i, j);
        }
    }
    const double area = S.w.sum();
    const Eigen::VectorXd sw = S.w.cwiseSqrt();
    // mean-free raw functions, constants handled separately
    Eigen::MatrixXd A(N, nr - 1);
    for (int q = 1; q < nr; ++q) {
        const double mean = S.w.dot(Rv.col(q)) / area;
        A.col(q - 1) = sw.cwiseProduct(Rv.col(q).array().matrix() - Eigen::VectorXd::Constant(N, mean));
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    int rank = 0;
    while (rank < sv.size() && sv[rank] > tol::rank_cut * sv[0])
        ++rank;
    const Eigen::MatrixXd C = svd.matrixV().leftCols(rank) * sv.head(rank).cwiseInverse().asDiagonal();

    ScalarBasis B;
    B.degree = L;
    B.val.resize(N, rank + 1);
    B.grad.resize(3 * N, rank + 1);
    B.hess.resize(9 * N, rank + 1);
    B.val.col(0).setConstant(1.0 / std::sqrt(area));
    B.grad.col(0).setZero();
    B.hess.col(0).setZero();
    B.val.rightCols(rank) = (A.array().colwise() / sw.array()).matrix() * C;
    B.grad.rightCols(rank) = Rg.rightCols(nr - 1) * C;
    B.hess.rightCols(rank) = Rh.rightCols(nr - 1) * C;
    return B;
}

const std::vector<Mat3>& weingarten(const Surface& S) { return S.W; }

Eigen::MatrixX2d principal_curvatures(const Surface& S)
{
    Eigen::MatrixX2d K(S.size(), 2);
    for (int k = 0; k < S.size(); ++k) {
        // eigenvalues of W on the tangent plane: drop the one belonging to n
        Eigen::SelfAdjointEigenSolver<Mat3> es(S.W[k]);
        const Vec3 n = S.n.col(k);
        int drop = 0;
        double best = -1.0;
        for (int i = 0; i < 3; ++i) {
            const double a = std::abs(es.eigenvectors().col(i).dot(n));
            if (a > best) {
                best = a;
                drop = i;
            }
        }
        int c = 0;
        for (int i = 0; i < 3; ++i)
            if (i != drop)
                K(k, c++) = es.eigenvalues()[i];
    }
    return K;
}

Eigen::VectorXd mean_curvature(const Surface& S)
{
    Eigen::VectorXd H(S.size());
    for (int k = 0; k < S.size(); ++k)
        H[k] = S.H(k);
    return H;
}

SurfaceField sample(const Surface& S, const AmbientScalar& f)
{
    const int N = S.size();
    SurfaceField out = SurfaceField::scalar(N);
    out.grad.resize(N, 3);
    out.hess.resize(N, 9);
    for (int k = 0; k < N; ++k) {
        const Vec3 x = S.x.col(k), n = S.n.col(k);
        const Mat3 P = S.P(k);
        const Vec3 g = f.grad(x);
        const Mat3 h = f.hess(x);
        out.val(k, 0) = f.f(x);
        out.grad.row(k) = (P * g).transpose();
        const Mat3 sh = S.W[k] * n.dot(g) + (S.W[k] * g) * n.transpose() + P * h * P;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                out.hess(k, 3 * i + j) = sh(i, j);
    }
    return out;
}

SurfaceField sample_vector(const Surface& S, const std::function<Vec3(const Vec3&)>& f)
{
    SurfaceField out = SurfaceField::vector(S.size());
    for (int k = 0; k < S.size(); ++k)
        out.val.row(k) = f(S.x.col(k)).transpose();
    return out;
}

SurfaceField with_jets(const Surface& S, const SurfaceField& f)
{
    const ScalarBasis& B = S.basis;
    const int N = S.size();
    SurfaceField out = f;
    out.grad.resize(N, 3 * f.comps);
    if (f.comps == 1)
        out.hess.resize(N, 9);
    for (int j = 0; j < f.comps; ++j) {
        const Eigen::VectorXd c = B.val.transpose() * S.w.cwiseProduct(f.val.col(j));
        const Eigen::VectorXd g = B.grad * c;
        for (int k = 0; k < N; ++k)
            for (int i = 0; i < 3; ++i)
                out.grad(k, f.comps * i + j) = g[3 * k + i];
        if (f.comps == 1) {
            const Eigen::VectorXd h = B.hess * c;
            for (int k = 0; k < N; ++k)
                for (int q = 0; q < 9; ++q)
                    out.hess(k, q) = h[9 * k + q];
        }
    }
    return out;
}

SurfaceField tangential_gradient(const Surface& S, const SurfaceField& eta)
{
    if (eta.comps != 1)
        throw std::invalid_argument("tangential_gradient expects a scalar field");
    const SurfaceField e = (eta.has_grad() && eta.has_hess()) ? eta : with_jets(S, eta);
    SurfaceField out = SurfaceField::vector(S.size());
    out.tangential = true;
    out.val = e.grad;
    out.grad = e.hess;
    return out;
}

SurfaceField surface_divergence(const Surface& S, const SurfaceField& v)
{
    if (v.comps != 3)
        throw std::invalid_argument("surface_divergence expects a vector field");
    const SurfaceField e = v.has_grad() ? v : with_jets(S, v);
    SurfaceField out = SurfaceField::scalar(S.size());
    for (int k = 0; k < S.size(); ++k)
        out.val(k, 0) = e.grad(k, 0) + e.grad(k, 4) + e.grad(k, 8);
    return out;
}

std::vector<Mat3> surface_strain(const Surface& S, const SurfaceField& v)
{
    if (v.comps != 3)
        throw std::invalid_argument("surface_strain expects a vector field");
    const SurfaceField e = v.has_grad() ? v : with_jets(S, v);
    std::vector<Mat3> D(S.size());
    for (int k = 0; k < S.size(); ++k)
        D[k] = strain<double>(S.P(k), e.jac(k));
    return D;
}

double max_normal_component(const Surface& S, const SurfaceField& v)
{
    double m = 0.0;
    for (int k = 0; k < S.size(); ++k)
        m = std::max(m, std::abs(S.n.col(k).dot(v.vec(k))));
    return m;
}

SurfaceField covariant_derivative(const Surface& S, const SurfaceField& eta, const SurfaceField& v)
{
    if (eta.comps != 3 || v.comps != 3)
        throw std::invalid_argument("covariant_derivative expects vector fields");
    const double scale = std::max({1.0, eta.val.cwiseAbs().maxCoeff(), v.val.cwiseAbs().maxCoeff()});
    if (max_normal_component(S, eta) > tol::tangential * scale || max_normal_component(S, v) > tol::tangential * scale)
        throw std::invalid_argument("covariant_derivative requires tangential fields");
    const SurfaceField e = v.has_grad() ? v : with_jets(S, v);
    SurfaceField out = SurfaceField::vector(S.size());
    out.tangential = true;
    for (int k = 0; k < S.size(); ++k)
        out.val.row(k) = (S.P(k) * (e.jac(k).transpose() * eta.vec(k))).transpose();
    return out;
}

SurfaceField project_tangent(const Surface& S, const SurfaceField& v)
{
    SurfaceField out = SurfaceField::vector(S.size());
    out.tangential = true;
    for (int k = 0; k < S.size(); ++k)
        out.val.row(k) = (S.P(k) * v.vec(k)).transpose();
    return out;
}

double integrate(const Surface& S, const Eigen::VectorXd& f) { return S.w.dot(f); }

double integrate(const Surface& S, const SurfaceField& f)
{
    if (f.comps != 1)
        throw std::invalid_argument("integrate expects a scalar field");
    return S.w.dot(f.val.col(0));
}

double ibp_residual(const Surface& S, const SurfaceField& eta, const SurfaceField& xi, int i)
{
    if (i < 0 || i > 2)
        throw std::invalid_argument("component index out of range");
    const SurfaceField e = eta.has_grad() ? eta : with_jets(S, eta);
    const SurfaceField x = xi.has_grad() ? xi : with_jets(S, xi);
    double lhs = 0.0, rhs = 0.0;
    for (int k = 0; k < S.size(); ++k) {
        lhs += S.w[k] * (e.val(k, 0) * x.grad(k, i) + x.val(k, 0) * e.grad(k, i));
        rhs -= S.w[k] * e.val(k, 0) * x.val(k, 0) * S.H(k) * S.n(i, k);
    }
    return std::abs(lhs - rhs);
}

void write_csv(const std::string& path, const Surface& S, const SurfaceField& f)
{
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write " + path);
    os << "node,s1,s2,x,y,z";
    for (int j = 0; j < f.comps; ++j)
        os << ",v" << j;
    os << '\n' << std::setprecision(17);
    for (int k = 0; k < S.size(); ++k) {
        os << k << ',' << S.param(0, k) << ',' << S.param(1, k) << ',' << S.x(0, k) << ',' << S.x(1, k) << ','
           << S.x(2, k);
        for (int j = 0; j < f.comps; ++j)
            os << ',' << f.val(k, j);
        os << '\n';
    }
}

} // namespace thinlim
