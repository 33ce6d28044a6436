/// @file test_geometry.cpp
/// @brief Sphere, torus and spheroid geometry plus tangential calculus.

#include <doctest.h>

#include "thinlim/geometry.hpp"

#include <cmath>
#include <numbers>

using namespace thinlim;

namespace {
constexpr double pi = std::numbers::pi;

double max_rel(const Mat3& a, const Mat3& b) { return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()); }
} // namespace

TEST_CASE("sphere: normal, projector, Weingarten, curvature")
{
    const Surface S = build_sphere(2);
    CHECK(S.size() == 1152);
    CHECK(std::abs(S.w.sum() - 4.0 * pi) < 1e-12);
    const auto K = principal_curvatures(S);
    for (int k = 0; k < S.size(); ++k) {
        const Vec3 n = S.n.col(k);
        CHECK(std::abs(n.norm() - 1.0) < 1e-13);
        CHECK((n - S.x.col(k)).norm() < 1e-13);
        const Mat3 P = S.P(k);
        CHECK((P * P - P).norm() < 1e-13);
        CHECK((P * n).norm() < 1e-13);
        CHECK(max_rel(S.W[k], -P) < 1e-10);
        CHECK((S.W[k] * n).norm() < 1e-12);
        CHECK(std::abs(S.H(k) + 2.0) < 1e-10);
        CHECK(std::abs(K(k, 0) + 1.0) < 1e-10);
        CHECK(std::abs(K(k, 1) + 1.0) < 1e-10);
    }
}

TEST_CASE("sphere basis spans spherical polynomials")
{
    const Surface S = build_sphere(2, 6);
    CHECK(S.basis.size() == 49);
    const Eigen::MatrixXd G = S.basis.val.transpose() * S.w.asDiagonal() * S.basis.val;
    CHECK((G - Eigen::MatrixXd::Identity(49, 49)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sphere: grad y3 = e3 - y3 y and div grad y3 = -2 y3")
{
    const Surface S = build_sphere(2);
    SurfaceField y3 = SurfaceField::scalar(S.size());
    y3.val.col(0) = S.x.row(2).transpose();
    const SurfaceField g = tangential_gradient(S, y3);
    const SurfaceField d = surface_divergence(S, g);
    for (int k = 0; k < S.size(); ++k) {
        const Vec3 y = S.x.col(k);
        CHECK((g.vec(k) - (Vec3::UnitZ() - y.z() * y)).norm() < 1e-11);
        CHECK(std::abs(d.val(k, 0) + 2.0 * y.z()) < 1e-10);
    }
    SurfaceField one = SurfaceField::scalar(S.size());
    one.val.setOnes();
    CHECK(tangential_gradient(S, one).val.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sphere: Killing fields a x y have zero strain and divergence")
{
    const Surface S = build_sphere(2);
    for (int a = 0; a < 3; ++a) {
        const Vec3 e = Vec3::Unit(a);
        const SurfaceField w = sample_vector(S, [&](const Vec3& x) { return e.cross(x); });
        const auto D = surface_strain(S, w);
        const SurfaceField div = surface_divergence(S, w);
        double m = 0.0;
        for (const auto& Dk : D)
            m = std::max(m, Dk.norm());
        CHECK(m < 1e-11);
        CHECK(div.val.cwiseAbs().maxCoeff() < 1e-11);
    }
}

TEST_CASE("degree-l harmonics are eigenfunctions of div grad")
{
    const Surface S = build_sphere(2);
    // l = 2: 3 y3^2 - 1, l = 3: y1 y2 y3
    const AmbientScalar f2 = AmbientScalar::quadratic(-1.0, Vec3::Zero(), Vec3(0, 0, 3).asDiagonal());
    const SurfaceField e2 = sample(S, f2);
    const SurfaceField l2 = surface_divergence(S, tangential_gradient(S, e2));
    CHECK((l2.val + 6.0 * e2.val).cwiseAbs().maxCoeff() < 1e-10);
    SurfaceField e3 = SurfaceField::scalar(S.size());
    for (int k = 0; k < S.size(); ++k)
        e3.val(k, 0) = S.x(0, k) * S.x(1, k) * S.x(2, k);
    const SurfaceField l3 = surface_divergence(S, tangential_gradient(S, e3));
    CHECK((l3.val + 12.0 * e3.val).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("integration by parts identity")
{
    const Surface S = build_sphere(2);
    SurfaceField one = SurfaceField::scalar(S.size());
    one.val.setOnes();
    CHECK(ibp_residual(S, one, one, 2) < 1e-13);
    SurfaceField zero = SurfaceField::scalar(S.size());
    CHECK(ibp_residual(S, zero, one, 0) == doctest::Approx(0.0));
    const SurfaceField eta = sample(S, AmbientScalar::exponential(Vec3(0.4, -0.3, 0.2)));
    const SurfaceField xi = sample(S, AmbientScalar::quadratic(0.5, Vec3(1, 0, 0), Vec3(0.2, -0.1, 0.3).asDiagonal()));
    for (int i = 0; i < 3; ++i)
        CHECK(ibp_residual(S, eta, xi, i) < 1e-12);
    // nodal data differentiated through the spectral space: residual falls under refinement
    SurfaceField a1 = eta, a2 = eta;
    a1.grad.resize(0, 0);
    a1.hess.resize(0, 0);
    const Surface S1 = build_sphere(1), S3 = build_sphere(3);
    auto nodal = [](const Surface& T) {
        SurfaceField f = SurfaceField::scalar(T.size());
        for (int k = 0; k < T.size(); ++k)
            f.val(k, 0) = std::exp(0.4 * T.x(0, k) - 0.3 * T.x(1, k) + 0.2 * T.x(2, k));
        return f;
    };
    const double r1 = ibp_residual(S1, nodal(S1), nodal(S1), 0);
    const double r3 = ibp_residual(S3, nodal(S3), nodal(S3), 0);
    CHECK(r3 < r1);
    CHECK(r3 < 1e-12);
}

TEST_CASE("tangential gradient converges spectrally under refinement")
{
    double prev = 1.0;
    int prev_deg = 0;
    for (int level : {1, 2, 3}) {
        const Surface S = build_sphere(level);
        const AmbientScalar f = AmbientScalar::exponential(Vec3(1.0, 0.5, -0.7));
        const SurfaceField exact = sample(S, f);
        SurfaceField nodal = exact;
        nodal.grad.resize(0, 0);
        nodal.hess.resize(0, 0);
        const SurfaceField g = tangential_gradient(S, nodal);
        const double err = (g.val - exact.grad).cwiseAbs().maxCoeff();
        if (prev_deg > 0) {
            const double order = std::log(prev / err) / std::log(double(S.basis.degree) / prev_deg);
            CHECK(order > 4.0);
        }
        prev = err;
        prev_deg = S.basis.degree;
    }
    CHECK(prev < 1e-7);
}

TEST_CASE("covariant derivative")
{
    const Surface S = build_sphere(1);
    const SurfaceField w = sample_vector(S, [](const Vec3& x) { return Vec3::UnitZ().cross(x); });
    SurfaceField zero = SurfaceField::vector(S.size());
    CHECK(covariant_derivative(S, zero, w).val.cwiseAbs().maxCoeff() < 1e-14);
    const SurfaceField radial = sample_vector(S, [](const Vec3& x) { return x; });
    CHECK_THROWS(covariant_derivative(S, radial, w));
    // on the unit sphere the covariant derivative of e3 x y along itself is P(e3 x (e3 x y)) = -P(y3 e3 - y)...
    const SurfaceField c = covariant_derivative(S, w, w);
    for (int k = 0; k < S.size(); ++k) {
        const Vec3 y = S.x.col(k);
        const Vec3 expect = S.P(k) * Vec3::UnitZ().cross(Vec3::UnitZ().cross(y));
        CHECK((c.vec(k) - expect).norm() < 1e-11);
    }
}

TEST_CASE("axisymmetric surfaces")
{
    SUBCASE("profile of the unit sphere reproduces build_sphere")
    {
        const Surface A = build_axisymmetric(Profile::sphere(), 16, 32);
        const Surface B = build_sphere(1);
        CHECK((A.x - B.x).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((A.w - B.w).cwiseAbs().maxCoeff() < 1e-14);
        for (int k = 0; k < A.size(); ++k)
            CHECK(max_rel(A.W[k], B.W[k]) < 1e-10);
    }
    SUBCASE("torus principal curvatures and Gaussian curvature sign change")
    {
        const Surface T = build_axisymmetric(Profile::torus(1.0, 0.4), 32, 48);
        const auto K = principal_curvatures(T);
        double kmin = 1e9, kmax = -1e9;
        for (int k = 0; k < T.size(); ++k) {
            const double t = T.param(0, k);
            const double k1 = -2.5, k2 = -std::cos(t) / (1.0 + 0.4 * std::cos(t));
            const double lo = std::min(k1, k2), hi = std::max(k1, k2);
            CHECK(std::abs(std::min(K(k, 0), K(k, 1)) - lo) < 1e-10);
            CHECK(std::abs(std::max(K(k, 0), K(k, 1)) - hi) < 1e-10);
            kmin = std::min(kmin, K(k, 0) * K(k, 1));
            kmax = std::max(kmax, K(k, 0) * K(k, 1));
        }
        CHECK(kmin < 0.0);
        CHECK(kmax > 0.0);
        // frozen oracle values at t = 0.3 and t = 2.5
        CHECK(-std::cos(0.3) / (1.0 + 0.4 * std::cos(0.3)) == doctest::Approx(-0.691203658552629).epsilon(1e-12));
        CHECK(-2.5 * -std::cos(2.5) / (1.0 + 0.4 * std::cos(2.5)) == doctest::Approx(-2.9473636753470176).epsilon(1e-12));
    }
    SUBCASE("oblate spheroid area")
    {
        const Surface E = build_axisymmetric(Profile::spheroid(1.2, 0.8), 32, 64);
        CHECK(std::abs(E.w.sum() - 14.240117979510616466) < 1e-9);
        for (int k = 0; k < E.size(); ++k)
            CHECK((E.W[k] - E.W[k].transpose()).norm() < 1e-12);
    }
    SUBCASE("grad W off the sphere agrees with the analytic sphere formula")
    {
        Profile p = Profile::sphere();
        p.name = "unit-circle";
        const Surface A = build_axisymmetric(p, 8, 16);
        const Surface B = build_sphere(0);
        double m = 0.0;
        for (int k = 0; k < A.size(); ++k)
            for (int i = 0; i < 3; ++i)
                m = std::max(m, (A.dW[k][i] - B.dW[k][i]).cwiseAbs().maxCoeff());
        CHECK(m < 1e-8);
    }
    SUBCASE("self-intersecting profile is rejected")
    {
        Profile bad;
        bad.polar = false;
        bad.name = "figure-eight";
        bad.rho = [](double t) { return Eigen::Vector4d(2.0 + std::sin(2 * t), 2 * std::cos(2 * t), -4 * std::sin(2 * t), -8 * std::cos(2 * t)); };
        bad.z = [](double t) { return Eigen::Vector4d(std::sin(t), std::cos(t), -std::sin(t), -std::cos(t)); };
        CHECK_THROWS_AS(build_axisymmetric(bad, 16, 16), std::invalid_argument);
        CHECK_THROWS_AS(Profile::torus(0.5, 1.0), std::invalid_argument);
    }
}
