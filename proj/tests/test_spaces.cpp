/// @file test_spaces.cpp
/// @brief Tangent bases, Killing fields, weighted Leray projection, Korn constants, rigid motions.

#include <doctest.h>

#include "thinlim/constants.hpp"
#include "thinlim/spaces.hpp"

#include <cmath>

using namespace thinlim;

namespace {

SurfaceField weight(const Surface& S, double c3)
{
    return sample(S, AmbientScalar::affine(1.0, Vec3(0, 0, c3)));
}

SurfaceField smooth_tangent(const Surface& S, const Vec3& k)
{
    // P applied to an exponential-modulated constant vector, with exact jets via the spectral space
    SurfaceField v = SurfaceField::vector(S.size());
    for (int i = 0; i < S.size(); ++i) {
        const Vec3 x = S.x.col(i);
        v.val.row(i) = (S.P(i) * Vec3(1.0, -0.5, 0.25) * std::exp(k.dot(x))).transpose();
    }
    return with_jets(S, v);
}

} // namespace

TEST_CASE("tangent basis is L2-orthonormal and tangential")
{
    const Surface S = build_sphere(1);
    const TangentBasis T = tangent_basis(S);
    const Eigen::MatrixXd G = gram_l2(S, as_fieldset(T));
    CHECK((G - Eigen::MatrixXd::Identity(T.size(), T.size())).cwiseAbs().maxCoeff() < 1e-10);
    for (int c = 0; c < T.size(); ++c) {
        const SurfaceField f = field_column(as_fieldset(T), c);
        CHECK(max_normal_component(S, f) < 1e-12);
        const SurfaceField d = surface_divergence(S, f);
        CHECK((d.val.col(0) - T.div.col(c)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("killing_basis dimensions")
{
    SUBCASE("sphere, g = 1: three rotations, g-orthonormal")
    {
        const Surface S = build_sphere(1);
        const TangentBasis T = tangent_basis(S);
        const SurfaceField g = weight(S, 0.0);
        const KillingBasis K = killing_basis(S, g, T);
        REQUIRE(K.size() == 3);
        const Eigen::VectorXd gv = g.val.col(0);
        const Eigen::MatrixXd Gg = gram_l2(S, K.fields, &gv);
        CHECK((Gg - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-8);
        for (int j = 0; j < 3; ++j) {
            const SurfaceField w = K.field(j);
            double m = 0.0;
            for (const Mat3& D : surface_strain(S, w))
                m = std::max(m, D.norm());
            CHECK(m < 1e-9);
            CHECK(surface_divergence(S, w).val.cwiseAbs().maxCoeff() < 1e-9);
            // span of e_k x y: w is linear with skew Jacobian in ambient coordinates
            const SurfaceField a = sample_vector(S, [](const Vec3& x) { return Vec3::UnitX().cross(x); });
            (void)a;
        }
        // each a x y lies in the span
        for (int a = 0; a < 3; ++a) {
            const SurfaceField r = sample_vector(S, [a](const Vec3& x) { return Vec3::Unit(a).cross(x); });
            const SurfaceField p = project_Hg(S, g, K, with_jets(S, r));
            CHECK(norm(S, p, NormKind::L2) < 1e-9);
        }
    }
    SUBCASE("sphere, g = 1 + 0.3 y3: only the axial rotation survives")
    {
        const Surface S = build_sphere(1);
        const TangentBasis T = tangent_basis(S);
        const SurfaceField g = weight(S, 0.3);
        const KillingBasis K = killing_basis(S, g, T);
        REQUIRE(K.size() == 1);
        const SurfaceField w = K.field(0);
        for (int k = 0; k < S.size(); ++k) {
            const Vec3 e = Vec3::UnitZ().cross(S.x.col(k));
            CHECK(std::abs(std::abs(w.vec(k).normalized().dot(e.normalized())) - 1.0) < 1e-8 + (e.norm() < 1e-3));
            CHECK(std::abs(w.vec(k).dot(g.dvec(k))) < 1e-10);
        }
        // weighted-solenoidal
        SurfaceField gw = w;
        for (int k = 0; k < S.size(); ++k)
            gw.val.row(k) *= g.val(k, 0);
        gw.grad.resize(0, 0);
        CHECK(surface_divergence(S, gw).val.cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("torus with axisymmetric weight: axial rotation only")
    {
        const Surface T = build_axisymmetric(Profile::torus(1.0, 0.4), 24, 48);
        const TangentBasis B = tangent_basis(T);
        const KillingBasis K = killing_basis(T, weight(T, 0.2), B);
        CHECK(K.size() == 1);
    }
}

TEST_CASE("weighted Leray projection")
{
    const Surface S = build_sphere(2);
    const SurfaceField g = weight(S, 0.2);
    const SurfaceField v = smooth_tangent(S, Vec3(0.3, -0.2, 0.4));
    const SurfaceField p1 = weighted_leray(S, g, v);
    const SurfaceField p2 = weighted_leray(S, g, p1);
    CHECK(norm(S, SurfaceField{3, true, p2.val - p1.val, {}, {}}, NormKind::L2) <= tol::idempotence * norm(S, p1, NormKind::L2));
    // g-orthogonal to gradients of the scalar basis
    const Eigen::VectorXd gv = g.val.col(0);
    for (int c = 1; c < 10; ++c) {
        SurfaceField gr = SurfaceField::vector(S.size());
        for (int k = 0; k < S.size(); ++k)
            gr.val.row(k) = S.basis.grad.block<3, 1>(3 * k, c).transpose();
        CHECK(std::abs(inner_l2(S, p1, gr, &gv)) < 1e-12);
    }
    // gradients are annihilated when g = 1 (no harmonic fields on the sphere)
    const SurfaceField q = sample(S, AmbientScalar::exponential(Vec3(0.5, 0.1, -0.3)));
    const SurfaceField gq = tangential_gradient(S, q);
    const SurfaceField z = weighted_leray(S, weight(S, 0.0), gq);
    CHECK(norm(S, z, NormKind::L2) < 1e-7 * norm(S, gq, NormKind::L2));
    // already weighted-solenoidal input is returned unchanged
    const FieldSet V = weighted_solenoidal_basis(S, g, nullptr);
    const SurfaceField s = field_of(V, Eigen::VectorXd::LinSpaced(V.size(), 1.0, -1.0));
    const SurfaceField s2 = weighted_leray(S, g, s);
    CHECK((s2.val - s.val).cwiseAbs().maxCoeff() < 1e-10 * s.val.cwiseAbs().maxCoeff());
}

TEST_CASE("weighted solenoidal basis")
{
    const Surface S = build_sphere(1);
    const SurfaceField g = weight(S, 0.3);
    const TangentBasis T = tangent_basis(S);
    const KillingBasis K = killing_basis(S, g, T);
    const FieldSet V = weighted_solenoidal_basis(S, g, &K);
    const Eigen::MatrixXd G = gram_h1(S, V);
    CHECK((G - Eigen::MatrixXd::Identity(V.size(), V.size())).cwiseAbs().maxCoeff() < 1e-9);
    const Eigen::VectorXd gv = g.val.col(0);
    Eigen::VectorXd d(3 * S.size());
    for (int k = 0; k < S.size(); ++k)
        d.segment<3>(3 * k).setConstant(S.w[k] * gv[k]);
    CHECK((V.val.transpose() * d.asDiagonal() * K.fields.val).cwiseAbs().maxCoeff() < 1e-10);
    for (int c = 0; c < V.size(); c += 7) {
        SurfaceField u = field_column(V, c);
        // div(g u) = grad g . u + g div u
        const SurfaceField du = surface_divergence(S, u);
        double m = 0.0;
        for (int k = 0; k < S.size(); ++k)
            m = std::max(m, std::abs(g.dvec(k).dot(u.vec(k)) + g.val(k, 0) * du.val(k, 0)));
        CHECK(m < 1e-10);
    }
}

TEST_CASE("norms")
{
    const Surface S = build_sphere(1);
    const TangentBasis T = tangent_basis(S);
    SurfaceField zero = SurfaceField::vector(S.size());
    CHECK(norm(S, zero, NormKind::L2) == 0.0);
    CHECK(norm(S, zero, NormKind::H1) == 0.0);
    CHECK(norm(S, zero, NormKind::Hminus1, &T) == 0.0);
    for (int i = 0; i < 5; ++i) {
        const SurfaceField v = smooth_tangent(S, Vec3(0.4 * i, -0.3, 0.1 * i));
        const double l2 = norm(S, v, NormKind::L2), hm = norm(S, v, NormKind::Hminus1, &T), h1 = norm(S, v, NormKind::H1);
        CHECK(hm <= l2 * (1.0 + 1e-12));
        CHECK(l2 <= h1);
        const double lad = lp_norm(S, v, 4.0) / std::sqrt(l2 * h1);
        CHECK(std::isfinite(lad));
        CHECK(lad < 2.0);
    }
    const SurfaceField radial = sample_vector(S, [](const Vec3& x) { return x; });
    CHECK_THROWS(norm(S, radial, NormKind::Hminus1, &T));
}

TEST_CASE("Korn constants")
{
    const Surface S1 = build_sphere(1), S2 = build_sphere(2);
    const TangentBasis T1 = tangent_basis(S1), T2 = tangent_basis(S2);
    const SurfaceField g1 = weight(S1, 0.0), g2 = weight(S2, 0.0);
    const double c1 = korn_constant(S1, g1, KornMode::plain, T1, nullptr);
    const double c2 = korn_constant(S2, g2, KornMode::plain, T2, nullptr);
    CHECK(std::isfinite(c1));
    CHECK(std::abs(c1 - c2) < 0.05 * c2);
    const KillingBasis K1 = killing_basis(S1, g1, T1), K2 = killing_basis(S2, g2, T2);
    const double w1 = korn_constant(S1, g1, KornMode::weighted, T1, &K1);
    const double w2 = korn_constant(S2, g2, KornMode::weighted, T2, &K2);
    CHECK(std::abs(w1 - w2) < 0.05 * w2);
    CHECK(korn_quotient(S1, g1, KornMode::weighted, T1, nullptr) < 1e-10);
    CHECK_THROWS(korn_constant(S1, g1, KornMode::weighted, T1, nullptr));
}

TEST_CASE("rigid motions of the sphere are the rotations")
{
    const Surface S = build_sphere(1);
    const RigidMotionSpace R = rigid_motions(S, weight(S, 0.0) , weight(S, 0.0));
    REQUIRE(R.R.cols() == 3);
    CHECK(R.R.bottomRows(3).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(R.Rg.cols() == 3);
    const RigidMotionSpace Rz = rigid_motions(S, weight(S, 0.0), weight(S, 0.3));
    REQUIRE(Rz.Rg.cols() == 1);
    CHECK(std::abs(std::abs(Rz.Rg(2, 0)) - 1.0) < 1e-10);
    CHECK(Rz.R0.cols() == 3);
    for (int c = 0; c < R.R.cols(); ++c)
        for (int k = 0; k < S.size(); ++k)
            CHECK(std::abs(rigid_eval(R.R.col(c), S.x.col(k)).dot(S.n.col(k))) < 1e-10);
}
