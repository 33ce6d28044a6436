/// @file test_thin_domain.cpp
/// @brief Shell quadrature, Jacobian, boundary normals, extensions and the discrete Leray projection.

#include <doctest.h>

#include "thinlim/constants.hpp"
#include "thinlim/thin_domain.hpp"

#include <cmath>

using namespace thinlim;

namespace {

SurfaceField affine(const Surface& S, double c, const Vec3& b) { return sample(S, AmbientScalar::affine(c, b)); }

SurfaceField smooth_tangent(const Surface& S, const Vec3& k)
{
    SurfaceField v = SurfaceField::vector(S.size());
    for (int i = 0; i < S.size(); ++i) {
        const Vec3 x = S.x.col(i);
        v.val.row(i) = (S.P(i) * Vec3(1.0, -0.5, 0.25) * std::exp(k.dot(x))).transpose();
    }
    v.tangential = true;
    return with_jets(S, v);
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

} // namespace

TEST_CASE("spec validation and admissible eps")
{
    const Surface S = build_sphere(1);
    CHECK_THROWS_AS(make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 0.0, Vec3::Zero()), 0.1), std::invalid_argument);
    // sphere, g0 = 0, g1 = 1: 1 - r kappa = 1 + r <= 2 gives eps <= 1
    const double emax = admissible_eps(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3::Zero()));
    CHECK(std::abs(emax - 1.0) < 1e-12);
    CHECK_THROWS_AS(make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3::Zero()), 1.5), std::invalid_argument);
    CHECK_THROWS_AS(make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3::Zero()), 0.1, 0.5), std::invalid_argument);
    CHECK_NOTHROW(make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3::Zero()), 0.1, 0.1, 0.0));
}

TEST_CASE("jacobian on the sphere")
{
    const Surface S = build_sphere(2);
    const ThinDomainSpec spec = make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3::Zero()), 0.125);
    const BulkGrid G = make_grid(spec, 4);
    double err = 0.0;
    for (int p = 0; p < G.size(); ++p)
        err = std::max(err, std::abs(G.J[p] - std::pow(1.0 + G.r[p], 2)) / G.J[p]);
    CHECK(err < 1e-12);
    CHECK(jacobian(spec, 0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(jacobian(spec, 0, 0.5), std::out_of_range);
    CHECK_THROWS_AS(jacobian(spec, 0, -0.01), std::out_of_range);
    // bracket and |J - 1| <= c |r|
    for (int p = 0; p < G.size(); ++p) {
        CHECK(G.J[p] >= 0.5);
        CHECK(G.J[p] <= 2.0 * 2.0);
        CHECK(std::abs(G.J[p] - 1.0) <= 3.0 * std::abs(G.r[p]) + 1e-15);
    }
}

TEST_CASE("shell volume")
{
    const Surface S = build_sphere(2);
    for (double eps : {0.25, 0.125, 1.0 / 32}) {
        const ThinDomainSpec spec = make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3::Zero()), eps);
        const BulkGrid G = make_grid(spec, 4);
        const double exact = 4.0 * M_PI / 3.0 * (std::pow(1.0 + eps, 3) - 1.0);
        CHECK(std::abs(integrate_bulk(G, Eigen::VectorXd::Ones(G.size())) - exact) < 1e-12 * exact);
        CHECK(integrate_bulk(G, Eigen::VectorXd::Zero(G.size())) == 0.0);
    }
}

TEST_CASE("norm comparisons across eps")
{
    const Surface S = build_sphere(2);
    const SurfaceField g0 = affine(S, 0.0, Vec3::Zero()), g1 = affine(S, 1.0, Vec3(0, 0, 0.2));
    const SurfaceField eta = smooth_tangent(S, Vec3(0.2, 0.1, -0.3));
    const double l2 = norm(S, eta, NormKind::L2);
    std::vector<double> ce, sob;
    for (int e = 3; e <= 7; ++e) {
        const double eps = std::ldexp(1.0, -e);
        const ThinDomainSpec spec = make_spec(S, g0, g1, eps);
        const BulkGrid G = make_grid(spec, 4);
        const BulkField ext = constant_extension(G, eta);
        // weighted vs unweighted slab integral: factor within [1/c, c], c -> 1
        const double w = bulk_inner(G, ext, ext), u = unweighted_l2_sq(G, ext);
        CHECK(w / u <= 1.0 + 3.0 * 1.2 * eps);
        CHECK(w / u >= 1.0 / (1.0 + 3.0 * 1.2 * eps));
        ce.push_back(bulk_l2(G, ext) / (std::sqrt(eps) * l2));
        sob.push_back(bulk_lp(G, ext, 4.0) / (std::pow(eps, -0.25) * bulk_h1(G, ext)));
        // constant extension has zero normal derivative
        CHECK(max_abs(normal_derivative(G, ext).val) < 1e-12);
    }
    for (size_t i = 0; i < ce.size(); ++i) {
        CHECK(ce[i] > 0.5);
        CHECK(ce[i] < 2.0);
        CHECK(std::abs(sob[i] - sob.back()) < 0.2 * sob.back());
    }
    // bracket tightens towards the sqrt of the mean thickness
    CHECK(std::abs(ce.back() - ce[ce.size() - 2]) < std::abs(ce[0] - ce[1]));
}

TEST_CASE("normal derivatives")
{
    const Surface S = build_sphere(1);
    const ThinDomainSpec spec = make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3::Zero()), 0.1);
    const BulkGrid G = make_grid(spec, 4);
    // phi = r = |x| - 1 with exact gradient
    const BulkField r = sample_bulk(G, [](const Vec3& x) { return x.norm() - 1.0; }, [](const Vec3& x) { return Vec3(x / x.norm()); });
    CHECK(max_abs(normal_derivative(G, r).val.array() - 1.0) < 1e-13);
    // phi = r^2 from values only: differentiation in s is exact for quadratics
    BulkField r2;
    r2.comps = 1;
    r2.val = r.val.array().square();
    const BulkField d = normal_derivative(G, r2);
    CHECK(max_abs(d.val - 2.0 * r.val) < 1e-12);
}

TEST_CASE("nodal gradient and slice jets")
{
    const Surface S = build_sphere(1);
    const ThinDomainSpec spec = make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3(0, 0, 0.2)), 0.1);
    const BulkGrid G = make_grid(spec, 4);
    // quadratic ambient function: exact in both the spectral layer space and in s
    const BulkField f = sample_bulk(G, [](const Vec3& x) { return x[2] + 0.5 * x[0] * x[1]; },
                                    [](const Vec3& x) { return Vec3(0.5 * x[1], 0.5 * x[0], 1.0); });
    const BulkField nodal = bulk_gradient(G, f.val);
    CHECK(max_abs(nodal.grad - f.grad) < 1e-10);
    Eigen::MatrixXd Gs, Us;
    slice_jets(G, f, Gs, Us);
    const BulkField back = from_slice_jets(G, f.val, Gs, Us);
    CHECK(max_abs(back.grad - f.grad) < 1e-12);
}

TEST_CASE("boundary normals")
{
    const Surface S = build_sphere(2);
    SUBCASE("constant g: -n on the inner sheet and +n on the outer")
    {
        const ThinDomainSpec spec = make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3::Zero()), 0.1);
        const SurfaceField n0 = boundary_normal(spec, 0), n1 = boundary_normal(spec, 1);
        CHECK(max_abs(n0.val + S.n.transpose()) < 1e-15);
        CHECK(max_abs(n1.val - S.n.transpose()) < 1e-15);
    }
    SUBCASE("variable g1: unit and orthogonal to the parametrized sheet")
    {
        const double eps = 0.1;
        const ThinDomainSpec spec = make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3(0, 0, 0.2)), eps);
        const SurfaceField n1 = boundary_normal(spec, 1);
        auto sheet = [eps](double t, double ph) {
            const Vec3 y(std::sin(t) * std::cos(ph), std::sin(t) * std::sin(ph), std::cos(t));
            return Vec3((1.0 + eps * (1.0 + 0.2 * y[2])) * y);
        };
        const double h = 1e-5;
        double worst = 0.0, unit = 0.0;
        for (int k = 0; k < S.size(); ++k) {
            const Vec3 y = S.x.col(k);
            const double t = std::acos(y[2]), ph = std::atan2(y[1], y[0]);
            const Vec3 Xt = (sheet(t + h, ph) - sheet(t - h, ph)) / (2 * h);
            const Vec3 Xp = (sheet(t, ph + h) - sheet(t, ph - h)) / (2 * h);
            worst = std::max({worst, std::abs(n1.vec(k).dot(Xt.normalized())), std::abs(n1.vec(k).dot(Xp.normalized()))});
            unit = std::max(unit, std::abs(n1.vec(k).norm() - 1.0));
            CHECK(n1.vec(k).dot(y) > 0.0);
        }
        CHECK(worst < 1e-8);
        CHECK(unit < 1e-14);
    }
}

TEST_CASE("extension E_eps")
{
    const Surface S = build_sphere(2);
    const SurfaceField v = smooth_tangent(S, Vec3(0.3, -0.2, 0.4));
    SUBCASE("constant thickness: E v is the constant extension")
    {
        const ThinDomainSpec spec = make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3::Zero()), 0.1);
        const BulkGrid G = make_grid(spec, 4);
        const BulkField e = extend_E(G, v), c = constant_extension(G, v);
        CHECK(max_abs(e.val - c.val) < 1e-15);
        CHECK(max_abs(e.grad - c.grad) < 1e-13);
        const BulkField z = extend_E(G, SurfaceField{3, true, Eigen::MatrixXd::Zero(S.size(), 3), Eigen::MatrixXd::Zero(S.size(), 9), {}});
        CHECK(max_abs(z.val) == 0.0);
    }
    SUBCASE("variable sheets: tangent to both boundaries")
    {
        const ThinDomainSpec spec = make_spec(S, affine(S, 0.0, Vec3(0.1, 0, 0)), affine(S, 1.0, Vec3(0, 0, 0.2)), 0.1);
        const double scale = max_abs(v.val);
        for (int side : {0, 1}) {
            const BulkGrid sh = sheet_grid(spec, side);
            CHECK(sheet_flux(sh, extend_E(sh, v)) <= 1e-10 * scale);
            // the constant extension is not tangent when grad g_i != 0
            CHECK(sheet_flux(sh, constant_extension(sh, v)) > 1e-4 * scale);
        }
    }
    SUBCASE("non-tangential input is rejected")
    {
        const ThinDomainSpec spec = make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3::Zero()), 0.1);
        const BulkGrid G = make_grid(spec, 2);
        const SurfaceField radial = sample_vector(S, [](const Vec3& x) { return x; });
        CHECK_THROWS_AS(extend_E(G, radial), std::invalid_argument);
    }
}

TEST_CASE("Piola space: divergence-free and tangent by construction")
{
    const Surface S = build_sphere(1);
    const ThinDomainSpec spec = make_spec(S, affine(S, 0.0, Vec3(0.1, 0, 0)), affine(S, 1.0, Vec3(0, 0, 0.2)), 0.1);
    const PiolaSpace V = piola_space(spec, 3);
    const BulkGrid G = make_grid(spec, 4);
    const BulkBasis F = evaluate(V, G);
    REQUIRE(F.size() == V.size());
    for (int c = 0; c < F.size(); c += 5) {
        const BulkField u = field_of(F, Eigen::VectorXd::Unit(F.size(), c));
        CHECK(max_divergence(u) < 1e-11 * max_abs(u.grad));
    }
    for (int side : {0, 1}) {
        const BulkGrid sh = sheet_grid(spec, side);
        const BulkBasis Fs = evaluate(V, sh);
        for (int c = 0; c < Fs.size(); ++c) {
            const BulkField u = field_of(Fs, Eigen::VectorXd::Unit(Fs.size(), c));
            CHECK(sheet_flux(sh, u) < 1e-12 * std::max(1.0, max_abs(u.val)));
        }
    }
}

TEST_CASE("Piola space: analytic jets agree with nodal differentiation")
{
    // fine surface degree, low generator degree: the nodal reference is resolved
    const Surface S = build_sphere(1, 14);
    const ThinDomainSpec spec = make_spec(S, affine(S, 0.0, Vec3(0.1, 0, 0)), affine(S, 1.0, Vec3(0, 0, 0.2)), 0.1);
    const PiolaSpace V = piola_space(spec, 3, 3);
    const BulkGrid G = make_grid(spec, 8);
    const BulkBasis F = evaluate(V, G);
    const int low_stream = 8; // stream generators of degree <= 2
    for (int c = 0; c < F.size(); ++c) {
        if (c >= low_stream && c < V.stream.size())
            continue;
        const BulkField u = field_of(F, Eigen::VectorXd::Unit(F.size(), c));
        Eigen::MatrixXd Ga, Ua, Gn, Un;
        slice_jets(G, u, Ga, Ua);
        slice_jets(G, bulk_gradient(G, u.val), Gn, Un);
        CHECK(max_abs(Ga - Gn) < 1e-7 * max_abs(Ga));
        CHECK(max_abs(Ua - Un) < 1e-6 * max_abs(Ua));
    }
}

TEST_CASE("discrete Leray projection")
{
    const Surface S = build_sphere(1);
    const ThinDomainSpec spec = make_spec(S, affine(S, 0.0, Vec3::Zero()), affine(S, 1.0, Vec3::Zero()), 0.125);
    const PiolaSpace V = piola_space(spec, 3);
    const BulkGrid G = make_grid(spec, 4);
    const BulkBasis F = evaluate(V, G);
    const BulkLeray L = make_leray(G, F);
    SUBCASE("rotations are fixed points")
    {
        for (int a = 0; a < 3; ++a) {
            Eigen::Matrix<double, 6, 1> ab = Eigen::Matrix<double, 6, 1>::Zero();
            ab[a] = 1.0;
            const BulkField w = rigid_field(G, ab);
            const BulkField p = L.apply(w);
            CHECK(bulk_l2(G, p - w) < 1e-10 * bulk_l2(G, w));
            CHECK(max_abs(p.grad - w.grad) < 1e-9);
        }
    }
    SUBCASE("idempotent and annihilates gradients")
    {
        const BulkField u = extend_E(G, smooth_tangent(S, Vec3(0.3, -0.2, 0.4)));
        const BulkField p1 = L.apply(u), p2 = L.apply(p1);
        CHECK(bulk_l2(G, p2 - p1) <= tol::idempotence * bulk_l2(G, p1));
        const BulkField gpsi = [&] {
            BulkField f = BulkField::zero(G.size(), 3);
            for (int p = 0; p < G.size(); ++p) {
                const Vec3 x = G.x.col(p);
                f.val.row(p) << x[1] + 2.0 * x[0] * x[2], x[0], x[0] * x[0] - 0.5;
            }
            return f;
        }();
        CHECK(bulk_l2(G, L.apply(gpsi)) < 1e-10 * bulk_l2(G, gpsi));
    }
}
