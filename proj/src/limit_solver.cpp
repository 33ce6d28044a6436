#include "thinlim/limit_solver.hpp"

#include "thinlim/constants.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace thinlim {

namespace {

Eigen::VectorXd nodal_weights3(const Surface& S, const SurfaceField& g)
{
    Eigen::VectorXd d(3 * S.size());
    for (int k = 0; k < S.size(); ++k)
        d.segment<3>(3 * k).setConstant(S.w[k] * g.val(k, 0));
    return d;
}

// (v . grad) phi_i for every column, stacked as 3N x n
Eigen::MatrixXd transport(const FieldSet& F, const Eigen::VectorXd& v)
{
    const int N = int(F.val.rows() / 3);
    Eigen::MatrixXd X(3 * N, F.size());
    for (int k = 0; k < N; ++k)
        for (int b = 0; b < 3; ++b)
            X.row(3 * k + b) = v[3 * k] * F.grad.row(9 * k + b) + v[3 * k + 1] * F.grad.row(9 * k + 3 + b) +
                               v[3 * k + 2] * F.grad.row(9 * k + 6 + b);
    return X;
}

} // namespace

double apply_a_g(const Surface& S, const LimitProblem& p, const SurfaceField& v1, const SurfaceField& v2)
{
    const SurfaceField a = v1.has_grad() ? v1 : with_jets(S, v1);
    const SurfaceField b = v2.has_grad() ? v2 : with_jets(S, v2);
    return assemble_a_g(S, p, fieldset_of({a, b}))(0, 1);
}

double apply_b_g(const Surface& S, const SurfaceField& g, const SurfaceField& v1, const SurfaceField& v2, const SurfaceField& v3)
{
    const SurfaceField c = v3.has_grad() ? v3 : with_jets(S, v3);
    double s = 0.0;
    for (int k = 0; k < S.size(); ++k)
        s -= S.w[k] * g.val(k, 0) * v1.vec(k).dot(c.jac(k) * v2.vec(k));
    return s;
}

Eigen::MatrixXd assemble_a_g(const Surface& S, const LimitProblem& p, const FieldSet& F)
{
    const Eigen::VectorXd gv = p.g.val.col(0);
    const Eigen::VectorXd ginv = gv.cwiseInverse();
    Eigen::MatrixXd A = 2.0 * p.nu * (gram_korn(S, F, &gv) + gram_gradg(S, F, p.g, &ginv));
    if (p.gamma0 + p.gamma1 != 0.0)
        A += (p.gamma0 + p.gamma1) * gram_l2(S, F);
    return A;
}

Eigen::VectorXd assemble_load(const Surface& S, const LimitProblem& p, const FieldSet& F)
{
    Eigen::VectorXd L = Eigen::VectorXd::Zero(F.size());
    for (int k = 0; k < S.size(); ++k)
        L += S.w[k] * p.g.val(k, 0) * (F.val.middleRows<3>(3 * k).transpose() * p.f.vec(k));
    if (p.f_grad) {
        const SurfaceField& q = *p.f_grad;
        for (int k = 0; k < S.size(); ++k) {
            const Vec3 dg = p.g.dvec(k);
            for (int c = 0; c < F.size(); ++c) {
                const double div = F.grad(9 * k, c) + F.grad(9 * k + 4, c) + F.grad(9 * k + 8, c);
                const double divg = dg.dot(F.val.block<3, 1>(3 * k, c)) + p.g.val(k, 0) * div;
                L[c] -= S.w[k] * q.val(k, 0) * divg;
            }
        }
    }
    return L;
}

Eigen::MatrixXd LimitSystem::convection(const Eigen::VectorXd& c) const
{
    const Eigen::VectorXd v = basis.val * c;
    const Eigen::MatrixXd X = transport(basis, v);
    return -X.transpose() * nodal_weights3(*S, problem.g).asDiagonal() * basis.val;
}

Eigen::VectorXd LimitSystem::weak_form(const SurfaceField& v) const
{
    const SurfaceField e = v.has_grad() ? v : with_jets(*S, v);
    FieldSet one = fieldset_of({e});
    Eigen::VectorXd out(basis.size());
    FieldSet both;
    both.val.resize(basis.val.rows(), basis.size() + 1);
    both.grad.resize(basis.grad.rows(), basis.size() + 1);
    both.val << basis.val, one.val;
    both.grad << basis.grad, one.grad;
    const Eigen::MatrixXd Aall = assemble_a_g(*S, problem, both);
    out = Aall.col(basis.size()).head(basis.size());
    // b(v, v, phi_i) = -(g v, (grad phi_i) v)
    const int N = S->size();
    Eigen::VectorXd uv(9 * N);
    for (int k = 0; k < N; ++k)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                uv[9 * k + 3 * a + b] = S->w[k] * problem.g.val(k, 0) * e.val(k, a) * e.val(k, b);
    out -= basis.grad.transpose() * uv;
    return out;
}

Eigen::VectorXd LimitSystem::residual(const Eigen::VectorXd& c) const { return F - A * c - convection(c) * c; }

PoissonResult weighted_poisson(const Surface& S, const SurfaceField& g, const SurfaceField& eta)
{
    if (eta.comps != 1)
        throw std::invalid_argument("weighted_poisson expects a scalar right-hand side");
    const double mean = integrate(S, eta);
    const double mass = S.w.dot(eta.val.col(0).cwiseAbs());
    if (std::abs(mean) > tol::mean_zero * std::max(mass, 1e-300) && std::abs(mean) > 1e-300)
        throw std::invalid_argument("weighted_poisson: right-hand side must have zero mean");
    const ScalarBasis& B = S.basis;
    const int N = S.size(), m = B.size() - 1;
    const Eigen::VectorXd rhs = B.val.rightCols(m).transpose() * S.w.cwiseProduct(eta.val.col(0));
    const Eigen::MatrixXd K = weighted_stiffness(S, g);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("weighted Poisson solve failed");
    const Eigen::VectorXd c = ldlt.solve(rhs);
    PoissonResult out;
    out.q = SurfaceField::scalar(N);
    out.q.val.col(0) = B.val.rightCols(m) * c;
    const Eigen::VectorXd gq = B.grad.rightCols(m) * c, hq = B.hess.rightCols(m) * c;
    out.q.grad.resize(N, 3);
    out.q.hess.resize(N, 9);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < N; ++k) {
        out.q.grad.row(k) = gq.segment<3>(3 * k).transpose();
        out.q.hess.row(k) = hq.segment<9>(9 * k).transpose();
        const double lap = hq[9 * k] + hq[9 * k + 4] + hq[9 * k + 8];
        const double lhs = -(g.dvec(k).dot(gq.segment<3>(3 * k)) + g.val(k, 0) * lap);
        num += S.w[k] * std::pow(lhs - eta.val(k, 0), 2);
        den += S.w[k] * std::pow(eta.val(k, 0), 2);
    }
    const double rn = rhs.norm();
    out.weak_residual = rn > 0.0 ? (K * c - rhs).norm() / rn : 0.0;
    out.strong_residual = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    return out;
}

LimitSystem build_limit_system(const Surface& S, const LimitProblem& p, const TangentBasis& T)
{
    LimitSystem sys;
    sys.S = &S;
    sys.problem = p;
    sys.problem.g = ensure_jets(S, p.g);
    sys.killing = killing_basis(S, sys.problem.g, T);
    const bool constrain = p.gamma0 == 0.0 && p.gamma1 == 0.0 && sys.killing.size() > 0;
    sys.basis = weighted_solenoidal_basis(S, sys.problem.g, constrain ? &sys.killing : nullptr);
    sys.A = assemble_a_g(S, sys.problem, sys.basis);
    sys.F = assemble_load(S, sys.problem, sys.basis);
    return sys;
}

Eigen::VectorXd compatibility(const Surface& S, const LimitProblem& p, const KillingBasis& K)
{
    LimitProblem q = p;
    q.g = ensure_jets(S, p.g);
    return assemble_load(S, q, K.fields);
}

double estimate_c_a(const LimitSystem& sys)
{
    const Eigen::MatrixXd As = 0.5 * (sys.A + sys.A.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(As, Eigen::EigenvaluesOnly);
    return 1.0 / es.eigenvalues()[0];
}

double estimate_c_b(const LimitSystem& sys, std::uint64_t seed, int starts)
{
    const FieldSet& F = sys.basis;
    const Surface& S = *sys.S;
    const int N = S.size(), n = F.size();
    const Eigen::VectorXd d3 = nodal_weights3(S, sys.problem.g);
    Eigen::VectorXd d9(9 * N);
    for (int k = 0; k < N; ++k)
        d9.segment<9>(9 * k).setConstant(S.w[k] * sys.problem.g.val(k, 0));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    double best = 0.0;
    for (int s = 0; s < starts; ++s) {
        Eigen::VectorXd cu(n), cv(n), cw(n);
        for (int i = 0; i < n; ++i) {
            cu[i] = nd(rng);
            cv[i] = nd(rng);
            cw[i] = nd(rng);
        }
        cu.normalize();
        cv.normalize();
        cw.normalize();
        double val = 0.0;
        for (int it = 0; it < 40; ++it) {
            const Eigen::VectorXd v = F.val * cv, gw = F.grad * cw;
            // first slot: r_i = -(g phi_i, (grad w) v)
            Eigen::VectorXd t(3 * N);
            for (int k = 0; k < N; ++k)
                for (int a = 0; a < 3; ++a)
                    t[3 * k + a] = gw[9 * k + 3 * a] * v[3 * k] + gw[9 * k + 3 * a + 1] * v[3 * k + 1] + gw[9 * k + 3 * a + 2] * v[3 * k + 2];
            Eigen::VectorXd r = -F.val.transpose() * d3.cwiseProduct(t);
            if (r.norm() == 0.0)
                break;
            cu = r.normalized();
            const Eigen::VectorXd u2 = F.val * cu;
            for (int k = 0; k < N; ++k)
                for (int b = 0; b < 3; ++b)
                    t[3 * k + b] = u2[3 * k] * gw[9 * k + b] + u2[3 * k + 1] * gw[9 * k + 3 + b] + u2[3 * k + 2] * gw[9 * k + 6 + b];
            r = -F.val.transpose() * d3.cwiseProduct(t);
            if (r.norm() == 0.0)
                break;
            cv = r.normalized();
            const Eigen::VectorXd v2 = F.val * cv;
            Eigen::VectorXd uv(9 * N);
            for (int k = 0; k < N; ++k)
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b)
                        uv[9 * k + 3 * a + b] = u2[3 * k + a] * v2[3 * k + b];
            r = -F.grad.transpose() * d9.cwiseProduct(uv);
            val = r.norm();
            if (val == 0.0)
                break;
            cw = r / val;
        }
        best = std::max(best, val);
    }
    return best;
}

LimitSolution solve_limit(const LimitSystem& sys, const Eigen::VectorXd& initial, const LimitSettings& settings)
{
    const int n = sys.basis.size();
    Eigen::VectorXd c = initial.size() == n ? initial : Eigen::VectorXd::Zero(n);
    LimitSolution out;
    const double fn = sys.F.norm();
    int growth = 0;
    for (int it = 0; it < settings.max_iter; ++it) {
        const Eigen::MatrixXd M = sys.A + sys.convection(c);
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
        const Eigen::VectorXd next = lu.solve(sys.F);
        if (!next.allFinite())
            throw std::runtime_error("linear solve failed in Picard step");
        c = next;
        const double r = fn > 0.0 ? sys.residual(c).norm() / fn : sys.residual(c).norm();
        if (!out.residuals.empty() && r > out.residuals.back())
            ++growth;
        else
            growth = 0;
        out.residuals.push_back(r);
        if (r < settings.tol) {
            out.converged = true;
            break;
        }
        if (growth >= settings.growth_window) {
            std::ostringstream os;
            os << "Picard divergence: residual grew for " << growth << " iterations (last " << r << ")";
            throw std::runtime_error(os.str());
        }
    }
    out.coeffs = c;
    out.v = sys.field(c);
    out.h1 = c.norm();
    out.c_a = estimate_c_a(sys);
    out.c_b = estimate_c_b(sys, settings.seed, settings.probe_starts);
    out.rho_u = out.c_b > 0.0 ? 1.0 / (out.c_a * out.c_b) : INFINITY;
    out.inside_ball = out.h1 < out.rho_u;
    return out;
}

SurfaceField divergence_repair(const Surface& S, const SurfaceField& g, const SurfaceField& v) { return weighted_leray(S, g, v); }

SurfaceField killing_correct(const Surface& S, const SurfaceField& g, const KillingBasis& K, const SurfaceField& v)
{
    return project_Hg(S, g, K, v);
}

} // namespace thinlim
