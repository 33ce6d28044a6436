#include "thinlim/bulk_solver.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace thinlim {

namespace {

SurfaceField jets(const Surface& S, const SurfaceField& f) { return f.has_grad() ? f : with_jets(S, f); }

Eigen::VectorXd weights3(const BulkGrid& G)
{
    Eigen::VectorXd w(3 * G.size());
    for (int p = 0; p < G.size(); ++p)
        w.segment<3>(3 * p).setConstant(G.w[p]);
    return w;
}

Eigen::VectorXd flatten(const BulkField& f)
{
    Eigen::VectorXd v(3 * f.size());
    for (int p = 0; p < f.size(); ++p)
        v.segment<3>(3 * p) = f.vec(p);
    return v;
}

int dim_intersection(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    if (a.cols() == 0 || b.cols() == 0)
        return 0;
    Eigen::MatrixXd ab(a.rows(), a.cols() + b.cols());
    ab << a, b;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ab);
    svd.setThreshold(1e-8);
    return int(a.cols() + b.cols()) - int(svd.rank());
}

BulkBasis times(const BulkBasis& F, const Eigen::MatrixXd& T)
{
    BulkBasis out;
    out.val = F.val * T;
    out.grad = F.grad * T;
    return out;
}

} // namespace

std::string assumption_name(Assumption a)
{
    switch (a) {
    case Assumption::A1: return "A1";
    case Assumption::A2: return "A2";
    case Assumption::A3: return "A3";
    }
    throw std::logic_error("unknown assumption");
}

Assumption assumption_from_name(const std::string& s)
{
    for (Assumption a : {Assumption::A1, Assumption::A2, Assumption::A3})
        if (assumption_name(a) == s)
            return a;
    throw std::invalid_argument("unknown assumption: " + s);
}

BulkSystem::BulkSystem(const Surface& S, const SurfaceField& g0, const SurfaceField& g1, double eps,
                       const BulkProblem& problem, const BulkSettings& settings)
    : spec_(make_spec(S, jets(S, g0), jets(S, g1), eps, problem.gamma0, problem.gamma1)), problem_(problem)
{
    if (!(problem.nu > 0.0))
        throw std::invalid_argument("viscosity must be positive");
    grid_ = make_grid(spec_, settings.ns);
    sheet_[0] = sheet_grid(spec_, 0);
    sheet_[1] = sheet_grid(spec_, 1);

    switch (problem.assumption) {
    case Assumption::A1:
        if (!(std::max(problem.gamma0, problem.gamma1) > 0.0))
            throw std::invalid_argument("A1 needs a positive friction coefficient");
        break;
    case Assumption::A2:
        if (killing_basis(S, spec_.g, tangent_basis(S)).size() != 0)
            throw std::invalid_argument("A2 fails: the surface carries weighted Killing fields");
        break;
    case Assumption::A3: {
        if (problem.gamma0 != 0.0 || problem.gamma1 != 0.0)
            throw std::invalid_argument("A3 requires zero friction");
        const RigidMotionSpace R = rigid_motions(S, spec_.g0, spec_.g1);
        if (dim_intersection(R.R0, R.R1) != R.Rg.cols())
            throw std::invalid_argument("A3 fails: rigid motions tangent to Gamma_g differ from those tangent to both sheets");
        rigid_ = R.Rg;
        break;
    }
    }

    const PiolaSpace V = piola_space(spec_, settings.modes, settings.mode_degree);
    BulkBasis full = evaluate(V, grid_);
    const int n = full.size();

    // constraints (phi, w_k) = 0 against the removed rigid motions
    Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(n, n);
    if (rigid_.cols() > 0) {
        const Eigen::VectorXd w3 = weights3(grid_);
        Eigen::MatrixXd C(rigid_.cols(), n);
        for (int k = 0; k < rigid_.cols(); ++k) {
            const Eigen::VectorXd wk = flatten(rigid_field(grid_, rigid_.col(k)));
            C.row(k) = (full.val.transpose() * w3.cwiseProduct(wk)).transpose();
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        int rank = 0;
        for (int i = 0; i < sv.size(); ++i)
            if (sv[i] > tol::rank_cut * sv[0])
                ++rank;
        Z = svd.matrixV().rightCols(n - rank);
    }

    const Eigen::MatrixXd M = bulk_mass(grid_, full);
    const Eigen::MatrixXd H = Z.transpose() * (M + bulk_grad_gram(grid_, full)) * Z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const Eigen::VectorXd lam = es.eigenvalues();
    const double cut = tol::rank_cut * lam.maxCoeff();
    int keep = 0;
    for (int i = 0; i < lam.size(); ++i)
        if (lam[i] > cut)
            ++keep;
    const Eigen::MatrixXd T =
        Z * es.eigenvectors().rightCols(keep) * lam.tail(keep).cwiseSqrt().cwiseInverse().asDiagonal();

    const Eigen::MatrixXd Ks = bulk_strain_gram(grid_, full);
    A_ = 2.0 * problem.nu * T.transpose() * Ks * T;
    mass_ = T.transpose() * M * T;
    basis_ = times(full, T);
    full = BulkBasis{};
    const double gam[2] = {problem.gamma0, problem.gamma1};
    for (int i = 0; i < 2; ++i) {
        sheet_basis_[i] = times(evaluate(V, sheet_[i]), T);
        if (gam[i] != 0.0)
            A_ += gam[i] * bulk_mass(sheet_[i], sheet_basis_[i]);
    }
    A_ = 0.5 * (A_ + A_.transpose()).eval();
    mass_ = 0.5 * (mass_ + mass_.transpose()).eval();
    mass_ldlt_.compute(mass_);
}

Eigen::VectorXd BulkSystem::load(const BulkField& f) const
{
    if (f.comps != 3 || f.size() != grid_.size())
        throw std::invalid_argument("forcing must be a vector field on the volume grid");
    return basis_.val.transpose() * weights3(grid_).cwiseProduct(flatten(f));
}

Eigen::MatrixXd BulkSystem::convection(const Eigen::VectorXd& c) const
{
    const int Nb = grid_.size(), m = size();
    const Eigen::VectorXd u = basis_.val * c;
    // X_i = (u . grad) phi_i
    Eigen::MatrixXd X(3 * Nb, m);
    for (int p = 0; p < Nb; ++p)
        for (int b = 0; b < 3; ++b)
            X.row(3 * p + b) = u[3 * p] * basis_.grad.row(9 * p + b) + u[3 * p + 1] * basis_.grad.row(9 * p + 3 + b) +
                               u[3 * p + 2] * basis_.grad.row(9 * p + 6 + b);
    return -X.transpose() * weights3(grid_).asDiagonal() * basis_.val;
}

Eigen::VectorXd BulkSystem::residual(const Eigen::VectorXd& c, const Eigen::VectorXd& F) const
{
    return A_ * c + convection(c) * c - F;
}

SampledField BulkSystem::trace(const Eigen::VectorXd& c) const
{
    SampledField s;
    s.vol = field(c);
    s.sheet[0] = field_of(sheet_basis_[0], c);
    s.sheet[1] = field_of(sheet_basis_[1], c);
    return s;
}

Eigen::VectorXd BulkSystem::project(const BulkField& f) const { return mass_ldlt_.solve(load(f)); }

double BulkSystem::rigid_defect(const BulkField& f) const
{
    const double fn = bulk_l2(grid_, f);
    if (fn == 0.0)
        return 0.0;
    double worst = 0.0;
    for (int k = 0; k < rigid_.cols(); ++k) {
        const BulkField w = rigid_field(grid_, rigid_.col(k));
        worst = std::max(worst, std::abs(bulk_inner(grid_, f, w)) / (fn * bulk_l2(grid_, w)));
    }
    return worst;
}

std::pair<double, double> BulkSystem::coercivity() const
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A_, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

BulkSolution solve_bulk(const BulkSystem& sys, const BulkField& f, const Eigen::VectorXd& initial,
                        const BulkSettings& settings)
{
    const int n = sys.size();
    const Eigen::VectorXd F = sys.load(f);
    if (!F.allFinite())
        throw std::invalid_argument("forcing is not finite");
    if (const double d = sys.rigid_defect(f); d > tol::compat) {
        std::ostringstream os;
        os << "forcing not orthogonal to the rigid motions R_g (relative defect " << d << ")";
        throw std::invalid_argument(os.str());
    }
    Eigen::VectorXd c = initial.size() == n ? initial : Eigen::VectorXd::Zero(n);
    BulkSolution out;
    const double fn = F.norm();
    int growth = 0;
    if (fn == 0.0 && initial.size() != n) {
        c.setZero();
        out.converged = true;
        out.residuals.push_back(0.0);
    }
    for (int it = 0; it < settings.max_iter && !out.converged; ++it) {
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.A() + sys.convection(c));
        const Eigen::VectorXd next = lu.solve(F);
        if (!next.allFinite())
            throw std::runtime_error("linear solve failed in Picard step");
        c = next;
        const double r = fn > 0.0 ? sys.residual(c, F).norm() / fn : sys.residual(c, F).norm();
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
    out.u = sys.field(c);
    out.h1 = bulk_h1(sys.grid(), out.u);
    out.h2 = bulk_h2_proxy(sys.grid(), out.u);
    const SampledField tr = sys.trace(c);
    out.tangency = std::max(sheet_flux(sys.sheet(0), tr.sheet[0]), sheet_flux(sys.sheet(1), tr.sheet[1]));
    out.divergence = max_divergence(out.u);
    out.rigid_defect = sys.rigid_defect(out.u);
    const double fu = c.dot(F);
    out.energy_defect = fu != 0.0 ? std::abs(c.dot(sys.A() * c) - fu) / std::abs(fu) : 0.0;
    return out;
}

double apply_a_eps(const BulkSystem& sys, const SampledField& u1, const SampledField& u2)
{
    const BulkGrid& G = sys.grid();
    double a = 0.0;
    for (int p = 0; p < G.size(); ++p) {
        const Mat3 D1 = sym(u1.vol.jac(p)), D2 = sym(u2.vol.jac(p));
        a += G.w[p] * (D1.array() * D2.array()).sum();
    }
    a *= 2.0 * sys.problem().nu;
    const double gam[2] = {sys.problem().gamma0, sys.problem().gamma1};
    for (int i = 0; i < 2; ++i)
        if (gam[i] != 0.0)
            a += gam[i] * bulk_inner(sys.sheet(i), u1.sheet[i], u2.sheet[i]);
    return a;
}

double apply_b_eps(const BulkGrid& grid, const BulkField& u1, const BulkField& u2, const BulkField& u3)
{
    double b = 0.0;
    for (int p = 0; p < grid.size(); ++p)
        b -= grid.w[p] * u2.vec(p).dot(u3.jac(p).transpose() * u1.vec(p));
    return b;
}

std::vector<Eigen::VectorXd> random_solenoidal_corpus(const BulkSystem& sys, int count, std::uint64_t seed)
{
    const BulkGrid& G = sys.grid();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<Eigen::VectorXd> out;
    for (int i = 0; i < count; ++i) {
        Vec3 k;
        Mat3 A;
        for (int j = 0; j < 3; ++j)
            k[j] = nd(rng);
        for (int j = 0; j < 9; ++j)
            A(j) = nd(rng);
        BulkField f = BulkField::zero(G.size(), 3);
        for (int p = 0; p < G.size(); ++p) {
            const Vec3 x = G.x.col(p);
            f.val.row(p) = (A * x * std::exp(0.5 * k.dot(x))).transpose();
        }
        out.push_back(sys.project(f));
    }
    return out;
}

FormIdentityReport check_form_identities(const BulkSystem& sys, const std::vector<Eigen::VectorXd>& corpus)
{
    const BulkGrid& G = sys.grid();
    auto scale = [&](const BulkField& a, const BulkField& b, const BulkField& c) {
        double s = 0.0;
        for (int p = 0; p < G.size(); ++p)
            s += G.w[p] * std::abs(b.vec(p).dot(c.jac(p).transpose() * a.vec(p)));
        return s;
    };
    FormIdentityReport r;
    r.fields = int(corpus.size());
    std::vector<SampledField> rot(3);
    for (int i = 0; i < 3; ++i) {
        Eigen::Matrix<double, 6, 1> ab = Eigen::Matrix<double, 6, 1>::Zero();
        ab[i] = 1.0;
        rot[i].vol = rigid_field(G, ab);
        rot[i].sheet[0] = rigid_field(sys.sheet(0), ab);
        rot[i].sheet[1] = rigid_field(sys.sheet(1), ab);
    }
    for (size_t i = 0; i < corpus.size(); ++i) {
        const SampledField u = sys.trace(corpus[i]);
        const BulkField v = sys.field(corpus[(i + 1) % corpus.size()]);
        if (const double s = scale(u.vol, v, v); s > 0.0)
            r.b_antisym = std::max(r.b_antisym, std::abs(apply_b_eps(G, u.vol, v, v)) / s);
        const double un = bulk_h1(G, u.vol);
        for (const SampledField& w : rot) {
            r.a_rotation = std::max(r.a_rotation, std::abs(apply_a_eps(sys, u, w)) / (un * bulk_h1(G, w.vol)));
            if (const double s = scale(u.vol, w.vol, u.vol); s > 0.0)
                r.b_rotation = std::max(r.b_rotation, std::abs(apply_b_eps(G, u.vol, u.vol, w.vol)) / s);
        }
    }
    return r;
}

AprioriSample apriori_sample(const BulkSystem& sys, const BulkSolution& sol)
{
    AprioriSample s;
    s.eps = sys.spec().eps;
    s.h1 = sol.h1;
    s.h2 = sol.h2;
    s.normal_average = norm(sys.surface(), normal_component(sys.surface(), average_M(sys.grid(), sol.u)), NormKind::H1);
    return s;
}

AprioriReport verify_apriori(const std::vector<AprioriSample>& samples, double alpha, double slack)
{
    if (samples.size() < 3)
        throw std::invalid_argument("a-priori sweep needs at least 3 eps values");
    AprioriReport r;
    r.alpha = alpha;
    r.target_h1 = 0.5;
    r.target_h2 = 0.5 * (alpha - 1.0);
    r.target_normal = 0.5 * alpha;
    double top = 0.0, top_normal = 0.0;
    for (const AprioriSample& s : samples) {
        top_normal = std::max(top_normal, s.normal_average);
        r.eps.push_back(s.eps);
        r.h1.push_back(s.h1);
        r.h2.push_back(s.h2);
        r.normal_average.push_back(s.normal_average);
        top = std::max(top, s.h1);
    }
    if (top <= tol::exact_zero) {
        r.exact_zero = true;
        r.pass = true;
        return r;
    }
    r.fit_h1 = fit_rate(r.eps, r.h1);
    r.fit_h2 = fit_rate(r.eps, r.h2);
    r.normal_zero = top_normal <= tol::exact_zero * top;
    if (!r.normal_zero)
        r.fit_normal = fit_rate(r.eps, r.normal_average);
    r.pass = r.fit_h1.exponent >= r.target_h1 - slack && r.fit_h2.exponent >= r.target_h2 - slack &&
             (r.normal_zero || r.fit_normal.exponent >= r.target_normal - slack);
    return r;
}

AverageReport verify_boundary_lemma(const Surface& S, const SurfaceField& g0, const SurfaceField& g1,
                                    const std::vector<double>& eps, const Corpus& corpus,
                                    const AverageSettings& settings)
{
    return verify_average_bounds(S, g0, g1, eps, corpus, AverageLemma::boundary_derivative, settings);
}

} // namespace thinlim
