#include "thinlim/averaging.hpp"

#include "thinlim/constants.hpp"
#include "thinlim/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace thinlim {

namespace {

SurfaceField jets(const Surface& S, const SurfaceField& f) { return f.has_grad() ? f : with_jets(S, f); }

// sum_p w_p |f_p|^2 for nodal vectors or matrices flattened row-wise
double weighted_sq(const Eigen::VectorXd& w, const Eigen::MatrixXd& rows) { return w.dot(rows.rowwise().squaredNorm()); }

double surface_l2(const Surface& S, const Eigen::MatrixXd& rows) { return std::sqrt(weighted_sq(S.w, rows)); }

} // namespace

SurfaceField normal_component(const Surface& S, const SurfaceField& m)
{
    SurfaceField out = SurfaceField::scalar(S.size());
    out.grad.resize(S.size(), 3);
    for (int k = 0; k < S.size(); ++k) {
        const Vec3 n = S.n.col(k), mk = m.vec(k);
        out.val(k, 0) = mk.dot(n);
        const Mat3 D = m.jac(k);
        out.grad.row(k) = (D * n - S.W[k] * mk).transpose();
    }
    return out;
}

namespace {

SampledField on_all(const LemmaContext& ctx, const std::function<BulkField(const BulkGrid&)>& f)
{
    SampledField s;
    s.vol = f(ctx.volume());
    s.sheet[0] = f(ctx.sheet(0));
    s.sheet[1] = f(ctx.sheet(1));
    return s;
}

SurfaceField smooth_tangent(const Surface& S, const Vec3& dir, const Vec3& k)
{
    SurfaceField v = SurfaceField::vector(S.size());
    for (int i = 0; i < S.size(); ++i)
        v.val.row(i) = (S.P(i) * dir * std::exp(k.dot(Vec3(S.x.col(i))))).transpose();
    v.tangential = true;
    return with_jets(S, v);
}

SurfaceField ambient_vector(const Surface& S)
{
    return with_jets(S, sample_vector(S, [](const Vec3& x) { return Vec3(1.0 + x[0], x[1] * x[1], 0.5 - x[2]); }));
}

// (1 - r W) v + r psi n: slip on r = 0 when g0 = 0
BulkField slip_field(const BulkGrid& grid, const SurfaceField& v, const SurfaceField& psi)
{
    const ThinDomainSpec& spec = *grid.spec;
    const Surface& S = *spec.S;
    const int Nb = grid.size();
    Eigen::MatrixXd val(Nb, 3), G(Nb, 9), Us(Nb, 3);
    for (int p = 0; p < Nb; ++p) {
        const int k = grid.surf(p);
        const double r = grid.r[p], ps = psi.val(k, 0);
        const Vec3 n = S.n.col(k), vk = v.vec(k), rho = grid.rho.col(p), dpsi = psi.dvec(k);
        const Mat3& W = S.W[k];
        const Mat3 Dv = v.jac(k);
        const Vec3 Wv = W * vk;
        val.row(p) = (vk - r * Wv + r * ps * n).transpose();
        for (int i = 0; i < 3; ++i) {
            const Vec3 dWv = S.dW[k][i] * vk + W * Dv.row(i).transpose();
            const Vec3 gi = Dv.row(i).transpose() - rho[i] * Wv - r * dWv + (rho[i] * ps + r * dpsi[i]) * n -
                            r * ps * W.row(i).transpose();
            for (int j = 0; j < 3; ++j)
                G(p, 3 * i + j) = gi[j];
        }
        Us.row(p) = (spec.eps * spec.g.val(k, 0) * (-Wv + ps * n)).transpose();
    }
    return from_slice_jets(grid, val, G, Us);
}

double rel_flux(const BulkGrid& sheet, const BulkField& u)
{
    const double scale = std::max(u.val.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    return sheet_flux(sheet, u) / scale;
}

// max |P_eps D(u) n_eps + gamma u| relative to max |grad u|
double slip_defect(const BulkGrid& sheet, const BulkField& u, double nu, double gamma)
{
    double worst = 0.0;
    const double scale = std::max(u.grad.cwiseAbs().maxCoeff() + u.val.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    for (int p = 0; p < sheet.size(); ++p) {
        const Vec3 ne = sheet.normal.col(p);
        const Mat3 D = sym<double>(u.jac(p));
        const Vec3 t = projector<double>(ne) * (2.0 * nu * D * ne + gamma * u.vec(p));
        worst = std::max(worst, t.norm());
    }
    return worst / scale;
}

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

} // namespace

SurfaceField average_M(const BulkGrid& grid, const BulkField& u)
{
    const int c = u.comps, N = grid.N;
    SurfaceField m = c == 1 ? SurfaceField::scalar(N) : SurfaceField::vector(N);
    m.comps = c;
    m.val = Eigen::MatrixXd::Zero(N, c);
    for (int k = 0; k < N; ++k)
        for (int q = 0; q < grid.ns; ++q)
            m.val.row(k) += grid.ws[q] * u.val.row(grid.node(k, q));
    if (u.has_grad()) {
        Eigen::MatrixXd G, Us;
        slice_jets(grid, u, G, Us);
        m.grad = Eigen::MatrixXd::Zero(N, 3 * c);
        for (int k = 0; k < N; ++k)
            for (int q = 0; q < grid.ns; ++q)
                m.grad.row(k) += grid.ws[q] * G.row(grid.node(k, q));
    }
    return m;
}

SurfaceField tangential_part(const Surface& S, const SurfaceField& m)
{
    if (m.comps != 3)
        throw std::invalid_argument("tangential_part expects a vector field");
    SurfaceField t = SurfaceField::vector(S.size());
    t.tangential = true;
    const bool jet = m.has_grad();
    if (jet)
        t.grad.resize(S.size(), 9);
    for (int k = 0; k < S.size(); ++k) {
        const Vec3 n = S.n.col(k), mk = m.vec(k);
        const double mn = n.dot(mk);
        t.val.row(k) = (mk - mn * n).transpose();
        if (!jet)
            continue;
        const Mat3 D = m.jac(k), W = S.W[k];
        const Vec3 dmn = D * n - W * mk;
        const Mat3 Dt = D - dmn * n.transpose() + mn * W;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                t.grad(k, 3 * i + j) = Dt(i, j);
    }
    return t;
}

SurfaceField average_Mtau(const BulkGrid& grid, const BulkField& u) { return tangential_part(*grid.spec->S, average_M(grid, u)); }

BulkField profile_extension(const BulkGrid& grid, const SurfaceField& eta, const std::function<double(double)>& a,
                            const std::function<double(double)>& da)
{
    const SurfaceField e = jets(*grid.spec->S, eta);
    const int c = e.comps, Nb = grid.size();
    Eigen::MatrixXd val(Nb, c), G(Nb, 3 * c), Us(Nb, c);
    for (int p = 0; p < Nb; ++p) {
        const int k = grid.surf(p);
        const double s = grid.s[grid.layer(p)];
        val.row(p) = a(s) * e.val.row(k);
        G.row(p) = a(s) * e.grad.row(k).head(3 * c);
        Us.row(p) = da(s) * e.val.row(k);
    }
    return from_slice_jets(grid, val, G, Us);
}

SurfaceField normal_field(const Surface& S, const SurfaceField& psi)
{
    const SurfaceField e = jets(S, psi);
    SurfaceField out = SurfaceField::vector(S.size());
    out.grad.resize(S.size(), 9);
    for (int k = 0; k < S.size(); ++k) {
        const Vec3 n = S.n.col(k);
        out.val.row(k) = (e.val(k, 0) * n).transpose();
        const Mat3 D = e.dvec(k) * n.transpose() - e.val(k, 0) * S.W[k];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                out.grad(k, 3 * i + j) = D(i, j);
    }
    return out;
}

const std::vector<AverageLemma>& all_average_lemmas()
{
    static const std::vector<AverageLemma> all = {
        AverageLemma::average_bound,        AverageLemma::average_bound_h1,      AverageLemma::normal_average,
        AverageLemma::normal_average_h1,    AverageLemma::average_difference,    AverageLemma::average_difference_h1,
        AverageLemma::near_adjoint,         AverageLemma::average_divergence,    AverageLemma::normal_derivative_trace,
        AverageLemma::inner_product,        AverageLemma::rigid_orthogonal,      AverageLemma::leray_extension,
        AverageLemma::boundary_derivative,
    };
    return all;
}

std::string lemma_name(AverageLemma l)
{
    switch (l) {
    case AverageLemma::average_bound: return "average_bound";
    case AverageLemma::average_bound_h1: return "average_bound_h1";
    case AverageLemma::normal_average: return "normal_average";
    case AverageLemma::normal_average_h1: return "normal_average_h1";
    case AverageLemma::average_difference: return "average_difference";
    case AverageLemma::average_difference_h1: return "average_difference_h1";
    case AverageLemma::near_adjoint: return "near_adjoint";
    case AverageLemma::average_divergence: return "average_divergence";
    case AverageLemma::normal_derivative_trace: return "normal_derivative_trace";
    case AverageLemma::inner_product: return "inner_product";
    case AverageLemma::rigid_orthogonal: return "rigid_orthogonal";
    case AverageLemma::leray_extension: return "leray_extension";
    case AverageLemma::boundary_derivative: return "boundary_derivative";
    }
    throw std::logic_error("unknown estimate");
}

AverageLemma lemma_from_name(const std::string& name)
{
    for (AverageLemma l : all_average_lemmas())
        if (lemma_name(l) == name)
            return l;
    throw std::invalid_argument("unknown estimate: " + name);
}

double lemma_exponent(AverageLemma l)
{
    switch (l) {
    case AverageLemma::average_bound:
    case AverageLemma::average_bound_h1: return -0.5;
    case AverageLemma::normal_average:
    case AverageLemma::normal_average_h1:
    case AverageLemma::average_divergence:
    case AverageLemma::rigid_orthogonal: return 0.5;
    case AverageLemma::average_difference:
    case AverageLemma::average_difference_h1:
    case AverageLemma::near_adjoint:
    case AverageLemma::normal_derivative_trace:
    case AverageLemma::boundary_derivative: return 1.0;
    case AverageLemma::inner_product:
    case AverageLemma::leray_extension: return 1.5;
    }
    throw std::logic_error("unknown estimate");
}

std::vector<CorpusFamily> lemma_families(AverageLemma l)
{
    using F = CorpusFamily;
    switch (l) {
    case AverageLemma::average_bound:
    case AverageLemma::average_bound_h1:
    case AverageLemma::near_adjoint:
    case AverageLemma::inner_product:
    case AverageLemma::rigid_orthogonal: return {F::constant, F::general, F::extension, F::perturbed};
    case AverageLemma::normal_average:
    case AverageLemma::normal_average_h1:
    case AverageLemma::average_difference:
    case AverageLemma::average_difference_h1: return {F::extension, F::perturbed};
    case AverageLemma::average_divergence:
    case AverageLemma::normal_derivative_trace:
    case AverageLemma::leray_extension: return {F::leray};
    case AverageLemma::boundary_derivative: return {F::slip};
    }
    throw std::logic_error("unknown estimate");
}

// ---------------------------------------------------------------------------------------------
// context

struct LemmaContext::Projection {
    std::mutex lock;
    bool built = false;
    PiolaSpace V;
    BulkBasis vol, s0, s1;
    BulkLeray L;
};

LemmaContext::LemmaContext(const Surface& S, const SurfaceField& g0, const SurfaceField& g1, double eps,
                           const AverageSettings& settings)
    : spec_(make_spec(S, jets(S, g0), jets(S, g1), eps)), settings_(settings), proj_(std::make_shared<Projection>())
{
    volume_ = make_grid(spec_, settings.ns);
    sheet_[0] = sheet_grid(spec_, 0);
    sheet_[1] = sheet_grid(spec_, 1);
}

void LemmaContext::leray(const BulkField& u, BulkField& vol, BulkField& s0, BulkField& s1) const
{
    Projection& P = *proj_;
    {
        std::lock_guard<std::mutex> g(P.lock);
        if (!P.built) {
            P.V = piola_space(spec_, settings_.modes, settings_.mode_degree);
            P.vol = evaluate(P.V, volume_);
            P.s0 = evaluate(P.V, sheet_[0]);
            P.s1 = evaluate(P.V, sheet_[1]);
            P.L = make_leray(volume_, P.vol);
            P.built = true;
        }
    }
    const Eigen::VectorXd c = P.L.coeffs(u);
    vol = field_of(P.vol, c);
    s0 = field_of(P.s0, c);
    s1 = field_of(P.s1, c);
}

// ---------------------------------------------------------------------------------------------
// corpus

Corpus default_corpus(const Surface& S, const SurfaceField& g)
{
    const SurfaceField gj = jets(S, g);
    const SurfaceField eta1 = smooth_tangent(S, Vec3(1.0, -0.5, 0.25), Vec3(0.3, -0.2, 0.4));
    const SurfaceField eta2 = smooth_tangent(S, Vec3(-0.2, 0.7, 0.4), Vec3(-0.1, 0.5, 0.2));
    const SurfaceField amb = ambient_vector(S);
    const SurfaceField psi = sample(S, AmbientScalar::exponential(Vec3(0.2, 0.4, -0.3)));
    const SurfaceField nrm = normal_field(S, psi);
    SurfaceField zeta = eta2;
    zeta.val += nrm.val;
    zeta.grad += nrm.grad;
    zeta.tangential = false;

    Corpus C;
    auto add = [&C](std::string name, CorpusFamily fam, std::function<BulkField(const BulkGrid&)> f) {
        C.push_back({std::move(name), fam, [f](const LemmaContext& ctx) { return on_all(ctx, f); }});
    };
    add("constant_tangent_1", CorpusFamily::constant, [=](const BulkGrid& G) { return constant_extension(G, eta1); });
    add("constant_tangent_2", CorpusFamily::constant, [=](const BulkGrid& G) { return constant_extension(G, eta2); });
    add("constant_ambient", CorpusFamily::constant, [=](const BulkGrid& G) { return constant_extension(G, amb); });
    add("profile_quadratic", CorpusFamily::general, [=](const BulkGrid& G) {
        return profile_extension(G, eta1, [](double s) { return (1 + s) * (1 + s); }, [](double s) { return 2 * (1 + s); }) +
               profile_extension(G, nrm, [](double s) { return s; }, [](double) { return 1.0; });
    });
    add("profile_cubic", CorpusFamily::general, [=](const BulkGrid& G) {
        return profile_extension(G, eta2, [](double s) { return 1 - s * s * s; }, [](double s) { return -3 * s * s; }) +
               profile_extension(G, amb, [](double s) { return 0.5 * s * (1 - s); }, [](double s) { return 0.5 - s; });
    });
    add("extension_1", CorpusFamily::extension, [=](const BulkGrid& G) { return extend_E(G, eta1); });
    add("extension_2", CorpusFamily::extension, [=](const BulkGrid& G) { return extend_E(G, eta2); });
    add("extension_perturbed", CorpusFamily::perturbed, [=](const BulkGrid& G) {
        const double e = G.spec->eps;
        return extend_E(G, eta1) + profile_extension(G, zeta, [e](double s) { return e * std::sin(2 * M_PI * s); },
                                                     [e](double s) { return e * 2 * M_PI * std::cos(2 * M_PI * s); });
    });

    const std::vector<AmbientScalar> streams = {AmbientScalar::exponential(Vec3(0.6, -0.4, 0.5)),
                                                AmbientScalar::quadratic(0.0, Vec3(0.3, 0.5, -0.2),
                                                                         Vec3(0.4, -0.3, 0.1).asDiagonal())};
    for (size_t i = 0; i < streams.size(); ++i) {
        const SurfaceField eta = stream_field(S, gj, sample(S, streams[i]));
        C.push_back({"leray_stream_" + std::to_string(i + 1), CorpusFamily::leray, [eta](const LemmaContext& ctx) {
                         SampledField s;
                         ctx.leray(extend_E(ctx.volume(), eta), s.vol, s.sheet[0], s.sheet[1]);
                         s.surface = eta;
                         return s;
                     }});
    }
    return C;
}

Corpus slip_corpus(const Surface& S)
{
    // analytic jets: the slip identity at r = 0 needs D_i(v . n) = 0 exactly
    const SurfaceField eta = stream_field(S, sample(S, AmbientScalar::constant(1.0)),
                                          sample(S, AmbientScalar::exponential(Vec3(0.6, -0.4, 0.5))));
    const SurfaceField psi = sample(S, AmbientScalar::exponential(Vec3(0.2, 0.4, -0.3)));
    SurfaceField zero = SurfaceField::scalar(S.size());
    zero.grad = Eigen::MatrixXd::Zero(S.size(), 3);
    Corpus C;
    auto add = [&C](std::string name, std::function<BulkField(const BulkGrid&)> f) {
        C.push_back({std::move(name), CorpusFamily::slip, [f](const LemmaContext& ctx) { return on_all(ctx, f); }});
    };
    add("slip_shear", [=](const BulkGrid& G) { return slip_field(G, eta, zero); });
    add("slip_shear_normal", [=](const BulkGrid& G) { return slip_field(G, eta, psi); });
    add("rotation_e1", [](const BulkGrid& G) {
        Eigen::Matrix<double, 6, 1> ab;
        ab << 1, 0, 0, 0, 0, 0;
        return rigid_field(G, ab);
    });
    add("rotation_mixed", [](const BulkGrid& G) {
        Eigen::Matrix<double, 6, 1> ab;
        ab << 0, 0.6, 0.8, 0, 0, 0;
        return rigid_field(G, ab);
    });
    return C;
}

// ---------------------------------------------------------------------------------------------
// measurement

LemmaSample measure_lemma(const LemmaContext& ctx, const Corpus& corpus, AverageLemma lemma)
{
    const Surface& S = ctx.surface();
    const ThinDomainSpec& spec = ctx.spec();
    const BulkGrid& G = ctx.volume();
    const double eps = spec.eps;
    LemmaSample out;
    out.eps = eps;
    const std::vector<CorpusFamily> fams = lemma_families(lemma);

    std::vector<std::string> names;
    std::vector<SampledField> fields;
    for (const CorpusItem& it : corpus)
        if (std::find(fams.begin(), fams.end(), it.family) != fams.end()) {
            names.push_back(it.name);
            fields.push_back(it.sample(ctx));
        }

    auto record = [&](const std::string& name, double lhs, double norm) {
        if (!(norm > 0.0))
            return;
        const double ratio = lhs / norm;
        if (out.worst.empty() || ratio > out.ratio || !std::isfinite(ratio)) {
            out.ratio = ratio;
            out.lhs = lhs;
            out.norm = norm;
            out.worst = name;
        }
    };
    auto violate = [&](const std::string& name, const std::string& what) {
        out.violations.push_back(name + " at eps " + fmt(eps) + ": " + what);
    };

    // hypotheses
    std::vector<bool> ok(fields.size(), true);
    for (size_t i = 0; i < fields.size(); ++i) {
        const SampledField& f = fields[i];
        const double f0 = rel_flux(ctx.sheet(0), f.sheet[0]), f1 = rel_flux(ctx.sheet(1), f.sheet[1]);
        switch (lemma) {
        case AverageLemma::normal_average:
        case AverageLemma::normal_average_h1:
        case AverageLemma::average_difference:
        case AverageLemma::average_difference_h1:
            if (std::min(f0, f1) > tol::hypothesis_flux) {
                violate(names[i], "not tangent to either sheet (" + fmt(std::min(f0, f1)) + ")");
                ok[i] = false;
            }
            break;
        case AverageLemma::average_divergence:
        case AverageLemma::normal_derivative_trace: {
            const double dv = max_divergence(f.vol) / std::max(f.vol.grad.cwiseAbs().maxCoeff(), 1e-300);
            if (std::max(f0, f1) > tol::hypothesis_flux || dv > tol::hypothesis_div) {
                violate(names[i], "not solenoidal and tangent (flux " + fmt(std::max(f0, f1)) + ", div " + fmt(dv) + ")");
                ok[i] = false;
            }
            break;
        }
        case AverageLemma::boundary_derivative: {
            const double gam[2] = {spec.gamma0, spec.gamma1};
            bool any = false;
            for (int side = 0; side < 2; ++side) {
                const double fl = side == 0 ? f0 : f1;
                if (fl <= tol::hypothesis_flux && slip_defect(ctx.sheet(side), f.sheet[side], 1.0, gam[side]) <= tol::hypothesis_slip)
                    any = true;
            }
            if (!any) {
                violate(names[i], "slip conditions fail on both sheets");
                ok[i] = false;
            }
            break;
        }
        default:
            break;
        }
    }

    switch (lemma) {
    case AverageLemma::average_bound:
    case AverageLemma::average_bound_h1: {
        const bool h1 = lemma == AverageLemma::average_bound_h1;
        for (size_t i = 0; i < fields.size(); ++i) {
            const SurfaceField m = average_Mtau(G, fields[i].vol);
            record(names[i], norm(S, m, h1 ? NormKind::H1 : NormKind::L2),
                   h1 ? bulk_h1(G, fields[i].vol) : bulk_l2(G, fields[i].vol));
        }
        break;
    }
    case AverageLemma::normal_average:
    case AverageLemma::normal_average_h1: {
        const bool h1 = lemma == AverageLemma::normal_average_h1;
        for (size_t i = 0; i < fields.size(); ++i) {
            if (!ok[i])
                continue;
            const SurfaceField mn = normal_component(S, average_M(G, fields[i].vol));
            record(names[i], norm(S, mn, h1 ? NormKind::H1 : NormKind::L2),
                   h1 ? bulk_h2_proxy(G, fields[i].vol) : bulk_h1(G, fields[i].vol));
        }
        break;
    }
    case AverageLemma::average_difference: {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (!ok[i])
                continue;
            const BulkField& u = fields[i].vol;
            const BulkField d = u - constant_extension(G, average_Mtau(G, u));
            record(names[i], bulk_l2(G, d), bulk_h1(G, u));
        }
        break;
    }
    case AverageLemma::average_difference_h1: {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (!ok[i])
                continue;
            const BulkField& u = fields[i].vol;
            const SurfaceField m = average_Mtau(G, u);
            double s = 0.0;
            for (int p = 0; p < G.size(); ++p) {
                const int k = G.surf(p);
                s += G.w[p] * (S.P(k) * u.jac(p) - m.jac(k)).squaredNorm();
            }
            record(names[i], std::sqrt(s), bulk_h2_proxy(G, u));
        }
        break;
    }
    case AverageLemma::near_adjoint: {
        std::vector<BulkField> ext(fields.size());
        for (size_t i = 0; i < fields.size(); ++i)
            ext[i] = constant_extension(G, average_Mtau(G, fields[i].vol));
        for (size_t i = 0; i < fields.size(); ++i)
            for (size_t j = i + 1; j < fields.size(); ++j) {
                const double lhs = std::abs(bulk_inner(G, ext[i], fields[j].vol) - bulk_inner(G, fields[i].vol, ext[j]));
                record(names[i] + "|" + names[j], lhs, bulk_l2(G, fields[i].vol) * bulk_l2(G, fields[j].vol));
            }
        break;
    }
    case AverageLemma::average_divergence: {
        const SurfaceField& g = spec.g;
        for (size_t i = 0; i < fields.size(); ++i) {
            if (!ok[i])
                continue;
            const SurfaceField m = average_Mtau(G, fields[i].vol);
            Eigen::VectorXd dv(S.size());
            for (int k = 0; k < S.size(); ++k)
                dv[k] = g.dvec(k).dot(m.vec(k)) + g.val(k, 0) * m.jac(k).trace();
            record(names[i], surface_l2(S, dv), bulk_h1(G, fields[i].vol));
        }
        break;
    }
    case AverageLemma::normal_derivative_trace: {
        const SurfaceField& g = spec.g;
        for (size_t i = 0; i < fields.size(); ++i) {
            if (!ok[i])
                continue;
            const BulkField& u = fields[i].vol;
            const SurfaceField m = average_Mtau(G, u);
            double s = 0.0;
            for (int p = 0; p < G.size(); ++p) {
                const int k = G.surf(p);
                const Vec3 n = S.n.col(k);
                const double d = n.dot(u.jac(p).transpose() * n) - m.vec(k).dot(g.dvec(k)) / g.val(k, 0);
                s += G.w[p] * d * d;
            }
            record(names[i], std::sqrt(s), bulk_h2_proxy(G, u));
        }
        break;
    }
    case AverageLemma::inner_product: {
        const std::vector<SurfaceField> etas = {smooth_tangent(S, Vec3(0.3, 0.2, -1.0), Vec3(0.1, 0.1, 0.1)),
                                                smooth_tangent(S, Vec3(1.0, 1.0, 0.0), Vec3(-0.3, 0.0, 0.2))};
        for (size_t i = 0; i < fields.size(); ++i) {
            const BulkField& u = fields[i].vol;
            const SurfaceField m = average_Mtau(G, u);
            for (size_t e = 0; e < etas.size(); ++e) {
                double surf = 0.0;
                for (int k = 0; k < S.size(); ++k)
                    surf += S.w[k] * spec.g.val(k, 0) * m.vec(k).dot(etas[e].vec(k));
                const double lhs = std::abs(bulk_inner(G, u, constant_extension(G, etas[e])) - eps * surf);
                record(names[i] + "|eta" + std::to_string(e + 1), lhs, bulk_l2(G, u) * norm(S, etas[e], NormKind::L2));
            }
        }
        break;
    }
    case AverageLemma::rigid_orthogonal: {
        const RigidMotionSpace R = rigid_motions(S, spec.g0, spec.g1);
        const int d = int(R.R.cols());
        if (d == 0)
            break;
        std::vector<BulkField> w(d);
        Eigen::MatrixXd Gw(d, d);
        for (int a = 0; a < d; ++a)
            w[a] = rigid_field(G, R.R.col(a));
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                Gw(a, b) = bulk_inner(G, w[a], w[b]);
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(Gw);
        for (size_t i = 0; i < fields.size(); ++i) {
            BulkField u = fields[i].vol;
            Eigen::VectorXd rhs(d);
            for (int a = 0; a < d; ++a)
                rhs[a] = bulk_inner(G, u, w[a]);
            const Eigen::VectorXd c = ldlt.solve(rhs);
            for (int a = 0; a < d; ++a)
                u = u - c[a] * w[a];
            const double un = bulk_l2(G, u);
            bool orth = true;
            for (int a = 0; a < d; ++a)
                orth = orth && std::abs(bulk_inner(G, u, w[a])) <= tol::hypothesis_orth * un * bulk_l2(G, w[a]);
            if (!orth) {
                violate(names[i], "not orthogonal to rigid motions after correction");
                continue;
            }
            const SurfaceField m = average_Mtau(G, u);
            for (int a = 0; a < d; ++a) {
                const Eigen::Matrix<double, 6, 1> ab = R.R.col(a);
                double s = 0.0;
                for (int k = 0; k < S.size(); ++k)
                    s += S.w[k] * spec.g.val(k, 0) * m.vec(k).dot(rigid_eval(ab, S.x.col(k)));
                record(names[i] + "|w" + std::to_string(a + 1), std::abs(s),
                       (ab.head<3>().norm() + ab.tail<3>().norm()) * un);
            }
        }
        break;
    }
    case AverageLemma::leray_extension: {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (!ok[i])
                continue;
            const SurfaceField& eta = fields[i].surface;
            record(names[i], bulk_l2(G, fields[i].vol - constant_extension(G, eta)), norm(S, eta, NormKind::H1));
        }
        break;
    }
    case AverageLemma::boundary_derivative: {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (!ok[i])
                continue;
            const BulkField& u = fields[i].vol;
            double s = 0.0;
            for (int p = 0; p < G.size(); ++p) {
                const int k = G.surf(p);
                const Vec3 n = S.n.col(k);
                const Vec3 d = S.P(k) * (u.jac(p).transpose() * n) + S.W[k] * u.vec(p);
                s += G.w[p] * d.squaredNorm();
            }
            record(names[i], std::sqrt(s), bulk_h2_proxy(G, u));
        }
        break;
    }
    }
    return out;
}

AverageReport summarize_lemma(AverageLemma lemma, const std::vector<LemmaSample>& samples, double slack)
{
    AverageReport r;
    r.lemma = lemma_name(lemma);
    r.target = lemma_exponent(lemma);
    bool finite = true, zero = true, measured = true;
    for (const LemmaSample& s : samples) {
        r.eps.push_back(s.eps);
        r.lhs.push_back(s.lhs);
        const double bound = std::pow(s.eps, r.target) * s.norm;
        r.bound.push_back(bound);
        r.constant.push_back(bound > 0.0 ? s.lhs / bound : 0.0);
        r.ratio.push_back(s.ratio);
        r.worst.push_back(s.worst);
        r.violations.insert(r.violations.end(), s.violations.begin(), s.violations.end());
        finite = finite && std::isfinite(s.lhs) && std::isfinite(bound);
        zero = zero && s.lhs <= tol::exact_zero * s.norm;
        measured = measured && !s.worst.empty();
    }
    if (!measured) {
        r.violations.push_back("no admissible corpus field");
        r.pass = false;
        return r;
    }
    double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
    for (double c : r.constant) {
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
    }
    r.constant_spread = cmin > 0.0 ? cmax / cmin : std::numeric_limits<double>::infinity();
    r.exact_zero = zero;
    if (!zero) {
        try {
            r.fit = fit_rate(r.eps, r.ratio);
            r.fitted = true;
        } catch (const std::exception&) {
            r.fitted = false;
        }
    }
    r.pass = finite && r.violations.empty() && (zero || (r.fitted && r.fit.exponent >= r.target - slack));
    return r;
}

AverageReport verify_average_bounds(const Surface& S, const SurfaceField& g0, const SurfaceField& g1,
                                    const std::vector<double>& eps, const Corpus& corpus, AverageLemma lemma,
                                    const AverageSettings& settings)
{
    return verify_average_suite(S, g0, g1, eps, corpus, {lemma}, settings, 1).front();
}

std::vector<AverageReport> verify_average_suite(const Surface& S, const SurfaceField& g0, const SurfaceField& g1,
                                                const std::vector<double>& eps, const Corpus& corpus,
                                                const std::vector<AverageLemma>& lemmas,
                                                const AverageSettings& settings, int workers)
{
    const int ne = int(eps.size()), nl = int(lemmas.size());
    std::vector<std::vector<LemmaSample>> samples(nl, std::vector<LemmaSample>(ne));
    std::vector<std::string> errors(ne);
    auto run = [&](int e) {
        try {
            const LemmaContext ctx(S, g0, g1, eps[e], settings);
            for (int l = 0; l < nl; ++l)
                samples[l][e] = measure_lemma(ctx, corpus, lemmas[l]);
        } catch (const std::exception& ex) {
            errors[e] = "eps " + fmt(eps[e]) + ": " + ex.what();
        }
    };
    const int nw = std::max(1, std::min(workers, ne));
    if (nw == 1) {
        for (int e = 0; e < ne; ++e)
            run(e);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nw; ++t)
            pool.emplace_back([&, t] {
                for (int e = t; e < ne; e += nw)
                    run(e);
            });
        for (std::thread& th : pool)
            th.join();
    }
    for (const std::string& err : errors)
        if (!err.empty())
            throw std::runtime_error(err);
    std::vector<AverageReport> out;
    for (int l = 0; l < nl; ++l)
        out.push_back(summarize_lemma(lemmas[l], samples[l], settings.slack));
    return out;
}

} // namespace thinlim
