#include "thinlim/spaces.hpp"

#include "thinlim/constants.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace thinlim {

namespace {

Mat3 block_jac(const Eigen::MatrixXd& grad, int k, int c)
{
    Mat3 G;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            G(i, j) = grad(9 * k + 3 * i + j, c);
    return G;
}

Eigen::VectorXd ones_or(const Eigen::VectorXd* w, int n) { return w ? *w : Eigen::VectorXd::Ones(n); }

// orthonormal basis of the nullspace of the rows of M (columns of the result)
Eigen::MatrixXd nullspace(const Eigen::MatrixXd& M, double rel)
{
    const int n = int(M.cols());
    if (M.rows() == 0)
        return Eigen::MatrixXd::Identity(n, n);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > rel * std::max(smax, 1.0))
            ++rank;
    return svd.matrixV().rightCols(n - rank);
}

// complement of span(C) in R^n, orthonormal columns
Eigen::MatrixXd complement(const Eigen::MatrixXd& C)
{
    const int n = int(C.rows());
    if (C.cols() == 0)
        return Eigen::MatrixXd::Identity(n, n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(C);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    return Q.rightCols(n - C.cols());
}

double min_generalized(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& G)
{
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, G, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("generalized eigen-solve failed");
    return es.eigenvalues()[0];
}

} // namespace

SurfaceField KillingBasis::field(int k) const
{
    SurfaceField f = field_column(fields, k);
    f.tangential = true;
    return f;
}

TangentBasis tangent_basis(const Surface& S) { return tangent_basis(S, S.basis); }

TangentBasis tangent_basis(const Surface& S, const ScalarBasis& B)
{
    const int N = S.size(), m = B.size(), M = 3 * m;
    Eigen::MatrixXd val(3 * N, M), grad(9 * N, M), div(N, M), gdiv(3 * N, M);
    for (int k = 0; k < N; ++k) {
        const Vec3 n = S.n.col(k);
        const Mat3& W = S.W[k];
        const double H = S.H(k);
        Vec3 dH;
        for (int i = 0; i < 3; ++i)
            dH[i] = S.dW[k][i].trace();
        for (int c = 0; c < m; ++c) {
            const double b = B.val(k, c);
            const Vec3 db = B.grad.block<3, 1>(3 * k, c);
            for (int j = 0; j < 3; ++j) {
                const int col = 3 * c + j;
                const Vec3 v = Vec3::Unit(j) * b - n * (n[j] * b);
                val.block<3, 1>(3 * k, col) = v;
                for (int i = 0; i < 3; ++i)
                    for (int l = 0; l < 3; ++l)
                        grad(9 * k + 3 * i + l, col) = (j == l ? db[i] : 0.0) + W(i, l) * n[j] * b + n[l] * W(i, j) * b -
                                                       n[l] * n[j] * db[i];
                div(k, col) = db[j] + H * n[j] * b;
                for (int i = 0; i < 3; ++i)
                    gdiv(3 * k + i, col) = B.hess(9 * k + 3 * i + j, c) + dH[i] * n[j] * b - H * W(i, j) * b + H * n[j] * db[i];
            }
        }
    }
    Eigen::VectorXd sw(3 * N);
    for (int k = 0; k < N; ++k)
        sw.segment<3>(3 * k).setConstant(std::sqrt(S.w[k]));
    Eigen::BDCSVD<Eigen::MatrixXd> svd(sw.asDiagonal() * val, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    int rank = 0;
    while (rank < sv.size() && sv[rank] > tol::rank_cut * sv[0])
        ++rank;
    const Eigen::MatrixXd C = svd.matrixV().leftCols(rank) * sv.head(rank).cwiseInverse().asDiagonal();
    TangentBasis T;
    T.val = val * C;
    T.grad = grad * C;
    T.div = div * C;
    T.grad_div = gdiv * C;
    return T;
}

FieldSet as_fieldset(const TangentBasis& T) { return FieldSet{T.val, T.grad}; }

SurfaceField field_of(const FieldSet& F, const Eigen::VectorXd& c)
{
    const int N = int(F.val.rows() / 3);
    SurfaceField f = SurfaceField::vector(N);
    f.tangential = true;
    const Eigen::VectorXd v = F.val * c, g = F.grad * c;
    f.grad.resize(N, 9);
    for (int k = 0; k < N; ++k) {
        f.val.row(k) = v.segment<3>(3 * k).transpose();
        f.grad.row(k) = g.segment<9>(9 * k).transpose();
    }
    return f;
}

SurfaceField field_column(const FieldSet& F, int j) { return field_of(F, Eigen::VectorXd::Unit(F.size(), j)); }

FieldSet fieldset_of(const std::vector<SurfaceField>& fields)
{
    FieldSet F;
    if (fields.empty())
        return F;
    const int N = fields[0].size(), n = int(fields.size());
    F.val.resize(3 * N, n);
    F.grad.resize(9 * N, n);
    for (int c = 0; c < n; ++c) {
        if (fields[c].comps != 3 || !fields[c].has_grad())
            throw std::invalid_argument("fieldset_of expects vector fields with jets");
        for (int k = 0; k < N; ++k) {
            F.val.block<3, 1>(3 * k, c) = fields[c].val.row(k).transpose();
            F.grad.block<9, 1>(9 * k, c) = fields[c].grad.row(k).transpose();
        }
    }
    return F;
}

SurfaceField ensure_jets(const Surface& S, const SurfaceField& f)
{
    if (f.has_grad() && (f.comps == 3 || f.has_hess()))
        return f;
    return with_jets(S, f);
}

SurfaceField ambient_weight(const Surface& S, const AmbientScalar& g) { return sample(S, g); }

Eigen::MatrixXd gram_l2(const Surface& S, const FieldSet& F, const Eigen::VectorXd* weight)
{
    const int N = S.size();
    const Eigen::VectorXd wt = ones_or(weight, N);
    Eigen::VectorXd d(3 * N);
    for (int k = 0; k < N; ++k)
        d.segment<3>(3 * k).setConstant(S.w[k] * wt[k]);
    return F.val.transpose() * d.asDiagonal() * F.val;
}

Eigen::MatrixXd gram_h1(const Surface& S, const FieldSet& F)
{
    const int N = S.size();
    Eigen::VectorXd d(9 * N);
    for (int k = 0; k < N; ++k)
        d.segment<9>(9 * k).setConstant(S.w[k]);
    return gram_l2(S, F) + F.grad.transpose() * d.asDiagonal() * F.grad;
}

Eigen::MatrixXd gram_korn(const Surface& S, const FieldSet& F, const Eigen::VectorXd* weight)
{
    const int N = S.size(), n = F.size();
    const Eigen::VectorXd wt = ones_or(weight, N);
    const double r2 = std::sqrt(2.0);
    Eigen::MatrixXd D(6 * N, n);
    for (int k = 0; k < N; ++k) {
        const Mat3 P = S.P(k);
        const double sw = std::sqrt(S.w[k] * wt[k]);
        for (int c = 0; c < n; ++c) {
            const Mat3 E = strain<double>(P, block_jac(F.grad, k, c));
            D.block<6, 1>(6 * k, c) << E(0, 0), E(1, 1), E(2, 2), r2 * E(0, 1), r2 * E(0, 2), r2 * E(1, 2);
            D.block<6, 1>(6 * k, c) *= sw;
        }
    }
    return D.transpose() * D;
}

Eigen::MatrixXd gram_gradg(const Surface& S, const FieldSet& F, const SurfaceField& g, const Eigen::VectorXd* weight)
{
    const int N = S.size();
    const Eigen::VectorXd wt = ones_or(weight, N);
    const SurfaceField gj = ensure_jets(S, g);
    Eigen::MatrixXd X(N, F.size());
    for (int k = 0; k < N; ++k) {
        const Vec3 dg = gj.dvec(k);
        X.row(k) = std::sqrt(S.w[k] * wt[k]) * (dg.transpose() * F.val.middleRows<3>(3 * k));
    }
    return X.transpose() * X;
}

double inner_l2(const Surface& S, const SurfaceField& a, const SurfaceField& b, const Eigen::VectorXd* weight)
{
    if (a.comps != b.comps)
        throw std::invalid_argument("inner_l2: component mismatch");
    const Eigen::VectorXd wt = ones_or(weight, S.size());
    double s = 0.0;
    for (int k = 0; k < S.size(); ++k)
        s += S.w[k] * wt[k] * a.val.row(k).dot(b.val.row(k));
    return s;
}

double lp_norm(const Surface& S, const SurfaceField& f, double p)
{
    double s = 0.0;
    for (int k = 0; k < S.size(); ++k)
        s += S.w[k] * std::pow(f.val.row(k).norm(), p);
    return std::pow(s, 1.0 / p);
}

Eigen::VectorXd dual_load(const Surface& S, const TangentBasis& T, const SurfaceField& f)
{
    if (f.comps != 3)
        throw std::invalid_argument("dual_load expects a vector field");
    Eigen::VectorXd F = Eigen::VectorXd::Zero(T.size());
    for (int k = 0; k < S.size(); ++k)
        F += S.w[k] * (T.val.middleRows<3>(3 * k).transpose() * f.vec(k));
    return F;
}

double norm(const Surface& S, const SurfaceField& f, NormKind kind, const TangentBasis* T)
{
    switch (kind) {
    case NormKind::L2:
        return std::sqrt(inner_l2(S, f, f));
    case NormKind::H1: {
        const SurfaceField e = f.has_grad() ? f : with_jets(S, f);
        double s = inner_l2(S, e, e);
        for (int k = 0; k < S.size(); ++k)
            s += S.w[k] * e.grad.row(k).squaredNorm();
        return std::sqrt(s);
    }
    case NormKind::Hminus1: {
        if (f.comps != 3)
            throw std::invalid_argument("H^-1 norm is defined for tangential fields");
        const double scale = std::max(1.0, f.val.cwiseAbs().maxCoeff());
        if (max_normal_component(S, f) > tol::tangential * scale)
            throw std::invalid_argument("H^-1 norm requires tangential data");
        TangentBasis local;
        if (!T) {
            local = tangent_basis(S);
            T = &local;
        }
        const Eigen::MatrixXd G = gram_h1(S, as_fieldset(*T));
        Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
        const double cond = ldlt.vectorD().maxCoeff() / ldlt.vectorD().minCoeff();
        if (!(cond < tol::riesz_cond_cap))
            throw std::runtime_error("Riesz system too ill-conditioned");
        const Eigen::VectorXd F = dual_load(S, *T, f);
        const Eigen::VectorXd z = ldlt.solve(F);
        return std::sqrt(std::max(0.0, F.dot(z)));
    }
    }
    return 0.0;
}

Eigen::MatrixXd weighted_stiffness(const Surface& S, const SurfaceField& g)
{
    const ScalarBasis& B = S.basis;
    const int N = S.size(), m = B.size() - 1;
    Eigen::MatrixXd X(3 * N, m);
    for (int k = 0; k < N; ++k)
        X.middleRows<3>(3 * k) = std::sqrt(S.w[k] * g.val(k, 0)) * B.grad.block(3 * k, 1, 3, m);
    return X.transpose() * X;
}

KillingBasis killing_basis(const Surface& S, const SurfaceField& g, const TangentBasis& T)
{
    const FieldSet F = as_fieldset(T);
    const SurfaceField gj = ensure_jets(S, g);
    const Eigen::MatrixXd Q = gram_korn(S, F) + gram_gradg(S, F, gj);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
    const Eigen::VectorXd lam = es.eigenvalues().cwiseAbs();
    const int M = int(lam.size());
    // dimension = position of the sharpest gap among the lowest few eigenvalues
    int dim = 0;
    double best = 1.0;
    for (int d = 1; d <= std::min(6, M - 1); ++d) {
        const double ratio = lam[d - 1] / std::max(lam[d], 1e-300);
        if (ratio < best) {
            best = ratio;
            dim = d;
        }
    }
    if (best >= tol::killing_gap) {
        if (best < tol::killing_ambiguous) {
            std::ostringstream os;
            os << "ambiguous Killing nullspace: eigenvalue gap ratio " << best << " at dimension " << dim;
            throw std::runtime_error(os.str());
        }
        dim = 0;
    }
    if (dim > 3)
        throw std::runtime_error("Killing nullspace dimension exceeds three");
    KillingBasis K;
    K.g = gj;
    K.spectrum = es.eigenvalues().head(std::min(M, 8));
    const Eigen::MatrixXd V = es.eigenvectors().leftCols(dim);
    if (dim > 0) {
        const Eigen::VectorXd gv = gj.val.col(0);
        const Eigen::MatrixXd Gg = V.transpose() * gram_l2(S, F, &gv) * V;
        const Eigen::LLT<Eigen::MatrixXd> llt(Gg);
        const Eigen::MatrixXd Linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(dim, dim));
        const Eigen::MatrixXd coef = V * Linv.transpose();
        K.fields.val = F.val * coef;
        K.fields.grad = F.grad * coef;
    } else {
        K.fields.val.resize(3 * S.size(), 0);
        K.fields.grad.resize(9 * S.size(), 0);
    }
    return K;
}

SurfaceField weighted_leray(const Surface& S, const SurfaceField& g, const SurfaceField& v)
{
    if (v.comps != 3)
        throw std::invalid_argument("weighted_leray expects a vector field");
    const ScalarBasis& B = S.basis;
    const int N = S.size(), m = B.size() - 1;
    const SurfaceField e = v.has_grad() ? v : with_jets(S, v);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < N; ++k)
        rhs += S.w[k] * g.val(k, 0) * (B.grad.block(3 * k, 1, 3, m).transpose() * e.vec(k));
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(weighted_stiffness(S, g));
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("weighted Poisson solve failed");
    const Eigen::VectorXd q = ldlt.solve(rhs);
    const Eigen::VectorXd gq = B.grad.rightCols(m) * q, hq = B.hess.rightCols(m) * q;
    SurfaceField out = e;
    out.tangential = true;
    for (int k = 0; k < N; ++k) {
        out.val.row(k) -= gq.segment<3>(3 * k).transpose();
        out.grad.row(k) -= hq.segment<9>(9 * k).transpose();
    }
    return out;
}

SurfaceField project_Hg(const Surface& S, const SurfaceField& g, const KillingBasis& K, const SurfaceField& v)
{
    SurfaceField out = v.has_grad() ? v : with_jets(S, v);
    const Eigen::VectorXd gv = g.val.col(0);
    for (int j = 0; j < K.size(); ++j) {
        const SurfaceField w = K.field(j);
        const double c = inner_l2(S, out, w, &gv);
        out.val -= c * w.val;
        out.grad -= c * w.grad;
    }
    out.tangential = true;
    return out;
}

RigidMotionSpace rigid_motions(const Surface& S, const SurfaceField& g0, const SurfaceField& g1)
{
    const int N = S.size();
    Eigen::MatrixXd C(N, 6);
    for (int k = 0; k < N; ++k) {
        const Vec3 y = S.x.col(k), n = S.n.col(k);
        C.block<1, 3>(k, 0) = y.cross(n).transpose();
        C.block<1, 3>(k, 3) = n.transpose();
    }
    RigidMotionSpace out;
    out.R = nullspace(C, 1e-8);
    const SurfaceField a = ensure_jets(S, g0), b = ensure_jets(S, g1);
    auto filter = [&](const std::function<Vec3(int)>& dg) {
        Eigen::MatrixXd Cg(N, 6);
        for (int k = 0; k < N; ++k) {
            const Vec3 y = S.x.col(k), d = dg(k);
            Cg.block<1, 3>(k, 0) = y.cross(d).transpose();
            Cg.block<1, 3>(k, 3) = d.transpose();
        }
        if (out.R.cols() == 0)
            return out.R;
        return Eigen::MatrixXd(out.R * nullspace(Cg * out.R, 1e-8));
    };
    out.R0 = filter([&](int k) { return a.dvec(k); });
    out.R1 = filter([&](int k) { return b.dvec(k); });
    out.Rg = filter([&](int k) { return Vec3(b.dvec(k) - a.dvec(k)); });
    return out;
}

Vec3 rigid_eval(const Eigen::Matrix<double, 6, 1>& ab, const Vec3& x)
{
    return Vec3(ab.head<3>()).cross(x) + ab.tail<3>();
}

double korn_quotient(const Surface& S, const SurfaceField& g, KornMode mode, const TangentBasis& T, const KillingBasis* K)
{
    const FieldSet F = as_fieldset(T);
    const SurfaceField gj = ensure_jets(S, g);
    Eigen::MatrixXd Q = gram_korn(S, F);
    if (mode == KornMode::plain)
        Q += gram_l2(S, F);
    else
        Q += gram_gradg(S, F, gj);
    const Eigen::MatrixXd G = gram_h1(S, F);
    Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(F.size(), F.size());
    if (K && K->size() > 0) {
        const Eigen::VectorXd gv = gj.val.col(0);
        Eigen::VectorXd d(3 * S.size());
        for (int k = 0; k < S.size(); ++k)
            d.segment<3>(3 * k).setConstant(S.w[k] * gv[k]);
        Z = complement(F.val.transpose() * d.asDiagonal() * K->fields.val);
    }
    return min_generalized(Z.transpose() * Q * Z, Z.transpose() * G * Z);
}

double korn_constant(const Surface& S, const SurfaceField& g, KornMode mode, const TangentBasis& T, const KillingBasis* K)
{
    const double q = korn_quotient(S, g, mode, T, K);
    if (!(q > tol::korn_floor)) {
        std::ostringstream os;
        os << "Korn quotient " << q << " below floor: unresolved Killing directions";
        throw std::runtime_error(os.str());
    }
    return 1.0 / std::sqrt(q);
}

SurfaceField stream_field(const Surface& S, const SurfaceField& g, const SurfaceField& psi)
{
    const SurfaceField gj = ensure_jets(S, g), pj = ensure_jets(S, psi);
    SurfaceField u = SurfaceField::vector(S.size());
    u.tangential = true;
    u.grad.resize(S.size(), 9);
    for (int k = 0; k < S.size(); ++k) {
        const Vec3 n = S.n.col(k), dp = pj.dvec(k), dg = gj.dvec(k);
        const Mat3 h = pj.hmat(k);
        const double gk = gj.val(k, 0);
        const Vec3 v = n.cross(dp) / gk;
        u.val.row(k) = v.transpose();
        for (int i = 0; i < 3; ++i) {
            const Vec3 dn = -S.W[k].row(i).transpose();
            const Vec3 du = -(dg[i] / gk) * v + (dn.cross(dp) + n.cross(Vec3(h.row(i).transpose()))) / gk;
            for (int j = 0; j < 3; ++j)
                u.grad(k, 3 * i + j) = du[j];
        }
    }
    return u;
}

FieldSet weighted_solenoidal_basis(const Surface& S, const SurfaceField& g, const KillingBasis* K)
{
    const ScalarBasis& B = S.basis;
    const SurfaceField gj = ensure_jets(S, g);
    const int N = S.size(), m = B.size() - 1;
    FieldSet raw;
    raw.val.resize(3 * N, m);
    raw.grad.resize(9 * N, m);
    for (int k = 0; k < N; ++k) {
        const Vec3 n = S.n.col(k);
        const Mat3& W = S.W[k];
        const double gk = gj.val(k, 0);
        const Vec3 dg = gj.dvec(k);
        for (int c = 0; c < m; ++c) {
            const Vec3 dp = B.grad.block<3, 1>(3 * k, c + 1);
            const Vec3 u = n.cross(dp) / gk;
            raw.val.block<3, 1>(3 * k, c) = u;
            for (int i = 0; i < 3; ++i) {
                Vec3 hrow;
                for (int j = 0; j < 3; ++j)
                    hrow[j] = B.hess(9 * k + 3 * i + j, c + 1);
                const Vec3 dn = -W.row(i).transpose();
                const Vec3 du = -(dg[i] / gk) * u + (dn.cross(dp) + n.cross(hrow)) / gk;
                raw.grad.block<3, 1>(9 * k + 3 * i, c) = du;
            }
        }
    }
    Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(m, m);
    if (K && K->size() > 0) {
        const Eigen::VectorXd gv = gj.val.col(0);
        Eigen::VectorXd d(3 * N);
        for (int k = 0; k < N; ++k)
            d.segment<3>(3 * k).setConstant(S.w[k] * gv[k]);
        Z = complement(raw.val.transpose() * d.asDiagonal() * K->fields.val);
    }
    const Eigen::MatrixXd G = Z.transpose() * gram_h1(S, raw) * Z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const Eigen::VectorXd& lam = es.eigenvalues();
    int first = 0;
    while (first < lam.size() && lam[first] < 1e-13 * lam[lam.size() - 1])
        ++first;
    const int r = int(lam.size()) - first;
    const Eigen::MatrixXd C =
        Z * es.eigenvectors().rightCols(r) * lam.tail(r).cwiseSqrt().cwiseInverse().asDiagonal();
    return FieldSet{raw.val * C, raw.grad * C};
}

} // namespace thinlim
