#pragma once

#include "thinlim/geometry.hpp"

#include <Eigen/Dense>

#include <vector>

namespace thinlim {

/// L2-orthonormal spectral basis of tangential fields, built from P e_j b.
struct TangentBasis {
    Eigen::MatrixXd val;      // 3N x M, row 3k+j
    Eigen::MatrixXd grad;     // 9N x M, row 9k+3i+j holds D_i v_j
    Eigen::MatrixXd div;      // N x M
    Eigen::MatrixXd grad_div; // 3N x M
    int size() const { return int(val.cols()); }
};

/// Columns of a discrete space of tangential fields (values and tangential Jacobians).
struct FieldSet {
    Eigen::MatrixXd val;  // 3N x n
    Eigen::MatrixXd grad; // 9N x n
    int size() const { return int(val.cols()); }
};

struct KillingBasis {
    FieldSet fields;          // g-orthonormal
    Eigen::VectorXd spectrum; // lowest eigenvalues of the Korn form (relative to L2)
    SurfaceField g;
    int size() const { return fields.size(); }
    SurfaceField field(int k) const;
};

struct RigidMotionSpace {
    Eigen::MatrixXd R;  // 6 x d generators (a; b) of w(x) = a x x + b tangent along the surface
    Eigen::MatrixXd R0; // subspace with w . grad g0 = 0
    Eigen::MatrixXd R1;
    Eigen::MatrixXd Rg;
};

enum class NormKind { L2, H1, Hminus1 };
enum class KornMode { plain, weighted };

TangentBasis tangent_basis(const Surface& S);
TangentBasis tangent_basis(const Surface& S, const ScalarBasis& B);
FieldSet as_fieldset(const TangentBasis& T);
SurfaceField field_of(const FieldSet& F, const Eigen::VectorXd& c);
SurfaceField field_column(const FieldSet& F, int j);
FieldSet fieldset_of(const std::vector<SurfaceField>& fields);

/// Scalar jets (val, grad, hess) for g; computes them spectrally when absent.
SurfaceField ensure_jets(const Surface& S, const SurfaceField& f);
SurfaceField ambient_weight(const Surface& S, const AmbientScalar& g);

// Gram-type matrices over a FieldSet
Eigen::MatrixXd gram_l2(const Surface& S, const FieldSet& F, const Eigen::VectorXd* weight = nullptr);
Eigen::MatrixXd gram_h1(const Surface& S, const FieldSet& F);
Eigen::MatrixXd gram_korn(const Surface& S, const FieldSet& F, const Eigen::VectorXd* weight = nullptr);
Eigen::MatrixXd gram_gradg(const Surface& S, const FieldSet& F, const SurfaceField& g, const Eigen::VectorXd* weight = nullptr);

double norm(const Surface& S, const SurfaceField& f, NormKind kind, const TangentBasis* T = nullptr);
double inner_l2(const Surface& S, const SurfaceField& a, const SurfaceField& b, const Eigen::VectorXd* weight = nullptr);
double lp_norm(const Surface& S, const SurfaceField& f, double p);
/// Load vector (f, t_i) against the tangent basis.
Eigen::VectorXd dual_load(const Surface& S, const TangentBasis& T, const SurfaceField& f);

/// Stiffness (g grad b_a, grad b_b) over the non-constant scalar basis functions.
Eigen::MatrixXd weighted_stiffness(const Surface& S, const SurfaceField& g);

KillingBasis killing_basis(const Surface& S, const SurfaceField& g, const TangentBasis& T);
SurfaceField weighted_leray(const Surface& S, const SurfaceField& g, const SurfaceField& v);
SurfaceField project_Hg(const Surface& S, const SurfaceField& g, const KillingBasis& K, const SurfaceField& v);
RigidMotionSpace rigid_motions(const Surface& S, const SurfaceField& g0, const SurfaceField& g1);
Vec3 rigid_eval(const Eigen::Matrix<double, 6, 1>& ab, const Vec3& x);

/// Smallest Rayleigh quotient of the Korn-type form against the H1 norm.
/// With K given, the search runs over the g-orthogonal complement of span(K).
double korn_quotient(const Surface& S, const SurfaceField& g, KornMode mode, const TangentBasis& T,
                     const KillingBasis* K);
double korn_constant(const Surface& S, const SurfaceField& g, KornMode mode, const TangentBasis& T,
                     const KillingBasis* K);

/// g^{-1} n x grad psi with tangential Jacobian; psi needs grad and hess.
SurfaceField stream_field(const Surface& S, const SurfaceField& g, const SurfaceField& psi);

/// Weighted stream-function space g^{-1} n x grad psi restricted to (g v, w_k) = 0, H1-orthonormal.
FieldSet weighted_solenoidal_basis(const Surface& S, const SurfaceField& g, const KillingBasis* K);

} // namespace thinlim
