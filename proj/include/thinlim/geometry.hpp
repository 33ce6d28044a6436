#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace thinlim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> projector(const Eigen::Matrix<Scalar, 3, 1>& n)
{
    return Eigen::Matrix<Scalar, 3, 3>::Identity() - n * n.transpose();
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> sym(const Eigen::Matrix<Scalar, 3, 3>& A)
{
    return Scalar(0.5) * (A + A.transpose());
}

/// Surface strain from a tangential gradient (rows = derivative direction).
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> strain(const Eigen::Matrix<Scalar, 3, 3>& P, const Eigen::Matrix<Scalar, 3, 3>& grad)
{
    return P * sym(grad) * P;
}

/// Analytic scalar on R^3 with gradient and Hessian.
struct AmbientScalar {
    std::function<double(const Vec3&)> f;
    std::function<Vec3(const Vec3&)> grad;
    std::function<Mat3(const Vec3&)> hess;
    std::string name;

    static AmbientScalar constant(double c);
    static AmbientScalar affine(double c, const Vec3& b);
    static AmbientScalar quadratic(double c, const Vec3& b, const Mat3& Q);
    static AmbientScalar exponential(const Vec3& k);
};

/// Profile curve (rho(t), z(t)) of a surface of revolution; each returns value and three derivatives.
struct Profile {
    std::function<Eigen::Vector4d(double)> rho;
    std::function<Eigen::Vector4d(double)> z;
    bool polar = true; // t in (0, pi) with both ends on the axis, else periodic in [0, 2 pi)
    std::string name;

    static Profile sphere(double radius = 1.0);
    static Profile torus(double R, double a);
    static Profile spheroid(double a, double c);
};

/// Orthonormal (L2) spectral basis on a surface with tangential jets at the nodes.
struct ScalarBasis {
    int degree = 0;
    Eigen::MatrixXd val;  // N x m
    Eigen::MatrixXd grad; // 3N x m, row 3k+i holds D_i b at node k
    Eigen::MatrixXd hess; // 9N x m, row 9k+3i+j holds D_i D_j b
    int size() const { return int(val.cols()); }
};

struct Surface {
    std::string kind;
    int n_t = 0;
    int n_phi = 0;
    int orientation = 1;
    double radius = 1.0; // bounding radius of the node cloud
    Profile profile;
    Eigen::Matrix2Xd param;
    Eigen::Matrix3Xd x;
    Eigen::Matrix3Xd n;
    std::vector<Mat3> W;
    std::vector<std::array<Mat3, 3>> dW; // dW[k][i] = D_i W at node k
    Eigen::VectorXd w;
    ScalarBasis basis; // used to differentiate nodal data

    int size() const { return int(w.size()); }
    Mat3 P(int k) const { return projector<double>(n.col(k)); }
    double H(int k) const { return W[k].trace(); }
};

/// Node samples of a scalar (comps = 1) or ambient vector (comps = 3) field.
/// grad column comps*i + j holds D_i f_j; hess (scalars only) column 3i+j holds D_i D_j f.
struct SurfaceField {
    int comps = 1;
    bool tangential = false;
    Eigen::MatrixXd val;
    Eigen::MatrixXd grad;
    Eigen::MatrixXd hess;

    static SurfaceField scalar(int n) { SurfaceField f; f.comps = 1; f.val = Eigen::MatrixXd::Zero(n, 1); return f; }
    static SurfaceField vector(int n) { SurfaceField f; f.comps = 3; f.val = Eigen::MatrixXd::Zero(n, 3); return f; }
    int size() const { return int(val.rows()); }
    bool has_grad() const { return grad.size() > 0; }
    bool has_hess() const { return hess.size() > 0; }
    Vec3 vec(int k) const { return val.row(k).transpose(); }
    Vec3 dvec(int k) const { return grad.row(k).transpose(); }       // scalar gradient
    Mat3 jac(int k) const;                                            // vector: (i,j) = D_i v_j
    Mat3 hmat(int k) const;                                           // scalar Hessian
};

// construction
Surface build_sphere(int level, int degree = -1);
Surface build_axisymmetric(const Profile& profile, int n_t, int n_phi, int degree = -1, int orientation = 1);
int default_degree(int n_t);
ScalarBasis scalar_basis(const Surface& S, int degree);
void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

// pointwise geometry
const std::vector<Mat3>& weingarten(const Surface& S);
Eigen::MatrixX2d principal_curvatures(const Surface& S);
Eigen::VectorXd mean_curvature(const Surface& S);

// sampling
SurfaceField sample(const Surface& S, const AmbientScalar& f);
SurfaceField sample_vector(const Surface& S, const std::function<Vec3(const Vec3&)>& f);
SurfaceField with_jets(const Surface& S, const SurfaceField& f);

// tangential calculus
SurfaceField tangential_gradient(const Surface& S, const SurfaceField& eta);
SurfaceField surface_divergence(const Surface& S, const SurfaceField& v);
std::vector<Mat3> surface_strain(const Surface& S, const SurfaceField& v);
SurfaceField covariant_derivative(const Surface& S, const SurfaceField& eta, const SurfaceField& v);
SurfaceField project_tangent(const Surface& S, const SurfaceField& v);

double integrate(const Surface& S, const Eigen::VectorXd& f);
double integrate(const Surface& S, const SurfaceField& f);
double ibp_residual(const Surface& S, const SurfaceField& eta, const SurfaceField& xi, int i);
double max_normal_component(const Surface& S, const SurfaceField& v);

void write_csv(const std::string& path, const Surface& S, const SurfaceField& f);

} // namespace thinlim
