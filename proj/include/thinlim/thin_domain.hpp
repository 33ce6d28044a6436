#pragma once

#include "thinlim/spaces.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace thinlim {

/// Omega_eps = { y + r n(y) : eps g0(y) < r < eps g1(y) } over a surface.
struct ThinDomainSpec {
    const Surface* S = nullptr;
    SurfaceField g0, g1, g; // scalars with val, grad, hess; g = g1 - g0
    double eps = 0.0;
    double gamma0 = 0.0;
    double gamma1 = 0.0;

    const SurfaceField& side(int i) const { return i == 0 ? g0 : g1; }
};

/// Validates positivity of g, the curvature bracket c^-1 <= 1 - r kappa <= c on the slab and
/// gamma_i <= friction_c * eps. Throws std::invalid_argument on violation.
ThinDomainSpec make_spec(const Surface& S, const SurfaceField& g0, const SurfaceField& g1, double eps,
                         double gamma0 = 0.0, double gamma1 = 0.0, double bracket = 2.0, double friction_c = 2.0);

/// Largest eps for which the curvature bracket holds at every node.
double admissible_eps(const Surface& S, const SurfaceField& g0, const SurfaceField& g1, double bracket = 2.0);

/// J(y_k, r) = det(I - r W(y_k)); throws when r leaves the slab.
double jacobian(const ThinDomainSpec& spec, int k, double r);

/// Tensor grid (surface node k) x (normal coordinate s in [0,1]) with r = eps (g0 + s g).
/// Node p = k * ns + q. Volume grids carry w = w_k ws_q eps g J; sheet grids (s = 0 or 1)
/// carry the sheet area element w_k J sqrt(1 + eps^2 |tau|^2) and the outward normal.
struct BulkGrid {
    const ThinDomainSpec* spec = nullptr;
    int N = 0;
    int ns = 0;
    int sheet = -1; // -1 for the volume grid
    Eigen::VectorXd s, ws;
    Eigen::VectorXd r, J, w;
    Eigen::Matrix3Xd x;      // ambient point
    Eigen::Matrix3Xd rho;    // eps (grad g0 + s grad g)
    Eigen::Matrix3Xd grad_s; // ambient gradient of s
    Eigen::Matrix3Xd normal; // sheet grids only: n_eps
    std::vector<Mat3> B;     // (I - r W)^-1

    int size() const { return N * ns; }
    int node(int k, int q) const { return k * ns + q; }
    int surf(int p) const { return p / ns; }
    int layer(int p) const { return p % ns; }
};

BulkGrid make_grid(const ThinDomainSpec& spec, int ns = 4);
BulkGrid sheet_grid(const ThinDomainSpec& spec, int side);

/// Scalar (comps 1) or vector (comps 3) samples on a BulkGrid with ambient gradient;
/// grad column comps*a + b holds d_a f_b.
struct BulkField {
    int comps = 1;
    Eigen::MatrixXd val;
    Eigen::MatrixXd grad;

    static BulkField zero(int n, int comps);
    int size() const { return int(val.rows()); }
    bool has_grad() const { return grad.size() > 0; }
    Vec3 vec(int p) const { return val.row(p).transpose(); }
    Mat3 jac(int p) const;
};

BulkField operator-(const BulkField& a, const BulkField& b);
BulkField operator+(const BulkField& a, const BulkField& b);
BulkField operator*(double c, const BulkField& a);

/// Ambient jets from jets in (y, s): G column comps*i + j = D_i f_j at fixed s, Us = d_s f.
BulkField from_slice_jets(const BulkGrid& grid, const Eigen::MatrixXd& val, const Eigen::MatrixXd& G,
                          const Eigen::MatrixXd& Us);
/// Inverse of from_slice_jets.
void slice_jets(const BulkGrid& grid, const BulkField& f, Eigen::MatrixXd& G, Eigen::MatrixXd& Us);

/// Ambient gradient from values alone: spectral per s-layer plus Lagrange differentiation in s.
BulkField bulk_gradient(const BulkGrid& grid, const Eigen::MatrixXd& val);

double integrate_bulk(const BulkGrid& grid, const Eigen::VectorXd& phi);
double integrate_bulk(const BulkGrid& grid, const BulkField& phi);
double bulk_inner(const BulkGrid& grid, const BulkField& a, const BulkField& b);
double bulk_l2(const BulkGrid& grid, const BulkField& f);
double bulk_h1(const BulkGrid& grid, const BulkField& f);
double bulk_lp(const BulkGrid& grid, const BulkField& f, double p);
/// sqrt(|u|^2 + |grad u|^2 + |grad grad u|^2) with the second derivative by nodal differentiation.
double bulk_h2_proxy(const BulkGrid& grid, const BulkField& f);
/// Integral of |phi|^2 in dr dH^2 without the Jacobian.
double unweighted_l2_sq(const BulkGrid& grid, const BulkField& f);

/// tau^i = (I - eps g_i W)^-1 grad g_i with tangential jets.
SurfaceField sheet_tau(const ThinDomainSpec& spec, int side);
/// Outward unit normal of the sheet r = eps g_i, indexed by surface node.
SurfaceField boundary_normal(const ThinDomainSpec& spec, int side);

BulkField constant_extension(const BulkGrid& grid, const SurfaceField& eta);
/// n . grad phi; from the stored gradient when present, else by differentiation in s.
BulkField normal_derivative(const BulkGrid& grid, const BulkField& phi);
/// E_eps v = v + (v . Psi) n with Psi = eps (s tau^1 + (1 - s) tau^0).
BulkField extend_E(const BulkGrid& grid, const SurfaceField& v);
/// Bulk field from an ambient function of x.
BulkField sample_bulk(const BulkGrid& grid, const std::function<double(const Vec3&)>& f,
                      const std::function<Vec3(const Vec3&)>& grad);
BulkField rigid_field(const BulkGrid& grid, const Eigen::Matrix<double, 6, 1>& ab);

/// Max |u . n_eps| on a sheet grid.
double sheet_flux(const BulkGrid& sheet, const BulkField& u);
/// Max |div u| over the grid.
double max_divergence(const BulkField& u);

/// Piola image of reference fields on Gamma x [0,1]:
///   U_tau = w0 + sum_m P_m(2s-1) t_m,  U_s = -sum_m Phi_m(s) div t_m,
/// with w0 = n x grad psi and Phi_m' = P_m(2s-1), Phi_m(0) = Phi_m(1) = 0.
/// u = [(I - rW) U_tau + (rho . U_tau + eps g U_s) n] / (eps g J) is divergence-free and
/// tangent to both sheets.
struct PiolaSpace {
    const ThinDomainSpec* spec = nullptr;
    int modes = 0;
    FieldSet stream;   // w0 generators, columns n x grad b_a for non-constant scalar basis functions
    TangentBasis tang; // t_m generators
    int size() const { return stream.size() + modes * tang.size(); }
};

PiolaSpace piola_space(const ThinDomainSpec& spec, int modes = 3, int mode_degree = -1);

struct BulkBasis {
    Eigen::MatrixXd val;  // 3 Nb x n
    Eigen::MatrixXd grad; // 9 Nb x n, row 9p + 3a + b holds d_a u_b
    int size() const { return int(val.cols()); }
};

BulkBasis evaluate(const PiolaSpace& V, const BulkGrid& grid);
BulkField field_of(const BulkBasis& F, const Eigen::VectorXd& c);

/// L2(Omega_eps) projection onto the Piola space: the discrete Leray projection.
struct BulkLeray {
    const BulkGrid* grid = nullptr;
    const BulkBasis* basis = nullptr;
    Eigen::MatrixXd Q; // orthonormal coordinates: columns span the space, Q^T M Q = I

    Eigen::VectorXd coeffs(const BulkField& u) const;
    BulkField apply(const BulkField& u) const;
};
BulkLeray make_leray(const BulkGrid& grid, const BulkBasis& basis);

/// Mass matrix sum_p w_p u_i . u_j of a basis.
Eigen::MatrixXd bulk_mass(const BulkGrid& grid, const BulkBasis& F);
/// Gram of the ambient gradients, sum_p w_p grad u_i : grad u_j.
Eigen::MatrixXd bulk_grad_gram(const BulkGrid& grid, const BulkBasis& F);
/// Gram of the symmetric gradients.
Eigen::MatrixXd bulk_strain_gram(const BulkGrid& grid, const BulkBasis& F);
Eigen::VectorXd bulk_load(const BulkGrid& grid, const BulkBasis& F, const BulkField& f);

void write_csv(const std::string& path, const BulkGrid& grid, const BulkField& f);

} // namespace thinlim
