#pragma once

#include "thinlim/averaging.hpp"
#include "thinlim/constants.hpp"
#include "thinlim/thin_domain.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace thinlim {

/// A1: some friction coefficient >= c eps; A2: no weighted Killing fields; A3: no friction and
/// the velocity space is taken orthogonal to the rigid motions R_g.
enum class Assumption { A1, A2, A3 };
std::string assumption_name(Assumption a);
Assumption assumption_from_name(const std::string& s);

struct BulkProblem {
    double nu = 1.0;
    double gamma0 = 0.0; // gamma_eps^0, already scaled with eps
    double gamma1 = 0.0;
    Assumption assumption = Assumption::A3;
};

struct BulkSettings {
    int ns = tol::normal_points;
    int modes = 3;
    int mode_degree = -1;
    double tol = tol::picard_rel;
    int max_iter = tol::picard_maxit;
    int growth_window = tol::picard_growth_window;
};

/// Discrete V_eps: the Piola space (exactly solenoidal and tangent to both sheets), restricted
/// to R_g-perp under A3 and H1-orthonormalized. Grids point into the object, so it is pinned.
class BulkSystem {
public:
    BulkSystem(const Surface& S, const SurfaceField& g0, const SurfaceField& g1, double eps, const BulkProblem& problem,
               const BulkSettings& settings = {});
    BulkSystem(const BulkSystem&) = delete;
    BulkSystem& operator=(const BulkSystem&) = delete;

    const ThinDomainSpec& spec() const { return spec_; }
    const Surface& surface() const { return *spec_.S; }
    const BulkGrid& grid() const { return grid_; }
    const BulkGrid& sheet(int i) const { return sheet_[i]; }
    const BulkProblem& problem() const { return problem_; }
    int size() const { return basis_.size(); }
    const BulkBasis& basis() const { return basis_; }
    const BulkBasis& sheet_basis(int i) const { return sheet_basis_[i]; }
    /// Generators (a; b) of the rigid motions removed under A3 (empty otherwise).
    const Eigen::MatrixXd& rigid() const { return rigid_; }

    /// A(i, j) = a_eps(phi_j, phi_i).
    const Eigen::MatrixXd& A() const { return A_; }
    /// L2 Gram of the basis.
    const Eigen::MatrixXd& mass() const { return mass_; }
    /// F_i = (f, phi_i).
    Eigen::VectorXd load(const BulkField& f) const;
    /// B(i, j) = b_eps(u, phi_j, phi_i) for u with coefficients c.
    Eigen::MatrixXd convection(const Eigen::VectorXd& c) const;
    Eigen::VectorXd residual(const Eigen::VectorXd& c, const Eigen::VectorXd& F) const;

    BulkField field(const Eigen::VectorXd& c) const { return field_of(basis_, c); }
    SampledField trace(const Eigen::VectorXd& c) const;
    /// L2(Omega_eps) projection onto the discrete space: the discrete P_eps.
    Eigen::VectorXd project(const BulkField& f) const;
    /// max_k |(f, w_k)| / (|f| |w_k|) over the removed rigid motions.
    double rigid_defect(const BulkField& f) const;
    /// Extreme eigenvalues of a_eps relative to the H1 inner product on the discrete space.
    std::pair<double, double> coercivity() const;

private:
    ThinDomainSpec spec_;
    BulkGrid grid_;
    BulkGrid sheet_[2];
    BulkProblem problem_;
    BulkBasis basis_;
    BulkBasis sheet_basis_[2];
    Eigen::MatrixXd rigid_;
    Eigen::MatrixXd A_, mass_;
    Eigen::LDLT<Eigen::MatrixXd> mass_ldlt_;
};

struct BulkSolution {
    BulkField u;
    Eigen::VectorXd coeffs;
    std::vector<double> residuals;
    bool converged = false;
    double h1 = 0.0;
    double h2 = 0.0;            // nodal-differentiation proxy
    double tangency = 0.0;      // max |u . n_eps| over both sheets
    double divergence = 0.0;    // max |div u|
    double rigid_defect = 0.0;  // relative, A3 only
    double energy_defect = 0.0; // |a(u, u) - (f, u)| / |(f, u)|
};

/// Picard iteration (A + B(u_k)) u_{k+1} = F. Throws invalid_argument when f is not L2-orthogonal
/// to R_g under A3 (relative tol::compat) and runtime_error on divergence.
BulkSolution solve_bulk(const BulkSystem& sys, const BulkField& f, const Eigen::VectorXd& initial = {},
                        const BulkSettings& settings = {});

/// a_eps on fields given on the volume grid and both sheets.
double apply_a_eps(const BulkSystem& sys, const SampledField& u1, const SampledField& u2);
/// b_eps(u1, u2, u3) = -(u2, (u1 . grad) u3).
double apply_b_eps(const BulkGrid& grid, const BulkField& u1, const BulkField& u2, const BulkField& u3);

/// Leray projections of seeded smooth ambient fields A x exp(k . x / 2) into the discrete space.
std::vector<Eigen::VectorXd> random_solenoidal_corpus(const BulkSystem& sys, int count, std::uint64_t seed);

/// Worst relative defects over a corpus: b(u, v, v) against int |v . (u . grad) v|, and for the
/// rotations w = e_i x x, a(u, w) against |u|_{H1} |w|_{H1} and b(u, u, w) against int |w . (u . grad) u|.
struct FormIdentityReport {
    int fields = 0;
    double b_antisym = 0.0;
    double a_rotation = 0.0;
    double b_rotation = 0.0;
};
FormIdentityReport check_form_identities(const BulkSystem& sys, const std::vector<Eigen::VectorXd>& corpus);

/// Fitted eps-exponents of the bulk norms against their targets.
struct AprioriReport {
    double alpha = 1.0;
    std::vector<double> eps, h1, h2, normal_average;
    RateFit fit_h1, fit_h2, fit_normal;
    double target_h1 = 0.5, target_h2 = 0.0, target_normal = 0.5;
    bool exact_zero = false;
    bool normal_zero = false; // M u . n vanishes identically (constant g), fit skipped
    bool pass = false;
};

/// Per-eps norms of a solution needed by verify_apriori.
struct AprioriSample {
    double eps = 0.0, h1 = 0.0, h2 = 0.0, normal_average = 0.0;
};
AprioriSample apriori_sample(const BulkSystem& sys, const BulkSolution& sol);
/// Targets 1/2, (-1 + alpha)/2 and alpha/2 for |u|_{H1}, the H2 proxy and |M u . n|_{H1(Gamma)}.
AprioriReport verify_apriori(const std::vector<AprioriSample>& samples, double alpha, double slack = tol::slack);

/// Sweep of the boundary estimate |P d_n u + W u| <= c eps |u|_{H2} for slip fields.
AverageReport verify_boundary_lemma(const Surface& S, const SurfaceField& g0, const SurfaceField& g1,
                                    const std::vector<double>& eps, const Corpus& corpus,
                                    const AverageSettings& settings = {});

} // namespace thinlim
