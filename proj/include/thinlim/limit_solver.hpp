#pragma once

#include "thinlim/spaces.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace thinlim {

struct LimitProblem {
    double nu = 1.0;
    double gamma0 = 0.0;
    double gamma1 = 0.0;
    SurfaceField g; // scalar weight with jets
    SurfaceField f; // tangential L2 part of the force
    std::optional<SurfaceField> f_grad; // scalar p: the datum adds grad p in H^-1, paired as -(p, div(g eta))
};

struct LimitSettings {
    double tol = 1e-9;
    int max_iter = 200;
    int growth_window = 5;
    std::uint64_t seed = 1;
    int probe_starts = 4;
};

struct LimitSolution {
    SurfaceField v;
    Eigen::VectorXd coeffs;
    std::vector<double> residuals; // relative H^-1 residual per Picard step
    bool converged = false;
    double h1 = 0.0;
    double c_a = 0.0;
    double c_b = 0.0;
    double rho_u = 0.0;
    bool inside_ball = false;
};

/// Discrete V_g with precomputed forms; basis H1-orthonormal.
struct LimitSystem {
    const Surface* S = nullptr;
    LimitProblem problem;
    KillingBasis killing;
    FieldSet basis;
    Eigen::MatrixXd A;  // A(i,j) = a_g(phi_j, phi_i)
    Eigen::VectorXd F;  // [g f, phi_i]

    Eigen::MatrixXd convection(const Eigen::VectorXd& c) const; // B(i,j) = b_g(v, phi_j, phi_i)
    Eigen::VectorXd residual(const Eigen::VectorXd& c) const;
    /// [a_g(v, phi_i) + b_g(v, v, phi_i)]_i for a field outside the discrete space.
    Eigen::VectorXd weak_form(const SurfaceField& v) const;
    SurfaceField field(const Eigen::VectorXd& c) const { return field_of(basis, c); }
};

/// a_g(v1, v2) on arbitrary tangential fields with jets.
double apply_a_g(const Surface& S, const LimitProblem& p, const SurfaceField& v1, const SurfaceField& v2);
double apply_b_g(const Surface& S, const SurfaceField& g, const SurfaceField& v1, const SurfaceField& v2, const SurfaceField& v3);
Eigen::MatrixXd assemble_a_g(const Surface& S, const LimitProblem& p, const FieldSet& F);
/// [g f, phi_i] for each column of F.
Eigen::VectorXd assemble_load(const Surface& S, const LimitProblem& p, const FieldSet& F);

struct PoissonResult {
    SurfaceField q;
    double weak_residual = 0.0;   // relative, discrete weak form
    double strong_residual = 0.0; // relative L2 of -div(g grad q) - eta
};
PoissonResult weighted_poisson(const Surface& S, const SurfaceField& g, const SurfaceField& eta);

/// Builds V_g. When the Killing basis is empty or friction is present no constraint is imposed.
LimitSystem build_limit_system(const Surface& S, const LimitProblem& p, const TangentBasis& T);
LimitSolution solve_limit(const LimitSystem& sys, const Eigen::VectorXd& initial, const LimitSettings& settings);

/// Coercivity constant c_a = 1 / lambda_min over the discrete space.
double estimate_c_a(const LimitSystem& sys);
/// sup |b_g(u, v, w)| / (|u| |v| |w|) in H1 by alternating Riesz maximization.
double estimate_c_b(const LimitSystem& sys, std::uint64_t seed, int starts);

SurfaceField divergence_repair(const Surface& S, const SurfaceField& g, const SurfaceField& v);
SurfaceField killing_correct(const Surface& S, const SurfaceField& g, const KillingBasis& K, const SurfaceField& v);

/// Weak-form compatibility [g f, w_k] for each Killing field.
Eigen::VectorXd compatibility(const Surface& S, const LimitProblem& p, const KillingBasis& K);

} // namespace thinlim
