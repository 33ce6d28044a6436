#pragma once

// Every numerical tolerance and default lives here.

namespace thinlim::tol {

// geometry
inline constexpr double unit_normal = 1e-12;
inline constexpr double projector = 1e-12;
inline constexpr double weingarten_sym = 1e-10;
inline constexpr double tangential = 1e-10;     // |v.n| relative, tangential flag
inline constexpr double area_sphere = 1e-6;
inline constexpr double rank_cut = 1e-10;       // SVD rank truncation, relative
inline constexpr double chart_fd_step = 1e-3;   // fourth-order stencil for grad W off the sphere
inline constexpr double self_intersection_samples = 2048;

// design order claimed for the spectral scheme (in 1/degree)
inline constexpr double design_order = 4.0;

// thin domain
inline constexpr double curvature_bracket = 2.0; // c in c^-1 <= 1 - r kappa <= c
inline constexpr double singular_pivot = 1e-12;
inline constexpr int normal_points = 4;
inline constexpr double leray_cg = 1e-10;
inline constexpr int leray_cg_maxit = 5000;
inline constexpr double friction_admissible = 2.0; // gamma_eps^i <= c eps

// discrete checks of estimate hypotheses, relative
inline constexpr double hypothesis_flux = 1e-10; // |u . n_eps| / max |u|
inline constexpr double hypothesis_div = 1e-9;   // |div u| / max |grad u|
inline constexpr double hypothesis_slip = 1e-8;  // |P_eps D(u) n_eps + gamma u| / max(|u| + |grad u|)
inline constexpr double hypothesis_orth = 1e-10; // |(u, w)| / (|u| |w|)

// spaces
inline constexpr double killing_gap = 1e-6;
inline constexpr double killing_ambiguous = 1e-3;
inline constexpr double korn_floor = 1e-8;
inline constexpr double riesz_cond_cap = 1e14;
inline constexpr double idempotence = 1e-8;

// limit solver
inline constexpr double picard_rel = 1e-9;
inline constexpr int picard_maxit = 200;
inline constexpr int picard_growth_window = 5;
inline constexpr double poisson_rel = 1e-12;
inline constexpr double mean_zero = 1e-10;
inline constexpr double compat = 1e-8;

// bulk
inline constexpr double bulk_constraint = 1e-8;

// harness
inline constexpr double slack = 0.2;
inline constexpr double exact_zero = 1e-13;

} // namespace thinlim::tol
