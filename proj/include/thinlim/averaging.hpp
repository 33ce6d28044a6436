#pragma once

#include "thinlim/constants.hpp"
#include "thinlim/rates.hpp"
#include "thinlim/thin_domain.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace thinlim {

/// M u(y) = (1 / eps g) int u(y + r n) dr, with tangential jets when u carries a gradient.
SurfaceField average_M(const BulkGrid& grid, const BulkField& u);
/// M_tau u = P M u.
SurfaceField average_Mtau(const BulkGrid& grid, const BulkField& u);

/// a(s) eta extended along normal lines; eta is any vector field with jets.
BulkField profile_extension(const BulkGrid& grid, const SurfaceField& eta, const std::function<double(double)>& a,
                            const std::function<double(double)>& da);
/// psi n as a surface vector field with jets.
SurfaceField normal_field(const Surface& S, const SurfaceField& psi);
/// m . n as a scalar with tangential gradient.
SurfaceField normal_component(const Surface& S, const SurfaceField& m);
/// P m with jets.
SurfaceField tangential_part(const Surface& S, const SurfaceField& m);

/// Estimates checked as ratio(eps) = lhs / norm against a power of eps.
enum class AverageLemma {
    average_bound,           // |M_tau u|_{L2(G)} <= c eps^-1/2 |u|
    average_bound_h1,        // same in H1
    normal_average,          // |M u . n|_{L2(G)} <= c eps^1/2 |u|_{H1}, tangent on one sheet
    normal_average_h1,       // |M u . n|_{H1(G)} <= c eps^1/2 |u|_{H2}
    average_difference,      // |u - ext M_tau u| <= c eps |u|_{H1}, tangent on one sheet
    average_difference_h1,   // |P grad u - ext grad M_tau u| <= c eps |u|_{H2}
    near_adjoint,            // |(ext M_tau u1, u2) - (u1, ext M_tau u2)| <= c eps |u1| |u2|
    average_divergence,      // |div_G(g M_tau u)| <= c eps^1/2 |u|_{H1}, div u = 0, tangent on both sheets
    normal_derivative_trace, // |d_n u . n - g^-1 ext(M_tau u . grad g)| <= c eps |u|_{H2}
    inner_product,           // |(u, ext eta) - eps (g M_tau u, eta)| <= c eps^3/2 |u| |eta|
    rigid_orthogonal,        // (u, w) = 0 => |(g M_tau u, w)| <= c eps^1/2 (|a| + |b|) |u|
    leray_extension,         // |L E eta - ext eta| <= c eps^3/2 |eta|_{H1(G)}, div_G(g eta) = 0
    boundary_derivative,     // |P d_n u + W u| <= c eps |u|_{H2}, slip on one sheet
};

const std::vector<AverageLemma>& all_average_lemmas();
std::string lemma_name(AverageLemma l);
AverageLemma lemma_from_name(const std::string& name);
/// Exponent of eps in the bound.
double lemma_exponent(AverageLemma l);

/// Discretization shared by every corpus field at one eps.
struct AverageSettings {
    int ns = tol::normal_points;
    int modes = 3;
    int mode_degree = -1;
    double slack = tol::slack;
};

/// One eps: the thin domain, its grids and a lazily built discrete Leray projection.
/// Grids and the Piola space point into this object, so it is neither copied nor moved.
class LemmaContext {
public:
    LemmaContext(const Surface& S, const SurfaceField& g0, const SurfaceField& g1, double eps,
                 const AverageSettings& settings);
    LemmaContext(const LemmaContext&) = delete;
    LemmaContext& operator=(const LemmaContext&) = delete;

    const ThinDomainSpec& spec() const { return spec_; }
    const BulkGrid& volume() const { return volume_; }
    const BulkGrid& sheet(int i) const { return sheet_[i]; }
    const Surface& surface() const { return *spec_.S; }

    /// L2 projection onto the Piola space; returns fields on the volume grid and both sheets.
    void leray(const BulkField& u, BulkField& vol, BulkField& s0, BulkField& s1) const;

private:
    ThinDomainSpec spec_;
    BulkGrid volume_;
    BulkGrid sheet_[2];
    AverageSettings settings_;
    struct Projection;
    mutable std::shared_ptr<Projection> proj_;
};

/// A corpus member sampled on the volume grid and on both sheets.
struct SampledField {
    BulkField vol;
    BulkField sheet[2];
    SurfaceField surface; // generating surface field (needed by leray_extension)
};

enum class CorpusFamily { constant, general, extension, perturbed, leray, slip };

struct CorpusItem {
    std::string name;
    CorpusFamily family;
    std::function<SampledField(const LemmaContext&)> sample;
};
using Corpus = std::vector<CorpusItem>;

/// Manufactured fields: constant extensions, s-dependent fields with normal parts, E_eps images,
/// E_eps images plus eps sin(2 pi s) perturbations, and Leray-projected E_eps images of weighted
/// solenoidal fields. g is g1 - g0 and fixes the weighted solenoidal members.
Corpus default_corpus(const Surface& S, const SurfaceField& g);
/// Fields satisfying the slip conditions on the sheet r = 0 (requires g0 = 0 there).
Corpus slip_corpus(const Surface& S);
/// Families each estimate is measured on.
std::vector<CorpusFamily> lemma_families(AverageLemma l);

/// Worst case over a corpus at one eps.
struct LemmaSample {
    double eps = 0.0;
    double lhs = 0.0;
    double norm = 0.0; // right-hand side without constant and eps power
    double ratio = 0.0;
    std::string worst;
    std::vector<std::string> violations;
};

LemmaSample measure_lemma(const LemmaContext& ctx, const Corpus& corpus, AverageLemma lemma);

struct AverageReport {
    std::string lemma;
    double target = 0.0; // eps exponent of the bound
    std::vector<double> eps, lhs, bound, constant, ratio;
    std::vector<std::string> worst;
    std::vector<std::string> violations;
    RateFit fit;
    bool fitted = false;
    bool exact_zero = false;
    double constant_spread = 0.0; // max / min implied constant over the sweep
    bool pass = false;
};

/// Folds per-eps samples into a report; pass iff exponent >= target - slack, every implied
/// constant finite and no hypothesis violated.
AverageReport summarize_lemma(AverageLemma lemma, const std::vector<LemmaSample>& samples, double slack);

/// Sweeps eps for one estimate. g0, g1 carry jets.
AverageReport verify_average_bounds(const Surface& S, const SurfaceField& g0, const SurfaceField& g1,
                                    const std::vector<double>& eps, const Corpus& corpus, AverageLemma lemma,
                                    const AverageSettings& settings = {});

/// All requested estimates; eps values are processed by up to `workers` threads.
std::vector<AverageReport> verify_average_suite(const Surface& S, const SurfaceField& g0, const SurfaceField& g1,
                                                const std::vector<double>& eps, const Corpus& corpus,
                                                const std::vector<AverageLemma>& lemmas,
                                                const AverageSettings& settings = {}, int workers = 1);

} // namespace thinlim
