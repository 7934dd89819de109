#include "poromix/physics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace poromix {

MaterialParams MaterialParams::from_young(double E, double nu, double c0, double alpha, double mu_f)
{
    if (!(E > 0.0) || !(nu > -1.0 && nu < 0.5)) {
        throw ConfigError("material: need E > 0 and -1 < nu < 1/2");
    }
    MaterialParams p;
    p.lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    p.mu = E / (2.0 * (1.0 + nu));
    p.c0 = c0;
    p.alpha = alpha;
    p.mu_f = mu_f;
    return p;
}

void MaterialParams::validate() const
{
    if (!(lambda >= 0.0)) throw ConfigError("material.lambda must be >= 0");
    if (!(mu > 0.0)) throw ConfigError("material.mu must be > 0");
    if (!(c0 > 0.0)) throw ConfigError("material.c0 must be > 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("material.alpha must lie in [0,1]");
    if (!(mu_f > 0.0)) throw ConfigError("material.mu_f must be > 0");
}

std::string PermeabilityLaw::name() const
{
    struct Namer {
        std::string operator()(const permeability::Constant&) const { return "constant"; }
        std::string operator()(const permeability::Exponential&) const { return "exp"; }
        std::string operator()(const permeability::KozenyCarman&) const { return "kozeny"; }
        std::string operator()(const permeability::ScaledExponential&) const { return "scaled-exp"; }
        std::string operator()(const permeability::PorosityExponential&) const { return "porosity-exp"; }
    };
    return std::visit(Namer{}, law);
}

double fluid_content(const MaterialParams& params, double tr_d, double p)
{
    return params.c0 * p + params.alpha * tr_d;
}

double fluid_content_porosity(const MaterialParams& params, double phi0, double tr_d, double p)
{
    return phi0 + (1.0 - phi0) * fluid_content(params, tr_d, p);
}

double law_fluid_content(const PermeabilityLaw& law, const MaterialParams& params, double tr_d,
                         double p, const Vec2& x, double* dzeta)
{
    if (const auto* pe = std::get_if<permeability::PorosityExponential>(&law.law)) {
        const double phi0 = pe->phi0 ? pe->phi0(x) : 0.0;
        if (dzeta) *dzeta = 1.0 - phi0;
        return fluid_content_porosity(params, phi0, tr_d, p);
    }
    if (dzeta) *dzeta = 1.0;
    return fluid_content(params, tr_d, p);
}

namespace {

double kozeny_argument(const PermeabilityLaw& law, double zeta, PermeabilityDiagnostics* diag,
                       bool* clamped)
{
    *clamped = false;
    if (law.clamp_kozeny) {
        if (zeta > law.kozeny_max_zeta) {
            *clamped = true;
            if (diag) diag->clamped.fetch_add(1, std::memory_order_relaxed);
            return law.kozeny_max_zeta;
        }
        return zeta;
    }
    if (zeta >= 1.0) {
        throw SolverError("Kozeny-Carman permeability evaluated at zeta = " + std::to_string(zeta)
                          + " (pole at zeta = 1)");
    }
    return zeta;
}

} // namespace

double eval_permeability(const PermeabilityLaw& law, const MaterialParams& params, double zeta,
                         PermeabilityDiagnostics* diagnostics)
{
    using namespace permeability;
    const double mu_f = params.mu_f;
    double kappa = 0.0;
    if (const auto* c = std::get_if<Constant>(&law.law)) {
        kappa = c->kappa0 / mu_f;
    } else if (const auto* e = std::get_if<Exponential>(&law.law)) {
        kappa = e->k0 / mu_f + e->k1 / mu_f * std::exp(e->k2 * zeta);
    } else if (const auto* kc = std::get_if<KozenyCarman>(&law.law)) {
        bool clamped = false;
        const double z = kozeny_argument(law, zeta, diagnostics, &clamped);
        kappa = kc->k0 / mu_f + kc->k1 * z * z * z / (mu_f * (1.0 - z) * (1.0 - z));
    } else if (const auto* se = std::get_if<ScaledExponential>(&law.law)) {
        kappa = se->k0 * se->kappa0 * std::exp(se->k1 * zeta) / mu_f;
    } else if (const auto* pe = std::get_if<PorosityExponential>(&law.law)) {
        kappa = pe->k0 / mu_f + pe->k1 / mu_f * std::exp(pe->k2 * zeta);
    }
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw SolverError("permeability " + law.name() + " is not positive at zeta = "
                          + std::to_string(zeta));
    }
    return kappa;
}

double eval_permeability_derivative(const PermeabilityLaw& law, const MaterialParams& params,
                                    double zeta)
{
    using namespace permeability;
    const double mu_f = params.mu_f;
    if (std::holds_alternative<Constant>(law.law)) return 0.0;
    if (const auto* e = std::get_if<Exponential>(&law.law)) {
        return e->k1 * e->k2 / mu_f * std::exp(e->k2 * zeta);
    }
    if (const auto* kc = std::get_if<KozenyCarman>(&law.law)) {
        bool clamped = false;
        const double z = kozeny_argument(law, zeta, nullptr, &clamped);
        if (clamped) return 0.0;
        const double r = 1.0 - z;
        return kc->k1 / mu_f * (3.0 * z * z / (r * r) + 2.0 * z * z * z / (r * r * r));
    }
    if (const auto* se = std::get_if<ScaledExponential>(&law.law)) {
        return se->k0 * se->kappa0 * se->k1 * std::exp(se->k1 * zeta) / mu_f;
    }
    const auto& pe = std::get<PorosityExponential>(law.law);
    return pe.k1 * pe.k2 / mu_f * std::exp(pe.k2 * zeta);
}

Mat2 hooke(const MaterialParams& params, const Mat2& d, double tol)
{
    const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
    if (std::abs(d(0, 1) - d(1, 0)) > tol * scale) {
        throw std::invalid_argument("hooke: strain tensor is not symmetric");
    }
    return params.lambda * d.trace() * Mat2::Identity() + 2.0 * params.mu * d;
}

void ProblemData::validate(const Mesh& mesh) const
{
    for (const auto& [tag, bc] : boundary) {
        if (mesh.tag_id(tag) < 0) {
            throw ConfigError("boundary condition given for unknown tag '" + tag + "'");
        }
    }
    for (const auto& tag : mesh.tag_names()) {
        if (!boundary.count(tag)) {
            throw ConfigError("no boundary condition given for tag '" + tag + "'");
        }
    }
}

const BoundaryCondition& ProblemData::on(const std::string& tag) const
{
    auto it = boundary.find(tag);
    if (it == boundary.end()) throw ConfigError("no boundary condition for tag '" + tag + "'");
    return it->second;
}

} // namespace poromix
