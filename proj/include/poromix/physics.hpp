#pragma once

#include <atomic>
#include <map>
#include <string>
#include <variant>

#include "poromix/mesh.hpp"
#include "poromix/types.hpp"

namespace poromix {

/// Lame parameters, storativity, Biot-Willis coefficient and fluid viscosity.
struct MaterialParams {
    double lambda = 1.0;
    double mu = 1.0;
    double c0 = 1.0;
    double alpha = 1.0;
    double mu_f = 1.0;

    static MaterialParams from_young(double E, double nu, double c0, double alpha, double mu_f);
    /// Throws ConfigError naming the offending parameter.
    void validate() const;
};

namespace permeability {

/// kappa0 / mu_f
struct Constant {
    double kappa0 = 1.0;
};
/// k0/mu_f + k1/mu_f exp(k2 zeta)
struct Exponential {
    double k0 = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
};
/// k0/mu_f + k1 zeta^3 / (mu_f (1-zeta)^2)
struct KozenyCarman {
    double k0 = 0.0;
    double k1 = 0.0;
};
/// k0 kappa0 exp(k1 zeta) / mu_f
struct ScaledExponential {
    double k0 = 1.0;
    double k1 = 0.0;
    double kappa0 = 1.0;
};
/// Exponential law driven by the porosity-weighted fluid content
/// zeta = phi0 + (1 - phi0)(c0 p + alpha tr d).
struct PorosityExponential {
    double k0 = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
    ScalarField phi0;
};

} // namespace permeability

/// Counts evaluations where the Kozeny-Carman argument had to be clamped.
struct PermeabilityDiagnostics {
    std::atomic<long> clamped{0};
};

/// Isotropic permeability closure kappa(zeta) (a scalar multiplying the identity).
/// Every law returns an intrinsic permeability divided by the fluid viscosity.
struct PermeabilityLaw {
    using Variant = std::variant<permeability::Constant, permeability::Exponential,
                                 permeability::KozenyCarman, permeability::ScaledExponential,
                                 permeability::PorosityExponential>;
    Variant law = permeability::Constant{};
    /// Kozeny-Carman only: clamp zeta to kozeny_max_zeta instead of failing near the pole.
    bool clamp_kozeny = true;
    double kozeny_max_zeta = 0.99;

    bool is_constant() const { return std::holds_alternative<permeability::Constant>(law); }
    std::string name() const;
};

/// zeta = c0 p + alpha tr d
double fluid_content(const MaterialParams& params, double tr_d, double p);
/// zeta = phi0 + (1 - phi0)(c0 p + alpha tr d)
double fluid_content_porosity(const MaterialParams& params, double phi0, double tr_d, double p);

/// Fluid content the law depends on, at point x; also returns d zeta / d(c0 p + alpha tr d).
double law_fluid_content(const PermeabilityLaw& law, const MaterialParams& params, double tr_d,
                         double p, const Vec2& x, double* dzeta = nullptr);

/// Throws SolverError for a non-positive value, or at the Kozeny-Carman pole
/// when clamping is disabled.
double eval_permeability(const PermeabilityLaw& law, const MaterialParams& params, double zeta,
                         PermeabilityDiagnostics* diagnostics = nullptr);
double eval_permeability_derivative(const PermeabilityLaw& law, const MaterialParams& params,
                                    double zeta);

/// C d = lambda tr(d) I + 2 mu d for symmetric d; throws std::invalid_argument
/// when d is not symmetric to `tol` (relative).
Mat2 hooke(const MaterialParams& params, const Mat2& d, double tol = 1e-12);

enum class MechanicalBC { Displacement, Traction, Slide };
enum class FlowBC { Flux, Pressure };

/// Boundary data on one tagged part of the boundary. Displacement and flux
/// are natural here; traction and pressure are essential.
struct BoundaryCondition {
    MechanicalBC mechanical = MechanicalBC::Displacement;
    VectorField mechanical_value;  // u_Gamma or sigma n; empty means zero
    FlowBC flow = FlowBC::Flux;
    ScalarField flow_value;        // r_Gamma or p; empty means zero
};

/// Loads and boundary data of one problem.
struct ProblemData {
    VectorField f;  // body force, empty means zero
    ScalarField g;  // mass source, empty means zero
    std::map<std::string, BoundaryCondition> boundary;

    /// Every mesh tag needs exactly one entry and every entry must name a mesh tag.
    void validate(const Mesh& mesh) const;
    const BoundaryCondition& on(const std::string& tag) const;
};

} // namespace poromix
