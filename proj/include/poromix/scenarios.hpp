#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "poromix/solver.hpp"

namespace poromix {

enum class MandelVariant { Constant, Nonlinear };
const char* variant_name(MandelVariant v);

/// Quarter domain (0,L)x(0,H) of Mandel's problem. Pressure and zero traction
/// are prescribed on x = L, the left and bottom sides slide, the top carries
/// the traction (0,-F). No flux anywhere except through x = L.
struct MandelSetup {
    double L = 1.0;
    double H = 1.0;
    double F = 100.0;
    double E = 1e3;
    double nu = 1.0 / 3.0;
    double c0 = 4e-10;
    double alpha = 0.9;
    double mu_f = 1e-3;
    double rho = 1.0;       // kept for completeness, the model has no inertia
    double kappa0 = 5.1e-8;
    double k0 = 5.0;        // nonlinear law k0 kappa0 exp(k1 zeta)
    double k1 = 30.0;
    double t_end = 1.0;
    double dt = 0.01;

    int degree = 1;
    int nx = 8;
    int ny = 8;
    int midline_samples = 101;
    std::vector<double> midline_times{0.01, 0.1, 0.5, 1.0};
    SolverConfig solver;

    void validate() const;
    int num_steps() const;
    MaterialParams params() const;
    PermeabilityLaw law(MandelVariant v) const;
    Vec2 probe1() const { return {0.0, 0.5 * H}; }
    Vec2 probe2() const { return {0.5 * L, H}; }
    /// Tagged problem data on the structured mesh of the setup.
    ProblemData data() const;
    Mesh mesh() const;
};

MandelSetup mandel_parameters_default();

struct ProbeSample {
    double p = 0.0;
    Mat2 stress = Mat2::Zero();
    Vec2 u = Vec2::Zero();
};

struct TransientRecord {
    double t = 0.0;
    ProbeSample probe1;
    ProbeSample probe2;
    int iterations = 0;
};

struct MidlineRow {
    double x = 0.0;
    double p = 0.0;
    Vec2 u = Vec2::Zero();
    Mat2 strain = Mat2::Zero();
    Mat2 stress = Mat2::Zero();
};

struct MandelResult {
    MandelVariant variant = MandelVariant::Constant;
    std::vector<TransientRecord> records;
    std::map<double, std::vector<MidlineRow>> midlines;  // keyed by the step time
    FieldState final_state;
    double peak_pressure = 0.0;   // max over steps of p at probe 1
    double max_slide_flux = 0.0;  // max over steps and slide edges of |int_e u.n| / ||u||_inf
};

/// Backward Euler from zero strain and pressure. Non-convergence raises
/// NonConvergenceError naming the step.
MandelResult run_mandel(const MandelSetup& setup, MandelVariant variant,
                        const std::function<void(const TransientRecord&)>& progress = {});

std::vector<MidlineRow> sample_midline(const FieldState& state, const MandelSetup& setup);
/// max over slide edges of |int_e u.n| relative to max |u| over the edge points
double slide_normal_flux(const FieldState& state, const std::vector<std::string>& tags);

/// mandel_transients.csv
void write_transients_csv(std::ostream& os, const std::vector<TransientRecord>& records);
/// mandel_midline_<t>.csv
void write_midline_csv(std::ostream& os, const std::vector<MidlineRow>& rows);
std::string midline_file_name(double t);

} // namespace poromix
