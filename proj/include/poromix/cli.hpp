#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "poromix/scenarios.hpp"
#include "poromix/verification.hpp"

namespace poromix::cli {

enum class Command { Convergence, Mandel, Solve };

enum ExitCode : int {
    kSuccess = 0,
    kConfigError = 2,
    kSolverFailure = 3,
    kBandFailure = 4,
};

/// Everything one run needs, read from a single INI file. Sections:
/// [run] [mesh] [material] [permeability] [solver] [output] [convergence]
/// [mandel] [loads] and one [boundary.<tag>] per boundary part (solve only).
struct RunConfig {
    Command command = Command::Convergence;
    int degree = 0;
    int levels = 6;

    // mesh for `solve`: a structured rectangle unless `mesh_file` is set
    int nx = 4;
    int ny = 4;
    double lx = 1.0;
    double ly = 1.0;
    std::string mesh_file;

    MaterialParams params;
    PermeabilityLaw law;
    std::string law_key = "kozeny";
    SolverConfig solver;

    // convergence
    double rate_low = 0.0;   // 0 selects the band for the degree
    double rate_high = 0.0;
    int band_levels = 2;     // trailing levels whose rates are checked

    // mandel
    MandelSetup mandel;
    std::vector<MandelVariant> variants{MandelVariant::Constant, MandelVariant::Nonlinear};

    // solve
    bool manufactured = false;
    Vec2 body_force = Vec2::Zero();
    double source = 0.0;
    ProblemData data;
    bool write_vtk = true;

    std::filesystem::path out_dir = "out";

    /// Throws ConfigError with the offending key.
    void validate() const;
    std::pair<double, double> rate_band() const;
};

/// Command-line values that take precedence over the file.
struct Overrides {
    std::optional<std::string> command;
    std::optional<std::filesystem::path> out;
    std::optional<int> degree;
    std::optional<int> levels;
    std::optional<std::string> law;
};

Command parse_command(const std::string& s);
const char* command_name(Command c);
/// Builds a law from its CLI key {constant, exp, kozeny, scaled-exp} and parameters.
PermeabilityLaw make_law(const std::string& key, double kappa0, double k0, double k1, double k2);

RunConfig parse_config(std::istream& is, const Overrides& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

/// Runs a validated configuration; progress and summaries go to `log`.
/// Returns an ExitCode; library exceptions propagate.
int run(const RunConfig& config, std::ostream& log);

/// Whole program: argument parsing, configuration, error to exit-code mapping.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Legacy-VTK unstructured grid with the fields sampled at the vertices of
/// every cell (cells do not share points, so discontinuous fields stay exact).
void write_vtk(std::ostream& os, const FieldState& state);
/// Coefficient vectors: field,index,value
void write_fields_csv(std::ostream& os, const FieldState& state);

} // namespace poromix::cli
