#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqglab/construction.hpp"
#include "sqglab/experiments.hpp"
#include "sqglab/solver.hpp"

namespace sqglab {

// Schema or value error with the offending line (0 when not tied to a line) and field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, std::string field, const std::string& msg);
    int line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    int line_;
    std::string field_;
};

// Initial datum built by `gen` and `run`.
enum class DatumKind { Background, Perturbed, Glued, ProductMode, Random };
std::string datum_name(DatumKind d);
DatumKind parse_datum(const std::string& s);

struct ConstructionBlock {
    std::string preset = "small";
    double s = 1.75, K = 1.0;
    int P = 4;
    double lambda = 32.0;
    double B = 1.5, eta = 0.01, gamma = 0.01, epsilon = 0.1;
    int J = 1;
    double ratio = 256.0;  // lambda_{j+1} / lambda_j for glued data
    std::string cutoff = "bump";
    int n = 512;
    double L = kTwoPi;
    double lambda_tilde = 64.0, N_tilde = 2.0;  // 0 selects the asymptotic relations
    DatumKind datum = DatumKind::Perturbed;
    int q = 8;         // product-mode wavenumber
    int band = 8;      // random datum: modes with |k|_inf <= band
};

struct SolverBlock {
    double dt = 0.0;  // 0: from the CFL target
    double t_end = 1.0;
    bool dealias = true;
    double filter_strength = 0.0;
    int filter_order = 36;
    double cfl_target = 0.4;
};

struct OutputBlock {
    std::string dir = "out";
    int diagnostics_every = 1;
    int snapshot_every = 0;  // 0: initial and final snapshots only
    bool spectral_snapshots = false;
    std::vector<double> betas{1.0, 2.0};
};

struct RunConfig {
    ConstructionBlock construction;
    SolverBlock solver;
    OutputBlock output;
    std::uint64_t seed = 0;

    SolverConfig solver_config() const;
    Preset as_preset() const;
    Grid grid() const { return Grid(construction.n, construction.L); }
};

// Strict key = value document with [construction], [solver] and [output]
// tables and a top-level seed. Unknown keys, duplicate keys and an empty
// document are errors. Values: numbers, "strings", true/false, [numbers].
// When construction.preset is set its values are the defaults for that table.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Checks ranges and the construction invariants (exponent inequalities, scale
// relation, lattice rounding). Throws ConfigError naming the field.
void validate_config(const RunConfig& c);

// Canonical text form; parse_config(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const RunConfig& c);

RunConfig config_from_preset(const std::string& preset);

bool operator==(const RunConfig& a, const RunConfig& b);

// Resolved construction parameters (N, rounded wavenumbers, perturbation
// scales, annuli) for metadata files.
nlohmann::json resolved_metadata(const RunConfig& c);

// Builds the configured initial datum.
ScalarField build_datum(const RunConfig& c);

}  // namespace sqglab
