#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sqglab/config.hpp"
#include "sqglab/spectral.hpp"

namespace sqglab {

struct RunSummary {
    bool halted = false;
    std::string halt_reason;
    double t = 0.0;
    double dt = 0.0;
    int steps = 0;
    int rows = 0;
    SpectralField final_state;
};

// Evolves the configured datum and writes diagnostics.csv, snapshots/ and
// metadata.json under `dir`.
RunSummary run_simulation(const RunConfig& c, const std::filesystem::path& dir, std::ostream& log);

// Column names of diagnostics.csv for the given Sobolev indices.
std::vector<std::string> diagnostics_columns(const std::vector<double>& betas);

// Entry point of the sqglab executable. Exit codes: 0 success, 1 usage or
// runtime error (including a halted run), 2 experiment failure,
// 3 inconclusive experiment.
int main_cli(int argc, const char* const* argv);

}  // namespace sqglab
