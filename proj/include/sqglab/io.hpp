#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "sqglab/spectral.hpp"

namespace sqglab {

// Snapshot layout: <path> holds n*n little-endian float64 values in row-major
// order (interleaved re/im over the n x (n/2+1) half spectrum for spectral
// snapshots); <path>.json holds {version, kind, n, domain_length, time, name}.
constexpr int kSnapshotVersion = 1;

struct SnapshotError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SnapshotVersionError : SnapshotError {
    using SnapshotError::SnapshotError;
};
struct SnapshotDimensionError : SnapshotError {
    using SnapshotError::SnapshotError;
};
struct SnapshotTruncatedError : SnapshotError {
    using SnapshotError::SnapshotError;
};

struct SnapshotMeta {
    int version = kSnapshotVersion;
    std::string kind = "physical";  // or "spectral"
    int n = 0;
    double domain_length = 0.0;
    double time = 0.0;
    std::string name;
};

std::filesystem::path sidecar_path(const std::filesystem::path& data);

void write_snapshot(const ScalarField& f, const std::filesystem::path& path, double time = 0.0,
                    const std::string& name = "theta");
void write_spectral_snapshot(const SpectralField& F, const std::filesystem::path& path, double time = 0.0,
                             const std::string& name = "theta_hat");

// Reads the sidecar; a missing, unparsable or foreign header is a version error.
SnapshotMeta read_snapshot_meta(const std::filesystem::path& path);

// expected_n > 0 also checks the grid size against a configuration.
ScalarField read_snapshot(const std::filesystem::path& path, SnapshotMeta* meta = nullptr, int expected_n = 0);
SpectralField read_spectral_snapshot(const std::filesystem::path& path, SnapshotMeta* meta = nullptr,
                                     int expected_n = 0);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace sqglab
