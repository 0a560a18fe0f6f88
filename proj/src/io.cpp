#include "sqglab/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace sqglab {

using nlohmann::json;

namespace {

void write_doubles(const std::filesystem::path& path, const double* data, std::size_t count) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw SnapshotError("cannot write " + path.string());
    if constexpr (std::endian::native == std::endian::little) {
        f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    } else {
        for (std::size_t k = 0; k < count; ++k) {
            std::uint64_t u;
            std::memcpy(&u, data + k, 8);
            u = __builtin_bswap64(u);
            f.write(reinterpret_cast<const char*>(&u), 8);
        }
    }
    if (!f) throw SnapshotError("write failed for " + path.string());
}

std::vector<double> read_doubles(const std::filesystem::path& path, std::size_t count) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw SnapshotError("cannot open " + path.string());
    const auto size = static_cast<std::size_t>(f.tellg());
    if (size < count * sizeof(double))
        throw SnapshotTruncatedError(path.string() + ": truncated data (" + std::to_string(size) + " bytes, expected " +
                                     std::to_string(count * sizeof(double)) + ")");
    if (size > count * sizeof(double))
        throw SnapshotDimensionError(path.string() + ": " + std::to_string(size) + " bytes do not match the header size " +
                                     std::to_string(count * sizeof(double)));
    f.seekg(0);
    std::vector<double> v(count);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!f) throw SnapshotTruncatedError(path.string() + ": short read");
    if constexpr (std::endian::native != std::endian::little) {
        for (auto& x : v) {
            std::uint64_t u;
            std::memcpy(&u, &x, 8);
            u = __builtin_bswap64(u);
            std::memcpy(&x, &u, 8);
        }
    }
    return v;
}

void write_meta(const std::filesystem::path& path, const SnapshotMeta& m) {
    write_json(sidecar_path(path), json{{"version", m.version},
                                        {"kind", m.kind},
                                        {"n", m.n},
                                        {"domain_length", m.domain_length},
                                        {"time", m.time},
                                        {"name", m.name},
                                        {"byte_order", "little"},
                                        {"dtype", "float64"}});
}

void check_dimensions(const SnapshotMeta& m, int expected_n, const std::filesystem::path& path) {
    if (m.n < 2 || m.n % 2) throw SnapshotDimensionError(path.string() + ": invalid grid size " + std::to_string(m.n));
    if (expected_n > 0 && m.n != expected_n)
        throw SnapshotDimensionError(path.string() + ": grid size " + std::to_string(m.n) + " does not match the expected " +
                                     std::to_string(expected_n));
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& data) { return data.string() + ".json"; }

void write_json(const std::filesystem::path& path, const json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << j.dump(2) << "\n";
}

json read_json(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    return json::parse(f);
}

void write_snapshot(const ScalarField& f, const std::filesystem::path& path, double time, const std::string& name) {
    write_doubles(path, f.values().data(), f.size());
    write_meta(path, SnapshotMeta{kSnapshotVersion, "physical", f.grid().n, f.grid().L, time, name});
}

void write_spectral_snapshot(const SpectralField& F, const std::filesystem::path& path, double time,
                             const std::string& name) {
    // std::complex<double> is layout-compatible with double[2].
    write_doubles(path, reinterpret_cast<const double*>(F.coeffs().data()), 2 * F.coeffs().size());
    write_meta(path, SnapshotMeta{kSnapshotVersion, "spectral", F.grid().n, F.grid().L, time, name});
}

SnapshotMeta read_snapshot_meta(const std::filesystem::path& path) {
    const auto side = sidecar_path(path);
    json j;
    try {
        j = read_json(side);
    } catch (const std::exception& e) {
        throw SnapshotVersionError(side.string() + ": unreadable snapshot header (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("version") || !j["version"].is_number_integer())
        throw SnapshotVersionError(side.string() + ": header carries no version tag");
    SnapshotMeta m;
    m.version = j["version"].get<int>();
    if (m.version != kSnapshotVersion)
        throw SnapshotVersionError(side.string() + ": snapshot version " + std::to_string(m.version) +
                                   " is not supported (expected " + std::to_string(kSnapshotVersion) + ")");
    try {
        m.kind = j.value("kind", std::string("physical"));
        m.n = j.at("n").get<int>();
        m.domain_length = j.at("domain_length").get<double>();
        m.time = j.value("time", 0.0);
        m.name = j.value("name", std::string());
    } catch (const json::exception& e) {
        throw SnapshotVersionError(side.string() + ": malformed header field (" + e.what() + ")");
    }
    return m;
}

ScalarField read_snapshot(const std::filesystem::path& path, SnapshotMeta* meta, int expected_n) {
    const SnapshotMeta m = read_snapshot_meta(path);
    if (m.kind != "physical") throw SnapshotError(path.string() + ": expected a physical snapshot, found " + m.kind);
    check_dimensions(m, expected_n, path);
    const Grid g(m.n, m.domain_length);
    ScalarField f(g, read_doubles(path, g.size()));
    if (meta) *meta = m;
    return f;
}

SpectralField read_spectral_snapshot(const std::filesystem::path& path, SnapshotMeta* meta, int expected_n) {
    const SnapshotMeta m = read_snapshot_meta(path);
    if (m.kind != "spectral") throw SnapshotError(path.string() + ": expected a spectral snapshot, found " + m.kind);
    check_dimensions(m, expected_n, path);
    const Grid g(m.n, m.domain_length);
    const std::vector<double> v = read_doubles(path, 2 * g.spectral_size());
    SpectralField F(g);
    for (std::size_t k = 0; k < F.coeffs().size(); ++k) F.coeffs()[k] = cplx(v[2 * k], v[2 * k + 1]);
    if (meta) *meta = m;
    return F;
}

}  // namespace sqglab
