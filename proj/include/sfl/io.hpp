#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "sfl/grid.hpp"

namespace sfl {

// Binary layout of a grid function (native little-endian):
//   char[4]  magic "SFLG"
//   uint32   format version (1)
//   int32    dimension N
//   int32    nodes per axis n
//   float64  half width L
//   float64  spacing h
//   float64  values[n^N], row-major with axis 0 slowest
inline constexpr char kFieldMagic[4] = {'S', 'F', 'L', 'G'};
inline constexpr std::uint32_t kFieldVersion = 1;

// Writes to a temporary sibling and renames, so readers never observe a
// partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("short write to '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline std::string serialize_field(const GridFunction& u) {
    const Grid& g = u.grid();
    std::string out;
    auto put = [&out](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
    put(kFieldMagic, 4);
    put(&kFieldVersion, sizeof kFieldVersion);
    const std::int32_t dim = g.dim();
    const std::int32_t n = g.nodes_per_axis();
    const double l = g.half_width();
    const double h = g.spacing();
    put(&dim, sizeof dim);
    put(&n, sizeof n);
    put(&l, sizeof l);
    put(&h, sizeof h);
    put(u.values().data(), u.size() * sizeof(double));
    return out;
}

inline GridFunction deserialize_field(const std::string& bytes) {
    constexpr std::size_t header = 4 + 4 + 4 + 4 + 8 + 8;
    if (bytes.size() < header || bytes.compare(0, 4, kFieldMagic, 4) != 0) {
        throw Error("not a grid function file (bad magic)");
    }
    std::size_t off = 4;
    auto get = [&](void* p, std::size_t n) {
        std::memcpy(p, bytes.data() + off, n);
        off += n;
    };
    std::uint32_t version = 0;
    std::int32_t dim = 0;
    std::int32_t n = 0;
    double l = 0.0;
    double h = 0.0;
    get(&version, sizeof version);
    if (version != kFieldVersion) throw Error("unsupported grid function version " + std::to_string(version));
    get(&dim, sizeof dim);
    get(&n, sizeof n);
    get(&l, sizeof l);
    get(&h, sizeof h);
    auto grid = std::make_shared<const Grid>(dim, l, h, n);
    if (bytes.size() != header + grid->size() * sizeof(double)) {
        throw Error("grid function payload has the wrong length");
    }
    std::vector<double> values(grid->size());
    get(values.data(), values.size() * sizeof(double));
    return GridFunction(grid, std::move(values));
}

inline void write_field(const std::filesystem::path& path, const GridFunction& u) {
    write_file_atomic(path, serialize_field(u));
}

inline GridFunction read_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_field(ss.str());
}

// CSV for plotting: one row per node, coordinates then value.
inline std::string field_to_csv(const GridFunction& u) {
    const Grid& g = u.grid();
    std::ostringstream os;
    os << std::setprecision(17);
    static const char* axis_names[3] = {"x", "y", "z"};
    for (int a = 0; a < g.dim(); ++a) os << axis_names[a] << ',';
    os << "value\n";
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto x = g.position(i);
        for (int a = 0; a < g.dim(); ++a) os << x[a] << ',';
        os << u[i] << '\n';
    }
    return os.str();
}

}  // namespace sfl
