#pragma once

// JSON containers for value functions and controllers. Coefficient arrays
// travel as base64 little-endian f64; blocks above the sidecar threshold go
// to a flat binary sidecar file referenced by offset/count. Round-trips are
// bit-exact.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppr/control.hpp"
#include "ppr/synthesis.hpp"
#include "ppr/types.hpp"

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

namespace ppr {

using Json = nlohmann::json;

namespace detail {

inline constexpr char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const unsigned char* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        uint32_t chunk = static_cast<uint32_t>(data[i]) << 16;
        if (i + 1 < len) chunk |= static_cast<uint32_t>(data[i + 1]) << 8;
        if (i + 2 < len) chunk |= static_cast<uint32_t>(data[i + 2]);
        out.push_back(kB64Chars[(chunk >> 18) & 0x3f]);
        out.push_back(kB64Chars[(chunk >> 12) & 0x3f]);
        out.push_back(i + 1 < len ? kB64Chars[(chunk >> 6) & 0x3f] : '=');
        out.push_back(i + 2 < len ? kB64Chars[chunk & 0x3f] : '=');
    }
    return out;
}

inline std::vector<unsigned char> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        if (c == '=') return -1;
        throw ModelError("base64: invalid character");
    };
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    uint32_t chunk = 0;
    int have = 0;
    for (char c : text) {
        const int v = value_of(c);
        if (v < 0) break;
        chunk = (chunk << 6) | static_cast<uint32_t>(v);
        if (++have == 4) {
            out.push_back((chunk >> 16) & 0xff);
            out.push_back((chunk >> 8) & 0xff);
            out.push_back(chunk & 0xff);
            have = 0;
            chunk = 0;
        }
    }
    if (have == 2) {
        out.push_back((chunk >> 4) & 0xff);
    } else if (have == 3) {
        out.push_back((chunk >> 10) & 0xff);
        out.push_back((chunk >> 2) & 0xff);
    } else if (have != 0) {
        throw ModelError("base64: truncated input");
    }
    return out;
}

inline std::string encode_doubles(const Vector& v) {
    return base64_encode(reinterpret_cast<const unsigned char*>(v.data()), sizeof(double) * v.size());
}

inline Vector decode_doubles(const std::string& text, Index expected) {
    const std::vector<unsigned char> bytes = base64_decode(text);
    if (bytes.size() != static_cast<size_t>(expected) * sizeof(double))
        throw ModelError("coefficient block has wrong byte length");
    Vector v(expected);
    std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
}

// Writes one coefficient block: inline base64 below the threshold, sidecar
// bytes above it.
inline Json write_block(const Vector& v, std::ofstream* sidecar, const std::string& sidecar_name,
                        uint64_t& sidecar_offset, size_t sidecar_threshold) {
    const size_t bytes = sizeof(double) * static_cast<size_t>(v.size());
    if (sidecar != nullptr && bytes >= sidecar_threshold) {
        sidecar->write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(bytes));
        Json j{{"sidecar", sidecar_name}, {"offset", sidecar_offset}, {"count", v.size()}};
        sidecar_offset += bytes;
        return j;
    }
    return Json{{"b64", encode_doubles(v)}};
}

inline Vector read_block(const Json& j, Index expected, const std::filesystem::path& base_dir) {
    if (j.contains("b64")) return decode_doubles(j.at("b64").get<std::string>(), expected);
    if (!j.contains("sidecar")) throw ModelError("coefficient block has neither b64 nor sidecar data");
    const auto path = base_dir / j.at("sidecar").get<std::string>();
    const uint64_t offset = j.at("offset").get<uint64_t>();
    const Index count = j.at("count").get<Index>();
    if (count != expected) throw ModelError("sidecar block has wrong element count");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open sidecar file " + path.string());
    in.seekg(static_cast<std::streamoff>(offset));
    Vector v(expected);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * expected));
    if (!in) throw ModelError("sidecar file " + path.string() + " is truncated");
    return v;
}

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const Json& j, const char* name) {
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw ModelError(std::string(name) + ": expected a nested (row-major) array");
    const Index rows = static_cast<Index>(j.size());
    const Index cols = static_cast<Index>(j.front().size());
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        if (static_cast<Index>(j[r].size()) != cols) throw ModelError(std::string(name) + ": ragged rows");
        for (Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

}  // namespace detail

constexpr size_t kDefaultSidecarThreshold = 1u << 22;  // 4 MiB of coefficients

inline void save_value(const std::filesystem::path& path, const ValueFunction& value,
                       size_t sidecar_threshold = kDefaultSidecarThreshold) {
    Json j;
    j["type"] = "ppr.value_function";
    j["version"] = 1;
    j["n"] = value.n;
    j["d"] = value.degree;
    bool need_sidecar = false;
    for (const Vector& v : value.coeffs)
        if (sizeof(double) * static_cast<size_t>(v.size()) >= sidecar_threshold) need_sidecar = true;
    const std::string sidecar_name = path.filename().string() + ".bin";
    std::ofstream sidecar;
    if (need_sidecar) {
        sidecar.open(path.parent_path() / sidecar_name, std::ios::binary | std::ios::trunc);
        if (!sidecar) throw ModelError("cannot create sidecar file next to " + path.string());
    }
    uint64_t offset = 0;
    Json coeffs;
    for (int k = 2; k <= value.degree; ++k)
        coeffs[std::to_string(k)] = detail::write_block(value.coeff(k), need_sidecar ? &sidecar : nullptr,
                                                        sidecar_name, offset, sidecar_threshold);
    j["coeffs"] = std::move(coeffs);
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

inline ValueFunction load_value(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open " + path.string());
    Json j = Json::parse(in, nullptr, true, true);
    if (j.value("type", "") != "ppr.value_function") throw ModelError(path.string() + " is not a value-function file");
    ValueFunction value;
    value.n = j.at("n").get<Index>();
    value.degree = j.at("d").get<int>();
    for (int k = 2; k <= value.degree; ++k)
        value.coeffs.push_back(detail::read_block(j.at("coeffs").at(std::to_string(k)), kron_length(value.n, k),
                                                  path.parent_path()));
    value.validate();
    return value;
}

inline void save_controller(const std::filesystem::path& path, const PolyController& ctrl,
                            size_t sidecar_threshold = kDefaultSidecarThreshold) {
    Json j;
    j["type"] = "ppr.controller";
    j["version"] = 1;
    j["n"] = ctrl.n;
    j["m"] = ctrl.m;
    j["degree"] = ctrl.degree();
    bool need_sidecar = false;
    for (const Matrix& k : ctrl.gains)
        if (sizeof(double) * static_cast<size_t>(k.size()) >= sidecar_threshold) need_sidecar = true;
    const std::string sidecar_name = path.filename().string() + ".bin";
    std::ofstream sidecar;
    if (need_sidecar) {
        sidecar.open(path.parent_path() / sidecar_name, std::ios::binary | std::ios::trunc);
        if (!sidecar) throw ModelError("cannot create sidecar file next to " + path.string());
    }
    uint64_t offset = 0;
    Json gains;
    for (int deg = 1; deg <= ctrl.degree(); ++deg) {
        const Matrix& k = ctrl.gain(deg);
        const Vector flat = Eigen::Map<const Vector>(k.data(), k.size());
        gains[std::to_string(deg)] = detail::write_block(flat, need_sidecar ? &sidecar : nullptr, sidecar_name,
                                                         offset, sidecar_threshold);
    }
    j["gains"] = std::move(gains);
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

inline PolyController load_controller(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open " + path.string());
    Json j = Json::parse(in, nullptr, true, true);
    if (j.value("type", "") != "ppr.controller") throw ModelError(path.string() + " is not a controller file");
    PolyController ctrl;
    ctrl.n = j.at("n").get<Index>();
    ctrl.m = j.at("m").get<Index>();
    const int degree = j.at("degree").get<int>();
    for (int deg = 1; deg <= degree; ++deg) {
        const Index cols = kron_length(ctrl.n, deg);
        Vector flat = detail::read_block(j.at("gains").at(std::to_string(deg)), ctrl.m * cols, path.parent_path());
        ctrl.gains.push_back(Eigen::Map<const Matrix>(flat.data(), ctrl.m, cols));
    }
    ctrl.validate();
    return ctrl;
}

}  // namespace ppr
