#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "atomic_file.hpp"
#include "errors.hpp"
#include "splat_model.hpp"

namespace vsplat {

static_assert(std::endian::native == std::endian::little, "splat PLY I/O assumes a little-endian host");

/// Vertex property names of the splat interchange layout, in file order.
inline const std::vector<std::string>& splat_ply_properties() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v{"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
        for (int i = 0; i < 45; ++i) v.push_back("f_rest_" + std::to_string(i));
        for (const char* s : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) v.push_back(s);
        return v;
    }();
    return names;
}

namespace detail {

inline int ply_type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    return 0;
}

inline double ply_read_scalar(const char* p, const std::string& t) {
    auto load = [p]<class T>(T) {
        T v;
        std::memcpy(&v, p, sizeof v);
        return static_cast<double>(v);
    };
    if (t == "char" || t == "int8") return load(std::int8_t{});
    if (t == "uchar" || t == "uint8") return load(std::uint8_t{});
    if (t == "short" || t == "int16") return load(std::int16_t{});
    if (t == "ushort" || t == "uint16") return load(std::uint16_t{});
    if (t == "int" || t == "int32") return load(std::int32_t{});
    if (t == "uint" || t == "uint32") return load(std::uint32_t{});
    if (t == "float" || t == "float32") return load(float{});
    return load(double{});
}

struct PlyProperty {
    std::string name;
    std::string type;
    std::size_t offset = 0;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
    std::size_t stride = 0;
    bool has_list = false;
};

} // namespace detail

/// Decodes a binary little-endian splat PLY held in memory. Unknown vertex properties are
/// skipped and reported through `warnings`.
inline SplatCloud decode_splat_ply(const std::string& bytes, const std::string& name = "<memory>",
                                   std::vector<std::string>* warnings = nullptr) {
    const std::size_t header_end = bytes.find("end_header\n");
    if (bytes.compare(0, 4, "ply\n") != 0) throw ParseError(name, "wrong PLY header magic");
    if (header_end == std::string::npos) throw ParseError(name, "PLY header has no end_header");
    std::istringstream header(bytes.substr(0, header_end));
    std::string line;
    std::vector<detail::PlyElement> elements;
    bool format_seen = false;
    std::size_t lineno = 0;
    while (std::getline(header, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "ply" || kw == "comment" || kw == "obj_info" || kw.empty()) continue;
        if (kw == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt == "ascii") throw ParseError(name, lineno, "ASCII PLY is not supported (binary_little_endian required)");
            if (fmt != "binary_little_endian") throw ParseError(name, lineno, "unsupported PLY format: " + fmt);
            format_seen = true;
        } else if (kw == "element") {
            detail::PlyElement e;
            long long count = -1;
            ls >> e.name >> count;
            if (!ls || count < 0) throw ParseError(name, lineno, "malformed element line");
            e.count = static_cast<std::size_t>(count);
            elements.push_back(std::move(e));
        } else if (kw == "property") {
            if (elements.empty()) throw ParseError(name, lineno, "property before any element");
            auto& e = elements.back();
            std::string type;
            ls >> type;
            if (type == "list") {
                e.has_list = true;
                std::string a, b, pname;
                ls >> a >> b >> pname;
                e.props.push_back({pname, "list", 0});
                continue;
            }
            std::string pname;
            ls >> pname;
            const int sz = detail::ply_type_size(type);
            if (sz == 0 || pname.empty()) throw ParseError(name, lineno, "unsupported property type: " + type);
            e.props.push_back({pname, type, e.stride});
            e.stride += static_cast<std::size_t>(sz);
        } else {
            throw ParseError(name, lineno, "unknown PLY header keyword: " + kw);
        }
    }
    if (!format_seen) throw ParseError(name, "PLY header lacks a format line");

    std::size_t offset = header_end + std::string("end_header\n").size();
    const detail::PlyElement* vertex = nullptr;
    for (const auto& e : elements) {
        if (e.name == "vertex") {
            vertex = &e;
            break;
        }
        if (e.has_list) throw ParseError(name, "cannot skip list-valued element '" + e.name + "' preceding vertices");
        if (e.stride != 0 && e.count > (bytes.size() - offset) / e.stride) throw ParseError(name, "truncated PLY payload");
        offset += e.count * e.stride;
    }
    if (!vertex) throw ParseError(name, "PLY has no vertex element");
    if (vertex->has_list) throw ParseError(name, "list properties in the vertex element are not supported");

    std::map<std::string, const detail::PlyProperty*> by_name;
    for (const auto& p : vertex->props) by_name[p.name] = &p;
    for (const auto& req : splat_ply_properties()) {
        if (req == "nx" || req == "ny" || req == "nz") continue;
        if (!by_name.count(req)) throw ParseError(name, "missing required property: " + req);
    }
    if (warnings) {
        std::set<std::string> known(splat_ply_properties().begin(), splat_ply_properties().end());
        for (const auto& p : vertex->props)
            if (!known.count(p.name)) warnings->push_back("skipping unknown vertex property: " + p.name);
    }

    const std::size_t n = vertex->count;
    if (vertex->stride == 0 || n > (bytes.size() - offset) / vertex->stride)
        throw ParseError(name, "truncated PLY payload: expected " + std::to_string(n) + " vertices");

    auto prop = [&](const std::string& p) { return by_name.at(p); };
    const auto* px = prop("x");
    const auto* py = prop("y");
    const auto* pz = prop("z");
    std::array<const detail::PlyProperty*, 3> dc{prop("f_dc_0"), prop("f_dc_1"), prop("f_dc_2")};
    std::array<const detail::PlyProperty*, 45> rest{};
    for (int i = 0; i < 45; ++i) rest[i] = prop("f_rest_" + std::to_string(i));
    const auto* op = prop("opacity");
    std::array<const detail::PlyProperty*, 3> sc{prop("scale_0"), prop("scale_1"), prop("scale_2")};
    std::array<const detail::PlyProperty*, 4> rt{prop("rot_0"), prop("rot_1"), prop("rot_2"), prop("rot_3")};

    SplatCloud cloud;
    cloud.resize(n);
    auto& P = cloud[ParamGroup::position];
    auto& S = cloud[ParamGroup::scale];
    auto& R = cloud[ParamGroup::rotation];
    auto& O = cloud[ParamGroup::opacity];
    auto& D = cloud[ParamGroup::sh_dc];
    auto& F = cloud[ParamGroup::sh_rest];
    for (std::size_t i = 0; i < n; ++i) {
        const char* rec = bytes.data() + offset + i * vertex->stride;
        auto get = [&](const detail::PlyProperty* p) { return detail::ply_read_scalar(rec + p->offset, p->type); };
        P[3 * i] = get(px);
        P[3 * i + 1] = get(py);
        P[3 * i + 2] = get(pz);
        for (int k = 0; k < 3; ++k) D[3 * i + k] = get(dc[k]);
        for (int k = 0; k < 45; ++k) F[45 * i + k] = get(rest[k]);
        O[i] = get(op);
        for (int k = 0; k < 3; ++k) S[3 * i + k] = get(sc[k]);
        for (int k = 0; k < 4; ++k) R[4 * i + k] = get(rt[k]);
    }
    cloud.active_sh_degree = kMaxShDegree;
    return cloud;
}

inline SplatCloud read_splat_ply(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), "cannot open PLY file");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_splat_ply(bytes, path.string(), warnings);
}

/// Binary little-endian, all 62 vertex properties as float32, normals zero.
inline std::string encode_splat_ply(const SplatCloud& cloud) {
    const std::size_t n = cloud.size();
    std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(n) + "\n";
    for (const auto& p : splat_ply_properties()) out += "property float " + p + "\n";
    out += "end_header\n";
    const std::size_t header = out.size();
    constexpr std::size_t kFloats = 62;
    out.resize(header + n * kFloats * sizeof(float));
    char* dst = out.data() + header;
    const auto& P = cloud[ParamGroup::position];
    const auto& S = cloud[ParamGroup::scale];
    const auto& R = cloud[ParamGroup::rotation];
    const auto& O = cloud[ParamGroup::opacity];
    const auto& D = cloud[ParamGroup::sh_dc];
    const auto& F = cloud[ParamGroup::sh_rest];
    std::array<float, kFloats> rec{};
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = 0;
        for (int a = 0; a < 3; ++a) rec[k++] = static_cast<float>(P[3 * i + a]);
        for (int a = 0; a < 3; ++a) rec[k++] = 0.0f;
        for (int a = 0; a < 3; ++a) rec[k++] = static_cast<float>(D[3 * i + a]);
        for (int a = 0; a < 45; ++a) rec[k++] = static_cast<float>(F[45 * i + a]);
        rec[k++] = static_cast<float>(O[i]);
        for (int a = 0; a < 3; ++a) rec[k++] = static_cast<float>(S[3 * i + a]);
        for (int a = 0; a < 4; ++a) rec[k++] = static_cast<float>(R[4 * i + a]);
        std::memcpy(dst + i * sizeof rec, rec.data(), sizeof rec);
    }
    return out;
}

inline void write_splat_ply(const SplatCloud& cloud, const std::filesystem::path& path) {
    const std::string bytes = encode_splat_ply(cloud);
    write_file_atomically(path, [&](std::ostream& out) { out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); });
}

} // namespace vsplat
