#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "math.hpp"

namespace vsplat {

/// One externally settable member of a configuration struct.
template <class T>
struct ConfigField {
    std::string name;
    std::variant<double T::*, int T::*, std::uint64_t T::*, Vec3 T::*, bool T::*> member;
    std::string help;
};

namespace detail {

inline std::string format_real(double v) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <class N>
N parse_number(std::string_view s, const std::string& key) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    N v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw UsageError("invalid value for " + key + ": '" + std::string(s) + "'");
    if constexpr (std::is_floating_point_v<N>) {
        if (!std::isfinite(v)) throw UsageError("non-finite value for " + key);
    }
    return v;
}

} // namespace detail

template <class T>
std::string get_field(const T& obj, const ConfigField<T>& f) {
    return std::visit(
        [&](auto ptr) -> std::string {
            using M = std::remove_cvref_t<decltype(obj.*ptr)>;
            const M& v = obj.*ptr;
            if constexpr (std::is_same_v<M, double>) return detail::format_real(v);
            else if constexpr (std::is_same_v<M, bool>) return v ? "true" : "false";
            else if constexpr (std::is_same_v<M, Vec3>)
                return detail::format_real(v[0]) + "," + detail::format_real(v[1]) + "," + detail::format_real(v[2]);
            else return std::to_string(v);
        },
        f.member);
}

template <class T>
void set_field(T& obj, const ConfigField<T>& f, std::string_view value) {
    std::visit(
        [&](auto ptr) {
            using M = std::remove_cvref_t<decltype(obj.*ptr)>;
            if constexpr (std::is_same_v<M, bool>) {
                if (value == "true" || value == "1") obj.*ptr = true;
                else if (value == "false" || value == "0") obj.*ptr = false;
                else throw UsageError("invalid boolean for " + f.name + ": '" + std::string(value) + "'");
            } else if constexpr (std::is_same_v<M, Vec3>) {
                Vec3 v;
                std::size_t start = 0;
                for (int k = 0; k < 3; ++k) {
                    const std::size_t comma = value.find(',', start);
                    if ((k < 2) != (comma != std::string_view::npos))
                        throw UsageError("expected three comma-separated values for " + f.name);
                    v[k] = detail::parse_number<double>(value.substr(start, comma - start), f.name);
                    start = comma + 1;
                }
                obj.*ptr = v;
            } else {
                obj.*ptr = detail::parse_number<M>(value, f.name);
            }
        },
        f.member);
}

template <class T>
const ConfigField<T>* find_field(const std::vector<ConfigField<T>>& fields, std::string_view name) {
    for (const auto& f : fields)
        if (f.name == name) return &f;
    return nullptr;
}

/// `key = value` lines, one per field, in table order.
template <class T>
std::string dump_config(const T& obj, const std::vector<ConfigField<T>>& fields) {
    std::string out;
    for (const auto& f : fields) out += f.name + " = " + get_field(obj, f) + "\n";
    return out;
}

/// Parses `key = value` lines; `#` starts a comment. Returns key -> value in file order of last write.
inline std::map<std::string, std::string> parse_config_text(std::string_view text, const std::string& source) {
    std::map<std::string, std::string> out;
    std::size_t lineno = 0, start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        auto trim = [](std::string_view s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
            return s;
        };
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw UsageError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        out[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
    }
    return out;
}

} // namespace vsplat
