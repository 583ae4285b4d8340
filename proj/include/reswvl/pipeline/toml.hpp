#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reswvl/core/errors.hpp"

namespace reswvl {

/// Minimal TOML reader covering what config files actually use: [table]
/// headers (dotted), `key = value` with strings, integers, floats, booleans
/// and flat arrays, plus # comments. Parses into a JSON tree so TOML and
/// JSON configs share one loading path.
namespace toml {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

inline std::vector<std::string> split_dotted(const std::string& key, const std::string& where) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : key) {
        if (c == '.') {
            if (cur.empty()) throw ConfigError("toml: empty key segment in " + where);
            parts.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    if (cur.empty()) throw ConfigError("toml: empty key segment in " + where);
    parts.push_back(cur);
    return parts;
}

inline nlohmann::json parse_scalar(const std::string& raw, const std::string& where);

inline nlohmann::json parse_value(const std::string& raw, const std::string& where) {
    const std::string v = trim(raw);
    if (v.empty()) throw ConfigError("toml: missing value in " + where);
    if (v.front() == '[') {
        if (v.back() != ']') throw ConfigError("toml: unterminated array in " + where);
        nlohmann::json arr = nlohmann::json::array();
        std::string inner = v.substr(1, v.size() - 2);
        std::string cur;
        bool in_string = false;
        for (std::size_t i = 0; i < inner.size(); ++i) {
            const char c = inner[i];
            if (c == '"' && (i == 0 || inner[i - 1] != '\\')) in_string = !in_string;
            if (c == ',' && !in_string) {
                if (!trim(cur).empty()) arr.push_back(parse_scalar(trim(cur), where));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!trim(cur).empty()) arr.push_back(parse_scalar(trim(cur), where));
        return arr;
    }
    return parse_scalar(v, where);
}

inline nlohmann::json parse_scalar(const std::string& v, const std::string& where) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
        std::string out;
        for (std::size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) {
                ++i;
                switch (v[i]) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: throw ConfigError("toml: unsupported escape in " + where);
                }
            } else {
                out += v[i];
            }
        }
        return out;
    }
    if (v == "true") return true;
    if (v == "false") return false;
    try {
        if (v.find_first_of(".eE") == std::string::npos) {
            std::size_t used = 0;
            const long long i = std::stoll(v, &used);
            if (used == v.size()) return i;
        } else {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used == v.size()) return d;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("toml: cannot parse value '" + v + "' in " + where);
}

}  // namespace detail

inline nlohmann::json parse(const std::string& text, const std::string& origin) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        line = detail::trim(detail::strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("toml: unterminated table header in " + where);
            const auto parts =
                detail::split_dotted(line.substr(1, line.size() - 2), where);
            table = &root;
            for (const auto& p : parts) {
                if (!table->contains(p)) (*table)[p] = nlohmann::json::object();
                table = &(*table)[p];
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("toml: expected `key = value` in " + where);
        const auto keys = detail::split_dotted(detail::trim(line.substr(0, eq)), where);
        nlohmann::json* slot = table;
        for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
            if (!slot->contains(keys[i])) (*slot)[keys[i]] = nlohmann::json::object();
            slot = &(*slot)[keys[i]];
        }
        (*slot)[keys.back()] = detail::parse_value(line.substr(eq + 1), where);
    }
    return root;
}

}  // namespace toml

/// Loads a .toml or .json config file into a JSON tree.
inline nlohmann::json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto ext = path.extension().string();
    if (ext == ".json") {
        try {
            return nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
        }
    }
    if (ext == ".toml") return toml::parse(text, path.string());
    throw ConfigError("config file must end in .toml or .json: " + path.string());
}

}  // namespace reswvl
