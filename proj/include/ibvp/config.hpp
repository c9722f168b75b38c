#pragma once
// Line-oriented run configuration: `section.key = value` entries with `#`
// comments, expression values quoted.  Flat key-value storage with typed
// accessors, a canonical content hash, and cross-field consistency checks.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>

#include "core.hpp"

namespace ibvp {

namespace detail_cfg {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace detail_cfg

struct RunConfig {
    std::map<std::string, std::string> entries;  // "section.key" -> value

    static RunConfig parse(std::istream& is) {
        RunConfig cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = detail_cfg::trim(line);
            if (line.empty()) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw validation_error("config line " + std::to_string(lineno) +
                                       ": expected `section.key = value`");
            std::string key = detail_cfg::trim(line.substr(0, eq));
            std::string value = detail_cfg::trim(line.substr(eq + 1));
            if (key.find('.') == std::string::npos || key.empty())
                throw validation_error("config line " + std::to_string(lineno) +
                                       ": key must be `section.key`");
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            if (cfg.entries.count(key))
                throw validation_error("config line " + std::to_string(lineno) +
                                       ": duplicate key " + key);
            cfg.entries[key] = value;
        }
        return cfg;
    }

    static RunConfig parse_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw validation_error("config: cannot read " + path);
        return parse(is);
    }

    bool has(const std::string& key) const { return entries.count(key) != 0; }

    std::string str(const std::string& key, const std::string& fallback = "") const {
        auto it = entries.find(key);
        return it == entries.end() ? fallback : it->second;
    }

    double num(const std::string& key, double fallback) const {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        std::size_t used = 0;
        double v;
        try {
            v = std::stod(it->second, &used);
        } catch (const std::exception&) {
            throw validation_error("config: key " + key + " is not a number: " + it->second);
        }
        if (used != it->second.size())
            throw validation_error("config: key " + key + " is not a number: " + it->second);
        return v;
    }

    int integer(const std::string& key, int fallback) const {
        double v = num(key, static_cast<double>(fallback));
        int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            throw validation_error("config: key " + key + " is not an integer");
        return i;
    }

    /// FNV-1a hash of the canonical (sorted, normalized) content, as hex.
    std::string hash() const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&](const std::string& s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 1099511628211ull;
            }
        };
        for (const auto& [k, v] : entries) {
            mix(k);
            mix("=");
            mix(v);
            mix("\n");
        }
        std::ostringstream os;
        os << std::hex << h;
        return os.str();
    }

    /// Cross-field consistency; individual modules validate their own ranges.
    void validate() const {
        std::string family = str("domain.family", "square");
        if (family != "square" && family != "snowflake" && family != "ramified_f" &&
            family != "ramified_g" && family != "ngon")
            throw validation_error("config: unknown domain.family " + family);
        std::string regime = str("regime.kind", "R");
        if (regime != "N" && regime != "R" && regime != "W")
            throw validation_error("config: regime.kind must be N, R, or W");
        std::string wk = str("regime.wentzell_kind", "");
        if (regime == "W" && wk != "riemannian" && wk != "koch")
            throw validation_error("config: regime W needs wentzell_kind riemannian or koch");
        if (wk == "koch" && family != "snowflake")
            throw validation_error("config: wentzell_kind koch requires domain.family snowflake");
        std::string nl = str("nonlocal.kind", "none");
        if (nl != "none" && nl != "besov" && nl != "dtn")
            throw validation_error("config: nonlocal.kind must be none, besov, or dtn");
        std::string pk = str("problem.kind", "elliptic");
        if (pk != "elliptic" && pk != "parabolic")
            throw validation_error("config: problem.kind must be elliptic or parabolic");
        std::string mk = str("measure.kind", "arc_length");
        if (mk != "arc_length" && mk != "self_similar")
            throw validation_error("config: measure.kind must be arc_length or self_similar");
        if (mk == "self_similar" && (family == "square" || family == "ngon"))
            throw validation_error("config: self_similar measure needs a prefractal boundary");
    }
};

}  // namespace ibvp
