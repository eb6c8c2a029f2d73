#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fws/bytes.hpp"
#include "fws/errors.hpp"

namespace fws {

// Flat `key = value` configuration text. `#` starts a comment, blank lines
// are ignored, dots namespace keys (e.g. `noise.alpha_std = 0.4`). Every
// lookup is tracked so a caller can reject misspelled keys at the end with
// require_all_used().
class KvConfig {
public:
    KvConfig() = default;

    static KvConfig parse(const std::string& text, const std::string& origin = "config") {
        KvConfig c;
        c.origin_ = origin;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected `key = value`");
            }
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string val = trim(trimmed.substr(eq + 1));
            if (key.empty()) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            }
            if (c.values_.count(key)) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key `" +
                                  key + "`");
            }
            c.values_[key] = val;
        }
        return c;
    }

    static KvConfig load(const std::string& path) { return parse(read_text_file(path), path); }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            throw ConfigError(origin_ + ": missing required key `" + key + "`");
        }
        used_.insert(key);
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& dflt) const {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? dflt : it->second;
    }

    double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
    double get_double(const std::string& key, double dflt) const {
        return has(key) ? get_double(key) : (used_.insert(key), dflt);
    }

    long long get_int(const std::string& key) const { return to_int(key, get_string(key)); }
    long long get_int(const std::string& key, long long dflt) const {
        return has(key) ? get_int(key) : (used_.insert(key), dflt);
    }

    std::uint64_t get_u64(const std::string& key) const {
        const std::string s = get_string(key);
        try {
            std::size_t pos = 0;
            const std::uint64_t v = std::stoull(s, &pos, 0);
            if (pos != s.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(origin_ + ": key `" + key + "`: not an unsigned integer: " + s);
        }
    }
    std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) const {
        return has(key) ? get_u64(key) : (used_.insert(key), dflt);
    }

    bool get_bool(const std::string& key) const {
        const std::string s = get_string(key);
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        throw ConfigError(origin_ + ": key `" + key + "`: not a boolean: " + s);
    }
    bool get_bool(const std::string& key, bool dflt) const {
        return has(key) ? get_bool(key) : (used_.insert(key), dflt);
    }

    // Comma-separated integer list; empty string means empty list.
    std::vector<int> get_int_list(const std::string& key) const {
        std::vector<int> out;
        for (const std::string& item : split_list(get_string(key))) {
            out.push_back(static_cast<int>(to_int(key, item)));
        }
        return out;
    }
    std::vector<int> get_int_list(const std::string& key, std::vector<int> dflt) const {
        return has(key) ? get_int_list(key) : (used_.insert(key), std::move(dflt));
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::vector<double> out;
        for (const std::string& item : split_list(get_string(key))) {
            out.push_back(to_double(key, item));
        }
        return out;
    }

    // Enforces the schema version stamp all toolkit config files carry.
    void require_schema(long long version) const {
        const long long got = get_int("schema_version");
        if (got != version) {
            throw ConfigError(origin_ + ": schema_version " + std::to_string(got) +
                              " unsupported (expected " + std::to_string(version) + ")");
        }
    }

    // Rejects keys that were never read: catches typos and stale options.
    void require_all_used() const {
        for (const auto& [k, v] : values_) {
            if (!used_.count(k)) {
                throw ConfigError(origin_ + ": unknown key `" + k + "`");
            }
        }
    }

    std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_) {
            if (k.rfind(prefix, 0) == 0) out.push_back(k);
        }
        return out;
    }

    const std::string& origin() const { return origin_; }

private:
    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static std::vector<std::string> split_list(const std::string& s) {
        std::vector<std::string> out;
        if (trim(s).empty()) return out;
        std::string item;
        std::istringstream in(s);
        while (std::getline(in, item, ',')) out.push_back(trim(item));
        return out;
    }

    double to_double(const std::string& key, const std::string& s) const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(origin_ + ": key `" + key + "`: not a number: " + s);
        }
    }

    long long to_int(const std::string& key, const std::string& s) const {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(s, &pos, 0);
            if (pos != s.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(origin_ + ": key `" + key + "`: not an integer: " + s);
        }
    }

    std::string origin_ = "config";
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

}  // namespace fws
