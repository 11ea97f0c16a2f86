#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "confdiff/error.hpp"
#include "confdiff/expr.hpp"
#include "confdiff/geometry.hpp"
#include "confdiff/linalg.hpp"

namespace confdiff::cli {

inline constexpr const char* kToolName = "confdiff";
inline constexpr const char* kToolVersion = "0.1.0";

enum class Command { tensor, planes, oracle, mc, solve, recover_channel };

inline std::string_view command_name(Command c) {
    switch (c) {
        case Command::tensor: return "tensor";
        case Command::planes: return "planes";
        case Command::oracle: return "oracle";
        case Command::mc: return "mc";
        case Command::solve: return "solve";
        case Command::recover_channel: return "recover-channel";
    }
    return "?";
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Keys a command reads, with their defaults.
inline KeyValues command_defaults(Command c) {
    KeyValues kv{{"d0", "1"}, {"workers", "1"}, {"out", "-"}, {"example", ""}};
    const KeyValues surfaces{{"z1", "0"},        {"z2", "1"},       {"z1_grid", ""},
                             {"z2_grid", ""},    {"domain", "-1,1,-1,1"},
                             {"tilt", "table"},  {"validation_points", "64"}};
    const auto add = [&](const KeyValues& more) { kv.insert(kv.end(), more.begin(), more.end()); };
    switch (c) {
        case Command::tensor:
            add(surfaces);
            add({{"resolution", "33x33"}});
            break;
        case Command::planes:
            add({{"n1", "0,0,-1"}, {"n2", "0,0,1"}, {"zdir", "0,0,1"}, {"wedge", ""}});
            break;
        case Command::oracle:
            add({{"n1", "0,0,-1"},
                 {"n2", "-1,0,1"},
                 {"zdir", "0,0,1"},
                 {"seed", "0"},
                 {"wedges", "0"},
                 {"m_max", "10"},
                 {"psi_max", "1.4"},
                 {"eval_point", "1,0"},
                 {"points", "128"},
                 {"fd_step", "1e-5"},
                 {"gap", "1"}});
            break;
        case Command::mc:
            add(surfaces);
            add({{"seed", "0"},
                 {"geometry", "slab"},
                 {"mu", "0"},
                 {"rotation", "0"},
                 {"gap", "1"},
                 {"dt", "1e-3"},
                 {"particles", "100000"},
                 {"steps", "10000"},
                 {"blocks", "100"},
                 {"start", ""}});
            break;
        case Command::solve:
            add(surfaces);
            add({{"resolution", "32x32"},
                 {"rate", "finite"},
                 {"dt", "0"},
                 {"steps", "1000"},
                 {"snapshot_every", "100"},
                 {"initial", ""}});
            break;
        case Command::recover_channel:
            add({{"z1", "sin(x)-3/2"}, {"z2", "cos(2*x)+3/2"}, {"domain", "0,2*pi,-1,1"},
                 {"samples", "100"}, {"tilt", "table"}});
            break;
    }
    return kv;
}

inline const std::vector<std::string>& example_names() {
    static const std::vector<std::string> names{"radial", "waves", "wedge", "slab"};
    return names;
}

/// Built-in configurations. Keys a command does not read are dropped.
inline KeyValues example_values(std::string_view name, Command c) {
    if (name == "radial") {
        if (c == Command::recover_channel) {
            return {{"z1", "sin(x)-3/2"}, {"z2", "cos(2*x)+3/2"}, {"domain", "0,2*pi,-1,1"}};
        }
        return {{"z1", "sin(r)-3/2"},  {"z2", "cos(2*r)+3/2"}, {"domain", "-8,8,-8,8"},
                {"resolution", "64x64"}, {"geometry", "surfaces"}, {"start", "1,1,0"}};
    }
    if (name == "waves") {
        return {{"z1", "cos(x)"},          {"z2", "cos(y)+5/2"},   {"domain", "0,2*pi,0,2*pi"},
                {"resolution", "65x65"},   {"geometry", "surfaces"}, {"start", "1,1,1.5"}};
    }
    if (name == "wedge") {
        if (c == Command::recover_channel) return {{"z1", "0"}, {"z2", "1+x/2"}, {"domain", "0,2,-1,1"}};
        return {{"n1", "0,0,-1"},     {"n2", "-1,0,1"}, {"z1", "0"},  {"z2", "1+x/2"},
                {"domain", "0,2,-1,1"}, {"geometry", "slab"}, {"mu", "1"}};
    }
    if (name == "slab") {
        return {{"n1", "0,0,-1"}, {"n2", "0,0,1"},      {"z1", "0"},         {"z2", "1"},
                {"domain", "0,1,0,1"}, {"geometry", "slab"}, {"mu", "0"}};
    }
    throw ConfigError("unknown example '" + std::string(name) + "' (radial, waves, wedge, slab)");
}

/// Reads a flat key=value file. '#' starts a comment line; keys may not repeat.
inline KeyValues read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    KeyValues kv;
    int lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        const auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string{};
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        for (const auto& [k, v] : kv) {
            if (k == key) throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
        kv.emplace_back(std::move(key), std::move(value));
    }
    return kv;
}

/// Splits "key=value".
inline std::pair<std::string, std::string> split_assignment(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

/// Real number or constant expression such as "2*pi".
inline double parse_real(const std::string& key, const std::string& text) {
    try {
        const expr::Expr e = expr::parse(text);
        if (!e.independent_of(expr::Var::x) || !e.independent_of(expr::Var::y)) {
            throw ConfigError("'" + key + "' must be a constant, got '" + text + "'");
        }
        return e(0.0, 0.0);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& err) {
        throw ConfigError("'" + key + "': " + err.what());
    }
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text, std::size_t n) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = text.find(',', pos);
        out.push_back(parse_real(key, text.substr(pos, comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.size() != n) {
        throw ConfigError("'" + key + "' needs " + std::to_string(n) + " comma-separated values");
    }
    return out;
}

/// Resolved configuration of one command run: defaults, then the example,
/// then the file, then command-line assignments.
class Config {
public:
    explicit Config(Command c) : command_(c) {
        for (auto& [k, v] : command_defaults(c)) values_.emplace(k, v);
    }

    Command command() const { return command_; }

    bool has_key(const std::string& key) const { return values_.count(key) != 0; }

    void set(const std::string& key, const std::string& value) {
        auto it = values_.find(key);
        if (it == values_.end()) {
            throw ConfigError("unknown key '" + key + "' for command " +
                              std::string(command_name(command_)));
        }
        it->second = value;
    }

    /// Applies a named example; its keys the command does not use are skipped.
    void apply_example(const std::string& name) {
        for (const auto& [k, v] : example_values(name, command_)) {
            if (has_key(k)) values_[k] = v;
        }
        values_["example"] = name;
    }

    void apply(const KeyValues& kv) {
        for (const auto& [k, v] : kv) set(k, v);
    }

    const std::string& str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
        return it->second;
    }

    double real(const std::string& key) const { return parse_real(key, str(key)); }

    double positive(const std::string& key) const {
        const double v = real(key);
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("'" + key + "' must be positive");
        return v;
    }

    long long integer(const std::string& key) const {
        const std::string& s = str(key);
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(s, &used);
        } catch (const std::exception&) {
            throw ConfigError("'" + key + "' must be an integer, got '" + s + "'");
        }
        if (used != s.size()) throw ConfigError("'" + key + "' must be an integer, got '" + s + "'");
        return v;
    }

    unsigned long long unsigned_integer(const std::string& key) const {
        const std::string& s = str(key);
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
            v = std::stoull(s, &used);
        } catch (const std::exception&) {
            throw ConfigError("'" + key + "' must be a non-negative integer, got '" + s + "'");
        }
        if (used != s.size()) throw ConfigError("'" + key + "' must be a non-negative integer");
        return v;
    }

    Vec2 vec2(const std::string& key) const {
        const auto v = parse_list(key, str(key), 2);
        return {v[0], v[1]};
    }

    Vec3 vec3(const std::string& key) const {
        const auto v = parse_list(key, str(key), 3);
        return {v[0], v[1], v[2]};
    }

    Rect rect(const std::string& key) const {
        const auto v = parse_list(key, str(key), 4);
        const Rect r{v[0], v[1], v[2], v[3]};
        if (r.empty()) throw ConfigError("'" + key + "' must satisfy x0 < x1 and y0 < y1");
        return r;
    }

    /// "NXxNY", both at least 2.
    std::pair<int, int> resolution(const std::string& key) const {
        const std::string& s = str(key);
        const auto x = s.find_first_of("xX");
        int nx = 0, ny = 0;
        try {
            std::size_t a = 0, b = 0;
            if (x == std::string::npos) throw std::invalid_argument("no x");
            nx = std::stoi(s.substr(0, x), &a);
            ny = std::stoi(s.substr(x + 1), &b);
            if (a != x || b != s.size() - x - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("'" + key + "' must look like NXxNY, got '" + s + "'");
        }
        if (nx < 2 || ny < 2) throw ConfigError("'" + key + "' must be at least 2x2");
        return {nx, ny};
    }

    /// Every key but `workers` and `out`, sorted; these never change results.
    KeyValues echo() const {
        KeyValues kv;
        for (const auto& [k, v] : values_) {
            if (k != "workers" && k != "out") kv.emplace_back(k, v);
        }
        return kv;
    }

private:
    Command command_;
    std::map<std::string, std::string> values_;
};

}  // namespace confdiff::cli
