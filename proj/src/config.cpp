#include "mufasa/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mufasa/error.hpp"

namespace mufasa {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
    if (k.empty() || k.front() == '.' || k.back() == '.') return false;
    return std::all_of(k.begin(), k.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
    });
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!valid_key(key)) throw ParseError("invalid key '" + key + "'", lineno);
        if (cfg.values_.count(key)) {
            throw ParseError("duplicate key '" + key + "' (first set on line " +
                                 std::to_string(cfg.values_[key].line) + ")",
                             lineno);
        }
        cfg.values_[key] = {value, lineno};
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void Config::fail(const std::string& key, const std::string& what) const {
    throw ConfigError(key + " (line " + std::to_string(line_of(key)) + "): " + what);
}

std::optional<std::string> Config::raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_.insert(key);
    return it->second.value;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    return raw(key).value_or(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    char* end = nullptr;
    errno = 0;
    const double d = std::strtod(v->c_str(), &end);
    if (v->empty() || *end != '\0' || errno == ERANGE) fail(key, "expected a number, got '" + *v + "'");
    return d;
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    char* end = nullptr;
    errno = 0;
    if (v->empty() || v->front() == '-') fail(key, "expected a non-negative integer, got '" + *v + "'");
    const unsigned long long n = std::strtoull(v->c_str(), &end, 10);
    if (*end != '\0' || errno == ERANGE) fail(key, "expected a non-negative integer, got '" + *v + "'");
    return static_cast<std::size_t>(n);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    fail(key, "expected true or false, got '" + *v + "'");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
    std::vector<std::string> out;
    const auto v = raw(key);
    if (!v) return out;
    std::stringstream ss(*v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (part.empty()) fail(key, "empty list element");
        out.push_back(part);
    }
    return out;
}

std::vector<double> Config::get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& s : get_list(key)) {
        char* end = nullptr;
        const double d = std::strtod(s.c_str(), &end);
        if (*end != '\0') fail(key, "expected a number, got '" + s + "'");
        out.push_back(d);
    }
    return out;
}

std::vector<std::size_t> Config::get_sizes(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const std::string& s : get_list(key)) {
        char* end = nullptr;
        const unsigned long long n = std::strtoull(s.c_str(), &end, 10);
        if (s.front() == '-' || *end != '\0') fail(key, "expected a non-negative integer, got '" + s + "'");
        out.push_back(static_cast<std::size_t>(n));
    }
    return out;
}

std::vector<std::string> Config::unused() const {
    std::vector<std::pair<std::size_t, std::string>> left;
    for (const auto& [k, e] : values_) {
        if (!used_.count(k)) left.emplace_back(e.line, k);
    }
    std::sort(left.begin(), left.end());
    std::vector<std::string> out;
    for (auto& p : left) out.push_back(std::move(p.second));
    return out;
}

std::size_t Config::line_of(const std::string& key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? 0 : it->second.line;
}

std::string Config::snapshot() const {
    std::string s;
    for (const auto& [k, e] : values_) s += k + " = " + e.value + "\n";
    return s;
}

}  // namespace mufasa
