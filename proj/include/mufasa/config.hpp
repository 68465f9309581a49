#pragma once
// Flat `key = value` configuration files. Keys may carry dotted section
// prefixes (`env.K = 2`); `#` starts a comment.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mufasa {

class Config {
public:
    /// Throws ParseError with the offending line number.
    static Config parse(const std::string& text);
    static Config load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    /// Each getter marks the key as used. Conversion failures throw
    /// ConfigError naming the key and its line.
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<std::size_t> get_sizes(const std::string& key) const;
    std::optional<std::string> raw(const std::string& key) const;

    /// Keys never read by a getter, in file order.
    std::vector<std::string> unused() const;
    std::size_t line_of(const std::string& key) const;
    /// Canonical `key = value` listing sorted by key.
    std::string snapshot() const;

private:
    struct Entry {
        std::string value;
        std::size_t line = 0;
    };
    [[noreturn]] void fail(const std::string& key, const std::string& what) const;

    std::map<std::string, Entry> values_;
    mutable std::set<std::string> used_;
};

}  // namespace mufasa
