#pragma once

#include "safectl/core.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace safectl::harness {

/// Sectioned key-value config file:
///   [section]
///   key = value        ; trailing comments with ';' or '#'
/// Unknown keys are tolerated; type errors and duplicate keys report
/// file:line so a bad config is diagnosable at a glance.
class IniFile {
public:
    static IniFile parse_file(const std::filesystem::path& path);
    static IniFile parse_string(const std::string& text, const std::string& name = "<string>");

    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long long get_int(const std::string& section, const std::string& key,
                      long long fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    std::vector<double> fallback) const;
    std::vector<std::string> get_strings(const std::string& section, const std::string& key,
                                         std::vector<std::string> fallback) const;

    std::string require_string(const std::string& section, const std::string& key) const;

    /// FNV-1a of the raw file bytes, for the run manifest.
    uint64_t content_hash() const { return content_hash_; }
    const std::string& name() const { return name_; }

private:
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::string name_;
    uint64_t content_hash_ = 0;
    std::map<std::string, std::map<std::string, Entry>> sections_;

    const Entry* find(const std::string& section, const std::string& key) const;
    [[noreturn]] void fail(const Entry& e, const std::string& key, const std::string& what) const;
};

uint64_t fnv1a64(const void* data, std::size_t n);
uint64_t fnv1a64_file(const std::filesystem::path& path);

}  // namespace safectl::harness
