#include "safectl/config.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

namespace safectl::harness {

uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file for hashing: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string s = buf.str();
    return fnv1a64(s.data(), s.size());
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
    const auto pos = s.find_first_of(";#");
    return pos == std::string::npos ? s : s.substr(0, pos);
}

}  // namespace

IniFile IniFile::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path.string());
}

IniFile IniFile::parse_string(const std::string& text, const std::string& name) {
    IniFile ini;
    ini.name_ = name;
    ini.content_hash_ = fnv1a64(text.data(), text.size());

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(name + ":" + std::to_string(line_no) +
                                  ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError(name + ":" + std::to_string(line_no) + ": empty section name");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(name + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(name + ":" + std::to_string(line_no) + ": empty key");
        }
        auto& sec = ini.sections_[section];
        if (sec.count(key)) {
            throw ConfigError(name + ":" + std::to_string(line_no) + ": duplicate key '" + key +
                              "' (first defined at line " + std::to_string(sec[key].line) + ")");
        }
        sec[key] = Entry{value, line_no};
    }
    return ini;
}

const IniFile::Entry* IniFile::find(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    return &k->second;
}

void IniFile::fail(const Entry& e, const std::string& key, const std::string& what) const {
    throw ConfigError(name_ + ":" + std::to_string(e.line) + ": key '" + key + "': " + what);
}

bool IniFile::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::string IniFile::get_string(const std::string& section, const std::string& key,
                                const std::string& fallback) const {
    const Entry* e = find(section, key);
    return e ? e->value : fallback;
}

std::string IniFile::require_string(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) {
        throw ConfigError(name_ + ": missing required key '" + key + "' in section [" + section +
                          "]");
    }
    return e->value;
}

double IniFile::get_double(const std::string& section, const std::string& key,
                           double fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(e->value, &pos);
        if (pos != e->value.size()) fail(*e, key, "trailing characters in number");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail(*e, key, "expected a number, got '" + e->value + "'");
    }
}

long long IniFile::get_int(const std::string& section, const std::string& key,
                           long long fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(e->value, &pos);
        if (pos != e->value.size()) fail(*e, key, "trailing characters in integer");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail(*e, key, "expected an integer, got '" + e->value + "'");
    }
}

bool IniFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "on" || e->value == "1") return true;
    if (e->value == "false" || e->value == "off" || e->value == "0") return false;
    fail(*e, key, "expected true/false/on/off/1/0, got '" + e->value + "'");
}

std::vector<double> IniFile::get_doubles(const std::string& section, const std::string& key,
                                         std::vector<double> fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    std::vector<double> out;
    std::istringstream in(e->value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) fail(*e, key, "empty element in list");
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            fail(*e, key, "expected a comma-separated list of numbers, got '" + e->value + "'");
        }
    }
    if (out.empty()) fail(*e, key, "empty list");
    return out;
}

std::vector<std::string> IniFile::get_strings(const std::string& section, const std::string& key,
                                              std::vector<std::string> fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    std::vector<std::string> out;
    std::istringstream in(e->value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace safectl::harness
