#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace slowmode {

// INI-style experiment description: `key = value` lines grouped under
// [section] headers, '#' comments, blank lines ignored. Top-level keys (before
// any header) live in the "" section. Section order is preserved.
struct ConfigFile {
    std::vector<std::string> section_order;
    std::map<std::string, std::map<std::string, std::string>> sections;

    bool has_section(const std::string& s) const { return sections.count(s) != 0; }
    bool has(const std::string& sec, const std::string& key) const;
    const std::string& get(const std::string& sec, const std::string& key) const;
    std::string get_or(const std::string& sec, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& sec, const std::string& key) const;
    double get_double_or(const std::string& sec, const std::string& key,
                         double fallback) const;
    std::int64_t get_int(const std::string& sec, const std::string& key) const;
    std::int64_t get_int_or(const std::string& sec, const std::string& key,
                            std::int64_t fallback) const;
    bool get_bool_or(const std::string& sec, const std::string& key,
                     bool fallback) const;
    std::vector<int> get_int_list(const std::string& sec, const std::string& key) const;

    // sections whose names start with prefix, in file order
    std::vector<std::string> sections_with_prefix(const std::string& prefix) const;

    // canonical serialization for digests: sorted sections/keys, one per line
    std::string canonical() const;
};

ConfigFile parse_config(const std::string& text);
ConfigFile load_config(const std::string& path);

}  // namespace slowmode
