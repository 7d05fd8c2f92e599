#include "slowmode/config.hpp"

#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "slowmode/io.hpp"

namespace slowmode {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

bool ConfigFile::has(const std::string& sec, const std::string& key) const {
    auto it = sections.find(sec);
    return it != sections.end() && it->second.count(key) != 0;
}

const std::string& ConfigFile::get(const std::string& sec, const std::string& key) const {
    auto it = sections.find(sec);
    if (it == sections.end())
        throw std::runtime_error("config: missing section [" + sec + "]");
    auto kv = it->second.find(key);
    if (kv == it->second.end())
        throw std::runtime_error("config: missing key '" + key + "' in [" + sec + "]");
    return kv->second;
}

std::string ConfigFile::get_or(const std::string& sec, const std::string& key,
                               const std::string& fallback) const {
    return has(sec, key) ? get(sec, key) : fallback;
}

double ConfigFile::get_double(const std::string& sec, const std::string& key) const {
    const std::string& v = get(sec, key);
    char* end = nullptr;
    double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw std::runtime_error("config: key '" + key + "' in [" + sec +
                                 "] is not a number: '" + v + "'");
    return x;
}

double ConfigFile::get_double_or(const std::string& sec, const std::string& key,
                                 double fallback) const {
    return has(sec, key) ? get_double(sec, key) : fallback;
}

std::int64_t ConfigFile::get_int(const std::string& sec, const std::string& key) const {
    const std::string& v = get(sec, key);
    char* end = nullptr;
    long long x = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw std::runtime_error("config: key '" + key + "' in [" + sec +
                                 "] is not an integer: '" + v + "'");
    return x;
}

std::int64_t ConfigFile::get_int_or(const std::string& sec, const std::string& key,
                                    std::int64_t fallback) const {
    return has(sec, key) ? get_int(sec, key) : fallback;
}

bool ConfigFile::get_bool_or(const std::string& sec, const std::string& key,
                             bool fallback) const {
    if (!has(sec, key)) return fallback;
    const std::string& v = get(sec, key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("config: key '" + key + "' in [" + sec +
                             "] is not a boolean: '" + v + "'");
}

std::vector<int> ConfigFile::get_int_list(const std::string& sec,
                                          const std::string& key) const {
    const std::string& v = get(sec, key);
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw std::runtime_error("config: empty element in list '" + key + "'");
        char* end = nullptr;
        long x = std::strtol(item.c_str(), &end, 10);
        if (end == item.c_str() || *end != '\0')
            throw std::runtime_error("config: bad integer '" + item + "' in list '" +
                                     key + "'");
        out.push_back(static_cast<int>(x));
    }
    if (out.empty()) throw std::runtime_error("config: empty list '" + key + "'");
    return out;
}

std::vector<std::string> ConfigFile::sections_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& s : section_order)
        if (s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0)
            out.push_back(s);
    return out;
}

std::string ConfigFile::canonical() const {
    // std::map already sorts sections and keys
    std::string out;
    for (const auto& [sec, kvs] : sections) {
        for (const auto& [k, v] : kvs) {
            out += sec;
            out += '|';
            out += k;
            out += '=';
            out += v;
            out += '\n';
        }
    }
    return out;
}

ConfigFile parse_config(const std::string& text) {
    ConfigFile cfg;
    cfg.section_order.push_back("");
    cfg.sections[""];
    std::string current;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config: malformed section header at line " +
                                         std::to_string(lineno));
            current = trim(line.substr(1, line.size() - 2));
            if (current.empty())
                throw std::runtime_error("config: empty section name at line " +
                                         std::to_string(lineno));
            if (cfg.sections.count(current))
                throw std::runtime_error("config: duplicate section [" + current +
                                         "] at line " + std::to_string(lineno));
            cfg.section_order.push_back(current);
            cfg.sections[current];
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected 'key = value' at line " +
                                     std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
        auto& sec = cfg.sections[current];
        if (sec.count(key))
            throw std::runtime_error("config: duplicate key '" + key + "' in [" +
                                     current + "]");
        sec[key] = val;
    }
    return cfg;
}

ConfigFile load_config(const std::string& path) {
    return parse_config(read_file(path));
}

}  // namespace slowmode
