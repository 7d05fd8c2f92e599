#include "slowmode/report.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace slowmode {

using nlohmann::json;

namespace {

const char* kSchema = R"json({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "slowmode experiment report",
  "type": "object",
  "required": ["schema_version", "experiment", "runs", "expectations", "all_pass"],
  "additionalProperties": false,
  "properties": {
    "schema_version": {"type": "integer"},
    "experiment": {"type": "string"},
    "config_digest": {"type": "string"},
    "analyses": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["encoding", "lag", "sigma2", "variance_explained", "propagation", "capacity", "bound"],
        "additionalProperties": false,
        "properties": {
          "encoding": {"type": "string"},
          "lag": {"type": "integer"},
          "sigma2": {"type": "number"},
          "variance_explained": {"type": "number"},
          "g": {"type": ["number", "null"]},
          "propagation": {"type": "number"},
          "capacity": {"type": "number"},
          "bound": {"type": "number"},
          "empirical_decoder_loss": {"type": "number"}
        }
      }
    },
    "optimal_encoding_loss": {"type": "number"},
    "timescales": {"type": "array", "items": {"type": "number"}},
    "runs": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["name", "objective", "final_loss", "best_val", "best_epoch"],
        "additionalProperties": false,
        "properties": {
          "name": {"type": "string"},
          "objective": {"type": "string", "enum": ["tae", "srv", "mtae", "vde"]},
          "final_loss": {"type": "number"},
          "best_val": {"type": "number"},
          "best_epoch": {"type": "integer"},
          "epochs_run": {"type": "integer"},
          "latent_bound": {"type": "number"},
          "latent_g": {"type": ["number", "null"]},
          "overlaps": {"type": "object"},
          "found_mode": {"type": "string"},
          "fraction_theta": {"type": "number"},
          "fraction_r": {"type": "number"},
          "closed_form_loss": {"type": "number"},
          "loss_gap": {"type": "number"},
          "cos_slow_axis": {"type": "number"},
          "cos_fast_axis": {"type": "number"}
        }
      }
    },
    "expectations": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["key", "op", "expected", "actual", "pass"],
        "additionalProperties": false,
        "properties": {
          "key": {"type": "string"},
          "op": {"type": "string", "enum": ["min", "max", "eq"]},
          "expected": {},
          "actual": {},
          "pass": {"type": "boolean"}
        }
      }
    },
    "all_pass": {"type": "boolean"}
  }
}
)json";

std::vector<std::string> split_path(const std::string& key) {
    std::vector<std::string> parts;
    std::stringstream ss(key);
    std::string p;
    while (std::getline(ss, p, '.')) parts.push_back(p);
    return parts;
}

std::string type_name(const json& v) {
    if (v.is_null()) return "null";
    if (v.is_boolean()) return "boolean";
    if (v.is_number_integer()) return "integer";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    return "object";
}

bool type_matches(const json& v, const std::string& t) {
    if (t == "number") return v.is_number();
    if (t == "integer") return v.is_number_integer();
    if (t == "null") return v.is_null();
    if (t == "boolean") return v.is_boolean();
    if (t == "string") return v.is_string();
    if (t == "array") return v.is_array();
    if (t == "object") return v.is_object();
    return false;
}

void check(const json& v, const json& schema, const std::string& path,
           std::vector<std::string>& errs) {
    if (!schema.is_object()) return;  // empty schema accepts anything
    if (schema.contains("type")) {
        const json& t = schema["type"];
        bool ok = false;
        if (t.is_string()) {
            ok = type_matches(v, t.get<std::string>());
        } else {
            for (const auto& alt : t)
                if (type_matches(v, alt.get<std::string>())) ok = true;
        }
        if (!ok) {
            errs.push_back(path + ": expected type " + t.dump() + ", got " +
                           type_name(v));
            return;
        }
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& alt : schema["enum"])
            if (v == alt) ok = true;
        if (!ok) errs.push_back(path + ": value " + v.dump() + " not in enum");
    }
    if (v.is_object()) {
        if (schema.contains("required"))
            for (const auto& r : schema["required"])
                if (!v.contains(r.get<std::string>()))
                    errs.push_back(path + ": missing required key '" +
                                   r.get<std::string>() + "'");
        const json* props = schema.contains("properties") ? &schema["properties"] : nullptr;
        bool closed = schema.contains("additionalProperties") &&
                      schema["additionalProperties"].is_boolean() &&
                      !schema["additionalProperties"].get<bool>();
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (props && props->contains(it.key())) {
                check(it.value(), (*props)[it.key()], path + "." + it.key(), errs);
            } else if (closed) {
                errs.push_back(path + ": unexpected key '" + it.key() + "'");
            }
        }
    } else if (v.is_array() && schema.contains("items")) {
        std::size_t i = 0;
        for (const auto& el : v) {
            check(el, schema["items"], path + "[" + std::to_string(i) + "]", errs);
            ++i;
        }
    }
}

void check_finite(const json& v, const std::string& path,
                  std::vector<std::string>& errs) {
    if (v.is_number_float()) {
        double x = v.get<double>();
        if (!std::isfinite(x)) errs.push_back(path + ": non-finite number");
    } else if (v.is_object()) {
        for (auto it = v.begin(); it != v.end(); ++it)
            check_finite(it.value(), path + "." + it.key(), errs);
    } else if (v.is_array()) {
        std::size_t i = 0;
        for (const auto& el : v)
            check_finite(el, path + "[" + std::to_string(i++) + "]", errs);
    }
}

}  // namespace

const std::string& report_schema_json() {
    static const std::string s = kSchema;
    return s;
}

std::vector<std::string> validate_against_schema(const json& value, const json& schema) {
    std::vector<std::string> errs;
    check(value, schema, "$", errs);
    return errs;
}

nlohmann::json report_lookup(const json& report, const std::string& key) {
    auto parts = split_path(key);
    if (parts.size() < 2) throw std::runtime_error("expectation key too short: " + key);
    const json* node = nullptr;
    std::size_t next = 1;
    if (parts[0] == "report") {
        node = &report;
    } else if (parts[0] == "run" || parts[0] == "analysis") {
        if (parts.size() < 3)
            throw std::runtime_error("expectation key too short: " + key);
        const char* arr = parts[0] == "run" ? "runs" : "analyses";
        const char* id = parts[0] == "run" ? "name" : "encoding";
        if (!report.contains(arr))
            throw std::runtime_error("report has no " + std::string(arr));
        for (const auto& row : report[arr])
            if (row.contains(id) && row[id] == parts[1]) node = &row;
        if (!node)
            throw std::runtime_error("no " + parts[0] + " named '" + parts[1] +
                                     "' in report");
        next = 2;
    } else {
        throw std::runtime_error("expectation key must start with run./analysis./report.: " +
                                 key);
    }
    for (; next < parts.size(); ++next) {
        if (!node->is_object() || !node->contains(parts[next]))
            throw std::runtime_error("expectation path not found in report: " + key);
        node = &(*node)[parts[next]];
    }
    return *node;
}

void evaluate_expectation(const json& report, Expectation& e) {
    e.actual = report_lookup(report, e.key);
    if (e.op == "eq") {
        e.pass = (e.actual == e.expected);
        return;
    }
    if (!e.actual.is_number() || !e.expected.is_number()) {
        e.pass = false;
        return;
    }
    double a = e.actual.get<double>();
    double x = e.expected.get<double>();
    if (e.op == "min")
        e.pass = a >= x;
    else if (e.op == "max")
        e.pass = a <= x;
    else
        throw std::runtime_error("unknown expectation op: " + e.op);
}

std::vector<std::string> validate_report(const json& report) {
    auto errs = validate_against_schema(report, json::parse(report_schema_json()));
    check_finite(report, "$", errs);
    if (report.contains("runs") && report["runs"].is_array()) {
        std::set<std::string> names;
        for (const auto& row : report["runs"]) {
            if (!row.contains("name") || !row["name"].is_string()) continue;
            std::string n = row["name"].get<std::string>();
            if (n.empty()) errs.push_back("runs: empty run name");
            if (!names.insert(n).second) errs.push_back("runs: duplicate run name '" + n + "'");
        }
    }
    return errs;
}

}  // namespace slowmode
