#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace slowmode {

// One declared expectation checked against the assembled report.
// `key` is a dotted path into the report ("run.tae.final_loss",
// "analysis.by-r-bin.bound", "report.optimal_encoding_loss"); `op` is one of
// min / max / eq.
struct Expectation {
    std::string key;
    std::string op;
    nlohmann::json expected;
    nlohmann::json actual;
    bool pass = false;
};

// Looks up a dotted expectation key in a report object. Throws if the path
// does not resolve.
nlohmann::json report_lookup(const nlohmann::json& report, const std::string& key);

// Evaluates one expectation in place (fills actual/pass).
void evaluate_expectation(const nlohmann::json& report, Expectation& e);

// Canonical JSON schema the Report must validate against. The same bytes are
// checked in at schema/report.schema.json; a test pins the two together.
const std::string& report_schema_json();

// Minimal JSON-schema checker covering the subset the report schema uses:
// type (string or list), properties, required, items, enum,
// additionalProperties:false. Returns human-readable violations; empty means
// valid.
std::vector<std::string> validate_against_schema(const nlohmann::json& value,
                                                 const nlohmann::json& schema);

// Convenience: validate `report` against report_schema_json() and also check
// schema-independent invariants (all numbers finite, every run row named).
std::vector<std::string> validate_report(const nlohmann::json& report);

}  // namespace slowmode
