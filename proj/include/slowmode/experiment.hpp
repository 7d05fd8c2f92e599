#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "slowmode/config.hpp"
#include "slowmode/grid.hpp"
#include "slowmode/msm.hpp"
#include "slowmode/potential.hpp"

namespace slowmode {

struct StageStatus {
    std::string artifact;
    bool cached = false;
};

// A potential, its lattice, and the transition matrix over it, brought up
// from the [potential] section of a config.
struct World {
    PotentialKind kind = PotentialKind::Beltway;
    PotentialSpec pot;
    PolarGrid polar{2, 2, 0.0, 1.0};  // placeholders until build_world assigns
    TorusGrid torus{2, 2};
    TransitionModel model;
};

World build_world(const ConfigFile& cfg);

struct ExperimentResult {
    nlohmann::json report;
    std::string report_path;
    bool all_pass = true;
    std::vector<StageStatus> stages;
};

// Shipped experiment descriptions, in presentation order:
// beltway-paper, torus-eq17, torus-eq18, linear-synthetic.
const std::vector<std::pair<std::string, std::string>>& builtin_presets();
const std::string* find_preset(const std::string& name);

// Throws with a diagnostic when the config is structurally unusable
// (missing schema_version, lag >= trajectory length, referenced file absent).
void validate_experiment_config(const ConfigFile& cfg);

// Runs the sample -> spectrum -> featurize -> train -> analyze pipeline into
// out_dir, skipping stages whose artifact already exists and whose recorded
// input signature matches (content-addressed via a manifest.json sidecar).
// The report and plot CSVs are assembled fresh on every call but contain no
// volatile fields, so a fully cached rerun is byte-identical.
ExperimentResult run_experiment(const ConfigFile& cfg, const std::string& out_dir);

// Overlap table for two trained runs against the same oracle modes: per-run
// overlaps with each mode, the found (argmax) mode, and the overlap between
// the two latents themselves. Refuses runs whose recorded feature digests
// disagree with each other or with the given feature file.
nlohmann::json compare_modes(const std::string& run_a_path,
                             const std::string& run_b_path,
                             const std::string& modes_path,
                             const std::string& features_path,
                             const std::string& traj_path);

}  // namespace slowmode
