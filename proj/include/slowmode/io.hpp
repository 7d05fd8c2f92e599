#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "slowmode/features.hpp"
#include "slowmode/loss_theory.hpp"
#include "slowmode/mlp.hpp"
#include "slowmode/spectral.hpp"
#include "slowmode/train.hpp"

namespace slowmode {

// All writers below go through an atomic temp-file-then-rename so a crashed
// run never leaves a truncated artifact behind.
void atomic_write_file(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

// 64-bit FNV-1a, used for content-addressed stage caching.
std::uint64_t digest64(const std::string& bytes);
std::uint64_t digest64_file(const std::string& path);
std::string digest_hex(std::uint64_t d);

namespace detail {
std::string base64_encode(const unsigned char* data, std::size_t n);
std::vector<unsigned char> base64_decode(const std::string& s);
}  // namespace detail

// ---- state trajectories -------------------------------------------------
struct TrajectoryFile {
    std::uint32_t n_states = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> states;
};

void save_trajectory(const std::string& path, const TrajectoryFile& t);
TrajectoryFile load_trajectory(const std::string& path);
void save_trajectory_csv(const std::string& path, const TrajectoryFile& t);

// ---- feature series ------------------------------------------------------
void save_features(const std::string& path, const FeatureTrajectory& f);
FeatureTrajectory load_features(const std::string& path);
void save_features_csv(const std::string& path, const FeatureTrajectory& f);

// ---- network parameters --------------------------------------------------
void save_model_json(const std::string& path, const MlpSpec& spec, const MlpParams& p);
std::pair<MlpSpec, MlpParams> load_model_json(const std::string& path);

// ---- spectral modes --------------------------------------------------------
// JSON holds eigenvalues/timescales and a relative path to the CSV holding
// the eigenfunction matrix (n_states rows x k columns, one header line).
void save_modes(const std::string& json_path, const SpectralModes& modes);
SpectralModes load_modes(const std::string& json_path);

// ---- analysis output -------------------------------------------------------
void save_evaluation(const std::string& path, const EncodingEvaluation& ev,
                     const std::string& encoding_tag, double empirical_loss);

// ---- training runs --------------------------------------------------------
// Writes run JSON plus two model files (<stem>.final.model.json /
// <stem>.best.model.json) next to it; the run JSON references them by name.
// features_digest records which feature file the run was trained on so later
// comparisons can refuse to mix runs from different data.
void save_training_run(const std::string& path, const TrainingRun& run,
                       const std::string& features_digest = "");
TrainingRun load_training_run(const std::string& path);
std::string load_run_features_digest(const std::string& path);

}  // namespace slowmode
