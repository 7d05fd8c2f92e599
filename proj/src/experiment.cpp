#include "slowmode/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "slowmode/chains.hpp"
#include "slowmode/features.hpp"
#include "slowmode/io.hpp"
#include "slowmode/linear_tae.hpp"
#include "slowmode/loss_theory.hpp"
#include "slowmode/msm.hpp"
#include "slowmode/objectives.hpp"
#include "slowmode/potential.hpp"
#include "slowmode/report.hpp"
#include "slowmode/spectral.hpp"
#include "slowmode/train.hpp"

namespace slowmode {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string g17(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---- stage bookkeeping -----------------------------------------------------

// manifest.json maps artifact filename -> {input signature, output digest}.
// A stage is skipped when its artifact exists and the recorded input
// signature matches the recomputed one.
struct Manifest {
    fs::path path;
    json data = json::object();

    void load() {
        if (fs::exists(path)) data = json::parse(read_file(path.string()));
    }
    std::string input_of(const std::string& artifact) const {
        if (!data.contains(artifact)) return "";
        return data[artifact].value("input", std::string());
    }
    std::string output_of(const std::string& artifact) const {
        return data[artifact].value("output", std::string());
    }
    void record(const std::string& artifact, const std::string& input,
                const std::string& output) {
        data[artifact] = {{"input", input}, {"output", output}};
        atomic_write_file(path.string(), data.dump(2) + "\n");
    }
};

struct Pipeline {
    const ConfigFile& cfg;
    fs::path dir;
    Manifest man;
    std::vector<StageStatus> stages;

    Pipeline(const ConfigFile& c, const std::string& out_dir) : cfg(c), dir(out_dir) {
        fs::create_directories(dir);
        man.path = dir / "manifest.json";
        man.load();
    }

    // Runs `build` unless the artifact is already up to date; returns the
    // artifact's content digest either way.
    template <class F>
    std::string stage(const std::string& artifact, const std::string& input_sig, F&& build) {
        const fs::path ap = dir / artifact;
        if (fs::exists(ap) && man.input_of(artifact) == input_sig) {
            stages.push_back({artifact, true});
            return man.output_of(artifact);
        }
        try {
            build(ap.string());
        } catch (const std::exception& e) {
            throw std::runtime_error("stage '" + artifact + "' failed: " + e.what());
        }
        if (!fs::exists(ap))
            throw std::runtime_error("stage '" + artifact + "' produced no artifact");
        const std::string out = digest_hex(digest64_file(ap.string()));
        man.record(artifact, input_sig, out);
        stages.push_back({artifact, false});
        return out;
    }
};

// Canonical text of the named config sections, for input signatures.
std::string slice(const ConfigFile& cfg, std::initializer_list<std::string> names) {
    std::string out;
    for (const auto& n : names) {
        auto it = cfg.sections.find(n);
        if (it == cfg.sections.end()) continue;
        for (const auto& [k, v] : it->second) out += n + "|" + k + "=" + v + "\n";
    }
    return out;
}

}  // namespace

// ---- world construction ----------------------------------------------------

World build_world(const ConfigFile& cfg) {
    World w;
    const std::string kind = cfg.get("potential", "kind");
    if (kind == "beltway") {
        w.kind = PotentialKind::Beltway;
        w.pot.kind = w.kind;
        w.pot.r1 = cfg.get_double_or("potential", "r1", 0.7);
        w.pot.r2 = cfg.get_double_or("potential", "r2", 0.9);
        w.pot.dr = cfg.get_double_or("potential", "dr", 0.05);
        w.polar = PolarGrid(static_cast<int>(cfg.get_int_or("potential", "nr", 20)),
                            static_cast<int>(cfg.get_int_or("potential", "ntheta", 200)),
                            cfg.get_double_or("potential", "rmin", 0.6),
                            cfg.get_double_or("potential", "rmax", 1.0));
        const int conv = static_cast<int>(cfg.get_int_or("potential", "convention", 4));
        w.model = build_beltway_model(w.pot, w.polar, conv);
    } else if (kind == "torus") {
        w.kind = PotentialKind::TorusSurrogate;
        w.pot.kind = w.kind;
        w.pot.b_phi = cfg.get_double_or("potential", "bphi", 5.0);
        w.pot.b_psi = cfg.get_double_or("potential", "bpsi", 2.5);
        w.torus = TorusGrid(static_cast<int>(cfg.get_int_or("potential", "nphi", 50)),
                            static_cast<int>(cfg.get_int_or("potential", "npsi", 50)));
        w.model = build_torus_model(w.pot, w.torus);
    } else {
        throw std::runtime_error("unknown potential kind: " + kind);
    }
    return w;
}

namespace {

uint32_t argmax_pi(const TransitionModel& m) {
    uint32_t best = 0;
    for (int i = 1; i < m.n_states; ++i)
        if (m.pi[i] > m.pi[best]) best = static_cast<uint32_t>(i);
    return best;
}

FeatureTrajectory raw_features(const ConfigFile& cfg, const World* w,
                               const std::vector<uint32_t>& states) {
    const std::string source = cfg.get("features", "source");
    if (source == "polar") {
        return featurize_polar(states, w->polar);
    }
    if (source == "ring-slow" || source == "ring-fast") {
        RingFeatureSpec rs;
        rs.r0 = cfg.get_double_or("features", "r0", 1.0);
        rs.dr = cfg.get_double_or("features", "dr", 0.02);
        rs.anchor = cfg.get_double_or("features", "anchor", 2.0);
        rs.mode = source == "ring-slow" ? RingFeatureSpec::Mode::SlowOnRadius
                                        : RingFeatureSpec::Mode::FastOnRadius;
        std::vector<double> phi, psi;
        torus_angles(states, w->torus, phi, psi);
        return engineer_ring_features(phi, psi, rs);
    }
    throw std::runtime_error("unknown feature source: " + source);
}

FeatureTrajectory chain_features(const ConfigFile& cfg) {
    BinaryChainSpec spec;
    spec.sigma1 = cfg.get_double_or("features", "sigma1", 1.0);
    spec.sigma2 = cfg.get_double_or("features", "sigma2", 4.0);
    spec.a1 = cfg.get_double_or("features", "a1", 0.9);
    spec.a2 = cfg.get_double_or("features", "a2", 0.5);
    spec.lag = static_cast<std::size_t>(cfg.get_int_or("features", "lag", 5));
    const std::size_t n = static_cast<std::size_t>(cfg.get_int("features", "n"));
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("features", "seed"));
    FeatureTrajectory f;
    f.xy.resize(2 * n);
    sample_binary_chains(spec, n, seed, f.xy.data());
    f.provenance = "binary-chains sigma=(" + g17(spec.sigma1) + "," + g17(spec.sigma2) +
                   ") a=(" + g17(spec.a1) + "," + g17(spec.a2) + ") lag=" +
                   std::to_string(spec.lag) + " seed=" + std::to_string(seed);
    return f;
}

// ---- training --------------------------------------------------------------

TrainingConfig training_config_from(const ConfigFile& cfg, const std::string& sec) {
    TrainingConfig tc;
    tc.lag = static_cast<std::size_t>(cfg.get_int_or(sec, "lag", 3000));
    tc.stride = static_cast<std::size_t>(cfg.get_int_or(sec, "stride", 10));
    tc.batch = static_cast<std::size_t>(cfg.get_int_or(sec, "batch", 4096));
    tc.max_epochs = static_cast<int>(cfg.get_int_or(sec, "max_epochs", 200));
    tc.lr = cfg.get_double_or(sec, "lr", 1e-3);
    tc.seed = static_cast<std::uint64_t>(cfg.get_int_or(sec, "seed", 7));
    tc.val_fraction = cfg.get_double_or(sec, "val_fraction", 0.1);
    tc.patience = static_cast<int>(cfg.get_int_or(sec, "patience", 20));
    tc.deterministic = cfg.get_bool_or(sec, "deterministic", true);
    tc.lambda = cfg.get_double_or(sec, "lambda", 0.5);
    tc.lr_decay = cfg.get_double_or(sec, "lr_decay", 0.3);
    tc.decay_patience = static_cast<int>(cfg.get_int_or(sec, "decay_patience", 6));
    return tc;
}

std::string run_name_of(const std::string& section) {
    return section.substr(std::string("train.").size());
}

// Pair starts for the full-data loss at the run's own lag/stride.
std::vector<std::uint64_t> pair_starts(std::size_t n_frames, std::size_t lag,
                                       std::size_t stride) {
    if (n_frames < lag + 2) throw std::runtime_error("trajectory shorter than lag");
    const std::size_t n_pairs = (n_frames - lag - 1) / stride + 1;
    std::vector<std::uint64_t> starts(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) starts[i] = i * stride;
    return starts;
}

double pearson_abs(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::runtime_error("series length mismatch");
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(a.size());
    double saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa <= 0 || sbb <= 0) return std::numeric_limits<double>::quiet_NaN();
    return std::abs(sab / std::sqrt(saa * sbb));
}

// Encoder weight-matrix product for an all-linear encoder: the direction the
// scalar latent projects the input onto.
std::vector<double> linear_encoder_direction(const MlpSpec& spec, const MlpParams& p) {
    const int enc_layers = spec.latent_index > 0 ? spec.latent_index : spec.n_layers();
    std::vector<double> v(spec.in_width());  // current = row vector W_prod
    // build as product acting on input: start with W_0, left-multiply
    std::vector<double> cur;  // cur is (out x in) of composed map
    int in = spec.in_width();
    cur.assign(static_cast<std::size_t>(in) * in, 0.0);
    for (int i = 0; i < in; ++i) cur[static_cast<std::size_t>(i) * in + i] = 1.0;
    int rows = in;
    for (int l = 0; l < enc_layers; ++l) {
        if (spec.acts[l] != Act::Linear)
            throw std::runtime_error("encoder direction needs an all-linear encoder");
        const int out = spec.widths[l + 1];
        const int mid = spec.widths[l];
        auto W = p.w(l);  // out x mid row-major
        std::vector<double> next(static_cast<std::size_t>(out) * in, 0.0);
        for (int o = 0; o < out; ++o)
            for (int m = 0; m < mid; ++m) {
                const double wv = W[static_cast<std::size_t>(o) * mid + m];
                for (int c = 0; c < in; ++c)
                    next[static_cast<std::size_t>(o) * in + c] +=
                        wv * cur[static_cast<std::size_t>(m) * in + c];
            }
        cur.swap(next);
        rows = out;
    }
    if (rows != 1) throw std::runtime_error("encoder direction needs a scalar latent");
    cur.resize(static_cast<std::size_t>(in));
    return cur;
}

// ---- expectations ----------------------------------------------------------

std::vector<Expectation> parse_expectations(const ConfigFile& cfg) {
    std::vector<Expectation> out;
    auto it = cfg.sections.find("expect");
    if (it == cfg.sections.end()) return out;
    for (const auto& [key, val] : it->second) {
        const std::size_t dot = key.rfind('.');
        if (dot == std::string::npos)
            throw std::runtime_error("expectation key needs a trailing .min/.max/.eq: " + key);
        Expectation e;
        e.key = key.substr(0, dot);
        e.op = key.substr(dot + 1);
        if (e.op != "min" && e.op != "max" && e.op != "eq")
            throw std::runtime_error("unknown expectation op '" + e.op + "' in " + key);
        char* end = nullptr;
        const double x = std::strtod(val.c_str(), &end);
        if (end != val.c_str() && *end == '\0')
            e.expected = x;
        else
            e.expected = val;  // string comparison (found_mode etc.)
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

// ---- presets ----------------------------------------------------------------

const std::vector<std::pair<std::string, std::string>>& builtin_presets() {
    static const std::vector<std::pair<std::string, std::string>> presets = {
        {"beltway-paper", R"cfg(# Two-valley ring potential: reconstruction-optimal encodings ignore the
# slow radial hop, so the TAE lands on the fast angular coordinate while
# autocorrelation-driven objectives recover the radial mode.
schema_version = 1
name = beltway-paper

[potential]
kind = beltway
nr = 20
ntheta = 200
rmin = 0.6
rmax = 1.0
r1 = 0.7
r2 = 0.9
dr = 0.05
convention = 4

[sample]
steps = 5000000
seed = 3

[spectrum]
k = 4

[features]
source = polar

[train.tae]
objective = tae
widths = 2,50,50,1
lag = 3000
stride = 10
batch = 4096
max_epochs = 20
patience = 20
lr = 0.001
seed = 7

[train.srv]
objective = srv
widths = 2,50,50,1
lag = 3000
stride = 10
batch = 4096
max_epochs = 200
patience = 20
lr = 0.001
seed = 7

[train.mtae]
objective = mtae
widths = 2,50,50,1
lag = 3000
stride = 10
batch = 4096
max_epochs = 200
patience = 20
lr = 0.001
seed = 7

[train.vde]
objective = vde
lambda = 0.5
widths = 2,50,50,1
lag = 3000
stride = 10
batch = 4096
max_epochs = 20
patience = 20
lr = 0.001
seed = 7

[analyze]
encodings = by-state, by-r-bin, by-theta-bin
lag = 3000
quantile_bins = 200

[expect]
analysis.by-r-bin.bound.min = 1.99
analysis.by-r-bin.bound.max = 2.01
analysis.by-theta-bin.bound.min = 1.41
analysis.by-theta-bin.bound.max = 1.47
analysis.by-theta-bin.g.min = 0.515
analysis.by-theta-bin.g.max = 0.555
report.optimal_encoding_loss.min = 1.39
report.optimal_encoding_loss.max = 1.45
run.tae.final_loss.min = 1.42
run.tae.final_loss.max = 1.55
run.tae.fraction_theta.min = 0.8
run.tae.fraction_r.max = 0.2
run.srv.overlaps.psi1.min = 0.9
run.srv.fraction_r.min = 0.9
run.srv.found_mode.eq = psi1
run.mtae.overlaps.psi1.min = 0.9
run.mtae.fraction_r.min = 0.9
run.mtae.found_mode.eq = psi1
)cfg"},
        {"torus-eq17", R"cfg(# Independent two-well angles mapped to the plane with the slow angle wound
# onto a nearly flat radius: variance favors the fast ring angle, so the TAE
# finds the fast mode and the SRV still finds the slow one.
schema_version = 1
name = torus-eq17

[potential]
kind = torus
nphi = 50
npsi = 50
bphi = 5.0
bpsi = 2.5

[sample]
steps = 4000000
seed = 3

[spectrum]
k = 4

[features]
source = ring-slow
r0 = 1.0
dr = 0.02
anchor = 2.0

[train.tae]
objective = tae
widths = 2,50,50,1
lag = 3000
stride = 10
batch = 4096
max_epochs = 20
patience = 20
lr = 0.001
seed = 7

[train.srv]
objective = srv
widths = 2,50,50,1
lag = 3000
stride = 10
batch = 4096
max_epochs = 200
patience = 20
lr = 0.001
seed = 7

[analyze]
encodings = by-state
lag = 3000
quantile_bins = 200

[expect]
run.tae.found_mode.eq = psi2
run.srv.found_mode.eq = psi1
)cfg"},
        {"torus-eq18", R"cfg(# Same two-well angles with the winding swapped: the fast angle rides the
# radius, the slow angle spans the ring, and reconstruction now agrees with
# autocorrelation about which mode matters.
schema_version = 1
name = torus-eq18

[potential]
kind = torus
nphi = 50
npsi = 50
bphi = 5.0
bpsi = 2.5

[sample]
steps = 4000000
seed = 3

[spectrum]
k = 4

[features]
source = ring-fast
r0 = 1.0
dr = 0.02
anchor = 2.0

[train.tae]
objective = tae
widths = 2,50,50,1
lag = 3000
stride = 10
batch = 4096
max_epochs = 20
patience = 20
lr = 0.001
seed = 7

[train.srv]
objective = srv
widths = 2,50,50,1
lag = 3000
stride = 10
batch = 4096
max_epochs = 200
patience = 20
lr = 0.001
seed = 7

[analyze]
encodings = by-state
lag = 3000
quantile_bins = 200

[expect]
run.tae.found_mode.eq = psi1
run.srv.found_mode.eq = psi1
)cfg"},
        {"linear-synthetic", R"cfg(# Two independent binary chains through a linear autoencoder: without
# whitening the high-variance fast chain wins the reconstruction contest;
# whitening equalizes the variances and the slow chain takes over.
schema_version = 1
name = linear-synthetic

[features]
source = chains
n = 2000000
seed = 11
sigma1 = 1.0
sigma2 = 4.0
a1 = 0.9
a2 = 0.5
lag = 5

[train.tae-raw]
objective = tae
widths = 2,1
features = centered
lag = 5
stride = 1
batch = 4096
max_epochs = 40
patience = 10
lr = 0.01
seed = 7

[train.tae-white]
objective = tae
widths = 2,1
features = whitened
lag = 5
stride = 1
batch = 4096
max_epochs = 40
patience = 10
lr = 0.01
seed = 7

[expect]
run.tae-raw.found_mode.eq = fast
run.tae-raw.loss_gap.max = 0.001
run.tae-raw.cos_fast_axis.min = 0.999
run.tae-white.found_mode.eq = slow
run.tae-white.loss_gap.max = 0.001
run.tae-white.cos_slow_axis.min = 0.999
)cfg"},
    };
    return presets;
}

const std::string* find_preset(const std::string& name) {
    for (const auto& [n, text] : builtin_presets())
        if (n == name) return &text;
    return nullptr;
}

void validate_experiment_config(const ConfigFile& cfg) {
    if (!cfg.has("", "schema_version"))
        throw std::runtime_error("config: missing schema_version");
    if (cfg.get_int("", "schema_version") != 1)
        throw std::runtime_error("config: unsupported schema_version");
    if (!cfg.has("", "name")) throw std::runtime_error("config: missing name");
    const std::string source = cfg.get("features", "source");
    std::uint64_t n_frames = 0;
    if (source == "chains") {
        n_frames = static_cast<std::uint64_t>(cfg.get_int("features", "n"));
    } else {
        if (!cfg.has_section("potential") || !cfg.has_section("sample"))
            throw std::runtime_error("config: potential/sample sections required");
        n_frames = static_cast<std::uint64_t>(cfg.get_int("sample", "steps"));
    }
    const auto trains = cfg.sections_with_prefix("train.");
    if (trains.empty()) throw std::runtime_error("config: no [train.*] sections");
    for (const auto& sec : trains) {
        const auto tc = training_config_from(cfg, sec);
        tc.validate(objective_from_name(cfg.get(sec, "objective")));
        if (tc.lag >= n_frames)
            throw std::runtime_error("config: lag >= trajectory length in [" + sec + "]");
        const std::string feats = cfg.get_or(sec, "features", "whitened");
        if (feats != "centered" && feats != "whitened")
            throw std::runtime_error("config: features must be centered|whitened in [" +
                                     sec + "]");
    }
    // any literal file reference must exist up front
    for (const auto& [sec, kvs] : cfg.sections)
        for (const auto& [k, v] : kvs)
            if (k == "file" && !fs::exists(v))
                throw std::runtime_error("config: referenced file missing: " + v);
}

// ---- the pipeline -----------------------------------------------------------

ExperimentResult run_experiment(const ConfigFile& cfg, const std::string& out_dir) {
    validate_experiment_config(cfg);
    Pipeline pipe(cfg, out_dir);
    const std::string source = cfg.get("features", "source");
    const bool has_world = source != "chains";

    // -- sample ---------------------------------------------------------------
    std::string traj_digest;
    if (has_world) {
        traj_digest = pipe.stage(
            "traj.bin", "traj/v1|" + slice(cfg, {"potential", "sample"}),
            [&](const std::string& path) {
                World w = build_world(cfg);
                TrajectoryFile t;
                t.n_states = static_cast<std::uint32_t>(w.model.n_states);
                t.seed = static_cast<std::uint64_t>(cfg.get_int("sample", "seed"));
                t.states = sample_trajectory(
                    w.model, static_cast<std::uint64_t>(cfg.get_int("sample", "steps")),
                    t.seed, argmax_pi(w.model));
                save_trajectory(path, t);
            });
    }

    // -- spectrum ---------------------------------------------------------------
    std::string modes_digest;
    if (has_world && cfg.has_section("spectrum")) {
        modes_digest = pipe.stage(
            "modes.json", "modes/v1|" + slice(cfg, {"potential", "spectrum"}),
            [&](const std::string& path) {
                World w = build_world(cfg);
                const int k = static_cast<int>(cfg.get_int_or("spectrum", "k", 4));
                save_modes(path, leading_modes(w.model, k));
            });
    }

    // -- featurize --------------------------------------------------------------
    auto build_features = [&](const std::string& path, bool whiten) {
        FeatureTrajectory f;
        if (has_world) {
            World w = build_world(cfg);
            const TrajectoryFile t = load_trajectory((pipe.dir / "traj.bin").string());
            f = raw_features(cfg, &w, t.states);
        } else {
            f = chain_features(cfg);
        }
        center_and_whiten(f, whiten);
        save_features(path, f);
    };
    const std::string feat_sig_base =
        (has_world ? "feat/v1|" + slice(cfg, {"potential", "features"}) + traj_digest
                   : "feat/v1|" + slice(cfg, {"features"}));
    const std::string centered_digest =
        pipe.stage("feat.centered.bin", feat_sig_base + "|centered",
                   [&](const std::string& p) { build_features(p, false); });
    const std::string whitened_digest =
        pipe.stage("feat.whitened.bin", feat_sig_base + "|whitened",
                   [&](const std::string& p) { build_features(p, true); });

    // -- train --------------------------------------------------------------------
    struct RunRef {
        std::string name, section, run_file, feat_file;
    };
    std::vector<RunRef> runs;
    for (const auto& sec : cfg.sections_with_prefix("train.")) {
        RunRef r;
        r.name = run_name_of(sec);
        r.section = sec;
        r.run_file = "run." + r.name + ".json";
        const std::string feats = cfg.get_or(sec, "features", "whitened");
        r.feat_file = feats == "centered" ? "feat.centered.bin" : "feat.whitened.bin";
        const std::string& fdigest =
            feats == "centered" ? centered_digest : whitened_digest;
        pipe.stage(r.run_file, "train/v1|" + slice(cfg, {sec}) + fdigest,
                   [&](const std::string& path) {
                       const FeatureTrajectory f =
                           load_features((pipe.dir / r.feat_file).string());
                       const Objective obj = objective_from_name(cfg.get(sec, "objective"));
                       const auto widths = cfg.get_int_list(sec, "widths");
                       const MlpSpec spec = objective_uses_decoder(obj)
                                                ? MlpSpec::autoencoder(widths)
                                                : MlpSpec::encoder(widths);
                       const TrainingConfig tc = training_config_from(cfg, sec);
                       const TrainingRun run =
                           train(obj, spec, f.xy.data(), f.n_frames(), 2, tc);
                       save_training_run(path, run, fdigest);
                   });
        runs.push_back(std::move(r));
    }

    // -- analyze ---------------------------------------------------------------
    std::vector<std::string> encodings;
    if (has_world && cfg.has_section("analyze")) {
        std::string enc_list = cfg.get_or("analyze", "encodings", "by-state");
        std::stringstream ss(enc_list);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto a = item.find_first_not_of(" \t");
            const auto b = item.find_last_not_of(" \t");
            if (a != std::string::npos) encodings.push_back(item.substr(a, b - a + 1));
        }
        const std::size_t alag =
            static_cast<std::size_t>(cfg.get_int_or("analyze", "lag", 3000));
        for (const auto& enc_name : encodings) {
            pipe.stage(
                "eval." + enc_name + ".json",
                "analyze/v1|" + enc_name + "|" + slice(cfg, {"potential", "analyze"}) +
                    whitened_digest + traj_digest,
                [&](const std::string& path) {
                    const FeatureTrajectory f =
                        load_features((pipe.dir / "feat.whitened.bin").string());
                    const TrajectoryFile t =
                        load_trajectory((pipe.dir / "traj.bin").string());
                    World w = build_world(cfg);
                    DiscretizedEncoding enc;
                    if (enc_name == "by-state")
                        enc = encode_by_state(t.states);
                    else if (enc_name == "by-r-bin" && w.kind == PotentialKind::Beltway)
                        enc = encode_by_radial_bin(t.states, w.polar);
                    else if (enc_name == "by-theta-bin" && w.kind == PotentialKind::Beltway)
                        enc = encode_by_angular_bin(t.states, w.polar);
                    else
                        throw std::runtime_error("unknown encoding: " + enc_name);
                    const auto ev =
                        tae_loss_bound(f.xy.data(), f.n_frames(), 2, enc, alag);
                    const double emp = empirical_optimal_decoder_loss(
                        f.xy.data(), f.n_frames(), 2, enc, alag);
                    save_evaluation(path, ev, enc_name, emp);
                });
        }
    }

    // -- report (always assembled) ----------------------------------------------
    json report;
    report["schema_version"] = 1;
    report["experiment"] = cfg.get("", "name");
    report["config_digest"] = digest_hex(digest64(cfg.canonical()));

    SpectralModes modes;
    TrajectoryFile traj;
    if (has_world) {
        traj = load_trajectory((pipe.dir / "traj.bin").string());
        if (!modes_digest.empty()) {
            modes = load_modes((pipe.dir / "modes.json").string());
            json ts = json::array();
            for (int i = 1; i < modes.k; ++i) ts.push_back(modes.timescales[i]);
            report["timescales"] = ts;
        }
    }

    if (!encodings.empty()) {
        json analyses = json::array();
        for (const auto& enc_name : encodings) {
            const json ev =
                json::parse(read_file((pipe.dir / ("eval." + enc_name + ".json")).string()));
            json row;
            row["encoding"] = enc_name;
            row["lag"] = ev.at("lag");
            row["sigma2"] = ev.at("sigma2");
            row["variance_explained"] = ev.at("variance_explained");
            row["g"] = ev.at("generalized_autocorrelation");
            row["propagation"] = ev.at("propagation_loss");
            row["capacity"] = ev.at("capacity_loss");
            row["bound"] = ev.at("bound");
            row["empirical_decoder_loss"] = ev.at("empirical_optimal_decoder_loss");
            analyses.push_back(std::move(row));
            if (enc_name == "by-state")
                report["optimal_encoding_loss"] = ev.at("bound");
        }
        report["analyses"] = std::move(analyses);
    }

    json run_rows = json::array();
    for (const auto& r : runs) {
        const TrainingRun run = load_training_run((pipe.dir / r.run_file).string());
        const FeatureTrajectory f = load_features((pipe.dir / r.feat_file).string());
        const std::size_t n = f.n_frames();

        json row;
        row["name"] = r.name;
        row["objective"] = objective_name(run.objective);
        row["best_val"] = run.best_val;
        row["best_epoch"] = run.best_epoch;
        row["epochs_run"] = static_cast<int>(run.train_history.size());

        const auto starts = pair_starts(n, run.config.lag, run.config.stride);
        row["final_loss"] = objective_full_loss(
            run.objective, run.spec, run.best_params, f.xy.data(), n, 2,
            starts.data(), starts.size(), run.config.lag, run.config.lambda);

        std::vector<double> z(n);
        mlp_encode(run.spec, run.best_params, f.xy.data(), n, z.data());

        if (has_world) {
            const int qbins =
                static_cast<int>(cfg.get_int_or("analyze", "quantile_bins", 200));
            const auto qenc = encode_by_quantile(z.data(), n, qbins);
            const auto ev =
                tae_loss_bound(f.xy.data(), n, 2, qenc, run.config.lag);
            row["latent_bound"] = ev.bound;
            row["latent_g"] = ev.g_defined ? json(ev.g) : json(nullptr);

            if (modes.k > 1) {
                json overlaps;
                int found = 1;
                double best = -1.0;
                for (int i = 1; i < modes.k; ++i) {
                    const double ov = mode_overlap(z, modes.eigenfunctions[i], traj.states);
                    overlaps["psi" + std::to_string(i)] = ov;
                    if (ov > best) {
                        best = ov;
                        found = i;
                    }
                }
                row["overlaps"] = std::move(overlaps);
                row["found_mode"] = "psi" + std::to_string(found);
            }

            World w = build_world(cfg);
            if (w.kind == PotentialKind::Beltway) {
                // share of latent variance captured by each coordinate's bins
                std::vector<double> zc(z);
                double mz = 0;
                for (double v : zc) mz += v;
                mz /= static_cast<double>(n);
                double var = 0;
                for (auto& v : zc) {
                    v -= mz;
                    var += v * v;
                }
                var /= static_cast<double>(n);
                if (var > 0) {
                    const auto enc_r = encode_by_radial_bin(traj.states, w.polar);
                    const auto enc_t = encode_by_angular_bin(traj.states, w.polar);
                    row["fraction_r"] =
                        variance_explained(zc.data(), n, 1, enc_r) / var;
                    row["fraction_theta"] =
                        variance_explained(zc.data(), n, 1, enc_t) / var;
                }
            }

            // plot data: mean latent per grid state
            {
                std::vector<double> sum(traj.n_states, 0.0);
                std::vector<std::uint64_t> cnt(traj.n_states, 0);
                for (std::size_t t = 0; t < n; ++t) {
                    sum[traj.states[t]] += z[t];
                    ++cnt[traj.states[t]];
                }
                std::string csv;
                const bool polar = w.kind == PotentialKind::Beltway;
                csv = polar ? "state,r,theta,mean_latent,count\n"
                            : "state,phi,psi,mean_latent,count\n";
                for (std::uint32_t s = 0; s < traj.n_states; ++s) {
                    const double c1 = polar ? w.polar.radial_coord(w.polar.radial_of(s))
                                            : w.torus.phi_coord(w.torus.phi_of(s));
                    const double c2 = polar ? w.polar.angular_coord(w.polar.angular_of(s))
                                            : w.torus.psi_coord(w.torus.psi_of(s));
                    const double m = cnt[s] ? sum[s] / static_cast<double>(cnt[s]) : 0.0;
                    csv += std::to_string(s) + "," + g17(c1) + "," + g17(c2) + "," +
                           g17(m) + "," + std::to_string(cnt[s]) + "\n";
                }
                atomic_write_file((pipe.dir / ("run." + r.name + ".latent_by_state.csv")).string(),
                                  csv);
            }
        } else {
            // linear chains: compare against the closed-form optimum of the
            // empirically matched problem, and report axis alignment
            const std::size_t lag = run.config.lag;
            const std::size_t m = n - lag;
            double m1 = 0, m2 = 0, v1 = 0, v2 = 0, c1 = 0, c2 = 0;
            for (std::size_t t = 0; t < n; ++t) {
                m1 += f.x1(t);
                m2 += f.x2(t);
            }
            m1 /= static_cast<double>(n);
            m2 /= static_cast<double>(n);
            for (std::size_t t = 0; t < n; ++t) {
                v1 += (f.x1(t) - m1) * (f.x1(t) - m1);
                v2 += (f.x2(t) - m2) * (f.x2(t) - m2);
            }
            v1 /= static_cast<double>(n);
            v2 /= static_cast<double>(n);
            for (std::size_t t = 0; t < m; ++t) {
                c1 += (f.x1(t) - m1) * (f.x1(t + lag) - m1);
                c2 += (f.x2(t) - m2) * (f.x2(t + lag) - m2);
            }
            c1 /= static_cast<double>(m) * v1;
            c2 /= static_cast<double>(m) * v2;

            LinearTaeProblem prob{v1, v2, c1, c2};
            const auto sol = linear_tae_closed_form(prob);
            row["closed_form_loss"] = sol.loss;
            row["loss_gap"] =
                std::abs(row["final_loss"].get<double>() - sol.loss);

            const auto dir = linear_encoder_direction(run.spec, run.best_params);
            const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1]);
            const double cos_slow = norm > 0 ? std::abs(dir[0]) / norm : 0.0;
            const double cos_fast = norm > 0 ? std::abs(dir[1]) / norm : 0.0;
            row["cos_slow_axis"] = cos_slow;
            row["cos_fast_axis"] = cos_fast;
            row["found_mode"] = cos_slow >= cos_fast ? "slow" : "fast";

            // plot data: full mixed-loss curve of the matched problem
            const auto curve = linear_tae_loss_curve(prob, 1001);
            std::string csv = "b2,loss\n";
            for (std::size_t i = 0; i < curve.size(); ++i) {
                const double b2 = static_cast<double>(i) / (curve.size() - 1.0);
                csv += g17(b2) + "," + g17(curve[i]) + "\n";
            }
            atomic_write_file(
                (pipe.dir / ("run." + r.name + ".loss_curve.csv")).string(), csv);
        }
        run_rows.push_back(std::move(row));
    }
    report["runs"] = std::move(run_rows);

    auto expectations = parse_expectations(cfg);
    bool all_pass = true;
    json exp_rows = json::array();
    for (auto& e : expectations) {
        evaluate_expectation(report, e);
        all_pass = all_pass && e.pass;
        exp_rows.push_back({{"key", e.key},
                            {"op", e.op},
                            {"expected", e.expected},
                            {"actual", e.actual},
                            {"pass", e.pass}});
    }
    report["expectations"] = std::move(exp_rows);
    report["all_pass"] = all_pass;

    const auto errs = validate_report(report);
    if (!errs.empty()) {
        std::string msg = "report failed validation:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw std::runtime_error(msg);
    }
    const std::string report_path = (pipe.dir / "report.json").string();
    atomic_write_file(report_path, report.dump(2) + "\n");

    ExperimentResult res;
    res.report = std::move(report);
    res.report_path = report_path;
    res.all_pass = all_pass;
    res.stages = std::move(pipe.stages);
    return res;
}

// ---- cross-run comparison -----------------------------------------------------

nlohmann::json compare_modes(const std::string& run_a_path,
                             const std::string& run_b_path,
                             const std::string& modes_path,
                             const std::string& features_path,
                             const std::string& traj_path) {
    const std::string da = load_run_features_digest(run_a_path);
    const std::string db = load_run_features_digest(run_b_path);
    if (da.empty() || db.empty())
        throw std::runtime_error(
            "run records carry no feature digest; cannot verify a shared trajectory");
    if (da != db)
        throw std::runtime_error("runs were trained on different feature sets");
    const std::string df = digest_hex(digest64_file(features_path));
    if (df != da)
        throw std::runtime_error("feature file does not match the runs' recorded digest");

    const FeatureTrajectory f = load_features(features_path);
    const TrajectoryFile t = load_trajectory(traj_path);
    if (t.states.size() != f.n_frames())
        throw std::runtime_error("trajectory and features disagree on frame count");
    const SpectralModes modes = load_modes(modes_path);
    if (modes.k < 2) throw std::runtime_error("need at least two oracle modes");
    for (const auto& ef : modes.eigenfunctions)
        if (ef.size() != t.n_states)
            throw std::runtime_error("oracle modes sized for a different state space");

    auto stem_of = [](const std::string& p) {
        fs::path q(p);
        q.replace_extension();
        return q.filename().string();
    };

    json out;
    std::vector<std::vector<double>> latents;
    const std::string paths[2] = {run_a_path, run_b_path};
    json rows = json::array();
    for (const auto& path : paths) {
        const TrainingRun run = load_training_run(path);
        std::vector<double> z(f.n_frames());
        mlp_encode(run.spec, run.best_params, f.xy.data(), f.n_frames(), z.data());
        json row;
        row["run"] = stem_of(path);
        row["objective"] = objective_name(run.objective);
        json overlaps;
        int found = 1;
        double best = -1.0;
        for (int i = 1; i < modes.k; ++i) {
            const double ov = mode_overlap(z, modes.eigenfunctions[i], t.states);
            overlaps["psi" + std::to_string(i)] = ov;
            if (ov > best) {
                best = ov;
                found = i;
            }
        }
        row["overlaps"] = std::move(overlaps);
        row["found_mode"] = "psi" + std::to_string(found);
        rows.push_back(std::move(row));
        latents.push_back(std::move(z));
    }
    out["runs"] = std::move(rows);
    out["latent_overlap"] = pearson_abs(latents[0], latents[1]);
    return out;
}

}  // namespace slowmode
