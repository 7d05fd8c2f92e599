// Command-line front end over the slowmode library. Exit codes: 0 on
// success, 2 when a report's declared expectations fail, 1 on errors.
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "slowmode/config.hpp"
#include "slowmode/experiment.hpp"
#include "slowmode/features.hpp"
#include "slowmode/io.hpp"
#include "slowmode/loss_theory.hpp"
#include "slowmode/msm.hpp"
#include "slowmode/objectives.hpp"
#include "slowmode/spectral.hpp"
#include "slowmode/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slowmode;

namespace {

struct GlobalOpts {
    std::string out_dir;
    bool deterministic = false;
    long long seed = -1;  // <0: keep per-command defaults
};

std::string resolved(const GlobalOpts& g, const std::string& path) {
    if (g.out_dir.empty() || path.empty()) return path;
    fs::path p(path);
    if (p.is_absolute()) return path;
    fs::create_directories(g.out_dir);
    return (fs::path(g.out_dir) / p).string();
}

// model files carry the [potential] section verbatim so every consumer
// rebuilds the exact same lattice
ConfigFile potential_config_from_model(const std::string& path) {
    const json j = json::parse(read_file(path));
    ConfigFile cfg;
    cfg.section_order = {"", "potential"};
    cfg.sections[""];
    auto& sec = cfg.sections["potential"];
    for (auto it = j.at("potential").begin(); it != j.at("potential").end(); ++it)
        sec[it.key()] = it.value().get<std::string>();
    return cfg;
}

uint32_t argmax_pi(const TransitionModel& m) {
    uint32_t best = 0;
    for (int i = 1; i < m.n_states; ++i)
        if (m.pi[i] > m.pi[best]) best = static_cast<uint32_t>(i);
    return best;
}

std::vector<int> parse_widths(const std::string& s) {
    ConfigFile tmp;
    tmp.sections[""]["w"] = s;
    return tmp.get_int_list("", "w");
}

// encoding argument: by-state | by-r-bin[:bins] | by-theta-bin[:bins]
DiscretizedEncoding encoding_from_arg(const std::string& arg,
                                      const TrajectoryFile& traj) {
    std::string name = arg;
    int bins = 0;
    const auto colon = arg.find(':');
    if (colon != std::string::npos) {
        name = arg.substr(0, colon);
        bins = std::stoi(arg.substr(colon + 1));
        if (bins <= 0) throw std::runtime_error("encoding bin count must be positive");
    }
    if (name == "by-state") return encode_by_state(traj.states);
    if (name == "by-r-bin" || name == "by-theta-bin") {
        if (bins == 0)
            throw std::runtime_error(name + " needs an explicit bin count, e.g. " +
                                     name + ":200");
        if (traj.n_states % bins != 0)
            throw std::runtime_error("bin count does not divide the state count");
        // states are laid out radial-major, angular-minor
        const int other = static_cast<int>(traj.n_states) / bins;
        if (name == "by-r-bin")
            return encode_by_radial_bin(traj.states, PolarGrid(bins, other, 0.0, 1.0));
        return encode_by_angular_bin(traj.states, PolarGrid(other, bins, 0.0, 1.0));
    }
    throw std::runtime_error("unknown encoding: " + name);
}

int cmd_experiment_run(const GlobalOpts& g, const std::string& preset,
                       const std::string& config_path) {
    ConfigFile cfg;
    std::string text;
    if (!preset.empty()) {
        const std::string* t = find_preset(preset);
        if (!t) {
            std::string names;
            for (const auto& [n, _] : builtin_presets()) names += " " + n;
            throw std::runtime_error("unknown preset '" + preset + "'; available:" + names);
        }
        text = *t;
    } else {
        text = read_file(config_path);
    }
    cfg = parse_config(text);
    std::string dir = g.out_dir.empty()
                          ? ("experiments/" + cfg.get("", "name"))
                          : g.out_dir;
    const ExperimentResult res = run_experiment(cfg, dir);
    atomic_write_file((fs::path(dir) / "config.cfg").string(), text);
    for (const auto& s : res.stages)
        std::printf("%-8s %s\n", s.cached ? "cached" : "built", s.artifact.c_str());
    for (const auto& e : res.report["expectations"]) {
        std::printf("%-4s %s %s %s (actual %s)\n",
                    e["pass"].get<bool>() ? "ok" : "FAIL",
                    e["key"].get<std::string>().c_str(),
                    e["op"].get<std::string>().c_str(), e["expected"].dump().c_str(),
                    e["actual"].dump().c_str());
    }
    std::printf("report: %s\n", res.report_path.c_str());
    return res.all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact-spectrum lattice benchmarks for slow-mode learners"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    GlobalOpts g;
    app.add_option("--out-dir", g.out_dir, "directory for output paths");
    app.add_flag("--deterministic", g.deterministic,
                 "assert the deterministic execution contract");
    app.add_option("--seed", g.seed, "override the command's sampling/training seed");

    // ---- msm ----------------------------------------------------------------
    auto* msm = app.add_subcommand("msm", "lattice transition models");
    msm->require_subcommand(1);

    auto* mb = msm->add_subcommand("build", "construct a transition model");
    std::string mb_potential = "beltway", mb_out = "model.json";
    int mb_nr = 20, mb_ntheta = 200, mb_conv = 4, mb_nphi = 50, mb_npsi = 50;
    double mb_rmin = 0.6, mb_rmax = 1.0, mb_r1 = 0.7, mb_r2 = 0.9, mb_dr = 0.05;
    double mb_bphi = 5.0, mb_bpsi = 2.5;
    mb->add_option("--potential", mb_potential, "beltway | torus");
    mb->add_option("--nr", mb_nr);
    mb->add_option("--ntheta", mb_ntheta);
    mb->add_option("--rmin", mb_rmin);
    mb->add_option("--rmax", mb_rmax);
    mb->add_option("--r1", mb_r1);
    mb->add_option("--r2", mb_r2);
    mb->add_option("--dr", mb_dr);
    mb->add_option("--convention", mb_conv, "neighbor count: 4 or 8");
    mb->add_option("--nphi", mb_nphi);
    mb->add_option("--npsi", mb_npsi);
    mb->add_option("--bphi", mb_bphi);
    mb->add_option("--bpsi", mb_bpsi);
    mb->add_option("--out", mb_out);

    auto* ms = msm->add_subcommand("sample", "draw a trajectory from a model");
    std::string ms_model, ms_out = "traj.bin";
    std::uint64_t ms_steps = 5000000, ms_seed = 42;
    bool ms_csv = false;
    ms->add_option("--model", ms_model)->required();
    ms->add_option("--steps", ms_steps);
    ms->add_option("--seed", ms_seed);
    ms->add_flag("--csv", ms_csv, "also write a CSV next to the binary");
    ms->add_option("--out", ms_out);

    // ---- spectrum -------------------------------------------------------------
    auto* sp = app.add_subcommand("spectrum", "leading eigenmodes of a model");
    std::string sp_model, sp_out = "modes.json";
    int sp_k = 4;
    sp->add_option("--model", sp_model)->required();
    sp->add_option("-k,--k", sp_k, "number of modes (including the stationary one)");
    sp->add_option("--out", sp_out);

    // ---- featurize --------------------------------------------------------------
    auto* fz = app.add_subcommand("featurize", "map a trajectory to 2D features");
    std::string fz_traj, fz_model, fz_source = "polar", fz_out = "feat.bin";
    double fz_r0 = 1.0, fz_dr = 0.02, fz_anchor = 2.0;
    bool fz_whiten = false, fz_center = true, fz_csv = false;
    fz->add_option("--traj", fz_traj)->required();
    fz->add_option("--model", fz_model, "model file naming the lattice")->required();
    fz->add_option("--source", fz_source, "polar | ring-slow | ring-fast");
    fz->add_option("--r0", fz_r0, "ring base radius");
    fz->add_option("--ring-dr", fz_dr, "ring winding rate");
    fz->add_option("--anchor", fz_anchor, "ring angle offset");
    fz->add_flag("--whiten,!--no-whiten", fz_whiten, "decorrelate to identity covariance");
    fz->add_flag("--center,!--no-center", fz_center, "subtract the empirical mean");
    fz->add_flag("--csv", fz_csv, "also write a CSV next to the binary");
    fz->add_option("--out", fz_out);

    // ---- train -----------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "fit an encoder to lagged features");
    std::string tr_objective, tr_features, tr_out = "run.json", tr_widths = "2,50,50,1";
    TrainingConfig tc;
    tr->add_option("objective", tr_objective, "tae | srv | mtae | vde")->required();
    tr->add_option("--features", tr_features)->required();
    tr->add_option("--widths", tr_widths, "encoder widths, input..latent");
    tr->add_option("--lag", tc.lag);
    tr->add_option("--stride", tc.stride);
    tr->add_option("--batch", tc.batch);
    tr->add_option("--epochs", tc.max_epochs);
    tr->add_option("--patience", tc.patience);
    tr->add_option("--lr", tc.lr);
    tr->add_option("--val-fraction", tc.val_fraction);
    tr->add_option("--lambda", tc.lambda, "mixture weight (vde)");
    tr->add_option("--lr-decay", tc.lr_decay);
    tr->add_option("--decay-patience", tc.decay_patience);
    tr->add_option("--train-seed", tc.seed);
    tr->add_option("--out", tr_out);

    // ---- analyze ----------------------------------------------------------------
    auto* an = app.add_subcommand("analyze", "reconstruction-bound decomposition");
    std::string an_features, an_traj, an_encoding = "by-state", an_out = "eval.json";
    std::size_t an_lag = 3000;
    an->add_option("--features", an_features)->required();
    an->add_option("--traj", an_traj)->required();
    an->add_option("--encoding", an_encoding,
                   "by-state | by-r-bin:B | by-theta-bin:B");
    an->add_option("--lag", an_lag);
    an->add_option("--out", an_out);

    // ---- experiment --------------------------------------------------------------
    auto* ex = app.add_subcommand("experiment", "end-to-end studies");
    ex->require_subcommand(1);
    auto* exr = ex->add_subcommand("run", "run a study config or preset");
    std::string exr_preset, exr_config;
    exr->add_option("--preset", exr_preset, "beltway-paper | torus-eq17 | torus-eq18 | linear-synthetic");
    exr->add_option("--config", exr_config, "path to a study config file");

    // ---- compare -----------------------------------------------------------------
    auto* cp = app.add_subcommand("compare", "overlap two runs against oracle modes");
    std::string cp_a, cp_b, cp_modes, cp_features, cp_traj, cp_out;
    cp->add_option("--run-a", cp_a)->required();
    cp->add_option("--run-b", cp_b)->required();
    cp->add_option("--modes", cp_modes)->required();
    cp->add_option("--features", cp_features)->required();
    cp->add_option("--traj", cp_traj)->required();
    cp->add_option("--out", cp_out, "write the table as JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (mb->parsed()) {
            ConfigFile cfg;
            cfg.section_order = {"", "potential"};
            cfg.sections[""];
            auto& sec = cfg.sections["potential"];
            sec["kind"] = mb_potential;
            auto put_d = [&](const char* k, double v) {
                char buf[48];
                std::snprintf(buf, sizeof buf, "%.17g", v);
                sec[k] = buf;
            };
            if (mb_potential == "beltway") {
                sec["nr"] = std::to_string(mb_nr);
                sec["ntheta"] = std::to_string(mb_ntheta);
                sec["convention"] = std::to_string(mb_conv);
                put_d("rmin", mb_rmin);
                put_d("rmax", mb_rmax);
                put_d("r1", mb_r1);
                put_d("r2", mb_r2);
                put_d("dr", mb_dr);
            } else {
                sec["nphi"] = std::to_string(mb_nphi);
                sec["npsi"] = std::to_string(mb_npsi);
                put_d("bphi", mb_bphi);
                put_d("bpsi", mb_bpsi);
            }
            const World w = build_world(cfg);
            json j;
            j["version"] = 1;
            json pj;
            for (const auto& [k, v] : sec) pj[k] = v;
            j["potential"] = pj;
            j["n_states"] = w.model.n_states;
            j["detailed_balance_residual"] = w.model.detailed_balance_residual();
            j["stationarity_residual"] = w.model.stationarity_residual();
            const std::string out = resolved(g, mb_out);
            atomic_write_file(out, j.dump(2) + "\n");
            std::printf("model: %s (%d states)\n", out.c_str(), w.model.n_states);
        } else if (ms->parsed()) {
            const World w = build_world(potential_config_from_model(ms_model));
            TrajectoryFile t;
            t.n_states = static_cast<std::uint32_t>(w.model.n_states);
            t.seed = g.seed >= 0 ? static_cast<std::uint64_t>(g.seed) : ms_seed;
            t.states = sample_trajectory(w.model, ms_steps, t.seed, argmax_pi(w.model));
            const std::string out = resolved(g, ms_out);
            save_trajectory(out, t);
            if (ms_csv) {
                fs::path c(out);
                c.replace_extension(".csv");
                save_trajectory_csv(c.string(), t);
            }
            std::printf("trajectory: %s (%llu steps, tv-distance %.4f)\n", out.c_str(),
                        static_cast<unsigned long long>(t.states.size()),
                        occupation_tv_distance(w.model, t.states));
        } else if (sp->parsed()) {
            const World w = build_world(potential_config_from_model(sp_model));
            const SpectralModes modes = leading_modes(w.model, sp_k);
            const std::string out = resolved(g, sp_out);
            save_modes(out, modes);
            std::printf("modes: %s\n", out.c_str());
            for (int i = 1; i < modes.k; ++i)
                std::printf("  lambda_%d = %.8f  t_%d = %.1f\n", i, modes.eigenvalues[i],
                            i, modes.timescales[i]);
        } else if (fz->parsed()) {
            const World w = build_world(potential_config_from_model(fz_model));
            const TrajectoryFile t = load_trajectory(fz_traj);
            FeatureTrajectory f;
            if (fz_source == "polar") {
                f = featurize_polar(t.states, w.polar);
            } else if (fz_source == "ring-slow" || fz_source == "ring-fast") {
                RingFeatureSpec rs;
                rs.r0 = fz_r0;
                rs.dr = fz_dr;
                rs.anchor = fz_anchor;
                rs.mode = fz_source == "ring-slow" ? RingFeatureSpec::Mode::SlowOnRadius
                                                   : RingFeatureSpec::Mode::FastOnRadius;
                std::vector<double> phi, psi;
                torus_angles(t.states, w.torus, phi, psi);
                f = engineer_ring_features(phi, psi, rs);
            } else {
                throw std::runtime_error("unknown source: " + fz_source);
            }
            if (fz_center || fz_whiten) center_and_whiten(f, fz_whiten);
            const std::string out = resolved(g, fz_out);
            save_features(out, f);
            if (fz_csv) {
                fs::path c(out);
                c.replace_extension(".csv");
                save_features_csv(c.string(), f);
            }
            std::printf("features: %s (%llu frames, %s)\n", out.c_str(),
                        static_cast<unsigned long long>(f.n_frames()),
                        f.provenance.c_str());
        } else if (tr->parsed()) {
            const Objective obj = objective_from_name(tr_objective);
            const FeatureTrajectory f = load_features(tr_features);
            const auto widths = parse_widths(tr_widths);
            const MlpSpec spec = objective_uses_decoder(obj)
                                     ? MlpSpec::autoencoder(widths)
                                     : MlpSpec::encoder(widths);
            if (g.seed >= 0) tc.seed = static_cast<std::uint64_t>(g.seed);
            const TrainingRun run = train(obj, spec, f.xy.data(), f.n_frames(), 2, tc);
            const std::string out = resolved(g, tr_out);
            save_training_run(out, run, digest_hex(digest64_file(tr_features)));
            std::printf("run: %s (best val %.6f at epoch %d, %zu epochs)\n", out.c_str(),
                        run.best_val, run.best_epoch, run.train_history.size());
        } else if (an->parsed()) {
            const FeatureTrajectory f = load_features(an_features);
            const TrajectoryFile t = load_trajectory(an_traj);
            if (t.states.size() != f.n_frames())
                throw std::runtime_error("trajectory and features disagree on frame count");
            const DiscretizedEncoding enc = encoding_from_arg(an_encoding, t);
            const auto ev = tae_loss_bound(f.xy.data(), f.n_frames(), 2, enc, an_lag);
            const double emp =
                empirical_optimal_decoder_loss(f.xy.data(), f.n_frames(), 2, enc, an_lag);
            const std::string out = resolved(g, an_out);
            save_evaluation(out, ev, an_encoding, emp);
            std::printf("sigma2 %.6f  explained %.6f  G %s  bound %.6f  empirical %.6f\n",
                        ev.sigma2, ev.variance_explained,
                        ev.g_defined ? std::to_string(ev.g).c_str() : "undefined",
                        ev.bound, emp);
            std::printf("eval: %s\n", out.c_str());
        } else if (exr->parsed()) {
            if (exr_preset.empty() == exr_config.empty())
                throw std::runtime_error("pass exactly one of --preset / --config");
            return cmd_experiment_run(g, exr_preset, exr_config);
        } else if (cp->parsed()) {
            const json table = compare_modes(cp_a, cp_b, cp_modes, cp_features, cp_traj);
            if (!cp_out.empty())
                atomic_write_file(resolved(g, cp_out), table.dump(2) + "\n");
            std::printf("%s\n", table.dump(2).c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
