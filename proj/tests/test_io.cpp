#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "nlohmann/json.hpp"
#include "slowmode/io.hpp"
#include "slowmode/mlp.hpp"
#include "slowmode/msm.hpp"
#include "slowmode/rng.hpp"
#include "slowmode/spectral.hpp"

using namespace slowmode;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("slowmode-io-test-" + std::to_string(Rng(std::random_device{}()).next_u64()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("atomic writes land complete, leave no temp files, and overwrite") {
    TempDir d;
    const std::string p = d.file("sub/dir/blob.bin");
    std::string payload = "abc";
    payload.push_back('\0');
    payload += "def\n";
    atomic_write_file(p, payload);
    CHECK(read_file(p) == payload);
    CHECK_FALSE(fs::exists(p + ".tmp"));
    atomic_write_file(p, "short");
    CHECK(read_file(p) == "short");
    CHECK_THROWS(read_file(d.file("missing.bin")));
}

TEST_CASE("content digest matches the published reference values") {
    CHECK(digest64("") == 0xcbf29ce484222325ULL);
    CHECK(digest64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(digest64("foobar") == 0x85944171f73967e8ULL);
    CHECK(digest64("hello world") == 0x779a65e7023cd2e7ULL);
    CHECK(digest_hex(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
    CHECK(digest_hex(0x1ULL) == "0000000000000001");
    TempDir d;
    atomic_write_file(d.file("x"), "foobar");
    CHECK(digest64_file(d.file("x")) == digest64("foobar"));
}

TEST_CASE("base64 follows the reference vectors and round-trips random blobs") {
    auto enc = [](const std::string& s) {
        return detail::base64_encode(reinterpret_cast<const unsigned char*>(s.data()),
                                     s.size());
    };
    CHECK(enc("") == "");
    CHECK(enc("f") == "Zg==");
    CHECK(enc("fo") == "Zm8=");
    CHECK(enc("foo") == "Zm9v");
    CHECK(enc("foob") == "Zm9vYg==");
    CHECK(enc("fooba") == "Zm9vYmE=");
    CHECK(enc("foobar") == "Zm9vYmFy");

    Rng rng(5150);
    for (size_t len = 0; len <= 100; ++len) {
        std::vector<unsigned char> blob(len);
        for (auto& b : blob) b = static_cast<unsigned char>(rng.next_u64() & 0xff);
        const auto back = detail::base64_decode(detail::base64_encode(blob.data(), len));
        CHECK(back == blob);
    }
    CHECK_THROWS(detail::base64_decode("abc"));    // not a multiple of 4
    CHECK_THROWS(detail::base64_decode("ab!c"));   // invalid character
    CHECK_THROWS(detail::base64_decode("Zg=a"));   // data after padding
}

TEST_CASE("trajectory files round-trip and reject corruption") {
    TempDir d;
    TrajectoryFile t;
    t.n_states = 7;
    t.seed = 123456789;
    t.states = {0, 3, 6, 2, 2, 5};
    const std::string p = d.file("traj.bin");
    save_trajectory(p, t);
    const auto back = load_trajectory(p);
    CHECK(back.n_states == t.n_states);
    CHECK(back.seed == t.seed);
    CHECK(back.states == t.states);

    // wrong magic
    std::string bytes = read_file(p);
    bytes[0] ^= 0x5a;
    atomic_write_file(d.file("bad_magic.bin"), bytes);
    CHECK_THROWS(load_trajectory(d.file("bad_magic.bin")));
    // truncation
    atomic_write_file(d.file("trunc.bin"), read_file(p).substr(0, 20));
    CHECK_THROWS(load_trajectory(d.file("trunc.bin")));
    // out-of-range state rejected on load
    TrajectoryFile bad = t;
    bad.n_states = 3;
    save_trajectory(d.file("oob.bin"), bad);
    CHECK_THROWS(load_trajectory(d.file("oob.bin")));

    save_trajectory_csv(d.file("traj.csv"), t);
    CHECK(read_file(d.file("traj.csv")) == "state\n0\n3\n6\n2\n2\n5\n");
}

TEST_CASE("feature files round-trip every field bit-exactly") {
    TempDir d;
    FeatureTrajectory f;
    f.xy = {0.25, -1.5, 3.141592653589793, 1e-300, -0.0, 7.0};
    f.mean = {0.125, -42.0};
    f.whiten = {1.0, 0.5, 0.5, 2.0};
    f.centered = true;
    f.whitened = false;
    f.provenance = "beltway-cartesian";
    const std::string p = d.file("feat.bin");
    save_features(p, f);
    const auto back = load_features(p);
    CHECK(back.xy == f.xy);
    CHECK(back.mean == f.mean);
    CHECK(back.whiten == f.whiten);
    CHECK(back.centered == f.centered);
    CHECK(back.whitened == f.whitened);
    CHECK(back.provenance == f.provenance);

    std::string bytes = read_file(p);
    bytes[0] ^= 1;
    atomic_write_file(d.file("bad.bin"), bytes);
    CHECK_THROWS(load_features(d.file("bad.bin")));
    atomic_write_file(d.file("short.bin"), read_file(p).substr(0, read_file(p).size() - 8));
    CHECK_THROWS(load_features(d.file("short.bin")));

    // identical content produces identical bytes (content-addressable caching)
    save_features(d.file("feat2.bin"), f);
    CHECK(read_file(d.file("feat2.bin")) == read_file(p));

    save_features_csv(d.file("feat.csv"), f);
    const std::string csv = read_file(d.file("feat.csv"));
    CHECK(csv.substr(0, 6) == "x1,x2\n");
    CHECK(csv.find("3.1415926535897931") != std::string::npos);
}

TEST_CASE("model files reproduce parameters bit-exactly") {
    TempDir d;
    const auto spec = MlpSpec::autoencoder({2, 5, 1});
    Rng rng(88);
    const auto p = MlpParams::init(spec, rng);
    const std::string path = d.file("model.json");
    save_model_json(path, spec, p);
    const auto [spec2, p2] = load_model_json(path);
    CHECK(spec2.widths == spec.widths);
    CHECK(spec2.latent_index == spec.latent_index);
    REQUIRE(spec2.acts.size() == spec.acts.size());
    for (size_t i = 0; i < spec.acts.size(); ++i) CHECK(spec2.acts[i] == spec.acts[i]);
    CHECK(p2.flat == p.flat);

    // tampering with structure is refused
    json j = json::parse(read_file(path));
    j["layers"].erase(0);
    atomic_write_file(d.file("short_layers.json"), j.dump());
    CHECK_THROWS(load_model_json(d.file("short_layers.json")));
    json j2 = json::parse(read_file(path));
    j2["activations"][0] = "relu";
    atomic_write_file(d.file("bad_act.json"), j2.dump());
    CHECK_THROWS(load_model_json(d.file("bad_act.json")));
    json j3 = json::parse(read_file(path));
    j3["version"] = 99;
    atomic_write_file(d.file("bad_ver.json"), j3.dump());
    CHECK_THROWS(load_model_json(d.file("bad_ver.json")));
}

TEST_CASE("spectral mode files keep eigenvalues and eigenfunctions") {
    TempDir d;
    const auto m = build_from_weights({
        {{0, 1.0}, {1, 0.5}},
        {{0, 0.5}, {1, 1.0}, {2, 0.25}},
        {{1, 0.5}, {2, 1.0}},
    });
    const auto modes = leading_modes(m, 3);
    const std::string jp = d.file("modes.json");
    save_modes(jp, modes);
    CHECK(fs::exists(d.file("modes.eigenfunctions.csv")));
    const auto back = load_modes(jp);
    CHECK(back.k == modes.k);
    CHECK(back.eigenvalues == modes.eigenvalues);  // shortest-round-trip JSON doubles
    REQUIRE(back.eigenfunctions.size() == modes.eigenfunctions.size());
    for (int i = 0; i < modes.k; ++i) {
        REQUIRE(back.eigenfunctions[i].size() == modes.eigenfunctions[i].size());
        for (size_t s = 0; s < modes.eigenfunctions[i].size(); ++s)
            CHECK(back.eigenfunctions[i][s] == modes.eigenfunctions[i][s]);  // %.17g
    }
    CHECK(back.timescales[0] == std::numeric_limits<double>::infinity());
    for (int i = 1; i < back.k; ++i)
        CHECK(back.timescales[i] ==
              doctest::Approx(-1.0 / std::log(back.eigenvalues[i])).epsilon(1e-15));
}

TEST_CASE("evaluation JSON exposes the decomposition under stable keys") {
    TempDir d;
    EncodingEvaluation ev;
    ev.lag = 42;
    ev.sigma2 = 2.0;
    ev.variance_explained = 1.5;
    ev.g = 0.75;
    ev.g_defined = true;
    ev.propagation = 1.5 * (1 - 0.75 * 0.75);
    ev.capacity = 0.5;
    ev.bound = ev.propagation + ev.capacity;
    save_evaluation(d.file("eval.json"), ev, "by-theta-bin", 1.46);
    const json j = json::parse(read_file(d.file("eval.json")));
    CHECK(j.at("encoding") == "by-theta-bin");
    CHECK(j.at("lag") == 42);
    CHECK(j.at("sigma2").get<double>() == 2.0);
    CHECK(j.at("variance_explained").get<double>() == 1.5);
    CHECK(j.at("generalized_autocorrelation").get<double>() == 0.75);
    CHECK(j.at("propagation_loss").get<double>() == ev.propagation);
    CHECK(j.at("capacity_loss").get<double>() == 0.5);
    CHECK(j.at("bound").get<double>() == ev.bound);
    CHECK(j.at("empirical_optimal_decoder_loss").get<double>() == 1.46);

    ev.g_defined = false;
    save_evaluation(d.file("eval2.json"), ev, "single-bin", 2.0);
    const json j2 = json::parse(read_file(d.file("eval2.json")));
    CHECK(j2.at("generalized_autocorrelation").is_null());
}

TEST_CASE("training runs round-trip with their sidecar models and data digest") {
    TempDir d;
    TrainingRun run;
    run.objective = Objective::Srv;
    run.spec = MlpSpec::encoder({2, 4, 1});
    Rng rng(7);
    run.final_params = MlpParams::init(run.spec, rng);
    run.best_params = MlpParams::init(run.spec, rng);
    run.config.lag = 17;
    run.config.batch = 2048;
    run.config.seed = 99;
    run.train_history = {0.5, 0.25, 0.125};
    run.val_history = {0.6, 0.3, 0.2};
    run.best_val = 0.2;
    run.best_epoch = 2;
    const std::string p = d.file("run.srv.json");
    save_training_run(p, run, "deadbeef00000000");
    CHECK(fs::exists(d.file("run.srv.final.model.json")));
    CHECK(fs::exists(d.file("run.srv.best.model.json")));
    CHECK(load_run_features_digest(p) == "deadbeef00000000");

    const auto back = load_training_run(p);
    CHECK(back.objective == Objective::Srv);
    CHECK(back.spec.widths == run.spec.widths);
    CHECK(back.final_params.flat == run.final_params.flat);
    CHECK(back.best_params.flat == run.best_params.flat);
    CHECK(back.config.lag == 17);
    CHECK(back.config.batch == 2048);
    CHECK(back.config.seed == 99);
    CHECK(back.train_history == run.train_history);
    CHECK(back.val_history == run.val_history);
    CHECK(back.best_val == 0.2);
    CHECK(back.best_epoch == 2);

    save_training_run(d.file("run2.json"), run);  // digest optional
    CHECK(load_run_features_digest(d.file("run2.json")).empty());
}
