#include "slowmode/io.hpp"

#include <algorithm>
#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

namespace slowmode {

namespace fs = std::filesystem;
using nlohmann::json;

void atomic_write_file(const std::string& path, const std::string& bytes) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw std::runtime_error("rename failed for " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

std::uint64_t digest64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t digest64_file(const std::string& path) { return digest64(read_file(path)); }

std::string digest_hex(std::uint64_t d) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, d);
    return buf;
}

namespace detail {

static const char* kB64 =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const unsigned char* data, std::size_t n) {
    std::string out;
    out.reserve((n + 2) / 3 * 4);
    for (std::size_t i = 0; i < n; i += 3) {
        unsigned v = data[i] << 16;
        if (i + 1 < n) v |= data[i + 1] << 8;
        if (i + 2 < n) v |= data[i + 2];
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(i + 1 < n ? kB64[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < n ? kB64[v & 63] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& s) {
    if (s.size() % 4 != 0) throw std::runtime_error("base64 length not a multiple of 4");
    static int rev[256];
    static bool init = [] {
        for (int& r : rev) r = -1;
        for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64[i])] = i;
        return true;
    }();
    (void)init;
    std::vector<unsigned char> out;
    out.reserve(s.size() / 4 * 3);
    for (std::size_t i = 0; i < s.size(); i += 4) {
        int pad = 0;
        unsigned v = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = s[i + j];
            v <<= 6;
            if (c == '=') {
                ++pad;
            } else {
                const int d = rev[static_cast<unsigned char>(c)];
                if (d < 0 || pad > 0) throw std::runtime_error("invalid base64 input");
                v |= static_cast<unsigned>(d);
            }
        }
        out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<unsigned char>(v & 0xff));
    }
    return out;
}

}  // namespace detail

namespace {

constexpr std::uint64_t kTrajMagic = 0x314a52'54574f4cULL;  // "LOWTRJ1" + high byte
constexpr std::uint64_t kFeatMagic = 0x314145'46574f4cULL;
constexpr std::uint32_t kFormatVersion = 1;

template <class T>
void put(std::string& s, const T& v) {
    s.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(const std::string& s, std::size_t& off, const std::string& path) {
    if (off + sizeof(T) > s.size()) throw std::runtime_error("truncated file: " + path);
    T v;
    std::memcpy(&v, s.data() + off, sizeof v);
    off += sizeof v;
    return v;
}

std::string b64_of_span(std::span<const double> v) {
    return detail::base64_encode(reinterpret_cast<const unsigned char*>(v.data()),
                                 v.size() * sizeof(double));
}

std::vector<double> doubles_of_b64(const std::string& s) {
    const std::vector<unsigned char> raw = detail::base64_decode(s);
    if (raw.size() % sizeof(double) != 0)
        throw std::runtime_error("parameter blob is not a multiple of 8 bytes");
    std::vector<double> out(raw.size() / sizeof(double));
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

// full round-trip precision for CSV doubles
void append_g17(std::string& s, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    s += buf;
}

}  // namespace

void save_trajectory(const std::string& path, const TrajectoryFile& t) {
    std::string s;
    s.reserve(40 + t.states.size() * 4);
    put(s, kTrajMagic);
    put(s, kFormatVersion);
    put(s, t.n_states);
    put(s, static_cast<std::uint64_t>(t.states.size()));
    put(s, t.seed);
    s.append(reinterpret_cast<const char*>(t.states.data()), t.states.size() * 4);
    atomic_write_file(path, s);
}

TrajectoryFile load_trajectory(const std::string& path) {
    const std::string s = read_file(path);
    std::size_t off = 0;
    if (take<std::uint64_t>(s, off, path) != kTrajMagic)
        throw std::runtime_error("not a trajectory file: " + path);
    if (take<std::uint32_t>(s, off, path) != kFormatVersion)
        throw std::runtime_error("unsupported trajectory version: " + path);
    TrajectoryFile t;
    t.n_states = take<std::uint32_t>(s, off, path);
    const std::uint64_t n = take<std::uint64_t>(s, off, path);
    t.seed = take<std::uint64_t>(s, off, path);
    if (off + n * 4 != s.size()) throw std::runtime_error("trajectory size mismatch: " + path);
    t.states.resize(n);
    std::memcpy(t.states.data(), s.data() + off, n * 4);
    for (std::uint32_t v : t.states)
        if (v >= t.n_states) throw std::runtime_error("state index out of range: " + path);
    return t;
}

void save_trajectory_csv(const std::string& path, const TrajectoryFile& t) {
    std::string s = "state\n";
    s.reserve(s.size() + t.states.size() * 5);
    for (std::uint32_t v : t.states) {
        s += std::to_string(v);
        s += '\n';
    }
    atomic_write_file(path, s);
}

void save_features(const std::string& path, const FeatureTrajectory& f) {
    std::string s;
    s.reserve(96 + f.xy.size() * 8 + f.provenance.size());
    put(s, kFeatMagic);
    put(s, kFormatVersion);
    put(s, static_cast<std::uint32_t>(2));  // feature width
    put(s, static_cast<std::uint64_t>(f.n_frames()));
    put(s, static_cast<std::uint32_t>(f.centered ? 1 : 0));
    put(s, static_cast<std::uint32_t>(f.whitened ? 1 : 0));
    for (double v : f.mean) put(s, v);
    for (double v : f.whiten) put(s, v);
    put(s, static_cast<std::uint32_t>(f.provenance.size()));
    s += f.provenance;
    s.append(reinterpret_cast<const char*>(f.xy.data()), f.xy.size() * 8);
    atomic_write_file(path, s);
}

FeatureTrajectory load_features(const std::string& path) {
    const std::string s = read_file(path);
    std::size_t off = 0;
    if (take<std::uint64_t>(s, off, path) != kFeatMagic)
        throw std::runtime_error("not a feature file: " + path);
    if (take<std::uint32_t>(s, off, path) != kFormatVersion)
        throw std::runtime_error("unsupported feature version: " + path);
    if (take<std::uint32_t>(s, off, path) != 2)
        throw std::runtime_error("unsupported feature width: " + path);
    FeatureTrajectory f;
    const std::uint64_t n = take<std::uint64_t>(s, off, path);
    f.centered = take<std::uint32_t>(s, off, path) != 0;
    f.whitened = take<std::uint32_t>(s, off, path) != 0;
    for (double& v : f.mean) v = take<double>(s, off, path);
    for (double& v : f.whiten) v = take<double>(s, off, path);
    const std::uint32_t plen = take<std::uint32_t>(s, off, path);
    if (off + plen > s.size()) throw std::runtime_error("truncated file: " + path);
    f.provenance.assign(s.data() + off, plen);
    off += plen;
    if (off + n * 16 != s.size()) throw std::runtime_error("feature size mismatch: " + path);
    f.xy.resize(n * 2);
    std::memcpy(f.xy.data(), s.data() + off, n * 16);
    return f;
}

void save_features_csv(const std::string& path, const FeatureTrajectory& f) {
    std::string s = "x1,x2\n";
    s.reserve(s.size() + f.n_frames() * 48);
    for (std::size_t t = 0; t < f.n_frames(); ++t) {
        append_g17(s, f.x1(t));
        s += ',';
        append_g17(s, f.x2(t));
        s += '\n';
    }
    atomic_write_file(path, s);
}

void save_model_json(const std::string& path, const MlpSpec& spec, const MlpParams& p) {
    spec.validate();
    json j;
    j["version"] = kFormatVersion;
    j["widths"] = spec.widths;
    std::vector<std::string> acts;
    for (Act a : spec.acts) acts.push_back(act_name(a));
    j["activations"] = acts;
    j["latent_index"] = spec.latent_index;
    json layers = json::array();
    for (int l = 0; l < spec.n_layers(); ++l) {
        layers.push_back({{"weights", b64_of_span(p.w(l))},
                          {"biases", b64_of_span(p.b(l, spec))}});
    }
    j["layers"] = std::move(layers);
    atomic_write_file(path, j.dump(2) + "\n");
}

std::pair<MlpSpec, MlpParams> load_model_json(const std::string& path) {
    const json j = json::parse(read_file(path));
    if (j.at("version").get<int>() != static_cast<int>(kFormatVersion))
        throw std::runtime_error("unsupported model version: " + path);
    MlpSpec spec;
    spec.widths = j.at("widths").get<std::vector<int>>();
    for (const auto& s : j.at("activations"))
        spec.acts.push_back(act_from_name(s.get<std::string>()));
    spec.latent_index = j.at("latent_index").get<int>();
    spec.validate();
    MlpParams p = MlpParams::zeros(spec);
    const json& layers = j.at("layers");
    if (layers.size() != static_cast<std::size_t>(spec.n_layers()))
        throw std::runtime_error("layer count mismatch: " + path);
    for (int l = 0; l < spec.n_layers(); ++l) {
        const auto w = doubles_of_b64(layers[l].at("weights").get<std::string>());
        const auto b = doubles_of_b64(layers[l].at("biases").get<std::string>());
        auto wd = p.w(l);
        auto bd = p.b(l, spec);
        if (w.size() != wd.size() || b.size() != bd.size())
            throw std::runtime_error("layer shape mismatch: " + path);
        std::copy(w.begin(), w.end(), wd.begin());
        std::copy(b.begin(), b.end(), bd.begin());
    }
    return {std::move(spec), std::move(p)};
}

void save_modes(const std::string& json_path, const SpectralModes& modes) {
    const fs::path jp(json_path);
    fs::path csv = jp;
    csv.replace_extension(".eigenfunctions.csv");

    std::string s;
    for (int i = 0; i < modes.k; ++i) {
        if (i) s += ',';
        s += "psi" + std::to_string(i);
    }
    s += '\n';
    const std::size_t n = modes.k > 0 ? modes.eigenfunctions[0].size() : 0;
    for (std::size_t st = 0; st < n; ++st) {
        for (int i = 0; i < modes.k; ++i) {
            if (i) s += ',';
            append_g17(s, modes.eigenfunctions[i][st]);
        }
        s += '\n';
    }
    atomic_write_file(csv.string(), s);

    json j;
    j["version"] = kFormatVersion;
    j["eigenvalues"] = modes.eigenvalues;
    j["timescales"] = implied_timescales(modes.eigenvalues);
    j["eigenfunctions"] = csv.filename().string();
    atomic_write_file(json_path, j.dump(2) + "\n");
}

SpectralModes load_modes(const std::string& json_path) {
    const json j = json::parse(read_file(json_path));
    SpectralModes m;
    m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    m.k = static_cast<int>(m.eigenvalues.size());
    m.timescales.assign(m.k, 0.0);
    for (int i = 0; i < m.k; ++i)
        m.timescales[i] = m.eigenvalues[i] >= 1.0
                              ? std::numeric_limits<double>::infinity()
                              : -1.0 / std::log(m.eigenvalues[i]);

    const fs::path csv =
        fs::path(json_path).parent_path() / j.at("eigenfunctions").get<std::string>();
    std::ifstream in(csv);
    if (!in) throw std::runtime_error("cannot open eigenfunction table: " + csv.string());
    std::string line;
    std::getline(in, line);  // header
    m.eigenfunctions.assign(m.k, {});
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        for (int i = 0; i < m.k; ++i) {
            if (!std::getline(ls, cell, ','))
                throw std::runtime_error("short eigenfunction row in " + csv.string());
            m.eigenfunctions[i].push_back(std::stod(cell));
        }
    }
    return m;
}

void save_evaluation(const std::string& path, const EncodingEvaluation& ev,
                     const std::string& encoding_tag, double empirical_loss) {
    json j;
    j["version"] = kFormatVersion;
    j["encoding"] = encoding_tag;
    j["lag"] = ev.lag;
    j["sigma2"] = ev.sigma2;
    j["variance_explained"] = ev.variance_explained;
    j["generalized_autocorrelation"] = ev.g_defined ? json(ev.g) : json();
    j["propagation_loss"] = ev.propagation;
    j["capacity_loss"] = ev.capacity;
    j["bound"] = ev.bound;
    j["empirical_optimal_decoder_loss"] = empirical_loss;
    atomic_write_file(path, j.dump(2) + "\n");
}

namespace {

json config_to_json(const TrainingConfig& c) {
    return json{{"lag", c.lag},
                {"stride", c.stride},
                {"batch", c.batch},
                {"max_epochs", c.max_epochs},
                {"lr", c.lr},
                {"seed", c.seed},
                {"val_fraction", c.val_fraction},
                {"patience", c.patience},
                {"deterministic", c.deterministic},
                {"lambda", c.lambda},
                {"lr_decay", c.lr_decay},
                {"decay_patience", c.decay_patience}};
}

TrainingConfig config_from_json(const json& j) {
    TrainingConfig c;
    c.lag = j.at("lag").get<std::size_t>();
    c.stride = j.at("stride").get<std::size_t>();
    c.batch = j.at("batch").get<std::size_t>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.lr = j.at("lr").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.patience = j.at("patience").get<int>();
    c.deterministic = j.at("deterministic").get<bool>();
    c.lambda = j.at("lambda").get<double>();
    c.lr_decay = j.at("lr_decay").get<double>();
    c.decay_patience = j.at("decay_patience").get<int>();
    return c;
}

}  // namespace

void save_training_run(const std::string& path, const TrainingRun& run,
                       const std::string& features_digest) {
    const fs::path jp(path);
    fs::path stem = jp;
    stem.replace_extension();
    const fs::path final_model = stem.string() + ".final.model.json";
    const fs::path best_model = stem.string() + ".best.model.json";
    save_model_json(final_model.string(), run.spec, run.final_params);
    save_model_json(best_model.string(), run.spec, run.best_params);

    json j;
    j["version"] = kFormatVersion;
    j["objective"] = objective_name(run.objective);
    j["config"] = config_to_json(run.config);
    j["train_loss"] = run.train_history;
    j["val_loss"] = run.val_history;
    j["best_val"] = run.best_val;
    j["best_epoch"] = run.best_epoch;
    j["final_model"] = final_model.filename().string();
    j["best_model"] = best_model.filename().string();
    if (!features_digest.empty()) j["features_digest"] = features_digest;
    atomic_write_file(path, j.dump(2) + "\n");
}

std::string load_run_features_digest(const std::string& path) {
    const json j = json::parse(read_file(path));
    return j.value("features_digest", std::string());
}

TrainingRun load_training_run(const std::string& path) {
    const json j = json::parse(read_file(path));
    TrainingRun run;
    run.objective = objective_from_name(j.at("objective").get<std::string>());
    run.config = config_from_json(j.at("config"));
    run.train_history = j.at("train_loss").get<std::vector<double>>();
    run.val_history = j.at("val_loss").get<std::vector<double>>();
    run.best_val = j.at("best_val").get<double>();
    run.best_epoch = j.at("best_epoch").get<int>();
    const fs::path dir = fs::path(path).parent_path();
    auto fin = load_model_json((dir / j.at("final_model").get<std::string>()).string());
    auto best = load_model_json((dir / j.at("best_model").get<std::string>()).string());
    run.spec = std::move(fin.first);
    run.final_params = std::move(fin.second);
    run.best_params = std::move(best.second);
    return run;
}

}  // namespace slowmode
