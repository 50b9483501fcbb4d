// Configuration files, trajectory formats, run manifests and ensemble orchestration.
#pragma once

#include <openssl/evp.h>

#include <atomic>
#include <bit>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "njsm/diagnostics.hpp"
#include "njsm/integrator.hpp"

namespace njsm::io {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.3.0";
inline constexpr std::uint32_t kBinaryVersion = 1;

static_assert(std::endian::native == std::endian::little, "binary trajectory format assumes a little-endian host");

// ---- config --------------------------------------------------------------------------------

namespace detail {

inline std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.push_back(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        const std::string p = join(path_, key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(p, "expected boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(p, "expected integer");
            if constexpr (std::is_unsigned_v<T>)
                if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                    throw ConfigError(p, "expected non-negative integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(p, "expected number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(p, "expected string");
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (!v.is_array()) throw ConfigError(p, "expected array of numbers");
            for (const auto& x : v)
                if (!x.is_number()) throw ConfigError(p, "expected array of numbers");
        }
        out = v.get<T>();
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& at(const char* key) {
        seen_.push_back(key);
        return j_.at(key);
    }
    std::string path(const char* key) const { return join(path_, key); }

    /// Reject keys that were never asked for.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                throw ConfigError(join(path_, it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

inline NoiseFamily parse_family(const std::string& s, const std::string& path) {
    if (s == "additive") return NoiseFamily::Additive;
    if (s == "linear_multiplicative") return NoiseFamily::LinearMultiplicative;
    if (s == "bounded_multiplicative") return NoiseFamily::BoundedMultiplicative;
    throw ConfigError(path, "expected one of additive, linear_multiplicative, bounded_multiplicative");
}

inline const char* mark_kind_name(MarkDistribution::Kind k) {
    switch (k) {
        case MarkDistribution::Kind::Uniform: return "uniform";
        case MarkDistribution::Kind::Gaussian: return "gaussian";
        case MarkDistribution::Kind::Discrete: return "discrete";
    }
    return "?";
}

inline const char* ic_kind_name(InitialKind k) {
    switch (k) {
        case InitialKind::Zero: return "zero";
        case InitialKind::SingleMode: return "single_mode";
        case InitialKind::Random: return "random";
        case InitialKind::NearUnitDirector: return "near_unit_director";
    }
    return "?";
}

inline Wavevector parse_wavevector(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() < 1 || v.size() > 3) throw ConfigError(path, "expected array of 1 to 3 integers");
    Wavevector k{0, 0, 0};
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer()) throw ConfigError(path, "expected array of 1 to 3 integers");
        k[i] = v[i].get<int>();
    }
    return k;
}

inline MarkDistribution parse_marks(const json& j, const std::string& path) {
    Reader r(j, path);
    std::string kind = "uniform";
    r.get("kind", kind);
    MarkDistribution m;
    if (kind == "uniform") {
        m = MarkDistribution::uniform({-1.0}, {1.0});
        r.get("lower", m.lower);
        r.get("upper", m.upper);
    } else if (kind == "gaussian") {
        m = MarkDistribution::gaussian({0.0}, {1.0});
        r.get("mean", m.mean);
        r.get("stddev", m.stddev);
    } else if (kind == "discrete") {
        m.kind = MarkDistribution::Kind::Discrete;
        if (!r.has("atoms")) throw ConfigError(r.path("atoms"), "required for discrete marks");
        const json& a = r.at("atoms");
        if (!a.is_array()) throw ConfigError(r.path("atoms"), "expected array of arrays");
        for (const auto& x : a) {
            if (x.is_number()) {
                m.atoms.push_back({x.get<double>()});
                continue;
            }
            if (!x.is_array()) throw ConfigError(r.path("atoms"), "expected array of arrays");
            std::vector<double> pt;
            for (const auto& c : x) {
                if (!c.is_number()) throw ConfigError(r.path("atoms"), "expected numbers");
                pt.push_back(c.get<double>());
            }
            m.atoms.push_back(pt);
        }
        r.get("weights", m.weights);
    } else {
        throw ConfigError(r.path("kind"), "expected one of uniform, gaussian, discrete");
    }
    r.finish();
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    return m;
}

}  // namespace detail

/// Builds a validated config from JSON; absent keys keep their defaults.
inline SimConfig parse_config(const json& j) {
    SimConfig c;
    detail::Reader r(j, "");
    r.get("dim", c.dim);
    if (r.has("K") && r.has("cutoff")) throw ConfigError("K", "give either K or cutoff");
    r.get("K", c.cutoff);
    r.get("cutoff", c.cutoff);
    r.get("dt", c.dt);
    r.get("T", c.horizon);
    r.get("seed", c.seed);
    r.get("nonlinear", c.nonlinear);
    r.get("record_stride", c.record_stride);
    r.get("blowup_factor", c.blowup_factor);
    if (r.has("truncation_level")) {
        const json& v = r.at("truncation_level");
        if (!v.is_null()) {
            if (!v.is_number()) throw ConfigError("truncation_level", "expected number or null");
            c.truncation_level = v.get<double>();
        }
    }
    if (r.has("poly")) {
        std::vector<double> coeffs;
        r.get("poly", coeffs);
        try {
            c.poly = PolynomialNonlinearity(coeffs);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("poly", e.what());
        }
    }
    if (r.has("noise")) {
        detail::Reader n(r.at("noise"), "noise");
        n.get("rate", c.noise.rate);
        if (n.has("family")) {
            std::string f;
            n.get("family", f);
            c.noise.family = detail::parse_family(f, "noise.family");
        }
        n.get("offset", c.noise.offset);
        n.get("slope", c.noise.slope);
        if (n.has("marks")) c.noise.marks = detail::parse_marks(n.at("marks"), "noise.marks");
        if (n.has("shape")) {
            const json& s = n.at("shape");
            if (!s.is_array()) throw ConfigError("noise.shape", "expected array of modes");
            c.noise.shape.clear();
            for (std::size_t i = 0; i < s.size(); ++i) {
                const std::string p = "noise.shape[" + std::to_string(i) + "]";
                detail::Reader m(s[i], p);
                ShapeMode mode;
                if (!m.has("k")) throw ConfigError(p + ".k", "required");
                mode.k = detail::parse_wavevector(m.at("k"), p + ".k");
                m.get("polarization", mode.polarization);
                m.get("amplitude", mode.amplitude);
                m.finish();
                c.noise.shape.push_back(mode);
            }
        }
        n.finish();
    }
    if (r.has("ic")) {
        detail::Reader i(r.at("ic"), "ic");
        if (i.has("kind")) {
            std::string k;
            i.get("kind", k);
            if (k == "zero") c.ic.kind = InitialKind::Zero;
            else if (k == "single_mode") c.ic.kind = InitialKind::SingleMode;
            else if (k == "random") c.ic.kind = InitialKind::Random;
            else if (k == "near_unit_director") c.ic.kind = InitialKind::NearUnitDirector;
            else throw ConfigError("ic.kind", "expected one of zero, single_mode, random, near_unit_director");
        }
        i.get("velocity_amplitude", c.ic.velocity_amplitude);
        i.get("director_amplitude", c.ic.director_amplitude);
        i.get("slope", c.ic.slope);
        i.get("cutoff", c.ic.cutoff);
        if (i.has("mode")) c.ic.mode = detail::parse_wavevector(i.at("mode"), "ic.mode");
        if (i.has("seed")) {
            std::uint64_t s = 0;
            i.get("seed", s);
            c.ic.seed = s;
        }
        i.finish();
    }
    r.finish();
    c.validate();
    return c;
}

inline SimConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("malformed JSON in ") + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

inline json to_json(const SimConfig& c) {
    json noise{{"rate", c.noise.rate},
               {"family", family_name(c.noise.family)},
               {"offset", c.noise.offset},
               {"slope", c.noise.slope}};
    json marks{{"kind", detail::mark_kind_name(c.noise.marks.kind)}};
    switch (c.noise.marks.kind) {
        case MarkDistribution::Kind::Uniform:
            marks["lower"] = c.noise.marks.lower;
            marks["upper"] = c.noise.marks.upper;
            break;
        case MarkDistribution::Kind::Gaussian:
            marks["mean"] = c.noise.marks.mean;
            marks["stddev"] = c.noise.marks.stddev;
            break;
        case MarkDistribution::Kind::Discrete:
            marks["atoms"] = c.noise.marks.atoms;
            marks["weights"] = c.noise.marks.weights;
            break;
    }
    noise["marks"] = marks;
    json shape = json::array();
    for (const auto& s : c.noise.shape)
        shape.push_back({{"k", std::vector<int>(s.k.begin(), s.k.end())},
                         {"polarization", s.polarization},
                         {"amplitude", s.amplitude}});
    noise["shape"] = shape;
    json ic{{"kind", detail::ic_kind_name(c.ic.kind)},
            {"velocity_amplitude", c.ic.velocity_amplitude},
            {"director_amplitude", c.ic.director_amplitude},
            {"slope", c.ic.slope},
            {"cutoff", c.ic.cutoff},
            {"mode", std::vector<int>(c.ic.mode.begin(), c.ic.mode.end())}};
    if (c.ic.seed) ic["seed"] = *c.ic.seed;
    return json{{"dim", c.dim},
                {"K", c.cutoff},
                {"dt", c.dt},
                {"T", c.horizon},
                {"poly", c.poly.coeffs()},
                {"noise", noise},
                {"ic", ic},
                {"truncation_level", c.truncation_level ? json(*c.truncation_level) : json(nullptr)},
                {"seed", c.seed},
                {"nonlinear", c.nonlinear},
                {"record_stride", c.record_stride},
                {"blowup_factor", c.blowup_factor}};
}

// ---- NDJSON --------------------------------------------------------------------------------

inline const char* kind_name(SampleKind k) {
    switch (k) {
        case SampleKind::Regular: return "regular";
        case SampleKind::PreJump: return "pre_jump";
        case SampleKind::PostJump: return "post_jump";
    }
    return "?";
}

inline json ledger_json(const EnergyLedger& L) {
    return json{{"u_l2", L.u_l2},
                {"u_grad", L.u_grad},
                {"d_l2", L.d_l2},
                {"d_grad", L.d_grad},
                {"d_lap", L.d_lap},
                {"dissipation_d", L.dissipation_d},
                {"bulk_power", L.bulk_power},
                {"psi_director", L.psi_director},
                {"psi", L.psi},
                {"energy", L.energy},
                {"transfer_defect", L.transfer_defect},
                {"drift_power", L.drift_power}};
}

/// One line per sample: {t, kind, is_jump, <ledger fields>}.
inline void write_ndjson(const Trajectory& traj, std::ostream& out) {
    for (const auto& s : traj.samples) {
        json line{{"t", s.t}, {"kind", kind_name(s.kind)}, {"is_jump", s.kind != SampleKind::Regular}};
        line.update(ledger_json(s.ledger));
        out << line.dump() << '\n';
    }
}

/// One line per jump: {t, mark[], applied_increment_norm}.
inline void write_jump_log(const Trajectory& traj, std::ostream& out) {
    for (const auto& j : traj.jumps)
        out << json{{"t", j.time}, {"mark", j.mark}, {"applied_increment_norm", j.increment_norm}}.dump() << '\n';
}

inline std::vector<json> read_ndjson(std::istream& in) {
    std::vector<json> rows;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(json::parse(line));
    return rows;
}

// ---- binary --------------------------------------------------------------------------------

struct BinaryTrajectory {
    std::uint32_t version = kBinaryVersion;
    int dim = 2;
    int cutoff = 0;
    std::vector<double> times;
    std::vector<State> states;
};

namespace detail {

template <class T>
void put(std::ostream& o, T v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& i, const std::string& what) {
    T v{};
    if (!i.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("truncated binary trajectory: " + what);
    return v;
}

template <class Layout>
void put_coeffs(std::ostream& o, const Coefficients<Layout>& c) {
    for (const cplx& z : c.values()) {
        put(o, z.real());
        put(o, z.imag());
    }
}

template <class Layout>
void take_coeffs(std::istream& i, Coefficients<Layout>& c) {
    for (std::size_t k = 0; k < c.values().size(); ++k) {
        const double re = take<double>(i, "coefficients");
        const double im = take<double>(i, "coefficients");
        c[k] = cplx{re, im};
    }
}

}  // namespace detail

/// Layout (little-endian): "NJSM", u32 version, u32 dim, u32 K, u64 n_samples, then per sample
/// f64 t, velocity coefficients (re, im) in basis order, director coefficients (re, im).
/// Only samples that carry a state are written.
inline void write_binary(const Trajectory& traj, std::ostream& out) {
    std::uint64_t n = 0;
    for (const auto& s : traj.samples) n += s.state.has_value();
    out.write("NJSM", 4);
    detail::put<std::uint32_t>(out, kBinaryVersion);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(traj.config.dim));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(traj.config.cutoff));
    detail::put<std::uint64_t>(out, n);
    for (const auto& s : traj.samples) {
        if (!s.state) continue;
        detail::put(out, s.t);
        detail::put_coeffs(out, s.state->u);
        detail::put_coeffs(out, s.state->d);
    }
}

inline BinaryTrajectory read_binary(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "NJSM", 4) != 0) throw std::runtime_error("not an NJSM binary trajectory");
    BinaryTrajectory b;
    b.version = detail::take<std::uint32_t>(in, "version");
    if (b.version != kBinaryVersion) throw std::runtime_error("unsupported binary version " + std::to_string(b.version));
    b.dim = static_cast<int>(detail::take<std::uint32_t>(in, "dim"));
    b.cutoff = static_cast<int>(detail::take<std::uint32_t>(in, "K"));
    const auto n = detail::take<std::uint64_t>(in, "n_samples");
    BasisPtr basis = make_basis(b.dim, b.cutoff);
    for (std::uint64_t i = 0; i < n; ++i) {
        b.times.push_back(detail::take<double>(in, "time"));
        State s{SpectralVelocity(basis), SpectralVector(basis)};
        detail::take_coeffs(in, s.u);
        detail::take_coeffs(in, s.d);
        b.states.push_back(std::move(s));
    }
    return b;
}

// ---- files, checksums, manifests -----------------------------------------------------------

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 init failed");
    }
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

inline std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct OutputEntry {
    std::string path;
    std::string sha256;
};

struct RunManifest {
    std::string command;
    json config;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    std::string started, finished;
    json parameters = json::object();  // command-specific flags
    std::vector<OutputEntry> outputs;
    std::vector<std::string> failures;

    void add_output(const std::filesystem::path& p) { outputs.push_back({p.filename().string(), sha256_file(p)}); }

    json to_json() const {
        json outs = json::array();
        for (const auto& o : outputs) outs.push_back({{"path", o.path}, {"sha256", o.sha256}});
        return json{{"command", command}, {"config", config},     {"seed", seed},     {"version", version},
                    {"started", started}, {"finished", finished}, {"parameters", parameters},
                    {"outputs", outs},    {"failures", failures}};
    }
};

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
    std::ofstream f(p, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f.precision(17);
    return f;
}

inline void write_json_file(const std::filesystem::path& p, const json& j) {
    auto f = open_out(p);
    f << j.dump(2) << '\n';
    if (!f) throw std::runtime_error("write failed for " + p.string());
}

// ---- ensembles -----------------------------------------------------------------------------

/// Path 0 runs with the master seed so a one-path ensemble reproduces `simulate`; path i > 0
/// uses derive_seed(master, i).
inline std::uint64_t path_seed(std::uint64_t master, std::size_t index) {
    return index == 0 ? master : derive_seed(master, index);
}

struct EnsembleResult {
    std::vector<PathSummary> summaries;  // in path order
    std::vector<bool> ok;
    std::vector<std::string> failures;   // "path i: message"
};

inline EnsembleResult run_ensemble(const SimConfig& cfg, std::size_t n_paths, unsigned workers) {
    if (n_paths < 1) throw ConfigError("paths", "must be >= 1");
    if (workers < 1) workers = 1;
    EnsembleResult r;
    r.summaries.resize(n_paths);
    r.ok.assign(n_paths, false);
    std::vector<std::string> errors(n_paths);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n_paths; i = next++) {
            SimConfig c = cfg;
            c.seed = path_seed(cfg.seed, i);
            c.record_stride = 0;
            try {
                r.summaries[i] = summarize(simulate(c));
                r.ok[i] = true;
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < std::min<std::size_t>(workers, n_paths); ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    for (std::size_t i = 0; i < n_paths; ++i)
        if (!r.ok[i]) r.failures.push_back("path " + std::to_string(i) + ": " + errors[i]);
    return r;
}

/// Order-fixed reduction of an ensemble into a statistics document.
inline json ensemble_statistics(const EnsembleResult& r) {
    std::vector<PathSummary> good;
    for (std::size_t i = 0; i < r.summaries.size(); ++i)
        if (r.ok[i]) good.push_back(r.summaries[i]);
    json j{{"paths", r.summaries.size()}, {"completed", good.size()}, {"failures", r.failures}};
    double jumps = 0.0, jumps2 = 0.0;
    for (const auto& s : good) {
        jumps += static_cast<double>(s.jumps);
        jumps2 += static_cast<double>(s.jumps) * static_cast<double>(s.jumps);
    }
    const double n = static_cast<double>(good.size());
    if (n > 0) {
        j["mean_jumps"] = jumps / n;
        j["var_jumps"] = n > 1 ? (jumps2 - jumps * jumps / n) / (n - 1) : 0.0;
    }
    json moments = json::array();
    if (good.size() >= kMinMomentPaths) {
        for (const auto& m : moment_estimates(good, {1, 2}))
            moments.push_back(
                {{"quantity", m.quantity}, {"power", m.power}, {"mean", m.mean}, {"std_error", m.std_error}});
    }
    j["moments"] = moments;
    return j;
}

inline json summary_json(std::size_t index, const PathSummary& s) {
    return json{{"path", index},
                {"sup_psi", s.sup_psi},
                {"dissipation", s.dissipation},
                {"lap_integral", s.lap_integral},
                {"jumps", s.jumps}};
}

}  // namespace njsm::io
