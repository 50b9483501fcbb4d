// njsm: command-line driver for simulations, ensembles and verification reports.
//
// Exit status: 0 success, 1 a check failed or the run aborted, 2 usage or configuration error.
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "njsm/diagnostics.hpp"
#include "njsm/io.hpp"

namespace fs = std::filesystem;
using namespace njsm;
using io::json;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::size_t paths = 0;
    unsigned workers = 0;
    std::string format = "ndjson";
    std::size_t samples = 200;
    double eps = 1e-6;
    double delta = 0.0;
    std::string cutoffs = "2,4,8";
};

SimConfig load_config(const Options& o) {
    SimConfig c = o.config.empty() ? SimConfig{} : io::parse_config_file(o.config);
    if (o.seed) c.seed = *o.seed;
    c.validate();
    return c;
}

class Run {
public:
    Run(std::string command, const Options& o, const SimConfig& cfg) : dir_(o.out) {
        fs::create_directories(dir_);
        m_.command = std::move(command);
        m_.config = io::to_json(cfg);
        m_.seed = cfg.seed;
        m_.started = io::utc_now();
    }

    fs::path path(const std::string& name) const { return dir_ / name; }
    void output(const fs::path& p) { m_.add_output(p); }
    void param(const std::string& k, json v) { m_.parameters[k] = std::move(v); }
    void failure(std::string f) { m_.failures.push_back(std::move(f)); }

    void report(const std::string& name, const json& j) {
        io::write_json_file(path(name), j);
        output(path(name));
    }

    void finish() {
        m_.finished = io::utc_now();
        io::write_json_file(path("manifest.json"), m_.to_json());
        spdlog::info("wrote {}", path("manifest.json").string());
    }

private:
    fs::path dir_;
    io::RunManifest m_;
};

json ledger_series(const Trajectory& t) {
    json a = json::array();
    for (const auto& s : t.samples) {
        json row = io::ledger_json(s.ledger);
        row["t"] = s.t;
        a.push_back(row);
    }
    return a;
}

int cmd_simulate(const Options& o) {
    SimConfig cfg = load_config(o);
    if (o.format != "ndjson" && o.format != "binary") throw ConfigError("format", "expected ndjson or binary");
    Run run("simulate", o, cfg);
    run.param("format", o.format);
    spdlog::info("simulate dim={} K={} dt={} T={} seed={}", cfg.dim, cfg.cutoff, cfg.dt, cfg.horizon, cfg.seed);
    const Trajectory traj = simulate(cfg);
    if (o.format == "ndjson") {
        auto f = io::open_out(run.path("trajectory.ndjson"));
        io::write_ndjson(traj, f);
        f.close();
        run.output(run.path("trajectory.ndjson"));
    } else {
        auto f = io::open_out(run.path("trajectory.bin"), true);
        io::write_binary(traj, f);
        f.close();
        run.output(run.path("trajectory.bin"));
    }
    {
        auto f = io::open_out(run.path("jumps.ndjson"));
        io::write_jump_log(traj, f);
    }
    run.output(run.path("jumps.ndjson"));
    spdlog::info("{} samples, {} jumps", traj.samples.size(), traj.jumps.size());
    run.finish();
    return 0;
}

int cmd_ensemble(const Options& o) {
    SimConfig cfg = load_config(o);
    const std::size_t n = o.paths ? o.paths : 100;
    const unsigned w = o.workers ? o.workers : std::max(1u, std::thread::hardware_concurrency());
    Run run("ensemble", o, cfg);
    run.param("paths", n);
    run.param("workers", w);
    spdlog::info("ensemble of {} paths on {} workers", n, w);
    auto res = io::run_ensemble(cfg, n, w);
    {
        auto f = io::open_out(run.path("summaries.ndjson"));
        for (std::size_t i = 0; i < n; ++i)
            if (res.ok[i]) f << io::summary_json(i, res.summaries[i]).dump() << '\n';
    }
    run.output(run.path("summaries.ndjson"));
    run.report("statistics.json", io::ensemble_statistics(res));
    for (const auto& f : res.failures) run.failure(f);
    run.finish();
    return res.failures.empty() ? 0 : 1;
}

int cmd_verify_operators(const Options& o) {
    SimConfig cfg = load_config(o);
    Run run("verify-operators", o, cfg);
    run.param("samples", o.samples);
    auto ids = operator_identities(cfg.dim, cfg.cutoff, o.samples, cfg.seed, cfg.poly);
    auto sweeps = operator_bound_sweep(cfg.dim, cfg.cutoff, o.samples, cfg.seed + 1, cfg.poly);
    json j{{"identities", json::array()}, {"bounds", json::array()}};
    bool ok = true;
    for (const auto& r : ids) {
        const bool pass = r.max_relative < 1e-10;
        ok = ok && pass;
        j["identities"].push_back({{"name", r.name}, {"max_relative", r.max_relative}, {"pass", pass}});
    }
    for (const auto& s : sweeps) {
        ok = ok && s.finite();
        j["bounds"].push_back({{"name", s.name},
                               {"max_ratio", s.max_ratio},
                               {"max_ratio_half", s.max_ratio_half},
                               {"stable", s.stable()}});
    }
    run.report("operators.json", j);
    run.finish();
    return ok ? 0 : 1;
}

int cmd_verify_noise(const Options& o) {
    SimConfig cfg = load_config(o);
    if (!cfg.noise.active()) throw ConfigError("noise.rate", "verify-noise needs an active noise");
    const std::size_t n = o.paths ? o.paths : 10000;
    Run run("verify-noise", o, cfg);
    run.param("paths", n);
    BasisPtr basis = make_basis(cfg.dim, cfg.cutoff);
    Rng rng = make_rng(cfg.seed, 0x15);
    StepProcess xi{{0.0, 0.5 * cfg.horizon, cfg.horizon},
                   {random_velocity(basis, rng, 1.0), random_velocity(basis, rng, 2.0)}};
    auto iso = verify_isometry(cfg.noise, xi, n, cfg.seed);
    auto b = verify_noise_bounds(cfg.noise, basis, 50, 4000, cfg.seed);
    json growth = json::array(), analytic = json::array();
    for (std::size_t i = 0; i < kGrowthOrders.size(); ++i) {
        growth.push_back(b.growth_estimate[i]);
        analytic.push_back(b.analytic.growth[i]);
    }
    const bool ok = iso.within(4.0) && b.holds(0.01);
    run.report("noise.json", json{{"family", family_name(cfg.noise.family)},
                                  {"isometry",
                                   {{"empirical", iso.empirical},
                                    {"analytic", iso.analytic},
                                    {"std_error", iso.std_error},
                                    {"z_score", iso.z_score},
                                    {"paths", iso.paths}}},
                                  {"bounds",
                                   {{"lipschitz_estimate", b.lipschitz_estimate},
                                    {"lipschitz_analytic", b.analytic.lipschitz},
                                    {"growth_orders", kGrowthOrders},
                                    {"growth_estimate", growth},
                                    {"growth_analytic", analytic}}},
                                  {"pass", ok}});
    run.finish();
    return ok ? 0 : 1;
}

int cmd_verify_energy(const Options& o) {
    SimConfig cfg = load_config(o);
    cfg.record_stride = 1;
    Run run("verify-energy", o, cfg);
    const Trajectory traj = simulate(cfg);
    auto coupled = energy_check_coupled(traj);
    double u_scale = 1.0;
    for (const auto& s : traj.samples) u_scale = std::max(u_scale, s.ledger.u_l2);
    bool ok = coupled.max_jump_mismatch <= 1e-12 * u_scale;
    json dir = json::array();
    for (double p : {2.0, 4.0}) {
        auto r = energy_check_director(traj, p);
        ok = ok && !r.violated;
        dir.push_back({{"p", p},
                       {"coercive", r.coercive},
                       {"growth", r.growth},
                       {"max_excess", r.max_excess},
                       {"margin", r.margin},
                       {"violated", r.violated}});
    }
    run.report("energy.json", json{{"director", dir},
                                   {"coupled",
                                    {{"max_step_residual", coupled.max_residual},
                                     {"jumps_checked", coupled.jumps_checked},
                                     {"max_jump_mismatch", coupled.max_jump_mismatch}}},
                                   {"series", ledger_series(traj)},
                                   {"pass", ok}});
    run.finish();
    return ok ? 0 : 1;
}

int cmd_uniqueness(const Options& o) {
    SimConfig cfg = load_config(o);
    Run run("uniqueness", o, cfg);
    run.param("eps", o.eps);
    auto [a, b] = perturbed_pair(cfg, o.eps);
    auto same = uniqueness_experiment(cfg, a, a);
    auto pert = uniqueness_experiment(cfg, a, b);
    const bool ok = same.max_D == 0.0 && pert.gronwall_holds(pert.gronwall_constant);
    const auto& C = pert.constants;
    run.report("uniqueness.json", json{{"identical_max_D", same.max_D},
                                       {"eps", o.eps},
                                       {"D0", pert.D.front()},
                                       {"DT", pert.D.back()},
                                       {"gronwall_constant", pert.gronwall_constant},
                                       {"constants",
                                        {{"c3", C.c3},
                                         {"c45", C.c45},
                                         {"c68", C.c68},
                                         {"c7", C.c7},
                                         {"c9", C.c9},
                                         {"c_kappa1", C.ck1},
                                         {"c_kappa2", C.ck2}}},
                                       {"t", pert.times},
                                       {"D", pert.D},
                                       {"upsilon", pert.upsilon},
                                       {"beta", pert.beta},
                                       {"pass", ok}});
    run.finish();
    return ok ? 0 : 1;
}

int cmd_modulus(const Options& o) {
    SimConfig cfg = load_config(o);
    cfg.record_stride = 1;
    const double delta = o.delta > 0.0 ? o.delta : 0.1 * cfg.horizon;
    Run run("modulus", o, cfg);
    run.param("delta", delta);
    const Trajectory traj = simulate(cfg);
    const double w = cadlag_modulus(traj, delta, NormKind::VDual);
    run.report("modulus.json", json{{"delta", delta}, {"norm", "V'"}, {"modulus", w}, {"jumps", traj.jumps.size()}});
    run.finish();
    return 0;
}

int cmd_converge(const Options& o) {
    SimConfig cfg = load_config(o);
    std::vector<int> ks;
    std::stringstream ss(o.cutoffs);
    for (std::string tok; std::getline(ss, tok, ',');) {
        try {
            ks.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ConfigError("cutoffs", "expected comma-separated integers");
        }
    }
    Run run("converge", o, cfg);
    run.param("cutoffs", ks);
    auto study = galerkin_convergence_study(cfg, ks);
    json rows = json::array();
    for (const auto& r : study.rows)
        rows.push_back({{"coarse", r.coarse},
                        {"fine", r.fine},
                        {"u_distance", r.u_distance},
                        {"d_distance", r.d_distance},
                        {"distance", r.distance()}});
    const bool ok = study.monotone();
    run.report("converge.json", json{{"rows", rows}, {"monotone", ok}});
    run.finish();
    return ok ? 0 : 1;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("njsm");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* lv = std::getenv("NJSM_LOG")) spdlog::set_level(spdlog::level::from_str(lv));
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Galerkin nematic liquid-crystal flow with Poisson jump noise"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "master seed (overrides the config)");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--paths", o.paths, "Monte-Carlo paths");
    app.add_option("--workers", o.workers, "worker threads");
    app.add_option("--format", o.format, "trajectory format")->check(CLI::IsMember({"ndjson", "binary"}));

    int (*handler)(const Options&) = nullptr;
    auto sub = [&](const char* name, const char* help, int (*fn)(const Options&)) {
        auto* s = app.add_subcommand(name, help);
        s->callback([&handler, fn] { handler = fn; });
        return s;
    };
    sub("simulate", "run one trajectory", cmd_simulate);
    sub("ensemble", "run many paths and reduce moment statistics", cmd_ensemble);
    sub("verify-operators", "operator identities and bound constants", cmd_verify_operators)
        ->add_option("--samples", o.samples, "random tuples");
    sub("verify-noise", "isometry and Lipschitz/growth checks", cmd_verify_noise);
    sub("verify-energy", "director inequality and coupled energy identity", cmd_verify_energy);
    sub("uniqueness", "two runs with a shared jump path", cmd_uniqueness)
        ->add_option("--eps", o.eps, "initial perturbation size");
    sub("modulus", "cadlag modulus of the velocity in V'", cmd_modulus)
        ->add_option("--delta", o.delta, "minimal cell length (default T/10)");
    sub("converge", "Galerkin refinement study", cmd_converge)
        ->add_option("--cutoffs", o.cutoffs, "comma-separated cutoffs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }
    try {
        return handler(o);
    } catch (const ConfigError& e) {
        spdlog::error("configuration error: {}", e.what());
        return 2;
    } catch (const InstabilityError& e) {
        spdlog::error("{}", e.what());
        return 1;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}
