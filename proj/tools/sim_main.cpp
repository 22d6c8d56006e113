#include "tbmps/config_io.hpp"
#include "tbmps/engine.hpp"
#include "tbmps/markovian.hpp"
#include "tbmps/observables.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace tbmps;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitBudgetExceeded = 2;

std::size_t default_workers() {
    if (const char* env = std::getenv("TBMPS_WORKERS")) {
        const long n = std::atol(env);
        if (n > 0) return static_cast<std::size_t>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

std::size_t auto_spectrum_window(const ExperimentConfig& cfg) {
    if (cfg.spectrum.m > 0) return cfg.spectrum.m;
    const auto q = static_cast<std::int64_t>(cfg.n_steps()) -
                   static_cast<std::int64_t>(cfg.ell()) - 1;
    return q > 1 ? static_cast<std::size_t>(0.8 * static_cast<double>(q)) : 1;
}

std::vector<double> nu_grid_of(const ExperimentConfig& cfg) {
    std::vector<double> nu(cfg.spectrum.n_nu);
    const double span = cfg.spectrum.nu_max - cfg.spectrum.nu_min;
    for (std::size_t i = 0; i < nu.size(); ++i) {
        nu[i] = cfg.spectrum.nu_min +
                span * static_cast<double>(i) / static_cast<double>(nu.size() - 1);
    }
    return nu;
}

RunManifest start_manifest(const ExperimentConfig& cfg) {
    RunManifest manifest;
    manifest.version = TBMPS_VERSION;
    manifest.config = config_to_json(cfg);
    manifest.started_at = current_timestamp_utc();
    return manifest;
}

int cmd_run(const ExperimentConfig& cfg, const fs::path& out_dir) {
    RunManifest manifest = start_manifest(cfg);
    RunOptions options;
    options.record_stride = cfg.record_stride;
    options.record_entropy = true;
    auto result = run(cfg, options);

    fs::create_directories(out_dir);
    const fs::path ts = out_dir / "timeseries.csv";
    write_timeseries_csv(ts, result.series);
    const fs::path en = out_dir / "entropy.csv";
    write_entropy_csv(en, result.series);

    const auto ops = BinOperators::build(cfg);
    const auto [first, last] = result.state.delay_window();
    const auto dist = delay_photon_distribution(result.state.chain, first, last, ops, 8);
    const fs::path ph = out_dir / "photon_dist.csv";
    write_photon_dist_csv(ph, dist);

    manifest.cumulative_discarded_weight = result.state.cumulative_discarded;
    manifest.finished_at = current_timestamp_utc();
    manifest.add_output(ts);
    manifest.add_output(en);
    manifest.add_output(ph);
    manifest.write(out_dir / "manifest.json");
    std::printf("run finished: %zu steps, discarded weight %.3e\n", cfg.n_steps(),
                result.state.cumulative_discarded);
    return kExitOk;
}

int cmd_spectrum(const ExperimentConfig& cfg, const fs::path& out_dir) {
    RunManifest manifest = start_manifest(cfg);
    RunOptions options;
    options.record_stride = cfg.record_stride;
    options.record_timeseries = false;
    auto result = run(cfg, options);

    const auto ops = BinOperators::build(cfg);
    // for two atoms the right-moving channel is the observed output port
    const std::size_t channel = cfg.setup == Setup::TwoAtoms ? 1 : 0;
    const auto k_max = static_cast<std::int64_t>(cfg.n_steps());
    const std::size_t m = auto_spectrum_window(cfg);
    const auto nu = nu_grid_of(cfg);
    const auto spec = output_spectrum(result.state.chain, k_max, cfg.ell(), ops, nu, m,
                                      cfg.spectrum.incoherent, channel);
    const auto g2 = g2_function(result.state.chain, k_max, cfg.ell(), ops, cfg.g2.p_max, channel);

    fs::create_directories(out_dir);
    const fs::path sp = out_dir / "spectrum.csv";
    write_spectrum_csv(sp, nu, spec, m, cfg.spectrum.incoherent);
    const fs::path g2p = out_dir / "g2.csv";
    write_g2_csv(g2p, cfg.dt, g2);

    manifest.cumulative_discarded_weight = result.state.cumulative_discarded;
    manifest.finished_at = current_timestamp_utc();
    manifest.add_output(sp);
    manifest.add_output(g2p);
    manifest.write(out_dir / "manifest.json");
    std::printf("spectrum finished: M=%zu, %zu frequencies, g2 lags 0..%zu\n", m, nu.size(),
                cfg.g2.p_max);
    return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, const fs::path& out_dir, std::size_t workers,
              std::size_t phi_points, const std::vector<double>& tau_values) {
    RunManifest manifest = start_manifest(cfg);

    struct Job {
        double phi, tau;
    };
    std::vector<Job> jobs;
    for (double tau : tau_values) {
        for (std::size_t i = 0; i < phi_points; ++i) {
            const double phi =
                2.0 * std::acos(-1.0) * static_cast<double>(i) / static_cast<double>(phi_points);
            jobs.push_back({phi, tau});
        }
    }

    std::vector<SweepCell> cells(jobs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> budget_hit{false};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size() || budget_hit.load()) return;
            ExperimentConfig cell_cfg = cfg;
            cell_cfg.phi = jobs[i].phi;
            cell_cfg.tau = jobs[i].tau;
            try {
                RunOptions options;
                options.record_stride = cfg.record_stride;
                options.record_timeseries = true;
                auto result = run(cell_cfg, options);
                const auto ops = BinOperators::build(cell_cfg);
                const std::size_t channel = cell_cfg.setup == Setup::TwoAtoms ? 1 : 0;
                const auto k_max = static_cast<std::int64_t>(cell_cfg.n_steps());
                SweepCell cell;
                cell.phi = jobs[i].phi;
                cell.gamma_tau = jobs[i].tau * cell_cfg.gamma();
                cell.pe_ss = result.series.rows.back().pe1;
                cell.flux_ss =
                    output_flux(result.state.chain, k_max, cell_cfg.ell(), ops, channel);
                const auto circuit_bond = result.state.delay_window().first;
                cell.s_circuit_ss =
                    result.state.chain.schmidt_spectrum(circuit_bond).entropy_bits();
                cells[i] = cell;
            } catch (const TruncationBudgetError&) {
                budget_hit.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::max<std::size_t>(workers, 1); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (budget_hit.load()) {
        std::fprintf(stderr, "sweep aborted: a cell exceeded the truncation budget\n");
        return kExitBudgetExceeded;
    }

    std::sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
        if (a.gamma_tau != b.gamma_tau) return a.gamma_tau < b.gamma_tau;
        return a.phi < b.phi;
    });
    fs::create_directories(out_dir);
    const fs::path sw = out_dir / "sweep.csv";
    write_sweep_csv(sw, cells);
    manifest.finished_at = current_timestamp_utc();
    manifest.add_output(sw);
    manifest.write(out_dir / "manifest.json");
    std::printf("sweep finished: %zu cells\n", cells.size());
    return kExitOk;
}

int cmd_compare(const ExperimentConfig& cfg, double tolerance) {
    if (cfg.setup == Setup::Mirror) {
        const auto reference = mirror_effective_bloch(cfg);
        auto result = run(cfg);
        const double pe = result.series.rows.back().pe1;
        const double deviation = std::abs(pe - reference.pe_steady) /
                                 std::max(reference.pe_steady, 1e-12);
        std::printf("steady-state pe: simulated %.6f, Markovian reference %.6f, "
                    "relative deviation %.3e (tolerance %.3e)\n",
                    pe, reference.pe_steady, deviation, tolerance);
        return deviation <= tolerance ? kExitOk : kExitConfigError;
    }

    // two atoms: compare the reduced system state against the zero-delay
    // master equation over the recorded grid
    RunOptions options;
    options.record_stride = cfg.record_stride;
    std::vector<double> grid;
    std::vector<DenseTensor> marginals;
    std::vector<StepHook> hooks{[&](const EvolutionState& state, double t) {
        const auto steps = static_cast<std::size_t>(std::llround(t / cfg.dt));
        if (steps % cfg.record_stride != 0) return;
        grid.push_back(t);
        const std::size_t pos = state.system_position();
        marginals.push_back(state.chain.contract_window_density(pos, pos));
    }};
    auto result = run(cfg, options, hooks);
    auto reference = integrate_two_atom_master_eq(cfg, grid);
    double deviation = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t e = 0; e < marginals[i].size(); ++e) {
            deviation = std::max(deviation, std::abs(marginals[i](e) - reference[i].m(e)));
        }
    }
    std::printf("max element deviation between simulated marginals and the zero-delay "
                "master equation: %.3e (tolerance %.3e)\n",
                deviation, tolerance);
    return deviation <= tolerance ? kExitOk : kExitConfigError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"time-bin matrix product state simulator for waveguide circuits with delay"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    double tolerance = 0.05;
    std::size_t workers = default_workers();
    std::size_t phi_points = 16;
    std::vector<double> tau_values{0.2, 1.0, 2.0, 4.0};

    auto add_common = [&](CLI::App* cmd, bool with_out) {
        cmd->add_option("--config", config_path, "configuration file (JSON)")->required();
        if (with_out) cmd->add_option("--out-dir", out_dir, "output directory");
    };
    CLI::App* c_run = app.add_subcommand("run", "time evolution and time-series outputs");
    add_common(c_run, true);
    CLI::App* c_spectrum =
        app.add_subcommand("spectrum", "steady-state output spectrum and autocorrelation");
    add_common(c_spectrum, true);
    CLI::App* c_sweep = app.add_subcommand("sweep", "steady-state grid over phi and tau");
    add_common(c_sweep, true);
    c_sweep->add_option("--workers", workers, "parallel cells (default: TBMPS_WORKERS or cores)");
    c_sweep->add_option("--phi-points", phi_points, "phi grid points in [0, 2pi)");
    c_sweep->add_option("--tau-values", tau_values, "delay values for the sweep grid");
    CLI::App* c_compare =
        app.add_subcommand("compare", "check the run against the Markovian reference");
    add_common(c_compare, false);
    c_compare->add_option("--tolerance", tolerance, "maximum accepted deviation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfigError;
    }

    try {
        const ExperimentConfig cfg = parse_config_file(config_path);
        for (const std::string& warning : cfg.warnings()) {
            std::fprintf(stderr, "warning: %s\n", warning.c_str());
        }
        if (c_run->parsed()) return cmd_run(cfg, out_dir);
        if (c_spectrum->parsed()) return cmd_spectrum(cfg, out_dir);
        if (c_sweep->parsed()) return cmd_sweep(cfg, out_dir, workers, phi_points, tau_values);
        if (c_compare->parsed()) return cmd_compare(cfg, tolerance);
    } catch (const TruncationBudgetError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitBudgetExceeded;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfigError;
    }
    return kExitConfigError;
}
