#pragma once

#include "tbmps/engine.hpp"
#include "tbmps/model.hpp"
#include "tbmps/observables.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tbmps {

/// Parses and validates a JSON configuration document. Unknown keys are
/// rejected. For the mirror setup, omega / omega_phase / delta are accepted
/// as aliases for the atom-1 slots. For two_atoms, an absent omega2 defaults
/// to the magnitude of omega1 (the per-atom phase stays separate).
ExperimentConfig parse_config_json(const nlohmann::json& doc);
ExperimentConfig parse_config_file(const std::string& path);

/// Lossless serialization: parse_config_json(config_to_json(c)) == c.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// FNV-1a 64-bit digest of a file's bytes, as a fixed-width hex string.
/// Deterministic content fingerprint, not a cryptographic hash.
std::string fnv1a_digest_file(const std::filesystem::path& path);

struct RunManifest {
    nlohmann::json config;
    std::string version;
    std::string started_at;
    std::string finished_at;
    double cumulative_discarded_weight = 0.0;
    std::vector<std::pair<std::string, std::string>> outputs;  // file, digest

    void add_output(const std::filesystem::path& path);
    void write(const std::filesystem::path& path) const;
};

std::string current_timestamp_utc();

/// CSV emitters. All numbers are printed with 12 significant digits so that
/// reruns of the same configuration produce byte-identical bodies.
void write_timeseries_csv(const std::filesystem::path& path, const ObservableSeries& series);
void write_entropy_csv(const std::filesystem::path& path, const ObservableSeries& series);
void write_photon_dist_csv(const std::filesystem::path& path, const PhotonDistribution& dist);
void write_spectrum_csv(const std::filesystem::path& path, std::span<const double> nu,
                        std::span<const double> s_nu, std::size_t m, bool incoherent);
void write_g2_csv(const std::filesystem::path& path, double dt, std::span<const double> g2);

struct SweepCell {
    double phi = 0.0;
    double gamma_tau = 0.0;
    double pe_ss = 0.0;
    double flux_ss = 0.0;
    double s_circuit_ss = 0.0;
};

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepCell> cells);

std::string format_number(double v);

}  // namespace tbmps
