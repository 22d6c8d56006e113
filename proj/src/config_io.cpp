#include "tbmps/config_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tbmps {

namespace {

using nlohmann::json;

[[noreturn]] void reject(const std::string& message) {
    throw std::invalid_argument("config error: " + message);
}

void check_keys(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : doc.items()) {
        if (!allowed.count(key)) {
            reject("unknown key '" + key + "' in " + where);
        }
    }
}

double number_or(const json& doc, const std::string& key, double fallback) {
    if (!doc.contains(key)) return fallback;
    if (!doc[key].is_number()) reject("'" + key + "' must be a number");
    return doc[key].get<double>();
}

std::size_t integer_or(const json& doc, const std::string& key, std::size_t fallback) {
    if (!doc.contains(key)) return fallback;
    if (!doc[key].is_number_integer() || doc[key].get<std::int64_t>() < 0) {
        reject("'" + key + "' must be a non-negative integer");
    }
    return doc[key].get<std::size_t>();
}

}  // namespace

ExperimentConfig parse_config_json(const json& doc) {
    if (!doc.is_object()) reject("document must be a JSON object");
    static const std::set<std::string> top_keys{
        "setup",        "gamma_L",     "gamma_R",  "chi",          "omega1",
        "omega1_phase", "omega2",      "omega2_phase", "delta1",   "delta2",
        "phi",          "tau",         "dt",       "d_ph",         "d_max",
        "svd_cutoff",   "t_max",       "trunc_budget", "initial_system", "record_stride",
        "spectrum",     "g2",          "omega",    "omega_phase",  "delta"};
    check_keys(doc, top_keys, "config");

    ExperimentConfig cfg;
    if (!doc.contains("setup")) reject("'setup' is required (\"mirror\" or \"two_atoms\")");
    const std::string setup = doc["setup"].get<std::string>();
    if (setup == "mirror") {
        cfg.setup = Setup::Mirror;
    } else if (setup == "two_atoms") {
        cfg.setup = Setup::TwoAtoms;
    } else {
        reject("'setup' must be \"mirror\" or \"two_atoms\", got \"" + setup + "\"");
    }

    for (const char* key : {"omega", "omega_phase", "delta"}) {
        if (doc.contains(key) && cfg.setup != Setup::Mirror) {
            reject(std::string("'") + key + "' is a mirror-setup alias; use the numbered keys");
        }
    }
    if (doc.contains("omega") && doc.contains("omega1")) reject("'omega' conflicts with 'omega1'");
    if (doc.contains("omega_phase") && doc.contains("omega1_phase")) {
        reject("'omega_phase' conflicts with 'omega1_phase'");
    }
    if (doc.contains("delta") && doc.contains("delta1")) reject("'delta' conflicts with 'delta1'");

    cfg.gamma_l = number_or(doc, "gamma_L", 0.5);
    cfg.gamma_r = number_or(doc, "gamma_R", 0.5);
    if (doc.contains("chi")) cfg.chi = number_or(doc, "chi", 0.0);

    const double omega1_mag =
        doc.contains("omega") ? number_or(doc, "omega", 0.0) : number_or(doc, "omega1", 0.0);
    const double omega1_phase = doc.contains("omega_phase") ? number_or(doc, "omega_phase", 0.0)
                                                            : number_or(doc, "omega1_phase", 0.0);
    cfg.omega1 = cplx(omega1_mag) * std::exp(cplx(0.0, omega1_phase));
    const double omega2_mag = number_or(doc, "omega2", omega1_mag);
    const double omega2_phase = number_or(doc, "omega2_phase", 0.0);
    cfg.omega2 = cfg.setup == Setup::TwoAtoms
                     ? cplx(omega2_mag) * std::exp(cplx(0.0, omega2_phase))
                     : cplx(0.0);
    cfg.delta1 = doc.contains("delta") ? number_or(doc, "delta", 0.0) : number_or(doc, "delta1", 0.0);
    cfg.delta2 = number_or(doc, "delta2", 0.0);

    cfg.phi = number_or(doc, "phi", 0.0);
    if (!doc.contains("tau")) reject("'tau' is required");
    cfg.tau = number_or(doc, "tau", 0.0);
    if (!doc.contains("dt")) reject("'dt' is required");
    cfg.dt = number_or(doc, "dt", 0.0);
    cfg.d_ph = integer_or(doc, "d_ph", 2);
    cfg.d_max = integer_or(doc, "d_max", 128);
    cfg.svd_cutoff = number_or(doc, "svd_cutoff", 1e-10);
    cfg.t_max = number_or(doc, "t_max", 100.0);
    cfg.trunc_budget = number_or(doc, "trunc_budget", 1e-3);
    cfg.record_stride = integer_or(doc, "record_stride", 1);

    if (doc.contains("initial_system")) {
        const std::string init = doc["initial_system"].get<std::string>();
        if (init == "ground") {
            cfg.initial_system = InitialSystem::Ground;
        } else if (init == "excited") {
            cfg.initial_system = InitialSystem::Excited;
        } else if (init == "plus") {
            cfg.initial_system = InitialSystem::Plus;
        } else {
            reject("'initial_system' must be one of ground, excited, plus");
        }
    }

    if (doc.contains("spectrum")) {
        const json& sp = doc["spectrum"];
        check_keys(sp, {"nu_min", "nu_max", "n_nu", "M", "incoherent"}, "spectrum");
        cfg.spectrum.nu_min = number_or(sp, "nu_min", cfg.spectrum.nu_min);
        cfg.spectrum.nu_max = number_or(sp, "nu_max", cfg.spectrum.nu_max);
        cfg.spectrum.n_nu = integer_or(sp, "n_nu", cfg.spectrum.n_nu);
        cfg.spectrum.m = integer_or(sp, "M", cfg.spectrum.m);
        if (sp.contains("incoherent")) {
            if (!sp["incoherent"].is_boolean()) reject("'incoherent' must be a boolean");
            cfg.spectrum.incoherent = sp["incoherent"].get<bool>();
        }
    }
    if (doc.contains("g2")) {
        const json& g2 = doc["g2"];
        check_keys(g2, {"p_max"}, "g2");
        cfg.g2.p_max = integer_or(g2, "p_max", cfg.g2.p_max);
    }

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        reject(e.what());
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) reject("cannot open '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        reject(std::string("malformed JSON: ") + e.what());
    }
    return parse_config_json(doc);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    json doc;
    doc["setup"] = cfg.setup == Setup::Mirror ? "mirror" : "two_atoms";
    doc["gamma_L"] = cfg.gamma_l;
    doc["gamma_R"] = cfg.gamma_r;
    if (cfg.chi) doc["chi"] = *cfg.chi;
    doc["omega1"] = std::abs(cfg.omega1);
    doc["omega1_phase"] = std::arg(cfg.omega1);
    doc["omega2"] = std::abs(cfg.omega2);
    doc["omega2_phase"] = std::arg(cfg.omega2);
    doc["delta1"] = cfg.delta1;
    doc["delta2"] = cfg.delta2;
    doc["phi"] = cfg.phi;
    doc["tau"] = cfg.tau;
    doc["dt"] = cfg.dt;
    doc["d_ph"] = cfg.d_ph;
    doc["d_max"] = cfg.d_max;
    doc["svd_cutoff"] = cfg.svd_cutoff;
    doc["t_max"] = cfg.t_max;
    doc["trunc_budget"] = cfg.trunc_budget;
    doc["initial_system"] = cfg.initial_system == InitialSystem::Ground    ? "ground"
                            : cfg.initial_system == InitialSystem::Excited ? "excited"
                                                                           : "plus";
    doc["record_stride"] = cfg.record_stride;
    doc["spectrum"] = {{"nu_min", cfg.spectrum.nu_min},
                       {"nu_max", cfg.spectrum.nu_max},
                       {"n_nu", cfg.spectrum.n_nu},
                       {"M", cfg.spectrum.m},
                       {"incoherent", cfg.spectrum.incoherent}};
    doc["g2"] = {{"p_max", cfg.g2.p_max}};
    return doc;
}

std::string fnv1a_digest_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for digest: " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ull;
    char buffer[4096];
    while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buffer[i]);
            hash *= 0x100000001b3ull;
        }
        if (!in) break;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

void RunManifest::add_output(const std::filesystem::path& path) {
    outputs.emplace_back(path.filename().string(), fnv1a_digest_file(path));
}

void RunManifest::write(const std::filesystem::path& path) const {
    json doc;
    doc["version"] = version;
    doc["config"] = config;
    doc["started_at"] = started_at;
    doc["finished_at"] = finished_at;
    doc["cumulative_discarded_weight"] = cumulative_discarded_weight;
    json files = json::array();
    for (const auto& [file, digest] : outputs) {
        files.push_back({{"file", file}, {"digest", digest}});
    }
    doc["outputs"] = files;
    std::ofstream out(path);
    out << doc.dump(2) << '\n';
}

std::string current_timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void write_timeseries_csv(const std::filesystem::path& path, const ObservableSeries& series) {
    std::ofstream out(path);
    out << "t,pe1,pe2,n_delay,norm,disc_weight\n";
    for (const auto& row : series.rows) {
        out << format_number(row.t) << ',' << format_number(row.pe1) << ','
            << format_number(row.pe2) << ',' << format_number(row.n_delay) << ','
            << format_number(row.norm) << ',' << format_number(row.disc_weight) << '\n';
    }
}

void write_entropy_csv(const std::filesystem::path& path, const ObservableSeries& series) {
    std::ofstream out(path);
    out << "t,t_A,S\n";
    for (const auto& row : series.entropy) {
        out << format_number(row.t) << ',' << format_number(row.t_a) << ','
            << format_number(row.s_bits) << '\n';
    }
}

void write_photon_dist_csv(const std::filesystem::path& path, const PhotonDistribution& dist) {
    std::ofstream out(path);
    out << "# tail_mass=" << format_number(dist.tail_mass) << '\n';
    out << "N,p_N\n";
    for (std::size_t n = 0; n < dist.p.size(); ++n) {
        out << n << ',' << format_number(dist.p[n]) << '\n';
    }
}

void write_spectrum_csv(const std::filesystem::path& path, std::span<const double> nu,
                        std::span<const double> s_nu, std::size_t m, bool incoherent) {
    std::ofstream out(path);
    out << "# one-sided transform, p=0 term halved; M=" << m
        << "; incoherent=" << (incoherent ? "true" : "false") << '\n';
    out << "nu,S_nu\n";
    for (std::size_t i = 0; i < nu.size(); ++i) {
        out << format_number(nu[i]) << ',' << format_number(s_nu[i]) << '\n';
    }
}

void write_g2_csv(const std::filesystem::path& path, double dt, std::span<const double> g2) {
    std::ofstream out(path);
    out << "tprime,g2\n";
    for (std::size_t p = 0; p < g2.size(); ++p) {
        out << format_number(static_cast<double>(p) * dt) << ',' << format_number(g2[p]) << '\n';
    }
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepCell> cells) {
    std::ofstream out(path);
    out << "phi,gamma_tau,pe_ss,flux_ss,S_circuit_ss\n";
    for (const auto& cell : cells) {
        out << format_number(cell.phi) << ',' << format_number(cell.gamma_tau) << ','
            << format_number(cell.pe_ss) << ',' << format_number(cell.flux_ss) << ','
            << format_number(cell.s_circuit_ss) << '\n';
    }
}

}  // namespace tbmps
