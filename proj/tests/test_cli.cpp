#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

// End-to-end checks of the sim binary: exit codes, deterministic CSV bodies,
// and manifest digests.

#include "tbmps/config_io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_sim(const std::string& args) {
    const std::string cmd = std::string(TBMPS_SIM_BINARY) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "tbmps_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

}  // namespace

TEST_CASE("run on an undriven ground-state config emits all-zero populations") {
    const auto dir = fresh_dir("run_zero");
    write_file(dir / "config.json", R"({
        "setup": "mirror", "tau": 0.3, "dt": 0.1, "omega": 0.0, "t_max": 1.0
    })");

    const int rc = run_sim("run --config " + (dir / "config.json").string() + " --out-dir " +
                           (dir / "out").string());
    REQUIRE(rc == 0);

    const std::string body = slurp(dir / "out" / "timeseries.csv");
    std::istringstream lines(body);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "t,pe1,pe2,n_delay,norm,disc_weight");
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        CHECK(line.find(",0,0,0,") != std::string::npos);
    }
    CHECK(rows == 10);
}

TEST_CASE("reruns produce byte-identical csv bodies and matching digests") {
    const auto dir = fresh_dir("run_deterministic");
    write_file(dir / "config.json", R"({
        "setup": "mirror", "tau": 0.3, "dt": 0.1, "omega": 1.2, "t_max": 2.0, "d_max": 16
    })");

    REQUIRE(run_sim("run --config " + (dir / "config.json").string() + " --out-dir " +
                    (dir / "a").string()) == 0);
    REQUIRE(run_sim("run --config " + (dir / "config.json").string() + " --out-dir " +
                    (dir / "b").string()) == 0);
    for (const char* name : {"timeseries.csv", "entropy.csv", "photon_dist.csv"}) {
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    }

    // every manifest entry matches a recomputed digest
    const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
    for (const auto& entry : manifest["outputs"]) {
        const auto path = dir / "a" / entry["file"].get<std::string>();
        CHECK(tbmps::fnv1a_digest_file(path) == entry["digest"].get<std::string>());
    }
    // and the embedded config round-trips
    CHECK_NOTHROW(tbmps::parse_config_json(manifest["config"]));
}

TEST_CASE("spectrum emits the frequency and autocorrelation tables") {
    const auto dir = fresh_dir("spectrum");
    write_file(dir / "config.json", R"({
        "setup": "mirror", "tau": 0.2, "dt": 0.1, "omega": 1.5, "t_max": 6.0, "d_max": 16,
        "spectrum": {"nu_min": -4.0, "nu_max": 4.0, "n_nu": 41, "M": 30},
        "g2": {"p_max": 10}
    })");
    REQUIRE(run_sim("spectrum --config " + (dir / "config.json").string() + " --out-dir " +
                    (dir / "out").string()) == 0);
    const std::string spec = slurp(dir / "out" / "spectrum.csv");
    CHECK(spec.find("nu,S_nu") != std::string::npos);
    CHECK(spec.find("M=30") != std::string::npos);
    std::istringstream lines(slurp(dir / "out" / "g2.csv"));
    std::string line;
    int rows = 0;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 12);  // header + lags 0..10
}

TEST_CASE("sweep covers the grid and sorts cells deterministically") {
    const auto dir = fresh_dir("sweep");
    write_file(dir / "config.json", R"({
        "setup": "mirror", "tau": 0.2, "dt": 0.1, "omega": 1.0, "t_max": 2.0, "d_max": 8
    })");
    REQUIRE(run_sim("sweep --config " + (dir / "config.json").string() + " --out-dir " +
                    (dir / "out").string() + " --phi-points 3 --tau-values 0.2 --workers 2") == 0);
    std::istringstream lines(slurp(dir / "out" / "sweep.csv"));
    std::string line;
    std::getline(lines, line);
    CHECK(line == "phi,gamma_tau,pe_ss,flux_ss,S_circuit_ss");
    int rows = 0;
    double last_phi = -1.0;
    while (std::getline(lines, line)) {
        ++rows;
        const double phi = std::stod(line.substr(0, line.find(',')));
        CHECK(phi > last_phi);
        last_phi = phi;
    }
    CHECK(rows == 3);
}

TEST_CASE("compare checks the markovian limit and honors the tolerance flag") {
    const auto dir = fresh_dir("compare");
    write_file(dir / "config.json", R"({
        "setup": "mirror", "tau": 0.02, "dt": 0.02, "omega": 1.5, "t_max": 30.0, "d_max": 16
    })");
    CHECK(run_sim("compare --config " + (dir / "config.json").string() + " --tolerance 0.1") == 0);
    CHECK(run_sim("compare --config " + (dir / "config.json").string() +
                  " --tolerance 1e-9") == 1);
}

TEST_CASE("config errors exit with code 1") {
    const auto dir = fresh_dir("bad_config");
    write_file(dir / "config.json", R"({"setup": "mirror", "tau": 5.0, "dt": 0.3})");
    CHECK(run_sim("run --config " + (dir / "config.json").string()) == 1);
    CHECK(run_sim("run --config " + (dir / "missing.json").string()) == 1);
}

TEST_CASE("a truncation budget abort exits with code 2") {
    const auto dir = fresh_dir("budget");
    write_file(dir / "config.json", R"({
        "setup": "mirror", "tau": 0.5, "dt": 0.1, "omega": 1.5, "t_max": 10.0,
        "d_max": 2, "svd_cutoff": 0.0, "trunc_budget": 1e-9
    })");
    CHECK(run_sim("run --config " + (dir / "config.json").string() + " --out-dir " +
                  (dir / "out").string()) == 2);
}
