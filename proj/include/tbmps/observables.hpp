#pragma once

#include "tbmps/model.hpp"
#include "tbmps/mps.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace tbmps {

/// Entanglement entropy of {system + bins newer than t - t_A} with the rest,
/// for t_A = 0, dt, 2 dt, ... The t_A = 0 entry is the system-field entropy;
/// the t_A = tau entry (index ell) cuts the circuit from the output field.
struct EntropyProfile {
    double t = 0.0;
    std::vector<double> t_a;
    std::vector<double> s_bits;
    std::size_t index_system = 0;                 // t_A = 0 entry
    std::optional<std::size_t> index_circuit;     // t_A = tau entry, when present
};

EntropyProfile entropy_profile(const VidalChain& chain, std::int64_t k, std::size_t ell,
                               double dt, double t_a_max);

/// p[N] = probability of N photons in total over the window bins, N <= n_max;
/// tail_mass absorbs the rest. Pure readout; the chain is not modified.
struct PhotonDistribution {
    std::vector<double> p;
    double tail_mass = 0.0;
    double mean() const;
};

PhotonDistribution delay_photon_distribution(const VidalChain& chain, std::size_t first,
                                             std::size_t last, const BinOperators& ops,
                                             std::size_t n_max);

/// Steady-state output spectrum from the frozen output bins, referenced to
/// bin q = k_max - ell - 1: 2 Re (1/dt) sum_p C(p) e^{i nu p dt} with the
/// p = 0 term halved (one-sided transform). With `incoherent`, the coherent
/// product <B^dag><B> is subtracted from each correlator first.
std::vector<double> output_spectrum(const VidalChain& chain, std::int64_t k_max, std::size_t ell,
                                    const BinOperators& ops, std::span<const double> nu_grid,
                                    std::size_t m, bool incoherent, std::size_t channel = 0);

/// Normalized second-order autocorrelation g2(p dt) of the output field,
/// p = 0..p_max. Errors out when the output flux is below flux_floor.
std::vector<double> g2_function(const VidalChain& chain, std::int64_t k_max, std::size_t ell,
                                const BinOperators& ops, std::size_t p_max,
                                std::size_t channel = 0, double flux_floor = 1e-12);

/// Per-atom excited-state probabilities from the reduced system state.
std::vector<double> system_populations(const VidalChain& chain, Setup setup);

/// <B^dag B>/dt on the reference output bin q = k_max - ell - 1.
double output_flux(const VidalChain& chain, std::int64_t k_max, std::size_t ell,
                   const BinOperators& ops, std::size_t channel = 0);

/// Summed photon-number expectation over the window bins.
double window_photon_number(const VidalChain& chain, std::size_t first, std::size_t last,
                            const BinOperators& ops);

}  // namespace tbmps
