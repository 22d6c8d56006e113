#pragma once

#include "tbmps/model.hpp"
#include "tbmps/mps.hpp"
#include "tbmps/tensor.hpp"

#include <vector>

namespace tbmps {

/// Validates the standard state invariants (Hermitian, unit trace, PSD).
struct DensityMatrix {
    DenseTensor m;
    void validate() const;
    double population(std::size_t level) const { return m.at2(level, level).real(); }
};

/// Zero-delay master equation for the two coupled atoms: local dissipators at
/// the total rate plus phase-dependent collective terms (collective decay and
/// waveguide-mediated exchange). Fixed-step RK4 sampled on t_grid; the
/// integrator substep is dt/10 from the configuration.
std::vector<DensityMatrix> integrate_two_atom_master_eq(const ExperimentConfig& cfg,
                                                        std::span<const double> t_grid);

/// Same equation from an explicit initial state.
std::vector<DensityMatrix> integrate_two_atom_master_eq(const ExperimentConfig& cfg,
                                                        const DensityMatrix& initial,
                                                        std::span<const double> t_grid);

/// Driven damped two-level atom, RK4 on the same stepping rules.
std::vector<DensityMatrix> integrate_single_atom_bloch(double gamma, cplx omega, double delta,
                                                       std::span<const double> t_grid,
                                                       double substep);

/// Analytic steady-state excited population of the driven damped atom.
double bloch_steady_pe(double gamma, cplx omega, double delta);

struct EffectiveBloch {
    double gamma_eff = 0.0;
    double delta_eff = 0.0;
    double pe_steady = 0.0;
    DensityMatrix steady;
};

/// Markovian limit of the mirror setup for symmetric coupling:
/// gamma_eff = 2 gamma cos^2(phi/2), delta_eff = delta - (gamma/2) sin(phi).
EffectiveBloch mirror_effective_bloch(const ExperimentConfig& cfg);

/// Dense state-vector run of the identical stroboscopic map, with axes
/// [bin_{-ell}, ..., bin_{n_steps-1}, system].
struct BruteForceResult {
    DenseTensor state;
    std::vector<std::int64_t> bins;  // bin index per leading axis
};

BruteForceResult brute_force_evolve(const ExperimentConfig& cfg, std::size_t n_steps,
                                    std::size_t dense_limit = 1000000);

/// |<dense|chain>|^2 / <dense|dense>, matching sites by label; chain sites
/// absent from the dense state must be vacuum bins.
double fidelity_with_chain(const BruteForceResult& dense, const VidalChain& chain);

}  // namespace tbmps
