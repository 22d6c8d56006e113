#pragma once

#include "tbmps/tensor.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace tbmps {

enum class Setup { TwoAtoms, Mirror };
enum class InitialSystem { Ground, Excited, Plus };

struct SpectrumOptions {
    double nu_min = -8.0;
    double nu_max = 8.0;
    std::size_t n_nu = 321;
    std::size_t m = 0;  // 0: auto, floor(0.8 q)
    bool incoherent = true;
};

struct G2Options {
    std::size_t p_max = 100;
};

/// Full physical and numerical parameter set. Rates are in units of the
/// reference rate gamma = gamma_l + gamma_r, times in 1/gamma, hbar = 1.
struct ExperimentConfig {
    Setup setup = Setup::Mirror;
    double gamma_l = 0.5;
    double gamma_r = 0.5;
    std::optional<double> chi;  // if set: gamma_{L/R} = (1 +- chi)/2
    cplx omega1 = 0.0;
    cplx omega2 = 0.0;
    double delta1 = 0.0;
    double delta2 = 0.0;
    double phi = 0.0;
    double tau = 1.0;
    double dt = 0.1;
    std::size_t d_ph = 2;
    std::size_t d_max = 128;
    double svd_cutoff = 1e-10;
    double t_max = 100.0;
    double trunc_budget = 1e-3;
    InitialSystem initial_system = InitialSystem::Ground;
    std::size_t record_stride = 1;
    SpectrumOptions spectrum;
    G2Options g2;

    double gamma() const { return gamma_l + gamma_r; }
    std::size_t ell() const;  // tau / dt, validated integral
    std::size_t n_steps() const;
    std::size_t n_modes() const { return setup == Setup::TwoAtoms ? 2 : 1; }
    std::size_t mode_dim() const { return d_ph + 1; }
    std::size_t bin_dim() const;
    std::size_t system_dim() const { return setup == Setup::TwoAtoms ? 4 : 2; }
    std::vector<cplx> initial_system_state() const;

    /// Applies chi, checks every constraint; throws with the violated rule.
    void validate() const;
    double effective_gamma_l() const;
    double effective_gamma_r() const;
    std::vector<std::string> warnings() const;
};

/// Truncated time-bin mode operators. annihilate[m] is the quantum noise
/// increment on the joint bin space: it removes one photon from mode m with
/// matrix elements <n|B|n+1> = sqrt((n+1) dt). number[m] counts photons.
struct BinOperators {
    std::vector<DenseTensor> annihilate;
    std::vector<DenseTensor> number;
    std::size_t bin_dim = 0;
    double dt = 0.0;

    static BinOperators build(const ExperimentConfig& cfg);
    DenseTensor total_number() const;
};

/// Lowering operator of atom `which` (0-based) on an n_atoms register.
DenseTensor atom_lowering(std::size_t which, std::size_t n_atoms);

/// H = sum_n [ -Delta_n |e_n><e_n| - (Omega_n |g_n><e_n| + h.c.)/2 ].
DenseTensor build_system_hamiltonian(const ExperimentConfig& cfg);

/// Anti-Hermitian step generator on system x bin_new x bin_old; exp of it is
/// the stroboscopic one-step unitary.
DenseTensor build_step_generator(const ExperimentConfig& cfg, const BinOperators& ops);

struct StepUnitary {
    DenseTensor matrix;      // on system x bin_new x bin_old
    DenseTensor chain_gate;  // same operator reordered to bin_old x system x bin_new
    std::array<std::size_t, 3> dims{};  // {system, bin_new, bin_old}
};

StepUnitary build_step_unitary(const ExperimentConfig& cfg, const BinOperators& ops);

}  // namespace tbmps
