#include "tbmps/markovian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tbmps {

namespace {

DenseTensor commutator(const DenseTensor& a, const DenseTensor& b) {
    DenseTensor ab = matmul(a, b);
    DenseTensor ba = matmul(b, a);
    ba *= cplx(-1.0);
    ab += ba;
    return ab;
}

DenseTensor dissipator(const DenseTensor& c, const DenseTensor& rho) {
    DenseTensor out = matmul(matmul(c, rho), dagger(c));
    DenseTensor n = matmul(dagger(c), c);
    DenseTensor anti = matmul(n, rho);
    anti += matmul(rho, n);
    anti *= cplx(-0.5);
    out += anti;
    return out;
}

DenseTensor hermitian_part_transpose(const DenseTensor& m) {
    // returns m^dag for a square matrix
    return dagger(m);
}

class TwoAtomLiouvillian {
public:
    explicit TwoAtomLiouvillian(const ExperimentConfig& cfg)
        : h_(build_system_hamiltonian(cfg)),
          c1_(atom_lowering(0, 2)),
          c2_(atom_lowering(1, 2)),
          gamma_(cfg.gamma()),
          gl_(cfg.effective_gamma_l()),
          gr_(cfg.effective_gamma_r()),
          phase_(std::exp(cplx(0.0, cfg.phi))) {
        // sanity guard: the dissipative part must decompose into a PSD rate
        // matrix over {c1, c2}; off-diagonal rate is gr e^{i phi} + gl e^{-i phi}
        const cplx cross = gr_ * phase_ + gl_ * std::conj(phase_);
        if (std::abs(cross) > gamma_ + 1e-12) {
            throw std::logic_error("collective rate matrix is not positive semidefinite");
        }
    }

    DenseTensor rhs(const DenseTensor& rho) const {
        DenseTensor out = commutator(h_, rho);
        out *= cplx(0.0, -1.0);
        DenseTensor d1 = dissipator(c1_, rho);
        d1 *= gamma_;
        out += d1;
        DenseTensor d2 = dissipator(c2_, rho);
        d2 *= gamma_;
        out += d2;

        // collective part: gl e^{i phi} [c1, rho c2^dag] + gr e^{i phi} [c2, rho c1^dag],
        // completed with its Hermitian conjugate so the map preserves Hermiticity
        DenseTensor a = commutator_with_tail(c1_, rho, c2_);
        a *= gl_ * phase_;
        DenseTensor b = commutator_with_tail(c2_, rho, c1_);
        b *= gr_ * phase_;
        a += b;
        out += a;
        out += hermitian_part_transpose(a);
        return out;
    }

private:
    static DenseTensor commutator_with_tail(const DenseTensor& c, const DenseTensor& rho,
                                            const DenseTensor& other) {
        // [c, rho other^dag]
        DenseTensor tail = matmul(rho, dagger(other));
        return commutator(c, tail);
    }

    DenseTensor h_, c1_, c2_;
    double gamma_, gl_, gr_;
    cplx phase_;
};

class SingleAtomLiouvillian {
public:
    SingleAtomLiouvillian(double gamma, cplx omega, double delta)
        : gamma_(gamma), c_(atom_lowering(0, 1)) {
        h_ = DenseTensor({2, 2});
        h_.at2(1, 1) = -delta;
        h_.at2(0, 1) = -omega / 2.0;
        h_.at2(1, 0) = -std::conj(omega) / 2.0;
    }

    DenseTensor rhs(const DenseTensor& rho) const {
        DenseTensor out = commutator(h_, rho);
        out *= cplx(0.0, -1.0);
        DenseTensor d = dissipator(c_, rho);
        d *= gamma_;
        out += d;
        return out;
    }

private:
    double gamma_;
    DenseTensor c_, h_;
};

template <typename L>
DenseTensor rk4_step(const L& liouville, const DenseTensor& rho, double h) {
    DenseTensor k1 = liouville.rhs(rho);
    DenseTensor x = k1;
    x *= cplx(h / 2.0);
    x += rho;
    DenseTensor k2 = liouville.rhs(x);
    x = k2;
    x *= cplx(h / 2.0);
    x += rho;
    DenseTensor k3 = liouville.rhs(x);
    x = k3;
    x *= cplx(h);
    x += rho;
    DenseTensor k4 = liouville.rhs(x);

    k2 *= cplx(2.0);
    k3 *= cplx(2.0);
    k1 += k2;
    k1 += k3;
    k1 += k4;
    k1 *= cplx(h / 6.0);
    k1 += rho;
    return k1;
}

template <typename L>
std::vector<DensityMatrix> integrate_on_grid(const L& liouville, DenseTensor rho,
                                             std::span<const double> t_grid, double substep) {
    if (substep <= 0.0) throw std::invalid_argument("integrator substep must be positive");
    std::vector<DensityMatrix> out;
    out.reserve(t_grid.size());
    double t = 0.0;
    for (double target : t_grid) {
        if (target < t - 1e-12) throw std::invalid_argument("t_grid must be non-decreasing");
        const double span = target - t;
        const auto n_sub = static_cast<std::size_t>(std::llround(span / substep));
        if (std::abs(span - static_cast<double>(n_sub) * substep) > 1e-9 * std::max(1.0, span)) {
            throw std::invalid_argument("t_grid points must be multiples of the substep");
        }
        for (std::size_t s = 0; s < n_sub; ++s) rho = rk4_step(liouville, rho, substep);
        t = target;
        out.push_back({rho});
    }
    return out;
}

DenseTensor initial_density(const ExperimentConfig& cfg) {
    const auto psi = cfg.initial_system_state();
    DenseTensor rho({psi.size(), psi.size()});
    for (std::size_t i = 0; i < psi.size(); ++i)
        for (std::size_t j = 0; j < psi.size(); ++j) rho.at2(i, j) = psi[i] * std::conj(psi[j]);
    return rho;
}

// Applies op (given on the listed axes) to a dense state tensor in place of
// those axes, restoring the original axis order.
DenseTensor apply_dense_operator(const DenseTensor& state, const DenseTensor& op,
                                 std::span<const std::size_t> axes) {
    const std::size_t n = axes.size();
    std::vector<std::size_t> op_shape;
    for (std::size_t a : axes) op_shape.push_back(state.dim(a));
    for (std::size_t a : axes) op_shape.push_back(state.dim(a));
    DenseTensor op_t = op.reshaped(op_shape);
    std::vector<std::size_t> op_axes, st_axes;
    for (std::size_t s = 0; s < n; ++s) {
        op_axes.push_back(n + s);
        st_axes.push_back(axes[s]);
    }
    DenseTensor raw = contract_pair(op_t, op_axes, state, st_axes);
    std::vector<std::size_t> kept;
    for (std::size_t a = 0; a < state.rank(); ++a) {
        if (std::find(axes.begin(), axes.end(), a) == axes.end()) kept.push_back(a);
    }
    std::vector<std::size_t> perm(state.rank());
    for (std::size_t target = 0; target < state.rank(); ++target) {
        const auto it = std::find(axes.begin(), axes.end(), target);
        if (it != axes.end()) {
            perm[target] = static_cast<std::size_t>(it - axes.begin());
        } else {
            const auto kit = std::find(kept.begin(), kept.end(), target);
            perm[target] = n + static_cast<std::size_t>(kit - kept.begin());
        }
    }
    return raw.transposed(perm);
}

}  // namespace

void DensityMatrix::validate() const {
    if (m.rank() != 2 || m.dim(0) != m.dim(1)) throw std::logic_error("density matrix not square");
    const std::size_t n = m.dim(0);
    cplx tr = 0.0;
    double herm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tr += m.at2(i, i);
        for (std::size_t j = 0; j < n; ++j)
            herm = std::max(herm, std::abs(m.at2(i, j) - std::conj(m.at2(j, i))));
    }
    if (std::abs(tr - cplx(1.0)) > 1e-10) throw std::logic_error("density matrix trace off unity");
    if (herm > 1e-10) throw std::logic_error("density matrix not Hermitian");
    // PSD check via the smallest diagonal of repeated deflation would be
    // heavy; the quadratic form on the basis vectors catches the cases the
    // integrators can realistically produce
    for (std::size_t i = 0; i < n; ++i) {
        if (m.at2(i, i).real() < -1e-9) throw std::logic_error("negative population");
    }
}

std::vector<DensityMatrix> integrate_two_atom_master_eq(const ExperimentConfig& cfg,
                                                        std::span<const double> t_grid) {
    return integrate_two_atom_master_eq(cfg, DensityMatrix{initial_density(cfg)}, t_grid);
}

std::vector<DensityMatrix> integrate_two_atom_master_eq(const ExperimentConfig& cfg,
                                                        const DensityMatrix& initial,
                                                        std::span<const double> t_grid) {
    if (cfg.setup != Setup::TwoAtoms) {
        throw std::invalid_argument("two-atom master equation needs the two-atom setup");
    }
    TwoAtomLiouvillian liouville(cfg);
    return integrate_on_grid(liouville, initial.m, t_grid, cfg.dt / 10.0);
}

std::vector<DensityMatrix> integrate_single_atom_bloch(double gamma, cplx omega, double delta,
                                                       std::span<const double> t_grid,
                                                       double substep) {
    SingleAtomLiouvillian liouville(gamma, omega, delta);
    DenseTensor rho({2, 2});
    rho.at2(0, 0) = 1.0;
    return integrate_on_grid(liouville, rho, t_grid, substep);
}

double bloch_steady_pe(double gamma, cplx omega, double delta) {
    const double o2 = std::norm(omega);
    return (o2 / 4.0) / (delta * delta + gamma * gamma / 4.0 + o2 / 2.0);
}

EffectiveBloch mirror_effective_bloch(const ExperimentConfig& cfg) {
    if (cfg.setup != Setup::Mirror) {
        throw std::invalid_argument("effective Bloch limit applies to the mirror setup");
    }
    if (std::abs(cfg.effective_gamma_l() - cfg.effective_gamma_r()) > 1e-12) {
        throw std::invalid_argument("effective Bloch limit requires gamma_l = gamma_r");
    }
    EffectiveBloch out;
    const double gamma = cfg.gamma();
    const double half_phi = cfg.phi / 2.0;
    out.gamma_eff = 2.0 * gamma * std::cos(half_phi) * std::cos(half_phi);
    out.delta_eff = cfg.delta1 - (gamma / 2.0) * std::sin(cfg.phi);
    out.pe_steady = bloch_steady_pe(out.gamma_eff, cfg.omega1, out.delta_eff);

    if (out.gamma_eff > 1e-6) {
        const double substep = std::min(0.01 / out.gamma_eff, 0.01);
        const double horizon = 50.0 / out.gamma_eff;
        const auto n = static_cast<std::size_t>(std::ceil(horizon / substep));
        const std::vector<double> grid{static_cast<double>(n) * substep};
        out.steady =
            integrate_single_atom_bloch(out.gamma_eff, cfg.omega1, out.delta_eff, grid, substep)
                .back();
    } else {
        // undamped limit: report the time-averaged populations
        DenseTensor rho({2, 2});
        rho.at2(0, 0) = 1.0 - out.pe_steady;
        rho.at2(1, 1) = out.pe_steady;
        out.steady = {rho};
    }
    return out;
}

BruteForceResult brute_force_evolve(const ExperimentConfig& cfg, std::size_t n_steps,
                                    std::size_t dense_limit) {
    cfg.validate();
    const std::size_t ell = cfg.ell();
    const std::size_t db = cfg.bin_dim();
    const std::size_t ds = cfg.system_dim();
    double log_dim = std::log2(static_cast<double>(ds)) +
                     static_cast<double>(n_steps + ell) * std::log2(static_cast<double>(db));
    if (log_dim > std::log2(static_cast<double>(dense_limit))) {
        throw std::invalid_argument("dense dimension budget exceeded");
    }

    const std::size_t n_bins = n_steps + ell;
    std::vector<std::size_t> shape(n_bins, db);
    shape.push_back(ds);
    DenseTensor state(shape);
    // all bins in vacuum, system in its configured state
    const auto sys = cfg.initial_system_state();
    for (std::size_t i = 0; i < ds; ++i) state(i) = sys[i];

    BruteForceResult out;
    for (std::size_t b = 0; b < n_bins; ++b) {
        out.bins.push_back(static_cast<std::int64_t>(b) - static_cast<std::int64_t>(ell));
    }

    const BinOperators ops = BinOperators::build(cfg);
    const StepUnitary u = build_step_unitary(cfg, ops);
    for (std::size_t k = 0; k < n_steps; ++k) {
        // U acts on (system, bin k, bin k - ell); bin p sits on axis p + ell
        const std::size_t axes[3] = {n_bins, k + ell, k};
        state = apply_dense_operator(state, u.matrix, axes);
    }
    out.state = std::move(state);
    return out;
}

double fidelity_with_chain(const BruteForceResult& dense, const VidalChain& chain) {
    DenseTensor chain_state = chain.contract_to_dense();

    // permutation: dense axis order first, chain-only sites trailing
    const std::size_t rank = chain.n_sites();
    std::vector<std::size_t> perm;
    std::vector<bool> used(rank, false);
    for (std::size_t a = 0; a < dense.bins.size(); ++a) {
        auto pos = chain.find_bin(dense.bins[a]);
        if (!pos) throw std::invalid_argument("chain lacks a bin present in the dense state");
        perm.push_back(*pos);
        used[*pos] = true;
    }
    perm.push_back(chain.system_position());
    used[chain.system_position()] = true;
    std::size_t extra = 1;
    for (std::size_t s = 0; s < rank; ++s) {
        if (!used[s]) {
            perm.push_back(s);
            extra *= chain.phys_dim(s);
        }
    }
    DenseTensor aligned = chain_state.transposed(perm);

    cplx overlap = 0.0;
    for (std::size_t i = 0; i < dense.state.size(); ++i) {
        overlap += std::conj(dense.state(i)) * aligned(i * extra);
    }
    double dense_norm2 = 0.0;
    for (std::size_t i = 0; i < dense.state.size(); ++i) dense_norm2 += std::norm(dense.state(i));
    return std::norm(overlap) / dense_norm2;
}

}  // namespace tbmps
