#include "tbmps/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tbmps {

namespace {

DenseTensor kron3(const DenseTensor& a, const DenseTensor& b, const DenseTensor& c) {
    return kron(kron(a, b), c);
}

// one-mode noise increment on an m-level mode: <n|B|n+1> = sqrt((n+1) dt)
DenseTensor mode_annihilator(std::size_t m, double dt) {
    DenseTensor b({m, m});
    for (std::size_t n = 1; n < m; ++n) b.at2(n - 1, n) = std::sqrt(static_cast<double>(n) * dt);
    return b;
}

DenseTensor mode_number(std::size_t m) {
    DenseTensor n({m, m});
    for (std::size_t i = 0; i < m; ++i) n.at2(i, i) = static_cast<double>(i);
    return n;
}

}  // namespace

std::size_t ExperimentConfig::ell() const {
    const double ratio = tau / dt;
    const auto l = static_cast<std::int64_t>(std::llround(ratio));
    if (l < 1 || std::abs(ratio - static_cast<double>(l)) > 1e-9 * std::max(1.0, ratio)) {
        std::ostringstream os;
        os << "tau/dt not integral (tau=" << tau << ", dt=" << dt << "); nearest valid dt is "
           << tau / std::max<std::int64_t>(l, 1);
        throw std::invalid_argument(os.str());
    }
    return static_cast<std::size_t>(l);
}

std::size_t ExperimentConfig::n_steps() const {
    return static_cast<std::size_t>(std::llround(t_max / dt));
}

std::size_t ExperimentConfig::bin_dim() const {
    std::size_t d = mode_dim();
    return setup == Setup::TwoAtoms ? d * d : d;
}

double ExperimentConfig::effective_gamma_l() const {
    return chi ? (1.0 + *chi) / 2.0 : gamma_l;
}

double ExperimentConfig::effective_gamma_r() const {
    return chi ? (1.0 - *chi) / 2.0 : gamma_r;
}

std::vector<cplx> ExperimentConfig::initial_system_state() const {
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    std::vector<cplx> atom;
    switch (initial_system) {
        case InitialSystem::Ground: atom = {1.0, 0.0}; break;
        case InitialSystem::Excited: atom = {0.0, 1.0}; break;
        case InitialSystem::Plus: atom = {inv_sqrt2, inv_sqrt2}; break;
    }
    if (setup == Setup::Mirror) return atom;
    std::vector<cplx> joint(4);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) joint[i * 2 + j] = atom[i] * atom[j];
    return joint;
}

void ExperimentConfig::validate() const {
    if (chi && (*chi < -1.0 || *chi > 1.0)) {
        throw std::invalid_argument("chi must lie in [-1, 1]");
    }
    const double gl = effective_gamma_l(), gr = effective_gamma_r();
    if (gl < 0.0 || gr < 0.0) throw std::invalid_argument("decay rates must be non-negative");
    if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
    if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
    if (t_max < 0.0) throw std::invalid_argument("t_max must be non-negative");
    if (d_ph < 1) throw std::invalid_argument("d_ph must be at least 1");
    if (d_max < 1) throw std::invalid_argument("d_max must be at least 1");
    if (svd_cutoff < 0.0) throw std::invalid_argument("svd_cutoff must be non-negative");
    if (trunc_budget < 0.0) throw std::invalid_argument("trunc_budget must be non-negative");
    if (record_stride < 1) throw std::invalid_argument("record_stride must be at least 1");
    ell();  // integral tau/dt

    double scale = gl + gr;
    scale = std::max({scale, std::abs(omega1), std::abs(delta1)});
    if (setup == Setup::TwoAtoms) scale = std::max({scale, std::abs(omega2), std::abs(delta2)});
    if (dt * scale > 0.2) {
        std::ostringstream os;
        os << "dt too coarse: dt * max(gamma, |omega|, |delta|) = " << dt * scale << " > 0.2";
        throw std::invalid_argument(os.str());
    }
}

std::vector<std::string> ExperimentConfig::warnings() const {
    std::vector<std::string> out;
    double scale = effective_gamma_l() + effective_gamma_r();
    scale = std::max({scale, std::abs(omega1), std::abs(delta1)});
    if (setup == Setup::TwoAtoms) scale = std::max({scale, std::abs(omega2), std::abs(delta2)});
    if (dt * scale > 0.1) {
        std::ostringstream os;
        os << "dt * max(gamma, |omega|, |delta|) = " << dt * scale
           << " exceeds 0.1; discretization error may be visible";
        out.push_back(os.str());
    }
    return out;
}

BinOperators BinOperators::build(const ExperimentConfig& cfg) {
    BinOperators ops;
    ops.dt = cfg.dt;
    ops.bin_dim = cfg.bin_dim();
    const std::size_t m = cfg.mode_dim();
    const DenseTensor b = mode_annihilator(m, cfg.dt);
    const DenseTensor n = mode_number(m);
    const DenseTensor id = DenseTensor::identity(m);
    if (cfg.setup == Setup::TwoAtoms) {
        ops.annihilate = {kron(b, id), kron(id, b)};  // (L, R)
        ops.number = {kron(n, id), kron(id, n)};
    } else {
        ops.annihilate = {b};
        ops.number = {n};
    }
    return ops;
}

DenseTensor BinOperators::total_number() const {
    DenseTensor total({bin_dim, bin_dim});
    for (const DenseTensor& n : number) total += n;
    return total;
}

DenseTensor atom_lowering(std::size_t which, std::size_t n_atoms) {
    DenseTensor sm({2, 2});
    sm.at2(0, 1) = 1.0;  // |g><e|
    DenseTensor op = which == 0 ? sm : DenseTensor::identity(2);
    for (std::size_t a = 1; a < n_atoms; ++a) {
        op = kron(op, a == which ? sm : DenseTensor::identity(2));
    }
    return op;
}

DenseTensor build_system_hamiltonian(const ExperimentConfig& cfg) {
    const std::size_t n_atoms = cfg.setup == Setup::TwoAtoms ? 2 : 1;
    const std::size_t dim = cfg.system_dim();
    DenseTensor h({dim, dim});
    const cplx omegas[2] = {cfg.omega1, cfg.omega2};
    const double deltas[2] = {cfg.delta1, cfg.delta2};
    for (std::size_t a = 0; a < n_atoms; ++a) {
        const DenseTensor c = atom_lowering(a, n_atoms);        // |g><e|
        const DenseTensor proj_e = matmul(dagger(c), c);        // |e><e|
        DenseTensor term = proj_e;
        term *= cplx(-deltas[a], 0.0);
        h += term;
        DenseTensor drive = c;
        drive *= -omegas[a] / 2.0;
        h += drive;
        DenseTensor drive_hc = dagger(c);
        drive_hc *= -std::conj(omegas[a]) / 2.0;
        h += drive_hc;
    }
    return h;
}

DenseTensor build_step_generator(const ExperimentConfig& cfg, const BinOperators& ops) {
    cfg.validate();
    const std::size_t ds = cfg.system_dim();
    const std::size_t db = cfg.bin_dim();
    if (ops.bin_dim != db || ops.dt != cfg.dt) {
        throw std::invalid_argument("bin operators do not match the configuration");
    }
    const DenseTensor id_sys = DenseTensor::identity(ds);
    const DenseTensor id_bin = DenseTensor::identity(db);
    const double gl = cfg.effective_gamma_l(), gr = cfg.effective_gamma_r();
    const cplx phase = std::exp(cplx(0.0, cfg.phi));

    DenseTensor g = kron3(build_system_hamiltonian(cfg), id_bin, id_bin);
    g *= cplx(0.0, -cfg.dt);

    auto add_emission = [&](const DenseTensor& sys_op, const DenseTensor& mode_dag, bool on_new,
                            cplx amp) {
        // amp * B^dag c - conj: both added so the generator stays anti-Hermitian
        DenseTensor term = on_new ? kron3(sys_op, mode_dag, id_bin)
                                  : kron3(sys_op, id_bin, mode_dag);
        DenseTensor term_hc = dagger(term);
        term *= amp;
        term_hc *= -std::conj(amp);
        g += term;
        g += term_hc;
    };

    if (cfg.setup == Setup::TwoAtoms) {
        const DenseTensor c1 = atom_lowering(0, 2), c2 = atom_lowering(1, 2);
        const DenseTensor bl_dag = dagger(ops.annihilate[0]);
        const DenseTensor br_dag = dagger(ops.annihilate[1]);
        add_emission(c1, bl_dag, true, std::sqrt(gl));           // B_L^dag(t_k) c_1
        add_emission(c1, br_dag, false, std::sqrt(gr) * phase);  // B_R^dag(t_{k-l}) c_1
        add_emission(c2, br_dag, true, std::sqrt(gr));           // B_R^dag(t_k) c_2
        add_emission(c2, bl_dag, false, std::sqrt(gl) * phase);  // B_L^dag(t_{k-l}) c_2
    } else {
        const DenseTensor c = atom_lowering(0, 1);
        const DenseTensor b_dag = dagger(ops.annihilate[0]);
        add_emission(c, b_dag, true, std::sqrt(gr));            // B^dag(t_k) c
        add_emission(c, b_dag, false, std::sqrt(gl) * phase);   // B^dag(t_{k-l}) c
    }
    return g;
}

StepUnitary build_step_unitary(const ExperimentConfig& cfg, const BinOperators& ops) {
    StepUnitary u;
    u.dims = {cfg.system_dim(), cfg.bin_dim(), cfg.bin_dim()};
    u.matrix = matrix_exponential(build_step_generator(cfg, ops));
    if (unitarity_residual(u.matrix) > 1e-12) {
        throw std::logic_error("step unitary failed the unitarity check");
    }
    const std::size_t ds = u.dims[0], db = u.dims[1];
    DenseTensor six = u.matrix.reshaped({ds, db, db, ds, db, db});
    // reorder (sys, new, old) -> (old, sys, new) on both bra and ket sides
    DenseTensor perm = six.transposed({{2, 0, 1, 5, 3, 4}});
    u.chain_gate = perm.reshaped({ds * db * db, ds * db * db});
    return u;
}

}  // namespace tbmps
