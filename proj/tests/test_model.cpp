#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tbmps/model.hpp"
#include "test_support.hpp"

#include <cmath>
#include <complex>

using namespace tbmps;
using testsup::max_abs_diff;

namespace {

const double kPi = std::acos(-1.0);

ExperimentConfig mirror_config() {
    ExperimentConfig cfg;
    cfg.setup = Setup::Mirror;
    cfg.gamma_l = 0.5;
    cfg.gamma_r = 0.5;
    cfg.omega1 = 1.5;
    cfg.tau = 1.0;
    cfg.dt = 0.1;
    return cfg;
}

ExperimentConfig two_atom_config() {
    ExperimentConfig cfg;
    cfg.setup = Setup::TwoAtoms;
    cfg.gamma_l = 0.5;
    cfg.gamma_r = 0.5;
    cfg.phi = kPi / 2.0;
    cfg.omega1 = 1.5;
    cfg.omega2 = cplx(1.5) * std::exp(cplx(0.0, -kPi / 2.0));
    cfg.tau = 0.5;
    cfg.dt = 0.1;
    return cfg;
}

DenseTensor apply_to_vector(const DenseTensor& op, const DenseTensor& v) {
    return contract_pair(op, {1}, v.reshaped({op.dim(1)}), {0});
}

// Total quanta: atomic excitations plus photons in both window bins.
DenseTensor excitation_operator(const ExperimentConfig& cfg, const BinOperators& ops) {
    const std::size_t n_atoms = cfg.setup == Setup::TwoAtoms ? 2 : 1;
    const std::size_t ds = cfg.system_dim(), db = cfg.bin_dim();
    DenseTensor n_sys({ds, ds});
    for (std::size_t a = 0; a < n_atoms; ++a) {
        const DenseTensor c = atom_lowering(a, n_atoms);
        n_sys += matmul(dagger(c), c);
    }
    DenseTensor total = kron(kron(n_sys, DenseTensor::identity(db)), DenseTensor::identity(db));
    total += kron(kron(DenseTensor::identity(ds), ops.total_number()), DenseTensor::identity(db));
    total += kron(kron(DenseTensor::identity(ds), DenseTensor::identity(db)), ops.total_number());
    return total;
}

}  // namespace

TEST_CASE("system hamiltonian vanishes without drive or detuning") {
    ExperimentConfig cfg = mirror_config();
    cfg.omega1 = 0.0;
    CHECK(build_system_hamiltonian(cfg).frobenius_norm() == doctest::Approx(0.0));
}

TEST_CASE("resonant real drive gives -omega/2 sigma_x") {
    ExperimentConfig cfg = mirror_config();
    cfg.omega1 = 1.5;
    auto h = build_system_hamiltonian(cfg);
    DenseTensor expect({2, 2});
    expect.at2(0, 1) = -0.75;
    expect.at2(1, 0) = -0.75;
    CHECK(max_abs_diff(h, expect) < 1e-14);
    auto evals = testsup::hermitian_eigenvalues(h);
    CHECK(evals[0] == doctest::Approx(-0.75).epsilon(1e-12));
    CHECK(evals[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("two-atom hamiltonian matches direct assembly for the phased drive") {
    auto cfg = two_atom_config();
    auto h = build_system_hamiltonian(cfg);

    DenseTensor expect({4, 4});
    const cplx o1 = cfg.omega1, o2 = cfg.omega2;
    // atom 1 on the slow index: |i1 i2>, index i1*2+i2
    expect.at2(0, 2) += -o1 / 2.0;
    expect.at2(2, 0) += -std::conj(o1) / 2.0;
    expect.at2(1, 3) += -o1 / 2.0;
    expect.at2(3, 1) += -std::conj(o1) / 2.0;
    expect.at2(0, 1) += -o2 / 2.0;
    expect.at2(1, 0) += -std::conj(o2) / 2.0;
    expect.at2(2, 3) += -o2 / 2.0;
    expect.at2(3, 2) += -std::conj(o2) / 2.0;
    CHECK(max_abs_diff(h, expect) < 1e-14);
    CHECK(std::abs(h.at2(0, 2) - cplx(-0.75)) < 1e-14);
    CHECK(std::abs(h.at2(0, 1) - cplx(0.0, 0.75)) < 1e-14);
}

TEST_CASE("bin operators satisfy the truncated noise algebra") {
    auto cfg = mirror_config();
    auto ops = BinOperators::build(cfg);
    const auto& b = ops.annihilate[0];

    DenseTensor vac({3});
    vac(0) = 1.0;
    auto bv = contract_pair(b, {1}, vac, {0});
    CHECK(bv.frobenius_norm() == doctest::Approx(0.0));

    for (std::size_t n = 0; n + 1 <= cfg.d_ph; ++n) {
        CHECK(std::abs(b.at2(n, n + 1) - cplx(std::sqrt((n + 1) * cfg.dt))) < 1e-14);
    }

    // [B, B^dag] = dt on the sub-block below the occupation cap
    auto comm = matmul(b, dagger(b));
    auto rev = matmul(dagger(b), b);
    for (std::size_t n = 0; n < cfg.d_ph; ++n) {
        CHECK(std::abs(comm.at2(n, n) - rev.at2(n, n) - cplx(cfg.dt)) < 1e-14);
    }
}

TEST_CASE("two-atom bins carry one operator per mode in (L, R) order") {
    auto cfg = two_atom_config();
    auto ops = BinOperators::build(cfg);
    REQUIRE(ops.annihilate.size() == 2);
    REQUIRE(ops.bin_dim == 9);
    // L acts on the slow factor
    CHECK(std::abs(ops.annihilate[0].at2(0, 3) - cplx(std::sqrt(cfg.dt))) < 1e-14);
    CHECK(std::abs(ops.annihilate[1].at2(0, 1) - cplx(std::sqrt(cfg.dt))) < 1e-14);
}

TEST_CASE("generator reduces to the system rotation when the coupling is off") {
    auto cfg = mirror_config();
    cfg.gamma_l = 0.0;
    cfg.gamma_r = 0.0;
    auto ops = BinOperators::build(cfg);
    auto g = build_step_generator(cfg, ops);
    DenseTensor expect = kron(kron(build_system_hamiltonian(cfg), DenseTensor::identity(3)),
                              DenseTensor::identity(3));
    expect *= cplx(0.0, -cfg.dt);
    CHECK(max_abs_diff(g, expect) < 1e-14);
}

TEST_CASE("mirror generator with gamma_l = 0 leaves the delayed bin untouched") {
    auto cfg = mirror_config();
    cfg.gamma_l = 0.0;
    cfg.gamma_r = 1.0;
    auto ops = BinOperators::build(cfg);
    auto g = build_step_generator(cfg, ops);

    DenseTensor c = atom_lowering(0, 1);
    DenseTensor two_site = kron(build_system_hamiltonian(cfg), DenseTensor::identity(3));
    two_site *= cplx(0.0, -cfg.dt);
    DenseTensor em = kron(c, dagger(ops.annihilate[0]));
    em *= std::sqrt(1.0);
    two_site += em;
    DenseTensor em_hc = dagger(em);
    em_hc *= -1.0;
    two_site += em_hc;
    DenseTensor expect = kron(two_site, DenseTensor::identity(3));
    CHECK(max_abs_diff(g, expect) < 1e-14);
}

TEST_CASE("one step moves gamma_r dt of population into the fresh bin") {
    auto cfg = mirror_config();
    cfg.omega1 = 0.0;
    cfg.gamma_l = 0.3;
    cfg.gamma_r = 0.7;
    auto ops = BinOperators::build(cfg);
    auto g = build_step_generator(cfg, ops);
    auto u_ref = testsup::expm_taylor_reference(g);

    DenseTensor psi({2 * 3 * 3});
    psi(1 * 9) = 1.0;  // |e, vac, vac>
    auto out = apply_to_vector(u_ref, psi);

    // photon number in the fresh bin
    DenseTensor n_new = kron(kron(DenseTensor::identity(2), ops.number[0]),
                             DenseTensor::identity(3));
    auto nv = apply_to_vector(n_new, out);
    cplx p_new = 0.0;
    for (std::size_t i = 0; i < nv.size(); ++i) p_new += std::conj(out(i)) * nv(i);
    CHECK(std::abs(p_new.real() - cfg.effective_gamma_r() * cfg.dt) < 2.0 * cfg.dt * cfg.dt);

    // and the exponential itself agrees with the reference
    auto u = build_step_unitary(cfg, ops);
    CHECK(max_abs_diff(u.matrix, u_ref) < 1e-11);
}

TEST_CASE("step unitary is the identity without drive or coupling") {
    auto cfg = mirror_config();
    cfg.omega1 = 0.0;
    cfg.gamma_l = 0.0;
    cfg.gamma_r = 0.0;
    auto ops = BinOperators::build(cfg);
    auto u = build_step_unitary(cfg, ops);
    CHECK(max_abs_diff(u.matrix, DenseTensor::identity(18)) < 1e-13);
}

TEST_CASE("step unitary is unitary for the phased two-atom drive") {
    auto cfg = two_atom_config();
    auto ops = BinOperators::build(cfg);
    auto u = build_step_unitary(cfg, ops);
    CHECK(unitarity_residual(u.matrix) < 1e-12);
    CHECK(unitarity_residual(u.chain_gate) < 1e-12);
}

TEST_CASE("ground state with vacuum input is stationary without drive") {
    auto cfg = two_atom_config();
    cfg.omega1 = 0.0;
    cfg.omega2 = 0.0;
    auto ops = BinOperators::build(cfg);
    auto u = build_step_unitary(cfg, ops);
    DenseTensor psi({4 * 9 * 9});
    psi(0) = 1.0;
    auto out = apply_to_vector(u.matrix, psi);
    CHECK(std::abs(out(0) - cplx(1.0)) < 1e-12);
}

TEST_CASE("total quanta are conserved without drive") {
    auto cfg = two_atom_config();
    cfg.omega1 = 0.0;
    cfg.omega2 = 0.0;
    cfg.delta1 = 0.4;
    auto ops = BinOperators::build(cfg);
    auto g = build_step_generator(cfg, ops);
    auto n = excitation_operator(cfg, ops);
    auto gn = matmul(g, n);
    auto ng = matmul(n, g);
    ng *= cplx(-1.0);
    gn += ng;
    CHECK(gn.frobenius_norm() < 1e-10);
}

TEST_CASE("phi is 2 pi periodic") {
    auto cfg = mirror_config();
    auto ops = BinOperators::build(cfg);
    cfg.phi = 0.7;
    auto u1 = build_step_unitary(cfg, ops);
    cfg.phi = 0.7 + 2.0 * kPi;
    auto u2 = build_step_unitary(cfg, ops);
    CHECK(max_abs_diff(u1.matrix, u2.matrix) < 1e-12);
}

TEST_CASE("atom relabeling with mode exchange is a symmetry of the generator") {
    auto cfg = two_atom_config();
    cfg.delta1 = 0.2;
    cfg.delta2 = -0.1;
    auto ops = BinOperators::build(cfg);
    auto g = build_step_generator(cfg, ops);

    ExperimentConfig swapped = cfg;
    std::swap(swapped.omega1, swapped.omega2);
    std::swap(swapped.delta1, swapped.delta2);
    std::swap(swapped.gamma_l, swapped.gamma_r);
    auto g_swapped = build_step_generator(swapped, ops);

    DenseTensor p_sys({4, 4});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) p_sys.at2(j * 2 + i, i * 2 + j) = 1.0;
    const std::size_t m = cfg.mode_dim();
    DenseTensor p_bin({m * m, m * m});
    for (std::size_t l = 0; l < m; ++l)
        for (std::size_t r = 0; r < m; ++r) p_bin.at2(r * m + l, l * m + r) = 1.0;
    DenseTensor p = kron(kron(p_sys, p_bin), p_bin);

    auto conjugated = matmul(matmul(p, g_swapped), dagger(p));
    CHECK(max_abs_diff(conjugated, g) < 1e-12);
}

TEST_CASE("chain-ordered gate is the permuted step unitary") {
    auto cfg = mirror_config();
    auto ops = BinOperators::build(cfg);
    auto u = build_step_unitary(cfg, ops);
    auto v = testsup::random_tensor({2, 3, 3}, testsup::rng());
    auto w1 = contract_pair(u.matrix, {1}, v.reshaped({18}), {0}).reshaped({2, 3, 3});
    auto vp = v.transposed({{2, 0, 1}});
    auto w2 = contract_pair(u.chain_gate, {1}, vp.reshaped({18}), {0}).reshaped({3, 2, 3});
    CHECK(max_abs_diff(w2, w1.transposed({{2, 0, 1}})) < 1e-13);
}

TEST_CASE("config validation catches the documented misuses") {
    auto cfg = mirror_config();
    cfg.tau = 5.0;
    cfg.dt = 0.3;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("not integral"),
                         std::invalid_argument);

    cfg = mirror_config();
    cfg.dt = 0.25;
    cfg.tau = 1.0;
    cfg.omega1 = 1.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("dt too coarse"),
                         std::invalid_argument);

    cfg = mirror_config();
    cfg.omega1 = 1.5;
    cfg.dt = 0.1;
    CHECK(!cfg.warnings().empty());
    cfg.omega1 = 0.5;
    cfg.dt = 0.05;
    CHECK(cfg.warnings().empty());

    cfg = mirror_config();
    cfg.chi = 1.0;
    CHECK(cfg.effective_gamma_l() == doctest::Approx(1.0));
    CHECK(cfg.effective_gamma_r() == doctest::Approx(0.0));
    cfg.chi = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
