#include "tbmps/observables.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace tbmps {

namespace {

// right-to-left transfer: G'[a, a'] over the bond left of `pos`
DenseTensor transfer_from_right(const VidalChain& chain, std::size_t pos, const DenseTensor* op,
                                const DenseTensor& g) {
    const DenseTensor& b = chain.site_tensor(pos);
    DenseTensor ket = contract_pair(b, {2}, g, {0});  // [a, i, b']
    if (op) {
        ket = contract_pair(*op, {1}, ket, {1}).transposed({{1, 0, 2}});  // [a, j, b']
    }
    return contract_pair(ket, {1, 2}, b.conjugated(), {1, 2});  // [a, a']
}

// closes a right environment against diag(Lambda^2) through one site with op
cplx close_left(const VidalChain& chain, std::size_t pos, const DenseTensor& op,
                const DenseTensor& g) {
    DenseTensor t = transfer_from_right(chain, pos, &op, g);
    const auto& lam = chain.lambda(pos);
    cplx out = 0.0;
    for (std::size_t i = 0; i < lam.size(); ++i) out += lam[i] * lam[i] * t.at2(i, i);
    return out;
}

std::vector<std::size_t> local_photon_counts(const BinOperators& ops) {
    DenseTensor total = ops.total_number();
    std::vector<std::size_t> counts(total.dim(0));
    for (std::size_t i = 0; i < counts.size(); ++i) {
        counts[i] = static_cast<std::size_t>(std::llround(total.at2(i, i).real()));
    }
    return counts;
}

}  // namespace

EntropyProfile entropy_profile(const VidalChain& chain, std::int64_t k, std::size_t ell,
                               double dt, double t_a_max) {
    EntropyProfile profile;
    profile.t = static_cast<double>(k) * dt;
    const auto p_a_cap = static_cast<std::int64_t>(std::llround(t_a_max / dt));
    for (std::int64_t p_a = 0; p_a <= p_a_cap; ++p_a) {
        std::size_t bond;
        if (p_a == 0) {
            bond = chain.system_position();
        } else {
            auto pos = chain.find_bin(k - p_a);
            if (!pos) break;  // cut older than the chain start: nothing left to split
            bond = *pos;
        }
        profile.t_a.push_back(static_cast<double>(p_a) * dt);
        profile.s_bits.push_back(chain.schmidt_spectrum(bond).entropy_bits());
        if (p_a == static_cast<std::int64_t>(ell)) {
            profile.index_circuit = profile.s_bits.size() - 1;
        }
    }
    return profile;
}

double PhotonDistribution::mean() const {
    double m = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) m += static_cast<double>(n) * p[n];
    return m;
}

PhotonDistribution delay_photon_distribution(const VidalChain& chain, std::size_t first,
                                             std::size_t last, const BinOperators& ops,
                                             std::size_t n_max) {
    if (last < first || last >= chain.n_sites()) {
        throw std::invalid_argument("invalid photon-count window");
    }
    const std::vector<std::size_t> counts = local_photon_counts(ops);
    const std::size_t n_buckets = n_max + 2;  // 0..n_max plus overflow

    // env[c][a, a'] with counting register c, shifted by each bin's photons
    const auto& lam0 = chain.lambda(first);
    std::vector<DenseTensor> env(n_buckets, DenseTensor({lam0.size(), lam0.size()}));
    for (std::size_t i = 0; i < lam0.size(); ++i) env[0].at2(i, i) = lam0[i] * lam0[i];

    for (std::size_t pos = first; pos <= last; ++pos) {
        const DenseTensor& b = chain.site_tensor(pos);
        if (b.dim(1) != counts.size()) {
            throw std::invalid_argument("window contains a non-bin site");
        }
        const std::size_t dr = b.dim(2);
        std::vector<DenseTensor> next(n_buckets, DenseTensor({dr, dr}));
        for (std::size_t i = 0; i < counts.size(); ++i) {
            // level slice: B_i[a, b]
            DenseTensor level({b.dim(0), dr});
            for (std::size_t a = 0; a < b.dim(0); ++a)
                for (std::size_t r = 0; r < dr; ++r)
                    level.at2(a, r) = b.data()[(a * counts.size() + i) * dr + r];
            DenseTensor level_c = level.conjugated();
            for (std::size_t c = 0; c < n_buckets; ++c) {
                if (env[c].frobenius_norm() == 0.0) continue;
                const std::size_t c_new = std::min(c + counts[i], n_buckets - 1);
                DenseTensor t = contract_pair(env[c], {1}, level, {0});   // [a', b]
                next[c_new] += contract_pair(level_c, {0}, t, {0}).transposed({{1, 0}});
            }
        }
        env = std::move(next);
    }

    PhotonDistribution dist;
    dist.p.assign(n_max + 1, 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < n_buckets; ++c) {
        cplx tr = 0.0;
        for (std::size_t i = 0; i < env[c].dim(0); ++i) tr += env[c].at2(i, i);
        if (c <= n_max) dist.p[c] = tr.real();
        total += tr.real();
    }
    double kept = 0.0;
    for (double v : dist.p) kept += v;
    dist.tail_mass = 1.0 - kept;  // overflow bucket plus numerical residue
    return dist;
}

std::vector<double> output_spectrum(const VidalChain& chain, std::int64_t k_max, std::size_t ell,
                                    const BinOperators& ops, std::span<const double> nu_grid,
                                    std::size_t m, bool incoherent, std::size_t channel) {
    const std::int64_t q = k_max - static_cast<std::int64_t>(ell) - 1;
    const auto q_pos_opt = chain.find_bin(q);
    if (!q_pos_opt) throw std::invalid_argument("reference output bin missing from the chain");
    if (m < 1 || !chain.find_bin(q - static_cast<std::int64_t>(m) + 1)) {
        throw std::invalid_argument("spectrum window M exceeds the available output bins");
    }
    const std::size_t q_pos = *q_pos_opt;

    const DenseTensor& b_op = ops.annihilate.at(channel);
    const DenseTensor b_dag = dagger(b_op);
    const double dt = ops.dt;

    std::vector<cplx> corr(m, 0.0);
    corr[0] = chain.local_expectation(q_pos, matmul(b_dag, b_op));

    // one right-to-left sweep: G carries the B^dag insertion at bin q
    DenseTensor g = DenseTensor::identity(chain.bond_dim(q_pos + 1));
    g = transfer_from_right(chain, q_pos, &b_dag, g);
    for (std::size_t p = 1; p < m; ++p) {
        const std::size_t pos = q_pos - p;  // bin q - p
        corr[p] = close_left(chain, pos, b_op, g);
        g = transfer_from_right(chain, pos, nullptr, g);
    }

    if (incoherent) {
        const cplx mean_dag = chain.local_expectation(q_pos, b_dag);
        for (std::size_t p = 0; p < m; ++p) {
            const cplx mean_b = chain.local_expectation(q_pos - p, b_op);
            corr[p] -= mean_dag * mean_b;
        }
    }

    std::vector<double> spec(nu_grid.size(), 0.0);
    for (std::size_t i = 0; i < nu_grid.size(); ++i) {
        cplx acc = 0.5 * corr[0];
        for (std::size_t p = 1; p < m; ++p) {
            acc += corr[p] * std::exp(cplx(0.0, nu_grid[i] * static_cast<double>(p) * dt));
        }
        spec[i] = 2.0 * acc.real() / dt;
    }
    return spec;
}

std::vector<double> g2_function(const VidalChain& chain, std::int64_t k_max, std::size_t ell,
                                const BinOperators& ops, std::size_t p_max, std::size_t channel,
                                double flux_floor) {
    const std::int64_t q = k_max - static_cast<std::int64_t>(ell) - 1;
    if (!chain.find_bin(q) || !chain.find_bin(q - static_cast<std::int64_t>(p_max))) {
        throw std::invalid_argument("g2 lag window exceeds the available bins");
    }
    const std::size_t q_pos = *chain.find_bin(q);

    const DenseTensor& b_op = ops.annihilate.at(channel);
    const DenseTensor b_dag = dagger(b_op);
    const DenseTensor n_op = matmul(b_dag, b_op);
    const double dt = ops.dt;

    const double denom = chain.local_expectation(q_pos, n_op).real();
    if (denom / dt <= flux_floor) {
        throw std::runtime_error("no output flux; g2 undefined");
    }

    std::vector<double> out(p_max + 1, 0.0);
    const DenseTensor pair_op = matmul(matmul(b_dag, b_dag), matmul(b_op, b_op));
    out[0] = chain.local_expectation(q_pos, pair_op).real() / (denom * denom);
    for (std::size_t p = 1; p <= p_max; ++p) {
        const cplx num = chain.two_point_correlation(q_pos - p, n_op, q_pos, n_op);
        out[p] = num.real() / (denom * denom);
    }
    return out;
}

std::vector<double> system_populations(const VidalChain& chain, Setup setup) {
    const std::size_t pos = chain.system_position();
    DenseTensor rho = chain.contract_window_density(pos, pos);
    if (setup == Setup::Mirror) {
        return {rho.at2(1, 1).real()};
    }
    return {rho.at2(2, 2).real() + rho.at2(3, 3).real(),
            rho.at2(1, 1).real() + rho.at2(3, 3).real()};
}

double output_flux(const VidalChain& chain, std::int64_t k_max, std::size_t ell,
                   const BinOperators& ops, std::size_t channel) {
    const std::int64_t q = k_max - static_cast<std::int64_t>(ell) - 1;
    const auto pos = chain.find_bin(q);
    if (!pos) throw std::invalid_argument("reference output bin missing from the chain");
    const DenseTensor& b_op = ops.annihilate.at(channel);
    return chain.local_expectation(*pos, matmul(dagger(b_op), b_op)).real() / ops.dt;
}

double window_photon_number(const VidalChain& chain, std::size_t first, std::size_t last,
                            const BinOperators& ops) {
    const DenseTensor total = ops.total_number();
    double n = 0.0;
    for (std::size_t pos = first; pos <= last; ++pos) {
        n += chain.local_expectation(pos, total).real();
    }
    return n;
}

}  // namespace tbmps
