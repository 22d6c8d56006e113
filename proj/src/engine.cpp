#include "tbmps/engine.hpp"

#include "tbmps/observables.hpp"

#include <stdexcept>

namespace tbmps {

Engine::Engine(const ExperimentConfig& cfg)
    : cfg_(cfg), ops_(BinOperators::build(cfg)), u_(build_step_unitary(cfg, ops_)),
      ell_(cfg.ell()) {}

EvolutionState Engine::initial_state() const {
    EvolutionState state;
    state.ell = ell_;
    const auto sys = cfg_.initial_system_state();
    state.chain = VidalChain::new_product_state(sys, cfg_.bin_dim(), ell_,
                                                {cfg_.d_max, cfg_.svd_cutoff});
    state.chain.append_vacuum_bin(0, cfg_.bin_dim());
    return state;
}

void Engine::step(EvolutionState& state) const {
    VidalChain& chain = state.chain;
    const auto k = static_cast<std::size_t>(state.k);
    const std::size_t sys_pos = state.system_position();
    const std::size_t fresh_pos = state.fresh_position();
    if (fresh_pos >= chain.n_sites() ||
        !(chain.label(fresh_pos) == SiteLabel::time_bin(state.k))) {
        throw std::logic_error("fresh vacuum bin missing at the chain end");
    }

    double acc = 0.0;
    // bring bin k-ell from position k next to the system
    for (std::size_t pos = k; pos + 1 < sys_pos; ++pos) {
        acc += chain.swap_adjacent(pos).total();
    }
    // local three-site unitary on (bin k-ell, system, bin k)
    acc += chain.apply_gate_window(sys_pos - 1, u_.chain_gate, false).total();
    // restore the delay-line order
    for (std::size_t pos = sys_pos - 1; pos-- > k;) {
        acc += chain.swap_adjacent(pos).total();
    }
    // move the system past the bin it just used and grow the chain
    acc += chain.swap_adjacent(sys_pos).total();
    chain.append_vacuum_bin(state.k + 1, cfg_.bin_dim());

    state.k += 1;
    state.cumulative_discarded += acc;
}

RunResult run(const ExperimentConfig& cfg, const RunOptions& options,
              std::span<const StepHook> hooks) {
    cfg.validate();
    Engine engine(cfg);
    RunResult result;
    result.state = engine.initial_state();

    const std::size_t n_steps = cfg.n_steps();
    const double t_a_max = options.entropy_t_a_max < 0.0 ? cfg.tau : options.entropy_t_a_max;
    std::size_t records = 0;

    for (std::size_t k = 0; k < n_steps; ++k) {
        engine.step(result.state);
        if (result.state.cumulative_discarded > cfg.trunc_budget &&
            result.state.cumulative_discarded > 1e-15) {
            throw TruncationBudgetError(result.state.cumulative_discarded, cfg.trunc_budget);
        }
        const double t = static_cast<double>(k + 1) * cfg.dt;
        for (const StepHook& hook : hooks) hook(result.state, t);

        const bool last = k + 1 == n_steps;
        if ((k + 1) % options.record_stride != 0 && !last) continue;
        ++records;

        if (options.record_timeseries) {
            SeriesRow row;
            row.t = t;
            const auto pe = system_populations(result.state.chain, cfg.setup);
            row.pe1 = pe[0];
            row.pe2 = pe.size() > 1 ? pe[1] : 0.0;
            const auto [first, lastpos] = result.state.delay_window();
            row.n_delay =
                window_photon_number(result.state.chain, first, lastpos, engine.bin_ops());
            row.norm = result.state.chain.norm_window(first, result.state.chain.n_sites() - 1);
            row.disc_weight = result.state.cumulative_discarded;
            result.series.rows.push_back(row);
        }
        if (options.record_entropy && (records % options.entropy_stride == 0 || last)) {
            const auto profile = entropy_profile(result.state.chain, result.state.k,
                                                 result.state.ell, cfg.dt, t_a_max);
            for (std::size_t i = 0; i < profile.t_a.size(); ++i) {
                result.series.entropy.push_back({t, profile.t_a[i], profile.s_bits[i]});
            }
        }
    }
    return result;
}

}  // namespace tbmps
