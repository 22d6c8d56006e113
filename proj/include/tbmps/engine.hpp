#pragma once

#include "tbmps/model.hpp"
#include "tbmps/mps.hpp"

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace tbmps {

/// Raised when the accumulated truncation weight exceeds the configured
/// budget; the message recommends a larger bond cap.
class TruncationBudgetError : public std::runtime_error {
public:
    TruncationBudgetError(double weight, double budget)
        : std::runtime_error("cumulative discarded weight " + std::to_string(weight) +
                             " exceeds the budget " + std::to_string(budget) +
                             "; increase d_max or loosen svd_cutoff"),
          weight_(weight) {}
    double weight() const { return weight_; }

private:
    double weight_;
};

/// Chain layout at step k: output bins (p < k - ell) on the left, the delay
/// line (p = k-ell .. k-1), the system, and one fresh vacuum bin k. Bin p
/// lives at position p + ell; only positions >= k change during step k.
struct EvolutionState {
    VidalChain chain;
    std::int64_t k = 0;
    std::size_t ell = 0;
    double cumulative_discarded = 0.0;

    std::size_t system_position() const { return static_cast<std::size_t>(k) + ell; }
    std::size_t fresh_position() const { return system_position() + 1; }
    /// positions of bins k-ell .. k-1
    std::pair<std::size_t, std::size_t> delay_window() const {
        return {static_cast<std::size_t>(k), static_cast<std::size_t>(k) + ell - 1};
    }
};

class Engine {
public:
    explicit Engine(const ExperimentConfig& cfg);

    EvolutionState initial_state() const;

    /// One stroboscopic step: route the delayed bin next to the system,
    /// apply the three-site unitary, restore the order, move the system past
    /// the fresh bin and append the next vacuum bin.
    void step(EvolutionState& state) const;

    const ExperimentConfig& config() const { return cfg_; }
    const BinOperators& bin_ops() const { return ops_; }
    const StepUnitary& unitary() const { return u_; }

private:
    ExperimentConfig cfg_;
    BinOperators ops_;
    StepUnitary u_;
    std::size_t ell_;
};

struct SeriesRow {
    double t = 0.0;
    double pe1 = 0.0;
    double pe2 = 0.0;
    double n_delay = 0.0;
    double norm = 0.0;
    double disc_weight = 0.0;
};

struct EntropyRow {
    double t = 0.0;
    double t_a = 0.0;
    double s_bits = 0.0;
};

struct ObservableSeries {
    std::vector<SeriesRow> rows;
    std::vector<EntropyRow> entropy;
};

using StepHook = std::function<void(const EvolutionState&, double t)>;

struct RunOptions {
    std::size_t record_stride = 1;
    bool record_timeseries = true;
    bool record_entropy = false;
    std::size_t entropy_stride = 1;   // in units of record_stride
    double entropy_t_a_max = -1.0;    // < 0: up to tau
};

struct RunResult {
    EvolutionState state;
    ObservableSeries series;
};

/// Evolves from t = 0 to t_max, firing hooks after every step and recording
/// the standard series. Deterministic for a fixed configuration. Throws
/// TruncationBudgetError when the discarded weight exceeds the budget.
RunResult run(const ExperimentConfig& cfg, const RunOptions& options = {},
              std::span<const StepHook> hooks = {});

}  // namespace tbmps
