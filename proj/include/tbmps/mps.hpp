#pragma once

#include "tbmps/tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace tbmps {

struct SiteLabel {
    enum class Kind { System, TimeBin };
    Kind kind = Kind::TimeBin;
    std::int64_t bin_index = 0;  // unused for System

    static SiteLabel system() { return {Kind::System, 0}; }
    static SiteLabel time_bin(std::int64_t p) { return {Kind::TimeBin, p}; }
    bool operator==(const SiteLabel&) const = default;
};

/// Squared Schmidt coefficients at one bond, descending, summing to 1.
struct SchmidtSpectrum {
    std::vector<double> weights;
    std::size_t bond_position = 0;
    double entropy_bits() const;
};

/// Per-bond discarded weight of one gate application.
struct GateResult {
    std::vector<double> discarded;
    double total() const;
};

struct TruncationPolicy {
    std::size_t d_max = 256;
    double cutoff = 1e-12;  // relative to the largest singular value
};

/// Canonical-form matrix product state over labeled sites. Site tensors are
/// stored right-weighted (the Vidal Gamma with the right-bond Schmidt vector
/// absorbed); bond Schmidt vectors Lambda live on every bond including both
/// chain ends. Updates follow the division-free scheme: re-splits contract
/// against the new isometries instead of inverting small Schmidt values, so
/// the canonical residual stays at rounding level over long runs. The system
/// site is tracked by its label; its position migrates as gates reorder sites.
class VidalChain {
public:
    VidalChain() = default;

    /// Product chain of `n_bins` vacuum bins (labels -n_bins..-1) followed by
    /// the system site carrying `system_state` (must be normalized).
    static VidalChain new_product_state(std::span<const cplx> system_state, std::size_t bin_dim,
                                        std::size_t n_bins, TruncationPolicy policy = {});

    /// Product chain from explicit per-site states.
    static VidalChain product_state(std::vector<std::pair<SiteLabel, std::vector<cplx>>> sites,
                                    TruncationPolicy policy = {});

    std::size_t n_sites() const { return sites_.size(); }
    std::size_t phys_dim(std::size_t pos) const;
    const SiteLabel& label(std::size_t pos) const;
    /// Right-weighted site tensor [Dl, d, Dr] (Gamma with Lambda[pos+1] absorbed).
    const DenseTensor& site_tensor(std::size_t pos) const;
    const std::vector<double>& lambda(std::size_t bond) const;
    std::size_t bond_dim(std::size_t bond) const;
    std::size_t max_bond_dim() const;
    std::size_t system_position() const;
    std::optional<std::size_t> find_bin(std::int64_t bin_index) const;

    TruncationPolicy& policy() { return policy_; }
    const TruncationPolicy& policy() const { return policy_; }

    void append_vacuum_bin(std::int64_t bin_index, std::size_t dim);

    /// Applies a unitary over 2 or 3 adjacent sites starting at `first` (the
    /// window length is inferred from the operator dimension) and restores
    /// canonical form by one or two truncated SVDs. Kept Schmidt vectors are
    /// renormalized; the weight lost at each touched bond is returned.
    /// `verify_unitarity` may be disabled for gates the caller has already
    /// checked (the evolution loop reuses one verified step unitary).
    GateResult apply_gate_window(std::size_t first, const DenseTensor& u,
                                 bool verify_unitarity = true);

    /// Exchanges the states and labels of sites (left, left+1) via the
    /// permutation unitary on their joint space.
    GateResult swap_adjacent(std::size_t left);

    SchmidtSpectrum schmidt_spectrum(std::size_t bond) const;
    cplx local_expectation(std::size_t site, const DenseTensor& op) const;
    cplx two_point_correlation(std::size_t site_a, const DenseTensor& op_a, std::size_t site_b,
                               const DenseTensor& op_b) const;

    /// Reduced density matrix of the physical window [first, last].
    DenseTensor contract_window_density(std::size_t first, std::size_t last,
                                        std::size_t dense_limit = 4096) const;

    /// Full state vector as a tensor with one axis per site, in chain order.
    DenseTensor contract_to_dense(std::size_t dense_limit = 1u << 22) const;

    /// <psi|psi> by a transfer contraction over the full chain.
    double norm_full() const;
    /// Transfer-contraction norm restricted to [first, last]; equals the full
    /// norm when every site outside the window is exactly canonical.
    double norm_window(std::size_t first, std::size_t last) const;

    /// Worst-case canonical-form residual over all sites: right-normalization
    /// of the site tensors and consistency of the left environment transfer
    /// with the stored Schmidt weights.
    double canonical_residual() const;

    void save_snapshot(std::ostream& out) const;
    static VidalChain load_snapshot(std::istream& in, TruncationPolicy policy = {});

private:
    struct Site {
        SiteLabel label;
        DenseTensor tensor;  // [Dl, d, Dr], right-weighted
    };

    std::vector<Site> sites_;
    std::vector<std::vector<double>> lambda_;  // n_sites + 1, ends trivial
    TruncationPolicy policy_;

    GateResult apply_window_impl(std::size_t first, std::size_t n_sites, const DenseTensor& u,
                                 const std::vector<std::size_t>& out_dims, bool swap_labels,
                                 bool verify_unitarity);
    GateResult split_window(std::size_t first, std::size_t n_sites, DenseTensor theta_bare,
                            const std::vector<std::size_t>& out_dims, bool swap_labels);
    void check_bond(std::size_t bond) const;
    void check_site(std::size_t pos) const;
};

}  // namespace tbmps
