#include "tbmps/mps.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace tbmps {

namespace {

// Schmidt values below this fraction of the largest at a bond are treated as
// exactly zero; the gate path never keeps directions below it.
constexpr double kLambdaFloor = 1e-12;
constexpr double kUnitarityTol = 1e-8;
constexpr char kSnapshotMagic[4] = {'T', 'B', 'M', 'P'};
constexpr std::uint8_t kSnapshotVersion = 1;

void scale_axis(DenseTensor& t, std::size_t axis, const std::vector<double>& weights) {
    // multiplies slice i of `axis` by weights[i]
    const auto& shape = t.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
    for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
    const std::size_t d = shape[axis];
    auto data = t.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < d; ++i) {
            const double w = weights[i];
            cplx* row = data.data() + (o * d + i) * inner;
            for (std::size_t k = 0; k < inner; ++k) row[k] *= w;
        }
}

double vec_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

void write_i64(std::ostream& out, std::int64_t v) {
    write_u64(out, static_cast<std::uint64_t>(v));
}

void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("snapshot truncated");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::int64_t read_i64(std::istream& in) {
    return static_cast<std::int64_t>(read_u64(in));
}

double read_f64(std::istream& in) {
    const std::uint64_t bits = read_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

double SchmidtSpectrum::entropy_bits() const {
    double s = 0.0;
    for (double w : weights) {
        if (w > 0.0) s -= w * std::log2(w);
    }
    return s;
}

double GateResult::total() const {
    return std::accumulate(discarded.begin(), discarded.end(), 0.0);
}

VidalChain VidalChain::new_product_state(std::span<const cplx> system_state, std::size_t bin_dim,
                                         std::size_t n_bins, TruncationPolicy policy) {
    if (bin_dim < 1) throw std::invalid_argument("bin dimension must be positive");
    double norm = 0.0;
    for (const cplx& v : system_state) norm += std::norm(v);
    if (std::abs(norm - 1.0) > 1e-10) {
        throw std::invalid_argument("system state must be normalized");
    }
    std::vector<std::pair<SiteLabel, std::vector<cplx>>> sites;
    sites.reserve(n_bins + 1);
    for (std::size_t i = 0; i < n_bins; ++i) {
        std::vector<cplx> vac(bin_dim, cplx(0.0));
        vac[0] = 1.0;
        sites.emplace_back(SiteLabel::time_bin(static_cast<std::int64_t>(i) -
                                               static_cast<std::int64_t>(n_bins)),
                           std::move(vac));
    }
    sites.emplace_back(SiteLabel::system(),
                       std::vector<cplx>(system_state.begin(), system_state.end()));
    return product_state(std::move(sites), policy);
}

VidalChain VidalChain::product_state(std::vector<std::pair<SiteLabel, std::vector<cplx>>> sites,
                                     TruncationPolicy policy) {
    if (sites.empty()) throw std::invalid_argument("empty chain");
    VidalChain chain;
    chain.policy_ = policy;
    for (auto& [label, amps] : sites) {
        DenseTensor tensor({1, amps.size(), 1});
        std::copy(amps.begin(), amps.end(), tensor.data().begin());
        chain.sites_.push_back({label, std::move(tensor)});
    }
    chain.lambda_.assign(chain.sites_.size() + 1, std::vector<double>{1.0});
    return chain;
}

std::size_t VidalChain::phys_dim(std::size_t pos) const {
    check_site(pos);
    return sites_[pos].tensor.dim(1);
}

const SiteLabel& VidalChain::label(std::size_t pos) const {
    check_site(pos);
    return sites_[pos].label;
}

const DenseTensor& VidalChain::site_tensor(std::size_t pos) const {
    check_site(pos);
    return sites_[pos].tensor;
}

const std::vector<double>& VidalChain::lambda(std::size_t bond) const {
    check_bond(bond);
    return lambda_[bond];
}

std::size_t VidalChain::bond_dim(std::size_t bond) const {
    check_bond(bond);
    return lambda_[bond].size();
}

std::size_t VidalChain::max_bond_dim() const {
    std::size_t d = 0;
    for (const auto& l : lambda_) d = std::max(d, l.size());
    return d;
}

std::size_t VidalChain::system_position() const {
    for (std::size_t i = 0; i < sites_.size(); ++i) {
        if (sites_[i].label.kind == SiteLabel::Kind::System) return i;
    }
    throw std::logic_error("chain has no system site");
}

std::optional<std::size_t> VidalChain::find_bin(std::int64_t bin_index) const {
    for (std::size_t i = 0; i < sites_.size(); ++i) {
        if (sites_[i].label.kind == SiteLabel::Kind::TimeBin &&
            sites_[i].label.bin_index == bin_index) {
            return i;
        }
    }
    return std::nullopt;
}

void VidalChain::append_vacuum_bin(std::int64_t bin_index, std::size_t dim) {
    const std::size_t dr = lambda_.back().size();
    if (dr != 1) throw std::logic_error("right chain boundary is not trivial");
    DenseTensor tensor({1, dim, 1});
    tensor(0) = 1.0;
    sites_.push_back({SiteLabel::time_bin(bin_index), std::move(tensor)});
    lambda_.push_back({1.0});
}

GateResult VidalChain::apply_gate_window(std::size_t first, const DenseTensor& u,
                                         bool verify_unitarity) {
    if (u.rank() != 2 || u.dim(0) != u.dim(1)) {
        throw std::invalid_argument("gate must be a square rank-2 tensor");
    }
    std::size_t n = 0;
    if (first + 1 < sites_.size() && phys_dim(first) * phys_dim(first + 1) == u.dim(0)) {
        n = 2;
    } else if (first + 2 < sites_.size() &&
               phys_dim(first) * phys_dim(first + 1) * phys_dim(first + 2) == u.dim(0)) {
        n = 3;
    } else {
        throw std::invalid_argument("gate dimension matches no 2- or 3-site window at position " +
                                    std::to_string(first));
    }
    std::vector<std::size_t> out_dims;
    for (std::size_t s = 0; s < n; ++s) out_dims.push_back(phys_dim(first + s));
    return apply_window_impl(first, n, u, out_dims, false, verify_unitarity);
}

GateResult VidalChain::swap_adjacent(std::size_t left) {
    if (left + 1 >= sites_.size()) throw std::invalid_argument("swap window off chain end");
    // the permutation unitary on the pair acts as a transpose of the two
    // physical axes of the window tensor
    DenseTensor theta_bare =
        contract_pair(sites_[left].tensor, {2}, sites_[left + 1].tensor, {0});
    theta_bare = theta_bare.transposed({{0, 2, 1, 3}});
    return split_window(left, 2, std::move(theta_bare),
                        {phys_dim(left + 1), phys_dim(left)}, true);
}

GateResult VidalChain::apply_window_impl(std::size_t first, std::size_t n, const DenseTensor& u,
                                         const std::vector<std::size_t>& out_dims,
                                         bool swap_labels, bool verify_unitarity) {
    if (first + n > sites_.size()) throw std::invalid_argument("gate window off chain end");
    if (verify_unitarity && unitarity_residual(u) > kUnitarityTol) {
        throw std::invalid_argument("gate is not unitary within 1e-8");
    }

    // window tensor without the left Schmidt weights: B_first ... B_last
    DenseTensor theta_bare = sites_[first].tensor;
    for (std::size_t s = 1; s < n; ++s) {
        theta_bare = contract_pair(theta_bare, {theta_bare.rank() - 1},
                                   sites_[first + s].tensor, {0});
    }

    // apply u, given as [out..., in...], over the physical axes
    std::vector<std::size_t> u_shape(out_dims);
    std::size_t in_total = 1;
    for (std::size_t s = 0; s < n; ++s) {
        u_shape.push_back(theta_bare.dim(1 + s));
        in_total *= theta_bare.dim(1 + s);
    }
    if (u.dim(0) != in_total) throw std::invalid_argument("gate dimension mismatch");
    DenseTensor ut = u.reshaped(u_shape);
    std::vector<std::size_t> u_axes, t_axes;
    for (std::size_t s = 0; s < n; ++s) {
        u_axes.push_back(n + s);
        t_axes.push_back(1 + s);
    }
    DenseTensor applied = contract_pair(ut, u_axes, theta_bare, t_axes);  // [out..., Dl, Dr]
    std::vector<std::size_t> back(n + 2);
    back[0] = n;
    for (std::size_t s = 0; s < n; ++s) back[1 + s] = s;
    back[n + 1] = n + 1;
    theta_bare = applied.transposed(back);  // [Dl, out..., Dr]
    return split_window(first, n, std::move(theta_bare), out_dims, swap_labels);
}

GateResult VidalChain::split_window(std::size_t first, std::size_t n, DenseTensor theta_bare,
                                    const std::vector<std::size_t>& out_dims, bool swap_labels) {
    const std::size_t dl = theta_bare.dim(0);
    const std::size_t dr = theta_bare.dim(theta_bare.rank() - 1);
    DenseTensor theta = theta_bare;  // with the left weights, for the Schmidt split
    scale_axis(theta, 0, lambda_[first]);

    GateResult result;
    const double cutoff = std::max(policy_.cutoff, kLambdaFloor);

    if (n == 2) {
        SvdResult svd =
            svd_truncate(theta.reshaped({dl * out_dims[0], out_dims[1] * dr}), policy_.d_max,
                         cutoff);
        result.discarded.push_back(svd.discarded_weight);
        const std::size_t k = svd.singular_values.size();
        const double renorm = vec_norm(svd.singular_values);
        std::vector<double> mid(svd.singular_values);
        for (double& x : mid) x /= renorm;

        // left tensor from the bare window and the kept right isometry; the
        // inverse left weights cancel analytically
        DenseTensor flat = theta_bare.reshaped({dl * out_dims[0], out_dims[1] * dr});
        DenseTensor b0 = contract_pair(flat, {1}, svd.right_isometry.conjugated(), {1});
        b0 *= cplx(1.0 / renorm, 0.0);
        sites_[first].tensor = b0.reshaped({dl, out_dims[0], k});
        sites_[first + 1].tensor = svd.right_isometry.reshaped({k, out_dims[1], dr});
        lambda_[first + 1] = std::move(mid);
    } else {
        SvdResult svd1 =
            svd_truncate(theta.reshaped({dl * out_dims[0], out_dims[1] * out_dims[2] * dr}),
                         policy_.d_max, cutoff);
        result.discarded.push_back(svd1.discarded_weight);
        const std::size_t k1 = svd1.singular_values.size();
        const double renorm1 = vec_norm(svd1.singular_values);
        std::vector<double> mid1(svd1.singular_values);
        for (double& x : mid1) x /= renorm1;

        DenseTensor flat =
            theta_bare.reshaped({dl * out_dims[0], out_dims[1] * out_dims[2] * dr});
        DenseTensor b0 = contract_pair(flat, {1}, svd1.right_isometry.conjugated(), {1});
        b0 *= cplx(1.0 / renorm1, 0.0);

        // second split: the remainder in units of the new bond weights is
        // exactly the kept right isometry
        DenseTensor rest = svd1.right_isometry;  // [k1, d2*d3*Dr]
        std::vector<double> sigma1(mid1);
        DenseTensor weighted = rest;
        scale_axis(weighted, 0, sigma1);
        SvdResult svd2 =
            svd_truncate(weighted.reshaped({k1 * out_dims[1], out_dims[2] * dr}), policy_.d_max,
                         cutoff);
        result.discarded.push_back(svd2.discarded_weight);
        const std::size_t k2 = svd2.singular_values.size();
        const double renorm2 = vec_norm(svd2.singular_values);
        std::vector<double> mid2(svd2.singular_values);
        for (double& x : mid2) x /= renorm2;

        DenseTensor b1 = contract_pair(rest.reshaped({k1 * out_dims[1], out_dims[2] * dr}), {1},
                                       svd2.right_isometry.conjugated(), {1});
        b1 *= cplx(1.0 / renorm2, 0.0);

        sites_[first].tensor = b0.reshaped({dl, out_dims[0], k1});
        sites_[first + 1].tensor = b1.reshaped({k1, out_dims[1], k2});
        sites_[first + 2].tensor = svd2.right_isometry.reshaped({k2, out_dims[2], dr});
        lambda_[first + 1] = std::move(mid1);
        lambda_[first + 2] = std::move(mid2);
    }

    if (swap_labels) {
        std::swap(sites_[first].label, sites_[first + 1].label);
    }
    return result;
}

SchmidtSpectrum VidalChain::schmidt_spectrum(std::size_t bond) const {
    check_bond(bond);
    SchmidtSpectrum s;
    s.bond_position = bond;
    s.weights.reserve(lambda_[bond].size());
    for (double l : lambda_[bond]) s.weights.push_back(l * l);
    std::sort(s.weights.begin(), s.weights.end(), std::greater<double>());
    return s;
}

cplx VidalChain::local_expectation(std::size_t site, const DenseTensor& op) const {
    check_site(site);
    const std::size_t d = phys_dim(site);
    if (op.rank() != 2 || op.dim(0) != d || op.dim(1) != d) {
        throw std::invalid_argument("operator dimension mismatch: op " + op.shape_string() +
                                    " on site of dimension " + std::to_string(d));
    }
    const DenseTensor& b = sites_[site].tensor;
    // sum_{a,p,q,b} L[a]^2 conj(B[a,q,b]) op[q,p] B[a,p,b]
    DenseTensor opb = contract_pair(op, {1}, b, {1});    // [q, a, b]
    DenseTensor weighted = opb.transposed({{1, 0, 2}});  // [a, q, b]
    std::vector<double> lam2;
    for (double l : lambda_[site]) lam2.push_back(l * l);
    scale_axis(weighted, 0, lam2);
    DenseTensor bc = b.conjugated();
    cplx out = 0.0;
    for (std::size_t i = 0; i < weighted.size(); ++i) out += bc(i) * weighted(i);
    return out;
}

cplx VidalChain::two_point_correlation(std::size_t site_a, const DenseTensor& op_a,
                                       std::size_t site_b, const DenseTensor& op_b) const {
    check_site(site_a);
    check_site(site_b);
    if (site_a == site_b) throw std::invalid_argument("two_point_correlation needs distinct sites");
    const std::size_t lo = std::min(site_a, site_b), hi = std::max(site_a, site_b);
    const DenseTensor& op_lo = site_a < site_b ? op_a : op_b;
    const DenseTensor& op_hi = site_a < site_b ? op_b : op_a;
    if (op_lo.dim(0) != phys_dim(lo) || op_hi.dim(0) != phys_dim(hi)) {
        throw std::invalid_argument("operator dimension mismatch in two_point_correlation");
    }

    const std::size_t dl = lambda_[lo].size();
    DenseTensor env({dl, dl});
    for (std::size_t i = 0; i < dl; ++i) env.at2(i, i) = lambda_[lo][i] * lambda_[lo][i];

    for (std::size_t s = lo; s <= hi; ++s) {
        const DenseTensor& b = sites_[s].tensor;
        DenseTensor ket = b;
        if (s == lo) {
            ket = contract_pair(op_lo, {1}, b, {1}).transposed({{1, 0, 2}});
        } else if (s == hi) {
            ket = contract_pair(op_hi, {1}, b, {1}).transposed({{1, 0, 2}});
        }
        DenseTensor tmp = contract_pair(env, {1}, ket, {0});       // [a', q, b]
        env = contract_pair(b.conjugated(), {0, 1}, tmp, {0, 1});  // [b', b]
    }
    cplx out = 0.0;
    for (std::size_t i = 0; i < env.dim(0); ++i) out += env.at2(i, i);
    return out;
}

DenseTensor VidalChain::contract_window_density(std::size_t first, std::size_t last,
                                                std::size_t dense_limit) const {
    check_site(first);
    check_site(last);
    if (last < first) throw std::invalid_argument("empty density window");
    std::size_t dim = 1;
    for (std::size_t s = first; s <= last; ++s) {
        dim *= phys_dim(s);
        if (dim > dense_limit) {
            throw std::invalid_argument("density window exceeds dense limit of " +
                                        std::to_string(dense_limit));
        }
    }

    // W[a, P, b]; rho = sum_a L[a]^2 W W^dag closed with the right identity
    DenseTensor w = sites_[first].tensor;
    for (std::size_t s = first + 1; s <= last; ++s) {
        w = contract_pair(w, {w.rank() - 1}, sites_[s].tensor, {0});
    }
    w = w.reshaped({lambda_[first].size(), dim, w.dim(w.rank() - 1)});
    DenseTensor wl = w;
    std::vector<double> lam2;
    for (double l : lambda_[first]) lam2.push_back(l * l);
    scale_axis(wl, 0, lam2);
    return contract_pair(wl, {0, 2}, w.conjugated(), {0, 2});  // [P, P']
}

DenseTensor VidalChain::contract_to_dense(std::size_t dense_limit) const {
    std::size_t dim = 1;
    for (std::size_t s = 0; s < sites_.size(); ++s) {
        dim *= phys_dim(s);
        if (dim > dense_limit) {
            throw std::invalid_argument("chain exceeds dense limit of " +
                                        std::to_string(dense_limit));
        }
    }
    DenseTensor acc = sites_[0].tensor;
    for (std::size_t s = 1; s < sites_.size(); ++s) {
        acc = contract_pair(acc, {acc.rank() - 1}, sites_[s].tensor, {0});
    }
    std::vector<std::size_t> shape;
    for (std::size_t s = 0; s < sites_.size(); ++s) shape.push_back(phys_dim(s));
    return acc.reshaped(shape);
}

double VidalChain::norm_full() const {
    return norm_window(0, sites_.size() - 1);
}

double VidalChain::norm_window(std::size_t first, std::size_t last) const {
    check_site(first);
    check_site(last);
    const std::size_t dl = lambda_[first].size();
    DenseTensor env({dl, dl});
    for (std::size_t i = 0; i < dl; ++i) env.at2(i, i) = lambda_[first][i] * lambda_[first][i];
    for (std::size_t s = first; s <= last; ++s) {
        const DenseTensor& b = sites_[s].tensor;
        DenseTensor tmp = contract_pair(env, {1}, b, {0});
        env = contract_pair(b.conjugated(), {0, 1}, tmp, {0, 1});
    }
    cplx out = 0.0;
    for (std::size_t i = 0; i < env.dim(0); ++i) out += env.at2(i, i);
    return out.real();
}

double VidalChain::canonical_residual() const {
    // Residuals are measured in the state metric: deviations on a Schmidt
    // direction are weighted by its coefficients, so the number reflects the
    // error of the represented state rather than noise carried by directions
    // of near-zero weight.
    double worst = 0.0;
    for (std::size_t s = 0; s < sites_.size(); ++s) {
        const DenseTensor& b = sites_[s].tensor;
        const auto& ll = lambda_[s];
        const auto& lr = lambda_[s + 1];
        {
            // left condition: transferring diag(Lambda_l^2) through the site
            // reproduces diag(Lambda_r^2)
            DenseTensor weighted = b;
            std::vector<double> lam2;
            for (double l : ll) lam2.push_back(l * l);
            scale_axis(weighted, 0, lam2);
            DenseTensor p = contract_pair(weighted, {0, 1}, b.conjugated(), {0, 1});
            for (std::size_t i = 0; i < p.dim(0); ++i)
                for (std::size_t j = 0; j < p.dim(1); ++j) {
                    const cplx expect = i == j ? cplx(lr[i] * lr[i]) : cplx(0.0);
                    worst = std::max(worst, std::abs(p.at2(i, j) - expect));
                }
        }
        {
            // right condition: sum_{i, beta} B B^dag = identity on the left
            // bond, weighted by the left Schmidt coefficients
            DenseTensor p = contract_pair(b, {1, 2}, b.conjugated(), {1, 2});
            for (std::size_t i = 0; i < p.dim(0); ++i)
                for (std::size_t j = 0; j < p.dim(1); ++j) {
                    const cplx expect = i == j ? cplx(1.0) : cplx(0.0);
                    worst = std::max(worst, ll[i] * ll[j] * std::abs(p.at2(i, j) - expect));
                }
        }
    }
    return worst;
}

void VidalChain::save_snapshot(std::ostream& out) const {
    out.write(kSnapshotMagic, 4);
    out.put(static_cast<char>(kSnapshotVersion));
    write_u64(out, sites_.size());
    for (const Site& s : sites_) {
        out.put(s.label.kind == SiteLabel::Kind::System ? 0 : 1);
        write_i64(out, s.label.bin_index);
        for (std::size_t a = 0; a < 3; ++a) write_u64(out, s.tensor.dim(a));
        for (const cplx& v : s.tensor.data()) {
            write_f64(out, v.real());
            write_f64(out, v.imag());
        }
    }
    for (const auto& l : lambda_) {
        write_u64(out, l.size());
        for (double v : l) write_f64(out, v);
    }
}

VidalChain VidalChain::load_snapshot(std::istream& in, TruncationPolicy policy) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kSnapshotMagic, 4) != 0) {
        throw std::runtime_error("not a chain snapshot (bad magic)");
    }
    const int version = in.get();
    if (version != kSnapshotVersion) {
        throw std::runtime_error("unsupported snapshot version " + std::to_string(version));
    }
    VidalChain chain;
    chain.policy_ = policy;
    const std::uint64_t n = read_u64(in);
    chain.sites_.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        Site site;
        const int kind = in.get();
        site.label.kind = kind == 0 ? SiteLabel::Kind::System : SiteLabel::Kind::TimeBin;
        site.label.bin_index = read_i64(in);
        std::vector<std::size_t> shape(3);
        for (auto& d : shape) d = read_u64(in);
        site.tensor = DenseTensor(shape);
        for (cplx& v : site.tensor.data()) {
            const double re = read_f64(in);
            const double im = read_f64(in);
            v = {re, im};
        }
        chain.sites_.push_back(std::move(site));
    }
    chain.lambda_.resize(n + 1);
    for (auto& l : chain.lambda_) {
        l.resize(read_u64(in));
        for (double& v : l) v = read_f64(in);
    }
    if (!in) throw std::runtime_error("snapshot truncated");
    return chain;
}

void VidalChain::check_bond(std::size_t bond) const {
    if (bond > sites_.size()) throw std::out_of_range("bond index out of range");
}

void VidalChain::check_site(std::size_t pos) const {
    if (pos >= sites_.size()) throw std::out_of_range("site index out of range");
}

}  // namespace tbmps
