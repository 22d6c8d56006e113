#include "tbmps/tensor.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

extern "C" void openblas_set_num_threads(int);

namespace tbmps {

namespace {

using EMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;
using EMap = Eigen::Map<Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using EConstMap =
    Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), cplx(0.0, 0.0)) {}

DenseTensor DenseTensor::from_data(std::vector<std::size_t> shape, std::vector<cplx> data) {
    if (shape_product(shape) != data.size()) {
        throw std::invalid_argument("data length does not match shape product");
    }
    DenseTensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

DenseTensor DenseTensor::scalar(cplx value) {
    return from_data({}, {value});
}

DenseTensor DenseTensor::identity(std::size_t dim) {
    DenseTensor t({dim, dim});
    for (std::size_t i = 0; i < dim; ++i) t.data_[i * dim + i] = 1.0;
    return t;
}

std::size_t DenseTensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) throw std::out_of_range("axis out of range");
    return shape_[axis];
}

cplx& DenseTensor::at(std::span<const std::size_t> index) {
    return const_cast<cplx&>(std::as_const(*this).at(index));
}

const cplx& DenseTensor::at(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) throw std::invalid_argument("index rank mismatch");
    std::size_t flat = 0;
    for (std::size_t a = 0; a < index.size(); ++a) {
        if (index[a] >= shape_[a]) throw std::out_of_range("index out of range");
        flat = flat * shape_[a] + index[a];
    }
    return data_[flat];
}

cplx& DenseTensor::at2(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
}

const cplx& DenseTensor::at2(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
}

DenseTensor DenseTensor::reshaped(std::vector<std::size_t> new_shape) const {
    if (shape_product(new_shape) != data_.size()) {
        throw std::invalid_argument("reshape changes element count");
    }
    DenseTensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    return t;
}

DenseTensor DenseTensor::transposed(std::span<const std::size_t> perm) const {
    if (perm.size() != shape_.size()) throw std::invalid_argument("permutation rank mismatch");
    std::vector<bool> seen(perm.size(), false);
    for (std::size_t p : perm) {
        if (p >= perm.size() || seen[p]) throw std::invalid_argument("invalid axis permutation");
        seen[p] = true;
    }
    std::vector<std::size_t> new_shape(perm.size());
    for (std::size_t a = 0; a < perm.size(); ++a) new_shape[a] = shape_[perm[a]];

    DenseTensor out(new_shape);
    const std::size_t r = shape_.size();
    if (r == 0) {
        out.data_ = data_;
        return out;
    }
    // strides of the source tensor, gathered in output-axis order
    std::vector<std::size_t> src_stride(r, 1);
    for (std::size_t a = r - 1; a > 0; --a) src_stride[a - 1] = src_stride[a] * shape_[a];
    std::vector<std::size_t> gather(r);
    for (std::size_t a = 0; a < r; ++a) gather[a] = src_stride[perm[a]];

    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    const std::size_t n = data_.size();
    for (std::size_t flat = 0; flat < n; ++flat) {
        out.data_[flat] = data_[src];
        for (std::size_t a = r; a-- > 0;) {
            ++idx[a];
            src += gather[a];
            if (idx[a] < new_shape[a]) break;
            src -= gather[a] * new_shape[a];
            idx[a] = 0;
        }
    }
    return out;
}

DenseTensor DenseTensor::conjugated() const {
    DenseTensor t = *this;
    for (cplx& v : t.data_) v = std::conj(v);
    return t;
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
    if (shape_ != other.shape_) throw std::invalid_argument("shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

DenseTensor& DenseTensor::operator*=(cplx factor) {
    for (cplx& v : data_) v *= factor;
    return *this;
}

bool DenseTensor::all_finite() const {
    for (const cplx& v : data_) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
    return true;
}

double DenseTensor::frobenius_norm() const {
    double s = 0.0;
    for (const cplx& v : data_) s += std::norm(v);
    return std::sqrt(s);
}

std::string DenseTensor::shape_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t a = 0; a < shape_.size(); ++a) {
        if (a) os << 'x';
        os << shape_[a];
    }
    os << ']';
    return os.str();
}

DenseTensor contract_pair(const DenseTensor& a, std::span<const std::size_t> a_axes,
                          const DenseTensor& b, std::span<const std::size_t> b_axes) {
    if (a_axes.size() != b_axes.size()) {
        throw std::invalid_argument("contract_pair: axis lists differ in length");
    }
    for (std::size_t i = 0; i < a_axes.size(); ++i) {
        if (a_axes[i] >= a.rank() || b_axes[i] >= b.rank()) {
            throw std::invalid_argument("contract_pair: axis out of range for " +
                                        a.shape_string() + " vs " + b.shape_string());
        }
        if (a.dim(a_axes[i]) != b.dim(b_axes[i])) {
            throw std::invalid_argument("contract_pair: dimension mismatch between " +
                                        a.shape_string() + " and " + b.shape_string());
        }
    }

    auto free_axes = [](const DenseTensor& t, std::span<const std::size_t> used) {
        std::vector<std::size_t> free;
        for (std::size_t ax = 0; ax < t.rank(); ++ax) {
            if (std::find(used.begin(), used.end(), ax) == used.end()) free.push_back(ax);
        }
        return free;
    };
    const std::vector<std::size_t> a_free = free_axes(a, a_axes);
    const std::vector<std::size_t> b_free = free_axes(b, b_axes);
    if (a_free.size() + a_axes.size() != a.rank() || b_free.size() + b_axes.size() != b.rank()) {
        throw std::invalid_argument("contract_pair: repeated axis in list");
    }

    std::vector<std::size_t> a_perm = a_free;
    a_perm.insert(a_perm.end(), a_axes.begin(), a_axes.end());
    std::vector<std::size_t> b_perm(b_axes.begin(), b_axes.end());
    b_perm.insert(b_perm.end(), b_free.begin(), b_free.end());

    const DenseTensor at = a.transposed(a_perm);
    const DenseTensor bt = b.transposed(b_perm);

    std::size_t m = 1, k = 1, n = 1;
    for (std::size_t ax : a_free) m *= a.dim(ax);
    for (std::size_t ax : a_axes) k *= a.dim(ax);
    for (std::size_t ax : b_free) n *= b.dim(ax);

    std::vector<std::size_t> out_shape;
    for (std::size_t ax : a_free) out_shape.push_back(a.dim(ax));
    for (std::size_t ax : b_free) out_shape.push_back(b.dim(ax));

    DenseTensor out(out_shape);
    EConstMap ma(at.data().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
    EConstMap mb(bt.data().data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
    EMap mo(out.data().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    mo.noalias() = ma * mb;
    return out;
}

DenseTensor contract_pair(const DenseTensor& a, std::initializer_list<std::size_t> a_axes,
                          const DenseTensor& b, std::initializer_list<std::size_t> b_axes) {
    return contract_pair(a, std::span<const std::size_t>(a_axes.begin(), a_axes.size()), b,
                         std::span<const std::size_t>(b_axes.begin(), b_axes.size()));
}

namespace {

// BLAS threading is pinned to one thread once per process: results stay
// bitwise reproducible and sweep workers do not oversubscribe cores.
void pin_blas_threads() {
    static const bool done = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    (void)done;
}

// thin SVD m = U S Vh via LAPACK divide-and-conquer, with a Jacobi fallback
// for the rare non-convergence
bool thin_svd(const DenseTensor& m, EMatrix& u, Eigen::VectorXd& sv, EMatrix& vh) {
    pin_blas_threads();
    const auto rows = static_cast<lapack_int>(m.dim(0));
    const auto cols = static_cast<lapack_int>(m.dim(1));
    const lapack_int keep = std::min(rows, cols);
    EMatrix a(rows, cols);  // column-major copy, overwritten by LAPACK
    for (lapack_int i = 0; i < rows; ++i)
        for (lapack_int j = 0; j < cols; ++j)
            a(i, j) = m.at2(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    u.resize(rows, keep);
    vh.resize(keep, cols);
    sv.resize(keep);
    const lapack_int info = LAPACKE_zgesdd(
        LAPACK_COL_MAJOR, 'S', rows, cols, reinterpret_cast<lapack_complex_double*>(a.data()),
        rows, sv.data(), reinterpret_cast<lapack_complex_double*>(u.data()), rows,
        reinterpret_cast<lapack_complex_double*>(vh.data()), keep);
    return info == 0;
}

}  // namespace

SvdResult svd_truncate(const DenseTensor& m, std::size_t d_max, double cutoff) {
    if (m.rank() != 2) throw std::invalid_argument("svd_truncate expects a rank-2 tensor");
    if (d_max < 1) throw std::invalid_argument("svd_truncate: d_max must be >= 1");
    if (cutoff < 0.0) throw std::invalid_argument("svd_truncate: cutoff must be >= 0");
    if (!m.all_finite()) throw std::invalid_argument("svd_truncate: non-finite input");

    const std::size_t rows = m.dim(0), cols = m.dim(1);
    EMatrix u, vh;
    Eigen::VectorXd sv;
    if (!thin_svd(m, u, sv, vh)) {
        EMatrix em(rows, cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                em(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m.at2(i, j);
        Eigen::JacobiSVD<EMatrix> svd(em, Eigen::ComputeThinU | Eigen::ComputeThinV);
        u = svd.matrixU();
        vh = svd.matrixV().adjoint();
        sv = svd.singularValues();
    }

    const std::size_t full = static_cast<std::size_t>(sv.size());
    if (full == 0 || sv(0) <= 0.0) throw std::runtime_error("zero matrix at bond");

    std::size_t keep = std::min(d_max, full);
    while (keep > 1 && sv(static_cast<Eigen::Index>(keep - 1)) / sv(0) < cutoff) --keep;

    double discarded = 0.0;
    for (std::size_t i = keep; i < full; ++i) {
        const double s = sv(static_cast<Eigen::Index>(i));
        discarded += s * s;
    }

    SvdResult res;
    res.singular_values.assign(sv.data(), sv.data() + keep);
    res.discarded_weight = discarded;
    res.left_isometry = DenseTensor({rows, keep});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < keep; ++j)
            res.left_isometry.at2(i, j) =
                u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    res.right_isometry = DenseTensor({keep, cols});
    for (std::size_t i = 0; i < keep; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            res.right_isometry.at2(i, j) =
                vh(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return res;
}

DenseTensor matrix_exponential(const DenseTensor& g) {
    if (g.rank() != 2 || g.dim(0) != g.dim(1)) {
        throw std::invalid_argument("matrix_exponential expects a square rank-2 tensor, got " +
                                    g.shape_string());
    }
    if (!g.all_finite()) throw std::invalid_argument("matrix_exponential: non-finite input");
    const std::size_t n = g.dim(0);
    EMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g.at2(i, j);

    // scale so the series converges fast, then square back
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
        a /= std::pow(2.0, squarings);
    }

    EMatrix result = EMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    EMatrix term = result;
    for (int k = 1; k <= 64; ++k) {
        term = (term * a) / static_cast<double>(k);
        result += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;

    DenseTensor out({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.at2(i, j) = result(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return out;
}

DenseTensor kron(const DenseTensor& a, const DenseTensor& b) {
    if (a.rank() != 2 || b.rank() != 2) throw std::invalid_argument("kron expects rank-2 tensors");
    const std::size_t ar = a.dim(0), ac = a.dim(1), br = b.dim(0), bc = b.dim(1);
    DenseTensor out({ar * br, ac * bc});
    for (std::size_t i = 0; i < ar; ++i)
        for (std::size_t j = 0; j < ac; ++j) {
            const cplx aij = a.at2(i, j);
            if (aij == cplx(0.0, 0.0)) continue;
            for (std::size_t k = 0; k < br; ++k)
                for (std::size_t l = 0; l < bc; ++l)
                    out.at2(i * br + k, j * bc + l) = aij * b.at2(k, l);
        }
    return out;
}

DenseTensor dagger(const DenseTensor& m) {
    if (m.rank() != 2) throw std::invalid_argument("dagger expects a rank-2 tensor");
    DenseTensor out({m.dim(1), m.dim(0)});
    for (std::size_t i = 0; i < m.dim(0); ++i)
        for (std::size_t j = 0; j < m.dim(1); ++j) out.at2(j, i) = std::conj(m.at2(i, j));
    return out;
}

DenseTensor matmul(const DenseTensor& a, const DenseTensor& b) {
    return contract_pair(a, {1}, b, {0});
}

double unitarity_residual(const DenseTensor& u) {
    if (u.rank() != 2 || u.dim(0) != u.dim(1)) {
        throw std::invalid_argument("unitarity_residual expects a square rank-2 tensor");
    }
    DenseTensor p = matmul(dagger(u), u);
    double worst = 0.0;
    const std::size_t n = u.dim(0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const cplx expect = (i == j) ? cplx(1.0, 0.0) : cplx(0.0, 0.0);
            worst = std::max(worst, std::abs(p.at2(i, j) - expect));
        }
    return worst;
}

}  // namespace tbmps
