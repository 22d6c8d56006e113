#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tbmps {

using cplx = std::complex<double>;

/// Dense complex tensor with row-major storage. Shapes are immutable after
/// construction; all operations return new tensors.
class DenseTensor {
public:
    DenseTensor() = default;

    /// Zero-filled tensor. An empty shape is a 0-dim tensor holding one value.
    explicit DenseTensor(std::vector<std::size_t> shape);
    static DenseTensor from_data(std::vector<std::size_t> shape, std::vector<cplx> data);
    static DenseTensor scalar(cplx value);
    static DenseTensor identity(std::size_t dim);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const;

    std::span<const cplx> data() const { return data_; }
    std::span<cplx> data() { return data_; }

    cplx& operator()(std::size_t i) { return data_[i]; }
    const cplx& operator()(std::size_t i) const { return data_[i]; }
    cplx& at(std::span<const std::size_t> index);
    const cplx& at(std::span<const std::size_t> index) const;
    cplx& at2(std::size_t i, std::size_t j);
    const cplx& at2(std::size_t i, std::size_t j) const;

    DenseTensor reshaped(std::vector<std::size_t> new_shape) const;
    DenseTensor transposed(std::span<const std::size_t> perm) const;
    DenseTensor conjugated() const;

    DenseTensor& operator+=(const DenseTensor& other);
    DenseTensor& operator*=(cplx factor);

    bool all_finite() const;
    double frobenius_norm() const;
    std::string shape_string() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<cplx> data_;
};

/// Contracts the listed axis pairs. The result carries the uncontracted axes
/// of a (in order) followed by those of b. Paired axes must match in length.
DenseTensor contract_pair(const DenseTensor& a, std::span<const std::size_t> a_axes,
                          const DenseTensor& b, std::span<const std::size_t> b_axes);

DenseTensor contract_pair(const DenseTensor& a, std::initializer_list<std::size_t> a_axes,
                          const DenseTensor& b, std::initializer_list<std::size_t> b_axes);

struct SvdResult {
    DenseTensor left_isometry;            // rows x kept, orthonormal columns
    std::vector<double> singular_values;  // descending, >= 0
    DenseTensor right_isometry;           // kept x cols, orthonormal rows
    double discarded_weight = 0.0;        // sum of squares of dropped values
};

/// Thin SVD of a rank-2 tensor keeping at most d_max singular values and
/// dropping trailing values with sigma_i/sigma_0 < cutoff. Kept values are
/// not renormalized here. An all-zero matrix is rejected ("zero matrix at
/// bond"): it signals a vanished state upstream.
SvdResult svd_truncate(const DenseTensor& m, std::size_t d_max, double cutoff);

/// exp(g) for a square rank-2 tensor via scaling-and-squaring with a series
/// expansion (absolute tolerance 1e-12). Deterministic for fixed input.
DenseTensor matrix_exponential(const DenseTensor& g);

/// Kronecker product of two rank-2 tensors (a on the slow index).
DenseTensor kron(const DenseTensor& a, const DenseTensor& b);

/// Conjugate transpose of a rank-2 tensor.
DenseTensor dagger(const DenseTensor& m);

DenseTensor matmul(const DenseTensor& a, const DenseTensor& b);

/// Max |(u^dag u - 1)_{ij}| for a square rank-2 tensor.
double unitarity_residual(const DenseTensor& u);

}  // namespace tbmps
