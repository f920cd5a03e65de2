#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fpgnn {

/// Dense row-major tensor of doubles.
///
/// Rank 0 (scalar), 1 (vector) and 2 (matrix) are the ranks used by the
/// library; the container itself places no limit on rank.
class Tensor {
public:
    using Shape = std::vector<std::size_t>;

    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
    static Tensor identity(std::size_t n);
    /// Builds a matrix from nested braces; all rows must have equal length.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor vector(std::initializer_list<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t numel() const noexcept { return data_.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    double& operator[](std::size_t k) { return data_[k]; }
    const double& operator[](std::size_t k) const { return data_[k]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const double& operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    std::span<double> row(std::size_t i);
    std::span<const double> row(std::size_t i) const;

    /// Scalar value; requires numel() == 1.
    double item() const;
    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    bool all_finite() const noexcept;
    void fill(double v);

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_{};
    std::vector<double> data_{};
};

std::string shape_string(const Tensor::Shape& shape);

/// Largest absolute entrywise difference; throws ShapeError on mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Non-differentiable dense product with ascending-k accumulation per entry.
Tensor dense_matmul(const Tensor& a, const Tensor& b);
/// out += a b.
void matmul_accumulate(const Tensor& a, const Tensor& b, Tensor& out);
Tensor transpose(const Tensor& a);

/// Compressed-sparse-row matrix.
class SparseMatrix {
public:
    struct Triplet {
        std::size_t row;
        std::size_t col;
        double value;
    };

    SparseMatrix() = default;
    /// Validates the CSR invariants; throws IndexError / ShapeError on violation.
    SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
                 std::vector<std::size_t> col_indices, std::vector<double> values);

    /// Sums duplicates; result columns are sorted within each row.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                      std::vector<Triplet> triplets);
    static SparseMatrix from_dense(const Tensor& dense);
    static SparseMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nnz() const noexcept { return values_.size(); }

    const std::vector<std::size_t>& row_offsets() const noexcept { return row_offsets_; }
    const std::vector<std::size_t>& col_indices() const noexcept { return col_indices_; }
    const std::vector<double>& values() const noexcept { return values_; }

    std::span<const std::size_t> row_cols(std::size_t i) const;
    std::span<const double> row_values(std::size_t i) const;

    /// Entry lookup by binary search; zero if absent.
    double at(std::size_t i, std::size_t j) const;
    Tensor to_dense() const;
    SparseMatrix transposed() const;

    bool operator==(const SparseMatrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_offsets_{0};
    std::vector<std::size_t> col_indices_{};
    std::vector<double> values_{};
};

/// Non-differentiable sparse-dense product; entry (i,j) accumulates row i's
/// stored entries in ascending column order.
Tensor sparse_dense_matmul(const SparseMatrix& s, const Tensor& d);

} // namespace fpgnn
