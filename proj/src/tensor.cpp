#include "fpgnn/tensor.hpp"

#include "fpgnn/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

namespace fpgnn {

namespace {

#if defined(__AVX512F__)
constexpr std::size_t kLanes = 8;
#elif defined(__AVX__)
constexpr std::size_t kLanes = 4;
#else
constexpr std::size_t kLanes = 2;
#endif
using Vec = double __attribute__((vector_size(kLanes * sizeof(double))));

[[gnu::always_inline]] inline Vec load_vec(const double* p) {
    Vec v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

[[gnu::always_inline]] inline void store_vec(double* p, Vec v) { std::memcpy(p, &v, sizeof v); }

std::size_t product(const Tensor::Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

} // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (product(shape_) != data_.size()) {
        throw ShapeError("tensor shape " + shape_string(shape_) + " does not hold " +
                         std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows() needs a matrix, got " + shape_string(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols() needs a matrix, got " + shape_string(shape_));
    return shape_[1];
}

std::span<double> Tensor::row(std::size_t i) {
    const std::size_t c = cols();
    return std::span<double>(data_).subspan(i * c, c);
}

std::span<const double> Tensor::row(std::size_t i) const {
    const std::size_t c = cols();
    return std::span<const double>(data_).subspan(i * c, c);
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    // Exponent bits all ones marks inf or NaN; the integer form vectorizes.
    std::uint64_t bad = 0;
    for (double v : data_) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        bad |= static_cast<std::uint64_t>(((bits >> 52) & 0x7ff) == 0x7ff);
    }
    return bad == 0;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string shape_string(const Tensor::Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t k = 0; k < shape.size(); ++k) os << (k ? "x" : "") << shape[k];
    os << ']';
    return os.str();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    double m = 0.0;
    for (std::size_t k = 0; k < a.numel(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

void matmul_accumulate(const Tensor& a, const Tensor& b, Tensor& out) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (out.rank() != 2 || out.rows() != m || out.cols() != n) {
        throw ShapeError("matmul: output " + shape_string(out.shape()) + " for " + std::to_string(m) + "x" +
                         std::to_string(n));
    }
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = out.data().data();
    // 4 x 16 register tiles. Every entry accumulates over p in ascending
    // order with separate multiply and add, so results do not depend on the
    // tiling or the vector width.
    constexpr std::size_t kRows = 4, kCols = 2 * kLanes;
    std::size_t i = 0;
    for (; i + kRows <= m; i += kRows) {
        const double* ar = A + i * k;
        std::size_t j0 = 0;
        for (; j0 + kCols <= n; j0 += kCols) {
            Vec acc[kRows][2];
            for (std::size_t r = 0; r < kRows; ++r) {
                acc[r][0] = load_vec(C + (i + r) * n + j0);
                acc[r][1] = load_vec(C + (i + r) * n + j0 + kLanes);
            }
            for (std::size_t p = 0; p < k; ++p) {
                const Vec b0 = load_vec(B + p * n + j0);
                const Vec b1 = load_vec(B + p * n + j0 + kLanes);
                for (std::size_t r = 0; r < kRows; ++r) {
                    const double v = ar[r * k + p];
                    acc[r][0] += v * b0;
                    acc[r][1] += v * b1;
                }
            }
            for (std::size_t r = 0; r < kRows; ++r) {
                store_vec(C + (i + r) * n + j0, acc[r][0]);
                store_vec(C + (i + r) * n + j0 + kLanes, acc[r][1]);
            }
        }
        if (j0 == n) continue;
        for (std::size_t r = 0; r < kRows; ++r) {
            double* __restrict o = C + (i + r) * n;
            for (std::size_t p = 0; p < k; ++p) {
                const double v = ar[r * k + p];
                const double* __restrict br = B + p * n;
                for (std::size_t j = j0; j < n; ++j) o[j] += v * br[j];
            }
        }
    }
    for (; i < m; ++i) {
        double* __restrict o = C + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double v = A[i * k + p];
            if (v == 0.0) continue;
            const double* __restrict br = B + p * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += v * br[j];
        }
    }
}

Tensor dense_matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    Tensor out({a.rows(), b.cols()});
    matmul_accumulate(a, b, out);
    return out;
}

Tensor transpose(const Tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    Tensor t({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) t(j, i) = a(i, j);
    return t;
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
                           std::vector<std::size_t> col_indices, std::vector<double> values)
    : rows_(rows), cols_(cols), row_offsets_(std::move(row_offsets)), col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
    if (row_offsets_.size() != rows_ + 1 || row_offsets_.front() != 0) {
        throw ShapeError("CSR row offsets must have rows+1 entries starting at 0");
    }
    if (col_indices_.size() != values_.size() || row_offsets_.back() != values_.size()) {
        throw ShapeError("CSR final offset must equal nnz");
    }
    for (std::size_t i = 0; i < rows_; ++i) {
        if (row_offsets_[i + 1] < row_offsets_[i]) throw ShapeError("CSR row offsets must be nondecreasing");
        for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
            if (col_indices_[p] >= cols_) {
                throw IndexError("CSR column index " + std::to_string(col_indices_[p]) + " out of range [0," +
                                 std::to_string(cols_) + ")");
            }
            if (p > row_offsets_[i] && col_indices_[p] <= col_indices_[p - 1]) {
                throw IndexError("CSR column indices must strictly increase within a row");
            }
        }
    }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
    for (const auto& t : triplets) {
        if (t.row >= rows || t.col >= cols) {
            throw IndexError("triplet (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                             ") out of range");
        }
    }
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::size_t> offsets(rows + 1, 0);
    std::vector<std::size_t> cols_out;
    std::vector<double> vals;
    cols_out.reserve(triplets.size());
    vals.reserve(triplets.size());
    for (std::size_t k = 0; k < triplets.size(); ++k) {
        const auto& t = triplets[k];
        if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
            vals.back() += t.value;
            continue;
        }
        cols_out.push_back(t.col);
        vals.push_back(t.value);
        ++offsets[t.row + 1];
    }
    for (std::size_t i = 0; i < rows; ++i) offsets[i + 1] += offsets[i];
    return SparseMatrix(rows, cols, std::move(offsets), std::move(cols_out), std::move(vals));
}

SparseMatrix SparseMatrix::from_dense(const Tensor& dense) {
    std::vector<Triplet> trips;
    for (std::size_t i = 0; i < dense.rows(); ++i)
        for (std::size_t j = 0; j < dense.cols(); ++j)
            if (dense(i, j) != 0.0) trips.push_back({i, j, dense(i, j)});
    return from_triplets(dense.rows(), dense.cols(), std::move(trips));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    std::vector<std::size_t> offsets(n + 1), cols(n);
    std::iota(offsets.begin(), offsets.end(), std::size_t{0});
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::vector<double>(n, 1.0));
}

std::span<const std::size_t> SparseMatrix::row_cols(std::size_t i) const {
    return std::span<const std::size_t>(col_indices_).subspan(row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]);
}

std::span<const double> SparseMatrix::row_values(std::size_t i) const {
    return std::span<const double>(values_).subspan(row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]);
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
    const auto cols = row_cols(i);
    const auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return 0.0;
    return row_values(i)[static_cast<std::size_t>(it - cols.begin())];
}

Tensor SparseMatrix::to_dense() const {
    Tensor d({rows_, cols_});
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) d(i, col_indices_[p]) = values_[p];
    return d;
}

SparseMatrix SparseMatrix::transposed() const {
    std::vector<Triplet> trips;
    trips.reserve(nnz());
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p)
            trips.push_back({col_indices_[p], i, values_[p]});
    return from_triplets(cols_, rows_, std::move(trips));
}

Tensor sparse_dense_matmul(const SparseMatrix& s, const Tensor& d) {
    if (d.rank() != 2 || s.cols() != d.rows()) {
        throw ShapeError("spmm: [" + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) + "] x " +
                         shape_string(d.shape()));
    }
    const std::size_t n = d.cols();
    Tensor out({s.rows(), n});
    for (std::size_t i = 0; i < s.rows(); ++i) {
        double* o = &out(i, 0);
        const auto cols = s.row_cols(i);
        const auto vals = s.row_values(i);
        for (std::size_t p = 0; p < cols.size(); ++p) {
            const double v = vals[p];
            const double* dr = &d(cols[p], 0);
            for (std::size_t j = 0; j < n; ++j) o[j] += v * dr[j];
        }
    }
    return out;
}

} // namespace fpgnn
