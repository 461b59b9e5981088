#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "graphmerge/common.hpp"

namespace graphmerge {

/// Compressed sparse row matrix of doubles. Column indices inside a row
/// are strictly increasing.
class SparseMatrix {
 public:
  using Entry = std::pair<Index, double>;

  SparseMatrix() = default;
  /// All-zero rows x cols matrix.
  SparseMatrix(std::size_t rows, std::size_t cols);

  /// Entries of each row may come in any order; duplicates are summed.
  static SparseMatrix from_rows(std::size_t cols, std::vector<std::vector<Entry>> rows);
  static SparseMatrix from_csr(std::size_t cols, std::vector<std::uint64_t> row_ptr, std::vector<Index> col_idx,
                               std::vector<double> values);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const Index> row_indices(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], col_idx_.data() + row_ptr_[r + 1]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], values_.data() + row_ptr_[r + 1]};
  }
  std::size_t row_size(std::size_t r) const { return row_ptr_[r + 1] - row_ptr_[r]; }
  double at(std::size_t r, Index c) const;

  const std::vector<std::uint64_t>& row_ptr() const { return row_ptr_; }
  const std::vector<Index>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }

  /// this * dense
  Matrix multiply(const Matrix& dense) const;
  /// transpose(this) * dense, without materializing the transpose.
  Matrix multiply_transposed(const Matrix& dense) const;

  SparseMatrix transposed() const;

  bool operator==(const SparseMatrix& other) const = default;

 private:
  std::size_t cols_ = 0;
  std::vector<std::uint64_t> row_ptr_{0};
  std::vector<Index> col_idx_;
  std::vector<double> values_;
};

}  // namespace graphmerge
