#include "graphmerge/sparse.hpp"

#include <algorithm>
#include <string>

namespace graphmerge {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols) : cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_rows(std::size_t cols, std::vector<std::vector<Entry>> rows) {
  SparseMatrix m(0, cols);
  m.row_ptr_.assign(1, 0);
  m.row_ptr_.reserve(rows.size() + 1);
  for (auto& row : rows) {
    std::ranges::sort(row, {}, &Entry::first);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k].first >= cols) throw ValidationError("sparse entry column " + std::to_string(row[k].first) + " out of range");
      if (!m.col_idx_.empty() && m.col_idx_.size() > m.row_ptr_.back() && m.col_idx_.back() == row[k].first) {
        m.values_.back() += row[k].second;
        continue;
      }
      m.col_idx_.push_back(row[k].first);
      m.values_.push_back(row[k].second);
    }
    m.row_ptr_.push_back(m.values_.size());
  }
  return m;
}

SparseMatrix SparseMatrix::from_csr(std::size_t cols, std::vector<std::uint64_t> row_ptr, std::vector<Index> col_idx,
                                    std::vector<double> values) {
  if (row_ptr.empty() || row_ptr.front() != 0 || row_ptr.back() != col_idx.size() || col_idx.size() != values.size())
    throw ValidationError("inconsistent CSR arrays");
  for (std::size_t r = 0; r + 1 < row_ptr.size(); ++r) {
    if (row_ptr[r] > row_ptr[r + 1]) throw ValidationError("CSR row pointers are not monotone");
    for (auto k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      if (col_idx[k] >= cols) throw ValidationError("CSR column index out of range");
      if (k > row_ptr[r] && col_idx[k] <= col_idx[k - 1]) throw ValidationError("CSR columns not strictly increasing");
    }
  }
  SparseMatrix m;
  m.cols_ = cols;
  m.row_ptr_ = std::move(row_ptr);
  m.col_idx_ = std::move(col_idx);
  m.values_ = std::move(values);
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix m(0, n);
  m.row_ptr_.assign(1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    m.col_idx_.push_back(static_cast<Index>(i));
    m.values_.push_back(1.0);
    m.row_ptr_.push_back(i + 1);
  }
  return m;
}

double SparseMatrix::at(std::size_t r, Index c) const {
  const auto idx = row_indices(r);
  auto it = std::ranges::lower_bound(idx, c);
  if (it == idx.end() || *it != c) return 0.0;
  return values_[row_ptr_[r] + (it - idx.begin())];
}

Matrix SparseMatrix::multiply(const Matrix& dense) const {
  if (static_cast<std::size_t>(dense.rows()) != cols_)
    throw ValidationError("sparse multiply: " + std::to_string(cols_) + " columns vs " + std::to_string(dense.rows()) + " rows");
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows()), dense.cols());
  for (std::size_t r = 0; r < rows(); ++r) {
    auto dst = out.row(static_cast<Eigen::Index>(r));
    for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) dst.noalias() += values_[k] * dense.row(col_idx_[k]);
  }
  return out;
}

Matrix SparseMatrix::multiply_transposed(const Matrix& dense) const {
  if (static_cast<std::size_t>(dense.rows()) != rows())
    throw ValidationError("sparse transposed multiply: " + std::to_string(rows()) + " rows vs " + std::to_string(dense.rows()));
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(cols_), dense.cols());
  for (std::size_t r = 0; r < rows(); ++r) {
    const auto src = dense.row(static_cast<Eigen::Index>(r));
    for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out.row(col_idx_[k]).noalias() += values_[k] * src;
  }
  return out;
}

SparseMatrix SparseMatrix::transposed() const {
  std::vector<std::vector<Entry>> rows_t(cols_);
  for (std::size_t r = 0; r < rows(); ++r)
    for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) rows_t[col_idx_[k]].emplace_back(static_cast<Index>(r), values_[k]);
  return from_rows(rows(), std::move(rows_t));
}

}  // namespace graphmerge
