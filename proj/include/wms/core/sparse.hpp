#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wms/core/error.hpp"

namespace wms {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double weight;
};

/// Square sparse matrix with strictly positive stored weights.
///
/// Built from coordinate triplets; stored as CSR with columns sorted within
/// each row. Duplicate (row, col) pairs are rejected.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  SparseMatrix(std::size_t n, std::vector<Triplet> entries) : n_(n) {
    std::ranges::sort(entries, [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    row_ptr_.assign(n + 1, 0);
    cols_.reserve(entries.size());
    weights_.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& e = entries[k];
      if (e.row >= n || e.col >= n) {
        throw Error("SparseMatrix: entry (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                    ") out of range for dimension " + std::to_string(n));
      }
      if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
        throw Error("SparseMatrix: weights must be finite and > 0");
      }
      if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col) {
        throw Error("SparseMatrix: duplicate entry (" + std::to_string(e.row) + "," +
                    std::to_string(e.col) + ")");
      }
      ++row_ptr_[e.row + 1];
      cols_.push_back(e.col);
      weights_.push_back(e.weight);
    }
    for (std::size_t r = 0; r < n; ++r) row_ptr_[r + 1] += row_ptr_[r];
  }

  static SparseMatrix identity(std::size_t n) {
    std::vector<Triplet> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return SparseMatrix(n, std::move(t));
  }

  std::size_t dimension() const { return n_; }
  std::size_t nnz() const { return cols_.size(); }

  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {cols_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_weights(std::size_t r) const {
    return {weights_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  /// Stored weight at (r, c), or 0 when absent.
  double at(std::size_t r, std::size_t c) const {
    const auto cols = row_cols(r);
    const auto it = std::ranges::lower_bound(cols, c);
    if (it == cols.end() || *it != c) return 0.0;
    return row_weights(r)[static_cast<std::size_t>(it - cols.begin())];
  }

  std::vector<Triplet> entries() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::size_t r = 0; r < n_; ++r) {
      const auto cols = row_cols(r);
      const auto w = row_weights(r);
      for (std::size_t k = 0; k < cols.size(); ++k) out.push_back({r, cols[k], w[k]});
    }
    return out;
  }

  double row_sum(std::size_t r) const {
    double s = 0.0;
    for (double w : row_weights(r)) s += w;
    return s;
  }

  bool is_symmetric() const {
    for (std::size_t r = 0; r < n_; ++r) {
      const auto cols = row_cols(r);
      const auto w = row_weights(r);
      for (std::size_t k = 0; k < cols.size(); ++k)
        if (at(cols[k], r) != w[k]) return false;
    }
    return true;
  }

  bool is_row_stochastic(double tol = 1e-9) const {
    for (std::size_t r = 0; r < n_; ++r)
      if (std::abs(row_sum(r) - 1.0) > tol) return false;
    return true;
  }

  /// Same sparsity pattern with every weight replaced by f(weight).
  template <typename F>
  SparseMatrix map_weights(F&& f) const {
    SparseMatrix out = *this;
    for (double& w : out.weights_) w = f(w);
    return out;
  }

  /// Same pattern with row r scaled by scale[r].
  SparseMatrix scale_rows(std::span<const double> scale) const {
    SparseMatrix out = *this;
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out.weights_[k] *= scale[r];
    return out;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> cols_;
  std::vector<double> weights_;
};

/// out[i] = sum_j T[i,j] * v[j].
inline std::vector<double> sparse_matvec(const SparseMatrix& t, std::span<const double> v) {
  if (v.size() != t.dimension()) {
    throw Error("sparse_matvec: vector length " + std::to_string(v.size()) +
                " != matrix dimension " + std::to_string(t.dimension()));
  }
  std::vector<double> out(t.dimension(), 0.0);
  for (std::size_t r = 0; r < t.dimension(); ++r) {
    const auto cols = t.row_cols(r);
    const auto w = t.row_weights(r);
    double s = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k) s += w[k] * v[cols[k]];
    out[r] = s;
  }
  return out;
}

/// Element-wise power w -> w^beta on stored weights (beta >= 1).
inline SparseMatrix hadamard_power(const SparseMatrix& a, double beta) {
  if (!(beta >= 1.0) || !std::isfinite(beta)) {
    throw Error("hadamard_power: beta must be >= 1, got " + std::to_string(beta));
  }
  for (std::size_t r = 0; r < a.dimension(); ++r)
    for (double w : a.row_weights(r))
      if (w > 1.0) throw Error("hadamard_power: weights must lie in (0, 1]");
  if (beta == 1.0) return a;
  // Clamp keeps stored weights strictly positive when w^beta underflows.
  return a.map_weights([beta](double w) {
    return std::max(std::pow(w, beta), std::numeric_limits<double>::min());
  });
}

}  // namespace wms
