#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pepsmc {

// Dense real tensor with a fixed row-major layout (last index fastest).
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<long> dims);
  DenseTensor(std::vector<long> dims, std::vector<double> data);

  long rank() const { return static_cast<long>(dims_.size()); }
  const std::vector<long>& dims() const { return dims_; }
  long dim(long axis) const { return dims_.at(static_cast<size_t>(axis)); }
  long size() const { return static_cast<long>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& at(const std::vector<long>& idx);
  double at(const std::vector<long>& idx) const;
  long flat_index(const std::vector<long>& idx) const;

  double max_abs() const;
  double frobenius_norm() const;
  bool all_finite() const;

  void scale(double factor);

  bool operator==(const DenseTensor& other) const {
    return dims_ == other.dims_ && data_ == other.data_;
  }

 private:
  std::vector<long> dims_;
  std::vector<double> data_;
};

struct SvdResult {
  DenseTensor u;                        // row dims of the split + [k]
  std::vector<double> singular_values;  // descending, non-negative
  DenseTensor vt;                       // [k] + column dims of the split
  double truncation_error = 0.0;        // sqrt(sum discarded s^2 / sum all s^2)
};

// Entrywise permutation of axes: result dims[k] = t.dims[order[k]].
DenseTensor permute(const DenseTensor& t, const std::vector<long>& order);

// Reinterpret with new dims of the same total size (data shared layout).
DenseTensor reshape(const DenseTensor& t, std::vector<long> new_dims);

// Pairwise contraction over the listed axes. Result carries a's free axes
// (in order) followed by b's free axes. Empty axis lists give the outer
// product.
DenseTensor contract(const DenseTensor& a, const std::vector<long>& axes_a,
                     const DenseTensor& b, const std::vector<long>& axes_b);

// SVD of the matricization with the first `split` axes as rows, keeping at
// most `chi` singular values. Signs are gauge-fixed (largest-|u| entry of
// each column positive) so results are deterministic.
SvdResult svd_truncate(const DenseTensor& t, long split, long chi);

// Thin QR of the same matricization; q has orthonormal columns and r has a
// non-negative diagonal.
std::pair<DenseTensor, DenseTensor> qr_split(const DenseTensor& t, long split);

}  // namespace pepsmc
