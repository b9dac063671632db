#include "pepsmc/tensor.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pepsmc {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

long product(const std::vector<long>& dims) {
  long p = 1;
  for (long d : dims) p *= d;
  return p;
}

std::vector<long> strides_of(const std::vector<long>& dims) {
  std::vector<long> strides(dims.size(), 1);
  for (long i = static_cast<long>(dims.size()) - 2; i >= 0; --i)
    strides[i] = strides[i + 1] * dims[i + 1];
  return strides;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<long> dims)
    : dims_(std::move(dims)), data_() {
  for (long d : dims_)
    if (d <= 0) throw std::invalid_argument("DenseTensor: non-positive dim");
  data_.assign(static_cast<size_t>(product(dims_)), 0.0);
}

DenseTensor::DenseTensor(std::vector<long> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  for (long d : dims_)
    if (d <= 0) throw std::invalid_argument("DenseTensor: non-positive dim");
  if (static_cast<long>(data_.size()) != product(dims_))
    throw std::invalid_argument("DenseTensor: data length mismatch");
}

long DenseTensor::flat_index(const std::vector<long>& idx) const {
  if (idx.size() != dims_.size())
    throw std::invalid_argument("DenseTensor: index rank mismatch");
  long flat = 0;
  for (size_t i = 0; i < dims_.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= dims_[i])
      throw std::out_of_range("DenseTensor: index out of range");
    flat = flat * dims_[i] + idx[i];
  }
  return flat;
}

double& DenseTensor::at(const std::vector<long>& idx) {
  return data_[static_cast<size_t>(flat_index(idx))];
}

double DenseTensor::at(const std::vector<long>& idx) const {
  return data_[static_cast<size_t>(flat_index(idx))];
}

double DenseTensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double DenseTensor::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

bool DenseTensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void DenseTensor::scale(double factor) {
  for (double& v : data_) v *= factor;
}

DenseTensor permute(const DenseTensor& t, const std::vector<long>& order) {
  const long rank = t.rank();
  if (static_cast<long>(order.size()) != rank)
    throw std::invalid_argument("permute: order rank mismatch");
  std::vector<bool> seen(static_cast<size_t>(rank), false);
  for (long ax : order) {
    if (ax < 0 || ax >= rank || seen[static_cast<size_t>(ax)])
      throw std::invalid_argument("permute: invalid permutation");
    seen[static_cast<size_t>(ax)] = true;
  }
  // Identity permutation: plain copy.
  bool identity = true;
  for (long i = 0; i < rank; ++i)
    if (order[static_cast<size_t>(i)] != i) identity = false;
  if (identity) return t;

  std::vector<long> new_dims(static_cast<size_t>(rank));
  for (long i = 0; i < rank; ++i)
    new_dims[static_cast<size_t>(i)] = t.dim(order[static_cast<size_t>(i)]);
  DenseTensor out(new_dims);

  const std::vector<long> src_strides = strides_of(t.dims());
  // Stride of output position i in terms of the source flat index.
  std::vector<long> walk(static_cast<size_t>(rank));
  for (long i = 0; i < rank; ++i)
    walk[static_cast<size_t>(i)] = src_strides[static_cast<size_t>(
        order[static_cast<size_t>(i)])];

  const long n = t.size();
  std::vector<long> idx(static_cast<size_t>(rank), 0);
  const double* src = t.data();
  double* dst = out.data();
  long src_flat = 0;
  for (long i = 0; i < n; ++i) {
    dst[i] = src[src_flat];
    for (long ax = rank - 1; ax >= 0; --ax) {
      size_t a = static_cast<size_t>(ax);
      if (++idx[a] < new_dims[a]) {
        src_flat += walk[a];
        break;
      }
      idx[a] = 0;
      src_flat -= walk[a] * (new_dims[a] - 1);
    }
  }
  return out;
}

DenseTensor reshape(const DenseTensor& t, std::vector<long> new_dims) {
  if (product(new_dims) != t.size())
    throw std::invalid_argument("reshape: size mismatch");
  return DenseTensor(std::move(new_dims), t.storage());
}

DenseTensor contract(const DenseTensor& a, const std::vector<long>& axes_a,
                     const DenseTensor& b, const std::vector<long>& axes_b) {
  if (axes_a.size() != axes_b.size())
    throw std::invalid_argument("contract: axis count mismatch");
  auto check_axes = [](const DenseTensor& t, const std::vector<long>& axes) {
    std::vector<bool> seen(static_cast<size_t>(t.rank()), false);
    for (long ax : axes) {
      if (ax < 0 || ax >= t.rank())
        throw std::invalid_argument("contract: axis out of range");
      if (seen[static_cast<size_t>(ax)])
        throw std::invalid_argument("contract: repeated axis");
      seen[static_cast<size_t>(ax)] = true;
    }
  };
  check_axes(a, axes_a);
  check_axes(b, axes_b);
  for (size_t i = 0; i < axes_a.size(); ++i)
    if (a.dim(axes_a[i]) != b.dim(axes_b[i]))
      throw std::invalid_argument("contract: paired dimension mismatch");

  auto free_axes = [](const DenseTensor& t, const std::vector<long>& axes) {
    std::vector<long> free;
    for (long i = 0; i < t.rank(); ++i)
      if (std::find(axes.begin(), axes.end(), i) == axes.end())
        free.push_back(i);
    return free;
  };
  const std::vector<long> free_a = free_axes(a, axes_a);
  const std::vector<long> free_b = free_axes(b, axes_b);

  std::vector<long> perm_a = free_a;
  perm_a.insert(perm_a.end(), axes_a.begin(), axes_a.end());
  std::vector<long> perm_b = axes_b;
  perm_b.insert(perm_b.end(), free_b.begin(), free_b.end());

  DenseTensor pa = permute(a, perm_a);
  DenseTensor pb = permute(b, perm_b);

  long m = 1, k = 1, n = 1;
  std::vector<long> out_dims;
  for (long ax : free_a) {
    m *= a.dim(ax);
    out_dims.push_back(a.dim(ax));
  }
  for (long ax : axes_a) k *= a.dim(ax);
  for (long ax : free_b) {
    n *= b.dim(ax);
    out_dims.push_back(b.dim(ax));
  }
  if (out_dims.empty()) out_dims.push_back(1);

  DenseTensor out(out_dims);
  Eigen::Map<const RowMat> ma(pa.data(), m, k);
  Eigen::Map<const RowMat> mb(pb.data(), k, n);
  Eigen::Map<RowMat> mo(out.data(), m, n);
  mo.noalias() = ma * mb;
  return out;
}

namespace {

void split_dims(const DenseTensor& t, long split, long& rows, long& cols,
                std::vector<long>& row_dims, std::vector<long>& col_dims) {
  if (split < 1 || split >= t.rank())
    throw std::invalid_argument("split out of range");
  rows = 1;
  cols = 1;
  for (long i = 0; i < t.rank(); ++i) {
    if (i < split) {
      rows *= t.dim(i);
      row_dims.push_back(t.dim(i));
    } else {
      cols *= t.dim(i);
      col_dims.push_back(t.dim(i));
    }
  }
}

}  // namespace

SvdResult svd_truncate(const DenseTensor& t, long split, long chi) {
  if (chi < 1) throw std::invalid_argument("svd_truncate: chi < 1");
  if (!t.all_finite())
    throw std::runtime_error("svd_truncate: non-finite input");
  long rows, cols;
  std::vector<long> row_dims, col_dims;
  split_dims(t, split, rows, cols, row_dims, col_dims);

  Eigen::Map<const RowMat> m(t.data(), rows, cols);
  Eigen::JacobiSVD<RowMat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const long full = s.size();
  const long keep = std::min(chi, full);

  double total_sq = 0.0, kept_sq = 0.0;
  for (long i = 0; i < full; ++i) {
    total_sq += s(i) * s(i);
    if (i < keep) kept_sq += s(i) * s(i);
  }
  SvdResult out;
  out.truncation_error =
      total_sq > 0.0
          ? std::sqrt(std::max(0.0, total_sq - kept_sq) / total_sq)
          : 0.0;
  out.singular_values.assign(s.data(), s.data() + keep);

  RowMat u = svd.matrixU().leftCols(keep);
  RowMat vt = svd.matrixV().leftCols(keep).transpose();
  // Gauge-fix signs for determinism.
  for (long c = 0; c < keep; ++c) {
    long imax = 0;
    u.col(c).cwiseAbs().maxCoeff(&imax);
    if (u(imax, c) < 0) {
      u.col(c) = -u.col(c);
      vt.row(c) = -vt.row(c);
    }
  }

  row_dims.push_back(keep);
  std::vector<long> vt_dims;
  vt_dims.push_back(keep);
  vt_dims.insert(vt_dims.end(), col_dims.begin(), col_dims.end());

  out.u = DenseTensor(row_dims);
  Eigen::Map<RowMat>(out.u.data(), rows, keep) = u;
  out.vt = DenseTensor(vt_dims);
  Eigen::Map<RowMat>(out.vt.data(), keep, cols) = vt;
  return out;
}

std::pair<DenseTensor, DenseTensor> qr_split(const DenseTensor& t, long split) {
  if (!t.all_finite()) throw std::runtime_error("qr_split: non-finite input");
  long rows, cols;
  std::vector<long> row_dims, col_dims;
  split_dims(t, split, rows, cols, row_dims, col_dims);
  const long k = std::min(rows, cols);

  Eigen::Map<const RowMat> m(t.data(), rows, cols);
  Eigen::HouseholderQR<RowMat> qr(m);
  RowMat q = qr.householderQ() * RowMat::Identity(rows, k);
  RowMat r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (long i = 0; i < k; ++i) {
    if (r(i, i) < 0) {
      r.row(i) = -r.row(i);
      q.col(i) = -q.col(i);
    }
  }

  row_dims.push_back(k);
  std::vector<long> r_dims;
  r_dims.push_back(k);
  r_dims.insert(r_dims.end(), col_dims.begin(), col_dims.end());

  DenseTensor qt(row_dims);
  Eigen::Map<RowMat>(qt.data(), rows, k) = q;
  DenseTensor rt(r_dims);
  Eigen::Map<RowMat>(rt.data(), k, cols) = r;
  return {std::move(qt), std::move(rt)};
}

}  // namespace pepsmc
