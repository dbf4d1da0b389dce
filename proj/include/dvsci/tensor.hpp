#ifndef DVSCI_TENSOR_HPP
#define DVSCI_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dvsci {

// Planar tensor: `chans` planes of rows x cols, plane-major, row-major within
// each plane. Matches the on-disk "frame,row,col" blob order, so a video cube
// stores frame b as plane b and a matrix is a single-plane tensor.
template <typename T>
struct TensorT {
  int chans = 0;
  int rows = 0;
  int cols = 0;
  std::vector<T> v;

  TensorT() = default;
  TensorT(int chans_, int rows_, int cols_, T fill = T(0))
      : chans(chans_), rows(rows_), cols(cols_),
        v(static_cast<std::size_t>(chans_) * rows_ * cols_, fill) {
    if (chans_ < 0 || rows_ < 0 || cols_ < 0)
      throw std::invalid_argument("tensor dimensions must be nonnegative");
  }

  static TensorT zeros(int chans_, int rows_, int cols_) {
    return TensorT(chans_, rows_, cols_);
  }

  std::size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(rows) * cols;
  }

  T* plane(int ch) { return v.data() + plane_size() * ch; }
  const T* plane(int ch) const { return v.data() + plane_size() * ch; }

  T& at(int ch, int r, int c) {
    return v[plane_size() * ch + static_cast<std::size_t>(r) * cols + c];
  }
  const T& at(int ch, int r, int c) const {
    return v[plane_size() * ch + static_cast<std::size_t>(r) * cols + c];
  }

  bool same_shape(const TensorT& o) const {
    return chans == o.chans && rows == o.rows && cols == o.cols;
  }

  std::string shape_str() const {
    return std::to_string(chans) + "x" + std::to_string(rows) + "x" +
           std::to_string(cols);
  }

  void fill(T value) { v.assign(v.size(), value); }

  TensorT slice(int first_chan, int n_chans) const {
    if (first_chan < 0 || n_chans < 0 || first_chan + n_chans > chans)
      throw std::invalid_argument("tensor slice out of range");
    TensorT out(n_chans, rows, cols);
    std::copy(v.begin() + plane_size() * first_chan,
              v.begin() + plane_size() * (first_chan + n_chans),
              out.v.begin());
    return out;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(chans, rows, cols);
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;
using TensorU8 = TensorT<std::uint8_t>;

template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b,
                        const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
}

template <typename T>
bool all_finite(const TensorT<T>& t) {
  for (T x : t.v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

template <typename T>
double max_abs(const TensorT<T>& t) {
  double m = 0.0;
  for (T x : t.v) m = std::max(m, std::abs(static_cast<double>(x)));
  return m;
}

template <typename T>
double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.v[i]) -
                             static_cast<double>(b.v[i])));
  return m;
}

// Inner product accumulated in double regardless of storage precision.
template <typename T>
double dot(const TensorT<T>& a, const TensorT<T>& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i)
    s += static_cast<double>(a.v[i]) * static_cast<double>(b.v[i]);
  return s;
}

template <typename T>
double norm2(const TensorT<T>& t) {
  double s = 0.0;
  for (T x : t.v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

// Channel-wise concatenation; all inputs must share rows/cols.
template <typename T>
TensorT<T> concat_chans(const std::vector<const TensorT<T>*>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_chans: empty input");
  int total = 0;
  for (const auto* p : parts) {
    if (p->rows != parts[0]->rows || p->cols != parts[0]->cols)
      throw std::invalid_argument("concat_chans: spatial shape mismatch");
    total += p->chans;
  }
  TensorT<T> out(total, parts[0]->rows, parts[0]->cols);
  std::size_t off = 0;
  for (const auto* p : parts) {
    std::copy(p->v.begin(), p->v.end(), out.v.begin() + off);
    off += p->v.size();
  }
  return out;
}

}  // namespace dvsci

#endif
