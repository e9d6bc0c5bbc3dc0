// Dense neural-network primitives: matrices, differentiable ops, Adam,
// feature standardization.  Everything is double precision and deterministic.
#pragma once

#include <cstddef>
#include <new>
#include <string>
#include <vector>

#include "json.hpp"
#include "loadflow/errors.hpp"
#include "loadflow/rng.hpp"

namespace loadflow::nn {

namespace detail {

// 64-byte-aligned allocator for matrix storage.  SIMD kernels peel and group
// elements based on the buffer address modulo the vector width; pinning the
// alignment makes every run partition elements identically, so results are
// bit-for-bit reproducible instead of depending on where the heap happened
// to place a buffer.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
  template <class U>
  bool operator!=(const AlignedAllocator<U>&) const { return false; }
};

}  // namespace detail

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double, detail::AlignedAllocator<double>> data_;
};

// c = alpha * op(a) * op(b) + beta * c, where op transposes when requested.
// The single building block behind every affine layer and the graph
// propagation; gradient accumulation uses beta = 1.
void gemm(bool trans_a, bool trans_b, double alpha, const Matrix& a,
          const Matrix& b, double beta, Matrix& c);

// y = x w + 1 b   (x: B x in, w: in x out, b: 1 x out broadcast over rows)
void affine_forward(const Matrix& x, const Matrix& w, const Matrix& b,
                    Matrix& y);
// dx is overwritten; dw and db are accumulated so shared weights sum their
// gradient contributions across uses.
void affine_backward(const Matrix& x, const Matrix& w, const Matrix& dy,
                     Matrix& dx, Matrix& dw, Matrix& db);

void tanh_forward(const Matrix& x, Matrix& y);
// dx = dy * (1 - y^2), where y is the forward output (overwrites dx).
void tanh_backward(const Matrix& y, const Matrix& dy, Matrix& dx);

// Mean squared error over all B*D entries.
double mse_forward(const Matrix& pred, const Matrix& target);
void mse_backward(const Matrix& pred, const Matrix& target, Matrix& dpred);

// A named parameter tensor with its gradient and Adam moment buffers.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;
};

// Insertion-ordered parameter collection.  The order is part of the
// checkpoint format and of the deterministic initialization sequence.
class ParamStore {
 public:
  Param& add(const std::string& name, int rows, int cols);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  void zero_grads();
  std::size_t n_scalars() const;

 private:
  std::vector<Param> params_;
};

// Glorot (Xavier) uniform initialization: U(-l, l), l = sqrt(6/(fan_in +
// fan_out)), drawn row-major from `rng`.
void glorot_init(Matrix& w, Rng& rng);

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamSettings settings = {}) : settings_(settings) {}

  // Applies one update from the accumulated gradients (bias-corrected
  // first/second moments).  Does not clear gradients.
  void step(ParamStore& store);
  int t() const { return t_; }
  const AdamSettings& settings() const { return settings_; }

 private:
  AdamSettings settings_;
  int t_ = 0;
};

// Per-column standardization: z = (x - mean) / std with population std;
// columns with std below 1e-12 use std = 1 so constants pass through.
class Standardizer {
 public:
  void fit(const Matrix& x);
  void transform(const Matrix& x, Matrix& z) const;
  void inverse_transform(const Matrix& z, Matrix& x) const;
  bool fitted() const { return !mean_.empty(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return std_; }

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& doc);

 private:
  std::vector<double> mean_;
  std::vector<double> std_;
};

}  // namespace loadflow::nn
