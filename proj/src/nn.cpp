#include "loadflow/nn.hpp"

#include <Eigen/Core>

#include <cmath>

namespace loadflow::nn {

namespace {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EigenRowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;

ConstMap as_eigen(const Matrix& m) { return ConstMap(m.data(), m.rows(), m.cols()); }
Map as_eigen(Matrix& m) { return Map(m.data(), m.rows(), m.cols()); }

void check_shape(const Matrix& m, int rows, int cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    throw ValidationError(std::string(what) + ": expected " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          ", got " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
}

}  // namespace

void gemm(bool trans_a, bool trans_b, double alpha, const Matrix& a,
          const Matrix& b, double beta, Matrix& c) {
  const int m = trans_a ? a.cols() : a.rows();
  const int k = trans_a ? a.rows() : a.cols();
  const int kb = trans_b ? b.cols() : b.rows();
  const int n = trans_b ? b.rows() : b.cols();
  if (k != kb) throw ValidationError("gemm: inner dimensions do not match");
  check_shape(c, m, n, "gemm output");

  auto ea = as_eigen(a);
  auto eb = as_eigen(b);
  auto ec = as_eigen(c);
  if (beta == 0.0)
    ec.setZero();
  else if (beta != 1.0)
    ec *= beta;

  if (!trans_a && !trans_b)
    ec.noalias() += alpha * (ea * eb);
  else if (trans_a && !trans_b)
    ec.noalias() += alpha * (ea.transpose() * eb);
  else if (!trans_a && trans_b)
    ec.noalias() += alpha * (ea * eb.transpose());
  else
    ec.noalias() += alpha * (ea.transpose() * eb.transpose());
}

void affine_forward(const Matrix& x, const Matrix& w, const Matrix& b,
                    Matrix& y) {
  check_shape(b, 1, w.cols(), "affine bias");
  if (y.rows() != x.rows() || y.cols() != w.cols())
    y = Matrix(x.rows(), w.cols());
  gemm(false, false, 1.0, x, w, 0.0, y);
  auto ey = as_eigen(y);
  ey.rowwise() += ConstMap(b.data(), 1, b.cols()).row(0);
}

void affine_backward(const Matrix& x, const Matrix& w, const Matrix& dy,
                     Matrix& dx, Matrix& dw, Matrix& db) {
  check_shape(dy, x.rows(), w.cols(), "affine dy");
  check_shape(dw, w.rows(), w.cols(), "affine dw");
  check_shape(db, 1, w.cols(), "affine db");
  if (dx.rows() != x.rows() || dx.cols() != x.cols())
    dx = Matrix(x.rows(), x.cols());
  gemm(false, true, 1.0, dy, w, 0.0, dx);   // dx = dy w^T
  gemm(true, false, 1.0, x, dy, 1.0, dw);   // dw += x^T dy
  Map(db.data(), 1, db.cols()).row(0) += as_eigen(dy).colwise().sum();
}

void tanh_forward(const Matrix& x, Matrix& y) {
  if (!y.same_shape(x)) y = Matrix(x.rows(), x.cols());
  // 1 - 2/(exp(2x) + 1) equals tanh(x) but vectorizes: Eigen's exp() has a
  // SIMD kernel for doubles while tanh() does not.
  auto ex = as_eigen(x).array();
  as_eigen(y).array() = 1.0 - 2.0 / ((2.0 * ex).exp() + 1.0);
}

void tanh_backward(const Matrix& y, const Matrix& dy, Matrix& dx) {
  check_shape(dy, y.rows(), y.cols(), "tanh dy");
  if (!dx.same_shape(y)) dx = Matrix(y.rows(), y.cols());
  auto eyv = as_eigen(y).array();
  as_eigen(dx).array() = as_eigen(dy).array() * (1.0 - eyv * eyv);
}

double mse_forward(const Matrix& pred, const Matrix& target) {
  check_shape(target, pred.rows(), pred.cols(), "mse target");
  if (pred.size() == 0) throw ValidationError("mse of empty matrices");
  const auto diff = as_eigen(pred).array() - as_eigen(target).array();
  return diff.square().sum() / static_cast<double>(pred.size());
}

void mse_backward(const Matrix& pred, const Matrix& target, Matrix& dpred) {
  check_shape(target, pred.rows(), pred.cols(), "mse target");
  if (!dpred.same_shape(pred)) dpred = Matrix(pred.rows(), pred.cols());
  const double scale = 2.0 / static_cast<double>(pred.size());
  as_eigen(dpred).array() =
      scale * (as_eigen(pred).array() - as_eigen(target).array());
}

Param& ParamStore::add(const std::string& name, int rows, int cols) {
  if (has(name)) throw ValidationError("duplicate parameter name: " + name);
  Param p;
  p.name = name;
  p.value = Matrix(rows, cols);
  p.grad = Matrix(rows, cols);
  p.m = Matrix(rows, cols);
  p.v = Matrix(rows, cols);
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParamStore::get(const std::string& name) {
  for (Param& p : params_)
    if (p.name == name) return p;
  throw ValidationError("unknown parameter: " + name);
}

const Param& ParamStore::get(const std::string& name) const {
  for (const Param& p : params_)
    if (p.name == name) return p;
  throw ValidationError("unknown parameter: " + name);
}

bool ParamStore::has(const std::string& name) const {
  for (const Param& p : params_)
    if (p.name == name) return true;
  return false;
}

void ParamStore::zero_grads() {
  for (Param& p : params_) p.grad.fill(0.0);
}

std::size_t ParamStore::n_scalars() const {
  std::size_t n = 0;
  for (const Param& p : params_) n += p.value.size();
  return n;
}

void glorot_init(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / (w.rows() + w.cols()));
  double* data = w.data();
  for (std::size_t i = 0; i < w.size(); ++i)
    data[i] = rng.uniform_real(-limit, limit);
}

void Adam::step(ParamStore& store) {
  ++t_;
  const double bc1 = 1.0 - std::pow(settings_.beta1, t_);
  const double bc2 = 1.0 - std::pow(settings_.beta2, t_);
  for (Param& p : store.params()) {
    double* value = p.value.data();
    const double* grad = p.grad.data();
    double* m = p.m.data();
    double* v = p.v.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = settings_.beta1 * m[i] + (1.0 - settings_.beta1) * grad[i];
      v[i] = settings_.beta2 * v[i] + (1.0 - settings_.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= settings_.learning_rate * m_hat /
                  (std::sqrt(v_hat) + settings_.epsilon);
    }
  }
}

void Standardizer::fit(const Matrix& x) {
  if (x.rows() == 0) throw ValidationError("cannot fit standardizer on empty data");
  const int d = x.cols();
  mean_.assign(d, 0.0);
  std_.assign(d, 0.0);
  for (int r = 0; r < x.rows(); ++r)
    for (int c = 0; c < d; ++c) mean_[c] += x.at(r, c);
  for (int c = 0; c < d; ++c) mean_[c] /= x.rows();
  for (int r = 0; r < x.rows(); ++r)
    for (int c = 0; c < d; ++c) {
      const double dlt = x.at(r, c) - mean_[c];
      std_[c] += dlt * dlt;
    }
  for (int c = 0; c < d; ++c) {
    std_[c] = std::sqrt(std_[c] / x.rows());
    if (std_[c] < 1e-12) std_[c] = 1.0;  // constant column: pass through
  }
}

void Standardizer::transform(const Matrix& x, Matrix& z) const {
  if (!fitted()) throw ValidationError("standardizer is not fitted");
  if (x.cols() != static_cast<int>(mean_.size()))
    throw ValidationError("standardizer width mismatch");
  if (!z.same_shape(x)) z = Matrix(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r)
    for (int c = 0; c < x.cols(); ++c)
      z.at(r, c) = (x.at(r, c) - mean_[c]) / std_[c];
}

void Standardizer::inverse_transform(const Matrix& z, Matrix& x) const {
  if (!fitted()) throw ValidationError("standardizer is not fitted");
  if (z.cols() != static_cast<int>(mean_.size()))
    throw ValidationError("standardizer width mismatch");
  if (!x.same_shape(z)) x = Matrix(z.rows(), z.cols());
  for (int r = 0; r < z.rows(); ++r)
    for (int c = 0; c < z.cols(); ++c)
      x.at(r, c) = z.at(r, c) * std_[c] + mean_[c];
}

nlohmann::json Standardizer::to_json() const {
  return nlohmann::json{{"mean", mean_}, {"std", std_}};
}

Standardizer Standardizer::from_json(const nlohmann::json& doc) {
  Standardizer s;
  s.mean_ = doc.at("mean").get<std::vector<double>>();
  s.std_ = doc.at("std").get<std::vector<double>>();
  if (s.mean_.size() != s.std_.size())
    throw ParseError("standardizer mean/std length mismatch");
  return s;
}

}  // namespace loadflow::nn
