// Banded LU factorization with partial pivoting, in the layout of LAPACK's
// gbtf2: row i keeps columns [i - kl, i + ku + kl] so that row interchanges
// fit without reallocation.
#pragma once

#include <cmath>
#include <algorithm>
#include <complex>
#include <limits>
#include <cstddef>
#include <span>
#include <vector>

#include "thresh/core.hpp"

namespace thresh {

template <class T>
class BandMatrix {
 public:
  BandMatrix(std::size_t n, int kl, int ku) : n_(n), kl_(kl), ku_(ku), width_(2 * kl + ku + 1), data_(n * width_, T{}) {}

  std::size_t size() const noexcept { return n_; }
  int kl() const noexcept { return kl_; }
  int ku() const noexcept { return ku_; }

  bool in_band(std::size_t i, std::size_t j) const noexcept {
    const long off = long(j) - long(i);
    return off >= -kl_ && off <= ku_ + kl_;
  }
  T& operator()(std::size_t i, std::size_t j) { return data_[i * width_ + std::size_t(long(j) - long(i) + kl_)]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * width_ + std::size_t(long(j) - long(i) + kl_)];
  }

  /// y = A x using the original (unfactored) band [i - kl, i + ku].
  std::vector<T> multiply(std::span<const T> x) const {
    std::vector<T> y(n_, T{});
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t lo = i >= std::size_t(kl_) ? i - kl_ : 0;
      const std::size_t hi = std::min(n_ - 1, i + ku_);
      T acc{};
      for (std::size_t j = lo; j <= hi; ++j) acc += (*this)(i, j) * x[j];
      y[i] = acc;
    }
    return y;
  }

  double norm1() const {
    std::vector<double> col(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t lo = i >= std::size_t(kl_) ? i - kl_ : 0;
      const std::size_t hi = std::min(n_ - 1, i + ku_);
      for (std::size_t j = lo; j <= hi; ++j) col[j] += std::abs((*this)(i, j));
    }
    double m = 0.0;
    for (double c : col) m = std::max(m, c);
    return m;
  }

 private:
  std::size_t n_;
  int kl_, ku_, width_;
  std::vector<T> data_;
};

template <class T>
class BandLU {
 public:
  explicit BandLU(BandMatrix<T> a) : a_(std::move(a)), piv_(a_.size()), inv_pivot_(a_.size()) {
    norm1_ = a_.norm1();
    const std::size_t n = a_.size();
    const std::size_t kl = a_.kl(), span = a_.kl() + a_.ku();
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t last_row = std::min(n - 1, k + kl);
      std::size_t p = k;
      double best = std::abs(a_(k, k));
      for (std::size_t i = k + 1; i <= last_row; ++i) {
        const double v = std::abs(a_(i, k));
        if (v > best) best = v, p = i;
      }
      if (!(best > 0.0)) throw NumericError("banded", "singular matrix at pivot " + std::to_string(k));
      piv_[k] = p;
      const std::size_t last_col = std::min(n - 1, k + span);
      if (p != k)
        for (std::size_t j = k; j <= last_col; ++j) std::swap(a_(k, j), a_(p, j));
      const T pivot = a_(k, k);
      inv_pivot_[k] = T(1.0) / pivot;
      min_pivot_ = std::min(min_pivot_, std::abs(pivot));
      max_pivot_ = std::max(max_pivot_, std::abs(pivot));
      for (std::size_t i = k + 1; i <= last_row; ++i) {
        const T l = a_(i, k) / pivot;
        a_(i, k) = l;
        if (l == T{}) continue;
        for (std::size_t j = k + 1; j <= last_col; ++j) a_(i, j) -= l * a_(k, j);
      }
    }
  }

  std::size_t size() const noexcept { return a_.size(); }

  void solve_in_place(std::span<T> b) const {
    const std::size_t n = a_.size();
    if (b.size() != n) throw InvalidArgument("BandLU::solve: size mismatch");
    const std::size_t kl = a_.kl(), span = a_.kl() + a_.ku();
    for (std::size_t k = 0; k < n; ++k) {
      if (piv_[k] != k) std::swap(b[k], b[piv_[k]]);
      const std::size_t last_row = std::min(n - 1, k + kl);
      for (std::size_t i = k + 1; i <= last_row; ++i) b[i] -= a_(i, k) * b[k];
    }
    for (std::size_t k = n; k-- > 0;) {
      const std::size_t last_col = std::min(n - 1, k + span);
      T acc = b[k];
      for (std::size_t j = k + 1; j <= last_col; ++j) acc -= a_(k, j) * b[j];
      b[k] = acc * inv_pivot_[k];
    }
  }

  std::vector<T> solve(std::vector<T> b) const {
    solve_in_place(std::span<T>(b));
    return b;
  }

  /// Lower bound on the 1-norm condition number from solves against two
  /// sign patterns.
  double condition_estimate() const {
    const std::size_t n = a_.size();
    double best = 0.0;
    for (int pattern = 0; pattern < 2; ++pattern) {
      std::vector<T> b(n);
      for (std::size_t i = 0; i < n; ++i) b[i] = T((pattern == 0 || i % 2 == 0) ? 1.0 : -1.0);
      solve_in_place(std::span<T>(b));
      double s = 0.0;
      for (const auto& v : b) s += std::abs(v);
      best = std::max(best, s / double(n));
    }
    return norm1_ * best;
  }

  double pivot_ratio() const noexcept { return max_pivot_ / min_pivot_; }

 private:
  BandMatrix<T> a_;
  std::vector<std::size_t> piv_;
  std::vector<T> inv_pivot_;
  double norm1_ = 0.0;
  double min_pivot_ = std::numeric_limits<double>::infinity();
  double max_pivot_ = 0.0;
};

}  // namespace thresh
