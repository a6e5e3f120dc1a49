#ifndef MPPGEO_TYPES_HPP
#define MPPGEO_TYPES_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace mppgeo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Rank-3 array indexed (k, i, j) with one upper index k and two lower
/// indices i, j, e.g. Christoffel symbols Γ^k_{ij} or torsion T^k_{ij}.
class Tensor3 {
public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n, 0.0) {}

  int dim() const { return n_; }

  double& operator()(int k, int i, int j) { return data_[index(k, i, j)]; }
  double operator()(int k, int i, int j) const { return data_[index(k, i, j)]; }

  /// Contraction (X, Y) ↦ Σ_{ij} A^k_{ij} X^i Y^j.
  Vec contract(const Vec& x, const Vec& y) const;

  /// Matrix M^k_j = Σ_i A^k_{ij} X^i, so that A(X, Y) = M Y.
  Mat contract_first(const Vec& x) const;

  Tensor3& operator+=(const Tensor3& other);

private:
  std::size_t index(int k, int i, int j) const {
    return (static_cast<std::size_t>(k) * n_ + i) * n_ + j;
  }

  int n_ = 0;
  std::vector<double> data_;
};

/// Rank-4 array indexed (l, i, j, k) holding R^l_{ijk}, with
/// R(∂_i, ∂_j) ∂_k = Σ_l R^l_{ijk} ∂_l.
class Tensor4 {
public:
  Tensor4() = default;
  explicit Tensor4(int n)
      : n_(n), data_(static_cast<std::size_t>(n) * n * n * n, 0.0) {}

  int dim() const { return n_; }

  double& operator()(int l, int i, int j, int k) { return data_[index(l, i, j, k)]; }
  double operator()(int l, int i, int j, int k) const { return data_[index(l, i, j, k)]; }

  /// R(X, Y) Z.
  Vec apply(const Vec& x, const Vec& y, const Vec& z) const;

private:
  std::size_t index(int l, int i, int j, int k) const {
    return ((static_cast<std::size_t>(l) * n_ + i) * n_ + j) * n_ + k;
  }

  int n_ = 0;
  std::vector<double> data_;
};

inline Vec Tensor3::contract(const Vec& x, const Vec& y) const {
  Vec out = Vec::Zero(n_);
  for (int k = 0; k < n_; ++k) {
    double s = 0.0;
    for (int i = 0; i < n_; ++i) {
      if (x[i] == 0.0) continue;
      for (int j = 0; j < n_; ++j) s += (*this)(k, i, j) * x[i] * y[j];
    }
    out[k] = s;
  }
  return out;
}

inline Mat Tensor3::contract_first(const Vec& x) const {
  Mat m = Mat::Zero(n_, n_);
  for (int k = 0; k < n_; ++k)
    for (int i = 0; i < n_; ++i) {
      if (x[i] == 0.0) continue;
      for (int j = 0; j < n_; ++j) m(k, j) += (*this)(k, i, j) * x[i];
    }
  return m;
}

inline Tensor3& Tensor3::operator+=(const Tensor3& other) {
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

inline Vec Tensor4::apply(const Vec& x, const Vec& y, const Vec& z) const {
  Vec out = Vec::Zero(n_);
  for (int l = 0; l < n_; ++l) {
    double s = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        const double xy = x[i] * y[j];
        if (xy == 0.0) continue;
        for (int k = 0; k < n_; ++k) s += (*this)(l, i, j, k) * xy * z[k];
      }
    out[l] = s;
  }
  return out;
}

/// Packed storage of an antisymmetric J×J matrix: strictly upper
/// triangle, row-major, (0,1), (0,2), …, (1,2), …
inline int packed_size(int j) { return j * (j - 1) / 2; }

inline Mat unpack_antisymmetric(const Vec& packed, int j) {
  Mat m = Mat::Zero(j, j);
  int p = 0;
  for (int a = 0; a < j; ++a)
    for (int b = a + 1; b < j; ++b, ++p) {
      m(a, b) = packed[p];
      m(b, a) = -packed[p];
    }
  return m;
}

inline Vec pack_antisymmetric(const Mat& m) {
  const int j = static_cast<int>(m.rows());
  Vec packed(packed_size(j));
  int p = 0;
  for (int a = 0; a < j; ++a)
    for (int b = a + 1; b < j; ++b, ++p) packed[p] = m(a, b);
  return packed;
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace mppgeo

#endif  // MPPGEO_TYPES_HPP
