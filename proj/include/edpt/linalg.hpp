#pragma once

#include <span>
#include <vector>

#include "edpt/rng.hpp"

namespace edpt {

// Symmetric matrix stored as the packed lower triangle (row-major).
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(int dim)
      : dim_(dim), data_(static_cast<std::size_t>(dim) * (dim + 1) / 2, 0.0) {}

  static SymmetricMatrix identity(int dim, double scale = 1.0);

  int dim() const { return dim_; }

  double& at(int i, int j) {
    if (j > i) std::swap(i, j);
    return data_[static_cast<std::size_t>(i) * (i + 1) / 2 + j];
  }
  double at(int i, int j) const {
    if (j > i) std::swap(i, j);
    return data_[static_cast<std::size_t>(i) * (i + 1) / 2 + j];
  }

  SymmetricMatrix& operator+=(const SymmetricMatrix& other);
  // this += scale * v v^T
  void add_outer(std::span<const double> v, double scale = 1.0);
  // Writes the other matrix into the diagonal block starting at offset.
  void set_block(int offset, const SymmetricMatrix& block);

  std::span<const double> packed() const { return data_; }
  std::span<double> packed() { return data_; }

 private:
  int dim_ = 0;
  std::vector<double> data_;
};

// Lower-triangular Cholesky factor of a positive definite matrix.
// Construction throws NumericalError naming the failing pivot index when
// the input is not positive definite.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(const SymmetricMatrix& a);

  int dim() const { return dim_; }

  // Solves A x = b.
  std::vector<double> solve(std::span<const double> b) const;
  // Solves L y = b.
  std::vector<double> forward_solve(std::span<const double> b) const;
  // Solves L^T x = b.
  std::vector<double> back_solve(std::span<const double> b) const;
  // log |A| = 2 sum_i log L_ii.
  double log_det() const;
  // mu + L z for z ~ N(0, I): a draw from N(mu, A).
  std::vector<double> sample(std::span<const double> mu,
                             RngStream& stream) const;

  double l_at(int i, int j) const {
    return l_[static_cast<std::size_t>(i) * (i + 1) / 2 + j];
  }

 private:
  int dim_ = 0;
  std::vector<double> l_;
};

std::vector<double> chol_solve(const SymmetricMatrix& a,
                               std::span<const double> b);
double log_det(const SymmetricMatrix& a);
std::vector<double> mvn_sample(std::span<const double> mu,
                               const SymmetricMatrix& sigma,
                               RngStream& stream);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace edpt
