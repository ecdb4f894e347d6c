#include "edpt/linalg.hpp"

#include <cmath>
#include <string>

#include "edpt/errors.hpp"
#include "edpt/numerics.hpp"

namespace edpt {

SymmetricMatrix SymmetricMatrix::identity(int dim, double scale) {
  SymmetricMatrix m(dim);
  for (int i = 0; i < dim; ++i) m.at(i, i) = scale;
  return m;
}

SymmetricMatrix& SymmetricMatrix::operator+=(const SymmetricMatrix& other) {
  if (other.dim_ != dim_) throw NumericalError("matrix dimension mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

void SymmetricMatrix::add_outer(std::span<const double> v, double scale) {
  std::size_t idx = 0;
  for (int i = 0; i < dim_; ++i) {
    double vi = scale * v[i];
    for (int j = 0; j <= i; ++j) data_[idx++] += vi * v[j];
  }
}

void SymmetricMatrix::set_block(int offset, const SymmetricMatrix& block) {
  for (int i = 0; i < block.dim(); ++i) {
    for (int j = 0; j <= i; ++j) {
      at(offset + i, offset + j) = block.at(i, j);
    }
  }
}

CholeskyFactor::CholeskyFactor(const SymmetricMatrix& a)
    : dim_(a.dim()), l_(a.packed().begin(), a.packed().end()) {
  for (int j = 0; j < dim_; ++j) {
    double* row_j = &l_[static_cast<std::size_t>(j) * (j + 1) / 2];
    double d = row_j[j];
    for (int k = 0; k < j; ++k) d -= row_j[k] * row_j[k];
    if (!(d > 0) || !std::isfinite(d)) {
      throw NumericalError("matrix not positive definite at pivot " +
                           std::to_string(j));
    }
    double ljj = std::sqrt(d);
    row_j[j] = ljj;
    for (int i = j + 1; i < dim_; ++i) {
      double* row_i = &l_[static_cast<std::size_t>(i) * (i + 1) / 2];
      double s = row_i[j];
      for (int k = 0; k < j; ++k) s -= row_i[k] * row_j[k];
      row_i[j] = s / ljj;
    }
  }
}

std::vector<double> CholeskyFactor::forward_solve(
    std::span<const double> b) const {
  std::vector<double> y(b.begin(), b.end());
  for (int i = 0; i < dim_; ++i) {
    const double* row = &l_[static_cast<std::size_t>(i) * (i + 1) / 2];
    double s = y[i];
    for (int k = 0; k < i; ++k) s -= row[k] * y[k];
    y[i] = s / row[i];
  }
  return y;
}

std::vector<double> CholeskyFactor::back_solve(
    std::span<const double> b) const {
  std::vector<double> x(b.begin(), b.end());
  for (int i = dim_ - 1; i >= 0; --i) {
    double s = x[i];
    for (int k = i + 1; k < dim_; ++k) {
      s -= l_[static_cast<std::size_t>(k) * (k + 1) / 2 + i] * x[k];
    }
    x[i] = s / l_[static_cast<std::size_t>(i) * (i + 1) / 2 + i];
  }
  return x;
}

std::vector<double> CholeskyFactor::solve(std::span<const double> b) const {
  return back_solve(forward_solve(b));
}

double CholeskyFactor::log_det() const {
  double s = 0;
  for (int i = 0; i < dim_; ++i) {
    s += std::log(l_[static_cast<std::size_t>(i) * (i + 1) / 2 + i]);
  }
  return 2 * s;
}

std::vector<double> CholeskyFactor::sample(std::span<const double> mu,
                                           RngStream& stream) const {
  std::vector<double> z(dim_);
  for (int i = 0; i < dim_; ++i) z[i] = draw_normal(stream);
  std::vector<double> out(mu.begin(), mu.end());
  for (int i = 0; i < dim_; ++i) {
    const double* row = &l_[static_cast<std::size_t>(i) * (i + 1) / 2];
    double s = 0;
    for (int k = 0; k <= i; ++k) s += row[k] * z[k];
    out[i] += s;
  }
  return out;
}

std::vector<double> chol_solve(const SymmetricMatrix& a,
                               std::span<const double> b) {
  return CholeskyFactor(a).solve(b);
}

double log_det(const SymmetricMatrix& a) { return CholeskyFactor(a).log_det(); }

std::vector<double> mvn_sample(std::span<const double> mu,
                               const SymmetricMatrix& sigma,
                               RngStream& stream) {
  return CholeskyFactor(sigma).sample(mu, stream);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace edpt
