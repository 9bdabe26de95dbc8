// Copyright 2026 The seqdet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SEQDET_PCA_HPP
#define SEQDET_PCA_HPP

#include <Eigen/Dense>
#include <iostream>

#include "seqdet/container.hpp"
#include "seqdet/error.hpp"

namespace seqdet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline void serialize(const Matrix& m, ByteWriter& w) {
  w.put_u64(static_cast<std::uint64_t>(m.rows()));
  w.put_u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) w.put_f64(m(i, j));
}

inline Matrix deserialize_matrix(ByteReader& r) {
  const auto rows = r.get_u64();
  const auto cols = r.get_u64();
  if (rows > (1u << 20) || cols > (1u << 20) || rows * cols > r.remaining() / 8) r.fail("implausible matrix shape");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = r.get_f64();
  return m;
}

inline void serialize(const Vector& v, ByteWriter& w) { serialize(Matrix(v), w); }

inline Vector deserialize_vector(ByteReader& r) {
  Matrix m = deserialize_matrix(r);
  if (m.cols() != 1 && m.size() != 0) r.fail("expected a column vector");
  return m.size() == 0 ? Vector() : Vector(m.col(0));
}

/// Mean-centred projection onto the leading eigenvectors of the sample
/// covariance (1/n normalization).
struct PcaModel {
  Vector mean;         // input_dim
  Matrix components;   // output_dim x input_dim, orthonormal rows (zero rows past the rank)
  Vector eigenvalues;  // output_dim, descending
  std::size_t rank = 0;

  Eigen::Index input_dim() const { return components.cols(); }
  Eigen::Index output_dim() const { return components.rows(); }

  Vector project(const Vector& x) const {
    if (x.size() != input_dim())
      throw DataError("PCA input has dimension " + std::to_string(x.size()) + ", expected " +
                      std::to_string(input_dim()));
    return components * (x - mean);
  }
  /// Projects every column.
  Matrix project_all(const Matrix& x) const {
    if (x.rows() != input_dim()) throw DataError("PCA input dimension mismatch");
    return components * (x.colwise() - mean);
  }
  Vector reconstruct(const Vector& y) const { return mean + components.transpose() * y; }

  bool operator==(const PcaModel& o) const {
    return mean == o.mean && components == o.components && eigenvalues == o.eigenvalues && rank == o.rank;
  }
};

/// `samples` holds one observation per column. Components beyond the data
/// rank are zero rows and trigger a warning.
inline PcaModel fit_pca(const Matrix& samples, Eigen::Index out_dim) {
  const Eigen::Index dim = samples.rows();
  const Eigen::Index n = samples.cols();
  if (n == 0 || out_dim <= 0 || out_dim > dim) throw DataError("PCA: need samples and 0 < out_dim <= input dim");
  PcaModel model;
  model.mean = samples.rowwise().mean();
  const Matrix centered = samples.colwise() - model.mean;
  const Matrix cov = centered * centered.transpose() / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("PCA: eigendecomposition failed");
  const Vector& evals = solver.eigenvalues();  // ascending
  const Matrix& evecs = solver.eigenvectors();
  const double top = std::max(evals(dim - 1), 0.0);
  const double tol = std::max(top, 1e-300) * 1e-12 * static_cast<double>(dim);

  model.components = Matrix::Zero(out_dim, dim);
  model.eigenvalues = Vector::Zero(out_dim);
  for (Eigen::Index k = 0; k < out_dim; ++k) {
    const Eigen::Index src = dim - 1 - k;
    if (!(evals(src) > tol)) break;
    Vector row = evecs.col(src);
    Eigen::Index big = 0;
    row.cwiseAbs().maxCoeff(&big);
    if (row(big) < 0) row = -row;
    model.components.row(k) = row.transpose();
    model.eigenvalues(k) = evals(src);
    model.rank = static_cast<std::size_t>(k + 1);
  }
  if (model.rank < static_cast<std::size_t>(out_dim))
    std::clog << "warning: PCA data rank " << model.rank << " below requested " << out_dim
              << " components; padding with zero rows\n";
  return model;
}

inline void serialize(const PcaModel& m, ByteWriter& w) {
  serialize(m.mean, w);
  serialize(m.components, w);
  serialize(m.eigenvalues, w);
  w.put_u64(m.rank);
}

inline PcaModel deserialize_pca(ByteReader& r) {
  PcaModel m;
  m.mean = deserialize_vector(r);
  m.components = deserialize_matrix(r);
  m.eigenvalues = deserialize_vector(r);
  m.rank = r.get_u64();
  if (m.mean.size() != m.components.cols() || m.eigenvalues.size() != m.components.rows())
    r.fail("inconsistent PCA dimensions");
  return m;
}

}  // namespace seqdet

#endif  // SEQDET_PCA_HPP
