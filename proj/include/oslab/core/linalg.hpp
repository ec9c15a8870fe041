#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "oslab/core/errors.hpp"

namespace oslab {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;
using Mat2i = Eigen::Matrix2i;

inline constexpr double two_pi = 6.283185307179586476925286766559;

inline double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

inline double condition_number(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a);
  const auto& s = svd.singularValues();
  const double lo = s(s.size() - 1);
  return lo > 0.0 ? s(0) / lo : std::numeric_limits<double>::infinity();
}

struct QR {
  Mat q;  ///< orthonormal columns
  Mat r;  ///< upper triangular, positive diagonal
};

/// Modified Gram-Schmidt with one reorthogonalization sweep. No conditioning
/// check; throws only when a column collapses to zero.
inline QR qr_positive(const Mat& m) {
  const Eigen::Index k = m.cols();
  QR out{m, Mat::Zero(k, k)};
  for (Eigen::Index j = 0; j < k; ++j) {
    auto col = out.q.col(j);
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (Eigen::Index i = 0; i < j; ++i) {
        const double c = out.q.col(i).dot(col);
        out.r(i, j) += c;
        col -= c * out.q.col(i);
      }
    }
    const double nrm = col.norm();
    if (!(nrm > 0.0)) throw DegenerateBasis("zero column in Gram-Schmidt");
    out.r(j, j) = nrm;
    col /= nrm;
  }
  return out;
}

/// Gram-Schmidt of a basis given as matrix columns.
inline QR gram_schmidt(const Mat& basis, double max_condition = 1e10) {
  if (basis.rows() != basis.cols() || basis.rows() == 0)
    throw ShapeError("gram_schmidt expects a square, non-empty basis");
  const double cond = condition_number(basis);
  if (!(cond < max_condition))
    throw DegenerateBasis("basis condition number " + std::to_string(cond));
  return qr_positive(basis);
}

/// Columns of basis are already linearly independent; only the frame.
inline Mat gram_schmidt_frame(const Mat& basis) { return qr_positive(basis).q; }

}  // namespace oslab
