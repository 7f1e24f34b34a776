#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>

namespace specgap {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Singular values below this fraction (times dim) of the reference scale
/// are treated as zero.
inline constexpr double kRankTolFactor = 1e-12;

inline RealVector singular_values(const Matrix& m)
{
    if (m.size() == 0)
        return RealVector();
    return Eigen::BDCSVD<Matrix>(m).singularValues();
}

/// Largest singular value. Zero for empty matrices.
inline double operator_norm(const Matrix& m)
{
    if (m.size() == 0)
        return 0.0;
    return singular_values(m)(0);
}

/// Spectral norm of a matrix known to be Hermitian: max |eigenvalue|.
inline double hermitian_norm(const Matrix& m)
{
    if (m.size() == 0)
        return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Numeric rank: singular values above dim * 1e-12 * scale count. The scale
/// is the largest singular value, or `reference_scale` if larger; projector
/// products pass 1 so that an all-rounding-noise product has rank zero.
inline Index numeric_rank(const RealVector& sv, Index dim, double reference_scale = 0.0)
{
    if (sv.size() == 0)
        return 0;
    const double scale = std::max(sv.maxCoeff(), reference_scale);
    if (scale == 0.0)
        return 0;
    const double tol = static_cast<double>(std::max<Index>(dim, 1)) * kRankTolFactor * scale;
    return static_cast<Index>((sv.array() > tol).count());
}

inline Index numeric_rank(const Matrix& m, double reference_scale = 0.0)
{
    return numeric_rank(singular_values(m), std::max(m.rows(), m.cols()), reference_scale);
}

/// max_ij |m_ij|
inline double max_abs(const Matrix& m)
{
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// exp(K) for skew-Hermitian K via the eigendecomposition of the Hermitian
/// matrix iK; the result is unitary up to the orthonormality of the
/// eigenvectors.
inline Matrix expm_skew_hermitian(const Matrix& k)
{
    if (k.isZero(0.0))
        return Matrix::Identity(k.rows(), k.cols());
    const Complex i(0.0, 1.0);
    Matrix h = i * k;
    h = 0.5 * (h + h.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const Vector phases = (-i * es.eigenvalues().cast<Complex>()).array().exp();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

/// ‖U*U − I‖ in operator norm.
inline double unitarity_defect(const Matrix& u)
{
    return operator_norm(u.adjoint() * u - Matrix::Identity(u.cols(), u.cols()));
}

}  // namespace specgap
