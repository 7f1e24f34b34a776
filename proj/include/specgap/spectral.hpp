#pragma once

// Hermitian operators, their eigensystems, spectral projections and the
// metrics on pairs of orthogonal projections.

#include "specgap/errors.hpp"
#include "specgap/intervals.hpp"
#include "specgap/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

namespace specgap {

inline constexpr double kHermiticityTol = 1e-12;
inline constexpr double kProjectorTol = 1e-10;
inline constexpr double kRankTraceTol = 1e-8;
inline constexpr double kBoundaryTolFactor = 1e-9;
inline constexpr double kGlazmanTol = 1e-10;

/// Dense Hermitian matrix. Construction rejects inputs with
/// ‖M − M*‖_max > 1e−12·max(1, ‖M‖_max) or non-finite entries, and stores
/// the Hermitian part.
class HermitianOperator {
public:
    HermitianOperator() = default;

    explicit HermitianOperator(Matrix m)
    {
        if (m.rows() != m.cols()) {
            std::ostringstream os;
            os << "Hermitian operator must be square, got " << m.rows() << "x" << m.cols();
            throw PreconditionError(os.str());
        }
        if (m.rows() == 0)
            throw PreconditionError("Hermitian operator must have positive dimension");
        if (!m.allFinite())
            throw PreconditionError("Hermitian operator has non-finite entries");
        const double scale = std::max(1.0, max_abs(m));
        const double defect = max_abs(m - m.adjoint());
        if (defect > kHermiticityTol * scale) {
            std::ostringstream os;
            os << "matrix is not Hermitian: max|M - M*| = " << defect << " exceeds tolerance "
               << kHermiticityTol * scale;
            throw PreconditionError(os.str());
        }
        matrix_ = 0.5 * (m + m.adjoint());
    }

    static HermitianOperator zero(Index dim) { return HermitianOperator(Matrix::Zero(dim, dim)); }

    static HermitianOperator identity(Index dim) { return HermitianOperator(Matrix::Identity(dim, dim)); }

    static HermitianOperator diagonal(const RealVector& d)
    {
        return HermitianOperator(Matrix(d.cast<Complex>().asDiagonal()));
    }

    Index dim() const { return matrix_.rows(); }
    const Matrix& matrix() const { return matrix_; }

    /// Operator norm (max |eigenvalue|).
    double norm() const { return hermitian_norm(matrix_); }

    friend HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b)
    {
        require_same_dim(a, b);
        return HermitianOperator(Matrix(a.matrix_ + b.matrix_));
    }

    friend HermitianOperator operator-(const HermitianOperator& a, const HermitianOperator& b)
    {
        require_same_dim(a, b);
        return HermitianOperator(Matrix(a.matrix_ - b.matrix_));
    }

    friend HermitianOperator operator*(double s, const HermitianOperator& a)
    {
        return HermitianOperator(Matrix(s * a.matrix_));
    }

private:
    static void require_same_dim(const HermitianOperator& a, const HermitianOperator& b)
    {
        if (a.dim() != b.dim())
            throw PreconditionError("operator dimensions differ");
    }

    Matrix matrix_;
};

/// Ascending eigenvalues and the matching orthonormal eigenvector columns.
struct EigenSystem {
    RealVector values;
    Matrix vectors;

    Index dim() const { return values.size(); }

    /// max |λ|, the operator norm of the decomposed matrix.
    double norm() const { return values.size() == 0 ? 0.0 : values.cwiseAbs().maxCoeff(); }

    /// Default membership tolerance 1e−9·max(1, ‖A‖).
    double boundary_tol() const { return kBoundaryTolFactor * std::max(1.0, norm()); }
};

/// Eigendecomposition of a Hermitian operator. Deterministic for a fixed input.
/// Throws NumericalError if the solver does not converge or the
/// reconstruction residual is out of range.
inline EigenSystem eigh(const HermitianOperator& a)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix());
    if (es.info() != Eigen::Success)
        throw NumericalError("Hermitian eigensolver did not converge");
    EigenSystem out{es.eigenvalues(), es.eigenvectors()};

    const double scale = std::max(out.norm(), std::numeric_limits<double>::min());
    const Matrix recon = out.vectors * out.values.cast<Complex>().asDiagonal() * out.vectors.adjoint();
    const double residual = (a.matrix() - recon).norm();
    const double bound = 1e-10 * static_cast<double>(std::max<Index>(a.dim(), 1)) * scale;
    if (residual > bound) {
        std::ostringstream os;
        os << "eigendecomposition residual " << residual << " exceeds " << bound;
        throw NumericalError(os.str(), residual);
    }
    return out;
}

/// Overload for raw matrices; validates hermiticity first.
inline EigenSystem eigh(const Matrix& a) { return eigh(HermitianOperator(a)); }

/// ‖A − UΛU*‖ in operator norm.
inline double reconstruction_residual(const HermitianOperator& a, const EigenSystem& e)
{
    const Matrix recon = e.vectors * e.values.cast<Complex>().asDiagonal() * e.vectors.adjoint();
    return operator_norm(a.matrix() - recon);
}

/// Orthogonal projection together with an orthonormal basis of its range.
class OrthogonalProjection {
public:
    OrthogonalProjection() = default;

    /// From a matrix; validates ‖Π² − Π‖, ‖Π − Π*‖ ≤ 1e−10 and an integral trace.
    explicit OrthogonalProjection(Matrix m)
    {
        if (m.rows() != m.cols())
            throw PreconditionError("projection matrix must be square");
        const double idem = operator_norm(m * m - m);
        const double herm = operator_norm(m - m.adjoint());
        if (idem > kProjectorTol || herm > kProjectorTol) {
            std::ostringstream os;
            os << "not an orthogonal projection: |P^2-P| = " << idem << ", |P-P*| = " << herm;
            throw PreconditionError(os.str());
        }
        const double tr = m.trace().real();
        const double r = std::round(tr);
        if (std::abs(tr - r) > kRankTraceTol) {
            std::ostringstream os;
            os << "projection trace " << tr << " is not an integer";
            throw PreconditionError(os.str());
        }
        matrix_ = 0.5 * (m + m.adjoint());
        rank_ = static_cast<Index>(r);
        Eigen::SelfAdjointEigenSolver<Matrix> es(matrix_);
        basis_ = es.eigenvectors().rightCols(rank_);
    }

    /// Π = BB* for a basis with orthonormal columns.
    static OrthogonalProjection from_basis(Matrix basis)
    {
        OrthogonalProjection p;
        p.matrix_ = basis * basis.adjoint();
        p.matrix_ = 0.5 * (p.matrix_ + p.matrix_.adjoint()).eval();
        p.rank_ = basis.cols();
        p.basis_ = std::move(basis);
        return p;
    }

    static OrthogonalProjection zero(Index dim) { return from_basis(Matrix::Zero(dim, 0)); }

    static OrthogonalProjection identity(Index dim) { return from_basis(Matrix::Identity(dim, dim)); }

    Index dim() const { return matrix_.rows(); }
    Index rank() const { return rank_; }
    const Matrix& matrix() const { return matrix_; }
    const Matrix& basis() const { return basis_; }

    /// I − Π.
    Matrix complement() const { return Matrix::Identity(dim(), dim()) - matrix_; }

    /// Eigenvalues that fell within the boundary tolerance of a set endpoint
    /// when this projection was built; nonempty means membership was ambiguous.
    const std::vector<double>& ambiguous_eigenvalues() const { return ambiguous_; }
    void set_ambiguous_eigenvalues(std::vector<double> v) { ambiguous_ = std::move(v); }

private:
    Matrix matrix_;
    Matrix basis_;
    Index rank_ = 0;
    std::vector<double> ambiguous_;
};

/// Indices of eigenvalues that belong to `set` (closed comparison with
/// tolerance `tol`).
inline std::vector<Index> member_indices(const EigenSystem& e, const IntervalUnion& set, double tol)
{
    std::vector<Index> idx;
    for (Index k = 0; k < e.dim(); ++k)
        if (set.distance_to(e.values(k)) <= tol)
            idx.push_back(k);
    return idx;
}

/// E(S) = Σ_{λ_k ∈ S} u_k u_k*. Eigenvalues within `tol` of S are members;
/// those within `tol` of an endpoint of a non-degenerate interval are
/// recorded as ambiguous. Default tol: E.boundary_tol().
inline OrthogonalProjection spectral_projection(const EigenSystem& e, const IntervalUnion& set,
                                                std::optional<double> tol = std::nullopt)
{
    const double t = tol.value_or(e.boundary_tol());
    const auto idx = member_indices(e, set, t);
    Matrix basis(e.dim(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
        basis.col(static_cast<Index>(j)) = e.vectors.col(idx[j]);
    auto p = OrthogonalProjection::from_basis(std::move(basis));

    std::vector<double> ambiguous;
    for (Index k = 0; k < e.dim(); ++k)
        if (set.boundary_distance(e.values(k)) <= t)
            ambiguous.push_back(e.values(k));
    p.set_ambiguous_eigenvalues(std::move(ambiguous));
    return p;
}

struct CornerNorms {
    double pq_perp = 0.0;    ///< ‖P Q⊥‖
    double p_perp_q = 0.0;   ///< ‖P⊥ Q‖
    double difference = 0.0; ///< ‖P − Q‖, computed directly

    double corner_max() const { return std::max(pq_perp, p_perp_q); }
};

/// Both corner norms and ‖P − Q‖. The direct norm must agree with the larger
/// corner within 1e−10, otherwise NumericalError.
inline CornerNorms corner_norms(const OrthogonalProjection& p, const OrthogonalProjection& q)
{
    if (p.dim() != q.dim())
        throw PreconditionError("corner_norms: projection dimensions differ");
    CornerNorms c;
    c.pq_perp = operator_norm(p.matrix() * q.complement());
    c.p_perp_q = operator_norm(p.complement() * q.matrix());
    c.difference = operator_norm(p.matrix() - q.matrix());
    const double gap = std::abs(c.difference - c.corner_max());
    if (gap > kGlazmanTol) {
        std::ostringstream os;
        os << "|P-Q| = " << c.difference << " disagrees with max corner norm " << c.corner_max();
        throw NumericalError(os.str(), gap);
    }
    return c;
}

struct KernelDims {
    Index pq_perp_fixed = 0;  ///< dim Ker(P Q⊥ − I) = dim(Ran P ∩ Ker Q)
    Index p_perp_q_fixed = 0; ///< dim Ker(P⊥ Q − I) = dim(Ran Q ∩ Ker P)
    Index index = 0;          ///< rank P − rank Q

    bool operator==(const KernelDims&) const = default;
};

/// dim(Ran P ∩ Ker Q) = rank P − rank(Q B_P) with B_P an orthonormal basis
/// of Ran P.
inline Index range_kernel_intersection(const OrthogonalProjection& p, const OrthogonalProjection& q)
{
    if (p.rank() == 0)
        return 0;
    const Matrix constrained = q.matrix() * p.basis();
    return p.rank() - numeric_rank(singular_values(constrained), p.dim(), 1.0);
}

inline KernelDims kernel_dims(const OrthogonalProjection& p, const OrthogonalProjection& q)
{
    if (p.dim() != q.dim())
        throw PreconditionError("kernel_dims: projection dimensions differ");
    KernelDims k;
    k.pq_perp_fixed = range_kernel_intersection(p, q);
    k.p_perp_q_fixed = range_kernel_intersection(q, p);
    k.index = p.rank() - q.rank();
    return k;
}

/// The split spec(A) = σ ∪ Σ induced by a user set: σ-points are the
/// eigenvalues inside the set, Σ-points the rest, and gap = dist(σ, Σ).
struct SpectralSplit {
    IntervalUnion sigma;
    IntervalUnion Sigma;
    double gap = 0.0;
    std::vector<double> sigma_eigenvalues;
    std::vector<double> Sigma_eigenvalues;
};

/// Throws PreconditionError if either part is empty, the gap is zero, or a
/// Σ eigenvalue lies closer than `declared_gap` to the user set.
inline SpectralSplit split_spectrum(const EigenSystem& e, const IntervalUnion& sigma_set,
                                    std::optional<double> declared_gap = std::nullopt)
{
    const double tol = e.boundary_tol();
    SpectralSplit s;
    for (Index k = 0; k < e.dim(); ++k) {
        const double lam = e.values(k);
        if (sigma_set.distance_to(lam) <= tol) {
            s.sigma_eigenvalues.push_back(lam);
        } else {
            if (declared_gap && sigma_set.distance_to(lam) < *declared_gap - tol) {
                std::ostringstream os;
                os << "eigenvalue " << lam << " lies at distance " << sigma_set.distance_to(lam)
                   << " from sigma, below the declared gap " << *declared_gap;
                throw PreconditionError(os.str());
            }
            s.Sigma_eigenvalues.push_back(lam);
        }
    }
    if (s.sigma_eigenvalues.empty())
        throw PreconditionError("no eigenvalue of A lies in sigma");
    if (s.Sigma_eigenvalues.empty())
        throw PreconditionError("sigma contains the whole spectrum; Sigma is empty");
    s.sigma = IntervalUnion::points(s.sigma_eigenvalues);
    s.Sigma = IntervalUnion::points(s.Sigma_eigenvalues);
    s.gap = set_distance(s.sigma, s.Sigma);
    if (!(s.gap > tol))
        throw PreconditionError("spectral gap d = dist(sigma, Sigma) is zero");
    return s;
}

}  // namespace specgap
