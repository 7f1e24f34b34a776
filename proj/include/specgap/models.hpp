#pragma once

// Two explicit models: the sharp 2×2 family and a grid discretization of
// the rank-one coupled resonance model on L²(0,1) ⊕ ℂ, with its scalar
// eigenvalue condition (the secular function).

#include "specgap/bounds.hpp"
#include "specgap/errors.hpp"
#include "specgap/intervals.hpp"
#include "specgap/spectral.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

namespace specgap::models {

// ---------------------------------------------------------------------------
// 2×2 family: A = diag(0, 1), V = [[1/2−ε, √ε/2], [√ε/2, −1/2+ε]], σ = {0}.

struct TwoByTwoFamily {
    double epsilon = 0.25;

    explicit TwoByTwoFamily(double eps) : epsilon(eps)
    {
        if (!(eps > 0.0 && eps < 0.75)) {
            std::ostringstream os;
            os << "2x2 family requires epsilon in (0, 3/4), got " << eps;
            throw PreconditionError(os.str());
        }
    }

    HermitianOperator a() const { return HermitianOperator::diagonal(RealVector{{0.0, 1.0}}); }

    HermitianOperator v() const
    {
        const double e = epsilon;
        Matrix m(2, 2);
        m << 0.5 - e, std::sqrt(e) / 2.0, std::sqrt(e) / 2.0, -0.5 + e;
        return HermitianOperator(m);
    }

    /// 2√ε + √(1 + 4ε)
    double mixing() const { return 2.0 * std::sqrt(epsilon) + std::sqrt(1.0 + 4.0 * epsilon); }

    /// ½√(1 − 3ε + 4ε²)
    double v_norm() const { return 0.5 * std::sqrt(1.0 - 3.0 * epsilon + 4.0 * epsilon * epsilon); }

    /// [1 + (2√ε + √(1+4ε))²]^{−1/2}
    double pq_norm() const
    {
        const double u = mixing();
        return 1.0 / std::sqrt(1.0 + u * u);
    }

    Matrix q() const
    {
        const double u = mixing();
        Matrix m(2, 2);
        m << u * u, -u, -u, 1.0;
        return m / (1.0 + u * u);
    }
};

struct Example2x2Result {
    double epsilon = 0.0;
    double v_norm_closed = 0.0;
    double v_norm_numeric = 0.0;
    double pq_closed = 0.0;
    double pq_numeric = 0.0;
    double q_entry_error = 0.0; ///< max |Q_numeric − Q_closed| entrywise
    Regime regime = Regime::theorem1_i;
    BoundReport report;
    Matrix q_closed;
    Matrix q_numeric;

    double max_error() const
    {
        return std::max({std::abs(v_norm_closed - v_norm_numeric), std::abs(pq_closed - pq_numeric), q_entry_error});
    }
};

/// Closed forms next to the numeric pipeline (eigh → projections → norms).
inline Example2x2Result example2x2(double eps)
{
    const TwoByTwoFamily fam(eps);
    Example2x2Result r;
    r.epsilon = eps;
    r.v_norm_closed = fam.v_norm();
    r.pq_closed = fam.pq_norm();
    r.q_closed = fam.q();

    const auto a = fam.a();
    const auto v = fam.v();
    const auto sigma = IntervalUnion::point(0.0);
    r.report = analyze_instance(a, v, sigma);
    r.regime = r.report.regime;
    r.v_norm_numeric = operator_norm(v.matrix());
    r.pq_numeric = r.report.measured.difference;
    const auto q = spectral_projection(eigh(a + v), IntervalUnion::open(-0.5, 0.5));
    r.q_numeric = q.matrix();
    r.q_entry_error = max_abs(r.q_numeric - r.q_closed);
    return r;
}

// ---------------------------------------------------------------------------
// Resonance model.

struct ResonanceModel {
    double epsilon = 0.3;
    int grid_size = 100;

    ResonanceModel(double eps, int n) : epsilon(eps), grid_size(n)
    {
        if (!(eps > 0.0) || !std::isfinite(eps))
            throw PreconditionError("resonance model requires epsilon > 0");
        if (n < 2)
            throw PreconditionError("resonance model requires grid size N >= 2");
    }

    /// Midpoint node μ_k = (k − 1/2)/N, k = 1..N.
    double node(int k) const { return (k - 0.5) / grid_size; }

    static double weight_function(double mu) { return std::sqrt(mu * (1.0 - mu)); }

    Index dim() const { return grid_size + 1; }

    /// Index of the ℂ-block basis vector e.
    Index coupled_index() const { return grid_size; }
};

/// A_N = diag(μ_1..μ_N, −1); V_N = [[−(1/2+ε)I, c], [c*, 1/2+ε]] with
/// c_k = √ε·w(μ_k)/√N.
inline std::pair<HermitianOperator, HermitianOperator> resonance_operators(const ResonanceModel& m)
{
    const Index n = m.dim();
    const int grid = m.grid_size;
    RealVector diag(n);
    for (int k = 1; k <= grid; ++k)
        diag(k - 1) = m.node(k);
    diag(grid) = -1.0;

    const double shift = 0.5 + m.epsilon;
    Matrix v = Matrix::Zero(n, n);
    for (int k = 1; k <= grid; ++k) {
        v(k - 1, k - 1) = -shift;
        const double c = std::sqrt(m.epsilon) * ResonanceModel::weight_function(m.node(k)) / std::sqrt(grid);
        v(k - 1, grid) = c;
        v(grid, k - 1) = c;
    }
    v(grid, grid) = shift;
    return {HermitianOperator::diagonal(diag), HermitianOperator(std::move(v))};
}

/// √((1/2+ε)² + ε/6), the continuum norm of V.
inline double resonance_v_norm(double eps) { return std::sqrt((0.5 + eps) * (0.5 + eps) + eps / 6.0); }

/// First-order expansion 1/2 + (7/6)ε.
inline double resonance_v_norm_expansion(double eps) { return 0.5 + 7.0 / 6.0 * eps; }

enum class SecularBranch { left, right, band };

inline const char* to_string(SecularBranch b)
{
    switch (b) {
    case SecularBranch::left: return "left";
    case SecularBranch::right: return "right";
    case SecularBranch::band: return "band";
    }
    return "?";
}

/// left: λ < −1/2−ε; right: λ > 1/2−ε; band otherwise (closed).
inline SecularBranch secular_branch(double eps, double lambda)
{
    if (lambda < -0.5 - eps)
        return SecularBranch::left;
    if (lambda > 0.5 - eps)
        return SecularBranch::right;
    return SecularBranch::band;
}

struct SecularEvaluation {
    double epsilon = 0.0;
    double lambda = 0.0;
    double value = 0.0;
    SecularBranch branch = SecularBranch::band;
};

/// ∫₀¹ μ(1−μ)/(μ − c) dμ = (1/2 − c) + c(1−c) ln|(1−c)/c| for c ∉ [0,1].
inline double coupling_integral(double c)
{
    if (c >= 0.0 && c <= 1.0)
        throw PreconditionError("coupling integral is singular for c in [0, 1]");
    return (0.5 - c) + c * (1.0 - c) * std::log(std::abs((1.0 - c) / c));
}

/// λ + 1/2 − ε + ε ∫₀¹ μ(1−μ)/(μ − 1/2 − ε − λ) dμ; its zeros off the band
/// are the eigenvalues of the continuum model.
inline double secular(double eps, double lambda)
{
    if (secular_branch(eps, lambda) == SecularBranch::band) {
        std::ostringstream os;
        os << "secular function evaluated in the band [" << -0.5 - eps << ", " << 0.5 - eps << "] at lambda = "
           << lambda;
        throw PreconditionError(os.str());
    }
    return lambda + 0.5 - eps + eps * coupling_integral(0.5 + eps + lambda);
}

inline SecularEvaluation evaluate_secular(double eps, double lambda)
{
    return {eps, lambda, secular(eps, lambda), secular_branch(eps, lambda)};
}

/// Same function with the integral done by tanh-sinh quadrature, whose
/// endpoint clustering copes with c just outside [0, 1].
inline double secular_quadrature(double eps, double lambda)
{
    if (secular_branch(eps, lambda) == SecularBranch::band)
        throw PreconditionError("secular_quadrature: lambda in the band");
    const double c = 0.5 + eps + lambda;
    auto f = [c](double mu) { return mu * (1.0 - mu) / (mu - c); };
    double err = 0.0;
    boost::math::quadrature::tanh_sinh<double> rule;
    const double integral = rule.integrate(f, 0.0, 1.0, 1e-14, &err);
    return lambda + 0.5 - eps + eps * integral;
}

/// Limit of the secular function at the right band edge, λ → (1/2−ε)⁺.
inline double secular_right_edge(double eps) { return 1.0 - 2.5 * eps; }

/// Limit at the left band edge, λ → (−1/2−ε)⁻.
inline double secular_left_edge(double eps) { return -1.5 * eps; }

/// The resonance threshold: eigenvalue exists iff ε > 2/5.
inline constexpr double kResonanceThreshold = 0.4;

struct EigenvalueScan {
    double epsilon = 0.0;
    int root_count = 0;
    std::vector<double> roots;
};

/// The secular function is strictly increasing on each branch. The left
/// branch stays below −(3/2)ε; the right branch has one root iff its edge
/// value 1 − (5/2)ε is negative. Roots are located by bisection to 1e−12.
inline EigenvalueScan eigenvalue_scan(double eps)
{
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw PreconditionError("eigenvalue_scan requires epsilon > 0");
    if (std::abs(eps - kResonanceThreshold) < 1e-15)
        throw PreconditionError("eigenvalue_scan: epsilon = 2/5 is the degenerate threshold");

    EigenvalueScan out;
    out.epsilon = eps;
    if (secular_right_edge(eps) < 0.0) {
        const double edge = 0.5 - eps;
        double lo = edge;
        double step = 1.0;
        double hi = edge + step;
        while (secular(eps, hi) <= 0.0) {
            lo = hi;
            step *= 2.0;
            hi = edge + step;
        }
        while (hi - lo > 1e-12) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= edge || secular(eps, mid) < 0.0)
                lo = mid;
            else
                hi = mid;
        }
        out.roots.push_back(0.5 * (lo + hi));
    }
    out.root_count = static_cast<int>(out.roots.size());
    return out;
}

/// Bisection on ε for the change in root count between lo (no root) and hi
/// (one root). Stops within `tol`, or when a midpoint hits the threshold.
inline double locate_root_transition(double lo, double hi, double tol = 1e-7)
{
    auto count = [](double e) { return eigenvalue_scan(e).root_count; };
    if (count(lo) != 0 || count(hi) != 1)
        throw PreconditionError("locate_root_transition: bracket does not straddle the transition");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        try {
            (count(mid) == 0 ? lo : hi) = mid;
        } catch (const PreconditionError&) {
            return mid;
        }
    }
    return 0.5 * (lo + hi);
}

struct OverlapSample {
    int grid_size = 0;
    double max_overlap = 0.0; ///< max_k |⟨e, q_k⟩| over eigenvectors q_k of A_N + V_N
};

inline double max_coupled_overlap(const ResonanceModel& m)
{
    const auto [a, v] = resonance_operators(m);
    const auto e = eigh(a + v);
    return e.vectors.row(m.coupled_index()).cwiseAbs().maxCoeff();
}

inline std::vector<OverlapSample> overlap_decay(double eps, const std::vector<int>& grid_sizes)
{
    std::vector<OverlapSample> out;
    out.reserve(grid_sizes.size());
    for (int n : grid_sizes)
        out.push_back({n, max_coupled_overlap(ResonanceModel(eps, n))});
    return out;
}

inline bool strictly_decreasing(const std::vector<OverlapSample>& xs)
{
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i].max_overlap < xs[i - 1].max_overlap))
            return false;
    return true;
}

struct RescaledInstance {
    HermitianOperator a;
    HermitianOperator v;
    IntervalUnion sigma;
    double factor = 1.0;
};

/// t ↦ (target_d/d)·t applied to A, V and σ, with d the measured gap.
inline RescaledInstance rescale_instance(const HermitianOperator& a, const HermitianOperator& v,
                                         const IntervalUnion& sigma, double target_d)
{
    if (!(target_d > 0.0) || !std::isfinite(target_d))
        throw PreconditionError("rescale_instance: target gap must be positive");
    const auto split = split_spectrum(eigh(a), sigma);
    const double k = target_d / split.gap;
    return {k * a, k * v, sigma.scaled(k), k};
}

}  // namespace specgap::models
