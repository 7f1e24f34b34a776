#pragma once

// A-priori estimates for ‖P − Q‖ evaluated as checkable certificates, and
// the classification of an instance into the regime where each applies.

#include "specgap/errors.hpp"
#include "specgap/intervals.hpp"
#include "specgap/spectral.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace specgap {

/// ‖V‖/d below this ratio guarantees ‖P − Q‖ < 1 with no hull condition.
inline const double kGenericRatio = 2.0 / (2.0 + std::numbers::pi);
/// ‖V‖ < d/2: the gap cannot close.
inline constexpr double kGapRatio = 0.5;
inline const double kSqrt2Half = std::numbers::sqrt2 / 2.0;
/// Slack for comparing a measured norm against its bound.
inline constexpr double kBoundSlack = 1e-8;

enum class Regime { theorem1_i, theorem1_ii, subordinated, overcritical, open_window };

inline const char* to_string(Regime r)
{
    switch (r) {
    case Regime::theorem1_i: return "theorem1-i";
    case Regime::theorem1_ii: return "theorem1-ii";
    case Regime::subordinated: return "subordinated";
    case Regime::overcritical: return "overcritical";
    case Regime::open_window: return "open-window";
    }
    return "?";
}

/// Regimes in which ‖P − Q‖ < 1 is a theorem.
inline bool unit_ceiling_asserted(Regime r)
{
    return r == Regime::theorem1_i || r == Regime::theorem1_ii || r == Regime::subordinated;
}

/// Subordinated spectra take precedence below the critical ratio 1/2; then
/// the generic ratio 2/(2+π); then a single hull condition.
inline Regime classify_ratio(double ratio, HullRelation hull)
{
    if (!(ratio >= 0.0))
        throw PreconditionError("norm ratio must be non-negative");
    if (ratio >= kGapRatio)
        return Regime::overcritical;
    if (hull == HullRelation::subordinated)
        return Regime::subordinated;
    if (ratio < kGenericRatio)
        return Regime::theorem1_i;
    if (has_hull_condition(hull))
        return Regime::theorem1_ii;
    return Regime::open_window;
}

enum class BoundKind {
    estimate, ///< upper bound; violated if measured > value + slack
    ceiling   ///< strict ceiling; violated if measured ≥ value − slack
};

struct BoundValue {
    std::string name;
    double value = 0.0;
    bool applicable = false;
    bool vacuous = false; ///< value ≥ 1, so the bound says nothing about ‖P − Q‖ < 1
    BoundKind kind = BoundKind::estimate;
    double measured = std::numeric_limits<double>::quiet_NaN();

    bool violated(double slack = kBoundSlack) const
    {
        if (!applicable || std::isnan(measured))
            return false;
        if (kind == BoundKind::ceiling)
            return measured >= value - slack;
        return measured > value + slack;
    }

    /// value − measured (negative means violated).
    double slack() const { return value - measured; }
};

/// sin(½ arctan x).
inline double half_angle_sine(double x) { return std::sin(0.5 * std::atan(x)); }

/// Every estimate with its applicability under the given norms and hull
/// layout. Inapplicable bounds are listed with applicable = false and a NaN
/// value; they are never evaluated outside their hypotheses.
inline std::vector<BoundValue> apriori_bounds(double d, double v_norm, double v_diag_norm, double v_off_norm,
                                              Regime regime, HullRelation hull)
{
    if (!(d > 0.0))
        throw PreconditionError("apriori_bounds: gap d must be positive");
    if (v_norm < 0.0 || v_diag_norm < 0.0 || v_off_norm < 0.0)
        throw PreconditionError("apriori_bounds: norms must be non-negative");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<BoundValue> out;
    auto add = [&](std::string name, bool applicable, auto&& value, BoundKind kind = BoundKind::estimate) {
        BoundValue b;
        b.name = std::move(name);
        b.applicable = applicable;
        b.kind = kind;
        b.value = applicable ? value() : nan;
        b.vacuous = applicable && kind == BoundKind::estimate && b.value >= 1.0;
        out.push_back(std::move(b));
    };

    const bool below_d = v_norm < d;
    const bool ngc = 2.0 * v_norm < d;
    const bool sub = hull == HullRelation::subordinated;
    const bool offdiag = v_diag_norm <= 1e-12 * std::max(1.0, v_norm);

    add("corner_generic", below_d, [&] { return std::numbers::pi / 2.0 * v_norm / (d - v_norm); });
    add("corner_hull", below_d && has_hull_condition(hull), [&] { return v_norm / (d - v_norm); });
    add("tan2theta_offdiag", sub && ngc && offdiag, [&] { return half_angle_sine(2.0 * v_norm / d); });
    add("tan2theta_split", sub && ngc && d - 2.0 * v_diag_norm > 0.0,
        [&] { return half_angle_sine(2.0 * v_off_norm / (d - 2.0 * v_diag_norm)); });
    add("tan2theta_general", sub && ngc, [&] { return half_angle_sine(2.0 * v_norm / (d - 2.0 * v_norm)); });
    add("sqrt2_ceiling", sub && ngc, [] { return kSqrt2Half; });
    add("unit_ceiling", unit_ceiling_asserted(regime), [] { return 1.0; }, BoundKind::ceiling);
    return out;
}

/// V = V_diag + V_off relative to Ran P ⊕ Ran P⊥: V_diag = PVP + P⊥VP⊥ and
/// V_off = PVP⊥ + P⊥VP.
inline std::pair<HermitianOperator, HermitianOperator> split_diag_offdiag(const HermitianOperator& v,
                                                                          const OrthogonalProjection& p)
{
    if (v.dim() != p.dim())
        throw PreconditionError("split_diag_offdiag: dimension mismatch");
    const Matrix& pm = p.matrix();
    const Matrix pc = p.complement();
    const Matrix& vm = v.matrix();
    Matrix diag = pm * vm * pm + pc * vm * pc;
    Matrix off = pm * vm * pc + pc * vm * pm;
    return {HermitianOperator(std::move(diag)), HermitianOperator(std::move(off))};
}

/// Measured ‖E_A(δ) E_B(Δ)‖ against the bound on it.
struct DavisKahanCertificate {
    enum class Variant { generic, hull_separated };

    double measured = 0.0;
    double bound = 0.0;
    double distance = 0.0;
    Variant variant = Variant::generic;

    bool holds(double slack = kBoundSlack) const { return measured <= bound + slack; }
};

inline const char* to_string(DavisKahanCertificate::Variant v)
{
    return v == DavisKahanCertificate::Variant::generic ? "generic" : "hull-separated";
}

/// dist(δ,Δ)·‖E_A(δ)E_B(Δ)‖ ≤ (π/2)‖A − B‖, improved to ‖A − B‖ when a
/// convex-hull condition separates δ and Δ.
inline DavisKahanCertificate davis_kahan_certificate(const HermitianOperator& a, const HermitianOperator& b,
                                                     const IntervalUnion& delta, const IntervalUnion& Delta)
{
    if (a.dim() != b.dim())
        throw PreconditionError("davis_kahan_certificate: dimension mismatch");
    DavisKahanCertificate c;
    c.distance = set_distance(delta, Delta);
    if (!(c.distance > 0.0))
        throw PreconditionError("davis_kahan_certificate: dist(delta, Delta) = 0, bound is vacuous");
    const auto ea = eigh(a);
    const auto eb = eigh(b);
    const auto pa = spectral_projection(ea, delta);
    const auto pb = spectral_projection(eb, Delta);
    c.measured = operator_norm(pa.matrix() * pb.matrix());
    const double diff = hermitian_norm(a.matrix() - b.matrix());
    if (has_hull_condition(convex_hull_disjoint(delta, Delta))) {
        c.variant = DavisKahanCertificate::Variant::hull_separated;
        c.bound = diff / c.distance;
    } else {
        c.bound = std::numbers::pi / 2.0 * diff / c.distance;
    }
    return c;
}

/// Regime of (A, V) with σ given as a set; Σ = spec(A) \ σ and d is the
/// measured gap.
inline Regime regime_classify(const HermitianOperator& a, const HermitianOperator& v, const IntervalUnion& sigma)
{
    const auto split = split_spectrum(eigh(a), sigma);
    return classify_ratio(v.norm() / split.gap, convex_hull_disjoint(split.sigma, split.Sigma));
}

struct BoundReport {
    double d = 0.0;
    double v_norm = 0.0;
    double v_diag_norm = 0.0;
    double v_off_norm = 0.0;
    Regime regime = Regime::theorem1_i;
    HullRelation hull = HullRelation::none;
    std::vector<BoundValue> bounds;
    CornerNorms measured;
    KernelDims kernel;
    Index rank_p = 0;
    Index rank_q = 0;
    std::vector<double> sigma_eigenvalues;
    std::vector<double> Sigma_eigenvalues;
    std::vector<std::string> violations;

    double ratio() const { return v_norm / d; }
    bool ceiling_asserted() const { return unit_ceiling_asserted(regime); }

    const BoundValue* find(const std::string& name) const
    {
        for (const auto& b : bounds)
            if (b.name == name)
                return &b;
        return nullptr;
    }
};

/// Full analysis of one instance: split, P, Q = E_{A+V}(U_{d/2}(σ)), corner
/// norms, kernel dimensions, every applicable bound and its violations.
inline BoundReport analyze_instance(const HermitianOperator& a, const HermitianOperator& v,
                                    const IntervalUnion& sigma_set,
                                    std::optional<double> declared_gap = std::nullopt)
{
    if (a.dim() != v.dim())
        throw PreconditionError("analyze_instance: dimension mismatch between A and V");
    BoundReport r;
    const auto ea = eigh(a);
    const auto split = split_spectrum(ea, sigma_set, declared_gap);
    r.d = split.gap;
    r.sigma_eigenvalues = split.sigma_eigenvalues;
    r.Sigma_eigenvalues = split.Sigma_eigenvalues;
    r.v_norm = v.norm();
    r.hull = convex_hull_disjoint(split.sigma, split.Sigma);
    r.regime = classify_ratio(r.v_norm / r.d, r.hull);

    const auto p = spectral_projection(ea, split.sigma);
    const auto eb = eigh(a + v);
    const auto q = spectral_projection(eb, split.sigma.neighborhood(r.d / 2.0));
    r.rank_p = p.rank();
    r.rank_q = q.rank();
    r.measured = corner_norms(p, q);
    r.kernel = kernel_dims(p, q);

    const auto [vd, vo] = split_diag_offdiag(v, p);
    r.v_diag_norm = vd.norm();
    r.v_off_norm = vo.norm();

    r.bounds = apriori_bounds(r.d, r.v_norm, r.v_diag_norm, r.v_off_norm, r.regime, r.hull);
    for (auto& b : r.bounds)
        b.measured = r.measured.difference;

    // Corner certificates: δ = σ against the closed ‖V‖-neighborhood of Σ and
    // the mirrored pair. Both stay meaningful for ‖V‖ < d.
    if (r.v_norm < r.d && r.v_norm > 0.0) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        auto certificate = [&](const std::string& name, const IntervalUnion& from, const IntervalUnion& away,
                               const OrthogonalProjection& pa) {
            const auto far = away.neighborhood(r.v_norm);
            std::vector<Interval> closed;
            for (auto iv : far.intervals()) {
                iv.lo_closed = iv.hi_closed = true;
                closed.push_back(iv);
            }
            const IntervalUnion delta_set(std::move(closed));
            const auto pb = spectral_projection(eb, delta_set);
            const double dist = set_distance(from, delta_set);
            const bool hull_sep = has_hull_condition(convex_hull_disjoint(from, delta_set));
            BoundValue b;
            b.name = name;
            b.applicable = dist > 0.0;
            b.value = b.applicable ? (hull_sep ? 1.0 : std::numbers::pi / 2.0) * r.v_norm / dist : nan;
            b.vacuous = b.applicable && b.value >= 1.0;
            b.measured = operator_norm(pa.matrix() * pb.matrix());
            r.bounds.push_back(std::move(b));
        };
        certificate("certificate_sigma", split.sigma, split.Sigma, p);
        const auto p_Sigma = spectral_projection(ea, split.Sigma);
        certificate("certificate_Sigma", split.Sigma, split.sigma, p_Sigma);
    }

    for (const auto& b : r.bounds) {
        if (b.violated()) {
            std::ostringstream os;
            os.precision(17);
            os << b.name << ": measured " << b.measured << " vs bound " << b.value;
            r.violations.push_back(os.str());
        }
    }
    return r;
}

struct GapCheckWitness {
    double s = 0.0;
    double eigenvalue = 0.0;
};

struct GapCheckResult {
    bool pass = true;
    double lo = 0.0; ///< a + ‖V‖
    double hi = 0.0; ///< b − ‖V‖
    std::vector<GapCheckWitness> witnesses;
};

/// Checks that no eigenvalue of A + sV enters (a + ‖V‖, b − ‖V‖) for s in the
/// grid. Requires (a, b) to contain no eigenvalue of A and 2‖V‖ < b − a.
inline GapCheckResult gap_nonclosing_check(const HermitianOperator& a, const HermitianOperator& v, double lo,
                                           double hi, const std::vector<double>& s_grid)
{
    if (a.dim() != v.dim())
        throw PreconditionError("gap_nonclosing_check: dimension mismatch");
    if (!(lo < hi))
        throw PreconditionError("gap_nonclosing_check: need a < b");
    const double vn = v.norm();
    if (!(2.0 * vn < hi - lo)) {
        std::ostringstream os;
        os << "gap_nonclosing_check: 2|V| = " << 2.0 * vn << " is not below b - a = " << hi - lo;
        throw PreconditionError(os.str());
    }
    const auto ea = eigh(a);
    for (Index k = 0; k < ea.dim(); ++k) {
        if (ea.values(k) > lo && ea.values(k) < hi) {
            std::ostringstream os;
            os << "gap_nonclosing_check: eigenvalue " << ea.values(k) << " of A lies in (a, b)";
            throw PreconditionError(os.str());
        }
    }
    for (double s : s_grid)
        if (s < -1.0 || s > 1.0)
            throw PreconditionError("gap_nonclosing_check: s must lie in [-1, 1]");

    GapCheckResult out;
    out.lo = lo + vn;
    out.hi = hi - vn;
    for (double s : s_grid) {
        const auto e = eigh(a + s * v);
        for (Index k = 0; k < e.dim(); ++k) {
            const double lam = e.values(k);
            if (lam > out.lo && lam < out.hi)
                out.witnesses.push_back({s, lam});
        }
    }
    out.pass = out.witnesses.empty();
    return out;
}

}  // namespace specgap
