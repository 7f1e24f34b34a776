#pragma once

// Seeded random instances satisfying the separation hypothesis, bound
// sweeps over (dim, ratio, layout) cells, a derivative-free search for
// large ‖P − Q‖ on the sphere ‖V‖ = ratio·d, and the overcritical window
// probe.

#include "specgap/bounds.hpp"
#include "specgap/errors.hpp"
#include "specgap/intervals.hpp"
#include "specgap/spectral.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace specgap::explore {

inline constexpr Index kMaxDim = 64;
/// Candidates this close to a ceiling are recomputed in extended precision.
inline constexpr double kReverifyWindow = 1e-6;

/// SplitMix64 finalizer; used to derive independent cell and trial seeds.
inline std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index)
{
    return mix_seed(parent ^ mix_seed(index + 0x51ed2701ULL));
}

using Rng = std::mt19937_64;

/// Arrangement of σ relative to Σ on the real line.
enum class Layout {
    subordinated,    ///< hulls disjoint
    sigma_hull_free, ///< σ inside a gap of Σ: conv.hull(σ) ∩ Σ = ∅ only
    Sigma_hull_free, ///< Σ inside a gap of σ
    interleaved,     ///< no hull condition (σ, Σ, σ, Σ, ...)
    mixed            ///< one of the above, drawn per trial
};

inline const char* to_string(Layout l)
{
    switch (l) {
    case Layout::subordinated: return "subordinated";
    case Layout::sigma_hull_free: return "sigma-hull-free";
    case Layout::Sigma_hull_free: return "Sigma-hull-free";
    case Layout::interleaved: return "interleaved";
    case Layout::mixed: return "mixed";
    }
    return "?";
}

inline Layout parse_layout(const std::string& s)
{
    for (Layout l : {Layout::subordinated, Layout::sigma_hull_free, Layout::Sigma_hull_free, Layout::interleaved,
                     Layout::mixed})
        if (s == to_string(l))
            return l;
    throw PreconditionError("unknown layout '" + s + "'");
}

/// Smallest dimension for which a layout can be realized.
inline Index min_dim(Layout l)
{
    switch (l) {
    case Layout::subordinated: return 2;
    case Layout::sigma_hull_free:
    case Layout::Sigma_hull_free: return 3;
    case Layout::interleaved: return 4;
    case Layout::mixed: return 2;
    }
    return 2;
}

/// Random perturbation families. All are rescaled to ‖V‖ = ratio·d.
enum class PerturbationShape { dense, rank_one, off_diagonal };

inline const char* to_string(PerturbationShape s)
{
    switch (s) {
    case PerturbationShape::dense: return "dense";
    case PerturbationShape::rank_one: return "rank-one";
    case PerturbationShape::off_diagonal: return "off-diagonal";
    }
    return "?";
}

struct InstanceSpec {
    std::vector<double> sigma_eigs;
    std::vector<double> Sigma_eigs;
    double declared_gap = 1.0;
    double v_ratio = 0.0;
    std::uint64_t seed = 0;
    PerturbationShape shape = PerturbationShape::dense;

    Index dim() const { return static_cast<Index>(sigma_eigs.size() + Sigma_eigs.size()); }

    /// min |x − y| over x ∈ sigma_eigs, y ∈ Sigma_eigs.
    double measured_gap() const
    {
        double best = std::numeric_limits<double>::infinity();
        for (double x : sigma_eigs)
            for (double y : Sigma_eigs)
                best = std::min(best, std::abs(x - y));
        return best;
    }

    /// Rounding allowance for the gap check, on the scale of the eigenvalues.
    double gap_tol() const
    {
        double m = 1.0;
        for (double x : sigma_eigs)
            m = std::max(m, std::abs(x));
        for (double x : Sigma_eigs)
            m = std::max(m, std::abs(x));
        return kBoundaryTolFactor * m;
    }

    IntervalUnion sigma_set() const { return IntervalUnion::points(sigma_eigs); }
    IntervalUnion Sigma_set() const { return IntervalUnion::points(Sigma_eigs); }

    void validate() const
    {
        if (sigma_eigs.empty() || Sigma_eigs.empty())
            throw PreconditionError("instance spec needs nonempty sigma and Sigma eigenvalue lists");
        if (dim() > kMaxDim) {
            std::ostringstream os;
            os << "instance dimension " << dim() << " exceeds the ceiling " << kMaxDim;
            throw PreconditionError(os.str());
        }
        for (double x : sigma_eigs)
            if (!std::isfinite(x))
                throw PreconditionError("non-finite sigma eigenvalue");
        for (double x : Sigma_eigs)
            if (!std::isfinite(x))
                throw PreconditionError("non-finite Sigma eigenvalue");
        if (!(declared_gap > 0.0))
            throw PreconditionError("declared gap must be positive");
        if (measured_gap() < declared_gap - gap_tol()) {
            std::ostringstream os;
            os << "gap violation: min distance " << measured_gap() << " below declared gap " << declared_gap;
            throw PreconditionError(os.str());
        }
        if (!(v_ratio >= 0.0) || !std::isfinite(v_ratio))
            throw PreconditionError("v_ratio must be finite and non-negative");
    }
};

struct Instance {
    HermitianOperator a;
    HermitianOperator v;
    Matrix eigenbasis; ///< Haar unitary conjugating diag(σ, Σ) to A
};

inline Matrix complex_gaussian(Index rows, Index cols, Rng& rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) {
            const double re = g(rng);
            const double im = g(rng);
            m(i, j) = Complex(re, im) / std::sqrt(2.0);
        }
    return m;
}

/// Haar unitary: QR of a complex Ginibre matrix with the phases of diag(R)
/// moved into Q.
inline Matrix haar_unitary(Index n, Rng& rng)
{
    const Matrix z = complex_gaussian(n, n, rng);
    Eigen::HouseholderQR<Matrix> qr(z);
    Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < n; ++j) {
        const Complex d = r(j, j);
        const double mag = std::abs(d);
        q.col(j) *= mag > 0.0 ? d / mag : Complex(1.0, 0.0);
    }
    return q;
}

inline Matrix random_hermitian(Index n, Rng& rng)
{
    const Matrix g = complex_gaussian(n, n, rng);
    return 0.5 * (g + g.adjoint());
}

inline Matrix scale_to_norm(const Matrix& h, double target)
{
    const double nrm = hermitian_norm(h);
    if (target == 0.0 || nrm == 0.0)
        return Matrix::Zero(h.rows(), h.cols());
    return h * (target / nrm);
}

/// A = U diag(σ, Σ) U* with U Haar (seeded); V a seeded random Hermitian
/// matrix with ‖V‖ = v_ratio·d, d the measured gap.
inline Instance random_instance(const InstanceSpec& spec)
{
    spec.validate();
    Rng rng(spec.seed);
    const Index n = spec.dim();
    const Index r = static_cast<Index>(spec.sigma_eigs.size());
    RealVector eig(n);
    for (Index k = 0; k < r; ++k)
        eig(k) = spec.sigma_eigs[static_cast<std::size_t>(k)];
    for (Index k = r; k < n; ++k)
        eig(k) = spec.Sigma_eigs[static_cast<std::size_t>(k - r)];
    const Matrix u = haar_unitary(n, rng);
    const Matrix a = u * eig.cast<Complex>().asDiagonal() * u.adjoint();

    Matrix h;
    switch (spec.shape) {
    case PerturbationShape::dense: h = random_hermitian(n, rng); break;
    case PerturbationShape::rank_one: {
        const Vector x = complex_gaussian(n, 1, rng).col(0);
        std::uniform_int_distribution<int> sign(0, 1);
        h = (sign(rng) ? 1.0 : -1.0) * (x * x.adjoint());
        break;
    }
    case PerturbationShape::off_diagonal: {
        // Hermitian with zero σσ and ΣΣ blocks in the eigenbasis of A.
        const Matrix b = complex_gaussian(r, n - r, rng);
        Matrix blk = Matrix::Zero(n, n);
        blk.topRightCorner(r, n - r) = b;
        blk.bottomLeftCorner(n - r, r) = b.adjoint();
        h = u * blk * u.adjoint();
        break;
    }
    }
    const double d = spec.measured_gap();
    return {HermitianOperator(a), HermitianOperator(scale_to_norm(h, spec.v_ratio * d)), u};
}

/// Draws eigenvalue placements for a layout: clusters of σ and Σ points with
/// internal spread ≤ `spread` and exactly `gap` between the closest pair of
/// unlike clusters.
inline InstanceSpec make_spec(Index dim, double ratio, Layout layout, std::uint64_t seed, double gap = 1.0,
                              double spread = 1.0)
{
    if (dim > kMaxDim)
        throw PreconditionError("make_spec: dimension above ceiling");
    Rng rng(mix_seed(seed ^ 0x5eedULL));
    if (layout == Layout::mixed) {
        std::vector<Layout> feasible;
        for (Layout l : {Layout::subordinated, Layout::sigma_hull_free, Layout::Sigma_hull_free, Layout::interleaved})
            if (dim >= min_dim(l))
                feasible.push_back(l);
        if (feasible.empty())
            throw PreconditionError("make_spec: dimension too small for any layout");
        layout = feasible[std::uniform_int_distribution<std::size_t>(0, feasible.size() - 1)(rng)];
    }
    if (dim < min_dim(layout)) {
        std::ostringstream os;
        os << "layout " << to_string(layout) << " needs dimension >= " << min_dim(layout) << ", got " << dim;
        throw PreconditionError(os.str());
    }

    // Cluster pattern: true = σ cluster.
    std::vector<bool> pattern;
    std::uniform_int_distribution<int> coin(0, 1);
    switch (layout) {
    case Layout::subordinated: pattern = coin(rng) ? std::vector<bool>{true, false} : std::vector<bool>{false, true}; break;
    case Layout::sigma_hull_free: pattern = {false, true, false}; break;
    case Layout::Sigma_hull_free: pattern = {true, false, true}; break;
    case Layout::interleaved: {
        const Index max_clusters = std::min<Index>(dim, 6);
        const Index clusters = std::uniform_int_distribution<Index>(4, std::max<Index>(4, max_clusters))(rng);
        const bool first = coin(rng);
        for (Index c = 0; c < clusters; ++c)
            pattern.push_back(c % 2 == 0 ? first : !first);
        break;
    }
    case Layout::mixed: break;
    }

    // Distribute dim points over the clusters, at least one each.
    const std::size_t nc = pattern.size();
    std::vector<Index> counts(nc, 1);
    std::uniform_int_distribution<std::size_t> pick(0, nc - 1);
    for (Index extra = dim - static_cast<Index>(nc); extra > 0; --extra)
        ++counts[pick(rng)];

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    InstanceSpec spec;
    spec.declared_gap = gap;
    spec.v_ratio = ratio;
    spec.seed = seed;
    const int shape_draw = std::uniform_int_distribution<int>(0, 5)(rng);
    spec.shape = shape_draw < 4 ? PerturbationShape::dense
                                : (shape_draw == 4 ? PerturbationShape::rank_one : PerturbationShape::off_diagonal);

    // The first separation is exactly `gap`; later ones get a random extra.
    double cursor = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
        if (c > 0)
            cursor += gap + (c == 1 ? 0.0 : gap * unit(rng));
        const double width = spread * unit(rng);
        std::vector<double> pts;
        pts.push_back(cursor);
        for (Index k = 1; k < counts[c]; ++k)
            pts.push_back(cursor + width * unit(rng));
        cursor = *std::max_element(pts.begin(), pts.end());
        auto& dst = pattern[c] ? spec.sigma_eigs : spec.Sigma_eigs;
        dst.insert(dst.end(), pts.begin(), pts.end());
    }
    return spec;
}

/// ‖P − Q‖ recomputed in long double from (A, V), with P = E_A(σ) and
/// Q = E_{A+V}(U_{d/2}(σ)) built by counting eigenvalues.
inline double reverify_extended(const HermitianOperator& a, const HermitianOperator& v,
                                const std::vector<double>& sigma_points, double gap)
{
    using LComplex = std::complex<long double>;
    using LMatrix = Eigen::Matrix<LComplex, Eigen::Dynamic, Eigen::Dynamic>;
    const LMatrix al = a.matrix().cast<LComplex>();
    const LMatrix bl = (a.matrix() + v.matrix()).cast<LComplex>();
    auto project = [&](const LMatrix& m, long double radius) {
        Eigen::SelfAdjointEigenSolver<LMatrix> es(m);
        const Index n = m.rows();
        LMatrix p = LMatrix::Zero(n, n);
        for (Index k = 0; k < n; ++k) {
            const long double lam = es.eigenvalues()(k);
            long double dist = std::numeric_limits<long double>::infinity();
            for (double x : sigma_points)
                dist = std::min(dist, std::abs(lam - static_cast<long double>(x)));
            if (dist < radius)
                p += es.eigenvectors().col(k) * es.eigenvectors().col(k).adjoint();
        }
        return p;
    };
    const LMatrix p = project(al, static_cast<long double>(gap) / 4.0L);
    const LMatrix q = project(bl, static_cast<long double>(gap) / 2.0L);
    LMatrix diff = p - q;
    diff = (0.5L * (diff + diff.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<LMatrix> es(diff, Eigen::EigenvaluesOnly);
    return static_cast<double>(es.eigenvalues().cwiseAbs().maxCoeff());
}

struct TrialRecord {
    InstanceSpec spec;
    BoundReport report;
    bool best_iterate = false;
    bool violation_candidate = false;
    std::optional<double> extended_difference; ///< long-double ‖P − Q‖ when re-verified
    double wall_time_ms = 0.0;

    double difference() const { return report.measured.difference; }
};

/// Ceiling relevant to a report's regime: 1 under the theorem, √2/2 when
/// subordinated; none otherwise.
inline std::optional<double> asserted_ceiling(const BoundReport& r)
{
    if (r.regime == Regime::subordinated)
        return kSqrt2Half;
    if (unit_ceiling_asserted(r.regime))
        return 1.0;
    return std::nullopt;
}

/// Near-ceiling values are recomputed in long double; a record whose
/// ‖P − Q‖ reaches 1 (any regime), or reaches its asserted ceiling in
/// extended precision, is flagged VIOLATION-CANDIDATE.
inline void reverify_if_near_ceiling(TrialRecord& rec, const HermitianOperator& a, const HermitianOperator& v)
{
    const double diff = rec.report.measured.difference;
    std::optional<double> ceiling = asserted_ceiling(rec.report);
    const bool near_unit = diff >= 1.0 - kReverifyWindow;
    const bool near_ceiling = ceiling && diff >= *ceiling - kReverifyWindow;
    if (!near_unit && !near_ceiling)
        return;
    if (rec.report.regime == Regime::overcritical)
        return;
    rec.extended_difference = reverify_extended(a, v, rec.report.sigma_eigenvalues, rec.report.d);
    const double lim = ceiling.value_or(1.0);
    rec.violation_candidate = *rec.extended_difference >= lim - 1e-12 || diff >= 1.0;
}

inline TrialRecord run_trial(const InstanceSpec& spec)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto inst = random_instance(spec);
    TrialRecord rec;
    rec.spec = spec;
    rec.report = analyze_instance(inst.a, inst.v, spec.sigma_set(), spec.declared_gap);
    reverify_if_near_ceiling(rec, inst.a, inst.v);
    rec.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

/// Runs fn(i) for i in [0, n) on `jobs` threads; results are stored by index
/// so the output order never depends on scheduling.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, unsigned jobs, Fn&& fn)
{
    std::vector<T> out(n);
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = fn(i);
        return out;
    }
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (unsigned t = 0; t < jobs; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += jobs)
                    out[i] = fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

// ---------------------------------------------------------------------------
// Bound violation scan.

struct ScanCell {
    Index dim = 4;
    double ratio = 0.3;
    Layout layout = Layout::mixed;
    std::uint64_t seed = 0;
};

struct ScanConfig {
    int trials = 1000;
    std::vector<Index> dims{4, 8, 16};
    std::vector<double> ratios{0.1, 0.3, 0.388};
    std::vector<Layout> layouts{Layout::mixed};
    std::uint64_t master_seed = 20240101;
    unsigned jobs = 1;
    bool keep_records = false;
};

/// Cells in (layout, dim, ratio) order with seeds derived from the master.
inline std::vector<ScanCell> scan_cells(const ScanConfig& cfg)
{
    std::vector<ScanCell> cells;
    std::uint64_t idx = 0;
    for (Layout l : cfg.layouts)
        for (Index d : cfg.dims)
            for (double r : cfg.ratios)
                cells.push_back({d, r, l, derive_seed(cfg.master_seed, idx++)});
    return cells;
}

struct ViolationEntry {
    std::uint64_t seed = 0;
    std::string message;
};

struct SlackEntry {
    double slack = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
};

struct CellSummary {
    ScanCell cell;
    int trials = 0;
    bool skipped = false;
    std::string skip_reason;
    std::map<std::string, int> regime_counts;
    double max_difference = 0.0;
    std::uint64_t max_seed = 0;
    std::map<std::string, double> max_difference_by_regime;
    std::map<std::string, SlackEntry> worst_slack; ///< per applicable bound name
    std::vector<ViolationEntry> violations;
    int violation_candidates = 0;
    int rank_mismatches = 0;   ///< rank P ≠ rank Q below the critical ratio
    int nonzero_kernels = 0;   ///< kernel_dims ≠ (0,0,0) below the critical ratio
    std::vector<TrialRecord> records;
};

struct ScanSummary {
    std::uint64_t master_seed = 0;
    std::vector<CellSummary> cells;

    int total_violations() const
    {
        int n = 0;
        for (const auto& c : cells)
            n += static_cast<int>(c.violations.size());
        return n;
    }

    int total_trials() const
    {
        int n = 0;
        for (const auto& c : cells)
            n += c.trials;
        return n;
    }
};

inline std::uint64_t trial_seed(const ScanCell& cell, int trial)
{
    return derive_seed(cell.seed, static_cast<std::uint64_t>(trial));
}

inline CellSummary run_cell(const ScanCell& cell, int trials, unsigned jobs, bool keep_records)
{
    CellSummary out;
    out.cell = cell;
    if (cell.dim < min_dim(cell.layout) || cell.dim > kMaxDim) {
        std::ostringstream os;
        os << "layout " << to_string(cell.layout) << " infeasible in dimension " << cell.dim;
        out.skipped = true;
        out.skip_reason = os.str();
        return out;
    }
    auto records = parallel_map<TrialRecord>(static_cast<std::size_t>(trials), jobs, [&](std::size_t i) {
        const auto seed = trial_seed(cell, static_cast<int>(i));
        auto rec = run_trial(make_spec(cell.dim, cell.ratio, cell.layout, seed));
        return rec;
    });

    for (auto& rec : records) {
        const auto& r = rec.report;
        const std::uint64_t seed = rec.spec.seed;
        ++out.trials;
        ++out.regime_counts[to_string(r.regime)];
        if (r.measured.difference > out.max_difference) {
            out.max_difference = r.measured.difference;
            out.max_seed = seed;
        }
        auto& m = out.max_difference_by_regime[to_string(r.regime)];
        m = std::max(m, r.measured.difference);
        for (const auto& b : r.bounds) {
            if (!b.applicable)
                continue;
            auto& w = out.worst_slack[b.name];
            if (b.slack() < w.slack)
                w = {b.slack(), seed};
        }
        for (const auto& v : r.violations)
            out.violations.push_back({seed, v});
        if (rec.violation_candidate) {
            ++out.violation_candidates;
            out.violations.push_back({seed, "VIOLATION-CANDIDATE: |P-Q| near ceiling after re-verification"});
        }
        if (r.ratio() < kGapRatio) {
            if (r.rank_p != r.rank_q)
                ++out.rank_mismatches;
            if (!(r.kernel == KernelDims{}))
                ++out.nonzero_kernels;
        }
    }
    if (keep_records)
        out.records = std::move(records);
    return out;
}

inline ScanSummary bound_violation_scan(const ScanConfig& cfg)
{
    ScanSummary s;
    s.master_seed = cfg.master_seed;
    for (const auto& cell : scan_cells(cfg))
        s.cells.push_back(run_cell(cell, cfg.trials, cfg.jobs, cfg.keep_records));
    return s;
}

/// Throws BoundViolation carrying the first reproducer seed.
inline void require_no_violations(const ScanSummary& s)
{
    for (const auto& c : s.cells)
        if (!c.violations.empty())
            throw BoundViolation("bound violation in cell dim=" + std::to_string(c.cell.dim) +
                                     " ratio=" + std::to_string(c.cell.ratio) + ": " + c.violations.front().message,
                                 c.violations.front().seed);
}

// ---------------------------------------------------------------------------
// Extremal search.

struct SearchOptions {
    int iterations = 500;
    double initial_step = 0.5;
    double min_step = 1e-7;
    bool move_eigenvalues = true;
};

struct SearchResult {
    TrialRecord best;
    std::vector<double> trace; ///< best objective after each iteration
    int accepted = 0;
};

namespace detail {

/// V = w diag(mu) w* scaled to the sphere. Keeping the eigenvalues of V as
/// explicit coordinates, clamped to [−1, 1], lets the search sit exactly on
/// faces where several of them reach ±‖V‖; random Hermitian steps almost
/// never land there.
struct SearchState {
    std::vector<double> sigma;
    std::vector<double> Sigma;
    Matrix w;
    RealVector mu;

    Matrix direction() const { return w * mu.cast<Complex>().asDiagonal() * w.adjoint(); }
};

inline SearchState initial_state(const InstanceSpec& spec, const HermitianOperator& v)
{
    const auto e = eigh(v);
    RealVector mu = e.values;
    const double m = mu.cwiseAbs().maxCoeff();
    if (m > 0.0)
        mu /= m;
    return {spec.sigma_eigs, spec.Sigma_eigs, e.vectors, mu};
}

inline double measured_gap(const std::vector<double>& a, const std::vector<double>& b)
{
    double best = std::numeric_limits<double>::infinity();
    for (double x : a)
        for (double y : b)
            best = std::min(best, std::abs(x - y));
    return best;
}

inline HullRelation hull_of(const std::vector<double>& a, const std::vector<double>& b)
{
    return convex_hull_disjoint(IntervalUnion::points(a), IntervalUnion::points(b));
}

/// ‖P − Q‖ for A = U diag(σ, Σ) U*, V = ratio·d·h/‖h‖.
inline double objective(const SearchState& st, const Matrix& u, double ratio, double& d_out)
{
    const Index r = static_cast<Index>(st.sigma.size());
    const Index n = u.rows();
    RealVector eig(n);
    for (Index k = 0; k < r; ++k)
        eig(k) = st.sigma[static_cast<std::size_t>(k)];
    for (Index k = r; k < n; ++k)
        eig(k) = st.Sigma[static_cast<std::size_t>(k - r)];
    const double d = measured_gap(st.sigma, st.Sigma);
    d_out = d;
    const Matrix a = u * eig.cast<Complex>().asDiagonal() * u.adjoint();
    const Matrix v = scale_to_norm(st.direction(), ratio * d);
    const HermitianOperator b(Matrix(a + v));
    const auto eb = eigh(b);
    const auto q = spectral_projection(eb, IntervalUnion::points(st.sigma).neighborhood(d / 2.0));
    const Matrix p = u.leftCols(r) * u.leftCols(r).adjoint();
    return hermitian_norm(Matrix(p - q.matrix()));
}

}  // namespace detail

/// Random-direction hill climbing on {V Hermitian : ‖V‖ = ratio·d}: each
/// step adds a seeded random Hermitian direction, renormalizes, and keeps
/// the move only if ‖P − Q‖ increases. Optionally also moves eigenvalues of
/// A, keeping the declared gap and the hull layout. The trace is
/// non-decreasing by construction.
inline SearchResult maximize_pq_norm(const InstanceSpec& spec, const SearchOptions& opt = {})
{
    spec.validate();
    if (!(spec.v_ratio < kGapRatio))
        throw PreconditionError("maximize_pq_norm requires v_ratio < 1/2");

    const auto inst = random_instance(spec);
    Rng rng(derive_seed(spec.seed, 0xa5ce47ULL));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    detail::SearchState st = detail::initial_state(spec, inst.v);
    const HullRelation hull0 = detail::hull_of(st.sigma, st.Sigma);
    const Matrix& u = inst.eigenbasis;
    const Index n = spec.dim();

    SearchResult out;
    out.trace.reserve(static_cast<std::size_t>(opt.iterations));
    double d = 0.0;
    double best = spec.v_ratio == 0.0 ? 0.0 : detail::objective(st, u, spec.v_ratio, d);
    // Three move kinds, each with its own adaptive step: rotate the
    // eigenbasis of V, jitter the eigenvalues of V, move the eigenvalues of A.
    enum Move { rotate = 0, jitter = 1, place = 2 };
    double step[3] = {opt.initial_step, opt.initial_step, opt.initial_step};
    auto shrink = [&](int m) { step[m] = std::max(opt.min_step, step[m] * 0.8); };

    for (int it = 0; it < opt.iterations; ++it) {
        if (spec.v_ratio == 0.0) {
            out.trace.push_back(best);
            continue;
        }
        detail::SearchState cand = st;
        const double draw = unit(rng);
        const int move = opt.move_eigenvalues && draw < 0.2 ? place : (draw < 0.6 ? rotate : jitter);
        if (move == place) {
            for (auto& x : cand.sigma)
                x += step[place] * spec.declared_gap * 0.25 * gauss(rng);
            for (auto& x : cand.Sigma)
                x += step[place] * spec.declared_gap * 0.25 * gauss(rng);
            if (detail::measured_gap(cand.sigma, cand.Sigma) < spec.declared_gap - spec.gap_tol() ||
                detail::hull_of(cand.sigma, cand.Sigma) != hull0) {
                shrink(place);
                out.trace.push_back(best);
                continue;
            }
        } else if (move == rotate) {
            const Matrix k = scale_to_norm(random_hermitian(n, rng), step[rotate]);
            cand.w = expm_skew_hermitian(Complex(0.0, 1.0) * k) * st.w;
        } else {
            // Clamp to [−1, 1] and renormalize so max |mu| = 1.
            for (Index j = 0; j < n; ++j)
                cand.mu(j) = std::clamp(st.mu(j) + step[jitter] * gauss(rng), -1.0, 1.0);
            const double m = cand.mu.cwiseAbs().maxCoeff();
            if (m > 0.0)
                cand.mu /= m;
        }
        double dc = 0.0;
        const double val = detail::objective(cand, u, spec.v_ratio, dc);
        if (val > best) {
            best = val;
            st = std::move(cand);
            step[move] = std::min(1.0, step[move] * 1.5);
            ++out.accepted;
        } else {
            shrink(move);
        }
        out.trace.push_back(best);
    }

    // Full report on the best iterate.
    InstanceSpec best_spec = spec;
    best_spec.sigma_eigs = st.sigma;
    best_spec.Sigma_eigs = st.Sigma;
    const Index r = static_cast<Index>(st.sigma.size());
    RealVector eig(n);
    for (Index k = 0; k < r; ++k)
        eig(k) = st.sigma[static_cast<std::size_t>(k)];
    for (Index k = r; k < n; ++k)
        eig(k) = st.Sigma[static_cast<std::size_t>(k - r)];
    const HermitianOperator a(Matrix(u * eig.cast<Complex>().asDiagonal() * u.adjoint()));
    const double dbest = detail::measured_gap(st.sigma, st.Sigma);
    const HermitianOperator v(scale_to_norm(st.direction(), spec.v_ratio * dbest));
    out.best.spec = best_spec;
    out.best.best_iterate = true;
    out.best.report = analyze_instance(a, v, best_spec.sigma_set(), spec.declared_gap);
    reverify_if_near_ceiling(out.best, a, v);
    return out;
}

// ---------------------------------------------------------------------------
// Overcritical probe: ‖P − E_{A+V}(Δ)‖ over contiguous eigenvalue windows.

struct WindowScan {
    double min_difference = 1.0;
    Index window_begin = 0; ///< eigenvalue indices [begin, end) of the minimizer
    Index window_end = 0;
    Index windows = 0;      ///< number of windows examined (including Δ = ∅)
};

/// For P with orthonormal range basis B and the eigenbasis U of A + V, put
/// Y = U*B. For the window Δ = [i, j), ‖PQ⊥‖² = 1 − λ_min(Y_Δ*Y_Δ) and
/// ‖P⊥Q‖ = 1 if |Δ| > rank P, else ‖P⊥Q‖² = 1 − λ_min(Y_Δ Y_Δ*).
inline WindowScan min_window_difference(const OrthogonalProjection& p, const EigenSystem& eb)
{
    const Index n = eb.dim();
    const Index r = p.rank();
    WindowScan out;
    out.windows = 1; // Δ = ∅ gives ‖P‖
    out.min_difference = r > 0 ? 1.0 : 0.0;
    if (r == 0)
        return out;
    const Matrix y = eb.vectors.adjoint() * p.basis();
    for (Index i = 0; i < n; ++i) {
        Matrix gram = Matrix::Zero(r, r);
        for (Index j = i; j < n; ++j) {
            gram += y.row(j).adjoint() * y.row(j);
            const Index len = j - i + 1;
            ++out.windows;
            Eigen::SelfAdjointEigenSolver<Matrix> gs(gram, Eigen::EigenvaluesOnly);
            const double pq_perp = std::sqrt(std::max(0.0, 1.0 - gs.eigenvalues()(0)));
            double p_perp_q = 1.0;
            if (len <= r) {
                const Matrix yd = y.middleRows(i, len);
                Eigen::SelfAdjointEigenSolver<Matrix> ws(Matrix(yd * yd.adjoint()), Eigen::EigenvaluesOnly);
                p_perp_q = std::sqrt(std::max(0.0, 1.0 - ws.eigenvalues()(0)));
            }
            const double diff = std::max(pq_perp, p_perp_q);
            if (diff < out.min_difference) {
                out.min_difference = diff;
                out.window_begin = i;
                out.window_end = j + 1;
            }
        }
    }
    return out;
}

struct OvercriticalRecord {
    double d = 0.0;
    double v_norm = 0.0;
    Regime regime = Regime::overcritical;
    WindowScan scan;
    double q_default_difference = 0.0; ///< ‖P − E_{A+V}(U_{d/2}(σ))‖
};

inline OvercriticalRecord overcritical_probe(const HermitianOperator& a, const HermitianOperator& v,
                                             const IntervalUnion& sigma_set)
{
    const auto ea = eigh(a);
    const auto split = split_spectrum(ea, sigma_set);
    OvercriticalRecord out;
    out.d = split.gap;
    out.v_norm = v.norm();
    out.regime = classify_ratio(out.v_norm / out.d, convex_hull_disjoint(split.sigma, split.Sigma));
    const auto p = spectral_projection(ea, split.sigma);
    const auto eb = eigh(a + v);
    out.scan = min_window_difference(p, eb);
    const auto q = spectral_projection(eb, split.sigma.neighborhood(out.d / 2.0));
    out.q_default_difference = hermitian_norm(Matrix(p.matrix() - q.matrix()));
    return out;
}

/// Seeded variant; requires v_ratio ≥ 1/2.
inline OvercriticalRecord overcritical_probe(const InstanceSpec& spec)
{
    if (!(spec.v_ratio >= kGapRatio))
        throw PreconditionError("overcritical_probe requires v_ratio >= 1/2");
    const auto inst = random_instance(spec);
    return overcritical_probe(inst.a, inst.v, spec.sigma_set());
}

// ---------------------------------------------------------------------------
// Open-window evidence runs.

struct SearchCell {
    Index dim = 4;
    double ratio = 0.45;
    Layout layout = Layout::interleaved;
    std::uint64_t seed = 0;
    int starts = 8;
    int iterations = 300;
};

struct SearchCellResult {
    SearchCell cell;
    bool skipped = false;
    std::string skip_reason;
    double max_difference = 0.0;
    std::uint64_t best_start_seed = 0;
    std::vector<TrialRecord> bests; ///< best record per start
};

inline std::uint64_t start_seed(const SearchCell& cell, int start)
{
    return derive_seed(cell.seed, 0x10000ULL + static_cast<std::uint64_t>(start));
}

inline SearchCellResult run_search_cell(const SearchCell& cell, unsigned jobs)
{
    SearchCellResult out;
    out.cell = cell;
    if (cell.dim < min_dim(cell.layout) || cell.dim > kMaxDim) {
        out.skipped = true;
        out.skip_reason = std::string("layout ") + to_string(cell.layout) + " infeasible in dimension " +
                          std::to_string(cell.dim);
        return out;
    }
    if (!(cell.ratio < kGapRatio)) {
        out.skipped = true;
        out.skip_reason = "search requires ratio < 1/2";
        return out;
    }
    SearchOptions opt;
    opt.iterations = cell.iterations;
    out.bests = parallel_map<TrialRecord>(static_cast<std::size_t>(cell.starts), jobs, [&](std::size_t i) {
        const auto seed = start_seed(cell, static_cast<int>(i));
        const auto t0 = std::chrono::steady_clock::now();
        auto res = maximize_pq_norm(make_spec(cell.dim, cell.ratio, cell.layout, seed), opt);
        res.best.wall_time_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return res.best;
    });
    for (const auto& b : out.bests) {
        if (b.difference() > out.max_difference) {
            out.max_difference = b.difference();
            out.best_start_seed = b.spec.seed;
        }
    }
    return out;
}

struct SearchConfig {
    std::vector<Index> dims{4, 6, 8, 12, 16, 20};
    double ratio = 0.45;
    std::vector<Layout> layouts{Layout::interleaved};
    std::uint64_t master_seed = 20240202;
    int starts = 16;
    int iterations = 1000;
    unsigned jobs = 1;
};

inline std::vector<SearchCell> search_cells(const SearchConfig& cfg)
{
    std::vector<SearchCell> cells;
    std::uint64_t idx = 0;
    for (Layout l : cfg.layouts)
        for (Index d : cfg.dims)
            cells.push_back({d, cfg.ratio, l, derive_seed(cfg.master_seed, idx++), cfg.starts, cfg.iterations});
    return cells;
}

/// Maximum of ‖P − Q‖ per dimension over the non-skipped cells.
inline std::map<Index, double> per_dimension_maxima(const std::vector<SearchCellResult>& results)
{
    std::map<Index, double> out;
    for (const auto& r : results)
        if (!r.skipped) {
            auto& m = out[r.cell.dim];
            m = std::max(m, r.max_difference);
        }
    return out;
}

}  // namespace specgap::explore
