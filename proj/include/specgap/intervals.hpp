#pragma once

// Finite unions of real intervals: the sets σ, Σ, δ, Δ and their open
// neighborhoods. Endpoints may be infinite; infinite endpoints are open.

#include "specgap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace specgap {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool lo_closed = true;
    bool hi_closed = true;

    static Interval closed(double lo, double hi) { return {lo, hi, true, true}; }
    static Interval open(double lo, double hi) { return {lo, hi, false, false}; }
    static Interval point(double x) { return {x, x, true, true}; }

    bool is_point() const { return lo == hi; }

    bool empty() const { return lo > hi || (lo == hi && !(lo_closed && hi_closed)); }

    bool contains(double x) const
    {
        if (x < lo || x > hi)
            return false;
        if (x == lo && !lo_closed)
            return false;
        if (x == hi && !hi_closed)
            return false;
        return true;
    }

    /// inf |x − y| over y in the interval (distance to the closure).
    double distance_to(double x) const
    {
        if (x < lo)
            return lo - x;
        if (x > hi)
            return x - hi;
        return 0.0;
    }

    bool operator==(const Interval&) const = default;
};

inline double interval_distance(const Interval& a, const Interval& b)
{
    return std::max({0.0, b.lo - a.hi, a.lo - b.hi});
}

/// True if the two intervals share at least one point.
inline bool intervals_intersect(const Interval& a, const Interval& b)
{
    if (a.hi < b.lo || b.hi < a.lo)
        return false;
    if (a.hi == b.lo)
        return a.hi_closed && b.lo_closed;
    if (b.hi == a.lo)
        return b.hi_closed && a.lo_closed;
    return true;
}

/// Sorted, pairwise disjoint intervals. Consecutive intervals are separated
/// by a positive gap, except that two intervals may meet at a single point
/// excluded from both (e.g. the open neighborhoods (−1,0) and (0,1)).
class IntervalUnion {
public:
    IntervalUnion() = default;

    explicit IntervalUnion(std::vector<Interval> parts) : parts_(normalize(std::move(parts))) {}

    IntervalUnion(std::initializer_list<Interval> parts)
        : IntervalUnion(std::vector<Interval>(parts))
    {
    }

    static IntervalUnion point(double x) { return IntervalUnion({Interval::point(x)}); }

    static IntervalUnion points(std::span<const double> xs)
    {
        std::vector<Interval> parts;
        parts.reserve(xs.size());
        for (double x : xs)
            parts.push_back(Interval::point(x));
        return IntervalUnion(std::move(parts));
    }

    static IntervalUnion points(std::initializer_list<double> xs)
    {
        return points(std::span<const double>(xs.begin(), xs.size()));
    }

    static IntervalUnion closed(double lo, double hi) { return IntervalUnion({Interval::closed(lo, hi)}); }
    static IntervalUnion open(double lo, double hi) { return IntervalUnion({Interval::open(lo, hi)}); }

    static IntervalUnion real_line()
    {
        const double inf = std::numeric_limits<double>::infinity();
        return IntervalUnion({Interval::open(-inf, inf)});
    }

    bool empty() const { return parts_.empty(); }
    std::size_t size() const { return parts_.size(); }
    std::span<const Interval> intervals() const { return parts_; }
    const Interval& operator[](std::size_t i) const { return parts_[i]; }

    double inf() const
    {
        require_nonempty("inf");
        return parts_.front().lo;
    }

    double sup() const
    {
        require_nonempty("sup");
        return parts_.back().hi;
    }

    bool contains(double x) const
    {
        return std::any_of(parts_.begin(), parts_.end(), [x](const Interval& i) { return i.contains(x); });
    }

    /// inf |x − y| over the set; +inf for the empty set.
    double distance_to(double x) const
    {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& i : parts_)
            best = std::min(best, i.distance_to(x));
        return best;
    }

    /// Distance from x to the nearest endpoint of a non-degenerate interval.
    /// Degenerate (point) intervals are labels rather than boundaries and
    /// are skipped; +inf if there is no such endpoint.
    double boundary_distance(double x) const
    {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& i : parts_) {
            if (i.is_point())
                continue;
            if (std::isfinite(i.lo))
                best = std::min(best, std::abs(x - i.lo));
            if (std::isfinite(i.hi))
                best = std::min(best, std::abs(x - i.hi));
        }
        return best;
    }

    /// Open ε-neighborhood: the union of (lo − ε, hi + ε), merged where the
    /// pieces overlap.
    IntervalUnion neighborhood(double eps) const
    {
        if (!(eps > 0.0) || !std::isfinite(eps)) {
            std::ostringstream os;
            os << "neighborhood radius must be positive and finite, got " << eps;
            throw PreconditionError(os.str());
        }
        std::vector<Interval> grown;
        grown.reserve(parts_.size());
        for (const auto& i : parts_)
            grown.push_back(Interval::open(i.lo - eps, i.hi + eps));
        return IntervalUnion(std::move(grown));
    }

    IntervalUnion unite(const IntervalUnion& other) const
    {
        std::vector<Interval> all(parts_);
        all.insert(all.end(), other.parts_.begin(), other.parts_.end());
        return IntervalUnion(std::move(all));
    }

    /// Complement in ℝ.
    IntervalUnion complement() const
    {
        const double inf = std::numeric_limits<double>::infinity();
        if (parts_.empty())
            return real_line();
        std::vector<Interval> out;
        double lo = -inf;
        bool lo_closed = false;
        for (const auto& i : parts_) {
            Interval gap{lo, i.lo, lo_closed, !i.lo_closed};
            if (!std::isfinite(gap.lo))
                gap.lo_closed = false;
            if (!gap.empty())
                out.push_back(gap);
            lo = i.hi;
            lo_closed = !i.hi_closed;
        }
        Interval tail{lo, inf, lo_closed, false};
        if (!std::isfinite(tail.lo))
            tail.lo_closed = false;
        if (!tail.empty())
            out.push_back(tail);
        return IntervalUnion(std::move(out));
    }

    /// Convex hull: the smallest interval containing the set.
    IntervalUnion hull() const
    {
        if (parts_.empty())
            return {};
        return IntervalUnion({Interval{parts_.front().lo, parts_.back().hi, parts_.front().lo_closed,
                                       parts_.back().hi_closed}});
    }

    bool intersects(const IntervalUnion& other) const
    {
        for (const auto& a : parts_)
            for (const auto& b : other.parts_)
                if (intervals_intersect(a, b))
                    return true;
        return false;
    }

    /// The same set mapped through t ↦ factor·t, factor > 0.
    IntervalUnion scaled(double factor) const
    {
        if (!(factor > 0.0))
            throw PreconditionError("interval scale factor must be positive");
        std::vector<Interval> out;
        out.reserve(parts_.size());
        for (const auto& i : parts_)
            out.push_back(Interval{i.lo * factor, i.hi * factor, i.lo_closed, i.hi_closed});
        return IntervalUnion(std::move(out));
    }

    bool operator==(const IntervalUnion&) const = default;

private:
    void require_nonempty(const char* what) const
    {
        if (parts_.empty())
            throw PreconditionError(std::string(what) + " of an empty interval union");
    }

    static std::vector<Interval> normalize(std::vector<Interval> parts)
    {
        for (auto& i : parts) {
            if (std::isnan(i.lo) || std::isnan(i.hi))
                throw PreconditionError("interval endpoint is NaN");
            if (i.lo > i.hi) {
                std::ostringstream os;
                os << "interval has lo > hi: [" << i.lo << ", " << i.hi << "]";
                throw PreconditionError(os.str());
            }
            if (std::isinf(i.lo))
                i.lo_closed = false;
            if (std::isinf(i.hi))
                i.hi_closed = false;
        }
        std::erase_if(parts, [](const Interval& i) { return i.empty(); });
        std::sort(parts.begin(), parts.end(), [](const Interval& a, const Interval& b) {
            if (a.lo != b.lo)
                return a.lo < b.lo;
            return a.lo_closed && !b.lo_closed;
        });

        std::vector<Interval> merged;
        for (const auto& i : parts) {
            if (merged.empty()) {
                merged.push_back(i);
                continue;
            }
            Interval& last = merged.back();
            const bool overlap = i.lo < last.hi || (i.lo == last.hi && (i.lo_closed || last.hi_closed));
            if (!overlap) {
                merged.push_back(i);
                continue;
            }
            if (i.hi > last.hi) {
                last.hi = i.hi;
                last.hi_closed = i.hi_closed;
            } else if (i.hi == last.hi) {
                last.hi_closed = last.hi_closed || i.hi_closed;
            }
        }
        return merged;
    }

    std::vector<Interval> parts_;
};

/// inf |x − y| over x ∈ a, y ∈ b, from the endpoints.
inline double set_distance(const IntervalUnion& a, const IntervalUnion& b)
{
    if (a.empty() || b.empty())
        throw PreconditionError("set_distance requires two nonempty sets");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& x : a.intervals())
        for (const auto& y : b.intervals())
            best = std::min(best, interval_distance(x, y));
    return best;
}

/// Which convex-hull separation conditions hold for a pair (σ, Σ):
///   sigma_hull_free  : conv.hull(σ) ∩ Σ = ∅
///   Sigma_hull_free  : conv.hull(Σ) ∩ σ = ∅
///   subordinated     : conv.hull(σ) ∩ conv.hull(Σ) = ∅ (implies both)
enum class HullRelation { none, sigma_hull_free, Sigma_hull_free, subordinated };

inline bool has_hull_condition(HullRelation h) { return h != HullRelation::none; }

inline const char* to_string(HullRelation h)
{
    switch (h) {
    case HullRelation::none: return "none";
    case HullRelation::sigma_hull_free: return "sigma-hull-free";
    case HullRelation::Sigma_hull_free: return "Sigma-hull-free";
    case HullRelation::subordinated: return "subordinated";
    }
    return "?";
}

inline HullRelation convex_hull_disjoint(const IntervalUnion& sigma, const IntervalUnion& Sigma)
{
    if (sigma.empty() || Sigma.empty())
        throw PreconditionError("convex_hull_disjoint requires two nonempty sets");
    if (sigma.intersects(Sigma))
        throw PreconditionError("convex_hull_disjoint requires disjoint sets");
    if (!sigma.hull().intersects(Sigma.hull()))
        return HullRelation::subordinated;
    if (!sigma.hull().intersects(Sigma))
        return HullRelation::sigma_hull_free;
    if (!Sigma.hull().intersects(sigma))
        return HullRelation::Sigma_hull_free;
    return HullRelation::none;
}

}  // namespace specgap
