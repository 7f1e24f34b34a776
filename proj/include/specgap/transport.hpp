#pragma once

// The path P(s) = E_{A+sV}(U_{d/2}(σ)), s ∈ [0,1], its derivative (two
// independent routes), Kato's generator H = P'P − PP', and the unitary W
// solving X' = HX, X(0) = I, so that Q = W P W*.

#include "specgap/errors.hpp"
#include "specgap/intervals.hpp"
#include "specgap/linalg.hpp"
#include "specgap/quadrature.hpp"
#include "specgap/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

namespace specgap {

inline constexpr double kDerivativeCrossCheckTol = 1e-6;
inline constexpr double kUnitaryTol = 1e-8;
inline constexpr double kTransportTol = 1e-6;
inline constexpr double kPathTol = 10.0 * kTransportTol;

/// Axis-parallel rectangle in ℂ, traversed counterclockwise.
struct ContourRectangle {
    double re_lo = 0.0;
    double re_hi = 0.0;
    double im_half = 0.0;
};

/// Union of rectangles enclosing U_{d/2}(σ) and excluding U_{‖V‖}(Σ), with
/// a composite Gauss–Legendre rule on each edge.
struct Contour {
    std::vector<ContourRectangle> rectangles;
    int nodes_per_panel = 32;
    double max_panel_length = 0.0;

    struct Node {
        Complex z;
        Complex weight; ///< includes dz/dt
    };

    std::vector<Node> nodes() const
    {
        const auto rule = gauss_legendre(nodes_per_panel);
        std::vector<Node> out;
        auto edge = [&](Complex from, Complex to) {
            const double len = std::abs(to - from);
            const int panels = std::max(1, static_cast<int>(std::ceil(len / max_panel_length - 1e-12)));
            for (int p = 0; p < panels; ++p) {
                const Complex a = from + (to - from) * (static_cast<double>(p) / panels);
                const Complex b = from + (to - from) * (static_cast<double>(p + 1) / panels);
                const Complex mid = 0.5 * (a + b);
                const Complex half = 0.5 * (b - a);
                for (std::size_t k = 0; k < rule.nodes.size(); ++k)
                    out.push_back({mid + half * rule.nodes[k], half * rule.weights[k]});
            }
        };
        for (const auto& r : rectangles) {
            const Complex ll(r.re_lo, -r.im_half), lr(r.re_hi, -r.im_half);
            const Complex ur(r.re_hi, r.im_half), ul(r.re_lo, r.im_half);
            edge(ll, lr);
            edge(lr, ur);
            edge(ur, ul);
            edge(ul, ll);
        }
        return out;
    }
};

/// One rectangle per run of σ-points not separated by a Σ-point. Vertical
/// edges sit at the midpoint between a σ-run and its Σ neighbor, or 3d/4
/// beyond the run if there is none; the half-height is d/2.
inline Contour make_contour(const std::vector<double>& sigma_points, const std::vector<double>& Sigma_points,
                            double gap, int nodes_per_panel = 32)
{
    if (sigma_points.empty())
        throw PreconditionError("make_contour: sigma is empty");
    if (nodes_per_panel < 1)
        throw PreconditionError("make_contour: need at least one node per panel");
    std::vector<double> sig(sigma_points), Sig(Sigma_points);
    std::sort(sig.begin(), sig.end());
    std::sort(Sig.begin(), Sig.end());

    Contour c;
    c.nodes_per_panel = nodes_per_panel;
    c.max_panel_length = gap / 2.0;
    std::size_t i = 0;
    while (i < sig.size()) {
        const double lo = sig[i];
        auto next_Sigma = std::upper_bound(Sig.begin(), Sig.end(), lo);
        std::size_t j = i;
        while (j + 1 < sig.size() && (next_Sigma == Sig.end() || sig[j + 1] < *next_Sigma))
            ++j;
        const double hi = sig[j];
        ContourRectangle r;
        r.im_half = gap / 2.0;
        r.re_lo = next_Sigma == Sig.begin() ? lo - 0.75 * gap : 0.5 * (lo + *(next_Sigma - 1));
        r.re_hi = next_Sigma == Sig.end() ? hi + 0.75 * gap : 0.5 * (hi + *next_Sigma);
        c.rectangles.push_back(r);
        i = j + 1;
    }
    return c;
}

enum class DerivativeMethod { spectral, contour };

inline const char* to_string(DerivativeMethod m) { return m == DerivativeMethod::spectral ? "spectral" : "contour"; }

class ProjectorPath {
public:
    /// Validates ‖V‖ < d/2 with d the measured gap of A relative to σ.
    ProjectorPath(HermitianOperator base, HermitianOperator perturbation, const IntervalUnion& sigma_set,
                  int contour_nodes = 32)
        : base_(std::move(base)), perturbation_(std::move(perturbation))
    {
        if (base_.dim() != perturbation_.dim())
            throw PreconditionError("ProjectorPath: dimension mismatch between A and V");
        const auto e0 = eigh(base_);
        split_ = split_spectrum(e0, sigma_set);
        v_norm_ = perturbation_.norm();
        if (!(v_norm_ < split_.gap / 2.0)) {
            std::ostringstream os;
            os << "ProjectorPath: |V| = " << v_norm_ << " is not below d/2 = " << split_.gap / 2.0;
            throw PreconditionError(os.str());
        }
        target_ = split_.sigma.neighborhood(split_.gap / 2.0);
        start_ = spectral_projection(e0, split_.sigma);
        contour_ = make_contour(split_.sigma_eigenvalues, split_.Sigma_eigenvalues, split_.gap, contour_nodes);
        scale_ = std::max(1.0, e0.norm());
    }

    const HermitianOperator& base() const { return base_; }
    const HermitianOperator& perturbation() const { return perturbation_; }
    const SpectralSplit& split() const { return split_; }
    double gap() const { return split_.gap; }
    double v_norm() const { return v_norm_; }
    const IntervalUnion& target_set() const { return target_; }
    const Contour& contour() const { return contour_; }
    const OrthogonalProjection& start() const { return start_; }
    Index rank() const { return start_.rank(); }

    HermitianOperator operator_at(double s) const { return base_ + s * perturbation_; }

    OrthogonalProjection projection(double s) const
    {
        require_s(s);
        auto p = spectral_projection(eigh(operator_at(s)), target_);
        if (p.rank() != rank()) {
            std::ostringstream os;
            os << "rank of P(s) changed from " << rank() << " to " << p.rank() << " at s = " << s;
            throw RankChangeError(os.str(), s);
        }
        return p;
    }

    /// P'(s). Spectral: in the eigenbasis of A + sV,
    /// (P')_jk = V_jk (χ_j − χ_k)/(λ_j − λ_k). Contour:
    /// (1/2πi) ∮ (A+sV−z)^{-1} V (A+sV−z)^{-1} dz with LU-based resolvents.
    Matrix derivative(double s, DerivativeMethod method) const
    {
        require_s(s);
        return method == DerivativeMethod::spectral ? spectral_derivative(s) : contour_derivative(s);
    }

    /// P(s) = −(1/2πi) ∮ (A+sV−z)^{-1} dz.
    Matrix contour_projection(double s) const
    {
        require_s(s);
        const Index n = base_.dim();
        const Matrix t = operator_at(s).matrix();
        check_contour(s);
        Matrix acc = Matrix::Zero(n, n);
        for (const auto& node : contour_.nodes()) {
            const Matrix r = (t - node.z * Matrix::Identity(n, n)).partialPivLu().inverse();
            acc += node.weight * r;
        }
        return -acc / Complex(0.0, 2.0 * std::numbers::pi);
    }

    /// H(s) = P'(s)P(s) − P(s)P'(s).
    Matrix generator(double s, DerivativeMethod method = DerivativeMethod::spectral) const
    {
        const Matrix dp = derivative(s, method);
        const Matrix p = projection(s).matrix();
        return dp * p - p * dp;
    }

private:
    static void require_s(double s)
    {
        if (!(s >= 0.0 && s <= 1.0)) {
            std::ostringstream os;
            os << "path parameter s = " << s << " outside [0, 1]";
            throw PreconditionError(os.str());
        }
    }

    Matrix spectral_derivative(double s) const
    {
        const auto e = eigh(operator_at(s));
        const Index n = e.dim();
        const double tol = e.boundary_tol();
        std::vector<bool> inside(static_cast<std::size_t>(n));
        for (Index k = 0; k < n; ++k)
            inside[static_cast<std::size_t>(k)] = target_.distance_to(e.values(k)) <= tol;
        const Matrix vt = e.vectors.adjoint() * perturbation_.matrix() * e.vectors;
        Matrix dp = Matrix::Zero(n, n);
        for (Index j = 0; j < n; ++j) {
            for (Index k = 0; k < n; ++k) {
                const bool ij = inside[static_cast<std::size_t>(j)];
                const bool ik = inside[static_cast<std::size_t>(k)];
                if (ij == ik)
                    continue;
                const double chi = (ij ? 1.0 : 0.0) - (ik ? 1.0 : 0.0);
                dp(j, k) = vt(j, k) * chi / (e.values(j) - e.values(k));
            }
        }
        Matrix out = e.vectors * dp * e.vectors.adjoint();
        return 0.5 * (out + out.adjoint());
    }

    void check_contour(double s) const
    {
        const auto e = eigh(operator_at(s));
        const double floor = 1e-8 * scale_;
        for (const auto& node : contour_.nodes()) {
            for (Index k = 0; k < e.dim(); ++k) {
                const double dist = std::abs(node.z - Complex(e.values(k), 0.0));
                if (dist < floor) {
                    std::ostringstream os;
                    os << "contour node " << node.z << " within " << dist << " of eigenvalue " << e.values(k)
                       << " at s = " << s << "; adjust the contour";
                    throw ContourError(os.str(), dist);
                }
            }
        }
    }

    Matrix contour_derivative(double s) const
    {
        check_contour(s);
        const Index n = base_.dim();
        const Matrix t = operator_at(s).matrix();
        const Matrix& v = perturbation_.matrix();
        Matrix acc = Matrix::Zero(n, n);
        for (const auto& node : contour_.nodes()) {
            const Matrix r = (t - node.z * Matrix::Identity(n, n)).partialPivLu().inverse();
            acc += node.weight * (r * v * r);
        }
        Matrix out = acc / Complex(0.0, 2.0 * std::numbers::pi);
        return 0.5 * (out + out.adjoint());
    }

    HermitianOperator base_;
    HermitianOperator perturbation_;
    SpectralSplit split_;
    double v_norm_ = 0.0;
    double scale_ = 1.0;
    IntervalUnion target_;
    OrthogonalProjection start_;
    Contour contour_;
};

inline OrthogonalProjection path_projection(const ProjectorPath& path, double s) { return path.projection(s); }

inline Matrix projector_derivative(const ProjectorPath& path, double s,
                                   DerivativeMethod method = DerivativeMethod::spectral)
{
    return path.derivative(s, method);
}

inline Matrix kato_generator(const ProjectorPath& path, double s,
                             DerivativeMethod method = DerivativeMethod::spectral)
{
    return path.generator(s, method);
}

/// Exponential integrators for X' = H(s)X. Both advance by exp(Ω)X with Ω
/// skew-Hermitian, so every iterate is unitary.
enum class TransportScheme {
    midpoint, ///< Ω = h H(s + h/2), order 2
    magnus4   ///< two-point Gauss Magnus, order 4
};

inline const char* to_string(TransportScheme s) { return s == TransportScheme::midpoint ? "midpoint" : "magnus4"; }

struct TransportOptions {
    TransportScheme scheme = TransportScheme::magnus4;
    DerivativeMethod method = DerivativeMethod::spectral;
    double transport_tol = kTransportTol;
    double path_tol = kPathTol;
    double unit_tol = kUnitaryTol;
    bool check_path = true;      ///< evaluate ‖P(s) − X P X*‖ after every step
    bool throw_on_failure = true; ///< NumericalError when a tolerance is missed
};

struct TransportStep {
    double s = 0.0;
    double generator_norm = 0.0; ///< ‖H‖ at the (last) evaluation node of the step
    double path_residual = 0.0;  ///< ‖P(s) − X(s) P X(s)*‖, NaN if not checked
    double unitarity_defect = 0.0;
};

struct TransportResult {
    Matrix w;
    double residual = 0.0;          ///< ‖Q − W P W*‖
    double unitarity_defect = 0.0;  ///< ‖W*W − I‖
    double max_path_residual = 0.0;
    double max_unitarity_defect = 0.0;
    int steps = 0;
    std::vector<TransportStep> trace;

    bool within(const TransportOptions& o) const
    {
        return residual <= o.transport_tol && max_unitarity_defect <= o.unit_tol &&
               (!o.check_path || max_path_residual <= o.path_tol);
    }
};

inline TransportResult transport_unitary(const ProjectorPath& path, int steps, const TransportOptions& opt = {})
{
    if (steps < 1)
        throw PreconditionError("transport_unitary: steps must be at least 1");
    const Index n = path.base().dim();
    const Matrix p0 = path.start().matrix();
    const double h = 1.0 / steps;

    TransportResult out;
    out.steps = steps;
    out.w = Matrix::Identity(n, n);
    out.trace.reserve(static_cast<std::size_t>(steps));

    const double c1 = 0.5 - std::sqrt(3.0) / 6.0;
    const double c2 = 0.5 + std::sqrt(3.0) / 6.0;
    for (int k = 0; k < steps; ++k) {
        const double s0 = k * h;
        Matrix omega;
        double gnorm = 0.0;
        if (opt.scheme == TransportScheme::midpoint) {
            const Matrix g = path.generator(s0 + 0.5 * h, opt.method);
            gnorm = operator_norm(g);
            omega = h * g;
        } else {
            const Matrix g1 = path.generator(s0 + c1 * h, opt.method);
            const Matrix g2 = path.generator(s0 + c2 * h, opt.method);
            gnorm = std::max(operator_norm(g1), operator_norm(g2));
            omega = 0.5 * h * (g1 + g2) + (std::sqrt(3.0) / 12.0) * h * h * (g2 * g1 - g1 * g2);
        }
        omega = 0.5 * (omega - omega.adjoint()).eval();
        out.w = expm_skew_hermitian(omega) * out.w;

        TransportStep st;
        st.s = k + 1 == steps ? 1.0 : (k + 1) * h;
        st.generator_norm = gnorm;
        st.unitarity_defect = unitarity_defect(out.w);
        out.max_unitarity_defect = std::max(out.max_unitarity_defect, st.unitarity_defect);
        if (opt.check_path || k + 1 == steps) {
            const Matrix ps = path.projection(st.s).matrix();
            st.path_residual = operator_norm(ps - out.w * p0 * out.w.adjoint());
            out.max_path_residual = std::max(out.max_path_residual, st.path_residual);
        } else {
            st.path_residual = std::numeric_limits<double>::quiet_NaN();
        }
        out.trace.push_back(st);
    }
    out.residual = out.trace.back().path_residual;
    out.unitarity_defect = out.trace.back().unitarity_defect;

    if (opt.throw_on_failure && !out.within(opt)) {
        std::ostringstream os;
        os.precision(6);
        os << "transport tolerance not met at " << steps << " steps: |Q - WPW*| = " << out.residual
           << " (tol " << opt.transport_tol << "), max path residual " << out.max_path_residual << " (tol "
           << opt.path_tol << "), unitarity defect " << out.max_unitarity_defect << " (tol " << opt.unit_tol
           << "); raise the step count";
        throw NumericalError(os.str(), out.residual);
    }
    return out;
}

}  // namespace specgap
