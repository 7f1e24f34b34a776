#pragma once

// Text exchange formats. Grammar: docs/formats.md.

#include "specgap/bounds.hpp"
#include "specgap/errors.hpp"
#include "specgap/explorer.hpp"
#include "specgap/intervals.hpp"
#include "specgap/spectral.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace specgap::io {

using json = nlohmann::json;

inline constexpr const char* kInstanceFormat = "specgap-instance/1";
inline constexpr const char* kReportFormat = "specgap-bound-report/1";
inline constexpr const char* kTrialFormat = "specgap-trial/1";
inline constexpr const char* kManifestFormat = "specgap-manifest/1";

// --- reals: finite numbers, or the strings "inf" / "-inf" -----------------

inline json real_to_json(double x)
{
    if (std::isnan(x))
        return nullptr;
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    return x;
}

inline double real_from_json(const json& j, const std::string& field)
{
    if (j.is_number())
        return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf")
            return -std::numeric_limits<double>::infinity();
    }
    throw ParseError(field, "expected a number, \"inf\" or \"-inf\"");
}

inline const json& require(const json& j, const char* key, const std::string& path)
{
    if (!j.is_object())
        throw ParseError(path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end())
        throw ParseError(path.empty() ? key : path + "." + key, "missing field");
    return *it;
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& path)
{
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            ok = ok || it.key() == k;
        if (!ok)
            throw ParseError(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
    }
}

// --- matrices --------------------------------------------------------------

inline json matrix_to_json(const Matrix& m)
{
    json entries = json::array();
    for (Index i = 0; i < m.rows(); ++i)
        for (Index k = 0; k < m.cols(); ++k)
            entries.push_back({m(i, k).real(), m(i, k).imag()});
    return {{"dim", m.rows()}, {"entries", std::move(entries)}};
}

inline Matrix matrix_from_json(const json& j, const std::string& path)
{
    reject_unknown(j, {"dim", "entries"}, path);
    const auto& jd = require(j, "dim", path);
    if (!jd.is_number_integer() || jd.get<long long>() < 1)
        throw ParseError(path + ".dim", "expected a positive integer");
    const Index n = jd.get<Index>();
    const auto& je = require(j, "entries", path);
    if (!je.is_array())
        throw ParseError(path + ".entries", "expected an array");
    if (static_cast<Index>(je.size()) != n * n) {
        std::ostringstream os;
        os << "expected " << n * n << " entries for dim " << n << ", got " << je.size();
        throw ParseError(path + ".entries", os.str());
    }
    Matrix m(n, n);
    for (Index idx = 0; idx < n * n; ++idx) {
        const auto& e = je[static_cast<std::size_t>(idx)];
        const std::string field = path + ".entries[" + std::to_string(idx) + "]";
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw ParseError(field, "expected [re, im]");
        m(idx / n, idx % n) = Complex(e[0].get<double>(), e[1].get<double>());
    }
    return m;
}

inline HermitianOperator operator_from_json(const json& j, const std::string& path)
{
    try {
        return HermitianOperator(matrix_from_json(j, path));
    } catch (const PreconditionError& e) {
        throw ParseError(path, e.what());
    }
}

// --- interval unions -------------------------------------------------------

inline json intervals_to_json(const IntervalUnion& s)
{
    json out = json::array();
    for (const auto& i : s.intervals())
        out.push_back({real_to_json(i.lo), real_to_json(i.hi), i.lo_closed, i.hi_closed});
    return out;
}

inline IntervalUnion intervals_from_json(const json& j, const std::string& path)
{
    if (!j.is_array())
        throw ParseError(path, "expected an array of [lo, hi, lo_closed, hi_closed]");
    std::vector<Interval> parts;
    for (std::size_t k = 0; k < j.size(); ++k) {
        const auto& e = j[k];
        const std::string field = path + "[" + std::to_string(k) + "]";
        if (!e.is_array() || e.size() != 4 || !e[2].is_boolean() || !e[3].is_boolean())
            throw ParseError(field, "expected [lo, hi, lo_closed, hi_closed]");
        parts.push_back({real_from_json(e[0], field + "[0]"), real_from_json(e[1], field + "[1]"), e[2].get<bool>(),
                         e[3].get<bool>()});
    }
    try {
        return IntervalUnion(std::move(parts));
    } catch (const PreconditionError& e) {
        throw ParseError(path, e.what());
    }
}

// --- instance documents ----------------------------------------------------

struct InstanceDocument {
    HermitianOperator a;
    HermitianOperator v;
    IntervalUnion sigma;
    std::optional<double> declared_gap;
};

inline json instance_to_json(const HermitianOperator& a, const HermitianOperator& v, const IntervalUnion& sigma,
                             std::optional<double> declared_gap = std::nullopt)
{
    json j{{"format", kInstanceFormat},
           {"A", matrix_to_json(a.matrix())},
           {"V", matrix_to_json(v.matrix())},
           {"sigma", intervals_to_json(sigma)}};
    if (declared_gap)
        j["declared_gap"] = *declared_gap;
    return j;
}

inline InstanceDocument instance_from_json(const json& j)
{
    reject_unknown(j, {"format", "A", "V", "sigma", "declared_gap"}, "");
    const auto& fmt = require(j, "format", "");
    if (!fmt.is_string() || fmt.get<std::string>() != kInstanceFormat)
        throw ParseError("format", std::string("expected \"") + kInstanceFormat + "\"");
    InstanceDocument doc{operator_from_json(require(j, "A", ""), "A"), operator_from_json(require(j, "V", ""), "V"),
                         intervals_from_json(require(j, "sigma", ""), "sigma"), std::nullopt};
    if (doc.a.dim() != doc.v.dim())
        throw ParseError("V.dim", "dimension differs from A.dim");
    if (j.contains("declared_gap"))
        doc.declared_gap = real_from_json(j["declared_gap"], "declared_gap");
    return doc;
}

/// Parses text; syntax errors report line and column.
inline json parse_text(const std::string& text, const std::string& source)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
            if (text[k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::ostringstream os;
        os << source << ":" << line << ":" << col << ": syntax error";
        throw ParseError("", os.str());
    }
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline InstanceDocument load_instance(const std::string& path)
{
    return instance_from_json(parse_text(read_file(path), path));
}

// --- reports ---------------------------------------------------------------

inline json bound_to_json(const BoundValue& b)
{
    return {{"name", b.name},
            {"value", real_to_json(b.value)},
            {"measured", real_to_json(b.measured)},
            {"applicable", b.applicable},
            {"vacuous", b.vacuous},
            {"kind", b.kind == BoundKind::ceiling ? "ceiling" : "estimate"},
            {"violated", b.violated()}};
}

inline json report_to_json(const BoundReport& r)
{
    json bounds = json::array();
    for (const auto& b : r.bounds)
        bounds.push_back(bound_to_json(b));
    return {{"format", kReportFormat},
            {"d", r.d},
            {"v_norm", r.v_norm},
            {"v_ratio", r.ratio()},
            {"v_diag_norm", r.v_diag_norm},
            {"v_off_norm", r.v_off_norm},
            {"regime", to_string(r.regime)},
            {"hull", to_string(r.hull)},
            {"ceiling_asserted", r.ceiling_asserted()},
            {"note", r.ceiling_asserted() ? "" : "no ceiling asserted"},
            {"sigma_eigenvalues", r.sigma_eigenvalues},
            {"Sigma_eigenvalues", r.Sigma_eigenvalues},
            {"rank_p", r.rank_p},
            {"rank_q", r.rank_q},
            {"measured",
             {{"pq_perp", r.measured.pq_perp},
              {"p_perp_q", r.measured.p_perp_q},
              {"difference", r.measured.difference}}},
            {"kernel_dims",
             {{"pq_perp_fixed", r.kernel.pq_perp_fixed},
              {"p_perp_q_fixed", r.kernel.p_perp_q_fixed},
              {"index", r.kernel.index}}},
            {"bounds", std::move(bounds)},
            {"violations", r.violations}};
}

inline json spec_to_json(const explore::InstanceSpec& s)
{
    return {{"sigma_eigs", s.sigma_eigs},
            {"Sigma_eigs", s.Sigma_eigs},
            {"declared_gap", s.declared_gap},
            {"v_ratio", s.v_ratio},
            {"seed", s.seed},
            {"shape", to_string(s.shape)}};
}

inline explore::InstanceSpec spec_from_json(const json& j, const std::string& path)
{
    reject_unknown(j, {"sigma_eigs", "Sigma_eigs", "declared_gap", "v_ratio", "seed", "shape", "dim"}, path);
    explore::InstanceSpec s;
    try {
        s.sigma_eigs = require(j, "sigma_eigs", path).get<std::vector<double>>();
        s.Sigma_eigs = require(j, "Sigma_eigs", path).get<std::vector<double>>();
        s.v_ratio = require(j, "v_ratio", path).get<double>();
        if (j.contains("declared_gap"))
            s.declared_gap = j["declared_gap"].get<double>();
        if (j.contains("seed"))
            s.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::type_error& e) {
        throw ParseError(path, e.what());
    }
    if (j.contains("shape")) {
        const auto shape = j["shape"].get<std::string>();
        using explore::PerturbationShape;
        bool found = false;
        for (auto ps : {PerturbationShape::dense, PerturbationShape::rank_one, PerturbationShape::off_diagonal})
            if (shape == to_string(ps)) {
                s.shape = ps;
                found = true;
            }
        if (!found)
            throw ParseError(path + ".shape", "unknown perturbation shape '" + shape + "'");
    }
    return s;
}

/// One JSONL line. wall_time_ms is the only non-reproducible field.
inline json trial_to_json(const explore::TrialRecord& t)
{
    json j{{"format", kTrialFormat},
           {"spec", spec_to_json(t.spec)},
           {"report", report_to_json(t.report)},
           {"best_iterate", t.best_iterate},
           {"violation_candidate", t.violation_candidate},
           {"flag", t.violation_candidate ? "VIOLATION-CANDIDATE" : ""},
           {"wall_time_ms", t.wall_time_ms}};
    if (t.extended_difference)
        j["extended_difference"] = *t.extended_difference;
    return j;
}

// --- CSV -------------------------------------------------------------------

inline std::string csv_real(double x)
{
    if (std::isnan(x))
        return "";
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

/// Bound names in report order, for CSV headers.
inline std::vector<std::string> bound_names(const BoundReport& r)
{
    std::vector<std::string> names;
    for (const auto& b : r.bounds)
        names.push_back(b.name);
    return names;
}

inline const std::vector<std::string>& standard_bound_columns()
{
    static const std::vector<std::string> cols{"corner_generic",    "corner_hull",   "tan2theta_offdiag",
                                               "tan2theta_split",   "tan2theta_general", "sqrt2_ceiling",
                                               "unit_ceiling",      "certificate_sigma", "certificate_Sigma"};
    return cols;
}

inline std::string sweep_csv_header()
{
    std::string h = "seed,dim,d,v_norm,regime,measured_pq";
    for (const auto& c : standard_bound_columns())
        h += "," + c;
    h += ",violation_count";
    return h;
}

/// (seed, dim, d, v_norm, regime, measured_pq, bound values..., violation_count);
/// inapplicable bounds are empty cells.
inline std::string sweep_csv_row(std::uint64_t seed, const BoundReport& r)
{
    std::ostringstream os;
    os << seed << "," << r.sigma_eigenvalues.size() + r.Sigma_eigenvalues.size() << "," << csv_real(r.d) << ","
       << csv_real(r.v_norm) << "," << to_string(r.regime) << "," << csv_real(r.measured.difference);
    for (const auto& c : standard_bound_columns()) {
        const auto* b = r.find(c);
        os << "," << (b && b->applicable ? csv_real(b->value) : "");
    }
    os << "," << r.violations.size();
    return os.str();
}

// --- manifests: master seed → cell seeds ----------------------------------

inline std::vector<explore::Layout> layouts_from_json(const json& j, const std::string& path)
{
    if (!j.is_array())
        throw ParseError(path, "expected an array of layout names");
    std::vector<explore::Layout> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        const std::string field = path + "[" + std::to_string(k) + "]";
        if (!j[k].is_string())
            throw ParseError(field, "expected a layout name");
        try {
            out.push_back(explore::parse_layout(j[k].get<std::string>()));
        } catch (const PreconditionError& e) {
            throw ParseError(field, e.what());
        }
    }
    return out;
}

inline json search_manifest(const explore::SearchConfig& cfg, const std::vector<explore::SearchCellResult>& results)
{
    json cells = json::array();
    for (const auto& r : results) {
        json starts = json::array();
        for (int k = 0; k < r.cell.starts; ++k)
            starts.push_back(explore::start_seed(r.cell, k));
        json c{{"dim", r.cell.dim},
               {"ratio", r.cell.ratio},
               {"layout", explore::to_string(r.cell.layout)},
               {"seed", r.cell.seed},
               {"starts", r.cell.starts},
               {"iterations", r.cell.iterations},
               {"start_seeds", std::move(starts)},
               {"skipped", r.skipped}};
        if (r.skipped)
            c["skip_reason"] = r.skip_reason;
        else
            c["max_difference"] = r.max_difference;
        cells.push_back(std::move(c));
    }
    return {{"format", kManifestFormat}, {"kind", "search"}, {"master_seed", cfg.master_seed},
            {"ratio", cfg.ratio},        {"cells", std::move(cells)}};
}

namespace detail {

/// The manifest section of the given kind: the document itself, or the
/// matching member of a "run" manifest. Null when a run has no such section.
inline const json* manifest_section(const json& j, const std::string& kind)
{
    const auto& fmt = require(j, "format", "");
    if (!fmt.is_string() || fmt.get<std::string>() != kManifestFormat)
        throw ParseError("format", std::string("expected \"") + kManifestFormat + "\"");
    const auto& k = require(j, "kind", "");
    if (k == kind)
        return &j;
    if (k == "run")
        return j.contains(kind) ? &j[kind] : nullptr;
    throw ParseError("kind", "expected \"" + kind + "\" or \"run\"");
}

inline const json& manifest_cells(const json& section, const std::string& prefix)
{
    const auto& cells = require(section, "cells", prefix);
    if (!cells.is_array())
        throw ParseError(prefix.empty() ? "cells" : prefix + ".cells", "expected an array");
    return cells;
}

}  // namespace detail

/// Cells recorded in a search manifest, ready for replay.
inline std::vector<explore::SearchCell> search_cells_from_manifest(const json& j)
{
    std::vector<explore::SearchCell> out;
    const json* sec = detail::manifest_section(j, "search");
    if (!sec)
        return out;
    const std::string prefix = sec == &j ? "" : "search";
    const auto& cells = detail::manifest_cells(*sec, prefix);
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const std::string path = (prefix.empty() ? "" : prefix + ".") + "cells[" + std::to_string(k) + "]";
        const auto& c = cells[k];
        explore::SearchCell cell;
        try {
            cell.dim = require(c, "dim", path).get<Index>();
            cell.ratio = require(c, "ratio", path).get<double>();
            cell.seed = require(c, "seed", path).get<std::uint64_t>();
            cell.starts = require(c, "starts", path).get<int>();
            cell.iterations = require(c, "iterations", path).get<int>();
            cell.layout = explore::parse_layout(require(c, "layout", path).get<std::string>());
        } catch (const json::exception& e) {
            throw ParseError(path, e.what());
        } catch (const PreconditionError& e) {
            throw ParseError(path + ".layout", e.what());
        }
        out.push_back(cell);
    }
    return out;
}

inline json scan_manifest(const explore::ScanConfig& cfg, const explore::ScanSummary& s)
{
    json cells = json::array();
    for (const auto& c : s.cells) {
        json jc{{"dim", c.cell.dim},
                {"ratio", c.cell.ratio},
                {"layout", explore::to_string(c.cell.layout)},
                {"seed", c.cell.seed},
                {"trials", c.trials},
                {"skipped", c.skipped}};
        if (c.skipped)
            jc["skip_reason"] = c.skip_reason;
        else
            jc["max_difference"] = c.max_difference;
        cells.push_back(std::move(jc));
    }
    return {{"format", kManifestFormat}, {"kind", "scan"}, {"master_seed", cfg.master_seed},
            {"trials", cfg.trials},      {"cells", std::move(cells)}};
}

struct ManifestScanCell {
    explore::ScanCell cell;
    int trials = 0;
};

/// Scan cells and trial counts recorded in a manifest.
inline std::vector<ManifestScanCell> scan_cells_from_manifest(const json& j)
{
    std::vector<ManifestScanCell> out;
    const json* sec = detail::manifest_section(j, "scan");
    if (!sec)
        return out;
    const std::string prefix = sec == &j ? "" : "scan";
    const auto& cells = detail::manifest_cells(*sec, prefix);
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const std::string path = (prefix.empty() ? "" : prefix + ".") + "cells[" + std::to_string(k) + "]";
        const auto& c = cells[k];
        ManifestScanCell m;
        try {
            m.cell.dim = require(c, "dim", path).get<Index>();
            m.cell.ratio = require(c, "ratio", path).get<double>();
            m.cell.seed = require(c, "seed", path).get<std::uint64_t>();
            m.cell.layout = explore::parse_layout(require(c, "layout", path).get<std::string>());
            m.trials = require(c, "trials", path).get<int>();
        } catch (const json::exception& e) {
            throw ParseError(path, e.what());
        } catch (const PreconditionError& e) {
            throw ParseError(path + ".layout", e.what());
        }
        out.push_back(m);
    }
    return out;
}

}  // namespace specgap::io
