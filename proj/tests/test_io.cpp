#include <gtest/gtest.h>

#include "specgap/io.hpp"

#include <fstream>

using namespace specgap;

namespace {

std::string example_text()
{
    return R"({
  "format": "specgap-instance/1",
  "A": {"dim": 2, "entries": [[0, 0], [0, 0], [0, 0], [1, 0]]},
  "V": {"dim": 2, "entries": [[0.25, 0], [0.25, 0], [0.25, 0], [-0.25, 0]]},
  "sigma": [[0, 0, true, true]]
})";
}

template <typename F>
std::string parse_error_field(F&& f)
{
    try {
        f();
    } catch (const ParseError& e) {
        return e.field();
    }
    return "<no error>";
}

}  // namespace

TEST(Io, InstanceRoundTrip)
{
    const auto doc = io::instance_from_json(io::parse_text(example_text(), "mem"));
    EXPECT_EQ(doc.a.dim(), 2);
    EXPECT_DOUBLE_EQ(doc.v.matrix()(0, 1).real(), 0.25);
    EXPECT_TRUE(doc.sigma.contains(0.0));
    const auto j = io::instance_to_json(doc.a, doc.v, doc.sigma, 1.0);
    const auto back = io::instance_from_json(io::parse_text(j.dump(2), "mem"));
    EXPECT_EQ(back.a.matrix(), doc.a.matrix());
    EXPECT_EQ(back.v.matrix(), doc.v.matrix());
    EXPECT_EQ(back.sigma, doc.sigma);
    EXPECT_EQ(back.declared_gap, 1.0);
}

TEST(Io, ComplexEntriesRowMajor)
{
    Matrix m(2, 2);
    m << 1, Complex(0, 2), Complex(0, -2), 3;
    const auto j = io::matrix_to_json(m);
    EXPECT_EQ(j["entries"][1][1].get<double>(), 2.0);
    EXPECT_EQ(io::matrix_from_json(j, "M"), m);
}

TEST(Io, SyntaxErrorReportsLineAndColumn)
{
    const std::string bad = "{\n  \"format\": \"specgap-instance/1\",\n  \"A\": [1, 2,,]\n}";
    try {
        io::parse_text(bad, "bad.json");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.json:3:"), std::string::npos) << e.what();
    }
}

TEST(Io, FieldErrorsNameThePath)
{
    auto load = [](const std::string& text) { return [text] { io::instance_from_json(io::parse_text(text, "t")); }; };
    std::string t = example_text();
    EXPECT_EQ(parse_error_field(load(std::string(t).replace(t.find("\"dim\": 2"), 8, "\"dim\": 3"))), "A.entries");
    EXPECT_EQ(parse_error_field(load(std::string(t).replace(t.find("[1, 0]"), 6, "[1]"))), "A.entries[3]");
    EXPECT_EQ(parse_error_field(load(std::string(t).replace(t.find("\"sigma\""), 7, "\"sigmas\""))), "sigmas");
    EXPECT_EQ(parse_error_field(load(std::string(t).replace(t.find("instance/1"), 10, "instance/2"))), "format");
    EXPECT_EQ(parse_error_field(load(std::string(t).replace(t.find("true, true"), 10, "true"))), "sigma[0]");
    // Non-Hermitian V.
    EXPECT_EQ(parse_error_field(load(std::string(t).replace(t.find("[0.25, 0], [0.25, 0], [0.25, 0]"), 31,
                                                             "[0.25, 0], [0.25, 0], [0.5, 0]"))),
              "V");
}

TEST(Io, InfiniteEndpoints)
{
    const auto s = io::intervals_from_json(nlohmann::json::parse(R"([["-inf", 0, false, true]])"), "s");
    EXPECT_TRUE(s.contains(-1e300));
    EXPECT_EQ(io::intervals_to_json(s)[0][0], "-inf");
}

TEST(Io, LoadMissingFile)
{
    EXPECT_THROW(io::load_instance("/nonexistent/file.json"), ParseError);
}

TEST(Io, ReportAndCsvAreStable)
{
    const auto doc = io::instance_from_json(io::parse_text(example_text(), "mem"));
    const auto r = analyze_instance(doc.a, doc.v, doc.sigma);
    const auto j = io::report_to_json(r);
    EXPECT_EQ(j["format"], io::kReportFormat);
    EXPECT_EQ(j["regime"], "subordinated");
    const auto header = io::sweep_csv_header();
    const auto row = io::sweep_csv_row(7, r);
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
    EXPECT_EQ(row.rfind("7,2,", 0), 0u);
}

TEST(Io, SpecRoundTripRejectsUnknownFields)
{
    const auto spec = explore::make_spec(5, 0.3, explore::Layout::mixed, 9);
    const auto back = io::spec_from_json(io::spec_to_json(spec), "spec");
    EXPECT_EQ(back.sigma_eigs, spec.sigma_eigs);
    EXPECT_EQ(back.Sigma_eigs, spec.Sigma_eigs);
    EXPECT_EQ(back.seed, spec.seed);
    EXPECT_EQ(back.shape, spec.shape);
    auto j = io::spec_to_json(spec);
    j["bogus"] = 1;
    EXPECT_EQ(parse_error_field([&] { io::spec_from_json(j, "spec"); }), "spec.bogus");
}

TEST(Io, SearchManifestReplaysCells)
{
    explore::SearchConfig cfg;
    cfg.dims = {3, 4};
    cfg.starts = 2;
    cfg.iterations = 20;
    std::vector<explore::SearchCellResult> results;
    for (const auto& c : explore::search_cells(cfg))
        results.push_back(explore::run_search_cell(c, 1));
    const auto m = io::search_manifest(cfg, results);
    EXPECT_TRUE(m["cells"][0]["skipped"].get<bool>());
    ASSERT_EQ(m["cells"][1]["start_seeds"].size(), 2u);
    EXPECT_EQ(m["cells"][1]["start_seeds"][1].get<std::uint64_t>(), explore::start_seed(results[1].cell, 1));

    const auto cells = io::search_cells_from_manifest(io::parse_text(m.dump(), "m"));
    ASSERT_EQ(cells.size(), 2u);
    const auto again = explore::run_search_cell(cells[1], 1);
    EXPECT_EQ(again.max_difference, m["cells"][1]["max_difference"].get<double>());
}

TEST(Io, RunManifestSections)
{
    explore::ScanConfig sc;
    sc.trials = 5;
    sc.dims = {4};
    sc.ratios = {0.2};
    const auto summary = explore::bound_violation_scan(sc);
    nlohmann::json run{{"format", io::kManifestFormat}, {"kind", "run"}, {"scan", io::scan_manifest(sc, summary)}};
    const auto cells = io::scan_cells_from_manifest(run);
    ASSERT_EQ(cells.size(), 1u);
    EXPECT_EQ(cells[0].cell.seed, summary.cells[0].cell.seed);
    EXPECT_EQ(cells[0].trials, 5);
    EXPECT_EQ(explore::run_cell(cells[0].cell, cells[0].trials, 1, false).max_difference,
              run["scan"]["cells"][0]["max_difference"].get<double>());
    EXPECT_TRUE(io::search_cells_from_manifest(run).empty());

    run["kind"] = "other";
    EXPECT_EQ(parse_error_field([&] { io::scan_cells_from_manifest(run); }), "kind");
    run["kind"] = "run";
    run["scan"]["cells"][0].erase("seed");
    EXPECT_EQ(parse_error_field([&] { io::scan_cells_from_manifest(run); }), "scan.cells[0].seed");
}
