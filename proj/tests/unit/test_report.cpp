#include <gtest/gtest.h>

#include "sparq/error.hpp"
#include "sparq/report.hpp"
#include "sparq/synth.hpp"

using namespace sparq;
using nlohmann::json;

namespace {

RunReport conv_report(std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<ConvLayerSpec> layers{random_conv_spec(rng, 2, 4, 3, 1, 1, true, Pool::Max2x2)};
  RunOptions o;
  o.name = "unit";
  return run_network(layers, random_feature_map(rng, 2, 8, 8, 0.7), o).report;
}

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(50.0), "50");
  EXPECT_EQ(format_double(1e-13), "1e-13");
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.uniform_int(-60, 60)));
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(ConfigJson, ProvenanceAndRoundTrip) {
  MemConfig c;
  auto p = config_provenance(c);
  EXPECT_EQ(p["row_change_factor"]["provenance"], "paper-derived");
  EXPECT_EQ(p["words_per_row"]["provenance"], "default-config");
  c.words_per_row = 512;
  c.row_change_factor = 30;
  p = config_provenance(c);
  EXPECT_EQ(p["words_per_row"]["provenance"], "user-config");
  EXPECT_EQ(p["row_change_factor"]["provenance"], "user-config");
  EXPECT_EQ(mem_config_from_json(json::parse(to_json(c).dump())), c);
  EXPECT_THROW(mem_config_from_json(json{{"nope", 1}}), InvalidArgument);
}

TEST(RunReportJson, FieldsAndDeterminism) {
  const RunReport r = conv_report(4);
  const auto j = to_json(r);
  EXPECT_EQ(j["name"], "unit");
  EXPECT_EQ(j["ops"]["macs_executed"], r.ops.macs_executed);
  EXPECT_EQ(j["layers"].size(), 1u);
  EXPECT_EQ(j["output_hash"].get<std::string>().size(), 16u);
  EXPECT_TRUE(j.contains("fom"));
  EXPECT_TRUE(j.contains("config"));
  EXPECT_FALSE(j.contains("recurrent"));
  EXPECT_EQ(to_json(conv_report(4)).dump(), j.dump());
  EXPECT_NE(to_json(conv_report(5)).dump(), j.dump());
}

TEST(RunReportCsv, HeaderAndTotals) {
  const RunReport r = conv_report(6);
  const std::string csv = to_csv(r);
  EXPECT_EQ(csv.rfind("# name=unit", 0), 0u);
  EXPECT_NE(csv.find("layer,kind,dense_equivalent_ops"), std::string::npos);
  EXPECT_NE(csv.find("\ntotal,"), std::string::npos);
  EXPECT_NE(csv.find("row_change_factor=50(paper-derived)"), std::string::npos);
  EXPECT_EQ(to_csv(conv_report(6)), csv);
}

TEST(Scatter, IsoEfficiencyLine) {
  EXPECT_DOUBLE_EQ(iso_efficiency_gops(1.0, 1.0), 1000.0);
  EXPECT_DOUBLE_EQ(iso_efficiency_gops(0.01, 10.0), 100.0);
  const auto p = make_point("chip", 1000.0, 1.0);
  EXPECT_DOUBLE_EQ(p.gops_per_watt, 1000.0);
  EXPECT_TRUE(on_iso_line(p, 1.0));
  EXPECT_FALSE(on_iso_line(p, 10.0));
  EXPECT_TRUE(on_iso_line(make_point("x", 5.0, 0.5), 0.01));
}

TEST(Scatter, CsvAndSvg) {
  const std::vector<ScatterPoint> pts{make_point("a", 100, 1), make_point("b<&>", 2, 0.01)};
  const std::string csv = scatter_csv(pts);
  EXPECT_EQ(csv.rfind("name,gops,watts,gops_per_watt\n", 0), 0u);
  EXPECT_NE(csv.find("a,100,1,100\n"), std::string::npos);
  const std::string svg = scatter_svg(pts, "T");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("class=\"iso\""), std::string::npos);
  std::size_t points = 0;
  for (auto pos = svg.find("class=\"point\""); pos != std::string::npos; pos = svg.find("class=\"point\"", pos + 1)) {
    ++points;
  }
  EXPECT_EQ(points, 2u);
  EXPECT_EQ(svg.find("b<&>"), std::string::npos);  // escaped
  EXPECT_NE(svg.find("b&lt;&amp;&gt;"), std::string::npos);
}

TEST(Scatter, PointFromReport) {
  const RunReport r = conv_report(7);
  const auto p = scatter_point_from_report(json::parse(to_json(r).dump()));
  EXPECT_EQ(p.name, "unit");
  EXPECT_DOUBLE_EQ(p.gops, r.fom.effective_gops);
  EXPECT_DOUBLE_EQ(p.watts, r.fom.watts);
  EXPECT_THROW(scatter_point_from_report(json{{"name", "x"}}), MalformedStream);
}
