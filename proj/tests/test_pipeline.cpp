#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "kamor/pipeline.hpp"

namespace {

using namespace kamor;

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() /
           ("kamor_pipe_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  void TearDown() override { fs::remove_all(root); }
  std::string path(const std::string& name) const { return (root / name).string(); }
  fs::path root;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::vector<std::string> problems_of(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.problems;
  }
  return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& field) {
  for (const auto& p : problems)
    if (p.rfind(field, 0) == 0) return true;
  return false;
}

TEST(ParseConfig, ValidOrConfig) {
  const json j = {{"command", "or"},
                  {"inputs", {{"structure1", "gaussian"}, {"structure2", "gaussian"}}},
                  {"outputs", {{"estimate1", "a"}, {"estimate2", "b"}}},
                  {"grid", {{"k_min", 0.1}, {"k_max", 2.0}, {"K", 9}}},
                  {"L", 3},
                  {"seed", 5},
                  {"sdp", {{"tol_obj", 1e-9}}}};
  const PipelineConfig c = parse_config(j);
  EXPECT_EQ(c.command, "or");
  EXPECT_EQ(c.K, 9);
  EXPECT_EQ(c.L, 3);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.sdp.tol_obj, 1e-9);
  EXPECT_EQ(c.sdp.tol_feas, 1e-8);
  EXPECT_EQ(c.outputs.at("report"), "report.json");
}

TEST(ParseConfig, ListsEveryBadField) {
  const json j = {{"command", "or"},
                  {"inputs", {{"structure1", "gaussian"}}},
                  {"grid", {{"k_min", -1.0}, {"k_max", 2.0}, {"K", 0}}},
                  {"L", -2},
                  {"noise_eps", -0.1},
                  {"sdp", {{"max_iters", 0}}},
                  {"bogus", true}};
  const auto p = problems_of(j);
  EXPECT_TRUE(mentions(p, "inputs.structure2"));
  EXPECT_TRUE(mentions(p, "outputs.estimate1"));
  EXPECT_TRUE(mentions(p, "outputs.estimate2"));
  EXPECT_TRUE(mentions(p, "grid.k_min"));
  EXPECT_TRUE(mentions(p, "grid.K"));
  EXPECT_TRUE(mentions(p, "L"));
  EXPECT_TRUE(mentions(p, "noise_eps"));
  EXPECT_TRUE(mentions(p, "seed"));
  EXPECT_TRUE(mentions(p, "sdp.max_iters"));
  EXPECT_TRUE(mentions(p, "unknown field 'bogus'"));
  EXPECT_EQ(p.size(), 10u);
}

TEST(ParseConfig, MissingCommandAndGrid) {
  const auto p = problems_of(json{{"seed", 1}});
  EXPECT_TRUE(mentions(p, "command"));
  const auto q = problems_of(json{{"command", "oe"},
                                  {"seed", 1},
                                  {"inputs", {{"target", "x"}, {"homolog", "y"}}},
                                  {"outputs", {{"estimate", "z"}}}});
  EXPECT_EQ(q, std::vector<std::string>{"grid: required for oe"});
  EXPECT_THROW(parse_config(json::array()), ConfigError);
}

TEST_F(PipelineTest, OeWithExactHomologRecoversTruth) {
  const RadialGrid grid = RadialGrid::uniform(0.1, 2.0, 20);
  save_coefficients(gaussian_coefficients(grid, 8, 3), root / "truth");
  const json j = {{"command", "oe"},
                  {"inputs", {{"target", path("truth")}, {"homolog", path("truth")}}},
                  {"outputs", {{"estimate", path("est")}, {"report", path("report.json")}}},
                  {"grid", {{"k_min", 0.1}, {"k_max", 2.0}, {"K", 20}}},
                  {"L", 8},
                  {"seed", 1}};
  const PipelineResult r = run_pipeline(parse_config(j));
  EXPECT_LT(r.report["max_error"].get<double>(), 1e-8);
  EXPECT_EQ(r.report["per_l"].size(), 9u);
  EXPECT_NEAR(r.report["fsc"]["mean"].get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(fs::exists(root / "est" / "manifest.json"));
  const json disk = json::parse(slurp(root / "report.json"));
  EXPECT_EQ(disk["schema"], kReportSchema);
  EXPECT_TRUE(disk.contains("timing"));
}

TEST_F(PipelineTest, OeFromPhantomFile) {
  save_phantom(random_phantom(5, 2.0, 0.5, 1.0, 3), path("p.json"));
  const json j = {{"command", "oe"},
                  {"inputs", {{"target", path("p.json")}, {"homolog", path("p.json")}}},
                  {"outputs", {{"estimate", path("est")}, {"report", path("report.json")}}},
                  {"grid", {{"k_min", 0.1}, {"k_max", 2.0}, {"K", 12}}},
                  {"seed", 1}};
  const PipelineResult r = run_pipeline(parse_config(j));
  EXPECT_EQ(r.report["L"].get<int>(), default_band_limit(load_phantom(path("p.json")), RadialGrid::uniform(0.1, 2.0, 12)));
  EXPECT_GT(r.report["fsc"]["mean"].get<double>(), 1.0 - 1e-9);
}

TEST_F(PipelineTest, OrRecoversGaussianStructures) {
  const json j = {{"command", "or"},
                  {"inputs", {{"structure1", "gaussian"}, {"structure2", "gaussian"}}},
                  {"outputs",
                   {{"estimate1", path("e1")}, {"estimate2", path("e2")}, {"report", path("r.json")}}},
                  {"grid", {{"k_min", 0.1}, {"k_max", 2.0}, {"K", 9}}},
                  {"L", 3},
                  {"seed", 7}};
  const PipelineResult r = run_pipeline(parse_config(j));
  EXPECT_LT(r.report["max_error"].get<double>(), 1e-4);
  EXPECT_TRUE(r.report["skipped"].empty());
  for (const auto& e : r.report["per_l"]) {
    EXPECT_LT(e["error1"].get<double>(), 1e-4);
    EXPECT_LT(e["error2"].get<double>(), 1e-4);
  }
}

TEST_F(PipelineTest, OrSkipsAboveGate) {
  const json j = {{"command", "or"},
                  {"inputs", {{"structure1", "gaussian"}, {"structure2", "gaussian"}}},
                  {"outputs", {{"estimate1", path("e1")}, {"estimate2", path("e2")}, {"report", path("r.json")}}},
                  {"grid", {{"k_min", 0.1}, {"k_max", 2.0}, {"K", 6}}},
                  {"L", 4},
                  {"seed", 2}};
  const PipelineResult r = run_pipeline(parse_config(j));
  EXPECT_EQ(r.report["skipped"], json({4}));
}

TEST_F(PipelineTest, RerunIsByteIdentical) {
  const auto config = [&](const std::string& tag) {
    return json{{"command", "or"},
                {"inputs", {{"structure1", "gaussian"}, {"structure2", "gaussian"}}},
                {"outputs", {{"estimate1", path(tag + "1")}, {"estimate2", path(tag + "2")},
                             {"report", path(tag + ".json")}}},
                {"grid", {{"k_min", 0.1}, {"k_max", 2.0}, {"K", 7}}},
                {"L", 2},
                {"noise_eps", 0.01},
                {"seed", 11}};
  };
  json ra = run_pipeline(parse_config(config("a"))).report;
  json rb = run_pipeline(parse_config(config("b"))).report;
  for (int l = 0; l <= 2; ++l) {
    const std::string f = "l00" + std::to_string(l) + ".bin";
    EXPECT_EQ(slurp(root / "a1" / f), slurp(root / "b1" / f));
    EXPECT_EQ(slurp(root / "a2" / f), slurp(root / "b2" / f));
  }
  EXPECT_EQ(slurp(root / "a1" / "manifest.json"), slurp(root / "b1" / "manifest.json"));
  ra.erase("timing");
  rb.erase("timing");
  EXPECT_EQ(ra, rb);
}

TEST_F(PipelineTest, ExpandAutocorrFscChain) {
  save_phantom(random_phantom(4, 2.0, 0.5, 1.0, 5), path("p.json"));
  run_pipeline(parse_config({{"command", "expand"},
                             {"inputs", {{"phantom", path("p.json")}}},
                             {"outputs", {{"coefficients", path("c")}, {"report", path("r1.json")}}},
                             {"grid", {{"k_min", 0.1}, {"k_max", 2.0}, {"K", 5}}},
                             {"seed", 0}}));
  const CoefficientSet c = load_coefficients(root / "c");
  EXPECT_EQ(c.L, default_band_limit(load_phantom(root / "p.json"), c.grid));
  run_pipeline(parse_config({{"command", "autocorr"},
                             {"inputs", {{"coefficients", path("c")}}},
                             {"outputs", {{"autocorrelation", path("ac")}, {"report", path("r2.json")}}},
                             {"seed", 0}}));
  EXPECT_EQ(load_autocorrelations(root / "ac").cls.size(), static_cast<std::size_t>(c.L + 1));
  const PipelineResult f = run_pipeline(parse_config({{"command", "fsc"},
                                                      {"inputs", {{"a", path("c")}, {"b", path("c")}}},
                                                      {"outputs", {{"csv", path("f.csv")}, {"report", path("r3.json")}}},
                                                      {"seed", 0}}));
  EXPECT_NEAR(f.report["fsc"]["mean"].get<double>(), 1.0, 1e-12);
  EXPECT_EQ(slurp(root / "f.csv").rfind("k,fsc,flag\n", 0), 0u);
}

TEST_F(PipelineTest, MissingBandLimitIsConfigError) {
  const json j = {{"command", "or"},
                  {"inputs", {{"structure1", "gaussian"}, {"structure2", "gaussian"}}},
                  {"outputs", {{"estimate1", path("e1")}, {"estimate2", path("e2")}}},
                  {"grid", {{"k_min", 0.1}, {"k_max", 2.0}, {"K", 6}}},
                  {"seed", 2}};
  EXPECT_THROW(run_pipeline(parse_config(j)), ConfigError);
}

}  // namespace
