#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "matcomp/cli.hpp"
#include "matcomp/dataset_io.hpp"
#include "test_util.hpp"

using namespace matcomp;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, ParseExprPrintsTreeAndShares) {
  const auto r = run({"parse-expr", "40Bi2O3 * 60B2O3"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "PAT1 [40 Bi2O3, 60 B2O3]\n{Bi2O3: 40, B2O3: 60} mol%\n");
}

TEST(Cli, ParseExprWithVariables) {
  EXPECT_NE(run({"parse-expr", "xNa2O-(100-x)SiO2"}).out.find("variables: x"), std::string::npos);
  const auto r = run({"parse-expr", "xNa2O-(100-x)SiO2", "--assign", "x=20", "--unit", "wt%"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("{Na2O: 20, SiO2: 80} wt%"), std::string::npos) << r.out;
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"extract", "--in", "x.jsonl"}).code, 2);
  EXPECT_EQ(run({"parse-expr", "--unit", "ppm", "SiO2"}).code, 2);
  const auto bad = run({"parse-expr", "hardness (GPa)"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("error:"), std::string::npos);
  EXPECT_EQ(run({"extract", "--in", test::temp_path("none.jsonl").string(), "--out", "o", "--oracle"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, GenerateExtractOracleAndEvaluate) {
  const auto spec = test::temp_path("gen.txt"), data = test::temp_path("gen.jsonl"), kb = test::temp_path("gen.kb"),
             res = test::temp_path("gen.out"), rep = test::temp_path("gen.json"), lab = test::temp_path("lab.jsonl");
  std::ofstream(spec) << "tables: 20\n";
  ASSERT_EQ(run({"gen-synthetic", "--spec", spec.string(), "--seed", "3", "--out", data.string(), "--kb-out", kb.string()}).code, 0);
  EXPECT_EQ(load_dataset(data).size(), 20u);
  const auto ex = run({"extract", "--in", data.string(), "--out", res.string(), "--oracle"});
  ASSERT_EQ(ex.code, 0) << ex.err;
  const auto ev = run({"eval", "--pred", res.string(), "--gold", data.string(), "--json", rep.string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(ev.out.find("tt_accuracy: 1"), std::string::npos) << ev.out;
  EXPECT_TRUE(std::filesystem::exists(rep));
  const auto ld = run({"label-distant", "--kb", kb.string(), "--in", data.string(), "--out", lab.string()});
  ASSERT_EQ(ld.code, 0) << ld.err;
  for (const auto& lt : load_dataset(lab)) EXPECT_TRUE(lt.annotation.has_value());
}
