#include <gtest/gtest.h>

#include <sstream>

#include "matcomp/dataset_io.hpp"
#include "matcomp/synthetic.hpp"
#include "matcomp/table.hpp"
#include "test_util.hpp"

using namespace matcomp;

TEST(Table, RejectsRaggedAndEmptyGrids) {
  EXPECT_THROW(Table("t", {{"a", "b", "c", "d"}, {"a", "b", "c"}}), std::invalid_argument);
  EXPECT_THROW(Table("t", {}), std::invalid_argument);
  EXPECT_THROW(Table("t", {{}}), std::invalid_argument);
}

TEST(Table, TransposeTwiceIsIdentity) {
  const Table t("t", {{"a", "b", "c"}, {"d", "e", "f"}}, "cap", "foot", {"s"});
  const Table tt = t.transposed();
  EXPECT_EQ(tt.rows(), 3);
  EXPECT_EQ(tt.cell(2, 1), "f");
  EXPECT_EQ(tt.transposed(), t);
}

TEST(Annotation, TransposeSwapsLabelsAndLinks) {
  TableAnnotation a;
  a.table_type = TableType::MCC_CI;
  a.row_labels = {RowColLabel::Other, RowColLabel::Composition};
  a.col_labels = {RowColLabel::Id, RowColLabel::Constituent, RowColLabel::Constituent};
  a.edge_links[{1, 1}] = {0, 1};
  const auto t = a.transposed();
  EXPECT_EQ(t.row_labels, a.col_labels);
  EXPECT_EQ(t.col_labels, a.row_labels);
  EXPECT_EQ(t.edge_links.at({1, 1}), (Coord{1, 0}));
  EXPECT_EQ(t.transposed(), a);
}

TEST(Annotation, ValidateAgainstTable) {
  const Table t("t", {{"a", "b"}, {"c", "d"}});
  TableAnnotation a;
  a.row_labels = {RowColLabel::Other, RowColLabel::Other};
  a.col_labels = {RowColLabel::Other};
  EXPECT_THROW(a.validate_against(t), std::invalid_argument);
  a.col_labels = {RowColLabel::Other, RowColLabel::Other};
  EXPECT_NO_THROW(a.validate_against(t));
  a.edge_links[{1, 1}] = {5, 0};
  EXPECT_THROW(a.validate_against(t), std::invalid_argument);
}

TEST(CellNumbers, Parsing) {
  EXPECT_EQ(parse_cell_number("57"), 57.0);
  EXPECT_EQ(parse_cell_number(" 38.0 ± 0.2"), 38.0);
  EXPECT_EQ(parse_cell_number("0.8"), 0.8);
  EXPECT_FALSE(parse_cell_number("–").has_value());
  EXPECT_FALSE(parse_cell_number("").has_value());
  EXPECT_FALSE(parse_cell_number("A1").has_value());
  EXPECT_TRUE(is_numeric_cell(" 12.5 "));
  EXPECT_FALSE(is_numeric_cell("12.5 mol%"));
  EXPECT_EQ(trim("  a b \t"), "a b");
}

TEST(ValidateTuples, PaperMaterialIsClean) {
  const std::vector<CompositionTuple> t = {{"A1", "MoO3", 5, Unit::MolePercent},
                                           {"A1", "Fe2O3", 38, Unit::MolePercent},
                                           {"A1", "P2O5", 57, Unit::MolePercent}};
  EXPECT_TRUE(validate_tuples(t).clean());
  EXPECT_TRUE(validate_tuples({{"X", "SiO2", 100, Unit::MolePercent}}).clean());
}

TEST(ValidateTuples, FlagsProblems) {
  const auto dup = validate_tuples({{"X", "SiO2", 60, Unit::MolePercent}, {"X", "SiO2", 40, Unit::MolePercent}});
  ASSERT_EQ(dup.materials.size(), 1u);
  EXPECT_EQ(dup.materials[0].duplicate_constituents, std::vector<std::string>{"SiO2"});
  const auto bad = validate_tuples({{"Y", "SiO2", 90, Unit::MolePercent}, {"Y", "B2O3", 0, Unit::WeightPercent}});
  ASSERT_EQ(bad.materials.size(), 1u);
  EXPECT_NEAR(bad.materials[0].deviation, -10, 1e-12);
  EXPECT_EQ(bad.materials[0].non_positive_constituents, std::vector<std::string>{"B2O3"});
  EXPECT_TRUE(bad.materials[0].mixed_units);
}

TEST(Dataset, MinimalRecord) {
  std::istringstream in(R"({"id":"t1","cells":[["a","b"],["c","d"]],"caption":"","footer":"","paper_text":[]})"
                        "\n");
  const auto d = read_dataset(in);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_FALSE(d[0].annotation.has_value());
  EXPECT_EQ(d[0].table.cell(1, 0), "c");
}

TEST(Dataset, ErrorsNameLineAndField) {
  std::istringstream in("\n"
                        R"({"id":"ok","cells":[["a"]]})" "\n"
                        R"({"id":"bad","cells":[["a","b","c","d"],["a","b","c"]]})" "\n");
  try {
    read_dataset(in);
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("ragged"), std::string::npos) << e.what();
  }
  std::istringstream labels(R"({"id":"t","cells":[["a"],["b"]],"annotation":{"table_type":"NC","row_labels":[0],"col_labels":[0]}})");
  try {
    read_dataset(labels);
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("annotation"), std::string::npos) << e.what();
  }
  std::istringstream missing(R"({"cells":[["a"]]})");
  try {
    read_dataset(missing);
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("'id'"), std::string::npos) << e.what();
  }
}

TEST(Dataset, RejectedRecordsAreSkippedWhenCollected) {
  std::istringstream in(R"({"id":"a","cells":[["x"]]})" "\n"
                        "{not json\n"
                        R"({"id":"b","cells":[["y"]]})" "\n");
  std::vector<DatasetError> rejected;
  const auto d = read_dataset(in, &rejected);
  EXPECT_EQ(d.size(), 2u);
  ASSERT_EQ(rejected.size(), 1u);
  EXPECT_EQ(rejected[0].line(), 2u);
}

TEST(Dataset, RoundTripOfGeneratedCorpus) {
  GeneratorConfig cfg;
  cfg.tables = 60;
  const auto corpus = generate_synthetic(cfg, 4);
  std::stringstream ss;
  write_dataset(ss, corpus.tables);
  EXPECT_EQ(read_dataset(ss), corpus.tables);
}

TEST(Dataset, ExtractionRoundTrip) {
  ExtractionRecord r{"t9", TableType::MCC_PI, {{"G1", "SiO2", 100.0 / 3.0, Unit::WeightPercent}},
                     std::vector<RowColLabel>{RowColLabel::Composition}, std::vector<RowColLabel>{RowColLabel::Other}};
  std::stringstream ss;
  write_extractions(ss, {r});
  const auto back = read_extractions(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], r);
  EXPECT_NE(ss.str().find("\"wt%\""), std::string::npos);
}

TEST(Enums, StringForms) {
  for (auto t : {TableType::NC, TableType::SCC, TableType::MCC_CI, TableType::MCC_PI})
    EXPECT_EQ(table_type_from_string(to_string(t)), t);
  EXPECT_EQ(to_string(Unit::MolePercent), "mol%");
  EXPECT_EQ(unit_from_string("wt%"), Unit::WeightPercent);
  EXPECT_THROW(unit_from_string("ppm"), std::invalid_argument);
  EXPECT_EQ(static_cast<int>(RowColLabel::Id), 3);
}
