#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "matcomp/metrics.hpp"
#include "matcomp/pipeline.hpp"
#include "matcomp/synthetic.hpp"
#include "test_util.hpp"

using namespace matcomp;
using L = RowColLabel;

namespace {

const CompoundLexicon& lex() { return CompoundLexicon::builtin(); }

CompositionTuple tup(std::string id, std::string c, double p, Unit u = Unit::MolePercent) {
  return {std::move(id), std::move(c), p, u};
}

void expect_tuples_near(std::vector<CompositionTuple> got, std::vector<CompositionTuple> want) {
  ASSERT_EQ(got.size(), want.size());
  EXPECT_EQ(count_tuple_matches(got, want, 1e-9), static_cast<long>(want.size()));
}

// Complete-information table in the style of the first example of the paper.
LabeledTable complete_info_table() {
  Table t("ci", {{"Glass", "MoO3", "Fe2O3", "P2O5", "Tg (K)"},
                 {"A1", "5", "38", "57", "721"},
                 {"A2", "10", "", "90", "698"},
                 {"A3", "10", "30", "64.5", "702"}},
          "Compositions (mol%) and glass transition temperatures");
  TableAnnotation a;
  a.table_type = TableType::MCC_CI;
  a.row_labels = {L::Other, L::Composition, L::Composition, L::Composition};
  a.col_labels = {L::Id, L::Constituent, L::Constituent, L::Constituent, L::Other};
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j) a.edge_links[{i, j}] = {0, j};
  return {t, a};
}

// Variable table: each row binds x and y of the caption expression.
LabeledTable variable_table() {
  Table t("pi", {{"Sample", "x", "y", "Density"}, {"S1", "0.8", "0.25", "2.61"}, {"S2", "0.5", "0.4", "2.70"}},
          "Glasses [(Na2O)x(Rb2O)1−x]y(B2O3)1−y studied here");
  TableAnnotation a;
  a.table_type = TableType::MCC_PI;
  a.row_labels = {L::Other, L::Composition, L::Composition};
  a.col_labels = {L::Id, L::Constituent, L::Constituent, L::Other};
  for (int i = 1; i <= 2; ++i) {
    a.edge_links[{i, 1}] = {0, 1};
    a.edge_links[{i, 2}] = {0, 2};
  }
  return {t, a};
}

// Compound-only table: the column gives PbO content, the caption the full family.
LabeledTable compound_only_table(const std::string& caption) {
  Table t("pb", {{"PbO", "n"}, {"10", "1.71"}, {"20", "1.78"}, {"30", "1.85"}, {"40", "1.93"}}, caption);
  TableAnnotation a;
  a.table_type = TableType::MCC_PI;
  a.row_labels = {L::Other, L::Composition, L::Composition, L::Composition, L::Composition};
  a.col_labels = {L::Constituent, L::Other};
  for (int i = 1; i <= 4; ++i) a.edge_links[{i, 0}] = {0, 0};
  return {t, a};
}

}  // namespace

TEST(SccExtraction, PaperExpressionWithIdAndUnit) {
  const Table t("s", {{"Glass", "Composition (mol%)"}, {"G1", "40Bi2O3 * 60B2O3"}});
  const auto out = extract_scc_table(t, LineRef{LineRef::Axis::Col, 0}, lex());
  expect_tuples_near(out, {tup("G1", "Bi2O3", 40), tup("G1", "B2O3", 60)});
}

TEST(SccExtraction, SynthesizedIdsAndSkippedCells) {
  const Table t("7", {{"Composition (wt%)", "Tg"}, {"70SiO2-30Na2O", "800"}, {"", "810"}, {"60SiO2-40CaO", "790"}});
  Diagnostics diag;
  const auto out = extract_scc_table(t, std::nullopt, lex(), &diag);
  expect_tuples_near(out, {tup("T7_1", "SiO2", 70, Unit::WeightPercent), tup("T7_1", "Na2O", 30, Unit::WeightPercent),
                           tup("T7_2", "SiO2", 60, Unit::WeightPercent), tup("T7_2", "CaO", 40, Unit::WeightPercent)});
  ASSERT_EQ(diag.size(), 1u);
  EXPECT_NE(diag[0].find("(2,0)"), std::string::npos) << diag[0];
}

TEST(SccExtraction, DopantRenormalized) {
  const Table t("d", {{"ID", "Composition"}, {"E", "99.5SiO2-5Er2O3"}});
  const auto out = extract_scc_table(t, LineRef{LineRef::Axis::Col, 0}, lex());
  expect_tuples_near(out, {tup("E", "SiO2", 99.5 / 104.5 * 100), tup("E", "Er2O3", 5 / 104.5 * 100)});
}

TEST(CiExtraction, PaperRowAndSkippedEmptyCell) {
  const auto lt = complete_info_table();
  const auto out = extract_mcc_ci(labeling_from_annotation(*lt.annotation), lt.table, lex());
  expect_tuples_near(out, {tup("A1", "MoO3", 5), tup("A1", "Fe2O3", 38), tup("A1", "P2O5", 57),
                           tup("A2", "MoO3", 10), tup("A2", "P2O5", 90),
                           tup("A3", "MoO3", 10 / 1.045), tup("A3", "Fe2O3", 30 / 1.045), tup("A3", "P2O5", 64.5 / 1.045)});
}

TEST(CiExtraction, AllZeroLineSkippedWithDiagnostic) {
  auto lt = complete_info_table();
  auto cells = lt.table.cells();
  cells[2] = {"A2", "0", "–", "0", "700"};
  const Table t("ci", cells);
  Diagnostics diag;
  const auto out = extract_mcc_ci(labeling_from_annotation(*lt.annotation), t, lex(), &diag);
  EXPECT_EQ(out.size(), 6u);
  EXPECT_EQ(diag.size(), 1u);
}

TEST(PiFeatures, CompleteInfoCounts) {
  const auto lt = complete_info_table();
  const auto f = compute_pi_features(labeling_from_annotation(*lt.annotation), lt.table, lex());
  EXPECT_EQ(f.unique_variables, 0);
  EXPECT_EQ(f.unique_compounds, 3);
  EXPECT_EQ(f.constituent_lines, 3);
  EXPECT_DOUBLE_EQ(f.max_line_sum, 104.5);
  EXPECT_DOUBLE_EQ(f.mean_line_sum, 100.0 + 4.5 / 3);
  EXPECT_GE(f.max_line_sum, f.mean_line_sum);
}

TEST(PiFeatures, VariableCounts) {
  Table t("v", {{"x", "y"}, {"0.4", "0.6"}, {"0.5", "0.5"}});
  TableAnnotation a;
  a.row_labels = {L::Other, L::Composition, L::Composition};
  a.col_labels = {L::Constituent, L::Constituent};
  for (int i = 1; i <= 2; ++i)
    for (int j = 0; j < 2; ++j) a.edge_links[{i, j}] = {0, j};
  const auto f = compute_pi_features(labeling_from_annotation(a), t, lex());
  EXPECT_EQ(f.unique_variables, 2);
  EXPECT_EQ(f.unique_compounds, 0);
  EXPECT_EQ(f.constituent_lines, 2);
  EXPECT_DOUBLE_EQ(f.max_line_sum, 1.0);
  EXPECT_DOUBLE_EQ(f.mean_line_sum, 1.0);
}

TEST(PiFeatures, SingleLineMaxEqualsMean) {
  Table t("v", {{"SiO2", "Na2O"}, {"70", "25"}});
  TableAnnotation a;
  a.row_labels = {L::Other, L::Composition};
  a.col_labels = {L::Constituent, L::Constituent};
  a.edge_links[{1, 0}] = {0, 0};
  a.edge_links[{1, 1}] = {0, 1};
  const auto f = compute_pi_features(labeling_from_annotation(a), t, lex());
  EXPECT_EQ(f.max_line_sum, f.mean_line_sum);
}

TEST(PiClassifier, ZeroWeightsResolveToCompleteInfo) {
  PiClassifier c;
  PiFeatures f{2, 0, 2, 1, 1};
  EXPECT_DOUBLE_EQ(c.probability(f), 0.5);
  EXPECT_FALSE(c.is_partial(f));
}

TEST(LinkedCells, Classification) {
  EXPECT_EQ(classify_linked_cell("MoO3 (mol%)", lex()).kind, LinkedTerm::Kind::Compound);
  EXPECT_EQ(classify_linked_cell(" x ", lex()).name, "x");
  EXPECT_EQ(classify_linked_cell("x (mol)", lex()).kind, LinkedTerm::Kind::Variable);
  EXPECT_EQ(classify_linked_cell("density", lex()).kind, LinkedTerm::Kind::Other);
}

TEST(PiExtraction, VariablesFromCaption) {
  const auto lt = variable_table();
  const auto out = extract_mcc_pi(labeling_from_annotation(*lt.annotation), lt.table, lex());
  // S2: y = 0.4 of the (Na2O, Rb2O) group split 0.5/0.5.
  expect_tuples_near(out, {tup("S1", "Na2O", 20), tup("S1", "Rb2O", 5), tup("S1", "B2O3", 75),
                           tup("S2", "Na2O", 20), tup("S2", "Rb2O", 20), tup("S2", "B2O3", 60)});
}

TEST(PiExtraction, CompoundOnlySolvesForVariable) {
  const auto lt = compound_only_table("Refractive index of xPbO-(100-x)TeO2 glasses");
  const auto out = extract_mcc_pi(labeling_from_annotation(*lt.annotation), lt.table, lex());
  ASSERT_EQ(out.size(), 8u);
  for (int k = 0; k < 4; ++k) {
    const double x = 10.0 * (k + 1);
    const std::string id = "Tpb_" + std::to_string(k + 1);
    EXPECT_EQ(out[2 * k].material_id, id);
    EXPECT_NEAR(out[2 * k].percentage, x, 1e-6);
    EXPECT_NEAR(out[2 * k + 1].percentage, 100 - x, 1e-6);
    EXPECT_EQ(out[2 * k + 1].constituent, "TeO2");
  }
}

TEST(PiExtraction, SearchOrderCaptionFooterPaperText) {
  auto lt = compound_only_table("Refractive index");
  const Table t("pb", lt.table.cells(), "Refractive index", "", {"Unrelated 20Na2O-80SiO2.", "We melt xPbO-(1-x)GeO2 glasses."});
  const auto out = extract_mcc_pi(labeling_from_annotation(*lt.annotation), t, lex());
  ASSERT_FALSE(out.empty());
  EXPECT_EQ(out[1].constituent, "GeO2");
}

TEST(PiExtraction, MissingExpressionThrows) {
  const auto lt = compound_only_table("Refractive index of lead tellurite glasses");
  try {
    extract_mcc_pi(labeling_from_annotation(*lt.annotation), lt.table, lex());
    FAIL();
  } catch (const PartialInfoError& e) {
    EXPECT_EQ(e.kind(), PartialInfoError::Kind::NoExpressionFound);
  }
}

TEST(PiExtraction, ExtraVariableThrows) {
  auto lt = variable_table();
  // Only x is linked; the caption expression also needs y.
  auto a = *lt.annotation;
  a.edge_links.erase({1, 2});
  a.edge_links.erase({2, 2});
  a.col_labels[2] = L::Other;
  try {
    extract_mcc_pi(labeling_from_annotation(a), lt.table, lex());
    FAIL();
  } catch (const PartialInfoError& e) {
    EXPECT_EQ(e.kind(), PartialInfoError::Kind::UnboundVariableAfterMatch);
  }
}

TEST(OracleMode, RoutingAndDowngrade) {
  const auto ci = complete_info_table();
  EXPECT_EQ(extract_with_annotation(ci.table, *ci.annotation, lex()).type, TableType::MCC_CI);
  const auto pi = compound_only_table("no expression here");
  const auto r = extract_with_annotation(pi.table, *pi.annotation, lex());
  EXPECT_EQ(r.type, TableType::NC);
  EXPECT_TRUE(r.tuples.empty());
  EXPECT_FALSE(r.diagnostics.empty());
}

namespace {

std::vector<CompositionTuple> sorted(std::vector<CompositionTuple> v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return std::tie(a.material_id, a.constituent, a.percentage) < std::tie(b.material_id, b.constituent, b.percentage);
  });
  return v;
}

}  // namespace

TEST(OracleMode, GeneratedCorpusReproducesGold) {
  GeneratorConfig cfg;
  cfg.tables = 200;
  const auto corpus = generate_synthetic(cfg, 21);
  std::vector<ExtractionRecord> pred, gold;
  for (const auto& lt : corpus.tables) {
    const auto r = extract_with_annotation(lt.table, *lt.annotation, lex());
    pred.push_back(r.to_record(lt.table.id()));
    gold.push_back({lt.table.id(), lt.annotation->table_type, lt.annotation->gold_tuples, std::nullopt, std::nullopt});
    // Every material sums to 100.
    EXPECT_TRUE(validate_tuples(r.tuples, 1e-6).clean()) << lt.table.id();
    // Transposition leaves the tuple multiset unchanged.
    const auto rt = extract_with_annotation(lt.table.transposed(), lt.annotation->transposed(), lex());
    EXPECT_EQ(rt.type, r.type);
    const auto a = sorted(r.tuples), b = sorted(rt.tuples);
    ASSERT_EQ(a.size(), b.size()) << lt.table.id();
    EXPECT_EQ(count_tuple_matches(a, b, 1e-9), static_cast<long>(a.size())) << lt.table.id();
  }
  const auto m = compute_metrics(pred, gold);
  EXPECT_EQ(m.tl.f1, 1.0);
  EXPECT_EQ(m.matl.f1, 1.0);
  EXPECT_EQ(m.tt_accuracy, 1.0);
}

TEST(Models, ZeroWeightsGiveHalfSccProbability) {
  ExtractorModels models(ModelConfig::desk(), 3);
  for (nn::Param* p : models.scc->params().all())
    if (p->group != nn::kBuffer) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
  const auto prepared = prepare_table(complete_info_table().table, lex(), models.config.encoder);
  const auto s = predict_scc(prepared, *models.scc);
  EXPECT_DOUBLE_EQ(s.is_scc, 0.5);
  EXPECT_FALSE(s.id_line.has_value());
  ASSERT_EQ(s.id_probs.size(), 9u);
  for (double p : s.id_probs) EXPECT_DOUBLE_EQ(p, 0.5);
}

TEST(Models, RoutingIsAFunctionOnUntrainedModels) {
  ExtractorModels models(ModelConfig::desk(), 4);
  GeneratorConfig cfg;
  cfg.tables = 30;
  for (const auto& lt : generate_synthetic(cfg, 5).tables) {
    const auto prepared = prepare_table(lt.table, lex(), models.config.encoder);
    const auto a = extract_table(prepared, models, lex());
    const auto b = extract_table(prepared, models, lex());
    EXPECT_EQ(a.type, b.type);
    EXPECT_EQ(a.tuples, b.tuples);
    EXPECT_EQ(a.row_labels.size(), static_cast<std::size_t>(lt.table.rows()));
    EXPECT_TRUE(validate_tuples(a.tuples, 1e-6).clean());
  }
}

TEST(Models, CheckpointRoundTrip) {
  ExtractorModels models(ModelConfig::desk(), 6);
  models.pi.weights = {1, -2, 0.5, 0.25, 3};
  models.pi.bias = -0.125;
  const auto path = test::temp_path("roundtrip.ckpt");
  models.save(path);
  const auto back = ExtractorModels::load(path);
  std::stringstream a, b;
  models.to_checkpoint().write(a);
  back.to_checkpoint().write(b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(back.pi.weights, models.pi.weights);
}

TEST(Models, RowSwapBeyondIndexCapPermutesCellStates) {
  const Table t("p", {{"Glass", "SiO2", "Na2O"}, {"A", "70", "30"}, {"B", "60", "40"}, {"C", "50", "50"},
                      {"D", "75", "25"}, {"E", "65", "35"}});
  auto cells = t.cells();
  std::swap(cells[4], cells[5]);
  const Table s("p", cells);
  for (auto kind : {GnnModel::Kind::kScc, GnnModel::Kind::kMcc}) {
    GnnModel model(kind, ModelConfig::desk(), 9);
    const auto pt = prepare_table(t, lex(), model.config().encoder);
    const auto ps = prepare_table(s, lex(), model.config().encoder);
    nn::Tape tape;
    BatchLayout lt({&pt}, model.variant()), ls({&ps}, model.variant());
    const nn::Matrix ht = model.encode(tape, {&pt}, lt).value();
    const nn::Matrix hs = model.encode(tape, {&ps}, ls).value();
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < ht.cols; ++k) {
        EXPECT_NEAR(ht(lt.cell(0, 4, j), k), hs(ls.cell(0, 5, j), k), 1e-12);
        EXPECT_NEAR(ht(lt.cell(0, 1, j), k), hs(ls.cell(0, 1, j), k), 1e-12);
      }
    for (int k = 0; k < ht.cols; ++k) EXPECT_NEAR(ht(lt.row(0, 4), k), hs(ls.row(0, 5), k), 1e-12);
  }
}

TEST(SccExtraction, PropertyRowsUnderRowWiseExpressionsAreNotFlagged) {
  const Table t("r", {{"Glass", "A", "B"}, {"Composition", "70SiO2-30Na2O", "60SiO2-40Na2O"}, {"Tg", "800", "790"}});
  Diagnostics diag;
  EXPECT_EQ(extract_scc_table(t, LineRef{LineRef::Axis::Row, 0}, lex(), &diag).size(), 4u);
  EXPECT_TRUE(diag.empty());
}
