#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "matcomp/composition.hpp"
#include "matcomp/dataset_io.hpp"
#include "matcomp/model.hpp"
#include "matcomp/table.hpp"

namespace matcomp {

using Diagnostics = std::vector<std::string>;

/// A whole row or column of a table.
struct LineRef {
  enum class Axis { Row, Col } axis = Axis::Row;
  int index = 0;

  friend bool operator==(const LineRef&, const LineRef&) = default;
};

struct SccPrediction {
  double is_scc = 0.0;
  /// Probability of carrying material IDs, rows first then columns.
  std::vector<double> id_probs;
  std::optional<LineRef> id_line;
};

SccPrediction predict_scc(const PreparedTable& table, const GnnModel& scc_model);

/// Parses every cell holding a composition expression (row-major) into tuples. IDs come from
/// the ID line at the matching index, else "T<table id>_<k>" in match order.
std::vector<CompositionTuple> extract_scc_table(const Table& table, const std::optional<LineRef>& id_line,
                                                const CompoundLexicon& lexicon, Diagnostics* diag = nullptr);

struct LabelingResult {
  std::vector<RowColLabel> row_labels;
  std::vector<RowColLabel> col_labels;
  nn::Matrix row_probs;  // R x 4, empty in oracle mode
  nn::Matrix col_probs;  // C x 4
  /// Percentage cell -> linked constituent/variable cell.
  std::map<Coord, Coord> edge_links;
  bool row_wise = true;

  /// No line labeled composition or constituent.
  bool is_nc() const;
  /// Composition x constituent cells in row-major order.
  std::vector<Coord> intersections() const;
  std::vector<int> lines_with(RowColLabel label, bool rows) const;
};

/// Gold labels standing in for the network outputs.
LabelingResult labeling_from_annotation(const TableAnnotation& annotation);

LabelingResult label_table(const PreparedTable& table, const GnnModel& mcc_model);

/// What a linked cell names: a compound, a one-letter variable, or neither.
struct LinkedTerm {
  enum class Kind { Compound, Variable, Other } kind = Kind::Other;
  std::string name;
};
LinkedTerm classify_linked_cell(std::string_view text, const CompoundLexicon& lexicon);

struct PiFeatures {
  double unique_variables = 0;  // F1
  double unique_compounds = 0;  // F2
  double constituent_lines = 0; // F3
  double max_line_sum = 0;      // F4
  double mean_line_sum = 0;     // F5

  std::array<double, 5> values() const {
    return {unique_variables, unique_compounds, constituent_lines, max_line_sum, mean_line_sum};
  }
};

PiFeatures compute_pi_features(const LabelingResult& labeling, const Table& table,
                               const CompoundLexicon& lexicon);

/// Logistic regression over standardized features. Zero weights give probability 0.5, which
/// resolves to complete information.
struct PiClassifier {
  std::array<double, 5> mean{};
  std::array<double, 5> scale{1, 1, 1, 1, 1};
  std::array<double, 5> weights{};
  double bias = 0.0;

  double probability(const PiFeatures& f) const;
  bool is_partial(const PiFeatures& f) const { return probability(f) > 0.5; }
};

std::vector<CompositionTuple> extract_mcc_ci(const LabelingResult& labeling, const Table& table,
                                             const CompoundLexicon& lexicon, Diagnostics* diag = nullptr);

class PartialInfoError : public std::runtime_error {
 public:
  enum class Kind { NoExpressionFound, UnboundVariableAfterMatch };
  PartialInfoError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Throws PartialInfoError when no usable expression is found in caption, footer or paper text.
std::vector<CompositionTuple> extract_mcc_pi(const LabelingResult& labeling, const Table& table,
                                             const CompoundLexicon& lexicon, Diagnostics* diag = nullptr);

/// Trained parameters of the whole extractor.
struct ExtractorModels {
  ModelConfig config;
  std::unique_ptr<GnnModel> scc;
  std::unique_ptr<GnnModel> mcc;
  PiClassifier pi;

  explicit ExtractorModels(const ModelConfig& config, std::uint64_t seed = 0);
  nn::Checkpoint to_checkpoint() const;
  static ExtractorModels from_checkpoint(const nn::Checkpoint& ck);
  void save(const std::filesystem::path& path) const { to_checkpoint().save(path); }
  static ExtractorModels load(const std::filesystem::path& path);
};

struct ExtractionResult {
  TableType type = TableType::NC;
  std::vector<CompositionTuple> tuples;
  std::vector<RowColLabel> row_labels;
  std::vector<RowColLabel> col_labels;
  SccPrediction scc;
  std::optional<LabelingResult> labeling;
  Diagnostics diagnostics;

  ExtractionRecord to_record(const std::string& table_id) const;
};

ExtractionResult extract_table(const PreparedTable& table, const ExtractorModels& models,
                               const CompoundLexicon& lexicon);

/// Oracle mode: gold type and labels replace every network decision.
ExtractionResult extract_with_annotation(const Table& table, const TableAnnotation& annotation,
                                         const CompoundLexicon& lexicon);

}  // namespace matcomp
