#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace matcomp {

/// Row/column label codes. The integer values are part of the file format.
enum class RowColLabel : int { Other = 0, Composition = 1, Constituent = 2, Id = 3 };

enum class TableType { NC, SCC, MCC_CI, MCC_PI };

enum class Unit { MolePercent, WeightPercent };

std::string to_string(TableType type);
std::string to_string(Unit unit);
TableType table_type_from_string(std::string_view s);
Unit unit_from_string(std::string_view s);

struct Coord {
  int row = 0;
  int col = 0;

  Coord transposed() const { return {col, row}; }
  friend bool operator==(const Coord&, const Coord&) = default;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

/// A rectangular grid of cell texts plus the surrounding text of its paper.
class Table {
 public:
  Table() = default;
  /// Throws std::invalid_argument on an empty or ragged grid.
  Table(std::string id, std::vector<std::vector<std::string>> cells, std::string caption = {},
        std::string footer = {}, std::vector<std::string> paper_text = {});

  const std::string& id() const { return id_; }
  int rows() const { return static_cast<int>(cells_.size()); }
  int cols() const { return cells_.empty() ? 0 : static_cast<int>(cells_.front().size()); }
  const std::string& cell(int i, int j) const { return cells_.at(i).at(j); }
  const std::string& cell(Coord c) const { return cell(c.row, c.col); }
  const std::vector<std::vector<std::string>>& cells() const { return cells_; }
  const std::string& caption() const { return caption_; }
  const std::string& footer() const { return footer_; }
  const std::vector<std::string>& paper_text() const { return paper_text_; }

  /// Optional source-paper key used to join against a composition KB.
  /// Falls back to the table id when unset.
  const std::string& paper_id() const { return paper_id_.empty() ? id_ : paper_id_; }
  void set_paper_id(std::string paper_id) { paper_id_ = std::move(paper_id); }

  Table transposed() const;

  friend bool operator==(const Table&, const Table&) = default;

 private:
  std::string id_;
  std::vector<std::vector<std::string>> cells_;
  std::string caption_;
  std::string footer_;
  std::vector<std::string> paper_text_;
  std::string paper_id_;
};

struct CompositionTuple {
  std::string material_id;
  std::string constituent;
  double percentage = 0.0;
  Unit unit = Unit::MolePercent;

  friend bool operator==(const CompositionTuple&, const CompositionTuple&) = default;
};

struct TableAnnotation {
  TableType table_type = TableType::NC;
  std::vector<RowColLabel> row_labels;
  std::vector<RowColLabel> col_labels;
  /// Percentage cell -> constituent/variable cell.
  std::map<Coord, Coord> edge_links;
  std::vector<CompositionTuple> gold_tuples;

  TableAnnotation transposed() const;
  /// Throws std::invalid_argument when label lengths or edge endpoints do not fit the table.
  void validate_against(const Table& table) const;

  friend bool operator==(const TableAnnotation&, const TableAnnotation&) = default;
};

struct LabeledTable {
  Table table;
  std::optional<TableAnnotation> annotation;

  friend bool operator==(const LabeledTable&, const LabeledTable&) = default;
};

/// Trims ASCII whitespace at both ends.
std::string trim(std::string_view s);

/// Parses the leading decimal number of a cell ("57", "38.0 ± 0.2", "0.8").
/// Dashes and empty cells yield nullopt.
std::optional<double> parse_cell_number(std::string_view text);

/// True when the whole trimmed cell is a single decimal number.
bool is_numeric_cell(std::string_view text);

struct MaterialIssue {
  std::string material_id;
  double sum = 0.0;
  double deviation = 0.0;  // sum - 100
  std::vector<std::string> duplicate_constituents;
  std::vector<std::string> non_positive_constituents;
  bool mixed_units = false;
};

struct ValidationReport {
  std::vector<MaterialIssue> materials;  // only materials with a problem
  bool clean() const { return materials.empty(); }
};

/// Checks the per-material output contract: distinct constituents, positive percentages,
/// sums of 100 within `tolerance`.
ValidationReport validate_tuples(const std::vector<CompositionTuple>& tuples,
                                 double tolerance = 1e-6);

}  // namespace matcomp
