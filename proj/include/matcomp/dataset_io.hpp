#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "matcomp/table.hpp"

namespace matcomp {

/// Raised for a malformed dataset record; carries the 1-based line number.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// One line of an extraction results file.
struct ExtractionRecord {
  std::string table_id;
  TableType table_type = TableType::NC;
  std::vector<CompositionTuple> tuples;
  /// Present when the predictor assigned line labels (needed for CV).
  std::optional<std::vector<RowColLabel>> row_labels;
  std::optional<std::vector<RowColLabel>> col_labels;

  friend bool operator==(const ExtractionRecord&, const ExtractionRecord&) = default;
};

nlohmann::json to_json(const Table& table);
nlohmann::json to_json(const TableAnnotation& annotation);
nlohmann::json to_json(const CompositionTuple& tuple);
nlohmann::json to_json(const LabeledTable& record);
nlohmann::json to_json(const ExtractionRecord& record);

/// These throw std::invalid_argument naming the offending field.
Table table_from_json(const nlohmann::json& j);
TableAnnotation annotation_from_json(const nlohmann::json& j);
CompositionTuple tuple_from_json(const nlohmann::json& j);
LabeledTable labeled_table_from_json(const nlohmann::json& j);
ExtractionRecord extraction_from_json(const nlohmann::json& j);

/// Reads a line-delimited dataset. Blank lines are skipped. An invalid record throws
/// DatasetError with the line number, unless `rejected` is given, in which case the record
/// is skipped and its diagnostic appended there.
std::vector<LabeledTable> read_dataset(std::istream& in,
                                       std::vector<DatasetError>* rejected = nullptr);
std::vector<LabeledTable> load_dataset(const std::filesystem::path& path,
                                       std::vector<DatasetError>* rejected = nullptr);
void write_dataset(std::ostream& out, const std::vector<LabeledTable>& records);
void save_dataset(const std::filesystem::path& path, const std::vector<LabeledTable>& records);

std::vector<ExtractionRecord> read_extractions(std::istream& in);
std::vector<ExtractionRecord> load_extractions(const std::filesystem::path& path);
void write_extractions(std::ostream& out, const std::vector<ExtractionRecord>& records);
void save_extractions(const std::filesystem::path& path,
                      const std::vector<ExtractionRecord>& records);

/// Gold side of an evaluation: accepts either results-format records or annotated dataset
/// records (converted through their annotation).
std::vector<ExtractionRecord> load_gold(const std::filesystem::path& path);

}  // namespace matcomp
