#include "matcomp/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

using nlohmann::json;

namespace matcomp {

namespace {

const json& require(const json& j, const char* field) {
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
  auto it = j.find(field);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + field + "'");
  return *it;
}

std::string require_string(const json& j, const char* field) {
  const auto& v = require(j, field);
  if (!v.is_string()) throw std::invalid_argument(std::string("field '") + field + "' must be a string");
  return v.get<std::string>();
}

std::string optional_string(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw std::invalid_argument(std::string("field '") + field + "' must be a string");
  return it->get<std::string>();
}

std::vector<RowColLabel> labels_from_json(const json& j, const char* field) {
  const auto& v = require(j, field);
  if (!v.is_array()) throw std::invalid_argument(std::string("field '") + field + "' must be an array");
  std::vector<RowColLabel> out;
  for (const auto& x : v) {
    if (!x.is_number_integer() || x.get<int>() < 0 || x.get<int>() > 3) {
      throw std::invalid_argument(std::string("field '") + field + "' holds a label outside 0..3");
    }
    out.push_back(static_cast<RowColLabel>(x.get<int>()));
  }
  return out;
}

json labels_to_json(const std::vector<RowColLabel>& labels) {
  json a = json::array();
  for (auto l : labels) a.push_back(static_cast<int>(l));
  return a;
}

Coord coord_from_json(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw std::invalid_argument(std::string("field '") + field + "' must be a [row, col] pair");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

std::vector<CompositionTuple> tuples_from_json(const json& j, const char* field) {
  const auto& v = require(j, field);
  if (!v.is_array()) throw std::invalid_argument(std::string("field '") + field + "' must be an array");
  std::vector<CompositionTuple> out;
  for (const auto& t : v) out.push_back(tuple_from_json(t));
  return out;
}

json tuples_to_json(const std::vector<CompositionTuple>& tuples) {
  json a = json::array();
  for (const auto& t : tuples) a.push_back(to_json(t));
  return a;
}

template <typename Parse>
auto read_lines(std::istream& in, Parse parse, std::vector<DatasetError>* rejected) {
  std::vector<decltype(parse(json{}))> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      DatasetError err(number, std::string("malformed JSON: ") + e.what());
      if (!rejected) throw err;
      rejected->push_back(err);
    } catch (const std::invalid_argument& e) {
      DatasetError err(number, e.what());
      if (!rejected) throw err;
      rejected->push_back(err);
    }
  }
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

json to_json(const Table& table) {
  json j;
  j["id"] = table.id();
  j["cells"] = table.cells();
  j["caption"] = table.caption();
  j["footer"] = table.footer();
  j["paper_text"] = table.paper_text();
  if (table.paper_id() != table.id()) j["paper_id"] = table.paper_id();
  return j;
}

json to_json(const CompositionTuple& tuple) {
  return json{{"material_id", tuple.material_id},
              {"constituent", tuple.constituent},
              {"percentage", tuple.percentage},
              {"unit", to_string(tuple.unit)}};
}

json to_json(const TableAnnotation& annotation) {
  json j;
  j["table_type"] = to_string(annotation.table_type);
  j["row_labels"] = labels_to_json(annotation.row_labels);
  j["col_labels"] = labels_to_json(annotation.col_labels);
  json links = json::array();
  for (const auto& [from, to] : annotation.edge_links) {
    links.push_back(json{{"cell", {from.row, from.col}}, {"target", {to.row, to.col}}});
  }
  j["edge_links"] = links;
  j["gold_tuples"] = tuples_to_json(annotation.gold_tuples);
  return j;
}

json to_json(const LabeledTable& record) {
  json j = to_json(record.table);
  if (record.annotation) j["annotation"] = to_json(*record.annotation);
  return j;
}

json to_json(const ExtractionRecord& record) {
  json j;
  j["table_id"] = record.table_id;
  j["table_type"] = to_string(record.table_type);
  j["tuples"] = tuples_to_json(record.tuples);
  if (record.row_labels) j["row_labels"] = labels_to_json(*record.row_labels);
  if (record.col_labels) j["col_labels"] = labels_to_json(*record.col_labels);
  return j;
}

Table table_from_json(const json& j) {
  std::string id = require_string(j, "id");
  const auto& cells_json = require(j, "cells");
  if (!cells_json.is_array()) throw std::invalid_argument("field 'cells' must be an array of rows");
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : cells_json) {
    if (!row.is_array()) throw std::invalid_argument("field 'cells' must be an array of rows");
    std::vector<std::string> r;
    for (const auto& c : row) {
      if (!c.is_string()) throw std::invalid_argument("field 'cells' holds a non-string cell");
      r.push_back(c.get<std::string>());
    }
    cells.push_back(std::move(r));
  }
  std::vector<std::string> paper_text;
  if (auto it = j.find("paper_text"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw std::invalid_argument("field 'paper_text' must be an array");
    for (const auto& s : *it) {
      if (!s.is_string()) throw std::invalid_argument("field 'paper_text' holds a non-string");
      paper_text.push_back(s.get<std::string>());
    }
  }
  Table table(std::move(id), std::move(cells), optional_string(j, "caption"),
              optional_string(j, "footer"), std::move(paper_text));
  if (auto pid = optional_string(j, "paper_id"); !pid.empty()) table.set_paper_id(pid);
  return table;
}

CompositionTuple tuple_from_json(const json& j) {
  CompositionTuple t;
  t.material_id = require_string(j, "material_id");
  t.constituent = require_string(j, "constituent");
  const auto& p = require(j, "percentage");
  if (!p.is_number()) throw std::invalid_argument("field 'percentage' must be a number");
  t.percentage = p.get<double>();
  t.unit = unit_from_string(require_string(j, "unit"));
  return t;
}

TableAnnotation annotation_from_json(const json& j) {
  TableAnnotation a;
  a.table_type = table_type_from_string(require_string(j, "table_type"));
  a.row_labels = labels_from_json(j, "row_labels");
  a.col_labels = labels_from_json(j, "col_labels");
  if (auto it = j.find("edge_links"); it != j.end()) {
    if (!it->is_array()) throw std::invalid_argument("field 'edge_links' must be an array");
    for (const auto& e : *it) {
      a.edge_links[coord_from_json(require(e, "cell"), "edge_links.cell")] =
          coord_from_json(require(e, "target"), "edge_links.target");
    }
  }
  if (j.contains("gold_tuples")) a.gold_tuples = tuples_from_json(j, "gold_tuples");
  return a;
}

LabeledTable labeled_table_from_json(const json& j) {
  LabeledTable record{table_from_json(j), std::nullopt};
  if (auto it = j.find("annotation"); it != j.end() && !it->is_null()) {
    try {
      record.annotation = annotation_from_json(*it);
      record.annotation->validate_against(record.table);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("annotation: ") + e.what());
    }
  }
  return record;
}

ExtractionRecord extraction_from_json(const json& j) {
  ExtractionRecord r;
  r.table_id = require_string(j, "table_id");
  r.table_type = table_type_from_string(require_string(j, "table_type"));
  r.tuples = tuples_from_json(j, "tuples");
  if (j.contains("row_labels")) r.row_labels = labels_from_json(j, "row_labels");
  if (j.contains("col_labels")) r.col_labels = labels_from_json(j, "col_labels");
  return r;
}

std::vector<LabeledTable> read_dataset(std::istream& in, std::vector<DatasetError>* rejected) {
  return read_lines(in, [](const json& j) { return labeled_table_from_json(j); }, rejected);
}

std::vector<LabeledTable> load_dataset(const std::filesystem::path& path,
                                       std::vector<DatasetError>* rejected) {
  auto in = open_in(path);
  return read_dataset(in, rejected);
}

void write_dataset(std::ostream& out, const std::vector<LabeledTable>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

void save_dataset(const std::filesystem::path& path, const std::vector<LabeledTable>& records) {
  auto out = open_out(path);
  write_dataset(out, records);
}

std::vector<ExtractionRecord> read_extractions(std::istream& in) {
  return read_lines(in, [](const json& j) { return extraction_from_json(j); }, nullptr);
}

std::vector<ExtractionRecord> load_extractions(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_extractions(in);
}

void write_extractions(std::ostream& out, const std::vector<ExtractionRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

void save_extractions(const std::filesystem::path& path,
                      const std::vector<ExtractionRecord>& records) {
  auto out = open_out(path);
  write_extractions(out, records);
}

std::vector<ExtractionRecord> load_gold(const std::filesystem::path& path) {
  auto in = open_in(path);
  auto parse = [](const json& j) {
    if (j.contains("table_id")) return extraction_from_json(j);
    auto record = labeled_table_from_json(j);
    if (!record.annotation) throw std::invalid_argument("gold record has no annotation");
    ExtractionRecord r;
    r.table_id = record.table.id();
    r.table_type = record.annotation->table_type;
    r.tuples = record.annotation->gold_tuples;
    r.row_labels = record.annotation->row_labels;
    r.col_labels = record.annotation->col_labels;
    return r;
  };
  return read_lines(in, parse, nullptr);
}

}  // namespace matcomp
