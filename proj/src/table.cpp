#include "matcomp/table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

namespace matcomp {

std::string to_string(TableType type) {
  switch (type) {
    case TableType::NC: return "NC";
    case TableType::SCC: return "SCC";
    case TableType::MCC_CI: return "MCC_CI";
    case TableType::MCC_PI: return "MCC_PI";
  }
  return "NC";
}

std::string to_string(Unit unit) {
  return unit == Unit::WeightPercent ? "wt%" : "mol%";
}

TableType table_type_from_string(std::string_view s) {
  if (s == "NC") return TableType::NC;
  if (s == "SCC") return TableType::SCC;
  if (s == "MCC_CI" || s == "MCC-CI") return TableType::MCC_CI;
  if (s == "MCC_PI" || s == "MCC-PI") return TableType::MCC_PI;
  throw std::invalid_argument("unknown table type '" + std::string(s) + "'");
}

Unit unit_from_string(std::string_view s) {
  if (s == "mol%") return Unit::MolePercent;
  if (s == "wt%") return Unit::WeightPercent;
  throw std::invalid_argument("unknown unit '" + std::string(s) + "'");
}

Table::Table(std::string id, std::vector<std::vector<std::string>> cells, std::string caption,
             std::string footer, std::vector<std::string> paper_text)
    : id_(std::move(id)),
      cells_(std::move(cells)),
      caption_(std::move(caption)),
      footer_(std::move(footer)),
      paper_text_(std::move(paper_text)) {
  if (cells_.empty() || cells_.front().empty()) {
    throw std::invalid_argument("table '" + id_ + "' has an empty grid");
  }
  const auto width = cells_.front().size();
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (cells_[i].size() != width) {
      throw std::invalid_argument("ragged grid: row " + std::to_string(i) + " has " +
                                  std::to_string(cells_[i].size()) + " cells, row 0 has " +
                                  std::to_string(width));
    }
  }
}

Table Table::transposed() const {
  std::vector<std::vector<std::string>> t(cols(), std::vector<std::string>(rows()));
  for (int i = 0; i < rows(); ++i)
    for (int j = 0; j < cols(); ++j) t[j][i] = cells_[i][j];
  Table out(id_, std::move(t), caption_, footer_, paper_text_);
  out.paper_id_ = paper_id_;
  return out;
}

TableAnnotation TableAnnotation::transposed() const {
  TableAnnotation out;
  out.table_type = table_type;
  out.row_labels = col_labels;
  out.col_labels = row_labels;
  for (const auto& [from, to] : edge_links) out.edge_links.emplace(from.transposed(), to.transposed());
  out.gold_tuples = gold_tuples;
  return out;
}

void TableAnnotation::validate_against(const Table& table) const {
  if (static_cast<int>(row_labels.size()) != table.rows()) {
    throw std::invalid_argument("row_labels has " + std::to_string(row_labels.size()) +
                                " entries for " + std::to_string(table.rows()) + " rows");
  }
  if (static_cast<int>(col_labels.size()) != table.cols()) {
    throw std::invalid_argument("col_labels has " + std::to_string(col_labels.size()) +
                                " entries for " + std::to_string(table.cols()) + " columns");
  }
  auto inside = [&](Coord c) {
    return c.row >= 0 && c.col >= 0 && c.row < table.rows() && c.col < table.cols();
  };
  for (const auto& [from, to] : edge_links) {
    if (!inside(from) || !inside(to)) throw std::invalid_argument("edge_links endpoint outside grid");
    const auto r = row_labels[from.row];
    const auto c = col_labels[from.col];
    const bool row_wise = r == RowColLabel::Composition && c == RowColLabel::Constituent;
    const bool col_wise = r == RowColLabel::Constituent && c == RowColLabel::Composition;
    if (!row_wise && !col_wise) {
      throw std::invalid_argument("edge_links source (" + std::to_string(from.row) + "," +
                                  std::to_string(from.col) +
                                  ") is not a composition x constituent intersection");
    }
  }
}

std::string trim(std::string_view s) {
  auto is_space = [](char ch) {
    return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
  };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

namespace {

// Length of a decimal literal ("12", "12.5", ".5") at the start of s, 0 if none.
std::size_t decimal_prefix(std::string_view s) {
  std::size_t k = 0;
  while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
  std::size_t int_digits = k;
  if (k < s.size() && s[k] == '.') {
    std::size_t f = k + 1;
    while (f < s.size() && std::isdigit(static_cast<unsigned char>(s[f]))) ++f;
    if (f > k + 1) return f;
  }
  return int_digits;
}

}  // namespace

std::optional<double> parse_cell_number(std::string_view text) {
  const std::string t = trim(text);
  std::string_view v = t;
  bool negative = false;
  if (!v.empty() && (v[0] == '+' || v[0] == '-')) {
    negative = v[0] == '-';
    v.remove_prefix(1);
  }
  const std::size_t len = decimal_prefix(v);
  if (len == 0) return std::nullopt;
  double value = 0.0;
  auto res = std::from_chars(v.data(), v.data() + len, value);
  if (res.ec != std::errc()) return std::nullopt;
  return negative ? -value : value;
}

bool is_numeric_cell(std::string_view text) {
  const std::string t = trim(text);
  std::string_view v = t;
  if (!v.empty() && (v[0] == '+' || v[0] == '-')) v.remove_prefix(1);
  const std::size_t len = decimal_prefix(v);
  return len > 0 && len == v.size();
}

ValidationReport validate_tuples(const std::vector<CompositionTuple>& tuples, double tolerance) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const CompositionTuple*>> by_material;
  for (const auto& t : tuples) {
    auto [it, inserted] = by_material.try_emplace(t.material_id);
    if (inserted) order.push_back(t.material_id);
    it->second.push_back(&t);
  }
  ValidationReport report;
  for (const auto& id : order) {
    const auto& group = by_material[id];
    MaterialIssue issue;
    issue.material_id = id;
    std::set<std::string> seen;
    for (const auto* t : group) {
      issue.sum += t->percentage;
      if (!seen.insert(t->constituent).second) issue.duplicate_constituents.push_back(t->constituent);
      if (!(t->percentage > 0.0)) issue.non_positive_constituents.push_back(t->constituent);
      if (t->unit != group.front()->unit) issue.mixed_units = true;
    }
    issue.deviation = issue.sum - 100.0;
    if (std::abs(issue.deviation) > tolerance || !issue.duplicate_constituents.empty() ||
        !issue.non_positive_constituents.empty() || issue.mixed_units) {
      report.materials.push_back(std::move(issue));
    }
  }
  return report;
}

}  // namespace matcomp
