#include "matcomp/table_graph.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

namespace matcomp {

std::string to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Cell: return "cell";
    case NodeKind::Row: return "row";
    case NodeKind::Col: return "col";
    case NodeKind::Table: return "table";
    case NodeKind::Caption: return "caption";
  }
  return "cell";
}

std::string to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::SameRow: return "same-row";
    case EdgeKind::SameCol: return "same-col";
    case EdgeKind::CellToRow: return "cell-row";
    case EdgeKind::CellToCol: return "cell-col";
    case EdgeKind::CellToTable: return "cell-table";
    case EdgeKind::CaptionToLine: return "caption-line";
    case EdgeKind::LineToCell: return "line-cell";
    case EdgeKind::SelfLoop: return "self";
  }
  return "self";
}

TableGraph::TableGraph(GraphVariant variant, int rows, int cols, bool self_loops)
    : variant_(variant), rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("graph needs at least one cell");
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) nodes_.push_back({NodeKind::Cell, i, j});
  for (int i = 0; i < rows; ++i) nodes_.push_back({NodeKind::Row, i, -1});
  for (int j = 0; j < cols; ++j) nodes_.push_back({NodeKind::Col, -1, j});
  nodes_.push_back({NodeKind::Table, -1, -1});
  if (variant == GraphVariant::G2) nodes_.push_back({NodeKind::Caption, -1, -1});

  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const int c = cell_node(i, j);
      for (int k = 0; k < cols; ++k)
        if (k != j) add(c, cell_node(i, k), EdgeKind::SameRow);
      for (int k = 0; k < rows; ++k)
        if (k != i) add(c, cell_node(k, j), EdgeKind::SameCol);
      add(c, row_node(i), EdgeKind::CellToRow);
      add(c, col_node(j), EdgeKind::CellToCol);
      add(c, table_node(), EdgeKind::CellToTable);
    }
  }
  if (variant == GraphVariant::G2) {
    for (int i = 0; i < rows; ++i) add(caption_node(), row_node(i), EdgeKind::CaptionToLine);
    for (int j = 0; j < cols; ++j) add(caption_node(), col_node(j), EdgeKind::CaptionToLine);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        add(row_node(i), cell_node(i, j), EdgeKind::LineToCell);
        add(col_node(j), cell_node(i, j), EdgeKind::LineToCell);
      }
  }
  if (self_loops)
    for (int n = 0; n < num_nodes(); ++n) add(n, n, EdgeKind::SelfLoop);
}

std::size_t TableGraph::count(EdgeKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(edges_.begin(), edges_.end(), [&](const GraphEdge& e) { return e.kind == kind; }));
}

std::string TableGraph::dump() const {
  auto name = [&](int n) {
    const auto& node = nodes_[n];
    return to_string(node.kind) + "(" + std::to_string(node.row) + "," + std::to_string(node.col) + ")";
  };
  std::ostringstream out;
  out << "# " << (variant_ == GraphVariant::G1 ? "G1" : "G2") << " " << rows_ << "x" << cols_ << ", "
      << nodes_.size() << " nodes, " << edges_.size() << " edges; table node receives cell edges only\n";
  for (const auto& e : edges_) out << name(e.src) << " -> " << name(e.dst) << "\n";
  return out.str();
}

TableGraph build_graph(const Table& table, GraphVariant variant, bool self_loops) {
  return TableGraph(variant, table.rows(), table.cols(), self_loops);
}

namespace {

template <typename Cells>
int max_count(const Cells& cells) {
  std::unordered_map<std::string, int> counts;
  int best = 0;
  for (const auto& text : cells) {
    auto t = trim(text);
    if (t.empty()) continue;
    best = std::max(best, ++counts[t]);
  }
  return best;
}

}  // namespace

MaxFrequency max_frequency(const Table& table) {
  MaxFrequency out;
  for (int i = 0; i < table.rows(); ++i) out.rows.push_back(max_count(table.cells()[i]));
  for (int j = 0; j < table.cols(); ++j) {
    std::vector<std::string> column;
    for (int i = 0; i < table.rows(); ++i) column.push_back(table.cell(i, j));
    out.cols.push_back(max_count(column));
  }
  return out;
}

std::vector<std::vector<bool>> regex_feature(const Table& table, const CompoundLexicon& lexicon) {
  std::vector<std::vector<bool>> out(table.rows(), std::vector<bool>(table.cols(), false));
  for (int i = 0; i < table.rows(); ++i)
    for (int j = 0; j < table.cols(); ++j)
      out[i][j] = find_composition(table.cell(i, j), lexicon, false).has_value();
  return out;
}

FeatureBundle compute_features(const Table& table, const CompoundLexicon& lexicon) {
  return {regex_feature(table, lexicon), max_frequency(table)};
}

}  // namespace matcomp
