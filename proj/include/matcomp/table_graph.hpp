#pragma once

#include <string>
#include <vector>

#include "matcomp/composition.hpp"
#include "matcomp/table.hpp"

namespace matcomp {

enum class GraphVariant { G1, G2 };

enum class NodeKind { Cell, Row, Col, Table, Caption };

enum class EdgeKind {
  SameRow,     // cell -> cell in the same row
  SameCol,     // cell -> cell in the same column
  CellToRow,
  CellToCol,
  CellToTable,
  CaptionToLine,  // G2: caption -> every row and column node
  LineToCell,     // G2: row/column node -> its cells
  SelfLoop,
};

struct GraphNode {
  NodeKind kind = NodeKind::Cell;
  int row = -1;
  int col = -1;
};

struct GraphEdge {
  int src = 0;
  int dst = 0;
  EdgeKind kind = EdgeKind::SelfLoop;
};

/// Directed graph over the cells, rows, columns and table (plus caption for G2).
/// Node order: cells row-major, rows, columns, table, caption.
class TableGraph {
 public:
  TableGraph(GraphVariant variant, int rows, int cols, bool self_loops);

  GraphVariant variant() const { return variant_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }

  int cell_node(int i, int j) const { return i * cols_ + j; }
  int row_node(int i) const { return rows_ * cols_ + i; }
  int col_node(int j) const { return rows_ * cols_ + rows_ + j; }
  int table_node() const { return rows_ * cols_ + rows_ + cols_; }
  /// -1 for G1.
  int caption_node() const { return variant_ == GraphVariant::G2 ? table_node() + 1 : -1; }

  std::size_t count(EdgeKind kind) const;
  /// One edge per line, "kind(i,j) -> kind(i,j)", after a comment header.
  std::string dump() const;

 private:
  void add(int src, int dst, EdgeKind kind) { edges_.push_back({src, dst, kind}); }

  GraphVariant variant_;
  int rows_;
  int cols_;
  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
};

TableGraph build_graph(const Table& table, GraphVariant variant, bool self_loops = true);

/// Index embedding slot: rows and columns beyond 3 share slot 3.
inline int index_embedding_id(int i) { return i < 3 ? i : 3; }

struct MaxFrequency {
  std::vector<int> rows;
  std::vector<int> cols;
};

/// Highest multiplicity of any non-empty trimmed cell text per row and column; 0 for empty lines.
MaxFrequency max_frequency(const Table& table);

/// Per cell: does the text hold a variable-free composition expression.
std::vector<std::vector<bool>> regex_feature(const Table& table, const CompoundLexicon& lexicon);

struct FeatureBundle {
  std::vector<std::vector<bool>> regex;
  MaxFrequency max_freq;
};

FeatureBundle compute_features(const Table& table, const CompoundLexicon& lexicon);

std::string to_string(NodeKind kind);
std::string to_string(EdgeKind kind);

}  // namespace matcomp
