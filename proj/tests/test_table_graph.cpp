#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "matcomp/table_graph.hpp"

using namespace matcomp;

namespace {

Table grid(int R, int C) {
  std::vector<std::vector<std::string>> cells(R, std::vector<std::string>(C));
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j) cells[i][j] = std::to_string(i) + "," + std::to_string(j);
  return Table("g", cells);
}

}  // namespace

TEST(Graph, NodeCounts) {
  EXPECT_EQ(build_graph(grid(2, 2), GraphVariant::G1).num_nodes(), 9);
  EXPECT_EQ(build_graph(grid(2, 2), GraphVariant::G2).num_nodes(), 10);
  EXPECT_EQ(build_graph(grid(2, 2), GraphVariant::G1).caption_node(), -1);
}

TEST(Graph, SameRowEdgesOfOneByThree) {
  EXPECT_EQ(build_graph(grid(1, 3), GraphVariant::G1).count(EdgeKind::SameRow), 6u);
}

TEST(Graph, ClosedFormEdgeCounts) {
  for (int R = 1; R <= 5; ++R)
    for (int C = 1; C <= 5; ++C) {
      const auto g = build_graph(grid(R, C), GraphVariant::G1, false);
      const std::size_t same = static_cast<std::size_t>(R * C * (C - 1) + C * R * (R - 1));
      EXPECT_EQ(g.count(EdgeKind::SameRow) + g.count(EdgeKind::SameCol), same);
      EXPECT_EQ(g.count(EdgeKind::CellToRow) + g.count(EdgeKind::CellToCol) + g.count(EdgeKind::CellToTable),
                static_cast<std::size_t>(3 * R * C));
      EXPECT_EQ(g.edges().size(), same + 3u * R * C);
      const auto g2 = build_graph(grid(R, C), GraphVariant::G2, true);
      EXPECT_EQ(g2.count(EdgeKind::CaptionToLine), static_cast<std::size_t>(R + C));
      EXPECT_EQ(g2.count(EdgeKind::LineToCell), static_cast<std::size_t>(2 * R * C));
      EXPECT_EQ(g2.count(EdgeKind::SelfLoop), static_cast<std::size_t>(g2.num_nodes()));
    }
}

TEST(Graph, EveryCellReachesItsAggregates) {
  const auto g = build_graph(grid(3, 4), GraphVariant::G1);
  std::set<std::pair<int, int>> edges;
  for (const auto& e : g.edges()) edges.insert({e.src, e.dst});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      const int c = g.cell_node(i, j);
      EXPECT_TRUE(edges.count({c, g.row_node(i)}));
      EXPECT_TRUE(edges.count({c, g.col_node(j)}));
      EXPECT_TRUE(edges.count({c, g.table_node()}));
      // G1 has no reverse aggregation edges.
      EXPECT_FALSE(edges.count({g.row_node(i), c}));
      for (int k = 0; k < 4; ++k)
        if (k != j) EXPECT_TRUE(edges.count({c, g.cell_node(i, k)}) && edges.count({g.cell_node(i, k), c}));
    }
}

TEST(Graph, DumpListsEveryEdge) {
  const auto g = build_graph(grid(1, 2), GraphVariant::G2);
  const std::string d = g.dump();
  const auto lines = std::count(d.begin(), d.end(), '\n');
  EXPECT_GE(static_cast<std::size_t>(lines), g.edges().size());
  EXPECT_NE(d.find("->"), std::string::npos);
}

TEST(IndexEmbedding, CapAtThree) {
  EXPECT_EQ(index_embedding_id(0), 0);
  EXPECT_EQ(index_embedding_id(3), 3);
  EXPECT_EQ(index_embedding_id(7), 3);
}

TEST(MaxFrequency, Examples) {
  const Table t("f", {{"A1", "A2", "A3"}, {"mol%", "mol%", "mol%"}, {"", "", ""}});
  const auto q = max_frequency(t);
  EXPECT_EQ(q.rows, (std::vector<int>{1, 3, 0}));
  const Table c("c", {{"x"}, {""}, {" x "}, {"y"}});
  EXPECT_EQ(max_frequency(c).cols, std::vector<int>{2});
}

TEST(MaxFrequency, BoundedByLineLength) {
  const Table t("f", {{"a", "a", "b", "a"}, {"c", "d", "e", "f"}, {"a", "", "", ""}});
  const auto q = max_frequency(t);
  for (int v : q.rows) EXPECT_LE(v, 4);
  for (int v : q.cols) EXPECT_LE(v, 3);
  EXPECT_EQ(q.rows[0], 3);
  EXPECT_EQ(q.cols[0], 2);
}

TEST(RegexFeature, Examples) {
  const auto& lex = CompoundLexicon::builtin();
  const Table t("r", {{"40Bi2O3 * 60B2O3", "5.6 GPa", "(AgI+AgCl)70-(40Bi2O3+60B2O3)30", "xNa2O-(1-x)SiO2"}});
  const auto f = regex_feature(t, lex);
  EXPECT_TRUE(f[0][0]);
  EXPECT_FALSE(f[0][1]);
  EXPECT_TRUE(f[0][2]);
  EXPECT_FALSE(f[0][3]);  // variables are not allowed here
}

TEST(Features, TransposeSwapsRowAndColumnValues) {
  const auto& lex = CompoundLexicon::builtin();
  const Table t("t", {{"Glass", "SiO2", "Na2O"}, {"A", "70", "30"}, {"B", "70", "70SiO2-30Na2O"}});
  const auto a = compute_features(t, lex);
  const auto b = compute_features(t.transposed(), lex);
  EXPECT_EQ(a.max_freq.rows, b.max_freq.cols);
  EXPECT_EQ(a.max_freq.cols, b.max_freq.rows);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(a.regex[i][j], b.regex[j][i]);
}

TEST(Graph, TransposeMapsNodesAndEdges) {
  const Table t = grid(2, 3);
  const auto g = build_graph(t, GraphVariant::G2);
  const auto gt = build_graph(t.transposed(), GraphVariant::G2);
  auto map_node = [&](int n) {
    const auto& node = g.nodes()[n];
    switch (node.kind) {
      case NodeKind::Cell: return gt.cell_node(node.col, node.row);
      case NodeKind::Row: return gt.col_node(node.row);
      case NodeKind::Col: return gt.row_node(node.col);
      case NodeKind::Table: return gt.table_node();
      case NodeKind::Caption: return gt.caption_node();
    }
    return -1;
  };
  std::multiset<std::pair<int, int>> mapped, actual;
  for (const auto& e : g.edges()) mapped.insert({map_node(e.src), map_node(e.dst)});
  for (const auto& e : gt.edges()) actual.insert({e.src, e.dst});
  EXPECT_EQ(mapped, actual);
}
