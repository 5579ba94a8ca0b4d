#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matcomp/composition.hpp"
#include "matcomp/nn.hpp"
#include "matcomp/table.hpp"
#include "matcomp/table_graph.hpp"

namespace matcomp {

/// Architecture hyper-parameters for both GNNs.
struct ModelConfig {
  std::string preset = "desk";
  nn::GatConfig gat1;
  nn::GatConfig gat2;
  /// Width of the text vector (cell encoder output and index embeddings).
  int text_dim = 48;
  int regex_emb = 8;   // GNN1 regex-flag embedding
  int freq_emb1 = 8;   // GNN1 max-frequency embedding
  int freq_emb2 = 16;  // GNN2 max-frequency embedding
  /// Max-frequency values at or above this share the last embedding row.
  int freq_buckets = 16;
  double dropout = 0.2;
  nn::CellEncoderConfig encoder;

  /// Scaled-down widths for CPU training.
  static ModelConfig desk();
  /// Published hyper-parameters (GAT sizes/heads, feature embedding widths, 768-wide text).
  static ModelConfig paper();
  static ModelConfig preset_named(const std::string& name);
};

/// Everything about a table that does not depend on parameters, computed once.
struct PreparedTable {
  Table table;
  FeatureBundle features;
  std::vector<std::vector<int>> cell_tokens;  // row-major
  std::vector<int> caption_tokens;

  int rows() const { return table.rows(); }
  int cols() const { return table.cols(); }
};

PreparedTable prepare_table(const Table& table, const CompoundLexicon& lexicon,
                            const nn::CellEncoderConfig& encoder);

/// Node numbering of a batch of tables merged into one disjoint graph.
class BatchLayout {
 public:
  BatchLayout(const std::vector<const PreparedTable*>& batch, GraphVariant variant);

  int num_tables() const { return static_cast<int>(dims_.size()); }
  int num_nodes() const { return num_nodes_; }
  int cell(int t, int i, int j) const { return cell_offset_[t] + i * dims_[t].second + j; }
  int row(int t, int i) const { return agg_offset_[t] + i; }
  int col(int t, int j) const { return agg_offset_[t] + dims_[t].first + j; }
  int table(int t) const { return agg_offset_[t] + dims_[t].first + dims_[t].second; }
  int caption(int t) const { return table(t) + 1; }
  int rows(int t) const { return dims_[t].first; }
  int cols(int t) const { return dims_[t].second; }
  /// Row nodes then column nodes, table after table.
  std::vector<int> line_nodes() const;
  /// First line index of table t in line_nodes() order.
  int line_offset(int t) const { return line_offset_[t]; }
  const nn::EdgeList& edges() const { return edges_; }

 private:
  std::vector<std::pair<int, int>> dims_;
  std::vector<int> cell_offset_, agg_offset_, line_offset_;
  int num_nodes_ = 0;
  nn::EdgeList edges_;
};

/// One of the two graph networks with its prediction heads.
/// kScc: G1 graph, regex + max-frequency features, table head (SCC) and line head (ID).
/// kMcc: G2 graph with caption node, max-frequency feature, 4-way line head and edge head.
class GnnModel {
 public:
  enum class Kind { kScc, kMcc };

  GnnModel(Kind kind, const ModelConfig& config, std::uint64_t seed);
  GnnModel(const GnnModel&) = delete;
  GnnModel& operator=(const GnnModel&) = delete;

  Kind kind() const { return kind_; }
  GraphVariant variant() const { return kind_ == Kind::kScc ? GraphVariant::G1 : GraphVariant::G2; }
  const ModelConfig& config() const { return config_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  int input_width() const;
  int hidden_width() const { return gat_.out(); }

  /// Initial node features in layout order.
  nn::Var node_features(nn::Tape& tape, const std::vector<const PreparedTable*>& batch,
                        const BatchLayout& layout) const;
  /// Node states after message passing.
  nn::Var encode(nn::Tape& tape, const std::vector<const PreparedTable*>& batch,
                 const BatchLayout& layout) const;

  /// kScc: one SCC logit per table (B x 1).
  nn::Var table_logits(nn::Tape& tape, nn::Var h, const BatchLayout& layout, bool training, nn::Rng* rng) const;
  /// kScc: ID logits per line (L x 1); kMcc: 4-way logits per line (L x 4). Line order follows
  /// BatchLayout::line_nodes().
  nn::Var line_logits(nn::Tape& tape, nn::Var h, const BatchLayout& layout, bool training, nn::Rng* rng) const;
  /// kMcc: one logit per (source node, target node) pair, from h_src || h_dst.
  nn::Var edge_logits(nn::Tape& tape, nn::Var h, const std::vector<std::pair<int, int>>& pairs,
                      bool training, nn::Rng* rng) const;

 private:
  Kind kind_;
  ModelConfig config_;
  nn::ParamStore store_;
  nn::Param* tokens_ = nullptr;
  nn::Param* index_emb_ = nullptr;
  nn::Param* regex_emb_ = nullptr;
  nn::Param* freq_emb_ = nullptr;
  nn::Param* init_vec_ = nullptr;
  nn::Gat gat_;
  nn::Mlp head_a_;  // table head (kScc) or 4-way line head (kMcc)
  nn::Mlp head_b_;  // ID line head (kScc) or edge head (kMcc)
};

}  // namespace matcomp
