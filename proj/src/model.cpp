#include "matcomp/model.hpp"

#include <stdexcept>

namespace matcomp {

using nn::Matrix;
using nn::Tape;
using nn::Var;

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.preset = "desk";
  c.gat1 = {{64, 64, 32}, {2, 2, 2}, 0.2, true};
  c.gat2 = {{64, 64, 32}, {2, 2, 2}, 0.2, true};
  c.text_dim = 48;
  c.regex_emb = 8;
  c.freq_emb1 = 8;
  c.freq_emb2 = 16;
  return c;
}

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.preset = "paper";
  c.gat1 = {{256, 128, 64}, {4, 4, 4}, 0.2, true};
  c.gat2 = {{128, 128, 64}, {6, 4, 4}, 0.2, true};
  c.text_dim = 768;
  c.regex_emb = 256;
  c.freq_emb1 = 256;
  c.freq_emb2 = 128;
  return c;
}

ModelConfig ModelConfig::preset_named(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw std::invalid_argument("unknown preset '" + name + "' (expected paper or desk)");
}

PreparedTable prepare_table(const Table& table, const CompoundLexicon& lexicon,
                            const nn::CellEncoderConfig& encoder) {
  PreparedTable p{table, compute_features(table, lexicon), {}, {}};
  for (int i = 0; i < table.rows(); ++i)
    for (int j = 0; j < table.cols(); ++j) p.cell_tokens.push_back(nn::encode_tokens(table.cell(i, j), encoder));
  p.caption_tokens = nn::encode_tokens(table.caption(), encoder);
  return p;
}

BatchLayout::BatchLayout(const std::vector<const PreparedTable*>& batch, GraphVariant variant) {
  const int per_table_extra = variant == GraphVariant::G2 ? 2 : 1;
  int cells = 0;
  for (const auto* t : batch) {
    dims_.emplace_back(t->rows(), t->cols());
    cell_offset_.push_back(cells);
    cells += t->rows() * t->cols();
  }
  int aggs = cells;
  int lines = 0;
  for (const auto& [r, c] : dims_) {
    agg_offset_.push_back(aggs);
    aggs += r + c + per_table_extra;
    line_offset_.push_back(lines);
    lines += r + c;
  }
  num_nodes_ = aggs;
  edges_.num_nodes = num_nodes_;
  for (int t = 0; t < num_tables(); ++t) {
    TableGraph g(variant, rows(t), cols(t), true);
    auto map = [&](int n) {
      const auto& node = g.nodes()[n];
      switch (node.kind) {
        case NodeKind::Cell: return cell(t, node.row, node.col);
        case NodeKind::Row: return row(t, node.row);
        case NodeKind::Col: return col(t, node.col);
        case NodeKind::Table: return table(t);
        case NodeKind::Caption: return caption(t);
      }
      return 0;
    };
    for (const auto& e : g.edges()) {
      edges_.src.push_back(map(e.src));
      edges_.dst.push_back(map(e.dst));
    }
  }
}

std::vector<int> BatchLayout::line_nodes() const {
  std::vector<int> out;
  for (int t = 0; t < num_tables(); ++t) {
    for (int i = 0; i < rows(t); ++i) out.push_back(row(t, i));
    for (int j = 0; j < cols(t); ++j) out.push_back(col(t, j));
  }
  return out;
}

GnnModel::GnnModel(Kind kind, const ModelConfig& config, std::uint64_t seed)
    : kind_(kind), config_(config) {
  nn::Rng rng(seed);
  const int d = config.text_dim;
  const int rows = config.encoder.buckets + 1;
  tokens_ = &store_.add("tokens", nn::uniform_init(rows, d, d, rng), nn::kEncoder);
  index_emb_ = &store_.add("index_emb", nn::uniform_init(4, d, d, rng));
  if (kind == Kind::kScc) {
    regex_emb_ = &store_.add("regex_emb", nn::uniform_init(2, config.regex_emb, config.regex_emb, rng));
    freq_emb_ = &store_.add("freq_emb", nn::uniform_init(config.freq_buckets, config.freq_emb1, config.freq_emb1, rng));
  } else {
    freq_emb_ = &store_.add("freq_emb", nn::uniform_init(config.freq_buckets, config.freq_emb2, config.freq_emb2, rng));
  }
  const int in = input_width();
  init_vec_ = &store_.add("init_vec", nn::uniform_init(1, in, in, rng));
  gat_ = nn::Gat(store_, "gat", in, kind == Kind::kScc ? config.gat1 : config.gat2, rng);
  const int h = gat_.out();
  if (kind == Kind::kScc) {
    head_a_ = nn::Mlp(store_, "scc_head", h, h, 1, config.dropout, rng);
    head_b_ = nn::Mlp(store_, "id_head", h, h, 1, config.dropout, rng);
  } else {
    head_a_ = nn::Mlp(store_, "line_head", h, h, 4, config.dropout, rng);
    head_b_ = nn::Mlp(store_, "edge_head", 2 * h, h, 1, config.dropout, rng);
  }
}

int GnnModel::input_width() const {
  const int f = kind_ == Kind::kScc ? config_.regex_emb + config_.freq_emb1 : config_.freq_emb2;
  return f + config_.text_dim;
}

Var GnnModel::node_features(Tape& tape, const std::vector<const PreparedTable*>& batch,
                            const BatchLayout& layout) const {
  std::vector<std::vector<int>> bags;
  std::vector<int> slot_i, slot_j, regex, freq_r, freq_c;
  const int top = config_.freq_buckets - 1;
  for (const auto* t : batch) {
    for (int i = 0; i < t->rows(); ++i) {
      for (int j = 0; j < t->cols(); ++j) {
        bags.push_back(t->cell_tokens[static_cast<std::size_t>(i) * t->cols() + j]);
        slot_i.push_back(index_embedding_id(i));
        slot_j.push_back(index_embedding_id(j));
        regex.push_back(t->features.regex[i][j] ? 1 : 0);
        freq_r.push_back(std::min(t->features.max_freq.rows[i], top));
        freq_c.push_back(std::min(t->features.max_freq.cols[j], top));
      }
    }
  }
  Var index = tape.param(*index_emb_);
  Var text = nn::embedding_bag_mean(tape, *tokens_, bags);
  text = add(add(text, gather_rows(index, slot_i)), gather_rows(index, slot_j));
  Var freq_table = tape.param(*freq_emb_);
  Var freq = add(gather_rows(freq_table, freq_r), gather_rows(freq_table, freq_c));
  Var cells = kind_ == Kind::kScc
                  ? nn::concat_cols({gather_rows(tape.param(*regex_emb_), regex), freq, text})
                  : nn::concat_cols({freq, text});

  // Aggregate nodes share the trainable init vector; caption nodes get their encoded text.
  std::vector<Var> base = {tape.param(*init_vec_)};
  if (kind_ == Kind::kMcc) {
    std::vector<std::vector<int>> caption_bags;
    for (const auto* t : batch) caption_bags.push_back(t->caption_tokens);
    Var caption_text = nn::embedding_bag_mean(tape, *tokens_, caption_bags);
    Var pad = tape.constant(Matrix(static_cast<int>(batch.size()), config_.freq_emb2));
    base.push_back(nn::concat_cols({pad, caption_text}));
  }
  std::vector<int> agg_index;
  for (int t = 0; t < layout.num_tables(); ++t) {
    for (int k = 0; k < layout.rows(t) + layout.cols(t) + 1; ++k) agg_index.push_back(0);
    if (kind_ == Kind::kMcc) agg_index.push_back(1 + t);
  }
  Var aggs = gather_rows(base.size() == 1 ? base[0] : nn::concat_rows(base), agg_index);
  return nn::concat_rows({cells, aggs});
}

Var GnnModel::encode(Tape& tape, const std::vector<const PreparedTable*>& batch, const BatchLayout& layout) const {
  return gat_.forward(tape, node_features(tape, batch, layout), layout.edges());
}

Var GnnModel::table_logits(Tape& tape, Var h, const BatchLayout& layout, bool training, nn::Rng* rng) const {
  if (kind_ != Kind::kScc) throw std::logic_error("table_logits needs the SCC model");
  std::vector<int> nodes;
  for (int t = 0; t < layout.num_tables(); ++t) nodes.push_back(layout.table(t));
  return head_a_.forward(tape, gather_rows(h, nodes), training, rng);
}

Var GnnModel::line_logits(Tape& tape, Var h, const BatchLayout& layout, bool training, nn::Rng* rng) const {
  Var lines = gather_rows(h, layout.line_nodes());
  return (kind_ == Kind::kScc ? head_b_ : head_a_).forward(tape, lines, training, rng);
}

Var GnnModel::edge_logits(Tape& tape, Var h, const std::vector<std::pair<int, int>>& pairs, bool training,
                          nn::Rng* rng) const {
  if (kind_ != Kind::kMcc) throw std::logic_error("edge_logits needs the MCC model");
  std::vector<int> src, dst;
  for (const auto& [s, d] : pairs) {
    src.push_back(s);
    dst.push_back(d);
  }
  Var x = nn::concat_cols({gather_rows(h, src), gather_rows(h, dst)});
  return head_b_.forward(tape, x, training, rng);
}

}  // namespace matcomp
