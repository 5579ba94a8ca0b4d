#include "matcomp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <Eigen/Dense>

namespace matcomp {

using nn::Matrix;
using nn::Tape;
using nn::Var;

namespace {

std::string coord_str(Coord c) {
  return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

std::string synthesized_id(const Table& table, int ordinal) {
  return "T" + table.id() + "_" + std::to_string(ordinal);
}

void note(Diagnostics* diag, const std::string& msg) {
  if (diag) diag->push_back(msg);
}

// Adds to an existing (material, constituent) tuple or appends a new one.
void merge_tuple(std::vector<CompositionTuple>& out, std::size_t material_begin, CompositionTuple t) {
  for (std::size_t k = material_begin; k < out.size(); ++k) {
    if (out[k].constituent == t.constituent) {
      out[k].percentage += t.percentage;
      return;
    }
  }
  out.push_back(std::move(t));
}

void append_normalized(std::vector<CompositionTuple>& out, const std::string& id,
                       const NormalizedComposition& nc) {
  const std::size_t begin = out.size();
  for (const auto& [c, p] : nc.percentages) merge_tuple(out, begin, {id, c, p, nc.unit});
}

}  // namespace

SccPrediction predict_scc(const PreparedTable& table, const GnnModel& model) {
  if (model.kind() != GnnModel::Kind::kScc) throw std::invalid_argument("predict_scc needs the SCC model");
  Tape tape;
  std::vector<const PreparedTable*> batch = {&table};
  BatchLayout layout(batch, model.variant());
  Var h = model.encode(tape, batch, layout);
  SccPrediction out;
  out.is_scc = nn::sigmoid(model.table_logits(tape, h, layout, false, nullptr).scalar());
  const Matrix& id = model.line_logits(tape, h, layout, false, nullptr).value();
  int best = -1;
  for (int k = 0; k < id.rows; ++k) {
    out.id_probs.push_back(nn::sigmoid(id(k, 0)));
    if (best < 0 || out.id_probs[k] > out.id_probs[best]) best = k;
  }
  if (best >= 0 && out.id_probs[best] > 0.5) {
    if (best < table.rows()) {
      out.id_line = LineRef{LineRef::Axis::Row, best};
    } else {
      out.id_line = LineRef{LineRef::Axis::Col, best - table.rows()};
    }
  }
  return out;
}

std::vector<CompositionTuple> extract_scc_table(const Table& table, const std::optional<LineRef>& id_line,
                                                const CompoundLexicon& lexicon, Diagnostics* diag) {
  std::vector<CompositionTuple> out;
  std::vector<std::vector<bool>> hit(table.rows(), std::vector<bool>(table.cols(), false));
  int ordinal = 0;
  for (int i = 0; i < table.rows(); ++i) {
    for (int j = 0; j < table.cols(); ++j) {
      if (id_line && ((id_line->axis == LineRef::Axis::Row && id_line->index == i) ||
                      (id_line->axis == LineRef::Axis::Col && id_line->index == j))) {
        continue;
      }
      auto parsed = find_composition(table.cell(i, j), lexicon, false);
      if (!parsed) continue;
      hit[i][j] = true;
      ++ordinal;
      std::string id;
      if (id_line) {
        id = trim(id_line->axis == LineRef::Axis::Row ? table.cell(id_line->index, j)
                                                     : table.cell(i, id_line->index));
      }
      if (id.empty()) id = synthesized_id(table, ordinal);
      try {
        auto unit = resolve_unit(table, {i, j});
        append_normalized(out, id, normalize(*parsed, {}, unit.unit));
      } catch (const CompositionError& e) {
        note(diag, "cell " + coord_str({i, j}) + ": " + e.what());
      }
    }
  }
  // A gap between two expressions of the same row or column is most likely a cell that failed to parse.
  auto flag_gaps = [&](bool by_col) {
    const int lines = by_col ? table.cols() : table.rows(), len = by_col ? table.rows() : table.cols();
    for (int l = 0; l < lines; ++l) {
      int first = -1, last = -1;
      for (int k = 0; k < len; ++k) {
        if (!(by_col ? hit[k][l] : hit[l][k])) continue;
        if (first < 0) first = k;
        last = k;
      }
      for (int k = first + 1; first >= 0 && k < last; ++k) {
        const Coord c = by_col ? Coord{k, l} : Coord{l, k};
        if (!hit[c.row][c.col]) note(diag, "cell " + coord_str(c) + ": no composition expression, skipped");
      }
    }
  };
  flag_gaps(true);
  flag_gaps(false);
  return out;
}

bool LabelingResult::is_nc() const {
  auto has = [](const std::vector<RowColLabel>& v) {
    return std::any_of(v.begin(), v.end(), [](RowColLabel l) {
      return l == RowColLabel::Composition || l == RowColLabel::Constituent;
    });
  };
  return !has(row_labels) && !has(col_labels);
}

std::vector<int> LabelingResult::lines_with(RowColLabel label, bool rows) const {
  const auto& v = rows ? row_labels : col_labels;
  std::vector<int> out;
  for (int k = 0; k < static_cast<int>(v.size()); ++k)
    if (v[k] == label) out.push_back(k);
  return out;
}

std::vector<Coord> LabelingResult::intersections() const {
  std::vector<Coord> out;
  const auto comp = lines_with(RowColLabel::Composition, row_wise);
  const auto cons = lines_with(RowColLabel::Constituent, !row_wise);
  if (row_wise) {
    for (int i : comp)
      for (int j : cons) out.push_back({i, j});
  } else {
    for (int i : cons)
      for (int j : comp) out.push_back({i, j});
  }
  return out;
}

LabelingResult labeling_from_annotation(const TableAnnotation& annotation) {
  LabelingResult out;
  out.row_labels = annotation.row_labels;
  out.col_labels = annotation.col_labels;
  out.edge_links = annotation.edge_links;
  out.row_wise = std::find(out.row_labels.begin(), out.row_labels.end(), RowColLabel::Composition) !=
                 out.row_labels.end();
  return out;
}

LabelingResult label_table(const PreparedTable& table, const GnnModel& model) {
  if (model.kind() != GnnModel::Kind::kMcc) throw std::invalid_argument("label_table needs the MCC model");
  Tape tape;
  std::vector<const PreparedTable*> batch = {&table};
  BatchLayout layout(batch, model.variant());
  Var h = model.encode(tape, batch, layout);
  const Matrix& probs = softmax_rows(model.line_logits(tape, h, layout, false, nullptr)).value();
  LabelingResult out;
  const int R = table.rows(), C = table.cols();
  out.row_probs = Matrix(R, 4);
  out.col_probs = Matrix(C, 4);
  for (int k = 0; k < R + C; ++k) {
    Matrix& dst = k < R ? out.row_probs : out.col_probs;
    const int line = k < R ? k : k - R;
    int best = 0;
    for (int l = 0; l < 4; ++l) {
      dst(line, l) = probs(k, l);
      if (probs(k, l) > probs(k, best)) best = l;
    }
    (k < R ? out.row_labels : out.col_labels).push_back(static_cast<RowColLabel>(best));
  }
  out.row_wise = std::find(out.row_labels.begin(), out.row_labels.end(), RowColLabel::Composition) !=
                 out.row_labels.end();

  const auto cells = out.intersections();
  if (cells.empty()) return out;
  std::vector<std::pair<int, int>> pairs;
  std::vector<Coord> targets;
  std::vector<std::size_t> first;
  for (const auto& c : cells) {
    first.push_back(pairs.size());
    for (int j = 0; j < C; ++j) {
      if (j == c.col) continue;
      pairs.emplace_back(layout.cell(0, c.row, c.col), layout.cell(0, c.row, j));
      targets.push_back({c.row, j});
    }
    for (int i = 0; i < R; ++i) {
      if (i == c.row) continue;
      pairs.emplace_back(layout.cell(0, c.row, c.col), layout.cell(0, i, c.col));
      targets.push_back({i, c.col});
    }
  }
  first.push_back(pairs.size());
  if (pairs.empty()) return out;
  const Matrix& logits = model.edge_logits(tape, h, pairs, false, nullptr).value();
  for (std::size_t k = 0; k < cells.size(); ++k) {
    std::size_t best = first[k];
    for (std::size_t e = first[k]; e < first[k + 1]; ++e)
      if (logits(static_cast<int>(e), 0) > logits(static_cast<int>(best), 0)) best = e;
    if (first[k] < first[k + 1]) out.edge_links[cells[k]] = targets[best];
  }
  return out;
}

LinkedTerm classify_linked_cell(std::string_view text, const CompoundLexicon& lexicon) {
  auto spans = lex_compounds(text, lexicon);
  if (!spans.empty()) return {LinkedTerm::Kind::Compound, spans.front().compound};
  const std::string t = trim(text);
  if (!t.empty() && t[0] >= 'a' && t[0] <= 'z' &&
      (t.size() == 1 || !std::isalpha(static_cast<unsigned char>(t[1])))) {
    return {LinkedTerm::Kind::Variable, t.substr(0, 1)};
  }
  return {LinkedTerm::Kind::Other, t};
}

PiFeatures compute_pi_features(const LabelingResult& labeling, const Table& table,
                               const CompoundLexicon& lexicon) {
  PiFeatures f;
  std::set<std::string> vars, compounds;
  for (const auto& [cell, target] : labeling.edge_links) {
    auto term = classify_linked_cell(table.cell(target), lexicon);
    if (term.kind == LinkedTerm::Kind::Variable) vars.insert(term.name);
    if (term.kind == LinkedTerm::Kind::Compound) compounds.insert(term.name);
  }
  f.unique_variables = static_cast<double>(vars.size());
  f.unique_compounds = static_cast<double>(compounds.size());
  f.constituent_lines = static_cast<double>(labeling.lines_with(RowColLabel::Constituent, true).size() +
                                            labeling.lines_with(RowColLabel::Constituent, false).size());
  const auto comp = labeling.lines_with(RowColLabel::Composition, labeling.row_wise);
  const auto cons = labeling.lines_with(RowColLabel::Constituent, !labeling.row_wise);
  if (comp.empty()) return f;
  double total = 0.0;
  f.max_line_sum = -std::numeric_limits<double>::infinity();
  for (int p : comp) {
    double s = 0.0;
    for (int q : cons) {
      const Coord c = labeling.row_wise ? Coord{p, q} : Coord{q, p};
      s += parse_cell_number(table.cell(c)).value_or(0.0);
    }
    f.max_line_sum = std::max(f.max_line_sum, s);
    total += s;
  }
  f.mean_line_sum = total / static_cast<double>(comp.size());
  return f;
}

double PiClassifier::probability(const PiFeatures& f) const {
  const auto x = f.values();
  double z = bias;
  for (std::size_t k = 0; k < x.size(); ++k) z += weights[k] * (x[k] - mean[k]) / scale[k];
  return nn::sigmoid(z);
}

namespace {

// Composition lines with their intersection cells, in line order.
struct CompositionLine {
  int index;
  std::vector<Coord> cells;
};

std::vector<CompositionLine> composition_lines(const LabelingResult& labeling) {
  std::vector<CompositionLine> out;
  const auto comp = labeling.lines_with(RowColLabel::Composition, labeling.row_wise);
  const auto cons = labeling.lines_with(RowColLabel::Constituent, !labeling.row_wise);
  for (int p : comp) {
    CompositionLine line{p, {}};
    for (int q : cons) line.cells.push_back(labeling.row_wise ? Coord{p, q} : Coord{q, p});
    out.push_back(std::move(line));
  }
  return out;
}

std::string material_id(const LabelingResult& labeling, const Table& table, int line, int ordinal) {
  const auto ids = labeling.lines_with(RowColLabel::Id, !labeling.row_wise);
  if (!ids.empty()) {
    auto id = trim(labeling.row_wise ? table.cell(line, ids.front()) : table.cell(ids.front(), line));
    if (!id.empty()) return id;
  }
  return synthesized_id(table, ordinal);
}

Unit line_unit(const Table& table, const CompositionLine& line) {
  return resolve_unit(table, line.cells.empty() ? Coord{0, 0} : line.cells.front()).unit;
}

}  // namespace

std::vector<CompositionTuple> extract_mcc_ci(const LabelingResult& labeling, const Table& table,
                                             const CompoundLexicon& lexicon, Diagnostics* diag) {
  std::vector<CompositionTuple> out;
  int ordinal = 0;
  for (const auto& line : composition_lines(labeling)) {
    ++ordinal;
    std::vector<std::pair<std::string, double>> parts;
    double sum = 0.0;
    for (const auto& cell : line.cells) {
      auto link = labeling.edge_links.find(cell);
      if (link == labeling.edge_links.end()) continue;
      auto term = classify_linked_cell(table.cell(link->second), lexicon);
      if (term.kind != LinkedTerm::Kind::Compound) continue;
      auto value = parse_cell_number(table.cell(cell));
      if (!value || *value <= 0.0) continue;
      parts.emplace_back(term.name, *value);
      sum += *value;
    }
    if (parts.empty() || !(sum > 0.0)) {
      note(diag, "composition line " + std::to_string(line.index) + ": no positive amounts, skipped");
      continue;
    }
    const std::string id = material_id(labeling, table, line.index, ordinal);
    const Unit unit = line_unit(table, line);
    const std::size_t begin = out.size();
    for (const auto& [c, v] : parts) merge_tuple(out, begin, {id, c, v * 100.0 / sum, unit});
  }
  return out;
}

namespace {

double percentage_of(const NormalizedComposition& nc, const std::string& compound) {
  return nc.find(compound).value_or(0.0);
}

// Finds variable values whose normalized composition reproduces the target percentages.
std::optional<Assignment> solve_variables(const ParsedComposition& pc, const std::vector<std::string>& vars,
                                          const std::vector<std::pair<std::string, double>>& targets) {
  const int m = static_cast<int>(vars.size());
  const int n = static_cast<int>(targets.size());
  auto residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    Assignment a;
    for (int k = 0; k < m; ++k) a[vars[k]] = x[k];
    try {
      auto nc = normalize(pc, a);
      r.resize(n);
      for (int k = 0; k < n; ++k) r[k] = percentage_of(nc, targets[k].first) - targets[k].second;
      return true;
    } catch (const CompositionError&) {
      return false;
    }
  };
  for (double start : {0.5, 0.1, 0.9, 10.0, 50.0, 90.0, 2.0, 5.0}) {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(m, start);
    Eigen::VectorXd r;
    if (!residual(x, r)) continue;
    for (int iter = 0; iter < 100 && r.cwiseAbs().maxCoeff() > 1e-9; ++iter) {
      Eigen::MatrixXd J(n, m);
      bool ok = true;
      for (int k = 0; k < m && ok; ++k) {
        const double h = 1e-7 * std::max(1.0, std::abs(x[k]));
        Eigen::VectorXd xp = x, xm = x, rp, rm;
        xp[k] += h;
        xm[k] -= h;
        if (residual(xp, rp) && residual(xm, rm)) {
          J.col(k) = (rp - rm) / (2 * h);
        } else if (residual(xp, rp)) {
          J.col(k) = (rp - r) / h;
        } else {
          ok = false;
        }
      }
      if (!ok) break;
      Eigen::MatrixXd A = J.transpose() * J;
      A.diagonal().array() += 1e-12;
      Eigen::VectorXd step = A.ldlt().solve(-J.transpose() * r);
      // Backtrack until the residual shrinks and stays in the valid region.
      double t = 1.0;
      bool moved = false;
      for (int k = 0; k < 30; ++k, t *= 0.5) {
        Eigen::VectorXd xn = x + t * step, rn;
        if (residual(xn, rn) && rn.squaredNorm() < r.squaredNorm()) {
          x = xn;
          r = rn;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    if (r.cwiseAbs().maxCoeff() <= 1e-6) {
      Assignment a;
      for (int k = 0; k < m; ++k) a[vars[k]] = x[k];
      return a;
    }
  }
  return std::nullopt;
}

bool contains_compound(const std::vector<CompositionNode>& nodes, const std::string& compound) {
  for (const auto& n : nodes) {
    if (n.is_leaf() ? n.compound == compound : contains_compound(n.children, compound)) return true;
  }
  return false;
}

}  // namespace

std::vector<CompositionTuple> extract_mcc_pi(const LabelingResult& labeling, const Table& table,
                                             const CompoundLexicon& lexicon, Diagnostics* diag) {
  std::set<std::string> linked_vars, linked_compounds;
  for (const auto& [cell, target] : labeling.edge_links) {
    auto term = classify_linked_cell(table.cell(target), lexicon);
    if (term.kind == LinkedTerm::Kind::Variable) linked_vars.insert(term.name);
    if (term.kind == LinkedTerm::Kind::Compound) linked_compounds.insert(term.name);
  }
  const bool by_variables = !linked_vars.empty();

  std::vector<std::string> texts = {table.caption(), table.footer()};
  texts.insert(texts.end(), table.paper_text().begin(), table.paper_text().end());
  std::optional<ParsedComposition> expr;
  for (const auto& text : texts) {
    for (auto& pc : find_all_compositions(text, lexicon, true)) {
      const auto vars = pc.variables();
      if (vars.empty()) continue;
      bool ok = true;
      if (by_variables) {
        for (const auto& v : linked_vars) ok = ok && vars.count(v) > 0;
      } else {
        for (const auto& c : linked_compounds) ok = ok && contains_compound(pc.items, c);
      }
      if (ok) {
        expr = std::move(pc);
        break;
      }
    }
    if (expr) break;
  }
  if (!expr) {
    throw PartialInfoError(PartialInfoError::Kind::NoExpressionFound,
                           "no composition expression with the linked variables/compounds");
  }
  const auto expr_vars = expr->variables();
  if (by_variables) {
    for (const auto& v : expr_vars) {
      if (!linked_vars.count(v)) {
        throw PartialInfoError(PartialInfoError::Kind::UnboundVariableAfterMatch,
                               "variable '" + v + "' has no table column or row");
      }
    }
  }

  // Percent numbers for compound-only tables may be given as fractions.
  double scale = 1.0;
  if (!by_variables) {
    double mx = 0.0;
    for (const auto& [cell, target] : labeling.edge_links) mx = std::max(mx, parse_cell_number(table.cell(cell)).value_or(0.0));
    if (mx > 0.0 && mx <= 1.0) scale = 100.0;
  }

  std::vector<CompositionTuple> out;
  int ordinal = 0;
  for (const auto& line : composition_lines(labeling)) {
    ++ordinal;
    Assignment assignment;
    std::vector<std::pair<std::string, double>> targets;
    for (const auto& cell : line.cells) {
      auto link = labeling.edge_links.find(cell);
      if (link == labeling.edge_links.end()) continue;
      auto term = classify_linked_cell(table.cell(link->second), lexicon);
      auto value = parse_cell_number(table.cell(cell));
      if (!value) continue;
      if (by_variables && term.kind == LinkedTerm::Kind::Variable) assignment[term.name] = *value;
      if (!by_variables && term.kind == LinkedTerm::Kind::Compound) targets.emplace_back(term.name, *value * scale);
    }
    try {
      if (!by_variables) {
        if (targets.empty()) continue;
        auto solved = solve_variables(*expr, {expr_vars.begin(), expr_vars.end()}, targets);
        if (!solved) {
          note(diag, "composition line " + std::to_string(line.index) + ": no variable values fit the table");
          continue;
        }
        assignment = *solved;
      } else if (assignment.size() < expr_vars.size()) {
        note(diag, "composition line " + std::to_string(line.index) + ": missing variable values");
        continue;
      }
      auto nc = normalize(*expr, assignment, line_unit(table, line));
      append_normalized(out, material_id(labeling, table, line.index, ordinal), nc);
    } catch (const CompositionError& e) {
      note(diag, "composition line " + std::to_string(line.index) + ": " + e.what());
    }
  }
  return out;
}

ExtractorModels::ExtractorModels(const ModelConfig& c, std::uint64_t seed)
    : config(c),
      scc(std::make_unique<GnnModel>(GnnModel::Kind::kScc, c, seed)),
      mcc(std::make_unique<GnnModel>(GnnModel::Kind::kMcc, c, seed + 1)) {}

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + std::to_string(v[k]);
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

Matrix row_of(const std::array<double, 5>& a) {
  Matrix m(1, 5);
  std::copy(a.begin(), a.end(), m.data.begin());
  return m;
}

std::array<double, 5> array_of(const Matrix& m) {
  if (m.size() != 5) throw std::runtime_error("checkpoint: PI classifier tensor must hold 5 values");
  std::array<double, 5> a{};
  std::copy(m.data.begin(), m.data.end(), a.begin());
  return a;
}

}  // namespace

nn::Checkpoint ExtractorModels::to_checkpoint() const {
  nn::Checkpoint ck;
  ck.meta["preset"] = config.preset;
  ck.meta["gat1.hidden"] = join_ints(config.gat1.hidden_sizes);
  ck.meta["gat1.heads"] = join_ints(config.gat1.heads);
  ck.meta["gat2.hidden"] = join_ints(config.gat2.hidden_sizes);
  ck.meta["gat2.heads"] = join_ints(config.gat2.heads);
  ck.meta["text_dim"] = std::to_string(config.text_dim);
  ck.meta["regex_emb"] = std::to_string(config.regex_emb);
  ck.meta["freq_emb1"] = std::to_string(config.freq_emb1);
  ck.meta["freq_emb2"] = std::to_string(config.freq_emb2);
  ck.meta["freq_buckets"] = std::to_string(config.freq_buckets);
  ck.meta["dropout"] = format_number(config.dropout);
  ck.meta["hash_buckets"] = std::to_string(config.encoder.buckets);
  ck.add_store("scc.", scc->params());
  ck.add_store("mcc.", mcc->params());
  ck.tensors.emplace_back("pi.mean", row_of(pi.mean));
  ck.tensors.emplace_back("pi.scale", row_of(pi.scale));
  ck.tensors.emplace_back("pi.weights", row_of(pi.weights));
  ck.tensors.emplace_back("pi.bias", Matrix(1, 1, pi.bias));
  return ck;
}

ExtractorModels ExtractorModels::from_checkpoint(const nn::Checkpoint& ck) {
  auto get = [&](const std::string& k) {
    auto it = ck.meta.find(k);
    if (it == ck.meta.end()) throw std::runtime_error("checkpoint: missing meta '" + k + "'");
    return it->second;
  };
  ModelConfig c = ModelConfig::preset_named(get("preset"));
  c.gat1.hidden_sizes = split_ints(get("gat1.hidden"));
  c.gat1.heads = split_ints(get("gat1.heads"));
  c.gat2.hidden_sizes = split_ints(get("gat2.hidden"));
  c.gat2.heads = split_ints(get("gat2.heads"));
  c.text_dim = std::stoi(get("text_dim"));
  c.regex_emb = std::stoi(get("regex_emb"));
  c.freq_emb1 = std::stoi(get("freq_emb1"));
  c.freq_emb2 = std::stoi(get("freq_emb2"));
  c.freq_buckets = std::stoi(get("freq_buckets"));
  c.dropout = std::stod(get("dropout"));
  c.encoder.buckets = std::stoi(get("hash_buckets"));
  ExtractorModels models(c, 0);
  ck.restore_store("scc.", models.scc->params());
  ck.restore_store("mcc.", models.mcc->params());
  models.pi.mean = array_of(ck.tensor("pi.mean"));
  models.pi.scale = array_of(ck.tensor("pi.scale"));
  models.pi.weights = array_of(ck.tensor("pi.weights"));
  models.pi.bias = ck.tensor("pi.bias").data.at(0);
  return models;
}

ExtractorModels ExtractorModels::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::Checkpoint::load(path));
}

ExtractionRecord ExtractionResult::to_record(const std::string& table_id) const {
  ExtractionRecord r;
  r.table_id = table_id;
  r.table_type = type;
  r.tuples = tuples;
  r.row_labels = row_labels;
  r.col_labels = col_labels;
  return r;
}

namespace {

void extract_mcc(ExtractionResult& res, const LabelingResult& labeling, const Table& table, bool partial,
                 const CompoundLexicon& lexicon) {
  if (!partial) {
    res.type = TableType::MCC_CI;
    res.tuples = extract_mcc_ci(labeling, table, lexicon, &res.diagnostics);
    return;
  }
  try {
    res.type = TableType::MCC_PI;
    res.tuples = extract_mcc_pi(labeling, table, lexicon, &res.diagnostics);
  } catch (const PartialInfoError& e) {
    res.type = TableType::NC;
    res.tuples.clear();
    res.diagnostics.push_back(std::string("partial-information table downgraded to NC: ") + e.what());
  }
}

}  // namespace

ExtractionResult extract_table(const PreparedTable& prepared, const ExtractorModels& models,
                               const CompoundLexicon& lexicon) {
  ExtractionResult res;
  const Table& table = prepared.table;
  res.scc = predict_scc(prepared, *models.scc);
  if (res.scc.is_scc > 0.5) {
    res.type = TableType::SCC;
    res.row_labels.assign(table.rows(), RowColLabel::Other);
    res.col_labels.assign(table.cols(), RowColLabel::Other);
    if (res.scc.id_line) {
      (res.scc.id_line->axis == LineRef::Axis::Row ? res.row_labels : res.col_labels)[res.scc.id_line->index] =
          RowColLabel::Id;
    }
    res.tuples = extract_scc_table(table, res.scc.id_line, lexicon, &res.diagnostics);
    return res;
  }
  LabelingResult labeling = label_table(prepared, *models.mcc);
  res.row_labels = labeling.row_labels;
  res.col_labels = labeling.col_labels;
  if (labeling.is_nc()) {
    res.type = TableType::NC;
  } else {
    const bool partial = models.pi.is_partial(compute_pi_features(labeling, table, lexicon));
    extract_mcc(res, labeling, table, partial, lexicon);
  }
  res.labeling = std::move(labeling);
  return res;
}

ExtractionResult extract_with_annotation(const Table& table, const TableAnnotation& annotation,
                                         const CompoundLexicon& lexicon) {
  ExtractionResult res;
  res.row_labels = annotation.row_labels;
  res.col_labels = annotation.col_labels;
  switch (annotation.table_type) {
    case TableType::NC: res.type = TableType::NC; break;
    case TableType::SCC: {
      res.type = TableType::SCC;
      std::optional<LineRef> id_line;
      for (int i = 0; i < table.rows() && !id_line; ++i)
        if (annotation.row_labels[i] == RowColLabel::Id) id_line = LineRef{LineRef::Axis::Row, i};
      for (int j = 0; j < table.cols() && !id_line; ++j)
        if (annotation.col_labels[j] == RowColLabel::Id) id_line = LineRef{LineRef::Axis::Col, j};
      res.tuples = extract_scc_table(table, id_line, lexicon, &res.diagnostics);
      break;
    }
    case TableType::MCC_CI:
    case TableType::MCC_PI: {
      auto labeling = labeling_from_annotation(annotation);
      extract_mcc(res, labeling, table, annotation.table_type == TableType::MCC_PI, lexicon);
      res.labeling = std::move(labeling);
      break;
    }
  }
  return res;
}

}  // namespace matcomp
