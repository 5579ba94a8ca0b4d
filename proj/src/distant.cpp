#include "matcomp/distant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>

#include "matcomp/pipeline.hpp"

namespace matcomp {

nlohmann::ordered_json to_json(const KbEntry& entry) {
  nlohmann::ordered_json comp = nlohmann::ordered_json::object();
  for (const auto& [c, p] : entry.composition) comp[c] = p;
  return {{"paper_id", entry.paper_id}, {"composition", comp}, {"unit", to_string(entry.unit)}};
}

KbEntry kb_entry_from_json(const nlohmann::ordered_json& j) {
  KbEntry e;
  e.paper_id = j.at("paper_id").get<std::string>();
  for (const auto& [c, p] : j.at("composition").items()) e.composition.emplace_back(c, p.get<double>());
  if (j.contains("unit")) e.unit = unit_from_string(j.at("unit").get<std::string>());
  if (e.composition.empty()) throw std::invalid_argument("KB entry for '" + e.paper_id + "' has no composition");
  return e;
}

std::vector<KbEntry> read_kb(std::istream& in) {
  std::vector<KbEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(kb_entry_from_json(nlohmann::ordered_json::parse(line)));
    } catch (const std::exception& e) {
      throw DatasetError(lineno, std::string("KB: ") + e.what());
    }
  }
  return out;
}

std::vector<KbEntry> load_kb(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(0, "cannot open KB " + path.string());
  return read_kb(in);
}

void write_kb(std::ostream& out, const std::vector<KbEntry>& entries) {
  for (const auto& e : entries) out << to_json(e).dump() << '\n';
}

void save_kb(const std::filesystem::path& path, const std::vector<KbEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw DatasetError(0, "cannot write KB " + path.string());
  write_kb(out, entries);
}

namespace {

struct LineMatch {
  bool row = true;
  int index = 0;
  std::vector<std::pair<int, std::string>> cells;  // position along the line, compound
  const KbEntry* entry = nullptr;
};

Coord at(bool row, int line, int pos) { return row ? Coord{line, pos} : Coord{pos, line}; }

bool cell_names(const Table& table, Coord c, const std::string& compound, const CompoundLexicon& lexicon) {
  for (const auto& span : lex_compounds(table.cell(c), lexicon))
    if (span.compound == compound) return true;
  return false;
}

// Whether the line crossing `line` at `pos` names the compound somewhere else.
bool crossing_names(const Table& table, bool row, int line, int pos, const std::string& compound,
                    const CompoundLexicon& lexicon) {
  const int n = row ? table.rows() : table.cols();
  for (int k = 0; k < n; ++k) {
    if (k != line && cell_names(table, row ? Coord{k, pos} : Coord{pos, k}, compound, lexicon)) return true;
  }
  return false;
}

// Tries to place every KB percentage on a distinct numeric cell of one line, allowing a common
// scale for fractions and dopant excess. Each cell's crossing line must name its compound.
std::optional<LineMatch> match_line(const Table& table, bool row, int line, const KbEntry& entry,
                                    const CompoundLexicon& lexicon, const DistantOptions& opt) {
  const int n = row ? table.cols() : table.rows();
  std::vector<std::pair<int, double>> numbers;
  for (int k = 0; k < n; ++k) {
    if (auto v = parse_cell_number(table.cell(at(row, line, k))); v && *v > 0.0 && is_numeric_cell(table.cell(at(row, line, k)))) {
      numbers.emplace_back(k, *v);
    }
  }
  if (entry.composition.size() < 2 || numbers.size() < entry.composition.size()) return std::nullopt;
  const double p0 = entry.composition.front().second;
  for (const auto& [k0, v0] : numbers) {
    const double s = p0 / v0;
    const bool percent_scale = s >= 1.0 / opt.max_excess - 1e-12 && s <= 1.0 + 1e-12;
    const bool fraction_scale = s >= 100.0 / opt.max_excess - 1e-10 && s <= 100.0 + 1e-10;
    if (!percent_scale && !fraction_scale) continue;
    std::vector<bool> used(numbers.size(), false);
    LineMatch m{row, line, {}, &entry};
    bool ok = true;
    for (const auto& [c, p] : entry.composition) {
      bool placed = false;
      for (std::size_t u = 0; u < numbers.size() && !placed; ++u) {
        if (used[u] || std::abs(s * numbers[u].second - p) > opt.tolerance) continue;
        if (!crossing_names(table, row, line, numbers[u].first, c, lexicon)) continue;
        used[u] = true;
        placed = true;
        m.cells.emplace_back(numbers[u].first, c);
      }
      if (!placed) {
        ok = false;
        break;
      }
    }
    if (ok) return m;
  }
  return std::nullopt;
}

TableAnnotation empty_annotation(const Table& table, TableType type) {
  TableAnnotation a;
  a.table_type = type;
  a.row_labels.assign(table.rows(), RowColLabel::Other);
  a.col_labels.assign(table.cols(), RowColLabel::Other);
  return a;
}

std::optional<TableAnnotation> rule_complete(const Table& table, const std::vector<KbEntry>& kb,
                                             const CompoundLexicon& lexicon, const DistantOptions& opt) {
  std::vector<LineMatch> by_row, by_col;
  for (const auto& e : kb) {
    for (int i = 0; i < table.rows(); ++i)
      if (auto m = match_line(table, true, i, e, lexicon, opt)) by_row.push_back(*m);
    for (int j = 0; j < table.cols(); ++j)
      if (auto m = match_line(table, false, j, e, lexicon, opt)) by_col.push_back(*m);
  }
  if (by_row.empty() && by_col.empty()) return std::nullopt;
  const bool row = by_row.size() >= by_col.size();
  auto& matches = row ? by_row : by_col;

  TableAnnotation a = empty_annotation(table, TableType::MCC_CI);
  auto& comp_labels = row ? a.row_labels : a.col_labels;
  auto& cons_labels = row ? a.col_labels : a.row_labels;
  std::set<int> comp_lines;
  for (const auto& m : matches) comp_lines.insert(m.index);
  for (int l : comp_lines) comp_labels[l] = RowColLabel::Composition;

  // Header cell of each constituent line: a cell outside the composition lines naming the compound.
  std::map<int, Coord> header;
  for (const auto& m : matches) {
    for (const auto& [pos, compound] : m.cells) {
      cons_labels[pos] = RowColLabel::Constituent;
      if (header.count(pos)) continue;
      const int n = row ? table.rows() : table.cols();
      for (int k = 0; k < n; ++k) {
        if (comp_lines.count(k)) continue;
        const Coord c = row ? Coord{k, pos} : Coord{pos, k};
        if (cell_names(table, c, compound, lexicon)) {
          header[pos] = c;
          break;
        }
      }
    }
  }
  for (int l : comp_lines)
    for (const auto& [pos, h] : header) a.edge_links[at(row, l, pos)] = h;

  int ordinal = 0;
  std::set<int> emitted;
  for (int l : comp_lines) {
    ++ordinal;
    for (const auto& m : matches) {
      if (m.index != l || emitted.count(l)) continue;
      emitted.insert(l);
      for (const auto& [c, p] : m.entry->composition)
        a.gold_tuples.push_back({"T" + table.id() + "_" + std::to_string(ordinal), c, p, m.entry->unit});
    }
  }
  return a;
}

std::optional<TableAnnotation> rule_single_cell(const Table& table, const std::vector<KbEntry>& kb,
                                                const DistantOptions& opt) {
  std::vector<std::string> compounds;
  for (const auto& e : kb)
    for (const auto& [c, p] : e.composition) compounds.push_back(c);
  if (compounds.empty()) return std::nullopt;
  const CompoundLexicon restricted(compounds, false);

  auto matches_kb = [&](const NormalizedComposition& nc) -> const KbEntry* {
    for (const auto& e : kb) {
      if (e.composition.size() != nc.percentages.size()) continue;
      bool ok = true;
      for (const auto& [c, p] : e.composition) {
        auto got = nc.find(c);
        ok = ok && got && std::abs(*got - p) <= opt.tolerance;
      }
      if (ok) return &e;
    }
    return nullptr;
  };

  TableAnnotation a = empty_annotation(table, TableType::SCC);
  int ordinal = 0;
  for (int i = 0; i < table.rows(); ++i) {
    for (int j = 0; j < table.cols(); ++j) {
      for (const auto& pc : find_all_compositions(table.cell(i, j), restricted, false)) {
        try {
          auto nc = normalize(pc);
          if (const KbEntry* e = matches_kb(nc)) {
            ++ordinal;
            for (const auto& [c, p] : nc.percentages)
              a.gold_tuples.push_back({"T" + table.id() + "_" + std::to_string(ordinal), c, p, e->unit});
            break;
          }
        } catch (const CompositionError&) {
        }
      }
    }
  }
  if (ordinal == 0) return std::nullopt;
  return a;
}

std::optional<TableAnnotation> rule_partial(const Table& table, const CompoundLexicon& lexicon) {
  std::vector<std::string> texts = {table.caption(), table.footer()};
  texts.insert(texts.end(), table.paper_text().begin(), table.paper_text().end());
  for (const auto& text : texts) {
    for (const auto& pc : find_all_compositions(text, lexicon, true)) {
      const auto vars = pc.variables();
      if (vars.empty()) continue;
      std::set<std::string> compounds;
      for (const auto& n : pc.items) {
        std::vector<const CompositionNode*> stack = {&n};
        while (!stack.empty()) {
          const auto* cur = stack.back();
          stack.pop_back();
          if (cur->is_leaf()) compounds.insert(cur->compound);
          for (const auto& ch : cur->children) stack.push_back(&ch);
        }
      }
      // Header cells naming a variable, or else a compound of the expression.
      std::vector<Coord> anchors;
      for (int pass = 0; pass < 2 && anchors.empty(); ++pass) {
        for (int i = 0; i < table.rows(); ++i) {
          for (int j = 0; j < table.cols(); ++j) {
            auto term = classify_linked_cell(table.cell(i, j), lexicon);
            if (pass == 0 && term.kind == LinkedTerm::Kind::Variable && vars.count(term.name)) anchors.push_back({i, j});
            if (pass == 1 && term.kind == LinkedTerm::Kind::Compound && compounds.count(term.name))
              anchors.push_back({i, j});
          }
        }
      }
      if (anchors.empty()) continue;
      TableAnnotation a = empty_annotation(table, TableType::MCC_PI);
      for (const auto& h : anchors) {
        int down = 0, across = 0;
        for (int i = 0; i < table.rows(); ++i)
          if (i != h.row && is_numeric_cell(table.cell(i, h.col))) ++down;
        for (int j = 0; j < table.cols(); ++j)
          if (j != h.col && is_numeric_cell(table.cell(h.row, j))) ++across;
        if (down == 0 && across == 0) continue;
        const bool column = down >= across;
        (column ? a.col_labels[h.col] : a.row_labels[h.row]) = RowColLabel::Constituent;
        const int n = column ? table.rows() : table.cols();
        for (int k = 0; k < n; ++k) {
          const Coord c = column ? Coord{k, h.col} : Coord{h.row, k};
          if (c == h || !is_numeric_cell(table.cell(c))) continue;
          (column ? a.row_labels[k] : a.col_labels[k]) = RowColLabel::Composition;
          a.edge_links[c] = h;
        }
      }
      if (a.edge_links.empty()) continue;
      return a;
    }
  }
  return std::nullopt;
}

}  // namespace

TableAnnotation distant_label(const Table& table, const std::vector<KbEntry>& kb, const CompoundLexicon& lexicon,
                              const DistantOptions& options) {
  std::vector<KbEntry> own;
  for (const auto& e : kb)
    if (e.paper_id == table.paper_id()) own.push_back(e);
  if (auto a = rule_complete(table, own, lexicon, options)) return *a;
  if (auto a = rule_single_cell(table, own, options)) return *a;
  if (auto a = rule_partial(table, lexicon)) return *a;
  return empty_annotation(table, TableType::NC);
}

}  // namespace matcomp
