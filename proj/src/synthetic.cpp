#include "matcomp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "matcomp/composition.hpp"
#include "matcomp/nn.hpp"

namespace matcomp {

const std::set<std::string>& GeneratorConfig::keys() {
  static const std::set<std::string> k = {
      "tables",       "id_prefix",   "weight_scc",      "weight_mcc_ci",   "weight_mcc_pi",
      "weight_nc",    "column_wise", "distractors",     "missing_id",      "weight_unit",
      "fraction",     "dopant",      "empty_cell",      "min_materials",   "max_materials",
      "min_constituents", "max_constituents"};
  return k;
}

GeneratorConfig GeneratorConfig::from_config(const KeyValueConfig& kv) {
  kv.reject_unknown(keys());
  GeneratorConfig c;
  c.tables = static_cast<int>(kv.get_int("tables", c.tables));
  c.id_prefix = kv.get_string("id_prefix", c.id_prefix);
  c.weight_scc = kv.get_double("weight_scc", c.weight_scc);
  c.weight_mcc_ci = kv.get_double("weight_mcc_ci", c.weight_mcc_ci);
  c.weight_mcc_pi = kv.get_double("weight_mcc_pi", c.weight_mcc_pi);
  c.weight_nc = kv.get_double("weight_nc", c.weight_nc);
  c.column_wise = kv.get_double("column_wise", c.column_wise);
  c.distractors = kv.get_double("distractors", c.distractors);
  c.missing_id = kv.get_double("missing_id", c.missing_id);
  c.weight_unit = kv.get_double("weight_unit", c.weight_unit);
  c.fraction = kv.get_double("fraction", c.fraction);
  c.dopant = kv.get_double("dopant", c.dopant);
  c.empty_cell = kv.get_double("empty_cell", c.empty_cell);
  c.min_materials = static_cast<int>(kv.get_int("min_materials", c.min_materials));
  c.max_materials = static_cast<int>(kv.get_int("max_materials", c.max_materials));
  c.min_constituents = static_cast<int>(kv.get_int("min_constituents", c.min_constituents));
  c.max_constituents = static_cast<int>(kv.get_int("max_constituents", c.max_constituents));
  c.validate();
  return c;
}

void GeneratorConfig::validate() const {
  if (tables < 0) throw std::invalid_argument("generator: tables must be >= 0");
  for (double w : {weight_scc, weight_mcc_ci, weight_mcc_pi, weight_nc})
    if (w < 0) throw std::invalid_argument("generator: type weights must be >= 0");
  if (weight_scc + weight_mcc_ci + weight_mcc_pi + weight_nc <= 0)
    throw std::invalid_argument("generator: at least one type weight must be positive");
  for (double p : {column_wise, distractors, missing_id, weight_unit, fraction, dopant, empty_cell})
    if (p < 0 || p > 1) throw std::invalid_argument("generator: probabilities must lie in [0, 1]");
  if (min_materials < 1 || max_materials < min_materials)
    throw std::invalid_argument("generator: bad material count range");
  if (min_constituents < 2 || max_constituents < min_constituents || max_constituents > 8)
    throw std::invalid_argument("generator: constituent range must lie within [2, 8]");
}

namespace {

const std::vector<std::string> kOxides = {
    "SiO2", "B2O3", "P2O5", "Al2O3", "Na2O", "K2O",   "Li2O",  "CaO",   "MgO",  "BaO",
    "ZnO",  "PbO",  "TeO2", "GeO2",  "TiO2", "ZrO2",  "Bi2O3", "Fe2O3", "MoO3", "WO3",
    "V2O5", "Nb2O5", "La2O3", "SrO", "CdO",  "Sb2O3", "Ga2O3", "Rb2O",  "Cs2O", "Ag2O"};
const std::vector<std::string> kDopants = {"Er2O3", "Nd2O3", "CeO2", "Yb2O3", "Eu2O3", "Sm2O3"};
const std::vector<std::string> kIdHeaders = {"Glass", "Sample", "Code", "Glass ID", "Sample no."};
const std::vector<std::string> kIdPrefixes = {"G", "A", "M", "Gl", "GL-", "Glass "};

struct Property {
  std::string header;
  std::function<std::string(nn::Rng&)> value;
};

std::string fixed(double v, int decimals) {
  const double f = std::pow(10.0, decimals);
  return format_number(std::round(v * f) / f);
}

const std::vector<Property>& properties() {
  static const std::vector<Property> p = {
      {"Tg (°C)", [](nn::Rng& r) { return std::to_string(300 + r.below(400)); }},
      {"Tx (°C)", [](nn::Rng& r) { return std::to_string(400 + r.below(400)); }},
      {"Density (g/cm3)", [](nn::Rng& r) { return fixed(r.uniform(2.2, 6.5), 3); }},
      {"nD", [](nn::Rng& r) { return fixed(r.uniform(1.45, 2.1), 4); }},
      {"Hv (GPa)", [](nn::Rng& r) { return fixed(r.uniform(3.0, 7.5), 2); }},
      {"E (GPa)", [](nn::Rng& r) { return fixed(r.uniform(40, 110), 1); }},
      {"Eg (eV)", [](nn::Rng& r) { return fixed(r.uniform(2.0, 4.5), 2); }},
      {"Vm (cm3)", [](nn::Rng& r) { return fixed(r.uniform(20, 40), 2); }},
      {"CTE (10−7/K)", [](nn::Rng& r) { return std::to_string(50 + r.below(120)); }}};
  return p;
}

template <typename T>
const T& pick(const std::vector<T>& v, nn::Rng& rng) {
  return v[rng.below(v.size())];
}

std::vector<std::string> pick_distinct(const std::vector<std::string>& pool, int k, nn::Rng& rng) {
  std::vector<std::string> copy = pool;
  rng.shuffle(copy);
  copy.resize(k);
  return copy;
}

int uniform_int(nn::Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.below(hi - lo + 1)); }

// Splits `total` into k positive integer parts.
std::vector<int> partition(int total, int k, nn::Rng& rng) {
  std::vector<double> w(k);
  double sw = 0.0;
  for (auto& x : w) sw += (x = rng.uniform(1.0, 10.0));
  std::vector<int> parts(k);
  int used = 0;
  for (int i = 0; i + 1 < k; ++i) {
    parts[i] = std::max(1, static_cast<int>(std::lround(total * w[i] / sw)));
    used += parts[i];
  }
  parts[k - 1] = total - used;
  // Rebalance if rounding left the last part non-positive.
  for (int i = 0; parts[k - 1] < 1; i = (i + 1) % (k - 1)) {
    if (parts[i] > 1) {
      --parts[i];
      ++parts[k - 1];
    }
  }
  return parts;
}

struct Layout {
  std::vector<std::vector<std::string>> cells;
  TableAnnotation annotation;
  std::string caption, footer;
  std::vector<std::string> paper_text;
};

std::string unit_phrase(Unit unit, bool fraction) {
  if (fraction) return unit == Unit::WeightPercent ? "weight fraction" : "mole fraction";
  return unit == Unit::WeightPercent ? "wt%" : "mol%";
}

class Generator {
 public:
  Generator(const GeneratorConfig& config, std::uint64_t seed) : config_(config), rng_(seed) {}

  SyntheticCorpus run() {
    SyntheticCorpus corpus;
    const double weights[4] = {config_.weight_nc, config_.weight_scc, config_.weight_mcc_ci, config_.weight_mcc_pi};
    const double total = weights[0] + weights[1] + weights[2] + weights[3];
    for (int t = 0; t < config_.tables; ++t) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%04d", t);
      id_ = config_.id_prefix + "-" + buf;
      double u = rng_.uniform() * total;
      int type = 0;
      while (type < 3 && u >= weights[type]) u -= weights[type++];
      kb_.clear();
      Layout l;
      switch (type) {
        case 0: l = nc(); break;
        case 1: l = scc(); break;
        case 2: l = mcc_ci(); break;
        default: l = mcc_pi(); break;
      }
      Table table(id_, l.cells, l.caption, l.footer, l.paper_text);
      TableAnnotation a = l.annotation;
      if (rng_.bernoulli(config_.column_wise)) {
        table = table.transposed();
        a = a.transposed();
      }
      a.validate_against(table);
      corpus.tables.push_back({table, a});
      for (auto& e : kb_) corpus.kb.push_back(std::move(e));
    }
    return corpus;
  }

 private:
  int materials() { return uniform_int(rng_, config_.min_materials, config_.max_materials); }

  std::vector<std::string> make_ids(int n, bool& present) {
    present = !rng_.bernoulli(config_.missing_id);
    std::vector<std::string> ids;
    const std::string& prefix = pick(kIdPrefixes, rng_);
    const int start = uniform_int(rng_, 1, 20);
    for (int i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(start + i));
    return ids;
  }

  std::string material_id(bool present, const std::vector<std::string>& ids, int k) const {
    return present ? ids[k] : "T" + id_ + "_" + std::to_string(k + 1);
  }

  std::vector<const Property*> distractor_props(int min_count) {
    int n = rng_.bernoulli(config_.distractors) ? uniform_int(rng_, 1, 3) : 0;
    n = std::max(n, min_count);
    std::vector<const Property*> out;
    std::vector<int> order(properties().size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng_.shuffle(order);
    for (int i = 0; i < n; ++i) out.push_back(&properties()[order[i]]);
    return out;
  }

  // Header row + one row per material. Column 0 holds IDs when present.
  Layout frame(int n, bool ids_present, const std::vector<std::string>& ids, const std::vector<std::string>& headers,
               const std::vector<const Property*>& props) {
    Layout l;
    std::vector<std::string> head;
    if (ids_present) head.push_back(pick(kIdHeaders, rng_));
    head.insert(head.end(), headers.begin(), headers.end());
    for (const auto* p : props) head.push_back(p->header);
    l.cells.push_back(head);
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> row;
      if (ids_present) row.push_back(ids[i]);
      row.resize(row.size() + headers.size());
      for (const auto* p : props) row.push_back(p->value(rng_));
      l.cells.push_back(row);
    }
    auto& a = l.annotation;
    a.row_labels.assign(n + 1, RowColLabel::Other);
    a.col_labels.assign(head.size(), RowColLabel::Other);
    if (ids_present) a.col_labels[0] = RowColLabel::Id;
    return l;
  }

  void add_kb(const std::string& id, const std::vector<CompositionTuple>& tuples) {
    KbEntry e{id_, {}, tuples.empty() ? Unit::MolePercent : tuples.front().unit};
    for (const auto& t : tuples) e.composition.emplace_back(t.constituent, t.percentage);
    (void)id;
    kb_.push_back(e);
  }

  Layout nc() {
    const int n = materials();
    bool ids_present = false;
    auto ids = make_ids(n, ids_present);
    Layout l = frame(n, ids_present, ids, {}, distractor_props(2));
    l.annotation.table_type = TableType::NC;
    if (!ids_present) {
      // A leading temperature column instead of sample names.
      for (std::size_t i = 0; i < l.cells.size(); ++i)
        l.cells[i].insert(l.cells[i].begin(), i == 0 ? "T (K)" : std::to_string(300 + 25 * i));
      l.annotation.col_labels.insert(l.annotation.col_labels.begin(), RowColLabel::Other);
    }
    l.caption = "Physical properties of the glasses";
    if (rng_.bernoulli(0.3)) {
      auto c = pick_distinct(kOxides, 2, rng_);
      const int a = uniform_int(rng_, 10, 90);
      l.caption = "Properties of the " + std::to_string(a) + c[0] + "-" + std::to_string(100 - a) + c[1] +
                  " glass after heat treatment";
    }
    if (rng_.bernoulli(0.5)) {
      auto c = pick_distinct(kOxides, 3, rng_);
      auto parts = partition(100, 3, rng_);
      KbEntry e{id_, {}, Unit::MolePercent};
      for (int k = 0; k < 3; ++k) e.composition.emplace_back(c[k], parts[k]);
      kb_.push_back(e);
    }
    return l;
  }

  Layout scc() {
    const int n = materials();
    bool ids_present = false;
    auto ids = make_ids(n, ids_present);
    const Unit unit = rng_.bernoulli(config_.weight_unit) ? Unit::WeightPercent : Unit::MolePercent;
    Layout l = frame(n, ids_present, ids, {"Composition (" + unit_phrase(unit, false) + ")"}, distractor_props(0));
    l.annotation.table_type = TableType::SCC;
    const int col = ids_present ? 1 : 0;
    const int k = uniform_int(rng_, config_.min_constituents, std::min(config_.max_constituents, 4));
    const auto compounds = pick_distinct(kOxides, k, rng_);
    const bool doped = rng_.bernoulli(config_.dopant);
    const std::string dopant = pick(kDopants, rng_);
    const int style = static_cast<int>(rng_.below(5));
    for (int i = 0; i < n; ++i) {
      const auto parts = partition(100, k, rng_);
      std::vector<std::pair<std::string, double>> raw;
      std::string text;
      if (style == 4 && k >= 3) {
        // Nested: outer share of a binary base plus the rest.
        const int outer = uniform_int(rng_, 50, 95);
        const auto base = partition(100, 2, rng_);
        text = std::to_string(outer) + "(" + std::to_string(base[0]) + compounds[0] + "-" + std::to_string(base[1]) +
               compounds[1] + ")-" + std::to_string(100 - outer) + compounds[2];
        raw = {{compounds[0], outer * base[0] / 100.0},
               {compounds[1], outer * base[1] / 100.0},
               {compounds[2], 100.0 - outer}};
      } else {
        static const char* seps[] = {"-", "·", "+", "–"};
        for (int c = 0; c < k; ++c) {
          if (c) text += seps[style % 4];
          text += style == 3 ? "(" + compounds[c] + ")" + std::to_string(parts[c]) : std::to_string(parts[c]) + compounds[c];
          raw.emplace_back(compounds[c], parts[c]);
        }
      }
      if (doped) {
        const double d = uniform_int(rng_, 1, 10) / 2.0;
        text += "+" + format_number(d) + dopant;
        raw.emplace_back(dopant, d);
      }
      l.cells[i + 1][col] = text;
      double sum = 0.0;
      for (const auto& [c, v] : raw) sum += v;
      std::vector<CompositionTuple> tuples;
      for (const auto& [c, v] : raw)
        tuples.push_back({material_id(ids_present, ids, i), c, v * 100.0 / sum, unit});
      add_kb(tuples.front().material_id, tuples);
      l.annotation.gold_tuples.insert(l.annotation.gold_tuples.end(), tuples.begin(), tuples.end());
    }
    l.caption = rng_.bernoulli(0.5) ? "Glass compositions and properties" : "Nominal compositions of the prepared glasses";
    return l;
  }

  Layout mcc_ci() {
    const int n = materials();
    bool ids_present = false;
    auto ids = make_ids(n, ids_present);
    const Unit unit = rng_.bernoulli(config_.weight_unit) ? Unit::WeightPercent : Unit::MolePercent;
    const bool fraction = rng_.bernoulli(config_.fraction);
    const bool doped = rng_.bernoulli(config_.dopant);
    const int k = uniform_int(rng_, config_.min_constituents, config_.max_constituents);
    auto compounds = pick_distinct(kOxides, k, rng_);
    if (doped) compounds.push_back(pick(kDopants, rng_));
    const int where = static_cast<int>(rng_.below(3));  // unit in caption, id header or constituent headers
    std::vector<std::string> headers = compounds;
    if (where == 2) {
      for (auto& h : headers) h += " (" + unit_phrase(unit, fraction) + ")";
    }
    Layout l = frame(n, ids_present, ids, headers, distractor_props(0));
    l.annotation.table_type = TableType::MCC_CI;
    if (where == 1 && ids_present) l.cells[0][0] += " (" + unit_phrase(unit, fraction) + ")";
    if (where == 0 || (where == 1 && !ids_present)) {
      l.caption = "Composition (" + unit_phrase(unit, fraction) + ") and properties of the studied glasses";
    } else {
      l.caption = "Composition and properties of the studied glasses";
    }
    const int first = ids_present ? 1 : 0;
    for (int c = 0; c < static_cast<int>(compounds.size()); ++c)
      l.annotation.col_labels[first + c] = RowColLabel::Constituent;
    for (int i = 0; i < n; ++i) {
      l.annotation.row_labels[i + 1] = RowColLabel::Composition;
      // Sometimes one constituent is absent from a material.
      int absent = -1;
      if (k >= 3 && rng_.bernoulli(config_.empty_cell)) absent = static_cast<int>(rng_.below(k));
      const auto parts = partition(fraction ? 100 : 200, absent >= 0 ? k - 1 : k, rng_);
      std::vector<std::pair<std::string, double>> raw;
      for (int c = 0, p = 0; c < static_cast<int>(compounds.size()); ++c) {
        std::string text;
        if (c == absent) {
          text = rng_.bernoulli(0.5) ? "–" : "0";
        } else if (c < k) {
          const int part = parts[p++];
          text = fraction ? format_number(part / 100.0) : format_number(part / 2.0);
        } else {
          const int d = uniform_int(rng_, 1, 10);
          text = fraction ? format_number(d / 200.0) : format_number(d / 2.0);
        }
        l.cells[i + 1][first + c] = text;
        l.annotation.edge_links[{i + 1, first + c}] = {0, first + c};
        if (c != absent) raw.emplace_back(compounds[c], *parse_cell_number(text));
      }
      double sum = 0.0;
      for (const auto& [c, v] : raw) sum += v;
      std::vector<CompositionTuple> tuples;
      for (const auto& [c, v] : raw)
        tuples.push_back({material_id(ids_present, ids, i), c, v * 100.0 / sum, unit});
      add_kb(tuples.front().material_id, tuples);
      l.annotation.gold_tuples.insert(l.annotation.gold_tuples.end(), tuples.begin(), tuples.end());
    }
    return l;
  }

  struct PiTemplate {
    std::string expression;
    std::vector<std::string> variables;
    // Variable values for one material and the resulting percentages.
    std::function<std::vector<double>(nn::Rng&)> draw;
    std::function<std::vector<std::pair<std::string, double>>(const std::vector<double>&)> gold;
  };

  // Distinct values so materials differ.
  std::vector<std::vector<double>> draw_rows(const PiTemplate& t, int n) {
    std::vector<std::vector<double>> rows;
    for (int tries = 0; static_cast<int>(rows.size()) < n && tries < 200; ++tries) {
      auto v = t.draw(rng_);
      if (std::find(rows.begin(), rows.end(), v) == rows.end()) rows.push_back(v);
    }
    std::sort(rows.begin(), rows.end());
    return rows;
  }

  PiTemplate variable_template(const std::vector<std::string>& c, const std::string& x, const std::string& y) {
    switch (rng_.below(4)) {
      case 0:
        return {x + c[0] + "-(100-" + x + ")" + c[1], {x},
                [](nn::Rng& r) { return std::vector<double>{5.0 * uniform_int(r, 1, 12)}; },
                [c](const std::vector<double>& v) {
                  return std::vector<std::pair<std::string, double>>{{c[0], v[0]}, {c[1], 100 - v[0]}};
                }};
      case 1:
        return {x + c[0] + "·(1−" + x + ")" + c[1], {x},
                [](nn::Rng& r) { return std::vector<double>{uniform_int(r, 1, 9) / 10.0}; },
                [c](const std::vector<double>& v) {
                  return std::vector<std::pair<std::string, double>>{{c[0], 100 * v[0]}, {c[1], 100 * (1 - v[0])}};
                }};
      case 2:
        return {"[(" + c[0] + ")" + x + "(" + c[1] + ")1−" + x + "]" + y + "(" + c[2] + ")1−" + y, {x, y},
                [](nn::Rng& r) {
                  return std::vector<double>{uniform_int(r, 1, 9) / 10.0, uniform_int(r, 1, 19) / 20.0};
                },
                [c](const std::vector<double>& v) {
                  return std::vector<std::pair<std::string, double>>{
                      {c[0], 100 * v[0] * v[1]}, {c[1], 100 * (1 - v[0]) * v[1]}, {c[2], 100 * (1 - v[1])}};
                }};
      default:
        return {x + c[0] + "-" + y + c[1] + "-(100-" + x + "-" + y + ")" + c[2], {x, y},
                [](nn::Rng& r) {
                  return std::vector<double>{5.0 * uniform_int(r, 1, 8), 5.0 * uniform_int(r, 1, 8)};
                },
                [c](const std::vector<double>& v) {
                  return std::vector<std::pair<std::string, double>>{
                      {c[0], v[0]}, {c[1], v[1]}, {c[2], 100 - v[0] - v[1]}};
                }};
    }
  }

  Layout mcc_pi() {
    const int n = materials();
    bool ids_present = false;
    auto ids = make_ids(n, ids_present);
    const Unit unit = rng_.bernoulli(config_.weight_unit) ? Unit::WeightPercent : Unit::MolePercent;
    const auto c = pick_distinct(kOxides, 3, rng_);
    static const std::vector<std::pair<std::string, std::string>> names = {{"x", "y"}, {"x", "z"}, {"y", "z"}};
    const auto& [x, y] = pick(names, rng_);
    const bool compound_only = rng_.bernoulli(0.35);
    PiTemplate t;
    std::vector<std::string> headers;
    if (compound_only) {
      // The table lists one constituent's amount; the text gives the remainder.
      t = variable_template(c, x, y);
      t.variables = {x};
      if (rng_.bernoulli(0.5)) {
        t.expression = x + c[0] + "-(100-" + x + ")" + c[1];
      } else {
        t.expression = x + c[0] + "·(1−" + x + ")" + c[1];
      }
      t.draw = [](nn::Rng& r) { return std::vector<double>{5.0 * uniform_int(r, 1, 12)}; };
      t.gold = [c](const std::vector<double>& v) {
        return std::vector<std::pair<std::string, double>>{{c[0], v[0]}, {c[1], 100 - v[0]}};
      };
      headers = {c[0]};
    } else {
      t = variable_template(c, x, y);
      headers = t.variables;
    }
    Layout l = frame(n, ids_present, ids, headers, distractor_props(0));
    l.annotation.table_type = TableType::MCC_PI;
    const std::string sentence = "Glasses with nominal composition " + t.expression + " (" + unit_phrase(unit, false) + ")";
    switch (rng_.below(4)) {
      case 0:
      case 1: l.caption = sentence; break;
      case 2:
        l.caption = "Properties of the glasses (" + unit_phrase(unit, false) + ")";
        l.footer = sentence;
        break;
      default:
        l.caption = "Properties of the glasses (" + unit_phrase(unit, false) + ")";
        l.paper_text = {"Samples were melted in platinum crucibles.", sentence + " were prepared by melt quenching."};
        break;
    }
    const int first = ids_present ? 1 : 0;
    for (std::size_t h = 0; h < headers.size(); ++h) l.annotation.col_labels[first + h] = RowColLabel::Constituent;
    const auto rows = draw_rows(t, n);
    // draw_rows may return fewer rows when the value space is small.
    l.cells.resize(rows.size() + 1);
    l.annotation.row_labels.resize(rows.size() + 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      l.annotation.row_labels[i + 1] = RowColLabel::Composition;
      for (std::size_t h = 0; h < headers.size(); ++h) {
        l.cells[i + 1][first + h] = format_number(rows[i][h]);
        l.annotation.edge_links[{static_cast<int>(i) + 1, first + static_cast<int>(h)}] = {0, first + static_cast<int>(h)};
      }
      std::vector<CompositionTuple> tuples;
      for (const auto& [cmp, p] : t.gold(rows[i]))
        if (p > 0) tuples.push_back({material_id(ids_present, ids, static_cast<int>(i)), cmp, p, unit});
      add_kb(tuples.front().material_id, tuples);
      l.annotation.gold_tuples.insert(l.annotation.gold_tuples.end(), tuples.begin(), tuples.end());
    }
    return l;
  }

  const GeneratorConfig& config_;
  nn::Rng rng_;
  std::string id_;
  std::vector<KbEntry> kb_;
};

}  // namespace

SyntheticCorpus generate_synthetic(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  return Generator(config, seed).run();
}

}  // namespace matcomp
