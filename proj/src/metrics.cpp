#include "matcomp/metrics.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "matcomp/composition.hpp"
#include "matcomp/constraints.hpp"

namespace matcomp {

PrfScore PrfScore::from_counts(long tp, long predicted, long gold) {
  PrfScore s;
  s.true_positives = tp;
  s.predicted = predicted;
  s.gold = gold;
  s.precision = predicted > 0 ? static_cast<double>(tp) / predicted : (gold == 0 ? 1.0 : 0.0);
  s.recall = gold > 0 ? static_cast<double>(tp) / gold : (predicted == 0 ? 1.0 : 0.0);
  const double d = s.precision + s.recall;
  s.f1 = d > 0 ? 2 * s.precision * s.recall / d : 0.0;
  return s;
}

long count_tuple_matches(const std::vector<CompositionTuple>& predicted, const std::vector<CompositionTuple>& gold,
                         double tolerance) {
  std::vector<bool> used(gold.size(), false);
  long n = 0;
  for (const auto& p : predicted) {
    const std::string pid = trim(p.material_id);
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (used[g]) continue;
      const auto& t = gold[g];
      if (t.constituent == p.constituent && t.unit == p.unit && trim(t.material_id) == pid &&
          std::abs(t.percentage - p.percentage) <= tolerance) {
        used[g] = true;
        ++n;
        break;
      }
    }
  }
  return n;
}

namespace {

std::map<std::string, std::vector<CompositionTuple>> by_material(const std::vector<CompositionTuple>& tuples) {
  std::map<std::string, std::vector<CompositionTuple>> out;
  for (const auto& t : tuples) out[trim(t.material_id)].push_back(t);
  return out;
}

// Materials whose full tuple set matches the gold material of the same ID.
long count_material_matches(const std::vector<CompositionTuple>& predicted, const std::vector<CompositionTuple>& gold,
                            double tolerance) {
  const auto p = by_material(predicted);
  const auto g = by_material(gold);
  long n = 0;
  for (const auto& [id, tuples] : p) {
    auto it = g.find(id);
    if (it == g.end() || it->second.size() != tuples.size()) continue;
    if (count_tuple_matches(tuples, it->second, tolerance) == static_cast<long>(tuples.size())) ++n;
  }
  return n;
}

struct Counts {
  long tables = 0, tt = 0;
  long tl_tp = 0, tl_pred = 0, tl_gold = 0;
  long m_tp = 0, m_pred = 0, m_gold = 0;
};

}  // namespace

MetricReport compute_metrics(const std::vector<ExtractionRecord>& predictions,
                             const std::vector<ExtractionRecord>& golds, const MetricOptions& options) {
  std::map<std::string, const ExtractionRecord*> gold_by_id;
  for (const auto& g : golds) {
    if (!gold_by_id.emplace(g.table_id, &g).second) throw std::invalid_argument("duplicate gold table id '" + g.table_id + "'");
  }
  std::set<std::string> seen;
  for (const auto& p : predictions) {
    if (!gold_by_id.count(p.table_id)) throw std::invalid_argument("prediction for unknown table id '" + p.table_id + "'");
    if (!seen.insert(p.table_id).second) throw std::invalid_argument("duplicate predicted table id '" + p.table_id + "'");
  }
  for (const auto& [id, g] : gold_by_id) {
    if (!seen.count(id)) throw std::invalid_argument("no prediction for table id '" + id + "'");
  }

  MetricReport r;
  Counts all;
  std::map<TableType, Counts> per_type;
  long id_tp = 0, id_pred = 0, id_gold = 0;
  double macro_sum = 0.0;
  long macro_n = 0;
  for (const auto& p : predictions) {
    const ExtractionRecord& g = *gold_by_id.at(p.table_id);
    const long tl_tp = count_tuple_matches(p.tuples, g.tuples, options.tolerance);
    const long m_tp = count_material_matches(p.tuples, g.tuples, options.tolerance);
    const long m_pred = static_cast<long>(by_material(p.tuples).size());
    const long m_gold = static_cast<long>(by_material(g.tuples).size());
    for (Counts* c : {&all, &per_type[g.table_type]}) {
      ++c->tables;
      c->tt += p.table_type == g.table_type;
      c->tl_tp += tl_tp;
      c->tl_pred += static_cast<long>(p.tuples.size());
      c->tl_gold += static_cast<long>(g.tuples.size());
      c->m_tp += m_tp;
      c->m_pred += m_pred;
      c->m_gold += m_gold;
    }

    std::set<std::string> pid, gid;
    for (const auto& t : p.tuples) pid.insert(trim(t.material_id));
    for (const auto& t : g.tuples) gid.insert(trim(t.material_id));
    long both = 0;
    for (const auto& id : pid) both += gid.count(id);
    id_tp += both;
    id_pred += static_cast<long>(pid.size());
    id_gold += static_cast<long>(gid.size());
    if (!pid.empty() || !gid.empty()) {
      macro_sum += PrfScore::from_counts(both, static_cast<long>(pid.size()), static_cast<long>(gid.size())).f1;
      ++macro_n;
    }

    if (p.row_labels && p.col_labels) r.cv_total += count_violations(*p.row_labels, *p.col_labels).total();
  }

  r.tables = all.tables;
  r.tt_accuracy = all.tables ? static_cast<double>(all.tt) / all.tables : 0.0;
  r.tl = PrfScore::from_counts(all.tl_tp, all.tl_pred, all.tl_gold);
  r.matl = PrfScore::from_counts(all.m_tp, all.m_pred, all.m_gold);
  r.id = PrfScore::from_counts(id_tp, id_pred, id_gold);
  r.id_macro_f1 = macro_n ? macro_sum / macro_n : 1.0;
  for (const auto& [type, c] : per_type) {
    TypeBreakdown b;
    b.tables = c.tables;
    b.tt_accuracy = static_cast<double>(c.tt) / c.tables;
    b.tl = PrfScore::from_counts(c.tl_tp, c.tl_pred, c.tl_gold);
    b.matl = PrfScore::from_counts(c.m_tp, c.m_pred, c.m_gold);
    r.by_type[type] = b;
  }
  return r;
}

std::string MetricReport::to_text() const {
  std::ostringstream out;
  auto prf = [&](const std::string& k, const PrfScore& s) {
    out << k << "_precision: " << format_number(s.precision) << '\n'
        << k << "_recall: " << format_number(s.recall) << '\n'
        << k << "_f1: " << format_number(s.f1) << '\n';
  };
  out << "tables: " << tables << '\n' << "tt_accuracy: " << format_number(tt_accuracy) << '\n';
  prf("id", id);
  out << "id_macro_f1: " << format_number(id_macro_f1) << '\n';
  prf("tl", tl);
  prf("matl", matl);
  out << "cv_total: " << cv_total << '\n';
  for (const auto& [type, b] : by_type) {
    const std::string k = to_string(type);
    out << k << ".tables: " << b.tables << '\n'
        << k << ".tt_accuracy: " << format_number(b.tt_accuracy) << '\n'
        << k << ".tl_f1: " << format_number(b.tl.f1) << '\n'
        << k << ".matl_f1: " << format_number(b.matl.f1) << '\n';
  }
  return out.str();
}

nlohmann::json MetricReport::to_json() const {
  auto prf = [](const PrfScore& s) {
    return nlohmann::json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
                          {"true_positives", s.true_positives}, {"predicted", s.predicted}, {"gold", s.gold}};
  };
  nlohmann::json j = {{"tables", tables}, {"tt_accuracy", tt_accuracy}, {"id", prf(id)},
                      {"id_macro_f1", id_macro_f1}, {"tl", prf(tl)}, {"matl", prf(matl)}, {"cv_total", cv_total}};
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [type, b] : by_type) {
    types[to_string(type)] = {{"tables", b.tables}, {"tt_accuracy", b.tt_accuracy}, {"tl", prf(b.tl)}, {"matl", prf(b.matl)}};
  }
  j["by_type"] = types;
  return j;
}

}  // namespace matcomp
