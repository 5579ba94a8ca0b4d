#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "matcomp/cli.hpp"
#include "matcomp/composition.hpp"
#include "matcomp/constraints.hpp"
#include "matcomp/dataset_io.hpp"
#include "matcomp/distant.hpp"
#include "matcomp/metrics.hpp"
#include "matcomp/pipeline.hpp"
#include "matcomp/synthetic.hpp"
#include "matcomp/training.hpp"

namespace py = pybind11;
using namespace matcomp;
using nlohmann::json;

namespace {

// Records cross the boundary as JSON text; the Python package turns them into dicts.

py::dict parse_expression(const std::string& text, const std::map<std::string, double>& assignment,
                          const std::string& unit) {
  const auto parsed = parse_composition(text, CompoundLexicon::builtin(), true);
  py::dict out;
  out["tree"] = parsed.to_string();
  out["pattern"] = to_string(parsed.pattern);
  out["span"] = py::make_tuple(parsed.begin, parsed.end);
  const auto vars = parsed.variables();
  out["variables"] = std::vector<std::string>(vars.begin(), vars.end());
  bool bound = true;
  for (const auto& v : vars) bound = bound && assignment.count(v);
  if (!bound) {
    out["percentages"] = py::none();
    return out;
  }
  const auto nc = normalize(parsed, Assignment(assignment.begin(), assignment.end()), unit_from_string(unit));
  out["percentages"] = nc.percentages;
  out["raw_sum"] = nc.raw_sum;
  out["unit"] = to_string(nc.unit);
  out["from_fraction"] = nc.from_fraction;
  return out;
}

std::vector<py::tuple> find_compositions(const std::string& text, bool allow_variables) {
  std::vector<py::tuple> out;
  for (const auto& pc : find_all_compositions(text, CompoundLexicon::builtin(), allow_variables))
    out.push_back(py::make_tuple(pc.begin, pc.end, pc.to_string()));
  return out;
}

py::dict violations(const std::vector<int>& rows, const std::vector<int>& cols) {
  auto labels = [](const std::vector<int>& v) {
    std::vector<RowColLabel> out;
    for (int x : v) {
      if (x < 0 || x > 3) throw std::invalid_argument("labels must be 0..3");
      out.push_back(static_cast<RowColLabel>(x));
    }
    return out;
  };
  const auto v = count_violations(labels(rows), labels(cols));
  py::dict out;
  out["exclusivity"] = v.exclusivity;
  out["composition_id"] = v.composition_id;
  out["constituent_id"] = v.constituent_id;
  out["unique_id"] = v.unique_id;
  out["total"] = v.total();
  return out;
}

py::tuple generate(const std::map<std::string, std::string>& config, std::uint64_t seed) {
  KeyValueConfig kv;
  for (const auto& [k, v] : config) kv.set(k, v);
  const auto corpus = generate_synthetic(GeneratorConfig::from_config(kv), seed);
  std::ostringstream data, kb;
  write_dataset(data, corpus.tables);
  write_kb(kb, corpus.kb);
  return py::make_tuple(data.str(), kb.str());
}

std::string extract_oracle(const std::string& record) {
  const auto lt = labeled_table_from_json(json::parse(record));
  if (!lt.annotation) throw std::invalid_argument("oracle extraction needs an annotated record");
  return to_json(extract_with_annotation(lt.table, *lt.annotation, CompoundLexicon::builtin())
                     .to_record(lt.table.id()))
      .dump();
}

std::string label_distant(const std::string& table, const std::string& kb_lines) {
  std::istringstream in(kb_lines);
  const auto kb = read_kb(in);
  return to_json(distant_label(table_from_json(json::parse(table)), kb, CompoundLexicon::builtin())).dump();
}

std::string evaluate(const std::string& predictions, const std::string& gold, double tolerance) {
  std::istringstream p(predictions);
  std::vector<ExtractionRecord> golds;
  std::istringstream g(gold);
  std::string line;
  while (std::getline(g, line)) {
    if (trim(line).empty()) continue;
    const auto j = json::parse(line);
    if (j.contains("cells")) {
      const auto lt = labeled_table_from_json(j);
      if (!lt.annotation) throw std::invalid_argument("gold record '" + lt.table.id() + "' has no annotation");
      golds.push_back({lt.table.id(), lt.annotation->table_type, lt.annotation->gold_tuples, std::nullopt, std::nullopt});
    } else {
      golds.push_back(extraction_from_json(j));
    }
  }
  return compute_metrics(read_extractions(p), golds, MetricOptions{tolerance}).to_json().dump();
}

class Extractor {
 public:
  explicit Extractor(const std::string& checkpoint) : models_(ExtractorModels::load(checkpoint)) {}

  std::string extract(const std::string& table) const {
    const Table t = table_from_json(json::parse(table));
    const auto prepared = prepare_table(t, CompoundLexicon::builtin(), models_.config.encoder);
    return to_json(extract_table(prepared, models_, CompoundLexicon::builtin()).to_record(t.id())).dump();
  }

 private:
  ExtractorModels models_;
};

std::string train_model(const std::string& train_lines, const std::string& dev_lines,
                        const std::map<std::string, std::string>& config, std::uint64_t seed,
                        const std::string& out) {
  KeyValueConfig kv;
  for (const auto& [k, v] : config) kv.set(k, v);
  const auto cfg = TrainConfig::from_config(kv);
  std::istringstream tr(train_lines), dv(dev_lines);
  const auto train_set = read_dataset(tr), dev_set = read_dataset(dv);
  ExtractorModels models(ModelConfig::preset_named(cfg.preset), seed);
  const auto report = train(models, train_set, dev_set, cfg, seed, CompoundLexicon::builtin());
  models.save(out);
  json r = {{"best_epoch_gnn1", report.best_epoch_gnn1},
            {"best_epoch_gnn2", report.best_epoch_gnn2},
            {"pi_train_accuracy", report.pi_train_accuracy}};
  for (const auto* logs : {&report.gnn1, &report.gnn2}) {
    json arr = json::array();
    for (const auto& e : *logs)
      arr.push_back({{"epoch", e.epoch}, {"steps", e.steps}, {"train_loss", e.train_loss}, {"dev_score", e.dev_score}});
    r[logs == &report.gnn1 ? "gnn1" : "gnn2"] = arr;
  }
  return r.dump();
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Composition extraction from materials-science tables";
  py::register_exception<CompositionError>(m, "CompositionError", PyExc_ValueError);
  py::register_exception<PartialInfoError>(m, "PartialInfoError", PyExc_ValueError);
  py::register_exception<DatasetError>(m, "DatasetError", PyExc_ValueError);

  m.def("parse_expression", &parse_expression, py::arg("text"), py::arg("assignment") = std::map<std::string, double>{},
        py::arg("unit") = "mol%");
  m.def("find_compositions", &find_compositions, py::arg("text"), py::arg("allow_variables") = false);
  m.def("count_violations", &violations, py::arg("row_labels"), py::arg("col_labels"));
  m.def("generate_synthetic", &generate, py::arg("config"), py::arg("seed"));
  m.def("extract_oracle", &extract_oracle, py::arg("record"));
  m.def("label_distant", &label_distant, py::arg("table"), py::arg("kb"));
  m.def("evaluate", &evaluate, py::arg("predictions"), py::arg("gold"), py::arg("tolerance") = 1e-3);
  m.def("train", &train_model, py::arg("train"), py::arg("dev"), py::arg("config"), py::arg("seed"), py::arg("out"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_cli", &run_cli, py::arg("args"));
  py::class_<Extractor>(m, "Extractor")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def("extract", &Extractor::extract, py::arg("table"));
}
