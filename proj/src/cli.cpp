#include "matcomp/cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>

#include <CLI11.hpp>

#include "matcomp/composition.hpp"
#include "matcomp/dataset_io.hpp"
#include "matcomp/distant.hpp"
#include "matcomp/metrics.hpp"
#include "matcomp/pipeline.hpp"
#include "matcomp/synthetic.hpp"
#include "matcomp/training.hpp"

namespace matcomp {

namespace {

struct Options {
  std::string lexicon;
  // parse-expr
  std::string expression;
  std::vector<std::string> assignments;
  std::string unit = "mol%";
  // shared paths
  std::string model, in, out, config, data, dev, pred, gold, spec, kb, kb_out, json, log;
  std::string preset;
  std::uint64_t seed = 0;
  double tolerance = 1e-3;
  bool oracle = false;
};

CompoundLexicon lexicon_for(const Options& o) {
  return o.lexicon.empty() ? CompoundLexicon::builtin() : CompoundLexicon::from_file(o.lexicon);
}

int run_parse_expr(const Options& o, std::ostream& out) {
  const auto lexicon = lexicon_for(o);
  const auto parsed = parse_composition(o.expression, lexicon, true);
  out << parsed.to_string() << '\n';
  Assignment assignment;
  for (const auto& a : o.assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--assign expects name=value, got '" + a + "'");
    assignment[trim(a.substr(0, eq))] = std::stod(a.substr(eq + 1));
  }
  std::vector<std::string> unbound;
  for (const auto& v : parsed.variables())
    if (!assignment.count(v)) unbound.push_back(v);
  if (!unbound.empty()) {
    out << "variables:";
    for (const auto& v : unbound) out << ' ' << v;
    out << '\n';
    return 0;
  }
  const auto nc = normalize(parsed, assignment, unit_from_string(o.unit));
  out << '{';
  for (std::size_t k = 0; k < nc.percentages.size(); ++k) {
    out << (k ? ", " : "") << nc.percentages[k].first << ": " << format_number(nc.percentages[k].second);
  }
  out << "} " << to_string(nc.unit) << '\n';
  return 0;
}

int run_extract(const Options& o, std::ostream& err) {
  const auto lexicon = lexicon_for(o);
  const auto tables = load_dataset(o.in);
  std::vector<ExtractionRecord> records;
  if (o.oracle) {
    for (const auto& t : tables) {
      if (!t.annotation) throw std::invalid_argument("--oracle needs annotated tables; '" + t.table.id() + "' has none");
      auto r = extract_with_annotation(t.table, *t.annotation, lexicon);
      for (const auto& d : r.diagnostics) err << "table " << t.table.id() << ": " << d << '\n';
      records.push_back(r.to_record(t.table.id()));
    }
  } else {
    if (o.model.empty()) throw std::invalid_argument("extract needs --model (or --oracle)");
    const auto models = ExtractorModels::load(o.model);
    for (const auto& t : tables) {
      const auto prepared = prepare_table(t.table, lexicon, models.config.encoder);
      auto r = extract_table(prepared, models, lexicon);
      for (const auto& d : r.diagnostics) err << "table " << t.table.id() << ": " << d << '\n';
      records.push_back(r.to_record(t.table.id()));
    }
  }
  save_extractions(o.out, records);
  return 0;
}

int run_train(const Options& o, std::ostream& out, std::ostream& err) {
  KeyValueConfig kv = o.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(o.config);
  if (!o.preset.empty()) kv.set("preset", o.preset);
  const TrainConfig config = TrainConfig::from_config(kv);
  const auto lexicon = lexicon_for(o);
  auto data = load_dataset(o.data);
  std::vector<LabeledTable> train_set, dev_set;
  if (!o.dev.empty()) {
    train_set = std::move(data);
    dev_set = load_dataset(o.dev);
  } else {
    // Seeded hold-out split.
    std::vector<std::size_t> order(data.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    nn::Rng rng(o.seed);
    rng.shuffle(order);
    const auto n_dev = static_cast<std::size_t>(config.dev_fraction * static_cast<double>(data.size()));
    std::sort(order.begin() + static_cast<long>(n_dev), order.end());
    for (std::size_t k = 0; k < order.size(); ++k) (k < n_dev ? dev_set : train_set).push_back(data[order[k]]);
  }
  ExtractorModels models(ModelConfig::preset_named(config.preset), o.seed);
  std::ofstream log_file;
  std::ostream* log = &err;
  if (!o.log.empty()) {
    log_file.open(o.log);
    if (!log_file) throw std::runtime_error("cannot write log " + o.log);
    log = &log_file;
  }
  const auto report = train(models, train_set, dev_set, config, o.seed, lexicon, log);
  models.save(o.out);
  out << "best_epoch_gnn1: " << report.best_epoch_gnn1 << '\n'
      << "best_epoch_gnn2: " << report.best_epoch_gnn2 << '\n'
      << "pi_train_accuracy: " << format_number(report.pi_train_accuracy) << '\n';
  return 0;
}

int run_eval(const Options& o, std::ostream& out) {
  MetricOptions options;
  options.tolerance = o.tolerance;
  const auto report = compute_metrics(load_extractions(o.pred), load_gold(o.gold), options);
  out << report.to_text();
  if (!o.json.empty()) {
    std::ofstream j(o.json);
    if (!j) throw std::runtime_error("cannot write " + o.json);
    j << report.to_json().dump(2) << '\n';
  }
  return 0;
}

int run_gen_synthetic(const Options& o) {
  const auto config = GeneratorConfig::from_config(KeyValueConfig::load(o.spec));
  const auto corpus = generate_synthetic(config, o.seed);
  save_dataset(o.out, corpus.tables);
  if (!o.kb_out.empty()) save_kb(o.kb_out, corpus.kb);
  return 0;
}

int run_label_distant(const Options& o) {
  const auto lexicon = lexicon_for(o);
  const auto kb = load_kb(o.kb);
  auto tables = load_dataset(o.in);
  for (auto& t : tables) t.annotation = distant_label(t.table, kb, lexicon);
  save_dataset(o.out, tables);
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Composition extraction from materials-science tables", "matcomp"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--lexicon", o.lexicon, "Compound list, one formula per line (default: built-in)");

  auto* parse = app.add_subcommand("parse-expr", "Parse one composition expression");
  parse->add_option("expression", o.expression, "Expression text")->required();
  parse->add_option("--assign", o.assignments, "Variable value, name=value (repeatable)");
  parse->add_option("--unit", o.unit, "mol% or wt%")->check(CLI::IsMember({"mol%", "wt%"}));

  auto* extract = app.add_subcommand("extract", "Extract composition tuples from a dataset");
  extract->add_option("--model", o.model, "Checkpoint from train");
  extract->add_option("--in", o.in, "Input dataset (JSON lines)")->required();
  extract->add_option("--out", o.out, "Results file")->required();
  extract->add_flag("--oracle", o.oracle, "Use gold annotations instead of the networks");

  auto* tr = app.add_subcommand("train", "Train the extractor");
  tr->add_option("--config", o.config, "Training config (key: value)");
  tr->add_option("--data", o.data, "Annotated training dataset")->required();
  tr->add_option("--dev", o.dev, "Annotated dev dataset (default: split from --data)");
  tr->add_option("--seed", o.seed, "Random seed");
  tr->add_option("--out", o.out, "Checkpoint path")->required();
  tr->add_option("--preset", o.preset, "paper or desk")->check(CLI::IsMember({"paper", "desk"}));
  tr->add_option("--log", o.log, "Per-epoch log file (default: stderr)");

  auto* ev = app.add_subcommand("eval", "Score predictions against gold");
  ev->add_option("--pred", o.pred, "Results file")->required();
  ev->add_option("--gold", o.gold, "Gold results or annotated dataset")->required();
  ev->add_option("--tolerance", o.tolerance, "Percentage tolerance")->check(CLI::NonNegativeNumber);
  ev->add_option("--json", o.json, "Also write the report as JSON here");

  auto* gen = app.add_subcommand("gen-synthetic", "Generate an annotated synthetic corpus");
  gen->add_option("--spec", o.spec, "Generator config (key: value)")->required();
  gen->add_option("--seed", o.seed, "Random seed");
  gen->add_option("--out", o.out, "Output dataset")->required();
  gen->add_option("--kb-out", o.kb_out, "Also write the generated compositions as a KB");

  auto* distant = app.add_subcommand("label-distant", "Annotate tables from a composition KB");
  distant->add_option("--kb", o.kb, "KB file (JSON lines)")->required();
  distant->add_option("--in", o.in, "Input dataset")->required();
  distant->add_option("--out", o.out, "Annotated dataset")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*parse) return run_parse_expr(o, out);
    if (*extract) return run_extract(o, err);
    if (*tr) return run_train(o, out, err);
    if (*ev) return run_eval(o, out);
    if (*gen) return run_gen_synthetic(o);
    if (*distant) return run_label_distant(o);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace matcomp
