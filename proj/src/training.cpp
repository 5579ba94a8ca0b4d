#include "matcomp/training.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

#include "matcomp/metrics.hpp"

namespace matcomp {

using nn::Matrix;
using nn::Tape;
using nn::Var;

namespace {

// Penalty over line probabilities laid out table by table, rows before columns. Divided by the
// number of lines so it shares the per-line scale of the classification terms.
Var line_mean_penalty(Var probs, const std::vector<std::pair<int, int>>& dims, double lambda, ConstraintMask mask) {
  std::vector<Var> terms;
  int off = 0;
  for (const auto& [r, c] : dims) {
    if (r + c == 0) continue;
    std::vector<int> rows(r), cols(c);
    std::iota(rows.begin(), rows.end(), off);
    std::iota(cols.begin(), cols.end(), off + r);
    terms.push_back(penalty_loss(gather_rows(probs, rows), gather_rows(probs, cols), lambda, mask));
    off += r + c;
  }
  return scale(sum(nn::concat_rows(terms)), 1.0 / static_cast<double>(off));
}

}  // namespace

Var gnn1_loss(Var table_logits, Var id_logits, const Gnn1Gold& gold, const LossConfig& config) {
  Tape& tape = *table_logits.tape;
  Var loss = bce_with_logits(table_logits, gold.is_scc);
  std::vector<double> w;
  for (double t : gold.is_id) w.push_back(t > 0.5 ? config.id_class_weights[1] : config.id_class_weights[0]);
  loss = add(loss, scale(bce_with_logits(id_logits, gold.is_id, w), config.id_weight));
  if (config.lambda1 > 0 && !gold.dims.empty()) {
    Var probs = nn::concat_cols({tape.constant(Matrix(id_logits.rows(), 3)), sigmoid(id_logits)});
    loss = add(loss, line_mean_penalty(probs, gold.dims, config.lambda1, ConstraintMask::unique_id_only()));
  }
  return loss;
}

Var gnn2_loss(Var line_logits, Var edge_logits, const Gnn2Gold& gold, const LossConfig& config) {
  std::vector<double> cw(config.class_weights.begin(), config.class_weights.end());
  Var loss = cross_entropy(line_logits, gold.line_labels, cw);
  if (edge_logits.tape && !gold.edge_targets.empty()) {
    loss = add(loss, scale(bce_with_logits(edge_logits, gold.edge_targets), config.edge_weight));
  }
  if (config.lambda2 > 0 && !gold.dims.empty()) {
    loss = add(loss, line_mean_penalty(softmax_rows(line_logits), gold.dims, config.lambda2, ConstraintMask::all()));
  }
  return loss;
}

EdgeCandidates edge_candidates(const TableAnnotation& annotation, int rows, int cols) {
  EdgeCandidates out;
  const LabelingResult gold = labeling_from_annotation(annotation);
  for (const auto& c : gold.intersections()) {
    auto link = gold.edge_links.find(c);
    if (link == gold.edge_links.end()) continue;
    auto push = [&](Coord t) {
      out.source.push_back(c);
      out.target.push_back(t);
      out.is_gold.push_back(t == link->second ? 1.0 : 0.0);
    };
    // Same order as label_table: row mates, then column mates.
    for (int j = 0; j < cols; ++j)
      if (j != c.col) push({c.row, j});
    for (int i = 0; i < rows; ++i)
      if (i != c.row) push({i, c.col});
  }
  return out;
}

std::array<double, 4> inverse_frequency_weights(const std::vector<LabeledTable>& tables) {
  std::array<double, 4> count{};
  for (const auto& t : tables) {
    if (!t.annotation) continue;
    for (auto l : t.annotation->row_labels) count[static_cast<int>(l)] += 1;
    for (auto l : t.annotation->col_labels) count[static_cast<int>(l)] += 1;
  }
  std::array<double, 4> w{};
  double total = 0.0;
  int present = 0;
  for (int k = 0; k < 4; ++k) {
    if (count[k] > 0) {
      w[k] = 1.0 / count[k];
      total += w[k];
      ++present;
    }
  }
  if (present == 0) return {1, 1, 1, 1};
  for (auto& x : w) x *= present / total;
  return w;
}

TrainConfig TrainConfig::for_preset(const std::string& preset) {
  TrainConfig c;
  if (preset == "paper") {
    c.preset = "paper";
    c.lr_encoder_gnn1 = 1e-5;
    c.lr_encoder_gnn2 = 2e-5;
    c.lr_head = 3e-4;
  } else if (preset != "desk") {
    throw std::invalid_argument("unknown preset '" + preset + "' (expected paper or desk)");
  }
  return c;
}

const std::set<std::string>& TrainConfig::keys() {
  static const std::set<std::string> k = {"preset",       "epochs_gnn1", "epochs_gnn2", "batch_size",
                                          "lr_encoder_gnn1", "lr_encoder_gnn2", "lr_head", "warmup_ratio",
                                          "id_weight",    "edge_weight", "lambda1",     "lambda2",
                                          "pi_l2",        "dev_fraction"};
  return k;
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
  kv.reject_unknown(keys());
  TrainConfig c = for_preset(kv.get_string("preset", "desk"));
  c.epochs_gnn1 = static_cast<int>(kv.get_int("epochs_gnn1", c.epochs_gnn1));
  c.epochs_gnn2 = static_cast<int>(kv.get_int("epochs_gnn2", c.epochs_gnn2));
  c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
  c.lr_encoder_gnn1 = kv.get_double("lr_encoder_gnn1", c.lr_encoder_gnn1);
  c.lr_encoder_gnn2 = kv.get_double("lr_encoder_gnn2", c.lr_encoder_gnn2);
  c.lr_head = kv.get_double("lr_head", c.lr_head);
  c.warmup_ratio = kv.get_double("warmup_ratio", c.warmup_ratio);
  c.id_weight = kv.get_double("id_weight", c.id_weight);
  c.edge_weight = kv.get_double("edge_weight", c.edge_weight);
  c.lambda1 = kv.get_double("lambda1", c.lambda1);
  c.lambda2 = kv.get_double("lambda2", c.lambda2);
  c.pi_l2 = kv.get_double("pi_l2", c.pi_l2);
  c.dev_fraction = kv.get_double("dev_fraction", c.dev_fraction);
  if (c.batch_size < 1 || c.epochs_gnn1 < 0 || c.epochs_gnn2 < 0) {
    throw ConfigError("batch_size must be >= 1 and epoch counts >= 0");
  }
  for (double w : {c.id_weight, c.edge_weight}) {
    if (w <= 0) throw ConfigError("loss weights must be > 0");
  }
  if (c.lambda1 < 0 || c.lambda2 < 0) throw ConfigError("penalty weights must be >= 0");
  return c;
}

PiClassifier fit_pi_classifier(const std::vector<PiFeatures>& features, const std::vector<int>& is_partial,
                               double l2) {
  if (features.size() != is_partial.size()) throw std::invalid_argument("fit_pi_classifier: size mismatch");
  PiClassifier pi;
  const int n = static_cast<int>(features.size());
  if (n == 0) return pi;
  for (int k = 0; k < 5; ++k) {
    double m = 0.0, v = 0.0;
    for (const auto& f : features) m += f.values()[k];
    m /= n;
    for (const auto& f : features) v += (f.values()[k] - m) * (f.values()[k] - m);
    v = std::sqrt(v / n);
    pi.mean[k] = m;
    pi.scale[k] = v > 1e-12 ? v : 1.0;
  }
  Eigen::MatrixXd X(n, 6);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const auto v = features[i].values();
    for (int k = 0; k < 5; ++k) X(i, k) = (v[k] - pi.mean[k]) / pi.scale[k];
    X(i, 5) = 1.0;
    y[i] = is_partial[i] ? 1.0 : 0.0;
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(6);
  Eigen::MatrixXd reg = l2 * Eigen::MatrixXd::Identity(6, 6);
  reg(5, 5) = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::VectorXd p(n), s(n);
    for (int i = 0; i < n; ++i) {
      p[i] = nn::sigmoid(X.row(i).dot(w));
      s[i] = std::max(p[i] * (1 - p[i]), 1e-12);
    }
    Eigen::VectorXd g = X.transpose() * (p - y) + reg * w;
    Eigen::MatrixXd H = X.transpose() * s.asDiagonal() * X + reg;
    H.diagonal().array() += 1e-9;
    Eigen::VectorXd step = H.ldlt().solve(g);
    w -= step;
    if (step.norm() < 1e-10) break;
  }
  for (int k = 0; k < 5; ++k) pi.weights[k] = w[k];
  pi.bias = w[5];
  return pi;
}

namespace {

using Snapshot = std::vector<Matrix>;

Snapshot snapshot(const nn::ParamStore& store) {
  Snapshot s;
  for (const auto* p : store.all()) s.push_back(p->value);
  return s;
}

void restore(nn::ParamStore& store, const Snapshot& s) {
  auto params = store.all();
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = s[k];
}

std::optional<LineRef> gold_id_line(const TableAnnotation& a) {
  for (std::size_t i = 0; i < a.row_labels.size(); ++i)
    if (a.row_labels[i] == RowColLabel::Id) return LineRef{LineRef::Axis::Row, static_cast<int>(i)};
  for (std::size_t j = 0; j < a.col_labels.size(); ++j)
    if (a.col_labels[j] == RowColLabel::Id) return LineRef{LineRef::Axis::Col, static_cast<int>(j)};
  return std::nullopt;
}

struct Example {
  PreparedTable prepared;
  const TableAnnotation* annotation;
};

std::vector<Example> prepare_all(const std::vector<LabeledTable>& tables, const CompoundLexicon& lexicon,
                                 const nn::CellEncoderConfig& encoder) {
  std::vector<Example> out;
  for (const auto& t : tables) {
    if (!t.annotation) throw std::invalid_argument("training table '" + t.table.id() + "' has no annotation");
    out.push_back({prepare_table(t.table, lexicon, encoder), &*t.annotation});
  }
  return out;
}

template <typename StepFn>
std::vector<EpochLog> run_epochs(GnnModel& model, const std::vector<const Example*>& train, int epochs, int batch_size,
                                 double warmup, const std::vector<double>& lr, nn::Rng& rng, StepFn&& loss_fn,
                                 const std::function<double()>& dev_score, int& best_epoch, const char* name,
                                 std::ostream* log) {
  std::vector<EpochLog> logs;
  if (train.empty() || epochs == 0) return logs;
  const long per_epoch = (static_cast<long>(train.size()) + batch_size - 1) / batch_size;
  nn::TriangularSchedule schedule{per_epoch * epochs, warmup};
  nn::Adam adam;
  auto params = model.params().all();
  model.params().zero_grad();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  double best = -1.0;
  Snapshot best_params;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch_size) {
      std::vector<const Example*> batch;
      for (std::size_t k = b; k < std::min(order.size(), b + batch_size); ++k) batch.push_back(train[order[k]]);
      Tape tape;
      Var loss = loss_fn(tape, batch);
      total += loss.scalar() * static_cast<double>(batch.size());
      tape.backward(loss);
      const double f = schedule.factor(adam.steps() + 1);
      adam.step(params, {lr[0] * f, lr[1] * f});
      model.params().zero_grad();
    }
    EpochLog e{epoch, adam.steps(), total / static_cast<double>(train.size()), dev_score()};
    logs.push_back(e);
    if (log) {
      *log << name << " epoch " << epoch << " steps " << e.steps << " loss " << format_number(e.train_loss)
           << " dev " << format_number(e.dev_score) << '\n';
    }
    if (e.dev_score > best) {
      best = e.dev_score;
      best_epoch = epoch;
      best_params = snapshot(model.params());
    }
  }
  restore(model.params(), best_params);
  return logs;
}

std::vector<const PreparedTable*> prepared_of(const std::vector<const Example*>& batch) {
  std::vector<const PreparedTable*> out;
  for (const auto* e : batch) out.push_back(&e->prepared);
  return out;
}

Var gnn1_batch_loss(const GnnModel& model, Tape& tape, const std::vector<const Example*>& batch,
                    const LossConfig& config, nn::Rng& rng) {
  auto tables = prepared_of(batch);
  BatchLayout layout(tables, model.variant());
  Var h = model.encode(tape, tables, layout);
  Var table_logits = model.table_logits(tape, h, layout, true, &rng);
  Var id_logits = model.line_logits(tape, h, layout, true, &rng);
  Gnn1Gold gold;
  for (const auto* e : batch) {
    gold.is_scc.push_back(e->annotation->table_type == TableType::SCC ? 1.0 : 0.0);
    for (auto l : e->annotation->row_labels) gold.is_id.push_back(l == RowColLabel::Id ? 1.0 : 0.0);
    for (auto l : e->annotation->col_labels) gold.is_id.push_back(l == RowColLabel::Id ? 1.0 : 0.0);
    gold.dims.emplace_back(e->prepared.rows(), e->prepared.cols());
  }
  return gnn1_loss(table_logits, id_logits, gold, config);
}

Var gnn2_batch_loss(const GnnModel& model, Tape& tape, const std::vector<const Example*>& batch,
                    const LossConfig& config, nn::Rng& rng) {
  auto tables = prepared_of(batch);
  BatchLayout layout(tables, model.variant());
  Var h = model.encode(tape, tables, layout);
  Var line_logits = model.line_logits(tape, h, layout, true, &rng);
  Gnn2Gold gold;
  std::vector<std::pair<int, int>> pairs;
  for (int t = 0; t < static_cast<int>(batch.size()); ++t) {
    const auto& a = *batch[t]->annotation;
    for (auto l : a.row_labels) gold.line_labels.push_back(static_cast<int>(l));
    for (auto l : a.col_labels) gold.line_labels.push_back(static_cast<int>(l));
    gold.dims.emplace_back(layout.rows(t), layout.cols(t));
    auto cand = edge_candidates(a, layout.rows(t), layout.cols(t));
    for (std::size_t k = 0; k < cand.source.size(); ++k) {
      pairs.emplace_back(layout.cell(t, cand.source[k].row, cand.source[k].col),
                         layout.cell(t, cand.target[k].row, cand.target[k].col));
      gold.edge_targets.push_back(cand.is_gold[k]);
    }
  }
  Var edge_logits;
  if (!pairs.empty()) edge_logits = model.edge_logits(tape, h, pairs, true, &rng);
  return gnn2_loss(line_logits, edge_logits, gold, config);
}

// Dev score of GNN2: material-level F1 on non-SCC tables, routing each table to the extractor of
// its gold MCC type once the predicted labeling is not NC.
double gnn2_dev_score(const GnnModel& model, const std::vector<const Example*>& dev, const CompoundLexicon& lexicon) {
  std::vector<ExtractionRecord> pred, gold;
  for (const auto* e : dev) {
    const Table& table = e->prepared.table;
    const auto& a = *e->annotation;
    ExtractionRecord g{table.id(), a.table_type, a.gold_tuples, std::nullopt, std::nullopt};
    ExtractionRecord p{table.id(), TableType::NC, {}, std::nullopt, std::nullopt};
    auto labeling = label_table(e->prepared, model);
    if (!labeling.is_nc()) {
      try {
        if (a.table_type == TableType::MCC_PI) {
          p.table_type = TableType::MCC_PI;
          p.tuples = extract_mcc_pi(labeling, table, lexicon);
        } else {
          p.table_type = TableType::MCC_CI;
          p.tuples = extract_mcc_ci(labeling, table, lexicon);
        }
      } catch (const PartialInfoError&) {
        p.table_type = TableType::NC;
        p.tuples.clear();
      }
    }
    pred.push_back(std::move(p));
    gold.push_back(std::move(g));
  }
  return compute_metrics(pred, gold).matl.f1;
}

double gnn1_dev_score(const GnnModel& model, const std::vector<const Example*>& dev) {
  if (dev.empty()) return 0.0;
  double ok = 0.0;
  for (const auto* e : dev) {
    auto p = predict_scc(e->prepared, model);
    const bool scc = e->annotation->table_type == TableType::SCC;
    ok += 0.5 * ((p.is_scc > 0.5) == scc);
    ok += 0.5 * (p.id_line == gold_id_line(*e->annotation));
  }
  return ok / static_cast<double>(dev.size());
}

}  // namespace

TrainingReport train(ExtractorModels& models, const std::vector<LabeledTable>& train_set,
                     const std::vector<LabeledTable>& dev_set, const TrainConfig& config, std::uint64_t seed,
                     const CompoundLexicon& lexicon, std::ostream* log) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const auto& encoder = models.config.encoder;
  const auto train_ex = prepare_all(train_set, lexicon, encoder);
  const auto dev_ex = prepare_all(dev_set, lexicon, encoder);

  LossConfig loss;
  loss.id_weight = config.id_weight;
  loss.edge_weight = config.edge_weight;
  loss.lambda1 = config.lambda1;
  loss.lambda2 = config.lambda2;
  {
    double pos = 0.0, all = 0.0;
    for (const auto& e : train_ex) {
      for (auto l : e.annotation->row_labels) pos += l == RowColLabel::Id, all += 1;
      for (auto l : e.annotation->col_labels) pos += l == RowColLabel::Id, all += 1;
    }
    if (pos > 0 && pos < all) loss.id_class_weights = {0.5 * all / (all - pos), 0.5 * all / pos};
  }

  nn::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  TrainingReport report;

  std::vector<const Example*> all1, dev1;
  for (const auto& e : train_ex) all1.push_back(&e);
  for (const auto& e : dev_ex) dev1.push_back(&e);
  report.gnn1 = run_epochs(
      *models.scc, all1, config.epochs_gnn1, config.batch_size, config.warmup_ratio,
      {config.lr_encoder_gnn1, config.lr_head}, rng,
      [&](Tape& tape, const std::vector<const Example*>& b) { return gnn1_batch_loss(*models.scc, tape, b, loss, rng); },
      [&] { return gnn1_dev_score(*models.scc, dev1.empty() ? all1 : dev1); }, report.best_epoch_gnn1, "gnn1", log);

  std::vector<const Example*> train2, dev2;
  std::vector<LabeledTable> weight_source;
  for (const auto& e : train_ex) {
    if (e.annotation->table_type == TableType::SCC) continue;
    train2.push_back(&e);
    weight_source.push_back({e.prepared.table, *e.annotation});
  }
  for (const auto& e : dev_ex)
    if (e.annotation->table_type != TableType::SCC) dev2.push_back(&e);
  loss.class_weights = inverse_frequency_weights(weight_source);
  report.gnn2 = run_epochs(
      *models.mcc, train2, config.epochs_gnn2, config.batch_size, config.warmup_ratio,
      {config.lr_encoder_gnn2, config.lr_head}, rng,
      [&](Tape& tape, const std::vector<const Example*>& b) { return gnn2_batch_loss(*models.mcc, tape, b, loss, rng); },
      [&] { return gnn2_dev_score(*models.mcc, dev2.empty() ? train2 : dev2, lexicon); }, report.best_epoch_gnn2,
      "gnn2", log);

  std::vector<PiFeatures> features;
  std::vector<int> targets;
  for (const auto* e : train2) {
    const auto type = e->annotation->table_type;
    if (type != TableType::MCC_CI && type != TableType::MCC_PI) continue;
    auto labeling = label_table(e->prepared, *models.mcc);
    if (labeling.is_nc()) continue;
    features.push_back(compute_pi_features(labeling, e->prepared.table, lexicon));
    targets.push_back(type == TableType::MCC_PI);
  }
  models.pi = fit_pi_classifier(features, targets, config.pi_l2);
  long correct = 0;
  for (std::size_t k = 0; k < features.size(); ++k) correct += models.pi.is_partial(features[k]) == (targets[k] == 1);
  report.pi_samples = static_cast<long>(features.size());
  report.pi_train_accuracy = features.empty() ? 0.0 : static_cast<double>(correct) / features.size();
  if (log) {
    *log << "pi samples " << report.pi_samples << " train accuracy " << format_number(report.pi_train_accuracy)
         << '\n';
  }
  return report;
}

}  // namespace matcomp
