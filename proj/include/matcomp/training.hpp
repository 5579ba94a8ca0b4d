#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "matcomp/config.hpp"
#include "matcomp/constraints.hpp"
#include "matcomp/pipeline.hpp"

namespace matcomp {

struct LossConfig {
  /// 4-way line label weights for GNN2 (inverse frequency).
  std::array<double, 4> class_weights{1, 1, 1, 1};
  /// Negative/positive weights of the ID line BCE in GNN1.
  std::array<double, 2> id_class_weights{1, 1};
  double id_weight = 1.0;
  double edge_weight = 1.0;
  double lambda1 = 50.0;
  double lambda2 = 30.0;
};

/// Gold targets of one GNN1 batch. Line order follows BatchLayout::line_nodes().
struct Gnn1Gold {
  std::vector<double> is_scc;            // per table
  std::vector<double> is_id;             // per line
  std::vector<std::pair<int, int>> dims; // rows, cols per table
};

/// BCE(SCC) + id_weight * weighted BCE(ID line) + lambda1 * the at-most-one-ID-line penalty on
/// sigmoid ID probabilities, summed over tables and divided by the number of lines.
nn::Var gnn1_loss(nn::Var table_logits, nn::Var id_logits, const Gnn1Gold& gold, const LossConfig& config);

struct Gnn2Gold {
  std::vector<int> line_labels;          // per line, RowColLabel codes
  std::vector<std::pair<int, int>> dims;
  std::vector<double> edge_targets;      // per candidate edge
};

/// Class-weighted CE over lines + edge_weight * BCE over candidate edges + lambda2 * the full
/// penalty on softmax line probabilities, summed over tables and divided by the number of lines. `edge_logits` may be a null Var
/// when the batch has no candidate edges.
nn::Var gnn2_loss(nn::Var line_logits, nn::Var edge_logits, const Gnn2Gold& gold, const LossConfig& config);

/// Candidate edges of one table: every composition x constituent cell paired with the other
/// cells of its row and column.
struct EdgeCandidates {
  std::vector<Coord> source;
  std::vector<Coord> target;
  std::vector<double> is_gold;
};
EdgeCandidates edge_candidates(const TableAnnotation& annotation, int rows, int cols);

/// Inverse-frequency weights, scaled to average 1 over classes present. Absent classes get 0.
std::array<double, 4> inverse_frequency_weights(const std::vector<LabeledTable>& tables);

struct TrainConfig {
  std::string preset = "desk";
  int epochs_gnn1 = 12;
  int epochs_gnn2 = 20;
  int batch_size = 8;
  // Peak learning rates: cell encoder of each GNN, everything else.
  double lr_encoder_gnn1 = 1e-2;
  double lr_encoder_gnn2 = 1e-2;
  double lr_head = 3e-3;
  double warmup_ratio = 0.1;
  double id_weight = 1.0;
  double edge_weight = 1.0;
  double lambda1 = 50.0;
  double lambda2 = 30.0;
  double pi_l2 = 1e-3;
  /// Fraction of the input used as dev split when no dev file is given.
  double dev_fraction = 0.15;

  static TrainConfig for_preset(const std::string& preset);
  /// Starts from the preset named by the "preset" key, then applies the other keys.
  static TrainConfig from_config(const KeyValueConfig& kv);
  static const std::set<std::string>& keys();
};

struct EpochLog {
  int epoch = 0;
  long steps = 0;
  double train_loss = 0.0;
  double dev_score = 0.0;
};

struct TrainingReport {
  std::vector<EpochLog> gnn1;
  std::vector<EpochLog> gnn2;
  int best_epoch_gnn1 = -1;
  int best_epoch_gnn2 = -1;
  double pi_train_accuracy = 0.0;
  long pi_samples = 0;
};

/// Trains GNN1, then GNN2 on non-SCC tables, then the PI classifier on GNN2 labelings of the
/// training MCC tables. Each GNN keeps the parameters of its best dev epoch. Throws
/// std::invalid_argument on an empty or unannotated training set.
TrainingReport train(ExtractorModels& models, const std::vector<LabeledTable>& train_set,
                     const std::vector<LabeledTable>& dev_set, const TrainConfig& config, std::uint64_t seed,
                     const CompoundLexicon& lexicon, std::ostream* log = nullptr);

/// L2-regularized logistic regression by Newton iterations on standardized features.
PiClassifier fit_pi_classifier(const std::vector<PiFeatures>& features, const std::vector<int>& is_partial,
                               double l2);

}  // namespace matcomp
