#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "matcomp/dataset_io.hpp"

namespace matcomp {

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long true_positives = 0;
  long predicted = 0;
  long gold = 0;

  /// An empty denominator scores 1 when the other side is empty too, else 0.
  static PrfScore from_counts(long tp, long predicted, long gold);
};

struct TypeBreakdown {
  long tables = 0;
  double tt_accuracy = 0.0;
  PrfScore tl;
  PrfScore matl;
};

struct MetricReport {
  long tables = 0;
  double tt_accuracy = 0.0;
  PrfScore id;         // micro over tables
  double id_macro_f1 = 0.0;
  PrfScore tl;
  PrfScore matl;
  long cv_total = 0;
  /// Keyed by the gold table type.
  std::map<TableType, TypeBreakdown> by_type;

  /// Flat "key: value" lines.
  std::string to_text() const;
  nlohmann::json to_json() const;
};

struct MetricOptions {
  double tolerance = 1e-3;
};

/// Greedy one-to-one count of tuples agreeing on ID, constituent, unit and percentage.
long count_tuple_matches(const std::vector<CompositionTuple>& predicted, const std::vector<CompositionTuple>& gold,
                         double tolerance);

/// Throws std::invalid_argument when the two sides do not cover the same table ids.
MetricReport compute_metrics(const std::vector<ExtractionRecord>& predictions,
                             const std::vector<ExtractionRecord>& golds, const MetricOptions& options = {});

}  // namespace matcomp
