#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "matcomp/config.hpp"
#include "matcomp/distant.hpp"
#include "matcomp/table.hpp"

namespace matcomp {

/// Mixture over table styles for the synthetic corpus.
struct GeneratorConfig {
  int tables = 100;
  std::string id_prefix = "syn";
  // Relative weights of the four table types.
  double weight_scc = 1.0;
  double weight_mcc_ci = 1.0;
  double weight_mcc_pi = 1.0;
  double weight_nc = 1.0;
  double column_wise = 0.3;  // compositions run down columns
  double distractors = 0.6;  // property lines next to the composition lines
  double missing_id = 0.15;
  double weight_unit = 0.3;
  double fraction = 0.15;  // MCC-CI amounts written as fractions of 1
  double dopant = 0.15;    // extra constituent pushing the raw sum above 100
  double empty_cell = 0.1; // absent constituent written as a dash
  int min_materials = 2;
  int max_materials = 6;
  int min_constituents = 2;
  int max_constituents = 5;

  static GeneratorConfig from_config(const KeyValueConfig& kv);
  static const std::set<std::string>& keys();
  /// Throws std::invalid_argument on negative weights or inverted ranges.
  void validate() const;
};

struct SyntheticCorpus {
  std::vector<LabeledTable> tables;
  /// Compositions of every generated material, keyed by table paper id.
  std::vector<KbEntry> kb;
};

/// Same config and seed give the same corpus.
SyntheticCorpus generate_synthetic(const GeneratorConfig& config, std::uint64_t seed);

}  // namespace matcomp
