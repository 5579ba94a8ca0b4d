#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "matcomp/composition.hpp"
#include "matcomp/table.hpp"

namespace matcomp {

/// One composition record of an external composition database.
struct KbEntry {
  std::string paper_id;
  std::vector<std::pair<std::string, double>> composition;
  Unit unit = Unit::MolePercent;

  friend bool operator==(const KbEntry&, const KbEntry&) = default;
};

/// Keeps the order of the composition entries.
nlohmann::ordered_json to_json(const KbEntry& entry);
KbEntry kb_entry_from_json(const nlohmann::ordered_json& j);
/// One JSON object per line: {"paper_id", "composition": {formula: percent}, "unit"}.
std::vector<KbEntry> read_kb(std::istream& in);
std::vector<KbEntry> load_kb(const std::filesystem::path& path);
void write_kb(std::ostream& out, const std::vector<KbEntry>& entries);
void save_kb(const std::filesystem::path& path, const std::vector<KbEntry>& entries);

struct DistantOptions {
  /// Absolute tolerance on percentages after scaling.
  double tolerance = 1e-3;
  /// A table line may list raw amounts whose sum is up to this factor of 100 (dopants).
  double max_excess = 2.0;
};

/// Weak annotation of a table from the KB entries of its paper. Tried in order:
/// a KB composition spread over cells of one line gives MCC_CI, a cell holding a KB composition
/// gives SCC, a variable-bearing expression in the surrounding text whose variables or compounds
/// appear in the table gives MCC_PI, else NC. ID lines are never marked.
TableAnnotation distant_label(const Table& table, const std::vector<KbEntry>& kb, const CompoundLexicon& lexicon,
                              const DistantOptions& options = {});

}  // namespace matcomp
