#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "matcomp/table.hpp"

namespace matcomp {

/// List-based compound recognizer. Matching is longest-match-first and a match may not be
/// followed by a lowercase letter (so "Co" does not fire inside "Composition").
class CompoundLexicon {
 public:
  CompoundLexicon() = default;
  explicit CompoundLexicon(const std::vector<std::string>& compounds, bool include_elements = true);

  /// Common glass-forming oxides, halides and chalcogenides plus all element symbols.
  static const CompoundLexicon& builtin();
  /// Newline-delimited formulas; blank lines and '#' comments ignored. Elements are added.
  static CompoundLexicon from_file(const std::filesystem::path& path);

  bool contains(std::string_view formula) const { return entries_.count(std::string(formula)) > 0; }
  /// Length in bytes of the longest entry starting at `pos`, 0 if none.
  std::size_t match_at(std::string_view text, std::size_t pos) const;
  const std::set<std::string>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  void add(const std::string& formula);

  std::set<std::string> entries_;
  std::unordered_set<std::string> lookup_;
  std::size_t max_len_ = 0;
};

struct CompoundSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string compound;

  friend bool operator==(const CompoundSpan&, const CompoundSpan&) = default;
};

std::vector<CompoundSpan> lex_compounds(std::string_view text, const CompoundLexicon& lexicon);

using Assignment = std::map<std::string, double>;

/// Coefficient expression: numbers, one-letter variables, + - * and negation.
class Expr {
 public:
  enum class Kind { Number, Variable, Add, Sub, Mul, Negate };

  Expr() : Expr(number(1.0)) {}
  static Expr number(double value);
  static Expr variable(std::string name);
  static Expr binary(Kind op, Expr lhs, Expr rhs);
  static Expr negate(Expr child);

  Kind kind() const { return kind_; }
  double value() const { return value_; }
  const std::string& name() const { return name_; }

  /// Throws CompositionError(UnboundVariable) for a variable missing from `assignment`.
  double evaluate(const Assignment& assignment = {}) const;
  void collect_variables(std::set<std::string>& out) const;
  bool is_constant() const;
  std::string to_string() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Tag {};
  explicit Expr(Tag) {}

  Kind kind_ = Kind::Number;
  double value_ = 0.0;
  std::string name_;
  std::shared_ptr<const Expr> lhs_;
  std::shared_ptr<const Expr> rhs_;
};

enum class Pattern { PAT1, PAT2, PAT3 };
std::string to_string(Pattern p);

/// Either a leaf (coefficient, compound) or a bracketed group (coefficient, children).
struct CompositionNode {
  Expr coefficient;
  std::string compound;
  std::vector<CompositionNode> children;
  /// Group coefficient was written after the closing bracket, e.g. "(AgI+AgCl)70".
  bool trailing = false;

  bool is_leaf() const { return children.empty(); }
  static CompositionNode leaf(Expr coefficient, std::string compound);
  static CompositionNode group(Expr coefficient, std::vector<CompositionNode> children,
                               bool trailing);

  friend bool operator==(const CompositionNode&, const CompositionNode&) = default;
};

struct ParsedComposition {
  /// Implicit top-level group with coefficient 1; holds at least two items.
  std::vector<CompositionNode> items;
  Pattern pattern = Pattern::PAT1;
  /// Byte span of the match inside the parsed text.
  std::size_t begin = 0;
  std::size_t end = 0;

  std::set<std::string> variables() const;
  /// Canonical form used by fixtures, e.g. "PAT2 [30 [40 Bi2O3, 60 B2O3], 70 [1 AgI, 1 AgCl]]".
  std::string to_string() const;
};

struct NormalizedComposition {
  /// Constituent -> percent, in first-appearance order.
  std::vector<std::pair<std::string, double>> percentages;
  double raw_sum = 0.0;
  Unit unit = Unit::MolePercent;
  /// Top-level coefficients summed to about 1, i.e. the source gave fractions.
  bool from_fraction = false;

  std::optional<double> find(std::string_view constituent) const;
  double total() const;
};

class CompositionError : public std::runtime_error {
 public:
  enum class Kind { NoMatch, NegativeCoefficient, ZeroTotal, UnboundVariable };
  CompositionError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Leftmost, then longest, composition expression in `text`. Throws CompositionError(NoMatch).
ParsedComposition parse_composition(std::string_view text, const CompoundLexicon& lexicon,
                                    bool allow_variables = false);
std::optional<ParsedComposition> find_composition(std::string_view text,
                                                  const CompoundLexicon& lexicon,
                                                  bool allow_variables = false);
/// Every non-overlapping match, left to right.
std::vector<ParsedComposition> find_all_compositions(std::string_view text,
                                                     const CompoundLexicon& lexicon,
                                                     bool allow_variables = false);

double evaluate_expr(const Expr& e, const Assignment& assignment = {});

/// Scales each bracket level to 100 independently, multiplies shares down the tree and merges
/// repeated compounds. Zero shares are dropped.
NormalizedComposition normalize(const ParsedComposition& parsed, const Assignment& assignment = {},
                                Unit unit = Unit::MolePercent);

struct ResolvedUnit {
  Unit unit = Unit::MolePercent;
  /// A "fraction" keyword was seen before the unit keyword.
  bool fraction = false;
  enum class Source { Cell, Caption, Footer, Default } source = Source::Default;
};

/// Keyword unit of a free text, if any ("mol", "at.%" -> mole; "wt", "weight", "mass" -> weight).
std::optional<Unit> find_unit_keyword(std::string_view text);

/// Searches cells in growing Chebyshev rings around `cell`, then caption, then footer.
/// Defaults to mole percent.
ResolvedUnit resolve_unit(const Table& table, Coord cell);

/// Canonical decimal rendering (shortest round-trip form).
std::string format_number(double v);

}  // namespace matcomp
