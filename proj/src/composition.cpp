#include "matcomp/composition.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>

namespace matcomp {

// ---------------------------------------------------------------------------------------------
// Lexicon

namespace {

constexpr std::array<const char*, 118> kElements = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
    "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
    "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
    "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db",
    "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

const std::vector<std::string>& builtin_compounds() {
  static const std::vector<std::string> list = {
      "SiO2",  "B2O3",  "P2O5",  "Al2O3", "Na2O",  "K2O",   "Li2O",  "Rb2O",  "Cs2O",  "CaO",
      "MgO",   "BaO",   "SrO",   "ZnO",   "PbO",   "TeO2",  "GeO2",  "TiO2",  "ZrO2",  "Bi2O3",
      "Fe2O3", "FeO",   "MoO3",  "WO3",   "V2O5",  "Nb2O5", "Ta2O5", "La2O3", "Y2O3",  "Er2O3",
      "Yb2O3", "Nd2O3", "Sm2O3", "Eu2O3", "Gd2O3", "CeO2",  "Ce2O3", "Ga2O3", "In2O3", "Sb2O3",
      "As2O3", "SnO2",  "SnO",   "CuO",   "Cu2O",  "Ag2O",  "MnO",   "MnO2",  "Cr2O3", "CoO",
      "Co3O4", "NiO",   "CdO",   "Tl2O",  "SO3",   "HfO2",  "Pr2O3", "Tb2O3", "Dy2O3", "Ho2O3",
      "Tm2O3", "Lu2O3", "AgI",   "AgCl",  "AgBr",  "NaCl",  "KCl",   "LiCl",  "LiBr",  "LiI",
      "CsCl",  "CuI",   "LiF",   "NaF",   "KF",    "CaF2",  "BaF2",  "MgF2",  "SrF2",  "AlF3",
      "PbF2",  "ZrF4",  "LaF3",  "YF3",   "ZnF2",  "GeS2",  "Ga2S3", "As2S3", "Sb2S3", "GeBr4",
      "GeSe2", "La2S3", "Li2S",  "Na2S",  "B2S3",  "P2S5",  "SiS2",  "As2Se3", "Li2CO3", "Na2CO3",
      "H2O",   "NaPO3", "ErF3",  "YbF3",  "Er2S3", "GeSe4", "Sb2Se3", "TeO3", "PbCl2", "PbBr2",
      "Ag2S",  "CdF2",  "Ga2Se3", "Ag2MoO4", "Ag3PO4", "GeSe3", "Li3PO4", "LiPO3", "Ag2Se"};
  return list;
}

bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_alpha(char c) { return is_lower(c) || is_upper(c); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return is_alpha(c) || is_digit(c); }

}  // namespace

CompoundLexicon::CompoundLexicon(const std::vector<std::string>& compounds, bool include_elements) {
  for (const auto& c : compounds) add(c);
  if (include_elements)
    for (const char* e : kElements) add(e);
}

void CompoundLexicon::add(const std::string& formula) {
  if (formula.empty()) return;
  entries_.insert(formula);
  lookup_.insert(formula);
  max_len_ = std::max(max_len_, formula.size());
}

const CompoundLexicon& CompoundLexicon::builtin() {
  static const CompoundLexicon lexicon(builtin_compounds(), true);
  return lexicon;
}

CompoundLexicon CompoundLexicon::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon '" + path.string() + "'");
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    entries.push_back(t);
  }
  return CompoundLexicon(entries, true);
}

std::size_t CompoundLexicon::match_at(std::string_view text, std::size_t pos) const {
  if (pos >= text.size() || !is_upper(text[pos])) return 0;
  const std::size_t limit = std::min(max_len_, text.size() - pos);
  std::string key;
  for (std::size_t len = limit; len > 0; --len) {
    const std::size_t end = pos + len;
    if (end < text.size() && is_lower(text[end])) continue;
    key.assign(text.substr(pos, len));
    if (lookup_.count(key)) return len;
  }
  return 0;
}

std::vector<CompoundSpan> lex_compounds(std::string_view text, const CompoundLexicon& lexicon) {
  std::vector<CompoundSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    // A compound never starts in the middle of a word ("Tin" is not "Ti" + "n").
    const bool word_start = i == 0 || !is_alpha(text[i - 1]) || is_upper(text[i]);
    const std::size_t len = word_start ? lexicon.match_at(text, i) : 0;
    if (len > 0) {
      out.push_back({i, i + len, std::string(text.substr(i, len))});
      i += len;
    } else {
      ++i;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Expressions

Expr Expr::number(double value) {
  Expr e(Tag{});
  e.kind_ = Kind::Number;
  e.value_ = value;
  return e;
}

Expr Expr::variable(std::string name) {
  Expr e = number(0.0);
  e.kind_ = Kind::Variable;
  e.name_ = std::move(name);
  return e;
}

Expr Expr::binary(Kind op, Expr lhs, Expr rhs) {
  if (op != Kind::Add && op != Kind::Sub && op != Kind::Mul) {
    throw std::invalid_argument("Expr::binary: not a binary operator");
  }
  Expr e = number(0.0);
  e.kind_ = op;
  e.lhs_ = std::make_shared<const Expr>(std::move(lhs));
  e.rhs_ = std::make_shared<const Expr>(std::move(rhs));
  return e;
}

Expr Expr::negate(Expr child) {
  Expr e = number(0.0);
  e.kind_ = Kind::Negate;
  e.lhs_ = std::make_shared<const Expr>(std::move(child));
  return e;
}

double Expr::evaluate(const Assignment& assignment) const {
  switch (kind_) {
    case Kind::Number: return value_;
    case Kind::Variable: {
      auto it = assignment.find(name_);
      if (it == assignment.end()) {
        throw CompositionError(CompositionError::Kind::UnboundVariable,
                               "unbound variable '" + name_ + "'");
      }
      return it->second;
    }
    case Kind::Add: return lhs_->evaluate(assignment) + rhs_->evaluate(assignment);
    case Kind::Sub: return lhs_->evaluate(assignment) - rhs_->evaluate(assignment);
    case Kind::Mul: return lhs_->evaluate(assignment) * rhs_->evaluate(assignment);
    case Kind::Negate: return -lhs_->evaluate(assignment);
  }
  return 0.0;
}

void Expr::collect_variables(std::set<std::string>& out) const {
  if (kind_ == Kind::Variable) out.insert(name_);
  if (lhs_) lhs_->collect_variables(out);
  if (rhs_) rhs_->collect_variables(out);
}

bool Expr::is_constant() const {
  std::set<std::string> vars;
  collect_variables(vars);
  return vars.empty();
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string Expr::to_string() const {
  switch (kind_) {
    case Kind::Number: return format_number(value_);
    case Kind::Variable: return name_;
    case Kind::Add: return "(" + lhs_->to_string() + "+" + rhs_->to_string() + ")";
    case Kind::Sub: return "(" + lhs_->to_string() + "-" + rhs_->to_string() + ")";
    case Kind::Mul: return "(" + lhs_->to_string() + "*" + rhs_->to_string() + ")";
    case Kind::Negate: return "(-" + lhs_->to_string() + ")";
  }
  return {};
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case Expr::Kind::Number: return a.value_ == b.value_;
    case Expr::Kind::Variable: return a.name_ == b.name_;
    case Expr::Kind::Negate: return *a.lhs_ == *b.lhs_;
    default: return *a.lhs_ == *b.lhs_ && *a.rhs_ == *b.rhs_;
  }
}

double evaluate_expr(const Expr& e, const Assignment& assignment) { return e.evaluate(assignment); }

std::string to_string(Pattern p) {
  switch (p) {
    case Pattern::PAT1: return "PAT1";
    case Pattern::PAT2: return "PAT2";
    case Pattern::PAT3: return "PAT3";
  }
  return "PAT1";
}

CompositionNode CompositionNode::leaf(Expr coefficient, std::string compound) {
  CompositionNode n;
  n.coefficient = std::move(coefficient);
  n.compound = std::move(compound);
  return n;
}

CompositionNode CompositionNode::group(Expr coefficient, std::vector<CompositionNode> children,
                                       bool trailing) {
  CompositionNode n;
  n.coefficient = std::move(coefficient);
  n.children = std::move(children);
  n.trailing = trailing;
  return n;
}

namespace {

void collect_node_variables(const CompositionNode& n, std::set<std::string>& out) {
  n.coefficient.collect_variables(out);
  for (const auto& c : n.children) collect_node_variables(c, out);
}

std::string render_items(const std::vector<CompositionNode>& items);

std::string render_node(const CompositionNode& n) {
  std::string out = n.coefficient.to_string() + " ";
  if (n.is_leaf()) return out + n.compound;
  return out + render_items(n.children);
}

std::string render_items(const std::vector<CompositionNode>& items) {
  std::string out = "[";
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (k) out += ", ";
    out += render_node(items[k]);
  }
  return out + "]";
}

}  // namespace

std::set<std::string> ParsedComposition::variables() const {
  std::set<std::string> out;
  for (const auto& n : items) collect_node_variables(n, out);
  return out;
}

std::string ParsedComposition::to_string() const {
  return matcomp::to_string(pattern) + " " + render_items(items);
}

std::optional<double> NormalizedComposition::find(std::string_view constituent) const {
  for (const auto& [c, p] : percentages)
    if (c == constituent) return p;
  return std::nullopt;
}

double NormalizedComposition::total() const {
  double s = 0.0;
  for (const auto& [c, p] : percentages) s += p;
  return s;
}

// ---------------------------------------------------------------------------------------------
// Parser
//
// A generalization of the three composition patterns to arbitrarily nested brackets:
//
//   sequence := item (SEP item)*
//   item     := [COEF] W compound
//             | [COEF] W OB sequence CB [W COEF]      (at most one of the two COEFs)
//   SEP      := W glyph W | W+ | <empty, only next to a bracket>
//   glyph    := - + * : , ; · – — −
//   COEF     := number, or with variables an arithmetic chain over numbers and one-letter
//               variables with + - * × and parentheses
//
// A top-level match needs at least two items and must start and end on a boundary: string
// edge or a character other than a letter, digit, '.', '/' or '%'.

namespace {

struct Alternative {
  CompositionNode node;
  std::size_t end = 0;
  bool ends_with_bracket = false;
};

struct SequenceAlt {
  std::vector<CompositionNode> items;
  std::size_t end = 0;
};

struct ExprAlt {
  Expr expr;
  std::size_t end = 0;
};

class Parser {
 public:
  Parser(std::string_view text, const CompoundLexicon& lexicon, bool allow_variables)
      : s_(text), lex_(lexicon), vars_(allow_variables) {}

  std::optional<ParsedComposition> match_from(std::size_t start) {
    if (!is_start(start)) return std::nullopt;
    budget_ = kBudget;
    std::optional<SequenceAlt> best;
    sequence(start, '\0', {}, [&](SequenceAlt&& alt) {
      if (alt.items.size() >= 2 && is_end(alt.end) && (!best || alt.end > best->end)) {
        best = std::move(alt);
      }
    });
    if (!best) return std::nullopt;
    ParsedComposition pc;
    pc.items = std::move(best->items);
    pc.begin = start;
    pc.end = best->end;
    pc.pattern = classify(pc.items);
    return pc;
  }

 private:
  static constexpr long kBudget = 200000;

  static Pattern classify(const std::vector<CompositionNode>& items) {
    bool any_group = false;
    bool any_trailing = false;
    for (const auto& n : items) {
      if (!n.is_leaf()) any_group = true;
      if (!n.is_leaf() && n.trailing) any_trailing = true;
    }
    if (!any_group) return Pattern::PAT1;
    return any_trailing ? Pattern::PAT2 : Pattern::PAT3;
  }

  char at(std::size_t p) const { return p < s_.size() ? s_[p] : '\0'; }

  bool blocks_boundary(std::size_t p) const {
    const char c = at(p);
    return is_alnum(c) || c == '.' || c == '/' || c == '%';
  }

  bool is_start(std::size_t p) const { return p == 0 || !blocks_boundary(p - 1); }
  bool is_end(std::size_t p) const { return p >= s_.size() || !blocks_boundary(p); }

  bool starts_with(std::size_t p, std::string_view lit) const {
    return s_.substr(std::min(p, s_.size())).substr(0, lit.size()) == lit;
  }

  // Whitespace: ASCII blanks, no-break space, thin space.
  std::size_t ws_len(std::size_t p) const {
    if (at(p) == ' ' || at(p) == '\t') return 1;
    if (starts_with(p, "\xC2\xA0")) return 2;
    if (starts_with(p, "\xE2\x80\x89")) return 3;
    return 0;
  }

  std::size_t skip_ws(std::size_t p) const {
    while (std::size_t n = ws_len(p)) p += n;
    return p;
  }

  std::size_t sep_glyph_len(std::size_t p) const {
    switch (at(p)) {
      case '-': case '+': case '*': case ':': case ',': case ';': return 1;
      default: break;
    }
    for (std::string_view g : {"\xC2\xB7", "\xE2\x80\x93", "\xE2\x80\x94", "\xE2\x88\x92"}) {
      if (starts_with(p, g)) return g.size();
    }
    return 0;
  }

  // Expression operator at p: returns (kind, length) with length 0 when none.
  std::pair<Expr::Kind, std::size_t> expr_op(std::size_t p) const {
    switch (at(p)) {
      case '+': return {Expr::Kind::Add, 1};
      case '-': return {Expr::Kind::Sub, 1};
      case '*': return {Expr::Kind::Mul, 1};
      default: break;
    }
    if (starts_with(p, "\xE2\x88\x92")) return {Expr::Kind::Sub, 3};
    if (starts_with(p, "\xC3\x97")) return {Expr::Kind::Mul, 2};
    return {Expr::Kind::Number, 0};
  }

  std::optional<ExprAlt> number_at(std::size_t p) const {
    std::size_t k = p;
    while (is_digit(at(k))) ++k;
    std::size_t end = k;
    if (at(k) == '.' && is_digit(at(k + 1))) {
      k += 1;
      while (is_digit(at(k))) ++k;
      end = k;
    }
    if (end == p) return std::nullopt;
    double v = 0.0;
    std::from_chars(s_.data() + p, s_.data() + end, v);
    return ExprAlt{Expr::number(v), end};
  }

  std::optional<ExprAlt> variable_at(std::size_t p) const {
    const char c = at(p);
    if (!is_lower(c)) return std::nullopt;
    if (p > 0 && is_alpha(s_[p - 1])) return std::nullopt;
    if (is_lower(at(p + 1))) return std::nullopt;
    return ExprAlt{Expr::variable(std::string(1, c)), p + 1};
  }

  // Operand of an arithmetic chain. `spaced` allows whitespace around operators (inside
  // parentheses only).
  std::optional<ExprAlt> operand(std::size_t p, bool spaced) {
    if (--budget_ < 0) return std::nullopt;
    if (auto n = number_at(p)) return n;
    if (!vars_) return std::nullopt;
    if (auto v = variable_at(p)) return v;
    if (spaced) {
      auto [kind, len] = expr_op(p);
      if (len > 0 && kind == Expr::Kind::Sub) {
        if (auto inner = operand(skip_ws(p + len), true)) {
          return ExprAlt{Expr::negate(std::move(inner->expr)), inner->end};
        }
      }
    }
    if (at(p) == '(') {
      auto chains = chain(skip_ws(p + 1), true);
      for (auto it = chains.rbegin(); it != chains.rend(); ++it) {
        const std::size_t q = skip_ws(it->end);
        if (at(q) == ')') return ExprAlt{it->expr, q + 1};
      }
    }
    return std::nullopt;
  }

  // All prefixes of an operator chain starting at p, shortest first.
  std::vector<ExprAlt> chain(std::size_t p, bool spaced) {
    std::vector<ExprAlt> out;
    std::vector<Expr> operands;
    std::vector<Expr::Kind> ops;
    auto first = operand(p, spaced);
    if (!first) return out;
    operands.push_back(first->expr);
    std::size_t end = first->end;
    out.push_back({build(operands, ops), end});
    if (!vars_) return out;
    bool has_variable = !first->expr.is_constant();
    while (true) {
      std::size_t q = spaced ? skip_ws(end) : end;
      auto [kind, len] = expr_op(q);
      if (len == 0) break;
      q += len;
      if (spaced) q = skip_ws(q);
      auto next = operand(q, spaced);
      if (!next) break;
      operands.push_back(next->expr);
      ops.push_back(kind);
      end = next->end;
      has_variable = has_variable || !next->expr.is_constant();
      // "80-20Na2O" is a coefficient, a separator and an item, never the difference 60.
      if (has_variable || spaced) out.push_back({build(operands, ops), end});
    }
    return out;
  }

  // Left-associative build with * binding tighter than + and -.
  static Expr build(const std::vector<Expr>& operands, const std::vector<Expr::Kind>& ops) {
    std::vector<Expr> terms;
    std::vector<Expr::Kind> add_ops;
    Expr current = operands[0];
    for (std::size_t k = 0; k < ops.size(); ++k) {
      if (ops[k] == Expr::Kind::Mul) {
        current = Expr::binary(Expr::Kind::Mul, current, operands[k + 1]);
      } else {
        terms.push_back(current);
        add_ops.push_back(ops[k]);
        current = operands[k + 1];
      }
    }
    terms.push_back(current);
    Expr out = terms[0];
    for (std::size_t k = 0; k < add_ops.size(); ++k) out = Expr::binary(add_ops[k], out, terms[k + 1]);
    return out;
  }

  // Coefficient candidates at p, longest first.
  std::vector<ExprAlt> coefficients(std::size_t p) {
    auto c = chain(p, false);
    std::reverse(c.begin(), c.end());
    return c;
  }

  using ItemSink = std::function<void(Alternative&&)>;
  using SequenceSink = std::function<void(SequenceAlt&&)>;

  static char closer_for(char open) { return open == '(' ? ')' : open == '[' ? ']' : '\0'; }

  void bracket_group(std::size_t p, std::optional<ExprAlt> lead, const ItemSink& sink) {
    const char close = closer_for(at(p));
    if (!close) return;
    sequence(skip_ws(p + 1), close, {}, [&](SequenceAlt&& inner) {
      const std::size_t q = skip_ws(inner.end);
      if (at(q) != close) return;
      const std::size_t after = q + 1;
      if (lead) {
        sink({make_group(lead->expr, std::move(inner.items), false, true), after, true});
        return;
      }
      const std::size_t t = skip_ws(after);
      for (auto& trail : coefficients(t)) {
        sink({make_group(trail.expr, inner.items, true, true), trail.end, true});
      }
      sink({make_group(Expr::number(1.0), std::move(inner.items), false, false), after, true});
    });
  }

  // A one-child group collapses into its child; an explicit group coefficient replaces the
  // child's coefficient since the child's share inside the bracket is always 100%.
  static CompositionNode make_group(Expr coef, std::vector<CompositionNode> children,
                                    bool trailing, bool explicit_coef) {
    if (children.size() == 1) {
      CompositionNode child = std::move(children.front());
      if (explicit_coef) {
        child.coefficient = std::move(coef);
        if (!child.is_leaf()) child.trailing = trailing;
      }
      return child;
    }
    return CompositionNode::group(std::move(coef), std::move(children), trailing);
  }

  void item(std::size_t p, const ItemSink& sink) {
    if (--budget_ < 0) return;
    for (auto& lead : coefficients(p)) {
      const std::size_t q = skip_ws(lead.end);
      if (std::size_t len = lex_.match_at(s_, q)) {
        sink({CompositionNode::leaf(lead.expr, std::string(s_.substr(q, len))), q + len, false});
      }
      bracket_group(q, lead, sink);
    }
    if (std::size_t len = lex_.match_at(s_, p)) {
      sink({CompositionNode::leaf(Expr::number(1.0), std::string(s_.substr(p, len))), p + len,
            false});
    }
    bracket_group(p, std::nullopt, sink);
  }

  void sequence(std::size_t p, char close, std::vector<CompositionNode> acc,
                const SequenceSink& sink) {
    if (budget_ < 0) return;
    item(p, [&](Alternative&& alt) {
      std::vector<CompositionNode> items = acc;
      items.push_back(std::move(alt.node));
      sink(SequenceAlt{items, alt.end});
      // Continue with a separator.
      const std::size_t q = skip_ws(alt.end);
      if (std::size_t g = sep_glyph_len(q)) {
        sequence(skip_ws(q + g), close, items, sink);
      }
      const char next = at(q);
      if (next == close && close) return;
      if (q > alt.end) {
        sequence(q, close, items, sink);
      } else if (alt.ends_with_bracket || next == '(' || next == '[') {
        sequence(q, close, items, sink);
      }
    });
  }

  std::string_view s_;
  const CompoundLexicon& lex_;
  bool vars_;
  long budget_ = kBudget;
};

}  // namespace

std::vector<ParsedComposition> find_all_compositions(std::string_view text,
                                                     const CompoundLexicon& lexicon,
                                                     bool allow_variables) {
  std::vector<ParsedComposition> out;
  Parser parser(text, lexicon, allow_variables);
  std::size_t start = 0;
  while (start < text.size()) {
    if (auto pc = parser.match_from(start)) {
      start = pc->end;
      out.push_back(std::move(*pc));
    } else {
      ++start;
    }
  }
  return out;
}

std::optional<ParsedComposition> find_composition(std::string_view text,
                                                  const CompoundLexicon& lexicon,
                                                  bool allow_variables) {
  Parser parser(text, lexicon, allow_variables);
  for (std::size_t start = 0; start < text.size(); ++start) {
    if (auto pc = parser.match_from(start)) return pc;
  }
  return std::nullopt;
}

ParsedComposition parse_composition(std::string_view text, const CompoundLexicon& lexicon,
                                    bool allow_variables) {
  if (auto pc = find_composition(text, lexicon, allow_variables)) return std::move(*pc);
  throw CompositionError(CompositionError::Kind::NoMatch,
                         "no composition expression in '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------------------------
// Normalization

namespace {

void add_share(NormalizedComposition& out, const std::string& compound, double share) {
  for (auto& [c, p] : out.percentages) {
    if (c == compound) {
      p += share;
      return;
    }
  }
  out.percentages.emplace_back(compound, share);
}

double distribute(const std::vector<CompositionNode>& nodes, double share,
                  const Assignment& assignment, NormalizedComposition& out) {
  std::vector<double> coefs;
  coefs.reserve(nodes.size());
  double total = 0.0;
  for (const auto& n : nodes) {
    const double c = n.coefficient.evaluate(assignment);
    if (!std::isfinite(c)) {
      throw CompositionError(CompositionError::Kind::NegativeCoefficient, "non-finite coefficient");
    }
    if (c < 0.0) {
      throw CompositionError(CompositionError::Kind::NegativeCoefficient,
                             "coefficient " + n.coefficient.to_string() + " evaluates to " +
                                 format_number(c));
    }
    coefs.push_back(c);
    total += c;
  }
  if (total <= 0.0) {
    throw CompositionError(CompositionError::Kind::ZeroTotal, "all coefficients are zero");
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double part = share * coefs[k] / total;
    if (part <= 0.0) continue;
    if (nodes[k].is_leaf()) {
      add_share(out, nodes[k].compound, part);
    } else {
      distribute(nodes[k].children, part, assignment, out);
    }
  }
  return total;
}

}  // namespace

NormalizedComposition normalize(const ParsedComposition& parsed, const Assignment& assignment,
                                Unit unit) {
  // Fail on unbound variables before any arithmetic.
  for (const auto& v : parsed.variables()) {
    if (!assignment.count(v)) {
      throw CompositionError(CompositionError::Kind::UnboundVariable,
                             "unbound variable '" + v + "'");
    }
  }
  NormalizedComposition out;
  out.unit = unit;
  out.raw_sum = distribute(parsed.items, 100.0, assignment, out);
  out.from_fraction = out.raw_sum >= 0.98 && out.raw_sum <= 1.02;
  return out;
}

// ---------------------------------------------------------------------------------------------
// Units

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool word_start(const std::string& s, std::size_t pos) {
  return pos == 0 || !is_alpha(s[pos - 1]);
}

// Earliest keyword hit in `lower` as (position, unit).
std::optional<std::pair<std::size_t, Unit>> earliest_unit(const std::string& lower) {
  static const std::array<std::pair<const char*, Unit>, 8> keywords = {{
      {"mol", Unit::MolePercent},
      {"at.%", Unit::MolePercent},
      {"at. %", Unit::MolePercent},
      {"at%", Unit::MolePercent},
      {"atomic", Unit::MolePercent},
      {"wt", Unit::WeightPercent},
      {"weight", Unit::WeightPercent},
      {"mass", Unit::WeightPercent},
  }};
  std::optional<std::pair<std::size_t, Unit>> best;
  for (const auto& [kw, unit] : keywords) {
    std::size_t pos = lower.find(kw);
    while (pos != std::string::npos && !word_start(lower, pos)) pos = lower.find(kw, pos + 1);
    if (pos != std::string::npos && (!best || pos < best->first)) best = {pos, unit};
  }
  return best;
}

bool has_fraction(const std::string& lower) { return lower.find("fraction") != std::string::npos; }

}  // namespace

std::optional<Unit> find_unit_keyword(std::string_view text) {
  if (auto hit = earliest_unit(lowercase(text))) return hit->second;
  return std::nullopt;
}

ResolvedUnit resolve_unit(const Table& table, Coord cell) {
  ResolvedUnit out;
  auto inspect = [&](const std::string& text, ResolvedUnit::Source source) {
    const std::string lower = lowercase(text);
    if (has_fraction(lower)) out.fraction = true;
    if (auto hit = earliest_unit(lower)) {
      out.unit = hit->second;
      out.source = source;
      return true;
    }
    return false;
  };
  const int R = table.rows();
  const int C = table.cols();
  if (cell.row < 0 || cell.col < 0 || cell.row >= R || cell.col >= C) {
    throw std::out_of_range("resolve_unit: cell outside grid");
  }
  const int max_d = std::max({cell.row, R - 1 - cell.row, cell.col, C - 1 - cell.col});
  // Within a ring the Manhattan-nearest hit wins; equally near hits that disagree fall back to
  // the default, so the result does not depend on the scan order (or on transposition).
  for (int d = 0; d <= max_d; ++d) {
    int best_dist = -1;
    std::optional<Unit> best;
    for (int i = std::max(0, cell.row - d); i <= std::min(R - 1, cell.row + d); ++i) {
      for (int j = std::max(0, cell.col - d); j <= std::min(C - 1, cell.col + d); ++j) {
        if (std::max(std::abs(i - cell.row), std::abs(j - cell.col)) != d) continue;
        const std::string lower = lowercase(table.cell(i, j));
        if (has_fraction(lower)) out.fraction = true;
        const auto hit = earliest_unit(lower);
        if (!hit) continue;
        const int dist = std::abs(i - cell.row) + std::abs(j - cell.col);
        if (best_dist < 0 || dist < best_dist) {
          best_dist = dist;
          best = hit->second;
        } else if (dist == best_dist && *best != hit->second) {
          best = Unit::MolePercent;
        }
      }
    }
    if (best) {
      out.unit = *best;
      out.source = ResolvedUnit::Source::Cell;
      return out;
    }
  }
  if (inspect(table.caption(), ResolvedUnit::Source::Caption)) return out;
  if (inspect(table.footer(), ResolvedUnit::Source::Footer)) return out;
  out.unit = Unit::MolePercent;
  out.source = ResolvedUnit::Source::Default;
  return out;
}

}  // namespace matcomp
