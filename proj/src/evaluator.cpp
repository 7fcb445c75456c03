#include "scr/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <queue>
#include <optional>

#include "scr/error.hpp"

namespace scr {

std::size_t DependencyGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& [_, in] : inputs) n += in.size();
  return n;
}

std::vector<std::pair<CellAddress, CellAddress>> DependencyGraph::edges() const {
  std::vector<std::pair<CellAddress, CellAddress>> out;
  for (const auto& [from, tos] : outputs)
    for (const auto& to : tos) out.emplace_back(from, to);
  return out;
}

DependencyGraph build_graph(const Workbook& w) {
  DependencyGraph g;
  std::set<CellAddress> nodes;
  for (const auto& sheet : w.sheets()) {
    for (const auto& [pos, content] : sheet.cells()) {
      CellAddress here{sheet.name(), pos.column, pos.row};
      nodes.insert(here);
      if (!content.is_formula()) continue;
      auto refs = extract_references(*content.ast);
      for (const auto& u : refs) {
        nodes.insert(u);
        g.outputs[u].insert(here);
      }
      g.inputs[here] = std::move(refs);
    }
  }
  g.nodes.assign(nodes.begin(), nodes.end());
  return g;
}

namespace {

const std::set<CellAddress>& neighbours(const std::map<CellAddress, std::set<CellAddress>>& m,
                                        const CellAddress& a) {
  static const std::set<CellAddress> kNone;
  auto it = m.find(a);
  return it == m.end() ? kNone : it->second;
}

// Iterative Tarjan; returns nodes in non-trivial strongly connected
// components or with self-loops.
std::set<CellAddress> cyclic_nodes(const DependencyGraph& g) {
  std::map<CellAddress, std::size_t> index, low;
  std::set<CellAddress> on_stack;
  std::vector<CellAddress> stack;
  std::set<CellAddress> result;
  std::size_t counter = 0;

  struct Frame {
    CellAddress node;
    std::vector<CellAddress> succ;
    std::size_t next = 0;
  };

  for (const auto& root : g.nodes) {
    if (index.contains(root)) continue;
    std::vector<Frame> frames;
    auto push = [&](const CellAddress& v) {
      index[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack.insert(v);
      const auto& out = neighbours(g.outputs, v);
      frames.push_back(Frame{v, {out.begin(), out.end()}, 0});
    };
    push(root);
    while (!frames.empty()) {
      auto& f = frames.back();
      if (f.next < f.succ.size()) {
        CellAddress w = f.succ[f.next++];
        if (!index.contains(w)) {
          push(w);
        } else if (on_stack.contains(w)) {
          low[f.node] = std::min(low[f.node], index[w]);
        }
        continue;
      }
      CellAddress v = f.node;
      if (low[v] == index[v]) {
        std::vector<CellAddress> component;
        for (;;) {
          CellAddress w = stack.back();
          stack.pop_back();
          on_stack.erase(w);
          component.push_back(w);
          if (w == v) break;
        }
        bool self_loop = neighbours(g.outputs, v).contains(v);
        if (component.size() > 1 || self_loop) result.insert(component.begin(), component.end());
      }
      frames.pop_back();
      if (!frames.empty()) {
        auto& parent = frames.back();
        low[parent.node] = std::min(low[parent.node], low[v]);
      }
    }
  }
  return result;
}

}  // namespace

TopoResult topological_order(const DependencyGraph& g) {
  TopoResult r;
  r.cycle = cyclic_nodes(g);
  std::vector<CellAddress> frontier(r.cycle.begin(), r.cycle.end());
  std::set<CellAddress> tainted(r.cycle);
  while (!frontier.empty()) {
    CellAddress u = frontier.back();
    frontier.pop_back();
    for (const auto& v : neighbours(g.outputs, u))
      if (tainted.insert(v).second) {
        r.cycle_dependents.insert(v);
        frontier.push_back(v);
      }
  }

  std::map<CellAddress, std::size_t> pending;
  std::priority_queue<CellAddress, std::vector<CellAddress>, std::greater<>> ready;
  for (const auto& v : g.nodes) {
    if (tainted.contains(v)) continue;
    std::size_t n = neighbours(g.inputs, v).size();
    if (n == 0) ready.push(v);
    else pending[v] = n;
  }
  while (!ready.empty()) {
    CellAddress u = ready.top();
    ready.pop();
    r.order.push_back(u);
    for (const auto& v : neighbours(g.outputs, u)) {
      auto it = pending.find(v);
      if (it != pending.end() && --it->second == 0) {
        pending.erase(it);
        ready.push(v);
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Values

std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Div0: return "DIV0";
    case ErrorKind::Value: return "VALUE";
    case ErrorKind::Cycle: return "CYCLE";
    case ErrorKind::Name: return "NAME";
  }
  return "?";
}

std::string render_value(const EvalValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Blank>) return "";
        else if constexpr (std::is_same_v<T, double>) return format_number(x);
        else if constexpr (std::is_same_v<T, std::string>) return x;
        else if constexpr (std::is_same_v<T, bool>) return x ? "TRUE" : "FALSE";
        else return "#" + std::string(to_string(x.kind));
      },
      v);
}

Json value_to_json(const EvalValue& v) {
  return std::visit(
      [](const auto& x) -> Json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Blank>) return nullptr;
        else if constexpr (std::is_same_v<T, EvalError>) return {{"error", std::string(to_string(x.kind))}};
        else return x;
      },
      v);
}

namespace {

EvalValue error(ErrorKind k) { return EvalError{k}; }
bool is_error(const EvalValue& v) { return std::holds_alternative<EvalError>(v); }

// Arithmetic coercion: Blank -> 0, Boolean -> 1/0, Text -> #VALUE.
std::optional<double> as_number(const EvalValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (std::holds_alternative<Blank>(v)) return 0.0;
  if (const auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  return std::nullopt;
}

std::string as_text(const EvalValue& v) { return render_value(v); }

// Truthiness for IF/AND/OR/NOT; nullopt for Text.
std::optional<bool> as_bool(const EvalValue& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  if (const auto* d = std::get_if<double>(&v)) return *d != 0;
  if (std::holds_alternative<Blank>(v)) return false;
  return std::nullopt;
}

EvalValue finite_or_error(double x) { return std::isfinite(x) ? EvalValue(x) : error(ErrorKind::Value); }

std::string fold_case(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

class ExprEvaluator {
 public:
  explicit ExprEvaluator(const ValueMap& values) : values_(values) {}

  EvalValue eval(const Expr& e) const {
    return std::visit([&](const auto& x) { return eval_node(x); }, e.node);
  }

 private:
  EvalValue lookup(const CellAddress& a) const {
    auto it = values_.find(a);
    return it == values_.end() ? EvalValue(Blank{}) : it->second;
  }

  EvalValue eval_node(const NumberLit& n) const { return n.value; }
  EvalValue eval_node(const TextLit& t) const { return t.value; }
  EvalValue eval_node(const BoolLit& b) const { return b.value; }
  EvalValue eval_node(const RefExpr& r) const { return lookup(r.ref.address()); }
  EvalValue eval_node(const RangeExpr&) const { return error(ErrorKind::Value); }

  EvalValue eval_node(const UnaryExpr& u) const {
    auto v = eval(*u.operand);
    if (is_error(v)) return v;
    auto n = as_number(v);
    if (!n) return error(ErrorKind::Value);
    return -*n;
  }

  EvalValue eval_node(const BinaryExpr& b) const {
    auto l = eval(*b.lhs);
    if (is_error(l)) return l;
    auto r = eval(*b.rhs);
    if (is_error(r)) return r;
    switch (b.op) {
      case BinaryOp::Concat:
        return as_text(l) + as_text(r);
      case BinaryOp::Eq: case BinaryOp::Ne: case BinaryOp::Lt:
      case BinaryOp::Le: case BinaryOp::Gt: case BinaryOp::Ge:
        return compare(b.op, l, r);
      default:
        break;
    }
    auto x = as_number(l), y = as_number(r);
    if (!x || !y) return error(ErrorKind::Value);
    switch (b.op) {
      case BinaryOp::Add: return finite_or_error(*x + *y);
      case BinaryOp::Sub: return finite_or_error(*x - *y);
      case BinaryOp::Mul: return finite_or_error(*x * *y);
      case BinaryOp::Div:
        if (*y == 0) return error(ErrorKind::Div0);
        return finite_or_error(*x / *y);
      case BinaryOp::Pow:
        if (*x == 0 && *y < 0) return error(ErrorKind::Div0);
        return finite_or_error(std::pow(*x, *y));
      default:
        return error(ErrorKind::Value);
    }
  }

  static EvalValue compare(BinaryOp op, EvalValue l, EvalValue r) {
    // Blank adopts the other side's type.
    auto blank_as = [](const EvalValue& other) -> EvalValue {
      if (std::holds_alternative<double>(other)) return 0.0;
      if (std::holds_alternative<std::string>(other)) return std::string();
      if (std::holds_alternative<bool>(other)) return false;
      return 0.0;
    };
    if (std::holds_alternative<Blank>(l)) l = blank_as(r);
    if (std::holds_alternative<Blank>(r)) r = blank_as(l);
    if (l.index() != r.index()) return error(ErrorKind::Value);
    int c = 0;
    if (const auto* x = std::get_if<double>(&l)) {
      double y = std::get<double>(r);
      c = *x < y ? -1 : (*x > y ? 1 : 0);
    } else if (const auto* s = std::get_if<std::string>(&l)) {
      auto a = fold_case(*s), b = fold_case(std::get<std::string>(r));
      c = a < b ? -1 : (a > b ? 1 : 0);
    } else {
      bool a = std::get<bool>(l), b = std::get<bool>(r);
      c = a == b ? 0 : (a ? 1 : -1);
    }
    switch (op) {
      case BinaryOp::Eq: return c == 0;
      case BinaryOp::Ne: return c != 0;
      case BinaryOp::Lt: return c < 0;
      case BinaryOp::Le: return c <= 0;
      case BinaryOp::Gt: return c > 0;
      default: return c >= 0;
    }
  }

  // Visits argument values. Reference arguments (cells and ranges) yield
  // their cell values with `from_reference = true`; any other argument is
  // evaluated once. Returns the first error the visitor reports.
  template <typename F>
  std::optional<EvalValue> each_value(const std::vector<ExprPtr>& args, F&& visit) const {
    for (const auto& arg : args) {
      if (const auto* rg = std::get_if<RangeExpr>(&arg->node)) {
        auto c0 = std::min(rg->first.column, rg->last.column), c1 = std::max(rg->first.column, rg->last.column);
        auto r0 = std::min(rg->first.row, rg->last.row), r1 = std::max(rg->first.row, rg->last.row);
        for (auto row = r0; row <= r1; ++row)
          for (auto col = c0; col <= c1; ++col)
            if (auto e = visit(lookup(CellAddress{rg->first.sheet, col, row}), true)) return e;
      } else if (const auto* ref = std::get_if<RefExpr>(&arg->node)) {
        if (auto e = visit(lookup(ref->ref.address()), true)) return e;
      } else {
        if (auto e = visit(eval(*arg), false)) return e;
      }
    }
    return std::nullopt;
  }

  // Numbers for SUM/AVERAGE/MIN/MAX: references contribute only numeric
  // cells; direct arguments coerce (Text -> #VALUE).
  std::optional<EvalValue> collect_numbers(const std::vector<ExprPtr>& args, std::vector<double>& out) const {
    return each_value(args, [&](const EvalValue& v, bool from_reference) -> std::optional<EvalValue> {
      if (is_error(v)) return v;
      if (from_reference) {
        if (const auto* d = std::get_if<double>(&v)) out.push_back(*d);
        return std::nullopt;
      }
      auto n = as_number(v);
      if (!n) return error(ErrorKind::Value);
      out.push_back(*n);
      return std::nullopt;
    });
  }

  EvalValue eval_node(const CallExpr& c) const {
    const auto& name = c.name;
    const auto& args = c.args;
    if (name == "IF") {
      auto cond = eval(*args[0]);
      if (is_error(cond)) return cond;
      auto truth = as_bool(cond);
      if (!truth) return error(ErrorKind::Value);
      if (*truth) return eval(*args[1]);
      return args.size() > 2 ? eval(*args[2]) : EvalValue(false);
    }
    if (name == "SUM" || name == "AVERAGE" || name == "MIN" || name == "MAX") {
      std::vector<double> xs;
      if (auto e = collect_numbers(args, xs)) return *e;
      if (name == "SUM") {
        double s = 0;
        for (double x : xs) s += x;
        return finite_or_error(s);
      }
      if (name == "AVERAGE") {
        if (xs.empty()) return error(ErrorKind::Div0);
        double s = 0;
        for (double x : xs) s += x;
        return finite_or_error(s / double(xs.size()));
      }
      if (xs.empty()) return 0.0;
      return name == "MIN" ? *std::min_element(xs.begin(), xs.end()) : *std::max_element(xs.begin(), xs.end());
    }
    if (name == "COUNT" || name == "COUNTA") {
      bool all = name == "COUNTA";
      double n = 0;
      auto e = each_value(args, [&](const EvalValue& v, bool from_reference) -> std::optional<EvalValue> {
        if (is_error(v)) return v;
        if (all) {
          if (!std::holds_alternative<Blank>(v)) ++n;
        } else if (std::holds_alternative<double>(v) || (!from_reference && std::holds_alternative<bool>(v))) {
          ++n;
        }
        return std::nullopt;
      });
      if (e) return *e;
      return n;
    }
    if (name == "AND" || name == "OR") {
      bool is_and = name == "AND";
      bool acc = is_and;
      bool any = false;
      auto e = each_value(args, [&](const EvalValue& v, bool from_reference) -> std::optional<EvalValue> {
        if (is_error(v)) return v;
        if (from_reference && (std::holds_alternative<Blank>(v) || std::holds_alternative<std::string>(v)))
          return std::nullopt;
        auto b = as_bool(v);
        if (!b) return error(ErrorKind::Value);
        any = true;
        acc = is_and ? (acc && *b) : (acc || *b);
        return std::nullopt;
      });
      if (e) return *e;
      if (!any) return error(ErrorKind::Value);
      return acc;
    }
    if (name == "NOT") {
      auto v = eval(*args[0]);
      if (is_error(v)) return v;
      auto b = as_bool(v);
      if (!b) return error(ErrorKind::Value);
      return !*b;
    }
    if (name == "ABS") {
      auto v = eval(*args[0]);
      if (is_error(v)) return v;
      auto n = as_number(v);
      if (!n) return error(ErrorKind::Value);
      return std::fabs(*n);
    }
    if (name == "ROUND") {
      auto v = eval(*args[0]);
      if (is_error(v)) return v;
      auto d = eval(*args[1]);
      if (is_error(d)) return d;
      auto x = as_number(v), digits = as_number(d);
      if (!x || !digits) return error(ErrorKind::Value);
      double factor = std::pow(10.0, std::trunc(*digits));
      // std::round rounds halves away from zero.
      return finite_or_error(std::round(*x * factor) / factor);
    }
    return error(ErrorKind::Name);
  }

  const ValueMap& values_;
};

EvalValue literal_value(const CellContent& c) {
  switch (c.kind) {
    case CellKind::Number: return c.number();
    case CellKind::Text: return c.text();
    case CellKind::Boolean: return c.boolean();
    default: return Blank{};
  }
}

}  // namespace

ValueMap evaluate(const Workbook& w) {
  auto g = build_graph(w);
  auto topo = topological_order(g);
  ValueMap values;
  for (const auto& a : topo.cycle) values[a] = error(ErrorKind::Cycle);
  for (const auto& a : topo.cycle_dependents) values[a] = error(ErrorKind::Cycle);
  ExprEvaluator ev(values);
  for (const auto& a : topo.order) {
    if (!w.find_sheet(a.sheet)) {
      values[a] = error(ErrorKind::Name);
      continue;
    }
    const auto& c = w.at(a);
    values[a] = c.is_formula() ? ev.eval(*c.ast) : literal_value(c);
  }
  return values;
}

// ---------------------------------------------------------------------------
// Rules

namespace {

CellRange resolve_rule_range(const Workbook& w, const std::string& rule_id, const std::string& text) {
  if (w.sheets().empty()) throw config_error("rule " + rule_id + ": workbook has no sheets");
  CellRange r;
  try {
    r = parse_range(text, w.sheets().front().name());
  } catch (const ParseError& e) {
    throw config_error("rule " + rule_id + ": bad range '" + text + "': " + e.what());
  }
  if (!w.find_sheet(r.sheet)) throw config_error("rule " + rule_id + ": unknown sheet '" + r.sheet + "'");
  if (r.size() > kMaxRangeExpansion) throw config_error("rule " + rule_id + ": range too large");
  return r;
}

template <typename F>
void for_each_cell(const CellRange& r, F&& f) {
  for (auto row = r.first_row; row <= r.last_row; ++row)
    for (auto col = r.first_column; col <= r.last_column; ++col) f(CellAddress{r.sheet, col, row});
}

}  // namespace

std::vector<RuleViolation> check_rules(const Workbook& w, const std::vector<ExpectedValueRule>& rules,
                                       const RuleOptions& options) {
  std::vector<RuleViolation> out;
  if (rules.empty()) return out;
  for (const auto& rule : rules) {
    resolve_rule_range(w, rule.id, rule.target);
    if (rule.predicate == Predicate::Between && !(rule.low <= rule.high))
      throw config_error("rule " + rule.id + ": between bounds are reversed");
    if (rule.predicate == Predicate::EqualsSumOf) resolve_rule_range(w, rule.id, rule.sum_range);
  }
  auto values = evaluate(w);
  auto value_at = [&](const CellAddress& a) -> EvalValue {
    auto it = values.find(a);
    return it == values.end() ? EvalValue(Blank{}) : it->second;
  };
  for (const auto& rule : rules) {
    auto target = resolve_rule_range(w, rule.id, rule.target);
    auto violate = [&](const CellAddress& a, const EvalValue& v, std::string msg) {
      out.push_back(RuleViolation{rule.id, a, v, std::move(msg)});
    };
    switch (rule.predicate) {
      case Predicate::Between:
        for_each_cell(target, [&](const CellAddress& a) {
          auto v = value_at(a);
          if (std::holds_alternative<Blank>(v)) return;
          const auto* d = std::get_if<double>(&v);
          if (!d || *d < rule.low || *d > rule.high)
            violate(a, v, "expected a number between " + format_number(rule.low) + " and " + format_number(rule.high));
        });
        break;
      case Predicate::Nonnegative:
        for_each_cell(target, [&](const CellAddress& a) {
          auto v = value_at(a);
          if (std::holds_alternative<Blank>(v)) return;
          const auto* d = std::get_if<double>(&v);
          if (!d || *d < 0) violate(a, v, "expected a non-negative number");
        });
        break;
      case Predicate::NotError:
        for_each_cell(target, [&](const CellAddress& a) {
          auto v = value_at(a);
          if (is_error(v)) violate(a, v, "expected a non-error value");
        });
        break;
      case Predicate::EqualsSumOf: {
        auto summed = resolve_rule_range(w, rule.id, rule.sum_range);
        double total = 0;
        std::optional<EvalValue> bad;
        for_each_cell(summed, [&](const CellAddress& a) {
          auto v = value_at(a);
          if (is_error(v) && !bad) bad = v;
          if (const auto* d = std::get_if<double>(&v)) total += *d;
        });
        for_each_cell(target, [&](const CellAddress& a) {
          auto v = value_at(a);
          if (bad) {
            violate(a, v, "summed range contains an error");
            return;
          }
          auto n = std::holds_alternative<Blank>(v) ? std::optional<double>(0.0)
                   : std::holds_alternative<double>(v) ? std::optional<double>(std::get<double>(v))
                                                       : std::nullopt;
          if (!n || std::fabs(*n - total) > options.sum_tolerance)
            violate(a, v, "expected the sum of " + rule.sum_range + " = " + format_number(total));
        });
        break;
      }
    }
  }
  return out;
}

namespace {

std::string_view predicate_name(Predicate p) {
  switch (p) {
    case Predicate::Between: return "between";
    case Predicate::Nonnegative: return "nonnegative";
    case Predicate::EqualsSumOf: return "equals_sum_of";
    case Predicate::NotError: return "not_error";
  }
  return "?";
}

}  // namespace

std::vector<ExpectedValueRule> rules_from_json(const Json& j) {
  if (!j.is_array()) throw config_error("rules document must be an array");
  std::vector<ExpectedValueRule> out;
  std::set<std::string> ids;
  for (const auto& r : j) {
    if (!r.is_object() || !r.contains("id") || !r["id"].is_string() || !r.contains("target") ||
        !r["target"].is_string() || !r.contains("predicate") || !r["predicate"].is_string())
      throw config_error("rule objects need string fields id, target, predicate");
    ExpectedValueRule rule;
    rule.id = r["id"];
    if (!ids.insert(rule.id).second) throw config_error("duplicate rule id '" + rule.id + "'");
    rule.target = r["target"];
    std::string p = r["predicate"];
    auto args = r.value("args", Json::array());
    if (!args.is_array()) throw config_error("rule " + rule.id + ": args must be an array");
    if (p == "between") {
      if (args.size() != 2 || !args[0].is_number() || !args[1].is_number())
        throw config_error("rule " + rule.id + ": between takes [low, high]");
      rule.predicate = Predicate::Between;
      rule.low = args[0];
      rule.high = args[1];
    } else if (p == "nonnegative") {
      rule.predicate = Predicate::Nonnegative;
    } else if (p == "not_error") {
      rule.predicate = Predicate::NotError;
    } else if (p == "equals_sum_of") {
      if (args.size() != 1 || !args[0].is_string())
        throw config_error("rule " + rule.id + ": equals_sum_of takes [range]");
      rule.predicate = Predicate::EqualsSumOf;
      rule.sum_range = args[0];
    } else {
      throw config_error("rule " + rule.id + ": unknown predicate '" + p + "'");
    }
    out.push_back(std::move(rule));
  }
  return out;
}

Json rules_to_json(const std::vector<ExpectedValueRule>& rules) {
  auto out = Json::array();
  for (const auto& r : rules) {
    Json j;
    j["id"] = r.id;
    j["target"] = r.target;
    j["predicate"] = predicate_name(r.predicate);
    switch (r.predicate) {
      case Predicate::Between: j["args"] = {r.low, r.high}; break;
      case Predicate::EqualsSumOf: j["args"] = {r.sum_range}; break;
      default: j["args"] = Json::array(); break;
    }
    out.push_back(std::move(j));
  }
  return out;
}

Json violations_to_json(const std::vector<RuleViolation>& v) {
  auto out = Json::array();
  for (const auto& x : v) {
    Json j;
    j["rule"] = x.rule_id;
    j["address"] = render_address(x.address);
    j["observed"] = value_to_json(x.observed);
    j["message"] = x.message;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace scr
