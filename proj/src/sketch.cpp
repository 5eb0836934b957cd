#include "ryansql/sketch.hpp"

#include <map>
#include <sstream>

#include "json.hpp"
#include "ryansql/errors.hpp"

namespace ryansql {

std::string to_string(SpcElement element) {
  switch (element) {
    case SpcElement::None: return "NONE";
    case SpcElement::Union: return "UNION";
    case SpcElement::Intersect: return "INTERSECT";
    case SpcElement::Except: return "EXCEPT";
    case SpcElement::Where: return "WHERE";
    case SpcElement::Having: return "HAVING";
    case SpcElement::Parallel: return "PARALLEL";
  }
  return "?";
}

SpcElement spc_element_from_string(const std::string& text) {
  for (SpcElement e : {SpcElement::None, SpcElement::Union, SpcElement::Intersect,
                       SpcElement::Except, SpcElement::Where, SpcElement::Having,
                       SpcElement::Parallel}) {
    if (text == to_string(e)) return e;
  }
  fail(ErrorKind::MalformedDocument, "unknown position code element '" + text + "'");
}

StatementPositionCode root_spc() {
  return StatementPositionCode{{SpcElement::None}};
}

namespace {

std::string spc_text(const StatementPositionCode& spc) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < spc.elements.size(); ++i) {
    if (i) out << ", ";
    out << to_string(spc.elements[i]);
  }
  out << "]";
  return out.str();
}

SpcElement site_element(NestingSite site) {
  switch (site) {
    case NestingSite::Where: return SpcElement::Where;
    case NestingSite::Having: return SpcElement::Having;
    case NestingSite::Union: return SpcElement::Union;
    case NestingSite::Intersect: return SpcElement::Intersect;
    case NestingSite::Except: return SpcElement::Except;
  }
  return SpcElement::Where;
}

NestingSite site_of(SetOperator op) {
  switch (op) {
    case SetOperator::Union: return NestingSite::Union;
    case SetOperator::Intersect: return NestingSite::Intersect;
    case SetOperator::Except: return NestingSite::Except;
  }
  return NestingSite::Union;
}

}  // namespace

StatementPositionCode child_spc(const StatementPositionCode& parent,
                                NestingSite site, int ordinal, int max_depth) {
  if (parent.elements.empty()) {
    fail(ErrorKind::InputContract, "empty position code has no children");
  }
  if (ordinal < 0) fail(ErrorKind::InputContract, "negative subquery ordinal");
  StatementPositionCode child = parent;
  if (child.elements.size() == 1 && child.elements[0] == SpcElement::None) {
    child.elements.clear();
  }
  child.elements.push_back(site_element(site));
  for (int i = 0; i < ordinal; ++i) {
    child.elements.push_back(SpcElement::Parallel);
  }
  if (static_cast<int>(child.elements.size()) > max_depth) {
    fail(ErrorKind::NestingLimit,
         "position code " + spc_text(child) + " exceeds max depth " +
             std::to_string(max_depth));
  }
  return child;
}

std::vector<std::string> spc_to_strings(const StatementPositionCode& spc) {
  std::vector<std::string> parts;
  parts.reserve(spc.elements.size());
  for (SpcElement e : spc.elements) parts.push_back(to_string(e));
  return parts;
}

StatementPositionCode spc_from_strings(const std::vector<std::string>& parts) {
  StatementPositionCode spc;
  spc.elements.reserve(parts.size());
  for (const std::string& p : parts) spc.elements.push_back(spc_element_from_string(p));
  return spc;
}

namespace {

class Decomposer {
 public:
  explicit Decomposer(int max_depth) : max_depth_(max_depth) {}

  NonNestedForm run(const SelectStatement& ast) {
    walk(*clone(ast), root_spc());
    return std::move(form_);
  }

 private:
  void walk(SelectStatement& stmt, const StatementPositionCode& spc) {
    size_t slot = form_.entries.size();
    form_.entries.emplace_back(spc, SelectStatement{});

    std::vector<std::pair<StatementPositionCode, StatementPtr>> children;
    int where_ordinal = 0;
    for (Condition& cond : stmt.where_conditions) {
      detach(cond, spc, NestingSite::Where, where_ordinal, children);
    }
    int having_ordinal = 0;
    for (Condition& cond : stmt.having_conditions) {
      detach(cond, spc, NestingSite::Having, having_ordinal, children);
    }
    if (stmt.iuen && stmt.iuen->child) {
      StatementPositionCode sub =
          child_spc(spc, site_of(stmt.iuen->op), 0, max_depth_);
      children.emplace_back(sub, std::move(stmt.iuen->child));
      stmt.iuen->child = nullptr;
      stmt.iuen->placeholder_spc = spc_to_strings(sub);
    }

    form_.entries[slot].second = std::move(stmt);
    for (auto& [sub, child] : children) walk(*child, sub);
  }

  void detach(Condition& cond, const StatementPositionCode& spc,
              NestingSite site, int& ordinal,
              std::vector<std::pair<StatementPositionCode, StatementPtr>>& out) {
    for (ConditionValue* value : {&cond.value1, cond.value2 ? &*cond.value2 : nullptr}) {
      if (!value || value->kind != ConditionValue::Kind::Subquery) continue;
      StatementPositionCode sub = child_spc(spc, site, ordinal++, max_depth_);
      out.emplace_back(sub, std::move(value->subquery));
      *value = ConditionValue::make_placeholder(spc_to_strings(sub));
    }
  }

  NonNestedForm form_;
  int max_depth_;
};

class Synthesizer {
 public:
  explicit Synthesizer(const NonNestedForm& nnf) : nnf_(nnf) {
    if (nnf.entries.empty()) {
      fail(ErrorKind::IncompleteForm, "non-nested form has no entries");
    }
    if (!(nnf.entries[0].first == root_spc())) {
      fail(ErrorKind::InputContract, "first entry must be positioned at [NONE]");
    }
    for (size_t i = 0; i < nnf.entries.size(); ++i) {
      auto [it, fresh] = index_.emplace(key(nnf.entries[i].first), i);
      if (!fresh) {
        fail(ErrorKind::InputContract,
             "duplicate position code " + spc_text(nnf.entries[i].first));
      }
    }
    consumed_.assign(nnf.entries.size(), false);
  }

  SelectStatement run() {
    consumed_[0] = true;
    SelectStatement root = build(0);
    for (size_t i = 0; i < consumed_.size(); ++i) {
      if (!consumed_[i]) {
        fail(ErrorKind::UnreachableEntry,
             "entry " + spc_text(nnf_.entries[i].first) +
                 " is never referenced by a placeholder");
      }
    }
    return root;
  }

 private:
  static std::string key(const StatementPositionCode& spc) {
    std::string k;
    for (SpcElement e : spc.elements) {
      k += to_string(e);
      k += '/';
    }
    return k;
  }

  SelectStatement build(size_t index) {
    SelectStatement stmt = *clone(nnf_.entries[index].second);
    for (Condition& cond : stmt.where_conditions) attach(cond);
    for (Condition& cond : stmt.having_conditions) attach(cond);
    if (stmt.iuen && !stmt.iuen->child) {
      stmt.iuen->child = std::make_shared<SelectStatement>(
          build(resolve(stmt.iuen->placeholder_spc)));
      stmt.iuen->placeholder_spc.clear();
    }
    return stmt;
  }

  void attach(Condition& cond) {
    for (ConditionValue* value : {&cond.value1, cond.value2 ? &*cond.value2 : nullptr}) {
      if (!value || value->kind != ConditionValue::Kind::Placeholder) continue;
      *value = ConditionValue::make_subquery(std::make_shared<SelectStatement>(
          build(resolve(value->placeholder_spc))));
    }
  }

  size_t resolve(const std::vector<std::string>& parts) {
    StatementPositionCode spc = spc_from_strings(parts);
    auto it = index_.find(key(spc));
    if (it == index_.end()) {
      fail(ErrorKind::IncompleteForm,
           "placeholder " + spc_text(spc) + " has no matching entry");
    }
    if (consumed_[it->second]) {
      fail(ErrorKind::InputContract,
           "entry " + spc_text(spc) + " referenced more than once");
    }
    consumed_[it->second] = true;
    return it->second;
  }

  const NonNestedForm& nnf_;
  std::map<std::string, size_t> index_;
  std::vector<bool> consumed_;
};

}  // namespace

NonNestedForm decompose(const SelectStatement& ast, int max_depth) {
  return Decomposer(max_depth).run(ast);
}

SelectStatement synthesize(const NonNestedForm& nnf) {
  return Synthesizer(nnf).run();
}

std::string nnf_to_json(const NonNestedForm& nnf, int indent) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [spc, stmt] : nnf.entries) {
    entries.push_back({{"spc", spc_to_strings(spc)},
                       {"statement", nlohmann::json::parse(statement_to_json(stmt))}});
  }
  return entries.dump(indent);
}

NonNestedForm nnf_from_json(const std::string& json_text) {
  nlohmann::json entries;
  try {
    entries = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::MalformedDocument, "non-nested form JSON: " + std::string(e.what()));
  }
  if (!entries.is_array()) {
    fail(ErrorKind::MalformedDocument, "non-nested form JSON must be an array");
  }
  NonNestedForm nnf;
  try {
    for (const auto& entry : entries) {
      nnf.entries.emplace_back(
          spc_from_strings(entry.at("spc").get<std::vector<std::string>>()),
          statement_from_json(entry.at("statement").dump()));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedDocument, "non-nested form JSON: " + std::string(e.what()));
  }
  return nnf;
}

}  // namespace ryansql
