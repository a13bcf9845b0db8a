#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "roadsurf/errors.hpp"

namespace roadsurf::fuzzy {

// ---------------------------------------------------------------------------
// Membership functions
// ---------------------------------------------------------------------------

// Piecewise-linear membership function: triangle (3 breakpoints a<=b<=c) or
// trapezoid (4 breakpoints a<=b<=c<=d). Degenerate edges (a==b or c==d) are
// treated as vertical: the peak/plateau value 1 is reached at the shared
// breakpoint.
class MembershipFunction {
 public:
  static MembershipFunction triangle(double a, double b, double c) {
    return MembershipFunction({a, b, c});
  }

  static MembershipFunction trapezoid(double a, double b, double c, double d) {
    return MembershipFunction({a, b, c, d});
  }

  static MembershipFunction from_breakpoints(const std::vector<double>& pts) {
    return MembershipFunction(pts);
  }

  bool is_triangle() const { return pts_.size() == 3; }
  const std::vector<double>& breakpoints() const { return pts_; }

  double evaluate(double x) const {
    if (pts_.size() == 3) {
      const double a = pts_[0], b = pts_[1], c = pts_[2];
      if (x < a || x > c) return 0.0;
      if (x == b) return 1.0;
      if (x < b) return (x - a) / (b - a);
      return (c - x) / (c - b);
    }
    const double a = pts_[0], b = pts_[1], c = pts_[2], d = pts_[3];
    if (x < a || x > d) return 0.0;
    if (x >= b && x <= c) return 1.0;
    if (x < b) return (x - a) / (b - a);
    return (d - x) / (d - c);
  }

 private:
  explicit MembershipFunction(std::vector<double> pts) : pts_(std::move(pts)) {
    if (pts_.size() != 3 && pts_.size() != 4) {
      throw config_error("membership function needs 3 (triangle) or 4 (trapezoid) breakpoints");
    }
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      if (!(pts_[i] <= pts_[i + 1]) || !std::isfinite(pts_[i])) {
        throw config_error("membership breakpoints must be finite and non-decreasing");
      }
    }
    if (!std::isfinite(pts_.back())) {
      throw config_error("membership breakpoints must be finite and non-decreasing");
    }
  }

  std::vector<double> pts_;
};

inline double eval_membership(const MembershipFunction& mf, double x) { return mf.evaluate(x); }

// ---------------------------------------------------------------------------
// Variables
// ---------------------------------------------------------------------------

// A named input with a closed universe [lo, hi] and an ordered list of terms.
// Crisp values outside the universe are clamped before evaluation so sensor
// glitches degrade gracefully instead of aborting the pipeline.
class FuzzyVariable {
 public:
  struct Term {
    std::string label;
    MembershipFunction mf;
  };

  FuzzyVariable(std::string name, double lo, double hi) : name_(std::move(name)), lo_(lo), hi_(hi) {
    if (!(lo < hi)) throw config_error("variable '" + name_ + "': universe must satisfy lo < hi");
  }

  FuzzyVariable& add_term(const std::string& label, MembershipFunction mf) {
    if (has_term(label)) {
      throw config_error("variable '" + name_ + "': duplicate term '" + label + "'");
    }
    for (double p : mf.breakpoints()) {
      if (p < lo_ || p > hi_) {
        throw config_error("variable '" + name_ + "': term '" + label +
                           "' has breakpoints outside the universe");
      }
    }
    terms_.push_back({label, std::move(mf)});
    return *this;
  }

  const std::string& name() const { return name_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<Term>& terms() const { return terms_; }

  bool has_term(const std::string& label) const {
    return std::any_of(terms_.begin(), terms_.end(),
                       [&](const Term& t) { return t.label == label; });
  }

  const MembershipFunction& term(const std::string& label) const {
    for (const Term& t : terms_) {
      if (t.label == label) return t.mf;
    }
    throw config_error("variable '" + name_ + "': no term '" + label + "'");
  }

  double clamp(double x) const { return std::min(hi_, std::max(lo_, x)); }

  std::map<std::string, double> fuzzify(double x) const {
    const double xc = clamp(x);
    std::map<std::string, double> out;
    for (const Term& t : terms_) out[t.label] = t.mf.evaluate(xc);
    return out;
  }

 private:
  std::string name_;
  double lo_, hi_;
  std::vector<Term> terms_;
};

inline std::map<std::string, double> fuzzify(const FuzzyVariable& var, double x) {
  return var.fuzzify(x);
}

// ---------------------------------------------------------------------------
// Rules and system
// ---------------------------------------------------------------------------

// Conjunction of (variable, term) conditions; fires at the min of its
// antecedent degrees.
struct FuzzyRule {
  std::map<std::string, std::string> antecedent;  // variable -> term
  std::string consequent;                         // output label
};

using FuzzifiedInputs = std::map<std::string, std::map<std::string, double>>;

inline double fire_rule(const FuzzyRule& rule, const FuzzifiedInputs& fuzzified) {
  double activation = 1.0;
  for (const auto& [var, term] : rule.antecedent) {
    auto vit = fuzzified.find(var);
    if (vit == fuzzified.end()) {
      throw data_error("rule references variable '" + var + "' missing from fuzzified inputs");
    }
    auto tit = vit->second.find(term);
    if (tit == vit->second.end()) {
      throw data_error("rule references term '" + term + "' missing on variable '" + var + "'");
    }
    activation = std::min(activation, tit->second);
  }
  return activation;
}

// Argmax over aggregated label activations with an explicit priority order for
// ties. Exposed so the tie-break semantics can be tested in isolation.
inline std::string pick_label(const std::map<std::string, double>& activations,
                              const std::vector<std::string>& tie_break) {
  std::string best;
  double best_act = -1.0;
  for (const std::string& label : tie_break) {
    auto it = activations.find(label);
    const double a = (it == activations.end()) ? 0.0 : it->second;
    if (a > best_act) {
      best_act = a;
      best = label;
    }
  }
  return best;
}

struct InferenceResult {
  std::string label;
  std::map<std::string, double> activations;  // every output label, including zeros
};

// Mamdani-style categorical system: min conjunction, max aggregation per
// output label, argmax defuzzification. Immutable after construction; all
// queries are const and safe to run concurrently.
class FuzzySystem {
 public:
  FuzzySystem(std::vector<FuzzyVariable> variables, std::vector<std::string> output_labels,
              std::vector<FuzzyRule> rules, std::vector<std::string> tie_break)
      : variables_(std::move(variables)),
        output_labels_(std::move(output_labels)),
        rules_(std::move(rules)),
        tie_break_(std::move(tie_break)) {
    validate();
  }

  const std::vector<FuzzyVariable>& variables() const { return variables_; }
  const std::vector<std::string>& output_labels() const { return output_labels_; }
  const std::vector<FuzzyRule>& rules() const { return rules_; }
  const std::vector<std::string>& tie_break() const { return tie_break_; }

  const FuzzyVariable& variable(const std::string& name) const {
    for (const FuzzyVariable& v : variables_) {
      if (v.name() == name) return v;
    }
    throw config_error("no variable '" + name + "' in system");
  }

  bool has_variable(const std::string& name) const {
    return std::any_of(variables_.begin(), variables_.end(),
                       [&](const FuzzyVariable& v) { return v.name() == name; });
  }

  FuzzifiedInputs fuzzify_all(const std::map<std::string, double>& crisp) const {
    FuzzifiedInputs out;
    for (const FuzzyVariable& v : variables_) {
      auto it = crisp.find(v.name());
      if (it == crisp.end()) {
        throw data_error("missing crisp input for variable '" + v.name() + "'");
      }
      if (!std::isfinite(it->second)) {
        throw data_error("non-finite crisp input for variable '" + v.name() + "'");
      }
      out[v.name()] = v.fuzzify(it->second);
    }
    return out;
  }

  InferenceResult infer(const std::map<std::string, double>& crisp) const {
    const FuzzifiedInputs fz = fuzzify_all(crisp);
    std::map<std::string, double> activations;
    for (const std::string& label : output_labels_) activations[label] = 0.0;
    for (const FuzzyRule& rule : rules_) {
      const double a = fire_rule(rule, fz);
      double& slot = activations[rule.consequent];
      slot = std::max(slot, a);
    }
    bool any = false;
    for (const auto& [label, a] : activations) any = any || a > 0.0;
    if (!any) throw no_rule_fired("no rule fired for the given inputs");
    return {pick_label(activations, tie_break_), activations};
  }

 private:
  void validate() const {
    if (rules_.empty()) throw config_error("rule base must not be empty");
    if (output_labels_.empty()) throw config_error("output label set must not be empty");
    if (tie_break_.size() != output_labels_.size()) {
      throw config_error("tie_break must be a permutation of the output labels");
    }
    for (const std::string& label : output_labels_) {
      if (std::count(tie_break_.begin(), tie_break_.end(), label) != 1) {
        throw config_error("tie_break must be a permutation of the output labels");
      }
    }
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      const FuzzyRule& r = rules_[i];
      if (std::count(output_labels_.begin(), output_labels_.end(), r.consequent) == 0) {
        throw config_error("rule " + std::to_string(i) + ": unknown consequent '" + r.consequent +
                           "'");
      }
      if (r.antecedent.empty()) {
        throw config_error("rule " + std::to_string(i) + ": empty antecedent");
      }
      for (const auto& [var, term] : r.antecedent) {
        if (!has_variable(var)) {
          throw config_error("rule " + std::to_string(i) + ": unknown variable '" + var + "'");
        }
        if (!variable(var).has_term(term)) {
          throw config_error("rule " + std::to_string(i) + ": variable '" + var +
                             "' has no term '" + term + "'");
        }
      }
    }
  }

  std::vector<FuzzyVariable> variables_;
  std::vector<std::string> output_labels_;
  std::vector<FuzzyRule> rules_;
  std::vector<std::string> tie_break_;
};

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------
// {
//   "variables": [{"name": ..., "universe": [lo, hi], "terms": {label: [breakpoints...]}}],
//   "outputs":  [...],
//   "tie_break": [...],
//   "rules":    [{"if": {"var": "term", ...}, "then": "label"}]
// }
// Breakpoint arrays of length 3 are triangles, length 4 trapezoids.

inline nlohmann::ordered_json to_json(const FuzzySystem& sys) {
  nlohmann::ordered_json j;
  j["variables"] = nlohmann::ordered_json::array();
  for (const FuzzyVariable& v : sys.variables()) {
    nlohmann::ordered_json jv;
    jv["name"] = v.name();
    jv["universe"] = {v.lo(), v.hi()};
    nlohmann::ordered_json terms;
    for (const auto& t : v.terms()) terms[t.label] = t.mf.breakpoints();
    jv["terms"] = std::move(terms);
    j["variables"].push_back(std::move(jv));
  }
  j["outputs"] = sys.output_labels();
  j["tie_break"] = sys.tie_break();
  j["rules"] = nlohmann::ordered_json::array();
  for (const FuzzyRule& r : sys.rules()) {
    nlohmann::ordered_json jr;
    jr["if"] = r.antecedent;
    jr["then"] = r.consequent;
    j["rules"].push_back(std::move(jr));
  }
  return j;
}

inline FuzzySystem system_from_json(const nlohmann::json& j) {
  try {
    std::vector<FuzzyVariable> variables;
    for (const auto& jv : j.at("variables")) {
      const auto universe = jv.at("universe");
      FuzzyVariable var(jv.at("name").get<std::string>(), universe.at(0).get<double>(),
                        universe.at(1).get<double>());
      for (const auto& [label, pts] : jv.at("terms").items()) {
        var.add_term(label, MembershipFunction::from_breakpoints(pts.get<std::vector<double>>()));
      }
      variables.push_back(std::move(var));
    }
    std::vector<FuzzyRule> rules;
    for (const auto& jr : j.at("rules")) {
      FuzzyRule r;
      r.antecedent = jr.at("if").get<std::map<std::string, std::string>>();
      r.consequent = jr.at("then").get<std::string>();
      rules.push_back(std::move(r));
    }
    return FuzzySystem(std::move(variables), j.at("outputs").get<std::vector<std::string>>(),
                       std::move(rules), j.at("tie_break").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("malformed fuzzy system document: ") + e.what());
  }
}

}  // namespace roadsurf::fuzzy
