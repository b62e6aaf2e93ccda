#include "resalloc/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "resalloc/errors.hpp"
#include "resalloc/harness.hpp"

namespace resalloc {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string type_name(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return "null";
    case json::value_t::object: return "object";
    case json::value_t::array: return "array";
    case json::value_t::string: return "string";
    case json::value_t::boolean: return "boolean";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float: return "number";
    default: return "value";
  }
}

// A JSON value together with its location, for diagnostics.
class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const json& raw() const { return *j_; }
  const std::string& path() const { return path_; }

  void require_object() const {
    if (!j_->is_object()) fail("expected an object, got " + type_name(*j_));
  }
  bool has(const char* key) const { return j_->is_object() && j_->contains(key); }

  Node at(const char* key) const {
    require_object();
    if (!j_->contains(key)) {
      throw SchemaError(path_, std::string("missing required field '") + key + "'");
    }
    return Node((*j_)[key], path_ + "." + key);
  }
  std::optional<Node> maybe(const char* key) const {
    if (!has(key)) return std::nullopt;
    return Node((*j_)[key], path_ + "." + key);
  }

  std::size_t size() const {
    if (!j_->is_array()) fail("expected an array, got " + type_name(*j_));
    return j_->size();
  }
  Node at(std::size_t i) const {
    return Node((*j_)[i], path_ + "[" + std::to_string(i) + "]");
  }

  double number() const {
    if (!j_->is_number()) fail("expected a number, got " + type_name(*j_));
    return j_->get<double>();
  }
  /// Numbers, with null read as +infinity.
  double number_or_infinity() const {
    if (j_->is_null()) return kInf;
    return number();
  }
  std::string string() const {
    if (!j_->is_string()) fail("expected a string, got " + type_name(*j_));
    return j_->get<std::string>();
  }
  /// Positive 1-based index converted to 0-based.
  std::size_t index1() const {
    if (!j_->is_number_integer()) fail("expected an integer index, got " + type_name(*j_));
    const auto v = j_->get<long long>();
    if (v < 1) invalid("index " + std::to_string(v) + " is out of range (indices are 1-based)");
    return static_cast<std::size_t>(v - 1);
  }
  std::size_t count() const {
    if (!j_->is_number_integer()) fail("expected an integer, got " + type_name(*j_));
    const auto v = j_->get<long long>();
    if (v < 1) invalid("must be a positive integer, got " + std::to_string(v));
    return static_cast<std::size_t>(v);
  }
  std::vector<double> numbers() const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i).number();
    return out;
  }

  [[noreturn]] void fail(const std::string& what) const { throw SchemaError(path_, what); }
  [[noreturn]] void invalid(const std::string& what) const {
    throw SemanticError(path_, what);
  }

 private:
  const json* j_;
  std::string path_;
};

// Library validation failures become semantic errors located at `node`.
template <class F>
auto located(const Node& node, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const SemanticError&) {
    throw;
  } catch (const Error& e) {
    throw SemanticError(node.path(), e.what());
  }
}

double positive(const Node& n) {
  const double v = n.number();
  if (!std::isfinite(v) || v <= 0.0) {
    std::ostringstream os;
    os << "must be positive, got " << v;
    n.invalid(os.str());
  }
  return v;
}

TradeoffFunction parse_tradeoff(const Node& n) {
  n.require_object();
  const std::string type = n.at("type").string();
  return located(n, [&] {
    if (type == "linear") {
      return TradeoffFunction::linear_precision(n.at("sigma_sq").number());
    }
    if (type == "power") {
      return TradeoffFunction::power_precision(n.at("sigma_sq").number(),
                                               n.at("alpha").number());
    }
    if (type == "log_channel") {
      return TradeoffFunction::log_channel_precision(
          n.at("sigma_sq").number(), n.at("a").number(), n.at("budget_ref").number());
    }
    if (type == "exp_margin") {
      return TradeoffFunction::exp_margin_loss(n.at("eta").number());
    }
    if (type == "custom") {
      const Node samples = n.at("samples");
      std::vector<LossSample> knots;
      for (std::size_t k = 0; k < samples.size(); ++k) {
        const Node s = samples.at(k);
        if (s.size() != 2) s.fail("expected a [resource, loss] pair");
        knots.push_back({s.at(std::size_t{0}).number(), s.at(std::size_t{1}).number()});
      }
      return TradeoffFunction::custom_convex_loss(std::move(knots));
    }
    n.at("type").fail("unknown tradeoff type '" + type +
                      "' (expected linear, power, log_channel, exp_margin or custom)");
  });
}

std::vector<TradeoffFunction> parse_tradeoffs(const Node& n) {
  std::vector<TradeoffFunction> out;
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(parse_tradeoff(n.at(i)));
  if (out.empty()) n.invalid("needs at least one entry");
  return out;
}

SimplexConstraint parse_constraint(const Node& root, std::size_t n,
                                   const ScenarioOverrides& ov) {
  SimplexConstraint c;
  c.budget = ov.budget ? *ov.budget : positive(root.at("budget"));
  if (auto lo = root.maybe("lower")) c.lower = lo->numbers();
  if (auto up = root.maybe("upper")) {
    c.upper.resize(up->size());
    for (std::size_t i = 0; i < c.upper.size(); ++i) {
      c.upper[i] = up->at(i).number_or_infinity();
    }
  }
  const Node anchor = root.maybe("lower").value_or(root.maybe("budget").value_or(root));
  located(anchor, [&] { c.validate(n); });
  return c;
}

std::vector<double> parse_theta(const Node& root, std::size_t d, double fill = 0.0) {
  auto t = root.maybe("theta");
  if (!t) return std::vector<double>(d, fill);
  std::vector<double> theta = t->numbers();
  if (theta.size() != d) {
    t->invalid("has " + std::to_string(theta.size()) + " entries, expected " +
               std::to_string(d));
  }
  return theta;
}

std::vector<SourceModel> parse_sources(const Node& list, std::size_t d) {
  std::vector<SourceModel> sources;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Node src = list.at(i);
    src.require_object();
    const Node sup = src.at("support");
    Support support;
    for (std::size_t k = 0; k < sup.size(); ++k) {
      const Node entry = sup.at(k);
      const std::size_t j = entry.index1();
      if (j >= d) {
        entry.invalid("coordinate " + std::to_string(j + 1) +
                      " is out of range for dimension " + std::to_string(d));
      }
      if (!support.empty() && j <= support.back()) {
        entry.invalid("support indices must increase strictly");
      }
      support.push_back(j);
    }
    if (support.empty()) sup.invalid("support is empty");
    if (auto many = src.maybe("tradeoffs")) {
      auto fns = parse_tradeoffs(*many);
      if (fns.size() != support.size()) {
        many->invalid("needs one tradeoff per support entry");
      }
      sources.emplace_back(std::move(support), std::move(fns));
    } else {
      sources.emplace_back(std::move(support), parse_tradeoff(src.at("tradeoff")));
    }
  }
  if (sources.empty()) list.invalid("needs at least one source");
  return sources;
}

SupportProblem build_support(const Node& root, const ScenarioOverrides& ov) {
  const std::size_t d = root.at("dimension").count();
  const Node list = root.at("sources");
  auto sources = parse_sources(list, d);
  const SimplexConstraint c = parse_constraint(root, sources.size(), ov);
  try {
    return SupportProblem(d, std::move(sources), c);
  } catch (const UnobservableCoordinate& e) {
    throw SemanticError(list.path(), "coordinate " + std::to_string(e.coordinate() + 1) +
                                         " is observed by no source");
  }
}

AggregateScenario parse_aggregate(const Node& root, const ScenarioOverrides& ov) {
  AggregateScenario s;
  if (auto losses = root.maybe("losses")) {
    for (std::size_t i = 0; i < losses->size(); ++i) {
      const Node l = losses->at(i);
      const double v = l.number_or_infinity();
      if (!(v > 0.0)) l.invalid("losses must be positive");
      s.losses.push_back(v);
    }
    if (s.losses.empty()) losses->invalid("needs at least one loss");
    bool any_finite = false;
    for (double v : s.losses) any_finite = any_finite || std::isfinite(v);
    if (!any_finite) losses->invalid("every loss is infinite; nothing to aggregate");
    std::size_t d = 1;
    if (auto dim = root.maybe("dimension")) d = dim->count();
    s.theta = parse_theta(root, d);
    return s;
  }
  const std::size_t d = root.at("dimension").count();
  const Node list = root.at("sources");
  auto sources = parse_sources(list, d);
  const Node alloc = root.at("allocation");
  s.allocation = alloc.numbers();
  if (s.allocation.size() != sources.size()) {
    alloc.invalid("needs one entry per source");
  }
  for (std::size_t i = 0; i < s.allocation.size(); ++i) {
    if (!(s.allocation[i] >= 0.0) || !std::isfinite(s.allocation[i])) {
      alloc.at(i).invalid("allocations must be finite and nonnegative");
    }
  }
  double total = 0.0;
  for (double r : s.allocation) total += r;
  SimplexConstraint c;
  c.budget = ov.budget ? *ov.budget : std::max(total, 1.0);
  try {
    s.supported.emplace(d, sources, c);
    // Every coordinate needs positive precision at this allocation.
    (void)optimal_weights_supported(s.supported->sources(), s.allocation, d);
  } catch (const UnobservableCoordinate& e) {
    throw SemanticError(list.path(), "coordinate " + std::to_string(e.coordinate() + 1) +
                                         " has no informative source");
  }
  if (auto est = root.maybe("estimates")) {
    if (est->size() != sources.size()) est->invalid("needs one estimate per source");
    for (std::size_t i = 0; i < est->size(); ++i) {
      auto v = est->at(i).numbers();
      if (v.size() != sources[i].support_size()) {
        est->at(i).invalid("must have one value per support entry");
      }
      s.estimates.push_back(std::move(v));
    }
  }
  s.theta = parse_theta(root, d);
  return s;
}

SimplexScenario parse_simplex(const Node& root, const ScenarioOverrides& ov) {
  SimplexScenario s;
  const Node list = root.at("tradeoffs");
  s.tradeoffs = parse_tradeoffs(list);
  for (std::size_t i = 0; i < s.tradeoffs.size(); ++i) {
    if (!s.tradeoffs[i].has_concave_precision()) {
      list.at(i).invalid("simplex allocation needs a precision-type tradeoff "
                         "(linear, power or log_channel)");
    }
  }
  s.constraint = parse_constraint(root, s.tradeoffs.size(), ov);
  s.theta = parse_theta(root, 1);
  return s;
}

AssignmentScenario parse_assignment(const Node& root) {
  AssignmentScenario s;
  const Node list = root.at("tradeoffs");
  s.tradeoffs = parse_tradeoffs(list);
  const Node res = root.at("resources");
  s.resources = res.numbers();
  if (s.resources.size() != s.tradeoffs.size()) {
    res.invalid("needs as many resource values as tradeoffs");
  }
  for (std::size_t i = 0; i < s.resources.size(); ++i) {
    if (!(s.resources[i] >= 0.0) || !std::isfinite(s.resources[i])) {
      res.at(i).invalid("resource values must be finite and nonnegative");
    }
  }
  if (auto sense = root.maybe("sense")) {
    const std::string v = sense->string();
    if (v == "maximize") {
      s.sense = Sense::Maximize;
    } else if (v == "minimize") {
      s.sense = Sense::Minimize;
    } else {
      sense->fail("expected 'maximize' or 'minimize', got '" + v + "'");
    }
  }
  s.theta = parse_theta(root, 1);
  return s;
}

DesignScenario parse_design(const Node& root, const ScenarioOverrides& ov) {
  const Node xs = root.at("design");
  const std::size_t rows = xs.size();
  if (rows == 0) xs.invalid("design has no rows");
  const std::size_t d = xs.at(std::size_t{0}).size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  for (std::size_t n = 0; n < rows; ++n) {
    const Node row = xs.at(n);
    if (row.size() != d) row.invalid("row length differs from the first row");
    for (std::size_t k = 0; k < d; ++k) {
      x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = row.at(k).number();
    }
  }

  const Node map = root.at("precision_map");
  std::vector<std::optional<PrecisionEntry>> entries(rows);
  std::size_t n_sources = 0;
  for (std::size_t b = 0; b < map.size(); ++b) {
    const Node rec = map.at(b);
    rec.require_object();
    const std::size_t source = rec.at("source").index1();
    const TradeoffFunction f = parse_tradeoff(rec.at("tradeoff"));
    const Node block = rec.at("rows");
    for (std::size_t k = 0; k < block.size(); ++k) {
      const Node entry = block.at(k);
      const std::size_t n = entry.index1();
      if (n >= rows) {
        entry.invalid("row " + std::to_string(n + 1) + " is out of range for " +
                      std::to_string(rows) + " design rows");
      }
      if (entries[n]) entry.invalid("row " + std::to_string(n + 1) + " is mapped twice");
      entries[n] = PrecisionEntry{source, f};
    }
    n_sources = std::max(n_sources, source + 1);
  }
  std::vector<PrecisionEntry> flat;
  for (std::size_t n = 0; n < rows; ++n) {
    if (!entries[n]) {
      map.invalid("row " + std::to_string(n + 1) + " has no precision entry");
    }
    flat.push_back(*entries[n]);
  }

  DesignObjective kind = DesignObjective::TraceInverse;
  if (auto obj = root.maybe("objective")) {
    const std::string v = obj->string();
    if (v == "trace_inverse") {
      kind = DesignObjective::TraceInverse;
    } else if (v == "tail_bound") {
      kind = DesignObjective::TailBound;
    } else {
      obj->fail("expected 'trace_inverse' or 'tail_bound', got '" + v + "'");
    }
  }
  double delta = 0.1;
  if (auto dn = root.maybe("delta")) {
    delta = dn->number();
    if (!(delta > 0.0 && delta < 1.0)) dn->invalid("delta must lie in (0, 1)");
  }
  const SimplexConstraint c = parse_constraint(root, n_sources, ov);
  const double lambda = kind == DesignObjective::TailBound ? confidence_weight_for(delta) : 0.0;
  DesignProblem problem = located(xs, [&] {
    return DesignProblem(std::move(x), std::move(flat), c, kind, lambda);
  });
  return DesignScenario{std::move(problem), delta, parse_theta(root, d)};
}

std::vector<double> parse_budgets(const Node& root) {
  std::vector<double> budgets;
  if (auto b = root.maybe("budgets")) {
    for (std::size_t k = 0; k < b->size(); ++k) {
      budgets.push_back(positive(b->at(k)));
      if (k > 0 && budgets[k] < budgets[k - 1]) {
        b->at(k).invalid("budgets must be ascending");
      }
    }
  }
  return budgets;
}

ElectionScenario parse_election(const Node& root, bool indirect,
                                const ScenarioOverrides& ov,
                                const std::string& base_dir) {
  const Node adv = root.at("advantage");
  const double t = positive(adv);
  std::vector<std::string> names;
  std::vector<double> weights, margins;
  std::vector<TradeoffFunction> variances;

  std::optional<std::string> csv = ov.regions_csv;
  if (!csv && indirect && root.has("regions_csv")) {
    std::filesystem::path p = root.at("regions_csv").string();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    csv = p.string();
  }
  if (csv && indirect) {
    RegionTable table = load_regions_csv(*csv);
    names = std::move(table.names);
    weights = std::move(table.weights);
    margins = std::move(table.margins);
    for (std::size_t i = 0; i < margins.size(); ++i) {
      if (!(margins[i] > 0.0 && margins[i] <= 0.5)) {
        throw SemanticError(*csv + ": row " + std::to_string(i + 1),
                            "margin must lie in (0, 1/2]");
      }
      if (!(weights[i] >= 0.0)) {
        throw SemanticError(*csv + ": row " + std::to_string(i + 1),
                            "weight must be nonnegative");
      }
    }
  } else {
    const Node regions = root.at("regions");
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const Node reg = regions.at(i);
      reg.require_object();
      names.push_back(reg.has("name") ? reg.at("name").string()
                                      : "region " + std::to_string(i + 1));
      const Node w = reg.at("weight");
      weights.push_back(w.number());
      if (!(weights.back() >= 0.0)) w.invalid("weight must be nonnegative");
      if (indirect) {
        const Node m = reg.at("margin");
        margins.push_back(m.number());
        if (!(margins.back() > 0.0 && margins.back() <= 0.5)) {
          m.invalid("margin must lie in (0, 1/2]");
        }
      } else {
        variances.push_back(parse_tradeoff(reg.at("variance")));
      }
    }
    if (names.empty()) regions.invalid("needs at least one region");
  }
  const Node anchor = root.has("regions") ? root.at("regions") : adv;
  const SimplexConstraint c = parse_constraint(root, names.size(), ov);
  ElectionProblem problem = located(anchor, [&] {
    return indirect ? ElectionProblem::indirect(weights, margins, t, c)
                    : ElectionProblem::direct(weights, std::move(variances), t, c);
  });
  std::vector<double> theta;
  if (root.has("theta")) {
    theta = parse_theta(root, names.size());
  } else {
    theta = located(adv, [&] { return default_decision_theta(problem); });
  }
  std::vector<double> budgets;
  if (indirect) budgets = parse_budgets(root);
  return ElectionScenario{std::move(problem), std::move(names), std::move(budgets),
                          std::move(theta)};
}

Scenario build(const json& doc, const ScenarioOverrides& ov, const std::string& base_dir) {
  const Node root(doc, "$");
  root.require_object();
  Scenario s;
  s.kind = root.at("kind").string();
  if (auto meta = root.maybe("metadata")) {
    meta->require_object();
    s.metadata = meta->raw();
  }
  if (s.kind == "aggregate") {
    s.body = parse_aggregate(root, ov);
  } else if (s.kind == "simplex_allocation") {
    s.body = parse_simplex(root, ov);
  } else if (s.kind == "assignment") {
    s.body = parse_assignment(root);
  } else if (s.kind == "support_allocation") {
    SupportProblem p = build_support(root, ov);
    std::vector<double> theta = parse_theta(root, p.dimension());
    s.body = SupportScenario{std::move(p), std::move(theta)};
  } else if (s.kind == "linear_design") {
    s.body = parse_design(root, ov);
  } else if (s.kind == "election_direct") {
    s.body = parse_election(root, false, ov, base_dir);
  } else if (s.kind == "election_indirect") {
    s.body = parse_election(root, true, ov, base_dir);
  } else {
    root.at("kind").fail("unknown kind '" + s.kind +
                         "' (expected aggregate, simplex_allocation, assignment, "
                         "support_allocation, linear_design, election_direct or "
                         "election_indirect)");
  }
  return s;
}

}  // namespace

Scenario parse_scenario_text(const std::string& text, const ScenarioOverrides& overrides,
                             const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return build(doc, overrides, base_dir);
}

Scenario parse_scenario(const std::string& path, const ScenarioOverrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw InputError("cannot read scenario file " + path);
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_scenario_text(buf.str(), overrides, dir.empty() ? "." : dir.string());
}

json tradeoff_to_json(const TradeoffFunction& f) {
  switch (f.kind()) {
    case TradeoffKind::LinearPrecision:
      return {{"type", "linear"}, {"sigma_sq", f.sigma_sq()}};
    case TradeoffKind::PowerPrecision:
      return {{"type", "power"}, {"sigma_sq", f.sigma_sq()}, {"alpha", f.alpha()}};
    case TradeoffKind::LogChannelPrecision:
      return {{"type", "log_channel"},
              {"sigma_sq", f.sigma_sq()},
              {"a", f.a()},
              {"budget_ref", f.budget_ref()}};
    case TradeoffKind::ExpMarginLoss:
      return {{"type", "exp_margin"}, {"eta", f.eta()}};
    case TradeoffKind::CustomConvexLoss: {
      json samples = json::array();
      for (const auto& s : f.samples()) samples.push_back({s.resource, s.loss});
      return {{"type", "custom"}, {"samples", samples}};
    }
  }
  return json::object();
}

}  // namespace resalloc
