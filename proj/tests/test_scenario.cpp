#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "resalloc/errors.hpp"
#include "resalloc/runner.hpp"
#include "resalloc/scenario.hpp"

using namespace resalloc;
using nlohmann::json;

namespace {

const std::string kFixtures = RESALLOC_FIXTURES_DIR;

json support_doc() {
  return json::parse(R"({
    "kind": "support_allocation", "dimension": 3, "budget": 1.0,
    "sources": [
      {"support": [1, 2], "tradeoff": {"type": "linear", "sigma_sq": 1}},
      {"support": [2, 3], "tradeoff": {"type": "power", "sigma_sq": 2, "alpha": 0.5}},
      {"support": [3], "tradeoffs": [{"type": "log_channel", "sigma_sq": 1, "a": 1, "budget_ref": 1}]}
    ]})");
}

template <class E>
std::string error_of(const json& doc, const ScenarioOverrides& ov = {}) {
  try {
    parse_scenario_text(doc.dump(), ov);
  } catch (const E& e) {
    return e.what();
  }
  return "<no error>";
}

}  // namespace

TEST(Scenario, PaperFixtureParses) {
  const auto s = parse_scenario(kFixtures + "/support_linear.json");
  EXPECT_EQ(s.kind, "support_allocation");
  const auto& body = std::get<SupportScenario>(s.body);
  EXPECT_EQ(body.problem.dimension(), 10u);
  EXPECT_EQ(body.problem.sources().size(), 5u);
  EXPECT_EQ(body.problem.sources()[0].support(), (Support{2, 4, 6, 9}));
  EXPECT_EQ(s.metadata.at("name"), "five sources over ten coordinates");
}

TEST(Scenario, PerCoordinateAndSharedTradeoffs) {
  const auto s = parse_scenario_text(support_doc().dump());
  const auto& p = std::get<SupportScenario>(s.body).problem;
  EXPECT_TRUE(p.sources()[0].is_broadcast());
  EXPECT_EQ(p.sources()[2].tradeoff_at(0).kind(), TradeoffKind::LogChannelPrecision);
}

TEST(Scenario, OutOfRangeSupportNamesPath) {
  auto doc = support_doc();
  doc["sources"][1]["support"][1] = 4;
  const auto msg = error_of<SemanticError>(doc);
  EXPECT_NE(msg.find("$.sources[1].support[1]"), std::string::npos) << msg;
  EXPECT_NE(msg.find("out of range"), std::string::npos) << msg;
}

TEST(Scenario, MissingBudgetIsSchemaError) {
  auto doc = support_doc();
  doc.erase("budget");
  const auto msg = error_of<SchemaError>(doc);
  EXPECT_NE(msg.find("budget"), std::string::npos) << msg;
  ScenarioOverrides ov;
  ov.budget = 3.0;
  const auto s = parse_scenario_text(doc.dump(), ov);
  EXPECT_EQ(std::get<SupportScenario>(s.body).problem.constraint().budget, 3.0);
}

TEST(Scenario, MistypedFieldIsSchemaError) {
  auto doc = support_doc();
  doc["sources"][0]["tradeoff"]["sigma_sq"] = "one";
  const auto msg = error_of<SchemaError>(doc);
  EXPECT_NE(msg.find("$.sources[0].tradeoff.sigma_sq"), std::string::npos) << msg;
}

TEST(Scenario, SemanticErrors) {
  auto doc = support_doc();
  doc["budget"] = -1.0;
  EXPECT_NE(error_of<SemanticError>(doc).find("budget"), std::string::npos);
  doc = support_doc();
  doc["dimension"] = 4;
  EXPECT_NE(error_of<SemanticError>(doc).find("observed by no source"), std::string::npos);
  doc = support_doc();
  doc["sources"][0]["tradeoff"]["sigma_sq"] = 0.0;
  EXPECT_NE(error_of<SemanticError>(doc).find("$.sources[0].tradeoff"), std::string::npos);
}

TEST(Scenario, SyntaxAndInputErrors) {
  EXPECT_THROW(parse_scenario_text("{\"kind\": "), ParseError);
  EXPECT_THROW(parse_scenario("/nonexistent/file.json"), InputError);
  EXPECT_THROW(parse_scenario_text("[1, 2]"), SchemaError);
  EXPECT_THROW(parse_scenario_text(R"({"kind": "unknown"})"), SchemaError);
}

TEST(Scenario, ExitCodeMapping) {
  EXPECT_EQ(exit_code_for(InputError("x")), exit_code::kInput);
  EXPECT_EQ(exit_code_for(ParseError("x")), exit_code::kSyntax);
  EXPECT_EQ(exit_code_for(SchemaError("$", "x")), exit_code::kSchema);
  EXPECT_EQ(exit_code_for(SemanticError("$", "x")), exit_code::kSemantic);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), exit_code::kFailure);
}

TEST(Run, PaperLinearFixture) {
  const auto res = run(parse_scenario(kFixtures + "/support_linear.json"));
  EXPECT_EQ(res.exit_code, exit_code::kOk);
  const std::vector<double> paper = {0.194, 0.207, 0.000, 0.599, 0.000};
  const auto alloc = res.result.at("allocation").get<std::vector<double>>();
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(alloc[i], paper[i], 5e-3);
  EXPECT_NE(render_table(res.result).find("0.599"), std::string::npos);
}

TEST(Run, AllocationsRoundTripThroughJson) {
  for (const char* f : {"/support_linear.json", "/support_power.json"}) {
    const auto res = run(parse_scenario(kFixtures + f));
    const auto alloc = res.result.at("allocation").get<std::vector<double>>();
    const auto back = json::parse(render_json(res.result)).at("allocation").get<std::vector<double>>();
    ASSERT_EQ(alloc.size(), back.size());
    for (std::size_t i = 0; i < alloc.size(); ++i) EXPECT_EQ(alloc[i], back[i]);
  }
}

TEST(Run, InfeasibleElectionGivesOnlyMinBias) {
  const auto res = run(parse_scenario(kFixtures + "/election_infeasible.json"));
  EXPECT_EQ(res.exit_code, exit_code::kInfeasible);
  EXPECT_EQ(res.result.at("status"), "infeasible");
  EXPECT_TRUE(res.result.contains("min_bias"));
  EXPECT_TRUE(res.result.contains("min_bias_allocation"));
  EXPECT_FALSE(res.result.contains("allocation"));
  EXPECT_FALSE(res.result.contains("bound"));
}

TEST(Run, NonConvergenceExitCode) {
  SolverOptions o;
  o.max_iterations = 1;
  const auto res = run(parse_scenario(kFixtures + "/support_power.json"), o);
  EXPECT_EQ(res.exit_code, exit_code::kNotConverged);
  EXPECT_EQ(res.result.at("status"), "not_converged");
}

TEST(Run, EveryKindDispatches) {
  const std::vector<std::string> docs = {
      R"({"kind": "aggregate", "losses": [1, 3, null]})",
      R"({"kind": "aggregate", "dimension": 2, "allocation": [1, 1],
          "sources": [{"support": [1, 2], "tradeoff": {"type": "linear", "sigma_sq": 1}},
                      {"support": [2], "tradeoff": {"type": "linear", "sigma_sq": 3}}],
          "estimates": [[5, 0], [4]]})",
      R"({"kind": "simplex_allocation", "budget": 1,
          "tradeoffs": [{"type": "power", "sigma_sq": 1, "alpha": 0.5},
                        {"type": "power", "sigma_sq": 2, "alpha": 0.5}]})",
      R"({"kind": "assignment", "resources": [3, 2, 1], "sense": "maximize",
          "tradeoffs": [{"type": "linear", "sigma_sq": 1}, {"type": "linear", "sigma_sq": 2},
                        {"type": "linear", "sigma_sq": 3}]})",
      R"({"kind": "linear_design", "budget": 1, "objective": "tail_bound", "delta": 0.1,
          "design": [[1, 0], [0, 1], [1, 1]],
          "precision_map": [{"rows": [1, 3], "source": 1, "tradeoff": {"type": "linear", "sigma_sq": 1}},
                            {"rows": [2], "source": 2, "tradeoff": {"type": "linear", "sigma_sq": 2}}]})",
      R"({"kind": "election_direct", "budget": 10, "advantage": 0.1,
          "regions": [{"name": "a", "weight": 2, "variance": {"type": "linear", "sigma_sq": 1}},
                      {"name": "b", "weight": 1, "variance": {"type": "linear", "sigma_sq": 1}}]})",
      R"({"kind": "election_indirect", "budget": 500, "advantage": 0.2,
          "regions": [{"name": "a", "weight": 1, "margin": 0.1},
                      {"name": "b", "weight": 1, "margin": 0.1}]})"};
  for (const auto& d : docs) {
    const auto s = parse_scenario_text(d);
    const auto res = run(s);
    EXPECT_EQ(res.exit_code, exit_code::kOk) << d << "\n" << res.result.dump(2);
    EXPECT_EQ(res.result.at("kind"), s.kind);
    EXPECT_FALSE(render_table(res.result).empty());
  }
}

TEST(Run, AggregateLossesResult) {
  const auto res = run(parse_scenario_text(R"({"kind": "aggregate", "losses": [1, 3]})"));
  EXPECT_NEAR(res.result.at("total_loss").get<double>(), 0.75, 1e-15);
}

TEST(Run, AssignmentResultIsOneBased) {
  const auto res = run(parse_scenario_text(R"({"kind": "assignment", "resources": [3, 2, 1],
      "sense": "minimize",
      "tradeoffs": [{"type": "linear", "sigma_sq": 1}, {"type": "linear", "sigma_sq": 2},
                    {"type": "linear", "sigma_sq": 3}]})"));
  EXPECT_EQ(res.result.at("permutation").get<std::vector<int>>(), (std::vector<int>{3, 2, 1}));
}

TEST(Run, RegimeStudyFromCsvFixture) {
  const auto s = parse_scenario(kFixtures + "/election_regime.json");
  const auto res = run(s);
  EXPECT_EQ(res.exit_code, exit_code::kOk);
  ASSERT_TRUE(res.result.contains("studies"));
  EXPECT_EQ(res.result.at("studies").size(), 2u);
}

TEST(Run, RegionsOverrideReplacesInlineRegions) {
  ScenarioOverrides ov;
  ov.regions_csv = kFixtures + "/regions51.csv";
  const auto s = parse_scenario(kFixtures + "/election_infeasible.json", ov);
  EXPECT_EQ(std::get<ElectionScenario>(s.body).problem.regions(), 51u);
}

TEST(Simulate, SupportScenarioPasses) {
  SimulationSpec spec;
  spec.trials = 20000;
  const auto res = simulate(parse_scenario(kFixtures + "/support_power.json"), {}, spec);
  EXPECT_EQ(res.exit_code, exit_code::kOk);
  ASSERT_TRUE(res.result.contains("simulation"));
}

TEST(Simulate, OutputStableForFixedSeed) {
  SimulationSpec a, b;
  a.trials = b.trials = 10000;
  a.threads = 1;
  b.threads = 4;
  const auto s = parse_scenario(kFixtures + "/support_linear.json");
  EXPECT_EQ(render_json(simulate(s, {}, a).result), render_json(simulate(s, {}, b).result));
}
