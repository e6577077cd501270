#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "navguard/error.hpp"
#include "navguard/pipeline.hpp"
#include "../support/fixtures.hpp"

using namespace navguard;
using namespace navguard::pipeline;
namespace fx = navguard::testing;
using verify::Status;

namespace {

Policy constant(const std::string& name, const Network& net, std::uint64_t seed = 1, int episodes = 600) {
  return {name, train::Algorithm::PPO, seed, episodes, 1.0, fx::share(net)};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& f) const { return (path_ / f).string(); }

 private:
  std::filesystem::path path_;
};

CampaignConfig quickConfig(const std::string& log) {
  CampaignConfig c;
  c.default_slack = 0.5;
  c.bnb.timeout_s = 60;
  c.log_path = log;
  c.gradient = false;
  return c;
}

ResultRecord rec(const std::string& policy, const std::string& prop, Status s, int episodes = 600,
                 std::uint64_t seed = 1, const std::string& alg = "ppo") {
  ResultRecord r;
  r.policy_id = policy;
  r.algorithm = alg;
  r.seed = seed;
  r.episodes = episodes;
  r.property = prop;
  r.method = kMethodVerifier;
  r.status = s;
  r.query_hash = policy + "/" + prop;
  return r;
}

const std::vector<std::string> kSix{"forward_collision", "left_collision", "right_collision",
                                    "alternating_loop",  "left_cycle",     "right_cycle"};

}  // namespace

TEST(Campaign, KnownVerdictMatrixForConstantPolicies) {
  TempDir dir("navguard_campaign_matrix");
  const std::vector<Policy> zoo{constant("fwd", fx::alwaysForward()), constant("left", fx::alwaysLeft()),
                                constant("right", fx::alwaysRight())};
  const CampaignResult res = runCampaign(zoo, quickConfig(dir.file("log.jsonl")));
  ASSERT_EQ(res.records.size(), 18u);
  EXPECT_EQ(res.new_solves, 18u);
  // Oracle: a constant policy violates exactly the properties whose bad
  // action is the one it always takes.
  const std::map<std::string, std::vector<Status>> expect{
      {"fwd", {Status::SAT, Status::SAT, Status::SAT, Status::UNSAT, Status::UNSAT, Status::UNSAT}},
      {"left", {Status::UNSAT, Status::UNSAT, Status::UNSAT, Status::UNSAT, Status::SAT, Status::UNSAT}},
      {"right", {Status::UNSAT, Status::UNSAT, Status::UNSAT, Status::UNSAT, Status::UNSAT, Status::SAT}}};
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    const ResultRecord& r = res.records[i];
    EXPECT_EQ(r.property, kSix[i % 6]);
    EXPECT_EQ(r.status, expect.at(r.policy_id)[i % 6]) << r.policy_id << " " << r.property;
    if (r.status == Status::SAT) {
      EXPECT_EQ(r.replay, "realized") << r.policy_id << " " << r.property << ": " << r.replay_detail;
      EXPECT_FALSE(r.witness.empty());
    } else {
      EXPECT_TRUE(r.replay.empty());
    }
  }
  const SafetyFilter f = filterSafe(res.records);
  EXPECT_EQ(f.unsafe, (std::vector<std::string>{"fwd", "left", "right"}));
  EXPECT_TRUE(f.survivors.empty());
}

TEST(Campaign, ResumeSkipsCompletedQueries) {
  TempDir dir("navguard_campaign_resume");
  const std::string log = dir.file("log.jsonl");
  std::vector<Policy> zoo{constant("a", fx::constantPolicy(1, 0, 0.5)),
                          constant("b", fx::constantPolicy(0, 1, 0.2), 1, 1200)};
  CampaignConfig cfg = quickConfig(log);
  cfg.gradient = true;
  const CampaignResult first = runCampaign(zoo, cfg);
  EXPECT_EQ(first.records.size(), 2u * (6 + 3));
  const std::string bytes = slurp(log);
  EXPECT_EQ(std::count(bytes.begin(), bytes.end(), '\n'), 18);
  EXPECT_EQ(std::count(bytes.begin(), bytes.end(), '\n'), std::ranges::count(slurp(log + ".timing.jsonl"), '\n'));
  EXPECT_EQ(bytes.find("wall_time"), std::string::npos);

  const CampaignResult again = runCampaign(zoo, cfg);
  EXPECT_EQ(again.new_solves, 0u);
  EXPECT_EQ(slurp(log), bytes);
  ASSERT_EQ(again.records.size(), first.records.size());
  for (std::size_t i = 0; i < first.records.size(); ++i) {
    EXPECT_EQ(again.records[i].toJson(), first.records[i].toJson());
  }

  zoo.push_back(constant("c", fx::alwaysForward(), 2));
  const CampaignResult grown = runCampaign(zoo, cfg);
  EXPECT_EQ(grown.new_solves, 9u);
  EXPECT_EQ(slurp(log).substr(0, bytes.size()), bytes);
}

TEST(Campaign, LogIsIndependentOfWorkerCount) {
  TempDir dir("navguard_campaign_workers");
  std::mt19937_64 rng(12);
  std::vector<Policy> zoo;
  for (int i = 0; i < 3; ++i) {
    zoo.push_back(constant("r" + std::to_string(i), fx::randomNetwork(rng, {9, 6, 3})));
  }
  CampaignConfig one = quickConfig(dir.file("one.jsonl"));
  one.gradient = true;
  CampaignConfig many = one;
  many.log_path = dir.file("many.jsonl");
  many.workers = 3;
  runCampaign(zoo, one);
  runCampaign(zoo, many);
  EXPECT_EQ(slurp(one.log_path), slurp(many.log_path));
}

TEST(Campaign, GradientRecordsOnlyForCollisions) {
  const std::vector<Policy> zoo{constant("fwd", fx::alwaysForward())};
  CampaignConfig cfg = quickConfig("");
  cfg.gradient = true;
  const CampaignResult res = runCampaign(zoo, cfg);
  ASSERT_EQ(res.records.size(), 9u);
  int gradient = 0;
  for (const ResultRecord& r : res.records) {
    if (r.method != kMethodGradient) continue;
    ++gradient;
    EXPECT_EQ(r.status, Status::SAT);
    EXPECT_EQ(r.config.at("iterations"), 40);
    EXPECT_EQ(r.config.at("step_size"), 0.01);
  }
  EXPECT_EQ(gradient, 3);
  const Report rep = report(res.records);
  EXPECT_EQ(rep.json["gradient"]["ppo"]["ratio"], 1.0);
}

TEST(Campaign, PerAlgorithmSlack) {
  CampaignConfig cfg;
  cfg.default_slack = 0.3;
  cfg.slack["ddqn"] = 0.042;
  Policy p = constant("x", fx::alwaysForward());
  props::PropertySpec spec;
  EXPECT_EQ(cfg.slackFor(p, spec), 0.3);
  p.algorithm = train::Algorithm::DDQN;
  EXPECT_EQ(cfg.slackFor(p, spec), 0.042);
  spec.slack = 1.5;
  EXPECT_EQ(cfg.slackFor(p, spec), 1.5);
}

TEST(Campaign, RejectsEmptyZoo) { EXPECT_THROW(runCampaign({}, quickConfig("")), ValueError); }

TEST(Campaign, CalibratedSlackOfConstantGap) {
  sim::ArenaSuite suite;
  suite.seed = 4;
  const auto s = calibrateSlacks({constant("a", fx::constantPolicy(3, 1, 0)), constant("b", fx::constantPolicy(3, 1, 0))},
                                 suite, 2, sim::defaultParams());
  EXPECT_EQ(s.at("ppo"), 2.0);
}

TEST(Records, JsonRoundTripAndLoad) {
  TempDir dir("navguard_records");
  ResultRecord r = rec("p", "left_cycle", Status::SAT);
  r.witness = {{0.1, 0.2}, {0.3, 1.0 / 3.0}};
  r.replay = "realized";
  r.config = Json{{"bnb", {{"timeout_s", 5}}}};
  EXPECT_EQ(ResultRecord::fromJson(r.toJson()).toJson(), r.toJson());
  std::ofstream(dir.file("log.jsonl")) << r.toJson().dump() << "\n\n" << rec("q", "x", Status::UNSAT).toJson().dump() << "\n";
  const auto back = loadResults(dir.file("log.jsonl"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].witness[1][1], 1.0 / 3.0);
  std::ofstream(dir.file("bad.jsonl")) << "{\"policy\": 1}\n";
  EXPECT_THROW(loadResults(dir.file("bad.jsonl")), FormatError);
  EXPECT_TRUE(loadResults(dir.file("missing.jsonl")).empty());
}

TEST(Filter, Rules) {
  std::vector<ResultRecord> rs;
  for (const std::string& p : kSix) {
    rs.push_back(rec("safe", p, Status::UNSAT));
    rs.push_back(rec("one_sat", p, p == "right_cycle" ? Status::SAT : Status::UNSAT));
    rs.push_back(rec("timeouts", p, Status::TIMEOUT));
    rs.push_back(rec("mixed", p, p == "left_cycle" ? Status::TIMEOUT : Status::UNSAT));
  }
  rs.push_back(rec("partial", "forward_collision", Status::UNSAT));
  ResultRecord g = rec("safe", "forward_collision", Status::SAT);
  g.method = kMethodGradient;
  rs.push_back(g);
  const SafetyFilter f = filterSafe(rs);
  EXPECT_EQ(f.survivors, std::vector<std::string>{"safe"});
  EXPECT_EQ(f.unsafe, std::vector<std::string>{"one_sat"});
  EXPECT_EQ(f.undetermined, (std::vector<std::string>{"timeouts", "mixed"}));
  EXPECT_EQ(f.incomplete, std::vector<std::string>{"partial"});
}

TEST(Bravery, ThresholdPoliciesMatchLinearScan) {
  BraveryConfig cfg;
  cfg.bnb.timeout_s = 30;
  const std::vector<double> grid = braveryGrid(cfg);
  ASSERT_EQ(grid.size(), 83u);
  EXPECT_EQ(grid.front(), 0.18);
  EXPECT_EQ(grid.back(), 1.0);
  for (double tau : {0.25, 0.5, 0.73}) {
    const Policy p = constant("t", fx::thresholdPolicy(tau, true));
    const BraveryScore s = braverySearch(p, 0.0, cfg);
    ASSERT_TRUE(s.score) << tau;
    EXPECT_NEAR(*s.score, tau, 0.01 + 1e-12);
    EXPECT_LE(s.probes.size(), 9u);
    // Oracle: probe every grid point.
    std::optional<double> scan;
    for (double d : grid) {
      props::PropertySpec spec;
      spec.kind = props::PropertyKind::BraveryProbe;
      spec.bravery_bound = d;
      if (verify::solve(props::buildProperty(spec, p.network, 0.0), cfg.bnb).status == Status::SAT) {
        scan = d;
        break;
      }
    }
    EXPECT_EQ(s.score, scan);
  }
}

TEST(Bravery, ExtremePolicies) {
  BraveryConfig cfg;
  const BraveryScore fwd = braverySearch(constant("f", fx::alwaysForward()), 0.5, cfg);
  EXPECT_EQ(fwd.score, 0.18);
  const BraveryScore never = braverySearch(constant("l", fx::alwaysLeft()), 0.5, cfg);
  EXPECT_TRUE(never.never);
  EXPECT_FALSE(never.score);
  EXPECT_EQ(never.toJson()["score"], "NEVER");
  EXPECT_EQ(never.probes.size(), 2u);
}

TEST(Bravery, DecidesAtBottomWhenForwardNearObstacle) {
  // y_F = 0.2 - x3: FORWARD wins by 0.01 for x3 <= 0.19, inside every probe box.
  Matrix w(3, 9, 0.0);
  w(0, 3) = -1.0;
  const BraveryScore s = braverySearch(constant("near", Network({{w, {0.2, 0.0, 0.0}}})), 0.01, BraveryConfig{});
  EXPECT_EQ(s.score, 0.18);
}

TEST(Bravery, NonMonotoneProbesAreAnError) {
  const BraveryConfig cfg;
  // FORWARD possible only close to the obstacle: SAT below an UNSAT point.
  auto reversed = [](double d) { return d < 0.5 ? Status::SAT : Status::UNSAT; };
  EXPECT_THROW(braverySearch("reversed", reversed, cfg), Error);
  auto timeout = [](double d) { return d > 0.5 ? Status::SAT : Status::TIMEOUT; };
  const BraveryScore t = braverySearch("slow", timeout, cfg);
  EXPECT_TRUE(t.undetermined);
  EXPECT_FALSE(t.score);
  auto step = [](double d) { return d >= 0.42 - 1e-12 ? Status::SAT : Status::UNSAT; };
  EXPECT_EQ(braverySearch("step", step, cfg).score, 0.42);
}

TEST(Bravery, RejectsOffGridRange) {
  BraveryConfig cfg;
  cfg.lo = 0.185;
  EXPECT_THROW(braveryGrid(cfg), ConfigError);
  cfg.lo = 0.1;
  EXPECT_THROW(braveryGrid(cfg), ConfigError);
}

TEST(Instability, Definition) {
  using S = Status;
  EXPECT_TRUE(isUnstable({S::UNSAT, S::UNSAT, S::SAT, S::UNSAT, S::UNSAT}));
  EXPECT_FALSE(isUnstable({S::SAT, S::SAT, S::UNSAT, S::UNSAT, S::UNSAT}));
  EXPECT_TRUE(isUnstable({S::TIMEOUT, S::UNSAT, S::SAT, S::TIMEOUT, S::TIMEOUT}));
  EXPECT_FALSE(isUnstable({S::UNSAT, S::TIMEOUT, S::ERROR, S::UNSAT, S::UNSAT}));
}

TEST(Instability, CountsFamilyPropertyPairsPerAlgorithm) {
  std::vector<ResultRecord> rs;
  const std::vector<int> eps{600, 1200, 1800, 2400, 3000};
  // Records deliberately out of checkpoint order.
  for (int i = 4; i >= 0; --i) {
    const std::string id = "ppo-s1-e" + std::to_string(eps[i]);
    rs.push_back(rec(id, "left_cycle", i == 3 ? Status::SAT : Status::UNSAT, eps[i], 1));
    rs.push_back(rec(id, "right_cycle", i == 4 ? Status::SAT : Status::UNSAT, eps[i], 1));
    rs.push_back(rec(id, "forward_collision", i == 4 ? Status::SAT : Status::UNSAT, eps[i], 1));
    const std::string id2 = "ppo-s2-e" + std::to_string(eps[i]);
    rs.push_back(rec(id2, "left_cycle", i == 0 ? Status::SAT : Status::UNSAT, eps[i], 2));
    rs.push_back(rec("ddqn-" + id, "left_cycle", Status::UNSAT, eps[i], 1, "ddqn"));
  }
  const InstabilityReport r = instabilityReport(rs);
  EXPECT_EQ(r.per_algorithm.at("ppo"), 2);
  EXPECT_EQ(r.per_algorithm.at("ddqn"), 0);
  ASSERT_EQ(r.families.size(), 4u);
  EXPECT_EQ(r.families[1].statuses.size(), 5u);
}

TEST(Report, EmptyCampaign) {
  const Report r = report({});
  EXPECT_TRUE(r.json["verdicts"].empty());
  EXPECT_TRUE(r.json["gradient"].empty());
  EXPECT_TRUE(r.json["survivors"].empty());
  EXPECT_NE(r.text.find("Verification verdicts"), std::string::npos);
}

TEST(Report, SingleRecord) {
  const Report r = report({rec("p", "forward_collision", Status::UNSAT)});
  EXPECT_EQ(r.json["verdicts"]["ppo"]["forward_collision"]["UNSAT"], 1);
  EXPECT_EQ(r.json["verdicts"]["ppo"]["forward_collision"]["sat_fraction"], 0.0);
  EXPECT_EQ(r.json["incomplete"], Json::array({"p"}));
}

TEST(Report, MixedStatusesExcludeTimeoutsFromFractions) {
  std::vector<ResultRecord> rs{rec("a", "left_cycle", Status::SAT), rec("b", "left_cycle", Status::UNSAT),
                               rec("c", "left_cycle", Status::TIMEOUT), rec("d", "left_cycle", Status::ERROR),
                               rec("e", "left_cycle", Status::SAT, 600, 1, "ddqn")};
  rs[0].replay = "realized";
  BraveryScore b1{"a", 0.4, false, false, "", {}}, b2{"b", std::nullopt, true, false, "", {}},
      b3{"c", 0.2, false, false, "", {}};
  const Report r = report(rs, {b1, b2, b3});
  const Json& row = r.json["verdicts"]["ppo"]["left_cycle"];
  EXPECT_EQ(row["SAT"], 1);
  EXPECT_EQ(row["TIMEOUT"], 1);
  EXPECT_EQ(row["ERROR"], 1);
  EXPECT_EQ(row["sat_fraction"], 0.5);
  EXPECT_EQ(r.json["replay"]["realized"], 1);
  EXPECT_EQ(r.json["replay"]["none"], 1);
  ASSERT_EQ(r.json["bravery"].size(), 3u);
  EXPECT_EQ(r.json["bravery"][0]["policy"], "c");
  EXPECT_EQ(r.json["bravery"][2]["score"], "NEVER");
  EXPECT_NE(r.text.find("50.0"), std::string::npos);
}
