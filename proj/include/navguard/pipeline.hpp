#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "navguard/attack.hpp"
#include "navguard/querylang.hpp"
#include "navguard/sim.hpp"
#include "navguard/train.hpp"
#include "navguard/verifier.hpp"

namespace navguard::pipeline {

using Json = nlohmann::json;
using verify::Status;

// One checkpoint of the zoo.
struct Policy {
  std::string id;
  train::Algorithm algorithm = train::Algorithm::DDQN;
  std::uint64_t seed = 0;
  int episodes = 0;
  double success_rate = 0.0;
  std::shared_ptr<const Network> network;
};

Policy fromRecord(const train::PolicyRecord& rec);
// Every *.nnet in dir, ordered by (algorithm, seed, episodes, id).
std::vector<Policy> loadZoo(const std::string& dir);
void sortZoo(std::vector<Policy>& zoo);

inline const std::string kMethodVerifier = "verifier";
inline const std::string kMethodGradient = "gradient";

struct ResultRecord {
  std::string policy_id;
  std::string algorithm;
  std::uint64_t seed = 0;
  int episodes = 0;
  std::string property;  // kind name
  std::string query;     // query name
  std::string method;
  Status status = Status::ERROR;
  std::string query_hash;
  double slack = 0.0;
  Json config;
  std::vector<Vector> witness;  // per copy, empty unless SAT
  std::string replay;           // "realized", "not_realized", "unrealizable"; verifier SAT only
  std::string replay_detail;
  std::string diagnostic;

  Json toJson() const;
  static ResultRecord fromJson(const Json& j);
  std::string key() const { return query_hash + "/" + method; }
};

// One JSON object per line; blank lines ignored. Missing file -> empty.
std::vector<ResultRecord> loadResults(const std::string& path);

struct CampaignConfig {
  std::vector<props::PropertySpec> properties = props::standardSuite(90.0);
  // Per algorithm name; properties with their own slack override it.
  std::map<std::string, double> slack;
  double default_slack = 0.0;
  verify::BnbConfig bnb;
  // Queries solved concurrently; each solve uses bnb.workers threads.
  std::size_t workers = 1;
  // Also run the gradient attack on single-step collision properties.
  bool gradient = true;
  int attack_iterations = 40;
  double attack_step = 0.01;
  int attack_restarts = 1;
  std::uint64_t attack_seed = 0;
  bool replay = true;
  sim::SimParams sim;
  // Append-only results log and its timing sidecar (<log>.timing.jsonl).
  std::string log_path;

  double slackFor(const Policy& p, const props::PropertySpec& spec) const;
};

struct CampaignResult {
  // Every record of the campaign, in campaign order, including ones loaded
  // from an earlier run.
  std::vector<ResultRecord> records;
  std::size_t new_solves = 0;
};

CampaignResult runCampaign(const std::vector<Policy>& zoo, const CampaignConfig& config);

// Per algorithm: 75th percentile (nearest rank) of the winner-minus-runner-up
// margins pooled over that algorithm's policies.
std::map<std::string, double> calibrateSlacks(const std::vector<Policy>& zoo,
                                              const sim::ArenaSuite& suite, std::size_t episodes,
                                              const sim::SimParams& params, double percentile = 75.0);

// Replays a verifier SAT witness of one property in the simulator.
sim::ReplayResult replayWitness(const Network& net, const props::PropertySpec& spec,
                                const std::vector<Vector>& witness, const sim::SimParams& base);

struct SafetyFilter {
  std::vector<std::string> survivors;     // all six UNSAT
  std::vector<std::string> unsafe;        // some SAT
  std::vector<std::string> undetermined;  // no SAT, some TIMEOUT or ERROR
  std::vector<std::string> incomplete;    // fewer than six verdicts
};

// Uses verifier records of the six standard properties.
SafetyFilter filterSafe(const std::vector<ResultRecord>& records);

struct BraveryConfig {
  double lo = props::kBraveryLo;
  double hi = 1.0;
  double precision = 0.01;
  verify::BnbConfig bnb;
};

struct BraveryScore {
  std::string policy_id;
  // Smallest grid distance with FORWARD possible; unset with never or
  // undetermined.
  std::optional<double> score;
  bool never = false;
  bool undetermined = false;
  std::string diagnostic;
  // Grid value -> probe status, in probe order.
  std::vector<std::pair<double, Status>> probes;

  Json toJson() const;
};

// Grid values lo, lo + precision, ..., hi.
std::vector<double> braveryGrid(const BraveryConfig& config);

// Binary search over the grid. Throws Error when the probes are not monotone.
BraveryScore braverySearch(const Policy& policy, double slack, const BraveryConfig& config);
// Same search over an arbitrary probe (grid value -> verdict).
BraveryScore braverySearch(const std::string& policy_id, const std::function<Status(double)>& probe,
                           const BraveryConfig& config);

bool isUnstable(const std::vector<Status>& ordered);

struct FamilyInstability {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string property;
  std::vector<Status> statuses;  // by checkpoint
  bool unstable = false;
};

struct InstabilityReport {
  std::vector<FamilyInstability> families;
  std::map<std::string, int> per_algorithm;  // unstable (family, property) pairs
};

InstabilityReport instabilityReport(const std::vector<ResultRecord>& records,
                                    const std::vector<std::string>& properties = {"left_cycle",
                                                                                  "right_cycle"});

struct Report {
  std::string text;
  Json json;
};

Report report(const std::vector<ResultRecord>& records, const std::vector<BraveryScore>& bravery = {});

}  // namespace navguard::pipeline
