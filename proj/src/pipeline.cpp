#include "navguard/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "navguard/error.hpp"

namespace navguard::pipeline {

Policy fromRecord(const train::PolicyRecord& rec) {
  return {rec.id,       rec.algorithm, rec.seed, rec.episodes_trained, rec.eval_success_rate,
          std::make_shared<const Network>(rec.network)};
}

void sortZoo(std::vector<Policy>& zoo) {
  std::sort(zoo.begin(), zoo.end(), [](const Policy& a, const Policy& b) {
    return std::tuple(static_cast<int>(a.algorithm), a.seed, a.episodes, a.id) <
           std::tuple(static_cast<int>(b.algorithm), b.seed, b.episodes, b.id);
  });
}

std::vector<Policy> loadZoo(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("zoo directory '" + dir + "' does not exist");
  std::vector<Policy> zoo;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".nnet") continue;
    zoo.push_back(fromRecord(train::loadPolicy(entry.path().string())));
  }
  sortZoo(zoo);
  return zoo;
}

// ---------------------------------------------------------------------------
// Records

Json ResultRecord::toJson() const {
  Json j{{"policy", policy_id},
         {"algorithm", algorithm},
         {"seed", seed},
         {"episodes", episodes},
         {"property", property},
         {"query", query},
         {"method", method},
         {"status", verify::statusName(status)},
         {"query_hash", query_hash},
         {"slack", slack},
         {"config", config}};
  if (!witness.empty()) j["witness"] = witness;
  if (!replay.empty()) {
    j["replay"] = replay;
    j["replay_detail"] = replay_detail;
  }
  if (!diagnostic.empty()) j["diagnostic"] = diagnostic;
  return j;
}

ResultRecord ResultRecord::fromJson(const Json& j) {
  try {
    ResultRecord r;
    r.policy_id = j.at("policy").get<std::string>();
    r.algorithm = j.at("algorithm").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.episodes = j.at("episodes").get<int>();
    r.property = j.at("property").get<std::string>();
    r.query = j.value("query", std::string());
    r.method = j.at("method").get<std::string>();
    r.status = verify::parseStatus(j.at("status").get<std::string>());
    r.query_hash = j.at("query_hash").get<std::string>();
    r.slack = j.at("slack").get<double>();
    r.config = j.value("config", Json::object());
    if (j.contains("witness")) r.witness = j.at("witness").get<std::vector<Vector>>();
    r.replay = j.value("replay", std::string());
    r.replay_detail = j.value("replay_detail", std::string());
    r.diagnostic = j.value("diagnostic", std::string());
    return r;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("results record: ") + e.what());
  }
}

std::vector<ResultRecord> loadResults(const std::string& path) {
  std::vector<ResultRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(ResultRecord::fromJson(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Campaign

double CampaignConfig::slackFor(const Policy& p, const props::PropertySpec& spec) const {
  if (spec.slack) return *spec.slack;
  const auto it = slack.find(train::algorithmName(p.algorithm));
  return it == slack.end() ? default_slack : it->second;
}

std::map<std::string, double> calibrateSlacks(const std::vector<Policy>& zoo,
                                              const sim::ArenaSuite& suite, std::size_t episodes,
                                              const sim::SimParams& params, double percentile) {
  std::map<std::string, std::vector<double>> pooled;
  for (const Policy& p : zoo) {
    auto m = attack::collectDecisionMargins(*p.network, suite, episodes, params);
    auto& dst = pooled[train::algorithmName(p.algorithm)];
    dst.insert(dst.end(), m.begin(), m.end());
  }
  std::map<std::string, double> out;
  for (auto& [alg, margins] : pooled) out[alg] = attack::percentileNearestRank(std::move(margins), percentile);
  return out;
}

sim::ReplayResult replayWitness(const Network& net, const props::PropertySpec& spec,
                                const std::vector<Vector>& witness, const sim::SimParams& base) {
  sim::ReplayRequest req;
  for (const Vector& x : witness) req.observations.push_back(sim::Observation::fromInput(x));
  req.actions = props::predictedActions(spec.kind, witness.size());
  sim::SimParams params = base;
  if (props::isLoop(spec.kind)) {
    req.kind = sim::ViolationKind::Loop;
    req.pose_period = static_cast<int>(witness.size());
    params.turn_angle_deg = spec.turn_angle_deg;
    params.beam_spacing_deg = spec.turn_angle_deg;
    params.right_turn_increases_angle = spec.right_turn_increases_angle;
  } else {
    req.kind = sim::ViolationKind::Collision;
    req.pose_period = 1;
  }
  return sim::replayCounterexample(net, req, params);
}

namespace {

struct Job {
  std::size_t policy = 0;
  std::size_t property = 0;
  std::string method;
  verify::Query query;
  std::string hash;
  double slack = 0.0;
};

struct Outcome {
  ResultRecord record;
  Json timing;
};

Json bnbJson(const verify::BnbConfig& c) {
  return Json{{"timeout_s", c.timeout_s},
              {"max_nodes", c.max_nodes},
              {"leaf", c.leaf == verify::LeafArithmetic::ExactRational ? "exact" : "float"},
              {"max_input_splits", c.max_input_splits}};
}

Outcome runJob(const Job& job, const Policy& policy, const props::PropertySpec& spec,
               const CampaignConfig& cfg) {
  Outcome out;
  ResultRecord& r = out.record;
  r.policy_id = policy.id;
  r.algorithm = train::algorithmName(policy.algorithm);
  r.seed = policy.seed;
  r.episodes = policy.episodes;
  r.property = props::kindName(spec.kind);
  r.query = job.query.name;
  r.method = job.method;
  r.query_hash = job.hash;
  r.slack = job.slack;
  Json spec_json = props::specToJson(spec);
  spec_json.erase("slack");
  const auto t0 = std::chrono::steady_clock::now();
  out.timing = Json{{"query_hash", job.hash}, {"method", job.method}};
  if (job.method == kMethodGradient) {
    r.config = Json{{"property", spec_json},
                    {"iterations", cfg.attack_iterations},
                    {"step_size", cfg.attack_step},
                    {"restarts", cfg.attack_restarts},
                    {"seed", cfg.attack_seed}};
    try {
      attack::AttackConfig ac = attack::configFromQuery(job.query);
      ac.iterations = cfg.attack_iterations;
      ac.step_size = cfg.attack_step;
      ac.restarts = cfg.attack_restarts;
      ac.seed = cfg.attack_seed;
      const attack::AttackResult a = attack::bimAttack(*policy.network, ac);
      r.status = a.status == attack::AttackStatus::SAT ? Status::SAT : Status::TIMEOUT;
      if (a.witness) r.witness = {*a.witness};
    } catch (const std::exception& e) {
      r.status = Status::ERROR;
      r.diagnostic = e.what();
    }
  } else {
    r.config = Json{{"property", spec_json}, {"bnb", bnbJson(cfg.bnb)}};
    try {
      const verify::Verdict v = verify::solve(job.query, cfg.bnb);
      r.status = v.status;
      r.diagnostic = v.diagnostic;
      if (v.status == Status::TIMEOUT) r.diagnostic.clear();
      out.timing["nodes"] = v.stats.nodes;
      out.timing["leaves"] = v.stats.leaves;
      out.timing["max_depth"] = v.stats.max_depth;
      if (v.witness) {
        r.witness = v.witness->inputs;
        if (cfg.replay) {
          try {
            const sim::ReplayResult rep = replayWitness(*policy.network, spec, r.witness, cfg.sim);
            r.replay = std::string(sim::replayStatusName(rep.status));
            r.replay_detail = rep.detail;
          } catch (const std::exception& e) {
            r.replay = std::string(sim::replayStatusName(sim::ReplayStatus::Unrealizable));
            r.replay_detail = e.what();
          }
        }
      }
    } catch (const std::exception& e) {
      r.status = Status::ERROR;
      r.diagnostic = e.what();
    }
  }
  out.timing["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void appendLine(const std::string& path, const std::string& line, const std::string& what) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::app);
  out << line << "\n";
  out.flush();
  if (!out) throw Error("cannot append " + what + " to '" + path + "'");
}

}  // namespace

CampaignResult runCampaign(const std::vector<Policy>& zoo, const CampaignConfig& cfg) {
  if (zoo.empty()) throw ValueError("campaign needs at least one policy");
  if (cfg.properties.empty()) throw ValueError("campaign needs at least one property");
  if (cfg.workers == 0) throw ConfigError("campaign workers must be positive");

  std::map<std::string, ResultRecord> done;
  if (!cfg.log_path.empty()) {
    const auto parent = std::filesystem::path(cfg.log_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    for (ResultRecord& r : loadResults(cfg.log_path)) done.emplace(r.key(), std::move(r));
  }

  // Campaign order: policy, property, verifier then gradient.
  std::vector<Job> jobs;
  std::set<std::string> seen;
  for (std::size_t p = 0; p < zoo.size(); ++p) {
    for (std::size_t s = 0; s < cfg.properties.size(); ++s) {
      const props::PropertySpec& spec = cfg.properties[s];
      const double slack = cfg.slackFor(zoo[p], spec);
      verify::Query q = props::buildProperty(spec, zoo[p].network, slack);
      const std::string hash = verify::queryHash(q);
      std::vector<std::string> methods{kMethodVerifier};
      if (cfg.gradient && props::isCollision(spec.kind)) methods.push_back(kMethodGradient);
      for (const std::string& m : methods) {
        if (!seen.insert(hash + "/" + m).second) continue;
        jobs.push_back({p, s, m, q, hash, slack});
      }
    }
  }

  CampaignResult result;
  std::vector<std::optional<Outcome>> slots(jobs.size());
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto it = done.find(jobs[i].hash + "/" + jobs[i].method);
    if (it != done.end()) {
      slots[i] = Outcome{it->second, {}};
    } else {
      todo.push_back(i);
    }
  }
  result.new_solves = todo.size();

  const std::string timing_path = cfg.log_path.empty() ? "" : cfg.log_path + ".timing.jsonl";
  std::mutex mu;
  std::size_t commit = 0;
  std::string io_error;
  // Writes finished outcomes in campaign order; caller holds mu.
  auto flush = [&] {
    while (commit < slots.size() && slots[commit]) {
      const Outcome& o = *slots[commit];
      if (!o.timing.is_null() && io_error.empty()) {
        try {
          appendLine(cfg.log_path, o.record.toJson().dump(), "record for " + o.record.policy_id + "/" +
                                                                  o.record.property + "/" + o.record.method);
          appendLine(timing_path, o.timing.dump(), "timing");
        } catch (const Error& e) {
          io_error = e.what();
        }
      }
      ++commit;
    }
  };
  {
    std::lock_guard lock(mu);
    flush();
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t t = next.fetch_add(1);
      if (t >= todo.size()) return;
      const Job& job = jobs[todo[t]];
      Outcome o = runJob(job, zoo[job.policy], cfg.properties[job.property], cfg);
      std::lock_guard lock(mu);
      slots[todo[t]] = std::move(o);
      flush();
    }
  };
  const std::size_t n = std::min(cfg.workers, std::max<std::size_t>(todo.size(), 1));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (!io_error.empty()) throw Error(io_error);
  for (auto& s : slots) result.records.push_back(std::move(s->record));
  return result;
}

// ---------------------------------------------------------------------------
// Safety filter

SafetyFilter filterSafe(const std::vector<ResultRecord>& records) {
  std::vector<std::string> six;
  for (const auto& s : props::standardSuite(90.0)) six.push_back(props::kindName(s.kind));
  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, Status>> by_policy;
  for (const ResultRecord& r : records) {
    if (r.method != kMethodVerifier) continue;
    if (std::find(six.begin(), six.end(), r.property) == six.end()) continue;
    if (!by_policy.count(r.policy_id)) order.push_back(r.policy_id);
    by_policy[r.policy_id][r.property] = r.status;
  }
  SafetyFilter f;
  for (const std::string& id : order) {
    const auto& v = by_policy[id];
    bool sat = false, open = false;
    for (const auto& [prop, st] : v) {
      sat |= st == Status::SAT;
      open |= st != Status::SAT && st != Status::UNSAT;
    }
    if (sat) {
      f.unsafe.push_back(id);
    } else if (v.size() < six.size()) {
      f.incomplete.push_back(id);
    } else if (open) {
      f.undetermined.push_back(id);
    } else {
      f.survivors.push_back(id);
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Bravery

Json BraveryScore::toJson() const {
  Json j{{"policy", policy_id}};
  if (score) {
    j["score"] = *score;
  } else {
    j["score"] = never ? "NEVER" : "UNDETERMINED";
  }
  Json p = Json::array();
  for (const auto& [d, s] : probes) p.push_back(Json{{"d", d}, {"status", verify::statusName(s)}});
  j["probes"] = p;
  if (!diagnostic.empty()) j["diagnostic"] = diagnostic;
  return j;
}

std::vector<double> braveryGrid(const BraveryConfig& c) {
  if (!(c.precision > 0.0)) throw ConfigError("bravery precision must be positive");
  const double inv = std::round(1.0 / c.precision);
  const double lo_steps = std::round(c.lo * inv), hi_steps = std::round(c.hi * inv);
  if (std::abs(inv * c.precision - 1.0) > 1e-9 || std::abs(lo_steps / inv - c.lo) > 1e-9 ||
      std::abs(hi_steps / inv - c.hi) > 1e-9) {
    throw ConfigError("bravery range must lie on the precision grid");
  }
  if (c.lo < props::kBraveryLo - 1e-12 || c.hi > 1.0 + 1e-12 || lo_steps > hi_steps) {
    throw ConfigError("bravery range must lie within [0.18, 1]");
  }
  std::vector<double> grid;
  for (double s = lo_steps; s <= hi_steps; s += 1.0) grid.push_back(s / inv);
  return grid;
}

BraveryScore braverySearch(const Policy& policy, double slack, const BraveryConfig& config) {
  std::string why;
  auto probe = [&](double d) {
    props::PropertySpec spec;
    spec.kind = props::PropertyKind::BraveryProbe;
    spec.bravery_bound = d;
    const verify::Verdict v = verify::solve(props::buildProperty(spec, policy.network, slack), config.bnb);
    why = v.diagnostic;
    return v.status;
  };
  BraveryScore s = braverySearch(policy.id, probe, config);
  if (s.undetermined && !why.empty()) s.diagnostic += " (" + why + ")";
  return s;
}

BraveryScore braverySearch(const std::string& policy_id, const std::function<Status(double)>& run,
                           const BraveryConfig& config) {
  const std::vector<double> grid = braveryGrid(config);
  BraveryScore out;
  out.policy_id = policy_id;
  std::map<std::size_t, Status> seen;
  auto probe = [&](std::size_t i) {
    const Status status = run(grid[i]);
    out.probes.emplace_back(grid[i], status);
    seen[i] = status;
    if (status != Status::SAT && status != Status::UNSAT) {
      out.undetermined = true;
      out.diagnostic = "probe at " + formatDouble(grid[i]) + ": " + verify::statusName(status);
    }
    // SAT at a grid point forces SAT at every larger one.
    std::optional<std::size_t> lowest_sat;
    for (const auto& [j, s] : seen) {
      if (s == Status::SAT && !lowest_sat) lowest_sat = j;
      if (s == Status::UNSAT && lowest_sat) {
        throw Error("bravery probe is not monotone: SAT at " + formatDouble(grid[*lowest_sat]) +
                    " but UNSAT at " + formatDouble(grid[j]));
      }
    }
    return status;
  };
  std::size_t hi = grid.size() - 1;
  const Status top = probe(hi);
  if (out.undetermined) return out;
  if (top == Status::UNSAT) {
    // The bottom probe must agree; a SAT there breaks monotonicity.
    probe(0);
    if (out.undetermined) return out;
    out.never = true;
    return out;
  }
  if (probe(0) == Status::SAT) {
    out.score = grid[0];
    return out;
  }
  if (out.undetermined) return out;
  std::size_t lo = 0;  // UNSAT at lo, SAT at hi
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    const Status s = probe(mid);
    if (out.undetermined) return out;
    (s == Status::SAT ? hi : lo) = mid;
  }
  out.score = grid[hi];
  return out;
}

// ---------------------------------------------------------------------------
// Instability

bool isUnstable(const std::vector<Status>& ordered) {
  bool held = false;
  for (Status s : ordered) {
    if (s == Status::UNSAT) held = true;
    if (s == Status::SAT && held) return true;
  }
  return false;
}

InstabilityReport instabilityReport(const std::vector<ResultRecord>& records,
                                    const std::vector<std::string>& properties) {
  using FamilyKey = std::tuple<std::string, std::uint64_t, std::string>;
  std::map<FamilyKey, std::map<int, Status>> fam;
  std::set<std::string> algorithms;
  for (const ResultRecord& r : records) {
    if (r.method != kMethodVerifier) continue;
    algorithms.insert(r.algorithm);
    if (std::find(properties.begin(), properties.end(), r.property) == properties.end()) continue;
    fam[{r.algorithm, r.seed, r.property}][r.episodes] = r.status;
  }
  InstabilityReport rep;
  for (const std::string& a : algorithms) rep.per_algorithm[a] = 0;
  for (const auto& [key, by_ep] : fam) {
    FamilyInstability f;
    f.algorithm = std::get<0>(key);
    f.seed = std::get<1>(key);
    f.property = std::get<2>(key);
    for (const auto& [ep, s] : by_ep) f.statuses.push_back(s);
    f.unstable = isUnstable(f.statuses);
    if (f.unstable) ++rep.per_algorithm[f.algorithm];
    rep.families.push_back(std::move(f));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Report

namespace {

std::string pct(double num, double den) {
  if (den <= 0.0) return "-";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(1) << 100.0 * num / den;
  return ss.str();
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' ');
}

}  // namespace

Report report(const std::vector<ResultRecord>& records, const std::vector<BraveryScore>& bravery) {
  Report rep;
  std::ostringstream tx;
  const std::vector<Status> statuses{Status::SAT, Status::UNSAT, Status::TIMEOUT, Status::ERROR};

  // Verdict counts per algorithm and property.
  std::map<std::string, std::map<std::string, std::map<Status, int>>> counts;
  std::vector<std::string> prop_order;
  for (const ResultRecord& r : records) {
    if (r.method != kMethodVerifier) continue;
    ++counts[r.algorithm][r.property][r.status];
    if (std::find(prop_order.begin(), prop_order.end(), r.property) == prop_order.end()) {
      prop_order.push_back(r.property);
    }
  }
  Json verdicts = Json::object();
  tx << "Verification verdicts\n";
  tx << pad("algorithm", 11) << pad("property", 19) << pad("SAT", 6) << pad("UNSAT", 6)
     << pad("TIMEOUT", 8) << pad("ERROR", 6) << "SAT%\n";
  for (const auto& [alg, by_prop] : counts) {
    for (const std::string& prop : prop_order) {
      const auto it = by_prop.find(prop);
      if (it == by_prop.end()) continue;
      std::map<Status, int> c = it->second;
      const int decided = c[Status::SAT] + c[Status::UNSAT];
      Json row = Json::object();
      for (Status s : statuses) row[verify::statusName(s)] = c[s];
      row["sat_fraction"] = decided > 0 ? Json(static_cast<double>(c[Status::SAT]) / decided) : Json();
      verdicts[alg][prop] = row;
      tx << pad(alg, 11) << pad(prop, 19) << pad(std::to_string(c[Status::SAT]), 6)
         << pad(std::to_string(c[Status::UNSAT]), 6) << pad(std::to_string(c[Status::TIMEOUT]), 8)
         << pad(std::to_string(c[Status::ERROR]), 6) << pct(c[Status::SAT], decided) << "\n";
    }
  }
  rep.json["verdicts"] = verdicts;

  // Gradient attack against verification on pairs that have both.
  std::map<std::string, std::pair<std::string, Status>> verifier_of;  // key -> (alg, status)
  for (const ResultRecord& r : records) {
    if (r.method == kMethodVerifier) verifier_of[r.query_hash] = {r.algorithm, r.status};
  }
  std::map<std::string, std::array<int, 3>> grad;  // alg -> gradient SAT, verifier SAT, pairs
  for (const ResultRecord& r : records) {
    if (r.method != kMethodGradient) continue;
    const auto it = verifier_of.find(r.query_hash);
    if (it == verifier_of.end()) continue;
    auto& g = grad[r.algorithm];
    g[0] += r.status == Status::SAT;
    g[1] += it->second.second == Status::SAT;
    g[2] += 1;
  }
  Json gjson = Json::object();
  tx << "\nGradient attack vs verification (collision properties)\n";
  tx << pad("algorithm", 11) << pad("pairs", 7) << pad("gradient", 9) << pad("verifier", 9) << "Ratio (%)\n";
  for (const auto& [alg, g] : grad) {
    gjson[alg] = Json{{"pairs", g[2]},
                      {"gradient_sat", g[0]},
                      {"verifier_sat", g[1]},
                      {"ratio", g[1] > 0 ? Json(static_cast<double>(g[0]) / g[1]) : Json()}};
    tx << pad(alg, 11) << pad(std::to_string(g[2]), 7) << pad(std::to_string(g[0]), 9)
       << pad(std::to_string(g[1]), 9) << pct(g[0], g[1]) << "\n";
  }
  rep.json["gradient"] = gjson;

  // Replay of verifier counterexamples.
  std::map<std::string, int> replays;
  for (const ResultRecord& r : records) {
    if (r.method == kMethodVerifier && r.status == Status::SAT) ++replays[r.replay.empty() ? "none" : r.replay];
  }
  rep.json["replay"] = replays;
  if (!replays.empty()) {
    tx << "\nCounterexample replay\n";
    for (const auto& [k, n] : replays) tx << pad(k, 14) << n << "\n";
  }

  const SafetyFilter f = filterSafe(records);
  rep.json["survivors"] = f.survivors;
  rep.json["undetermined"] = f.undetermined;
  rep.json["unsafe"] = f.unsafe;
  rep.json["incomplete"] = f.incomplete;
  tx << "\nSafe policies (" << f.survivors.size() << ")\n";
  for (const std::string& id : f.survivors) tx << "  " << id << "\n";
  if (!f.undetermined.empty()) {
    tx << "Undetermined (" << f.undetermined.size() << ")\n";
    for (const std::string& id : f.undetermined) tx << "  " << id << "\n";
  }

  const InstabilityReport inst = instabilityReport(records);
  rep.json["instability"] = inst.per_algorithm;
  if (!inst.per_algorithm.empty()) {
    tx << "\nInstability (unstable family/cycle pairs)\n";
    for (const auto& [alg, n] : inst.per_algorithm) tx << pad(alg, 11) << n << "\n";
  }

  if (!bravery.empty()) {
    std::vector<const BraveryScore*> ranked;
    for (const BraveryScore& b : bravery) ranked.push_back(&b);
    auto rank = [](const BraveryScore* b) {
      return std::tuple(b->score ? 0 : (b->never ? 1 : 2), b->score.value_or(0.0), b->policy_id);
    };
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](const BraveryScore* a, const BraveryScore* b) { return rank(a) < rank(b); });
    Json bj = Json::array();
    tx << "\nBravery ranking (lower is braver)\n";
    for (const BraveryScore* b : ranked) {
      bj.push_back(b->toJson());
      std::ostringstream v;
      if (b->score) {
        v << std::fixed << std::setprecision(2) << *b->score;
      } else {
        v << (b->never ? "NEVER" : "UNDETERMINED");
      }
      tx << "  " << pad(b->policy_id, 24) << v.str() << "\n";
    }
    rep.json["bravery"] = bj;
  }
  rep.text = tx.str();
  return rep;
}

}  // namespace navguard::pipeline
