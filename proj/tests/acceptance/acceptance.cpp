#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "navguard/attack.hpp"
#include "navguard/pipeline.hpp"
#include "navguard/querylang.hpp"
#include "navguard/train.hpp"
#include "navguard/verifier.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracle.hpp"
#include "../support/train_checks.hpp"

namespace fs = std::filesystem;
using namespace navguard;
namespace fx = navguard::testing;
using verify::Interval;
using verify::Status;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Everything one pass over criteria 1-8 writes; compared across passes.
struct Run {
  fs::path dir;
  std::vector<pipeline::Policy> zoo;
};

double seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) { return formatDouble(v); }

void writeLog(const Run& run, const std::string& name, const std::string& text) {
  std::ofstream out(run.dir / name);
  out << text;
}

verify::BnbConfig bnb(std::uint64_t max_nodes = 0) {
  verify::BnbConfig c;
  c.timeout_s = 600;
  c.max_nodes = max_nodes;
  return c;
}

// ---------------------------------------------------------------------------

Outcome toyNetwork(Run& run) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto net = fx::share(fx::fig1Network());
  std::ostringstream log;
  const double a = forward(*net, Vector{2, 3})[0];
  const double b = forward(*net, Vector{0, 2})[0];
  log << "evaluate(2,3) " << fmt(a) << "\nevaluate(0,2) " << fmt(b) << "\n";
  auto query = [&](double y) {
    verify::Query q = verify::Query::make(net, 1, {-10, 10});
    q.name = "y>=" + fmt(y);
    q.constraints.push_back({{{verify::out(0, 0), 1.0}}, verify::Relation::GE, y, verify::ConstraintTag::Post, ""});
    return q;
  };
  const verify::Query q7 = query(7), q143 = query(143);
  const verify::Verdict v7 = verify::solve(q7, bnb());
  const verify::Verdict v143 = verify::solve(q143, bnb());
  log << verify::verdictToJson(v7, false).dump() << "\n" << verify::verdictToJson(v143, false).dump() << "\n";
  writeLog(run, "c1.jsonl", log.str());
  bool witness_ok = false;
  if (v7.witness) {
    const double y = forward(*net, v7.witness->inputs[0])[0];
    witness_ok = verify::checkWitness(verify::compile(q7), v7.witness->inputs, 1e-6).ok && y >= 7.0;
  }
  const double t = seconds(t0);
  Outcome o;
  o.pass = a == 40 && b == 22 && v7.status == Status::SAT && witness_ok && v143.status == Status::UNSAT && t < 1.0;
  o.detail = "evaluate 40/22 " + fmt(a) + "/" + fmt(b) + ", y>=7 " + verify::statusName(v7.status) +
             (witness_ok ? " (witness checked)" : " (witness not checked)") + ", y>=143 " +
             verify::statusName(v143.status) + ", " + fmt(std::round(t * 1000) / 1000) + " s";
  return o;
}

Outcome oracleEquivalence(Run& run) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(424242);
  int agree = 0, sat = 0, bad_witness = 0, grid_violations = 0;
  std::ostringstream log;
  for (int i = 0; i < 200; ++i) {
    const fx::RandomCase rc = fx::randomCase(rng);
    const bool expect = fx::bruteForceSat(*rc.query.network, rc.box, rc.rows);
    const verify::Verdict v = verify::solve(rc.query, bnb());
    agree += (v.status == Status::SAT) == expect && v.status != Status::TIMEOUT && v.status != Status::ERROR;
    if (v.status == Status::SAT) {
      ++sat;
      bad_witness += !verify::checkWitness(verify::compile(rc.query), v.witness->inputs, 1e-6).ok;
    } else if (v.status == Status::UNSAT) {
      grid_violations += fx::gridHits(*rc.query.network, rc.box, rc.rows, 100);
    }
    log << i << " " << verify::statusName(v.status) << " oracle " << (expect ? "SAT" : "UNSAT") << " "
        << v.query_hash << "\n";
  }
  writeLog(run, "c2.txt", log.str());
  const double t = seconds(t0);
  Outcome o;
  o.pass = agree == 200 && bad_witness == 0 && grid_violations == 0 && t < 600;
  o.detail = std::to_string(agree) + "/200 match the phase oracle (" + std::to_string(sat) + " SAT), " +
             std::to_string(bad_witness) + " bad witnesses, " + std::to_string(grid_violations) +
             " grid hits on UNSAT, " + fmt(std::round(t * 10) / 10) + " s";
  return o;
}

// Constant table: (property, item) -> expected value, compared exactly.
Outcome boundTable(Run& run) {
  using props::PropertyKind;
  struct Row {
    std::string property, item;
    double expected, actual;
  };
  std::vector<Row> rows;
  std::mt19937_64 rng(3);
  auto net = fx::share(fx::randomNetwork(rng, {9, 4, 3}));
  const std::map<PropertyKind, std::size_t> obstacle{
      {PropertyKind::ForwardCollision, 3}, {PropertyKind::LeftCollision, 2}, {PropertyKind::RightCollision, 4}};
  auto addBox = [&](const std::string& p, std::size_t copy, std::size_t i, Interval want, Interval got) {
    const std::string item = "copy " + std::to_string(copy) + " x" + std::to_string(i);
    rows.push_back({p, item + " lo", want.lo, got.lo});
    rows.push_back({p, item + " hi", want.hi, got.hi});
  };
  for (const auto& [kind, beam] : obstacle) {
    const verify::Query q = props::buildCollision(kind, net, 0.0);
    const std::string name = props::kindName(kind);
    rows.push_back({name, "obstacle index", static_cast<double>(beam), static_cast<double>(props::obstacleBeam(kind))});
    for (std::size_t i = 0; i < 7; ++i) {
      addBox(name, 0, i, i == beam ? Interval{0.135, 0.185} : Interval{0.2, 1.0}, q.input_boxes[0][i]);
    }
    addBox(name, 0, 7, {0.0, 1.0}, q.input_boxes[0][7]);
    addBox(name, 0, 8, {0.2, 1.0}, q.input_boxes[0][8]);
  }
  for (PropertyKind kind : {PropertyKind::AlternatingLoop, PropertyKind::LeftCycle, PropertyKind::RightCycle}) {
    const verify::Query q = props::buildLoop(kind, net, 0.0);
    const std::string name = props::kindName(kind);
    for (std::size_t c = 0; c < q.copies; ++c) {
      for (std::size_t i = 0; i < 7; ++i) addBox(name, c, i, {0.2, 1.0}, q.input_boxes[c][i]);
      addBox(name, c, 7, {0.0, 1.0}, q.input_boxes[c][7]);
      addBox(name, c, 8, {0.2, 1.0}, q.input_boxes[c][8]);
    }
    // Angle increment of each link x7(t+1) - x7(t) = rhs.
    const std::vector<sim::Action> acts = props::loopActions(kind, q.copies);
    for (const auto& con : q.constraints) {
      if (con.tag != verify::ConstraintTag::Link || con.terms.size() != 2) continue;
      if (con.terms[0].ref.index != 7 || con.terms[1].ref.index != 7) continue;
      const std::size_t later = std::max(con.terms[0].ref.copy, con.terms[1].ref.copy);
      const std::size_t earlier = std::min(con.terms[0].ref.copy, con.terms[1].ref.copy);
      if (later != earlier + 1) continue;
      const double sign = con.terms[0].ref.copy == later ? 1.0 : -1.0;
      const double want = acts[earlier] == sim::Action::Right ? 1.0 / 12.0 : -1.0 / 12.0;
      rows.push_back({name, "angle increment " + std::to_string(earlier), want, sign * con.rhs});
    }
  }
  std::ostringstream log;
  int mismatches = 0;
  for (const Row& r : rows) {
    const bool ok = r.expected == r.actual;
    mismatches += !ok;
    log << r.property << " | " << r.item << " | " << fmt(r.expected) << " | " << fmt(r.actual)
        << (ok ? "" : " MISMATCH") << "\n";
  }
  writeLog(run, "c3.txt", log.str());
  Outcome o;
  o.pass = mismatches == 0 && rows.size() > 100;
  o.detail = std::to_string(rows.size()) + " constants checked, " + std::to_string(mismatches) + " mismatches";
  return o;
}

// Trains seeds in file order until five families of an algorithm reach the
// acceptance threshold; the zoo is every accepted checkpoint.
std::vector<pipeline::Policy> trainZoo(const fs::path& dir, std::ostringstream& manifest) {
  const std::vector<std::uint64_t> seeds = train::loadSeeds(NAVGUARD_SOURCE_DIR "/data/seeds.txt");
  std::vector<pipeline::Policy> zoo;
  for (train::Algorithm alg : {train::Algorithm::DDQN, train::Algorithm::Reinforce, train::Algorithm::PPO}) {
    int families = 0;
    for (std::uint64_t seed : seeds) {
      train::TrainConfig c;
      c.algorithm = alg;
      c.seed = seed;
      bool accepted = false;
      for (const train::PolicyRecord& r : train::trainPolicy(c)) {
        manifest << r.id << " " << fmt(r.eval_success_rate) << " " << saveNetwork(r.network).size() << "\n";
        if (r.eval_success_rate < c.acceptance_threshold) continue;
        train::saveCheckpoint(r, (dir / "zoo").string());
        zoo.push_back(pipeline::fromRecord(r));
        accepted = true;
      }
      families += accepted;
      if (families == 5) break;
    }
  }
  pipeline::sortZoo(zoo);
  return zoo;
}

Outcome campaign(Run& run) {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream manifest;
  run.zoo = trainZoo(run.dir, manifest);
  const double train_time = seconds(t0);
  std::map<std::string, std::set<std::string>> per_alg;
  for (const auto& p : run.zoo) per_alg[train::algorithmName(p.algorithm)].insert(p.id);

  const train::TrainConfig defaults;
  pipeline::CampaignConfig c;
  c.properties = props::standardSuite(90.0);
  c.slack = pipeline::calibrateSlacks(run.zoo, train::evaluationSuite(defaults), 100, defaults.sim);
  for (const auto& [alg, g] : c.slack) manifest << "slack " << alg << " " << fmt(g) << "\n";
  c.bnb = bnb(20000);
  c.gradient = true;
  c.sim = defaults.sim;
  c.log_path = (run.dir / "results.jsonl").string();
  writeLog(run, "c4_zoo.txt", manifest.str());
  const pipeline::CampaignResult res = pipeline::runCampaign(run.zoo, c);

  int errors = 0, sat = 0, realized = 0, unrealizable = 0, not_realized = 0, timeouts = 0;
  for (const auto& r : res.records) {
    if (r.method != pipeline::kMethodVerifier) continue;
    errors += r.status == Status::ERROR;
    timeouts += r.status == Status::TIMEOUT;
    if (r.status != Status::SAT) continue;
    ++sat;
    realized += r.replay == "realized";
    unrealizable += r.replay == "unrealizable";
    not_realized += r.replay == "not_realized";
  }
  const double t = seconds(t0);
  bool enough = per_alg.size() == 3;
  std::string counts;
  for (const auto& [alg, ids] : per_alg) {
    enough &= ids.size() >= 5;
    counts += (counts.empty() ? "" : " ") + alg + "=" + std::to_string(ids.size());
  }
  const double share = sat ? static_cast<double>(realized) / sat : 1.0;
  Outcome o;
  o.pass = enough && errors == 0 && not_realized == 0 && share >= 0.9 && t < 7200;
  o.detail = "policies " + counts + ", " + std::to_string(res.records.size()) + " records, " +
             std::to_string(errors) + " ERROR, " + std::to_string(timeouts) + " TIMEOUT, " + std::to_string(sat) +
             " SAT: " + std::to_string(realized) + " realized, " + std::to_string(unrealizable) +
             " unrealizable, " + std::to_string(not_realized) + " not realized; training " +
             fmt(std::round(train_time)) + " s, total " + fmt(std::round(t)) + " s";
  return o;
}

Outcome gradientContainment(Run& run) {
  const train::TrainConfig defaults;
  const sim::ArenaSuite suite = train::evaluationSuite(defaults);
  std::ostringstream log;
  int bim_sat = 0, ver_sat = 0, escapes = 0, pairs = 0;
  for (const auto& p : run.zoo) {
    const double slack = attack::computeSlack(*p.network, suite, 100, defaults.sim, 75.0);
    for (props::PropertyKind k : {props::PropertyKind::ForwardCollision, props::PropertyKind::LeftCollision,
                                  props::PropertyKind::RightCollision}) {
      const verify::Query q = props::buildCollision(k, p.network, slack);
      attack::AttackConfig ac = attack::configFromQuery(q);
      ac.iterations = 40;
      ac.step_size = 0.01;
      const attack::AttackResult a = attack::bimAttack(*p.network, ac);
      const verify::Verdict v = verify::solve(q, bnb(20000));
      const bool bs = a.status == attack::AttackStatus::SAT;
      const bool vs = v.status == Status::SAT;
      ++pairs;
      bim_sat += bs;
      ver_sat += vs;
      escapes += bs && !vs;
      log << p.id << " " << props::kindName(k) << " slack " << fmt(slack) << " gradient "
          << attack::attackStatusName(a.status) << " verifier " << verify::statusName(v.status) << "\n";
    }
  }
  writeLog(run, "c5.txt", log.str());
  Outcome o;
  o.pass = pairs > 0 && escapes == 0 && ver_sat >= bim_sat;
  o.detail = std::to_string(pairs) + " pairs, gradient SAT " + std::to_string(bim_sat) + ", verifier SAT " +
             std::to_string(ver_sat) + ", gradient-only " + std::to_string(escapes);
  return o;
}

Outcome braverySearch(Run& run) {
  const auto t0 = std::chrono::steady_clock::now();
  pipeline::BraveryConfig cfg;
  cfg.bnb = bnb();
  const std::vector<double> grid = pipeline::braveryGrid(cfg);
  std::ostringstream log;
  int exact = 0, close = 0;
  for (int k = 1; k <= 20; ++k) {
    const double tau = k * 5 / 100.0;
    pipeline::Policy p;
    p.id = "threshold-" + fmt(tau);
    p.network = fx::share(fx::thresholdPolicy(tau, k % 2 == 0));
    const pipeline::BraveryScore s = pipeline::braverySearch(p, 0.0, cfg);
    // Linear scan: first grid value whose probe is SAT.
    std::optional<double> scan;
    for (double d : grid) {
      if (verify::solve(props::buildBraveryProbe(p.network, d, 0.0), cfg.bnb).status == Status::SAT) {
        scan = d;
        break;
      }
    }
    const bool match = s.score == scan && !s.undetermined;
    const double target = std::clamp(tau, cfg.lo, cfg.hi);
    const bool near = s.score && std::abs(*s.score - target) <= 0.01 + 1e-12;
    exact += match;
    close += near;
    log << p.id << " search " << (s.score ? fmt(*s.score) : "none") << " scan " << (scan ? fmt(*scan) : "none")
        << " probes " << s.probes.size() << "\n";
  }
  writeLog(run, "c6.txt", log.str());
  const double t = seconds(t0);
  Outcome o;
  o.pass = exact == 20 && close == 20 && t < 600;
  o.detail = std::to_string(exact) + "/20 match the linear scan, " + std::to_string(close) +
             "/20 within 0.01 of the threshold (clamped to [0.18, 1]), " + fmt(std::round(t * 10) / 10) + " s";
  return o;
}

Outcome instability(Run& run) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<pipeline::ResultRecord> records;
  std::map<std::uint64_t, bool> oracle;
  for (std::uint64_t pattern = 0; pattern < 32; ++pattern) {
    std::vector<bool> sat(5);
    for (int i = 0; i < 5; ++i) sat[i] = (pattern >> i) & 1;
    bool unstable = false;
    for (int i = 0; i < 5; ++i) {
      for (int j = i + 1; j < 5; ++j) unstable |= !sat[i] && sat[j];
    }
    oracle[pattern] = unstable;
    // Stored out of checkpoint order to exercise sorting.
    for (int i = 4; i >= 0; --i) {
      pipeline::ResultRecord r;
      r.algorithm = "ppo";
      r.seed = pattern;
      r.episodes = 600 * (i + 1);
      r.policy_id = train::policyId(train::Algorithm::PPO, pattern, r.episodes);
      r.property = "left_cycle";
      r.method = pipeline::kMethodVerifier;
      r.status = sat[i] ? Status::SAT : Status::UNSAT;
      r.query_hash = r.policy_id + "/left_cycle";
      records.push_back(r);
    }
  }
  const pipeline::InstabilityReport rep = pipeline::instabilityReport(records, {"left_cycle"});
  int agree = 0, expected_count = 0;
  std::ostringstream log;
  for (const auto& f : rep.families) {
    agree += f.unstable == oracle.at(f.seed) && f.statuses.size() == 5;
    log << f.seed << " " << (f.unstable ? "unstable" : "stable") << "\n";
  }
  for (const auto& [pattern, u] : oracle) expected_count += u;
  const int counted = rep.per_algorithm.count("ppo") ? rep.per_algorithm.at("ppo") : 0;
  writeLog(run, "c7.txt", log.str());
  const double t = seconds(t0);
  Outcome o;
  o.pass = agree == 32 && rep.families.size() == 32 && counted == expected_count && t < 1.0;
  o.detail = std::to_string(agree) + "/32 patterns match the definition, " + std::to_string(counted) +
             " unstable counted (oracle " + std::to_string(expected_count) + ")";
  return o;
}

Outcome trainingSanity(Run& run) {
  const fx::TwoStateMdp mdp = fx::ddqnOnTwoStateMdp();
  const fx::ClipCheck clip = fx::ppoBeyondClip();
  const fx::FiniteDifferenceCheck fd = fx::reinforceOnTrajectory();
  std::ostringstream log;
  log << "ddqn max error " << fmt(mdp.maxError()) << "\nppo gradient norm " << fmt(clip.analytic_norm)
      << " numeric " << fmt(clip.numeric_norm) << "\nreinforce relative error " << fmt(fd.relative_l2) << " max "
      << fmt(fd.relative_max) << "\n";
  writeLog(run, "c8.txt", log.str());
  Outcome o;
  o.pass = mdp.maxError() <= 1e-6 && clip.analytic_norm == 0.0 && clip.numeric_norm < 1e-18 &&
           fd.relative_l2 < 1e-3 && fd.relative_max < 1e-3;
  std::ostringstream d;
  d << "DDQN vs value iteration " << mdp.maxError() << ", PPO gradient beyond clip " << clip.analytic_norm
    << ", REINFORCE vs finite differences " << fd.relative_l2;
  o.detail = d.str();
  return o;
}

using Criterion = std::function<Outcome(Run&)>;

const std::vector<std::pair<std::string, Criterion>>& criteria() {
  static const std::vector<std::pair<std::string, Criterion>> list{
      {"toy network", toyNetwork},
      {"verifier oracle equivalence", oracleEquivalence},
      {"property bound table", boundTable},
      {"desk-scale campaign", campaign},
      {"gradient containment", gradientContainment},
      {"bravery search", braverySearch},
      {"instability accounting", instability},
      {"training sanity", trainingSanity},
  };
  return list;
}

std::vector<Outcome> runAll(Run& run, bool print) {
  fs::remove_all(run.dir);
  fs::create_directories(run.dir);
  std::vector<Outcome> out;
  int n = 1;
  for (const auto& [name, fn] : criteria()) {
    Outcome o;
    try {
      o = fn(run);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (print) std::cout << "criterion " << n << " " << (o.pass ? "PASS" : "FAIL") << " " << name << ": " << o.detail << std::endl;
    out.push_back(o);
    ++n;
  }
  return out;
}

std::string readFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_out";
  Run first{root / "run1", {}};
  Run second{root / "run2", {}};
  const std::vector<Outcome> results = runAll(first, true);
  int failed = 0;
  for (const Outcome& o : results) failed += !o.pass;

  runAll(second, false);
  std::vector<std::string> differing;
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(first.dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), first.dir);
    if (rel.string().find("timing") != std::string::npos) continue;
    ++compared;
    if (readFile(entry.path()) != readFile(second.dir / rel)) differing.push_back(rel.string());
  }
  const bool same = differing.empty() && compared > 0;
  std::string detail = std::to_string(compared) + " log files compared across two runs";
  if (!same) {
    detail += ", differing:";
    for (const auto& d : differing) detail += " " + d;
  }
  std::cout << "criterion 9 " << (same ? "PASS" : "FAIL") << " determinism: " << detail << std::endl;
  failed += !same;
  return failed == 0 ? 0 : 1;
}
