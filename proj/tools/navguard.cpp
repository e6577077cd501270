#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "navguard/attack.hpp"
#include "navguard/error.hpp"
#include "navguard/pipeline.hpp"
#include "navguard/querylang.hpp"
#include "navguard/sim.hpp"
#include "navguard/train.hpp"

namespace fs = std::filesystem;
using namespace navguard;
using Json = nlohmann::json;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

// ---------------------------------------------------------------------------
// Layered settings: defaults < --config file < flags.

struct VerifySettings {
  double timeout_s = 600.0;
  std::uint64_t max_nodes = 0;
  std::size_t max_input_splits = 24;
  double turn_angle_deg = 90.0;
  std::optional<double> slack;
  std::map<std::string, double> slack_by_algorithm;
  bool gradient = false;
  bool replay = true;
  std::vector<props::PropertySpec> properties;  // empty: standard six
  std::size_t slack_episodes = 100;
};

struct AttackSettings {
  int iterations = 40;
  double step_size = 0.01;
  int restarts = 1;
};

struct BraverySettings {
  double lo = props::kBraveryLo;
  double hi = 1.0;
  double precision = 0.01;
  double timeout_s = 600.0;
};

struct Settings {
  train::TrainConfig train;
  VerifySettings verify;
  AttackSettings attack;
  BraverySettings bravery;
  std::string out = "navguard-out";
  std::size_t workers = 1;
  std::optional<std::uint64_t> seed;
};

void rejectUnknown(const Json& j, const std::vector<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ConfigError(where + "." + k + ": unknown key");
    }
  }
}

// Walks j against the shape of reference and reports the first unknown key.
void rejectUnknownDeep(const Json& j, const Json& reference, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!reference.contains(k)) throw ConfigError(where + "." + k + ": unknown key");
    if (reference.at(k).is_object()) rejectUnknownDeep(v, reference.at(k), where + "." + k);
  }
}

void applyConfigFile(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    rejectUnknown(j, {"train", "verify", "attack", "bravery", "out", "workers", "seed"}, path);
    if (j.contains("out")) s.out = j.at("out").get<std::string>();
    if (j.contains("workers")) s.workers = j.at("workers").get<std::size_t>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("train")) {
      rejectUnknownDeep(j.at("train"), train::configToJson(s.train), path + ": train");
      s.train = train::configFromJson(j.at("train"), s.train);
    }
    if (j.contains("verify")) {
      const Json& v = j.at("verify");
      rejectUnknown(v, {"timeout_s", "max_nodes", "max_input_splits", "turn_angle_deg", "slack", "gradient",
                        "replay", "properties", "slack_episodes"},
                    path + ": verify");
      VerifySettings& d = s.verify;
      d.timeout_s = v.value("timeout_s", d.timeout_s);
      d.max_nodes = v.value("max_nodes", d.max_nodes);
      d.max_input_splits = v.value("max_input_splits", d.max_input_splits);
      d.turn_angle_deg = v.value("turn_angle_deg", d.turn_angle_deg);
      d.gradient = v.value("gradient", d.gradient);
      d.replay = v.value("replay", d.replay);
      d.slack_episodes = v.value("slack_episodes", d.slack_episodes);
      if (v.contains("slack")) {
        if (v.at("slack").is_object()) {
          d.slack_by_algorithm = v.at("slack").get<std::map<std::string, double>>();
        } else {
          d.slack = v.at("slack").get<double>();
        }
      }
      if (v.contains("properties")) {
        d.properties.clear();
        for (const Json& p : v.at("properties")) d.properties.push_back(props::specFromJson(p));
      }
    }
    if (j.contains("attack")) {
      const Json& a = j.at("attack");
      rejectUnknown(a, {"iterations", "step_size", "restarts"}, path + ": attack");
      s.attack.iterations = a.value("iterations", s.attack.iterations);
      s.attack.step_size = a.value("step_size", s.attack.step_size);
      s.attack.restarts = a.value("restarts", s.attack.restarts);
    }
    if (j.contains("bravery")) {
      const Json& b = j.at("bravery");
      rejectUnknown(b, {"lo", "hi", "precision", "timeout_s"}, path + ": bravery");
      s.bravery.lo = b.value("lo", s.bravery.lo);
      s.bravery.hi = b.value("hi", s.bravery.hi);
      s.bravery.precision = b.value("precision", s.bravery.precision);
      s.bravery.timeout_s = b.value("timeout_s", s.bravery.timeout_s);
    }
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Helpers

void appendJsonLine(const fs::path& path, const Json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  out << j.dump() << "\n";
  if (!out) throw Error("cannot append to '" + path.string() + "'");
}

void writeText(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

std::vector<pipeline::Policy> collectPolicies(const std::vector<std::string>& models,
                                              const std::string& zoo_dir) {
  std::vector<pipeline::Policy> zoo;
  if (!zoo_dir.empty()) zoo = pipeline::loadZoo(zoo_dir);
  for (const std::string& m : models) zoo.push_back(pipeline::fromRecord(train::loadPolicy(m)));
  if (zoo.empty()) throw ConfigError("no models given (use --model or --zoo)");
  return zoo;
}

std::vector<props::PropertySpec> selectProperties(const Settings& s, const std::vector<std::string>& names,
                                                 const std::string& file) {
  std::vector<props::PropertySpec> suite = !file.empty()                 ? props::loadPropertySpecs(file)
                                           : s.verify.properties.empty() ? props::standardSuite(s.verify.turn_angle_deg)
                                                                         : s.verify.properties;
  if (names.empty()) return suite;
  std::vector<props::PropertySpec> out;
  for (const std::string& n : names) {
    const props::PropertyKind k = props::parseKind(n);
    const auto it = std::find_if(suite.begin(), suite.end(), [&](const auto& p) { return p.kind == k; });
    if (it != suite.end()) {
      out.push_back(*it);
    } else {
      props::PropertySpec p;
      p.kind = k;
      p.turn_angle_deg = s.verify.turn_angle_deg;
      out.push_back(p);
    }
  }
  return out;
}

// Slack per algorithm: --slack, then config, then calibration on the zoo.
std::map<std::string, double> resolveSlacks(const Settings& s, const std::vector<pipeline::Policy>& zoo,
                                            double& uniform) {
  uniform = s.verify.slack.value_or(0.0);
  if (s.verify.slack) return {};
  std::map<std::string, double> by = s.verify.slack_by_algorithm;
  std::vector<pipeline::Policy> missing;
  for (const auto& p : zoo) {
    if (!by.count(train::algorithmName(p.algorithm))) missing.push_back(p);
  }
  if (!missing.empty()) {
    const auto calibrated = pipeline::calibrateSlacks(missing, train::evaluationSuite(s.train),
                                                      s.verify.slack_episodes, s.train.sim);
    for (const auto& [alg, g] : calibrated) {
      by[alg] = g;
      std::cerr << "slack " << alg << " = " << formatDouble(g) << " (75th percentile)\n";
    }
  }
  return by;
}

verify::BnbConfig bnbConfig(const Settings& s, double timeout) {
  verify::BnbConfig b;
  b.timeout_s = timeout;
  b.max_nodes = s.verify.max_nodes;
  b.max_input_splits = s.verify.max_input_splits;
  b.workers = 1;
  return b;
}

// ---------------------------------------------------------------------------
// Subcommands

int runTrain(Settings& s, const std::string& seeds_file) {
  std::vector<std::uint64_t> seeds;
  if (!seeds_file.empty()) {
    seeds = train::loadSeeds(seeds_file);
  } else {
    seeds.push_back(s.seed.value_or(s.train.seed));
  }
  s.train.validate();
  const fs::path zoo = fs::path(s.out) / "zoo";
  std::vector<std::vector<train::PolicyRecord>> results(seeds.size());
  std::vector<std::string> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < seeds.size();) {
      train::TrainConfig c = s.train;
      c.seed = seeds[i];
      try {
        results[i] = train::trainPolicy(c, [&](const train::PolicyRecord& r) {
          train::saveCheckpoint(r, zoo.string());
        });
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::max<std::size_t>(1, std::min(s.workers, seeds.size())); ++w) {
    pool.emplace_back(worker);
  }
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!errors[i].empty()) throw Error("seed " + std::to_string(seeds[i]) + ": " + errors[i]);
    for (const auto& r : results[i]) {
      std::cout << r.id << " success=" << formatDouble(r.eval_success_rate)
                << (r.eval_success_rate >= s.train.acceptance_threshold ? " accepted" : "") << " "
                << (zoo / (r.id + ".nnet")).string() << "\n";
    }
  }
  return 0;
}

int runVerify(const Settings& s, const std::vector<std::string>& models, const std::string& zoo_dir,
              const std::vector<std::string>& properties, const std::string& properties_file) {
  const auto zoo = collectPolicies(models, zoo_dir);
  pipeline::CampaignConfig c;
  c.properties = selectProperties(s, properties, properties_file);
  c.slack = resolveSlacks(s, zoo, c.default_slack);
  c.bnb = bnbConfig(s, s.verify.timeout_s);
  c.workers = s.workers;
  c.gradient = s.verify.gradient;
  c.attack_iterations = s.attack.iterations;
  c.attack_step = s.attack.step_size;
  c.attack_restarts = s.attack.restarts;
  c.attack_seed = s.seed.value_or(0);
  c.replay = s.verify.replay;
  c.sim = s.train.sim;
  c.log_path = (fs::path(s.out) / "results.jsonl").string();
  const pipeline::CampaignResult res = pipeline::runCampaign(zoo, c);
  for (const auto& r : res.records) std::cout << r.toJson().dump() << "\n";
  std::cerr << res.records.size() << " records, " << res.new_solves << " new, log " << c.log_path << "\n";
  return 0;
}

int runAttack(const Settings& s, const std::vector<std::string>& models, const std::string& zoo_dir,
              const std::vector<std::string>& properties, const std::string& properties_file) {
  const auto zoo = collectPolicies(models, zoo_dir);
  std::vector<props::PropertySpec> specs = selectProperties(s, properties, properties_file);
  std::erase_if(specs, [](const auto& p) { return !props::isCollision(p.kind); });
  if (specs.empty()) throw ConfigError("the attack needs a collision property");
  double uniform = 0.0;
  const auto by = resolveSlacks(s, zoo, uniform);
  const fs::path log = fs::path(s.out) / "attack.jsonl";
  for (const auto& p : zoo) {
    for (const auto& spec : specs) {
      const auto it = by.find(train::algorithmName(p.algorithm));
      const double slack = spec.slack.value_or(it == by.end() ? uniform : it->second);
      const verify::Query q = props::buildProperty(spec, p.network, slack);
      attack::AttackConfig ac = attack::configFromQuery(q);
      ac.iterations = s.attack.iterations;
      ac.step_size = s.attack.step_size;
      ac.restarts = s.attack.restarts;
      ac.seed = s.seed.value_or(0);
      const attack::AttackResult a = attack::bimAttack(*p.network, ac);
      Json j{{"policy", p.id},
             {"property", props::kindName(spec.kind)},
             {"method", pipeline::kMethodGradient},
             {"status", attack::attackStatusName(a.status)},
             {"query_hash", verify::queryHash(q)},
             {"slack", slack},
             {"iterations", ac.iterations},
             {"step_size", ac.step_size},
             {"restarts", ac.restarts},
             {"seed", ac.seed}};
      if (a.witness) {
        j["witness"] = *a.witness;
        j["restart"] = a.restart;
        j["iteration"] = a.iteration;
      }
      appendJsonLine(log, j);
      std::cout << j.dump() << "\n";
    }
  }
  return 0;
}

int runBravery(const Settings& s, const std::vector<std::string>& models, const std::string& zoo_dir) {
  const auto zoo = collectPolicies(models, zoo_dir);
  double uniform = 0.0;
  const auto by = resolveSlacks(s, zoo, uniform);
  pipeline::BraveryConfig bc;
  bc.lo = s.bravery.lo;
  bc.hi = s.bravery.hi;
  bc.precision = s.bravery.precision;
  bc.bnb = bnbConfig(s, s.bravery.timeout_s);
  const fs::path log = fs::path(s.out) / "bravery.jsonl";
  for (const auto& p : zoo) {
    const auto it = by.find(train::algorithmName(p.algorithm));
    const double slack = it == by.end() ? uniform : it->second;
    const pipeline::BraveryScore b = pipeline::braverySearch(p, slack, bc);
    Json j = b.toJson();
    j["slack"] = slack;
    appendJsonLine(log, j);
    std::cout << p.id << " " << (b.score ? formatDouble(*b.score) : (b.never ? "NEVER" : "UNDETERMINED"))
              << "\n";
  }
  return 0;
}

std::vector<pipeline::ResultRecord> readLog(const Settings& s, const std::string& log) {
  const std::string path = log.empty() ? (fs::path(s.out) / "results.jsonl").string() : log;
  if (!fs::exists(path)) throw Error("results log '" + path + "' does not exist");
  return pipeline::loadResults(path);
}

int runSelect(const Settings& s, const std::string& log) {
  const pipeline::SafetyFilter f = pipeline::filterSafe(readLog(s, log));
  auto list = [](const char* name, const std::vector<std::string>& ids) {
    std::cout << name << " " << ids.size() << "\n";
    for (const auto& id : ids) std::cout << "  " << id << "\n";
  };
  list("survivors", f.survivors);
  list("undetermined", f.undetermined);
  list("unsafe", f.unsafe);
  list("incomplete", f.incomplete);
  return 0;
}

int runStability(const Settings& s, const std::string& log) {
  const pipeline::InstabilityReport r = pipeline::instabilityReport(readLog(s, log));
  for (const auto& f : r.families) {
    std::cout << f.algorithm << " seed " << f.seed << " " << f.property << ":";
    for (verify::Status st : f.statuses) std::cout << " " << verify::statusName(st);
    std::cout << (f.unstable ? "  unstable" : "") << "\n";
  }
  for (const auto& [alg, n] : r.per_algorithm) std::cout << alg << " unstable " << n << "\n";
  return 0;
}

int runReplay(const Settings& s, const std::string& log, const std::vector<std::string>& models,
              const std::string& zoo_dir) {
  const auto zoo = collectPolicies(models, zoo_dir);
  std::map<std::string, const pipeline::Policy*> by_id;
  for (const auto& p : zoo) by_id[p.id] = &p;
  const fs::path dir = fs::path(s.out) / "replay";
  int replayed = 0;
  for (const auto& r : readLog(s, log)) {
    if (r.method != pipeline::kMethodVerifier || r.status != verify::Status::SAT) continue;
    const auto it = by_id.find(r.policy_id);
    if (it == by_id.end()) continue;
    props::PropertySpec spec = props::specFromJson(r.config.at("property"));
    const sim::ReplayResult rep = pipeline::replayWitness(*it->second->network, spec, r.witness, s.train.sim);
    const std::string name = r.policy_id + "-" + r.property;
    if (rep.status != sim::ReplayStatus::Unrealizable) writeText(dir / (name + ".arena"), sim::formatArena(rep.arena));
    std::cout << name << " " << sim::replayStatusName(rep.status)
              << (rep.detail.empty() ? "" : " (" + rep.detail + ")") << "\n";
    ++replayed;
  }
  std::cerr << replayed << " counterexamples replayed\n";
  return 0;
}

int runReport(const Settings& s, const std::string& log, const std::string& bravery_file) {
  std::vector<pipeline::BraveryScore> bravery;
  const fs::path bpath = bravery_file.empty() ? fs::path(s.out) / "bravery.jsonl" : fs::path(bravery_file);
  if (fs::exists(bpath)) {
    std::ifstream in(bpath);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const Json j = Json::parse(line);
      pipeline::BraveryScore b;
      b.policy_id = j.at("policy").get<std::string>();
      if (j.at("score").is_number()) {
        b.score = j.at("score").get<double>();
      } else {
        b.never = j.at("score") == "NEVER";
        b.undetermined = !b.never;
      }
      bravery.push_back(b);
    }
  }
  const pipeline::Report r = pipeline::report(readLog(s, log), bravery);
  writeText(fs::path(s.out) / "report.txt", r.text);
  writeText(fs::path(s.out) / "report.json", r.json.dump(2) + "\n");
  std::cout << r.text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train, verify and audit lidar navigation policies"};
  app.require_subcommand(1, 1);
  std::string config_path, out_flag;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::size_t> workers_flag;
  app.add_option("--config", config_path, "JSON config file (defaults < file < flags)")->check(CLI::ExistingFile);
  app.add_option("--out", out_flag, "output directory (env NAVGUARD_OUT, default navguard-out)");
  app.add_option("--seed", seed_flag, "seed for every random choice");
  app.add_option("--workers", workers_flag, "parallel training seeds or verification queries")->check(CLI::PositiveNumber);

  std::vector<std::string> models, properties;
  std::string zoo_dir, properties_file, log_path, seeds_file, bravery_file, algorithm;
  std::optional<double> slack, timeout, turn;
  std::optional<int> episodes, iterations, restarts;
  std::optional<std::uint64_t> max_nodes;
  std::optional<double> step;
  bool gradient = false, no_replay = false;

  auto addModels = [&](CLI::App* sub) {
    sub->add_option("--model", models, "policy .nnet file (repeatable)")->check(CLI::ExistingFile);
    sub->add_option("--zoo", zoo_dir, "directory of .nnet policies")->check(CLI::ExistingDirectory);
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train policies and write checkpoints to OUT/zoo");
  train_cmd->add_option("--algorithm", algorithm, "ddqn, reinforce or ppo")
      ->check(CLI::IsMember({"ddqn", "reinforce", "ppo"}));
  train_cmd->add_option("--seeds", seeds_file, "file with one seed per line")->check(CLI::ExistingFile);
  train_cmd->add_option("--episodes", episodes, "episode limit");

  CLI::App* verify_cmd = app.add_subcommand("verify", "run properties through the verifier; log to OUT/results.jsonl");
  addModels(verify_cmd);
  verify_cmd->add_option("--property", properties, "property kind (repeatable; default the six standard ones)");
  verify_cmd->add_option("--properties", properties_file, "JSON file of property specs")->check(CLI::ExistingFile);
  verify_cmd->add_option("--slack", slack, "output margin; default calibrated per algorithm");
  verify_cmd->add_option("--timeout", timeout, "seconds per query");
  verify_cmd->add_option("--max-nodes", max_nodes, "node budget per query (0 = none)");
  verify_cmd->add_option("--turn-angle", turn, "cycle turn angle in degrees");
  verify_cmd->add_flag("--gradient", gradient, "also run the gradient attack on collision properties");
  verify_cmd->add_flag("--no-replay", no_replay, "skip simulator replay of counterexamples");

  CLI::App* attack_cmd = app.add_subcommand("attack", "gradient attack on collision properties");
  addModels(attack_cmd);
  attack_cmd->add_option("--property", properties, "collision property kind (repeatable)");
  attack_cmd->add_option("--properties", properties_file, "JSON file of property specs")->check(CLI::ExistingFile);
  attack_cmd->add_option("--slack", slack, "output margin; default calibrated per algorithm");
  attack_cmd->add_option("--iterations", iterations, "BIM iterations");
  attack_cmd->add_option("--step", step, "BIM step size");
  attack_cmd->add_option("--restarts", restarts, "random restarts after the center start");

  CLI::App* bravery_cmd = app.add_subcommand("bravery", "minimal obstacle distance allowing FORWARD");
  addModels(bravery_cmd);
  bravery_cmd->add_option("--slack", slack, "output margin; default calibrated per algorithm");
  bravery_cmd->add_option("--timeout", timeout, "seconds per probe");

  CLI::App* select_cmd = app.add_subcommand("select", "policies with all six properties proven");
  CLI::App* stability_cmd = app.add_subcommand("stability", "cycle properties lost during training");
  CLI::App* replay_cmd = app.add_subcommand("replay", "replay counterexamples in the simulator");
  CLI::App* report_cmd = app.add_subcommand("report", "summary tables; writes OUT/report.{txt,json}");
  for (CLI::App* sub : {select_cmd, stability_cmd, replay_cmd, report_cmd}) {
    sub->add_option("--log", log_path, "results log (default OUT/results.jsonl)")->check(CLI::ExistingFile);
  }
  addModels(replay_cmd);
  report_cmd->add_option("--bravery", bravery_file, "bravery log (default OUT/bravery.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    for (CLI::App* sub : app.get_subcommands()) std::cerr << "\n" << sub->help();
    return kExitUsage;
  }

  Settings s;
  try {
    if (!config_path.empty()) applyConfigFile(s, config_path);
    if (const char* env = std::getenv("NAVGUARD_OUT"); env && *env) s.out = env;
    if (!out_flag.empty()) s.out = out_flag;
    if (seed_flag) {
      s.seed = seed_flag;
      s.train.seed = *seed_flag;
    }
    if (workers_flag) s.workers = *workers_flag;
    if (!algorithm.empty()) s.train.algorithm = train::parseAlgorithm(algorithm);
    if (episodes) {
      s.train.episode_limit = *episodes;
      // Checkpoints at fifths of the run.
      s.train.checkpoint_episodes.clear();
      for (int i = 1; i <= 5; ++i) s.train.checkpoint_episodes.push_back(*episodes * i / 5);
    }
    if (slack) s.verify.slack = slack;
    if (timeout) s.verify.timeout_s = s.bravery.timeout_s = *timeout;
    if (max_nodes) s.verify.max_nodes = *max_nodes;
    if (turn) s.verify.turn_angle_deg = *turn;
    if (gradient) s.verify.gradient = true;
    if (no_replay) s.verify.replay = false;
    if (iterations) s.attack.iterations = *iterations;
    if (step) s.attack.step_size = *step;
    if (restarts) s.attack.restarts = *restarts;
    if (s.workers == 0) throw ConfigError("workers must be positive");
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return runTrain(s, seeds_file);
    if (verify_cmd->parsed()) return runVerify(s, models, zoo_dir, properties, properties_file);
    if (attack_cmd->parsed()) return runAttack(s, models, zoo_dir, properties, properties_file);
    if (bravery_cmd->parsed()) return runBravery(s, models, zoo_dir);
    if (select_cmd->parsed()) return runSelect(s, log_path);
    if (stability_cmd->parsed()) return runStability(s, log_path);
    if (replay_cmd->parsed()) return runReplay(s, log_path, models, zoo_dir);
    if (report_cmd->parsed()) return runReport(s, log_path, bravery_file);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}
