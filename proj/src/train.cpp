#include "navguard/train.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "navguard/error.hpp"

namespace navguard::train {

std::string algorithmName(Algorithm a) {
  switch (a) {
    case Algorithm::DDQN: return "ddqn";
    case Algorithm::Reinforce: return "reinforce";
    case Algorithm::PPO: return "ppo";
  }
  return "?";
}

Algorithm parseAlgorithm(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "ddqn") return Algorithm::DDQN;
  if (n == "reinforce") return Algorithm::Reinforce;
  if (n == "ppo") return Algorithm::PPO;
  throw ConfigError("unknown algorithm '" + name + "'");
}

void TrainConfig::validate() const {
  if (episode_limit <= 0) throw ConfigError("episode_limit must be positive");
  if (hidden_layers < 0 || hidden_width <= 0) throw ConfigError("bad hidden layer shape");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (checkpoint_episodes.size() != 5) throw ConfigError("exactly 5 checkpoint episodes are required");
  for (std::size_t i = 0; i < checkpoint_episodes.size(); ++i) {
    if (checkpoint_episodes[i] <= 0 || checkpoint_episodes[i] > episode_limit) {
      throw ConfigError("checkpoint episode outside (0, episode_limit]");
    }
    if (i > 0 && checkpoint_episodes[i] <= checkpoint_episodes[i - 1]) {
      throw ConfigError("checkpoint episodes must be strictly increasing");
    }
  }
  if (eval_episodes == 0) throw ConfigError("eval_episodes must be positive");
  if (ddqn.memory_limit == 0 || ddqn.batch == 0 || ddqn.epoch <= 0) throw ConfigError("bad DDQN sizes");
  if (!(ddqn.tau > 0.0 && ddqn.tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (!(ddqn.eps_decay > 0.0 && ddqn.eps_decay <= 1.0)) throw ConfigError("eps_decay must lie in (0, 1]");
  if (!(ddqn.lr > 0.0 && reinforce.lr > 0.0 && ppo.actor_lr > 0.0 && ppo.critic_lr > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  if (reinforce.update_frequency <= 0 || ppo.update_frequency <= 0) {
    throw ConfigError("update frequencies must be positive");
  }
  if (ppo.critic_batch == 0 || ppo.critic_epoch <= 0 || ppo.actor_batch == 0 || ppo.actor_epoch <= 0) {
    throw ConfigError("bad PPO sizes");
  }
  if (!(ppo.clip > 0.0)) throw ConfigError("clip must be positive");
  sim.validate();
}

Json configToJson(const TrainConfig& c) {
  return Json{
      {"algorithm", algorithmName(c.algorithm)},
      {"seed", c.seed},
      {"episode_limit", c.episode_limit},
      {"hidden_layers", c.hidden_layers},
      {"hidden_width", c.hidden_width},
      {"gamma", c.gamma},
      {"optimizer", c.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
      {"max_grad_norm", c.max_grad_norm},
      {"ddqn",
       {{"memory_limit", c.ddqn.memory_limit},
        {"epoch", c.ddqn.epoch},
        {"batch", c.ddqn.batch},
        {"eps_start", c.ddqn.eps_start},
        {"eps_decay", c.ddqn.eps_decay},
        {"eps_min", c.ddqn.eps_min},
        {"tau", c.ddqn.tau},
        {"lr", c.ddqn.lr}}},
      {"reinforce", {{"update_frequency", c.reinforce.update_frequency}, {"lr", c.reinforce.lr}}},
      {"ppo",
       {{"update_frequency", c.ppo.update_frequency},
        {"critic_batch", c.ppo.critic_batch},
        {"critic_epoch", c.ppo.critic_epoch},
        {"clip", c.ppo.clip},
        {"actor_batch", c.ppo.actor_batch},
        {"actor_epoch", c.ppo.actor_epoch},
        {"actor_lr", c.ppo.actor_lr},
        {"critic_lr", c.ppo.critic_lr}}},
      {"checkpoint_episodes", c.checkpoint_episodes},
      {"eval_episodes", c.eval_episodes},
      {"eval_seed", c.eval_seed},
      {"acceptance_threshold", c.acceptance_threshold},
      {"sim",
       {{"turn_angle_deg", c.sim.turn_angle_deg},
        {"beam_spacing_deg", c.sim.beam_spacing_deg},
        {"step_limit", c.sim.step_limit}}},
  };
}

TrainConfig configFromJson(const Json& j, TrainConfig c) {
  try {
    if (j.contains("algorithm")) c.algorithm = parseAlgorithm(j.at("algorithm").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.episode_limit = j.value("episode_limit", c.episode_limit);
    c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
    c.hidden_width = j.value("hidden_width", c.hidden_width);
    c.gamma = j.value("gamma", c.gamma);
    c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
    if (j.contains("optimizer")) {
      const std::string o = j.at("optimizer").get<std::string>();
      if (o == "adam") {
        c.optimizer = OptimizerKind::Adam;
      } else if (o == "sgd") {
        c.optimizer = OptimizerKind::SGD;
      } else {
        throw ConfigError("unknown optimizer '" + o + "'");
      }
    }
    if (j.contains("ddqn")) {
      const Json& d = j.at("ddqn");
      c.ddqn.memory_limit = d.value("memory_limit", c.ddqn.memory_limit);
      c.ddqn.epoch = d.value("epoch", c.ddqn.epoch);
      c.ddqn.batch = d.value("batch", c.ddqn.batch);
      c.ddqn.eps_start = d.value("eps_start", c.ddqn.eps_start);
      c.ddqn.eps_decay = d.value("eps_decay", c.ddqn.eps_decay);
      c.ddqn.eps_min = d.value("eps_min", c.ddqn.eps_min);
      c.ddqn.tau = d.value("tau", c.ddqn.tau);
      c.ddqn.lr = d.value("lr", c.ddqn.lr);
    }
    if (j.contains("reinforce")) {
      const Json& r = j.at("reinforce");
      c.reinforce.update_frequency = r.value("update_frequency", c.reinforce.update_frequency);
      c.reinforce.lr = r.value("lr", c.reinforce.lr);
    }
    if (j.contains("ppo")) {
      const Json& p = j.at("ppo");
      c.ppo.update_frequency = p.value("update_frequency", c.ppo.update_frequency);
      c.ppo.critic_batch = p.value("critic_batch", c.ppo.critic_batch);
      c.ppo.critic_epoch = p.value("critic_epoch", c.ppo.critic_epoch);
      c.ppo.clip = p.value("clip", c.ppo.clip);
      c.ppo.actor_batch = p.value("actor_batch", c.ppo.actor_batch);
      c.ppo.actor_epoch = p.value("actor_epoch", c.ppo.actor_epoch);
      c.ppo.actor_lr = p.value("actor_lr", c.ppo.actor_lr);
      c.ppo.critic_lr = p.value("critic_lr", c.ppo.critic_lr);
    }
    if (j.contains("checkpoint_episodes")) {
      c.checkpoint_episodes = j.at("checkpoint_episodes").get<std::vector<int>>();
    }
    c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
    c.eval_seed = j.value("eval_seed", c.eval_seed);
    c.acceptance_threshold = j.value("acceptance_threshold", c.acceptance_threshold);
    if (j.contains("sim")) {
      const Json& s = j.at("sim");
      c.sim.turn_angle_deg = s.value("turn_angle_deg", c.sim.turn_angle_deg);
      c.sim.beam_spacing_deg = s.value("beam_spacing_deg", c.sim.beam_spacing_deg);
      c.sim.step_limit = s.value("step_limit", c.sim.step_limit);
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------

NavigationEnv::NavigationEnv(sim::ArenaSuite suite, sim::SimParams params)
    : suite_(std::move(suite)), params_(params) {
  params_.validate();
}

Vector NavigationEnv::reset(std::uint64_t episode) {
  auto inst = suite_.episode(episode, params_);
  arena_ = std::move(inst.arena);
  state_ = inst.start;
  return sim::sense(arena_, state_, params_).toInput();
}

EnvStep NavigationEnv::step(std::size_t action) {
  if (action >= sim::kNumActions) throw ValueError("action index out of range");
  const sim::StepOutcome out = sim::stepAction(arena_, state_, static_cast<sim::Action>(action), params_);
  state_ = out.next_state;
  return {out.observation.toInput(), out.reward, out.terminal != sim::Terminal::None};
}

// ---------------------------------------------------------------------------

std::string policyId(Algorithm a, std::uint64_t seed, int episodes) {
  return algorithmName(a) + "-s" + std::to_string(seed) + "-e" + std::to_string(episodes);
}

Json PolicyRecord::metaJson() const {
  return Json{{"id", id},
              {"algorithm", algorithmName(algorithm)},
              {"seed", seed},
              {"episodes_trained", episodes_trained},
              {"eval_success_rate", eval_success_rate}};
}

std::string saveCheckpoint(const PolicyRecord& rec, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string base = (std::filesystem::path(dir) / rec.id).string();
  saveNetworkFile(rec.network, base + ".nnet");
  std::ofstream meta(base + ".meta.json");
  if (!meta) throw FormatError("cannot write '" + base + ".meta.json'");
  meta << rec.metaJson().dump(2) << "\n";
  return base + ".nnet";
}

PolicyRecord loadPolicy(const std::string& nnet_path) {
  PolicyRecord rec{loadNetworkFile(nnet_path), Algorithm::DDQN, 0, 0, 0.0, {}};
  std::filesystem::path p(nnet_path);
  rec.id = p.stem().string();
  std::filesystem::path meta = p;
  meta.replace_extension(".meta.json");
  if (std::filesystem::exists(meta)) {
    std::ifstream in(meta);
    try {
      const Json j = Json::parse(in);
      rec.id = j.value("id", rec.id);
      rec.algorithm = parseAlgorithm(j.at("algorithm").get<std::string>());
      rec.seed = j.value("seed", std::uint64_t{0});
      rec.episodes_trained = j.value("episodes_trained", 0);
      rec.eval_success_rate = j.value("eval_success_rate", 0.0);
    } catch (const Json::exception& e) {
      throw FormatError("metadata '" + meta.string() + "': " + e.what());
    }
  }
  return rec;
}

std::vector<std::uint64_t> loadSeeds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open seed file '" + path + "'");
  std::vector<std::uint64_t> seeds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        seeds.push_back(v);
      } catch (const std::exception&) {
        throw FormatError("seed file line " + std::to_string(line_no) + ": bad seed '" + tok + "'");
      }
    }
  }
  return seeds;
}

double evaluateSuccessRate(const Network& net, const sim::ArenaSuite& suite, std::size_t episodes,
                           const sim::SimParams& params) {
  if (episodes == 0) return 0.0;
  std::size_t wins = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto inst = suite.episode(e, params);
    if (sim::rolloutFrom(inst.arena, net, inst.start, params).success()) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(episodes);
}

sim::ArenaSuite evaluationSuite(const TrainConfig& c) { return {c.eval_seed, c.arenas}; }

sim::ArenaSuite trainingSuite(const TrainConfig& c) { return {sim::mixSeed(c.seed, 0x7A1), c.arenas}; }

// ---------------------------------------------------------------------------
// Building blocks

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

namespace {

std::size_t uniformIndex(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

void checkFinite(const NetworkGradient& g, const char* what) {
  if (!std::isfinite(g.squaredNorm())) {
    throw ValueError(std::string("training diverged: non-finite ") + what + " gradient");
  }
}

}  // namespace

Network initNetwork(const std::vector<std::size_t>& widths, std::mt19937_64& rng) {
  if (widths.size() < 2) throw ShapeError("network needs at least input and output widths");
  std::vector<AffineLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
    AffineLayer layer{Matrix(widths[l + 1], widths[l]), Vector(widths[l + 1], 0.0)};
    for (double& w : layer.weights.data()) w = (2.0 * uniform01(rng) - 1.0) * limit;
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers));
}

Vector softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(logits[i] - m);
  for (double& v : p) v /= z;
  return p;
}

std::size_t sampleIndex(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double ddqnTarget(const Network& online, const Network& target, const Transition& t, double gamma) {
  if (t.done) return t.reward;
  const std::size_t a = argmax(forward(online, t.next_state));
  return t.reward + gamma * forward(target, t.next_state)[a];
}

NetworkGradient ddqnLossGradient(const Network& online, const Network& target,
                                 std::span<const Transition> batch, double gamma) {
  NetworkGradient g = NetworkGradient::zerosLike(online);
  if (batch.empty()) return g;
  const double scale = 1.0 / static_cast<double>(batch.size());
  Vector cot(online.outputDim(), 0.0);
  for (const Transition& t : batch) {
    const double y = ddqnTarget(online, target, t, gamma);
    const double q = forward(online, t.state)[t.action];
    std::fill(cot.begin(), cot.end(), 0.0);
    cot[t.action] = q - y;
    accumulateParamGradient(online, t.state, cot, g, scale);
  }
  return g;
}

Network softUpdate(const Network& target, const Network& online, double tau) {
  std::vector<AffineLayer> layers = target.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto w = layers[l].weights.data();
    auto o = online.layer(l).weights.data();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = (1.0 - tau) * w[k] + tau * o[k];
    for (std::size_t k = 0; k < layers[l].biases.size(); ++k) {
      layers[l].biases[k] = (1.0 - tau) * layers[l].biases[k] + tau * online.layer(l).biases[k];
    }
  }
  return Network(std::move(layers));
}

std::vector<double> discountedReturns(const Trajectory& traj, double gamma) {
  std::vector<double> g(traj.size());
  double acc = 0.0;
  for (std::size_t i = traj.size(); i-- > 0;) g[i] = acc = traj[i].reward + gamma * acc;
  return g;
}

double reinforceSurrogate(const Network& net, const Trajectory& traj, double gamma) {
  const std::vector<double> g = discountedReturns(traj, gamma);
  double s = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Vector p = softmax(forward(net, traj[i].state));
    s += g[i] * std::log(p[traj[i].action]);
  }
  return s;
}

NetworkGradient reinforceGradient(const Network& net, const Trajectory& traj, double gamma) {
  const std::vector<double> g = discountedReturns(traj, gamma);
  NetworkGradient grad = NetworkGradient::zerosLike(net);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    // d log softmax(z)_a / dz = onehot(a) - p
    Vector cot = softmax(forward(net, traj[i].state));
    for (double& v : cot) v = -v;
    cot[traj[i].action] += 1.0;
    accumulateParamGradient(net, traj[i].state, cot, grad, g[i]);
  }
  return grad;
}

double ppoObjective(const Network& net, std::span<const PpoSample> batch, double clip) {
  if (batch.empty()) return 0.0;
  double s = 0.0;
  for (const PpoSample& b : batch) {
    const Vector p = softmax(forward(net, b.state));
    const double ratio = std::exp(std::log(p[b.action]) - b.old_log_prob);
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    s += std::min(ratio * b.advantage, clipped * b.advantage);
  }
  return s / static_cast<double>(batch.size());
}

NetworkGradient ppoObjectiveGradient(const Network& net, std::span<const PpoSample> batch,
                                     double clip) {
  NetworkGradient grad = NetworkGradient::zerosLike(net);
  if (batch.empty()) return grad;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const PpoSample& b : batch) {
    Vector p = softmax(forward(net, b.state));
    const double ratio = std::exp(std::log(p[b.action]) - b.old_log_prob);
    // The min picks the clipped branch, which is flat in the parameters,
    // exactly when the ratio has left the trust region in the direction the
    // advantage rewards.
    const bool flat = (b.advantage > 0.0 && ratio > 1.0 + clip) ||
                      (b.advantage < 0.0 && ratio < 1.0 - clip);
    if (flat) continue;
    for (double& v : p) v = -v;
    p[b.action] += 1.0;
    accumulateParamGradient(net, b.state, p, grad, scale * b.advantage * ratio);
  }
  return grad;
}

void clipGradient(NetworkGradient& g, double max_norm) {
  if (!(max_norm > 0.0)) return;
  const double n = std::sqrt(g.squaredNorm());
  if (n > max_norm) g.addScaled(g, max_norm / n - 1.0);
}

Optimizer::Optimizer(OptimizerKind kind, const Network& shape, double lr, double max_grad_norm)
    : kind_(kind),
      lr_(lr),
      max_norm_(max_grad_norm),
      m_(NetworkGradient::zerosLike(shape)),
      v_(NetworkGradient::zerosLike(shape)) {}

Network Optimizer::step(const Network& net, NetworkGradient g, bool ascend) {
  checkFinite(g, "update");
  clipGradient(g, max_norm_);
  const double sign = ascend ? 1.0 : -1.0;
  if (kind_ == OptimizerKind::SGD) return applyGradient(net, g, sign * lr_);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto adam = [&](std::span<double> gs, std::span<double> ms, std::span<double> vs) {
    for (std::size_t k = 0; k < gs.size(); ++k) {
      ms[k] = b1 * ms[k] + (1.0 - b1) * gs[k];
      vs[k] = b2 * vs[k] + (1.0 - b2) * gs[k] * gs[k];
      gs[k] = (ms[k] / c1) / (std::sqrt(vs[k] / c2) + eps);
    }
  };
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    adam(g.layers[l].weights.data(), m_.layers[l].weights.data(), v_.layers[l].weights.data());
    adam(g.layers[l].biases, m_.layers[l].biases, v_.layers[l].biases);
  }
  return applyGradient(net, g, sign * lr_);
}

// ---------------------------------------------------------------------------
// Training loops

namespace {

std::vector<std::size_t> widthsFor(const TrainConfig& c, std::size_t in, std::size_t out) {
  std::vector<std::size_t> w{in};
  for (int i = 0; i < c.hidden_layers; ++i) w.push_back(static_cast<std::size_t>(c.hidden_width));
  w.push_back(out);
  return w;
}

class Checkpointer {
 public:
  Checkpointer(const TrainConfig& c, const Evaluator& eval, const CheckpointSink& sink)
      : config_(c), eval_(eval), sink_(sink) {}

  void afterEpisode(int episodes_done, const Network& net) {
    if (next_ >= config_.checkpoint_episodes.size()) return;
    if (episodes_done != config_.checkpoint_episodes[next_]) return;
    ++next_;
    PolicyRecord rec{net, config_.algorithm, config_.seed, episodes_done,
                     eval_ ? eval_(net) : 0.0,
                     policyId(config_.algorithm, config_.seed, episodes_done)};
    if (sink_) sink_(rec);
    records_.push_back(std::move(rec));
  }

  std::vector<PolicyRecord> take() { return std::move(records_); }

 private:
  const TrainConfig& config_;
  const Evaluator& eval_;
  const CheckpointSink& sink_;
  std::size_t next_ = 0;
  std::vector<PolicyRecord> records_;
};

int lastEpisode(const TrainConfig& c) { return c.checkpoint_episodes.back(); }

std::vector<PolicyRecord> runDdqn(const TrainConfig& c, Environment& env, Checkpointer& ckpt,
                                  std::mt19937_64& rng) {
  const DdqnConfig& d = c.ddqn;
  Network online = initNetwork(widthsFor(c, env.observationSize(), env.numActions()), rng);
  Network target = online;
  Optimizer opt(c.optimizer, online, d.lr, c.max_grad_norm);
  std::vector<Transition> memory;
  memory.reserve(d.memory_limit);
  std::size_t write = 0;
  double eps = d.eps_start;
  std::vector<Transition> batch(d.batch);
  for (int ep = 0; ep < lastEpisode(c); ++ep) {
    Vector s = env.reset(static_cast<std::uint64_t>(ep));
    for (bool done = false; !done;) {
      std::size_t a = 0;
      if (uniform01(rng) < eps) {
        a = uniformIndex(rng, env.numActions());
      } else {
        a = argmax(forward(online, s));
      }
      EnvStep st = env.step(a);
      Transition t{s, a, st.reward, st.observation, st.done};
      if (memory.size() < d.memory_limit) {
        memory.push_back(std::move(t));
      } else {
        memory[write] = std::move(t);
        write = (write + 1) % d.memory_limit;
      }
      s = std::move(st.observation);
      done = st.done;
      eps = std::max(d.eps_min, eps * d.eps_decay);
    }
    if (memory.size() >= d.batch) {
      for (int e = 0; e < d.epoch; ++e) {
        for (Transition& b : batch) b = memory[uniformIndex(rng, memory.size())];
        online = opt.step(online, ddqnLossGradient(online, target, batch, c.gamma), false);
        target = softUpdate(target, online, d.tau);
      }
    }
    ckpt.afterEpisode(ep + 1, online);
  }
  return ckpt.take();
}

Trajectory sampleEpisode(const Network& net, Environment& env, std::uint64_t episode,
                         std::mt19937_64& rng, std::vector<Transition>* transitions,
                         std::vector<double>* log_probs) {
  Trajectory traj;
  Vector s = env.reset(episode);
  for (bool done = false; !done;) {
    const Vector p = softmax(forward(net, s));
    const std::size_t a = sampleIndex(p, rng);
    EnvStep st = env.step(a);
    traj.push_back({s, a, st.reward});
    if (transitions) transitions->push_back({s, a, st.reward, st.observation, st.done});
    if (log_probs) log_probs->push_back(std::log(p[a]));
    s = std::move(st.observation);
    done = st.done;
  }
  return traj;
}

std::vector<PolicyRecord> runReinforce(const TrainConfig& c, Environment& env, Checkpointer& ckpt,
                                       std::mt19937_64& rng) {
  Network net = initNetwork(widthsFor(c, env.observationSize(), env.numActions()), rng);
  NetworkGradient acc = NetworkGradient::zerosLike(net);
  Optimizer opt(c.optimizer, net, c.reinforce.lr, c.max_grad_norm);
  int pending = 0;
  for (int ep = 0; ep < lastEpisode(c); ++ep) {
    const Trajectory traj = sampleEpisode(net, env, static_cast<std::uint64_t>(ep), rng, nullptr, nullptr);
    acc.addScaled(reinforceGradient(net, traj, c.gamma), 1.0);
    if (++pending == c.reinforce.update_frequency) {
      net = opt.step(net, acc, true);
      acc.setZero();
      pending = 0;
    }
    ckpt.afterEpisode(ep + 1, net);
  }
  return ckpt.take();
}

double value(const Network& critic, std::span<const double> s) { return forward(critic, s)[0]; }

std::vector<PolicyRecord> runPpo(const TrainConfig& c, Environment& env, Checkpointer& ckpt,
                                 std::mt19937_64& rng) {
  const PpoConfig& p = c.ppo;
  Network actor = initNetwork(widthsFor(c, env.observationSize(), env.numActions()), rng);
  Network critic = initNetwork(widthsFor(c, env.observationSize(), 1), rng);
  Optimizer actor_opt(c.optimizer, actor, p.actor_lr, c.max_grad_norm);
  Optimizer critic_opt(c.optimizer, critic, p.critic_lr, c.max_grad_norm);
  std::vector<Transition> data;
  std::vector<double> log_probs;
  int pending = 0;
  for (int ep = 0; ep < lastEpisode(c); ++ep) {
    sampleEpisode(actor, env, static_cast<std::uint64_t>(ep), rng, &data, &log_probs);
    if (++pending == p.update_frequency) {
      // Critic: TD(0) regression on random minibatches.
      for (int e = 0; e < p.critic_epoch; ++e) {
        NetworkGradient g = NetworkGradient::zerosLike(critic);
        const std::size_t n = std::min(p.critic_batch, data.size());
        const double scale = 1.0 / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
          const Transition& t = data[uniformIndex(rng, data.size())];
          const double y = t.done ? t.reward : t.reward + c.gamma * value(critic, t.next_state);
          const double cot = value(critic, t.state) - y;
          accumulateParamGradient(critic, t.state, std::span<const double>(&cot, 1), g, scale);
        }
        critic = critic_opt.step(critic, std::move(g), false);
      }
      // One-step advantages, normalised per update.
      std::vector<PpoSample> samples(data.size());
      double mean = 0.0;
      for (std::size_t k = 0; k < data.size(); ++k) {
        const Transition& t = data[k];
        const double next = t.done ? 0.0 : c.gamma * value(critic, t.next_state);
        samples[k] = {t.state, t.action, log_probs[k], t.reward + next - value(critic, t.state)};
        mean += samples[k].advantage;
      }
      mean /= static_cast<double>(samples.size());
      double var = 0.0;
      for (const PpoSample& s : samples) var += (s.advantage - mean) * (s.advantage - mean);
      const double sd = std::sqrt(var / static_cast<double>(samples.size())) + 1e-8;
      for (PpoSample& s : samples) s.advantage = (s.advantage - mean) / sd;

      std::vector<std::size_t> order(samples.size());
      std::iota(order.begin(), order.end(), 0);
      std::vector<PpoSample> mb;
      for (int e = 0; e < p.actor_epoch; ++e) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniformIndex(rng, i)]);
        for (std::size_t start = 0; start < order.size(); start += p.actor_batch) {
          mb.clear();
          for (std::size_t k = start; k < std::min(order.size(), start + p.actor_batch); ++k) {
            mb.push_back(samples[order[k]]);
          }
          actor = actor_opt.step(actor, ppoObjectiveGradient(actor, mb, p.clip), true);
        }
      }
      data.clear();
      log_probs.clear();
      pending = 0;
    }
    ckpt.afterEpisode(ep + 1, actor);
  }
  return ckpt.take();
}

}  // namespace

std::vector<PolicyRecord> trainPolicy(const TrainConfig& config, Environment& env,
                                      const Evaluator& evaluate, const CheckpointSink& sink) {
  config.validate();
  std::mt19937_64 rng(sim::mixSeed(config.seed, static_cast<std::uint64_t>(config.algorithm) + 1));
  Checkpointer ckpt(config, evaluate, sink);
  switch (config.algorithm) {
    case Algorithm::DDQN: return runDdqn(config, env, ckpt, rng);
    case Algorithm::Reinforce: return runReinforce(config, env, ckpt, rng);
    case Algorithm::PPO: return runPpo(config, env, ckpt, rng);
  }
  return {};
}

std::vector<PolicyRecord> trainPolicy(const TrainConfig& config, const CheckpointSink& sink) {
  NavigationEnv env(trainingSuite(config), config.sim);
  const sim::ArenaSuite eval_suite = evaluationSuite(config);
  const Evaluator eval = [&](const Network& net) {
    return evaluateSuccessRate(net, eval_suite, config.eval_episodes, config.sim);
  };
  return trainPolicy(config, env, eval, sink);
}

}  // namespace navguard::train
