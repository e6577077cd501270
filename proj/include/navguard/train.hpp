#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "navguard/netcore.hpp"
#include "navguard/sim.hpp"

namespace navguard::train {

using Json = nlohmann::json;

enum class Algorithm { DDQN, Reinforce, PPO };
enum class OptimizerKind { SGD, Adam };
std::string algorithmName(Algorithm a);  // "ddqn", "reinforce", "ppo"
Algorithm parseAlgorithm(const std::string& name);

struct DdqnConfig {
  std::size_t memory_limit = 5000;
  int epoch = 40;        // gradient steps after every episode
  std::size_t batch = 128;
  double eps_start = 1.0;
  double eps_decay = 0.99995;  // per environment step
  double eps_min = 0.05;
  double tau = 0.005;
  double lr = 1e-3;
};

struct ReinforceConfig {
  int update_frequency = 20;  // episodes per update, gradients summed
  double lr = 1e-2;
};

struct PpoConfig {
  int update_frequency = 20;
  std::size_t critic_batch = 128;
  int critic_epoch = 60;
  double clip = 0.2;
  std::size_t actor_batch = 128;
  int actor_epoch = 10;  // passes over the collected samples
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
};

struct TrainConfig {
  Algorithm algorithm = Algorithm::DDQN;
  std::uint64_t seed = 0;
  int episode_limit = 3000;
  int hidden_layers = 2;
  int hidden_width = 16;
  double gamma = 0.99;
  OptimizerKind optimizer = OptimizerKind::Adam;
  // Global L2 norm cap on each update; 0 disables.
  double max_grad_norm = 0.0;
  DdqnConfig ddqn;
  ReinforceConfig reinforce;
  PpoConfig ppo;
  std::vector<int> checkpoint_episodes{600, 1200, 1800, 2400, 3000};
  std::size_t eval_episodes = 100;
  std::uint64_t eval_seed = 0xE7A1;
  double acceptance_threshold = 0.8;
  sim::SimParams sim;
  sim::ArenaGenParams arenas;

  void validate() const;
};

Json configToJson(const TrainConfig& c);
// Missing keys keep the values already in `base`.
TrainConfig configFromJson(const Json& j, TrainConfig base = {});

// Minimal episodic environment; the training loops only see this.
struct EnvStep {
  Vector observation;
  double reward = 0.0;
  bool done = false;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t observationSize() const = 0;
  virtual std::size_t numActions() const = 0;
  virtual Vector reset(std::uint64_t episode) = 0;
  virtual EnvStep step(std::size_t action) = 0;
};

// Episode i plays arena i of the suite; the simulator's step limit ends it.
class NavigationEnv : public Environment {
 public:
  NavigationEnv(sim::ArenaSuite suite, sim::SimParams params);
  std::size_t observationSize() const override { return sim::kObservationSize; }
  std::size_t numActions() const override { return sim::kNumActions; }
  Vector reset(std::uint64_t episode) override;
  EnvStep step(std::size_t action) override;

 private:
  sim::ArenaSuite suite_;
  sim::SimParams params_;
  sim::ArenaConfig arena_;
  sim::RobotState state_;
};

struct PolicyRecord {
  Network network;
  Algorithm algorithm = Algorithm::DDQN;
  std::uint64_t seed = 0;
  int episodes_trained = 0;
  double eval_success_rate = 0.0;
  std::string id;

  Json metaJson() const;
};

std::string policyId(Algorithm a, std::uint64_t seed, int episodes);

// Writes <dir>/<id>.nnet and <dir>/<id>.meta.json; returns the .nnet path.
std::string saveCheckpoint(const PolicyRecord& rec, const std::string& dir);
// Reads a network and, when present, its .meta.json sidecar.
PolicyRecord loadPolicy(const std::string& nnet_path);

// One seed per line, '#' comments allowed.
std::vector<std::uint64_t> loadSeeds(const std::string& path);

double evaluateSuccessRate(const Network& net, const sim::ArenaSuite& suite, std::size_t episodes,
                           const sim::SimParams& params);

// The fixed evaluation suite and the per-seed training suite of a config.
sim::ArenaSuite evaluationSuite(const TrainConfig& c);
sim::ArenaSuite trainingSuite(const TrainConfig& c);

using Evaluator = std::function<double(const Network&)>;
using CheckpointSink = std::function<void(const PolicyRecord&)>;

// Runs the configured algorithm and returns one record per checkpoint.
std::vector<PolicyRecord> trainPolicy(const TrainConfig& config, Environment& env,
                                      const Evaluator& evaluate, const CheckpointSink& sink = {});
// Navigation environment and evaluation suite derived from the config.
std::vector<PolicyRecord> trainPolicy(const TrainConfig& config, const CheckpointSink& sink = {});

// ---------------------------------------------------------------------------
// Building blocks, exposed for testing.

// Uniform Glorot initialisation, zero biases.
Network initNetwork(const std::vector<std::size_t>& widths, std::mt19937_64& rng);

// Uniform double in [0, 1) from 53 random bits; portable across libraries.
double uniform01(std::mt19937_64& rng);

Vector softmax(std::span<const double> logits);
std::size_t sampleIndex(std::span<const double> probs, std::mt19937_64& rng);
std::size_t argmax(std::span<const double> v);

struct Transition {
  Vector state;
  std::size_t action = 0;
  double reward = 0.0;
  Vector next_state;
  bool done = false;
};

// Double DQN target: r + gamma * Q_target(s', argmax_a Q_online(s', a)), or r
// at terminal states.
double ddqnTarget(const Network& online, const Network& target, const Transition& t, double gamma);
// Gradient of the mean of 0.5 * (Q(s,a) - target)^2 over the batch.
NetworkGradient ddqnLossGradient(const Network& online, const Network& target,
                                 std::span<const Transition> batch, double gamma);
// (1 - tau) * target + tau * online.
Network softUpdate(const Network& target, const Network& online, double tau);

struct TrajectoryStep {
  Vector state;
  std::size_t action = 0;
  double reward = 0.0;
};
using Trajectory = std::vector<TrajectoryStep>;

std::vector<double> discountedReturns(const Trajectory& traj, double gamma);
// sum_t G_t * log pi(a_t | s_t)
double reinforceSurrogate(const Network& net, const Trajectory& traj, double gamma);
// Gradient of reinforceSurrogate (ascent direction).
NetworkGradient reinforceGradient(const Network& net, const Trajectory& traj, double gamma);

struct PpoSample {
  Vector state;
  std::size_t action = 0;
  double old_log_prob = 0.0;
  double advantage = 0.0;
};

// Mean over samples of min(ratio * A, clip(ratio, 1-eps, 1+eps) * A).
double ppoObjective(const Network& net, std::span<const PpoSample> batch, double clip);
NetworkGradient ppoObjectiveGradient(const Network& net, std::span<const PpoSample> batch,
                                     double clip);

// Scales g down so its L2 norm is at most max_norm (no-op for max_norm <= 0).
void clipGradient(NetworkGradient& g, double max_norm);

// First-order update rule with its own state (Adam moments).
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, const Network& shape, double lr, double max_grad_norm = 0.0);
  // Moves against g (descent) or along it (ascent).
  Network step(const Network& net, NetworkGradient g, bool ascend);

 private:
  OptimizerKind kind_;
  double lr_;
  double max_norm_;
  NetworkGradient m_, v_;
  long t_ = 0;
};

}  // namespace navguard::train
