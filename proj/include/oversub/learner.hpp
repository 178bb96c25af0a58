/*
 * Copyright 2026 The Oversub Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oversub/env.hpp"
#include "oversub/mlp.hpp"
#include "oversub/policy.hpp"

namespace oversub::marl {

/// Divisors applied to resource components before they reach a network.
struct FeatureScale {
  double cpu = 1.0;
  double mem = 1.0;
  double net = 1.0;

  /// One subscriber's fair share of the cluster per resource.
  static FeatureScale for_env(const EnvConfig& config);
};

/// Network-ready view of an Observation.
struct EncodedState {
  Eigen::VectorXd cluster;  // s^c
  Eigen::MatrixXd agents;   // one column o^i per agent
  std::vector<int> masks;
};

EncodedState encode(const Observation& obs, const FeatureScale& scale);

struct Transition {
  EncodedState state;
  std::vector<int> actions;
  double reward = 0.0;
  int cost = 0;
  EncodedState next;
  bool done = false;
};

/// Architecture of the value decomposition: one cluster value network and
/// one action-value network per agent, all packed in one parameter vector
/// (cluster first, then agents in order).
class QNetworks {
 public:
  QNetworks() = default;
  QNetworks(int num_agents, int num_actions, const std::vector<int>& agent_hidden,
            const std::vector<int>& cluster_hidden);

  int num_agents() const noexcept { return static_cast<int>(agents_.size()); }
  int num_actions() const noexcept { return num_actions_; }
  Eigen::Index num_params() const noexcept { return total_; }
  const Mlp& cluster_net() const noexcept { return cluster_; }
  const Mlp& agent_net(int i) const { return agents_.at(static_cast<std::size_t>(i)); }

  Eigen::VectorXd initialize(std::mt19937_64& rng) const;

  /// Q^i(., o^i) for all actions.
  Eigen::VectorXd agent_values(const Eigen::VectorXd& params, int agent,
                               const Eigen::VectorXd& obs) const;
  /// Q^c(s^c).
  double cluster_value(const Eigen::VectorXd& params, const Eigen::VectorXd& cluster_obs) const;

 private:
  int num_actions_ = 0;
  Mlp cluster_;
  std::vector<Mlp> agents_;
  Eigen::Index total_ = 0;
};

/// First index of the maximum.
int greedy_action(const Eigen::VectorXd& values);

/// Per agent: uniform random with probability epsilon, else greedy.
std::vector<int> select_actions(const QNetworks& nets, const Eigen::VectorXd& theta,
                                const EncodedState& state, double epsilon,
                                std::mt19937_64& rng);

/// r + lambda * (c - cost).
double lagrangian_reward(double reward, int cost, double lambda, double bound);

/// Q^c(s^c) + sum_i m^i Q^i(a^i, o^i).
double joint_q(const QNetworks& nets, const Eigen::VectorXd& theta, const EncodedState& state,
               std::span<const int> actions);

/// r_lambda + gamma * y, where y evaluates the target networks at the online
/// networks' greedy actions (zero on terminal transitions).
double td_target(const QNetworks& nets, const Transition& tr, const Eigen::VectorXd& theta,
                 const Eigen::VectorXd& target, double lambda, double bound, double gamma);

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

/// Mean squared TD error over `batch` and its exact gradient in theta. Targets
/// are held constant. Throws NonFiniteLoss on any non-finite value.
LossAndGradient loss_and_gradients(const QNetworks& nets, std::span<const Transition> batch,
                                   const Eigen::VectorXd& theta, const Eigen::VectorXd& target,
                                   double lambda, double bound, double gamma);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam step. Moments are sized on first use.
void apply_gradients(Eigen::VectorXd& theta, const Eigen::VectorXd& gradient, AdamState& state,
                     double learning_rate);

/// target <- tau * theta + (1 - tau) * target.
void soft_update(const Eigen::VectorXd& theta, Eigen::VectorXd& target, double tau);

/// Mean constraint cost over the transitions.
double estimate_constraint_level(std::span<const Transition> batch);

/// max(0, lambda - dual_lr * (bound - level)).
double dual_update(double lambda, double dual_lr, double bound, double level);

enum class ConstraintEstimator { kBatchMean, kTrailingWindow };

struct LearnerConfig {
  double gamma = 0.9;
  int batch_size = 10;
  int memory_capacity = 360;
  double tau = 0.001;
  double learning_rate = 1e-3;
  double dual_lr = 0.05;
  double alpha = 0.95;
  double delta = 1.0 / 40.0;
  double initial_lambda = 0.0;
  bool freeze_lambda = false;
  std::vector<int> agent_hidden{64, 64};
  std::vector<int> cluster_hidden{128, 128};
  int optimization_iterations = 10;  // K per episode
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.6;
  ConstraintEstimator estimator = ConstraintEstimator::kBatchMean;
  int estimator_window = 360;
  double max_grad_norm = 0.0;  // 0 disables clipping
  bool resample_training_trace = false;

  /// c = (1 - alpha) * delta.
  double constraint_bound() const noexcept { return (1.0 - alpha) * delta; }
  void validate() const;
};

/// Fixed-capacity FIFO of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 360) : capacity_(capacity) {}

  void push(Transition tr);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const std::deque<Transition>& items() const noexcept { return items_; }
  /// `n` distinct transitions drawn uniformly (all of them when n >= size).
  std::vector<Transition> sample(std::size_t n, std::mt19937_64& rng) const;
  /// Mean cost of the most recent `window` transitions.
  double trailing_cost_mean(std::size_t window) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

struct LearnerState {
  LearnerConfig config;
  QNetworks nets;
  Eigen::VectorXd theta;
  Eigen::VectorXd target;
  double lambda = 0.0;
  AdamState adam;
  ReplayBuffer replay;
  std::vector<double> action_set;
  FeatureScale scale;
  long long episodes_done = 0;
  long long env_steps = 0;
  long long optimizer_steps = 0;
  double epsilon = 1.0;
  std::mt19937_64 rng;
};

/// Fresh learner sized for `env`; target starts as a copy of theta.
LearnerState make_learner(const LearnerConfig& config, const EnvConfig& env, std::uint64_t seed);

struct CurvePoint {
  int episode = 0;
  double cum_reward = 0.0;
  double remaining_cores = 0.0;  // time-averaged over the episode
  int hot_cluster_count = 0;
  double lambda = 0.0;
  double epsilon = 0.0;
};

/// Linear decay from epsilon_start to epsilon_end over the first
/// epsilon_decay_fraction of `total_episodes`, then flat.
double epsilon_at(const LearnerConfig& config, int episode, int total_episodes);

/// One optimisation iteration: sample, primal step, soft update, dual step.
/// Returns the loss, or nothing when the buffer is still smaller than a batch.
std::optional<double> optimize_once(LearnerState& state);

using EpisodeCallback = std::function<void(const CurvePoint&)>;

/// Runs `episodes` training episodes on `env` and appends one curve point per
/// episode.
std::vector<CurvePoint> train(LearnerState& state, Environment& env, int episodes,
                              const EpisodeCallback& on_episode = {});

/// Greedy per-agent policy over a frozen parameter snapshot.
class QPolicy : public Policy {
 public:
  QPolicy(QNetworks nets, Eigen::VectorXd theta, FeatureScale scale,
          std::vector<double> action_set, std::string name = "c2marl");

  std::string name() const override { return name_; }
  std::vector<double> rates(const Environment& env, const Observation& obs) const override;
  std::vector<int> actions(const Observation& obs) const;

 private:
  QNetworks nets_;
  Eigen::VectorXd theta_;
  FeatureScale scale_;
  std::vector<double> action_set_;
  std::string name_;
};

QPolicy greedy_policy(const LearnerState& state, std::string name = "c2marl");

}  // namespace oversub::marl
