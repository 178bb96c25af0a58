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

#include "oversub/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oversub/errors.hpp"

namespace oversub::marl {
namespace {

// Stacks one agent's observation column from every transition.
Eigen::MatrixXd gather_agent(std::span<const Transition> batch, int agent, bool next) {
  const auto& first = next ? batch.front().next : batch.front().state;
  Eigen::MatrixXd out(first.agents.rows(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& s = next ? batch[b].next : batch[b].state;
    out.col(static_cast<Eigen::Index>(b)) = s.agents.col(agent);
  }
  return out;
}

Eigen::MatrixXd gather_cluster(std::span<const Transition> batch, bool next) {
  const auto& first = next ? batch.front().next : batch.front().state;
  Eigen::MatrixXd out(first.cluster.size(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& s = next ? batch[b].next : batch[b].state;
    out.col(static_cast<Eigen::Index>(b)) = s.cluster;
  }
  return out;
}

int column_argmax(const Eigen::MatrixXd& values, Eigen::Index col) {
  int best = 0;
  for (Eigen::Index a = 1; a < values.rows(); ++a) {
    if (values(a, col) > values(best, col)) best = static_cast<int>(a);
  }
  return best;
}

// Bootstrapped targets for every transition in the batch.
Eigen::VectorXd batch_targets(const QNetworks& nets, std::span<const Transition> batch,
                              const Eigen::VectorXd& theta, const Eigen::VectorXd& target,
                              double lambda, double bound, double gamma) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  const bool any_live = std::any_of(batch.begin(), batch.end(),
                                    [](const Transition& t) { return !t.done; });
  if (any_live) {
    y = nets.cluster_net().forward(target, gather_cluster(batch, true)).row(0).transpose();
    for (int i = 0; i < nets.num_agents(); ++i) {
      const Eigen::MatrixXd obs = gather_agent(batch, i, true);
      const Eigen::MatrixXd online = nets.agent_net(i).forward(theta, obs);
      const Eigen::MatrixXd tgt = nets.agent_net(i).forward(target, obs);
      for (Eigen::Index b = 0; b < n; ++b) {
        if (batch[static_cast<std::size_t>(b)].next.masks[static_cast<std::size_t>(i)] == 0) {
          continue;
        }
        y[b] += tgt(column_argmax(online, b), b);
      }
    }
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& tr = batch[static_cast<std::size_t>(b)];
    const double shaped = lagrangian_reward(tr.reward, tr.cost, lambda, bound);
    out[b] = tr.done ? shaped : shaped + gamma * y[b];
  }
  return out;
}

}  // namespace

FeatureScale FeatureScale::for_env(const EnvConfig& config) {
  const double share = static_cast<double>(config.cluster.num_pms) /
                       std::max(1, config.num_agents());
  return FeatureScale{config.cluster.cpu_capacity * share, config.cluster.mem_capacity * share,
                      config.cluster.net_capacity * share};
}

EncodedState encode(const Observation& obs, const FeatureScale& scale) {
  const auto n = static_cast<Eigen::Index>(obs.agents.size());
  EncodedState s;
  s.agents.resize(kAgentObsSize, n);
  const std::array<double, kAgentObsSize> div{scale.cpu, scale.cpu, scale.mem, scale.net,
                                              scale.cpu, scale.mem, scale.net, 1.0, 1.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int f = 0; f < kAgentObsSize; ++f) {
      s.agents(f, i) = obs.agents[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)] /
                       div[static_cast<std::size_t>(f)];
    }
  }
  s.cluster.resize(static_cast<Eigen::Index>(obs.cluster.size()));
  for (std::size_t k = 0; k < obs.cluster.size(); ++k) {
    const std::size_t f = k < obs.cluster.size() - 2 ? k % kAgentResourceFeatures
                                                     : kAgentResourceFeatures + (k + 2 - obs.cluster.size());
    s.cluster[static_cast<Eigen::Index>(k)] = obs.cluster[k] / div[f];
  }
  s.masks = obs.masks;
  return s;
}

// ---------------------------------------------------------------------------
// QNetworks

QNetworks::QNetworks(int num_agents, int num_actions, const std::vector<int>& agent_hidden,
                     const std::vector<int>& cluster_hidden)
    : num_actions_(num_actions) {
  std::vector<int> sizes{cluster_obs_size(num_agents)};
  sizes.insert(sizes.end(), cluster_hidden.begin(), cluster_hidden.end());
  sizes.push_back(1);
  cluster_ = Mlp(sizes, 0);
  total_ = cluster_.num_params();
  for (int i = 0; i < num_agents; ++i) {
    std::vector<int> a{kAgentObsSize};
    a.insert(a.end(), agent_hidden.begin(), agent_hidden.end());
    a.push_back(num_actions);
    agents_.emplace_back(a, total_);
    total_ += agents_.back().num_params();
  }
}

Eigen::VectorXd QNetworks::initialize(std::mt19937_64& rng) const {
  Eigen::VectorXd params(total_);
  cluster_.initialize(params, rng);
  for (const auto& a : agents_) a.initialize(params, rng);
  return params;
}

Eigen::VectorXd QNetworks::agent_values(const Eigen::VectorXd& params, int agent,
                                        const Eigen::VectorXd& obs) const {
  return agent_net(agent).forward(params, obs).col(0);
}

double QNetworks::cluster_value(const Eigen::VectorXd& params,
                                const Eigen::VectorXd& cluster_obs) const {
  return cluster_.forward(params, cluster_obs)(0, 0);
}

// ---------------------------------------------------------------------------
// Operations

int greedy_action(const Eigen::VectorXd& values) {
  int best = 0;
  for (Eigen::Index a = 1; a < values.size(); ++a) {
    if (values[a] > values[best]) best = static_cast<int>(a);
  }
  return best;
}

std::vector<int> select_actions(const QNetworks& nets, const Eigen::VectorXd& theta,
                                const EncodedState& state, double epsilon,
                                std::mt19937_64& rng) {
  std::vector<int> actions(static_cast<std::size_t>(nets.num_agents()));
  std::bernoulli_distribution explore(std::clamp(epsilon, 0.0, 1.0));
  std::uniform_int_distribution<int> any(0, nets.num_actions() - 1);
  for (int i = 0; i < nets.num_agents(); ++i) {
    if (explore(rng)) {
      actions[static_cast<std::size_t>(i)] = any(rng);
    } else {
      actions[static_cast<std::size_t>(i)] =
          greedy_action(nets.agent_values(theta, i, state.agents.col(i)));
    }
  }
  return actions;
}

double lagrangian_reward(double reward, int cost, double lambda, double bound) {
  return reward + lambda * (bound - static_cast<double>(cost));
}

double joint_q(const QNetworks& nets, const Eigen::VectorXd& theta, const EncodedState& state,
               std::span<const int> actions) {
  double q = nets.cluster_value(theta, state.cluster);
  for (int i = 0; i < nets.num_agents(); ++i) {
    if (state.masks[static_cast<std::size_t>(i)] == 0) continue;
    q += nets.agent_values(theta, i, state.agents.col(i))[actions[static_cast<std::size_t>(i)]];
  }
  return q;
}

double td_target(const QNetworks& nets, const Transition& tr, const Eigen::VectorXd& theta,
                 const Eigen::VectorXd& target, double lambda, double bound, double gamma) {
  return batch_targets(nets, std::span<const Transition>(&tr, 1), theta, target, lambda, bound,
                       gamma)[0];
}

LossAndGradient loss_and_gradients(const QNetworks& nets, std::span<const Transition> batch,
                                   const Eigen::VectorXd& theta, const Eigen::VectorXd& target,
                                   double lambda, double bound, double gamma) {
  if (batch.empty()) throw Error("loss_and_gradients needs a non-empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const Eigen::VectorXd y = batch_targets(nets, batch, theta, target, lambda, bound, gamma);

  MlpCache cluster_cache;
  Eigen::VectorXd pred =
      nets.cluster_net().forward(theta, gather_cluster(batch, false), &cluster_cache).row(0).transpose();
  std::vector<MlpCache> agent_cache(static_cast<std::size_t>(nets.num_agents()));
  for (int i = 0; i < nets.num_agents(); ++i) {
    const Eigen::MatrixXd q = nets.agent_net(i).forward(theta, gather_agent(batch, i, false),
                                                        &agent_cache[static_cast<std::size_t>(i)]);
    for (Eigen::Index b = 0; b < n; ++b) {
      const auto& tr = batch[static_cast<std::size_t>(b)];
      if (tr.state.masks[static_cast<std::size_t>(i)] == 0) continue;
      pred[b] += q(tr.actions[static_cast<std::size_t>(i)], b);
    }
  }

  const Eigen::VectorXd err = pred - y;
  LossAndGradient out;
  out.loss = err.squaredNorm() / static_cast<double>(n);
  if (!std::isfinite(out.loss) || !y.allFinite() || !pred.allFinite()) {
    throw NonFiniteLoss("TD loss is not finite (loss=" + std::to_string(out.loss) + ")");
  }
  const Eigen::VectorXd dpred = 2.0 * err / static_cast<double>(n);

  out.gradient = Eigen::VectorXd::Zero(theta.size());
  nets.cluster_net().backward(theta, cluster_cache, dpred.transpose(), out.gradient);
  for (int i = 0; i < nets.num_agents(); ++i) {
    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(nets.num_actions(), n);
    bool any = false;
    for (Eigen::Index b = 0; b < n; ++b) {
      const auto& tr = batch[static_cast<std::size_t>(b)];
      if (tr.state.masks[static_cast<std::size_t>(i)] == 0) continue;
      dq(tr.actions[static_cast<std::size_t>(i)], b) = dpred[b];
      any = true;
    }
    if (any) {
      nets.agent_net(i).backward(theta, agent_cache[static_cast<std::size_t>(i)], dq,
                                 out.gradient);
    }
  }
  if (!out.gradient.allFinite()) throw NonFiniteLoss("TD gradient is not finite");
  return out;
}

void apply_gradients(Eigen::VectorXd& theta, const Eigen::VectorXd& gradient, AdamState& state,
                     double learning_rate) {
  if (state.m.size() != theta.size()) {
    state.m = Eigen::VectorXd::Zero(theta.size());
    state.v = Eigen::VectorXd::Zero(theta.size());
    state.step = 0;
  }
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * gradient;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  theta.array() -= learning_rate * (state.m.array() / c1) /
                   ((state.v.array() / c2).sqrt() + state.epsilon);
}

void soft_update(const Eigen::VectorXd& theta, Eigen::VectorXd& target, double tau) {
  target = tau * theta + (1.0 - tau) * target;
}

double estimate_constraint_level(std::span<const Transition> batch) {
  if (batch.empty()) throw Error("estimate_constraint_level needs a non-empty batch");
  double sum = 0.0;
  for (const auto& t : batch) sum += t.cost;
  return sum / static_cast<double>(batch.size());
}

double dual_update(double lambda, double dual_lr, double bound, double level) {
  return std::max(0.0, lambda - dual_lr * (bound - level));
}

// ---------------------------------------------------------------------------
// Learner

void LearnerConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (memory_capacity < batch_size) throw ConfigError("memory_capacity must be >= batch_size");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(dual_lr > 0.0)) throw ConfigError("dual_lr must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  if (initial_lambda < 0.0) throw ConfigError("initial_lambda must be non-negative");
  if (optimization_iterations < 0) throw ConfigError("optimization_iterations must be >= 0");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 &&
        epsilon_end <= 1.0)) {
    throw ConfigError("epsilon bounds must lie in [0, 1]");
  }
  if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0)) {
    throw ConfigError("epsilon_decay_fraction must lie in (0, 1]");
  }
  if (estimator_window < 1) throw ConfigError("estimator_window must be >= 1");
  if (max_grad_norm < 0.0) throw ConfigError("max_grad_norm must be non-negative");
  for (const int h : agent_hidden) {
    if (h <= 0) throw ConfigError("hidden sizes must be positive");
  }
  for (const int h : cluster_hidden) {
    if (h <= 0) throw ConfigError("hidden sizes must be positive");
  }
}

void ReplayBuffer::push(Transition tr) {
  if (capacity_ == 0) return;
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(tr));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  std::vector<std::size_t> idx(items_.size());
  std::iota(idx.begin(), idx.end(), 0);
  n = std::min(n, idx.size());
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(items_[idx[i]]);
  return out;
}

double ReplayBuffer::trailing_cost_mean(std::size_t window) const {
  if (items_.empty()) return 0.0;
  window = std::min(window, items_.size());
  double sum = 0.0;
  for (auto it = items_.end() - static_cast<std::ptrdiff_t>(window); it != items_.end(); ++it) {
    sum += it->cost;
  }
  return sum / static_cast<double>(window);
}

LearnerState make_learner(const LearnerConfig& config, const EnvConfig& env, std::uint64_t seed) {
  config.validate();
  env.validate();
  LearnerState s;
  s.config = config;
  s.nets = QNetworks(env.num_agents(), static_cast<int>(env.action_set.size()),
                     config.agent_hidden, config.cluster_hidden);
  s.rng.seed(seed);
  s.theta = s.nets.initialize(s.rng);
  s.target = s.theta;
  s.lambda = config.initial_lambda;
  s.replay = ReplayBuffer(static_cast<std::size_t>(config.memory_capacity));
  s.action_set = env.action_set;
  s.scale = FeatureScale::for_env(env);
  s.epsilon = config.epsilon_start;
  return s;
}

double epsilon_at(const LearnerConfig& config, int episode, int total_episodes) {
  const double span = config.epsilon_decay_fraction * std::max(1, total_episodes);
  const double progress = std::min(1.0, static_cast<double>(episode) / span);
  return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * progress;
}

std::optional<double> optimize_once(LearnerState& s) {
  const auto& cfg = s.config;
  if (s.replay.size() < static_cast<std::size_t>(cfg.batch_size)) return std::nullopt;
  const auto batch = s.replay.sample(static_cast<std::size_t>(cfg.batch_size), s.rng);
  const double bound = cfg.constraint_bound();
  auto lg = loss_and_gradients(s.nets, batch, s.theta, s.target, s.lambda, bound, cfg.gamma);
  if (cfg.max_grad_norm > 0.0) {
    const double norm = lg.gradient.norm();
    if (norm > cfg.max_grad_norm) lg.gradient *= cfg.max_grad_norm / norm;
  }
  apply_gradients(s.theta, lg.gradient, s.adam, cfg.learning_rate);
  soft_update(s.theta, s.target, cfg.tau);
  if (!cfg.freeze_lambda) {
    const double level = cfg.estimator == ConstraintEstimator::kBatchMean
                             ? estimate_constraint_level(batch)
                             : s.replay.trailing_cost_mean(
                                   static_cast<std::size_t>(cfg.estimator_window));
    s.lambda = dual_update(s.lambda, cfg.dual_lr, bound, level);
  }
  ++s.optimizer_steps;
  return lg.loss;
}

std::vector<CurvePoint> train(LearnerState& s, Environment& env, int episodes,
                              const EpisodeCallback& on_episode) {
  std::vector<CurvePoint> curves;
  if (episodes <= 0) return curves;
  curves.reserve(static_cast<std::size_t>(episodes));
  const auto base_trace = env.config().trace;
  for (int e = 0; e < episodes; ++e) {
    s.epsilon = epsilon_at(s.config, e, episodes);
    const std::uint64_t episode_seed = s.rng();
    Observation obs = s.config.resample_training_trace
                          ? env.reset(episode_seed, std::make_shared<const TraceSet>(
                                                        resample_for_eval(*base_trace, episode_seed)))
                          : env.reset(episode_seed);
    EncodedState state = encode(obs, s.scale);
    while (!env.done()) {
      auto actions = select_actions(s.nets, s.theta, state, s.epsilon, s.rng);
      StepResult r = env.step(actions);
      EncodedState next = encode(r.next_observation, s.scale);
      s.replay.push(Transition{state, std::move(actions), r.reward, r.constraint_cost, next, r.done});
      state = std::move(next);
      ++s.env_steps;
    }
    for (int k = 0; k < s.config.optimization_iterations; ++k) {
      if (!optimize_once(s)) break;
    }
    ++s.episodes_done;
    const auto& tally = env.tally();
    CurvePoint p;
    p.episode = static_cast<int>(s.episodes_done);
    p.cum_reward = tally.reward_sum;
    p.remaining_cores = tally.remaining_sum / std::max(1, env.t());
    p.hot_cluster_count = tally.cluster_hot_count;
    p.lambda = s.lambda;
    p.epsilon = s.epsilon;
    curves.push_back(p);
    if (on_episode) on_episode(p);
  }
  if (s.config.resample_training_trace) env.reset(0, base_trace);
  return curves;
}

QPolicy::QPolicy(QNetworks nets, Eigen::VectorXd theta, FeatureScale scale,
                 std::vector<double> action_set, std::string name)
    : nets_(std::move(nets)),
      theta_(std::move(theta)),
      scale_(scale),
      action_set_(std::move(action_set)),
      name_(std::move(name)) {}

std::vector<int> QPolicy::actions(const Observation& obs) const {
  const EncodedState s = encode(obs, scale_);
  std::vector<int> out(static_cast<std::size_t>(nets_.num_agents()));
  for (int i = 0; i < nets_.num_agents(); ++i) {
    out[static_cast<std::size_t>(i)] = greedy_action(nets_.agent_values(theta_, i, s.agents.col(i)));
  }
  return out;
}

std::vector<double> QPolicy::rates(const Environment&, const Observation& obs) const {
  const auto idx = actions(obs);
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out[i] = action_set_[static_cast<std::size_t>(idx[i])];
  }
  return out;
}

QPolicy greedy_policy(const LearnerState& state, std::string name) {
  return QPolicy(state.nets, state.theta, state.scale, state.action_set, std::move(name));
}

}  // namespace oversub::marl
