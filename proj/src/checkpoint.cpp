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

#include "oversub/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "oversub/config.hpp"
#include "oversub/errors.hpp"

namespace oversub {
namespace {

Json params_to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd params_from_json(const Json& a, Eigen::Index expected, const char* what) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != expected) {
    throw CheckpointVersionMismatch(std::string(what) + " has the wrong number of parameters");
  }
  Eigen::VectorXd v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) v[i] = a[static_cast<std::size_t>(i)].get<double>();
  if (!v.allFinite()) throw CheckpointVersionMismatch(std::string(what) + " is not finite");
  return v;
}

}  // namespace

void save_checkpoint(const marl::LearnerState& s, const std::filesystem::path& path) {
  Json shapes = Json::array();
  shapes.push_back(s.nets.cluster_net().layer_sizes());
  for (int i = 0; i < s.nets.num_agents(); ++i) shapes.push_back(s.nets.agent_net(i).layer_sizes());
  std::ostringstream rng;
  rng << s.rng;
  Json j{{"version", kCheckpointVersion},
         {"hyperparameters", to_json(s.config)},
         {"lambda", s.lambda},
         {"num_agents", s.nets.num_agents()},
         {"action_set", s.action_set},
         {"feature_scale", {{"cpu", s.scale.cpu}, {"mem", s.scale.mem}, {"net", s.scale.net}}},
         {"layer_shapes", shapes},
         {"episodes_done", s.episodes_done},
         {"env_steps", s.env_steps},
         {"optimizer_steps", s.optimizer_steps},
         {"epsilon", s.epsilon},
         {"rng_state", rng.str()},
         {"theta", params_to_json(s.theta)},
         {"target", params_to_json(s.target)}};
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

marl::LearnerState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  try {
    const Json j = Json::parse(in);
    if (!j.is_object() || !j.contains("version") || j.at("version") != kCheckpointVersion) {
      throw CheckpointVersionMismatch(path.string() + ": unsupported checkpoint version");
    }
    marl::LearnerState s;
    s.config = learner_config_from_json(j.at("hyperparameters"));
    s.action_set = j.at("action_set").get<std::vector<double>>();
    const int agents = j.at("num_agents").get<int>();
    if (agents < 1 || s.action_set.empty()) {
      throw CheckpointVersionMismatch(path.string() + ": malformed network description");
    }
    s.nets = marl::QNetworks(agents, static_cast<int>(s.action_set.size()),
                             s.config.agent_hidden, s.config.cluster_hidden);
    const auto& shapes = j.at("layer_shapes");
    if (!shapes.is_array() || static_cast<int>(shapes.size()) != agents + 1 ||
        shapes[0].get<std::vector<int>>() != s.nets.cluster_net().layer_sizes()) {
      throw CheckpointVersionMismatch(path.string() + ": layer shapes do not match");
    }
    for (int i = 0; i < agents; ++i) {
      if (shapes[static_cast<std::size_t>(i + 1)].get<std::vector<int>>() !=
          s.nets.agent_net(i).layer_sizes()) {
        throw CheckpointVersionMismatch(path.string() + ": layer shapes do not match");
      }
    }
    s.theta = params_from_json(j.at("theta"), s.nets.num_params(), "theta");
    s.target = params_from_json(j.at("target"), s.nets.num_params(), "target");
    s.lambda = j.at("lambda").get<double>();
    const auto& fs = j.at("feature_scale");
    s.scale = marl::FeatureScale{fs.at("cpu").get<double>(), fs.at("mem").get<double>(),
                                 fs.at("net").get<double>()};
    s.episodes_done = j.at("episodes_done").get<long long>();
    s.env_steps = j.at("env_steps").get<long long>();
    s.optimizer_steps = j.at("optimizer_steps").get<long long>();
    s.epsilon = j.at("epsilon").get<double>();
    std::istringstream rng(j.at("rng_state").get<std::string>());
    rng >> s.rng;
    if (!rng) throw CheckpointVersionMismatch(path.string() + ": bad rng state");
    s.replay = marl::ReplayBuffer(static_cast<std::size_t>(s.config.memory_capacity));
    return s;
  } catch (const CheckpointVersionMismatch&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointVersionMismatch(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointVersionMismatch(path.string() + ": " + e.what());
  }
}

}  // namespace oversub
