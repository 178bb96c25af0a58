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

#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oversub::marl {

/// Activations kept from a forward pass for backprop.
struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer (post-ReLU of the previous)
  std::vector<Eigen::MatrixXd> pre;     // pre-activations of each hidden layer
};

/// Fully connected ReLU network whose weights live in a slice of a larger
/// flat parameter vector. Per layer the slice holds W (out x in,
/// column-major) followed by b (out).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, Eigen::Index offset);

  const std::vector<int>& layer_sizes() const noexcept { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  Eigen::Index offset() const noexcept { return offset_; }
  Eigen::Index num_params() const noexcept { return count_; }

  /// Column-per-sample forward pass; the last layer is linear.
  Eigen::MatrixXd forward(const Eigen::VectorXd& params, const Eigen::MatrixXd& input,
                          MlpCache* cache = nullptr) const;

  /// Adds dLoss/dparams into `grad` (same layout as `params`) given
  /// dLoss/doutput.
  void backward(const Eigen::VectorXd& params, const MlpCache& cache,
                const Eigen::MatrixXd& grad_output, Eigen::VectorXd& grad) const;

  /// Uniform in +-1/sqrt(fan_in) for weights and biases.
  void initialize(Eigen::VectorXd& params, std::mt19937_64& rng) const;

 private:
  std::vector<int> sizes_;
  Eigen::Index offset_ = 0;
  Eigen::Index count_ = 0;
};

}  // namespace oversub::marl
