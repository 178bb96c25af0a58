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

#include "oversub/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace oversub::marl {
namespace {

using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using MatMap = Eigen::Map<Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, Eigen::Index offset)
    : sizes_(std::move(layer_sizes)), offset_(offset) {
  if (sizes_.size() < 2) throw std::invalid_argument("an MLP needs at least input and output");
  for (const int s : sizes_) {
    if (s <= 0) throw std::invalid_argument("MLP layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    count_ += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::VectorXd& params, const Eigen::MatrixXd& input,
                             MlpCache* cache) const {
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Eigen::MatrixXd h = input;
  Eigen::Index off = offset_;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::Index in = sizes_[l];
    const Eigen::Index out = sizes_[l + 1];
    ConstMatMap w(params.data() + off, out, in);
    off += out * in;
    ConstVecMap b(params.data() + off, out);
    off += out;
    Eigen::MatrixXd z = w * h;
    z.colwise() += b;
    if (cache) cache->inputs.push_back(h);
    if (l + 1 < layers) {
      if (cache) cache->pre.push_back(z);
      h = z.cwiseMax(0.0);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

void Mlp::backward(const Eigen::VectorXd& params, const MlpCache& cache,
                   const Eigen::MatrixXd& grad_output, Eigen::VectorXd& grad) const {
  const std::size_t layers = sizes_.size() - 1;
  // Offsets of each layer's W block.
  std::vector<Eigen::Index> offs(layers);
  Eigen::Index off = offset_;
  for (std::size_t l = 0; l < layers; ++l) {
    offs[l] = off;
    off += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  Eigen::MatrixXd delta = grad_output;
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::Index in = sizes_[l];
    const Eigen::Index out = sizes_[l + 1];
    MatMap gw(grad.data() + offs[l], out, in);
    VecMap gb(grad.data() + offs[l] + out * in, out);
    gw.noalias() += delta * cache.inputs[l].transpose();
    gb += delta.rowwise().sum();
    if (l == 0) break;
    ConstMatMap w(params.data() + offs[l], out, in);
    Eigen::MatrixXd back = w.transpose() * delta;
    const auto& z = cache.pre[l - 1];
    delta = back.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
  }
}

void Mlp::initialize(Eigen::VectorXd& params, std::mt19937_64& rng) const {
  Eigen::Index off = offset_;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const Eigen::Index in = sizes_[l];
    const Eigen::Index out = sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < out * (in + 1); ++i) params[off + i] = dist(rng);
    off += out * (in + 1);
  }
}

}  // namespace oversub::marl
