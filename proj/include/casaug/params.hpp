// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "casaug/tensor.hpp"

namespace casaug {

/// Ordered (name, tensor) view over trainable parameters. Tensors share
/// storage with the owning module.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

enum class InitMode { Zero, Random };

/// Seeded parameter initializer. Draws are consumed in call order, so the
/// order in which modules initialize is part of the reproducibility contract.
class Initializer {
 public:
  Initializer(InitMode mode, std::uint64_t seed) : mode_(mode), rng_(seed) {}

  Tensor normal(Shape shape, double stddev) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    if (mode_ == InitMode::Random) {
      std::normal_distribution<double> dist(0.0, stddev);
      for (auto& v : t.mutable_data()) v = dist(rng_);
    }
    return t;
  }
  Tensor zeros(Shape shape) { return Tensor::zeros(std::move(shape), true); }

 private:
  InitMode mode_;
  std::mt19937_64 rng_;
};

}  // namespace casaug
