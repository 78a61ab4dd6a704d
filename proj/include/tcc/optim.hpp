#pragma once

#include <cmath>
#include <vector>

#include "tcc/nn.hpp"

namespace tcc {

struct RMSpropOptions {
  double learning_rate = 3e-5;
  double decay = 0.99;
  double epsilon = 1e-8;
};

// v <- decay * v + (1 - decay) * g^2;  p <- p - lr * g / (sqrt(v) + eps)
class RMSprop {
 public:
  RMSprop(nn::ParamList params, RMSpropOptions opts) : params_(std::move(params)), opts_(opts) {
    for (const auto& p : params_) square_avg_.emplace_back(p.var.size(), 0.0);
  }

  const RMSpropOptions& options() const { return opts_; }

  void zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
  }

  // `grad_scale` divides accumulated gradients (batch averaging).
  void step(double grad_scale = 1.0) {
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& node = params_[k].var.node();
      if (node.grad.empty()) continue;
      auto& v = square_avg_[k];
      for (std::size_t i = 0; i < node.value.size(); ++i) {
        const double g = node.grad[i] / grad_scale;
        v[i] = opts_.decay * v[i] + (1.0 - opts_.decay) * g * g;
        node.value[i] -= opts_.learning_rate * g / (std::sqrt(v[i]) + opts_.epsilon);
      }
    }
  }

 private:
  nn::ParamList params_;
  RMSpropOptions opts_;
  std::vector<std::vector<double>> square_avg_;
};

}  // namespace tcc
