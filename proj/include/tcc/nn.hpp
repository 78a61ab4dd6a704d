#pragma once

// Parameterised layers on top of the autodiff engine.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "tcc/autodiff.hpp"

namespace tcc::nn {

using ad::Var;

struct NamedParam {
  std::string name;
  Var var;
};

using ParamList = std::vector<NamedParam>;

class Module {
 public:
  virtual ~Module() = default;
  virtual void collect(const std::string& prefix, ParamList& out) const = 0;

  ParamList parameters(const std::string& prefix = "") const {
    ParamList out;
    collect(prefix, out);
    return out;
  }
};

inline std::size_t parameter_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.var.size();
  return n;
}

inline Var uniform_param(ad::Dims dims, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> v(ad::numel(dims));
  for (double& x : v) x = u(rng);
  return ad::leaf(std::move(dims), std::move(v));
}

inline Var filled_param(ad::Dims dims, double value) {
  std::vector<double> v(ad::numel(dims), value);
  return ad::leaf(std::move(dims), std::move(v));
}

class Conv2d : public Module {
 public:
  Conv2d() = default;
  // He-uniform weights; zero bias.
  Conv2d(int in, int out, int kernel, int stride, int pad, std::mt19937_64& rng, bool bias = true)
      : stride_(stride), pad_(pad) {
    const double fan_in = static_cast<double>(in) * kernel * kernel;
    weight_ = uniform_param({out, in, kernel, kernel}, std::sqrt(6.0 / fan_in), rng);
    if (bias) bias_ = filled_param({out}, 0.0);
  }

  Var operator()(const Var& x) const { return ad::conv2d(x, weight_, bias_, stride_, pad_); }

  int out_channels() const { return weight_.dims()[0]; }
  Var& weight() { return weight_; }
  Var& bias() { return bias_; }

  void collect(const std::string& prefix, ParamList& out) const override {
    out.push_back({prefix + "weight", weight_});
    if (bias_.defined()) out.push_back({prefix + "bias", bias_});
  }

 private:
  Var weight_;
  Var bias_;
  int stride_ = 1;
  int pad_ = 0;
};

class Linear : public Module {
 public:
  Linear() = default;
  Linear(int in, int out, std::mt19937_64& rng)
      : weight_(uniform_param({out, in}, std::sqrt(1.0 / in), rng)), bias_(filled_param({out}, 0.0)) {}

  Var operator()(const Var& x) const { return ad::linear(x, weight_, bias_); }
  Var& weight() { return weight_; }
  Var& bias() { return bias_; }

  void collect(const std::string& prefix, ParamList& out) const override {
    out.push_back({prefix + "weight", weight_});
    out.push_back({prefix + "bias", bias_});
  }

 private:
  Var weight_;
  Var bias_;
};

}  // namespace tcc::nn
