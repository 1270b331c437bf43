#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "laviter/core/params.hpp"

namespace laviter {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// Adam with bias correction and decoupled weight decay. Moment buffers
// are keyed by parameter name so the set of updated tensors may change
// between steps without losing state for the rest.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  const AdamConfig& config() const { return config_; }
  int64_t step_count(const std::string& name) const;

  // Applies one update from the accumulated gradients. Parameters with
  // no gradient buffer are treated as zero-gradient (decay still applies).
  void step(ParamList& params);

 private:
  struct State {
    int64_t t = 0;
    std::vector<double> m, v;
  };
  AdamConfig config_;
  std::unordered_map<std::string, State> state_;
};

}  // namespace laviter
