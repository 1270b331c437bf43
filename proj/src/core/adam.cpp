#include "laviter/core/adam.hpp"

#include <cmath>

namespace laviter {

int64_t Adam::step_count(const std::string& name) const {
  auto it = state_.find(name);
  return it == state_.end() ? 0 : it->second.t;
}

void Adam::step(ParamList& params) {
  for (auto& np : params) {
    auto& p = np.tensor.raw();
    State& st = state_[np.name];
    if (st.m.empty()) {
      st.m.assign(p.size(), 0.0);
      st.v.assign(p.size(), 0.0);
    } else if (st.m.size() != p.size()) {
      throw ContractError("optimizer state for '" + np.name + "' has size " +
                          std::to_string(st.m.size()) + " but parameter has " +
                          std::to_string(p.size()));
    }
    st.t += 1;
    double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(st.t));
    double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(st.t));
    bool has_grad = np.tensor.has_grad();
    const std::vector<double>* g = has_grad ? &np.tensor.grad() : nullptr;
    for (size_t i = 0; i < p.size(); ++i) {
      double gi = has_grad ? (*g)[i] : 0.0;
      st.m[i] = config_.beta1 * st.m[i] + (1.0 - config_.beta1) * gi;
      st.v[i] = config_.beta2 * st.v[i] + (1.0 - config_.beta2) * gi * gi;
      double mhat = st.m[i] / bc1;
      double vhat = st.v[i] / bc2;
      p[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
      p[i] -= config_.lr * config_.weight_decay * p[i];
    }
  }
}

}  // namespace laviter
