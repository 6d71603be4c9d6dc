#pragma once

#include "mcr/tensor.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mcr {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// L2 coefficient: the loss gains lambda * |W|^2 on every decaying parameter,
  /// so 2 * lambda * W joins the gradient before the moment update.
  double weight_decay = 0.0;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// One update with learning rate lr. Throws ErrorKind::Divergence naming the
  /// first parameter with a non-finite gradient, before touching any value.
  void step(const std::vector<Parameter*>& params, double lr);

  std::size_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Moments {
    Matrix first;
    Matrix second;
  };
  AdamConfig config_;
  std::size_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

/// Constant base_lr up to decay_start, then linear decay reaching 0 at total_epochs.
double lr_schedule(int epoch, int total_epochs, double base_lr, int decay_start);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
  bool passed = true;
};

/// Central finite differences over every coordinate of params. `backprop` must
/// fill the grads of params (they are zeroed first). Relative error is
/// |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(const std::function<double()>& objective, const std::function<void()>& backprop,
                           const std::vector<Parameter*>& params, double h, double tol);

}  // namespace mcr
