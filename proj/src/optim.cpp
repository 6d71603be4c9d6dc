#include "mcr/optim.hpp"

#include "mcr/error.hpp"

#include <algorithm>
#include <cmath>

namespace mcr {

void Adam::step(const std::vector<Parameter*>& params, double lr) {
  for (const Parameter* p : params) {
    if (!p->grad.allFinite()) fail(ErrorKind::Divergence, "non-finite gradient in parameter " + p->name);
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (Parameter* p : params) {
    Matrix grad = p->grad;
    if (p->decay && config_.weight_decay != 0.0) grad += 2.0 * config_.weight_decay * p->value;
    auto [it, inserted] = moments_.try_emplace(p->name);
    Moments& m = it->second;
    if (inserted) {
      m.first = Matrix::Zero(grad.rows(), grad.cols());
      m.second = Matrix::Zero(grad.rows(), grad.cols());
    }
    m.first = config_.beta1 * m.first + (1.0 - config_.beta1) * grad;
    m.second = config_.beta2 * m.second + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
    p->value.array() -=
        lr * (m.first.array() / correction1) / ((m.second.array() / correction2).sqrt() + config_.eps);
  }
}

double lr_schedule(int epoch, int total_epochs, double base_lr, int decay_start) {
  if (epoch < decay_start) return base_lr;
  if (epoch >= total_epochs) return 0.0;
  return base_lr * static_cast<double>(total_epochs - epoch) / static_cast<double>(total_epochs - decay_start);
}

GradCheckReport grad_check(const std::function<double()>& objective, const std::function<void()>& backprop,
                           const std::vector<Parameter*>& params, double h, double tol) {
  for (Parameter* p : params) p->zero_grad();
  backprop();
  GradCheckReport report;
  for (Parameter* p : params) {
    for (Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + h;
      const double up = objective();
      x = saved - h;
      const double down = objective();
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.coordinates;
      if (report.worst_index < 0 || rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = p->name;
        report.worst_index = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error < tol;
  return report;
}

}  // namespace mcr
