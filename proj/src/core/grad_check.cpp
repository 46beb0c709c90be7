#include "helios/core/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "helios/core/error.hpp"

namespace helios {

namespace {

double probe(const std::function<Tensor()>& loss, std::size_t tensor, std::size_t index) {
  NoGradScope no_grad;
  const double v = loss().item();
  if (!std::isfinite(v)) {
    fail(ErrorCode::numeric, "non-finite loss while probing tensor " + std::to_string(tensor) +
                                 " coordinate " + std::to_string(index));
  }
  return v;
}

}  // namespace

GradCheckReport grad_check_tensors(const std::function<Tensor()>& loss, std::span<Tensor> tensors,
                                   double step) {
  if (!(step > 0.0)) fail(ErrorCode::parameter, "grad_check step must be positive");
  std::vector<bool> was_tracking;
  for (auto& t : tensors) {
    was_tracking.push_back(t.requires_grad());
    t.set_requires_grad(true);
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor l;
    {
      TapeScope scope(tape);
      l = loss();
    }
    tape.backward(l);
    for (auto& t : tensors) {
      auto g = t.grad();
      analytic.emplace_back(g ? std::vector<double>(g->begin(), g->end()) : std::vector<double>(t.numel(), 0.0));
    }
  }

  GradCheckReport report;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    auto data = tensors[ti].data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double original = data[i];
      data[i] = original + step;
      const double up = probe(loss, ti, i);
      data[i] = original - step;
      const double down = probe(loss, ti, i);
      data[i] = original;
      const double central = (up - down) / (2.0 * step);
      const double a = analytic[ti][i];
      const double err = std::abs(a - central) / std::max(1e-8, std::abs(central) + std::abs(a));
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_tensor = ti;
        report.worst_index = i;
      }
      ++report.coordinates;
    }
  }
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) tensors[ti].set_requires_grad(was_tracking[ti]);
  return report;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step) {
  Tensor probe_x = x.clone();
  Tensor tensors[] = {probe_x};
  return grad_check_tensors([&] { return f(probe_x); }, tensors, step).max_rel_error;
}

}  // namespace helios
