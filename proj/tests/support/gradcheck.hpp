// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference oracle. Independent of the reverse-mode path: it
// only ever reads forward values.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sunet/autograd.hpp"
#include "sunet/nn.hpp"

namespace sunet::testing {

// Relative error with an absolute floor so near-zero gradients compare on an
// absolute scale of 1e-6.
inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t kinks = 0;  // entries re-checked at a smaller step
  std::string worst;  // "<name>[index] analytic=.. numeric=.."
};

inline void note(GradCheckReport& r, const std::string& name, std::size_t i, double a, double n) {
  const double e = relative_error(a, n);
  ++r.checked;
  if (e >= r.max_rel_error) {
    r.max_rel_error = e;
    r.worst = name + "[" + std::to_string(i) + "] analytic=" + std::to_string(a) + " numeric=" + std::to_string(n);
  }
}

using LeafLoss = std::function<Var(Tape&, const std::vector<Var>&)>;

// Checks d loss / d input for every element of every input tensor.
inline GradCheckReport check_leaf_gradients(std::vector<Tensor> inputs, const LeafLoss& loss, double h = 1e-5) {
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& x : xs) leaves.push_back(tape.constant(x));
    return loss(tape, leaves).value().item();
  };

  Tape tape;
  std::vector<Var> leaves;
  for (const Tensor& x : inputs) leaves.push_back(tape.leaf(x));
  Var out = loss(tape, leaves);
  tape.backward(out);

  GradCheckReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = leaves[k].grad();
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + h;
      const double up = evaluate(inputs);
      inputs[k][i] = orig - h;
      const double down = evaluate(inputs);
      inputs[k][i] = orig;
      note(report, "input" + std::to_string(k), i, analytic[i], (up - down) / (2 * h));
    }
  }
  return report;
}

using ParamLoss = std::function<Var(Tape&)>;

// Checks every trainable scalar in `store` (or at most `max_per_param` evenly
// spaced entries per tensor when nonzero). `loss` must be a pure function of
// the parameter values: reseed any randomness inside it.
//
// With kink_aware, an entry that fails the central check and whose forward and
// backward quotients disagree by more than 1e-3 relative (floored at 1e-2) has
// a ReLU or max-pool switch inside [x-h, x+h], where the central quotient
// averages two slopes. The step is divided by 10 (down to 1e-8) until the
// one-sided quotients agree, the central quotient at that step is used, and
// the entry is counted in `kinks`.
inline GradCheckReport check_param_gradients(ParameterStore& store, const ParamLoss& loss, double h = 1e-5,
                                             std::size_t max_per_param = 0, bool kink_aware = false) {
  auto evaluate = [&] {
    Tape tape;
    return loss(tape).value().item();
  };
  store.zero_grad();
  {
    Tape tape;
    Var out = loss(tape);
    tape.backward(out);
  }
  GradCheckReport report;
  const double f0 = kink_aware ? evaluate() : 0.0;
  store.for_each([&](Parameter& p) {
    if (!p.trainable) return;
    const Tensor analytic = p.grad;
    const std::size_t n = p.value.size();
    const std::size_t stride = (max_per_param == 0 || n <= max_per_param) ? 1 : n / max_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = p.value[i];
      auto quotients = [&](double step) {
        p.value[i] = orig + step;
        const double up = evaluate();
        p.value[i] = orig - step;
        const double down = evaluate();
        p.value[i] = orig;
        return std::array<double, 3>{(up - down) / (2 * step), (up - f0) / step, (f0 - down) / step};
      };
      auto one_sided_split = [](const std::array<double, 3>& q) {
        return std::abs(q[1] - q[2]) > 1e-3 * std::max({std::abs(q[1]), std::abs(q[2]), 1e-2});
      };
      auto q = quotients(h);
      if (kink_aware && relative_error(analytic[i], q[0]) >= 1e-4 && one_sided_split(q)) {
        ++report.kinks;
        for (double step = h / 10; step >= 1e-8 && one_sided_split(q); step /= 10) q = quotients(step);
        note(report, p.name + "(kink)", i, analytic[i], q[0]);
      } else {
        note(report, p.name, i, analytic[i], q[0]);
      }
    }
  });
  return report;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace sunet::testing
