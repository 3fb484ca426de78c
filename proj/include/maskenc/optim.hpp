#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "maskenc/errors.hpp"
#include "maskenc/tensor.hpp"

namespace maskenc {

enum class OptimizerKind { adam, sgd };

template <typename Scalar>
struct AdamState {
  using Array = typename BasicTensor<Scalar>::Array;

  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
  std::int64_t step = 0;
  std::vector<Array> first_moment;
  std::vector<Array> second_moment;
};

namespace detail {

template <typename Scalar>
void check_step_inputs(std::span<BasicTensor<Scalar>> params, Scalar lr) {
  if (!(lr > Scalar(0))) throw std::invalid_argument("learning rate must be > 0");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw std::invalid_argument("parameter " + std::to_string(i) + " has no gradient");
    }
    if (!params[i].grad().isFinite().all()) {
      throw NumericalError("non-finite gradient in parameter " + std::to_string(i));
    }
  }
}

}  // namespace detail

/// One Adam update with bias correction. Moments are allocated on first use.
template <typename Scalar>
void adam_step(std::span<BasicTensor<Scalar>> params, AdamState<Scalar>& state, Scalar lr) {
  detail::check_step_inputs(params, lr);
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(AdamState<Scalar>::Array::Zero(p.numel()));
      state.second_moment.push_back(AdamState<Scalar>::Array::Zero(p.numel()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("optimizer state tracks " + std::to_string(state.first_moment.size()) +
                                " parameters, got " + std::to_string(params.size()));
  }
  ++state.step;
  const auto t = static_cast<Scalar>(state.step);
  const Scalar correct1 = Scalar(1) - std::pow(state.beta1, t);
  const Scalar correct2 = Scalar(1) - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto& g = params[i].grad();
    if (m.size() != g.size()) throw std::invalid_argument("moment shape mismatch for parameter " + std::to_string(i));
    m = state.beta1 * m + (Scalar(1) - state.beta1) * g;
    v = state.beta2 * v + (Scalar(1) - state.beta2) * g.square();
    params[i].data() -= lr * (m / correct1) / ((v / correct2).sqrt() + state.epsilon);
  }
}

template <typename Scalar>
void sgd_step(std::span<BasicTensor<Scalar>> params, Scalar lr) {
  detail::check_step_inputs(params, lr);
  for (auto& p : params) p.data() -= lr * p.grad();
}

/// Uniform(-b, b) with b = sqrt(6 / fan_in), fan_in = C*H*W of an OIHW shape.
/// Uses the top 53 bits of mt19937_64 so the stream is portable across
/// standard libraries.
template <typename Scalar>
BasicTensor<Scalar> kaiming_init(Shape shape, std::uint64_t seed) {
  const std::int64_t fan_in = shape.c * shape.h * shape.w;
  if (fan_in <= 0) throw std::invalid_argument("kaiming_init: no fan-in in shape " + shape.str());
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::mt19937_64 rng(seed);
  BasicTensor<Scalar> t(shape);
  for (auto& v : t.data()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = static_cast<Scalar>(bound * (2.0 * u - 1.0));
    if (std::abs(static_cast<double>(v)) > bound) v = std::nextafter(v, Scalar(0));
  }
  return t;
}

}  // namespace maskenc
