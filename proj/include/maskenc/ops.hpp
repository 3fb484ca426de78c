#pragma once

// Differentiable operations. Each takes an optional tape; a node is recorded
// when a tape is supplied and at least one input requires a gradient.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "maskenc/kernels.hpp"
#include "maskenc/tape.hpp"
#include "maskenc/tensor.hpp"

namespace maskenc {

namespace detail {

template <typename Scalar>
bool any_requires_grad(const std::vector<BasicTensor<Scalar>>& ts) {
  for (const auto& t : ts) {
    if (t.requires_grad()) return true;
  }
  return false;
}

template <typename Scalar>
void maybe_record(Tape<Scalar>* tape, typename Tape<Scalar>::Node node) {
  if (tape != nullptr && any_requires_grad(node.inputs)) tape->record(std::move(node));
}

inline void require_nonempty(const Shape& s, const char* op) {
  if (s.numel() == 0) throw std::invalid_argument(std::string(op) + ": zero-size input " + s.str());
}

}  // namespace detail

/// Cross-correlation (no kernel flip) of NCHW input with OIHW weights.
template <typename Scalar>
BasicTensor<Scalar> conv2d(const BasicTensor<Scalar>& input, const BasicTensor<Scalar>& weight,
                           const BasicTensor<Scalar>& bias, std::int64_t padding, std::int64_t stride,
                           Tape<Scalar>* tape = nullptr) {
  const Shape& x = input.shape();
  const Shape& w = weight.shape();
  detail::require_nonempty(x, "conv2d");
  detail::require_nonempty(w, "conv2d");
  if (padding < 0 || stride < 1) {
    throw std::invalid_argument("conv2d: padding must be >= 0 and stride >= 1");
  }
  if (w.c != x.c) {
    throw std::invalid_argument("conv2d: input " + x.str() + " has " + std::to_string(x.c) +
                                " channels but weight " + w.str() + " expects " + std::to_string(w.c));
  }
  if (bias.numel() != w.n) {
    throw std::invalid_argument("conv2d: bias " + bias.shape().str() + " does not match weight " + w.str());
  }
  const std::int64_t span_h = x.h + 2 * padding - w.h;
  const std::int64_t span_w = x.w + 2 * padding - w.w;
  if (span_h < 0 || span_w < 0) {
    throw std::invalid_argument("conv2d: kernel " + w.str() + " larger than padded input " + x.str());
  }
  if (span_h % stride != 0 || span_w % stride != 0) {
    throw std::invalid_argument("conv2d: stride " + std::to_string(stride) +
                                " does not tile input " + x.str() + " evenly");
  }
  kernels::ConvGeometry g{x, w, padding, stride};
  BasicTensor<Scalar> out(g.output());
  kernels::conv2d_forward(g, input.data().data(), weight.data().data(), bias.data().data(),
                          out.data().data());
  typename Tape<Scalar>::Node node{
      .kind = OpKind::conv2d, .inputs = {input, weight, bias}, .output = out, .padding = padding, .stride = stride};
  detail::maybe_record(tape, std::move(node));
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> relu(const BasicTensor<Scalar>& input, Tape<Scalar>* tape = nullptr) {
  BasicTensor<Scalar> out(input.shape(), input.data().max(Scalar(0)));
  detail::maybe_record(tape, {.kind = OpKind::relu, .inputs = {input}, .output = out});
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> sigmoid(const BasicTensor<Scalar>& input, Tape<Scalar>* tape = nullptr) {
  BasicTensor<Scalar> out(input.shape(), input.data().unaryExpr([](Scalar v) { return kernels::sigmoid(v); }));
  detail::maybe_record(tape, {.kind = OpKind::sigmoid, .inputs = {input}, .output = out});
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> maxpool2x2(const BasicTensor<Scalar>& input, Tape<Scalar>* tape = nullptr) {
  const Shape& s = input.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw std::invalid_argument("maxpool2x2: spatial dims of " + s.str() + " must be even");
  }
  BasicTensor<Scalar> out(Shape{s.n, s.c, s.h / 2, s.w / 2});
  std::vector<std::int64_t> argmax;
  kernels::maxpool2x2_forward(s, input.data().data(), out.data().data(), argmax);
  detail::maybe_record(tape, {.kind = OpKind::maxpool2x2, .inputs = {input}, .output = out, .argmax = std::move(argmax)});
  return out;
}

/// Nearest-neighbour 2x upsampling: each pixel becomes a 2x2 block.
template <typename Scalar>
BasicTensor<Scalar> upsample2x(const BasicTensor<Scalar>& input, Tape<Scalar>* tape = nullptr) {
  const Shape& s = input.shape();
  BasicTensor<Scalar> out(Shape{s.n, s.c, s.h * 2, s.w * 2});
  kernels::upsample2x_forward(s, input.data().data(), out.data().data());
  detail::maybe_record(tape, {.kind = OpKind::upsample2x, .inputs = {input}, .output = out});
  return out;
}

/// Mean squared error over every element; returns a [1,1,1,1] tensor.
template <typename Scalar>
BasicTensor<Scalar> mse(const BasicTensor<Scalar>& pred, const BasicTensor<Scalar>& target,
                        Tape<Scalar>* tape = nullptr) {
  if (pred.shape() != target.shape()) {
    throw std::invalid_argument("mse: prediction " + pred.shape().str() + " vs target " +
                                target.shape().str());
  }
  detail::require_nonempty(pred.shape(), "mse");
  using Acc = accum_t<Scalar>;
  const Acc sum = (pred.data() - target.data()).template cast<Acc>().square().sum();
  BasicTensor<Scalar> out = BasicTensor<Scalar>::full(Shape{1, 1, 1, 1},
                                                      static_cast<Scalar>(sum / static_cast<Acc>(pred.numel())));
  detail::maybe_record(tape, {.kind = OpKind::mse, .inputs = {pred, target}, .output = out});
  return out;
}

/// Per-position affine map y[n] = gain * (scale * x[n] + bias) with scale and
/// bias shaped [1,C,H,W]: one learnable slope and offset for every pixel slot.
/// `gain` is a fixed constant, not a parameter.
template <typename Scalar>
BasicTensor<Scalar> pixel_affine(const BasicTensor<Scalar>& input, const BasicTensor<Scalar>& scale,
                                 const BasicTensor<Scalar>& bias, Scalar gain = Scalar(1),
                                 Tape<Scalar>* tape = nullptr) {
  const Shape& s = input.shape();
  const Shape per{1, s.c, s.h, s.w};
  if (scale.shape() != per || bias.shape() != per) {
    throw std::invalid_argument("pixel_affine: input " + s.str() + " needs scale/bias " + per.str() +
                                ", got " + scale.shape().str() + " and " + bias.shape().str());
  }
  BasicTensor<Scalar> out(s);
  const std::int64_t k = per.numel();
  for (std::int64_t n = 0; n < s.n; ++n) {
    out.data().segment(n * k, k) = gain * (scale.data() * input.data().segment(n * k, k) + bias.data());
  }
  typename Tape<Scalar>::Node node{
      .kind = OpKind::pixel_affine, .inputs = {input, scale, bias}, .output = out, .gain = gain};
  detail::maybe_record(tape, std::move(node));
  return out;
}

}  // namespace maskenc
