#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "maskenc/kernels.hpp"
#include "maskenc/tensor.hpp"

namespace maskenc {

enum class OpKind { conv2d, relu, sigmoid, maxpool2x2, upsample2x, mse, pixel_affine };

inline const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::conv2d: return "conv2d";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::maxpool2x2: return "maxpool2x2";
    case OpKind::upsample2x: return "upsample2x";
    case OpKind::mse: return "mse";
    case OpKind::pixel_affine: return "pixel_affine";
  }
  return "?";
}

/// Append-only record of differentiable operations.
///
/// Nodes are appended in execution order, so the list is already
/// topologically sorted. backward() consumes the tape; call reset() before
/// recording the next forward pass.
template <typename Scalar>
class Tape {
 public:
  using Tensor = BasicTensor<Scalar>;

  struct Node {
    OpKind kind;
    std::vector<Tensor> inputs;
    Tensor output;
    std::vector<std::int64_t> argmax{};  // maxpool2x2 only
    std::int64_t padding = 0;          // conv2d only
    std::int64_t stride = 1;           // conv2d only
    Scalar gain = Scalar(1);           // pixel_affine only
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  void reset() {
    nodes_.clear();
    consumed_ = false;
  }

  std::size_t record(Node node) {
    if (consumed_) throw std::logic_error("tape already consumed by backward(); call reset() first");
    const std::size_t id = nodes_.size();
    auto& impl = *node.output.impl_;
    impl.node = id;
    impl.tape = this;
    node.output.set_requires_grad(true);
    nodes_.push_back(std::move(node));
    return id;
  }

  /// Reverse-mode sweep from a scalar loss produced on this tape.
  void backward(const Tensor& loss) {
    if (consumed_) {
      throw std::logic_error("backward() called twice on the same tape; re-run the forward pass");
    }
    if (loss.numel() != 1) throw std::invalid_argument("backward() needs a scalar loss, got " + loss.shape().str());
    const auto id = loss.node_id();
    if (!id || loss.impl_->tape != this) {
      throw std::invalid_argument("loss was not produced on this tape");
    }
    nodes_[*id].output.grad()[0] += Scalar(1);
    for (std::size_t i = *id + 1; i-- > 0;) propagate(nodes_[i]);
    consumed_ = true;
  }

 private:
  static Scalar* grad_or_null(Tensor& t) { return t.requires_grad() ? t.grad().data() : nullptr; }

  static void propagate(Node& node) {
    const auto& dy = node.output.grad();
    auto& in = node.inputs;
    switch (node.kind) {
      case OpKind::conv2d: {
        kernels::ConvGeometry g{in[0].shape(), in[1].shape(), node.padding, node.stride};
        Scalar* dx = grad_or_null(in[0]);
        Scalar* dw = grad_or_null(in[1]);
        Scalar* db = grad_or_null(in[2]);
        if (dx || dw || db) {
          kernels::conv2d_backward(g, in[0].data().data(), in[1].data().data(), dy.data(), dx, dw, db);
        }
        break;
      }
      case OpKind::relu:
        if (in[0].requires_grad()) {
          in[0].grad() += (in[0].data() > Scalar(0)).select(dy, Scalar(0));
        }
        break;
      case OpKind::sigmoid:
        if (in[0].requires_grad()) {
          const auto& s = node.output.data();
          in[0].grad() += dy * s * (Scalar(1) - s);
        }
        break;
      case OpKind::maxpool2x2:
        if (in[0].requires_grad()) kernels::maxpool2x2_backward(node.argmax, dy.data(), in[0].grad().data());
        break;
      case OpKind::upsample2x:
        if (in[0].requires_grad()) kernels::upsample2x_backward(in[0].shape(), dy.data(), in[0].grad().data());
        break;
      case OpKind::mse: {
        const Scalar scale = Scalar(2) * dy[0] / static_cast<Scalar>(in[0].numel());
        if (in[0].requires_grad()) in[0].grad() += scale * (in[0].data() - in[1].data());
        if (in[1].requires_grad()) in[1].grad() += scale * (in[1].data() - in[0].data());
        break;
      }
      case OpKind::pixel_affine: {
        // y[n] = gain * (scale * x[n] + bias), scale and bias shaped [1,C,H,W].
        const std::int64_t per = in[1].numel();
        const std::int64_t batch = in[0].shape().n;
        for (std::int64_t n = 0; n < batch; ++n) {
          const typename Tensor::Array dyn = node.gain * dy.segment(n * per, per);
          if (in[0].requires_grad()) in[0].grad().segment(n * per, per) += dyn * in[1].data();
          if (in[1].requires_grad()) in[1].grad() += dyn * in[0].data().segment(n * per, per);
          if (in[2].requires_grad()) in[2].grad() += dyn;
        }
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace maskenc
