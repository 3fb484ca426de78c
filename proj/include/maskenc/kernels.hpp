#pragma once

// Forward and backward kernels on raw NCHW arrays. No tape, no validation:
// callers in ops.hpp and tape.hpp check shapes first.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "maskenc/tensor.hpp"

namespace maskenc::kernels {

struct ConvGeometry {
  Shape input;   // N, Cin, H, W
  Shape weight;  // Cout, Cin, Kh, Kw
  std::int64_t padding = 0;
  std::int64_t stride = 1;

  std::int64_t out_h() const { return (input.h + 2 * padding - weight.h) / stride + 1; }
  std::int64_t out_w() const { return (input.w + 2 * padding - weight.w) / stride + 1; }
  Shape output() const { return {input.n, weight.n, out_h(), out_w()}; }
  std::int64_t patch() const { return weight.c * weight.h * weight.w; }
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Unfold sample `n` into a (Cin*Kh*Kw) x (Ho*Wo) column matrix.
template <typename Scalar, typename Acc>
void im2col(const ConvGeometry& g, const Scalar* x, RowMatrix<Acc>& cols) {
  const std::int64_t ho = g.out_h();
  const std::int64_t wo = g.out_w();
  cols.resize(g.patch(), ho * wo);
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.weight.c; ++c) {
    const Scalar* plane = x + c * g.input.plane();
    for (std::int64_t kh = 0; kh < g.weight.h; ++kh) {
      for (std::int64_t kw = 0; kw < g.weight.w; ++kw, ++row) {
        Acc* dst = cols.row(row).data();
        for (std::int64_t oh = 0; oh < ho; ++oh) {
          const std::int64_t ih = oh * g.stride - g.padding + kh;
          for (std::int64_t ow = 0; ow < wo; ++ow) {
            const std::int64_t iw = ow * g.stride - g.padding + kw;
            const bool inside = ih >= 0 && ih < g.input.h && iw >= 0 && iw < g.input.w;
            dst[oh * wo + ow] = inside ? static_cast<Acc>(plane[ih * g.input.w + iw]) : Acc(0);
          }
        }
      }
    }
  }
}

/// Scatter-add a column matrix back onto sample `n` of dx.
template <typename Scalar, typename Acc>
void col2im(const ConvGeometry& g, const RowMatrix<Acc>& cols, Scalar* dx) {
  const std::int64_t ho = g.out_h();
  const std::int64_t wo = g.out_w();
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.weight.c; ++c) {
    Scalar* plane = dx + c * g.input.plane();
    for (std::int64_t kh = 0; kh < g.weight.h; ++kh) {
      for (std::int64_t kw = 0; kw < g.weight.w; ++kw, ++row) {
        const Acc* src = cols.row(row).data();
        for (std::int64_t oh = 0; oh < ho; ++oh) {
          const std::int64_t ih = oh * g.stride - g.padding + kh;
          if (ih < 0 || ih >= g.input.h) continue;
          for (std::int64_t ow = 0; ow < wo; ++ow) {
            const std::int64_t iw = ow * g.stride - g.padding + kw;
            if (iw < 0 || iw >= g.input.w) continue;
            plane[ih * g.input.w + iw] += static_cast<Scalar>(src[oh * wo + ow]);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void conv2d_forward(const ConvGeometry& g, const Scalar* x, const Scalar* w, const Scalar* b,
                    Scalar* y) {
  using Acc = accum_t<Scalar>;
  const std::int64_t out_plane = g.out_h() * g.out_w();
  const std::int64_t cout = g.weight.n;
  const RowMatrix<Acc> wm =
      Eigen::Map<const RowMatrix<Scalar>>(w, cout, g.patch()).template cast<Acc>();
  const Eigen::Matrix<Acc, Eigen::Dynamic, 1> bias =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(b, cout).template cast<Acc>();
  RowMatrix<Acc> cols;
  RowMatrix<Acc> out(cout, out_plane);
  for (std::int64_t n = 0; n < g.input.n; ++n) {
    im2col(g, x + n * g.input.c * g.input.plane(), cols);
    out.noalias() = wm * cols;
    out.colwise() += bias;
    Eigen::Map<RowMatrix<Scalar>>(y + n * cout * out_plane, cout, out_plane) =
        out.template cast<Scalar>();
  }
}

/// Accumulates into whichever of dx, dw, db are non-null.
template <typename Scalar>
void conv2d_backward(const ConvGeometry& g, const Scalar* x, const Scalar* w, const Scalar* dy,
                     Scalar* dx, Scalar* dw, Scalar* db) {
  using Acc = accum_t<Scalar>;
  const std::int64_t out_plane = g.out_h() * g.out_w();
  const std::int64_t cout = g.weight.n;
  const RowMatrix<Acc> wm =
      Eigen::Map<const RowMatrix<Scalar>>(w, cout, g.patch()).template cast<Acc>();
  RowMatrix<Acc> dw_acc = RowMatrix<Acc>::Zero(cout, g.patch());
  Eigen::Matrix<Acc, Eigen::Dynamic, 1> db_acc = Eigen::Matrix<Acc, Eigen::Dynamic, 1>::Zero(cout);
  RowMatrix<Acc> cols;
  RowMatrix<Acc> dcols;
  for (std::int64_t n = 0; n < g.input.n; ++n) {
    const RowMatrix<Acc> dout =
        Eigen::Map<const RowMatrix<Scalar>>(dy + n * cout * out_plane, cout, out_plane)
            .template cast<Acc>();
    if (dw != nullptr) {
      im2col(g, x + n * g.input.c * g.input.plane(), cols);
      dw_acc.noalias() += dout * cols.transpose();
    }
    if (db != nullptr) db_acc += dout.rowwise().sum();
    if (dx != nullptr) {
      dcols.noalias() = wm.transpose() * dout;
      col2im(g, dcols, dx + n * g.input.c * g.input.plane());
    }
  }
  if (dw != nullptr) {
    Eigen::Map<RowMatrix<Scalar>> dwm(dw, cout, g.patch());
    dwm += dw_acc.template cast<Scalar>();
  }
  if (db != nullptr) {
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> dbm(db, cout);
    dbm += db_acc.template cast<Scalar>();
  }
}

/// Numerically stable logistic, clamped into the open interval (0, 1).
template <typename Scalar>
Scalar sigmoid(Scalar x) {
  Scalar s;
  if (x >= Scalar(0)) {
    s = Scalar(1) / (Scalar(1) + std::exp(-x));
  } else {
    const Scalar e = std::exp(x);
    s = e / (Scalar(1) + e);
  }
  constexpr Scalar lo = std::numeric_limits<Scalar>::min();
  const Scalar hi = std::nextafter(Scalar(1), Scalar(0));
  return std::clamp(s, lo, hi);
}

/// 2x2 non-overlapping max. `argmax` receives the flat input index of each
/// winner; ties go to the first element in row-major window order.
template <typename Scalar>
void maxpool2x2_forward(const Shape& in, const Scalar* x, Scalar* y,
                        std::vector<std::int64_t>& argmax) {
  const std::int64_t ho = in.h / 2;
  const std::int64_t wo = in.w / 2;
  argmax.resize(static_cast<std::size_t>(in.n * in.c * ho * wo));
  std::int64_t o = 0;
  for (std::int64_t nc = 0; nc < in.n * in.c; ++nc) {
    const std::int64_t base = nc * in.plane();
    for (std::int64_t oh = 0; oh < ho; ++oh) {
      for (std::int64_t ow = 0; ow < wo; ++ow, ++o) {
        std::int64_t best = base + (2 * oh) * in.w + 2 * ow;
        for (std::int64_t dh = 0; dh < 2; ++dh) {
          for (std::int64_t dw = 0; dw < 2; ++dw) {
            const std::int64_t idx = base + (2 * oh + dh) * in.w + 2 * ow + dw;
            if (x[idx] > x[best]) best = idx;
          }
        }
        y[o] = x[best];
        argmax[static_cast<std::size_t>(o)] = best;
      }
    }
  }
}

template <typename Scalar>
void maxpool2x2_backward(const std::vector<std::int64_t>& argmax, const Scalar* dy, Scalar* dx) {
  for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += dy[o];
}

template <typename Scalar>
void upsample2x_forward(const Shape& in, const Scalar* x, Scalar* y) {
  const std::int64_t wo = in.w * 2;
  for (std::int64_t nc = 0; nc < in.n * in.c; ++nc) {
    const Scalar* src = x + nc * in.plane();
    Scalar* dst = y + nc * in.plane() * 4;
    for (std::int64_t oh = 0; oh < in.h * 2; ++oh) {
      for (std::int64_t ow = 0; ow < wo; ++ow) {
        dst[oh * wo + ow] = src[(oh / 2) * in.w + ow / 2];
      }
    }
  }
}

template <typename Scalar>
void upsample2x_backward(const Shape& in, const Scalar* dy, Scalar* dx) {
  const std::int64_t wo = in.w * 2;
  for (std::int64_t nc = 0; nc < in.n * in.c; ++nc) {
    const Scalar* src = dy + nc * in.plane() * 4;
    Scalar* dst = dx + nc * in.plane();
    for (std::int64_t oh = 0; oh < in.h * 2; ++oh) {
      for (std::int64_t ow = 0; ow < wo; ++ow) {
        dst[(oh / 2) * in.w + ow / 2] += src[oh * wo + ow];
      }
    }
  }
}

}  // namespace maskenc::kernels
