#include "glyphnet/conv.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <string>

namespace glyphnet {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMatrix = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMapMatrix = Eigen::Map<const RowMatrix<T>>;

// Index of the input pixel feeding output position `o` at kernel tap `k`, or
// -1 when the tap falls into padding.
inline std::ptrdiff_t source_index(std::size_t o, std::size_t k, std::size_t stride, std::size_t pad,
                                   std::size_t extent) {
  const auto i = static_cast<std::ptrdiff_t>(o * stride + k) - static_cast<std::ptrdiff_t>(pad);
  return (i < 0 || i >= static_cast<std::ptrdiff_t>(extent)) ? -1 : i;
}

}  // namespace

Padding Padding::same(std::size_t in_h, std::size_t in_w, std::size_t kernel_h, std::size_t kernel_w,
                      std::size_t stride) {
  auto total = [stride](std::size_t in, std::size_t k) -> std::size_t {
    const std::size_t out = same_output_extent(in, stride);
    const std::size_t needed = (out - 1) * stride + k;
    return needed > in ? needed - in : 0;
  };
  const std::size_t th = total(in_h, kernel_h);
  const std::size_t tw = total(in_w, kernel_w);
  return {th / 2, th - th / 2, tw / 2, tw - tw / 2};
}

std::size_t conv_output_extent(std::size_t in, std::size_t pad_before, std::size_t pad_after,
                               std::size_t kernel, std::size_t stride) {
  const std::size_t padded = in + pad_before + pad_after;
  if (stride == 0 || padded < kernel) return 0;
  return (padded - kernel) / stride + 1;
}

template <typename T>
Shape conv2d_output_shape(const Shape& input, const BasicConvParams<T>& params) {
  if (params.stride == 0) throw ConfigError("conv stride must be >= 1");
  if (input.c != params.in_channels()) {
    throw ShapeError("conv input has " + std::to_string(input.c) + " channels, kernel expects " +
                     std::to_string(params.in_channels()));
  }
  if (params.bias.size() != params.out_channels()) {
    throw ShapeError("conv bias length " + std::to_string(params.bias.size()) + " != out channels " +
                     std::to_string(params.out_channels()));
  }
  const auto& p = params.padding;
  if (input.h + p.top + p.bottom < params.kernel_h() || input.w + p.left + p.right < params.kernel_w()) {
    throw ShapeError("padded input " + input.str() + " smaller than kernel");
  }
  return {input.n, params.out_channels(),
          conv_output_extent(input.h, p.top, p.bottom, params.kernel_h(), params.stride),
          conv_output_extent(input.w, p.left, p.right, params.kernel_w(), params.stride)};
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicConvParams<T>& params) {
  const Shape out_shape = conv2d_output_shape(input.shape(), params);
  require_finite(input, "conv2d_forward input");
  const Shape& in = input.shape();
  const std::size_t kh = params.kernel_h(), kw = params.kernel_w(), s = params.stride;
  BasicTensor<T> out(out_shape);
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t oc = 0; oc < out_shape.c; ++oc) {
      for (std::size_t oy = 0; oy < out_shape.h; ++oy) {
        for (std::size_t ox = 0; ox < out_shape.w; ++ox) {
          double acc = params.bias[oc];
          for (std::size_t ic = 0; ic < in.c; ++ic) {
            for (std::size_t ky = 0; ky < kh; ++ky) {
              const auto iy = source_index(oy, ky, s, params.padding.top, in.h);
              if (iy < 0) continue;
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const auto ix = source_index(ox, kx, s, params.padding.left, in.w);
                if (ix < 0) continue;
                acc += static_cast<double>(params.weights.at(oc, ic, ky, kx)) *
                       static_cast<double>(input.at(n, ic, static_cast<std::size_t>(iy),
                                                    static_cast<std::size_t>(ix)));
              }
            }
          }
          out.at(n, oc, oy, ox) = static_cast<T>(acc);
        }
      }
    }
  }
  require_finite(out, "conv2d_forward output");
  return out;
}

template <typename T>
ConvGradients<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvParams<T>& params,
                                 const BasicTensor<T>& upstream) {
  const Shape out_shape = conv2d_output_shape(input.shape(), params);
  if (upstream.shape() != out_shape) {
    throw ShapeError("conv upstream gradient " + upstream.shape().str() + " != output " + out_shape.str());
  }
  require_finite(upstream, "conv2d_backward upstream");
  const Shape& in = input.shape();
  const std::size_t kh = params.kernel_h(), kw = params.kernel_w(), s = params.stride;

  std::vector<double> dw(params.weights.size(), 0.0);
  std::vector<double> db(params.out_channels(), 0.0);
  std::vector<double> dx(input.size(), 0.0);
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t oc = 0; oc < out_shape.c; ++oc) {
      for (std::size_t oy = 0; oy < out_shape.h; ++oy) {
        for (std::size_t ox = 0; ox < out_shape.w; ++ox) {
          const double g = upstream.at(n, oc, oy, ox);
          db[oc] += g;
          for (std::size_t ic = 0; ic < in.c; ++ic) {
            for (std::size_t ky = 0; ky < kh; ++ky) {
              const auto iy = source_index(oy, ky, s, params.padding.top, in.h);
              if (iy < 0) continue;
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const auto ix = source_index(ox, kx, s, params.padding.left, in.w);
                if (ix < 0) continue;
                const std::size_t xi =
                    input.offset(n, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                const std::size_t wi = params.weights.offset(oc, ic, ky, kx);
                dw[wi] += g * static_cast<double>(input[xi]);
                dx[xi] += g * static_cast<double>(params.weights[wi]);
              }
            }
          }
        }
      }
    }
  }
  ConvGradients<T> grads{
      BasicTensor<T>(params.weights.shape(), std::vector<T>(dw.begin(), dw.end())),
      std::vector<T>(db.begin(), db.end()),
      BasicTensor<T>(in, std::vector<T>(dx.begin(), dx.end())),
  };
  require_finite(grads.weights, "conv2d_backward weight gradient");
  require_finite(grads.input, "conv2d_backward input gradient");
  return grads;
}

template <typename T>
void im2col(std::span<const T> sample, const Shape& input, const BasicConvParams<T>& params,
            std::size_t out_h, std::size_t out_w, std::span<T> columns) {
  const std::size_t kh = params.kernel_h(), kw = params.kernel_w(), s = params.stride;
  const std::size_t positions = out_h * out_w;
  for (std::size_t ic = 0; ic < input.c; ++ic) {
    const T* plane = sample.data() + ic * input.h * input.w;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        T* row = columns.data() + ((ic * kh + ky) * kw + kx) * positions;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = source_index(oy, ky, s, params.padding.top, input.h);
          T* dst = row + oy * out_w;
          if (iy < 0) {
            std::fill(dst, dst + out_w, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * input.w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto ix = source_index(ox, kx, s, params.padding.left, input.w);
            dst[ox] = ix < 0 ? T{0} : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(std::span<const T> columns, const Shape& input, const BasicConvParams<T>& params,
            std::size_t out_h, std::size_t out_w, std::span<T> sample) {
  const std::size_t kh = params.kernel_h(), kw = params.kernel_w(), s = params.stride;
  const std::size_t positions = out_h * out_w;
  for (std::size_t ic = 0; ic < input.c; ++ic) {
    T* plane = sample.data() + ic * input.h * input.w;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const T* row = columns.data() + ((ic * kh + ky) * kw + kx) * positions;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = source_index(oy, ky, s, params.padding.top, input.h);
          if (iy < 0) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * input.w;
          const T* src = row + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto ix = source_index(ox, kx, s, params.padding.left, input.w);
            if (ix >= 0) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
BasicTensor<T> conv2d_forward_im2col(const BasicTensor<T>& input, const BasicConvParams<T>& params) {
  const Shape out_shape = conv2d_output_shape(input.shape(), params);
  require_finite(input, "conv2d_forward_im2col input");
  const Shape& in = input.shape();
  const std::size_t taps = in.c * params.kernel_h() * params.kernel_w();
  const std::size_t positions = out_shape.h * out_shape.w;
  const std::size_t oc = out_shape.c;

  BasicTensor<T> out(out_shape);
  std::vector<T> columns(taps * positions);
  ConstMapMatrix<T> weights(params.weights.data().data(), static_cast<Eigen::Index>(oc),
                            static_cast<Eigen::Index>(taps));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(params.bias.data(),
                                                             static_cast<Eigen::Index>(oc));
  for (std::size_t n = 0; n < in.n; ++n) {
    im2col<T>(input.sample(n), in, params, out_shape.h, out_shape.w, columns);
    ConstMapMatrix<T> cols(columns.data(), static_cast<Eigen::Index>(taps),
                           static_cast<Eigen::Index>(positions));
    MapMatrix<T> y(out.sample(n).data(), static_cast<Eigen::Index>(oc), static_cast<Eigen::Index>(positions));
    y.noalias() = weights * cols;
    y.colwise() += bias;
  }
  require_finite(out, "conv2d_forward_im2col output");
  return out;
}

template <typename T>
ConvGradients<T> conv2d_backward_im2col(const BasicTensor<T>& input, const BasicConvParams<T>& params,
                                        const BasicTensor<T>& upstream) {
  const Shape out_shape = conv2d_output_shape(input.shape(), params);
  if (upstream.shape() != out_shape) {
    throw ShapeError("conv upstream gradient " + upstream.shape().str() + " != output " + out_shape.str());
  }
  require_finite(upstream, "conv2d_backward_im2col upstream");
  const Shape& in = input.shape();
  const auto taps = static_cast<Eigen::Index>(in.c * params.kernel_h() * params.kernel_w());
  const auto positions = static_cast<Eigen::Index>(out_shape.h * out_shape.w);
  const auto oc = static_cast<Eigen::Index>(out_shape.c);

  ConvGradients<T> grads{BasicTensor<T>(params.weights.shape()), std::vector<T>(out_shape.c, T{0}),
                         BasicTensor<T>(in)};
  std::vector<T> columns(static_cast<std::size_t>(taps * positions));
  std::vector<T> dcolumns(columns.size());
  ConstMapMatrix<T> weights(params.weights.data().data(), oc, taps);
  MapMatrix<T> dw(grads.weights.data().data(), oc, taps);
  Eigen::Matrix<double, Eigen::Dynamic, 1> db = Eigen::Matrix<double, Eigen::Dynamic, 1>::Zero(oc);
  for (std::size_t n = 0; n < in.n; ++n) {
    ConstMapMatrix<T> dy(upstream.sample(n).data(), oc, positions);
    im2col<T>(input.sample(n), in, params, out_shape.h, out_shape.w, columns);
    ConstMapMatrix<T> cols(columns.data(), taps, positions);
    dw.noalias() += dy * cols.transpose();
    db += dy.template cast<double>().rowwise().sum();
    MapMatrix<T> dcols(dcolumns.data(), taps, positions);
    dcols.noalias() = weights.transpose() * dy;
    col2im<T>(dcolumns, in, params, out_shape.h, out_shape.w, grads.input.sample(n));
  }
  for (Eigen::Index i = 0; i < oc; ++i) grads.bias[static_cast<std::size_t>(i)] = static_cast<T>(db[i]);
  require_finite(grads.weights, "conv2d_backward_im2col weight gradient");
  require_finite(grads.input, "conv2d_backward_im2col input gradient");
  return grads;
}

#define GLYPHNET_INSTANTIATE_CONV(T)                                                                   \
  template Shape conv2d_output_shape(const Shape&, const BasicConvParams<T>&);                         \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicConvParams<T>&);            \
  template ConvGradients<T> conv2d_backward(const BasicTensor<T>&, const BasicConvParams<T>&,          \
                                            const BasicTensor<T>&);                                    \
  template void im2col(std::span<const T>, const Shape&, const BasicConvParams<T>&, std::size_t,       \
                       std::size_t, std::span<T>);                                                     \
  template void col2im(std::span<const T>, const Shape&, const BasicConvParams<T>&, std::size_t,       \
                       std::size_t, std::span<T>);                                                     \
  template BasicTensor<T> conv2d_forward_im2col(const BasicTensor<T>&, const BasicConvParams<T>&);     \
  template ConvGradients<T> conv2d_backward_im2col(const BasicTensor<T>&, const BasicConvParams<T>&,   \
                                                   const BasicTensor<T>&);

GLYPHNET_INSTANTIATE_CONV(float)
GLYPHNET_INSTANTIATE_CONV(double)

#undef GLYPHNET_INSTANTIATE_CONV

}  // namespace glyphnet
