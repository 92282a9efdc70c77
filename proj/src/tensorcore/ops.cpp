#include "cosep/tensorcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cosep/tensorcore/kernels.hpp"

namespace cosep::ops {
namespace {

void require_same(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
  }
}

void require_rank(const char* op, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + shape_str(s));
  }
}

template <typename Fwd, typename Bwd>
Var unary(const char* name, Var x, Fwd fwd, Bwd dydx) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  const std::size_t xid = x.id;
  return x.graph->record(name, std::move(out), {x},
                         [xid, dydx](Graph& g, std::size_t self) {
                           if (!g.node(xid).requires_grad) return;
                           const Tensor& gy = g.node(self).grad;
                           const Tensor& xs = g.node(xid).value;
                           const Tensor& ys = g.node(self).value;
                           Tensor& gx = g.grad_buffer(xid);
                           for (std::size_t i = 0; i < gx.size(); ++i) {
                             gx[i] += gy[i] * dydx(xs[i], ys[i]);
                           }
                         });
}

void accumulate(Graph& g, std::size_t id, const Tensor& src, double s = 1.0) {
  if (!g.node(id).requires_grad) return;
  Tensor& dst = g.grad_buffer(id);
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

// Geometry shared by conv2d and conv_transpose2d. The "image" has
// `channels` planes of h x w; the "grid" is the oh x ow lattice of kernel
// placements. Column matrix layout: (channels*k*k) x (n*oh*ow).
struct ConvGeom {
  std::size_t n, channels, h, w, k, stride, pad, oh, ow;
};

void im2col(const double* img, const ConvGeom& g, double* cols) {
  const std::size_t grid = g.oh * g.ow;
  const std::size_t ncols = g.n * grid;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        double* row = cols + ((c * g.k + ki) * g.k + kj) * ncols;
        for (std::size_t n = 0; n < g.n; ++n) {
          const double* plane = img + (n * g.channels + c) * g.h * g.w;
          double* dst = row + n * grid;
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.h)) {
              std::fill(dst + oy * g.ow, dst + (oy + 1) * g.ow, 0.0);
              continue;
            }
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
              dst[oy * g.ow + ox] = (ix < 0 || ix >= static_cast<long>(g.w))
                                        ? 0.0
                                        : plane[iy * g.w + ix];
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col; accumulates into img.
void col2im(const double* cols, const ConvGeom& g, double* img) {
  const std::size_t grid = g.oh * g.ow;
  const std::size_t ncols = g.n * grid;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const double* row = cols + ((c * g.k + ki) * g.k + kj) * ncols;
        for (std::size_t n = 0; n < g.n; ++n) {
          double* plane = img + (n * g.channels + c) * g.h * g.w;
          const double* src = row + n * grid;
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
              plane[iy * g.w + ix] += src[oy * g.ow + ox];
            }
          }
        }
      }
    }
  }
}

// NCHW (n, c, q) <-> channel-major (c, n*q) rearrangements.
std::vector<double> to_channel_major(const double* x, std::size_t n, std::size_t c,
                                     std::size_t q) {
  std::vector<double> out(n * c * q);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::copy_n(x + (b * c + ch) * q, q, out.data() + ch * n * q + b * q);
    }
  }
  return out;
}

void add_from_channel_major(const double* m, std::size_t n, std::size_t c,
                            std::size_t q, double* x) {
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* src = m + ch * n * q + b * q;
      double* dst = x + (b * c + ch) * q;
      for (std::size_t i = 0; i < q; ++i) dst[i] += src[i];
    }
  }
}

void gemm(kernels::Trans ta, kernels::Trans tb, std::size_t m, std::size_t n,
          std::size_t k, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double* c, std::size_t ldc) {
  kernels::GemmArgs args;
  args.trans_a = ta;
  args.trans_b = tb;
  args.m = m;
  args.n = n;
  args.k = k;
  args.a = a;
  args.lda = lda;
  args.b = b;
  args.ldb = ldb;
  args.c = c;
  args.ldc = ldc;
  kernels::gemm(args);
}

constexpr auto kNo = kernels::Trans::kNo;
constexpr auto kYes = kernels::Trans::kYes;

}  // namespace

Var add(Var a, Var b) {
  require_same("add", a.shape(), b.shape());
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record("add", std::move(out), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    accumulate(g, ia, gy);
    accumulate(g, ib, gy);
  });
}

Var sub(Var a, Var b) {
  require_same("sub", a.shape(), b.shape());
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record("sub", std::move(out), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    accumulate(g, ia, gy);
    accumulate(g, ib, gy, -1.0);
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a.shape(), b.shape());
  Tensor out(a.shape());
  kernels::active().mul(a.value().ptr(), b.value().ptr(), out.ptr(), out.size());
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record("mul", std::move(out), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    if (g.node(ia).requires_grad) {
      const Tensor& bv = g.node(ib).value;
      Tensor& ga = g.grad_buffer(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * bv[i];
    }
    if (g.node(ib).requires_grad) {
      const Tensor& av = g.node(ia).value;
      Tensor& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * a.value()[i];
  const std::size_t ia = a.id;
  return a.graph->record("scale", std::move(out), {a}, [ia, s](Graph& g, std::size_t self) {
    accumulate(g, ia, g.node(self).grad, s);
  });
}

Var relu(Var x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var x, double slope) {
  return unary(
      "leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var sigmoid(Var x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var log1p(Var x) {
  for (double v : x.value().data()) {
    if (!(v > -1.0)) throw std::domain_error("log1p: input must be > -1");
  }
  return unary(
      "log1p", x, [](double v) { return std::log1p(v); },
      [](double v, double) { return 1.0 / (1.0 + v); });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const std::size_t ix = x.id;
  return x.graph->record("sum", Tensor::scalar(s), {x}, [ix](Graph& g, std::size_t self) {
    if (!g.node(ix).requires_grad) return;
    const double gy = g.node(self).grad[0];
    Tensor& gx = g.grad_buffer(ix);
    for (double& v : gx.data()) v += gy;
  });
}

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride,
                          std::size_t padding) {
  if (in + 2 * padding < kernel || stride == 0) {
    throw ShapeError("conv: kernel " + std::to_string(kernel) +
                     " does not fit input " + std::to_string(in) + " with padding " +
                     std::to_string(padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

std::size_t conv_transpose_out_size(std::size_t in, std::size_t kernel,
                                    std::size_t stride, std::size_t padding) {
  const std::size_t full = (in - 1) * stride + kernel;
  if (full <= 2 * padding || stride == 0) {
    throw ShapeError("conv_transpose: padding too large for input " + std::to_string(in));
  }
  return full - 2 * padding;
}

Var conv2d(Var x, Var weight, Var bias, Conv2dOptions opt) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  require_rank("conv2d input", xs, 4);
  require_rank("conv2d weight", ws, 4);
  if (ws[1] != xs[1] || ws[2] != ws[3]) {
    throw ShapeError("conv2d: weight " + shape_str(ws) + " incompatible with input " +
                     shape_str(xs));
  }
  if (bias.shape() != Shape{ws[0]}) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " vs weight " +
                     shape_str(ws));
  }
  const std::size_t k = ws[2];
  ConvGeom geom{xs[0], xs[1], xs[2], xs[3], k, opt.stride, opt.padding,
                conv_out_size(xs[2], k, opt.stride, opt.padding),
                conv_out_size(xs[3], k, opt.stride, opt.padding)};
  const std::size_t out_c = ws[0];
  const std::size_t kdim = xs[1] * k * k;
  const std::size_t grid = geom.oh * geom.ow;
  const std::size_t ncols = geom.n * grid;

  std::vector<double> cols(kdim * ncols);
  im2col(x.value().ptr(), geom, cols.data());
  std::vector<double> out_mat(out_c * ncols, 0.0);
  gemm(kNo, kNo, out_c, ncols, kdim, weight.value().ptr(), kdim, cols.data(), ncols,
       out_mat.data(), ncols);

  Tensor out({geom.n, out_c, geom.oh, geom.ow});
  const double* b = bias.value().ptr();
  for (std::size_t n = 0; n < geom.n; ++n) {
    for (std::size_t o = 0; o < out_c; ++o) {
      const double* src = out_mat.data() + o * ncols + n * grid;
      double* dst = out.ptr() + (n * out_c + o) * grid;
      for (std::size_t q = 0; q < grid; ++q) dst[q] = src[q] + b[o];
    }
  }

  const std::size_t ix = x.id, iw = weight.id, ib = bias.id;
  return x.graph->record(
      "conv2d", std::move(out), {x, weight, bias},
      [ix, iw, ib, geom, out_c, kdim, grid, ncols](Graph& g, std::size_t self) {
        const Tensor& gy = g.node(self).grad;
        std::vector<double> gmat = to_channel_major(gy.ptr(), geom.n, out_c, grid);
        if (g.node(ib).requires_grad) {
          Tensor& gb = g.grad_buffer(ib);
          for (std::size_t o = 0; o < out_c; ++o) {
            double s = 0.0;
            for (std::size_t q = 0; q < ncols; ++q) s += gmat[o * ncols + q];
            gb[o] += s;
          }
        }
        if (g.node(iw).requires_grad) {
          std::vector<double> cols(kdim * ncols);
          im2col(g.node(ix).value.ptr(), geom, cols.data());
          Tensor& gw = g.grad_buffer(iw);
          gemm(kNo, kYes, out_c, kdim, ncols, gmat.data(), ncols, cols.data(), ncols,
               gw.ptr(), kdim);
        }
        if (g.node(ix).requires_grad) {
          std::vector<double> gcols(kdim * ncols, 0.0);
          gemm(kYes, kNo, kdim, ncols, out_c, g.node(iw).value.ptr(), kdim, gmat.data(),
               ncols, gcols.data(), ncols);
          col2im(gcols.data(), geom, g.grad_buffer(ix).ptr());
        }
      });
}

Var conv_transpose2d(Var x, Var weight, Var bias, Conv2dOptions opt) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  require_rank("conv_transpose2d input", xs, 4);
  require_rank("conv_transpose2d weight", ws, 4);
  if (ws[0] != xs[1] || ws[2] != ws[3]) {
    throw ShapeError("conv_transpose2d: weight " + shape_str(ws) +
                     " incompatible with input " + shape_str(xs));
  }
  if (bias.shape() != Shape{ws[1]}) {
    throw ShapeError("conv_transpose2d: bias " + shape_str(bias.shape()) +
                     " vs weight " + shape_str(ws));
  }
  const std::size_t n = xs[0], in_c = xs[1], k = ws[2], out_c = ws[1];
  const std::size_t oh = conv_transpose_out_size(xs[2], k, opt.stride, opt.padding);
  const std::size_t ow = conv_transpose_out_size(xs[3], k, opt.stride, opt.padding);
  // The output plays the role of the conv "image"; the input is the grid.
  ConvGeom geom{n, out_c, oh, ow, k, opt.stride, opt.padding, xs[2], xs[3]};
  if (conv_out_size(oh, k, opt.stride, opt.padding) != xs[2] ||
      conv_out_size(ow, k, opt.stride, opt.padding) != xs[3]) {
    throw ShapeError("conv_transpose2d: geometry not invertible for input " + shape_str(xs));
  }
  const std::size_t grid = xs[2] * xs[3];
  const std::size_t ncols = n * grid;
  const std::size_t kdim = out_c * k * k;

  std::vector<double> xmat = to_channel_major(x.value().ptr(), n, in_c, grid);
  std::vector<double> cols(kdim * ncols, 0.0);
  gemm(kYes, kNo, kdim, ncols, in_c, weight.value().ptr(), kdim, xmat.data(), ncols,
       cols.data(), ncols);
  Tensor out({n, out_c, oh, ow}, 0.0);
  col2im(cols.data(), geom, out.ptr());
  const double* b = bias.value().ptr();
  for (std::size_t bn = 0; bn < n; ++bn) {
    for (std::size_t o = 0; o < out_c; ++o) {
      double* dst = out.ptr() + (bn * out_c + o) * oh * ow;
      for (std::size_t q = 0; q < oh * ow; ++q) dst[q] += b[o];
    }
  }

  const std::size_t ix = x.id, iw = weight.id, ib = bias.id;
  return x.graph->record(
      "conv_transpose2d", std::move(out), {x, weight, bias},
      [ix, iw, ib, geom, in_c, out_c, kdim, grid, ncols](Graph& g, std::size_t self) {
        const Tensor& gy = g.node(self).grad;
        if (g.node(ib).requires_grad) {
          Tensor& gb = g.grad_buffer(ib);
          const std::size_t plane = geom.h * geom.w;
          for (std::size_t bn = 0; bn < geom.n; ++bn) {
            for (std::size_t o = 0; o < out_c; ++o) {
              const double* src = gy.ptr() + (bn * out_c + o) * plane;
              double s = 0.0;
              for (std::size_t q = 0; q < plane; ++q) s += src[q];
              gb[o] += s;
            }
          }
        }
        const bool need_x = g.node(ix).requires_grad;
        const bool need_w = g.node(iw).requires_grad;
        if (!need_x && !need_w) return;
        std::vector<double> gcols(kdim * ncols);
        im2col(gy.ptr(), geom, gcols.data());
        if (need_w) {
          std::vector<double> xmat =
              to_channel_major(g.node(ix).value.ptr(), geom.n, in_c, grid);
          gemm(kNo, kYes, in_c, kdim, ncols, xmat.data(), ncols, gcols.data(), ncols,
               g.grad_buffer(iw).ptr(), kdim);
        }
        if (need_x) {
          std::vector<double> gx(in_c * ncols, 0.0);
          gemm(kNo, kNo, in_c, ncols, kdim, g.node(iw).value.ptr(), kdim, gcols.data(),
               ncols, gx.data(), ncols);
          add_from_channel_major(gx.data(), geom.n, in_c, grid, g.grad_buffer(ix).ptr());
        }
      });
}

Var batch_norm(Var x, Var gamma, Var beta, Tensor& running_mean, Tensor& running_var,
               BatchNormOptions opt) {
  const Shape& xs = x.shape();
  if (xs.size() < 2) throw ShapeError("batch_norm: rank >= 2 required, got " + shape_str(xs));
  const std::size_t n = xs[0], c = xs[1];
  const std::size_t inner = x.value().size() / (n * c);
  const Shape cshape{c};
  require_same("batch_norm gamma", gamma.shape(), cshape);
  require_same("batch_norm beta", beta.shape(), cshape);
  require_same("batch_norm running_mean", running_mean.shape(), cshape);
  require_same("batch_norm running_var", running_var.shape(), cshape);

  const bool train = x.graph->training();
  const std::size_t count = n * inner;
  if (train && count < 2) {
    throw ShapeError("batch_norm: training needs more than one value per channel, got " +
                     shape_str(xs));
  }
  const Tensor& xv = x.value();
  std::vector<double> mean(c), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (train) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = xv.ptr() + (b * c + ch) * inner;
        for (std::size_t q = 0; q < inner; ++q) s += p[q];
      }
      const double mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = xv.ptr() + (b * c + ch) * inner;
        for (std::size_t q = 0; q < inner; ++q) ss += (p[q] - mu) * (p[q] - mu);
      }
      const double var = ss / static_cast<double>(count);
      mean[ch] = mu;
      inv_std[ch] = 1.0 / std::sqrt(var + opt.eps);
      running_mean[ch] = (1.0 - opt.momentum) * running_mean[ch] + opt.momentum * mu;
      const double unbiased = ss / static_cast<double>(count - 1);
      running_var[ch] = (1.0 - opt.momentum) * running_var[ch] + opt.momentum * unbiased;
    } else {
      mean[ch] = running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(running_var[ch] + opt.eps);
    }
  }

  Tensor xhat(xs);
  Tensor out(xs);
  const double* gm = gamma.value().ptr();
  const double* bt = beta.value().ptr();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * inner;
      for (std::size_t q = 0; q < inner; ++q) {
        const double h = (xv[off + q] - mean[ch]) * inv_std[ch];
        xhat[off + q] = h;
        out[off + q] = gm[ch] * h + bt[ch];
      }
    }
  }

  const std::size_t ix = x.id, ig = gamma.id, ibt = beta.id;
  return x.graph->record(
      "batch_norm", std::move(out), {x, gamma, beta},
      [ix, ig, ibt, n, c, inner, count, train, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Graph& g, std::size_t self) {
        const Tensor& gy = g.node(self).grad;
        const double* gm = g.node(ig).value.ptr();
        std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * inner;
            for (std::size_t q = 0; q < inner; ++q) {
              sum_dy[ch] += gy[off + q];
              sum_dy_xhat[ch] += gy[off + q] * xhat[off + q];
            }
          }
        }
        if (g.node(ig).requires_grad) {
          Tensor& gg = g.grad_buffer(ig);
          for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += sum_dy_xhat[ch];
        }
        if (g.node(ibt).requires_grad) {
          Tensor& gb = g.grad_buffer(ibt);
          for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += sum_dy[ch];
        }
        if (!g.node(ix).requires_grad) return;
        Tensor& gx = g.grad_buffer(ix);
        const double m = static_cast<double>(count);
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * inner;
            const double k = gm[ch] * inv_std[ch];
            for (std::size_t q = 0; q < inner; ++q) {
              if (train) {
                gx[off + q] += k * (gy[off + q] - sum_dy[ch] / m -
                                    xhat[off + q] * sum_dy_xhat[ch] / m);
              } else {
                gx[off + q] += k * gy[off + q];
              }
            }
          }
        }
      });
}

Var linear(Var x, Var weight, Var bias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  require_rank("linear input", xs, 2);
  require_rank("linear weight", ws, 2);
  if (ws[1] != xs[1]) {
    throw ShapeError("linear: weight " + shape_str(ws) + " incompatible with input " +
                     shape_str(xs));
  }
  if (bias.shape() != Shape{ws[0]}) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " vs weight " +
                     shape_str(ws));
  }
  const std::size_t n = xs[0], d = xs[1], o = ws[0];
  Tensor out({n, o});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < o; ++j) out[i * o + j] = bias.value()[j];
  }
  gemm(kNo, kYes, n, o, d, x.value().ptr(), d, weight.value().ptr(), d, out.ptr(), o);
  const std::size_t ix = x.id, iw = weight.id, ib = bias.id;
  return x.graph->record("linear", std::move(out), {x, weight, bias},
                         [ix, iw, ib, n, d, o](Graph& g, std::size_t self) {
                           const Tensor& gy = g.node(self).grad;
                           if (g.node(ib).requires_grad) {
                             Tensor& gb = g.grad_buffer(ib);
                             for (std::size_t i = 0; i < n; ++i) {
                               for (std::size_t j = 0; j < o; ++j) gb[j] += gy[i * o + j];
                             }
                           }
                           if (g.node(iw).requires_grad) {
                             gemm(kYes, kNo, o, d, n, gy.ptr(), o, g.node(ix).value.ptr(),
                                  d, g.grad_buffer(iw).ptr(), d);
                           }
                           if (g.node(ix).requires_grad) {
                             gemm(kNo, kNo, n, d, o, gy.ptr(), o, g.node(iw).value.ptr(),
                                  d, g.grad_buffer(ix).ptr(), d);
                           }
                         });
}

Var concat_channels(Var a, Var b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  bool ok = as.size() >= 2 && as.size() == bs.size() && as[0] == bs[0];
  for (std::size_t i = 2; ok && i < as.size(); ++i) ok = as[i] == bs[i];
  if (!ok) {
    throw ShapeError("concat_channels: shape mismatch " + shape_str(as) + " vs " +
                     shape_str(bs));
  }
  const std::size_t n = as[0];
  const std::size_t ablock = a.value().size() / n;
  const std::size_t bblock = b.value().size() / n;
  Shape os = as;
  os[1] = as[1] + bs[1];
  Tensor out(os);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.value().ptr() + i * ablock, ablock, out.ptr() + i * (ablock + bblock));
    std::copy_n(b.value().ptr() + i * bblock, bblock,
                out.ptr() + i * (ablock + bblock) + ablock);
  }
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record("concat_channels", std::move(out), {a, b},
                         [ia, ib, n, ablock, bblock](Graph& g, std::size_t self) {
                           const Tensor& gy = g.node(self).grad;
                           if (g.node(ia).requires_grad) {
                             Tensor& ga = g.grad_buffer(ia);
                             for (std::size_t i = 0; i < n; ++i) {
                               const double* src = gy.ptr() + i * (ablock + bblock);
                               for (std::size_t q = 0; q < ablock; ++q)
                                 ga[i * ablock + q] += src[q];
                             }
                           }
                           if (g.node(ib).requires_grad) {
                             Tensor& gb = g.grad_buffer(ib);
                             for (std::size_t i = 0; i < n; ++i) {
                               const double* src = gy.ptr() + i * (ablock + bblock) + ablock;
                               for (std::size_t q = 0; q < bblock; ++q)
                                 gb[i * bblock + q] += src[q];
                             }
                           }
                         });
}

Var tile_spatial(Var v, std::size_t h, std::size_t w) {
  require_rank("tile_spatial", v.shape(), 2);
  if (h == 0 || w == 0) throw ShapeError("tile_spatial: empty spatial grid");
  const std::size_t n = v.shape()[0], d = v.shape()[1], plane = h * w;
  Tensor out({n, d, h, w});
  for (std::size_t i = 0; i < n * d; ++i) {
    std::fill_n(out.ptr() + i * plane, plane, v.value()[i]);
  }
  const std::size_t iv = v.id;
  return v.graph->record("tile_spatial", std::move(out), {v},
                         [iv, n, d, plane](Graph& g, std::size_t self) {
                           if (!g.node(iv).requires_grad) return;
                           const Tensor& gy = g.node(self).grad;
                           Tensor& gv = g.grad_buffer(iv);
                           for (std::size_t i = 0; i < n * d; ++i) {
                             double s = 0.0;
                             for (std::size_t q = 0; q < plane; ++q) s += gy[i * plane + q];
                             gv[i] += s;
                           }
                         });
}

Var gather_rows(Var table, std::span<const std::size_t> rows) {
  require_rank("gather_rows", table.shape(), 2);
  const std::size_t r = table.shape()[0], d = table.shape()[1];
  if (rows.empty()) throw ShapeError("gather_rows: empty row list");
  for (std::size_t idx : rows) {
    if (idx >= r) {
      throw std::out_of_range("gather_rows: row " + std::to_string(idx) +
                              " out of range for table " + shape_str(table.shape()));
    }
  }
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(table.value().ptr() + rows[i] * d, d, out.ptr() + i * d);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  const std::size_t it = table.id;
  return table.graph->record("gather_rows", std::move(out), {table},
                             [it, d, idx = std::move(idx)](Graph& g, std::size_t self) {
                               if (!g.node(it).requires_grad) return;
                               const Tensor& gy = g.node(self).grad;
                               Tensor& gt = g.grad_buffer(it);
                               for (std::size_t i = 0; i < idx.size(); ++i) {
                                 for (std::size_t q = 0; q < d; ++q)
                                   gt[idx[i] * d + q] += gy[i * d + q];
                               }
                             });
}

Var global_avg_pool(Var x) {
  require_rank("global_avg_pool", x.shape(), 4);
  const Shape& xs = x.shape();
  const std::size_t n = xs[0], c = xs[1], plane = xs[2] * xs[3];
  Tensor out({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    double s = 0.0;
    for (std::size_t q = 0; q < plane; ++q) s += x.value()[i * plane + q];
    out[i] = s / static_cast<double>(plane);
  }
  const std::size_t ix = x.id;
  return x.graph->record("global_avg_pool", std::move(out), {x},
                         [ix, n, c, plane](Graph& g, std::size_t self) {
                           if (!g.node(ix).requires_grad) return;
                           const Tensor& gy = g.node(self).grad;
                           Tensor& gx = g.grad_buffer(ix);
                           const double inv = 1.0 / static_cast<double>(plane);
                           for (std::size_t i = 0; i < n * c; ++i) {
                             for (std::size_t q = 0; q < plane; ++q)
                               gx[i * plane + q] += gy[i] * inv;
                           }
                         });
}

Var segment_sum(Var x, std::span<const std::size_t> group, std::size_t num_groups) {
  const Shape& xs = x.shape();
  if (group.size() != xs[0]) {
    throw ShapeError("segment_sum: " + std::to_string(group.size()) +
                     " group ids for input " + shape_str(xs));
  }
  if (num_groups == 0) throw ShapeError("segment_sum: zero groups");
  for (std::size_t gid : group) {
    if (gid >= num_groups) throw std::out_of_range("segment_sum: group id out of range");
  }
  const std::size_t block = x.value().size() / xs[0];
  Shape os = xs;
  os[0] = num_groups;
  Tensor out(os, 0.0);
  for (std::size_t i = 0; i < group.size(); ++i) {
    const double* src = x.value().ptr() + i * block;
    double* dst = out.ptr() + group[i] * block;
    for (std::size_t q = 0; q < block; ++q) dst[q] += src[q];
  }
  std::vector<std::size_t> gids(group.begin(), group.end());
  const std::size_t ix = x.id;
  return x.graph->record("segment_sum", std::move(out), {x},
                         [ix, block, gids = std::move(gids)](Graph& g, std::size_t self) {
                           if (!g.node(ix).requires_grad) return;
                           const Tensor& gy = g.node(self).grad;
                           Tensor& gx = g.grad_buffer(ix);
                           for (std::size_t i = 0; i < gids.size(); ++i) {
                             for (std::size_t q = 0; q < block; ++q)
                               gx[i * block + q] += gy[gids[i] * block + q];
                           }
                         });
}

Var weighted_l1(Var x, const Tensor& target, const Tensor& weight, double scale) {
  require_same("weighted_l1 target", x.shape(), target.shape());
  require_same("weighted_l1 weight", x.shape(), weight.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    s += weight[i] * std::abs(x.value()[i] - target[i]);
  }
  const std::size_t ix = x.id;
  return x.graph->record(
      "weighted_l1", Tensor::scalar(scale * s), {x},
      [ix, target, weight, scale](Graph& g, std::size_t self) {
        if (!g.node(ix).requires_grad) return;
        const double gy = g.node(self).grad[0] * scale;
        const Tensor& xv = g.node(ix).value;
        Tensor& gx = g.grad_buffer(ix);
        for (std::size_t i = 0; i < gx.size(); ++i) {
          const double d = xv[i] - target[i];
          const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
          gx[i] += gy * weight[i] * sgn;
        }
      });
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows: expected rank 2, got " +
                                           shape_str(logits.shape()));
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.ptr() + i * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < k; ++j) p[i * k + j] = std::exp(row[j] - mx) / z;
  }
  return p;
}

Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels,
                          std::span<const double> row_weight) {
  require_rank("softmax_cross_entropy", logits.shape(), 2);
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (labels.size() != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for logits " + shape_str(logits.shape()));
  }
  if (!row_weight.empty() && row_weight.size() != n) {
    throw ShapeError("softmax_cross_entropy: row weight count mismatch");
  }
  for (std::size_t lab : labels) {
    if (lab >= k) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(lab) +
                              " out of range for " + std::to_string(k) + " classes");
    }
  }
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  if (!row_weight.empty()) w.assign(row_weight.begin(), row_weight.end());

  const Tensor& lv = logits.value();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = lv.ptr() + i * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    loss += w[i] * (mx + std::log(z) - row[labels[i]]);
  }
  Tensor probs = softmax_rows(lv);
  std::vector<std::size_t> labs(labels.begin(), labels.end());
  const std::size_t il = logits.id;
  return logits.graph->record(
      "softmax_cross_entropy", Tensor::scalar(loss), {logits},
      [il, n, k, w = std::move(w), labs = std::move(labs),
       probs = std::move(probs)](Graph& g, std::size_t self) {
        if (!g.node(il).requires_grad) return;
        const double gy = g.node(self).grad[0];
        Tensor& gl = g.grad_buffer(il);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const double onehot = j == labs[i] ? 1.0 : 0.0;
            gl[i * k + j] += gy * w[i] * (probs[i * k + j] - onehot);
          }
        }
      });
}

}  // namespace cosep::ops
