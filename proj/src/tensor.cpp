#include "metaforge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

namespace metaforge {

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeMismatch(std::string(op) + ": " + shape_str(a.shape) + " vs " +
                        shape_str(b.shape));
}

}  // namespace

// ---------------------------------------------------------------------------
// kernels
// ---------------------------------------------------------------------------

namespace kernels {

ConvDims conv_dims(const std::vector<int>& xs, const std::vector<int>& ws, int stride,
                   int pad) {
  if (xs.size() != 5) throw ShapeMismatch("conv3d input must be rank 5, got " + shape_str(xs));
  if (ws.size() != 5) throw ShapeMismatch("conv3d kernel must be rank 5, got " + shape_str(ws));
  if (ws[2] != ws[3] || ws[2] != ws[4])
    throw ShapeMismatch("conv3d kernel must be cubic, got " + shape_str(ws));
  if (xs[1] != ws[1])
    throw ShapeMismatch("conv3d channels: input " + shape_str(xs) + " kernel " +
                        shape_str(ws));
  ConvDims d;
  d.N = xs[0];
  d.Cin = xs[1];
  d.D = xs[2];
  d.H = xs[3];
  d.W = xs[4];
  d.Cout = ws[0];
  d.K = ws[2];
  d.stride = stride;
  d.pad = pad;
  auto osz = [&](int in) { return (in + 2 * pad - d.K) / stride + 1; };
  d.Do = osz(d.D);
  d.Ho = osz(d.H);
  d.Wo = osz(d.W);
  if (d.Do <= 0 || d.Ho <= 0 || d.Wo <= 0)
    throw ShapeMismatch("conv3d output collapses for input " + shape_str(xs));
  return d;
}

void conv3d_forward(const ConvDims& d, const double* x, const double* w,
                    const double* b, double* out) {
  const std::size_t in_c = static_cast<std::size_t>(d.D) * d.H * d.W;
  const std::size_t out_c = static_cast<std::size_t>(d.Do) * d.Ho * d.Wo;
  const std::size_t wk = static_cast<std::size_t>(d.K) * d.K * d.K;
  for (int n = 0; n < d.N; ++n)
    for (int oc = 0; oc < d.Cout; ++oc) {
      double* o = out + (static_cast<std::size_t>(n) * d.Cout + oc) * out_c;
      const double bias = b ? b[oc] : 0.0;
      std::fill(o, o + out_c, bias);
      for (int ic = 0; ic < d.Cin; ++ic) {
        const double* xi = x + (static_cast<std::size_t>(n) * d.Cin + ic) * in_c;
        const double* wi = w + (static_cast<std::size_t>(oc) * d.Cin + ic) * wk;
        for (int kz = 0; kz < d.K; ++kz)
          for (int ky = 0; ky < d.K; ++ky)
            for (int kx = 0; kx < d.K; ++kx) {
              const double wv = wi[(kz * d.K + ky) * d.K + kx];
              if (wv == 0.0) continue;
              for (int zo = 0; zo < d.Do; ++zo) {
                const int zi = zo * d.stride + kz - d.pad;
                if (zi < 0 || zi >= d.D) continue;
                for (int yo = 0; yo < d.Ho; ++yo) {
                  const int yi = yo * d.stride + ky - d.pad;
                  if (yi < 0 || yi >= d.H) continue;
                  double* orow = o + (static_cast<std::size_t>(zo) * d.Ho + yo) * d.Wo;
                  const double* xrow =
                      xi + (static_cast<std::size_t>(zi) * d.H + yi) * d.W;
                  if (d.stride == 1) {
                    const int x_lo = std::max(0, d.pad - kx);
                    const int x_hi = std::min(d.Wo, d.W + d.pad - kx);
                    const double* xs = xrow + (x_lo + kx - d.pad);
                    for (int xo = x_lo; xo < x_hi; ++xo)
                      orow[xo] += wv * xs[xo - x_lo];
                  } else {
                    for (int xo = 0; xo < d.Wo; ++xo) {
                      const int xi2 = xo * d.stride + kx - d.pad;
                      if (xi2 >= 0 && xi2 < d.W) orow[xo] += wv * xrow[xi2];
                    }
                  }
                }
              }
            }
      }
    }
}

void conv3d_backward_x(const ConvDims& d, const double* w, const double* gout,
                       double* gx) {
  const std::size_t in_c = static_cast<std::size_t>(d.D) * d.H * d.W;
  const std::size_t out_c = static_cast<std::size_t>(d.Do) * d.Ho * d.Wo;
  const std::size_t wk = static_cast<std::size_t>(d.K) * d.K * d.K;
  for (int n = 0; n < d.N; ++n)
    for (int ic = 0; ic < d.Cin; ++ic) {
      double* g = gx + (static_cast<std::size_t>(n) * d.Cin + ic) * in_c;
      for (int oc = 0; oc < d.Cout; ++oc) {
        const double* go = gout + (static_cast<std::size_t>(n) * d.Cout + oc) * out_c;
        const double* wi = w + (static_cast<std::size_t>(oc) * d.Cin + ic) * wk;
        for (int kz = 0; kz < d.K; ++kz)
          for (int ky = 0; ky < d.K; ++ky)
            for (int kx = 0; kx < d.K; ++kx) {
              const double wv = wi[(kz * d.K + ky) * d.K + kx];
              if (wv == 0.0) continue;
              for (int zo = 0; zo < d.Do; ++zo) {
                const int zi = zo * d.stride + kz - d.pad;
                if (zi < 0 || zi >= d.D) continue;
                for (int yo = 0; yo < d.Ho; ++yo) {
                  const int yi = yo * d.stride + ky - d.pad;
                  if (yi < 0 || yi >= d.H) continue;
                  const double* grow = go + (static_cast<std::size_t>(zo) * d.Ho + yo) * d.Wo;
                  double* xrow = g + (static_cast<std::size_t>(zi) * d.H + yi) * d.W;
                  for (int xo = 0; xo < d.Wo; ++xo) {
                    const int xi2 = xo * d.stride + kx - d.pad;
                    if (xi2 >= 0 && xi2 < d.W) xrow[xi2] += wv * grow[xo];
                  }
                }
              }
            }
      }
    }
}

void conv3d_backward_w(const ConvDims& d, const double* x, const double* gout,
                       double* gw, double* gb) {
  const std::size_t in_c = static_cast<std::size_t>(d.D) * d.H * d.W;
  const std::size_t out_c = static_cast<std::size_t>(d.Do) * d.Ho * d.Wo;
  const std::size_t wk = static_cast<std::size_t>(d.K) * d.K * d.K;
  for (int n = 0; n < d.N; ++n)
    for (int oc = 0; oc < d.Cout; ++oc) {
      const double* go = gout + (static_cast<std::size_t>(n) * d.Cout + oc) * out_c;
      if (gb) {
        double acc = 0.0;
        for (std::size_t i = 0; i < out_c; ++i) acc += go[i];
        gb[oc] += acc;
      }
      for (int ic = 0; ic < d.Cin; ++ic) {
        const double* xi = x + (static_cast<std::size_t>(n) * d.Cin + ic) * in_c;
        double* gwi = gw + (static_cast<std::size_t>(oc) * d.Cin + ic) * wk;
        for (int kz = 0; kz < d.K; ++kz)
          for (int ky = 0; ky < d.K; ++ky)
            for (int kx = 0; kx < d.K; ++kx) {
              double acc = 0.0;
              for (int zo = 0; zo < d.Do; ++zo) {
                const int zi = zo * d.stride + kz - d.pad;
                if (zi < 0 || zi >= d.D) continue;
                for (int yo = 0; yo < d.Ho; ++yo) {
                  const int yi = yo * d.stride + ky - d.pad;
                  if (yi < 0 || yi >= d.H) continue;
                  const double* grow = go + (static_cast<std::size_t>(zo) * d.Ho + yo) * d.Wo;
                  const double* xrow =
                      xi + (static_cast<std::size_t>(zi) * d.H + yi) * d.W;
                  for (int xo = 0; xo < d.Wo; ++xo) {
                    const int xi2 = xo * d.stride + kx - d.pad;
                    if (xi2 >= 0 && xi2 < d.W) acc += xrow[xi2] * grow[xo];
                  }
                }
              }
              gwi[(kz * d.K + ky) * d.K + kx] += acc;
            }
      }
    }
}

void dense_forward(int N, int in, int out, const double* x, const double* W,
                   const double* b, double* y) {
  for (int n = 0; n < N; ++n) {
    double* yr = y + static_cast<std::size_t>(n) * out;
    if (b)
      std::memcpy(yr, b, sizeof(double) * static_cast<std::size_t>(out));
    else
      std::fill(yr, yr + out, 0.0);
    const double* xr = x + static_cast<std::size_t>(n) * in;
    for (int i = 0; i < in; ++i) {
      const double xv = xr[i];
      if (xv == 0.0) continue;
      const double* wr = W + static_cast<std::size_t>(i) * out;
      for (int o = 0; o < out; ++o) yr[o] += xv * wr[o];
    }
  }
}

void maxpool3d_forward(int N, int C, int D, int H, int W, int f, const double* x,
                       double* out, int* argmax) {
  const int Do = D / f, Ho = H / f, Wo = W / f;
  const std::size_t in_c = static_cast<std::size_t>(D) * H * W;
  const std::size_t out_c = static_cast<std::size_t>(Do) * Ho * Wo;
  for (int nc = 0; nc < N * C; ++nc) {
    const double* xi = x + nc * in_c;
    double* o = out + nc * out_c;
    int* am = argmax + nc * out_c;
    std::size_t oi = 0;
    for (int zo = 0; zo < Do; ++zo)
      for (int yo = 0; yo < Ho; ++yo)
        for (int xo = 0; xo < Wo; ++xo, ++oi) {
          double best = -1e300;
          int besti = 0;
          for (int dz = 0; dz < f; ++dz)
            for (int dy = 0; dy < f; ++dy)
              for (int dx = 0; dx < f; ++dx) {
                const int zi = zo * f + dz, yi = yo * f + dy, xi2 = xo * f + dx;
                const int idx = (zi * H + yi) * W + xi2;
                if (xi[idx] > best) {
                  best = xi[idx];
                  besti = idx;
                }
              }
          o[oi] = best;
          am[oi] = besti;
        }
  }
}

void upsample3d_forward(int N, int C, int D, int H, int W, int f, const double* x,
                        double* out) {
  const int Do = D * f, Ho = H * f, Wo = W * f;
  const std::size_t in_c = static_cast<std::size_t>(D) * H * W;
  const std::size_t out_c = static_cast<std::size_t>(Do) * Ho * Wo;
  for (int nc = 0; nc < N * C; ++nc) {
    const double* xi = x + nc * in_c;
    double* o = out + nc * out_c;
    for (int zo = 0; zo < Do; ++zo)
      for (int yo = 0; yo < Ho; ++yo)
        for (int xo = 0; xo < Wo; ++xo)
          o[(static_cast<std::size_t>(zo) * Ho + yo) * Wo + xo] =
              xi[(static_cast<std::size_t>(zo / f) * H + yo / f) * W + xo / f];
  }
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

int Tape::push(Tensor value, std::function<void(Tape&)> back) {
  Node node;
  node.grad = Tensor(value.shape);  // zeros
  node.value = std::move(value);
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor value) { return push(std::move(value), {}); }

int Tape::leaf(const std::vector<double>& values, std::vector<int> shape) {
  return leaf(Tensor(std::move(shape), values));
}

int Tape::add(int a, int b) {
  require_same_shape(val(a), val(b), "add");
  Tensor out = val(a);
  const Tensor& vb = val(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += vb.v[i];
  const int id = push(std::move(out), nullptr);
  nodes_.back().back = [a, b, id](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i];
      gb.v[i] += g.v[i];
    }
  };
  return id;
}

int Tape::sub(int a, int b) {
  require_same_shape(val(a), val(b), "sub");
  Tensor out = val(a);
  const Tensor& vb = val(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] -= vb.v[i];
  const int id = push(std::move(out), nullptr);
  nodes_.back().back = [a, b, id](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i];
      gb.v[i] -= g.v[i];
    }
  };
  return id;
}

int Tape::mul(int a, int b) {
  require_same_shape(val(a), val(b), "mul");
  Tensor out = val(a);
  const Tensor& vb = val(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] *= vb.v[i];
  const int id = push(std::move(out), nullptr);
  nodes_.back().back = [a, b, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& va = t.val(a);
    const Tensor& vb2 = t.val(b);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i] * vb2.v[i];
      gb.v[i] += g.v[i] * va.v[i];
    }
  };
  return id;
}

int Tape::div(int a, int b) {
  require_same_shape(val(a), val(b), "div");
  Tensor out = val(a);
  const Tensor& vb = val(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] /= vb.v[i];
  const int id = push(std::move(out), nullptr);
  nodes_.back().back = [a, b, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& y = t.val(id);  // a/b
    const Tensor& vb2 = t.val(b);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i] / vb2.v[i];
      gb.v[i] -= g.v[i] * y.v[i] / vb2.v[i];
    }
  };
  return id;
}

int Tape::scale(int a, double s) {
  Tensor out = val(a);
  for (double& x : out.v) x *= s;
  const int id = push(std::move(out), nullptr);
  nodes_.back().back = [a, s, id](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += s * g.v[i];
  };
  return id;
}

int Tape::add_scalar(int a, double s) {
  Tensor out = val(a);
  for (double& x : out.v) x += s;
  const int id = push(std::move(out), nullptr);
  nodes_.back().back = [a, id](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
  };
  return id;
}

int Tape::exp_op(int a) {
  Tensor out = val(a);
  for (double& x : out.v) x = std::exp(x);
  const int id = push(std::move(out), nullptr);
  nodes_.back().back = [a, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& y = t.val(id);
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * y.v[i];
  };
  return id;
}

int Tape::log_op(int a) {
  Tensor out = val(a);
  for (double& x : out.v) x = std::log(x);
  const int id = push(std::move(out), nullptr);
  nodes_.back().back = [a, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& x = t.val(a);
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] / x.v[i];
  };
  return id;
}

int Tape::relu(int a) {
  Tensor out = val(a);
  for (double& x : out.v) x = x > 0.0 ? x : 0.0;
  const int id = push(std::move(out), nullptr);
  nodes_.back().back = [a, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& x = t.val(a);
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x.v[i] > 0.0) ga.v[i] += g.v[i];
  };
  return id;
}

int Tape::sigmoid(int a) {
  Tensor out = val(a);
  for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
  const int id = push(std::move(out), nullptr);
  nodes_.back().back = [a, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& y = t.val(id);
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      ga.v[i] += g.v[i] * y.v[i] * (1.0 - y.v[i]);
  };
  return id;
}

int Tape::dense(int x, int W, int b) {
  const Tensor& vx = val(x);
  const Tensor& vw = val(W);
  const Tensor& vb = val(b);
  if (vx.shape.size() != 2 || vw.shape.size() != 2 || vb.shape.size() != 1 ||
      vx.shape[1] != vw.shape[0] || vw.shape[1] != vb.shape[0])
    throw ShapeMismatch("dense: x" + shape_str(vx.shape) + " W" + shape_str(vw.shape) +
                        " b" + shape_str(vb.shape));
  const int N = vx.shape[0], in = vx.shape[1], out = vw.shape[1];
  Tensor y({N, out});
  kernels::dense_forward(N, in, out, vx.v.data(), vw.v.data(), vb.v.data(), y.v.data());
  const int id = push(std::move(y), nullptr);
  nodes_.back().back = [x, W, b, id, N, in, out](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& vx2 = t.val(x);
    const Tensor& vw2 = t.val(W);
    Tensor& gx = t.grad_mut(x);
    Tensor& gw = t.grad_mut(W);
    Tensor& gb = t.grad_mut(b);
    for (int n = 0; n < N; ++n) {
      const double* gr = g.v.data() + static_cast<std::size_t>(n) * out;
      const double* xr = vx2.v.data() + static_cast<std::size_t>(n) * in;
      double* gxr = gx.v.data() + static_cast<std::size_t>(n) * in;
      for (int o = 0; o < out; ++o) gb.v[o] += gr[o];
      for (int i = 0; i < in; ++i) {
        const double* wr = vw2.v.data() + static_cast<std::size_t>(i) * out;
        double* gwr = gw.v.data() + static_cast<std::size_t>(i) * out;
        double acc = 0.0;
        const double xv = xr[i];
        for (int o = 0; o < out; ++o) {
          acc += wr[o] * gr[o];
          gwr[o] += xv * gr[o];
        }
        gxr[i] += acc;
      }
    }
  };
  return id;
}

int Tape::conv3d(int x, int w, int b, int stride, int padding) {
  const Tensor& vx = val(x);
  const Tensor& vw = val(w);
  const Tensor& vb = val(b);
  const kernels::ConvDims d = kernels::conv_dims(vx.shape, vw.shape, stride, padding);
  if (vb.shape.size() != 1 || vb.shape[0] != d.Cout)
    throw ShapeMismatch("conv3d bias " + shape_str(vb.shape) + " for Cout " +
                        std::to_string(d.Cout));
  Tensor y({d.N, d.Cout, d.Do, d.Ho, d.Wo});
  kernels::conv3d_forward(d, vx.v.data(), vw.v.data(), vb.v.data(), y.v.data());
  const int id = push(std::move(y), nullptr);
  nodes_.back().back = [x, w, b, id, d](Tape& t) {
    const Tensor& g = t.grad(id);
    kernels::conv3d_backward_x(d, t.val(w).v.data(), g.v.data(),
                               t.grad_mut(x).v.data());
    kernels::conv3d_backward_w(d, t.val(x).v.data(), g.v.data(),
                               t.grad_mut(w).v.data(), t.grad_mut(b).v.data());
  };
  return id;
}

int Tape::maxpool3d(int x, int factor) {
  const Tensor& vx = val(x);
  if (vx.shape.size() != 5) throw ShapeMismatch("maxpool3d input " + shape_str(vx.shape));
  const int N = vx.shape[0], C = vx.shape[1], D = vx.shape[2], H = vx.shape[3],
            W = vx.shape[4];
  if (D % factor || H % factor || W % factor)
    throw ShapeMismatch("maxpool3d needs dims divisible by " + std::to_string(factor));
  Tensor y({N, C, D / factor, H / factor, W / factor});
  auto argmax = std::make_shared<std::vector<int>>(y.size());
  kernels::maxpool3d_forward(N, C, D, H, W, factor, vx.v.data(), y.v.data(),
                             argmax->data());
  const int id = push(std::move(y), nullptr);
  const std::size_t in_c = static_cast<std::size_t>(D) * H * W;
  nodes_.back().back = [x, id, argmax, N, C, in_c](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& gx = t.grad_mut(x);
    const std::size_t out_c = g.size() / (static_cast<std::size_t>(N) * C);
    for (int nc = 0; nc < N * C; ++nc) {
      const double* gr = g.v.data() + nc * out_c;
      double* gxr = gx.v.data() + nc * in_c;
      const int* am = argmax->data() + nc * out_c;
      for (std::size_t i = 0; i < out_c; ++i) gxr[am[i]] += gr[i];
    }
  };
  return id;
}

int Tape::upsample3d(int x, int factor) {
  const Tensor& vx = val(x);
  if (vx.shape.size() != 5) throw ShapeMismatch("upsample3d input " + shape_str(vx.shape));
  const int N = vx.shape[0], C = vx.shape[1], D = vx.shape[2], H = vx.shape[3],
            W = vx.shape[4];
  Tensor y({N, C, D * factor, H * factor, W * factor});
  kernels::upsample3d_forward(N, C, D, H, W, factor, vx.v.data(), y.v.data());
  const int id = push(std::move(y), nullptr);
  nodes_.back().back = [x, id, N, C, D, H, W, factor](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& gx = t.grad_mut(x);
    const int Do = D * factor, Ho = H * factor, Wo = W * factor;
    const std::size_t in_c = static_cast<std::size_t>(D) * H * W;
    const std::size_t out_c = static_cast<std::size_t>(Do) * Ho * Wo;
    for (int nc = 0; nc < N * C; ++nc) {
      const double* gr = g.v.data() + nc * out_c;
      double* gxr = gx.v.data() + nc * in_c;
      for (int zo = 0; zo < Do; ++zo)
        for (int yo = 0; yo < Ho; ++yo)
          for (int xo = 0; xo < Wo; ++xo)
            gxr[(static_cast<std::size_t>(zo / factor) * H + yo / factor) * W +
                xo / factor] +=
                gr[(static_cast<std::size_t>(zo) * Ho + yo) * Wo + xo];
    }
  };
  return id;
}

int Tape::reshape(int a, std::vector<int> shape) {
  const Tensor& va = val(a);
  if (Tensor::numel(shape) != va.size())
    throw ShapeMismatch("reshape " + shape_str(va.shape) + " -> " + shape_str(shape));
  Tensor out(std::move(shape), va.v);
  const int id = push(std::move(out), nullptr);
  nodes_.back().back = [a, id](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
  };
  return id;
}

int Tape::slice_cols(int a, int c0, int c1) {
  const Tensor& va = val(a);
  if (va.shape.size() != 2) throw ShapeMismatch("slice_cols input " + shape_str(va.shape));
  const int N = va.shape[0], C = va.shape[1];
  if (c0 < 0 || c1 > C || c0 >= c1) throw ShapeMismatch("slice_cols range invalid");
  Tensor out({N, c1 - c0});
  for (int n = 0; n < N; ++n)
    for (int c = c0; c < c1; ++c)
      out.v[static_cast<std::size_t>(n) * (c1 - c0) + (c - c0)] =
          va.v[static_cast<std::size_t>(n) * C + c];
  const int id = push(std::move(out), nullptr);
  nodes_.back().back = [a, id, N, C, c0, c1](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    for (int n = 0; n < N; ++n)
      for (int c = c0; c < c1; ++c)
        ga.v[static_cast<std::size_t>(n) * C + c] +=
            g.v[static_cast<std::size_t>(n) * (c1 - c0) + (c - c0)];
  };
  return id;
}

int Tape::reduce_mean(int a) {
  const Tensor& va = val(a);
  double acc = 0.0;
  for (double x : va.v) acc += x;
  const double inv = 1.0 / static_cast<double>(va.size());
  const int id = push(Tensor::scalar(acc * inv), nullptr);
  nodes_.back().back = [a, id, inv](Tape& t) {
    const double g = t.grad(id).v[0] * inv;
    Tensor& ga = t.grad_mut(a);
    for (double& x : ga.v) x += g;
  };
  return id;
}

int Tape::reduce_sum(int a) {
  const Tensor& va = val(a);
  double acc = 0.0;
  for (double x : va.v) acc += x;
  const int id = push(Tensor::scalar(acc), nullptr);
  nodes_.back().back = [a, id](Tape& t) {
    const double g = t.grad(id).v[0];
    Tensor& ga = t.grad_mut(a);
    for (double& x : ga.v) x += g;
  };
  return id;
}

int Tape::mse(int a, int b) {
  require_same_shape(val(a), val(b), "mse");
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = va.v[i] - vb.v[i];
    acc += d * d;
  }
  const double inv = 1.0 / static_cast<double>(va.size());
  const int id = push(Tensor::scalar(acc * inv), nullptr);
  nodes_.back().back = [a, b, id, inv](Tape& t) {
    const double g = t.grad(id).v[0] * 2.0 * inv;
    const Tensor& va2 = t.val(a);
    const Tensor& vb2 = t.val(b);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < va2.size(); ++i) {
      const double d = g * (va2.v[i] - vb2.v[i]);
      ga.v[i] += d;
      gb.v[i] -= d;
    }
  };
  return id;
}

void Tape::backward(int loss) {
  if (val(loss).size() != 1)
    throw NonScalarLoss("backward target has shape " + shape_str(val(loss).shape));
  grad_mut(loss).v[0] = 1.0;
  for (int i = loss; i >= 0; --i)
    if (nodes_[static_cast<std::size_t>(i)].back)
      nodes_[static_cast<std::size_t>(i)].back(*this);
}

}  // namespace metaforge
