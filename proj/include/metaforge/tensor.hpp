#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "metaforge/common.hpp"

namespace metaforge {

/// Dense row-major tensor of doubles.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    v.assign(numel(shape), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> values)
      : shape(std::move(s)), v(std::move(values)) {
    if (v.size() != numel(shape)) throw ShapeMismatch("values do not fill shape");
  }

  static std::size_t numel(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw ShapeMismatch("non-positive dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }
  static Tensor scalar(double x) { return Tensor({1}, {x}); }

  std::size_t size() const { return v.size(); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::string shape_str(const std::vector<int>& shape);

// ---------------------------------------------------------------------------
// Reverse-mode tape. Usage: create a Tape per forward pass, lift inputs and
// parameters with leaf(), compose ops, call backward() on a scalar node, then
// read grad(id) for every leaf of interest.
// ---------------------------------------------------------------------------

class Tape {
 public:
  int leaf(Tensor value);
  int leaf(const std::vector<double>& values, std::vector<int> shape);

  // elementwise
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int div(int a, int b);
  int scale(int a, double s);
  int add_scalar(int a, double s);
  int exp_op(int a);
  int log_op(int a);
  int relu(int a);
  int sigmoid(int a);

  // layers
  int dense(int x, int W, int b);                     // [N,in]x[in,out]+[out]
  int conv3d(int x, int w, int b, int stride = 1, int padding = 1);
  int maxpool3d(int x, int factor = 2);
  int upsample3d(int x, int factor = 2);

  // structure
  int reshape(int a, std::vector<int> shape);
  int slice_cols(int a, int c0, int c1);              // on [N,C]

  // reductions
  int reduce_mean(int a);
  int reduce_sum(int a);
  int mse(int a, int b);

  /// Reverse pass from a scalar loss. Throws NonScalarLoss otherwise.
  void backward(int loss);

  const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  int push(Tensor value, std::function<void(Tape&)> back);
  Tensor& grad_mut(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Forward-only kernels shared by the tape and eager inference.
// ---------------------------------------------------------------------------

namespace kernels {

struct ConvDims {
  int N, Cin, D, H, W, Cout, K, stride, pad, Do, Ho, Wo;
};

ConvDims conv_dims(const std::vector<int>& xs, const std::vector<int>& ws, int stride,
                   int pad);

void conv3d_forward(const ConvDims& d, const double* x, const double* w,
                    const double* b, double* out);
void conv3d_backward_x(const ConvDims& d, const double* w, const double* gout,
                       double* gx);
void conv3d_backward_w(const ConvDims& d, const double* x, const double* gout,
                       double* gw, double* gb);

void dense_forward(int N, int in, int out, const double* x, const double* W,
                   const double* b, double* y);

void maxpool3d_forward(int N, int C, int D, int H, int W, int f, const double* x,
                       double* out, int* argmax);
void upsample3d_forward(int N, int C, int D, int H, int W, int f, const double* x,
                        double* out);

}  // namespace kernels

}  // namespace metaforge
