#pragma once

#include "pgn/tensor.hpp"

namespace pgn::kernels {

// Output spatial size of a strided convolution; throws on incompatible dims.
int conv_out_size(int in, int kernel, int stride, int padding);
// Output spatial size of a strided transposed convolution.
int conv_transpose_out_size(int in, int kernel, int stride, int padding);

// Forward passes. Weight layouts: conv (O,I,Kh,Kw); conv_transpose (I,O,Kh,Kw),
// i.e. the same tensor acts as its own adjoint between the two ops.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding);
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gout, int stride, int padding,
                     Tensor* gx, Tensor* gw, Tensor* gb);

Tensor conv_transpose2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding);
void conv_transpose2d_backward(const Tensor& x, const Tensor& w, const Tensor& gout, int stride,
                               int padding, Tensor* gx, Tensor* gw, Tensor* gb);

// Dense layer: x (N,F), w (O,F), b (O) -> (N,O).
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);
void dense_backward(const Tensor& x, const Tensor& w, const Tensor& gout, Tensor* gx, Tensor* gw,
                    Tensor* gb);

// Non-overlapping average pooling with kernel == stride.
Tensor avg_pool2d_forward(const Tensor& x, int k);
void avg_pool2d_backward(const Tensor& x, const Tensor& gout, int k, Tensor* gx);

// Row-wise softmax of a (N,K) tensor.
Tensor softmax_forward(const Tensor& logits);

}  // namespace pgn::kernels
