#pragma once

#include <vector>

#include "faultlab/tensor.hpp"

namespace faultlab::ops {

// Layer forward primitives. All of them are pure; shape violations throw
// ShapeError naming both shapes.

// W x + b for W {m,n}, x {n}, b {m}.
Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b);

// Valid cross-correlation, stride 1, no padding. x is {H,W,Cin}; W is
// {C,C,Cin,F}; b is {F}. Output {H-C+1, W-C+1, F}.
Tensor conv2d_forward(const Tensor& x, const Tensor& W, const Tensor& b);

// Non-overlapping P x P window maximum per feature map; trailing rows and
// columns that do not fill a window are dropped. x is {H,W,F}.
Tensor max_pool(const Tensor& x, std::size_t P);

// max_pool that also records each output's winning flat index into x
// (first maximum in scan order).
Tensor max_pool_with_winners(const Tensor& x, std::size_t P,
                             std::vector<std::size_t>& winners);

// Elementwise min(max(x, 0), clip).
Tensor clipped_relu(const Tensor& x, double clip);

// Numerically stable softmax over a rank-1 tensor: outputs are positive
// and sum to 1.
Tensor softmax(const Tensor& z);

// Index of the largest element; ties resolve to the lowest index.
std::size_t argmax(const Tensor& v);

// Row i of a {count, rows, cols} image stack as a {rows, cols} tensor.
Tensor image_at(const Tensor& images, std::size_t i);

// Same data, new shape (sizes must agree).
Tensor reshape(Tensor t, std::vector<std::size_t> shape);

} // namespace faultlab::ops
