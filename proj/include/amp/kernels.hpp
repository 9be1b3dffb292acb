#pragma once

#include "amp/label_map.hpp"
#include "amp/tensor.hpp"

namespace amp {

// out[o,y,x] = sum_c filters[o,c] * features[c,y,x]
Tensor3 conv1x1(const Tensor3& features, const Matrix& filters);

// Cross-correlation with zero padding. Output spatial dims are
// floor((in + 2*pad - k) / stride) + 1 and must be >= 1.
Tensor3 conv2d(const Tensor3& input, const Kernel4& kernels, int stride, int pad);

Tensor3 relu(const Tensor3& t);

// Half-pixel-center convention: source coordinate for output index i is
// (i + 0.5) * in / out - 0.5, clamped to [0, in-1].
Tensor3 bilinear_resize(const Tensor3& t, int out_h, int out_w);

// Adjoint of bilinear_resize as a linear map: scatters a gradient at the
// output resolution back to the input resolution with the same tap weights.
Tensor3 bilinear_resize_adjoint(const Tensor3& grad_out, int in_h, int in_w);

// Per-pixel softmax over the channel axis, max-subtracted.
Tensor3 softmax_channels(const Tensor3& t);

// Throws ZeroVectorError when the norm is below 1e-12.
Vector l2_normalize(const Vector& v);

Real l2_norm(const Vector& v);

// Per-pixel index of the maximal channel; ties go to the lowest index.
LabelMap argmax_channels(const Tensor3& t);

}  // namespace amp
