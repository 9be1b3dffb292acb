#include "amp/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace amp {

Tensor3 conv1x1(const Tensor3& features, const Matrix& filters) {
    if (filters.cols != features.channels)
        throw std::invalid_argument("conv1x1: filter cols != input channels");
    Tensor3 out(filters.rows, features.height, features.width);
    const int plane = features.height * features.width;
    for (int o = 0; o < filters.rows; ++o) {
        Real* dst = &out.data[static_cast<size_t>(o) * plane];
        for (int c = 0; c < features.channels; ++c) {
            const Real w = filters.at(o, c);
            if (w == 0.0) continue;
            const Real* src = &features.data[static_cast<size_t>(c) * plane];
            for (int p = 0; p < plane; ++p) dst[p] += w * src[p];
        }
    }
    return out;
}

Tensor3 conv2d(const Tensor3& input, const Kernel4& kernels, int stride, int pad) {
    if (kernels.cin != input.channels)
        throw std::invalid_argument("conv2d: kernel cin != input channels");
    if (stride <= 0 || pad < 0)
        throw std::invalid_argument("conv2d: bad stride/pad");
    const int oh = (input.height + 2 * pad - kernels.kh) / stride + 1;
    const int ow = (input.width + 2 * pad - kernels.kw) / stride + 1;
    if (input.height + 2 * pad < kernels.kh || input.width + 2 * pad < kernels.kw ||
        oh < 1 || ow < 1)
        throw std::invalid_argument("conv2d: non-positive output dims");

    Tensor3 out(kernels.cout, oh, ow);
    for (int o = 0; o < kernels.cout; ++o) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                Real acc = 0.0;
                const int y0 = oy * stride - pad;
                const int x0 = ox * stride - pad;
                for (int c = 0; c < kernels.cin; ++c) {
                    for (int ky = 0; ky < kernels.kh; ++ky) {
                        const int y = y0 + ky;
                        if (y < 0 || y >= input.height) continue;
                        for (int kx = 0; kx < kernels.kw; ++kx) {
                            const int x = x0 + kx;
                            if (x < 0 || x >= input.width) continue;
                            acc += kernels.at(o, c, ky, kx) * input.at(c, y, x);
                        }
                    }
                }
                out.at(o, oy, ox) = acc;
            }
        }
    }
    return out;
}

Tensor3 relu(const Tensor3& t) {
    Tensor3 out = t;
    for (auto& v : out.data) v = std::max(0.0, v);
    return out;
}

namespace {

struct Tap {
    int lo, hi;
    Real frac;  // weight of hi; lo gets 1 - frac
};

std::vector<Tap> make_taps(int in, int out) {
    std::vector<Tap> taps(out);
    const Real scale = static_cast<Real>(in) / out;
    for (int i = 0; i < out; ++i) {
        Real src = (i + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<Real>(in - 1));
        const int lo = static_cast<int>(std::floor(src));
        taps[i] = {lo, std::min(lo + 1, in - 1), src - lo};
    }
    return taps;
}

}  // namespace

Tensor3 bilinear_resize(const Tensor3& t, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0)
        throw std::invalid_argument("bilinear_resize: non-positive output dims");
    const auto ty = make_taps(t.height, out_h);
    const auto tx = make_taps(t.width, out_w);
    Tensor3 out(t.channels, out_h, out_w);
    for (int c = 0; c < t.channels; ++c) {
        for (int y = 0; y < out_h; ++y) {
            const Tap& a = ty[y];
            for (int x = 0; x < out_w; ++x) {
                const Tap& b = tx[x];
                const Real top = (1 - b.frac) * t.at(c, a.lo, b.lo) + b.frac * t.at(c, a.lo, b.hi);
                const Real bot = (1 - b.frac) * t.at(c, a.hi, b.lo) + b.frac * t.at(c, a.hi, b.hi);
                out.at(c, y, x) = (1 - a.frac) * top + a.frac * bot;
            }
        }
    }
    return out;
}

Tensor3 bilinear_resize_adjoint(const Tensor3& grad_out, int in_h, int in_w) {
    const auto ty = make_taps(in_h, grad_out.height);
    const auto tx = make_taps(in_w, grad_out.width);
    Tensor3 grad_in(grad_out.channels, in_h, in_w);
    for (int c = 0; c < grad_out.channels; ++c) {
        for (int y = 0; y < grad_out.height; ++y) {
            const Tap& a = ty[y];
            for (int x = 0; x < grad_out.width; ++x) {
                const Tap& b = tx[x];
                const Real g = grad_out.at(c, y, x);
                grad_in.at(c, a.lo, b.lo) += (1 - a.frac) * (1 - b.frac) * g;
                grad_in.at(c, a.lo, b.hi) += (1 - a.frac) * b.frac * g;
                grad_in.at(c, a.hi, b.lo) += a.frac * (1 - b.frac) * g;
                grad_in.at(c, a.hi, b.hi) += a.frac * b.frac * g;
            }
        }
    }
    return grad_in;
}

Tensor3 softmax_channels(const Tensor3& t) {
    Tensor3 out(t.channels, t.height, t.width);
    const int plane = t.height * t.width;
    for (int p = 0; p < plane; ++p) {
        Real m = t.data[p];
        for (int c = 1; c < t.channels; ++c)
            m = std::max(m, t.data[static_cast<size_t>(c) * plane + p]);
        Real sum = 0.0;
        for (int c = 0; c < t.channels; ++c) {
            const Real e = std::exp(t.data[static_cast<size_t>(c) * plane + p] - m);
            out.data[static_cast<size_t>(c) * plane + p] = e;
            sum += e;
        }
        for (int c = 0; c < t.channels; ++c)
            out.data[static_cast<size_t>(c) * plane + p] /= sum;
    }
    return out;
}

Real l2_norm(const Vector& v) {
    Real s = 0.0;
    for (Real x : v) s += x * x;
    return std::sqrt(s);
}

Vector l2_normalize(const Vector& v) {
    const Real n = l2_norm(v);
    if (n <= 1e-12) throw ZeroVectorError();
    Vector out = v;
    for (Real& x : out) x /= n;
    return out;
}

LabelMap argmax_channels(const Tensor3& t) {
    LabelMap out(t.height, t.width);
    const int plane = t.height * t.width;
    for (int p = 0; p < plane; ++p) {
        int best = 0;
        Real bv = t.data[p];
        for (int c = 1; c < t.channels; ++c) {
            const Real v = t.data[static_cast<size_t>(c) * plane + p];
            if (v > bv) {
                bv = v;
                best = c;
            }
        }
        out.labels[p] = static_cast<uint8_t>(best);
    }
    return out;
}

}  // namespace amp
