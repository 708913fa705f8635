// Dense-array substrate: rank-3 float tensors, rank-2 label grids and the
// shared numerical kernels (convolution, bilinear resampling, exact
// euclidean distance transform, gaussian splatting).
//
// All kernels are pure functions of immutable inputs. Storage is 32-bit
// float, reductions accumulate in 64-bit with a fixed order so results are
// bit-reproducible.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pano {

struct Tensor3 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;  // channel-major, then row, then column

    Tensor3() = default;

    Tensor3(int c, int h, int w)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, 0.0f) {
        if (c < 0 || h < 0 || w < 0)
            throw std::invalid_argument("Tensor3: negative dimension");
    }

    Tensor3(int c, int h, int w, std::vector<float> values)
        : channels(c), height(h), width(w), data(std::move(values)) {
        if (c < 0 || h < 0 || w < 0)
            throw std::invalid_argument("Tensor3: negative dimension");
        if (data.size() != static_cast<size_t>(c) * h * w)
            throw std::invalid_argument("Tensor3: data length does not match dimensions");
        for (float v : data)
            if (!std::isfinite(v))
                throw std::invalid_argument("Tensor3: non-finite value rejected");
    }

    size_t size() const { return data.size(); }
    size_t plane() const { return static_cast<size_t>(height) * width; }

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }

    bool same_shape(const Tensor3& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

struct LabelGrid {
    int height = 0;
    int width = 0;
    std::vector<uint32_t> data;  // row-major

    LabelGrid() = default;

    LabelGrid(int h, int w, uint32_t fill = 0)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {
        if (h < 0 || w < 0)
            throw std::invalid_argument("LabelGrid: negative dimension");
    }

    LabelGrid(int h, int w, std::vector<uint32_t> values)
        : height(h), width(w), data(std::move(values)) {
        if (data.size() != static_cast<size_t>(h) * w)
            throw std::invalid_argument("LabelGrid: data length does not match dimensions");
    }

    size_t size() const { return data.size(); }

    uint32_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    uint32_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }

    bool same_shape(const LabelGrid& o) const {
        return height == o.height && width == o.width;
    }
};

struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;  // row-major, 0 or 1

    BinaryMask() = default;

    BinaryMask(int h, int w, bool fill = false)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill ? 1 : 0) {
        if (h < 0 || w < 0)
            throw std::invalid_argument("BinaryMask: negative dimension");
    }

    size_t size() const { return data.size(); }
    size_t count() const {
        size_t n = 0;
        for (uint8_t v : data) n += v != 0;
        return n;
    }

    void set(int y, int x, bool v) { data[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
    bool get(int y, int x) const { return data[static_cast<size_t>(y) * width + x] != 0; }
};

// ---------------------------------------------------------------------------
// bilinear resampling, half-pixel-center convention:
//   src = (dst + 0.5) * (src_size / dst_size) - 0.5, clamped to valid range
// ---------------------------------------------------------------------------

inline Tensor3 bilinear_resize(const Tensor3& t, int out_h, int out_w) {
    if (t.channels == 0 || t.height == 0 || t.width == 0)
        throw std::invalid_argument("bilinear_resize: zero-sized input");
    if (out_h < 1 || out_w < 1)
        throw std::invalid_argument("bilinear_resize: output size must be >= 1");

    Tensor3 out(t.channels, out_h, out_w);
    const double sy = static_cast<double>(t.height) / out_h;
    const double sx = static_cast<double>(t.width) / out_w;
    for (int c = 0; c < t.channels; ++c) {
        const float* src = &t.data[c * t.plane()];
        float* dst = &out.data[c * out.plane()];
        for (int oy = 0; oy < out_h; ++oy) {
            double fy = (oy + 0.5) * sy - 0.5;
            fy = std::clamp(fy, 0.0, static_cast<double>(t.height - 1));
            const int y0 = static_cast<int>(fy);
            const int y1 = std::min(y0 + 1, t.height - 1);
            const double ty = fy - y0;
            for (int ox = 0; ox < out_w; ++ox) {
                double fx = (ox + 0.5) * sx - 0.5;
                fx = std::clamp(fx, 0.0, static_cast<double>(t.width - 1));
                const int x0 = static_cast<int>(fx);
                const int x1 = std::min(x0 + 1, t.width - 1);
                const double tx = fx - x0;
                // lerp as v0 + t*(v1-v0) so constant inputs reproduce exactly
                const double v00 = src[static_cast<size_t>(y0) * t.width + x0];
                const double v01 = src[static_cast<size_t>(y0) * t.width + x1];
                const double v10 = src[static_cast<size_t>(y1) * t.width + x0];
                const double v11 = src[static_cast<size_t>(y1) * t.width + x1];
                const double r0 = v00 + tx * (v01 - v00);
                const double r1 = v10 + tx * (v11 - v10);
                dst[static_cast<size_t>(oy) * out_w + ox] =
                    static_cast<float>(r0 + ty * (r1 - r0));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// 2d cross-correlation with zero padding
// ---------------------------------------------------------------------------

struct Conv2dParams {
    int out_channels = 0;
    int in_channels = 0;
    int kh = 0;
    int kw = 0;
    std::vector<float> weight;  // (out, in, kh, kw) row-major
    std::vector<float> bias;    // (out)

    Conv2dParams() = default;
    Conv2dParams(int oc, int ic, int kh_, int kw_)
        : out_channels(oc), in_channels(ic), kh(kh_), kw(kw_),
          weight(static_cast<size_t>(oc) * ic * kh_ * kw_, 0.0f),
          bias(static_cast<size_t>(oc), 0.0f) {}

    float& w(int oc, int ic, int y, int x) {
        return weight[((static_cast<size_t>(oc) * in_channels + ic) * kh + y) * kw + x];
    }
    float w(int oc, int ic, int y, int x) const {
        return weight[((static_cast<size_t>(oc) * in_channels + ic) * kh + y) * kw + x];
    }
};

inline Tensor3 conv2d(const Tensor3& input, const Conv2dParams& p,
                      int stride = 1, int zero_padding = 0) {
    if (p.in_channels != input.channels)
        throw std::invalid_argument("conv2d: input channel mismatch");
    if (p.kh % 2 == 0 || p.kw % 2 == 0)
        throw std::invalid_argument("conv2d: kernel dimensions must be odd");
    if (stride < 1 || zero_padding < 0)
        throw std::invalid_argument("conv2d: bad stride or padding");
    if (p.weight.size() != static_cast<size_t>(p.out_channels) * p.in_channels * p.kh * p.kw ||
        p.bias.size() != static_cast<size_t>(p.out_channels))
        throw std::invalid_argument("conv2d: parameter buffer size mismatch");

    const int oh = (input.height + 2 * zero_padding - p.kh) / stride + 1;
    const int ow = (input.width + 2 * zero_padding - p.kw) / stride + 1;
    if (input.height + 2 * zero_padding < p.kh || input.width + 2 * zero_padding < p.kw)
        throw std::invalid_argument("conv2d: kernel larger than padded input");

    Tensor3 out(p.out_channels, oh, ow);
    std::vector<double> acc(static_cast<size_t>(oh) * ow);
    for (int oc = 0; oc < p.out_channels; ++oc) {
        std::fill(acc.begin(), acc.end(), static_cast<double>(p.bias[oc]));
        for (int ic = 0; ic < input.channels; ++ic) {
            const float* src = &input.data[ic * input.plane()];
            for (int ky = 0; ky < p.kh; ++ky) {
                for (int kx = 0; kx < p.kw; ++kx) {
                    const double wv = p.w(oc, ic, ky, kx);
                    if (wv == 0.0) continue;
                    const int iy_base = -zero_padding + ky;
                    const int ix_base = -zero_padding + kx;
                    // valid output column range for this kernel tap
                    int ox_lo = 0;
                    if (ix_base < 0) ox_lo = (-ix_base + stride - 1) / stride;
                    int ox_hi = ow;
                    if (ix_base + (ow - 1) * stride >= input.width)
                        ox_hi = (input.width - 1 - ix_base) / stride + 1;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = iy_base + oy * stride;
                        if (iy < 0 || iy >= input.height) continue;
                        const float* row = src + static_cast<size_t>(iy) * input.width;
                        double* arow = acc.data() + static_cast<size_t>(oy) * ow;
                        int ix = ix_base + ox_lo * stride;
                        for (int ox = ox_lo; ox < ox_hi; ++ox, ix += stride)
                            arow[ox] += wv * row[ix];
                    }
                }
            }
        }
        float* dst = &out.data[oc * out.plane()];
        for (size_t i = 0; i < acc.size(); ++i)
            dst[i] = static_cast<float>(acc[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// exact euclidean distance transform (two-pass lower envelope of parabolas)
// ---------------------------------------------------------------------------

namespace detail {

// 1d squared distance transform, d[i] = min_j f[j] + (i-j)^2
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d, int n,
                   std::vector<int>& v, std::vector<double>& z) {
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + static_cast<double>(q) * q) -
                    (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                   (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + static_cast<double>(q) * q) -
                 (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

}  // namespace detail

// Each true pixel maps to the euclidean distance to the nearest false pixel;
// everything outside the image counts as false, so the border is exterior.
// False pixels map to 0.
inline Tensor3 distance_transform(const BinaryMask& mask) {
    const int h = mask.height, w = mask.width;
    Tensor3 out(1, h, w);
    if (h == 0 || w == 0) return out;

    // pad with a one-pixel exterior ring so the border acts as background
    const int ph = h + 2, pw = w + 2;
    const double kFar = 1e15;
    std::vector<double> g(static_cast<size_t>(ph) * pw, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask.get(y, x))
                g[static_cast<size_t>(y + 1) * pw + (x + 1)] = kFar;

    const int nmax = std::max(ph, pw);
    std::vector<double> f(nmax), d(nmax), z(nmax + 1);
    std::vector<int> v(nmax);

    // columns, then rows
    for (int x = 0; x < pw; ++x) {
        for (int y = 0; y < ph; ++y) f[y] = g[static_cast<size_t>(y) * pw + x];
        detail::edt_1d(f, d, ph, v, z);
        for (int y = 0; y < ph; ++y) g[static_cast<size_t>(y) * pw + x] = d[y];
    }
    for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) f[x] = g[static_cast<size_t>(y) * pw + x];
        detail::edt_1d(f, d, pw, v, z);
        for (int x = 0; x < pw; ++x) g[static_cast<size_t>(y) * pw + x] = d[x];
    }

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(0, y, x) = mask.get(y, x)
                ? static_cast<float>(std::sqrt(g[static_cast<size_t>(y + 1) * pw + (x + 1)]))
                : 0.0f;
    return out;
}

// ---------------------------------------------------------------------------
// gaussian splatting
// ---------------------------------------------------------------------------

struct PointRC {
    double row = 0.0;
    double col = 0.0;
};

// heatmap(p) = max over points of exp(-d^2 / (2 sigma^2)), truncated beyond
// 3 sigma. Peak value is 1 when a point lies exactly on a pixel center.
inline Tensor3 gaussian_splat(const std::vector<PointRC>& points, double sigma,
                              int h, int w) {
    if (sigma <= 0.0)
        throw std::invalid_argument("gaussian_splat: sigma must be positive");
    Tensor3 out(1, h, w);
    const double radius = 3.0 * sigma;
    const double r2max = radius * radius;
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (const auto& pt : points) {
        const int y0 = std::max(0, static_cast<int>(std::ceil(pt.row - radius)));
        const int y1 = std::min(h - 1, static_cast<int>(std::floor(pt.row + radius)));
        const int x0 = std::max(0, static_cast<int>(std::ceil(pt.col - radius)));
        const int x1 = std::min(w - 1, static_cast<int>(std::floor(pt.col + radius)));
        for (int y = y0; y <= y1; ++y) {
            const double dy = y - pt.row;
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - pt.col;
                const double d2 = dy * dy + dx * dx;
                if (d2 > r2max) continue;
                const float v = static_cast<float>(std::exp(-d2 * inv));
                float& cell = out.at(0, y, x);
                if (v > cell) cell = v;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// per-pixel channel argmax, ties toward the lowest channel index
// ---------------------------------------------------------------------------

inline LabelGrid argmax_channel(const Tensor3& logits) {
    if (logits.channels < 1)
        throw std::invalid_argument("argmax_channel: need at least one channel");
    LabelGrid out(logits.height, logits.width);
    const size_t plane = logits.plane();
    for (size_t i = 0; i < plane; ++i) {
        int best = 0;
        float best_v = logits.data[i];
        for (int c = 1; c < logits.channels; ++c) {
            const float v = logits.data[c * plane + i];
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        out.data[i] = static_cast<uint32_t>(best);
    }
    return out;
}

}  // namespace pano
