// Forward-only pyramidal-fusion network: a shared residual backbone applied
// to every level of an image pyramid, shared 1x1 skip projections, a
// fuse-and-upsample path, and three dense prediction heads.
//
// Every convolution lives inside a pre-activation unit (normalize, rectify,
// convolve). Normalization runs in inference mode with seeded parameters;
// there is no training loop, so gradients exist only for the losses.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pano/pixelgrid.hpp"
#include "pano/predictions.hpp"
#include "pano/rng.hpp"

namespace pano {

struct NetConfig {
    int pyramid_levels = 3;   // L in {1, 2, 3}
    int base_channels = 8;    // backbone stage widths c, 2c, 4c, 8c
    int upsample_channels = 32;
    int num_classes = 5;
    uint64_t seed = 0;
    // Fig-style color rule: skip projections shared across pyramid levels.
    // Disable to give every (level, stage) pair its own projection.
    bool share_skip_projections = true;

    void validate() const {
        if (pyramid_levels < 1 || pyramid_levels > 3)
            throw std::invalid_argument("NetConfig: pyramid_levels must be 1, 2 or 3");
        if (base_channels < 1 || upsample_channels < 1 || num_classes < 1)
            throw std::invalid_argument("NetConfig: channel counts must be positive");
    }

    // input H and W must divide by this
    int stride_requirement() const { return 32 << (pyramid_levels - 1); }
    int upsample_module_count() const { return 2 + pyramid_levels; }
};

struct NormParams {
    std::vector<float> gamma, beta, mean, var;

    explicit NormParams(int channels = 0)
        : gamma(channels, 1.0f), beta(channels, 0.0f),
          mean(channels, 0.0f), var(channels, 1.0f) {}
};

// BN-ReLU-Conv pre-activation unit; the norm acts on the conv input.
struct ConvUnit {
    NormParams norm;
    Conv2dParams conv;

    ConvUnit() = default;
    ConvUnit(int in_ch, int out_ch, int k)
        : norm(in_ch), conv(out_ch, in_ch, k, k) {}
};

struct ResidualBlock {
    ConvUnit unit1, unit2;
    std::optional<ConvUnit> shortcut;  // 1x1 projection on downsampling blocks
    int stride = 1;
};

struct Backbone {
    ConvUnit stem;  // 7x7 stride 2, then 2x2 max-pool
    std::array<std::array<ResidualBlock, 2>, 4> stages;
};

struct NetParams {
    NetConfig cfg;
    Backbone backbone;
    std::vector<ConvUnit> skip_proj;  // [stage] shared, else [level*4 + stage]
    std::vector<ConvUnit> upsample;   // (2 + L) 3x3 units at D channels
    ConvUnit head_sem, head_cen, head_off;
};

namespace detail {

inline constexpr double kNormEps = 1e-5;

inline Tensor3 apply_unit(const Tensor3& x, const ConvUnit& u, int stride, int pad) {
    if (static_cast<int>(u.norm.gamma.size()) != x.channels)
        throw std::invalid_argument("apply_unit: normalization width mismatch");
    Tensor3 a(x.channels, x.height, x.width);
    const size_t plane = x.plane();
    for (int c = 0; c < x.channels; ++c) {
        const double scale = u.norm.gamma[c] / std::sqrt(u.norm.var[c] + kNormEps);
        const double shift = u.norm.beta[c] - u.norm.mean[c] * scale;
        const float* src = &x.data[c * plane];
        float* dst = &a.data[c * plane];
        for (size_t i = 0; i < plane; ++i) {
            const float v = static_cast<float>(src[i] * scale + shift);
            dst[i] = v > 0.0f ? v : 0.0f;
        }
    }
    return conv2d(a, u.conv, stride, pad);
}

inline Tensor3 maxpool_2x2(const Tensor3& x) {
    if (x.height % 2 != 0 || x.width % 2 != 0)
        throw std::invalid_argument("maxpool_2x2: odd input dimensions");
    Tensor3 out(x.channels, x.height / 2, x.width / 2);
    for (int c = 0; c < x.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x2 = 0; x2 < out.width; ++x2) {
                const float a = x.at(c, 2 * y, 2 * x2);
                const float b = x.at(c, 2 * y, 2 * x2 + 1);
                const float d = x.at(c, 2 * y + 1, 2 * x2);
                const float e = x.at(c, 2 * y + 1, 2 * x2 + 1);
                out.at(c, y, x2) = std::max(std::max(a, b), std::max(d, e));
            }
    return out;
}

inline Tensor3 residual_forward(const Tensor3& x, const ResidualBlock& b) {
    Tensor3 main = apply_unit(x, b.unit1, b.stride, 1);
    main = apply_unit(main, b.unit2, 1, 1);
    if (b.shortcut) {
        Tensor3 skip = apply_unit(x, *b.shortcut, b.stride, 0);
        if (!skip.same_shape(main))
            throw std::runtime_error("residual_forward: shortcut shape mismatch");
        for (size_t i = 0; i < main.size(); ++i) main.data[i] += skip.data[i];
    } else {
        if (!x.same_shape(main))
            throw std::runtime_error("residual_forward: identity shape mismatch");
        for (size_t i = 0; i < main.size(); ++i) main.data[i] += x.data[i];
    }
    return main;
}

}  // namespace detail

// Visits every pre-activation unit with a stable hierarchical name; the
// traversal order defines both initialization and serialization layout.
template <typename Fn>
void for_each_unit(NetParams& p, Fn&& fn) {
    fn("backbone.stem", p.backbone.stem);
    for (int s = 0; s < 4; ++s)
        for (int b = 0; b < 2; ++b) {
            const std::string base =
                "backbone.stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
            fn(base + ".u1", p.backbone.stages[s][b].unit1);
            fn(base + ".u2", p.backbone.stages[s][b].unit2);
            if (p.backbone.stages[s][b].shortcut)
                fn(base + ".shortcut", *p.backbone.stages[s][b].shortcut);
        }
    for (size_t i = 0; i < p.skip_proj.size(); ++i)
        fn("skip" + std::to_string(i), p.skip_proj[i]);
    for (size_t i = 0; i < p.upsample.size(); ++i)
        fn("up" + std::to_string(i), p.upsample[i]);
    fn("head.sem", p.head_sem);
    fn("head.cen", p.head_cen);
    fn("head.off", p.head_off);
}

template <typename Fn>
void for_each_unit(const NetParams& p, Fn&& fn) {
    for_each_unit(const_cast<NetParams&>(p), [&](const std::string& name, ConvUnit& u) {
        fn(name, static_cast<const ConvUnit&>(u));
    });
}

// Visits every parameter buffer (norm then conv, per unit).
template <typename Params, typename Fn>
void for_each_buffer(Params& p, Fn&& fn) {
    for_each_unit(p, [&](const std::string& name, auto& u) {
        fn(name + ".norm.gamma", u.norm.gamma);
        fn(name + ".norm.beta", u.norm.beta);
        fn(name + ".norm.mean", u.norm.mean);
        fn(name + ".norm.var", u.norm.var);
        fn(name + ".conv.weight", u.conv.weight);
        fn(name + ".conv.bias", u.conv.bias);
    });
}

inline size_t count_buffers(const NetParams& p) {
    size_t n = 0;
    for_each_buffer(p, [&](const std::string&, const std::vector<float>&) { ++n; });
    return n;
}

inline size_t count_scalars(const NetParams& p) {
    size_t n = 0;
    for_each_buffer(p, [&](const std::string&, const std::vector<float>& b) { n += b.size(); });
    return n;
}

// Seeded He fan-in initialization for conv weights; normalization starts at
// identity (scale 1, shift 0, mean 0, variance 1).
inline NetParams init_params(const NetConfig& cfg) {
    cfg.validate();
    NetParams p;
    p.cfg = cfg;
    const int c = cfg.base_channels;
    const int D = cfg.upsample_channels;

    p.backbone.stem = ConvUnit(3, c, 7);
    int in_ch = c;
    for (int s = 0; s < 4; ++s) {
        const int out_ch = c << s;
        for (int b = 0; b < 2; ++b) {
            ResidualBlock& blk = p.backbone.stages[s][b];
            const bool down = s > 0 && b == 0;
            const int block_in = b == 0 ? in_ch : out_ch;
            blk.stride = down ? 2 : 1;
            blk.unit1 = ConvUnit(block_in, out_ch, 3);
            blk.unit2 = ConvUnit(out_ch, out_ch, 3);
            if (down) blk.shortcut = ConvUnit(block_in, out_ch, 1);
        }
        in_ch = out_ch;
    }

    const int n_proj = cfg.share_skip_projections ? 4 : 4 * cfg.pyramid_levels;
    for (int i = 0; i < n_proj; ++i) {
        const int stage = cfg.share_skip_projections ? i : i % 4;
        p.skip_proj.push_back(ConvUnit(c << stage, D, 1));
    }
    for (int i = 0; i < cfg.upsample_module_count(); ++i)
        p.upsample.push_back(ConvUnit(D, D, 3));
    p.head_sem = ConvUnit(D, cfg.num_classes, 1);
    p.head_cen = ConvUnit(D, 1, 1);
    p.head_off = ConvUnit(D, 2, 1);

    Rng rng(cfg.seed);
    for_each_unit(p, [&](const std::string&, ConvUnit& u) {
        const double fan_in =
            static_cast<double>(u.conv.in_channels) * u.conv.kh * u.conv.kw;
        const double std_dev = std::sqrt(2.0 / fan_in);
        for (auto& w : u.conv.weight) w = static_cast<float>(rng.normal() * std_dev);
    });
    return p;
}

inline std::vector<Tensor3> build_pyramid(const Tensor3& image, int levels) {
    if (levels < 1 || levels > 3)
        throw std::invalid_argument("build_pyramid: levels must be 1, 2 or 3");
    const int req = 32 << (levels - 1);
    if (image.height % req != 0 || image.width % req != 0)
        throw std::invalid_argument("build_pyramid: dimensions must divide by " +
                                    std::to_string(req));
    std::vector<Tensor3> out;
    out.push_back(image);
    for (int k = 1; k < levels; ++k)
        out.push_back(bilinear_resize(image, image.height >> k, image.width >> k));
    return out;
}

// Four feature tensors at /4, /8, /16, /32 of the given image.
inline std::array<Tensor3, 4> backbone_forward(const Tensor3& image, const NetParams& p) {
    if (image.height % 32 != 0 || image.width % 32 != 0)
        throw std::invalid_argument("backbone_forward: dimensions must divide by 32");
    std::array<Tensor3, 4> feats;
    Tensor3 x = detail::apply_unit(image, p.backbone.stem, 2, 3);
    x = detail::maxpool_2x2(x);
    for (int s = 0; s < 4; ++s) {
        for (const ResidualBlock& b : p.backbone.stages[s])
            x = detail::residual_forward(x, b);
        feats[s] = x;
    }
    return feats;
}

struct ForwardTrace {
    int modules_executed = 0;
    std::vector<int> strides_visited;  // overall stride at each fusion stage
};

// The fuse-and-upsample path: backbone features of every pyramid level are
// projected to D channels and summed into the path at the stage whose overall
// stride they match; each stage then applies a 3x3 unit and upsamples 2x.
// Output stride is 4 with respect to the original input.
inline Tensor3 pyramid_fuse_forward(const Tensor3& image, const NetParams& p,
                                    ForwardTrace* trace = nullptr) {
    const NetConfig& cfg = p.cfg;
    cfg.validate();
    const int L = cfg.pyramid_levels;
    const auto pyramid = build_pyramid(image, L);

    std::vector<std::array<Tensor3, 4>> feats;
    feats.reserve(L);
    for (const Tensor3& level : pyramid) feats.push_back(backbone_forward(level, p));

    const int start_stride = 32 << (L - 1);
    Tensor3 current(cfg.upsample_channels, image.height / start_stride,
                    image.width / start_stride);
    if (trace) *trace = ForwardTrace{};

    for (int m = 0; m < cfg.upsample_module_count(); ++m) {
        const int stride = start_stride >> m;
        for (int k = 0; k < L; ++k)
            for (int s = 0; s < 4; ++s) {
                if ((4 << (s + k)) != stride) continue;
                const ConvUnit& proj =
                    cfg.share_skip_projections ? p.skip_proj[s] : p.skip_proj[k * 4 + s];
                Tensor3 projected = detail::apply_unit(feats[k][s], proj, 1, 0);
                if (!projected.same_shape(current))
                    throw std::runtime_error("pyramid_fuse_forward: fusion shape mismatch");
                for (size_t i = 0; i < current.size(); ++i)
                    current.data[i] += projected.data[i];
            }
        current = detail::apply_unit(current, p.upsample[m], 1, 1);
        current = bilinear_resize(current, current.height * 2, current.width * 2);
        if (trace) {
            ++trace->modules_executed;
            trace->strides_visited.push_back(stride);
        }
    }
    return current;
}

// Three independent 1x1 heads on the shared /4 features, each followed by 4x
// bilinear upsampling to full resolution. Center and offset outputs carry no
// activation; offsets are in full-resolution pixel units.
inline PredictionSet heads_forward(const Tensor3& features, const NetParams& p) {
    if (features.channels != p.cfg.upsample_channels)
        throw std::invalid_argument("heads_forward: expected fused features");
    const int H = features.height * 4, W = features.width * 4;
    PredictionSet out;
    out.sem_logits = bilinear_resize(detail::apply_unit(features, p.head_sem, 1, 0), H, W);
    out.center_heatmap =
        bilinear_resize(detail::apply_unit(features, p.head_cen, 1, 0), H, W);
    out.offsets = bilinear_resize(detail::apply_unit(features, p.head_off, 1, 0), H, W);
    return out;
}

inline PredictionSet model_forward(const Tensor3& image, const NetParams& p,
                                   ForwardTrace* trace = nullptr) {
    return heads_forward(pyramid_fuse_forward(image, p, trace), p);
}

}  // namespace pano
