#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fws/errors.hpp"
#include "fws/rng.hpp"
#include "fws/tensor.hpp"

namespace fws {

// ---------------------------------------------------------------------------
// Architecture description
// ---------------------------------------------------------------------------

enum class LayerKind : std::uint8_t { conv2d, relu, maxpool, flatten, dense, l2norm };

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int kernel_h = 0, kernel_w = 0;  // conv2d kernel / maxpool window
    int stride = 1;
    int pad = 0;           // conv2d only, symmetric zero padding
    int out_channels = 0;  // conv2d only
    int out_width = 0;     // dense only

    static LayerSpec conv(int kh, int kw, int stride, int pad, int out_channels) {
        LayerSpec s;
        s.kind = LayerKind::conv2d;
        s.kernel_h = kh;
        s.kernel_w = kw;
        s.stride = stride;
        s.pad = pad;
        s.out_channels = out_channels;
        return s;
    }
    static LayerSpec relu() { return LayerSpec{}; }
    static LayerSpec maxpool(int wh, int ww, int stride) {
        LayerSpec s;
        s.kind = LayerKind::maxpool;
        s.kernel_h = wh;
        s.kernel_w = ww;
        s.stride = stride;
        return s;
    }
    static LayerSpec flatten() {
        LayerSpec s;
        s.kind = LayerKind::flatten;
        return s;
    }
    static LayerSpec dense(int out_width) {
        LayerSpec s;
        s.kind = LayerKind::dense;
        s.out_width = out_width;
        return s;
    }
    static LayerSpec l2norm() {
        LayerSpec s;
        s.kind = LayerKind::l2norm;
        return s;
    }
};

// Shape of the data flowing between layers. Flat vectors (after flatten) are
// carried as 1 x 1 x len.
struct LayerShape {
    int h = 0, w = 0, c = 0;
    bool flat = false;
    int len() const { return h * w * c; }
};

struct NetSpec {
    int input_h = 200;  // packets per sample
    int input_w = 60;   // amplitude + phase columns
    int input_c = 3;    // antenna pairs
    std::vector<LayerSpec> layers;
    // Optional stabilizer added to the final norm's denominator. The default
    // 0 keeps exact unit-norm semantics and treats a zero pre-norm vector as
    // an error; a positive value trades that guarantee for totality.
    double l2_epsilon = 0.0;

    // Output shape of each layer in order; validates the whole chain.
    std::vector<LayerShape> chain() const {
        if (input_h < 1 || input_w < 1 || input_c < 1) {
            throw ConfigError("net: input dimensions must be positive");
        }
        if (l2_epsilon < 0.0) throw ConfigError("net: l2 epsilon must be >= 0");
        if (layers.empty()) throw ConfigError("net: no layers");
        std::vector<LayerShape> out;
        LayerShape cur{input_h, input_w, input_c, false};
        for (std::size_t li = 0; li < layers.size(); ++li) {
            const LayerSpec& l = layers[li];
            const std::string where = "net layer " + std::to_string(li);
            switch (l.kind) {
                case LayerKind::conv2d: {
                    if (cur.flat) throw ConfigError(where + ": conv2d needs spatial input");
                    if (l.kernel_h < 1 || l.kernel_w < 1 || l.stride < 1 || l.pad < 0 ||
                        l.out_channels < 1) {
                        throw ConfigError(where + ": bad conv2d geometry");
                    }
                    const int oh = (cur.h + 2 * l.pad - l.kernel_h) / l.stride + 1;
                    const int ow = (cur.w + 2 * l.pad - l.kernel_w) / l.stride + 1;
                    if (cur.h + 2 * l.pad < l.kernel_h || cur.w + 2 * l.pad < l.kernel_w) {
                        throw ConfigError(where + ": kernel larger than padded input");
                    }
                    cur = LayerShape{oh, ow, l.out_channels, false};
                    break;
                }
                case LayerKind::relu:
                    break;  // shape unchanged, works on flat and spatial data
                case LayerKind::maxpool: {
                    if (cur.flat) throw ConfigError(where + ": maxpool needs spatial input");
                    if (l.kernel_h < 1 || l.kernel_w < 1 || l.stride < 1) {
                        throw ConfigError(where + ": bad maxpool geometry");
                    }
                    if (cur.h < l.kernel_h || cur.w < l.kernel_w) {
                        throw ConfigError(where + ": window larger than input");
                    }
                    const int oh = (cur.h - l.kernel_h) / l.stride + 1;
                    const int ow = (cur.w - l.kernel_w) / l.stride + 1;
                    cur = LayerShape{oh, ow, cur.c, false};
                    break;
                }
                case LayerKind::flatten:
                    if (cur.flat) throw ConfigError(where + ": input already flat");
                    cur = LayerShape{1, 1, cur.len(), true};
                    break;
                case LayerKind::dense:
                    if (!cur.flat) throw ConfigError(where + ": dense needs flattened input");
                    if (l.out_width < 1) throw ConfigError(where + ": bad dense width");
                    cur = LayerShape{1, 1, l.out_width, true};
                    break;
                case LayerKind::l2norm:
                    if (!cur.flat) throw ConfigError(where + ": l2norm needs flattened input");
                    if (li + 1 != layers.size()) {
                        throw ConfigError(where + ": l2norm must be the final layer");
                    }
                    break;
            }
            out.push_back(cur);
        }
        if (layers.back().kind != LayerKind::l2norm) {
            throw ConfigError("net: final layer must be l2norm");
        }
        if (out.back().len() < 2) throw ConfigError("net: embedding dimension must be >= 2");
        return out;
    }

    void validate() const { (void)chain(); }

    int embedding_dim() const { return chain().back().len(); }

    // Small net used throughout the test suite and the synthetic benchmarks:
    // two conv blocks into a 32-wide normalized embedding.
    static NetSpec desk_scale(int input_h = 200, int input_w = 60, int input_c = 3) {
        NetSpec s;
        s.input_h = input_h;
        s.input_w = input_w;
        s.input_c = input_c;
        s.layers = {
            LayerSpec::conv(5, 5, 2, 2, 8),  LayerSpec::relu(), LayerSpec::maxpool(2, 2, 2),
            LayerSpec::conv(3, 3, 2, 1, 16), LayerSpec::relu(), LayerSpec::maxpool(2, 2, 2),
            LayerSpec::flatten(),            LayerSpec::dense(32), LayerSpec::l2norm()};
        return s;
    }

    // Documented default at full input scale: five conv blocks and two dense
    // layers into a 128-wide normalized embedding.
    static NetSpec paper_scale(int input_h = 200, int input_w = 60, int input_c = 3) {
        NetSpec s;
        s.input_h = input_h;
        s.input_w = input_w;
        s.input_c = input_c;
        s.layers = {LayerSpec::conv(5, 5, 2, 2, 32), LayerSpec::relu(),
                    LayerSpec::maxpool(3, 3, 2),
                    LayerSpec::conv(3, 3, 1, 1, 64), LayerSpec::relu(),
                    LayerSpec::maxpool(3, 3, 2),
                    LayerSpec::conv(3, 3, 1, 1, 96), LayerSpec::relu(),
                    LayerSpec::conv(3, 3, 1, 1, 96), LayerSpec::relu(),
                    LayerSpec::conv(3, 3, 1, 1, 64), LayerSpec::relu(),
                    LayerSpec::maxpool(3, 3, 2),
                    LayerSpec::flatten(),
                    LayerSpec::dense(256),           LayerSpec::relu(),
                    LayerSpec::dense(128),           LayerSpec::l2norm()};
        return s;
    }
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct LayerParams {
    std::vector<double> w, b;
};

// All trainable state: one (possibly empty) weight/bias pair per layer, plus
// the optional classifier head W [n x classes] stored row-major with the
// class index fastest. The head maps column g to label head_class_order[g].
struct Params {
    std::vector<LayerParams> layers;
    std::vector<double> head;
    std::vector<int> head_class_order;

    bool has_head() const { return !head.empty(); }
    int head_classes() const { return static_cast<int>(head_class_order.size()); }

    static Params zeros_like(const Params& p) {
        Params z;
        z.layers.resize(p.layers.size());
        for (std::size_t i = 0; i < p.layers.size(); ++i) {
            z.layers[i].w.assign(p.layers[i].w.size(), 0.0);
            z.layers[i].b.assign(p.layers[i].b.size(), 0.0);
        }
        z.head.assign(p.head.size(), 0.0);
        z.head_class_order = p.head_class_order;
        return z;
    }

    std::size_t scalar_count() const {
        std::size_t n = head.size();
        for (const auto& l : layers) n += l.w.size() + l.b.size();
        return n;
    }

    void check_finite() const {
        auto scan = [](const std::vector<double>& v) {
            for (double x : v) {
                if (!std::isfinite(x)) throw NumericError("non-finite parameter value");
            }
        };
        for (const auto& l : layers) {
            scan(l.w);
            scan(l.b);
        }
        scan(head);
    }
};

namespace detail {

inline std::size_t conv_w_size(const LayerSpec& l, int in_c) {
    return static_cast<std::size_t>(l.out_channels) * l.kernel_h * l.kernel_w * in_c;
}

}  // namespace detail

// He-style initialization: weights ~ N(0, 2/fan_in), biases zero, each layer
// on its own derived stream so architectures can grow without reshuffling.
inline Params init_params(const NetSpec& spec, std::uint64_t seed) {
    const auto shapes = spec.chain();
    Params p;
    p.layers.resize(spec.layers.size());
    LayerShape in{spec.input_h, spec.input_w, spec.input_c, false};
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerSpec& l = spec.layers[li];
        Rng r(derive_seed(seed, 0x1417, li));
        if (l.kind == LayerKind::conv2d) {
            const int fan_in = l.kernel_h * l.kernel_w * in.c;
            const double std_dev = std::sqrt(2.0 / fan_in);
            p.layers[li].w.resize(detail::conv_w_size(l, in.c));
            for (double& x : p.layers[li].w) x = r.normal(0.0, std_dev);
            p.layers[li].b.assign(static_cast<std::size_t>(l.out_channels), 0.0);
        } else if (l.kind == LayerKind::dense) {
            const int fan_in = in.len();
            const double std_dev = std::sqrt(2.0 / fan_in);
            p.layers[li].w.resize(static_cast<std::size_t>(l.out_width) * fan_in);
            for (double& x : p.layers[li].w) x = r.normal(0.0, std_dev);
            p.layers[li].b.assign(static_cast<std::size_t>(l.out_width), 0.0);
        }
        in = shapes[li];
    }
    return p;
}

// Attaches a classifier head for `class_order` (one column per label, in the
// given order), N(0, 1/n) init.
inline void attach_head(Params& p, int embedding_dim, std::vector<int> class_order,
                        std::uint64_t seed) {
    if (class_order.size() < 2) throw ConfigError("head needs at least 2 classes");
    for (std::size_t i = 1; i < class_order.size(); ++i) {
        if (class_order[i] <= class_order[i - 1]) {
            throw ConfigError("head class order must be strictly increasing");
        }
    }
    Rng r(derive_seed(seed, 0x4EAD));
    p.head_class_order = std::move(class_order);
    p.head.resize(static_cast<std::size_t>(embedding_dim) * p.head_class_order.size());
    const double std_dev = std::sqrt(1.0 / embedding_dim);
    for (double& x : p.head) x = r.normal(0.0, std_dev);
}

// Drops the classifier head, leaving the pure feature extractor.
inline void strip_head(Params& p) {
    p.head.clear();
    p.head_class_order.clear();
}

// ---------------------------------------------------------------------------
// Layer kernels
// ---------------------------------------------------------------------------

namespace detail {

inline void conv_forward(const Tensor& in, const LayerSpec& l, const std::vector<double>& w,
                         const std::vector<double>& b, Tensor& out) {
    for (int oy = 0; oy < out.h; ++oy) {
        for (int ox = 0; ox < out.w; ++ox) {
            for (int oc = 0; oc < out.c; ++oc) {
                double acc = b[static_cast<std::size_t>(oc)];
                for (int ky = 0; ky < l.kernel_h; ++ky) {
                    const int iy = oy * l.stride - l.pad + ky;
                    if (iy < 0 || iy >= in.h) continue;
                    for (int kx = 0; kx < l.kernel_w; ++kx) {
                        const int ix = ox * l.stride - l.pad + kx;
                        if (ix < 0 || ix >= in.w) continue;
                        const std::size_t wbase =
                            ((static_cast<std::size_t>(oc) * l.kernel_h + ky) * l.kernel_w + kx) *
                            in.c;
                        const std::size_t ibase = (static_cast<std::size_t>(iy) * in.w + ix) * in.c;
                        for (int ci = 0; ci < in.c; ++ci) {
                            acc += in.v[ibase + ci] * w[wbase + ci];
                        }
                    }
                }
                out.at(oy, ox, oc) = acc;
            }
        }
    }
}

inline void conv_backward(const Tensor& in, const LayerSpec& l, const std::vector<double>& w,
                          const Tensor& gout, Tensor& gin, std::vector<double>& gw,
                          std::vector<double>& gb) {
    for (int oy = 0; oy < gout.h; ++oy) {
        for (int ox = 0; ox < gout.w; ++ox) {
            for (int oc = 0; oc < gout.c; ++oc) {
                const double g = gout.at(oy, ox, oc);
                gb[static_cast<std::size_t>(oc)] += g;
                for (int ky = 0; ky < l.kernel_h; ++ky) {
                    const int iy = oy * l.stride - l.pad + ky;
                    if (iy < 0 || iy >= in.h) continue;
                    for (int kx = 0; kx < l.kernel_w; ++kx) {
                        const int ix = ox * l.stride - l.pad + kx;
                        if (ix < 0 || ix >= in.w) continue;
                        const std::size_t wbase =
                            ((static_cast<std::size_t>(oc) * l.kernel_h + ky) * l.kernel_w + kx) *
                            in.c;
                        const std::size_t ibase = (static_cast<std::size_t>(iy) * in.w + ix) * in.c;
                        for (int ci = 0; ci < in.c; ++ci) {
                            gw[wbase + ci] += g * in.v[ibase + ci];
                            gin.v[ibase + ci] += g * w[wbase + ci];
                        }
                    }
                }
            }
        }
    }
}

inline void maxpool_forward(const Tensor& in, const LayerSpec& l, Tensor& out,
                            std::vector<std::size_t>& argmax) {
    argmax.resize(out.size());
    for (int oy = 0; oy < out.h; ++oy) {
        for (int ox = 0; ox < out.w; ++ox) {
            for (int ch = 0; ch < out.c; ++ch) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_idx = 0;
                for (int ky = 0; ky < l.kernel_h; ++ky) {
                    const int iy = oy * l.stride + ky;
                    for (int kx = 0; kx < l.kernel_w; ++kx) {
                        const int ix = ox * l.stride + kx;
                        const std::size_t idx = (static_cast<std::size_t>(iy) * in.w + ix) * in.c + ch;
                        if (in.v[idx] > best) {  // strict: first maximum wins ties
                            best = in.v[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t oidx = (static_cast<std::size_t>(oy) * out.w + ox) * out.c + ch;
                out.v[oidx] = best;
                argmax[oidx] = best_idx;
            }
        }
    }
}

inline void maxpool_backward(const std::vector<std::size_t>& argmax, const Tensor& gout,
                             Tensor& gin) {
    for (std::size_t i = 0; i < gout.size(); ++i) {
        gin.v[argmax[i]] += gout.v[i];
    }
}

inline void dense_forward(const Tensor& in, const std::vector<double>& w,
                          const std::vector<double>& b, Tensor& out) {
    const std::size_t in_len = in.size();
    for (int o = 0; o < out.c; ++o) {
        double acc = b[static_cast<std::size_t>(o)];
        const std::size_t base = static_cast<std::size_t>(o) * in_len;
        for (std::size_t i = 0; i < in_len; ++i) acc += w[base + i] * in.v[i];
        out.v[static_cast<std::size_t>(o)] = acc;
    }
}

inline void dense_backward(const Tensor& in, const std::vector<double>& w, const Tensor& gout,
                           Tensor& gin, std::vector<double>& gw, std::vector<double>& gb) {
    const std::size_t in_len = in.size();
    for (std::size_t o = 0; o < gout.size(); ++o) {
        const double g = gout.v[o];
        gb[o] += g;
        const std::size_t base = o * in_len;
        for (std::size_t i = 0; i < in_len; ++i) {
            gw[base + i] += g * in.v[i];
            gin.v[i] += g * w[base + i];
        }
    }
}

// out = x / (||x|| + eps). Returns ||x|| for the backward pass.
inline double l2norm_forward(const Tensor& in, double eps, Tensor& out) {
    double sq = 0.0;
    for (double x : in.v) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm == 0.0 && eps == 0.0) {
        throw NumericError("degenerate embedding: zero vector reached the norm layer");
    }
    const double denom = norm + eps;
    for (std::size_t i = 0; i < in.v.size(); ++i) out.v[i] = in.v[i] / denom;
    return norm;
}

// With u = out and t = ||x|| + eps:  dL/dx = gout/t - u * (u . gout)/||x||.
// At eps = 0 this is the familiar (I - u u^T)/||x|| Jacobian applied to gout.
inline void l2norm_backward(const Tensor& out, double norm, double eps, const Tensor& gout,
                            Tensor& gin) {
    const double t = norm + eps;
    if (norm == 0.0) {  // only reachable in eps-mode: x/(~0 + eps) ~ x/eps
        for (std::size_t i = 0; i < gout.size(); ++i) gin.v[i] = gout.v[i] / eps;
        return;
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < gout.size(); ++i) dot += out.v[i] * gout.v[i];
    const double scale = dot / norm;
    for (std::size_t i = 0; i < gout.size(); ++i) {
        gin.v[i] = gout.v[i] / t - out.v[i] * scale;
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward / backward over a whole net
// ---------------------------------------------------------------------------

// Per-sample forward state kept for backpropagation. activations[0] is the
// input; activations[i+1] the output of layer i.
struct ForwardCache {
    std::vector<Tensor> activations;
    std::vector<std::vector<std::size_t>> pool_argmax;  // parallel to layers
    double prenorm_norm = 0.0;
};

namespace detail {

inline void check_params_match(const NetSpec& spec, const Params& p) {
    if (p.layers.size() != spec.layers.size()) {
        throw StateError("params do not match net: layer count differs");
    }
}

inline Tensor run_forward(const Params& p, const NetSpec& spec, const Tensor& x,
                          ForwardCache* cache) {
    const auto shapes = spec.chain();
    check_params_match(spec, p);
    if (x.h != spec.input_h || x.w != spec.input_w || x.c != spec.input_c) {
        throw ConfigError("forward: input shape " + std::to_string(x.h) + "x" +
                          std::to_string(x.w) + "x" + std::to_string(x.c) +
                          " does not match net input " + std::to_string(spec.input_h) + "x" +
                          std::to_string(spec.input_w) + "x" + std::to_string(spec.input_c));
    }
    if (cache) {
        cache->activations.clear();
        cache->activations.reserve(spec.layers.size() + 1);
        cache->activations.push_back(x);
        cache->pool_argmax.assign(spec.layers.size(), {});
    }

    Tensor cur = x;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerSpec& l = spec.layers[li];
        const LayerShape& os = shapes[li];
        Tensor out(os.h, os.w, os.c);
        switch (l.kind) {
            case LayerKind::conv2d:
                conv_forward(cur, l, p.layers[li].w, p.layers[li].b, out);
                break;
            case LayerKind::relu:
                for (std::size_t i = 0; i < cur.size(); ++i) out.v[i] = std::max(0.0, cur.v[i]);
                break;
            case LayerKind::maxpool: {
                std::vector<std::size_t> argmax;
                maxpool_forward(cur, l, out, argmax);
                if (cache) cache->pool_argmax[li] = std::move(argmax);
                break;
            }
            case LayerKind::flatten:
                out.v = cur.v;  // row-major layout is already the flat order
                break;
            case LayerKind::dense:
                dense_forward(cur, p.layers[li].w, p.layers[li].b, out);
                break;
            case LayerKind::l2norm: {
                const double norm = l2norm_forward(cur, spec.l2_epsilon, out);
                if (cache) cache->prenorm_norm = norm;
                break;
            }
        }
        cur = std::move(out);
        if (cache) cache->activations.push_back(cur);
    }
    return cur;
}

// Backpropagates d(loss)/d(embedding) through every layer, accumulating into
// `grads` (which must be zeros_like or an accumulator of matching shape).
inline void run_backward(const Params& p, const NetSpec& spec, const ForwardCache& cache,
                         const Tensor& d_embedding, Params& grads) {
    Tensor gout = d_embedding;
    for (std::size_t li = spec.layers.size(); li-- > 0;) {
        const LayerSpec& l = spec.layers[li];
        const Tensor& in = cache.activations[li];
        const Tensor& out = cache.activations[li + 1];
        Tensor gin(in.h, in.w, in.c);
        switch (l.kind) {
            case LayerKind::conv2d:
                conv_backward(in, l, p.layers[li].w, gout, gin, grads.layers[li].w,
                              grads.layers[li].b);
                break;
            case LayerKind::relu:
                for (std::size_t i = 0; i < in.size(); ++i) {
                    gin.v[i] = in.v[i] > 0.0 ? gout.v[i] : 0.0;
                }
                break;
            case LayerKind::maxpool:
                maxpool_backward(cache.pool_argmax[li], gout, gin);
                break;
            case LayerKind::flatten:
                gin.v = gout.v;
                break;
            case LayerKind::dense:
                dense_backward(in, p.layers[li].w, gout, gin, grads.layers[li].w,
                               grads.layers[li].b);
                break;
            case LayerKind::l2norm:
                l2norm_backward(out, cache.prenorm_norm, spec.l2_epsilon, gout, gin);
                break;
        }
        gout = std::move(gin);
    }
}

}  // namespace detail

// Embeds one input: returns f(x) / ||f(x)||, a unit vector of length
// embedding_dim (exactly unit up to rounding when l2_epsilon is 0).
inline std::vector<double> forward_features(const Params& p, const NetSpec& spec,
                                            const Tensor& x) {
    return detail::run_forward(p, spec, x, nullptr).v;
}

inline std::vector<double> forward_features(const Params& p, const NetSpec& spec,
                                            const CsiTensor& x) {
    return detail::run_forward(p, spec, x.data, nullptr).v;
}

// v = W^T f : one logit per head column.
inline std::vector<double> classify_logits(const Params& p, const std::vector<double>& features) {
    if (!p.has_head()) throw StateError("classify_logits: no classifier head attached");
    const int G = p.head_classes();
    const std::size_t n = features.size();
    if (p.head.size() != n * static_cast<std::size_t>(G)) {
        throw StateError("classify_logits: feature length does not match head");
    }
    std::vector<double> v(static_cast<std::size_t>(G), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double f = features[i];
        const std::size_t base = i * static_cast<std::size_t>(G);
        for (int g = 0; g < G; ++g) v[static_cast<std::size_t>(g)] += p.head[base + g] * f;
    }
    return v;
}

// Max-subtracted softmax: positive, sums to 1, argmax preserved, no overflow.
inline std::vector<double> softmax(const std::vector<double>& v) {
    if (v.empty()) throw ConfigError("softmax: empty input");
    double mx = v[0];
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError("softmax: non-finite logit");
        mx = std::max(mx, x);
    }
    std::vector<double> p(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        p[i] = std::exp(v[i] - mx);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

// One training example: an input block and its head column index (0..G-1).
struct TrainExample {
    const Tensor* x = nullptr;
    int y = -1;
};

// Mean softmax cross-entropy over the batch plus gradients for every
// parameter (head always; extractor layers unless head_only). Gradients are
// ACCUMULATED into `grads`, so pass zeros for a fresh evaluation.
inline double loss_and_gradients(const Params& p, const NetSpec& spec,
                                 const std::vector<TrainExample>& batch, Params& grads,
                                 bool head_only = false) {
    if (!p.has_head()) throw StateError("loss_and_gradients: no classifier head attached");
    if (batch.empty()) throw ConfigError("loss_and_gradients: empty batch");
    const int G = p.head_classes();
    const std::size_t n = p.head.size() / static_cast<std::size_t>(G);
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    double loss_sum = 0.0;
    ForwardCache cache;
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        const TrainExample& ex = batch[bi];
        if (ex.y < 0 || ex.y >= G) {
            throw ConfigError("loss_and_gradients: label index " + std::to_string(ex.y) +
                              " outside head range");
        }
        const Tensor emb = detail::run_forward(p, spec, *ex.x, head_only ? nullptr : &cache);
        const std::vector<double> v = classify_logits(p, emb.v);

        double mx = v[0];
        for (double x : v) mx = std::max(mx, x);
        double sum = 0.0;
        for (double x : v) sum += std::exp(x - mx);
        const double lse = mx + std::log(sum);
        const double sample_loss = lse - v[static_cast<std::size_t>(ex.y)];
        if (!std::isfinite(sample_loss)) {
            throw NumericError("loss_and_gradients: non-finite loss at batch index " +
                               std::to_string(bi));
        }
        loss_sum += sample_loss;

        // d(loss)/d(logit_g) = softmax_g - [g == y], scaled by the batch mean.
        std::vector<double> dv(static_cast<std::size_t>(G));
        for (int g = 0; g < G; ++g) {
            dv[static_cast<std::size_t>(g)] =
                (std::exp(v[static_cast<std::size_t>(g)] - mx) / sum -
                 (g == ex.y ? 1.0 : 0.0)) *
                inv_b;
        }

        Tensor d_emb(1, 1, static_cast<int>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t base = i * static_cast<std::size_t>(G);
            double acc = 0.0;
            for (int g = 0; g < G; ++g) {
                grads.head[base + g] += emb.v[i] * dv[static_cast<std::size_t>(g)];
                acc += p.head[base + g] * dv[static_cast<std::size_t>(g)];
            }
            d_emb.v[i] = acc;
        }
        if (!head_only) {
            detail::run_backward(p, spec, cache, d_emb, grads);
        }
    }
    return loss_sum * inv_b;
}

// Convenience: mean cross-entropy without touching gradients.
inline double batch_loss(const Params& p, const NetSpec& spec,
                         const std::vector<TrainExample>& batch) {
    if (!p.has_head()) throw StateError("batch_loss: no classifier head attached");
    if (batch.empty()) throw ConfigError("batch_loss: empty batch");
    const int G = p.head_classes();
    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        const TrainExample& ex = batch[bi];
        if (ex.y < 0 || ex.y >= G) throw ConfigError("batch_loss: label index outside head range");
        const std::vector<double> v =
            classify_logits(p, forward_features(p, spec, *ex.x));
        double mx = v[0];
        for (double x : v) mx = std::max(mx, x);
        double sum = 0.0;
        for (double x : v) sum += std::exp(x - mx);
        const double sample_loss = mx + std::log(sum) - v[static_cast<std::size_t>(ex.y)];
        if (!std::isfinite(sample_loss)) {
            throw NumericError("batch_loss: non-finite loss at batch index " + std::to_string(bi));
        }
        loss_sum += sample_loss;
    }
    return loss_sum / static_cast<double>(batch.size());
}

}  // namespace fws
