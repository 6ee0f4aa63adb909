#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rklip/errors.hpp"
#include "rklip/image.hpp"
#include "rklip/rng.hpp"
#include "rklip/tensor.hpp"

namespace rklip {

// Shape of the block-structured image encoder: patch embedding, pre-norm
// transformer blocks, final norm, mean pool, linear projection to embed_dim.
struct EncoderConfig {
    int num_blocks = 4;
    int embed_dim = 64;
    int patch_size = 8;
    int heads = 4;
    int input_hw = 32;   // square input side length
    int channels = 3;
    int mlp_ratio = 4;
    int64_t seed = 0;
    std::vector<float> norm_mean;  // per-channel input normalization; empty = 0.5
    std::vector<float> norm_std;   // empty = 0.5

    int tokens_per_side() const { return input_hw / patch_size; }
    int num_tokens() const { return tokens_per_side() * tokens_per_side(); }
    int patch_dim() const { return patch_size * patch_size * channels; }

    void validate() const {
        if (num_blocks <= 0 || embed_dim <= 0 || patch_size <= 0 || heads <= 0 ||
            input_hw <= 0 || channels <= 0 || mlp_ratio <= 0)
            throw config_error("encoder config fields must be positive");
        if (embed_dim % heads != 0)
            throw config_error("embed_dim (" + std::to_string(embed_dim) +
                               ") must be divisible by heads (" + std::to_string(heads) + ")");
        if (input_hw % patch_size != 0)
            throw config_error("input side (" + std::to_string(input_hw) +
                               ") must be divisible by patch_size (" + std::to_string(patch_size) + ")");
        if (!norm_mean.empty() && int(norm_mean.size()) != channels)
            throw config_error("norm_mean must have one entry per channel");
        if (!norm_std.empty() && int(norm_std.size()) != channels)
            throw config_error("norm_std must have one entry per channel");
        for (float s : norm_std)
            if (!(s > 0.0f)) throw config_error("norm_std entries must be positive");
    }

    bool operator==(const EncoderConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Layers. Backward convention: parameter gradients accumulate into .grad,
// input gradients accumulate into the caller-provided buffer (caller zeroes).
// ---------------------------------------------------------------------------

template <typename S>
struct LinearT {
    ParamT<S> weight;  // {in, out}
    ParamT<S> bias;    // {out}
    int in = 0;
    int out = 0;

    void init(const std::string& prefix, int in_dim, int out_dim, Rng& rng) {
        in = in_dim;
        out = out_dim;
        weight.init(prefix + ".weight", {in_dim, out_dim});
        bias.init(prefix + ".bias", {out_dim});
        weight.value.fill_normal(rng, std::sqrt(2.0 / double(in_dim + out_dim)));
    }

    void forward(const S* x, int n, S* y) const {
        const S* w = weight.value.ptr();
        const S* b = bias.value.ptr();
        for (int t = 0; t < n; ++t) {
            const S* xt = x + size_t(t) * in;
            S* yt = y + size_t(t) * out;
            for (int o = 0; o < out; ++o) yt[o] = b[o];
            for (int i = 0; i < in; ++i) {
                S xi = xt[i];
                const S* wrow = w + size_t(i) * out;
                for (int o = 0; o < out; ++o) yt[o] += xi * wrow[o];
            }
        }
    }

    void backward(const S* x, const S* dy, int n, S* dx) {
        S* dw = weight.grad.ptr();
        S* db = bias.grad.ptr();
        const S* w = weight.value.ptr();
        for (int t = 0; t < n; ++t) {
            const S* xt = x + size_t(t) * in;
            const S* dyt = dy + size_t(t) * out;
            for (int o = 0; o < out; ++o) db[o] += dyt[o];
            for (int i = 0; i < in; ++i) {
                S xi = xt[i];
                S* dwrow = dw + size_t(i) * out;
                for (int o = 0; o < out; ++o) dwrow[o] += xi * dyt[o];
            }
            if (dx) {
                S* dxt = dx + size_t(t) * in;
                for (int i = 0; i < in; ++i) {
                    const S* wrow = w + size_t(i) * out;
                    S acc = S(0);
                    for (int o = 0; o < out; ++o) acc += wrow[o] * dyt[o];
                    dxt[i] += acc;
                }
            }
        }
    }
};

template <typename S>
struct LayerNormT {
    ParamT<S> gamma;
    ParamT<S> beta;
    int dim = 0;
    static constexpr double kEps = 1e-5;

    void init(const std::string& prefix, int d) {
        dim = d;
        gamma.init(prefix + ".gamma", {d});
        beta.init(prefix + ".beta", {d});
        gamma.value.fill(S(1));
    }

    // xhat and inv_std are cache outputs for backward
    void forward(const S* x, int n, S* y, S* xhat, S* inv_std) const {
        const S* g = gamma.value.ptr();
        const S* b = beta.value.ptr();
        for (int t = 0; t < n; ++t) {
            const S* xt = x + size_t(t) * dim;
            double mean = 0.0;
            for (int i = 0; i < dim; ++i) mean += double(xt[i]);
            mean /= dim;
            double var = 0.0;
            for (int i = 0; i < dim; ++i) {
                double c = double(xt[i]) - mean;
                var += c * c;
            }
            var /= dim;
            S istd = S(1.0 / std::sqrt(var + kEps));
            inv_std[t] = istd;
            S* xh = xhat + size_t(t) * dim;
            S* yt = y + size_t(t) * dim;
            for (int i = 0; i < dim; ++i) {
                xh[i] = (xt[i] - S(mean)) * istd;
                yt[i] = g[i] * xh[i] + b[i];
            }
        }
    }

    void backward(const S* dy, int n, const S* xhat, const S* inv_std, S* dx) {
        const S* g = gamma.value.ptr();
        S* dg = gamma.grad.ptr();
        S* db = beta.grad.ptr();
        for (int t = 0; t < n; ++t) {
            const S* dyt = dy + size_t(t) * dim;
            const S* xh = xhat + size_t(t) * dim;
            double sum_dyh = 0.0, sum_dyh_xhat = 0.0;
            for (int i = 0; i < dim; ++i) {
                double dyh = double(dyt[i]) * double(g[i]);
                sum_dyh += dyh;
                sum_dyh_xhat += dyh * double(xh[i]);
                dg[i] += dyt[i] * xh[i];
                db[i] += dyt[i];
            }
            double inv_n = 1.0 / dim;
            S* dxt = dx + size_t(t) * dim;
            for (int i = 0; i < dim; ++i) {
                double dyh = double(dyt[i]) * double(g[i]);
                dxt[i] += S(double(inv_std[t]) *
                            (dyh - inv_n * sum_dyh - double(xh[i]) * inv_n * sum_dyh_xhat));
            }
        }
    }
};

template <typename S>
inline S gelu(S x) {
    return S(0.5) * x * S(1.0 + std::erf(double(x) * 0.70710678118654752440));
}

template <typename S>
inline S gelu_grad(S x) {
    double phi = 0.5 * (1.0 + std::erf(double(x) * 0.70710678118654752440));
    double pdf = std::exp(-0.5 * double(x) * double(x)) * 0.39894228040143267794;
    return S(phi + double(x) * pdf);
}

template <typename S>
struct AttentionT {
    LinearT<S> q, k, v, out;
    int dim = 0;
    int heads = 0;
    int head_dim = 0;

    struct Cache {
        TensorT<S> qv, kv, vv;  // n x dim each
        TensorT<S> attn;        // heads x n x n softmax weights
        TensorT<S> ctx;         // n x dim, pre-output-projection
    };

    void init(const std::string& prefix, int d, int h, Rng& rng) {
        dim = d;
        heads = h;
        head_dim = d / h;
        q.init(prefix + ".q", d, d, rng);
        k.init(prefix + ".k", d, d, rng);
        v.init(prefix + ".v", d, d, rng);
        out.init(prefix + ".out", d, d, rng);
    }

    void forward(const S* x, int n, S* y, Cache& cache) const {
        cache.qv = TensorT<S>({n, dim});
        cache.kv = TensorT<S>({n, dim});
        cache.vv = TensorT<S>({n, dim});
        cache.attn = TensorT<S>({heads, n, n});
        cache.ctx = TensorT<S>({n, dim});
        q.forward(x, n, cache.qv.ptr());
        k.forward(x, n, cache.kv.ptr());
        v.forward(x, n, cache.vv.ptr());
        const S scale = S(1.0 / std::sqrt(double(head_dim)));
        std::vector<S> scores(size_t(n));
        for (int h = 0; h < heads; ++h) {
            const int off = h * head_dim;
            S* attn_h = cache.attn.ptr() + size_t(h) * n * n;
            for (int i = 0; i < n; ++i) {
                const S* qi = cache.qv.ptr() + size_t(i) * dim + off;
                S max_s = S(-1e30);
                for (int j = 0; j < n; ++j) {
                    const S* kj = cache.kv.ptr() + size_t(j) * dim + off;
                    S s = S(0);
                    for (int t = 0; t < head_dim; ++t) s += qi[t] * kj[t];
                    s *= scale;
                    scores[size_t(j)] = s;
                    if (s > max_s) max_s = s;
                }
                S denom = S(0);
                for (int j = 0; j < n; ++j) {
                    S e = S(std::exp(double(scores[size_t(j)] - max_s)));
                    attn_h[size_t(i) * n + j] = e;
                    denom += e;
                }
                S inv = S(1) / denom;
                S* ctx_i = cache.ctx.ptr() + size_t(i) * dim + off;
                for (int t = 0; t < head_dim; ++t) ctx_i[t] = S(0);
                for (int j = 0; j < n; ++j) {
                    S a = attn_h[size_t(i) * n + j] * inv;
                    attn_h[size_t(i) * n + j] = a;
                    const S* vj = cache.vv.ptr() + size_t(j) * dim + off;
                    for (int t = 0; t < head_dim; ++t) ctx_i[t] += a * vj[t];
                }
            }
        }
        out.forward(cache.ctx.ptr(), n, y);
    }

    // x is the cached layer input (needed for the q/k/v weight gradients)
    void backward(const S* x, const S* dy, int n, const Cache& cache, S* dx) {
        TensorT<S> dctx({n, dim});
        out.backward(cache.ctx.ptr(), dy, n, dctx.ptr());
        TensorT<S> dq({n, dim}), dk({n, dim}), dv({n, dim});
        const S scale = S(1.0 / std::sqrt(double(head_dim)));
        std::vector<S> da(size_t(n)), ds(size_t(n));
        for (int h = 0; h < heads; ++h) {
            const int off = h * head_dim;
            const S* attn_h = cache.attn.ptr() + size_t(h) * n * n;
            for (int i = 0; i < n; ++i) {
                const S* dctx_i = dctx.ptr() + size_t(i) * dim + off;
                double dot_av = 0.0;
                for (int j = 0; j < n; ++j) {
                    const S* vj = cache.vv.ptr() + size_t(j) * dim + off;
                    S acc = S(0);
                    for (int t = 0; t < head_dim; ++t) acc += dctx_i[t] * vj[t];
                    da[size_t(j)] = acc;
                    dot_av += double(attn_h[size_t(i) * n + j]) * double(acc);
                    S a = attn_h[size_t(i) * n + j];
                    S* dvj = dv.ptr() + size_t(j) * dim + off;
                    for (int t = 0; t < head_dim; ++t) dvj[t] += a * dctx_i[t];
                }
                for (int j = 0; j < n; ++j) {
                    S a = attn_h[size_t(i) * n + j];
                    ds[size_t(j)] = a * (da[size_t(j)] - S(dot_av));
                }
                const S* qi = cache.qv.ptr() + size_t(i) * dim + off;
                S* dqi = dq.ptr() + size_t(i) * dim + off;
                for (int j = 0; j < n; ++j) {
                    S dsj = ds[size_t(j)] * scale;
                    const S* kj = cache.kv.ptr() + size_t(j) * dim + off;
                    S* dkj = dk.ptr() + size_t(j) * dim + off;
                    for (int t = 0; t < head_dim; ++t) {
                        dqi[t] += dsj * kj[t];
                        dkj[t] += dsj * qi[t];
                    }
                }
            }
        }
        q.backward(x, dq.ptr(), n, dx);
        k.backward(x, dk.ptr(), n, dx);
        v.backward(x, dv.ptr(), n, dx);
    }
};

template <typename S>
struct BlockT {
    LayerNormT<S> ln1, ln2;
    AttentionT<S> attn;
    LinearT<S> fc1, fc2;
    int dim = 0;
    int hidden = 0;

    struct Cache {
        TensorT<S> x_in;                         // block input
        TensorT<S> n1, n1_xhat, n1_inv_std;      // ln1
        typename AttentionT<S>::Cache attn_cache;
        TensorT<S> x_mid;                        // after attention residual
        TensorT<S> n2, n2_xhat, n2_inv_std;      // ln2
        TensorT<S> h_pre, h_act;                 // mlp
    };

    void init(const std::string& prefix, int d, int h, int mlp_hidden, Rng& rng) {
        dim = d;
        hidden = mlp_hidden;
        ln1.init(prefix + ".ln1", d);
        attn.init(prefix + ".attn", d, h, rng);
        ln2.init(prefix + ".ln2", d);
        fc1.init(prefix + ".mlp.fc1", d, mlp_hidden, rng);
        fc2.init(prefix + ".mlp.fc2", mlp_hidden, d, rng);
    }

    void forward(const S* x, int n, S* y, Cache& c) const {
        c.x_in = TensorT<S>({n, dim});
        std::copy(x, x + size_t(n) * dim, c.x_in.ptr());
        c.n1 = TensorT<S>({n, dim});
        c.n1_xhat = TensorT<S>({n, dim});
        c.n1_inv_std = TensorT<S>({n});
        ln1.forward(x, n, c.n1.ptr(), c.n1_xhat.ptr(), c.n1_inv_std.ptr());
        TensorT<S> attn_out({n, dim});
        attn.forward(c.n1.ptr(), n, attn_out.ptr(), c.attn_cache);
        c.x_mid = TensorT<S>({n, dim});
        for (size_t i = 0; i < size_t(n) * dim; ++i) c.x_mid[i] = x[i] + attn_out[i];
        c.n2 = TensorT<S>({n, dim});
        c.n2_xhat = TensorT<S>({n, dim});
        c.n2_inv_std = TensorT<S>({n});
        ln2.forward(c.x_mid.ptr(), n, c.n2.ptr(), c.n2_xhat.ptr(), c.n2_inv_std.ptr());
        c.h_pre = TensorT<S>({n, hidden});
        fc1.forward(c.n2.ptr(), n, c.h_pre.ptr());
        c.h_act = TensorT<S>({n, hidden});
        for (size_t i = 0; i < size_t(n) * hidden; ++i) c.h_act[i] = gelu(c.h_pre[i]);
        TensorT<S> mlp_out({n, dim});
        fc2.forward(c.h_act.ptr(), n, mlp_out.ptr());
        for (size_t i = 0; i < size_t(n) * dim; ++i) y[i] = c.x_mid[i] + mlp_out[i];
    }

    void backward(const S* dy, int n, const Cache& c, S* dx) {
        // y = x_mid + fc2(gelu(fc1(ln2(x_mid))))
        TensorT<S> dx_mid({n, dim});
        std::copy(dy, dy + size_t(n) * dim, dx_mid.ptr());
        TensorT<S> dh_act({n, hidden});
        fc2.backward(c.h_act.ptr(), dy, n, dh_act.ptr());
        TensorT<S> dh_pre({n, hidden});
        for (size_t i = 0; i < size_t(n) * hidden; ++i)
            dh_pre[i] = dh_act[i] * gelu_grad(c.h_pre[i]);
        TensorT<S> dn2({n, dim});
        fc1.backward(c.n2.ptr(), dh_pre.ptr(), n, dn2.ptr());
        ln2.backward(dn2.ptr(), n, c.n2_xhat.ptr(), c.n2_inv_std.ptr(), dx_mid.ptr());
        // x_mid = x_in + attn(ln1(x_in))
        TensorT<S> dn1({n, dim});
        attn.backward(c.n1.ptr(), dx_mid.ptr(), n, c.attn_cache, dn1.ptr());
        ln1.backward(dn1.ptr(), n, c.n1_xhat.ptr(), c.n1_inv_std.ptr(), dx);
        for (size_t i = 0; i < size_t(n) * dim; ++i) dx[i] += dx_mid[i];
    }

    std::vector<ParamT<S>*> params() {
        return {&ln1.gamma, &ln1.beta,
                &attn.q.weight, &attn.q.bias, &attn.k.weight, &attn.k.bias,
                &attn.v.weight, &attn.v.bias, &attn.out.weight, &attn.out.bias,
                &ln2.gamma, &ln2.beta,
                &fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias};
    }
};

// One learning-rate group: either a transformer block (block_index >= 0) or
// one of the distinguished pre/post groups (block_index == -1).
template <typename S>
struct ParameterGroupT {
    std::string name;
    int block_index = -1;
    std::vector<ParamT<S>*> params;
};

template <typename S>
struct EncodeCacheT {
    TensorT<S> patches;  // num_tokens x patch_dim (normalized pixels)
    TensorT<S> tokens0;  // num_tokens x dim, input to block 0
    std::vector<typename BlockT<S>::Cache> block_caches;
    TensorT<S> final_out, fn_xhat, fn_inv_std;
    TensorT<S> pooled;   // dim, input to projection
};

template <typename S>
class EncoderT {
public:
    EncoderConfig config;
    LinearT<S> patch_embed;   // patch_dim -> dim
    ParamT<S> pos_embed;      // num_tokens x dim
    std::vector<BlockT<S>> blocks;
    LayerNormT<S> final_norm;
    LinearT<S> proj;          // dim -> dim

    // Inference path.
    std::vector<S> encode(const ImageTensor& image) const {
        EncodeCacheT<S> cache;
        return encode(image, cache);
    }

    // Training path: keeps every intermediate needed by backward().
    std::vector<S> encode(const ImageTensor& image, EncodeCacheT<S>& c) const {
        check_image(image);
        const int n = config.num_tokens();
        const int d = config.embed_dim;
        c.patches = patchify(image);
        c.tokens0 = TensorT<S>({n, d});
        patch_embed.forward(c.patches.ptr(), n, c.tokens0.ptr());
        for (int64_t i = 0; i < c.tokens0.size(); ++i) c.tokens0[size_t(i)] += pos_embed.value[size_t(i)];
        c.block_caches.assign(size_t(config.num_blocks), {});
        TensorT<S> cur = c.tokens0;
        TensorT<S> next({n, d});
        for (int b = 0; b < config.num_blocks; ++b) {
            blocks[size_t(b)].forward(cur.ptr(), n, next.ptr(), c.block_caches[size_t(b)]);
            std::swap(cur, next);
        }
        c.final_out = TensorT<S>({n, d});
        c.fn_xhat = TensorT<S>({n, d});
        c.fn_inv_std = TensorT<S>({n});
        final_norm.forward(cur.ptr(), n, c.final_out.ptr(), c.fn_xhat.ptr(), c.fn_inv_std.ptr());
        c.pooled = TensorT<S>({d});
        for (int t = 0; t < n; ++t)
            for (int i = 0; i < d; ++i) c.pooled[size_t(i)] += c.final_out[size_t(t) * d + i];
        for (int i = 0; i < d; ++i) c.pooled[size_t(i)] /= S(n);
        std::vector<S> emb(size_t(d));
        proj.forward(c.pooled.ptr(), 1, emb.data());
        return emb;
    }

    // Accumulates parameter gradients for d(loss)/d(embedding).
    void backward(const EncodeCacheT<S>& c, const S* d_embedding) {
        const int n = config.num_tokens();
        const int d = config.embed_dim;
        TensorT<S> dpooled({d});
        proj.backward(c.pooled.ptr(), d_embedding, 1, dpooled.ptr());
        TensorT<S> dfinal({n, d});
        for (int t = 0; t < n; ++t)
            for (int i = 0; i < d; ++i) dfinal[size_t(t) * d + i] = dpooled[size_t(i)] / S(n);
        TensorT<S> dcur({n, d});
        final_norm.backward(dfinal.ptr(), n, c.fn_xhat.ptr(), c.fn_inv_std.ptr(), dcur.ptr());
        TensorT<S> dprev({n, d});
        for (int b = config.num_blocks - 1; b >= 0; --b) {
            dprev.zero();
            blocks[size_t(b)].backward(dcur.ptr(), n, c.block_caches[size_t(b)], dprev.ptr());
            std::swap(dcur, dprev);
        }
        for (int64_t i = 0; i < pos_embed.grad.size(); ++i) pos_embed.grad[size_t(i)] += dcur[size_t(i)];
        patch_embed.backward(c.patches.ptr(), dcur.ptr(), n, nullptr);
    }

    void zero_grad() {
        for (ParamT<S>* p : parameters()) p->zero_grad();
    }

    // The num_blocks transformer blocks, ordered bottom (0) to top.
    std::vector<ParameterGroupT<S>> parameter_blocks() {
        std::vector<ParameterGroupT<S>> out;
        for (int b = 0; b < config.num_blocks; ++b)
            out.push_back({"block." + std::to_string(b), b, blocks[size_t(b)].params()});
        return out;
    }

    // Distinguished non-block groups.
    ParameterGroupT<S> pre_group() {
        return {"pre", -1, {&patch_embed.weight, &patch_embed.bias, &pos_embed}};
    }
    ParameterGroupT<S> post_group() {
        return {"post", -1, {&final_norm.gamma, &final_norm.beta, &proj.weight, &proj.bias}};
    }

    std::vector<ParamT<S>*> parameters() {
        std::vector<ParamT<S>*> all;
        for (ParamT<S>* p : pre_group().params) all.push_back(p);
        for (auto& blk : parameter_blocks())
            for (ParamT<S>* p : blk.params) all.push_back(p);
        for (ParamT<S>* p : post_group().params) all.push_back(p);
        return all;
    }

    int64_t parameter_count() {
        int64_t n = 0;
        for (ParamT<S>* p : parameters()) n += p->value.size();
        return n;
    }

private:
    void check_image(const ImageTensor& image) const {
        image.validate();
        if (image.height != config.input_hw || image.width != config.input_hw)
            throw shape_error("encoder expects " + std::to_string(config.input_hw) + "x" +
                              std::to_string(config.input_hw) + " input, got " +
                              std::to_string(image.height) + "x" + std::to_string(image.width));
        if (image.channels != config.channels)
            throw shape_error("encoder expects " + std::to_string(config.channels) +
                              " channels, got " + std::to_string(image.channels));
    }

    TensorT<S> patchify(const ImageTensor& image) const {
        const int ps = config.patch_size;
        const int side = config.tokens_per_side();
        TensorT<S> patches({config.num_tokens(), config.patch_dim()});
        for (int py = 0; py < side; ++py) {
            for (int px = 0; px < side; ++px) {
                S* row = patches.ptr() + size_t(py * side + px) * config.patch_dim();
                size_t k = 0;
                for (int y = 0; y < ps; ++y)
                    for (int x = 0; x < ps; ++x)
                        for (int ch = 0; ch < config.channels; ++ch)
                            row[k++] = S((image.at(py * ps + y, px * ps + x, ch) -
                                          config.norm_mean[size_t(ch)]) /
                                         config.norm_std[size_t(ch)]);
            }
        }
        return patches;
    }
};

// Deterministic seeded construction; the same config yields bitwise-identical
// parameters on every call.
template <typename S>
EncoderT<S> build_encoder_t(EncoderConfig config) {
    config.validate();
    if (config.norm_mean.empty()) config.norm_mean.assign(size_t(config.channels), 0.5f);
    if (config.norm_std.empty()) config.norm_std.assign(size_t(config.channels), 0.5f);
    EncoderT<S> enc;
    enc.config = config;
    Rng rng(uint64_t(config.seed));
    enc.patch_embed.init("patch_embed", config.patch_dim(), config.embed_dim, rng);
    enc.pos_embed.init("pos_embed", {config.num_tokens(), config.embed_dim});
    enc.pos_embed.value.fill_normal(rng, 0.02);
    enc.blocks.resize(size_t(config.num_blocks));
    for (int b = 0; b < config.num_blocks; ++b)
        enc.blocks[size_t(b)].init("blocks." + std::to_string(b), config.embed_dim,
                                   config.heads, config.embed_dim * config.mlp_ratio, rng);
    enc.final_norm.init("final_norm", config.embed_dim);
    enc.proj.init("proj", config.embed_dim, config.embed_dim, rng);
    return enc;
}

using Encoder = EncoderT<float>;
using EncodeCache = EncodeCacheT<float>;
using Param = ParamT<float>;
using ParameterGroup = ParameterGroupT<float>;

inline Encoder build_encoder(const EncoderConfig& config) {
    return build_encoder_t<float>(config);
}

}  // namespace rklip
