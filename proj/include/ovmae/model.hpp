#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ovmae/masking.hpp"
#include "ovmae/patchify.hpp"
#include "ovmae/posenc.hpp"
#include "ovmae/rng.hpp"
#include "ovmae/tape.hpp"
#include "ovmae/tensor.hpp"

namespace ovmae {

enum class DecoderMode { common, separate };

enum class Preset { vit_b, vit_l, vit_h, toy };

inline const char* to_string(Preset p) {
    switch (p) {
        case Preset::vit_b: return "vit-b";
        case Preset::vit_l: return "vit-l";
        case Preset::vit_h: return "vit-h";
        case Preset::toy: return "toy";
    }
    return "?";
}

inline Preset preset_from_string(const std::string& s) {
    if (s == "vit-b") return Preset::vit_b;
    if (s == "vit-l") return Preset::vit_l;
    if (s == "vit-h") return Preset::vit_h;
    if (s == "toy") return Preset::toy;
    throw ParamError("unknown preset: " + s);
}

// Encoder/decoder architecture and patching. The decoder is deliberately
// narrow and shallow relative to the encoder; the "separate" mode keeps two
// full decoder parameter sets of identical shape and routes by modality.
struct ModelConfig {
    std::size_t enc_dim = 0, enc_depth = 0, enc_heads = 0;
    std::size_t dec_dim = 0, dec_depth = 0, dec_heads = 0;
    PatchConfig patch;
    DecoderMode decoder_mode = DecoderMode::common;
    Preset preset = Preset::toy;
    double ln_eps = 1e-6;
    // Canonical input geometry; compute accounting and the trainer's synthetic
    // data default to these.
    std::size_t input_size = 224;
    std::size_t video_frames = 16;

    std::size_t patch_elems() const { return patch.patch_elems(); }

    // Patch grid for a canonical input of the given modality (images are
    // replicated temporally to the patch depth, so their grid has nt == 1).
    GridDims canonical_grid(Modality m) const {
        const std::size_t frames = m == Modality::image ? patch.t : video_frames;
        return GridDims{frames / patch.t, input_size / patch.h, input_size / patch.w};
    }

    void validate() const {
        if (enc_dim == 0 || enc_depth == 0 || enc_heads == 0 || dec_dim == 0 || dec_depth == 0 ||
            dec_heads == 0)
            throw ParamError("model config: all extents must be positive");
        if (enc_dim % enc_heads != 0)
            throw ParamError("model config: encoder dim not divisible by head count");
        if (dec_dim % dec_heads != 0)
            throw ParamError("model config: decoder dim not divisible by head count");
    }

    static ModelConfig make(Preset p, DecoderMode mode = DecoderMode::common) {
        ModelConfig c;
        c.preset = p;
        c.decoder_mode = mode;
        switch (p) {
            case Preset::vit_b:
                c.enc_dim = 768; c.enc_depth = 12; c.enc_heads = 12;
                c.dec_dim = 384; c.dec_depth = 4; c.dec_heads = 16;
                c.patch = PatchConfig{2, 16, 16};
                break;
            case Preset::vit_l:
                c.enc_dim = 1024; c.enc_depth = 24; c.enc_heads = 16;
                c.dec_dim = 512; c.dec_depth = 4; c.dec_heads = 16;
                c.patch = PatchConfig{2, 16, 16};
                break;
            case Preset::vit_h:
                c.enc_dim = 1280; c.enc_depth = 32; c.enc_heads = 16;
                c.dec_dim = 512; c.dec_depth = 8; c.dec_heads = 16;
                c.patch = PatchConfig{2, 14, 14};
                break;
            case Preset::toy:
                c.enc_dim = 16; c.enc_depth = 2; c.enc_heads = 2;
                c.dec_dim = 32; c.dec_depth = 2; c.dec_heads = 2;
                c.patch = PatchConfig{2, 16, 16};
                c.input_size = 32;
                c.video_frames = 4;
                break;
        }
        c.validate();
        return c;
    }
};

// ---------------------------------------------------------------------------
// Parameters. The same structure is instantiated with Tensor leaves (the
// stored parameters) and with Value leaves (their bindings on a Tape), and a
// single zip visitor defines the canonical name/order/decay flags for both.

template <class Leaf>
struct BlockParamsT {
    Leaf ln1_g, ln1_b;
    Leaf wq, bq, wk, bk, wv, bv, wo, bo;
    Leaf ln2_g, ln2_b;
    Leaf mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

template <class Leaf>
struct DecoderParamsT {
    Leaf proj_w, proj_b; // encoder dim -> decoder dim
    Leaf mask_token;     // decoder-dim vector
    std::vector<BlockParamsT<Leaf>> blocks;
    Leaf ln_g, ln_b;
    Leaf out_w, out_b; // decoder dim -> patch elems
};

template <class Leaf>
struct ModelParamsT {
    Leaf embed_w, embed_b; // patch elems -> encoder dim, shared by modalities
    std::vector<BlockParamsT<Leaf>> enc_blocks;
    Leaf enc_ln_g, enc_ln_b;
    DecoderParamsT<Leaf> dec;                       // common (or image) decoder
    std::optional<DecoderParamsT<Leaf>> dec_video;  // present in separate mode
};

using ModelParams = ModelParamsT<Tensor>;
using ModelValues = ModelParamsT<Value>;

namespace detail {

// fn(name, decay, leafA&, leafB&) over every parameter, in canonical order.
template <class A, class B, class Fn>
void zip_block(const std::string& prefix, BlockParamsT<A>& a, BlockParamsT<B>& b, Fn&& fn) {
    fn(prefix + ".ln1.g", false, a.ln1_g, b.ln1_g);
    fn(prefix + ".ln1.b", false, a.ln1_b, b.ln1_b);
    fn(prefix + ".attn.wq", true, a.wq, b.wq);
    fn(prefix + ".attn.bq", true, a.bq, b.bq);
    fn(prefix + ".attn.wk", true, a.wk, b.wk);
    fn(prefix + ".attn.bk", true, a.bk, b.bk);
    fn(prefix + ".attn.wv", true, a.wv, b.wv);
    fn(prefix + ".attn.bv", true, a.bv, b.bv);
    fn(prefix + ".attn.wo", true, a.wo, b.wo);
    fn(prefix + ".attn.bo", true, a.bo, b.bo);
    fn(prefix + ".ln2.g", false, a.ln2_g, b.ln2_g);
    fn(prefix + ".ln2.b", false, a.ln2_b, b.ln2_b);
    fn(prefix + ".mlp.w1", true, a.mlp_w1, b.mlp_w1);
    fn(prefix + ".mlp.b1", true, a.mlp_b1, b.mlp_b1);
    fn(prefix + ".mlp.w2", true, a.mlp_w2, b.mlp_w2);
    fn(prefix + ".mlp.b2", true, a.mlp_b2, b.mlp_b2);
}

template <class A, class B, class Fn>
void zip_decoder(const std::string& prefix, DecoderParamsT<A>& a, DecoderParamsT<B>& b,
                 Fn&& fn) {
    fn(prefix + ".proj.w", true, a.proj_w, b.proj_w);
    fn(prefix + ".proj.b", true, a.proj_b, b.proj_b);
    fn(prefix + ".mask_token", false, a.mask_token, b.mask_token);
    for (std::size_t i = 0; i < a.blocks.size(); ++i)
        zip_block(prefix + ".block" + std::to_string(i), a.blocks[i], b.blocks[i], fn);
    fn(prefix + ".ln.g", false, a.ln_g, b.ln_g);
    fn(prefix + ".ln.b", false, a.ln_b, b.ln_b);
    fn(prefix + ".out.w", true, a.out_w, b.out_w);
    fn(prefix + ".out.b", true, a.out_b, b.out_b);
}

template <class A, class B, class Fn>
void zip_params(ModelParamsT<A>& a, ModelParamsT<B>& b, Fn&& fn) {
    fn("embed.w", true, a.embed_w, b.embed_w);
    fn("embed.b", true, a.embed_b, b.embed_b);
    for (std::size_t i = 0; i < a.enc_blocks.size(); ++i)
        zip_block("enc.block" + std::to_string(i), a.enc_blocks[i], b.enc_blocks[i], fn);
    fn("enc.ln.g", false, a.enc_ln_g, b.enc_ln_g);
    fn("enc.ln.b", false, a.enc_ln_b, b.enc_ln_b);
    const bool separate = a.dec_video.has_value();
    zip_decoder(separate ? "dec_image" : "dec", a.dec, b.dec, fn);
    if (separate) zip_decoder("dec_video", *a.dec_video, *b.dec_video, fn);
}

} // namespace detail

template <class Leaf, class Fn>
void visit_params(ModelParamsT<Leaf>& p, Fn&& fn) {
    detail::zip_params(p, p, [&](const std::string& name, bool decay, Leaf& leaf, Leaf&) {
        fn(name, decay, leaf);
    });
}

namespace detail {

inline void init_tensor(Tensor& t, std::vector<std::size_t> dims, const Rng& stream,
                        double stddev) {
    t = Tensor(std::move(dims));
    if (stddev > 0.0) {
        Rng r = stream;
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.next_trunc_normal(stddev);
    }
}

inline BlockParamsT<Tensor> init_block(std::size_t dim, const Rng& rng, double stddev) {
    BlockParamsT<Tensor> b;
    auto w = [&](Tensor& t, std::vector<std::size_t> d, const char* name) {
        init_tensor(t, std::move(d), rng.child(name), stddev);
    };
    auto zero = [&](Tensor& t, std::vector<std::size_t> d) { t = Tensor(std::move(d)); };
    auto ones = [&](Tensor& t, std::size_t n) {
        t = Tensor({n});
        t.fill(1.0);
    };
    ones(b.ln1_g, dim);
    zero(b.ln1_b, {dim});
    w(b.wq, {dim, dim}, "wq");
    zero(b.bq, {dim});
    w(b.wk, {dim, dim}, "wk");
    zero(b.bk, {dim});
    w(b.wv, {dim, dim}, "wv");
    zero(b.bv, {dim});
    w(b.wo, {dim, dim}, "wo");
    zero(b.bo, {dim});
    ones(b.ln2_g, dim);
    zero(b.ln2_b, {dim});
    w(b.mlp_w1, {dim, 4 * dim}, "w1");
    zero(b.mlp_b1, {4 * dim});
    w(b.mlp_w2, {4 * dim, dim}, "w2");
    zero(b.mlp_b2, {dim});
    return b;
}

inline DecoderParamsT<Tensor> init_decoder(const ModelConfig& cfg, const Rng& rng,
                                           double stddev) {
    DecoderParamsT<Tensor> d;
    init_tensor(d.proj_w, {cfg.enc_dim, cfg.dec_dim}, rng.child("proj"), stddev);
    d.proj_b = Tensor({cfg.dec_dim});
    d.mask_token = Tensor({cfg.dec_dim}); // zero-initialized
    d.blocks.reserve(cfg.dec_depth);
    for (std::size_t i = 0; i < cfg.dec_depth; ++i)
        d.blocks.push_back(init_block(cfg.dec_dim, rng.child(i), stddev));
    d.ln_g = Tensor({cfg.dec_dim});
    d.ln_g.fill(1.0);
    d.ln_b = Tensor({cfg.dec_dim});
    init_tensor(d.out_w, {cfg.dec_dim, cfg.patch_elems()}, rng.child("out"), stddev);
    d.out_b = Tensor({cfg.patch_elems()});
    return d;
}

} // namespace detail

// Truncated-normal weights (sigma 0.02), zero biases, zero mask token, unit
// layernorm gains. Every tensor draws from its own (seed, name) substream, so
// adding or removing one tensor does not shift any other's values.
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed,
                               double stddev = 0.02) {
    cfg.validate();
    Rng root(seed, "init");
    ModelParams p;
    detail::init_tensor(p.embed_w, {cfg.patch_elems(), cfg.enc_dim}, root.child("embed"),
                        stddev);
    p.embed_b = Tensor({cfg.enc_dim});
    Rng enc = root.child("enc");
    p.enc_blocks.reserve(cfg.enc_depth);
    for (std::size_t i = 0; i < cfg.enc_depth; ++i)
        p.enc_blocks.push_back(detail::init_block(cfg.enc_dim, enc.child(i), stddev));
    p.enc_ln_g = Tensor({cfg.enc_dim});
    p.enc_ln_g.fill(1.0);
    p.enc_ln_b = Tensor({cfg.enc_dim});
    p.dec = detail::init_decoder(cfg, root.child("dec"), stddev);
    if (cfg.decoder_mode == DecoderMode::separate)
        p.dec_video = detail::init_decoder(cfg, root.child("dec_video"), stddev);
    return p;
}

inline std::size_t param_count(ModelParams& p) {
    std::size_t n = 0;
    visit_params(p, [&](const std::string&, bool, Tensor& t) { n += t.size(); });
    return n;
}

// Binds every parameter tensor onto the tape as a gradient-tracked leaf and
// returns the Value mirror of the parameter structure.
inline ModelValues bind_params(Tape& tape, ModelParams& p) {
    ModelValues v;
    v.enc_blocks.resize(p.enc_blocks.size());
    v.dec.blocks.resize(p.dec.blocks.size());
    if (p.dec_video) {
        v.dec_video.emplace();
        v.dec_video->blocks.resize(p.dec_video->blocks.size());
    }
    detail::zip_params(p, v, [&](const std::string&, bool, Tensor& t, Value& val) {
        val = tape.leaf(t, /*requires_grad=*/true);
    });
    return v;
}

// ---------------------------------------------------------------------------
// Forward pieces.

namespace detail {

inline Value attention(Tape& t, Value x, const BlockParamsT<Value>& b, std::size_t heads) {
    const std::size_t dim = t.value(x).dim(1);
    const std::size_t hd = dim / heads;
    Value q = t.add_rowvec(t.matmul(x, b.wq), b.bq);
    Value k = t.add_rowvec(t.matmul(x, b.wk), b.bk);
    Value v = t.add_rowvec(t.matmul(x, b.wv), b.bv);
    std::vector<Value> head_outs;
    head_outs.reserve(heads);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    for (std::size_t h = 0; h < heads; ++h) {
        Value qh = t.slice_cols(q, h * hd, (h + 1) * hd);
        Value kh = t.slice_cols(k, h * hd, (h + 1) * hd);
        Value vh = t.slice_cols(v, h * hd, (h + 1) * hd);
        Value scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt);
        Value attn = t.softmax_lastdim(scores);
        head_outs.push_back(t.matmul(attn, vh));
    }
    Value merged = heads == 1 ? head_outs[0] : t.concat_cols(head_outs);
    return t.add_rowvec(t.matmul(merged, b.wo), b.bo);
}

inline Value transformer_block(Tape& t, Value x, const BlockParamsT<Value>& b,
                               std::size_t heads, double eps) {
    Value h = t.layernorm(x, b.ln1_g, b.ln1_b, eps);
    x = t.add(x, attention(t, h, b, heads));
    Value h2 = t.layernorm(x, b.ln2_g, b.ln2_b, eps);
    Value m = t.add_rowvec(t.matmul(h2, b.mlp_w1), b.mlp_b1);
    m = t.gelu(m);
    m = t.add_rowvec(t.matmul(m, b.mlp_w2), b.mlp_b2);
    return t.add(x, m);
}

} // namespace detail

// Runs the encoder over the kept patches only: standardize pixels, embed,
// add positional rows for the kept positions, pre-norm blocks, final
// layernorm. Work scales with the kept count, never with the full patch
// count.
//
// The embedding sees pixels mapped to [-1, 1]; raw 0..255 values would dwarf
// the positional encoding and skew the embedding gradients by two orders of
// magnitude. Loss targets are built elsewhere, from the raw values.
inline Value encode(Tape& tape, const Tensor& kept_patches,
                    const std::vector<std::size_t>& positions, GridDims grid,
                    const ModelConfig& cfg, const ModelValues& mv) {
    if (kept_patches.dim(0) == 0) throw ParamError("encode: needs at least one kept patch");
    if (kept_patches.dim(1) != cfg.patch_elems())
        throw ShapeError("encode: patch width " + std::to_string(kept_patches.dim(1)) +
                         " does not match config " + std::to_string(cfg.patch_elems()));
    const Tensor pe = positional_encoding(grid, cfg.enc_dim);
    Tensor standardized = kept_patches;
    for (std::size_t i = 0; i < standardized.size(); ++i)
        standardized[i] = standardized[i] / 127.5 - 1.0;
    Value x = tape.constant(std::move(standardized));
    x = tape.add_rowvec(tape.matmul(x, mv.embed_w), mv.embed_b);
    x = tape.add(x, tape.constant(positional_rows(pe, positions)));
    for (const auto& b : mv.enc_blocks)
        x = detail::transformer_block(tape, x, b, cfg.enc_heads, cfg.ln_eps);
    return tape.layernorm(x, mv.enc_ln_g, mv.enc_ln_b, cfg.ln_eps);
}

// Projects encoder outputs to the decoder width, scatters them to their
// patch slots, fills masked slots with the mask token, adds positional
// encoding to all slots, and predicts every patch's pixels.
inline Value decode(Tape& tape, Value encoded, const Mask& mask, GridDims grid,
                    const ModelConfig& cfg, const ModelValues& mv, Modality modality) {
    if (mask.total != grid.patch_count())
        throw ShapeError("decode: mask/grid patch counts disagree");
    if (tape.value(encoded).dim(0) != mask.kept_count())
        throw ShapeError("decode: encoded rows do not match kept count");
    const DecoderParamsT<Value>& dv =
        (modality == Modality::video && mv.dec_video) ? *mv.dec_video : mv.dec;
    Value x = tape.add_rowvec(tape.matmul(encoded, dv.proj_w), dv.proj_b);
    x = tape.scatter_rows_fill(x, dv.mask_token, mask.kept, mask.total);
    x = tape.add(x, tape.constant(positional_encoding(grid, cfg.dec_dim)));
    for (const auto& b : dv.blocks)
        x = detail::transformer_block(tape, x, b, cfg.dec_heads, cfg.ln_eps);
    x = tape.layernorm(x, dv.ln_g, dv.ln_b, cfg.ln_eps);
    return tape.add_rowvec(tape.matmul(x, dv.out_w), dv.out_b);
}

struct ForwardResult {
    Value predictions; // N x patch elems
    Mask mask;
    PatchGrid grid;
};

// patchify -> mask -> encode -> decode. Images are replicated temporally to
// the patch depth first; encoder parameters are shared across modalities.
inline ForwardResult forward(Tape& tape, const VisualTensor& x, const MaskSpec& spec,
                             const ModelConfig& cfg, const ModelValues& mv) {
    const VisualTensor* input = &x;
    VisualTensor replicated;
    if (x.modality == Modality::image && x.frames() == 1 && cfg.patch.t > 1) {
        replicated = temporal_replicate(x, cfg.patch.t);
        input = &replicated;
    }
    ForwardResult r;
    r.grid = patchify(*input, cfg.patch);
    r.mask = generate_mask(r.grid.grid, spec);
    KeptPatches kept = apply_mask(r.grid, r.mask);
    Value enc = encode(tape, kept.rows, kept.positions, r.grid.grid, cfg, mv);
    r.predictions = decode(tape, enc, r.mask, r.grid.grid, cfg, mv, x.modality);
    return r;
}

} // namespace ovmae
