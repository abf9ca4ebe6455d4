#pragma once

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ovmae/masking.hpp"
#include "ovmae/model.hpp"

namespace ovmae {

// Multiply-accumulate counts for one (architecture, modality, masking ratio)
// triple. Counts cover exactly the matmul work of a forward pass: softmax,
// layernorm, bias and activation element-ops are excluded, which keeps the
// analytical totals equal to the instrumented matmul meter.
//
// Encoder-side stages scale with the kept token count K; decoder-side stages
// scale with the full patch count N.
struct FlopsReport {
    Preset preset = Preset::toy;
    Modality modality = Modality::image;
    double ratio = 0.0;
    std::size_t tokens_total = 0; // N
    std::size_t tokens_kept = 0;  // K

    std::uint64_t patch_embed = 0;   // K * p * D
    std::uint64_t enc_attn_proj = 0; // depth * 4 K D^2
    std::uint64_t enc_attn_sv = 0;   // depth * 2 K^2 D (scores + values)
    std::uint64_t enc_mlp = 0;       // depth * 8 K D^2
    std::uint64_t adapter = 0;       // K * D * d
    std::uint64_t dec_blocks = 0;    // L * (12 N d^2 + 2 N^2 d)
    std::uint64_t output_proj = 0;   // N * d * p

    std::uint64_t encoder_side() const {
        return patch_embed + enc_attn_proj + enc_attn_sv + enc_mlp + adapter;
    }
    std::uint64_t decoder_side() const { return dec_blocks + output_proj; }
    std::uint64_t total() const { return encoder_side() + decoder_side(); }
};

inline FlopsReport count_macs(const ModelConfig& cfg, Modality modality, double ratio) {
    cfg.validate();
    if (!(ratio >= 0.0 && ratio < 1.0)) throw ParamError("count_macs: ratio must be in [0, 1)");
    const GridDims grid = cfg.canonical_grid(modality);
    const std::uint64_t n = grid.patch_count();
    const std::uint64_t k = detail::kept_count_floor(n, ratio);
    const std::uint64_t p = cfg.patch_elems();
    const std::uint64_t D = cfg.enc_dim, d = cfg.dec_dim;

    FlopsReport r;
    r.preset = cfg.preset;
    r.modality = modality;
    r.ratio = ratio;
    r.tokens_total = n;
    r.tokens_kept = k;
    r.patch_embed = k * p * D;
    r.enc_attn_proj = cfg.enc_depth * 4 * k * D * D;
    r.enc_attn_sv = cfg.enc_depth * 2 * k * k * D;
    r.enc_mlp = cfg.enc_depth * 8 * k * D * D;
    r.adapter = k * D * d;
    r.dec_blocks = cfg.dec_depth * (12 * n * d * d + 2 * n * n * d);
    r.output_proj = n * d * p;
    return r;
}

// Per-modality masking-ratio defaults: the extreme settings for the final
// models and the prior-work reference points they are compared against.
inline double default_mask_ratio(Modality m) { return m == Modality::image ? 0.90 : 0.95; }
inline double reference_mask_ratio(Modality m) { return m == Modality::image ? 0.75 : 0.90; }

struct RatioRow {
    FlopsReport report;
    double vs_full = 0;      // total at r=0 / total at r
    double vs_reference = 0; // total at the reference ratio / total at r
};

// All (preset x modality) rows at the given ratios, against the r=0 and
// reference-masking baselines of the same architecture.
inline std::vector<RatioRow> ratio_table(const std::vector<Preset>& presets) {
    std::vector<RatioRow> rows;
    for (Preset p : presets) {
        const ModelConfig cfg = ModelConfig::make(p);
        for (Modality m : {Modality::image, Modality::video}) {
            RatioRow row;
            row.report = count_macs(cfg, m, default_mask_ratio(m));
            const double full = static_cast<double>(count_macs(cfg, m, 0.0).total());
            const double ref =
                static_cast<double>(count_macs(cfg, m, reference_mask_ratio(m)).total());
            row.vs_full = full / static_cast<double>(row.report.total());
            row.vs_reference = ref / static_cast<double>(row.report.total());
            rows.push_back(row);
        }
    }
    return rows;
}

inline RatioRow ratio_row(const ModelConfig& cfg, Modality m, double ratio) {
    RatioRow row;
    row.report = count_macs(cfg, m, ratio);
    row.vs_full = static_cast<double>(count_macs(cfg, m, 0.0).total()) /
                  static_cast<double>(row.report.total());
    row.vs_reference = static_cast<double>(count_macs(cfg, m, reference_mask_ratio(m)).total()) /
                       static_cast<double>(row.report.total());
    return row;
}

// Matmul meter total from an actual forward pass; equals the analytical
// total exactly (both count only matmul MACs).
inline std::uint64_t measure_macs(const ModelConfig& cfg, Modality modality, double ratio,
                                  std::uint64_t seed = 7) {
    cfg.validate();
    const std::size_t frames = modality == Modality::image ? 1 : cfg.video_frames;
    // Pixel content is irrelevant to the meter; any valid input works.
    Rng rng(seed, "macs");
    Tensor px({frames, cfg.input_size, cfg.input_size, 3});
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = std::floor(256.0 * rng.next_uniform());
    VisualTensor x(std::move(px), modality);

    ModelParams params = init_params(cfg, seed);
    Tape tape;
    ModelValues mv = bind_params(tape, params);
    tape.reset_mac_count();
    (void)forward(tape, x, MaskSpec{MaskKind::random, ratio, seed}, cfg, mv);
    return tape.mac_count();
}

inline std::string format_ratio_table(const std::vector<RatioRow>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(8) << "preset" << std::setw(8) << "input" << std::setw(7)
       << "ratio" << std::right << std::setw(7) << "N" << std::setw(7) << "K" << std::setw(16)
       << "macs_enc" << std::setw(16) << "macs_dec" << std::setw(16) << "macs_total"
       << std::setw(9) << "vs_full" << std::setw(8) << "vs_ref" << "\n";
    for (const RatioRow& r : rows) {
        os << std::left << std::setw(8) << to_string(r.report.preset) << std::setw(8)
           << to_string(r.report.modality) << std::setw(7) << std::setprecision(3) << r.report.ratio
           << std::right << std::setw(7) << r.report.tokens_total << std::setw(7)
           << r.report.tokens_kept << std::setw(16) << r.report.encoder_side() << std::setw(16)
           << r.report.decoder_side() << std::setw(16) << r.report.total() << std::fixed
           << std::setprecision(2) << std::setw(9) << r.vs_full << std::setw(8) << r.vs_reference
           << "\n";
        os.unsetf(std::ios::fixed);
    }
    return os.str();
}

inline std::string ratio_table_csv(const std::vector<RatioRow>& rows) {
    std::ostringstream os;
    os << "preset,modality,ratio,macs_encoder,macs_decoder,macs_total,vs_full,vs_reference\n";
    for (const RatioRow& r : rows) {
        os << to_string(r.report.preset) << ',' << to_string(r.report.modality) << ','
           << r.report.ratio << ',' << r.report.encoder_side() << ',' << r.report.decoder_side()
           << ',' << r.report.total() << ',' << r.vs_full << ',' << r.vs_reference << "\n";
    }
    return os.str();
}

} // namespace ovmae
