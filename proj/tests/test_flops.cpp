#include <gtest/gtest.h>

#include <cstdint>

#include "ovmae/flops.hpp"
#include "testutil.hpp"

using namespace ovmae;

namespace {

// Hand-derived totals for the base architecture, frozen before the
// implementation existed. Model: per layer on n tokens of width m, attention
// projections 4nm^2, scores+values 2n^2m, MLP 8nm^2; patch embed K*p*D;
// adapter K*D*d; decoder on all N tokens; output projection N*d*p.
constexpr std::uint64_t kVitBImageFull = 19265175552ull;      // r = 0
constexpr std::uint64_t kVitBImageMasked = 3269314560ull;     // r = 0.90, K = 19
constexpr std::uint64_t kVitBImageReference = 5899192320ull;  // r = 0.75, K = 49
constexpr std::uint64_t kVitBVideoFull = 200382873600ull;     // r = 0
constexpr std::uint64_t kVitBVideoMasked = 26427924480ull;    // r = 0.95, K = 78
constexpr std::uint64_t kVitBVideoReference = 33504264192ull; // r = 0.90, K = 156

void expect_within_10pct(double value, double published) {
    EXPECT_GE(value, 0.9 * published) << "published " << published;
    EXPECT_LE(value, 1.1 * published) << "published " << published;
}

} // namespace

TEST(Flops, HandDerivedVitBTotals) {
    const ModelConfig cfg = ModelConfig::make(Preset::vit_b);
    EXPECT_EQ(count_macs(cfg, Modality::image, 0.0).total(), kVitBImageFull);
    EXPECT_EQ(count_macs(cfg, Modality::image, 0.90).total(), kVitBImageMasked);
    EXPECT_EQ(count_macs(cfg, Modality::image, 0.75).total(), kVitBImageReference);
    EXPECT_EQ(count_macs(cfg, Modality::video, 0.0).total(), kVitBVideoFull);
    EXPECT_EQ(count_macs(cfg, Modality::video, 0.95).total(), kVitBVideoMasked);
    EXPECT_EQ(count_macs(cfg, Modality::video, 0.90).total(), kVitBVideoReference);
}

TEST(Flops, TokenCounts) {
    const ModelConfig b = ModelConfig::make(Preset::vit_b);
    FlopsReport r = count_macs(b, Modality::video, 0.95);
    EXPECT_EQ(r.tokens_total, 1568u);
    EXPECT_EQ(r.tokens_kept, 78u);
    const ModelConfig h = ModelConfig::make(Preset::vit_h);
    EXPECT_EQ(count_macs(h, Modality::image, 0.90).tokens_kept, 25u);
    EXPECT_EQ(count_macs(h, Modality::video, 0.95).tokens_kept, 102u);
}

TEST(Flops, PublishedRatioTableWithinTolerance) {
    const std::vector<RatioRow> rows = ratio_table({Preset::vit_b, Preset::vit_l, Preset::vit_h});
    ASSERT_EQ(rows.size(), 6u);
    // vs-full: 5.9/7.8 (B), 7.1/11.6 (L), 7.2/11.3 (H)
    const double vs_full[6] = {5.9, 7.8, 7.1, 11.6, 7.2, 11.3};
    // vs-reference: 1.8/1.3 (B), 2.0/1.5 (L), 2.0/1.4 (H)
    const double vs_ref[6] = {1.8, 1.3, 2.0, 1.5, 2.0, 1.4};
    for (std::size_t i = 0; i < 6; ++i) {
        expect_within_10pct(rows[i].vs_full, vs_full[i]);
        expect_within_10pct(rows[i].vs_reference, vs_ref[i]);
    }
}

TEST(Flops, ZeroRatioIsUnityBaseline) {
    const ModelConfig cfg = ModelConfig::make(Preset::vit_b);
    RatioRow row = ratio_row(cfg, Modality::image, 0.0);
    EXPECT_DOUBLE_EQ(row.vs_full, 1.0);
    // Baseline equal to the query ratio gives exactly 1.
    RatioRow ref = ratio_row(cfg, Modality::image, reference_mask_ratio(Modality::image));
    EXPECT_DOUBLE_EQ(ref.vs_reference, 1.0);
}

TEST(Flops, DoublingDepthDoublesEncoderBlockMacs) {
    ModelConfig cfg = ModelConfig::make(Preset::vit_b);
    FlopsReport a = count_macs(cfg, Modality::image, 0.9);
    cfg.enc_depth *= 2;
    FlopsReport b = count_macs(cfg, Modality::image, 0.9);
    EXPECT_EQ(b.enc_attn_proj, 2 * a.enc_attn_proj);
    EXPECT_EQ(b.enc_attn_sv, 2 * a.enc_attn_sv);
    EXPECT_EQ(b.enc_mlp, 2 * a.enc_mlp);
    EXPECT_EQ(b.patch_embed, a.patch_embed);
    EXPECT_EQ(b.dec_blocks, a.dec_blocks);
}

TEST(Flops, EncoderStagesDependOnlyOnK) {
    // Image at r=0.75 keeps 49; pick the video ratio that also keeps 49.
    const ModelConfig cfg = ModelConfig::make(Preset::vit_b);
    FlopsReport img = count_macs(cfg, Modality::image, 0.75);
    ASSERT_EQ(img.tokens_kept, 49u);
    const double video_ratio = 1.0 - 49.2 / 1568.0;
    FlopsReport vid = count_macs(cfg, Modality::video, video_ratio);
    ASSERT_EQ(vid.tokens_kept, 49u);
    EXPECT_EQ(img.patch_embed, vid.patch_embed);
    EXPECT_EQ(img.enc_attn_proj, vid.enc_attn_proj);
    EXPECT_EQ(img.enc_attn_sv, vid.enc_attn_sv);
    EXPECT_EQ(img.enc_mlp, vid.enc_mlp);
    EXPECT_EQ(img.adapter, vid.adapter);
    // Decoder stages depend only on N: same modality, different ratios.
    FlopsReport r1 = count_macs(cfg, Modality::video, 0.5);
    FlopsReport r2 = count_macs(cfg, Modality::video, 0.95);
    EXPECT_EQ(r1.dec_blocks, r2.dec_blocks);
    EXPECT_EQ(r1.output_proj, r2.output_proj);
}

TEST(Flops, RatioMonotoneInMasking) {
    const ModelConfig cfg = ModelConfig::make(Preset::vit_b);
    double prev = 0.0;
    for (double r : {0.0, 0.25, 0.5, 0.75, 0.9}) {
        const double vs_full = ratio_row(cfg, Modality::video, r).vs_full;
        EXPECT_GT(vs_full, prev - 1e-12);
        prev = vs_full;
    }
}

TEST(Flops, TotalEqualsStageSum) {
    const ModelConfig cfg = ModelConfig::make(Preset::vit_h);
    FlopsReport r = count_macs(cfg, Modality::video, 0.95);
    EXPECT_EQ(r.total(), r.patch_embed + r.enc_attn_proj + r.enc_attn_sv + r.enc_mlp +
                             r.adapter + r.dec_blocks + r.output_proj);
    EXPECT_EQ(r.total(), r.encoder_side() + r.decoder_side());
}

TEST(Flops, MeterMatchesAnalyticalExactly) {
    const ModelConfig cfg = ModelConfig::make(Preset::toy);
    for (Modality m : {Modality::image, Modality::video}) {
        for (double r : {0.0, 0.5, 0.75}) {
            const std::uint64_t measured = measure_macs(cfg, m, r);
            const std::uint64_t analytical = count_macs(cfg, m, r).total();
            EXPECT_EQ(measured, analytical)
                << to_string(m) << " at r=" << r;
        }
    }
}

TEST(Flops, MeterStrictlyMonotoneInK) {
    const ModelConfig cfg = ModelConfig::make(Preset::toy);
    // Toy image grid has N=4: r=0.75 keeps 1 token, r=0.5 keeps 2.
    EXPECT_LT(measure_macs(cfg, Modality::image, 0.75),
              measure_macs(cfg, Modality::image, 0.5));
}

TEST(Flops, EncoderMeterFewerMacsAtHigherMasking) {
    // The ViT-B image savings claim, checked analytically: encoder-side work
    // at K=19 is strictly below K=196.
    const ModelConfig cfg = ModelConfig::make(Preset::vit_b);
    EXPECT_LT(count_macs(cfg, Modality::image, 0.9).encoder_side(),
              count_macs(cfg, Modality::image, 0.0).encoder_side());
}

TEST(Flops, CsvShape) {
    const std::vector<RatioRow> rows = ratio_table({Preset::vit_b});
    const std::string csv = ratio_table_csv(rows);
    EXPECT_NE(csv.find("preset,modality,ratio,macs_encoder,macs_decoder,macs_total,vs_full,"
                       "vs_reference"),
              std::string::npos);
    EXPECT_NE(csv.find("vit-b,image,0.9,"), std::string::npos);
    EXPECT_NE(csv.find("vit-b,video,0.95,"), std::string::npos);
}

TEST(Flops, VitBImageMeterFewerMacsWhenMasked) {
    // Full-scale metered forwards (~25s total): the meter must read strictly
    // fewer MACs at K=19 than at K=196, and both readings must equal the
    // analytical totals exactly.
    const ModelConfig cfg = ModelConfig::make(Preset::vit_b);
    const std::uint64_t masked = measure_macs(cfg, Modality::image, 0.90, 1);
    const std::uint64_t full = measure_macs(cfg, Modality::image, 0.0, 1);
    EXPECT_LT(masked, full);
    EXPECT_EQ(masked, count_macs(cfg, Modality::image, 0.90).total());
    EXPECT_EQ(full, count_macs(cfg, Modality::image, 0.0).total());
}
