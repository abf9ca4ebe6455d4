#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "ovmae/model.hpp"
#include "ovmae/tensor_io.hpp"

namespace ovmae {

// Checkpoint directory: a key=value manifest plus one OMNT file per named
// parameter tensor.

namespace detail {

inline std::string param_filename(std::string name) {
    std::replace(name.begin(), name.end(), '.', '_');
    return name + ".omnt";
}

} // namespace detail

struct CheckpointMeta {
    std::size_t step = 0;
    std::size_t epoch = 0;
    std::uint64_t seed = 0;
};

inline void save_checkpoint(const std::string& dir, const ModelConfig& cfg, ModelParams& params,
                            const CheckpointMeta& meta) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("checkpoint: cannot create " + dir + ": " + ec.message());

    std::ofstream mf(dir + "/manifest.txt", std::ios::trunc);
    if (!mf) throw IoError("checkpoint: cannot write manifest in " + dir);
    mf << "preset=" << to_string(cfg.preset) << "\n";
    mf << "decoder_mode=" << (cfg.decoder_mode == DecoderMode::separate ? "separate" : "common")
       << "\n";
    mf << "enc_dim=" << cfg.enc_dim << "\nenc_depth=" << cfg.enc_depth
       << "\nenc_heads=" << cfg.enc_heads << "\n";
    mf << "dec_dim=" << cfg.dec_dim << "\ndec_depth=" << cfg.dec_depth
       << "\ndec_heads=" << cfg.dec_heads << "\n";
    mf << "patch_t=" << cfg.patch.t << "\npatch_h=" << cfg.patch.h << "\npatch_w=" << cfg.patch.w
       << "\n";
    mf << "input_size=" << cfg.input_size << "\nvideo_frames=" << cfg.video_frames << "\n";
    mf << "step=" << meta.step << "\nepoch=" << meta.epoch << "\nseed=" << meta.seed << "\n";
    visit_params(params, [&](const std::string& name, bool, Tensor& t) {
        mf << "param=" << name << "\n";
        write_omnt(dir + "/" + detail::param_filename(name), t, OmntDtype::f64);
    });
    if (!mf.good()) throw IoError("checkpoint: manifest write failed in " + dir);
}

struct Checkpoint {
    ModelConfig cfg;
    ModelParams params;
    CheckpointMeta meta;
};

inline Checkpoint load_checkpoint(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.txt");
    if (!mf) throw IoError("checkpoint: no manifest in " + dir);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(mf, line)) {
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        if (key != "param") kv[key] = line.substr(eq + 1);
    }
    auto need = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw IoError("checkpoint: manifest missing key " + k);
        return it->second;
    };

    Checkpoint ck;
    ck.cfg = ModelConfig::make(preset_from_string(need("preset")),
                               need("decoder_mode") == "separate" ? DecoderMode::separate
                                                                  : DecoderMode::common);
    // Explicit dims win over the preset defaults so older manifests stay
    // loadable if presets ever change.
    ck.cfg.enc_dim = std::stoul(need("enc_dim"));
    ck.cfg.enc_depth = std::stoul(need("enc_depth"));
    ck.cfg.enc_heads = std::stoul(need("enc_heads"));
    ck.cfg.dec_dim = std::stoul(need("dec_dim"));
    ck.cfg.dec_depth = std::stoul(need("dec_depth"));
    ck.cfg.dec_heads = std::stoul(need("dec_heads"));
    ck.cfg.patch = PatchConfig{std::stoul(need("patch_t")), std::stoul(need("patch_h")),
                               std::stoul(need("patch_w"))};
    if (kv.count("input_size")) ck.cfg.input_size = std::stoul(kv["input_size"]);
    if (kv.count("video_frames")) ck.cfg.video_frames = std::stoul(kv["video_frames"]);
    ck.cfg.validate();
    ck.meta.step = std::stoul(need("step"));
    ck.meta.epoch = std::stoul(need("epoch"));
    ck.meta.seed = std::stoull(need("seed"));

    ck.params = init_params(ck.cfg, ck.meta.seed, 0.0); // shapes only
    visit_params(ck.params, [&](const std::string& name, bool, Tensor& t) {
        OmntFile f = read_omnt(dir + "/" + detail::param_filename(name));
        if (f.tensor.dims() != t.dims())
            throw IoError("checkpoint: shape mismatch for " + name);
        t = std::move(f.tensor);
    });
    return ck;
}

} // namespace ovmae
