#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "ovmae/masking.hpp"
#include "ovmae/model.hpp"
#include "ovmae/optim.hpp"

namespace ovmae {

// Everything a pretraining run needs, parsed from a key=value file. Defaults
// follow the final-model settings: random masking at 0.90 (images) and 0.95
// (videos), AdamW at lr 3e-4 / wd 0.05 / betas (0.9, 0.95), and 4x video
// sample replication.
struct RunConfig {
    Preset preset = Preset::toy;
    DecoderMode decoder_mode = DecoderMode::common;

    MaskKind image_mask_kind = MaskKind::random;
    double image_mask_ratio = 0.90;
    MaskKind video_mask_kind = MaskKind::random;
    double video_mask_ratio = 0.95;

    OptimSpec optim{3e-4, 0.05, 0.9, 0.95, 1e-8, /*warmup*/ 5, /*total*/ 50, /*batch*/ 4};

    std::size_t image_count = 8;
    std::size_t video_count = 8;
    std::size_t image_replication = 1;
    std::size_t video_replication = 4;
    std::size_t image_ratio = 1;
    std::size_t video_ratio = 1;

    std::string data_manifest; // optional; synthetic data when empty
    std::string out_dir = "run";
    std::size_t checkpoint_every = 10; // epochs
    std::uint64_t seed = 0;

    MaskKind mask_kind(Modality m) const {
        return m == Modality::image ? image_mask_kind : video_mask_kind;
    }
    double mask_ratio(Modality m) const {
        return m == Modality::image ? image_mask_ratio : video_mask_ratio;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

} // namespace detail

// One `key = value` per line, `#` starts a comment. Unknown keys and
// malformed lines are reported with their line number.
inline RunConfig parse_run_config(std::istream& in, const std::string& source = "<config>") {
    RunConfig rc;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& why) {
        throw ParamError(source + ":" + std::to_string(lineno) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail("expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) fail("expected key=value");
        try {
            if (key == "preset") rc.preset = preset_from_string(value);
            else if (key == "decoder_mode") {
                if (value == "common") rc.decoder_mode = DecoderMode::common;
                else if (value == "separate") rc.decoder_mode = DecoderMode::separate;
                else fail("decoder_mode must be common or separate");
            }
            else if (key == "image_mask_kind") rc.image_mask_kind = mask_kind_from_string(value);
            else if (key == "video_mask_kind") rc.video_mask_kind = mask_kind_from_string(value);
            else if (key == "image_mask_ratio") rc.image_mask_ratio = std::stod(value);
            else if (key == "video_mask_ratio") rc.video_mask_ratio = std::stod(value);
            else if (key == "lr") rc.optim.peak_lr = std::stod(value);
            else if (key == "weight_decay") rc.optim.weight_decay = std::stod(value);
            else if (key == "beta1") rc.optim.beta1 = std::stod(value);
            else if (key == "beta2") rc.optim.beta2 = std::stod(value);
            else if (key == "warmup_epochs") rc.optim.warmup_epochs = std::stoul(value);
            else if (key == "total_epochs") rc.optim.total_epochs = std::stoul(value);
            else if (key == "batch_size") rc.optim.batch_size = std::stoul(value);
            else if (key == "image_count") rc.image_count = std::stoul(value);
            else if (key == "video_count") rc.video_count = std::stoul(value);
            else if (key == "image_replication") rc.image_replication = std::stoul(value);
            else if (key == "video_replication") rc.video_replication = std::stoul(value);
            else if (key == "image_ratio") rc.image_ratio = std::stoul(value);
            else if (key == "video_ratio") rc.video_ratio = std::stoul(value);
            else if (key == "data_manifest") rc.data_manifest = value;
            else if (key == "out_dir") rc.out_dir = value;
            else if (key == "checkpoint_every") rc.checkpoint_every = std::stoul(value);
            else if (key == "seed") rc.seed = std::stoull(value);
            else fail("unknown key: " + key);
        } catch (const ParamError&) {
            throw;
        } catch (const std::exception&) {
            fail("bad value for " + key + ": " + value);
        }
    }
    return rc;
}

inline RunConfig parse_run_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    return parse_run_config(in, path);
}

} // namespace ovmae
