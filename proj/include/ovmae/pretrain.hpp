#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ovmae/checkpoint.hpp"
#include "ovmae/datapipe.hpp"
#include "ovmae/runconfig.hpp"
#include "ovmae/tensor_io.hpp"
#include "ovmae/trainer.hpp"

namespace ovmae {

// Data manifest: one line per sample, `<id> <path> <modality> <T>x<H>x<W>x3`.
// Paths are relative to the manifest's directory.
struct ManifestEntry {
    std::size_t id = 0;
    std::string path;
    Modality modality = Modality::image;
    std::size_t frames = 0, height = 0, width = 0;
};

inline std::vector<ManifestEntry> parse_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        ManifestEntry e;
        std::string modality, dims;
        if (!(ls >> e.id >> e.path >> modality >> dims))
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed manifest line");
        e.modality = modality == "video" ? Modality::video : Modality::image;
        char x1, x2, x3;
        std::size_t c = 0;
        std::istringstream ds(dims);
        if (!(ds >> e.frames >> x1 >> e.height >> x2 >> e.width >> x3 >> c) || c != 3)
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed dims " + dims);
        entries.push_back(std::move(e));
    }
    return entries;
}

// A dataset with all samples materialized; toy scale keeps everything
// resident.
struct LoadedDataset {
    DatasetHandle handle;
    std::vector<VisualTensor> samples;
};

inline LoadedDataset materialize(const DatasetHandle& d, const std::string& base_dir = "") {
    LoadedDataset out;
    out.handle = d;
    out.samples.reserve(d.count);
    for (std::size_t i = 0; i < d.count; ++i) {
        if (d.files.empty()) {
            out.samples.push_back(generate_synthetic(d, i));
        } else {
            const std::string path =
                base_dir.empty() ? d.files[i] : base_dir + "/" + d.files[i];
            OmntFile f = read_omnt(path);
            if (f.tensor.ndim() != 4)
                throw IoError("sample " + path + " is not a TxHxWx3 tensor");
            out.samples.emplace_back(std::move(f.tensor), d.modality);
        }
    }
    return out;
}

struct StepLog {
    std::size_t step = 0;
    std::size_t epoch = 0;
    Modality modality = Modality::image;
    double loss = 0;
    double lr = 0;
    double wall_ms = 0;
};

struct PretrainResult {
    std::vector<StepLog> log;
    std::string checkpoint_dir;
    std::string csv_path;
};

namespace detail {

inline std::vector<LoadedDataset> load_run_datasets(const RunConfig& rc, const ModelConfig& cfg) {
    std::vector<LoadedDataset> datasets;
    if (rc.data_manifest.empty()) {
        Rng data_seed(rc.seed, "data");
        if (rc.image_count > 0) {
            DatasetHandle images{"images", Modality::image, rc.image_count,
                                 data_seed.child("images").key(), cfg.input_size,
                                 cfg.input_size, 1};
            datasets.push_back(materialize(images));
        }
        if (rc.video_count > 0) {
            DatasetHandle videos{"videos", Modality::video, rc.video_count,
                                 data_seed.child("videos").key(), cfg.input_size,
                                 cfg.input_size, cfg.video_frames};
            datasets.push_back(materialize(videos));
        }
        return datasets;
    }
    const std::vector<ManifestEntry> entries = parse_manifest(rc.data_manifest);
    const std::string base = std::filesystem::path(rc.data_manifest).parent_path().string();
    std::map<Modality, DatasetHandle> handles;
    for (const ManifestEntry& e : entries) {
        DatasetHandle& h = handles
                               .try_emplace(e.modality,
                                            DatasetHandle{e.modality == Modality::image
                                                              ? "images"
                                                              : "videos",
                                                          e.modality, 0, 0, e.height, e.width,
                                                          e.frames})
                               .first->second;
        h.files.push_back(e.path);
        h.count = h.files.size();
    }
    for (auto& [m, h] : handles) datasets.push_back(materialize(h, base));
    return datasets;
}

} // namespace detail

// The full pretraining loop: per-epoch batch plans over the run's datasets,
// one optimizer step per mini-batch, CSV logging, periodic checkpoints.
inline PretrainResult run_pretraining(const RunConfig& rc) {
    const ModelConfig cfg = ModelConfig::make(rc.preset, rc.decoder_mode);
    rc.optim.validate();

    std::vector<LoadedDataset> datasets = detail::load_run_datasets(rc, cfg);
    if (datasets.empty()) throw ParamError("pretrain: no datasets configured");

    PlanOptions popts;
    popts.batch_size = rc.optim.batch_size;
    popts.replication[Modality::image] = rc.image_replication;
    popts.replication[Modality::video] = rc.video_replication;
    popts.ratios["images"] = rc.image_ratio;
    popts.ratios["videos"] = rc.video_ratio;

    std::vector<DatasetHandle> handles;
    for (const LoadedDataset& d : datasets) handles.push_back(d.handle);
    Rng epoch_seeds(rc.seed, "plan-epochs");

    // The step count per epoch is fixed by counts/ratios/B, not by the
    // replication factors or the epoch index.
    popts.seed = epoch_seeds.at(0);
    const std::size_t steps_per_epoch = build_epoch_plan(handles, popts).step_count();
    if (steps_per_epoch == 0) throw ParamError("pretrain: empty epoch plan");

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(rc.out_dir, ec);
    if (ec) throw IoError("pretrain: cannot create " + rc.out_dir + ": " + ec.message());

    PretrainResult result;
    result.csv_path = rc.out_dir + "/loss.csv";
    result.checkpoint_dir = rc.out_dir + "/checkpoint";
    std::ofstream csv(result.csv_path, std::ios::trunc);
    if (!csv) throw IoError("pretrain: cannot write " + result.csv_path);
    csv << "step,epoch,modality,loss,lr,wall_ms\n";
    csv.precision(17);

    TrainState state = make_train_state(cfg, rc.seed);
    for (std::size_t epoch = 0; epoch < rc.optim.total_epochs; ++epoch) {
        popts.seed = epoch_seeds.at(epoch);
        const BatchPlan plan = build_epoch_plan(handles, popts);
        state.epoch = epoch;
        for (const MiniBatch& mb : plan.batches) {
            const LoadedDataset* src = nullptr;
            for (const LoadedDataset& d : datasets)
                if (d.handle.name == mb.dataset) src = &d;
            if (!src) throw ParamError("pretrain: plan references unknown dataset " + mb.dataset);
            std::vector<Sample> batch;
            batch.reserve(mb.slots.size());
            for (const BatchSlot& slot : mb.slots) {
                if (slot.sample_id >= src->samples.size())
                    throw IndexError("pretrain: sample id out of range");
                batch.push_back(Sample{src->samples[slot.sample_id], slot.mask_seed});
            }
            const double lr = lr_at(state.step, rc.optim, steps_per_epoch);
            const auto t0 = std::chrono::steady_clock::now();
            const double loss = train_step(state, batch, rc.mask_kind(mb.modality),
                                           rc.mask_ratio(mb.modality), rc.optim, lr);
            const double wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
            StepLog row{state.step - 1, epoch, mb.modality, loss, lr, wall_ms};
            result.log.push_back(row);
            csv << row.step << ',' << row.epoch << ',' << to_string(row.modality) << ','
                << row.loss << ',' << row.lr << ',' << row.wall_ms << "\n";
        }
        if (rc.checkpoint_every > 0 && (epoch + 1) % rc.checkpoint_every == 0 &&
            epoch + 1 < rc.optim.total_epochs) {
            save_checkpoint(rc.out_dir + "/checkpoint_e" + std::to_string(epoch + 1), cfg,
                            state.params, CheckpointMeta{state.step, epoch + 1, rc.seed});
        }
    }
    save_checkpoint(result.checkpoint_dir, cfg, state.params,
                    CheckpointMeta{state.step, rc.optim.total_epochs, rc.seed});
    if (!csv.good()) throw IoError("pretrain: CSV write failed");
    return result;
}

} // namespace ovmae
