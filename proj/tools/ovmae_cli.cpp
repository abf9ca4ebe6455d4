// Command-line front end: synthetic data generation, toy pretraining,
// reconstruction rendering, compute accounting, dataloading simulation, and
// gradient verification.
//
// Exit codes: 0 success, 1 failed assertion or runtime error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ovmae/checkpoint.hpp"
#include "ovmae/datapipe.hpp"
#include "ovmae/flops.hpp"
#include "ovmae/pretrain.hpp"
#include "ovmae/render.hpp"
#include "ovmae/runconfig.hpp"
#include "ovmae/tensor_io.hpp"
#include "ovmae/trainer.hpp"

namespace {

using namespace ovmae;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct GenDataArgs {
    std::size_t images = 8;
    std::size_t videos = 8;
    std::size_t size = 32;
    std::size_t frames = 4;
    std::uint64_t seed = 0;
    std::string out = "data";
    std::string dtype = "u8";
    std::string preset = "toy";
};

int run_gen_data(const GenDataArgs& a) {
    const ModelConfig cfg = ModelConfig::make(preset_from_string(a.preset));
    if (a.size % cfg.patch.h != 0 || a.size % cfg.patch.w != 0)
        throw ParamError("gen-data: size " + std::to_string(a.size) +
                         " is not divisible by the preset patch extents");
    if (a.frames % cfg.patch.t != 0)
        throw ParamError("gen-data: frames " + std::to_string(a.frames) +
                         " is not divisible by the temporal patch extent");
    const OmntDtype dtype = a.dtype == "f64" ? OmntDtype::f64 : OmntDtype::u8;

    std::filesystem::create_directories(a.out);
    std::ofstream manifest(a.out + "/manifest.txt", std::ios::trunc);
    if (!manifest) throw IoError("gen-data: cannot write manifest in " + a.out);

    std::size_t id = 0;
    auto emit = [&](const DatasetHandle& d, const char* stem) {
        for (std::size_t i = 0; i < d.count; ++i, ++id) {
            const VisualTensor x = generate_synthetic(d, i);
            char name[64];
            std::snprintf(name, sizeof(name), "%s%04zu.omnt", stem, i);
            write_omnt(a.out + "/" + name, x.pixels, dtype);
            manifest << id << ' ' << name << ' ' << to_string(d.modality) << ' '
                     << x.frames() << 'x' << x.height() << 'x' << x.width() << "x3\n";
        }
    };
    Rng data_seed(a.seed, "data");
    if (a.images > 0)
        emit(DatasetHandle{"images", Modality::image, a.images, data_seed.child("images").key(),
                           a.size, a.size, 1},
             "img");
    if (a.videos > 0)
        emit(DatasetHandle{"videos", Modality::video, a.videos, data_seed.child("videos").key(),
                           a.size, a.size, a.frames},
             "vid");
    if (!manifest.good()) throw IoError("gen-data: manifest write failed");
    std::cout << "wrote " << id << " samples and manifest to " << a.out << "\n";
    return kExitOk;
}

int run_pretrain_cmd(const std::string& config_path) {
    const RunConfig rc = parse_run_config_file(config_path);
    const PretrainResult result = run_pretraining(rc);
    double last_image = -1, last_video = -1;
    for (const StepLog& row : result.log)
        (row.modality == Modality::image ? last_image : last_video) = row.loss;
    std::cout << "pretrain: " << result.log.size() << " steps\n"
              << "loss csv: " << result.csv_path << "\n"
              << "checkpoint: " << result.checkpoint_dir << "\n";
    if (last_image >= 0) std::cout << "final image-batch loss: " << last_image << "\n";
    if (last_video >= 0) std::cout << "final video-batch loss: " << last_video << "\n";
    return kExitOk;
}

struct ReconstructArgs {
    std::string checkpoint;
    std::string input;
    std::vector<double> ratios{0.9};
    std::string kind = "random";
    std::uint64_t seed = 0;
    std::string out = "recon";
};

int run_reconstruct(const ReconstructArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);

    VisualTensor input;
    if (a.input.size() > 4 && a.input.substr(a.input.size() - 4) == ".ppm") {
        Tensor frame = read_ppm(a.input);
        Tensor px({1, frame.dim(0), frame.dim(1), 3}, frame.storage());
        input = VisualTensor(std::move(px), Modality::image);
    } else {
        OmntFile f = read_omnt(a.input);
        if (f.tensor.ndim() != 4) throw ShapeError("reconstruct: input must be TxHxWx3");
        const Modality m = f.tensor.dim(0) == 1 ? Modality::image : Modality::video;
        input = VisualTensor(std::move(f.tensor), m);
    }

    std::filesystem::create_directories(a.out);
    const MaskKind kind = mask_kind_from_string(a.kind);
    for (double r : a.ratios) {
        Tape tape;
        ModelValues mv = bind_params(tape, ck.params);
        ForwardResult fr = forward(tape, input, MaskSpec{kind, r, a.seed}, ck.cfg, mv);
        NormalizedTargets targets = normalize_targets(fr.grid);
        Tensor pixels = denormalize(tape.value(fr.predictions), targets);
        VisualTensor composite = composite_reconstruction(fr.grid, pixels, fr.mask);

        char stem[64];
        std::snprintf(stem, sizeof(stem), "recon_r%02d", static_cast<int>(r * 100 + 0.5));
        if (input.modality == Modality::image) {
            // Images were replicated temporally for patching; frame 0 is the
            // reconstruction.
            write_ppm(a.out + "/" + stem + ".ppm", frame_of(composite, 0));
            std::cout << a.out << "/" << stem << ".ppm\n";
        } else {
            for (const std::string& path : write_frames_ppm(a.out + "/" + stem, composite))
                std::cout << path << "\n";
        }
    }
    return kExitOk;
}

struct FlopsArgs {
    std::string preset = "vit-b";
    std::string modality = "video";
    double ratio = -1;
    bool table = false;
    std::string csv;
};

int run_flops(const FlopsArgs& a) {
    if (a.table) {
        const std::vector<RatioRow> rows =
            ratio_table({Preset::vit_b, Preset::vit_l, Preset::vit_h});
        std::cout << format_ratio_table(rows);
        if (!a.csv.empty()) {
            std::ofstream out(a.csv, std::ios::trunc);
            if (!out) throw IoError("flops: cannot write " + a.csv);
            out << ratio_table_csv(rows);
        }
        return kExitOk;
    }
    const ModelConfig cfg = ModelConfig::make(preset_from_string(a.preset));
    const Modality m = a.modality == "image" ? Modality::image : Modality::video;
    const double ratio = a.ratio >= 0 ? a.ratio : default_mask_ratio(m);
    const RatioRow row = ratio_row(cfg, m, ratio);
    std::cout << format_ratio_table({row});
    if (!a.csv.empty()) {
        std::ofstream out(a.csv, std::ios::trunc);
        if (!out) throw IoError("flops: cannot write " + a.csv);
        out << ratio_table_csv({row});
    }
    return kExitOk;
}

struct SimulateArgs {
    std::vector<std::size_t> replication{1, 2, 4, 8};
    std::size_t samples = 256;
    std::size_t batch = 32;
    double read_ms = 40;
    double jitter_ms = 0;
    double decode_ms = 60;
    double compute_ms = 50;
    std::size_t workers = 8;
    std::size_t inflight = 32;
    std::uint64_t seed = 0;
    std::string csv;
};

int run_simulate_io(const SimulateArgs& a) {
    IoModel io{a.read_ms, a.jitter_ms, a.decode_ms, a.compute_ms, a.workers, a.inflight};
    DatasetHandle videos{"videos", Modality::video, a.samples, a.seed, 32, 32, 4};
    std::ostringstream csv;
    csv << "R,epoch_ms,distinct_loads,steps\n";
    for (std::size_t r : a.replication) {
        PlanOptions popts;
        popts.batch_size = a.batch;
        popts.replication[Modality::video] = r;
        popts.seed = a.seed;
        const BatchPlan plan = build_epoch_plan({videos}, popts);
        const SimResult sim = simulate_epoch(plan, io, a.seed);
        csv << r << ',' << sim.epoch_ms << ',' << sim.distinct_loads << ',' << sim.steps << "\n";
    }
    std::cout << csv.str();
    if (!a.csv.empty()) {
        std::ofstream out(a.csv, std::ios::trunc);
        if (!out) throw IoError("simulate-io: cannot write " + a.csv);
        out << csv.str();
    }
    return kExitOk;
}

struct GradcheckArgs {
    std::string modality = "both";
    std::uint64_t seed = 5;
    std::size_t probes = 64;
    double threshold = 1e-4;
};

int run_gradcheck(const GradcheckArgs& a) {
    const ModelConfig cfg = ModelConfig::make(Preset::toy);
    GradCheckOptions opts;
    opts.probes_per_tensor = a.probes;
    opts.param_seed = a.seed;
    opts.probe_seed = a.seed + 1;

    bool ok = true;
    auto check = [&](Modality m) {
        Rng data_seed(a.seed, "data");
        DatasetHandle d{"gradcheck", m, 1, data_seed.key(), cfg.input_size, cfg.input_size,
                        m == Modality::image ? std::size_t{1} : cfg.video_frames};
        const VisualTensor x = generate_synthetic(d, 0);
        const double err =
            grad_check(cfg, x, MaskSpec{MaskKind::random, 0.5, a.seed + 2}, opts);
        std::cout << "gradcheck " << to_string(m) << ": max rel err = " << err
                  << (err < a.threshold ? "  (ok)" : "  (FAIL)") << "\n";
        ok = ok && err < a.threshold;
    };
    if (a.modality == "image" || a.modality == "both") check(Modality::image);
    if (a.modality == "video" || a.modality == "both") check(Modality::video);
    return ok ? kExitOk : kExitFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Omnivorous masked-autoencoder workbench"};
    app.require_subcommand(1);

    GenDataArgs gen;
    CLI::App* cmd_gen = app.add_subcommand("gen-data", "Generate synthetic samples + manifest");
    cmd_gen->add_option("--images", gen.images, "Image sample count");
    cmd_gen->add_option("--videos", gen.videos, "Video sample count");
    cmd_gen->add_option("--size", gen.size, "Spatial size (pixels)");
    cmd_gen->add_option("--frames", gen.frames, "Video frame count");
    cmd_gen->add_option("--seed", gen.seed, "Generation seed");
    cmd_gen->add_option("--out", gen.out, "Output directory");
    cmd_gen->add_option("--dtype", gen.dtype, "Sample dtype: u8 or f64")
        ->check(CLI::IsMember({"u8", "f64"}));
    cmd_gen->add_option("--preset", gen.preset, "Preset whose patch extents must divide dims");

    std::string config_path;
    CLI::App* cmd_pre = app.add_subcommand("pretrain", "Run the toy pretraining loop");
    cmd_pre->add_option("--config", config_path, "key=value run config")->required();

    ReconstructArgs rec;
    CLI::App* cmd_rec = app.add_subcommand("reconstruct", "Render masked reconstructions");
    cmd_rec->add_option("--checkpoint", rec.checkpoint, "Checkpoint directory")->required();
    cmd_rec->add_option("--input", rec.input, "Input sample (.omnt or .ppm)")->required();
    cmd_rec->add_option("--ratio", rec.ratios, "Masking ratio(s)");
    cmd_rec->add_option("--kind", rec.kind, "Mask kind");
    cmd_rec->add_option("--seed", rec.seed, "Mask seed");
    cmd_rec->add_option("--out", rec.out, "Output directory");

    FlopsArgs fl;
    CLI::App* cmd_fl = app.add_subcommand("flops", "Analytical compute accounting");
    cmd_fl->add_option("--preset", fl.preset, "vit-b, vit-l, vit-h or toy");
    cmd_fl->add_option("--modality", fl.modality, "image or video")
        ->check(CLI::IsMember({"image", "video"}));
    cmd_fl->add_option("--ratio", fl.ratio, "Masking ratio (defaults per modality)");
    cmd_fl->add_flag("--table", fl.table, "Print the full preset x modality table");
    cmd_fl->add_option("--csv", fl.csv, "Also write CSV to this path");

    SimulateArgs sim;
    CLI::App* cmd_sim = app.add_subcommand("simulate-io", "Dataloading discrete-event simulation");
    cmd_sim->add_option("--replication", sim.replication, "Replication factors")->delimiter(',');
    cmd_sim->add_option("--samples", sim.samples, "Distinct samples per epoch at R=1");
    cmd_sim->add_option("--batch", sim.batch, "Batch size");
    cmd_sim->add_option("--read-ms", sim.read_ms, "Mean read latency");
    cmd_sim->add_option("--jitter-ms", sim.jitter_ms, "Read latency jitter (+-)");
    cmd_sim->add_option("--decode-ms", sim.decode_ms, "Decode cost per sample");
    cmd_sim->add_option("--compute-ms", sim.compute_ms, "Compute cost per step");
    cmd_sim->add_option("--workers", sim.workers, "Decode workers");
    cmd_sim->add_option("--inflight", sim.inflight, "Max in-flight requests");
    cmd_sim->add_option("--seed", sim.seed, "Simulation seed");
    cmd_sim->add_option("--csv", sim.csv, "Also write CSV to this path");

    GradcheckArgs gc;
    CLI::App* cmd_gc = app.add_subcommand("gradcheck", "Tape gradients vs finite differences");
    cmd_gc->add_option("--modality", gc.modality, "image, video or both")
        ->check(CLI::IsMember({"image", "video", "both"}));
    cmd_gc->add_option("--seed", gc.seed, "Parameter/probe seed");
    cmd_gc->add_option("--probes", gc.probes, "Probes per parameter tensor");
    cmd_gc->add_option("--threshold", gc.threshold, "Max allowed relative error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (cmd_gen->parsed()) return run_gen_data(gen);
        if (cmd_pre->parsed()) return run_pretrain_cmd(config_path);
        if (cmd_rec->parsed()) return run_reconstruct(rec);
        if (cmd_fl->parsed()) return run_flops(fl);
        if (cmd_sim->parsed()) return run_simulate_io(sim);
        if (cmd_gc->parsed()) return run_gradcheck(gc);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParamError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
