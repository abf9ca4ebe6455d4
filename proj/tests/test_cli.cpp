#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ovmae/masking.hpp"
#include "ovmae/pretrain.hpp"
#include "ovmae/tensor_io.hpp"

using namespace ovmae;
namespace fs = std::filesystem;

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string out;
};

CommandResult run_cli(const std::string& args, const std::string& dir) {
    const std::string out_file = dir + "/cmd_out.txt";
    const std::string cmd =
        std::string(OVMAE_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
    const int status = std::system(cmd.c_str());
    CommandResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

std::string fresh_dir(const std::string& name) {
    const std::string dir = (fs::temp_directory_path() / name).string();
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    EXPECT_TRUE(in.good()) << path;
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
    return lines;
}

// loss.csv rows with the wall_ms column stripped (timings are the one
// nondeterministic field).
std::vector<std::string> csv_without_wall(const std::string& path) {
    std::vector<std::string> rows;
    for (std::string& line : lines_of(slurp(path))) {
        const std::size_t cut = line.rfind(',');
        rows.push_back(line.substr(0, cut));
    }
    return rows;
}

} // namespace

TEST(Cli, UsageErrorsExitTwo) {
    const std::string dir = fresh_dir("ovmae_cli_usage");
    EXPECT_EQ(run_cli("no-such-command", dir).exit_code, 2);
    EXPECT_EQ(run_cli("", dir).exit_code, 2);
    EXPECT_EQ(run_cli("flops --modality bogus", dir).exit_code, 2);
}

TEST(Cli, FlopsMatchesPublishedRatios) {
    const std::string dir = fresh_dir("ovmae_cli_flops");
    CommandResult r =
        run_cli("flops --preset vit-b --modality video --ratio 0.95 --csv " + dir + "/f.csv",
                dir);
    EXPECT_EQ(r.exit_code, 0);
    const std::string csv = slurp(dir + "/f.csv");
    // vs-full must land near the published 7.8x.
    const auto rows = lines_of(csv);
    ASSERT_EQ(rows.size(), 2u);
    std::stringstream fields(rows[1]);
    std::string f;
    std::vector<std::string> cols;
    while (std::getline(fields, f, ',')) cols.push_back(f);
    ASSERT_EQ(cols.size(), 8u);
    const double vs_full = std::stod(cols[6]);
    EXPECT_GT(vs_full, 0.9 * 7.8);
    EXPECT_LT(vs_full, 1.1 * 7.8);
}

TEST(Cli, SimulateIoEmitsMonotoneCsv) {
    const std::string dir = fresh_dir("ovmae_cli_sim");
    CommandResult r = run_cli(
        "simulate-io --replication 1,2,4,8 --samples 128 --batch 32 --seed 3 --csv " + dir +
            "/sim.csv",
        dir);
    EXPECT_EQ(r.exit_code, 0);
    const auto rows = lines_of(slurp(dir + "/sim.csv"));
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0], "R,epoch_ms,distinct_loads,steps");
    double prev = 1e300;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::stringstream ss(rows[i]);
        std::string r_col, ms_col;
        std::getline(ss, r_col, ',');
        std::getline(ss, ms_col, ',');
        const double ms = std::stod(ms_col);
        EXPECT_LE(ms, prev);
        prev = ms;
    }
}

TEST(Cli, GradcheckExitsZero) {
    const std::string dir = fresh_dir("ovmae_cli_gc");
    CommandResult r = run_cli("gradcheck --probes 4 --seed 11", dir);
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_NE(r.out.find("max rel err"), std::string::npos);
}

TEST(Cli, GenDataDeterministicFilesAndManifest) {
    const std::string a = fresh_dir("ovmae_cli_gen_a");
    const std::string b = fresh_dir("ovmae_cli_gen_b");
    const std::string args = "gen-data --images 3 --videos 2 --size 32 --frames 4 --seed 9";
    EXPECT_EQ(run_cli(args + " --out " + a + "/data", a).exit_code, 0);
    EXPECT_EQ(run_cli(args + " --out " + b + "/data", b).exit_code, 0);

    const auto manifest = lines_of(slurp(a + "/data/manifest.txt"));
    ASSERT_EQ(manifest.size(), 5u);
    for (std::size_t i = 0; i < manifest.size(); ++i) // ids contiguous from 0
        EXPECT_EQ(manifest[i].substr(0, manifest[i].find(' ')), std::to_string(i));
    EXPECT_NE(manifest[0].find("image 1x32x32x3"), std::string::npos);
    EXPECT_NE(manifest[4].find("video 4x32x32x3"), std::string::npos);

    EXPECT_EQ(slurp(a + "/data/img0001.omnt"), slurp(b + "/data/img0001.omnt"));
    EXPECT_EQ(slurp(a + "/data/vid0001.omnt"), slurp(b + "/data/vid0001.omnt"));

    // Indivisible dims are rejected up front.
    EXPECT_EQ(run_cli("gen-data --images 1 --videos 0 --size 30 --out " + a + "/bad", a)
                  .exit_code,
              2);
}

TEST(Cli, PretrainReconstructPipeline) {
    const std::string dir = fresh_dir("ovmae_cli_train");
    ASSERT_EQ(run_cli("gen-data --images 4 --videos 4 --size 32 --frames 4 --seed 5 --out " +
                          dir + "/data",
                      dir)
                  .exit_code,
              0);

    std::ofstream cfg(dir + "/run.cfg");
    cfg << "preset = toy\n"
        << "seed = 3\n"
        << "batch_size = 4\n"
        << "total_epochs = 2\n"
        << "warmup_epochs = 1\n"
        << "lr = 1e-3\n"
        << "image_mask_ratio = 0.5\n"
        << "video_mask_ratio = 0.5\n"
        << "video_replication = 4\n"
        << "data_manifest = " << dir << "/data/manifest.txt\n"
        << "checkpoint_every = 10\n"
        << "out_dir = " << dir << "/run\n";
    cfg.close();

    CommandResult train = run_cli("pretrain --config " + dir + "/run.cfg", dir);
    ASSERT_EQ(train.exit_code, 0) << train.out;
    // 4 images / B=4 -> 1 batch; 4 videos at R=4 -> 1 batch; 2 epochs -> 4 rows.
    const auto rows = csv_without_wall(dir + "/run/loss.csv");
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0], "step,epoch,modality,loss,lr");
    EXPECT_TRUE(fs::exists(dir + "/run/checkpoint/manifest.txt"));

    // Rerun: trajectory identical modulo wall clock.
    std::ofstream cfg2(dir + "/run2.cfg");
    cfg2 << "preset = toy\nseed = 3\nbatch_size = 4\ntotal_epochs = 2\nwarmup_epochs = 1\n"
         << "lr = 1e-3\nimage_mask_ratio = 0.5\nvideo_mask_ratio = 0.5\nvideo_replication = 4\n"
         << "data_manifest = " << dir << "/data/manifest.txt\n"
         << "checkpoint_every = 10\nout_dir = " << dir << "/run2\n";
    cfg2.close();
    ASSERT_EQ(run_cli("pretrain --config " + dir + "/run2.cfg", dir).exit_code, 0);
    EXPECT_EQ(csv_without_wall(dir + "/run2/loss.csv"), rows);

    // Reconstruct from the checkpoint; kept-region bytes must equal input.
    CommandResult rec = run_cli("reconstruct --checkpoint " + dir +
                                    "/run/checkpoint --input " + dir +
                                    "/data/img0000.omnt --ratio 0.5 --seed 7 --out " + dir +
                                    "/recon",
                                dir);
    ASSERT_EQ(rec.exit_code, 0) << rec.out;
    ASSERT_TRUE(fs::exists(dir + "/recon/recon_r50.ppm"));

    const Tensor original = read_omnt(dir + "/data/img0000.omnt").tensor;
    const Tensor recon = read_ppm(dir + "/recon/recon_r50.ppm");
    // Regenerate the mask the CLI used and compare kept 16x16 blocks.
    Mask mask = generate_mask(GridDims{1, 2, 2}, MaskSpec{MaskKind::random, 0.5, 7});
    for (std::size_t kept : mask.kept) {
        const std::size_t by = (kept / 2) * 16, bx = (kept % 2) * 16;
        for (std::size_t y = 0; y < 16; ++y)
            for (std::size_t x = 0; x < 16; ++x)
                for (std::size_t c = 0; c < 3; ++c)
                    ASSERT_EQ(recon[((by + y) * 32 + bx + x) * 3 + c],
                              original[((0 * 32 + by + y) * 32 + bx + x) * 3 + c]);
    }

    // A ratio sweep writes one file per ratio.
    CommandResult sweep = run_cli("reconstruct --checkpoint " + dir +
                                      "/run/checkpoint --input " + dir +
                                      "/data/vid0000.omnt --ratio 0.5 --ratio 0.75 --seed 2 "
                                      "--out " +
                                      dir + "/sweep",
                                  dir);
    ASSERT_EQ(sweep.exit_code, 0) << sweep.out;
    EXPECT_TRUE(fs::exists(dir + "/sweep/recon_r50_f000.ppm"));
    EXPECT_TRUE(fs::exists(dir + "/sweep/recon_r75_f003.ppm"));
}

TEST(Cli, MalformedConfigReportsLineNumber) {
    const std::string dir = fresh_dir("ovmae_cli_badcfg");
    std::ofstream cfg(dir + "/bad.cfg");
    cfg << "preset = toy\n"
        << "this line has no equals sign\n";
    cfg.close();
    CommandResult r = run_cli("pretrain --config " + dir + "/bad.cfg", dir);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.out.find(":2:"), std::string::npos) << r.out;
}

// -- run-config parsing (library level) -------------------------------------------

TEST(RunConfigParse, DefaultsMirrorFinalModels) {
    std::istringstream empty("");
    const RunConfig rc = parse_run_config(empty);
    EXPECT_EQ(rc.image_mask_kind, MaskKind::random);
    EXPECT_DOUBLE_EQ(rc.image_mask_ratio, 0.90);
    EXPECT_DOUBLE_EQ(rc.video_mask_ratio, 0.95);
    EXPECT_DOUBLE_EQ(rc.optim.peak_lr, 3e-4);
    EXPECT_DOUBLE_EQ(rc.optim.weight_decay, 0.05);
    EXPECT_DOUBLE_EQ(rc.optim.beta1, 0.9);
    EXPECT_DOUBLE_EQ(rc.optim.beta2, 0.95);
    EXPECT_EQ(rc.video_replication, 4u);
    EXPECT_EQ(rc.image_replication, 1u);
}

TEST(RunConfigParse, CommentsAndOverrides) {
    std::istringstream in(
        "# comment line\n"
        "preset = toy   # trailing comment\n"
        "\n"
        "lr = 0.002\n"
        "video_mask_kind = tube\n");
    const RunConfig rc = parse_run_config(in);
    EXPECT_EQ(rc.preset, Preset::toy);
    EXPECT_DOUBLE_EQ(rc.optim.peak_lr, 0.002);
    EXPECT_EQ(rc.video_mask_kind, MaskKind::tube);
}

TEST(RunConfigParse, ErrorsCarryLineNumbers) {
    std::istringstream bad1("preset = toy\nnot a pair\n");
    try {
        parse_run_config(bad1, "cfg");
        FAIL() << "expected ParamError";
    } catch (const ParamError& e) {
        EXPECT_NE(std::string(e.what()).find("cfg:2"), std::string::npos);
    }
    std::istringstream bad2("mystery_key = 1\n");
    try {
        parse_run_config(bad2, "cfg");
        FAIL() << "expected ParamError";
    } catch (const ParamError& e) {
        EXPECT_NE(std::string(e.what()).find("unknown key"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("cfg:1"), std::string::npos);
    }
    std::istringstream bad3("lr = not_a_number\n");
    EXPECT_THROW(parse_run_config(bad3), ParamError);
}

TEST(ManifestParse, RoundTripAndErrors) {
    namespace fs = std::filesystem;
    const std::string dir = fresh_dir("ovmae_manifest_parse");
    {
        std::ofstream m(dir + "/manifest.txt");
        m << "0 a.omnt image 1x32x32x3\n"
          << "1 b.omnt video 4x32x32x3\n";
    }
    const auto entries = parse_manifest(dir + "/manifest.txt");
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].modality, Modality::image);
    EXPECT_EQ(entries[1].frames, 4u);
    EXPECT_EQ(entries[1].width, 32u);
    {
        std::ofstream m(dir + "/bad.txt");
        m << "0 a.omnt image 1x32x32\n"; // missing channel count
    }
    EXPECT_THROW(parse_manifest(dir + "/bad.txt"), IoError);
}
