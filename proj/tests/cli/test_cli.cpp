#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli_app.hpp"
#include "flow360/io.hpp"
#include "flow360/sphconv.hpp"
#include "gen.hpp"

using namespace flow360;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("flow360_cli_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    fs::path operator/(const std::string& name) const { return path_ / name; }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::vector<json> json_lines(const std::string& text) {
    std::vector<json> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.push_back(json::parse(line));
    }
    return out;
}

json find_record(const std::vector<json>& lines, const std::string& name) {
    for (const json& j : lines)
        if (j["name"] == name) return j;
    ADD_FAILURE() << "no record " << name;
    return {};
}

json error_line(const Result& r) {
    const auto lines = json_lines(r.err.substr(r.err.rfind('{')));
    EXPECT_EQ(lines.size(), 1u);
    return lines.empty() ? json{} : lines[0];
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
    const Result unknown = run({"frobnicate"});
    EXPECT_EQ(unknown.code, cli::kExitUsage);
    EXPECT_EQ(error_line(unknown)["exit_code"], cli::kExitUsage);
    EXPECT_EQ(run({"warp", "only_one_arg"}).code, cli::kExitUsage);
    EXPECT_EQ(run({}).code, cli::kExitUsage);
    const Result badval = run({"--n-g", "abc", "synth"});
    EXPECT_EQ(badval.code, cli::kExitUsage);
    EXPECT_EQ(error_line(badval)["error"], "invalid-argument");
}

TEST(Cli, PrintConfigFlagsOverrideFile) {
    TempDir dir;
    std::ofstream(dir / "run.cfg") << "yaw = 10\npitch = 3  # tilt\n";
    const Result r = run({"--config", (dir / "run.cfg").string(), "--yaw", "25", "--print-config"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_NE(r.out.find("yaw = 25\n"), std::string::npos);
    EXPECT_NE(r.out.find("pitch = 3\n"), std::string::npos);
    EXPECT_NE(r.out.find("n_g = 8\n"), std::string::npos);
}

TEST(Cli, SynthWarpEvalPipeline) {
    TempDir dir;
    const std::string out = (dir / "synth").string();
    ASSERT_EQ(run({"--synth-height", "32", "--yaw", "20", "--pitch", "10", "--out", out, "synth"}).code, 0);
    const fs::path f1 = dir / "synth/frame1.ppm", f2 = dir / "synth/frame2.ppm", flo = dir / "synth/flow.flo";
    ASSERT_TRUE(fs::exists(f1) && fs::exists(f2) && fs::exists(flo));
    EXPECT_EQ(read_flo(flo).width(), 64);

    const Result w = run({"--out", (dir / "warped.ppm").string(), "warp", f2.string(), flo.string()});
    ASSERT_EQ(w.code, 0) << w.err;
    EXPECT_EQ(read_image(dir / "warped.ppm").height(), 32);

    const Result e = run({"eval", flo.string(), flo.string(), "--images", f1.string(), f2.string()});
    ASSERT_EQ(e.code, 0) << e.err;
    const auto lines = json_lines(e.out);
    EXPECT_EQ(find_record(lines, "epe")["value"], 0.0);
    EXPECT_EQ(find_record(lines, "wrapped_epe")["value"], 0.0);
    const json be = find_record(lines, "brightness_error");
    EXPECT_LT(be["value"].get<double>(), 0.05);
    EXPECT_EQ(be["pole_fraction"], 0.05);
    int bands = 0;
    for (const json& j : lines) bands += j.contains("band_index");
    EXPECT_EQ(bands, 4);
}

TEST(Cli, OutputsAreDeterministic) {
    TempDir dir;
    for (const char* sub : {"a", "b"}) {
        ASSERT_EQ(run({"--synth-height", "16", "--seed", "7", "--roll", "5", "--jobs", sub[0] == 'a' ? "1" : "2",
                       "--out", (dir / sub).string(), "synth"}).code, 0);
        ASSERT_EQ(run({"--out", (dir / (std::string(sub) + "_aug")).string(), "augment",
                       (dir / sub / "frame1.ppm").string(), (dir / sub / "frame2.ppm").string(),
                       (dir / sub / "flow.flo").string()}).code, 0);
    }
    for (const char* f : {"frame1.ppm", "frame2.ppm", "flow.flo"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    for (const char* f : {"frame1_360.ppm", "frame2_360.ppm", "flow_360.flo"})
        EXPECT_EQ(slurp(dir / "a_aug" / f), slurp(dir / "b_aug" / f)) << f;
}

TEST(Cli, ZeroFlowEvaluatesToZeroAndHasNoOcclusion) {
    TempDir dir;
    write_flo(FlowField(8, 16), dir / "zero.flo");
    const Result e = run({"eval", (dir / "zero.flo").string(), (dir / "zero.flo").string()});
    ASSERT_EQ(e.code, 0) << e.err;
    for (const json& j : json_lines(e.out)) EXPECT_EQ(j["value"], 0.0);

    write_image(Image(8, 16, 1, 0.5f), dir / "gray.pgm");
    const Result o = run({"--out", (dir / "occ").string(), "occlusion", (dir / "zero.flo").string(),
                          (dir / "zero.flo").string(), "--images", (dir / "gray.pgm").string(),
                          (dir / "gray.pgm").string()});
    ASSERT_EQ(o.code, 0) << o.err;
    // Both motion masks are all ones, so each cancels the other.
    for (const char* m : {"occ_fw.pgm", "occ_bw.pgm"}) {
        const Image mask = read_image(dir / "occ" / m);
        for (float v : mask.data()) EXPECT_EQ(v, 0.0f);
    }
    const auto lines = json_lines(o.out);
    EXPECT_NEAR(find_record(lines, "photometric_loss")["value"].get<double>(), 2 * std::pow(0.01, 0.1), 1e-12);
}

TEST(Cli, MalformedInputExitsThree) {
    TempDir dir;
    std::ofstream(dir / "bad.flo", std::ios::binary) << "not a flow file";
    write_flo(FlowField(4, 8), dir / "good.flo");
    const Result r = run({"eval", (dir / "bad.flo").string(), (dir / "good.flo").string()});
    EXPECT_EQ(r.code, cli::kExitMalformedInput);
    const json e = error_line(r);
    EXPECT_EQ(e["error"], "bad-magic");
    EXPECT_EQ(e["exit_code"], cli::kExitMalformedInput);
    EXPECT_EQ(run({"eval", (dir / "missing.flo").string(), (dir / "good.flo").string()}).code,
              cli::kExitMalformedInput);
    write_flo(FlowField(4, 6), dir / "odd.flo");
    EXPECT_EQ(run({"eval", (dir / "odd.flo").string(), (dir / "good.flo").string()}).code,
              cli::kExitMalformedInput);
}

TEST(Cli, BatchAugmentAndEval) {
    TempDir dir;
    gen::Rng rng(120);
    fs::create_directories(dir / "in");
    for (int f = 1; f <= 3; ++f) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04d.ppm", f);
        write_image(gen::quantized_image(rng, 8, 16, 3), dir / "in" / name);
    }
    write_flo(gen::flow(rng, 8, 16, 2.0), dir / "in/frame_0001.flo");
    write_flo(gen::flow(rng, 8, 16, 2.0), dir / "in/frame_0002.flo");
    write_flo(gen::flow(rng, 8, 16, 2.0), dir / "in/frame_0009.flo");  // frame_0010 is missing

    const std::string out = (dir / "out").string();
    const Result strict = run({"--strict", "--out", out, "augment", "--dir", (dir / "in").string()});
    EXPECT_EQ(strict.code, cli::kExitMalformedInput);

    const Result r = run({"--jobs", "2", "--out", out, "augment", "--dir", (dir / "in").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"frame_0001_360.flo", "frame_0002_360.flo", "frame_0009_360.flo",
                          "frame_0001_360.ppm", "frame_0002_360.ppm", "frame_0003_360.ppm"})
        EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
    EXPECT_NE(r.err.find("frame_0009"), std::string::npos);

    const Result e = run({"eval", "--pred-dir", out, "--gt-dir", out});
    ASSERT_EQ(e.code, 0) << e.err;
    const auto lines = json_lines(e.out);
    EXPECT_EQ(lines.size(), 3u * (2 + 4));
    for (const json& j : lines) {
        EXPECT_EQ(j["value"], 0.0);
        EXPECT_TRUE(j.contains("file"));
    }
    EXPECT_EQ(lines.front()["file"], "frame_0001_360.flo");
}

TEST(Cli, FitRecoversScaleAndWritesTrace) {
    TempDir dir;
    gen::Rng rng(121);
    std::vector<FeatureMap> src, aug;
    for (int b = 0; b < 2; ++b) {
        src.push_back(gen::features(rng, 16, 32, 3));
        aug.push_back(src.back());
        for (float& v : aug.back().data()) v *= 2.0f;
    }
    write_kernel(gen::kernel(rng, 3, 3, 3, 3), dir / "k.f3kn");
    write_feature_batch(src, dir / "src.f3fm");
    write_feature_batch(aug, dir / "aug.f3fm");
    const Result r = run({"--out", (dir / "fit").string(), "--n-g", "4", "--n-l", "2", "fit",
                          (dir / "k.f3kn").string(), (dir / "src.f3fm").string(), (dir / "aug.f3fm").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto trace = json_lines(slurp(dir / "fit/trace.jsonl"));
    ASSERT_GE(trace.size(), 2u);
    EXPECT_EQ(trace.back()["name"], "final_loss");
    EXPECT_LT(trace.back()["value"].get<double>(), 1e-6);
    EXPECT_EQ(trace.back()["degenerate"], false);
    const ProjectionMatrixSet p = read_projections(dir / "fit/projections.f3pm");
    ASSERT_EQ(p.size(), 4);
    for (const auto& m : p.matrices)
        for (int i = 0; i < 9; ++i)
            for (int j = 0; j < 9; ++j) EXPECT_NEAR(m.at(i, j), i == j ? 0.5 : 0.0, 1e-3);
}

TEST(Cli, DivergenceExitsFour) {
    TempDir dir;
    gen::Rng rng(122);
    std::vector<FeatureMap> src = {gen::features(rng, 8, 16, 1)};
    std::vector<FeatureMap> aug = {gen::features(rng, 8, 16, 1)};
    write_kernel(gen::kernel(rng, 3, 3, 1, 1), dir / "k.f3kn");
    write_feature_batch(src, dir / "src.f3fm");
    write_feature_batch(aug, dir / "aug.f3fm");
    const Result r = run({"--out", (dir / "fit").string(), "--n-g", "4", "--method", "gradient-descent",
                          "--step", "1e6", "fit", (dir / "k.f3kn").string(), (dir / "src.f3fm").string(),
                          (dir / "aug.f3fm").string()});
    EXPECT_EQ(r.code, cli::kExitNumerical);
    EXPECT_EQ(error_line(r)["error"], "divergence");
}

TEST(Cli, ColorizeWritesRgb) {
    TempDir dir;
    gen::Rng rng(123);
    write_flo(gen::flow(rng, 8, 16, 3.0), dir / "f.flo");
    ASSERT_EQ(run({"--out", (dir / "c.png").string(), "colorize", (dir / "f.flo").string()}).code, 0);
    const Image img = read_image(dir / "c.png");
    EXPECT_EQ(img.channels(), 3);
    EXPECT_EQ(img.width(), 16);
    EXPECT_EQ(run({"colorize", (dir / "f.flo").string()}).code, cli::kExitUsage);
}
