#include "cli_app.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <set>

#include <fnmatch.h>
#include <omp.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "flow360/augment.hpp"
#include "flow360/colorize.hpp"
#include "flow360/error.hpp"
#include "flow360/eval.hpp"
#include "flow360/io.hpp"
#include "flow360/sphconv.hpp"
#include "flow360/sphere.hpp"
#include "flow360/warp.hpp"
#include "run_config.hpp"

namespace flow360::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
            return kExitUsage;
        case ErrorCode::EmptyMask:
        case ErrorCode::Divergence:
            return kExitNumerical;
        default:
            return kExitMalformedInput;
    }
}

void write_error(std::ostream& err, std::string_view code, const std::string& message, int exit) {
    Json j;
    j["error"] = code;
    j["message"] = message;
    j["exit_code"] = exit;
    err << j.dump() << "\n";
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("flow360", sink);
    logger->set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("FLOW360_LOG")) level = spdlog::level::from_str(env);
    logger->set_level(level);
    return logger;
}

std::string option_name(const std::string& key) {
    std::string name = "--" + key;
    std::replace(name.begin(), name.end(), '_', '-');
    return name;
}

struct Context {
    RunConfig cfg;
    std::optional<fs::path> out_path;
    int jobs = 1;
    bool strict = false;
    std::ostream* out = nullptr;
    std::shared_ptr<spdlog::logger> log;

    Exec kernel_exec() const { return jobs > 1 ? Exec::Parallel : Exec::Serial; }

    const fs::path& require_out(const char* what) const {
        if (!out_path) throw Error(ErrorCode::InvalidArgument, std::string(what) + " requires --out");
        return *out_path;
    }

    fs::path out_dir(const char* what) const {
        const fs::path& dir = require_out(what);
        fs::create_directories(dir);
        return dir;
    }
};

std::vector<fs::path> list_matching(const fs::path& dir, const std::string& pattern) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (fnmatch(pattern.c_str(), name.c_str(), 0) == 0) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

// frame_0007 -> frame_0008, keeping the digit width.
std::string next_frame_stem(const std::string& stem) {
    std::size_t digits = stem.size();
    while (digits > 0 && std::isdigit(static_cast<unsigned char>(stem[digits - 1]))) --digits;
    if (digits == stem.size()) {
        throw Error(ErrorCode::InvalidArgument, "flow file name has no frame number: " + stem);
    }
    const std::string number = stem.substr(digits);
    unsigned long long n = 0;
    std::from_chars(number.data(), number.data() + number.size(), n);
    std::string next = std::to_string(n + 1);
    if (next.size() < number.size()) next.insert(0, number.size() - next.size(), '0');
    return stem.substr(0, digits) + next;
}

fs::path find_image(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".png", ".ppm", ".pgm"}) {
        fs::path p = dir / (stem + ext);
        if (fs::exists(p)) return p;
    }
    throw Error(ErrorCode::Io, "no image for frame " + (dir / stem).string());
}

fs::path suffixed(const fs::path& dir, const fs::path& input) {
    return dir / (input.stem().string() + "_360" + input.extension().string());
}

struct Task {
    fs::path input;
    bool is_flow = false;
};

// Runs tasks over `jobs` workers; failures are collected per task and
// reported in input order.
template <class F>
void run_tasks(const Context& ctx, const std::vector<Task>& tasks, F&& fn) {
    std::vector<std::optional<Error>> failures(tasks.size());
#pragma omp parallel for num_threads(ctx.jobs) schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(tasks.size()); ++i) {
        try {
            fn(tasks[i]);
        } catch (const Error& e) {
            failures[i] = e;
        } catch (const std::exception& e) {
            failures[i] = Error(ErrorCode::Io, e.what());
        }
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!failures[i]) continue;
        if (ctx.strict) throw *failures[i];
        ctx.log->warn("skipped {}: {}", tasks[i].input.string(), failures[i]->what());
    }
}

AugmentOptions augment_options(const Context& ctx) {
    AugmentOptions opts;
    if (ctx.cfg.height > 0) opts.height = ctx.cfg.height;
    opts.correction = ctx.cfg.correction;
    opts.interp = ctx.cfg.interp;
    opts.exec = ctx.kernel_exec();
    return opts;
}

void cmd_augment(const Context& ctx, const std::vector<std::string>& inputs,
                 const std::optional<std::string>& dir, const std::optional<std::string>& image_dir) {
    const fs::path out = ctx.out_dir("augment");
    std::vector<Task> tasks;
    if (dir) {
        if (!inputs.empty()) throw Error(ErrorCode::InvalidArgument, "augment: give either --dir or IMG1 IMG2 FLO");
        const fs::path images = image_dir ? fs::path(*image_dir) : fs::path(*dir);
        std::set<fs::path> seen;
        for (const fs::path& flo : list_matching(*dir, ctx.cfg.glob)) {
            tasks.push_back({flo, true});
            const std::string stem = flo.stem().string();
            try {
                for (const std::string& s : {stem, next_frame_stem(stem)}) {
                    const fs::path img = find_image(images, s);
                    if (seen.insert(img).second) tasks.push_back({img, false});
                }
            } catch (const Error& e) {
                if (ctx.strict) throw;
                ctx.log->warn("skipped {}: {}", flo.string(), e.what());
            }
        }
        ctx.log->info("augment: {} files from {}", tasks.size(), *dir);
    } else {
        if (inputs.size() != 3) throw Error(ErrorCode::InvalidArgument, "augment: expected IMG1 IMG2 FLO");
        tasks = {{inputs[0], false}, {inputs[1], false}, {inputs[2], true}};
    }

    const AugmentOptions opts = augment_options(ctx);
    run_tasks(ctx, tasks, [&](const Task& t) {
        if (t.is_flow) {
            write_flo(augment_flow(read_flo(t.input), opts), suffixed(out, t.input));
        } else {
            write_image(augment_image(read_image(t.input), opts), suffixed(out, t.input));
        }
    });
}

void cmd_synth(const Context& ctx) {
    const fs::path out = ctx.out_dir("synth");
    const RunConfig& c = ctx.cfg;
    const int h = c.synth_height;
    const SphereRotation rot = SphereRotation::from_ypr_degrees(c.yaw, c.pitch, c.roll);
    const Image frame1 = sphere_texture(h, 2 * h, c.synth_channels, c.seed);
    const Image frame2 = rotate_equirect(frame1, rot, c.interp, ctx.kernel_exec());
    const FlowField flow = rotation_flow(rot, h, 2 * h);
    const std::string ext = c.image_format == "png" ? ".png" : (c.synth_channels == 3 ? ".ppm" : ".pgm");
    write_image(frame1, out / ("frame1" + ext));
    write_image(frame2, out / ("frame2" + ext));
    write_flo(flow, out / "flow.flo");
    ctx.log->info("synth: wrote {}x{} pair to {}", h, 2 * h, out.string());
}

void cmd_warp(const Context& ctx, const std::string& image, const std::string& flo) {
    const fs::path& out = ctx.require_out("warp");
    write_image(backward_warp(read_image(image), read_flo(flo), ctx.kernel_exec()), out);
}

void emit(const Context& ctx, std::vector<std::string>& lines) {
    std::string text;
    for (const std::string& l : lines) text += l + "\n";
    if (ctx.out_path) {
        write_file_atomic(*ctx.out_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    } else {
        *ctx.out << text;
    }
}

std::string with_file(const MetricReport& r, const std::optional<std::string>& file) {
    if (!file) return to_json_line(r);
    Json j = Json::parse(to_json_line(r));
    j["file"] = *file;
    return j.dump();
}

std::vector<std::string> eval_pair(const Context& ctx, const FlowField& pred, const FlowField& gt,
                                   const std::optional<std::string>& file) {
    std::vector<std::string> lines;
    lines.push_back(with_file(epe(pred, gt), file));
    lines.push_back(with_file(wrapped_epe(pred, gt), file));
    for (const MetricReport& r : latitude_band_report(pred, gt, ctx.cfg.bands)) {
        lines.push_back(with_file(r, file));
    }
    return lines;
}

void cmd_eval(const Context& ctx, const std::vector<std::string>& inputs,
              const std::optional<std::string>& pred_dir, const std::optional<std::string>& gt_dir,
              const std::vector<std::string>& images) {
    std::vector<std::string> lines;
    if (pred_dir || gt_dir) {
        if (!pred_dir || !gt_dir || !inputs.empty() || !images.empty()) {
            throw Error(ErrorCode::InvalidArgument, "eval: batch mode takes --pred-dir and --gt-dir only");
        }
        const std::vector<fs::path> preds = list_matching(*pred_dir, ctx.cfg.glob);
        std::vector<std::vector<std::string>> per_file(preds.size());
        std::vector<Task> tasks;
        for (const fs::path& p : preds) tasks.push_back({p, true});
        std::map<fs::path, std::size_t> index;
        for (std::size_t i = 0; i < preds.size(); ++i) index[preds[i]] = i;
        run_tasks(ctx, tasks, [&](const Task& t) {
            const std::string name = t.input.filename().string();
            per_file[index.at(t.input)] =
                eval_pair(ctx, read_flo(t.input), read_flo(fs::path(*gt_dir) / name), name);
        });
        for (auto& f : per_file) lines.insert(lines.end(), f.begin(), f.end());
    } else {
        if (inputs.size() != 2) throw Error(ErrorCode::InvalidArgument, "eval: expected PRED GT");
        const FlowField pred = read_flo(inputs[0]);
        const FlowField gt = read_flo(inputs[1]);
        lines = eval_pair(ctx, pred, gt, std::nullopt);
        if (!images.empty()) {
            const Image i1 = read_image(images[0]);
            const Image i2 = read_image(images[1]);
            MetricReport r;
            r.name = "brightness_error";
            r.value = brightness_error(i1, pred, i2, ctx.cfg.pole_fraction);
            const int dropped = pole_rows(i1.height(), ctx.cfg.pole_fraction);
            r.count = static_cast<long long>(i1.height() - 2 * dropped) * i1.width();
            r.aux.emplace_back("pole_fraction", ctx.cfg.pole_fraction);
            lines.push_back(to_json_line(r));
        }
    }
    emit(ctx, lines);
}

Image mask_image(const OcclusionMask& m) {
    Image img(m.height(), m.width(), 1);
    for (std::size_t i = 0; i < m.data().size(); ++i) img.data()[i] = m.data()[i] ? 1.0f : 0.0f;
    return img;
}

void cmd_occlusion(const Context& ctx, const std::string& fw, const std::string& bw,
                   const std::vector<std::string>& images) {
    const fs::path out = ctx.out_dir("occlusion");
    const RunConfig& c = ctx.cfg;
    const FlowField flow_fw = read_flo(fw);
    const FlowField flow_bw = read_flo(bw);
    const OcclusionPair occ = occlusion_masks(flow_fw, flow_bw, c.mask_eps, c.occlusion_mode);
    const std::string ext = c.image_format == "png" ? ".png" : ".pgm";
    write_image(mask_image(occ.forward), out / ("occ_fw" + ext));
    write_image(mask_image(occ.backward), out / ("occ_bw" + ext));
    if (images.empty()) return;

    const Image i1 = read_image(images[0]);
    const Image i2 = read_image(images[1]);
    const Image i1_pred = backward_warp(i2, flow_fw, ctx.kernel_exec());
    const Image i2_pred = backward_warp(i1, flow_bw, ctx.kernel_exec());
    const PhotometricLoss lp =
        photometric_loss_terms(i1, i2, i1_pred, i2_pred, occ.forward, occ.backward, c.eps, c.q);
    const auto pixels = static_cast<long long>(i1.height()) * i1.width();
    auto record = [&](const char* name, double value, long long count) {
        MetricReport r;
        r.name = name;
        r.value = value;
        r.count = count;
        r.aux = {{"eps", c.eps}, {"q", c.q}};
        return to_json_line(r);
    };
    std::vector<std::string> lines = {
        record("photometric_loss", lp.total(), 2 * pixels),
        record("photometric_loss_fw", lp.forward, pixels - static_cast<long long>(occ.forward.count_ones())),
        record("photometric_loss_bw", lp.backward, pixels - static_cast<long long>(occ.backward.count_ones())),
    };
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    *ctx.out << text;
}

void cmd_colorize(const Context& ctx, const std::string& flo) {
    const fs::path& out = ctx.require_out("colorize");
    std::optional<float> max;
    if (ctx.cfg.colorize_max > 0.0) max = static_cast<float>(ctx.cfg.colorize_max);
    write_image(flow_to_color(read_flo(flo), max), out);
}

void cmd_fit(const Context& ctx, const std::string& kernel, const std::string& src,
             const std::string& aug) {
    const fs::path out = ctx.out_dir("fit");
    const RunConfig& c = ctx.cfg;
    const Kernel k = read_kernel(kernel);
    const std::vector<FeatureMap> x_src = read_feature_batch(src);
    const std::vector<FeatureMap> x_aug = read_feature_batch(aug);
    const RowGroupPlan plan = rowgroup_partition(x_src.front().height(), c.n_g, c.n_l);
    FitOptions opts;
    opts.method = c.method;
    opts.correspondence = c.correspondence;
    opts.padding = c.padding;
    opts.step = c.step;
    opts.iters = c.iters;
    opts.tol = c.tol;
    opts.ridge = c.ridge;
    opts.exec = ctx.kernel_exec();
    const FitResult fit = fit_transform(x_src, x_aug, k, plan, opts);
    write_projections(fit.projections, out / "projections.f3pm");

    std::string trace;
    for (std::size_t i = 0; i < fit.loss_trace.size(); ++i) {
        Json j;
        j["name"] = "loss";
        j["iteration"] = i;
        j["value"] = fit.loss_trace[i];
        trace += j.dump() + "\n";
    }
    Json last;
    last["name"] = "final_loss";
    last["value"] = fit.final_loss;
    last["count"] = fit.loss_trace.size();
    last["degenerate"] = fit.degenerate;
    if (c.method == FitMethod::GradientDescent) {
        last["step"] = fit.step;
        last["lipschitz"] = fit.lipschitz;
    }
    trace += last.dump() + "\n";
    write_file_atomic(out / "trace.jsonl", std::span(reinterpret_cast<const std::uint8_t*>(trace.data()), trace.size()));
    *ctx.out << last.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optical flow tools for 360-degree equirectangular video", "flow360"};
    app.fallthrough();
    app.require_subcommand(0, 1);

    std::optional<std::string> config_path;
    std::optional<std::string> out_path;
    int jobs = 1;
    bool strict = false;
    bool print_config = false;
    app.add_option("--config", config_path, "key = value config file (flags override it)");
    app.add_option("--out", out_path, "Output file or directory");
    app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--strict", strict, "Fail on the first bad file in batch mode");
    app.add_flag("--print-config", print_config, "Print the effective configuration and exit");

    std::map<std::string, std::string> overrides;
    for (const std::string& key : RunConfig::keys()) {
        app.add_option(option_name(key), overrides[key], "Config key " + key)->group("Config");
    }

    std::vector<std::string> augment_inputs;
    std::optional<std::string> augment_dir, augment_image_dir;
    auto* augment = app.add_subcommand("augment", "Spherical augmentation of an image pair and its flow");
    augment->add_option("inputs", augment_inputs, "IMG1 IMG2 FLO");
    augment->add_option("--dir", augment_dir, "Batch mode: directory of .flo files");
    augment->add_option("--image-dir", augment_image_dir, "Batch mode: image directory (default --dir)");

    app.add_subcommand("synth", "Synthetic rotated pair with ground-truth flow");

    std::string warp_image, warp_flo;
    auto* warp = app.add_subcommand("warp", "Backward-warp an image by a flow field");
    warp->add_option("image", warp_image)->required();
    warp->add_option("flow", warp_flo)->required();

    std::string occ_fw, occ_bw;
    std::vector<std::string> occ_images;
    auto* occlusion = app.add_subcommand("occlusion", "Occlusion masks and photometric loss");
    occlusion->add_option("flow_fw", occ_fw)->required();
    occlusion->add_option("flow_bw", occ_bw)->required();
    occlusion->add_option("--images", occ_images, "I1 I2 for the photometric loss")->expected(2);

    std::vector<std::string> eval_inputs, eval_images;
    std::optional<std::string> pred_dir, gt_dir;
    auto* eval = app.add_subcommand("eval", "Endpoint-error metrics as JSON lines");
    eval->add_option("inputs", eval_inputs, "PRED GT");
    eval->add_option("--pred-dir", pred_dir);
    eval->add_option("--gt-dir", gt_dir);
    eval->add_option("--images", eval_images, "I1 I2 for the brightness error")->expected(2);

    std::string color_flo;
    auto* colorize = app.add_subcommand("colorize", "Color-wheel rendering of a flow field");
    colorize->add_option("flow", color_flo)->required();

    std::string fit_kernel, fit_src, fit_aug;
    auto* fit = app.add_subcommand("fit", "Fit per-row-group kernel projections");
    fit->add_option("kernel", fit_kernel)->required();
    fit->add_option("src_features", fit_src)->required();
    fit->add_option("aug_features", fit_aug)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        write_error(err, "usage", e.what(), kExitUsage);
        return kExitUsage;
    }

    Context ctx;
    ctx.out = &out;
    ctx.log = make_logger(err);
    ctx.jobs = jobs;
    ctx.strict = strict;
    if (out_path) ctx.out_path = fs::path(*out_path);

    try {
        if (config_path) load_config_file(ctx.cfg, *config_path);
        for (const std::string& key : RunConfig::keys()) {
            if (app.get_option(option_name(key))->count() > 0) ctx.cfg.set(key, overrides[key]);
        }
        ctx.cfg.validate();
        if (print_config) {
            out << ctx.cfg.dump();
            return kExitOk;
        }
        if (app.get_subcommands().empty()) {
            throw Error(ErrorCode::InvalidArgument, "a subcommand is required (see --help)");
        }
        omp_set_num_threads(jobs);

        if (augment->parsed()) {
            cmd_augment(ctx, augment_inputs, augment_dir, augment_image_dir);
        } else if (app.got_subcommand("synth")) {
            cmd_synth(ctx);
        } else if (warp->parsed()) {
            cmd_warp(ctx, warp_image, warp_flo);
        } else if (occlusion->parsed()) {
            cmd_occlusion(ctx, occ_fw, occ_bw, occ_images);
        } else if (eval->parsed()) {
            cmd_eval(ctx, eval_inputs, pred_dir, gt_dir, eval_images);
        } else if (colorize->parsed()) {
            cmd_colorize(ctx, color_flo);
        } else if (fit->parsed()) {
            cmd_fit(ctx, fit_kernel, fit_src, fit_aug);
        }
    } catch (const Error& e) {
        const int code = exit_code_for(e.code());
        write_error(err, to_string(e.code()), e.what(), code);
        return code;
    } catch (const fs::filesystem_error& e) {
        write_error(err, "io", e.what(), kExitMalformedInput);
        return kExitMalformedInput;
    }
    return kExitOk;
}

}  // namespace flow360::cli
