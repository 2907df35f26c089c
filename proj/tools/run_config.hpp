#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "flow360/augment.hpp"
#include "flow360/sphconv.hpp"
#include "flow360/warp.hpp"

namespace flow360::cli {

/// Every tunable of every subcommand. Defaults live here and nowhere else.
struct RunConfig {
    // augment
    int height = 0;  // output height; 0 keeps the source height
    CorrectionMode correction = CorrectionMode::Paper;
    Interp interp = Interp::Bilinear;
    // synth
    int synth_height = 128;
    int synth_channels = 3;
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;
    std::uint64_t seed = 0;
    std::string image_format = "ppm";
    // occlusion / photometric loss
    double eps = 1e-2;
    double q = 0.1;
    double mask_eps = 1e-2;
    OcclusionMode occlusion_mode = OcclusionMode::Literal;
    // eval
    int bands = 4;
    double pole_fraction = 0.05;
    // colorize
    double colorize_max = 0.0;  // 0 picks the 99th-percentile magnitude
    // fit
    int n_g = 8;
    int n_l = 3;
    FitMethod method = FitMethod::LeastSquares;
    Correspondence correspondence = Correspondence::Identity;
    Padding padding = Padding::HorizontalWrap;
    double step = 0.0;
    int iters = 500;
    double tol = 1e-12;
    double ridge = 1e-8;
    // batch mode
    std::string glob = "*.flo";

    /// Throws Error{InvalidArgument} for unknown keys or unparsable values.
    void set(const std::string& key, const std::string& value);

    /// Throws Error{InvalidArgument} when a value is out of its range.
    void validate() const;

    /// "key = value" lines in key order; feeding them back through set()
    /// reproduces the configuration.
    std::string dump() const;

    static const std::vector<std::string>& keys();
};

/// Parses "key = value" lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

}  // namespace flow360::cli
