#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flow360/raster.hpp"
#include "flow360/warp.hpp"

namespace flow360 {

struct MetricReport {
    std::string name;
    double value = 0.0;
    long long count = 0;
    std::optional<int> band_index;
    std::vector<std::pair<std::string, double>> aux;
};

/// Mean endpoint error over pixels where `mask` is 0 (mask = 1 excludes).
/// Throws Error{DimensionMismatch} or Error{EmptyMask}.
MetricReport epe(const FlowField& pred, const FlowField& gt,
                 const OcclusionMask* mask = nullptr);

/// EPE with the horizontal difference reduced modulo w into (-w/2, w/2].
MetricReport wrapped_epe(const FlowField& pred, const FlowField& gt);

/// One wrapped_epe per horizontal band; `bands` must divide the height.
std::vector<MetricReport> latitude_band_report(const FlowField& pred, const FlowField& gt,
                                               int bands);

/// Reduces d modulo period into (-period/2, period/2].
double wrap_difference(double d, double period);

/// One JSON object per line: name, value, count and band_index when set, plus
/// any aux entries.
std::string to_json_line(const MetricReport& report);

}  // namespace flow360
