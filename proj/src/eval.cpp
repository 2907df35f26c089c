#include "flow360/eval.hpp"

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "flow360/detail/sampling.hpp"
#include "flow360/error.hpp"

namespace flow360 {

namespace {

void require_same(const FlowField& a, const FlowField& b) {
    if (!a.same_shape(b)) {
        throw Error(ErrorCode::DimensionMismatch, "flow fields differ in size: " +
                                                      std::to_string(a.height()) + "x" +
                                                      std::to_string(a.width()) + " vs " +
                                                      std::to_string(b.height()) + "x" +
                                                      std::to_string(b.width()));
    }
}

// Sum of endpoint errors over rows [row_begin, row_end), optionally wrapping du.
MetricReport accumulate(const char* name, const FlowField& pred, const FlowField& gt,
                        int row_begin, int row_end, bool wrap, const OcclusionMask* mask) {
    double sum = 0.0;
    long long count = 0;
    const int w = pred.width();
    for (int y = row_begin; y < row_end; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask && mask->at(y, x)) continue;
            double du = static_cast<double>(pred.u(y, x)) - gt.u(y, x);
            const double dv = static_cast<double>(pred.v(y, x)) - gt.v(y, x);
            if (wrap) du = detail::wrap_periodic(du, w);
            sum += std::sqrt(du * du + dv * dv);
            ++count;
        }
    }
    MetricReport r;
    r.name = name;
    r.count = count;
    r.value = count > 0 ? sum / static_cast<double>(count) : 0.0;
    return r;
}

}  // namespace

double wrap_difference(double d, double period) { return detail::wrap_periodic(d, period); }

MetricReport epe(const FlowField& pred, const FlowField& gt, const OcclusionMask* mask) {
    require_same(pred, gt);
    if (mask) {
        if (mask->height() != pred.height() || mask->width() != pred.width()) {
            throw Error(ErrorCode::DimensionMismatch, "epe: mask size differs from flow size");
        }
        if (mask->count_ones() == static_cast<std::size_t>(pred.height()) * pred.width()) {
            throw Error(ErrorCode::EmptyMask, "epe: every pixel is masked out");
        }
    }
    return accumulate("epe", pred, gt, 0, pred.height(), false, mask);
}

MetricReport wrapped_epe(const FlowField& pred, const FlowField& gt) {
    require_same(pred, gt);
    return accumulate("wrapped_epe", pred, gt, 0, pred.height(), true, nullptr);
}

std::vector<MetricReport> latitude_band_report(const FlowField& pred, const FlowField& gt,
                                               int bands) {
    require_same(pred, gt);
    if (bands < 1 || pred.height() % bands != 0) {
        throw Error(ErrorCode::InvalidArgument, "band count " + std::to_string(bands) +
                                                    " must divide height " +
                                                    std::to_string(pred.height()));
    }
    const int rows = pred.height() / bands;
    std::vector<MetricReport> out;
    for (int b = 0; b < bands; ++b) {
        MetricReport r = accumulate("wrapped_epe_band", pred, gt, b * rows, (b + 1) * rows, true, nullptr);
        r.band_index = b;
        out.push_back(std::move(r));
    }
    return out;
}

std::string to_json_line(const MetricReport& report) {
    nlohmann::ordered_json j;
    j["name"] = report.name;
    j["value"] = report.value;
    j["count"] = report.count;
    if (report.band_index) j["band_index"] = *report.band_index;
    for (const auto& [key, value] : report.aux) j[key] = value;
    return j.dump();
}

}  // namespace flow360
