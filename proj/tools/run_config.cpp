#include "run_config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "flow360/error.hpp"
#include "flow360/io.hpp"

namespace flow360::cli {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw Error(ErrorCode::InvalidArgument, "config: invalid value '" + value + "' for " + key);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) bad_value(key, value);
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(out)) bad_value(key, value);
    }
    return out;
}

template <class E>
E parse_enum(const std::string& key, const std::string& value,
             std::initializer_list<std::pair<const char*, E>> names) {
    for (const auto& [name, e] : names) {
        if (value == name) return e;
    }
    bad_value(key, value);
}

template <class E>
std::string enum_name(E e, std::initializer_list<std::pair<const char*, E>> names) {
    for (const auto& [name, v] : names) {
        if (v == e) return name;
    }
    return "?";
}

const std::initializer_list<std::pair<const char*, CorrectionMode>> kCorrection = {
    {"paper", CorrectionMode::Paper}, {"geometric", CorrectionMode::Geometric}};
const std::initializer_list<std::pair<const char*, Interp>> kInterp = {
    {"bilinear", Interp::Bilinear}, {"nearest", Interp::Nearest}};
const std::initializer_list<std::pair<const char*, OcclusionMode>> kOcclusion = {
    {"literal", OcclusionMode::Literal}, {"fb-consistency", OcclusionMode::FbConsistency}};
const std::initializer_list<std::pair<const char*, FitMethod>> kMethod = {
    {"least-squares", FitMethod::LeastSquares}, {"gradient-descent", FitMethod::GradientDescent}};
const std::initializer_list<std::pair<const char*, Correspondence>> kCorrespondence = {
    {"identity", Correspondence::Identity},
    {"spherical-projection", Correspondence::SphericalProjection}};
const std::initializer_list<std::pair<const char*, Padding>> kPadding = {
    {"zero", Padding::Zero}, {"horizontal-wrap", Padding::HorizontalWrap}};

// Shortest text that parses back to the same double.
std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define F360_INT(name) \
    {#name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.name = parse_number<int>(k, v); }, \
             [](const RunConfig& c) { return std::to_string(c.name); }}}
#define F360_DOUBLE(name) \
    {#name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.name = parse_number<double>(k, v); }, \
             [](const RunConfig& c) { return fmt(c.name); }}}
#define F360_ENUM(name, table) \
    {#name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.name = parse_enum(k, v, table); }, \
             [](const RunConfig& c) { return enum_name(c.name, table); }}}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = {
        F360_INT(height),
        F360_ENUM(correction, kCorrection),
        F360_ENUM(interp, kInterp),
        F360_INT(synth_height),
        F360_INT(synth_channels),
        F360_DOUBLE(yaw),
        F360_DOUBLE(pitch),
        F360_DOUBLE(roll),
        {"seed", {[](RunConfig& c, const std::string& k, const std::string& v) {
                      c.seed = parse_number<std::uint64_t>(k, v);
                  },
                  [](const RunConfig& c) { return std::to_string(c.seed); }}},
        {"image_format", {[](RunConfig& c, const std::string& k, const std::string& v) {
                              if (v != "ppm" && v != "png") bad_value(k, v);
                              c.image_format = v;
                          },
                          [](const RunConfig& c) { return c.image_format; }}},
        F360_DOUBLE(eps),
        F360_DOUBLE(q),
        F360_DOUBLE(mask_eps),
        F360_ENUM(occlusion_mode, kOcclusion),
        F360_INT(bands),
        F360_DOUBLE(pole_fraction),
        F360_DOUBLE(colorize_max),
        F360_INT(n_g),
        F360_INT(n_l),
        F360_ENUM(method, kMethod),
        F360_ENUM(correspondence, kCorrespondence),
        F360_ENUM(padding, kPadding),
        F360_DOUBLE(step),
        F360_INT(iters),
        F360_DOUBLE(tol),
        F360_DOUBLE(ridge),
        {"glob", {[](RunConfig& c, const std::string& k, const std::string& v) {
                      if (v.empty()) bad_value(k, v);
                      c.glob = v;
                  },
                  [](const RunConfig& c) { return c.glob; }}},
    };
    return table;
}

#undef F360_INT
#undef F360_DOUBLE
#undef F360_ENUM

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, "config: " + what);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw Error(ErrorCode::InvalidArgument, "config: unknown key '" + key + "'");
    it->second.set(*this, key, value);
}

void RunConfig::validate() const {
    require(height >= 0, "height must be >= 0");
    require(synth_height >= 1, "synth_height must be >= 1");
    require(synth_channels == 1 || synth_channels == 3, "synth_channels must be 1 or 3");
    require(eps >= 0.0, "eps must be >= 0");
    require(q > 0.0 && q <= 1.0, "q must lie in (0, 1]");
    require(mask_eps >= 0.0, "mask_eps must be >= 0");
    require(bands >= 1, "bands must be >= 1");
    require(pole_fraction >= 0.0 && pole_fraction < 0.5, "pole_fraction must lie in [0, 0.5)");
    require(colorize_max >= 0.0, "colorize_max must be >= 0");
    require(n_g >= 1, "n_g must be >= 1");
    require(n_l >= 0 && n_l <= n_g, "n_l must lie in [0, n_g]");
    require(step >= 0.0, "step must be >= 0");
    require(iters >= 0, "iters must be >= 0");
    require(tol >= 0.0, "tol must be >= 0");
    require(ridge >= 0.0, "ridge must be >= 0");
}

std::string RunConfig::dump() const {
    std::string out;
    for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
    return out;
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> v;
        for (const auto& [key, field] : fields()) v.push_back(key);
        return v;
    }();
    return k;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::InvalidArgument,
                        "config line " + std::to_string(lineno) + ": expected key = value");
        }
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    for (const auto& [k, v] : parse_config_text(std::string(bytes.begin(), bytes.end()))) {
        cfg.set(k, v);
    }
}

}  // namespace flow360::cli
