#include "flow360/io.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include <png.h>
#include <unistd.h>

#include "flow360/detail/bytes.hpp"
#include "flow360/error.hpp"

namespace flow360 {

namespace {

namespace fs = std::filesystem;

using detail::get_f32;
using detail::get_u32;
using detail::put_f32;
using detail::put_u32;

std::string lowercase_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return ext;
}

// PNM header tokenizer: whitespace and '#' comments between fields.
class PnmHeader {
public:
    explicit PnmHeader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    int next_int() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
            throw Error(ErrorCode::MalformedHeader, "PNM header: expected a number");
        }
        long long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_++] - '0');
            if (value > (1 << 24)) throw Error(ErrorCode::MalformedHeader, "PNM header: value too large");
        }
        return static_cast<int>(value);
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_offset() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw Error(ErrorCode::MalformedHeader, "PNM header: missing separator before raster");
        }
        return pos_ + 1;
    }

    void seek(std::size_t pos) { pos_ = pos; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

bool is_png(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    return bytes.size() >= 8 && std::memcmp(bytes.data(), kSig, 8) == 0;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::MalformedHeader, std::string("PNG: ") + png.message);
    }
    const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int channels = color ? 3 : 1;
    if (png.width < 1 || png.height < 1 || png.width > (1u << 24) || png.height > (1u << 24)) {
        png_image_free(&png);
        throw Error(ErrorCode::MalformedHeader, "PNG: unsupported dimensions");
    }
    std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, raw.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw Error(ErrorCode::TruncatedFile, "PNG: " + msg);
    }
    Image img(static_cast<int>(png.height), static_cast<int>(png.width), channels);
    auto data = img.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = raw[i] / 255.0f;
    return img;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width());
    png.height = static_cast<png_uint_32>(img.height());
    png.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

    std::vector<std::uint8_t> raw(img.data().size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize_unit(img.data()[i]);

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, raw.data(), 0, nullptr)) {
        throw Error(ErrorCode::Io, std::string("PNG encode: ") + png.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, raw.data(), 0, nullptr)) {
        throw Error(ErrorCode::Io, std::string("PNG encode: ") + png.message);
    }
    out.resize(size);
    return out;
}

}  // namespace

std::uint8_t quantize_unit(float value) {
    const double v = std::isfinite(value) ? std::clamp(static_cast<double>(value), 0.0, 1.0) : 0.0;
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

FlowField decode_flo(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw Error(ErrorCode::TruncatedFile, ".flo: file shorter than sentinel");
    if (get_f32(bytes.data()) != kFloSentinel) {
        throw Error(ErrorCode::BadMagic, ".flo: missing 202021.25 sentinel");
    }
    if (bytes.size() < 12) throw Error(ErrorCode::TruncatedFile, ".flo: truncated header");
    const auto width = static_cast<std::int32_t>(get_u32(bytes.data() + 4));
    const auto height = static_cast<std::int32_t>(get_u32(bytes.data() + 8));
    if (width < 1 || height < 1 || width > (1 << 20) || height > (1 << 20)) {
        throw Error(ErrorCode::MalformedHeader, ".flo: invalid dimensions " +
                                                    std::to_string(width) + "x" +
                                                    std::to_string(height));
    }
    const std::size_t payload = static_cast<std::size_t>(width) * height * 8;
    if (bytes.size() < 12 + payload) {
        throw Error(ErrorCode::TruncatedFile, ".flo: payload truncated");
    }
    if (bytes.size() > 12 + payload) {
        throw Error(ErrorCode::TrailingData, ".flo: unexpected bytes after payload");
    }
    FlowField flow(height, width);
    auto data = flow.data();
    const std::uint8_t* p = bytes.data() + 12;
    for (std::size_t i = 0; i < data.size(); ++i, p += 4) {
        data[i] = get_f32(p);
        if (!std::isfinite(data[i])) {
            throw Error(ErrorCode::NonfiniteValues, ".flo: non-finite value at index " +
                                                        std::to_string(i));
        }
    }
    return flow;
}

std::vector<std::uint8_t> encode_flo(const FlowField& flow) {
    if (flow.empty()) throw Error(ErrorCode::ZeroDimension, ".flo: empty flow field");
    std::vector<std::uint8_t> out;
    out.reserve(12 + flow.data().size() * 4);
    put_f32(out, kFloSentinel);
    put_u32(out, static_cast<std::uint32_t>(flow.width()));
    put_u32(out, static_cast<std::uint32_t>(flow.height()));
    for (float v : flow.data()) put_f32(out, v);
    return out;
}

FlowField read_flo(const fs::path& path) { return decode_flo(read_file(path)); }

void write_flo(const FlowField& flow, const fs::path& path) {
    write_file_atomic(path, encode_flo(flow));
}

Image decode_pnm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
        throw Error(ErrorCode::UnsupportedFormat, "not a binary PPM/PGM file");
    }
    const int channels = bytes[1] == '6' ? 3 : 1;
    PnmHeader header(bytes);
    header.seek(2);
    const int width = header.next_int();
    const int height = header.next_int();
    const int maxval = header.next_int();
    if (width < 1 || height < 1) throw Error(ErrorCode::MalformedHeader, "PNM: zero dimension");
    if (maxval != 255) {
        throw Error(ErrorCode::UnsupportedFormat,
                    "PNM: only 8-bit maxval 255 is supported, got " + std::to_string(maxval));
    }
    const std::size_t offset = header.raster_offset();
    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() < offset + count) throw Error(ErrorCode::TruncatedFile, "PNM: raster truncated");
    Image img(height, width, channels);
    auto data = img.data();
    for (std::size_t i = 0; i < count; ++i) data[i] = bytes[offset + i] / 255.0f;
    return img;
}

std::vector<std::uint8_t> encode_pnm(const Image& img) {
    if (img.empty()) throw Error(ErrorCode::ZeroDimension, "PNM: empty image");
    const std::string header = std::string(img.channels() == 3 ? "P6" : "P5") + "\n" +
                               std::to_string(img.width()) + " " +
                               std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(header.size() + img.data().size());
    for (float v : img.data()) out.push_back(quantize_unit(v));
    return out;
}

Image read_image(const fs::path& path) {
    const auto bytes = read_file(path);
    if (is_png(bytes)) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pnm(bytes);
    throw Error(ErrorCode::UnsupportedFormat, "unrecognized image format: " + path.string());
}

void write_image(const Image& img, const fs::path& path) {
    const std::string ext = lowercase_extension(path);
    if (ext == ".png") {
        write_file_atomic(path, encode_png(img));
    } else if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
        write_file_atomic(path, encode_pnm(img));
    } else {
        throw Error(ErrorCode::UnsupportedFormat, "unsupported image extension: " + path.string());
    }
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorCode::Io, "read failed: " + path.string());
    return bytes;
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
    static std::atomic<unsigned> counter{0};
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(ErrorCode::Io, "write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::Io, "cannot rename into " + path.string());
    }
}

}  // namespace flow360
