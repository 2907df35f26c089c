#include <cmath>
#include <cstring>
#include <string>

#include "flow360/detail/bytes.hpp"
#include "flow360/error.hpp"
#include "flow360/io.hpp"
#include "flow360/sphconv.hpp"

namespace flow360 {

namespace {

using detail::get_f32;
using detail::get_u32;
using detail::put_f32;
using detail::put_u32;

constexpr std::uint32_t kMaxDim = 1u << 20;

void put_magic(std::vector<std::uint8_t>& out, const char* magic) {
    out.insert(out.end(), magic, magic + 4);
}

// Bounds-checked little-endian reader over a byte buffer.
class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, const char* what) : bytes_(bytes), what_(what) {}

    void magic(const char* m) {
        if (bytes_.size() < 4) throw Error(ErrorCode::TruncatedFile, what_ + ": shorter than magic");
        if (std::memcmp(bytes_.data(), m, 4) != 0) {
            throw Error(ErrorCode::BadMagic, what_ + ": expected magic " + std::string(m, 4));
        }
        pos_ = 4;
    }

    std::uint32_t dim(bool allow_zero = false) {
        need(4);
        const std::uint32_t v = get_u32(bytes_.data() + pos_);
        pos_ += 4;
        if ((!allow_zero && v == 0) || v > kMaxDim) {
            throw Error(ErrorCode::MalformedHeader, what_ + ": invalid dimension " + std::to_string(v));
        }
        return v;
    }

    void floats(std::span<float> out) {
        need(out.size() * 4);
        for (float& f : out) {
            f = get_f32(bytes_.data() + pos_);
            pos_ += 4;
            if (!std::isfinite(f)) throw Error(ErrorCode::NonfiniteValues, what_ + ": non-finite value");
        }
    }

    void finish() const {
        if (pos_ != bytes_.size()) throw Error(ErrorCode::TrailingData, what_ + ": unexpected trailing bytes");
    }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw Error(ErrorCode::TruncatedFile, what_ + ": payload truncated");
    }

    std::span<const std::uint8_t> bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_kernel(const Kernel& k) {
    std::vector<std::uint8_t> out;
    put_magic(out, "F3KN");
    put_u32(out, static_cast<std::uint32_t>(k.kh()));
    put_u32(out, static_cast<std::uint32_t>(k.kw()));
    put_u32(out, static_cast<std::uint32_t>(k.c_in()));
    put_u32(out, static_cast<std::uint32_t>(k.c_out()));
    for (float v : k.data()) put_f32(out, v);
    return out;
}

Kernel decode_kernel(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "kernel");
    r.magic("F3KN");
    const int kh = static_cast<int>(r.dim());
    const int kw = static_cast<int>(r.dim());
    const int ci = static_cast<int>(r.dim());
    const int co = static_cast<int>(r.dim());
    if (kh % 2 == 0 || kw % 2 == 0) throw Error(ErrorCode::MalformedHeader, "kernel: even kernel size");
    Kernel k(kh, kw, ci, co);
    r.floats(k.data());
    r.finish();
    return k;
}

std::vector<std::uint8_t> encode_projections(const ProjectionMatrixSet& p) {
    std::vector<std::uint8_t> out;
    put_magic(out, "F3PM");
    put_u32(out, static_cast<std::uint32_t>(p.size()));
    for (const ProjectionMatrix& m : p.matrices) {
        put_u32(out, static_cast<std::uint32_t>(m.target_h));
        put_u32(out, static_cast<std::uint32_t>(m.target_w));
        put_u32(out, static_cast<std::uint32_t>(m.source_h));
        put_u32(out, static_cast<std::uint32_t>(m.source_w));
        for (float v : m.coeffs) put_f32(out, v);
    }
    return out;
}

ProjectionMatrixSet decode_projections(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "projections");
    r.magic("F3PM");
    const std::uint32_t count = r.dim();
    ProjectionMatrixSet set;
    for (std::uint32_t i = 0; i < count; ++i) {
        ProjectionMatrix m;
        m.target_h = static_cast<int>(r.dim());
        m.target_w = static_cast<int>(r.dim());
        m.source_h = static_cast<int>(r.dim());
        m.source_w = static_cast<int>(r.dim());
        const std::size_t n = static_cast<std::size_t>(m.rows()) * m.cols();
        if (n > (std::size_t{1} << 26)) throw Error(ErrorCode::MalformedHeader, "projections: matrix too large");
        m.coeffs.resize(n);
        r.floats(m.coeffs);
        set.matrices.push_back(std::move(m));
    }
    r.finish();
    return set;
}

std::vector<std::uint8_t> encode_feature_batch(std::span<const FeatureMap> batch) {
    if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "features: empty batch");
    for (const FeatureMap& f : batch) {
        if (!f.same_shape(batch.front())) {
            throw Error(ErrorCode::DimensionMismatch, "features: batch items differ in shape");
        }
    }
    std::vector<std::uint8_t> out;
    put_magic(out, "F3FM");
    put_u32(out, static_cast<std::uint32_t>(batch.size()));
    put_u32(out, static_cast<std::uint32_t>(batch.front().height()));
    put_u32(out, static_cast<std::uint32_t>(batch.front().width()));
    put_u32(out, static_cast<std::uint32_t>(batch.front().channels()));
    for (const FeatureMap& f : batch) {
        for (float v : f.data()) put_f32(out, v);
    }
    return out;
}

std::vector<FeatureMap> decode_feature_batch(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "features");
    r.magic("F3FM");
    const std::uint32_t count = r.dim();
    const int h = static_cast<int>(r.dim());
    const int w = static_cast<int>(r.dim());
    const int c = static_cast<int>(r.dim());
    std::vector<FeatureMap> batch;
    for (std::uint32_t i = 0; i < count; ++i) {
        FeatureMap f(h, w, c);
        r.floats(f.data());
        batch.push_back(std::move(f));
    }
    r.finish();
    return batch;
}

Kernel read_kernel(const std::filesystem::path& path) { return decode_kernel(read_file(path)); }

void write_kernel(const Kernel& k, const std::filesystem::path& path) {
    write_file_atomic(path, encode_kernel(k));
}

ProjectionMatrixSet read_projections(const std::filesystem::path& path) {
    return decode_projections(read_file(path));
}

void write_projections(const ProjectionMatrixSet& p, const std::filesystem::path& path) {
    write_file_atomic(path, encode_projections(p));
}

std::vector<FeatureMap> read_feature_batch(const std::filesystem::path& path) {
    return decode_feature_batch(read_file(path));
}

void write_feature_batch(std::span<const FeatureMap> batch, const std::filesystem::path& path) {
    write_file_atomic(path, encode_feature_batch(batch));
}

}  // namespace flow360
